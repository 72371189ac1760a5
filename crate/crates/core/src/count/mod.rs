//! Hashing-based approximate model counting.
//!
//! Each round draws random XOR constraints over the projection variables and
//! looks for the smallest number `m` of them under which the surviving cell
//! holds fewer than `thresh` projected solutions. The round estimate is the
//! cell size times `2^m`; the result is the median over all rounds. Every
//! round is recorded in a [`CountCertificate`].

mod cert;
mod rng;

pub use cert::{parse_certificate, write_certificate, CertParseError, CountCertificate, RoundRecord};
pub use rng::SplitMix64;

use std::collections::HashMap;

use num_bigint::BigUint;
use rayon::prelude::*;

use crate::formula::{Assignment, Formula, Lit, Var, XorConstraint};
use crate::solver::{SolveError, Solver, SolverConfig, Verdict};

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum CountError {
    #[error("formula contains XOR constraints, which would mix with the hash constraints")]
    HasXors,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("solver budget exhausted")]
    Budget,
    #[error("internal error: {0}")]
    Internal(String),
}

impl From<SolveError> for CountError {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::BudgetExhausted => CountError::Budget,
            SolveError::Proof(p) => CountError::Internal(p.to_string()),
        }
    }
}

/// Tolerance, confidence and seed of a counting run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CountParams {
    pub epsilon: f64,
    pub delta: f64,
    pub seed: u64,
}

impl Default for CountParams {
    fn default() -> Self {
        CountParams { epsilon: 0.8, delta: 0.2, seed: 1 }
    }
}

impl CountParams {
    pub fn new(epsilon: f64, delta: f64, seed: u64) -> Result<CountParams, CountError> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(CountError::InvalidParams(format!("epsilon must be positive, got {epsilon}")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(CountError::InvalidParams(format!("delta must lie in (0, 1), got {delta}")));
        }
        Ok(CountParams { epsilon, delta, seed })
    }

    /// Cell-size cap: `ceil(1 + 9.84 (1 + eps/(1+eps)) (1 + 1/eps)^2)`.
    pub fn thresh(&self) -> usize {
        let e = self.epsilon;
        (1.0 + 9.84 * (1.0 + e / (1.0 + e)) * (1.0 + 1.0 / e).powi(2)).ceil() as usize
    }

    /// Number of rounds: the smallest odd integer at least `17 log2(3/delta)`.
    pub fn rounds(&self) -> usize {
        let t = (17.0 * (3.0 / self.delta).log2()).ceil() as usize;
        t.max(1) | 1
    }
}

/// Draws one hash constraint: each variable joins with probability 1/2
/// (one bit per variable, in order), then one bit for the parity.
pub fn sample_xor(sampling_set: &[Var], rng: &mut SplitMix64) -> XorConstraint {
    let lits = sampling_set.iter().filter(|_| rng.next_bit()).map(|v| v.positive()).collect();
    XorConstraint::new(lits, rng.next_bit())
}

/// Solutions found by [`bounded_enumerate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Enumeration {
    pub solutions: Vec<Assignment>,
    /// True iff the solver proved that no further solution exists.
    pub exhausted: bool,
}

/// Incremental solver over `f` plus hash constraints guarded by activation
/// variables: hash constraint `i` is enforced while its activation variable
/// is assumed false.
struct CellSolver {
    solver: Solver<'static>,
    num_vars: u32,
    projection: Vec<Var>,
    xors: Vec<XorConstraint>,
    activation: Vec<Var>,
}

impl CellSolver {
    fn new(f: &Formula, config: SolverConfig) -> CellSolver {
        CellSolver {
            solver: Solver::new(f, config),
            num_vars: f.num_vars(),
            projection: f.projection(),
            xors: Vec::new(),
            activation: Vec::new(),
        }
    }

    fn push_xor(&mut self, x: XorConstraint) {
        let act = self.solver.add_var();
        let (mut vars, rhs) = x.canonical();
        vars.push(act);
        self.solver.add_xor(&vars, rhs);
        self.xors.push(x);
        self.activation.push(act);
    }

    /// Up to `limit` solutions of `f` and the first `m` hash constraints,
    /// pairwise distinct on the projection.
    fn enumerate(&mut self, f: &Formula, m: usize, limit: usize) -> Result<Enumeration, CountError> {
        let block = self.solver.add_var();
        let mut assumptions: Vec<Lit> = self.activation[..m].iter().map(|v| v.negative()).collect();
        assumptions.push(block.negative());
        let mut solutions = Vec::new();
        let mut exhausted = false;
        while solutions.len() < limit {
            match self.solver.solve(&assumptions)? {
                Verdict::Sat(model) => {
                    let a = model.truncated(self.num_vars);
                    let holds = f.evaluate(&a) == Ok(true) && self.xors[..m].iter().all(|x| x.evaluate(&a) == Ok(true));
                    if !holds {
                        return Err(CountError::Internal("solver returned a non-solution".into()));
                    }
                    let mut blocking = vec![block.positive()];
                    blocking.extend(self.projection.iter().map(|&v| Lit::new(v, a.value(v) == Some(true))));
                    self.solver.add_clause(&blocking);
                    solutions.push(a);
                }
                Verdict::Unsat => {
                    exhausted = true;
                    break;
                }
            }
        }
        self.solver.add_clause(&[block.positive()]);
        Ok(Enumeration { solutions, exhausted })
    }
}

/// Solutions of `f` and `xors` found by repeated solving with projected
/// blocking clauses, stopping after `limit` solutions or when none remain.
pub fn bounded_enumerate(
    f: &Formula,
    xors: &[XorConstraint],
    limit: usize,
    config: SolverConfig,
) -> Result<Enumeration, CountError> {
    assert!(limit >= 1);
    let mut cs = CellSolver::new(f, config);
    for x in xors {
        cs.push_xor(x.clone());
    }
    cs.enumerate(f, xors.len(), limit)
}

struct Round<'f> {
    f: &'f Formula,
    thresh: usize,
    rng: SplitMix64,
    cs: CellSolver,
    cells: HashMap<usize, Enumeration>,
}

impl<'f> Round<'f> {
    fn new(f: &'f Formula, params: &CountParams, index: usize, config: SolverConfig) -> Round<'f> {
        Round {
            f,
            thresh: params.thresh(),
            rng: SplitMix64::for_round(params.seed, index as u64),
            cs: CellSolver::new(f, config),
            cells: HashMap::new(),
        }
    }

    /// Whether the cell at level `m` holds at least `thresh` solutions.
    fn big(&mut self, m: usize) -> Result<bool, CountError> {
        if !self.cells.contains_key(&m) {
            while self.cs.xors.len() < m {
                let x = sample_xor(&self.cs.projection, &mut self.rng);
                self.cs.push_xor(x);
            }
            let e = self.cs.enumerate(self.f, m, self.thresh)?;
            self.cells.insert(m, e);
        }
        Ok(!self.cells[&m].exhausted)
    }

    /// The smallest `m >= 1` whose cell is small, given that level 0 is big.
    /// Scans upward without a hint; otherwise gallops away from the hint and
    /// bisects.
    fn find_level(&mut self, hint: Option<usize>) -> Result<usize, CountError> {
        let cap = self.cs.projection.len() + 64;
        let (mut lo, mut hi) = match hint {
            None => {
                let mut m = 1;
                while self.big(m)? {
                    m += 1;
                    if m > cap {
                        return Err(CountError::Internal("hash constraints failed to split the solution space".into()));
                    }
                }
                return Ok(m);
            }
            Some(h) if self.big(h)? => {
                let (mut lo, mut step) = (h, 1);
                loop {
                    let m = lo + step;
                    if m > cap {
                        return Err(CountError::Internal("hash constraints failed to split the solution space".into()));
                    }
                    if self.big(m)? {
                        lo = m;
                        step *= 2;
                    } else {
                        break (lo, m);
                    }
                }
            }
            Some(h) => {
                let (mut hi, mut step) = (h, 1);
                loop {
                    let m = hi.saturating_sub(step);
                    if m == 0 {
                        break (0, hi);
                    }
                    if self.big(m)? {
                        break (m, hi);
                    }
                    hi = m;
                    step *= 2;
                }
            }
        };
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.big(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi)
    }

    fn record(mut self, index: usize, m_star: usize, base: &Enumeration) -> RoundRecord {
        let cell = self.cells.remove(&m_star).expect("level probed").solutions;
        let witnesses = if m_star == 1 { base.solutions.clone() } else { self.cells.remove(&(m_star - 1)).expect("level probed").solutions };
        let estimate = BigUint::from(cell.len()) << m_star;
        RoundRecord { index, m_star, xors: self.cs.xors[..m_star].to_vec(), cell, witnesses, estimate }
    }
}

/// Estimates the number of models of `f`, projected onto its sampling set
/// when it has one. Returns the estimate and a certificate of the run.
pub fn approx_count(
    f: &Formula,
    params: &CountParams,
    config: SolverConfig,
) -> Result<(BigUint, CountCertificate), CountError> {
    if !f.xors().is_empty() {
        return Err(CountError::HasXors);
    }
    let params = CountParams::new(params.epsilon, params.delta, params.seed)?;
    let thresh = params.thresh();
    let t = params.rounds();

    let base = CellSolver::new(f, config.clone()).enumerate(f, 0, thresh)?;
    let rounds: Vec<RoundRecord> = if base.exhausted {
        (1..=t)
            .map(|i| RoundRecord {
                index: i,
                m_star: 0,
                xors: Vec::new(),
                cell: base.solutions.clone(),
                witnesses: Vec::new(),
                estimate: BigUint::from(base.solutions.len()),
            })
            .collect()
    } else {
        let mut first = Round::new(f, &params, 1, config.clone());
        let m1 = first.find_level(None)?;
        let r1 = first.record(1, m1, &base);
        let rest: Result<Vec<RoundRecord>, CountError> = (2..=t)
            .into_par_iter()
            .map(|i| {
                let mut r = Round::new(f, &params, i, config.clone());
                let m = r.find_level(Some(m1))?;
                Ok(r.record(i, m, &base))
            })
            .collect();
        std::iter::once(r1).chain(rest?).collect()
    };

    let estimate = median(rounds.iter().map(|r| r.estimate.clone()).collect());
    let cert = CountCertificate {
        epsilon: params.epsilon,
        delta: params.delta,
        seed: params.seed,
        num_rounds: t,
        thresh,
        rounds,
        estimate: estimate.clone(),
    };
    Ok((estimate, cert))
}

/// Middle element of an odd-length list (upper median otherwise).
pub fn median(mut values: Vec<BigUint>) -> BigUint {
    values.sort();
    values.get(values.len() / 2).cloned().unwrap_or_default()
}
