//! Checking counting certificates.
//!
//! Stored solutions and witnesses are checked by direct evaluation. The
//! claim that a cell holds no further solution is re-derived: a fresh
//! proof-logging solver refutes the formula conjoined with the round's hash
//! constraints and blocking clauses for the recorded cell, and the proof is
//! elaborated and passed to the XLRUP checker.
//!
//! The trusted base is therefore the formula code, the elaborator and the
//! XLRUP checker. The solver only has to produce a proof that those accept;
//! a wrong answer from it can cause an inconclusive or rejected result but
//! never a certified one. Whether the hash constraints were drawn at random
//! is not checked.

use std::fmt;

use num_bigint::BigUint;
use rayon::prelude::*;

use crate::check::{check_xlrup, Outcome};
use crate::count::{median, CountCertificate, CountParams, RoundRecord};
use crate::elaborate::elaborate;
use crate::formula::{Assignment, Clause, Formula, Lit, Var, XorConstraint};
use crate::proof::ProofSink;
use crate::solver::{SolveError, Solver, SolverConfig, Verdict};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CertOutcome {
    Certified(BigUint),
    Rejected(String),
    /// A solver budget ran out before an obligation was settled.
    Inconclusive(String),
}

impl fmt::Display for CertOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CertOutcome::Certified(v) => write!(f, "CERTIFIED {v}"),
            CertOutcome::Rejected(why) => write!(f, "REJECTED: {why}"),
            CertOutcome::Inconclusive(why) => write!(f, "INCONCLUSIVE: {why}"),
        }
    }
}

enum Obligation {
    Holds,
    Fails(String),
    Unknown(String),
}

fn check_solution(f: &Formula, a: &Assignment, xors: &[XorConstraint]) -> Result<(), String> {
    if a.len() > f.num_vars() as usize {
        return Err(format!("assignment mentions variable {} beyond the formula", a.len()));
    }
    match f.evaluate(a) {
        Ok(true) => {}
        Ok(false) => return Err("assignment violates the formula".into()),
        Err(e) => return Err(format!("assignment is not total: {e}")),
    }
    match xors.iter().position(|x| x.evaluate(a) != Ok(true)) {
        Some(i) => Err(format!("assignment violates hash constraint {}", i + 1)),
        None => Ok(()),
    }
}

fn check_distinct(list: &[Assignment], projection: &[Var]) -> Result<(), String> {
    let mut keys: Vec<Vec<Option<bool>>> = list.iter().map(|a| projection.iter().map(|&v| a.value(v)).collect()).collect();
    keys.sort();
    if keys.windows(2).any(|w| w[0] == w[1]) {
        return Err("two assignments agree on the projection".into());
    }
    Ok(())
}

/// The direct-evaluation checks of one round.
fn check_round(f: &Formula, r: &RoundRecord, thresh: usize, projection: &[Var]) -> Result<(), String> {
    if r.xors.len() != r.m_star {
        return Err(format!("level {} but {} hash constraints recorded", r.m_star, r.xors.len()));
    }
    for x in &r.xors {
        if let Some(l) = x.lits.iter().find(|l| l.var().index() > f.num_vars()) {
            return Err(format!("hash constraint mentions variable {} beyond the formula", l.var().index()));
        }
    }
    if r.cell.len() >= thresh {
        return Err(format!("cell holds {} solutions, not fewer than thresh {thresh}", r.cell.len()));
    }
    for (i, a) in r.cell.iter().enumerate() {
        check_solution(f, a, &r.xors).map_err(|e| format!("cell solution {}: {e}", i + 1))?;
    }
    check_distinct(&r.cell, projection).map_err(|e| format!("cell solutions: {e}"))?;
    if r.m_star == 0 {
        if !r.witnesses.is_empty() {
            return Err("witnesses recorded at level 0".into());
        }
    } else {
        if r.witnesses.len() != thresh {
            return Err(format!("{} lower witnesses, expected {thresh}", r.witnesses.len()));
        }
        for (i, a) in r.witnesses.iter().enumerate() {
            check_solution(f, a, &r.xors[..r.m_star - 1]).map_err(|e| format!("lower witness {}: {e}", i + 1))?;
        }
        check_distinct(&r.witnesses, projection).map_err(|e| format!("lower witnesses: {e}"))?;
    }
    let estimate = BigUint::from(r.cell.len()) << r.m_star;
    if r.estimate != estimate {
        return Err(format!("estimate {} but the cell gives {estimate}", r.estimate));
    }
    Ok(())
}

/// `f` with the hash constraints and one blocking clause per cell solution.
pub fn exhaustiveness_formula(f: &Formula, xors: &[XorConstraint], cell: &[Assignment]) -> Formula {
    let mut g = f.clone();
    for x in xors {
        // An all-zero hash row with parity 0 constrains nothing, and the
        // proof formats cannot write an empty XOR with even parity.
        if x.canonical() == (Vec::new(), false) {
            continue;
        }
        g.add_xor(x.clone()).expect("hash constraint within the formula");
    }
    let projection = f.projection();
    for a in cell {
        let lits: Vec<Lit> = projection.iter().map(|&v| Lit::new(v, a.value(v) == Some(true))).collect();
        g.add_clause(Clause::new(lits)).expect("blocking clause within the formula");
    }
    g
}

fn settle(f: &Formula, xors: &[XorConstraint], cell: &[Assignment], config: SolverConfig) -> Obligation {
    let g = exhaustiveness_formula(f, xors, cell);
    let mut frat = Vec::new();
    let verdict = Solver::with_proof(&g, config, ProofSink::new(&mut frat)).map_err(SolveError::from).and_then(|mut s| {
        let v = s.solve(&[])?;
        if let Some(mut p) = s.take_proof() {
            p.flush()?;
        }
        Ok(v)
    });
    match verdict {
        Err(SolveError::BudgetExhausted) => Obligation::Unknown("solver budget exhausted".into()),
        Err(e) => Obligation::Fails(format!("proof logging failed: {e}")),
        Ok(Verdict::Sat(_)) => Obligation::Fails("the cell has a solution outside the recorded list".into()),
        Ok(Verdict::Unsat) => {
            let frat = match String::from_utf8(frat) {
                Ok(t) => t,
                Err(_) => return Obligation::Fails("proof is not valid text".into()),
            };
            let xlrup = match elaborate(&g, &frat) {
                Ok(p) => p,
                Err(e) => return Obligation::Fails(format!("proof elaboration failed: {e}")),
            };
            match check_xlrup(&g, &xlrup) {
                Ok(Outcome::Verified) => Obligation::Holds,
                Ok(o) => Obligation::Fails(format!("refutation {o}")),
                Err(e) => Obligation::Fails(format!("refutation unreadable: {e}")),
            }
        }
    }
}

/// Checks `cert` against `f`. `config` bounds each regenerated refutation.
pub fn check_certificate(f: &Formula, cert: &CountCertificate, config: SolverConfig) -> CertOutcome {
    let reject = CertOutcome::Rejected;
    if !f.xors().is_empty() {
        return reject("formula contains XOR constraints".into());
    }
    let params = match CountParams::new(cert.epsilon, cert.delta, cert.seed) {
        Ok(p) => p,
        Err(e) => return reject(e.to_string()),
    };
    if cert.thresh != params.thresh() || cert.num_rounds != params.rounds() {
        return reject(format!(
            "parameters give thresh {} and {} rounds, certificate states {} and {}",
            params.thresh(),
            params.rounds(),
            cert.thresh,
            cert.num_rounds
        ));
    }
    if cert.rounds.len() != cert.num_rounds {
        return reject(format!("{} rounds recorded, expected {}", cert.rounds.len(), cert.num_rounds));
    }
    let projection = f.projection();
    for (i, r) in cert.rounds.iter().enumerate() {
        if r.index != i + 1 {
            return reject(format!("round {} recorded with index {}", i + 1, r.index));
        }
        if let Err(e) = check_round(f, r, cert.thresh, &projection) {
            return reject(format!("round {}: {e}", r.index));
        }
    }

    // Rounds with identical cells share one obligation.
    let mut unique: Vec<&RoundRecord> = Vec::new();
    let mut owner = Vec::with_capacity(cert.rounds.len());
    for r in &cert.rounds {
        match unique.iter().position(|u| u.xors == r.xors && u.cell == r.cell) {
            Some(j) => owner.push(j),
            None => {
                owner.push(unique.len());
                unique.push(r);
            }
        }
    }
    let results: Vec<Obligation> = unique.par_iter().map(|r| settle(f, &r.xors, &r.cell, config.clone())).collect();
    let mut inconclusive = None;
    for (r, &j) in cert.rounds.iter().zip(&owner) {
        match &results[j] {
            Obligation::Holds => {}
            Obligation::Fails(why) => return reject(format!("round {}: exhaustiveness: {why}", r.index)),
            Obligation::Unknown(why) => {
                inconclusive.get_or_insert_with(|| format!("round {}: {why}", r.index));
            }
        }
    }
    if let Some(why) = inconclusive {
        return CertOutcome::Inconclusive(why);
    }

    let value = median(cert.rounds.iter().map(|r| r.estimate.clone()).collect());
    if value != cert.estimate {
        return reject(format!("final estimate {} but the median of the rounds is {value}", cert.estimate));
    }
    CertOutcome::Certified(value)
}
