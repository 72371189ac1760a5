//! Brute-force oracles and seeded instance generators.
//!
//! The oracles only use the formula types and their `evaluate` methods, so
//! they stay independent of the solver they are used to cross-check.

use bnncert::encode::{BnnNetwork, Layer, RobustnessQuery};
use bnncert::formula::{Assignment, Clause, Formula, Lit, Var, XorConstraint};
use bnncert::Verdict;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Largest number of variables the exhaustive oracles will sweep.
pub const MAX_ORACLE_VARS: u32 = 26;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OracleError {
    TooManyVars { vars: u32, cap: u32 },
}

impl std::fmt::Display for OracleError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OracleError::TooManyVars { vars, cap } => write!(f, "{vars} variables exceed the oracle cap of {cap}"),
        }
    }
}

impl std::error::Error for OracleError {}

enum Check<'a> {
    Clause(&'a Clause),
    Xor(&'a XorConstraint),
    Bnn(&'a bnncert::BnnConstraint),
}

impl Check<'_> {
    fn holds(&self, a: &Assignment) -> bool {
        match self {
            Check::Clause(c) => c.evaluate(a),
            Check::Xor(x) => x.evaluate(a),
            Check::Bnn(b) => b.evaluate(a),
        }
        .expect("constraint evaluated before its variables were assigned")
    }
}

/// Depth-first enumeration that evaluates each constraint as soon as its
/// last variable (in enumeration order) is assigned.
struct Sweep<'a> {
    order: Vec<Var>,
    /// `due[d]`: constraints whose variables are all among `order[..d]`.
    due: Vec<Vec<Check<'a>>>,
    split: usize,
    a: Assignment,
}

impl<'a> Sweep<'a> {
    fn new(f: &'a Formula, projection: &[Var]) -> Sweep<'a> {
        let mut order: Vec<Var> = projection.to_vec();
        order.sort();
        order.dedup();
        let split = order.len();
        let mut in_proj = vec![false; f.num_vars() as usize];
        for v in &order {
            in_proj[v.offset()] = true;
        }
        order.extend((1..=f.num_vars()).map(Var::new).filter(|v| !in_proj[v.offset()]));
        let mut depth_of = vec![0usize; f.num_vars() as usize];
        for (d, v) in order.iter().enumerate() {
            depth_of[v.offset()] = d + 1;
        }
        let last = |lits: &mut dyn Iterator<Item = Lit>| lits.map(|l| depth_of[l.var().offset()]).max().unwrap_or(0);
        let mut due: Vec<Vec<Check<'a>>> = (0..=order.len()).map(|_| Vec::new()).collect();
        for c in f.clauses() {
            due[last(&mut c.lits.iter().copied())].push(Check::Clause(c));
        }
        for x in f.xors() {
            due[last(&mut x.lits.iter().copied())].push(Check::Xor(x));
        }
        for b in f.bnns() {
            due[last(&mut b.lhs().iter().copied().chain(Some(b.output())))].push(Check::Bnn(b));
        }
        Sweep { order, due, split, a: Assignment::new(f.num_vars()) }
    }

    fn ok_at(&self, d: usize) -> bool {
        self.due[d].iter().all(|c| c.holds(&self.a))
    }

    /// Any extension of the current assignment below depth `d`.
    fn exists(&mut self, d: usize) -> bool {
        if d == self.order.len() {
            return true;
        }
        let v = self.order[d];
        for value in [false, true] {
            self.a.set(v, value);
            if self.ok_at(d + 1) && self.exists(d + 1) {
                return true;
            }
        }
        self.a.unset(v);
        false
    }

    fn count(&mut self, d: usize) -> u64 {
        if d == self.split {
            let found = self.exists(d);
            for v in &self.order[d..] {
                self.a.unset(*v);
            }
            return found as u64;
        }
        let v = self.order[d];
        let mut total = 0;
        for value in [false, true] {
            self.a.set(v, value);
            if self.ok_at(d + 1) {
                total += self.count(d + 1);
            }
        }
        self.a.unset(v);
        total
    }
}

/// Exact model count, projected onto `projection` when given (counting the
/// projected assignments that extend to a model).
pub fn brute_force_count(f: &Formula, projection: Option<&[Var]>) -> Result<u64, OracleError> {
    let proj: Vec<Var> = match projection {
        Some(p) => p.to_vec(),
        None => (1..=f.num_vars()).map(Var::new).collect(),
    };
    let swept = proj.len() as u32;
    if swept > MAX_ORACLE_VARS {
        return Err(OracleError::TooManyVars { vars: swept, cap: MAX_ORACLE_VARS });
    }
    let mut s = Sweep::new(f, &proj);
    if !s.ok_at(0) {
        return Ok(0);
    }
    Ok(s.count(0))
}

/// Satisfiability by exhaustive search; the model is total over `f`'s variables.
pub fn brute_force_sat(f: &Formula) -> Result<Verdict, OracleError> {
    if f.num_vars() > MAX_ORACLE_VARS {
        return Err(OracleError::TooManyVars { vars: f.num_vars(), cap: MAX_ORACLE_VARS });
    }
    let mut s = Sweep::new(f, &[]);
    if s.ok_at(0) && s.exists(0) {
        let a = s.a.clone();
        debug_assert_eq!(f.evaluate(&a), Ok(true));
        Ok(Verdict::Sat(a))
    } else {
        Ok(Verdict::Unsat)
    }
}

/// Whether `clause` holds in every model of `f` (checked over all assignments).
pub fn implies(f: &Formula, clause: &[Lit]) -> Result<bool, OracleError> {
    let mut g = f.clone();
    for &l in clause {
        g.add_clause(Clause::new(vec![!l])).expect("clause literal outside the formula");
    }
    Ok(!brute_force_sat(&g)?.is_sat())
}

/// Size limits for [`gen_formula`].
#[derive(Clone, Copy, Debug)]
pub struct GenParams {
    pub max_vars: u32,
    pub max_clauses: usize,
    pub max_bnns: usize,
    pub max_bnn_len: usize,
    pub max_xors: usize,
    pub max_xor_len: usize,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams { max_vars: 20, max_clauses: 30, max_bnns: 3, max_bnn_len: 8, max_xors: 2, max_xor_len: 6 }
    }
}

impl GenParams {
    /// Same limits without XOR constraints, as the counter requires.
    pub fn without_xors(self) -> GenParams {
        GenParams { max_xors: 0, ..self }
    }
}

fn random_lit(rng: &mut ChaCha8Rng, v: Var) -> Lit {
    Lit::new(v, rng.gen_bool(0.5))
}

fn distinct_vars(rng: &mut ChaCha8Rng, num_vars: u32, count: usize, exclude: Option<Var>) -> Vec<Var> {
    let mut pool: Vec<Var> = (1..=num_vars).map(Var::new).filter(|&v| Some(v) != exclude).collect();
    pool.shuffle(rng);
    pool.truncate(count);
    pool
}

/// Random CNF-XOR-BNN formula within `p`, deterministic in `seed`.
pub fn gen_formula(p: &GenParams, seed: u64) -> Formula {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(3..=p.max_vars.max(3));
    let mut f = Formula::new(n);
    let num_clauses = rng.gen_range(0..=p.max_clauses);
    for _ in 0..num_clauses {
        let len = match rng.gen_range(0..10) {
            0 => 1,
            1..=3 => 2,
            _ => 3,
        }
        .min(n as usize);
        let lits = distinct_vars(&mut rng, n, len, None).into_iter().map(|v| random_lit(&mut rng, v)).collect();
        f.add_clause(Clause::new(lits)).unwrap();
    }
    for _ in 0..rng.gen_range(0..=p.max_bnns) {
        let out = Var::new(rng.gen_range(1..=n));
        let len = rng.gen_range(1..=p.max_bnn_len.min(n as usize - 1));
        let lhs: Vec<Lit> = distinct_vars(&mut rng, n, len, Some(out)).into_iter().map(|v| random_lit(&mut rng, v)).collect();
        let cutoff = rng.gen_range(0..=len as i64 + 1);
        let out = random_lit(&mut rng, out);
        f.add_bnn(lhs, cutoff, out).unwrap();
    }
    for _ in 0..rng.gen_range(0..=p.max_xors) {
        let len = rng.gen_range(1..=p.max_xor_len.min(n as usize));
        let lits = distinct_vars(&mut rng, n, len, None).into_iter().map(|v| random_lit(&mut rng, v)).collect();
        f.add_xor(XorConstraint::new(lits, rng.gen_bool(0.5))).unwrap();
    }
    f
}

/// Formula whose BNN outputs get assigned False before, between or after
/// their LHS literals. Output variables take the lowest indices so that,
/// with the solver's default negative phase, they are decided first.
/// The first constraint's output is always forced False by a unit clause.
pub fn gen_adversarial_bnn(seed: u64) -> Formula {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let num_bnns = rng.gen_range(1..=3u32);
    let num_lhs_vars = rng.gen_range(4..=14u32);
    let n = num_bnns + num_lhs_vars;
    let mut f = Formula::new(n);
    let lhs_var = |rng: &mut ChaCha8Rng| Var::new(rng.gen_range(num_bnns + 1..=n));
    let mut units = Vec::new();
    for i in 0..num_bnns {
        let out = Var::new(i + 1);
        let len = rng.gen_range(2..=(num_lhs_vars as usize).min(8));
        let mut pool: Vec<Var> = (num_bnns + 1..=n).map(Var::new).collect();
        pool.shuffle(&mut rng);
        let lhs: Vec<Lit> = pool[..len].iter().map(|&v| random_lit(&mut rng, v)).collect();
        let cutoff = rng.gen_range(1..=len as i64);
        // Pattern 0: out false at level 0; 1: out decided false first;
        // 2: out tied to an LHS variable, so it is set between LHS literals.
        let pattern = if i == 0 { 0 } else { rng.gen_range(0..3) };
        match pattern {
            0 => units.push(Clause::new(vec![out.negative()])),
            2 => {
                let other = pool[rng.gen_range(0..len)];
                f.add_clause(Clause::new(vec![out.negative(), random_lit(&mut rng, other)])).unwrap();
            }
            _ => {}
        }
        f.add_bnn(lhs, cutoff, out.positive()).unwrap();
    }
    for u in units {
        f.add_clause(u).unwrap();
    }
    for _ in 0..rng.gen_range(0..=2 * num_lhs_vars) {
        let a = lhs_var(&mut rng);
        let mut b = lhs_var(&mut rng);
        while b == a {
            b = lhs_var(&mut rng);
        }
        let mut lits = vec![random_lit(&mut rng, a), random_lit(&mut rng, b)];
        if rng.gen_bool(0.5) {
            let c = lhs_var(&mut rng);
            if c != a && c != b {
                lits.push(random_lit(&mut rng, c));
            }
        }
        f.add_clause(Clause::new(lits)).unwrap();
    }
    if rng.gen_bool(0.3) {
        let vars = distinct_vars(&mut rng, n, 3, None);
        f.add_xor(XorConstraint::new(vars.into_iter().map(|v| v.positive()).collect(), rng.gen_bool(0.5))).unwrap();
    }
    f
}

/// Random network with layer widths `widths[0]` (inputs) through
/// `widths.last()` (outputs). Biases stay near zero so neurons are not
/// constant.
pub fn gen_network(widths: &[usize], seed: u64) -> BnnNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = widths
        .windows(2)
        .map(|w| {
            let (n, m) = (w[0], w[1]);
            let weights = (0..m).map(|_| (0..n).map(|_| if rng.gen_bool(0.5) { 1 } else { -1 }).collect()).collect();
            let spread = (n as i64 / 4).max(1);
            let bias = (0..m).map(|_| rng.gen_range(-spread..=spread)).collect();
            Layer { weights, bias }
        })
        .collect();
    BnnNetwork { layers }
}

/// Robustness query around a random anchor input, with the anchor output
/// set to the network's own answer there.
pub fn gen_robustness_query(widths: &[usize], radius: usize, seed: u64) -> RobustnessQuery {
    let network = gen_network(widths, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED);
    let anchor_input: Vec<bool> = (0..widths[0]).map(|_| rng.gen_bool(0.5)).collect();
    let anchor_output = sign_forward(&network, &anchor_input);
    RobustnessQuery { network, anchor_input, anchor_output, radius }
}

/// Network evaluation straight from `y = [w . x + b >= 0]`.
pub fn sign_forward(net: &BnnNetwork, input: &[bool]) -> Vec<bool> {
    let mut x: Vec<i64> = input.iter().map(|&b| b as i64).collect();
    for layer in &net.layers {
        x = layer
            .weights
            .iter()
            .zip(&layer.bias)
            .map(|(row, b)| {
                let s: i64 = row.iter().zip(&x).map(|(w, xi)| w * xi).sum();
                (s + b >= 0) as i64
            })
            .collect();
    }
    x.into_iter().map(|v| v == 1).collect()
}

/// Number of inputs within the query's Hamming radius whose network output
/// differs from the anchor output, by visiting every point of the ball.
pub fn ball_adversarial_count(q: &RobustnessQuery) -> u64 {
    fn visit(q: &RobustnessQuery, x: &mut Vec<bool>, from: usize, budget: usize) -> u64 {
        let mut count = (sign_forward(&q.network, x) != q.anchor_output) as u64;
        if budget == 0 {
            return count;
        }
        for i in from..x.len() {
            x[i] = !x[i];
            count += visit(q, x, i + 1, budget - 1);
            x[i] = !x[i];
        }
        count
    }
    let mut x = q.anchor_input.clone();
    visit(q, &mut x, 0, q.radius)
}
