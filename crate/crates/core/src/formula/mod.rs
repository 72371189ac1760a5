//! CNF-XOR-BNN formulas: variables, literals, the three constraint kinds and
//! the extended DIMACS reader/writer.

mod dimacs;

pub use dimacs::{parse_formula, parse_formula_with_warnings, write_formula, ParseError, ParseErrorKind, ParseWarning};

use std::fmt;
use std::ops::Not;

use thiserror::Error;

/// A Boolean variable, 1-based as in DIMACS.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Var(u32);

impl Var {
    /// Panics if `index` is zero.
    pub fn new(index: u32) -> Var {
        assert!(index >= 1, "variable indices are 1-based");
        Var(index)
    }

    pub fn index(self) -> u32 {
        self.0
    }

    /// Zero-based position, for array-indexed tables.
    pub fn offset(self) -> usize {
        (self.0 - 1) as usize
    }

    pub fn from_offset(offset: usize) -> Var {
        Var(offset as u32 + 1)
    }

    pub fn positive(self) -> Lit {
        Lit::new(self, false)
    }

    pub fn negative(self) -> Lit {
        Lit::new(self, true)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A literal, stored as `2 * (var - 1) + negated` so that it can index
/// per-literal tables directly.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lit(u32);

impl Lit {
    pub fn new(var: Var, negated: bool) -> Lit {
        Lit(((var.0 - 1) << 1) | negated as u32)
    }

    /// Converts a signed DIMACS integer. Panics on zero.
    pub fn from_dimacs(value: i64) -> Lit {
        assert!(value != 0, "0 is not a literal");
        Lit::new(Var(value.unsigned_abs() as u32), value < 0)
    }

    pub fn to_dimacs(self) -> i64 {
        let v = self.var().0 as i64;
        if self.is_negated() {
            -v
        } else {
            v
        }
    }

    pub fn var(self) -> Var {
        Var((self.0 >> 1) + 1)
    }

    pub fn is_negated(self) -> bool {
        self.0 & 1 == 1
    }

    pub fn code(self) -> usize {
        self.0 as usize
    }

    pub fn from_code(code: usize) -> Lit {
        Lit(code as u32)
    }

    /// Truth value of this literal when its variable takes `value`.
    pub fn under(self, value: bool) -> bool {
        value != self.is_negated()
    }
}

impl Not for Lit {
    type Output = Lit;
    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

impl fmt::Debug for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Error)]
pub enum EvalError {
    #[error("variable {0} is unassigned")]
    Unassigned(Var),
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum FormulaError {
    #[error("variable {var} exceeds the declared variable count {num_vars}")]
    VarOutOfRange { var: u32, num_vars: u32 },
    #[error("variable {0} occurs more than once in a BNN left-hand side")]
    DuplicateBnnVar(Var),
    #[error("output variable {0} occurs in its own BNN left-hand side")]
    OutputInLhs(Var),
}

/// A disjunction of literals. The empty clause is unsatisfiable.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Default)]
pub struct Clause {
    pub lits: Vec<Lit>,
}

impl Clause {
    pub fn new(lits: Vec<Lit>) -> Clause {
        Clause { lits }
    }

    pub fn from_dimacs(lits: &[i64]) -> Clause {
        Clause::new(lits.iter().map(|&l| Lit::from_dimacs(l)).collect())
    }

    pub fn evaluate(&self, a: &Assignment) -> Result<bool, EvalError> {
        let mut sat = false;
        for &l in &self.lits {
            sat |= a.lit_value(l)?;
        }
        Ok(sat)
    }

    /// Sorted, deduplicated copy; `None` when the clause is a tautology.
    pub fn normalized(&self) -> Option<Clause> {
        let mut lits = self.lits.clone();
        lits.sort();
        lits.dedup();
        if lits.windows(2).any(|w| w[0].var() == w[1].var()) {
            return None;
        }
        Some(Clause { lits })
    }
}

/// Parity constraint: the XOR of `lits` equals `rhs`.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct XorConstraint {
    pub lits: Vec<Lit>,
    pub rhs: bool,
}

impl XorConstraint {
    pub fn new(lits: Vec<Lit>, rhs: bool) -> XorConstraint {
        XorConstraint { lits, rhs }
    }

    /// Positive-variable form: sorted variables (pairs cancel) and a parity
    /// adjusted once per negated literal.
    pub fn canonical(&self) -> (Vec<Var>, bool) {
        let mut rhs = self.rhs;
        let mut vars: Vec<Var> = Vec::with_capacity(self.lits.len());
        for &l in &self.lits {
            rhs ^= l.is_negated();
            vars.push(l.var());
        }
        vars.sort();
        let mut out: Vec<Var> = Vec::with_capacity(vars.len());
        for v in vars {
            if out.last() == Some(&v) {
                out.pop();
            } else {
                out.push(v);
            }
        }
        (out, rhs)
    }

    pub fn evaluate(&self, a: &Assignment) -> Result<bool, EvalError> {
        let mut parity = false;
        for &l in &self.lits {
            parity ^= a.lit_value(l)?;
        }
        Ok(parity == self.rhs)
    }
}

/// Conditional cardinality constraint `output <-> (#true lhs >= cutoff)`.
///
/// Values of this type are normalized: `1 <= cutoff <= lhs.len()`, the LHS
/// variables are pairwise distinct and the output variable is not among them.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct BnnConstraint {
    lhs: Vec<Lit>,
    cutoff: u32,
    output: Lit,
}

/// Result of building a BNN constraint: degenerate cutoffs fold to a unit.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum BnnNormal {
    Bnn(BnnConstraint),
    Unit(Lit),
}

impl BnnConstraint {
    pub fn build(lhs: Vec<Lit>, cutoff: i64, output: Lit) -> Result<BnnNormal, FormulaError> {
        let mut seen: Vec<Var> = lhs.iter().map(|l| l.var()).collect();
        seen.sort();
        if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
            return Err(FormulaError::DuplicateBnnVar(w[0]));
        }
        // A degenerate cutoff fixes the output whatever the LHS holds.
        if cutoff <= 0 {
            return Ok(BnnNormal::Unit(output));
        }
        if cutoff > lhs.len() as i64 {
            return Ok(BnnNormal::Unit(!output));
        }
        if seen.binary_search(&output.var()).is_ok() {
            return Err(FormulaError::OutputInLhs(output.var()));
        }
        Ok(BnnNormal::Bnn(BnnConstraint { lhs, cutoff: cutoff as u32, output }))
    }

    pub fn lhs(&self) -> &[Lit] {
        &self.lhs
    }

    pub fn cutoff(&self) -> u32 {
        self.cutoff
    }

    pub fn output(&self) -> Lit {
        self.output
    }

    pub fn len(&self) -> usize {
        self.lhs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lhs.is_empty()
    }

    pub fn evaluate(&self, a: &Assignment) -> Result<bool, EvalError> {
        let mut count = 0u32;
        for &l in &self.lhs {
            count += a.lit_value(l)? as u32;
        }
        Ok(a.lit_value(self.output)? == (count >= self.cutoff))
    }
}

/// Position of a constraint in its kind-specific list.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ConstraintRef {
    Clause(usize),
    Xor(usize),
    Bnn(usize),
}

/// Conjunction of clauses, XOR constraints and BNN constraints.
///
/// Each kind is numbered in its own 1-based id space by insertion order;
/// proofs refer to constraints through those ids.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Formula {
    num_vars: u32,
    clauses: Vec<Clause>,
    xors: Vec<XorConstraint>,
    bnns: Vec<BnnConstraint>,
    sampling_set: Option<Vec<Var>>,
    order: Vec<ConstraintRef>,
}

impl Formula {
    pub fn new(num_vars: u32) -> Formula {
        Formula { num_vars, ..Default::default() }
    }

    pub fn num_vars(&self) -> u32 {
        self.num_vars
    }

    /// Grows the variable count; used by encoders that allocate fresh variables.
    pub fn set_num_vars(&mut self, num_vars: u32) {
        assert!(num_vars >= self.max_var_in_use());
        self.num_vars = num_vars;
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn xors(&self) -> &[XorConstraint] {
        &self.xors
    }

    pub fn bnns(&self) -> &[BnnConstraint] {
        &self.bnns
    }

    pub fn sampling_set(&self) -> Option<&[Var]> {
        self.sampling_set.as_deref()
    }

    /// The projection variables: the sampling set, or every variable.
    pub fn projection(&self) -> Vec<Var> {
        match &self.sampling_set {
            Some(s) => s.clone(),
            None => (1..=self.num_vars).map(Var::new).collect(),
        }
    }

    /// Constraints in insertion order.
    pub fn order(&self) -> &[ConstraintRef] {
        &self.order
    }

    pub fn num_constraints(&self) -> usize {
        self.clauses.len() + self.xors.len() + self.bnns.len()
    }

    fn check_lits(&self, lits: &[Lit]) -> Result<(), FormulaError> {
        for l in lits {
            if l.var().index() > self.num_vars {
                return Err(FormulaError::VarOutOfRange { var: l.var().index(), num_vars: self.num_vars });
            }
        }
        Ok(())
    }

    pub fn add_clause(&mut self, clause: Clause) -> Result<(), FormulaError> {
        self.check_lits(&clause.lits)?;
        self.order.push(ConstraintRef::Clause(self.clauses.len()));
        self.clauses.push(clause);
        Ok(())
    }

    pub fn add_xor(&mut self, xor: XorConstraint) -> Result<(), FormulaError> {
        self.check_lits(&xor.lits)?;
        self.order.push(ConstraintRef::Xor(self.xors.len()));
        self.xors.push(xor);
        Ok(())
    }

    /// Adds `output <-> (sum lhs >= cutoff)`; degenerate cutoffs become a
    /// unit clause on the output.
    pub fn add_bnn(&mut self, lhs: Vec<Lit>, cutoff: i64, output: Lit) -> Result<(), FormulaError> {
        self.check_lits(&lhs)?;
        self.check_lits(&[output])?;
        match BnnConstraint::build(lhs, cutoff, output)? {
            BnnNormal::Bnn(b) => {
                self.order.push(ConstraintRef::Bnn(self.bnns.len()));
                self.bnns.push(b);
            }
            BnnNormal::Unit(l) => {
                self.order.push(ConstraintRef::Clause(self.clauses.len()));
                self.clauses.push(Clause::new(vec![l]));
            }
        }
        Ok(())
    }

    pub fn add_normalized_bnn(&mut self, bnn: BnnConstraint) -> Result<(), FormulaError> {
        self.check_lits(bnn.lhs())?;
        self.check_lits(&[bnn.output()])?;
        self.order.push(ConstraintRef::Bnn(self.bnns.len()));
        self.bnns.push(bnn);
        Ok(())
    }

    /// Sets the projection variables (sorted and deduplicated).
    pub fn set_sampling_set(&mut self, vars: Vec<Var>) -> Result<(), FormulaError> {
        let mut vars = vars;
        vars.sort();
        vars.dedup();
        if let Some(v) = vars.last() {
            if v.index() > self.num_vars {
                return Err(FormulaError::VarOutOfRange { var: v.index(), num_vars: self.num_vars });
            }
        }
        self.sampling_set = Some(vars);
        Ok(())
    }

    pub fn clear_sampling_set(&mut self) {
        self.sampling_set = None;
    }

    fn max_var_in_use(&self) -> u32 {
        let lits = self
            .clauses
            .iter()
            .flat_map(|c| c.lits.iter())
            .chain(self.xors.iter().flat_map(|x| x.lits.iter()))
            .chain(self.bnns.iter().flat_map(|b| b.lhs.iter().chain(std::iter::once(&b.output))));
        let m = lits.map(|l| l.var().index()).max().unwrap_or(0);
        let s = self.sampling_set.as_ref().and_then(|s| s.last()).map_or(0, |v| v.index());
        m.max(s)
    }

    /// True iff `a` satisfies every clause, XOR and BNN constraint.
    pub fn evaluate(&self, a: &Assignment) -> Result<bool, EvalError> {
        for v in 1..=self.num_vars {
            if a.value(Var::new(v)).is_none() {
                return Err(EvalError::Unassigned(Var::new(v)));
            }
        }
        for c in &self.clauses {
            if !c.evaluate(a)? {
                return Ok(false);
            }
        }
        for x in &self.xors {
            if !x.evaluate(a)? {
                return Ok(false);
            }
        }
        for b in &self.bnns {
            if !b.evaluate(a)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Partial map from variables to truth values.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Default)]
pub struct Assignment {
    values: Vec<Option<bool>>,
}

impl Assignment {
    pub fn new(num_vars: u32) -> Assignment {
        Assignment { values: vec![None; num_vars as usize] }
    }

    pub fn from_values(values: Vec<Option<bool>>) -> Assignment {
        Assignment { values }
    }

    /// Total assignment from the low bits of `bits` (bit i is variable i+1).
    pub fn from_bits(num_vars: u32, bits: u64) -> Assignment {
        Assignment { values: (0..num_vars).map(|i| Some(bits >> i & 1 == 1)).collect() }
    }

    pub fn from_lits(num_vars: u32, lits: &[Lit]) -> Assignment {
        let mut a = Assignment::new(num_vars);
        for &l in lits {
            a.set(l.var(), !l.is_negated());
        }
        a
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, v: Var) -> Option<bool> {
        self.values.get(v.offset()).copied().flatten()
    }

    pub fn lit_value(&self, l: Lit) -> Result<bool, EvalError> {
        self.value(l.var()).map(|b| l.under(b)).ok_or(EvalError::Unassigned(l.var()))
    }

    pub fn set(&mut self, v: Var, value: bool) {
        if self.values.len() < v.index() as usize {
            self.values.resize(v.index() as usize, None);
        }
        self.values[v.offset()] = Some(value);
    }

    pub fn unset(&mut self, v: Var) {
        if let Some(slot) = self.values.get_mut(v.offset()) {
            *slot = None;
        }
    }

    /// Assigned variables as literals, in variable order.
    pub fn lits(&self) -> Vec<Lit> {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(i, v)| v.map(|b| Lit::new(Var::from_offset(i), !b)))
            .collect()
    }

    /// Copy restricted to the first `num_vars` variables.
    pub fn truncated(&self, num_vars: u32) -> Assignment {
        let mut values = self.values.clone();
        values.resize(num_vars as usize, None);
        Assignment { values }
    }
}
