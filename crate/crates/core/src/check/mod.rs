//! Standalone XLRUP proof checker.
//!
//! Independent of the solver and elaborator: it reads the formula through
//! the formula model only and validates each step on its own terms.
//!
//! * `<id> <lits> 0 <hints> 0` is reverse unit propagation: under the
//!   negated clause, each hint in order must be unit (extending the
//!   assignment) or falsified (ending the check).
//! * `i cb <id> <lits> 0 <bnn> [u <units>] 0` holds when the negated clause
//!   plus the hinted unit clauses leave the BNN constraint unsatisfiable.
//! * `i cx <id> <lits> 0 <xors> 0` holds when the negated clause assigns
//!   every variable of the GF(2) sum of the XORs and violates it.
//! * `o x <id> <lits> 0` introduces formula XOR `id`; `<n> d <ids> 0`
//!   deletes clauses.
//!
//! The proof is accepted once the empty clause has been derived and every
//! step checked.

mod bitset;

pub use bitset::BnnBitset;

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::formula::{Formula, Lit, Var, XorConstraint};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum XlrupStep {
    OrigXor { id: u64, lits: Vec<Lit> },
    Rup { id: u64, lits: Vec<Lit>, hints: Vec<u64> },
    FromBnn { id: u64, lits: Vec<Lit>, bnn: u64, units: Vec<u64> },
    FromXor { id: u64, lits: Vec<Lit>, xors: Vec<u64> },
    /// `id` labels the step: the id of the clause added just before.
    Delete { id: u64, ids: Vec<u64> },
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("XLRUP line {line}: {msg}")]
pub struct XlrupParseError {
    pub line: usize,
    pub msg: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Verified,
    Rejected { line: usize, reason: String },
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Verified => write!(f, "VERIFIED"),
            Outcome::Rejected { line, reason } => write!(f, "REJECTED at line {line}: {reason}"),
        }
    }
}

struct Tokens<'a> {
    toks: Vec<&'a str>,
    pos: usize,
    line: usize,
}

impl<'a> Tokens<'a> {
    fn err(&self, msg: impl Into<String>) -> XlrupParseError {
        XlrupParseError { line: self.line, msg: msg.into() }
    }

    fn peek(&self) -> Option<&'a str> {
        self.toks.get(self.pos).copied()
    }

    fn int(&mut self) -> Result<i64, XlrupParseError> {
        let t = self.peek().ok_or_else(|| self.err("unexpected end of line"))?;
        self.pos += 1;
        t.parse::<i64>()
            .ok()
            .filter(|v| v.unsigned_abs() < (1 << 31))
            .ok_or_else(|| self.err(format!("invalid integer `{t}`")))
    }

    fn id(&mut self) -> Result<u64, XlrupParseError> {
        match self.int()? {
            v if v > 0 => Ok(v as u64),
            _ => Err(self.err("expected a positive id")),
        }
    }

    fn lits(&mut self) -> Result<Vec<Lit>, XlrupParseError> {
        let mut out = Vec::new();
        loop {
            match self.int()? {
                0 => return Ok(out),
                v => out.push(Lit::from_dimacs(v)),
            }
        }
    }

    fn ids(&mut self) -> Result<Vec<u64>, XlrupParseError> {
        let mut out = Vec::new();
        loop {
            match self.int()? {
                0 => return Ok(out),
                v if v > 0 => out.push(v as u64),
                _ => return Err(self.err("expected a positive id")),
            }
        }
    }

    fn finish(&self) -> Result<(), XlrupParseError> {
        if self.pos == self.toks.len() {
            Ok(())
        } else {
            Err(self.err("trailing tokens"))
        }
    }
}

fn parse_step(t: &mut Tokens<'_>) -> Result<XlrupStep, XlrupParseError> {
    let step = match t.peek() {
        Some("o") => {
            t.pos += 1;
            if t.peek() != Some("x") {
                return Err(t.err("only XOR constraints are introduced with `o`"));
            }
            t.pos += 1;
            XlrupStep::OrigXor { id: t.id()?, lits: t.lits()? }
        }
        Some("i") => {
            t.pos += 1;
            match t.peek() {
                Some("cb") => {
                    t.pos += 1;
                    let id = t.id()?;
                    let lits = t.lits()?;
                    let bnn = t.id()?;
                    let units = if t.peek() == Some("u") {
                        t.pos += 1;
                        t.ids()?
                    } else if t.int()? == 0 {
                        Vec::new()
                    } else {
                        return Err(t.err("expected `u` or `0` after the BNN id"));
                    };
                    XlrupStep::FromBnn { id, lits, bnn, units }
                }
                Some("cx") => {
                    t.pos += 1;
                    let id = t.id()?;
                    let lits = t.lits()?;
                    let xors = t.ids()?;
                    if xors.is_empty() {
                        return Err(t.err("`i cx` without XOR ids"));
                    }
                    XlrupStep::FromXor { id, lits, xors }
                }
                _ => return Err(t.err("expected `cb` or `cx`")),
            }
        }
        Some(_) => {
            let id = t.id()?;
            if t.peek() == Some("d") {
                t.pos += 1;
                XlrupStep::Delete { id, ids: t.ids()? }
            } else {
                let lits = t.lits()?;
                XlrupStep::Rup { id, lits, hints: t.ids()? }
            }
        }
        None => return Err(t.err("empty step")),
    };
    t.finish()?;
    Ok(step)
}

/// Parses XLRUP text into steps with their 1-based line numbers.
pub fn parse_xlrup(text: &str) -> Result<Vec<(usize, XlrupStep)>, XlrupParseError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        let mut t = Tokens { toks: line.split_whitespace().collect(), pos: 0, line: i + 1 };
        out.push((i + 1, parse_step(&mut t)?));
    }
    Ok(out)
}

/// Checker state for one proof.
pub struct Checker<'f> {
    formula: &'f Formula,
    clauses: HashMap<u64, Vec<Lit>>,
    xors: HashMap<u64, (Vec<Var>, bool)>,
    bnns: Vec<BnnBitset>,
    value: Vec<u8>,
    touched: Vec<usize>,
    refuted: bool,
    /// Largest clause id seen; added ids must exceed it.
    last_id: u64,
}

const UNSET: u8 = 2;

impl<'f> Checker<'f> {
    pub fn new(formula: &'f Formula) -> Checker<'f> {
        let clauses = formula.clauses().iter().enumerate().map(|(i, c)| (i as u64 + 1, c.lits.clone())).collect();
        let bnns = formula.bnns().iter().map(BnnBitset::new).collect();
        Checker {
            formula,
            clauses,
            xors: HashMap::new(),
            bnns,
            value: vec![UNSET; formula.num_vars() as usize],
            touched: Vec::new(),
            refuted: false,
            last_id: formula.clauses().len() as u64,
        }
    }

    /// Heap bytes used by the BNN store.
    pub fn bnn_store_bytes(&self) -> usize {
        self.bnns.iter().map(BnnBitset::heap_bytes).sum::<usize>() + self.bnns.capacity() * std::mem::size_of::<BnnBitset>()
    }

    pub fn is_refuted(&self) -> bool {
        self.refuted
    }

    fn lit_value(&self, l: Lit) -> Option<bool> {
        match self.value.get(l.var().offset()) {
            Some(&UNSET) | None => None,
            Some(&v) => Some((v == 1) != l.is_negated()),
        }
    }

    /// Makes `l` true. Returns false if it was already false.
    fn set(&mut self, l: Lit) -> bool {
        let v = l.var().offset();
        if v >= self.value.len() {
            self.value.resize(v + 1, UNSET);
        }
        match self.lit_value(l) {
            Some(b) => b,
            None => {
                self.value[v] = u8::from(!l.is_negated());
                self.touched.push(v);
                true
            }
        }
    }

    fn reset(&mut self) {
        for v in self.touched.drain(..) {
            self.value[v] = UNSET;
        }
    }

    /// Assigns the negation of `lits`; false if the clause is a tautology.
    fn assume_negation(&mut self, lits: &[Lit]) -> bool {
        lits.iter().all(|&l| self.set(!l))
    }

    fn check_rup(&mut self, lits: &[Lit], hints: &[u64]) -> Result<(), String> {
        if !self.assume_negation(lits) {
            return Ok(());
        }
        for &h in hints {
            let clause = self.clauses.get(&h).ok_or_else(|| format!("hint {h} is not a live clause"))?;
            let mut open = None;
            let mut open_count = 0;
            for &l in clause {
                match self.lit_value(l) {
                    Some(true) => return Err(format!("hint {h} is satisfied")),
                    Some(false) => {}
                    None if open == Some(l) => {}
                    None => {
                        open = Some(l);
                        open_count += 1;
                    }
                }
            }
            match open_count {
                0 => return Ok(()),
                1 => {
                    self.set(open.unwrap());
                }
                _ => return Err(format!("hint {h} is neither unit nor falsified")),
            }
        }
        Err("hints end without a conflict".into())
    }

    fn check_cb(&mut self, lits: &[Lit], bnn: u64, units: &[u64]) -> Result<(), String> {
        let b = self
            .bnns
            .get((bnn as usize).wrapping_sub(1))
            .ok_or_else(|| format!("unknown BNN constraint {bnn}"))?
            .clone();
        if !self.assume_negation(lits) {
            return Ok(());
        }
        for &u in units {
            let clause = self.clauses.get(&u).ok_or_else(|| format!("unit hint {u} is not a live clause"))?;
            let mut distinct = clause.clone();
            distinct.sort();
            distinct.dedup();
            if distinct.len() != 1 {
                return Err(format!("unit hint {u} is not a unit clause"));
            }
            if !self.set(distinct[0]) {
                return Ok(());
            }
        }
        let value = &self.value;
        let falsified = b.falsified(|v| match value.get(v.offset()) {
            Some(&UNSET) | None => None,
            Some(&x) => Some(x == 1),
        });
        if falsified {
            Ok(())
        } else {
            Err(format!("BNN constraint {bnn} is not contradicted"))
        }
    }

    fn check_cx(&mut self, lits: &[Lit], xors: &[u64]) -> Result<(), String> {
        let mut sum: Vec<Var> = Vec::new();
        let mut rhs = false;
        for &x in xors {
            let (vars, r) = self.xors.get(&x).ok_or_else(|| format!("XOR {x} was not introduced"))?;
            sum = symmetric_difference(&sum, vars);
            rhs ^= r;
        }
        if !self.assume_negation(lits) {
            return Ok(());
        }
        let mut parity = false;
        for &v in &sum {
            match self.lit_value(v.positive()) {
                Some(b) => parity ^= b,
                None => return Err(format!("variable {v} of the XOR sum is not assigned by the clause")),
            }
        }
        if parity != rhs {
            Ok(())
        } else {
            Err("XOR sum is satisfied by the negated clause".into())
        }
    }

    fn add_clause(&mut self, id: u64, lits: &[Lit]) -> Result<(), String> {
        if id <= self.last_id {
            return Err(format!("clause id {id} does not exceed the previous id {}", self.last_id));
        }
        self.last_id = id;
        self.clauses.insert(id, lits.to_vec());
        if lits.is_empty() {
            self.refuted = true;
        }
        Ok(())
    }

    /// Checks one step.
    pub fn step(&mut self, step: &XlrupStep) -> Result<(), String> {
        let result = match step {
            XlrupStep::OrigXor { id, lits } => {
                let formula_xor = self
                    .formula
                    .xors()
                    .get((*id as usize).wrapping_sub(1))
                    .ok_or_else(|| format!("formula has no XOR {id}"))?;
                let given = XorConstraint::new(lits.clone(), true).canonical();
                if given != formula_xor.canonical() {
                    Err(format!("XOR {id} does not match the formula"))
                } else if self.xors.insert(*id, given).is_some() {
                    Err(format!("XOR {id} introduced twice"))
                } else {
                    Ok(())
                }
            }
            XlrupStep::Rup { id, lits, hints } => self.check_rup(lits, hints).and_then(|_| {
                self.reset();
                self.add_clause(*id, lits)
            }),
            XlrupStep::FromBnn { id, lits, bnn, units } => self.check_cb(lits, *bnn, units).and_then(|_| {
                self.reset();
                self.add_clause(*id, lits)
            }),
            XlrupStep::FromXor { id, lits, xors } => self.check_cx(lits, xors).and_then(|_| {
                self.reset();
                self.add_clause(*id, lits)
            }),
            XlrupStep::Delete { id, ids } => {
                if *id != self.last_id {
                    return Err(format!("deletion labelled {id} does not follow step {}", self.last_id));
                }
                for i in ids {
                    if self.clauses.remove(i).is_none() {
                        return Err(format!("deleting clause {i}, which is not live"));
                    }
                }
                Ok(())
            }
        };
        self.reset();
        result
    }
}

fn symmetric_difference(a: &[Var], b: &[Var]) -> Vec<Var> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Checks an XLRUP proof of unsatisfiability of `f`.
pub fn check_xlrup(f: &Formula, proof: &str) -> Result<Outcome, XlrupParseError> {
    let steps = parse_xlrup(proof)?;
    let mut checker = Checker::new(f);
    for (line, step) in &steps {
        if let Err(reason) = checker.step(step) {
            return Ok(Outcome::Rejected { line: *line, reason });
        }
    }
    if checker.is_refuted() {
        Ok(Outcome::Verified)
    } else {
        let line = steps.last().map_or(0, |(l, _)| *l);
        Ok(Outcome::Rejected { line, reason: "the empty clause is never derived".into() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_formula;

    const EXAMPLE: &str = "p cnf 4 5\n1 -2 0\n-1 3 0\nx 1 -2 -3 0\n-4 0\nb 1 -2 3 0 2 4 0\n";
    const EXAMPLE_XLRUP: &str = "o x 1 1 -2 -3 0\ni cb 4 -1 -3 0 1 u 3 0\ni cb 5 2 -3 0 1 u 3 0\n5 d 3 0\n\
                              6 -3 0 4 1 5 0\n6 d 5 4 0\n7 -1 0 6 2 0\n7 d 2 0\n8 -2 0 7 1 0\n8 d 1 0\n\
                              i cx 9 1 2 3 0 1 0\n10 0 7 6 9 8 0\n";

    fn example() -> Formula {
        parse_formula(EXAMPLE.as_bytes()).unwrap()
    }

    #[test]
    fn accepts_running_example_proof() {
        assert_eq!(check_xlrup(&example(), EXAMPLE_XLRUP).unwrap(), Outcome::Verified);
    }

    #[test]
    fn step_ids_must_increase() {
        // The final clause reuses the id of an earlier step.
        let bad = EXAMPLE_XLRUP.replace("10 0 7 6 9 8 0", "7 0 7 6 9 8 0");
        assert!(matches!(check_xlrup(&example(), &bad).unwrap(), Outcome::Rejected { line: 12, .. }));
    }

    #[test]
    fn deletion_label_follows_its_step() {
        let bad = EXAMPLE_XLRUP.replace("6 d 5 4 0", "2 d 5 4 0");
        assert!(matches!(check_xlrup(&example(), &bad).unwrap(), Outcome::Rejected { line: 6, .. }));
    }

    #[test]
    fn sign_flip_in_rup_step_is_rejected() {
        let bad = EXAMPLE_XLRUP.replace("6 -3 0 4 1 5 0", "6 3 0 4 1 5 0");
        assert!(matches!(check_xlrup(&example(), &bad).unwrap(), Outcome::Rejected { line: 5, .. }));
    }

    #[test]
    fn missing_empty_clause_is_rejected() {
        let cut: String = EXAMPLE_XLRUP.lines().take(11).map(|l| format!("{l}\n")).collect();
        assert!(matches!(check_xlrup(&example(), &cut).unwrap(), Outcome::Rejected { .. }));
    }

    #[test]
    fn clause_from_bnn_cases() {
        let f = parse_formula(b"p cnf 3 1\nb 1 2 0 1 3 0\n").unwrap();
        let mut c = Checker::new(&f);
        let lits = |v: &[i64]| v.iter().map(|&x| Lit::from_dimacs(x)).collect::<Vec<_>>();
        assert_eq!(c.step(&XlrupStep::FromBnn { id: 1, lits: lits(&[3, -1]), bnn: 1, units: vec![] }), Ok(()));
        // (¬x1) is not implied: x1 with y free is consistent.
        assert!(c.step(&XlrupStep::FromBnn { id: 2, lits: lits(&[-1]), bnn: 1, units: vec![] }).is_err());
        assert!(c.step(&XlrupStep::FromBnn { id: 2, lits: lits(&[-1]), bnn: 2, units: vec![] }).is_err());
        // A non-unit hint is refused.
        let g = parse_formula(b"p cnf 3 2\n1 2 0\nb 1 2 0 1 3 0\n").unwrap();
        let mut c = Checker::new(&g);
        assert!(c.step(&XlrupStep::FromBnn { id: 2, lits: lits(&[3]), bnn: 1, units: vec![1] }).is_err());
    }

    #[test]
    fn clause_from_xor_cases() {
        let f = parse_formula(b"p cnf 3 3\nx 1 0\nx 1 2 0\nx -2 3 0\n").unwrap();
        let mut c = Checker::new(&f);
        let lits = |v: &[i64]| v.iter().map(|&x| Lit::from_dimacs(x)).collect::<Vec<_>>();
        for (i, l) in [(1, vec![1]), (2, vec![1, 2]), (3, vec![-2, 3])] {
            c.step(&XlrupStep::OrigXor { id: i, lits: lits(&l) }).unwrap();
        }
        assert_eq!(c.step(&XlrupStep::FromXor { id: 1, lits: lits(&[1]), xors: vec![1] }), Ok(()));
        // x1^x2 = 1 plus x2^x3 = 0 is x1^x3 = 1.
        assert_eq!(c.step(&XlrupStep::FromXor { id: 2, lits: lits(&[1, 3]), xors: vec![2, 3] }), Ok(()));
        assert!(c.step(&XlrupStep::FromXor { id: 3, lits: lits(&[1]), xors: vec![2, 3] }).is_err());
        assert!(c.step(&XlrupStep::FromXor { id: 3, lits: lits(&[-1, 3]), xors: vec![2, 3] }).is_err());
        assert!(c.step(&XlrupStep::OrigXor { id: 1, lits: lits(&[-1]) }).is_err());
    }

    #[test]
    fn parse_errors_are_distinct() {
        assert!(check_xlrup(&example(), "i cb 4 -1 0 1 7 0\n").is_err());
        assert!(check_xlrup(&example(), "o 1 1 -2 0\n").is_err());
        assert!(check_xlrup(&example(), "4 -1 0 1\n").is_err());
    }
}
