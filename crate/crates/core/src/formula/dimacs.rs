//! Extended DIMACS: `x` lines for XOR constraints, `b` lines for BNN
//! constraints and `c ind` lines for the sampling set.

use std::fmt::Write as _;

use thiserror::Error;

use super::{Clause, ConstraintRef, Formula, FormulaError, Lit, Var, XorConstraint};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("malformed header")]
    MalformedHeader,
    #[error("missing header")]
    MissingHeader,
    #[error("duplicate header")]
    DuplicateHeader,
    #[error("invalid integer `{0}`")]
    BadInteger(String),
    #[error("constraint is not terminated by 0")]
    Unterminated,
    #[error("trailing tokens after terminating 0")]
    TrailingGarbage,
    #[error("BNN constraint is missing its cutoff or output literal")]
    MissingBnnTail,
    #[error("input is not valid UTF-8")]
    Encoding,
    #[error(transparent)]
    Formula(#[from] FormulaError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParseWarning {
    /// The header's constraint count differs from the number of constraint lines.
    HeaderCountMismatch { declared: usize, actual: usize },
}

/// Parses an extended DIMACS formula.
pub fn parse_formula(input: &[u8]) -> Result<Formula, ParseError> {
    parse_formula_with_warnings(input).map(|(f, _)| f)
}

pub fn parse_formula_with_warnings(input: &[u8]) -> Result<(Formula, Vec<ParseWarning>), ParseError> {
    let text = std::str::from_utf8(input).map_err(|_| ParseError { line: 0, kind: ParseErrorKind::Encoding })?;
    let mut formula: Option<Formula> = None;
    let mut declared = 0usize;
    let mut lines_seen = 0usize;
    let mut sampling: Vec<Var> = Vec::new();
    let mut has_sampling = false;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let err = |kind| ParseError { line: line_no, kind };
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('c') {
            let mut toks = rest.split_whitespace();
            if rest.starts_with(char::is_whitespace) && toks.next() == Some("ind") {
                has_sampling = true;
                let vals = terminated_ints(toks, line_no)?;
                for v in vals {
                    if v <= 0 {
                        return Err(err(ParseErrorKind::BadInteger(v.to_string())));
                    }
                    sampling.push(Var::new(v as u32));
                }
            }
            continue;
        }
        if let Some(rest) = line.strip_prefix('p') {
            if formula.is_some() {
                return Err(err(ParseErrorKind::DuplicateHeader));
            }
            let toks: Vec<&str> = rest.split_whitespace().collect();
            if toks.len() != 3 || toks[0] != "cnf" {
                return Err(err(ParseErrorKind::MalformedHeader));
            }
            let nv: u32 = toks[1].parse().map_err(|_| err(ParseErrorKind::MalformedHeader))?;
            declared = toks[2].parse().map_err(|_| err(ParseErrorKind::MalformedHeader))?;
            formula = Some(Formula::new(nv));
            continue;
        }
        let f = formula.as_mut().ok_or(err(ParseErrorKind::MissingHeader))?;
        lines_seen += 1;
        if let Some(rest) = line.strip_prefix('x') {
            let vals = terminated_ints(rest.split_whitespace(), line_no)?;
            let lits = to_lits(&vals);
            f.add_xor(XorConstraint::new(lits, true)).map_err(|e| err(e.into()))?;
        } else if let Some(rest) = line.strip_prefix('b') {
            let mut toks = rest.split_whitespace();
            let mut lhs = Vec::new();
            loop {
                let t = toks.next().ok_or(err(ParseErrorKind::Unterminated))?;
                let v = parse_int(t, line_no)?;
                if v == 0 {
                    break;
                }
                lhs.push(Lit::from_dimacs(v));
            }
            let tail = terminated_ints(toks, line_no).map_err(|e| match e.kind {
                ParseErrorKind::Unterminated => err(ParseErrorKind::MissingBnnTail),
                _ => e,
            })?;
            if tail.len() != 2 || tail[1] == 0 {
                return Err(err(ParseErrorKind::MissingBnnTail));
            }
            f.add_bnn(lhs, tail[0], Lit::from_dimacs(tail[1])).map_err(|e| err(e.into()))?;
        } else {
            let vals = terminated_ints(line.split_whitespace(), line_no)?;
            f.add_clause(Clause::new(to_lits(&vals))).map_err(|e| err(e.into()))?;
        }
    }

    let mut f = formula.ok_or(ParseError { line: 0, kind: ParseErrorKind::MissingHeader })?;
    if has_sampling {
        f.set_sampling_set(sampling).map_err(|e| ParseError { line: 0, kind: e.into() })?;
    }
    let mut warnings = Vec::new();
    if declared != lines_seen {
        warnings.push(ParseWarning::HeaderCountMismatch { declared, actual: lines_seen });
    }
    Ok((f, warnings))
}

fn parse_int(tok: &str, line: usize) -> Result<i64, ParseError> {
    tok.parse::<i64>()
        .ok()
        .filter(|v| v.unsigned_abs() <= u32::MAX as u64 / 2)
        .ok_or_else(|| ParseError { line, kind: ParseErrorKind::BadInteger(tok.to_string()) })
}

/// Integers up to (excluding) the terminating 0, which must be the last token.
fn terminated_ints<'a>(toks: impl Iterator<Item = &'a str>, line: usize) -> Result<Vec<i64>, ParseError> {
    let mut out = Vec::new();
    let mut terminated = false;
    for t in toks {
        if terminated {
            return Err(ParseError { line, kind: ParseErrorKind::TrailingGarbage });
        }
        let v = parse_int(t, line)?;
        if v == 0 {
            terminated = true;
        } else {
            out.push(v);
        }
    }
    if !terminated {
        return Err(ParseError { line, kind: ParseErrorKind::Unterminated });
    }
    Ok(out)
}

fn to_lits(vals: &[i64]) -> Vec<Lit> {
    vals.iter().map(|&v| Lit::from_dimacs(v)).collect()
}

fn push_lits(out: &mut String, lits: &[Lit]) {
    for l in lits {
        let _ = write!(out, "{} ", l.to_dimacs());
    }
}

/// Writes `f` in extended DIMACS, preserving constraint order.
pub fn write_formula(f: &Formula) -> String {
    let mut out = String::new();
    // XORs with an empty literal list and parity 0 are vacuous and have no line form.
    let skipped = f.xors().iter().filter(|x| x.lits.is_empty() && !x.rhs).count();
    let _ = writeln!(out, "p cnf {} {}", f.num_vars(), f.num_constraints() - skipped);
    if let Some(s) = f.sampling_set() {
        out.push_str("c ind ");
        for v in s {
            let _ = write!(out, "{} ", v.index());
        }
        out.push_str("0\n");
    }
    for r in f.order() {
        match *r {
            ConstraintRef::Clause(i) => {
                push_lits(&mut out, &f.clauses()[i].lits);
                out.push_str("0\n");
            }
            ConstraintRef::Xor(i) => {
                let x = &f.xors()[i];
                if x.lits.is_empty() && !x.rhs {
                    continue;
                }
                let mut lits = x.lits.clone();
                if !x.rhs {
                    lits[0] = !lits[0];
                }
                out.push_str("x ");
                push_lits(&mut out, &lits);
                out.push_str("0\n");
            }
            ConstraintRef::Bnn(i) => {
                let b = &f.bnns()[i];
                out.push_str("b ");
                push_lits(&mut out, b.lhs());
                let _ = writeln!(out, "0 {} {} 0", b.cutoff(), b.output().to_dimacs());
            }
        }
    }
    out
}
