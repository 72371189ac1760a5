//! Counting certificates and their text form.
//!
//! ```text
//! c ccert v1
//! p params <eps> <delta> <seed> <t> <thresh>
//! r <i> m <m_star>
//! x <lits> 0 <rhs>          one per hash constraint, in draw order
//! v <lits> 0                one per cell solution (full assignment)
//! w <lits> 0                one per lower witness
//! e <estimate>
//! s <median>
//! ```

use std::fmt::Write as _;

use num_bigint::BigUint;

use crate::formula::{Assignment, Lit, XorConstraint};

/// One round of a counting run.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundRecord {
    /// 1-based round number.
    pub index: usize,
    pub m_star: usize,
    /// The first `m_star` hash constraints of the round.
    pub xors: Vec<XorConstraint>,
    /// Every solution in the final cell.
    pub cell: Vec<Assignment>,
    /// `thresh` solutions at level `m_star - 1`; empty when `m_star` is 0.
    pub witnesses: Vec<Assignment>,
    pub estimate: BigUint,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CountCertificate {
    pub epsilon: f64,
    pub delta: f64,
    pub seed: u64,
    pub num_rounds: usize,
    pub thresh: usize,
    pub rounds: Vec<RoundRecord>,
    pub estimate: BigUint,
}

fn push_lits(out: &mut String, lits: impl IntoIterator<Item = Lit>) {
    for l in lits {
        let _ = write!(out, " {}", l.to_dimacs());
    }
    out.push_str(" 0");
}

pub fn write_certificate(c: &CountCertificate) -> String {
    let mut out = String::new();
    out.push_str("c ccert v1\n");
    let _ = writeln!(out, "p params {} {} {} {} {}", c.epsilon, c.delta, c.seed, c.num_rounds, c.thresh);
    for r in &c.rounds {
        let _ = writeln!(out, "r {} m {}", r.index, r.m_star);
        for x in &r.xors {
            out.push('x');
            push_lits(&mut out, x.lits.iter().copied());
            let _ = writeln!(out, " {}", x.rhs as u8);
        }
        for (tag, list) in [('v', &r.cell), ('w', &r.witnesses)] {
            for a in list {
                out.push(tag);
                push_lits(&mut out, a.lits());
                out.push('\n');
            }
        }
        let _ = writeln!(out, "e {}", r.estimate);
    }
    let _ = writeln!(out, "s {}", c.estimate);
    out
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("certificate line {line}: {msg}")]
pub struct CertParseError {
    pub line: usize,
    pub msg: String,
}

fn err(line: usize, msg: impl Into<String>) -> CertParseError {
    CertParseError { line, msg: msg.into() }
}

fn num<T: std::str::FromStr>(line: usize, tok: Option<&str>, what: &str) -> Result<T, CertParseError> {
    let tok = tok.ok_or_else(|| err(line, format!("missing {what}")))?;
    tok.parse().map_err(|_| err(line, format!("bad {what} `{tok}`")))
}

/// Literals up to the terminating 0; returns them and the remaining tokens.
fn lits<'a>(line: usize, toks: &mut impl Iterator<Item = &'a str>) -> Result<Vec<Lit>, CertParseError> {
    let mut out = Vec::new();
    loop {
        let v: i64 = num(line, toks.next(), "literal")?;
        if v == 0 {
            return Ok(out);
        }
        if v.unsigned_abs() > u32::MAX as u64 {
            return Err(err(line, format!("literal {v} out of range")));
        }
        out.push(Lit::from_dimacs(v));
    }
}

fn assignment(line: usize, lits: &[Lit]) -> Result<Assignment, CertParseError> {
    let n = lits.iter().map(|l| l.var().index()).max().unwrap_or(0);
    let mut a = Assignment::new(n);
    for &l in lits {
        if a.value(l.var()).is_some() {
            return Err(err(line, format!("variable {} assigned twice", l.var().index())));
        }
        a.set(l.var(), !l.is_negated());
    }
    Ok(a)
}

/// Parses the text form. Only syntax is checked here; consistency is the
/// certificate checker's job.
pub fn parse_certificate(text: &str) -> Result<CountCertificate, CertParseError> {
    let mut header = None;
    let mut rounds: Vec<RoundRecord> = Vec::new();
    let mut estimate = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let mut toks = raw.split_whitespace();
        let Some(tag) = toks.next() else { continue };
        if estimate.is_some() && tag != "c" {
            return Err(err(line, "content after the final estimate"));
        }
        match tag {
            "c" => continue,
            "p" => {
                if header.is_some() {
                    return Err(err(line, "duplicate parameter line"));
                }
                if toks.next() != Some("params") {
                    return Err(err(line, "expected `p params`"));
                }
                let eps: f64 = num(line, toks.next(), "epsilon")?;
                let delta: f64 = num(line, toks.next(), "delta")?;
                let seed: u64 = num(line, toks.next(), "seed")?;
                let t: usize = num(line, toks.next(), "round count")?;
                let thresh: usize = num(line, toks.next(), "thresh")?;
                header = Some((eps, delta, seed, t, thresh));
            }
            "r" => {
                if header.is_none() {
                    return Err(err(line, "round before the parameter line"));
                }
                let index: usize = num(line, toks.next(), "round index")?;
                if toks.next() != Some("m") {
                    return Err(err(line, "expected `m`"));
                }
                let m_star: usize = num(line, toks.next(), "level")?;
                rounds.push(RoundRecord {
                    index,
                    m_star,
                    xors: Vec::new(),
                    cell: Vec::new(),
                    witnesses: Vec::new(),
                    estimate: BigUint::default(),
                });
            }
            "x" | "v" | "w" | "e" => {
                let r = rounds.last_mut().ok_or_else(|| err(line, format!("`{tag}` line outside a round")))?;
                match tag {
                    "x" => {
                        let l = lits(line, &mut toks)?;
                        let rhs = match toks.next() {
                            Some("0") => false,
                            Some("1") => true,
                            _ => return Err(err(line, "XOR parity must be 0 or 1")),
                        };
                        r.xors.push(XorConstraint::new(l, rhs));
                    }
                    "v" => r.cell.push(assignment(line, &lits(line, &mut toks)?)?),
                    "w" => r.witnesses.push(assignment(line, &lits(line, &mut toks)?)?),
                    _ => r.estimate = num(line, toks.next(), "estimate")?,
                }
            }
            "s" => estimate = Some(num::<BigUint>(line, toks.next(), "final estimate")?),
            other => return Err(err(line, format!("unknown line type `{other}`"))),
        }
        if toks.next().is_some() {
            return Err(err(line, "trailing tokens"));
        }
    }
    let (epsilon, delta, seed, num_rounds, thresh) = header.ok_or_else(|| err(0, "missing parameter line"))?;
    let estimate = estimate.ok_or_else(|| err(0, "missing final estimate"))?;
    Ok(CountCertificate { epsilon, delta, seed, num_rounds, thresh, rounds, estimate })
}
