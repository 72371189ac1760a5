use std::fmt;

use thiserror::Error;

use crate::formula::{BnnConstraint, BnnNormal, Lit, XorConstraint};

/// One line of a FRAT-XOR-BNN proof.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FratStep {
    Original { id: u64, lits: Vec<Lit> },
    OriginalXor { id: u64, xor: XorConstraint },
    OriginalBnn { id: u64, bnn: BnnConstraint },
    /// Learned clause; optional hints are accepted on input and ignored.
    Add { id: u64, lits: Vec<Lit> },
    FromBnn { id: u64, lits: Vec<Lit>, bnn: u64, units: Vec<u64> },
    FromXor { id: u64, lits: Vec<Lit>, xors: Vec<u64> },
    Delete { id: u64, lits: Vec<Lit> },
    Final { id: u64, lits: Vec<Lit> },
    FinalXor { id: u64, xor: XorConstraint },
    FinalBnn { id: u64, bnn: BnnConstraint },
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("proof line {line}: {msg}")]
pub struct FratError {
    pub line: usize,
    pub msg: String,
}

struct Lits<'a>(&'a [Lit]);

impl fmt::Display for Lits<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in self.0 {
            write!(f, "{} ", l.to_dimacs())?;
        }
        write!(f, "0")
    }
}

struct Ids<'a>(&'a [u64]);

impl fmt::Display for Ids<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in self.0 {
            write!(f, "{i} ")?;
        }
        write!(f, "0")
    }
}

/// XOR lines state odd parity; even parity is written by negating the first literal.
fn xor_lits(x: &XorConstraint) -> Vec<Lit> {
    let mut lits = x.lits.clone();
    if !x.rhs {
        if let Some(first) = lits.first_mut() {
            *first = !*first;
        }
    }
    lits
}

fn write_bnn(f: &mut fmt::Formatter<'_>, b: &BnnConstraint) -> fmt::Result {
    write!(f, "{} k {} {} 0", Lits(b.lhs()), b.cutoff(), b.output().to_dimacs())
}

impl fmt::Display for FratStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FratStep::Original { id, lits } => write!(f, "o {id} {}", Lits(lits)),
            FratStep::OriginalXor { id, xor } => write!(f, "o x {id} {}", Lits(&xor_lits(xor))),
            FratStep::OriginalBnn { id, bnn } => {
                write!(f, "o b {id} ")?;
                write_bnn(f, bnn)
            }
            FratStep::Add { id, lits } => write!(f, "a {id} {}", Lits(lits)),
            FratStep::FromBnn { id, lits, bnn, units } => {
                write!(f, "i {id} {} b l {bnn} 0", Lits(lits))?;
                if !units.is_empty() {
                    write!(f, " u {}", Ids(units))?;
                }
                Ok(())
            }
            FratStep::FromXor { id, lits, xors } => write!(f, "i {id} {} l {}", Lits(lits), Ids(xors)),
            FratStep::Delete { id, lits } => write!(f, "d {id} {}", Lits(lits)),
            FratStep::Final { id, lits } => write!(f, "f {id} {}", Lits(lits)),
            FratStep::FinalXor { id, xor } => write!(f, "f x {id} {}", Lits(&xor_lits(xor))),
            FratStep::FinalBnn { id, bnn } => {
                write!(f, "f b {id} ")?;
                write_bnn(f, bnn)
            }
        }
    }
}

struct Cursor<'a> {
    toks: Vec<&'a str>,
    pos: usize,
    line: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, msg: impl Into<String>) -> FratError {
        FratError { line: self.line, msg: msg.into() }
    }

    fn peek(&self) -> Option<&'a str> {
        self.toks.get(self.pos).copied()
    }

    fn eat(&mut self, kw: &str) -> bool {
        if self.peek() == Some(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, kw: &str) -> Result<(), FratError> {
        if self.eat(kw) {
            Ok(())
        } else {
            Err(self.err(format!("expected `{kw}`")))
        }
    }

    fn int(&mut self) -> Result<i64, FratError> {
        let t = self.peek().ok_or_else(|| self.err("unexpected end of line"))?;
        self.pos += 1;
        t.parse::<i64>()
            .ok()
            .filter(|v| v.unsigned_abs() < (1 << 31))
            .ok_or_else(|| self.err(format!("invalid integer `{t}`")))
    }

    fn id(&mut self) -> Result<u64, FratError> {
        let v = self.int()?;
        if v <= 0 {
            return Err(self.err("ids must be positive"));
        }
        Ok(v as u64)
    }

    fn lits(&mut self) -> Result<Vec<Lit>, FratError> {
        let mut out = Vec::new();
        loop {
            let v = self.int()?;
            if v == 0 {
                return Ok(out);
            }
            out.push(Lit::from_dimacs(v));
        }
    }

    fn ids(&mut self) -> Result<Vec<u64>, FratError> {
        let mut out = Vec::new();
        loop {
            let v = self.int()?;
            if v == 0 {
                return Ok(out);
            }
            if v < 0 {
                return Err(self.err("ids must be positive"));
            }
            out.push(v as u64);
        }
    }

    fn bnn(&mut self) -> Result<BnnConstraint, FratError> {
        let lhs = self.lits()?;
        self.expect("k")?;
        let k = self.int()?;
        let out = self.int()?;
        if out == 0 {
            return Err(self.err("missing output literal"));
        }
        self.expect("0")?;
        match BnnConstraint::build(lhs, k, Lit::from_dimacs(out)) {
            Ok(BnnNormal::Bnn(b)) => Ok(b),
            Ok(BnnNormal::Unit(_)) => Err(self.err("degenerate BNN cutoff")),
            Err(e) => Err(self.err(e.to_string())),
        }
    }

    fn done(&self) -> Result<(), FratError> {
        if self.pos == self.toks.len() {
            Ok(())
        } else {
            Err(self.err("trailing tokens"))
        }
    }
}

fn parse_line(c: &mut Cursor<'_>) -> Result<FratStep, FratError> {
    let head = c.peek().ok_or_else(|| c.err("empty line"))?;
    c.pos += 1;
    let step = match head {
        "o" | "f" => {
            let fin = head == "f";
            if c.eat("x") {
                let id = c.id()?;
                let xor = XorConstraint::new(c.lits()?, true);
                if fin {
                    FratStep::FinalXor { id, xor }
                } else {
                    FratStep::OriginalXor { id, xor }
                }
            } else if c.eat("b") {
                let id = c.id()?;
                let bnn = c.bnn()?;
                if fin {
                    FratStep::FinalBnn { id, bnn }
                } else {
                    FratStep::OriginalBnn { id, bnn }
                }
            } else {
                let id = c.id()?;
                let lits = c.lits()?;
                if fin {
                    FratStep::Final { id, lits }
                } else {
                    FratStep::Original { id, lits }
                }
            }
        }
        "a" => {
            let id = c.id()?;
            let lits = c.lits()?;
            if c.eat("l") {
                c.ids()?;
            }
            FratStep::Add { id, lits }
        }
        "d" => {
            let id = c.id()?;
            FratStep::Delete { id, lits: c.lits()? }
        }
        "i" => {
            let id = c.id()?;
            let lits = c.lits()?;
            if c.eat("b") {
                c.expect("l")?;
                let bnn = c.id()?;
                c.expect("0")?;
                let units = if c.eat("u") { c.ids()? } else { Vec::new() };
                FratStep::FromBnn { id, lits, bnn, units }
            } else {
                c.expect("l")?;
                let xors = c.ids()?;
                if xors.is_empty() {
                    return Err(c.err("clause-from-xor step without XOR ids"));
                }
                FratStep::FromXor { id, lits, xors }
            }
        }
        other => return Err(c.err(format!("unknown step kind `{other}`"))),
    };
    c.done()?;
    Ok(step)
}

/// Parses a FRAT-XOR-BNN proof, returning each step with its 1-based line number.
pub fn parse_frat(text: &str) -> Result<Vec<(usize, FratStep)>, FratError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        let mut c = Cursor { toks: line.split_whitespace().collect(), pos: 0, line: i + 1 };
        out.push((i + 1, parse_line(&mut c)?));
    }
    Ok(out)
}
