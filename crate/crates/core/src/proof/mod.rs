//! FRAT-XOR-BNN proof streams.
//!
//! Clause, XOR and BNN constraints live in three separate id spaces. The
//! solver writes `o` lines for the input, `i` lines for clauses implied by a
//! single BNN constraint (plus unit hints) or a sum of XORs, `a` lines for
//! learned clauses (no hints), `d` lines for deletions and a closing block
//! of `f` lines listing every live constraint.

mod frat;

pub use frat::{parse_frat, FratError, FratStep};

use std::collections::BTreeMap;
use std::io::{self, Write};

use thiserror::Error;

use crate::formula::{BnnConstraint, ConstraintRef, Formula, Lit, XorConstraint};

#[derive(Debug, Error)]
pub enum ProofError {
    #[error("proof output failed: {0}")]
    Io(#[from] io::Error),
    #[error("proof step emitted after the final section")]
    AfterFinal,
    #[error("reference to unknown or deleted clause {0}")]
    UnknownClause(u64),
}

/// Writes FRAT-XOR-BNN steps and tracks the live constraint set.
pub struct ProofSink<'w> {
    out: Box<dyn Write + 'w>,
    next_clause: u64,
    live: BTreeMap<u64, Vec<Lit>>,
    xors: Vec<(u64, XorConstraint)>,
    bnns: Vec<(u64, BnnConstraint)>,
    finished: bool,
    steps: u64,
    implied_steps: u64,
}

impl<'w> ProofSink<'w> {
    pub fn new(out: impl Write + 'w) -> ProofSink<'w> {
        ProofSink {
            out: Box::new(io::BufWriter::new(out)),
            next_clause: 1,
            live: BTreeMap::new(),
            xors: Vec::new(),
            bnns: Vec::new(),
            finished: false,
            steps: 0,
            implied_steps: 0,
        }
    }

    fn emit(&mut self, step: &FratStep) -> Result<(), ProofError> {
        if self.finished {
            return Err(ProofError::AfterFinal);
        }
        self.steps += 1;
        writeln!(self.out, "{step}")?;
        Ok(())
    }

    fn fresh(&mut self) -> u64 {
        let id = self.next_clause;
        self.next_clause += 1;
        id
    }

    /// Emits `o` lines for every constraint of `f` in file order. Clause,
    /// XOR and BNN ids are their 1-based positions in `f`.
    pub fn log_original(&mut self, f: &Formula) -> Result<(), ProofError> {
        for r in f.order() {
            let step = match *r {
                ConstraintRef::Clause(i) => {
                    let id = i as u64 + 1;
                    self.live.insert(id, f.clauses()[i].lits.clone());
                    self.next_clause = self.next_clause.max(id + 1);
                    FratStep::Original { id, lits: f.clauses()[i].lits.clone() }
                }
                ConstraintRef::Xor(i) => {
                    let id = i as u64 + 1;
                    self.xors.push((id, f.xors()[i].clone()));
                    FratStep::OriginalXor { id, xor: f.xors()[i].clone() }
                }
                ConstraintRef::Bnn(i) => {
                    let id = i as u64 + 1;
                    self.bnns.push((id, f.bnns()[i].clone()));
                    FratStep::OriginalBnn { id, bnn: f.bnns()[i].clone() }
                }
            };
            self.emit(&step)?;
        }
        self.next_clause = self.next_clause.max(f.clauses().len() as u64 + 1);
        Ok(())
    }

    /// `a` step; returns the new clause id.
    pub fn log_learned(&mut self, lits: &[Lit]) -> Result<u64, ProofError> {
        let id = self.fresh();
        self.emit(&FratStep::Add { id, lits: lits.to_vec() })?;
        self.live.insert(id, lits.to_vec());
        Ok(id)
    }

    /// `i ... b l <bnn> 0 [u <units> 0]` step.
    pub fn log_clause_from_bnn(&mut self, lits: &[Lit], bnn: u64, units: &[u64]) -> Result<u64, ProofError> {
        let id = self.fresh();
        self.emit(&FratStep::FromBnn { id, lits: lits.to_vec(), bnn, units: units.to_vec() })?;
        self.live.insert(id, lits.to_vec());
        self.implied_steps += 1;
        Ok(id)
    }

    /// `i ... l <xors> 0` step.
    pub fn log_clause_from_xor(&mut self, lits: &[Lit], xors: &[u64]) -> Result<u64, ProofError> {
        let id = self.fresh();
        self.emit(&FratStep::FromXor { id, lits: lits.to_vec(), xors: xors.to_vec() })?;
        self.live.insert(id, lits.to_vec());
        self.implied_steps += 1;
        Ok(id)
    }

    pub fn log_delete(&mut self, id: u64) -> Result<(), ProofError> {
        let lits = self.live.get(&id).cloned().ok_or(ProofError::UnknownClause(id))?;
        self.emit(&FratStep::Delete { id, lits })?;
        self.live.remove(&id);
        Ok(())
    }

    /// Emits `f` lines for all live clauses, XORs and BNNs and closes the proof.
    pub fn log_final(&mut self) -> Result<(), ProofError> {
        let live = std::mem::take(&mut self.live);
        for (id, lits) in live {
            self.emit(&FratStep::Final { id, lits })?;
        }
        for (id, xor) in std::mem::take(&mut self.xors) {
            self.emit(&FratStep::FinalXor { id, xor })?;
        }
        for (id, bnn) in std::mem::take(&mut self.bnns) {
            self.emit(&FratStep::FinalBnn { id, bnn })?;
        }
        self.finished = true;
        self.out.flush()?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<(), ProofError> {
        self.out.flush()?;
        Ok(())
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    /// Number of steps written so far.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Number of clause-from-bnn and clause-from-xor steps written so far.
    pub fn implied_steps(&self) -> u64 {
        self.implied_steps
    }
}
