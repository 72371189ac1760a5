//! CDCL search over clauses, XOR constraints and BNN constraints.
//!
//! Clauses and BNN constraints share one watch structure indexed by literal.
//! A clause is watched by two of its literals; a BNN constraint is watched
//! by both polarities of every LHS variable and of its output, so any
//! assignment to one of its variables reaches it. Each processed trail
//! literal runs clause watches, then BNN watches, then Gauss-Jordan
//! elimination on the literal's XOR component.

mod bnn;
mod heap;
mod xor;

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::formula::{Assignment, Formula, Lit, Var};
use crate::proof::{ProofError, ProofSink};
use bnn::BnnState;
use heap::VarHeap;
use xor::{Lowered, XorClause, XorEngine};

#[derive(Clone, Debug)]
pub struct SolverConfig {
    /// Give up after this many conflicts in one `solve` call.
    pub max_conflicts: Option<u64>,
    /// Give up after this much wall time in one `solve` call.
    pub time_limit: Option<Duration>,
    /// Recount every BNN constraint at each propagation fixpoint and after
    /// each backtrack; panics on divergence.
    pub check_counters: bool,
    /// Conflicts per Luby restart unit.
    pub restart_unit: u64,
    /// Polarity used for variables never assigned before.
    pub default_phase: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_conflicts: None,
            time_limit: None,
            check_counters: false,
            restart_unit: 100,
            default_phase: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Sat(Assignment),
    Unsat,
}

impl Verdict {
    pub fn is_sat(&self) -> bool {
        matches!(self, Verdict::Sat(_))
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("resource budget exhausted")]
    BudgetExhausted,
    #[error(transparent)]
    Proof(#[from] ProofError),
}

#[derive(Clone, Debug, Default)]
pub struct Stats {
    pub conflicts: u64,
    pub decisions: u64,
    pub propagations: u64,
    pub restarts: u64,
    pub learned: u64,
    pub deleted: u64,
}

/// Outcome of [`Solver::probe`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Probe {
    /// Literals implied by propagation, each with its reason clause
    /// (implied literal first).
    pub implied: Vec<(Lit, Vec<Lit>)>,
    /// Conflict clause, if propagation failed.
    pub conflict: Option<Vec<Lit>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Reason {
    None,
    Clause(u32),
    Bnn(u32),
    Xor(u32),
}

#[derive(Clone, Debug)]
enum Conflict {
    Clause(u32),
    Bnn(u32),
    Xor(XorClause),
}

struct ClauseData {
    lits: Vec<Lit>,
    learnt: bool,
    deleted: bool,
    proof_id: u64,
    lbd: u32,
    activity: f64,
}

#[derive(Clone, Copy)]
enum Watch {
    Clause { cref: u32, blocker: Lit },
    Bnn { idx: u32, lit: Lit, output: bool },
}

struct XorEntry {
    vars: Vec<Var>,
    rhs: bool,
    proof_id: u64,
    lowered: bool,
}

const UNDEF: u8 = 2;

pub struct Solver<'w> {
    config: SolverConfig,
    num_vars: usize,
    ok: bool,

    assigns: Vec<u8>,
    level: Vec<u32>,
    reason: Vec<Reason>,
    trail_pos: Vec<u32>,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,

    watches: Vec<Vec<Watch>>,
    clauses: Vec<ClauseData>,
    learnts: Vec<u32>,
    max_learnts: f64,
    cla_inc: f64,

    bnns: Vec<BnnState>,
    bnn_occ: Vec<Vec<(u32, Lit)>>,

    xors: Vec<XorEntry>,
    engine: XorEngine,
    xor_dirty: bool,
    xor_reasons: Vec<XorClause>,
    xor_reason_lim: Vec<usize>,

    activity: Vec<f64>,
    var_inc: f64,
    heap: VarHeap,
    phase: Vec<bool>,
    seen: Vec<bool>,

    proof: Option<ProofSink<'w>>,
    unit_id: Vec<u64>,
    failed: Vec<Lit>,
    stats: Stats,
}

fn val(assigns: &[u8], l: Lit) -> Option<bool> {
    match assigns[l.var().offset()] {
        UNDEF => None,
        a => Some((a == 1) ^ l.is_negated()),
    }
}

fn luby(y: f64, mut x: u64) -> f64 {
    let mut size = 1u64;
    let mut seq = 0u32;
    while size < x + 1 {
        seq += 1;
        size = 2 * size + 1;
    }
    while size - 1 != x {
        size = (size - 1) >> 1;
        seq -= 1;
        x %= size;
    }
    y.powi(seq as i32)
}

impl Solver<'static> {
    pub fn new(f: &Formula, config: SolverConfig) -> Solver<'static> {
        let mut s = Solver::empty(config, None);
        s.load(f).expect("no proof output attached");
        s
    }
}

impl<'w> Solver<'w> {
    /// A solver that logs a FRAT-XOR-BNN proof of `f` to `sink`. Constraint
    /// ids follow the formula's file order.
    pub fn with_proof(f: &Formula, config: SolverConfig, mut sink: ProofSink<'w>) -> Result<Solver<'w>, ProofError> {
        sink.log_original(f)?;
        let mut s = Solver::empty(config, Some(sink));
        s.load(f)?;
        Ok(s)
    }

    fn empty(config: SolverConfig, proof: Option<ProofSink<'w>>) -> Solver<'w> {
        Solver {
            config,
            num_vars: 0,
            ok: true,
            assigns: Vec::new(),
            level: Vec::new(),
            reason: Vec::new(),
            trail_pos: Vec::new(),
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            watches: Vec::new(),
            clauses: Vec::new(),
            learnts: Vec::new(),
            max_learnts: 0.0,
            cla_inc: 1.0,
            bnns: Vec::new(),
            bnn_occ: Vec::new(),
            xors: Vec::new(),
            engine: XorEngine::default(),
            xor_dirty: false,
            xor_reasons: Vec::new(),
            xor_reason_lim: Vec::new(),
            activity: Vec::new(),
            var_inc: 1.0,
            heap: VarHeap::default(),
            phase: Vec::new(),
            seen: Vec::new(),
            proof,
            unit_id: Vec::new(),
            failed: Vec::new(),
            stats: Stats::default(),
        }
    }

    fn load(&mut self, f: &Formula) -> Result<(), ProofError> {
        while self.num_vars < f.num_vars() as usize {
            self.add_var();
        }
        for (i, c) in f.clauses().iter().enumerate() {
            let proof_id = if self.proof.is_some() { i as u64 + 1 } else { 0 };
            let Some(norm) = c.normalized() else { continue };
            if let Some(confl) = self.attach_clause(norm.lits, false, proof_id) {
                self.derive_empty(confl)?;
                return Ok(());
            }
        }
        for (i, x) in f.xors().iter().enumerate() {
            let (vars, rhs) = x.canonical();
            self.xors.push(XorEntry { vars, rhs, proof_id: i as u64 + 1, lowered: false });
            self.xor_dirty = true;
        }
        for (i, b) in f.bnns().iter().enumerate() {
            let idx = self.bnns.len() as u32;
            for &a in b.lhs() {
                self.watches[a.code()].push(Watch::Bnn { idx, lit: a, output: false });
                self.watches[(!a).code()].push(Watch::Bnn { idx, lit: a, output: false });
                self.bnn_occ[a.var().offset()].push((idx, a));
            }
            let out = b.output();
            self.watches[out.code()].push(Watch::Bnn { idx, lit: out, output: true });
            self.watches[(!out).code()].push(Watch::Bnn { idx, lit: out, output: true });
            self.bnns.push(BnnState {
                lhs: b.lhs().to_vec(),
                k: b.cutoff(),
                out,
                true_count: 0,
                undef_count: b.len() as u32,
                proof_id: i as u64 + 1,
            });
        }
        self.max_learnts = (self.clauses.len() as f64 / 3.0).max(2000.0);
        Ok(())
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn stats(&self) -> &Stats {
        &self.stats
    }

    /// False once unsatisfiability has been established without assumptions.
    pub fn is_ok(&self) -> bool {
        self.ok
    }

    /// Assumptions responsible for the last assumption-level UNSAT answer.
    pub fn failed_assumptions(&self) -> &[Lit] {
        &self.failed
    }

    /// Takes the proof sink back, e.g. to inspect step counts.
    pub fn take_proof(&mut self) -> Option<ProofSink<'w>> {
        self.proof.take()
    }

    pub fn add_var(&mut self) -> Var {
        let v = self.num_vars;
        self.num_vars += 1;
        self.assigns.push(UNDEF);
        self.level.push(0);
        self.reason.push(Reason::None);
        self.trail_pos.push(0);
        self.watches.push(Vec::new());
        self.watches.push(Vec::new());
        self.bnn_occ.push(Vec::new());
        self.activity.push(0.0);
        self.phase.push(self.config.default_phase);
        self.seen.push(false);
        self.unit_id.push(0);
        self.heap.grow(self.num_vars);
        self.heap.insert(v, &self.activity);
        Var::from_offset(v)
    }

    /// Adds a clause between solve calls. Not available with proof logging.
    pub fn add_clause(&mut self, lits: &[Lit]) {
        assert!(self.proof.is_none(), "incremental clauses cannot be proof-logged");
        if !self.ok {
            return;
        }
        self.backtrack(0);
        let mut lits = lits.to_vec();
        lits.sort();
        lits.dedup();
        if lits.windows(2).any(|w| w[0] == !w[1]) {
            return;
        }
        for l in &lits {
            while l.var().offset() >= self.num_vars {
                self.add_var();
            }
        }
        if let Some(c) = self.attach_clause(lits, false, 0) {
            let _ = self.derive_empty(c);
        }
    }

    /// Adds an XOR constraint `⊕ vars = rhs` between solve calls. Not
    /// available with proof logging.
    pub fn add_xor(&mut self, vars: &[Var], rhs: bool) {
        assert!(self.proof.is_none(), "incremental XORs cannot be proof-logged");
        for v in vars {
            while v.offset() >= self.num_vars {
                self.add_var();
            }
        }
        let (vars, rhs) = crate::formula::XorConstraint::new(vars.iter().map(|v| v.positive()).collect(), rhs).canonical();
        let proof_id = self.xors.len() as u64 + 1;
        self.xors.push(XorEntry { vars, rhs, proof_id, lowered: false });
        self.xor_dirty = true;
    }

    fn value(&self, l: Lit) -> Option<bool> {
        val(&self.assigns, l)
    }

    fn decision_level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    fn enqueue(&mut self, l: Lit, r: Reason) {
        let v = l.var().offset();
        debug_assert_eq!(self.assigns[v], UNDEF);
        self.assigns[v] = u8::from(!l.is_negated());
        self.level[v] = self.decision_level();
        self.reason[v] = r;
        self.trail_pos[v] = self.trail.len() as u32;
        self.trail.push(l);
    }

    fn new_decision_level(&mut self) {
        self.trail_lim.push(self.trail.len());
        self.xor_reason_lim.push(self.xor_reasons.len());
    }

    fn backtrack(&mut self, level: u32) {
        if self.decision_level() <= level {
            return;
        }
        let lim = self.trail_lim[level as usize];
        for i in (lim..self.trail.len()).rev() {
            let l = self.trail[i];
            let v = l.var().offset();
            if i < self.qhead {
                for j in 0..self.bnn_occ[v].len() {
                    let (idx, a) = self.bnn_occ[v][j];
                    self.bnn_uncount(idx, a);
                }
            }
            self.phase[v] = !l.is_negated();
            self.assigns[v] = UNDEF;
            self.reason[v] = Reason::None;
            self.heap.insert(v, &self.activity);
        }
        self.trail.truncate(lim);
        self.qhead = self.qhead.min(lim);
        self.xor_reasons.truncate(self.xor_reason_lim[level as usize]);
        self.trail_lim.truncate(level as usize);
        self.xor_reason_lim.truncate(level as usize);
        if self.config.check_counters {
            self.assert_counters();
        }
    }

    /// Stores a clause and watches it. Must be called at decision level 0
    /// unless `learnt`; for learned clauses `lits[0]` is asserting and
    /// `lits[1]` has the highest remaining level.
    fn attach_clause(&mut self, mut lits: Vec<Lit>, learnt: bool, proof_id: u64) -> Option<Conflict> {
        let cref = self.clauses.len() as u32;
        if !learnt && lits.len() >= 2 {
            // Non-false literals first, then false ones by decreasing level.
            let key = |s: &Self, l: Lit| match s.value(l) {
                Some(false) => (1, u32::MAX - s.level[l.var().offset()]),
                _ => (0, 0),
            };
            lits.sort_by_key(|&l| key(self, l));
        }
        let len = lits.len();
        let (first, second) = (lits.first().copied(), lits.get(1).copied());
        self.clauses.push(ClauseData { lits, learnt, deleted: false, proof_id, lbd: 0, activity: 0.0 });
        if learnt {
            self.learnts.push(cref);
        }
        match len {
            0 => return Some(Conflict::Clause(cref)),
            1 => {}
            _ => {
                let (a, b) = (first.unwrap(), second.unwrap());
                self.watches[a.code()].push(Watch::Clause { cref, blocker: b });
                self.watches[b.code()].push(Watch::Clause { cref, blocker: a });
            }
        }
        let a = first.unwrap();
        match self.value(a) {
            Some(false) => Some(Conflict::Clause(cref)),
            Some(true) => None,
            None => {
                if second.is_none_or(|b| self.value(b) == Some(false)) {
                    self.enqueue(a, Reason::Clause(cref));
                }
                None
            }
        }
    }

    fn propagate(&mut self) -> Option<Conflict> {
        let mut conflict = None;
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            self.stats.propagations += 1;
            let false_lit = !p;
            let mut ws = std::mem::take(&mut self.watches[false_lit.code()]);
            let mut j = 0;
            for i in 0..ws.len() {
                let w = ws[i];
                match w {
                    Watch::Bnn { idx, lit, output } => {
                        ws[j] = w;
                        j += 1;
                        if !output {
                            self.bnn_count(idx, lit);
                        }
                        if conflict.is_none() {
                            conflict = self.propagate_bnn(idx);
                        }
                    }
                    Watch::Clause { cref, blocker } => {
                        if conflict.is_some() || val(&self.assigns, blocker) == Some(true) {
                            ws[j] = w;
                            j += 1;
                            continue;
                        }
                        let c = &mut self.clauses[cref as usize];
                        if c.deleted {
                            continue;
                        }
                        if c.lits[0] == false_lit {
                            c.lits.swap(0, 1);
                        }
                        let first = c.lits[0];
                        let watch = Watch::Clause { cref, blocker: first };
                        if first != blocker && val(&self.assigns, first) == Some(true) {
                            ws[j] = watch;
                            j += 1;
                            continue;
                        }
                        let mut moved = None;
                        for k in 2..c.lits.len() {
                            if val(&self.assigns, c.lits[k]) != Some(false) {
                                c.lits.swap(1, k);
                                moved = Some(c.lits[1]);
                                break;
                            }
                        }
                        if let Some(nw) = moved {
                            self.watches[nw.code()].push(watch);
                            continue;
                        }
                        ws[j] = watch;
                        j += 1;
                        match val(&self.assigns, first) {
                            Some(false) => conflict = Some(Conflict::Clause(cref)),
                            None => self.enqueue(first, Reason::Clause(cref)),
                            Some(true) => {}
                        }
                    }
                }
            }
            ws.truncate(j);
            debug_assert!(self.watches[false_lit.code()].is_empty());
            self.watches[false_lit.code()] = ws;
            if conflict.is_some() {
                return conflict;
            }
            if let Some(ci) = self.engine.component_of(p.var()) {
                if let Some(c) = self.xor_propagate(ci) {
                    return Some(c);
                }
            }
        }
        None
    }

    fn xor_propagate(&mut self, ci: usize) -> Option<Conflict> {
        let assigns = &self.assigns;
        let found = self.engine.propagate(ci, |v| val(assigns, v.positive()));
        match found {
            Err(c) => Some(Conflict::Xor(c)),
            Ok(implied) => {
                for xc in implied {
                    let l = xc.lits[0];
                    match self.value(l) {
                        None => {
                            let ix = self.xor_reasons.len() as u32;
                            self.xor_reasons.push(xc);
                            self.enqueue(l, Reason::Xor(ix));
                        }
                        Some(false) => return Some(Conflict::Xor(xc)),
                        Some(true) => {}
                    }
                }
                None
            }
        }
    }

    /// Rebuilds the XOR components at level 0, lowering small ones to clauses.
    fn rebuild_xors(&mut self) -> Result<Option<Conflict>, ProofError> {
        self.xor_dirty = false;
        let input: Vec<(u32, Vec<Var>, bool)> = self
            .xors
            .iter()
            .enumerate()
            .filter(|(_, x)| !x.lowered)
            .map(|(i, x)| (i as u32, x.vars.clone(), x.rhs))
            .collect();
        let (engine, lowered) = XorEngine::build(self.num_vars, &input);
        self.engine = engine;
        for low in lowered {
            match low {
                Lowered::Contradiction(i) => {
                    return Ok(Some(Conflict::Xor(XorClause { lits: Vec::new(), rows: vec![i] })));
                }
                Lowered::Clauses(i, clauses) => {
                    self.xors[i as usize].lowered = true;
                    let xid = self.xors[i as usize].proof_id;
                    for cl in clauses {
                        let pid = match self.proof.as_mut() {
                            Some(p) => p.log_clause_from_xor(&cl, &[xid])?,
                            None => 0,
                        };
                        if let Some(c) = self.attach_clause(cl, false, pid) {
                            return Ok(Some(c));
                        }
                    }
                }
            }
        }
        for ci in 0..self.engine.num_components() {
            if let Some(c) = self.xor_propagate(ci) {
                return Ok(Some(c));
            }
        }
        Ok(None)
    }

    /// Reason clause of an assigned variable, implied literal first.
    fn reason_lits(&self, v: Var) -> Vec<Lit> {
        let implied = Lit::new(v, self.assigns[v.offset()] == 0);
        match self.reason[v.offset()] {
            Reason::None => vec![implied],
            Reason::Clause(cref) => {
                let lits = &self.clauses[cref as usize].lits;
                let mut out = Vec::with_capacity(lits.len());
                out.push(implied);
                out.extend(lits.iter().copied().filter(|&l| l != implied));
                out
            }
            Reason::Bnn(idx) => self.bnn_reason(idx, implied),
            Reason::Xor(ix) => self.xor_reasons[ix as usize].lits.clone(),
        }
    }

    fn conflict_lits(&self, c: &Conflict) -> Vec<Lit> {
        match c {
            Conflict::Clause(cref) => self.clauses[*cref as usize].lits.clone(),
            Conflict::Bnn(idx) => self.bnn_conflict(*idx),
            Conflict::Xor(xc) => xc.lits.clone(),
        }
    }

    fn xor_ids(&self, rows: &[u32]) -> Vec<u64> {
        rows.iter().map(|&r| self.xors[r as usize].proof_id).collect()
    }

    /// Makes sure the level-0 literal of `v` exists as a unit clause in the
    /// proof, deriving its antecedents' units first.
    fn ensure_unit(&mut self, v: Var) -> Result<u64, ProofError> {
        if self.proof.is_none() || self.unit_id[v.offset()] != 0 {
            return Ok(self.unit_id[v.offset()]);
        }
        let mut stack = vec![v];
        while let Some(&top) = stack.last() {
            if self.unit_id[top.offset()] != 0 {
                stack.pop();
                continue;
            }
            debug_assert_eq!(self.level[top.offset()], 0);
            let lits = self.reason_lits(top);
            let before = stack.len();
            for l in &lits[1..] {
                if self.unit_id[l.var().offset()] == 0 {
                    stack.push(l.var());
                }
            }
            if stack.len() > before {
                continue;
            }
            let implied = lits[0];
            let units: Vec<u64> = lits[1..].iter().map(|l| self.unit_id[l.var().offset()]).collect();
            let reason = self.reason[top.offset()];
            let xor_rows = match reason {
                Reason::Xor(ix) => self.xor_ids(&self.xor_reasons[ix as usize].rows),
                _ => Vec::new(),
            };
            let proof = self.proof.as_mut().unwrap();
            let id = match reason {
                Reason::Clause(cref) => {
                    let c = &self.clauses[cref as usize];
                    if c.lits.len() == 1 {
                        c.proof_id
                    } else {
                        proof.log_learned(&[implied])?
                    }
                }
                Reason::Bnn(idx) => proof.log_clause_from_bnn(&[implied], self.bnns[idx as usize].proof_id, &units)?,
                Reason::Xor(_) => {
                    let t = proof.log_clause_from_xor(&lits, &xor_rows)?;
                    let id = proof.log_learned(&[implied])?;
                    proof.log_delete(t)?;
                    id
                }
                Reason::None => unreachable!("level-0 decision"),
            };
            self.unit_id[top.offset()] = id;
            stack.pop();
        }
        Ok(self.unit_id[v.offset()])
    }

    /// Logs a BNN or XOR clause used in conflict analysis. Returns the id of
    /// the transient step, if one was written.
    fn materialize(&mut self, lits: &[Lit], src: MaterializeSrc) -> Result<Option<u64>, ProofError> {
        if self.proof.is_none() {
            return Ok(None);
        }
        let mut kept = Vec::with_capacity(lits.len());
        let mut units = Vec::new();
        for &l in lits {
            if self.level[l.var().offset()] == 0 && self.value(l) == Some(false) {
                units.push(self.ensure_unit(l.var())?);
                if matches!(src, MaterializeSrc::Xor(_)) {
                    kept.push(l);
                }
            } else {
                kept.push(l);
            }
        }
        let proof = self.proof.as_mut().unwrap();
        let id = match src {
            MaterializeSrc::Clause => return Ok(None),
            MaterializeSrc::Bnn(idx) => proof.log_clause_from_bnn(&kept, self.bnns[idx as usize].proof_id, &units)?,
            MaterializeSrc::Xor(ids) => proof.log_clause_from_xor(&kept, &ids)?,
        };
        Ok(Some(id))
    }

    fn source_of_reason(&self, v: Var) -> MaterializeSrc {
        match self.reason[v.offset()] {
            Reason::Bnn(idx) => MaterializeSrc::Bnn(idx),
            Reason::Xor(ix) => MaterializeSrc::Xor(self.xor_ids(&self.xor_reasons[ix as usize].rows)),
            _ => MaterializeSrc::Clause,
        }
    }

    fn source_of_conflict(&self, c: &Conflict) -> MaterializeSrc {
        match c {
            Conflict::Clause(_) => MaterializeSrc::Clause,
            Conflict::Bnn(idx) => MaterializeSrc::Bnn(*idx),
            Conflict::Xor(xc) => MaterializeSrc::Xor(self.xor_ids(&xc.rows)),
        }
    }

    /// Derives the empty clause from a conflict among level-0 literals and
    /// closes the proof.
    fn derive_empty(&mut self, confl: Conflict) -> Result<(), ProofError> {
        self.ok = false;
        if self.proof.is_none() {
            return Ok(());
        }
        let lits = self.conflict_lits(&confl);
        let src = self.source_of_conflict(&confl);
        let direct = matches!(src, MaterializeSrc::Bnn(_));
        for l in &lits {
            self.ensure_unit(l.var())?;
        }
        self.materialize(&lits, src)?;
        let proof = self.proof.as_mut().unwrap();
        if !direct {
            proof.log_learned(&[])?;
        }
        proof.log_final()
    }

    fn bump_var(&mut self, v: usize) {
        self.activity[v] += self.var_inc;
        if self.activity[v] > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
        self.heap.bumped(v, &self.activity);
    }

    fn bump_clause(&mut self, cref: u32) {
        let c = &mut self.clauses[cref as usize];
        if !c.learnt {
            return;
        }
        c.activity += self.cla_inc;
        if c.activity > 1e20 {
            for &r in &self.learnts {
                self.clauses[r as usize].activity *= 1e-20;
            }
            self.cla_inc *= 1e-20;
        }
    }

    /// First-UIP analysis. Returns the learned clause (asserting literal
    /// first), the backjump level, its LBD and the transient proof steps to
    /// delete once the clause is logged.
    fn analyze(&mut self, confl: Conflict) -> Result<(Vec<Lit>, u32, u32, Vec<u64>), ProofError> {
        let mut transient = Vec::new();
        let mut learnt = vec![Lit::new(Var::new(1), false)];
        let mut to_clear: Vec<usize> = Vec::new();

        let mut lits = self.conflict_lits(&confl);
        let conflict_level = lits.iter().map(|l| self.level[l.var().offset()]).max().unwrap_or(0);
        let src = self.source_of_conflict(&confl);
        transient.extend(self.materialize(&lits, src)?);
        if let Conflict::Clause(cref) = confl {
            self.bump_clause(cref);
        }

        let mut path = 0usize;
        let mut idx = self.trail.len();
        let mut skip_first = false;
        loop {
            for &q in &lits[usize::from(skip_first)..] {
                let v = q.var().offset();
                if self.seen[v] {
                    continue;
                }
                if self.level[v] == 0 {
                    self.ensure_unit(q.var())?;
                    continue;
                }
                self.seen[v] = true;
                to_clear.push(v);
                self.bump_var(v);
                if self.level[v] >= conflict_level {
                    path += 1;
                } else {
                    learnt.push(q);
                }
            }
            loop {
                idx -= 1;
                if self.seen[self.trail[idx].var().offset()] {
                    break;
                }
            }
            let p = self.trail[idx];
            self.seen[p.var().offset()] = false;
            path -= 1;
            if path == 0 {
                learnt[0] = !p;
                break;
            }
            lits = self.reason_lits(p.var());
            let src = self.source_of_reason(p.var());
            transient.extend(self.materialize(&lits, src)?);
            if let Reason::Clause(cref) = self.reason[p.var().offset()] {
                self.bump_clause(cref);
            }
            skip_first = true;
        }

        // Drop literals whose reason is subsumed by the rest of the clause.
        let mut keep = vec![learnt[0]];
        for &l in &learnt[1..] {
            let v = l.var();
            let removable = self.reason[v.offset()] != Reason::None && {
                let rl = self.reason_lits(v);
                rl[1..].iter().all(|q| self.seen[q.var().offset()] || self.level[q.var().offset()] == 0)
            };
            if removable {
                let rl = self.reason_lits(v);
                for q in &rl[1..] {
                    if self.level[q.var().offset()] == 0 {
                        self.ensure_unit(q.var())?;
                    }
                }
                let src = self.source_of_reason(v);
                transient.extend(self.materialize(&rl, src)?);
            } else {
                keep.push(l);
            }
        }
        let mut learnt = keep;
        for v in to_clear {
            self.seen[v] = false;
        }

        let mut bt = 0;
        if learnt.len() > 1 {
            let mut best = 1;
            for i in 2..learnt.len() {
                if self.level[learnt[i].var().offset()] > self.level[learnt[best].var().offset()] {
                    best = i;
                }
            }
            learnt.swap(1, best);
            bt = self.level[learnt[1].var().offset()];
        }
        let mut levels: Vec<u32> = learnt.iter().map(|l| self.level[l.var().offset()]).collect();
        levels.sort_unstable();
        levels.dedup();

        Ok((learnt, bt, levels.len() as u32, transient))
    }

    /// Collects the assumptions that imply `¬p`.
    fn analyze_final(&mut self, p: Lit) {
        self.failed = vec![p];
        if self.level[p.var().offset()] == 0 {
            return;
        }
        self.seen[p.var().offset()] = true;
        for i in (self.trail_lim[0]..self.trail.len()).rev() {
            let v = self.trail[i].var();
            if !self.seen[v.offset()] {
                continue;
            }
            if self.reason[v.offset()] == Reason::None {
                if v != p.var() {
                    self.failed.push(!self.trail[i]);
                }
            } else {
                for q in &self.reason_lits(v)[1..] {
                    if self.level[q.var().offset()] > 0 {
                        self.seen[q.var().offset()] = true;
                    }
                }
            }
            self.seen[v.offset()] = false;
        }
        self.seen[p.var().offset()] = false;
    }

    fn locked(&self, cref: u32) -> bool {
        let c = &self.clauses[cref as usize];
        let l = c.lits[0];
        self.value(l) == Some(true) && self.reason[l.var().offset()] == Reason::Clause(cref)
    }

    fn reduce_db(&mut self) -> Result<(), ProofError> {
        let mut cands: Vec<u32> = self.learnts.iter().copied().filter(|&r| !self.clauses[r as usize].deleted).collect();
        cands.sort_by(|&a, &b| {
            let (ca, cb) = (&self.clauses[a as usize], &self.clauses[b as usize]);
            cb.lbd.cmp(&ca.lbd).then(ca.activity.total_cmp(&cb.activity))
        });
        let target = cands.len() / 2;
        let mut removed = 0;
        for &r in &cands {
            if removed >= target {
                break;
            }
            let c = &self.clauses[r as usize];
            if c.lbd <= 2 || c.lits.len() <= 2 || self.locked(r) {
                continue;
            }
            if let Some(p) = self.proof.as_mut() {
                p.log_delete(c.proof_id)?;
            }
            let c = &mut self.clauses[r as usize];
            c.deleted = true;
            c.lits = Vec::new();
            removed += 1;
        }
        self.stats.deleted += removed as u64;
        self.learnts.retain(|&r| !self.clauses[r as usize].deleted);
        for ws in &mut self.watches {
            let clauses = &self.clauses;
            ws.retain(|w| match w {
                Watch::Clause { cref, .. } => !clauses[*cref as usize].deleted,
                Watch::Bnn { .. } => true,
            });
        }
        Ok(())
    }

    fn pick_branch(&mut self) -> Option<Lit> {
        while let Some(v) = self.heap.pop(&self.activity) {
            if self.assigns[v] == UNDEF {
                return Some(Lit::new(Var::from_offset(v), !self.phase[v]));
            }
        }
        None
    }

    fn model(&self) -> Assignment {
        Assignment::from_values(
            self.assigns
                .iter()
                .map(|&a| match a {
                    UNDEF => None,
                    a => Some(a == 1),
                })
                .collect(),
        )
    }

    /// Level-0 setup shared by `solve` and `probe`. Returns false when the
    /// formula is unsatisfiable.
    fn prepare(&mut self) -> Result<bool, ProofError> {
        if !self.ok {
            return Ok(false);
        }
        self.backtrack(0);
        if self.xor_dirty {
            if let Some(c) = self.rebuild_xors()? {
                self.derive_empty(c)?;
                return Ok(false);
            }
        }
        if let Some(c) = self.propagate() {
            self.derive_empty(c)?;
            return Ok(false);
        }
        Ok(true)
    }

    /// Solves under `assumptions`. With proof logging, an UNSAT answer
    /// without assumptions closes the proof with the empty clause.
    pub fn solve(&mut self, assumptions: &[Lit]) -> Result<Verdict, SolveError> {
        self.failed.clear();
        for a in assumptions {
            while a.var().offset() >= self.num_vars {
                self.add_var();
            }
        }
        if !self.prepare()? {
            return Ok(Verdict::Unsat);
        }
        let start = Instant::now();
        let start_conflicts = self.stats.conflicts;
        let mut restart_round = 0u64;
        let mut restart_budget = luby(2.0, restart_round) * self.config.restart_unit as f64;
        let mut since_restart = 0u64;

        loop {
            if let Some(confl) = self.propagate() {
                self.stats.conflicts += 1;
                since_restart += 1;
                let lits = self.conflict_lits(&confl);
                if lits.iter().all(|l| self.level[l.var().offset()] == 0) {
                    self.derive_empty(confl)?;
                    return Ok(Verdict::Unsat);
                }
                let (learnt, bt, lbd, transient) = self.analyze(confl)?;
                self.backtrack(bt);
                let pid = match self.proof.as_mut() {
                    Some(p) => {
                        let id = p.log_learned(&learnt)?;
                        for t in transient {
                            p.log_delete(t)?;
                        }
                        id
                    }
                    None => 0,
                };
                self.stats.learned += 1;
                let asserting = learnt[0];
                let cref = self.clauses.len() as u32;
                self.attach_clause(learnt, true, pid);
                self.clauses[cref as usize].lbd = lbd;
                self.bump_clause(cref);
                if self.value(asserting).is_none() {
                    self.enqueue(asserting, Reason::Clause(cref));
                }
                self.var_inc /= 0.95;
                self.cla_inc /= 0.999;

                if let Some(max) = self.config.max_conflicts {
                    if self.stats.conflicts - start_conflicts >= max {
                        self.backtrack(0);
                        return Err(SolveError::BudgetExhausted);
                    }
                }
                if let Some(limit) = self.config.time_limit {
                    if start.elapsed() >= limit {
                        self.backtrack(0);
                        return Err(SolveError::BudgetExhausted);
                    }
                }
            } else {
                if self.config.check_counters {
                    self.assert_counters();
                }
                if since_restart as f64 >= restart_budget {
                    restart_round += 1;
                    restart_budget = luby(2.0, restart_round) * self.config.restart_unit as f64;
                    since_restart = 0;
                    self.stats.restarts += 1;
                    self.backtrack(0);
                    continue;
                }
                if self.learnts.len() as f64 >= self.max_learnts + self.trail.len() as f64 {
                    self.reduce_db()?;
                    self.max_learnts *= 1.1;
                }

                let mut next = None;
                while (self.decision_level() as usize) < assumptions.len() {
                    let p = assumptions[self.decision_level() as usize];
                    match self.value(p) {
                        Some(true) => self.new_decision_level(),
                        Some(false) => {
                            self.analyze_final(!p);
                            self.failed.iter_mut().for_each(|l| *l = !*l);
                            self.backtrack(0);
                            return Ok(Verdict::Unsat);
                        }
                        None => {
                            next = Some(p);
                            break;
                        }
                    }
                }
                let next = match next {
                    Some(p) => p,
                    None => match self.pick_branch() {
                        Some(p) => {
                            self.stats.decisions += 1;
                            p
                        }
                        None => {
                            let m = self.model();
                            self.backtrack(0);
                            return Ok(Verdict::Sat(m));
                        }
                    },
                };
                self.new_decision_level();
                self.enqueue(next, Reason::None);
            }
        }
    }

    /// Assigns `lits` as decisions on one fresh level, propagates, reports
    /// what followed, then undoes everything. Intended for inspecting the
    /// propagation engine.
    pub fn probe(&mut self, lits: &[Lit]) -> Result<Probe, ProofError> {
        if !self.prepare()? {
            return Ok(Probe { implied: Vec::new(), conflict: Some(Vec::new()) });
        }
        let start = self.trail.len();
        self.new_decision_level();
        let mut conflict = None;
        for &l in lits {
            match self.value(l) {
                None => self.enqueue(l, Reason::None),
                Some(true) => {}
                Some(false) => {
                    conflict = Some(vec![!l]);
                    break;
                }
            }
        }
        if conflict.is_none() {
            conflict = self.propagate().map(|c| self.conflict_lits(&c));
            if conflict.is_none() && self.config.check_counters {
                self.assert_counters();
            }
        }
        let implied = self.trail[start..]
            .iter()
            .filter(|l| self.reason[l.var().offset()] != Reason::None)
            .map(|&l| (l, self.reason_lits(l.var())))
            .collect();
        self.backtrack(0);
        Ok(Probe { implied, conflict })
    }
}

enum MaterializeSrc {
    Clause,
    Bnn(u32),
    Xor(Vec<u64>),
}

/// Solves `f` from scratch, optionally writing a FRAT-XOR-BNN proof.
pub fn solve_formula(
    f: &Formula,
    config: SolverConfig,
    proof: Option<&mut dyn std::io::Write>,
) -> Result<Verdict, SolveError> {
    match proof {
        Some(out) => {
            let mut s = Solver::with_proof(f, config, ProofSink::new(out))?;
            let v = s.solve(&[])?;
            if let Some(mut p) = s.take_proof() {
                p.flush()?;
            }
            Ok(v)
        }
        None => Solver::new(f, config).solve(&[]),
    }
}
