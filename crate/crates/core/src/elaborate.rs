//! FRAT-XOR-BNN to XLRUP elaboration.
//!
//! A forward pass checks id bookkeeping and stops at the first empty clause.
//! A backward pass then walks the derivation in reverse, keeping the clause
//! database as it was before each step, and for every step the empty clause
//! depends on reconstructs unit-propagation hints. Steps outside that cone
//! are dropped. The output lists needed XORs first, then the surviving
//! derivations in their original order, deleting each clause after its last
//! use.
//!
//! BNN and XOR implication steps are passed through without semantic
//! checks; that is the checker's job.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

use crate::formula::{Formula, Lit};
use crate::proof::{parse_frat, FratError, FratStep};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ElabError {
    #[error(transparent)]
    Parse(#[from] FratError),
    #[error("proof line {line}: {msg}")]
    Invalid { line: usize, msg: String },
    #[error("proof line {line}: clause {id} is not implied by unit propagation")]
    NotRup { line: usize, id: u64 },
    #[error("proof never derives the empty clause")]
    NoEmptyClause,
}

fn invalid(line: usize, msg: impl Into<String>) -> ElabError {
    ElabError::Invalid { line, msg: msg.into() }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    Rup,
    Bnn(u64),
    Xor,
}

struct Derived {
    line: usize,
    inst: usize,
    kind: Kind,
    /// Unit hints (BNN) as clause instances.
    units: Vec<usize>,
    /// XOR ids (XOR).
    xors: Vec<u64>,
}

enum Event {
    Derive(Derived),
    Delete(usize),
}

/// Clause instances: one per introduction of an id, so reused ids stay apart.
struct Inst {
    id: u64,
    lits: Vec<Lit>,
}

struct RupDb {
    lits: Vec<Vec<Lit>>,
    active: Vec<bool>,
    tautology: Vec<bool>,
    watches: Vec<Vec<u32>>,
    units: Vec<usize>,
    empties: Vec<usize>,
    value: Vec<u8>,
    reason: Vec<u32>,
    trail: Vec<Lit>,
    seen: Vec<bool>,
}

const UNDEF: u8 = 2;
const NO_REASON: u32 = u32::MAX;

impl RupDb {
    fn new(num_vars: usize, insts: &[Inst]) -> RupDb {
        let mut db = RupDb {
            lits: Vec::with_capacity(insts.len()),
            active: vec![false; insts.len()],
            tautology: vec![false; insts.len()],
            watches: vec![Vec::new(); 2 * num_vars],
            units: Vec::new(),
            empties: Vec::new(),
            value: vec![UNDEF; num_vars],
            reason: vec![NO_REASON; num_vars],
            trail: Vec::new(),
            seen: vec![false; num_vars],
        };
        for (i, inst) in insts.iter().enumerate() {
            let mut lits = inst.lits.clone();
            lits.sort();
            lits.dedup();
            if lits.windows(2).any(|w| w[0] == !w[1]) {
                db.tautology[i] = true;
            }
            match lits.len() {
                0 => db.empties.push(i),
                1 => db.units.push(i),
                _ => {
                    db.watches[lits[0].code()].push(i as u32);
                    db.watches[lits[1].code()].push(i as u32);
                }
            }
            db.lits.push(lits);
        }
        db
    }

    fn val(&self, l: Lit) -> Option<bool> {
        match self.value[l.var().offset()] {
            UNDEF => None,
            v => Some((v == 1) ^ l.is_negated()),
        }
    }

    fn assign(&mut self, l: Lit, reason: u32) {
        self.value[l.var().offset()] = u8::from(!l.is_negated());
        self.reason[l.var().offset()] = reason;
        self.trail.push(l);
    }

    /// Hints (clause instances, LRAT order) showing `clause` by unit
    /// propagation over the active clauses, or `None`.
    fn rup(&mut self, clause: &[Lit]) -> Option<Vec<usize>> {
        let result = self.rup_inner(clause);
        for l in std::mem::take(&mut self.trail) {
            self.value[l.var().offset()] = UNDEF;
            self.reason[l.var().offset()] = NO_REASON;
        }
        result
    }

    fn rup_inner(&mut self, clause: &[Lit]) -> Option<Vec<usize>> {
        for &l in clause {
            match self.val(l) {
                Some(true) => return Some(Vec::new()),
                Some(false) => {}
                None => self.assign(!l, NO_REASON),
            }
        }
        if let Some(&e) = self.empties.iter().find(|&&e| self.active[e]) {
            return Some(vec![e]);
        }
        let mut conflict = None;
        for i in 0..self.units.len() {
            let u = self.units[i];
            if !self.active[u] {
                continue;
            }
            let l = self.lits[u][0];
            match self.val(l) {
                Some(true) => {}
                Some(false) => {
                    conflict = Some(u);
                    break;
                }
                None => self.assign(l, u as u32),
            }
        }
        let mut head = 0;
        while conflict.is_none() && head < self.trail.len() {
            let p = self.trail[head];
            head += 1;
            let false_lit = !p;
            let mut ws = std::mem::take(&mut self.watches[false_lit.code()]);
            let mut j = 0;
            let mut i = 0;
            while i < ws.len() {
                let c = ws[i] as usize;
                i += 1;
                if !self.active[c] || self.tautology[c] || conflict.is_some() {
                    ws[j] = c as u32;
                    j += 1;
                    continue;
                }
                let lits = &mut self.lits[c];
                if lits[0] == false_lit {
                    lits.swap(0, 1);
                }
                let first = lits[0];
                let first_val = match self.value[first.var().offset()] {
                    UNDEF => None,
                    v => Some((v == 1) ^ first.is_negated()),
                };
                if first_val == Some(true) {
                    ws[j] = c as u32;
                    j += 1;
                    continue;
                }
                let mut moved = None;
                for k in 2..lits.len() {
                    let l = lits[k];
                    let lv = self.value[l.var().offset()];
                    if lv == UNDEF || ((lv == 1) ^ l.is_negated()) {
                        lits.swap(1, k);
                        moved = Some(lits[1]);
                        break;
                    }
                }
                if let Some(nw) = moved {
                    self.watches[nw.code()].push(c as u32);
                    continue;
                }
                ws[j] = c as u32;
                j += 1;
                match first_val {
                    Some(false) => conflict = Some(c),
                    None => self.assign(first, c as u32),
                    Some(true) => {}
                }
            }
            ws.truncate(j);
            let pushed = std::mem::replace(&mut self.watches[false_lit.code()], ws);
            self.watches[false_lit.code()].extend(pushed);
        }
        let conflict = conflict?;

        // Collect the reasons behind the conflict, in trail order.
        let mut used = Vec::new();
        let mut stack: Vec<Lit> = self.lits[conflict].clone();
        let mut touched = Vec::new();
        while let Some(l) = stack.pop() {
            let v = l.var().offset();
            if self.seen[v] {
                continue;
            }
            self.seen[v] = true;
            touched.push(v);
            let r = self.reason[v];
            if r != NO_REASON {
                used.push(r as usize);
                stack.extend(self.lits[r as usize].iter().copied());
            }
        }
        for v in touched {
            self.seen[v] = false;
        }
        let pos: HashMap<usize, usize> = self
            .trail
            .iter()
            .enumerate()
            .filter(|(_, l)| self.reason[l.var().offset()] != NO_REASON)
            .map(|(i, l)| (self.reason[l.var().offset()] as usize, i))
            .collect();
        used.sort_by_key(|r| pos[r]);
        used.push(conflict);
        Some(used)
    }
}

fn write_lits(out: &mut String, lits: &[Lit]) {
    for l in lits {
        let _ = write!(out, "{} ", l.to_dimacs());
    }
    out.push('0');
}

fn write_ids(out: &mut String, ids: impl IntoIterator<Item = u64>) {
    for i in ids {
        let _ = write!(out, "{i} ");
    }
    out.push('0');
}

/// Elaborates a FRAT-XOR-BNN proof of `f` into XLRUP text.
pub fn elaborate(f: &Formula, frat: &str) -> Result<String, ElabError> {
    let steps = parse_frat(frat)?;

    let mut num_vars = f.num_vars() as usize;
    let mut insts: Vec<Inst> = Vec::new();
    let mut live: HashMap<u64, usize> = HashMap::new();
    for (i, c) in f.clauses().iter().enumerate() {
        live.insert(i as u64 + 1, insts.len());
        insts.push(Inst { id: i as u64 + 1, lits: c.lits.clone() });
    }

    let mut events: Vec<Event> = Vec::new();
    let mut end = None;
    for (line, step) in &steps {
        let line = *line;
        let lits_of = |s: &FratStep| -> Option<Vec<Lit>> {
            match s {
                FratStep::Add { lits, .. } | FratStep::FromBnn { lits, .. } | FratStep::FromXor { lits, .. } => {
                    Some(lits.clone())
                }
                _ => None,
            }
        };
        if let Some(lits) = lits_of(step) {
            for l in &lits {
                num_vars = num_vars.max(l.var().index() as usize);
            }
        }
        match step {
            FratStep::Original { id, lits } => {
                let same = (*id as usize) <= f.clauses().len() && f.clauses()[*id as usize - 1].lits == *lits;
                if !same {
                    return Err(invalid(line, format!("original clause {id} does not match the formula")));
                }
            }
            FratStep::OriginalXor { id, xor } => {
                let same = (*id as usize) <= f.xors().len() && f.xors()[*id as usize - 1].canonical() == xor.canonical();
                if !same {
                    return Err(invalid(line, format!("original XOR {id} does not match the formula")));
                }
            }
            FratStep::OriginalBnn { id, bnn } => {
                let same = (*id as usize) <= f.bnns().len() && f.bnns()[*id as usize - 1] == *bnn;
                if !same {
                    return Err(invalid(line, format!("original BNN {id} does not match the formula")));
                }
            }
            FratStep::Add { id, lits } | FratStep::FromBnn { id, lits, .. } | FratStep::FromXor { id, lits, .. } => {
                if live.contains_key(id) {
                    return Err(invalid(line, format!("clause id {id} is already in use")));
                }
                let (kind, units, xors) = match step {
                    FratStep::FromBnn { bnn, units, .. } => {
                        if *bnn as usize > f.bnns().len() {
                            return Err(invalid(line, format!("unknown BNN {bnn}")));
                        }
                        let mut us = Vec::with_capacity(units.len());
                        for u in units {
                            us.push(*live.get(u).ok_or_else(|| invalid(line, format!("unit hint {u} is not live")))?);
                        }
                        (Kind::Bnn(*bnn), us, Vec::new())
                    }
                    FratStep::FromXor { xors, .. } => {
                        if let Some(x) = xors.iter().find(|&&x| x as usize > f.xors().len()) {
                            return Err(invalid(line, format!("unknown XOR {x}")));
                        }
                        (Kind::Xor, Vec::new(), xors.clone())
                    }
                    _ => (Kind::Rup, Vec::new(), Vec::new()),
                };
                let inst = insts.len();
                insts.push(Inst { id: *id, lits: lits.clone() });
                events.push(Event::Derive(Derived { line, inst, kind, units, xors }));
                if lits.is_empty() {
                    end = Some(events.len() - 1);
                    break;
                }
                live.insert(*id, inst);
            }
            FratStep::Delete { id, .. } => {
                let inst = live.remove(id).ok_or_else(|| invalid(line, format!("deleting clause {id}, which is not live")))?;
                events.push(Event::Delete(inst));
            }
            FratStep::Final { .. } | FratStep::FinalXor { .. } | FratStep::FinalBnn { .. } => {}
        }
    }
    let end = end.ok_or(ElabError::NoEmptyClause)?;

    // Backward pass over the database as it stood before each event.
    let mut db = RupDb::new(num_vars, &insts);
    for &inst in live.values() {
        db.active[inst] = true;
    }
    let mut needed = vec![false; insts.len()];
    let mut hints: Vec<Vec<usize>> = vec![Vec::new(); insts.len()];
    let Event::Derive(last) = &events[end] else { unreachable!() };
    needed[last.inst] = true;
    for ev in events[..=end].iter().rev() {
        match ev {
            Event::Delete(inst) => db.active[*inst] = true,
            Event::Derive(d) => {
                db.active[d.inst] = false;
                if !needed[d.inst] {
                    continue;
                }
                let uses = match d.kind {
                    Kind::Rup => {
                        let lits = insts[d.inst].lits.clone();
                        db.rup(&lits).ok_or(ElabError::NotRup { line: d.line, id: insts[d.inst].id })?
                    }
                    Kind::Bnn(_) => d.units.clone(),
                    Kind::Xor => Vec::new(),
                };
                for &u in &uses {
                    needed[u] = true;
                }
                hints[d.inst] = uses;
            }
        }
    }

    // Forward emission with deletions after last use.
    let derived: Vec<&Derived> = events[..=end]
        .iter()
        .filter_map(|e| match e {
            Event::Derive(d) if needed[d.inst] => Some(d),
            _ => None,
        })
        .collect();
    let mut last_use = vec![usize::MAX; insts.len()];
    for (pos, d) in derived.iter().enumerate() {
        for &u in &hints[d.inst] {
            last_use[u] = pos;
        }
    }
    let mut deaths: Vec<Vec<usize>> = vec![Vec::new(); derived.len()];
    for (inst, &pos) in last_use.iter().enumerate() {
        if pos != usize::MAX {
            deaths[pos].push(inst);
        }
    }

    let mut out = String::new();
    let needed_xors: BTreeSet<u64> = derived.iter().flat_map(|d| d.xors.iter().copied()).collect();
    for x in needed_xors {
        let xor = &f.xors()[x as usize - 1];
        let mut lits = xor.lits.clone();
        if !xor.rhs {
            match lits.first_mut() {
                Some(first) => *first = !*first,
                None => continue,
            }
        }
        let _ = write!(out, "o x {x} ");
        write_lits(&mut out, &lits);
        out.push('\n');
    }
    for (pos, d) in derived.iter().enumerate() {
        let inst = &insts[d.inst];
        let ids = |v: &[usize]| v.iter().map(|&u| insts[u].id).collect::<Vec<_>>();
        match d.kind {
            Kind::Rup => {
                let _ = write!(out, "{} ", inst.id);
                write_lits(&mut out, &inst.lits);
                out.push(' ');
                write_ids(&mut out, ids(&hints[d.inst]));
            }
            Kind::Bnn(b) => {
                let _ = write!(out, "i cb {} ", inst.id);
                write_lits(&mut out, &inst.lits);
                let _ = write!(out, " {b} ");
                if !d.units.is_empty() {
                    out.push_str("u ");
                    write_ids(&mut out, ids(&d.units));
                } else {
                    out.push('0');
                }
            }
            Kind::Xor => {
                let _ = write!(out, "i cx {} ", inst.id);
                write_lits(&mut out, &inst.lits);
                out.push(' ');
                write_ids(&mut out, d.xors.iter().copied());
            }
        }
        out.push('\n');
        let mut dead: Vec<u64> = deaths[pos].iter().map(|&u| insts[u].id).collect();
        if !dead.is_empty() && pos + 1 < derived.len() {
            dead.sort_unstable();
            let _ = write!(out, "{} d ", inst.id);
            write_ids(&mut out, dead);
            out.push('\n');
        }
    }
    Ok(out)
}
