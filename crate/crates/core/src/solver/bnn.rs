//! Counter-based propagation of conditional cardinality constraints.
//!
//! Every constraint keeps `true_count` and `undef_count` over its LHS,
//! counting only trail literals already processed by propagation. Reason and
//! conflict clauses are not stored; they are rebuilt on demand from the
//! earliest qualifying literals on the trail.

use super::{Conflict, Reason, Solver};
use crate::formula::Lit;

pub(crate) struct BnnState {
    pub lhs: Vec<Lit>,
    pub k: u32,
    pub out: Lit,
    pub true_count: u32,
    pub undef_count: u32,
    pub proof_id: u64,
}

impl Solver<'_> {
    /// Counter update for an LHS literal whose variable was just processed.
    pub(super) fn bnn_count(&mut self, idx: u32, lhs_lit: Lit) {
        let is_true = self.value(lhs_lit) == Some(true);
        let b = &mut self.bnns[idx as usize];
        if is_true {
            b.true_count += 1;
        }
        b.undef_count -= 1;
    }

    pub(super) fn bnn_uncount(&mut self, idx: u32, lhs_lit: Lit) {
        let is_true = self.value(lhs_lit) == Some(true);
        let b = &mut self.bnns[idx as usize];
        if is_true {
            b.true_count -= 1;
        }
        b.undef_count += 1;
    }

    /// Assigned but unprocessed LHS literals are skipped when implying; if one
    /// contradicts, processing it later drives the counters into a conflict.
    pub(super) fn propagate_bnn(&mut self, idx: u32) -> Option<Conflict> {
        let b = &self.bnns[idx as usize];
        let (tc, uc, k, out, n) = (b.true_count, b.undef_count, b.k, b.out, b.lhs.len());
        match self.value(out) {
            Some(true) => {
                if tc + uc < k {
                    return Some(Conflict::Bnn(idx));
                }
                if tc + uc == k && uc > 0 {
                    for i in 0..n {
                        let a = self.bnns[idx as usize].lhs[i];
                        if self.value(a).is_none() {
                            self.enqueue(a, Reason::Bnn(idx));
                        }
                    }
                }
            }
            Some(false) => {
                if tc >= k {
                    return Some(Conflict::Bnn(idx));
                }
                if tc + 1 == k && uc > 0 {
                    for i in 0..n {
                        let a = self.bnns[idx as usize].lhs[i];
                        if self.value(a).is_none() {
                            self.enqueue(!a, Reason::Bnn(idx));
                        }
                    }
                }
            }
            None => {
                if tc >= k {
                    self.enqueue(out, Reason::Bnn(idx));
                } else if tc + uc < k {
                    self.enqueue(!out, Reason::Bnn(idx));
                }
            }
        }
        None
    }

    /// The `count` LHS literals with value `want` assigned earliest, restricted
    /// to trail positions before `before`.
    fn earliest(&self, idx: u32, want: bool, before: usize, count: usize) -> Vec<Lit> {
        let mut picked: Vec<(u32, Lit)> = self.bnns[idx as usize]
            .lhs
            .iter()
            .filter(|&&a| self.value(a) == Some(want) && (self.trail_pos[a.var().offset()] as usize) < before)
            .map(|&a| (self.trail_pos[a.var().offset()], a))
            .collect();
        picked.sort_unstable();
        debug_assert!(picked.len() >= count, "not enough antecedents on the trail");
        picked.truncate(count);
        picked.into_iter().map(|(_, a)| a).collect()
    }

    /// Reason clause for `implied`, which this constraint put on the trail.
    /// The implied literal comes first; every other literal is false.
    pub(super) fn bnn_reason(&self, idx: u32, implied: Lit) -> Vec<Lit> {
        let b = &self.bnns[idx as usize];
        let (k, out, n) = (b.k as usize, b.out, b.lhs.len());
        let pos = self.trail_pos[implied.var().offset()] as usize;
        let mut clause = vec![implied];
        if implied == out {
            clause.extend(self.earliest(idx, true, pos, k).into_iter().map(|a| !a));
        } else if implied == !out {
            clause.extend(self.earliest(idx, false, pos, n - k + 1));
        } else if b.lhs.contains(&implied) {
            clause.push(!out);
            clause.extend(self.earliest(idx, false, pos, n - k));
        } else {
            debug_assert!(b.lhs.contains(&!implied));
            clause.push(out);
            clause.extend(self.earliest(idx, true, pos, k - 1).into_iter().map(|a| !a));
        }
        clause
    }

    /// Conflict clause for a violated constraint: `¬out` with `n−k+1` false
    /// LHS literals, or `out` with the negations of `k` true ones.
    pub(super) fn bnn_conflict(&self, idx: u32) -> Vec<Lit> {
        let b = &self.bnns[idx as usize];
        let (k, out, n) = (b.k as usize, b.out, b.lhs.len());
        let end = self.trail.len();
        match self.value(out) {
            Some(true) => {
                let mut clause = vec![!out];
                clause.extend(self.earliest(idx, false, end, n - k + 1));
                clause
            }
            Some(false) => {
                let mut clause = vec![out];
                clause.extend(self.earliest(idx, true, end, k).into_iter().map(|a| !a));
                clause
            }
            None => unreachable!("BNN conflict with unassigned output"),
        }
    }

    /// Recounts every constraint from the trail prefix already processed.
    pub(super) fn assert_counters(&self) {
        for (i, b) in self.bnns.iter().enumerate() {
            let mut tc = 0;
            let mut uc = 0;
            for &a in &b.lhs {
                let processed = self.value(a).is_some() && (self.trail_pos[a.var().offset()] as usize) < self.qhead;
                if !processed {
                    uc += 1;
                } else if self.value(a) == Some(true) {
                    tc += 1;
                }
            }
            assert_eq!(
                (b.true_count, b.undef_count),
                (tc, uc),
                "BNN constraint {} counters diverged from the trail",
                i + 1
            );
        }
    }
}
