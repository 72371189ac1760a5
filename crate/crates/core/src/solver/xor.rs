//! Gauss-Jordan propagation over XOR constraints.
//!
//! XORs are grouped into connected components by shared variables. Each
//! component keeps its original rows as packed bit vectors; on every
//! assignment touching the component the residual system (assigned columns
//! substituted) is brought to reduced row echelon form, which exposes every
//! implied variable and every parity conflict. Each derived row carries the
//! set of original rows it sums, so its clause form can be justified by a
//! clause-from-xor step.

use crate::formula::{Lit, Var};

/// A clause implied by a sum of original XOR rows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct XorClause {
    /// Clause literals; for implications the implied literal comes first.
    pub lits: Vec<Lit>,
    /// Indices (into the solver's XOR list) of the rows summed.
    pub rows: Vec<u32>,
}

#[derive(Debug, PartialEq, Eq)]
pub(crate) enum Lowered {
    /// An XOR with no variables and odd parity.
    Contradiction(u32),
    /// Clauses equivalent to a small XOR.
    Clauses(u32, Vec<Vec<Lit>>),
}

struct Row {
    bits: Vec<u64>,
    rhs: bool,
    origin: u32,
}

struct Component {
    vars: Vec<Var>,
    rows: Vec<Row>,
}

#[derive(Default)]
pub(crate) struct XorEngine {
    comps: Vec<Component>,
    var_comp: Vec<u32>,
}

const NONE: u32 = u32::MAX;

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

impl XorEngine {
    /// Builds components from canonical XORs `(index, vars, rhs)`. Components
    /// spanning at most two variables are returned as clauses instead.
    pub fn build(num_vars: usize, xors: &[(u32, Vec<Var>, bool)]) -> (XorEngine, Vec<Lowered>) {
        let mut lowered = Vec::new();
        let mut parent: Vec<usize> = (0..num_vars).collect();
        for (_, vars, _) in xors {
            for w in vars.windows(2) {
                let (a, b) = (find(&mut parent, w[0].offset()), find(&mut parent, w[1].offset()));
                if a != b {
                    parent[a] = b;
                }
            }
        }
        let mut root_comp: Vec<u32> = vec![NONE; num_vars];
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for (i, (idx, vars, rhs)) in xors.iter().enumerate() {
            if vars.is_empty() {
                if *rhs {
                    lowered.push(Lowered::Contradiction(*idx));
                }
                continue;
            }
            let r = find(&mut parent, vars[0].offset());
            if root_comp[r] == NONE {
                root_comp[r] = groups.len() as u32;
                groups.push(Vec::new());
            }
            groups[root_comp[r] as usize].push(i);
        }

        let mut engine = XorEngine { comps: Vec::new(), var_comp: vec![NONE; num_vars] };
        for group in groups {
            let mut vars: Vec<Var> = group.iter().flat_map(|&i| xors[i].1.iter().copied()).collect();
            vars.sort();
            vars.dedup();
            if vars.len() <= 2 {
                for &i in &group {
                    let (idx, xv, rhs) = &xors[i];
                    lowered.push(Lowered::Clauses(*idx, small_xor_clauses(xv, *rhs)));
                }
                continue;
            }
            let words = vars.len().div_ceil(64);
            let ci = engine.comps.len() as u32;
            for (col, v) in vars.iter().enumerate() {
                engine.var_comp[v.offset()] = ci;
                debug_assert!(col < u32::MAX as usize);
            }
            let rows = group
                .iter()
                .map(|&i| {
                    let (idx, xv, rhs) = &xors[i];
                    let mut bits = vec![0u64; words];
                    for v in xv {
                        let col = vars.binary_search(v).unwrap();
                        bits[col / 64] |= 1 << (col % 64);
                    }
                    Row { bits, rhs: *rhs, origin: *idx }
                })
                .collect();
            engine.comps.push(Component { vars, rows });
        }
        (engine, lowered)
    }

    pub fn num_components(&self) -> usize {
        self.comps.len()
    }

    pub fn component_of(&self, v: Var) -> Option<usize> {
        match self.var_comp.get(v.offset()) {
            Some(&c) if c != NONE => Some(c as usize),
            _ => None,
        }
    }

    /// Eliminates component `ci` under `value`. Returns a conflict clause
    /// (every literal false) or the implications found.
    pub fn propagate(&self, ci: usize, value: impl Fn(Var) -> Option<bool>) -> Result<Vec<XorClause>, XorClause> {
        let comp = &self.comps[ci];
        let ncols = comp.vars.len();
        let words = ncols.div_ceil(64);
        let nrows = comp.rows.len();
        let rwords = nrows.div_ceil(64);

        let mut unassigned = vec![0u64; words];
        let mut truth = vec![0u64; words];
        for (col, &v) in comp.vars.iter().enumerate() {
            match value(v) {
                None => unassigned[col / 64] |= 1 << (col % 64),
                Some(true) => truth[col / 64] |= 1 << (col % 64),
                Some(false) => {}
            }
        }

        // Residual rows: unassigned part, parity still required, rows summed.
        let mut mask: Vec<Vec<u64>> = Vec::with_capacity(nrows);
        let mut parity: Vec<bool> = Vec::with_capacity(nrows);
        let mut comb: Vec<Vec<u64>> = Vec::with_capacity(nrows);
        for (r, row) in comp.rows.iter().enumerate() {
            let mut m = vec![0u64; words];
            let mut ones = 0u32;
            for w in 0..words {
                m[w] = row.bits[w] & unassigned[w];
                ones += (row.bits[w] & truth[w]).count_ones();
            }
            mask.push(m);
            parity.push(row.rhs ^ (ones & 1 == 1));
            let mut c = vec![0u64; rwords];
            c[r / 64] |= 1 << (r % 64);
            comb.push(c);
        }

        let mut pivot_row = 0usize;
        let mut pivots: Vec<usize> = Vec::new();
        for col in 0..ncols {
            if unassigned[col / 64] >> (col % 64) & 1 == 0 {
                continue;
            }
            let bit = |m: &Vec<u64>| m[col / 64] >> (col % 64) & 1 == 1;
            let Some(found) = (pivot_row..nrows).find(|&r| bit(&mask[r])) else {
                continue;
            };
            mask.swap(pivot_row, found);
            parity.swap(pivot_row, found);
            comb.swap(pivot_row, found);
            for r in 0..nrows {
                if r != pivot_row && bit(&mask[r]) {
                    let (src, dst) = if r < pivot_row {
                        let (a, b) = mask.split_at_mut(pivot_row);
                        (&b[0], &mut a[r])
                    } else {
                        let (a, b) = mask.split_at_mut(r);
                        (&a[pivot_row], &mut b[0])
                    };
                    for w in 0..words {
                        dst[w] ^= src[w];
                    }
                    parity[r] ^= parity[pivot_row];
                    let (src, dst) = if r < pivot_row {
                        let (a, b) = comb.split_at_mut(pivot_row);
                        (&b[0], &mut a[r])
                    } else {
                        let (a, b) = comb.split_at_mut(r);
                        (&a[pivot_row], &mut b[0])
                    };
                    for w in 0..rwords {
                        dst[w] ^= src[w];
                    }
                }
            }
            pivots.push(col);
            pivot_row += 1;
            if pivot_row == nrows {
                break;
            }
        }

        for r in pivot_row..nrows {
            if parity[r] {
                return Err(self.clause_of(comp, &comb[r], None, &value));
            }
        }
        let mut implied = Vec::new();
        for (r, &col) in pivots.iter().enumerate() {
            let ones: u32 = mask[r].iter().map(|w| w.count_ones()).sum();
            if ones == 1 {
                let lit = Lit::new(comp.vars[col], !parity[r]);
                implied.push(self.clause_of(comp, &comb[r], Some(lit), &value));
            }
        }
        Ok(implied)
    }

    /// Clause form of the sum of the rows in `comb`: every assigned variable
    /// contributes its falsified literal, `implied` (if any) comes first.
    fn clause_of(&self, comp: &Component, comb: &[u64], implied: Option<Lit>, value: &impl Fn(Var) -> Option<bool>) -> XorClause {
        let words = comp.vars.len().div_ceil(64);
        let mut sum = vec![0u64; words];
        let mut rows = Vec::new();
        for (r, row) in comp.rows.iter().enumerate() {
            if comb[r / 64] >> (r % 64) & 1 == 1 {
                for w in 0..words {
                    sum[w] ^= row.bits[w];
                }
                rows.push(row.origin);
            }
        }
        rows.sort_unstable();
        let mut lits: Vec<Lit> = implied.into_iter().collect();
        for (col, &v) in comp.vars.iter().enumerate() {
            if sum[col / 64] >> (col % 64) & 1 == 0 || implied.is_some_and(|l| l.var() == v) {
                continue;
            }
            let val = value(v).expect("summed row has a single unassigned column");
            lits.push(Lit::new(v, val));
        }
        XorClause { lits, rows }
    }
}

/// Clauses equivalent to an XOR over at most two variables.
fn small_xor_clauses(vars: &[Var], rhs: bool) -> Vec<Vec<Lit>> {
    match vars {
        [a] => vec![vec![Lit::new(*a, !rhs)]],
        [a, b] => {
            if rhs {
                vec![vec![a.positive(), b.positive()], vec![a.negative(), b.negative()]]
            } else {
                vec![vec![a.positive(), b.negative()], vec![a.negative(), b.positive()]]
            }
        }
        _ => unreachable!("only components of at most two variables are lowered"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars(v: &[u32]) -> Vec<Var> {
        v.iter().map(|&i| Var::new(i)).collect()
    }

    fn lits(v: &[i64]) -> Vec<Lit> {
        v.iter().map(|&x| Lit::from_dimacs(x)).collect()
    }

    fn assign(vals: &[(u32, bool)]) -> impl Fn(Var) -> Option<bool> + '_ {
        move |v| vals.iter().find(|(i, _)| *i == v.index()).map(|&(_, b)| b)
    }

    #[test]
    fn running_example_conflict() {
        // x1 ^ -x2 ^ -x3 = 1 is x1 ^ x2 ^ x3 = 1.
        let (e, low) = XorEngine::build(3, &[(0, vars(&[1, 2, 3]), true)]);
        assert!(low.is_empty());
        let conflict = e.propagate(0, assign(&[(1, false), (2, false), (3, false)])).unwrap_err();
        assert_eq!(conflict, XorClause { lits: lits(&[1, 2, 3]), rows: vec![0] });
    }

    #[test]
    fn implication_matches_enumeration() {
        // With x1 = x2 = false, x1 ^ x2 ^ x3 = 1 forces x3 = true; among the
        // eight assignments only (F, F, T) satisfies the row and the partial
        // assignment at once.
        let ok: Vec<u32> = (0..8u32).filter(|b| (b & 1 == 0) && (b >> 1 & 1 == 0) && (b.count_ones() % 2 == 1)).collect();
        assert_eq!(ok, vec![4]);
        let (e, _) = XorEngine::build(3, &[(0, vars(&[1, 2, 3]), true)]);
        let implied = e.propagate(0, assign(&[(1, false), (2, false)])).unwrap();
        assert_eq!(implied, vec![XorClause { lits: lits(&[3, 1, 2]), rows: vec![0] }]);
    }

    #[test]
    fn sums_rows_to_expose_implications() {
        // x1^x2^x3 = 1 and x2^x3^x4 = 0 sum to x1^x4 = 1: x1 = false forces x4.
        let (e, _) = XorEngine::build(4, &[(0, vars(&[1, 2, 3]), true), (1, vars(&[2, 3, 4]), false)]);
        let implied = e.propagate(0, assign(&[(1, false)])).unwrap();
        assert_eq!(implied, vec![XorClause { lits: lits(&[4, 1]), rows: vec![0, 1] }]);
    }

    #[test]
    fn inconsistent_rows_conflict_without_assignments() {
        let (e, _) = XorEngine::build(3, &[(0, vars(&[1, 2, 3]), true), (1, vars(&[1, 2, 3]), false)]);
        let c = e.propagate(0, |_| None).unwrap_err();
        assert!(c.lits.is_empty());
        assert_eq!(c.rows, vec![0, 1]);
    }

    #[test]
    fn small_components_are_lowered() {
        let (e, low) = XorEngine::build(
            5,
            &[(0, vars(&[]), true), (1, vars(&[]), false), (2, vars(&[4]), false), (3, vars(&[1, 2]), true)],
        );
        assert_eq!(e.num_components(), 0);
        assert_eq!(
            low,
            vec![
                Lowered::Contradiction(0),
                Lowered::Clauses(2, vec![lits(&[-4])]),
                Lowered::Clauses(3, vec![lits(&[1, 2]), lits(&[-1, -2])]),
            ]
        );
    }
}
