use crate::formula::{BnnConstraint, Lit, Var};

/// A BNN constraint stored as two bitsets over the variable range its LHS
/// spans, so storage grows with `max − min + 1` of the LHS variables.
#[derive(Clone, Debug)]
pub struct BnnBitset {
    base: usize,
    span: usize,
    pos_mask: Box<[u64]>,
    neg_mask: Box<[u64]>,
    cutoff: u32,
    output: Lit,
}

impl BnnBitset {
    pub fn new(b: &BnnConstraint) -> BnnBitset {
        let lo = b.lhs().iter().map(|l| l.var().offset()).min().unwrap_or(0);
        let hi = b.lhs().iter().map(|l| l.var().offset()).max().unwrap_or(0);
        let span = hi - lo + 1;
        let words = span.div_ceil(64);
        let mut pos_mask = vec![0u64; words].into_boxed_slice();
        let mut neg_mask = vec![0u64; words].into_boxed_slice();
        for l in b.lhs() {
            let bit = l.var().offset() - lo;
            let m = if l.is_negated() { &mut neg_mask } else { &mut pos_mask };
            m[bit / 64] |= 1 << (bit % 64);
        }
        BnnBitset { base: lo, span, pos_mask, neg_mask, cutoff: b.cutoff(), output: b.output() }
    }

    pub fn span(&self) -> usize {
        self.span
    }

    /// Bytes of heap storage held by the two masks.
    pub fn heap_bytes(&self) -> usize {
        (self.pos_mask.len() + self.neg_mask.len()) * std::mem::size_of::<u64>()
    }

    /// Whether the partial assignment `value` (indexed by variable offset)
    /// admits no completion satisfying the constraint.
    pub fn falsified(&self, value: impl Fn(Var) -> Option<bool>) -> bool {
        let mut true_count = 0u32;
        let mut undef_count = 0u32;
        for (w, (&p, &n)) in self.pos_mask.iter().zip(self.neg_mask.iter()).enumerate() {
            let mut bits = p | n;
            while bits != 0 {
                let b = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                let var = Var::from_offset(self.base + w * 64 + b);
                let negated = (n >> b) & 1 == 1;
                match value(var) {
                    None => undef_count += 1,
                    Some(v) if v != negated => true_count += 1,
                    Some(_) => {}
                }
            }
        }
        let out = value(self.output.var()).map(|v| v != self.output.is_negated());
        match out {
            Some(true) => true_count + undef_count < self.cutoff,
            Some(false) => true_count >= self.cutoff,
            None => false,
        }
    }
}
