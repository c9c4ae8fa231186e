//! Linear algebra over F2 for XOR instances: which sets of included constraints sum
//! to a target parity.

use crate::csp::{Instance, VarSet};
use crate::{Error, Result};

/// Largest nullspace dimension whose span is enumerated.
pub const MAX_NULLSPACE_DIM: usize = 20;

/// Bitset over constraint positions, recording which inputs a row combines.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Tag(Vec<u64>);

impl Tag {
    fn unit(len: usize, i: usize) -> Self {
        let mut v = vec![0; len.div_ceil(64).max(1)];
        v[i / 64] |= 1 << (i % 64);
        Tag(v)
    }

    fn zero(len: usize) -> Self {
        Tag(vec![0; len.div_ceil(64).max(1)])
    }

    fn xor_assign(&mut self, other: &Tag) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a ^= b;
        }
    }

    fn members(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for (w, &word) in self.0.iter().enumerate() {
            let mut bits = word;
            while bits != 0 {
                out.push(w * 64 + bits.trailing_zeros() as usize);
                bits &= bits - 1;
            }
        }
        out
    }
}

/// Row-reduced form of a list of F2 vectors, keeping track of combinations.
#[derive(Clone, Debug)]
pub struct Elimination {
    len: usize,
    /// Pivot rows `(pivot bit, vector, tag)`; each pivot bit is cleared from all
    /// other pivot rows.
    pivots: Vec<(usize, u64, Tag)>,
    /// Tags of combinations summing to zero; a basis of the nullspace.
    kernel: Vec<Tag>,
}

impl Elimination {
    /// Reduces `vectors`, choosing for each bit from the lowest the lowest-index
    /// remaining vector that has it.
    pub fn new(vectors: &[u64]) -> Self {
        let len = vectors.len();
        let mut rows: Vec<Option<(u64, Tag)>> =
            vectors.iter().enumerate().map(|(i, &v)| Some((v, Tag::unit(len, i)))).collect();
        let mut pivots: Vec<(usize, u64, Tag)> = Vec::new();
        for bit in 0..64 {
            let Some(pos) = rows.iter().position(|r| r.as_ref().is_some_and(|(v, _)| v >> bit & 1 == 1)) else {
                continue;
            };
            let (pv, ptag) = rows[pos].take().expect("pivot row present");
            for (v, tag) in rows.iter_mut().flatten() {
                if *v >> bit & 1 == 1 {
                    *v ^= pv;
                    tag.xor_assign(&ptag);
                }
            }
            for (_, v, tag) in pivots.iter_mut() {
                if *v >> bit & 1 == 1 {
                    *v ^= pv;
                    tag.xor_assign(&ptag);
                }
            }
            pivots.push((bit, pv, ptag));
        }
        let kernel = rows.into_iter().flatten().map(|(v, tag)| {
            debug_assert_eq!(v, 0);
            tag
        });
        Elimination { len, pivots, kernel: kernel.collect() }
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    pub fn nullity(&self) -> usize {
        self.kernel.len()
    }

    /// One combination of the inputs summing to `target`, if any.
    fn particular(&self, target: u64) -> Option<Tag> {
        let mut rest = target;
        let mut tag = Tag::zero(self.len);
        for (bit, v, t) in &self.pivots {
            if rest >> bit & 1 == 1 {
                rest ^= v;
                tag.xor_assign(t);
            }
        }
        (rest == 0).then_some(tag)
    }

    /// Every subset of input positions summing to `target`, each sorted, in
    /// lexicographic order.
    pub fn solutions(&self, target: u64) -> Result<Vec<Vec<usize>>> {
        let dim = self.nullity();
        if dim > MAX_NULLSPACE_DIM {
            return Err(Error::ResourceLimit(format!("nullspace dimension {dim} exceeds {MAX_NULLSPACE_DIM}")));
        }
        let Some(base) = self.particular(target) else {
            return Ok(Vec::new());
        };
        let mut out = Vec::with_capacity(1 << dim);
        for pick in 0u32..1 << dim {
            let mut tag = base.clone();
            for (i, k) in self.kernel.iter().enumerate() {
                if pick >> i & 1 == 1 {
                    tag.xor_assign(k);
                }
            }
            out.push(tag.members());
        }
        out.sort();
        Ok(out)
    }
}

/// Sets of included constraints (as scope ids, ascending) whose variable sets sum to
/// `alpha` over F2.
pub fn xor_derivations_f2(inst: &Instance, alpha: VarSet) -> Result<Vec<Vec<usize>>> {
    let space = inst.space();
    let included = inst.included();
    let vectors: Vec<u64> = included.iter().map(|&s| space.var_set(s).0).collect();
    let mut found = Elimination::new(&vectors).solutions(alpha.0)?;
    for subset in found.iter_mut() {
        for pos in subset.iter_mut() {
            *pos = included[*pos];
        }
    }
    found.sort();
    Ok(found)
}
