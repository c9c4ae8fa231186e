use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::scalar::Rational;

/// Set of variable indices below 64, stored as a bitmask.
#[derive(Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarSet(pub u64);

impl VarSet {
    pub const EMPTY: VarSet = VarSet(0);

    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Self {
        VarSet(indices.into_iter().fold(0, |acc, i| acc | (1u64 << i)))
    }

    pub fn singleton(i: usize) -> Self {
        VarSet(1 << i)
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn sym_diff(self, other: VarSet) -> VarSet {
        VarSet(self.0 ^ other.0)
    }

    pub fn union(self, other: VarSet) -> VarSet {
        VarSet(self.0 | other.0)
    }

    pub fn is_subset(self, other: VarSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        (0..64).filter(move |&i| self.contains(i))
    }

    pub fn indices(self) -> Vec<usize> {
        self.iter().collect()
    }

    /// `χ_α(x) = Π_{i∈α} x_i`.
    pub fn character(self, x: &[i8]) -> i8 {
        self.iter().fold(1, |acc, i| acc * x[i])
    }

    /// Character on an assignment encoded by its `-1` mask.
    pub fn character_mask(self, x_mask: u64) -> i64 {
        if (self.0 & x_mask).count_ones() % 2 == 0 {
            1
        } else {
            -1
        }
    }
}

impl fmt::Debug for VarSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Ordered `k`-tuples of distinct variables together with the inclusion probability `p`.
///
/// Scopes are kept in lexicographic order; a scope's id is its position.
#[derive(Clone, Debug, PartialEq)]
pub struct ScopeSpace {
    n: usize,
    k: usize,
    scopes: Vec<Vec<usize>>,
    var_sets: Vec<VarSet>,
    p: Rational,
    full_size: BigInt,
}

/// Number of ordered `k`-tuples of distinct elements of `[n]`.
pub fn falling_factorial(n: usize, k: usize) -> BigInt {
    (0..k).fold(BigInt::one(), |acc, i| acc * BigInt::from(n - i))
}

impl ScopeSpace {
    /// All of `E_{n,k}`.
    pub fn full(n: usize, k: usize, p: Rational) -> Result<Self> {
        check_dims(n, k)?;
        let mut scopes = Vec::new();
        let mut cur = Vec::with_capacity(k);
        enumerate_tuples(n, k, &mut cur, &mut scopes);
        ScopeSpace::build(n, k, scopes, p)
    }

    /// A sublist of `E_{n,k}`; sorted lexicographically, duplicates rejected.
    pub fn restricted(n: usize, k: usize, mut scopes: Vec<Vec<usize>>, p: Rational) -> Result<Self> {
        check_dims(n, k)?;
        for s in &scopes {
            if s.len() != k {
                return Err(Error::InvalidInput(format!("scope {s:?} does not have arity {k}")));
            }
            if s.iter().any(|&i| i >= n) {
                return Err(Error::InvalidInput(format!("scope {s:?} has an index ≥ n = {n}")));
            }
            if VarSet::from_indices(s.iter().copied()).len() != k {
                return Err(Error::InvalidInput(format!("scope {s:?} repeats a variable")));
            }
        }
        scopes.sort();
        if scopes.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput("scope list contains duplicates".into()));
        }
        ScopeSpace::build(n, k, scopes, p)
    }

    fn build(n: usize, k: usize, scopes: Vec<Vec<usize>>, p: Rational) -> Result<Self> {
        if p.is_negative() || p > Rational::one() {
            return Err(Error::InvalidInput(format!("p = {p} outside [0, 1]")));
        }
        let var_sets = scopes.iter().map(|s| VarSet::from_indices(s.iter().copied())).collect();
        Ok(ScopeSpace { n, k, scopes, var_sets, p, full_size: falling_factorial(n, k) })
    }

    /// Same scopes with a different inclusion probability.
    pub fn with_p(&self, p: Rational) -> Result<Self> {
        ScopeSpace::build(self.n, self.k, self.scopes.clone(), p)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of scopes `M`.
    pub fn m(&self) -> usize {
        self.scopes.len()
    }

    pub fn p(&self) -> &Rational {
        &self.p
    }

    pub fn q(&self) -> Rational {
        Rational::one() - &self.p
    }

    pub fn scopes(&self) -> &[Vec<usize>] {
        &self.scopes
    }

    pub fn scope(&self, id: usize) -> &[usize] {
        &self.scopes[id]
    }

    pub fn var_set(&self, id: usize) -> VarSet {
        self.var_sets[id]
    }

    /// Variable sitting in slot `j` of scope `id`.
    pub fn var(&self, id: usize, j: usize) -> usize {
        self.scopes[id][j]
    }

    /// `|E_{n,k}|`.
    pub fn full_size(&self) -> &BigInt {
        &self.full_size
    }

    /// `Δ = p·|E_{n,k}| / n`.
    pub fn delta(&self) -> Rational {
        &self.p * Rational::from_integer(self.full_size.clone()) / Rational::from_integer(BigInt::from(self.n))
    }

    /// Id of a scope tuple, if present.
    pub fn index_of(&self, scope: &[usize]) -> Option<usize> {
        self.scopes.binary_search_by(|s| s.as_slice().cmp(scope)).ok()
    }

    /// Parity set of a slot selection: variables hit an odd number of times.
    pub fn slot_parity(&self, id: usize, mask: u32) -> VarSet {
        let mut out = VarSet::EMPTY;
        for j in 0..self.k {
            if mask >> j & 1 == 1 {
                out = out.sym_diff(VarSet::singleton(self.scopes[id][j]));
            }
        }
        out
    }

    pub fn inclusion_is_degenerate(&self) -> bool {
        self.p.is_zero() || self.p.is_one()
    }
}

fn check_dims(n: usize, k: usize) -> Result<()> {
    if n == 0 || n > 64 {
        return Err(Error::InvalidInput(format!("n = {n} outside 1..=64")));
    }
    if k == 0 || k > n || k > 16 {
        return Err(Error::InvalidArity(format!("k = {k} must satisfy 1 ≤ k ≤ min(n, 16)")));
    }
    Ok(())
}

fn enumerate_tuples(n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if cur.len() == k {
        out.push(cur.clone());
        return;
    }
    for i in 0..n {
        if !cur.contains(&i) {
            cur.push(i);
            enumerate_tuples(n, k, cur, out);
            cur.pop();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::ratio;

    #[test]
    fn full_space_counts_and_order() {
        let s = ScopeSpace::full(4, 3, ratio(1, 3)).unwrap();
        assert_eq!(s.m(), 24);
        assert_eq!(s.full_size(), &BigInt::from(24));
        assert!(s.scopes().windows(2).all(|w| w[0] < w[1]));
        assert_eq!(s.scope(0), &[0, 1, 2]);
        assert_eq!(s.index_of(&[3, 2, 1]), Some(23));
        assert_eq!(s.delta(), ratio(2, 1));
    }

    #[test]
    fn restricted_validation() {
        assert!(ScopeSpace::restricted(4, 3, vec![vec![0, 1, 1]], ratio(1, 2)).is_err());
        assert!(ScopeSpace::restricted(4, 3, vec![vec![0, 1, 4]], ratio(1, 2)).is_err());
        assert!(ScopeSpace::restricted(4, 3, vec![vec![0, 1, 2], vec![0, 1, 2]], ratio(1, 2)).is_err());
        assert!(ScopeSpace::restricted(4, 3, vec![vec![0, 1, 2]], ratio(3, 2)).is_err());
        let s = ScopeSpace::restricted(4, 3, vec![vec![1, 2, 3], vec![0, 1, 2]], ratio(1, 2)).unwrap();
        assert_eq!(s.scope(0), &[0, 1, 2]);
    }

    #[test]
    fn slot_parity_cancels_repeats() {
        let s = ScopeSpace::restricted(3, 2, vec![vec![0, 1], vec![1, 2]], ratio(1, 2)).unwrap();
        let a = s.slot_parity(0, 0b11).sym_diff(s.slot_parity(1, 0b11));
        assert_eq!(a, VarSet::from_indices([0, 2]));
    }
}
