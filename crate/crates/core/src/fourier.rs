//! Sparse multilinear polynomials in the mixed basis `χ_α(x)·φ_β(y)·ψ_γ(b)`.
//!
//! `χ_α` is the parity character on assignments, `φ_β` the `p`-biased character on
//! inclusion signs with `φ(-1) = -√(q/p)` and `φ(1) = √(p/q)`, and `ψ_γ` the parity
//! of a set of negation bits `(scope, slot)`.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use num_traits::{One, Zero};
use serde_json::json;

use crate::csp::{Assignment, Instance, RestrictedInstance, ScopeSpace, SlotMask, VarSet};
use crate::error::{Error, Result};
use crate::scalar::{Rational, Scalar};

/// Index `(α, β, γ)` of a basis function. `γ` is stored as one nonzero slot mask per
/// scope, sorted by scope id, so `γ̄` is the list of its scopes.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BasisIndex {
    pub alpha: VarSet,
    pub beta: Vec<usize>,
    pub gamma: Vec<(usize, SlotMask)>,
}

impl BasisIndex {
    /// Builds a canonical index from unsorted parts; `gamma` lists `(scope, slot)` pairs.
    pub fn new(alpha: VarSet, beta: &[usize], gamma_slots: &[(usize, usize)]) -> Result<Self> {
        let mut b = beta.to_vec();
        b.sort_unstable();
        if b.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidIndex("beta repeats a scope".into()));
        }
        let mut g: BTreeMap<usize, SlotMask> = BTreeMap::new();
        for &(s, j) in gamma_slots {
            let e = g.entry(s).or_insert(0);
            if *e >> j & 1 == 1 {
                return Err(Error::InvalidIndex(format!("gamma repeats slot ({s}, {j})")));
            }
            *e |= 1 << j;
        }
        Ok(BasisIndex { alpha, beta: b, gamma: g.into_iter().collect() })
    }

    /// Index from an already canonical gamma (sorted scopes, nonzero masks).
    pub fn from_parts(alpha: VarSet, beta: Vec<usize>, gamma: Vec<(usize, SlotMask)>) -> Self {
        debug_assert!(beta.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(gamma.windows(2).all(|w| w[0].0 < w[1].0));
        debug_assert!(gamma.iter().all(|&(_, m)| m != 0));
        BasisIndex { alpha, beta, gamma }
    }

    pub fn constant() -> Self {
        BasisIndex::default()
    }

    /// Every index of a space, ordered by `(α, β, γ)` masks; at most
    /// [`MAX_ENUMERATED_INDICES`] of them.
    pub fn enumerate_all(space: &ScopeSpace) -> Result<Vec<BasisIndex>> {
        let (n, m, k) = (space.n(), space.m(), space.k());
        let bits = n + m + m * k;
        if bits >= 64 || 1u64 << bits > MAX_ENUMERATED_INDICES {
            return Err(Error::ResourceLimit(format!("2^{bits} indices exceed {MAX_ENUMERATED_INDICES}")));
        }
        let mut out = Vec::with_capacity(1 << bits);
        for a in 0..1u64 << n {
            for bm in 0..1u32 << m {
                let beta: Vec<usize> = (0..m).filter(|s| bm >> s & 1 == 1).collect();
                for gm in 0..1u64 << (m * k) {
                    let gamma = (0..m)
                        .map(|s| (s, ((gm >> (s * k)) & ((1 << k) - 1)) as SlotMask))
                        .filter(|&(_, t)| t != 0)
                        .collect();
                    out.push(BasisIndex::from_parts(VarSet(a), beta.clone(), gamma));
                }
            }
        }
        Ok(out)
    }

    /// `γ̄`: scopes appearing in `γ`.
    pub fn gamma_bar(&self) -> impl Iterator<Item = usize> + '_ {
        self.gamma.iter().map(|&(s, _)| s)
    }

    pub fn gamma_bar_len(&self) -> usize {
        self.gamma.len()
    }

    /// `r(γ)`: minimum number of slots per scope of `γ̄`; `None` when `γ = ∅`.
    pub fn min_arity(&self) -> Option<usize> {
        self.gamma.iter().map(|&(_, m)| m.count_ones() as usize).min()
    }

    pub fn beta_in_gamma_bar(&self) -> bool {
        self.beta.iter().all(|s| self.gamma.binary_search_by_key(s, |&(g, _)| g).is_ok())
    }

    /// `T_S`, the slots of `γ` inside scope `s`.
    pub fn slots_of(&self, s: usize) -> SlotMask {
        self.gamma.binary_search_by_key(&s, |&(g, _)| g).map(|i| self.gamma[i].1).unwrap_or(0)
    }

    /// Whether `β` or `γ` mentions a scope of the sorted list `u`.
    pub fn touches(&self, u: &[usize]) -> bool {
        self.beta.iter().chain(self.gamma_bar().collect::<Vec<_>>().iter()).any(|s| u.binary_search(s).is_ok())
    }

    /// Number of scopes in `β ∪ γ̄`.
    pub fn support_len(&self) -> usize {
        let mut all: Vec<usize> = self.beta.iter().copied().chain(self.gamma_bar()).collect();
        all.sort_unstable();
        all.dedup();
        all.len()
    }

    pub fn validate(&self, space: &ScopeSpace) -> Result<()> {
        let n = space.n();
        if n < 64 && self.alpha.0 >> n != 0 {
            return Err(Error::InvalidIndex("alpha mentions a variable ≥ n".into()));
        }
        let m = space.m();
        if self.beta.iter().any(|&s| s >= m) || self.gamma.iter().any(|&(s, _)| s >= m) {
            return Err(Error::InvalidIndex("index mentions a scope outside the space".into()));
        }
        if self.gamma.iter().any(|&(_, t)| t == 0 || t >> space.k() != 0) {
            return Err(Error::InvalidIndex("gamma slot mask out of range".into()));
        }
        Ok(())
    }

    /// `γ ⊢ α` evaluated against the space's scope tuples.
    pub fn parity(&self, space: &ScopeSpace) -> VarSet {
        self.gamma.iter().fold(VarSet::EMPTY, |acc, &(s, t)| acc.sym_diff(space.slot_parity(s, t)))
    }
}

/// Degree caps `d = (d_x, d_I)` defining `A(d)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DegreeCaps {
    pub d_x: usize,
    pub d_i: usize,
}

impl DegreeCaps {
    pub fn new(d_x: usize, d_i: usize) -> Self {
        DegreeCaps { d_x, d_i }
    }

    /// `|α| ≤ d_x`, `|β| ≤ d_I`, `|γ̄| ≤ d_I`.
    pub fn admits(&self, idx: &BasisIndex) -> bool {
        idx.alpha.len() <= self.d_x && idx.beta.len() <= self.d_i && idx.gamma.len() <= self.d_i
    }
}

/// Values of `φ(±1)` and the re-expansion constant `κ` with `φ² = 1 + κ·φ`.
#[derive(Clone, Debug)]
pub struct BasisConsts<S> {
    pub phi_included: S,
    pub phi_absent: S,
    pub sqrt_pq: S,
    pub kappa: S,
}

impl<S: Scalar> BasisConsts<S> {
    pub fn new(p: &Rational) -> Result<Self> {
        if p.is_zero() || p.is_one() {
            return Err(Error::SingularBasis(format!("φ is undefined at p = {p}")));
        }
        let q = Rational::one() - p;
        let pq = p * &q;
        let sqrt_pq = S::sqrt_rational(&pq);
        Ok(BasisConsts {
            phi_included: sqrt_pq.scale(&(-Rational::one() / p)),
            phi_absent: sqrt_pq.scale(&(Rational::one() / &q)),
            kappa: sqrt_pq.scale(&((p - &q) / &pq)),
            sqrt_pq,
        })
    }

    pub fn phi(&self, y: i8) -> &S {
        if y == -1 {
            &self.phi_included
        } else {
            &self.phi_absent
        }
    }
}

fn consts_if_needed<S: Scalar>(space: &ScopeSpace, need: bool) -> Result<Option<BasisConsts<S>>> {
    if need {
        BasisConsts::new(space.p()).map(Some)
    } else {
        Ok(None)
    }
}

fn sign<S: Scalar>(v: i64) -> S {
    if v < 0 {
        S::one().neg()
    } else {
        S::one()
    }
}

/// `χ_α(x)·φ_β(y)·ψ_γ(b)` for raw sign vectors (`b` holds `k` signs per scope).
pub fn basis_eval<S: Scalar>(idx: &BasisIndex, x: &[i8], y: &[i8], b: &[i8], k: usize, p: &Rational) -> Result<S> {
    let consts = if idx.beta.is_empty() { None } else { Some(BasisConsts::<S>::new(p)?) };
    Ok(basis_eval_with(idx, x, y, b, k, consts.as_ref()))
}

fn basis_eval_with<S: Scalar>(
    idx: &BasisIndex,
    x: &[i8],
    y: &[i8],
    b: &[i8],
    k: usize,
    consts: Option<&BasisConsts<S>>,
) -> S {
    let mut sgn = i64::from(idx.alpha.character(x));
    for &(s, t) in &idx.gamma {
        for j in 0..k {
            if t >> j & 1 == 1 {
                sgn *= i64::from(b[s * k + j]);
            }
        }
    }
    let mut acc: S = sign(sgn);
    if let Some(c) = consts {
        for &s in &idx.beta {
            acc = acc.mul(c.phi(y[s]));
        }
    }
    acc
}

/// Polynomial in `x` alone, keyed by `α`.
#[derive(Clone, Debug, PartialEq)]
pub struct XPoly<S> {
    pub n: usize,
    pub terms: BTreeMap<VarSet, S>,
}

impl<S: Scalar> XPoly<S> {
    pub fn zero(n: usize) -> Self {
        XPoly { n, terms: BTreeMap::new() }
    }

    pub fn add_term(&mut self, alpha: VarSet, c: S) {
        accumulate(&mut self.terms, alpha, c);
    }

    pub fn coeff(&self, alpha: VarSet) -> S {
        self.terms.get(&alpha).cloned().unwrap_or_else(S::zero)
    }

    /// Value at the assignment whose `-1` positions are the bits of `x_mask`.
    pub fn eval_mask(&self, x_mask: u64) -> S {
        self.terms.iter().fold(
            S::zero(),
            |acc, (a, c)| {
                if a.character_mask(x_mask) < 0 {
                    acc.sub(c)
                } else {
                    acc.add(c)
                }
            },
        )
    }

    pub fn scale(&self, c: &S) -> Self {
        let mut out = XPoly::zero(self.n);
        for (a, v) in &self.terms {
            out.add_term(*a, v.mul(c));
        }
        out
    }

    pub fn add(&self, other: &XPoly<S>) -> Self {
        let mut out = self.clone();
        for (a, v) in &other.terms {
            out.add_term(*a, v.clone());
        }
        out
    }
}

fn accumulate<K: Ord, S: Scalar>(map: &mut BTreeMap<K, S>, key: K, c: S) {
    if c.is_zero() {
        return;
    }
    match map.entry(key) {
        std::collections::btree_map::Entry::Vacant(e) => {
            e.insert(c);
        }
        std::collections::btree_map::Entry::Occupied(mut e) => {
            let v = e.get().add(&c);
            if v.is_zero() {
                e.remove();
            } else {
                *e.get_mut() = v;
            }
        }
    }
}

/// Cap on [`BasisIndex::enumerate_all`].
pub const MAX_ENUMERATED_INDICES: u64 = 1 << 22;

/// Default cap on the number of term products formed by [`MixedPoly::multiply`].
pub const DEFAULT_PRODUCT_LIMIT: usize = 5_000_000;

/// Sparse polynomial over a scope space. Zero coefficients are never stored and, when
/// `caps` is set, every index lies in `A(caps)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedPoly<S> {
    space: Arc<ScopeSpace>,
    terms: BTreeMap<BasisIndex, S>,
    caps: Option<DegreeCaps>,
}

impl<S: Scalar> MixedPoly<S> {
    pub fn zero(space: Arc<ScopeSpace>) -> Self {
        MixedPoly { space, terms: BTreeMap::new(), caps: None }
    }

    pub fn constant(space: Arc<ScopeSpace>, c: S) -> Self {
        let mut p = MixedPoly::zero(space);
        p.add_term(BasisIndex::constant(), c);
        p
    }

    pub fn monomial(space: Arc<ScopeSpace>, idx: BasisIndex, c: S) -> Result<Self> {
        idx.validate(&space)?;
        let mut p = MixedPoly::zero(space);
        p.add_term(idx, c);
        Ok(p)
    }

    /// Builds a polynomial and records caps after checking every index against them.
    pub fn with_caps(mut self, caps: DegreeCaps) -> Result<Self> {
        if let Some(bad) = self.terms.keys().find(|i| !caps.admits(i)) {
            return Err(Error::InvalidIndex(format!("index {bad:?} violates caps {caps:?}")));
        }
        self.caps = Some(caps);
        Ok(self)
    }

    pub fn space(&self) -> &Arc<ScopeSpace> {
        &self.space
    }

    pub fn caps(&self) -> Option<DegreeCaps> {
        self.caps
    }

    pub fn terms(&self) -> &BTreeMap<BasisIndex, S> {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, idx: &BasisIndex) -> S {
        self.terms.get(idx).cloned().unwrap_or_else(S::zero)
    }

    /// Adds `c` to the coefficient of `idx`, dropping it if the sum vanishes.
    pub fn add_term(&mut self, idx: BasisIndex, c: S) {
        accumulate(&mut self.terms, idx, c);
    }

    fn needs_consts(&self) -> bool {
        self.terms.keys().any(|i| !i.beta.is_empty())
    }

    fn check_inputs(&self, x: &[i8], inst: &Instance) -> Result<()> {
        if x.len() != self.space.n() || inst.space().as_ref() != self.space.as_ref() {
            return Err(Error::InvalidInput("evaluation point does not match the polynomial's space".into()));
        }
        Ok(())
    }

    /// Value at `(x, I)`; summation follows the sorted index order.
    pub fn eval(&self, x: &Assignment, inst: &Instance) -> Result<S> {
        self.check_inputs(x.values(), inst)?;
        let consts = consts_if_needed::<S>(&self.space, self.needs_consts())?;
        let k = self.space.k();
        Ok(self.terms.iter().fold(S::zero(), |acc, (idx, c)| {
            acc.add(&c.mul(&basis_eval_with(idx, x.values(), inst.y(), inst.b(), k, consts.as_ref())))
        }))
    }

    /// `L_d`: keeps indices in `A(d)`.
    pub fn project(&self, caps: DegreeCaps) -> Self {
        let terms = self.terms.iter().filter(|(i, _)| caps.admits(i)).map(|(i, c)| (i.clone(), c.clone())).collect();
        let caps = match self.caps {
            Some(old) => DegreeCaps::new(old.d_x.min(caps.d_x), old.d_i.min(caps.d_i)),
            None => caps,
        };
        MixedPoly { space: Arc::clone(&self.space), terms, caps: Some(caps) }
    }

    /// Keeps the indices selected by `keep`; caps are preserved.
    pub fn filter(&self, keep: impl Fn(&BasisIndex) -> bool) -> Self {
        let terms = self.terms.iter().filter(|(i, _)| keep(i)).map(|(i, c)| (i.clone(), c.clone())).collect();
        MixedPoly { space: Arc::clone(&self.space), terms, caps: self.caps }
    }

    /// `R_U`: fixes the coordinates of the scopes in `fix.scopes` to `fix`'s values.
    pub fn restrict(&self, fix: &RestrictedInstance) -> Result<Self> {
        fix.validate(&self.space)?;
        let k = self.space.k();
        let need = self.terms.keys().any(|i| i.beta.iter().any(|s| fix.position(*s).is_some()));
        let consts = consts_if_needed::<S>(&self.space, need)?;
        let mut out = MixedPoly { space: Arc::clone(&self.space), terms: BTreeMap::new(), caps: self.caps };
        for (idx, c) in &self.terms {
            let mut factor = c.clone();
            let mut beta = Vec::with_capacity(idx.beta.len());
            for &s in &idx.beta {
                match fix.position(s) {
                    Some(pos) => factor = factor.mul(consts.as_ref().expect("consts").phi(fix.y[pos])),
                    None => beta.push(s),
                }
            }
            let mut gamma = Vec::with_capacity(idx.gamma.len());
            let mut sgn = 1i64;
            for &(s, t) in &idx.gamma {
                match fix.position(s) {
                    Some(pos) => {
                        for j in 0..k {
                            if t >> j & 1 == 1 {
                                sgn *= i64::from(fix.b[pos * k + j]);
                            }
                        }
                    }
                    None => gamma.push((s, t)),
                }
            }
            if sgn < 0 {
                factor = factor.neg();
            }
            out.add_term(BasisIndex::from_parts(idx.alpha, beta, gamma), factor);
        }
        Ok(out)
    }

    /// Restriction at every scope: the polynomial in `x` obtained by fixing `I`.
    pub fn at_instance(&self, inst: &Instance) -> Result<XPoly<S>> {
        let all: Vec<usize> = (0..self.space.m()).collect();
        let r = self.restrict(&inst.restrict_to(&all))?;
        let mut out = XPoly::zero(self.space.n());
        for (idx, c) in r.terms {
            out.add_term(idx.alpha, c);
        }
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_space(other)?;
        let mut out = self.clone();
        out.caps = None;
        for (i, c) in &other.terms {
            out.add_term(i.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(&S::one().neg()))
    }

    pub fn scale(&self, c: &S) -> Self {
        let mut out = MixedPoly { space: Arc::clone(&self.space), terms: BTreeMap::new(), caps: self.caps };
        for (i, v) in &self.terms {
            out.add_term(i.clone(), v.mul(c));
        }
        out
    }

    fn same_space(&self, other: &Self) -> Result<()> {
        if self.space.as_ref() != other.space.as_ref() {
            return Err(Error::InvalidInput("polynomials live on different spaces".into()));
        }
        Ok(())
    }

    /// Exact product re-expanded in the basis, using `φ_S² = 1 + κ·φ_S`.
    pub fn multiply(&self, other: &Self, limit: usize) -> Result<Self> {
        self.same_space(other)?;
        let mut work: usize = 0;
        for a in self.terms.keys() {
            for b in other.terms.keys() {
                let common = a.beta.iter().filter(|s| b.beta.binary_search(s).is_ok()).count();
                work = work.saturating_add(1usize << common.min(40));
            }
            if work > limit {
                return Err(Error::ResourceLimit(format!("product needs more than {limit} term products")));
            }
        }
        let need = self.terms.keys().any(|a| !a.beta.is_empty()) && other.terms.keys().any(|b| !b.beta.is_empty());
        let consts = consts_if_needed::<S>(&self.space, need)?;
        let mut out = MixedPoly::zero(Arc::clone(&self.space));
        for (a, ca) in &self.terms {
            for (b, cb) in &other.terms {
                let c = ca.mul(cb);
                let alpha = a.alpha.sym_diff(b.alpha);
                let gamma = merge_gamma(&a.gamma, &b.gamma);
                let (common, rest) = split_beta(&a.beta, &b.beta);
                for sub in 0..1u64 << common.len() {
                    let mut coef = c.clone();
                    let mut beta = rest.clone();
                    for (i, &s) in common.iter().enumerate() {
                        if sub >> i & 1 == 1 {
                            coef = coef.mul(&consts.as_ref().expect("consts").kappa);
                            beta.push(s);
                        }
                    }
                    beta.sort_unstable();
                    out.add_term(BasisIndex::from_parts(alpha, beta, gamma.clone()), coef);
                }
            }
        }
        Ok(out)
    }

    /// `Σ coeff²` over indices accepted by `keep`.
    pub fn l2_norm_sq(&self, keep: Option<&dyn Fn(&BasisIndex) -> bool>) -> S {
        self.terms.iter().filter(|(i, _)| keep.is_none_or(|f| f(i))).fold(S::zero(), |acc, (_, c)| acc.add(&c.mul(c)))
    }

    /// Converts coefficients to `f64`.
    pub fn to_f64(&self) -> MixedPoly<f64> {
        let mut out = MixedPoly { space: Arc::clone(&self.space), terms: BTreeMap::new(), caps: self.caps };
        for (i, c) in &self.terms {
            out.add_term(i.clone(), c.to_f64());
        }
        out
    }

    /// Writes one JSON object per index, in index order.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for (idx, c) in &self.terms {
            let beta: Vec<&[usize]> = idx.beta.iter().map(|&s| self.space.scope(s)).collect();
            let mut gamma = Vec::new();
            for &(s, t) in &idx.gamma {
                for j in 0..self.space.k() {
                    if t >> j & 1 == 1 {
                        gamma.push(json!([self.space.scope(s), j]));
                    }
                }
            }
            let line = json!({
                "alpha": idx.alpha.indices(),
                "beta": beta,
                "gamma": gamma,
                "c": c.to_json(),
            });
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

fn merge_gamma(a: &[(usize, SlotMask)], b: &[(usize, SlotMask)]) -> Vec<(usize, SlotMask)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        if j == b.len() || (i < a.len() && a[i].0 < b[j].0) {
            out.push(a[i]);
            i += 1;
        } else if i == a.len() || b[j].0 < a[i].0 {
            out.push(b[j]);
            j += 1;
        } else {
            let m = a[i].1 ^ b[j].1;
            if m != 0 {
                out.push((a[i].0, m));
            }
            i += 1;
            j += 1;
        }
    }
    out
}

/// Splits two sorted scope lists into (intersection, symmetric difference).
fn split_beta(a: &[usize], b: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let common: Vec<usize> = a.iter().copied().filter(|s| b.binary_search(s).is_ok()).collect();
    let rest: Vec<usize> = a.iter().chain(b).copied().filter(|s| common.binary_search(s).is_err()).collect();
    (common, rest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csp::Instance;
    use crate::scalar::{ratio, Surd};

    fn space(n: usize, scopes: Vec<Vec<usize>>, p: Rational) -> Arc<ScopeSpace> {
        let k = scopes[0].len();
        Arc::new(ScopeSpace::restricted(n, k, scopes, p).unwrap())
    }

    fn all_instances(sp: &Arc<ScopeSpace>) -> Vec<Instance> {
        let per = 1u32 << (sp.k() + 1);
        let total = (per as usize).pow(sp.m() as u32);
        (0..total)
            .map(|mut id| {
                let codes: Vec<u32> = (0..sp.m())
                    .map(|_| {
                        let c = (id % per as usize) as u32;
                        id /= per as usize;
                        c
                    })
                    .collect();
                Instance::from_codes(Arc::clone(sp), &codes)
            })
            .collect()
    }

    /// `Pr_{D(p)}[I]` including uniform negation bits.
    fn null_prob(inst: &Instance) -> Rational {
        let sp = inst.space();
        let per_b = Rational::new(1.into(), (1u64 << sp.k()).into());
        (0..sp.m()).fold(Rational::one(), |acc, s| {
            let py = if inst.is_included(s) { sp.p().clone() } else { sp.q() };
            acc * py * &per_b
        })
    }

    fn all_indices(sp: &ScopeSpace) -> Vec<BasisIndex> {
        BasisIndex::enumerate_all(sp).unwrap()
    }

    #[test]
    fn orthonormality_exact() {
        let sp = space(3, vec![vec![0, 1], vec![1, 2]], ratio(1, 3));
        let idx: Vec<BasisIndex> = all_indices(&sp).into_iter().step_by(7).collect();
        let insts = all_instances(&sp);
        let weights: Vec<Rational> = insts.iter().map(null_prob).collect();
        let xw = ratio(1, 8);
        // values[i][point]
        let values: Vec<Vec<Surd>> = idx
            .iter()
            .map(|i| {
                let mut v = Vec::new();
                for xm in 0..8u64 {
                    let x = Assignment::from_mask(3, xm);
                    for inst in &insts {
                        v.push(basis_eval(i, x.values(), inst.y(), inst.b(), 2, sp.p()).unwrap());
                    }
                }
                v
            })
            .collect();
        let pw: Vec<Rational> = (0..8).flat_map(|_| weights.iter().map(|w| w * &xw)).collect();
        for a in 0..idx.len() {
            for b in 0..idx.len() {
                let e = values[a]
                    .iter()
                    .zip(&values[b])
                    .zip(&pw)
                    .fold(Surd::zero(), |acc, ((u, v), w)| acc.add(&u.mul(v).scale(w)));
                let expect = if a == b { Surd::one() } else { Surd::zero() };
                assert_eq!(e, expect, "pair {:?} {:?}", idx[a], idx[b]);
            }
        }
    }

    #[test]
    fn basis_eval_examples() {
        let e = BasisIndex::constant();
        assert_eq!(basis_eval::<Surd>(&e, &[1], &[], &[], 2, &ratio(0, 1)).unwrap(), Surd::one());
        let phi = BasisIndex::new(VarSet::EMPTY, &[0], &[]).unwrap();
        assert_eq!(basis_eval::<Surd>(&phi, &[1, 1], &[-1], &[1, 1], 2, &ratio(1, 2)).unwrap(), Surd::from_i64(-1));
        assert!(matches!(
            basis_eval::<Surd>(&phi, &[1, 1], &[-1], &[1, 1], 2, &ratio(1, 1)),
            Err(Error::SingularBasis(_))
        ));
    }

    #[test]
    fn phi_square_reexpansion() {
        let sp = space(2, vec![vec![0, 1]], ratio(1, 3));
        let phi = BasisIndex::new(VarSet::EMPTY, &[0], &[]).unwrap();
        let f = MixedPoly::<Surd>::monomial(Arc::clone(&sp), phi.clone(), Surd::one()).unwrap();
        let sq = f.multiply(&f, DEFAULT_PRODUCT_LIMIT).unwrap();
        for y in [-1i8, 1] {
            let inst = Instance::new(Arc::clone(&sp), vec![y], vec![1, 1]).unwrap();
            let x = Assignment::all_ones(2);
            let v = f.eval(&x, &inst).unwrap();
            assert_eq!(sq.eval(&x, &inst).unwrap(), v.mul(&v));
        }
        let c: BasisConsts<Surd> = BasisConsts::new(&ratio(1, 3)).unwrap();
        assert_eq!(sq.coeff(&BasisIndex::constant()), Surd::one());
        assert_eq!(sq.coeff(&phi), c.kappa);
        // κ = (p - q)/√(pq) = -1/√2 at p = 1/3
        assert_eq!(c.kappa.mul(&c.kappa), Surd::from_rational(&ratio(1, 2)));
        assert_eq!(c.kappa.signum(), std::cmp::Ordering::Less);
    }

    #[test]
    fn product_rules() {
        let sp = space(3, vec![vec![0, 1, 2]], ratio(1, 3));
        let one = MixedPoly::<Surd>::constant(Arc::clone(&sp), Surd::one());
        let x1 =
            MixedPoly::monomial(Arc::clone(&sp), BasisIndex::new(VarSet::singleton(0), &[], &[]).unwrap(), Surd::one())
                .unwrap();
        assert_eq!(x1.multiply(&one, 100).unwrap(), x1);
        assert_eq!(x1.multiply(&x1, 100).unwrap(), one);
        let g =
            MixedPoly::monomial(Arc::clone(&sp), BasisIndex::new(VarSet::EMPTY, &[], &[(0, 1)]).unwrap(), Surd::one())
                .unwrap();
        assert_eq!(g.multiply(&g, 100).unwrap(), one);
        assert!(matches!(x1.multiply(&x1, 0), Err(Error::ResourceLimit(_))));
    }

    #[test]
    fn eval_and_norm_examples() {
        let sp = space(3, vec![vec![0, 1], vec![1, 2]], ratio(1, 3));
        let x1 = BasisIndex::new(VarSet::singleton(0), &[], &[]).unwrap();
        let x2 = BasisIndex::new(VarSet::singleton(1), &[], &[]).unwrap();
        let mut f = MixedPoly::<Surd>::zero(Arc::clone(&sp));
        f.add_term(x1.clone(), Surd::one());
        let inst = Instance::empty(Arc::clone(&sp));
        assert_eq!(f.eval(&Assignment::new(vec![-1, 1, 1]).unwrap(), &inst).unwrap(), Surd::from_i64(-1));
        f.add_term(x2, Surd::one());
        assert_eq!(f.l2_norm_sq(None), Surd::from_i64(2));
        f.add_term(x1, Surd::from_i64(-1));
        assert_eq!(f.len(), 1);
        let c = MixedPoly::<Surd>::constant(Arc::clone(&sp), Surd::one());
        assert_eq!(c.l2_norm_sq(None), Surd::one());
        assert!(c.eval(&Assignment::all_ones(2), &inst).is_err());
    }

    fn random_poly(sp: &Arc<ScopeSpace>, seed: u64) -> MixedPoly<Surd> {
        let idx = all_indices(sp);
        let mut f = MixedPoly::zero(Arc::clone(sp));
        let mut state = seed;
        for i in idx {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            if state >> 59 == 0 {
                f.add_term(i, Surd::from_i64((state >> 40) as i64 % 7 - 3));
            }
        }
        f
    }

    #[test]
    fn parseval_matches_mean_square() {
        let sp = space(3, vec![vec![0, 1], vec![1, 2]], ratio(1, 3));
        let f = random_poly(&sp, 17);
        let mut ms = Surd::zero();
        for xm in 0..8u64 {
            let x = Assignment::from_mask(3, xm);
            for inst in all_instances(&sp) {
                let v = f.eval(&x, &inst).unwrap();
                ms = ms.add(&v.mul(&v).scale(&(null_prob(&inst) * ratio(1, 8))));
            }
        }
        assert_eq!(f.l2_norm_sq(None), ms);
    }

    #[test]
    fn restriction_matches_merged_eval_and_composes() {
        let sp = space(3, vec![vec![0, 1], vec![0, 2], vec![1, 2]], ratio(1, 3));
        let f = random_poly(&sp, 5);
        let insts = all_instances(&sp);
        let fix = insts[37].restrict_to(&[0, 2]);
        let r = f.restrict(&fix).unwrap();
        assert!(r.terms().keys().all(|i| !i.touches(&[0, 2])));
        for (n, inst) in insts.iter().enumerate().step_by(5) {
            let x = Assignment::from_mask(3, n as u64 % 8);
            let merged = inst.merged(&fix).unwrap();
            assert_eq!(r.eval(&x, inst).unwrap(), f.eval(&x, &merged).unwrap());
        }
        let step = f.restrict(&insts[37].restrict_to(&[0])).unwrap().restrict(&insts[37].restrict_to(&[2])).unwrap();
        assert_eq!(step, r);
        assert_eq!(f.restrict(&RestrictedInstance::empty()).unwrap(), f);
        assert!(matches!(
            f.restrict(&RestrictedInstance { scopes: vec![0], y: vec![2], b: vec![1, 1] }),
            Err(Error::InvalidRestriction(_))
        ));
    }

    #[test]
    fn restricting_phi_gives_constant() {
        let sp = space(3, vec![vec![0, 1, 2]], ratio(1, 3));
        let f = MixedPoly::<Surd>::monomial(
            Arc::clone(&sp),
            BasisIndex::new(VarSet::EMPTY, &[0], &[]).unwrap(),
            Surd::one(),
        )
        .unwrap();
        let fix = RestrictedInstance { scopes: vec![0], y: vec![-1], b: vec![1, 1, 1] };
        let r = f.restrict(&fix).unwrap();
        // -√(q/p) = -√2 at p = 1/3
        let expect = Surd::sqrt_rational(&ratio(2, 1)).neg();
        assert_eq!(r.coeff(&BasisIndex::constant()), expect);
        assert_eq!(r.len(), 1);
    }

    #[test]
    fn projection_commutes_with_restriction_weakly() {
        let sp = space(3, vec![vec![0, 1], vec![0, 2], vec![1, 2]], ratio(1, 3));
        let f = random_poly(&sp, 23);
        let insts = all_instances(&sp);
        let fix = insts[101].restrict_to(&[1]);
        let d = DegreeCaps::new(2, 2);
        let d1 = DegreeCaps::new(2, 1);
        let lhs = f.project(d).restrict(&fix).unwrap().project(d1);
        let rhs = f.restrict(&fix).unwrap().project(d1);
        assert_eq!(lhs, rhs);
        assert_eq!(f.project(d).project(d), f.project(d));
        assert_eq!(f.project(DegreeCaps::new(3, 3)).terms(), f.terms());
    }

    #[test]
    fn jsonl_dump_is_canonical() {
        let sp = space(3, vec![vec![0, 1, 2]], ratio(1, 3));
        let idx = BasisIndex::new(VarSet::from_indices([0, 2]), &[0], &[(0, 2), (0, 0)]).unwrap();
        let f = MixedPoly::<Surd>::monomial(Arc::clone(&sp), idx, Surd::from_rational(&ratio(-1, 3))).unwrap();
        let mut buf = Vec::new();
        f.write_jsonl(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.trim(), r#"{"alpha":[0,2],"beta":[[0,1,2]],"c":"-1/3","gamma":[[[0,1,2],0],[[0,1,2],2]]}"#);
    }
}
