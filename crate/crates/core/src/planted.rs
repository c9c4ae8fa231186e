//! Analytic Fourier coefficients of the planted density `μ_*`, its low-degree
//! projection `μ̄_*`, the restriction factor `π_U` and the error-term decomposition.

use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::csp::{Assignment, Predicate, RestrictedInstance, ScopeSpace, SlotMask, VarSet};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::fourier::{BasisConsts, BasisIndex, DegreeCaps, MixedPoly, DEFAULT_PRODUCT_LIMIT};
use crate::oracle::{ConditionalTable, TinyUniverse};
use crate::scalar::{Rational, Scalar, Surd};

/// Callback receiving a partial derivation and its remaining parity.
type Emit<'a, S> = dyn Fn(&[(usize, SlotMask)], VarSet, &mut Vec<(BasisIndex, S)>) + 'a;

/// Largest number of candidate indices `build_pseudo_density` will enumerate.
pub const DEFAULT_BUILD_LIMIT: u128 = 2_000_000;

fn check_arity(pred: &Predicate, space: &ScopeSpace) -> Result<()> {
    if pred.k() != space.k() {
        return Err(Error::InvalidInput(format!(
            "predicate arity {} differs from scope arity {}",
            pred.k(),
            space.k()
        )));
    }
    Ok(())
}

/// `p·η̂(T)` for a scope of `γ̄ \ β` and `-√(pq)·η̂(T)` for a scope of `β ∩ γ̄`.
struct ScopeWeights<S> {
    absent: Vec<S>,
    included: Vec<S>,
}

impl<S: Scalar> ScopeWeights<S> {
    fn new(pred: &Predicate, p: &Rational) -> Self {
        let q = Rational::one() - p;
        let neg_sqrt_pq = S::sqrt_rational(&(p * &q)).neg();
        let absent = pred.eta_hat_table().iter().map(|e| S::from_rational(&(p * e))).collect();
        let included = pred.eta_hat_table().iter().map(|e| neg_sqrt_pq.scale(e)).collect();
        ScopeWeights { absent, included }
    }
}

/// `μ̂_*(α, β, γ)`.
///
/// Zero unless `γ ⊢ α`, `β ⊆ γ̄` and every `|T_S| ≥ t`; otherwise a product of one
/// factor per scope of `γ̄`.
pub fn mu_star_coeff<S: Scalar>(pred: &Predicate, space: &ScopeSpace, idx: &BasisIndex) -> Result<S> {
    check_arity(pred, space)?;
    idx.validate(space)?;
    if idx.parity(space) != idx.alpha || !idx.beta_in_gamma_bar() {
        return Ok(S::zero());
    }
    if idx.min_arity().is_some_and(|r| r < pred.t()) {
        return Ok(S::zero());
    }
    let w = ScopeWeights::<S>::new(pred, space.p());
    Ok(idx.gamma.iter().fold(S::one(), |acc, &(s, t)| {
        let f = if idx.beta.binary_search(&s).is_ok() { &w.included[t as usize] } else { &w.absent[t as usize] };
        acc.mul(f)
    }))
}

/// `√(pq)^{|β∩γ̄|}·p^{|γ̄\β|}`, the magnitude bound on a coefficient.
pub fn coefficient_bound<S: Scalar>(space: &ScopeSpace, idx: &BasisIndex) -> S {
    let p = space.p();
    let sqrt_pq = S::sqrt_rational(&(p * space.q()));
    let shared = idx.beta.iter().filter(|&&s| idx.gamma.binary_search_by_key(&s, |&(g, _)| g).is_ok()).count();
    sqrt_pq.pow(shared).mul(&S::from_rational(p).pow(idx.gamma.len() - shared))
}

/// Bound table `B_∅(α, β, γ) = [β ⊆ γ̄]·√(pq)^{|β|}·p^{|γ̄\β|}`.
///
/// It dominates every coefficient and satisfies `B_∅(σ+σ')·‖ζ_{σ'}‖_∞ ≤ B_∅(σ)` for
/// disjoint supports.
pub fn bound_table<S: Scalar>(space: &ScopeSpace, idx: &BasisIndex) -> S {
    if idx.beta_in_gamma_bar() {
        coefficient_bound(space, idx)
    } else {
        S::zero()
    }
}

/// `‖φ_β ψ_γ‖_∞ = √(q/p)^{|β|}` for `p ≤ 1/2` (and `√(p/q)^{|β|}` otherwise).
pub fn basis_sup_norm<S: Scalar>(space: &ScopeSpace, beta_len: usize) -> Result<S> {
    let c = BasisConsts::<S>::new(space.p())?;
    let big =
        if space.p() <= &Rational::new(BigInt::one(), BigInt::from(2)) { c.phi_included.neg() } else { c.phi_absent };
    Ok(big.pow(beta_len))
}

/// Options for [`build_pseudo_density_with`].
#[derive(Clone, Debug)]
pub struct BuildOptions {
    pub caps: DegreeCaps,
    /// Scopes that may not appear in `β` or `γ̄` (sorted).
    pub avoid: Vec<usize>,
    pub limit: u128,
    pub exec: Exec,
}

impl BuildOptions {
    pub fn new(caps: DegreeCaps) -> Self {
        BuildOptions { caps, avoid: Vec::new(), limit: DEFAULT_BUILD_LIMIT, exec: Exec::default() }
    }

    pub fn avoiding(mut self, scopes: &[usize]) -> Self {
        self.avoid = scopes.to_vec();
        self.avoid.sort_unstable();
        self.avoid.dedup();
        self
    }
}

/// `μ̄_* = L_d μ_*` over the whole space.
pub fn build_pseudo_density<S: Scalar>(
    pred: &Predicate,
    space: &Arc<ScopeSpace>,
    caps: DegreeCaps,
) -> Result<MixedPoly<S>> {
    build_pseudo_density_with(pred, space, &BuildOptions::new(caps))
}

fn binomial(n: u128, r: u128) -> u128 {
    (0..r).fold(1u128, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Upper estimate of the number of indices the builder visits.
pub fn build_size_estimate(pred: &Predicate, allowed: usize, d_i: usize) -> u128 {
    let masks = pred.eta_support().len() as u128;
    (0..=d_i.min(allowed))
        .map(|l| {
            let l = l as u32;
            binomial(allowed as u128, l as u128)
                .saturating_mul(masks.saturating_pow(l))
                .saturating_mul(1u128 << l.min(100))
        })
        .fold(0u128, |a, b| a.saturating_add(b))
}

/// `L_d μ_*` restricted to indices that avoid `opts.avoid`.
///
/// Enumerates `γ̄` of size at most `d_I`, one nonzero-`η̂` slot set per scope, derives
/// `α` as the slot parity, and expands every `β ⊆ γ̄`.
pub fn build_pseudo_density_with<S: Scalar>(
    pred: &Predicate,
    space: &Arc<ScopeSpace>,
    opts: &BuildOptions,
) -> Result<MixedPoly<S>> {
    check_arity(pred, space)?;
    let allowed: Vec<usize> = (0..space.m()).filter(|s| opts.avoid.binary_search(s).is_err()).collect();
    let estimate = build_size_estimate(pred, allowed.len(), opts.caps.d_i);
    if estimate > opts.limit {
        return Err(Error::ResourceLimit(format!(
            "pseudo-density enumeration needs about {estimate} indices (limit {})",
            opts.limit
        )));
    }
    let masks = pred.eta_support();
    let w = ScopeWeights::<S>::new(pred, space.p());
    let degenerate = space.inclusion_is_degenerate();
    let caps = opts.caps;

    let emit = |gamma: &[(usize, SlotMask)], alpha: VarSet, out: &mut Vec<(BasisIndex, S)>| {
        if alpha.len() > caps.d_x {
            return;
        }
        let l = gamma.len();
        for bmask in 0u32..1 << l {
            if degenerate && bmask != 0 {
                // √(pq) = 0, so every β ≠ ∅ coefficient vanishes.
                continue;
            }
            let mut c = S::one();
            let mut beta = Vec::with_capacity(bmask.count_ones() as usize);
            for (i, &(s, t)) in gamma.iter().enumerate() {
                if bmask >> i & 1 == 1 {
                    beta.push(s);
                    c = c.mul(&w.included[t as usize]);
                } else {
                    c = c.mul(&w.absent[t as usize]);
                }
            }
            if !c.is_zero() {
                out.push((BasisIndex::from_parts(alpha, beta, gamma.to_vec()), c));
            }
        }
    };

    // Recursive extension of γ by scopes after `from` in `allowed`.
    #[allow(clippy::too_many_arguments)]
    fn extend<S: Scalar>(
        space: &ScopeSpace,
        allowed: &[usize],
        masks: &[SlotMask],
        from: usize,
        max_len: usize,
        gamma: &mut Vec<(usize, SlotMask)>,
        alpha: VarSet,
        emit: &Emit<'_, S>,
        out: &mut Vec<(BasisIndex, S)>,
    ) {
        emit(gamma, alpha, out);
        if gamma.len() == max_len {
            return;
        }
        for pos in from..allowed.len() {
            let s = allowed[pos];
            for &t in masks {
                gamma.push((s, t));
                extend(
                    space,
                    allowed,
                    masks,
                    pos + 1,
                    max_len,
                    gamma,
                    alpha.sym_diff(space.slot_parity(s, t)),
                    emit,
                    out,
                );
                gamma.pop();
            }
        }
    }

    let max_len = caps.d_i.min(allowed.len());
    let mut poly = MixedPoly::zero(Arc::clone(space));
    poly.add_term(BasisIndex::constant(), S::one());
    if max_len > 0 {
        let blocks = opts.exec.map_indexed(allowed.len(), |pos| {
            let mut out = Vec::new();
            let s = allowed[pos];
            for &t in &masks {
                let mut gamma = vec![(s, t)];
                extend(space, &allowed, &masks, pos + 1, max_len, &mut gamma, space.slot_parity(s, t), &emit, &mut out);
            }
            out
        });
        for (idx, c) in blocks.into_iter().flatten() {
            poly.add_term(idx, c);
        }
    }
    poly.with_caps(caps)
}

/// `μ_*` itself: the projection with caps covering the whole space.
pub fn full_density<S: Scalar>(pred: &Predicate, space: &Arc<ScopeSpace>) -> Result<MixedPoly<S>> {
    build_pseudo_density(pred, space, DegreeCaps::new(space.n(), space.m()))
}

/// Exact coefficient of `μ_*|_U` from the oracle, with its analytic bound.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalCoeff {
    pub exact: Surd,
    pub bound: Surd,
    /// `γ ⊢ α`, `r(γ) ≥ t` and `β ⊆ γ̄`.
    pub in_support: bool,
}

fn in_support(pred: &Predicate, space: &ScopeSpace, idx: &BasisIndex) -> bool {
    idx.parity(space) == idx.alpha && idx.beta_in_gamma_bar() && idx.min_arity().is_none_or(|r| r >= pred.t())
}

/// Coefficient of `μ_*|_U` at an index avoiding `U`, computed by conditional
/// enumeration on a tiny universe.
pub fn mu_conditional_coeff(
    universe: &TinyUniverse,
    fix: &RestrictedInstance,
    idx: &BasisIndex,
    exec: Exec,
) -> Result<ConditionalCoeff> {
    if idx.touches(&fix.scopes) {
        return Err(Error::InvalidIndex("index touches the fixed scopes".into()));
    }
    let table = universe.exact_conditional(fix, exec)?;
    mu_conditional_coeff_from(universe, &table, idx)
}

/// As [`mu_conditional_coeff`], reusing an already computed conditional table.
pub fn mu_conditional_coeff_from(
    universe: &TinyUniverse,
    table: &ConditionalTable,
    idx: &BasisIndex,
) -> Result<ConditionalCoeff> {
    let exact = universe.conditional_fourier(table, idx)?;
    let space = universe.space();
    Ok(ConditionalCoeff {
        exact,
        bound: coefficient_bound(space, idx),
        in_support: in_support(universe.pred(), space, idx),
    })
}

fn scope_literal_mask(space: &ScopeSpace, fix: &RestrictedInstance, pos: usize, x: &[i8]) -> u32 {
    let k = space.k();
    let s = fix.scopes[pos];
    (0..k).fold(0u32, |acc, j| acc | (u32::from(fix.b[pos * k + j] * x[space.var(s, j)] == -1) << j))
}

/// `π_U(x_V, I_U) = Π_{S∈U} (η_P(b_S∘x_S) if y_S = -1, else 1)`.
pub fn pi_u(pred: &Predicate, space: &ScopeSpace, fix: &RestrictedInstance, x: &Assignment) -> Result<Rational> {
    check_arity(pred, space)?;
    fix.validate(space)?;
    if x.len() != space.n() {
        return Err(Error::InvalidInput("assignment length differs from n".into()));
    }
    Ok((0..fix.scopes.len()).fold(Rational::one(), |acc, pos| {
        if fix.y[pos] == -1 {
            acc * pred.density(scope_literal_mask(space, fix, pos, x.values()))
        } else {
            acc
        }
    }))
}

/// `π_U` as a polynomial in `x` (no instance coordinates).
pub fn pi_u_poly<S: Scalar>(
    pred: &Predicate,
    space: &Arc<ScopeSpace>,
    fix: &RestrictedInstance,
) -> Result<MixedPoly<S>> {
    check_arity(pred, space)?;
    fix.validate(space)?;
    let k = space.k();
    let mut acc = MixedPoly::constant(Arc::clone(space), S::one());
    for pos in 0..fix.scopes.len() {
        if fix.y[pos] != -1 {
            continue;
        }
        let s = fix.scopes[pos];
        let mut factor = MixedPoly::zero(Arc::clone(space));
        for (t, e) in pred.eta_hat_table().iter().enumerate() {
            if e.is_zero() {
                continue;
            }
            let t = t as u32;
            let neg = (0..k).filter(|&j| t >> j & 1 == 1 && fix.b[pos * k + j] == -1).count() % 2 == 1;
            let c = if neg { -e.clone() } else { e.clone() };
            factor.add_term(
                BasisIndex::from_parts(space.slot_parity(s, t), Vec::new(), Vec::new()),
                S::from_rational(&c),
            );
        }
        acc = acc.multiply(&factor, DEFAULT_PRODUCT_LIMIT)?;
    }
    Ok(acc)
}

/// Outcome of splitting `R_U μ̄_*` into `π_U·L_{d''}μ_*|_U` and an error term.
#[derive(Clone, Debug)]
pub struct RestrictionDecomposition<S> {
    /// `R_U μ̄_*`.
    pub restricted: MixedPoly<S>,
    /// `π_U·L_{d''}μ_*|_U`.
    pub main: MixedPoly<S>,
    /// `h = R_U μ̄_* − main`.
    pub h: MixedPoly<S>,
    /// `d'' = d_I − 2|U|`.
    pub reduced_cap: usize,
    /// `restricted == main + h`, recomputed term by term.
    pub identity_holds: bool,
    /// Terms of `h` with `|β|, |γ̄| ≤ d''`; zero whenever the x-cap does not bind.
    pub low_degree_h_terms: usize,
}

/// Decomposes `R_U μ̄_*` at caps `d`.
///
/// `μ_*|_U` coincides with the density of the scope space without `U`, so its
/// projection is built analytically by avoiding `U`.
pub fn decompose_restriction<S: Scalar>(
    pred: &Predicate,
    space: &Arc<ScopeSpace>,
    fix: &RestrictedInstance,
    caps: DegreeCaps,
) -> Result<RestrictionDecomposition<S>> {
    fix.validate(space)?;
    let u = fix.scopes.len();
    let reduced_cap = caps
        .d_i
        .checked_sub(2 * u)
        .ok_or_else(|| Error::DegreeUnderflow(format!("d_I = {} is below 2|U| = {}", caps.d_i, 2 * u)))?;
    let full = build_pseudo_density::<S>(pred, space, caps)?;
    let restricted = full.restrict(fix)?;
    let conditional_low = build_pseudo_density_with::<S>(
        pred,
        space,
        &BuildOptions::new(DegreeCaps::new(caps.d_x, reduced_cap)).avoiding(&fix.scopes),
    )?;
    let pi = pi_u_poly::<S>(pred, space, fix)?;
    let main = pi.multiply(&conditional_low, DEFAULT_PRODUCT_LIMIT)?;
    let h = restricted.sub(&main)?;
    let identity_holds = main.add(&h)?.terms() == restricted.terms();
    let low_degree_h_terms =
        h.terms().keys().filter(|i| i.beta.len() <= reduced_cap && i.gamma.len() <= reduced_cap).count();
    Ok(RestrictionDecomposition { restricted, main, h, reduced_cap, identity_holds, low_degree_h_terms })
}

/// The error term written as `(L_{d'}R_U μ_* − L_{d''}R_U μ_*) + (R_U μ̄_* − L_{d'}R_U μ̄_*)`
/// with `d' = (d_x, d_I − |U|)`, using the full density of the space.
pub fn explicit_error_term<S: Scalar>(
    pred: &Predicate,
    space: &Arc<ScopeSpace>,
    fix: &RestrictedInstance,
    caps: DegreeCaps,
) -> Result<MixedPoly<S>> {
    let u = fix.scopes.len();
    let reduced = caps
        .d_i
        .checked_sub(2 * u)
        .ok_or_else(|| Error::DegreeUnderflow(format!("d_I = {} is below 2|U| = {}", caps.d_i, 2 * u)))?;
    let d1 = DegreeCaps::new(caps.d_x, caps.d_i - u);
    let d2 = DegreeCaps::new(caps.d_x, reduced);
    let r_full = full_density::<S>(pred, space)?.restrict(fix)?;
    let r_bar = build_pseudo_density::<S>(pred, space, caps)?.restrict(fix)?;
    r_full.project(d1).sub(&r_full.project(d2))?.add(&r_bar.sub(&r_bar.project(d1))?)
}

/// Indices of `h` whose coefficient exceeds `2^{|U|}·B_∅`.
pub fn h_bound_violations<S: Scalar>(h: &MixedPoly<S>, fix_len: usize) -> Vec<BasisIndex> {
    let factor = S::from_i64(1 << fix_len);
    h.terms()
        .iter()
        .filter(|(idx, c)| !c.abs_le(&bound_table::<S>(h.space(), idx).mul(&factor)))
        .map(|(idx, _)| idx.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csp::Instance;
    use crate::scalar::ratio;

    fn xor_space(n: usize, scopes: Vec<Vec<usize>>, p: Rational) -> Arc<ScopeSpace> {
        Arc::new(ScopeSpace::restricted(n, 3, scopes, p).unwrap())
    }

    #[test]
    fn three_xor_single_scope_coefficients() {
        let sp = xor_space(3, vec![vec![0, 1, 2]], ratio(1, 3));
        let pred = Predicate::xor(3).unwrap();
        let alpha = VarSet::from_indices([0, 1, 2]);
        let with_beta = BasisIndex::from_parts(alpha, vec![0], vec![(0, 0b111)]);
        let without = BasisIndex::from_parts(alpha, vec![], vec![(0, 0b111)]);
        let sqrt_pq = Surd::sqrt_rational(&ratio(2, 9));
        assert_eq!(mu_star_coeff::<Surd>(&pred, &sp, &with_beta).unwrap(), sqrt_pq);
        assert_eq!(mu_star_coeff::<Surd>(&pred, &sp, &without).unwrap(), Surd::rational(ratio(-1, 3)));
        assert_eq!(mu_star_coeff::<Surd>(&pred, &sp, &BasisIndex::constant()).unwrap(), Surd::one());
        // Oracle agreement on the same two indices.
        let u = TinyUniverse::new(Arc::clone(&sp), pred).unwrap();
        assert_eq!(u.exact_fourier(&with_beta, Exec::Sequential).unwrap(), sqrt_pq);
        assert_eq!(u.exact_fourier(&without, Exec::Sequential).unwrap(), Surd::rational(ratio(-1, 3)));
    }

    #[test]
    fn zero_caps_give_constant_and_xor_structure() {
        let sp = xor_space(4, vec![vec![0, 1, 2], vec![1, 2, 3], vec![3, 0, 1]], ratio(1, 4));
        let pred = Predicate::xor(3).unwrap();
        let zero = build_pseudo_density::<Surd>(&pred, &sp, DegreeCaps::new(0, 0)).unwrap();
        assert_eq!(zero.len(), 1);
        assert_eq!(zero.coeff(&BasisIndex::constant()), Surd::one());
        let full = full_density::<Surd>(&pred, &sp).unwrap();
        assert_eq!(full.len(), 27);
        assert!(full.terms().keys().all(|i| i.gamma.iter().all(|&(_, t)| t == 0b111)));
    }

    #[test]
    fn full_density_matches_oracle_density_pointwise() {
        let sp = xor_space(3, vec![vec![0, 1, 2], vec![2, 0, 1]], ratio(1, 3));
        let pred = Predicate::xor(3).unwrap();
        let poly = full_density::<Surd>(&pred, &sp).unwrap();
        let u = TinyUniverse::new(Arc::clone(&sp), pred).unwrap();
        let mu = u.exact_mu_table(Exec::Parallel).unwrap();
        for xm in 0..8u64 {
            let x = Assignment::from_mask(3, xm);
            for id in 0..mu.instance_count {
                let v = poly.eval(&x, &u.instance(id)).unwrap();
                assert_eq!(v, Surd::rational(mu.get(xm, id).clone()));
            }
        }
    }

    #[test]
    fn nae_coefficients_respect_bounds() {
        let truth = (0..8u32).map(|z| u8::from(z != 0 && z != 7)).collect();
        let pred = Predicate::uniform_on_satisfying(3, truth).unwrap();
        assert_eq!(pred.t(), 2);
        let sp = xor_space(4, vec![vec![0, 1, 2], vec![1, 2, 3]], ratio(1, 3));
        let poly = full_density::<Surd>(&pred, &sp).unwrap();
        for (idx, c) in poly.terms() {
            assert!(in_support(&pred, &sp, idx));
            assert!(c.abs_le(&coefficient_bound::<Surd>(&sp, idx)));
        }
    }

    #[test]
    fn pi_u_has_unit_mean_and_kills_unsatisfied() {
        let sp = xor_space(4, vec![vec![0, 1, 2], vec![1, 2, 3]], ratio(1, 3));
        let pred = Predicate::xor(3).unwrap();
        let u = TinyUniverse::new(Arc::clone(&sp), pred.clone()).unwrap();
        let k = 3;
        let joint = u.exact_planted_table(Exec::Parallel).unwrap();
        let mut total = Rational::zero();
        let scopes = vec![0, 1];
        for code_pair in 0..256u32 {
            let codes = [code_pair & 15, code_pair >> 4];
            let fix = RestrictedInstance::from_codes(scopes.clone(), &codes, k);
            let w = codes.iter().fold(Rational::one(), |a, &c| a * u.null_factor(c));
            for xm in 0..16u64 {
                let x = Assignment::from_mask(4, xm);
                let v = pi_u(&pred, &sp, &fix, &x).unwrap();
                total += &w * &v / Rational::from_integer(BigInt::from(16));
                assert_eq!(v, u.exact_pi(&joint, &fix, xm).unwrap());
            }
        }
        assert_eq!(total, Rational::one());
        // Included scope whose literals multiply to +1 is unsatisfied.
        let fix = RestrictedInstance { scopes: vec![0], y: vec![-1], b: vec![1, 1, 1] };
        assert!(pi_u(&pred, &sp, &fix, &Assignment::all_ones(4)).unwrap().is_zero());
    }

    #[test]
    fn pi_u_poly_matches_values() {
        let sp = xor_space(4, vec![vec![0, 1, 2], vec![1, 2, 3]], ratio(1, 3));
        let pred = Predicate::xor(3).unwrap();
        let fix = RestrictedInstance { scopes: vec![0, 1], y: vec![-1, -1], b: vec![1, -1, 1, 1, 1, -1] };
        let poly = pi_u_poly::<Surd>(&pred, &sp, &fix).unwrap();
        let inst = Instance::empty(Arc::clone(&sp));
        for xm in 0..16u64 {
            let x = Assignment::from_mask(4, xm);
            assert_eq!(poly.eval(&x, &inst).unwrap(), Surd::rational(pi_u(&pred, &sp, &fix, &x).unwrap()));
        }
    }

    #[test]
    fn empty_restriction_decomposes_trivially() {
        let sp = xor_space(4, vec![vec![0, 1, 2], vec![1, 2, 3], vec![3, 0, 1]], ratio(1, 3));
        let pred = Predicate::xor(3).unwrap();
        let caps = DegreeCaps::new(4, 2);
        let d = decompose_restriction::<Surd>(&pred, &sp, &RestrictedInstance::empty(), caps).unwrap();
        assert!(d.h.is_empty());
        assert_eq!(d.main.terms(), build_pseudo_density::<Surd>(&pred, &sp, caps).unwrap().terms());
        let fix = RestrictedInstance { scopes: vec![0, 1], y: vec![-1, 1], b: vec![1; 6] };
        assert!(matches!(
            decompose_restriction::<Surd>(&pred, &sp, &fix, DegreeCaps::new(4, 3)),
            Err(Error::DegreeUnderflow(_))
        ));
    }

    #[test]
    fn decomposition_with_uncapped_x_matches_explicit_error_term() {
        let sp = xor_space(4, vec![vec![0, 1, 2], vec![1, 2, 3], vec![3, 0, 1]], ratio(1, 3));
        let pred = Predicate::xor(3).unwrap();
        let fix = RestrictedInstance { scopes: vec![1], y: vec![-1], b: vec![-1, 1, 1] };
        for d_i in 2..=4 {
            let caps = DegreeCaps::new(4, d_i);
            let d = decompose_restriction::<Surd>(&pred, &sp, &fix, caps).unwrap();
            assert!(d.identity_holds);
            assert_eq!(d.low_degree_h_terms, 0);
            let explicit = explicit_error_term::<Surd>(&pred, &sp, &fix, caps).unwrap();
            assert_eq!(explicit.terms(), d.h.terms());
            assert!(h_bound_violations(&d.h, 1).is_empty());
        }
    }

    #[test]
    fn conditional_coefficients_match_analytic_form() {
        let sp = xor_space(4, vec![vec![0, 1, 2], vec![0, 1, 3], vec![1, 2, 3]], ratio(1, 3));
        let pred = Predicate::xor(3).unwrap();
        let u = TinyUniverse::new(Arc::clone(&sp), pred.clone()).unwrap();
        let fix = RestrictedInstance { scopes: vec![2], y: vec![-1], b: vec![1, 1, -1] };
        let table = u.exact_conditional(&fix, Exec::Parallel).unwrap();
        let off = full_density::<Surd>(&pred, &sp).unwrap().filter(|i| !i.touches(&[2]));
        for (idx, c) in off.terms() {
            let cc = mu_conditional_coeff_from(&u, &table, idx).unwrap();
            assert_eq!(&cc.exact, c);
            assert!(cc.in_support && cc.exact.abs_le(&cc.bound));
        }
        let low_arity = BasisIndex::from_parts(VarSet::from_indices([0, 1]), vec![], vec![(0, 0b011)]);
        assert!(mu_conditional_coeff_from(&u, &table, &low_arity).unwrap().exact.is_zero());
        let touching = BasisIndex::from_parts(VarSet::EMPTY, vec![2], vec![]);
        assert!(matches!(mu_conditional_coeff(&u, &fix, &touching, Exec::Sequential), Err(Error::InvalidIndex(_))));
    }

    #[test]
    fn bound_table_second_decay_property() {
        let sp = xor_space(4, vec![vec![0, 1, 2], vec![1, 2, 3]], ratio(1, 3));
        let all: Vec<BasisIndex> = (0u32..4)
            .flat_map(|b| (0u32..64).map(move |g| (b, g)))
            .map(|(b, g)| {
                let beta: Vec<usize> = (0..2).filter(|s| b >> s & 1 == 1).collect();
                let gamma: Vec<(usize, u32)> =
                    (0..2).map(|s| (s, (g >> (3 * s)) & 7)).filter(|&(_, t)| t != 0).collect();
                BasisIndex::from_parts(VarSet::EMPTY, beta, gamma)
            })
            .collect();
        // σ avoids scope 1, σ' lives on scope 1.
        for sigma in all.iter().filter(|i| !i.touches(&[1])) {
            for sigma2 in all.iter().filter(|i| !i.touches(&[0])) {
                let merged = BasisIndex::from_parts(
                    VarSet::EMPTY,
                    [sigma.beta.clone(), sigma2.beta.clone()].concat(),
                    [sigma.gamma.clone(), sigma2.gamma.clone()].concat(),
                );
                let lhs =
                    bound_table::<Surd>(&sp, &merged).mul(&basis_sup_norm::<Surd>(&sp, sigma2.beta.len()).unwrap());
                assert!(bound_table::<Surd>(&sp, sigma).sub(&lhs).signum() != std::cmp::Ordering::Less);
            }
        }
    }
}
