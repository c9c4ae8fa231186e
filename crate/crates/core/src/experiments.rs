//! Quantities read off the pseudo-density once an instance (or a distribution over
//! instances) is fixed: the calibrated objective `G`, the refutation event, averaged
//! densities over CBD parts, local pseudo-moments, and the contradiction pipeline for
//! explicit nonnegative factorizations.
//!
//! Fixing `(y, b)` collapses the `β` sum of `μ̄_*` scope by scope:
//! `p·η̂(T) − √(pq)·η̂(T)·φ(y_S) = η̂(T)·[y_S = −1]`, so the x-polynomial
//! `μ̄_*(·, I) = Σ_γ Π_{S∈γ̄} η̂(T_S)·χ_{T_S}(b_S) · χ_{∂γ}(x)` runs over `γ` supported on
//! included scopes only, with `|γ̄| ≤ d_I`, every `|T_S| ≥ t` and `|∂γ| ≤ d_x`. It is
//! rational and independent of `p`.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::cbd::{decompose, verify_partition, DecomposeParams, DistributionTable, InstanceCodec, InstanceSet};
use crate::csp::{Instance, Predicate, ScopeSpace, SlotMask, VarSet};
use crate::exec::Exec;
use crate::fourier::{DegreeCaps, XPoly};
use crate::scalar::{rational_string, Rational, Surd};
use crate::{Error, Result};

/// Default bound on the number of `γ` enumerated for one instance.
pub const DEFAULT_GAMMA_LIMIT: u128 = 20_000_000;
/// Largest `n` for exhaustive enumeration of `x`.
pub const MAX_ENUM_VARS: usize = 24;
/// Default threshold standing in for "below −o(1)".
pub const DEFAULT_TAU_NEG: f64 = 1e-2;

/// Exact polynomial in `x` alone with rational coefficients, keyed by `α`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RationalXPoly {
    pub n: usize,
    pub terms: BTreeMap<VarSet, Rational>,
}

impl RationalXPoly {
    pub fn zero(n: usize) -> Self {
        RationalXPoly { n, terms: BTreeMap::new() }
    }

    pub fn constant(n: usize, c: Rational) -> Self {
        let mut p = Self::zero(n);
        p.add_term(VarSet::EMPTY, c);
        p
    }

    pub fn add_term(&mut self, alpha: VarSet, c: Rational) {
        if c.is_zero() {
            return;
        }
        let slot = self.terms.entry(alpha).or_insert_with(Rational::zero);
        *slot += c;
        if slot.is_zero() {
            self.terms.remove(&alpha);
        }
    }

    pub fn coeff(&self, alpha: VarSet) -> Rational {
        self.terms.get(&alpha).cloned().unwrap_or_else(Rational::zero)
    }

    /// `self += c·other`.
    pub fn add_scaled(&mut self, other: &RationalXPoly, c: &Rational) {
        for (&a, v) in &other.terms {
            self.add_term(a, v * c);
        }
    }

    pub fn eval_mask(&self, x_mask: u64) -> Rational {
        self.terms.iter().fold(
            Rational::zero(),
            |acc, (a, c)| {
                if a.character_mask(x_mask) < 0 {
                    acc - c
                } else {
                    acc + c
                }
            },
        )
    }

    /// `E_x[f·g]` for uniform `x`: the characters are orthonormal.
    pub fn pair(&self, other: &RationalXPoly) -> Rational {
        let (small, large) = if self.terms.len() <= other.terms.len() { (self, other) } else { (other, self) };
        small.terms.iter().filter_map(|(a, c)| large.terms.get(a).map(|d| c * d)).sum()
    }

    /// Expansion of a table over all `2^n` assignments, indexed by mask.
    pub fn from_values(n: usize, values: &[Rational]) -> Result<Self> {
        if n > MAX_ENUM_VARS || values.len() != 1 << n {
            return Err(Error::InvalidInput(format!("expected 2^{n} values, got {}", values.len())));
        }
        let scale = Rational::from_integer(BigInt::one() << n);
        let mut out = Self::zero(n);
        for alpha in 0..1u64 << n {
            let a = VarSet(alpha);
            let s: Rational = values
                .iter()
                .enumerate()
                .map(|(x, v)| if a.character_mask(x as u64) < 0 { -v.clone() } else { v.clone() })
                .sum();
            out.add_term(a, s / &scale);
        }
        Ok(out)
    }

    pub fn to_surd(&self) -> XPoly<Surd> {
        let mut out = XPoly::zero(self.n);
        for (&a, c) in &self.terms {
            out.add_term(a, Surd::rational(c.clone()));
        }
        out
    }
}

/// `Σ_{j ≤ d} C(m, j)·s^j`, saturating.
fn gamma_count_estimate(m: usize, support: usize, d: usize) -> u128 {
    let mut total = 0u128;
    let mut binom = 1u128;
    for j in 0..=d.min(m) {
        total = total.saturating_add(binom.saturating_mul((support as u128).saturating_pow(j as u32)));
        binom = binom.saturating_mul((m - j) as u128) / (j as u128 + 1);
    }
    total
}

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

/// `χ_T(b_S)`.
fn b_character(inst: &Instance, s: usize, t: SlotMask) -> bool {
    let neg = inst.b_scope(s).iter().enumerate().filter(|&(j, &v)| t >> j & 1 == 1 && v < 0).count();
    neg % 2 == 1
}

/// `μ̄_*(·, I)` at caps `d`.
pub fn instance_density(pred: &Predicate, inst: &Instance, caps: DegreeCaps) -> Result<RationalXPoly> {
    instance_density_with_limit(pred, inst, caps, DEFAULT_GAMMA_LIMIT)
}

pub fn instance_density_with_limit(
    pred: &Predicate,
    inst: &Instance,
    caps: DegreeCaps,
    limit: u128,
) -> Result<RationalXPoly> {
    let space = inst.space();
    check_arity(pred, space)?;
    let support: Vec<(SlotMask, Rational)> = pred
        .eta_support()
        .into_iter()
        .filter(|&t| t != 0 && t.count_ones() as usize >= pred.t())
        .map(|t| (t, pred.eta_hat(t).clone()))
        .collect();
    let included = inst.included();
    let estimate = gamma_count_estimate(included.len(), support.len(), caps.d_i);
    if estimate > limit {
        return Err(Error::ResourceLimit(format!(
            "about {estimate} derivation terms for this instance exceed the limit {limit}"
        )));
    }
    let mut out = RationalXPoly::constant(space.n(), Rational::one());
    let mut stack: Vec<(usize, VarSet, Rational, usize)> = vec![(0, VarSet::EMPTY, Rational::one(), 0)];
    while let Some((start, parity, weight, depth)) = stack.pop() {
        if depth == caps.d_i {
            continue;
        }
        for (pos, &s) in included.iter().enumerate().skip(start) {
            for (t, eta) in &support {
                let w = if b_character(inst, s, *t) { -(&weight * eta) } else { &weight * eta };
                let par = parity.sym_diff(space.slot_parity(s, *t));
                if par.len() <= caps.d_x {
                    out.add_term(par, w.clone());
                }
                stack.push((pos + 1, par, w, depth + 1));
            }
        }
    }
    Ok(out)
}

/// `F(·, I) = Σ_{S included} P(b_S ∘ x_S)` as an x-polynomial.
pub fn objective_poly(pred: &Predicate, inst: &Instance) -> Result<RationalXPoly> {
    let space = inst.space();
    check_arity(pred, space)?;
    let hats: Vec<(SlotMask, Rational)> =
        (0..1u32 << pred.k()).map(|t| (t, pred.truth_hat(t))).filter(|(_, c)| !c.is_zero()).collect();
    let mut out = RationalXPoly::zero(space.n());
    for s in inst.included() {
        for (t, c) in &hats {
            let v = if b_character(inst, s, *t) { -c.clone() } else { c.clone() };
            out.add_term(space.slot_parity(s, *t), v);
        }
    }
    Ok(out)
}

/// `G(y, b) = E_x[μ̄_*·F]`.
pub fn objective_estimate(pred: &Predicate, inst: &Instance, caps: DegreeCaps) -> Result<Rational> {
    Ok(instance_density(pred, inst, caps)?.pair(&objective_poly(pred, inst)?))
}

/// `p·M`, the expected constraint count (`Δn` on the full space).
pub fn expected_count(space: &ScopeSpace) -> Rational {
    space.p() * Rational::from_integer(BigInt::from(space.m()))
}

/// The two clauses of the refutation event for one instance.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LhsEvent {
    pub m: usize,
    #[serde(serialize_with = "ser_rational")]
    pub expected: Rational,
    #[serde(serialize_with = "ser_rational")]
    pub c: Rational,
    #[serde(serialize_with = "ser_rational")]
    pub g: Rational,
    /// `E_x[μ̄_*·(c − F)]`.
    #[serde(serialize_with = "ser_rational")]
    pub lhs: Rational,
    /// `|m − Δn| ≤ (η/2)·Δn`.
    pub count_ok: bool,
    /// `lhs ≤ −(η/2)·Δn`.
    pub lhs_ok: bool,
    pub event: bool,
    /// `η ∉ (0, 1)`: the second clause loses its margin.
    pub degenerate: bool,
}

fn ser_rational<S: serde::Serializer>(q: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&rational_string(q))
}

/// Event check from a precomputed density and objective.
pub fn lhs_event_from(
    mu: &RationalXPoly,
    f: &RationalXPoly,
    m: usize,
    expected: &Rational,
    eta: &Rational,
) -> LhsEvent {
    let c = (Rational::one() - eta) * expected;
    let g = mu.pair(f);
    let lhs = &c * mu.coeff(VarSet::EMPTY) - &g;
    let half = eta * expected / Rational::from_integer(BigInt::from(2));
    let count_ok = (Rational::from_integer(BigInt::from(m)) - expected).abs() <= half;
    let lhs_ok = lhs <= -half.clone();
    LhsEvent {
        m,
        expected: expected.clone(),
        c,
        g,
        lhs,
        count_ok,
        lhs_ok,
        event: count_ok && lhs_ok,
        degenerate: !eta.is_positive() || *eta >= Rational::one(),
    }
}

/// `|m − Δn| ≤ (η/2)Δn` and `E_x[μ̄_*(c − F)] ≤ −(η/2)Δn` with `c = (1 − η)Δn`.
pub fn lhs_event_check(pred: &Predicate, inst: &Instance, caps: DegreeCaps, eta: &Rational) -> Result<LhsEvent> {
    let mu = instance_density(pred, inst, caps)?;
    let f = objective_poly(pred, inst)?;
    Ok(lhs_event_from(&mu, &f, inst.constraint_count(), &expected_count(inst.space()), eta))
}

/// `H(x) = E_{I∼D}[μ̄_*(x, I)]`.
pub fn avg_over_distribution(
    d: &DistributionTable,
    pred: &Predicate,
    caps: DegreeCaps,
    exec: Exec,
) -> Result<RationalXPoly> {
    let support: Vec<(u64, Rational)> = d.support().map(|(id, w)| (id, w.clone())).collect();
    let codec = *d.codec();
    let space = d.space();
    let polys = exec.try_map_indexed(support.len(), |i| {
        let inst = Instance::from_codes(space.clone(), &codec.codes(support[i].0));
        instance_density(pred, &inst, caps)
    })?;
    let mut out = RationalXPoly::zero(space.n());
    for (poly, (_, w)) in polys.iter().zip(&support) {
        out.add_scaled(poly, w);
    }
    Ok(out)
}

/// Fraction of `x ∈ {−1,1}^n` with `H(x) < −τ`, by exhaustive enumeration.
pub fn negative_fraction(h: &RationalXPoly, tau: &Rational, exec: Exec) -> Result<f64> {
    let n = h.n;
    if n > MAX_ENUM_VARS {
        return Err(Error::ResourceLimit(format!("enumerating 2^{n} assignments (cap 2^{MAX_ENUM_VARS})")));
    }
    const CHUNK: usize = 1 << 10;
    let total = 1usize << n;
    let chunks = total.div_ceil(CHUNK);
    let neg = -tau.clone();
    let counts = exec.map_indexed(chunks, |c| {
        (c * CHUNK..((c + 1) * CHUNK).min(total)).filter(|&x| h.eval_mask(x as u64) < neg).count()
    });
    Ok(counts.iter().sum::<usize>() as f64 / total as f64)
}

/// Minimum of `H` over all `x`.
pub fn min_value(h: &RationalXPoly, exec: Exec) -> Result<Rational> {
    if h.n > MAX_ENUM_VARS {
        return Err(Error::ResourceLimit(format!("enumerating 2^{} assignments", h.n)));
    }
    let vals = exec.map_indexed(1 << h.n, |x| h.eval_mask(x as u64));
    Ok(vals.into_iter().min().expect("at least one assignment"))
}

/// Signed local "distribution" of a pseudo-density on one variable subset.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalCheck {
    pub vars: Vec<usize>,
    #[serde(serialize_with = "ser_rational")]
    pub min_mass: Rational,
    pub nonneg: bool,
}

/// Pseudo-moments `E_x[χ_α·μ̄_*(x, I)]` for `|α| ≤ cap` and local distributions on every
/// variable subset of size `1..=cap`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentReport {
    pub label: String,
    /// Moment at `α = ∅`.
    #[serde(serialize_with = "ser_rational")]
    pub mass: Rational,
    /// Nonzero moments, keyed by sorted variable lists.
    pub moments: Vec<(Vec<usize>, String)>,
    pub local: Vec<LocalCheck>,
    #[serde(serialize_with = "ser_rational")]
    pub min_local_mass: Rational,
}

/// Largest number of variable subsets examined by [`local_moments`].
pub const MAX_LOCAL_SUBSETS: u128 = 1_000_000;

/// Local distributions of an x-polynomial: `Pr[x_T = z] = 2^{−|T|}·Σ_{α⊆T} μ̂(α)·χ_α(z)`.
pub fn local_report(mu: &RationalXPoly, cap: usize, label: String) -> Result<MomentReport> {
    let n = mu.n;
    let subsets = gamma_count_estimate(n, 1, cap);
    if subsets > MAX_LOCAL_SUBSETS {
        return Err(Error::ResourceLimit(format!("{subsets} variable subsets exceed {MAX_LOCAL_SUBSETS}")));
    }
    let moments =
        mu.terms.iter().filter(|(a, _)| a.len() <= cap).map(|(a, c)| (a.indices(), rational_string(c))).collect();
    let mut local = Vec::new();
    let mut min_local = None::<Rational>;
    for size in 1..=cap.min(n) {
        for vars in combinations(n, size) {
            let t = VarSet::from_indices(vars.iter().copied());
            let inside: Vec<(VarSet, &Rational)> =
                mu.terms.iter().filter(|(a, _)| a.is_subset(t)).map(|(a, c)| (*a, c)).collect();
            let scale = Rational::from_integer(BigInt::one() << size);
            let mut min_mass = None::<Rational>;
            for z in 0..1u64 << size {
                // Spread the pattern z over the positions of T.
                let x_mask = vars.iter().enumerate().fold(0u64, |acc, (j, &v)| acc | ((z >> j) & 1) << v);
                let v: Rational = inside
                    .iter()
                    .map(|(a, c)| if a.character_mask(x_mask) < 0 { -(*c).clone() } else { (*c).clone() })
                    .sum::<Rational>()
                    / &scale;
                if min_mass.as_ref().is_none_or(|m| v < *m) {
                    min_mass = Some(v);
                }
            }
            let min_mass = min_mass.expect("nonempty pattern set");
            if min_local.as_ref().is_none_or(|m| min_mass < *m) {
                min_local = Some(min_mass.clone());
            }
            local.push(LocalCheck { vars, nonneg: !min_mass.is_negative(), min_mass });
        }
    }
    Ok(MomentReport {
        label,
        mass: mu.coeff(VarSet::EMPTY),
        moments,
        local,
        min_local_mass: min_local.unwrap_or_else(|| mu.coeff(VarSet::EMPTY)),
    })
}

/// [`local_report`] of `μ̄_*(·, I)`.
pub fn local_moments(
    pred: &Predicate,
    inst: &Instance,
    caps: DegreeCaps,
    cap: usize,
    label: String,
) -> Result<MomentReport> {
    local_report(&instance_density(pred, inst, caps)?, cap, label)
}

fn combinations(n: usize, size: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..size).collect();
    if size > n {
        return out;
    }
    loop {
        out.push(cur.clone());
        let Some(i) = (0..size).rev().find(|&i| cur[i] < n - size + i) else {
            return out;
        };
        cur[i] += 1;
        for j in i + 1..size {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// Explicit candidate `c − f_I(x) = Σ_i p_i(I)·q_i(x)` on a small space.
#[derive(Clone, Debug, PartialEq)]
pub struct Factorization {
    pub c: Rational,
    /// The instance set `A`, as instance ids.
    pub instances: Vec<u64>,
    /// `p_i` on `A`; missing entries are zero.
    pub p: Vec<BTreeMap<u64, Rational>>,
    /// `q_i` over all `2^n` assignments, by mask.
    pub q: Vec<Vec<Rational>>,
}

/// A point where the identity fails.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Mismatch {
    pub instance: u64,
    pub x_mask: u64,
    #[serde(serialize_with = "ser_rational")]
    pub lhs: Rational,
    #[serde(serialize_with = "ser_rational")]
    pub rhs: Rational,
}

/// Decomposition of one normalized factor `D_i ∝ p_i·D(p)` on `A`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FactorPipeline {
    pub factor: usize,
    #[serde(serialize_with = "ser_rational")]
    pub weight: Rational,
    pub parts: usize,
    pub b_len: usize,
    pub c_len: usize,
    pub partition_ok: bool,
    /// Smallest value over `x` of the averaged density on any CBD part.
    pub min_h: Option<String>,
}

/// Both sides of the contradiction on the surviving instances.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PipelineReport {
    /// `A` minus every factor's `B` and `C` sets.
    pub kept: Vec<u64>,
    #[serde(serialize_with = "ser_rational")]
    pub lhs: Rational,
    #[serde(serialize_with = "ser_rational")]
    pub rhs: Rational,
    /// `λ = −lhs`, the margin by which the left side is negative.
    #[serde(serialize_with = "ser_rational")]
    pub lambda: Rational,
    pub lhs_negative: bool,
    pub rhs_at_least_neg_lambda: bool,
    pub factors: Vec<FactorPipeline>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FactorizationReport {
    pub identity_holds: bool,
    pub mismatches: Vec<Mismatch>,
    pub checked_points: usize,
    pub pipeline: Option<PipelineReport>,
}

/// Mismatches listed before the identity check gives up reporting.
const MAX_MISMATCHES: usize = 16;

/// Verifies the identity exactly on `A × {−1,1}^n`, then (when it holds) normalizes
/// each `p_i` against `D(p)` on `A`, decomposes it, drops every factor's `B ∪ C` from
/// `A`, and evaluates `E[1_B·μ̄_*·(c − F)]` and `E[1_B·μ̄_*·Σ p_i q_i]` separately.
pub fn factorization_check(
    pred: &Predicate,
    space: &std::sync::Arc<ScopeSpace>,
    fact: &Factorization,
    caps: DegreeCaps,
    params: &DecomposeParams,
) -> Result<FactorizationReport> {
    check_arity(pred, space)?;
    let n = space.n();
    if n > MAX_ENUM_VARS {
        return Err(Error::ResourceLimit(format!("factorization over 2^{n} assignments")));
    }
    let codec = InstanceCodec::new(space)?;
    for (i, q) in fact.q.iter().enumerate() {
        if q.len() != 1 << n {
            return Err(Error::InvalidFactorization(format!("q_{i} has {} entries, expected 2^{n}", q.len())));
        }
        if let Some(x) = q.iter().position(|v| v.is_negative()) {
            return Err(Error::InvalidFactorization(format!("q_{i}(x) < 0 at x mask {x}")));
        }
    }
    if fact.p.len() != fact.q.len() {
        return Err(Error::InvalidFactorization(format!("{} p-factors but {} q-factors", fact.p.len(), fact.q.len())));
    }
    let members: BTreeSet<u64> = fact.instances.iter().copied().collect();
    for (i, p) in fact.p.iter().enumerate() {
        if let Some((id, _)) = p.iter().find(|(_, v)| v.is_negative()) {
            return Err(Error::InvalidFactorization(format!("p_{i}(I) < 0 at instance {id}")));
        }
        if let Some(id) = p.keys().find(|id| !members.contains(id)) {
            return Err(Error::InvalidFactorization(format!("p_{i} has an entry at instance {id} outside A")));
        }
    }
    if let Some(&id) = members.iter().find(|&&id| id >= codec.count()) {
        return Err(Error::InvalidFactorization(format!("instance {id} outside the space")));
    }

    let zero = Rational::zero();
    let mut mismatches = Vec::new();
    let mut checked = 0;
    let mut objectives = BTreeMap::new();
    for &id in &members {
        let inst = Instance::from_codes(space.clone(), &codec.codes(id));
        let f = objective_poly(pred, &inst)?;
        for x in 0..1u64 << n {
            checked += 1;
            let lhs = &fact.c - f.eval_mask(x);
            let rhs: Rational =
                fact.p.iter().zip(&fact.q).map(|(p, q)| p.get(&id).unwrap_or(&zero) * &q[x as usize]).sum();
            if lhs != rhs && mismatches.len() < MAX_MISMATCHES {
                mismatches.push(Mismatch { instance: id, x_mask: x, lhs, rhs });
            } else if lhs != rhs {
                break;
            }
        }
        objectives.insert(id, (inst, f));
    }
    let identity_holds = mismatches.is_empty();
    let pipeline =
        if identity_holds { Some(contradiction_pipeline(pred, space, fact, caps, params, &objectives)?) } else { None };
    Ok(FactorizationReport { identity_holds, mismatches, checked_points: checked, pipeline })
}

fn contradiction_pipeline(
    pred: &Predicate,
    space: &std::sync::Arc<ScopeSpace>,
    fact: &Factorization,
    caps: DegreeCaps,
    params: &DecomposeParams,
    objectives: &BTreeMap<u64, (Instance, RationalXPoly)>,
) -> Result<PipelineReport> {
    let n = space.n();
    let null = DistributionTable::null(space.clone())?;
    let universe = null.instance_count();
    let mut removed = InstanceSet::empty(universe);
    let mut factors = Vec::new();
    for (i, p) in fact.p.iter().enumerate() {
        let weights: BTreeMap<u64, Rational> =
            p.iter().filter(|(_, v)| !v.is_zero()).map(|(&id, v)| (id, v * null.null_prob(id))).collect();
        let weight: Rational = weights.values().sum();
        if weight.is_zero() {
            factors.push(FactorPipeline {
                factor: i,
                weight,
                parts: 0,
                b_len: 0,
                c_len: 0,
                partition_ok: true,
                min_h: None,
            });
            continue;
        }
        let d = null.from_weights(weights)?;
        let part = decompose(&d, params)?;
        let report = verify_partition(&part, &d)?;
        for &id in part.b.iter().chain(&part.c) {
            removed.insert(id);
        }
        let mut min_h: Option<Rational> = None;
        for piece in &part.parts {
            let set = InstanceSet::from_ids(universe, piece.instances.iter().copied());
            let Ok(cond) = d.conditioned(&set) else { continue };
            let h = avg_over_distribution(&cond, pred, caps, Exec::Sequential)?;
            let m = min_value(&h, Exec::Sequential)?;
            if min_h.as_ref().is_none_or(|cur| m < *cur) {
                min_h = Some(m);
            }
        }
        factors.push(FactorPipeline {
            factor: i,
            weight,
            parts: part.parts.len(),
            b_len: part.b.len(),
            c_len: part.c.len(),
            partition_ok: report.all_ok,
            min_h: min_h.as_ref().map(rational_string),
        });
    }

    let scale = Rational::from_integer(BigInt::one() << n);
    let zero = Rational::zero();
    let mut lhs = Rational::zero();
    let mut rhs = Rational::zero();
    let mut kept = Vec::new();
    for (&id, (inst, f)) in objectives {
        if removed.contains(id) {
            continue;
        }
        kept.push(id);
        let w = null.null_prob(id);
        let mu = instance_density(pred, inst, caps)?;
        lhs += w * (&fact.c * mu.coeff(VarSet::EMPTY) - mu.pair(f));
        let mut inner = Rational::zero();
        for (p, q) in fact.p.iter().zip(&fact.q) {
            let pi = p.get(&id).unwrap_or(&zero);
            if pi.is_zero() {
                continue;
            }
            let eq: Rational = q.iter().enumerate().map(|(x, v)| mu.eval_mask(x as u64) * v).sum::<Rational>() / &scale;
            inner += pi * eq;
        }
        rhs += w * inner;
    }
    let lambda = -lhs.clone();
    Ok(PipelineReport {
        kept,
        lhs_negative: lhs.is_negative(),
        rhs_at_least_neg_lambda: rhs >= -lambda.clone(),
        lhs,
        rhs,
        lambda,
        factors,
    })
}

/// The degenerate witness `R = 1`, `p_0 ≡ 1`, `q_0 = c − f_I` for a single instance.
pub fn trivial_factorization(pred: &Predicate, inst: &Instance, c: Rational) -> Result<Factorization> {
    let space = inst.space();
    let codec = InstanceCodec::new(space)?;
    let id = codec.id(&(0..space.m()).map(|s| inst.scope_code(s)).collect::<Vec<_>>());
    let f = objective_poly(pred, inst)?;
    let q = (0..1u64 << space.n()).map(|x| &c - f.eval_mask(x)).collect();
    Ok(Factorization { c, instances: vec![id], p: vec![BTreeMap::from([(id, Rational::one())])], q: vec![q] })
}
