//! The derivation relation `γ ⊢ α`, enumeration and counting of derivations and the
//! closed-form envelopes they are compared against.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::sync::Arc;

use num_traits::{One, Zero};
use serde::Serialize;

use crate::csp::{Predicate, ScopeSpace, SlotMask, VarSet};
use crate::exec::Exec;
use crate::scalar::{Rational, Scalar};
use crate::{Error, Result};

/// Largest number of candidate γ an enumeration may visit.
pub const DEFAULT_ENUM_LIMIT: u128 = 5_000_000;

/// Set of `(scope, slot)` pairs, one nonzero slot mask per scope, sorted by scope.
pub type Gamma = Vec<(usize, SlotMask)>;

/// `c_i`: how often variable `i` appears among the slots of `γ`.
pub fn appearance_counts(space: &ScopeSpace, gamma: &[(usize, SlotMask)]) -> Vec<usize> {
    let mut c = vec![0; space.n()];
    for &(s, t) in gamma {
        for (j, &v) in space.scope(s).iter().enumerate() {
            if t >> j & 1 == 1 {
                c[v] += 1;
            }
        }
    }
    c
}

/// `γ ⊢ α`: every variable of `α` appears an odd number of times in `γ`, every other
/// variable an even number. Decided by a parity fold in O(|γ|·k).
pub fn derives(space: &ScopeSpace, gamma: &[(usize, SlotMask)], alpha: VarSet) -> bool {
    gamma.iter().fold(VarSet::EMPTY, |acc, &(s, t)| acc.sym_diff(space.slot_parity(s, t))) == alpha
}

/// Which γ to enumerate: `γ ⊢ alpha`, `r(γ) ≥ r_min`, `|γ̄| ≤ l_max`.
#[derive(Clone, Debug)]
pub struct DerivationQuery {
    pub alpha: VarSet,
    pub l_max: usize,
    pub r_min: usize,
    pub space: Arc<ScopeSpace>,
}

impl DerivationQuery {
    pub fn new(space: Arc<ScopeSpace>, alpha: VarSet, l_max: usize, r_min: usize) -> Self {
        DerivationQuery { alpha, l_max, r_min, space }
    }

    /// Nonzero slot masks with at least `r_min` slots.
    pub fn masks(&self) -> Vec<SlotMask> {
        arity_masks(self.space.k(), self.r_min)
    }

    /// Number of candidate γ, Σ_{l ≤ l_max} C(m, l)·|masks|^l.
    pub fn candidate_count(&self) -> u128 {
        candidate_count(self.space.m(), self.masks().len(), self.l_max)
    }
}

fn arity_masks(k: usize, r_min: usize) -> Vec<SlotMask> {
    (1..1u32 << k).filter(|m| m.count_ones() as usize >= r_min).collect()
}

fn candidate_count(m: usize, masks: usize, l_max: usize) -> u128 {
    let mut total: u128 = 0;
    let mut binom: u128 = 1;
    let mut pow: u128 = 1;
    for l in 0..=l_max.min(m) {
        total = total.saturating_add(binom.saturating_mul(pow));
        binom = binom.saturating_mul((m - l) as u128) / (l as u128 + 1);
        pow = pow.saturating_mul(masks as u128);
    }
    total
}

/// One derivation and the number of `β ⊆ γ̄` paired with it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Derivation {
    pub gamma: Gamma,
    pub beta_count: u64,
}

/// All γ matching the query, in lexicographic order of `(scope, mask)` lists.
pub fn enumerate_derivations(q: &DerivationQuery, exec: Exec) -> Result<Vec<Derivation>> {
    enumerate_derivations_with_limit(q, DEFAULT_ENUM_LIMIT, exec)
}

pub fn enumerate_derivations_with_limit(q: &DerivationQuery, limit: u128, exec: Exec) -> Result<Vec<Derivation>> {
    let candidates = q.candidate_count();
    if candidates > limit {
        return Err(Error::ResourceLimit(format!(
            "derivation enumeration visits {candidates} candidates (limit {limit})"
        )));
    }
    if q.l_max >= 64 {
        return Err(Error::ResourceLimit("l_max must be below 64".into()));
    }
    let space = &*q.space;
    let masks = q.masks();

    #[allow(clippy::too_many_arguments)]
    fn extend(
        space: &ScopeSpace,
        masks: &[SlotMask],
        target: VarSet,
        from: usize,
        max_len: usize,
        gamma: &mut Gamma,
        parity: VarSet,
        out: &mut Vec<Derivation>,
    ) {
        if parity == target {
            out.push(Derivation { gamma: gamma.clone(), beta_count: 1 << gamma.len() });
        }
        if gamma.len() == max_len {
            return;
        }
        for s in from..space.m() {
            for &t in masks {
                gamma.push((s, t));
                extend(space, masks, target, s + 1, max_len, gamma, parity.sym_diff(space.slot_parity(s, t)), out);
                gamma.pop();
            }
        }
    }

    let mut out = Vec::new();
    if q.alpha.is_empty() {
        out.push(Derivation { gamma: Vec::new(), beta_count: 1 });
    }
    if q.l_max > 0 {
        let blocks = exec.map_indexed(space.m(), |s| {
            let mut local = Vec::new();
            for &t in &masks {
                let mut gamma = vec![(s, t)];
                extend(space, &masks, q.alpha, s + 1, q.l_max, &mut gamma, space.slot_parity(s, t), &mut local);
            }
            local
        });
        out.extend(blocks.into_iter().flatten());
    }
    Ok(out)
}

/// Weighted counts of derivations by parity and `|γ̄|`, computed by dynamic
/// programming over scopes rather than by listing γ.
#[derive(Clone, Debug, PartialEq)]
pub struct DerivationTable<T> {
    pub l_max: usize,
    /// `by_parity[α][l]` = Σ over γ ⊢ α with `|γ̄| = l` of Π per-scope weights.
    pub by_parity: BTreeMap<VarSet, Vec<T>>,
}

impl<T: Clone + Zero> DerivationTable<T> {
    pub fn get(&self, alpha: VarSet, l: usize) -> T {
        self.by_parity.get(&alpha).and_then(|v| v.get(l).cloned()).unwrap_or_else(T::zero)
    }
}

fn derivation_dp<T, W>(space: &ScopeSpace, r_min: usize, l_max: usize, weight: W) -> DerivationTable<T>
where
    T: Clone + Zero + One + for<'a> std::ops::AddAssign<&'a T> + std::ops::Mul<Output = T>,
    W: Fn(SlotMask) -> T,
{
    let masks: Vec<(SlotMask, T)> =
        arity_masks(space.k(), r_min).into_iter().map(|t| (t, weight(t))).filter(|(_, w)| !w.is_zero()).collect();
    let mut table: HashMap<VarSet, Vec<T>> = HashMap::new();
    let mut unit = vec![T::zero(); l_max + 1];
    unit[0] = T::one();
    table.insert(VarSet::EMPTY, unit);
    for s in 0..space.m() {
        let mut next = table.clone();
        for (alpha, row) in &table {
            for (t, w) in &masks {
                let target = alpha.sym_diff(space.slot_parity(s, *t));
                let dst = next.entry(target).or_insert_with(|| vec![T::zero(); l_max + 1]);
                for l in 0..l_max {
                    if !row[l].is_zero() {
                        dst[l + 1] += &(row[l].clone() * w.clone());
                    }
                }
            }
        }
        table = next;
    }
    DerivationTable { l_max, by_parity: table.into_iter().collect() }
}

/// Number of γ per `(α, |γ̄|)` with every `|T_S| ≥ r_min`.
pub fn derivation_counts(space: &ScopeSpace, r_min: usize, l_max: usize) -> DerivationTable<u64> {
    derivation_dp(space, r_min, l_max, |_| 1u64)
}

/// `N_l(α)`: pairs `(β, γ)` with `β ⊆ γ̄`, i.e. `2^l` times the γ count.
pub fn pair_count(table: &DerivationTable<u64>, alpha: VarSet, l: usize) -> u64 {
    table.get(alpha, l) << l
}

/// Derivation counting envelope `C^l·n^{kl − (tl+|α|)/2}·l^{(tl+|α|)/2 − l}`, valid
/// for `l ≤ regime_c·n/k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CountBound {
    pub c_const: f64,
    pub regime_c: f64,
}

impl Default for CountBound {
    fn default() -> Self {
        CountBound { c_const: 1.0, regime_c: 2.0 }
    }
}

impl CountBound {
    pub fn with_constant(c_const: f64) -> Self {
        CountBound { c_const, ..Self::default() }
    }

    /// The envelope at C = 1.
    pub fn shape(n: usize, k: usize, t: usize, alpha_size: usize, l: usize) -> f64 {
        let (nf, lf) = (n as f64, l as f64);
        let half = (t * l + alpha_size) as f64 / 2.0;
        let n_part = nf.powf(k as f64 * lf - half);
        let l_exp = half - lf;
        // 0^0 = 1; 0^{positive} = 0.
        let l_part = if l == 0 {
            if l_exp == 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            lf.powf(l_exp)
        };
        n_part * l_part
    }

    pub fn in_regime(&self, n: usize, k: usize, l: usize) -> bool {
        l as f64 <= self.regime_c * n as f64 / k as f64
    }

    pub fn eval(&self, n: usize, k: usize, t: usize, alpha_size: usize, l: usize) -> Result<f64> {
        if k == 0 || n == 0 {
            return Err(Error::InvalidInput("count bound needs n, k >= 1".into()));
        }
        if !self.in_regime(n, k, l) {
            return Err(Error::OutOfRegime(format!(
                "l = {l} exceeds {}·n/k = {}",
                self.regime_c,
                self.regime_c * n as f64 / k as f64
            )));
        }
        Ok(self.c_const.powi(l as i32) * Self::shape(n, k, t, alpha_size, l))
    }
}

/// `count_bound` at the given constant and the default regime.
pub fn count_bound(c_const: f64, n: usize, k: usize, t: usize, alpha_size: usize, l: usize) -> Result<f64> {
    CountBound::with_constant(c_const).eval(n, k, t, alpha_size, l)
}

/// One brute-force count compared against the envelope.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CountRow {
    pub n: usize,
    pub k: usize,
    pub t: usize,
    pub alpha: Vec<usize>,
    pub l: usize,
    pub gammas: u64,
    pub pairs: u64,
    pub bound: f64,
    pub dominated: bool,
}

/// Smallest C making `C^l·shape ≥ N_l` at every row with `l ≥ 1` (rows with `l = 0`
/// do not depend on C).
pub fn fit_count_constant(rows: &[CountRow]) -> f64 {
    rows.iter()
        .filter(|r| r.l > 0 && r.pairs > 0)
        .map(|r| {
            let shape = CountBound::shape(r.n, r.k, r.t, r.alpha.len(), r.l);
            (r.pairs as f64 / shape).powf(1.0 / r.l as f64)
        })
        .fold(0.0, f64::max)
}

/// Constant read off the counting argument: `(k/2)·2ek·e^k·k^{(t+k)/2}`, doubled for
/// the choice of β.
pub fn explicit_count_constant(k: usize, t: usize) -> f64 {
    let kf = k as f64;
    let e = std::f64::consts::E;
    2.0 * (kf / 2.0) * 2.0 * e * kf * e.powf(kf) * kf.powf((t + k) as f64 / 2.0)
}

/// Brute counts for every `α ⊆ [n]` and `l ≤ l_max` over the space, against `bound`.
/// Rows with `N_l(α) = 0` are kept so the grid is complete.
pub fn count_grid(space: &ScopeSpace, t: usize, l_max: usize, bound: &CountBound) -> Result<Vec<CountRow>> {
    let n = space.n();
    if n > 20 {
        return Err(Error::ResourceLimit(format!("count grid over 2^{n} parities")));
    }
    let table = derivation_counts(space, t, l_max);
    let mut rows = Vec::new();
    for a in 0..1u64 << n {
        let alpha = VarSet(a);
        for l in 0..=l_max {
            let gammas = table.get(alpha, l);
            let pairs = gammas << l;
            let bound_v = bound.eval(n, space.k(), t, alpha.len(), l)?;
            rows.push(CountRow {
                n,
                k: space.k(),
                t,
                alpha: alpha.indices(),
                l,
                gammas,
                pairs,
                bound: bound_v,
                dominated: pairs as f64 <= bound_v,
            });
        }
    }
    Ok(rows)
}

/// Writes count rows with `alpha` as a space-separated index list.
pub fn write_count_csv<W: Write>(rows: &[CountRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "k", "t", "alpha", "l", "gammas", "pairs", "bound", "dominated"])?;
    for r in rows {
        let alpha = r.alpha.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ");
        w.write_record([
            r.n.to_string(),
            r.k.to_string(),
            r.t.to_string(),
            alpha,
            r.l.to_string(),
            r.gammas.to_string(),
            r.pairs.to_string(),
            format!("{:e}", r.bound),
            r.dominated.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// An exact quantity, its closed-form envelope at the configured C, and the smallest
/// C for which the envelope would dominate (`None` when C does not enter).
#[derive(Clone, Debug, PartialEq)]
pub struct EnvelopeCheck {
    pub exact: Rational,
    pub bound: f64,
    pub dominated: bool,
    pub fitted_c: Option<f64>,
}

impl EnvelopeCheck {
    /// `bound = C^s·rest`; fits C from `exact ≤ C^s·rest`.
    fn new(exact: Rational, c_const: f64, s: usize, rest: f64) -> Self {
        let value = f64::from_rational(&exact);
        let bound = c_const.powi(s as i32) * rest;
        let fitted_c = (s > 0 && rest > 0.0).then(|| (value / rest).powf(1.0 / s as f64));
        EnvelopeCheck { dominated: value <= bound, exact, bound, fitted_c }
    }
}

fn check_pred(space: &ScopeSpace, pred: &Predicate) -> Result<()> {
    if pred.k() != space.k() {
        return Err(Error::InvalidInput(format!(
            "predicate arity {} differs from scope arity {}",
            pred.k(),
            space.k()
        )));
    }
    Ok(())
}

fn guard_dp(space: &ScopeSpace) -> Result<()> {
    if space.n() > 24 {
        return Err(Error::ResourceLimit(format!("derivation table over 2^{} parities", space.n())));
    }
    Ok(())
}

/// `Σ_{r=s}^{l} p^r·N_r(α)` with `N_r` counting `r(γ) ≥ t`, against
/// `(CΔ)^s·(s/n)^{((t−2)/2)s + |α|/2}`.
pub fn weighted_sum(
    space: &ScopeSpace,
    pred: &Predicate,
    alpha: VarSet,
    s: usize,
    l: usize,
    c_const: f64,
) -> Result<EnvelopeCheck> {
    check_pred(space, pred)?;
    guard_dp(space)?;
    let table = derivation_counts(space, pred.t(), l);
    let p = space.p();
    let mut exact = Rational::zero();
    for r in s..=l {
        let pairs = Rational::from_integer(pair_count(&table, alpha, r).into());
        exact += pairs * num_traits::pow(p.clone(), r);
    }
    let delta = f64::from_rational(&space.delta());
    let (sf, nf) = (s as f64, space.n() as f64);
    let exponent = (pred.t() as f64 - 2.0) / 2.0 * sf + alpha.len() as f64 / 2.0;
    let ratio_part = if exponent == 0.0 { 1.0 } else { (sf / nf).powf(exponent) };
    Ok(EnvelopeCheck::new(exact, c_const, s, delta.powi(s as i32) * ratio_part))
}

/// `Σ_{β, γ : |γ̄| ≤ l} μ̂_*(α,β,γ)²` against
/// `(CΔ)^s·C(n,s)^{−(t−2)/2}·C(n,|α|)^{−1/2}` with `s = ⌈|α|/k⌉`.
///
/// Summing over β first collapses the square to `Σ_γ Π_{S ∈ γ̄} p·η̂(T_S)²`.
pub fn level_l2(space: &ScopeSpace, pred: &Predicate, alpha: VarSet, l: usize, c_const: f64) -> Result<EnvelopeCheck> {
    check_pred(space, pred)?;
    guard_dp(space)?;
    let p = space.p().clone();
    let table = derivation_dp(space, pred.t(), l, |t| {
        let e = pred.eta_hat(t);
        &p * e * e
    });
    let exact = (0..=l).fold(Rational::zero(), |acc, r| acc + table.get(alpha, r));
    let n = space.n();
    let s = alpha.len().div_ceil(space.k());
    let delta = f64::from_rational(&space.delta());
    let rest = delta.powi(s as i32)
        * binom_f64(n, s).powf(-(pred.t() as f64 - 2.0) / 2.0)
        * binom_f64(n, alpha.len()).powf(-0.5);
    Ok(EnvelopeCheck::new(exact, c_const, s, rest))
}

fn binom_f64(n: usize, r: usize) -> f64 {
    if r > n {
        return 0.0;
    }
    (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::{BasisIndex, DegreeCaps};
    use crate::planted::{build_pseudo_density, mu_star_coeff};
    use crate::scalar::{ratio, Surd};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn space(n: usize, k: usize, p: Rational) -> Arc<ScopeSpace> {
        Arc::new(ScopeSpace::full(n, k, p).unwrap())
    }

    /// Parity-of-multiset definition, counted variable by variable.
    fn derives_by_counts(space: &ScopeSpace, gamma: &[(usize, SlotMask)], alpha: VarSet) -> bool {
        appearance_counts(space, gamma).iter().enumerate().all(|(i, c)| (c % 2 == 1) == alpha.contains(i))
    }

    #[test]
    fn two_scope_example() {
        let s = ScopeSpace::restricted(3, 2, vec![vec![0, 1], vec![1, 2]], ratio(1, 2)).unwrap();
        let gamma = vec![(0, 0b11), (1, 0b11)];
        assert!(derives(&s, &gamma, VarSet::from_indices([0, 2])));
        assert!(!derives(&s, &gamma, VarSet::from_indices([0, 1, 2])));
        assert!(derives(&s, &[], VarSet::EMPTY));
    }

    #[test]
    fn derives_matches_counting_on_fuzz() {
        let sp = space(5, 3, ratio(1, 3));
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..2000 {
            let mut gamma: Gamma = Vec::new();
            for s in 0..sp.m() {
                if rng.gen_bool(0.05) {
                    gamma.push((s, rng.gen_range(1..8)));
                }
            }
            let alpha = VarSet(rng.gen_range(0..32));
            assert_eq!(derives(&sp, &gamma, alpha), derives_by_counts(&sp, &gamma, alpha));
        }
    }

    #[test]
    fn enumeration_examples() {
        let sp = space(4, 3, ratio(1, 3));
        let trivial =
            enumerate_derivations(&DerivationQuery::new(sp.clone(), VarSet::EMPTY, 0, 3), Exec::Sequential).unwrap();
        assert_eq!(trivial, vec![Derivation { gamma: vec![], beta_count: 1 }]);

        let alpha = VarSet::from_indices([0, 1, 2]);
        let q = DerivationQuery::new(sp.clone(), alpha, 1, 3);
        let found = enumerate_derivations(&q, Exec::Parallel).unwrap();
        assert_eq!(found.len(), 6);
        assert!(found.iter().all(|d| d.beta_count == 2 && derives(&sp, &d.gamma, alpha)));
        assert_eq!(found.iter().map(|d| d.beta_count).sum::<u64>(), 12);
        assert_eq!(found, enumerate_derivations(&q, Exec::Sequential).unwrap());
    }

    #[test]
    fn enumeration_guard() {
        let q = DerivationQuery::new(space(6, 3, ratio(1, 3)), VarSet::EMPTY, 4, 1);
        assert!(matches!(enumerate_derivations_with_limit(&q, 1000, Exec::Sequential), Err(Error::ResourceLimit(_))));
    }

    #[test]
    fn dp_counts_match_enumeration() {
        let sp = space(5, 3, ratio(1, 3));
        for r_min in [1, 2, 3] {
            let table = derivation_counts(&sp, r_min, 2);
            for a in 0..32u64 {
                let alpha = VarSet(a);
                let found =
                    enumerate_derivations(&DerivationQuery::new(sp.clone(), alpha, 2, r_min), Exec::Parallel).unwrap();
                for l in 0..=2 {
                    let brute = found.iter().filter(|d| d.gamma.len() == l).count() as u64;
                    assert_eq!(table.get(alpha, l), brute, "r_min={r_min} alpha={a:b} l={l}");
                }
            }
        }
    }

    #[test]
    fn enumeration_counts_nonzero_xor_coefficients() {
        let sp = space(4, 3, ratio(1, 3));
        let pred = Predicate::xor(3).unwrap();
        let poly = build_pseudo_density::<Surd>(&pred, &sp, DegreeCaps::new(4, 2)).unwrap();
        let table = derivation_counts(&sp, 3, 2);
        for a in 0..16u64 {
            for l in 0..=2 {
                let nonzero =
                    poly.terms().keys().filter(|idx| idx.alpha == VarSet(a) && idx.gamma_bar_len() == l).count() as u64;
                assert_eq!(nonzero, pair_count(&table, VarSet(a), l));
            }
        }
    }

    #[test]
    fn count_bound_edges() {
        assert_eq!(count_bound(1.0, 5, 3, 3, 0, 0).unwrap(), 1.0);
        assert_eq!(CountBound::shape(5, 3, 3, 2, 0), 0.0);
        let mut last = 0.0;
        for n in 4..10 {
            let b = count_bound(2.0, n, 3, 3, 3, 2).unwrap();
            assert!(b > last);
            last = b;
        }
        assert!(matches!(count_bound(1.0, 4, 3, 3, 0, 3), Err(Error::OutOfRegime(_))));
    }

    #[test]
    fn fitted_constant_makes_grid_dominated() {
        let mut rows = Vec::new();
        for n in 4..=6 {
            rows.extend(count_grid(&space(n, 3, ratio(1, 3)), 3, 2, &CountBound::default()).unwrap());
        }
        let c = fit_count_constant(&rows);
        assert!(c > 0.0);
        for r in &rows {
            let b = count_bound(c * (1.0 + 1e-12), r.n, r.k, r.t, r.alpha.len(), r.l).unwrap();
            assert!(r.pairs as f64 <= b);
        }
        assert!(c <= explicit_count_constant(3, 3));
    }

    #[test]
    fn weighted_sum_examples() {
        let sp = space(5, 3, ratio(1, 10));
        let pred = Predicate::xor(3).unwrap();
        let e = std::f64::consts::E;
        let ws = weighted_sum(&sp, &pred, VarSet::from_indices([0, 1, 2]), 1, 2, e * 3.0).unwrap();
        assert_eq!(ws.exact, ratio(6, 5));
        assert!((ws.bound - 3.0 * e * 1.2 / 25.0).abs() < 1e-12);
        assert!(!ws.dominated);
        assert!(ws.fitted_c.unwrap() > e * 3.0);

        let constant = weighted_sum(&sp, &pred, VarSet::EMPTY, 0, 0, 1.0).unwrap();
        assert_eq!(constant.exact, Rational::one());
        let zero =
            weighted_sum(&sp.with_p(Rational::zero()).map(Arc::new).unwrap(), &pred, VarSet::EMPTY, 1, 2, 1.0).unwrap();
        assert!(zero.exact.is_zero());
    }

    #[test]
    fn level_l2_matches_coefficients() {
        let sp = space(4, 3, ratio(1, 3));
        for pred in [Predicate::xor(3).unwrap(), Predicate::sat(3).unwrap()] {
            let poly = build_pseudo_density::<Surd>(&pred, &sp, DegreeCaps::new(4, 2)).unwrap();
            for a in 0..16u64 {
                let alpha = VarSet(a);
                let slice = poly.l2_norm_sq(Some(&|idx: &BasisIndex| idx.alpha == alpha));
                let level = level_l2(&sp, &pred, alpha, 2, 1.0).unwrap();
                assert_eq!(slice, Surd::rational(level.exact.clone()), "alpha={a:b}");
                if a == 0 {
                    continue;
                }
                let direct = poly
                    .terms()
                    .keys()
                    .filter(|i| i.alpha == alpha)
                    .map(|i| {
                        let c: Surd = mu_star_coeff(&pred, &sp, i).unwrap();
                        c.mul(&c)
                    })
                    .fold(Surd::zero(), |acc, v| acc.add(&v));
                assert_eq!(direct, slice);
            }
        }
        let one = level_l2(&sp, &Predicate::xor(3).unwrap(), VarSet::EMPTY, 0, 1.0).unwrap();
        assert_eq!(one.exact, Rational::one());
    }

    #[test]
    fn level_l2_envelope_at_small_delta() {
        let n = 5;
        let p = ratio(3, 2) * ratio(n as i64, 60);
        let sp = space(n, 3, p);
        let level = level_l2(&sp, &Predicate::xor(3).unwrap(), VarSet::from_indices([0, 1, 2]), 2, 1.0).unwrap();
        assert_eq!(level.exact, ratio(3, 4));
        assert!(!level.dominated);
        let c = level.fitted_c.unwrap();
        let refit =
            level_l2(&sp, &Predicate::xor(3).unwrap(), VarSet::from_indices([0, 1, 2]), 2, c * (1.0 + 1e-12)).unwrap();
        assert!(refit.dominated);
    }
}
