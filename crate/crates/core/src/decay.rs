//! Conditional Fourier decay envelope ε(s_x, s_I), its rapid-decay checks and the
//! tail bounds built on top of it. Everything here is finite-n floating point.

use std::f64::consts::{E, LN_2};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Parameters of the decay envelope and of the regime it is checked in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayParams {
    pub n: f64,
    pub k: usize,
    pub t: usize,
    pub delta: f64,
    /// Constant depending only on k; left symbolic by the analysis.
    pub c_const: f64,
    pub delta_cbd: f64,
    pub b_cbd: usize,
    pub d_x: usize,
    pub d_i: usize,
    pub nu: f64,
    pub nu_x: f64,
    pub nu_y: f64,
    pub rho: f64,
    pub eps_exp: f64,
    /// Proxy for "o(1)" in clause 1.
    pub clause1_tol: f64,
    /// Proxy for "o(1)" in clause 2.
    pub clause2_tol: f64,
    /// The exponent c of clause 2.
    pub clause2_exp: f64,
}

impl DecayParams {
    /// Defaults for everything but the space and the caps.
    pub fn new(n: f64, k: usize, t: usize, delta: f64, d_x: usize, d_i: usize) -> Self {
        Self {
            n,
            k,
            t,
            delta,
            c_const: 1.0,
            delta_cbd: 1.0,
            b_cbd: 1,
            d_x,
            d_i,
            nu: 0.6,
            nu_x: 0.1,
            nu_y: 0.05,
            rho: 1.2,
            eps_exp: 0.05,
            clause1_tol: 0.1,
            clause2_tol: 0.5,
            clause2_exp: 1.0,
        }
    }

    /// Caps d_z = floor((C·n^{t−2}/Δ²)^{(1−ν_z)/k}), clamped to at least 1.
    pub fn with_scaling_caps(mut self) -> Self {
        let base = self.c_const * self.n.powi(self.t as i32 - 2) / (self.delta * self.delta);
        let cap = |nu: f64| (base.powf((1.0 - nu) / self.k as f64).floor() as usize).max(1);
        self.d_x = cap(self.nu_x);
        self.d_i = cap(self.nu_y);
        self
    }

    /// Structural invariants and the parameter ranges under which rapid decay is
    /// claimed. The Δ range is not checked here; it is a report flag.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::OutOfRegime(msg));
        if self.n.is_nan() || self.n < 1.0 || self.k == 0 || self.t == 0 || self.t > self.k {
            return bad(format!("need n >= 1 and 1 <= t <= k, got n={}, k={}, t={}", self.n, self.k, self.t));
        }
        for (name, v) in [
            ("Delta", self.delta),
            ("C", self.c_const),
            ("delta_cbd", self.delta_cbd),
            ("nu", self.nu),
            ("rho", self.rho),
            ("clause1_tol", self.clause1_tol),
            ("clause2_tol", self.clause2_tol),
            ("clause2_exp", self.clause2_exp),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if !(self.nu_x > self.nu_y && self.nu_y > 0.0) {
            return bad(format!("need nu_x > nu_y > 0, got {} and {}", self.nu_x, self.nu_y));
        }
        if self.d_x == 0 || self.d_i == 0 {
            return bad("degree caps must be positive".into());
        }
        let slack = self.d_i as f64 - 2.0 * self.b_cbd as f64;
        if self.d_x as f64 > self.rho * slack {
            return bad(format!("d_x = {} exceeds rho*(d_I - 2b) = {}", self.d_x, self.rho * slack));
        }
        if self.b_cbd as f64 > self.rho * self.d_i as f64 {
            return bad(format!("b = {} exceeds rho*d_I", self.b_cbd));
        }
        if let Some(cap) = self.d_i_ceiling() {
            if self.d_i as f64 > cap {
                return bad(format!("d_I = {} exceeds its ceiling {cap}", self.d_i));
            }
        }
        Ok(())
    }

    /// (n·Δ^{−2/(t−2)})^{ν/(ν+ρ)}; `None` when t ≤ 2 leaves it undefined.
    pub fn d_i_ceiling(&self) -> Option<f64> {
        (self.t > 2).then(|| {
            let base = self.n * self.delta.powf(-2.0 / (self.t as f64 - 2.0));
            base.powf(self.nu / (self.nu + self.rho))
        })
    }

    /// 1 < Δ < n^{(t−2)/2 − eps_exp}.
    pub fn delta_in_range(&self) -> bool {
        let upper = self.n.powf((self.t as f64 - 2.0) / 2.0 - self.eps_exp);
        self.delta > 1.0 && self.delta < upper
    }

    fn envelope_degree(&self, s_x: usize, s_i: usize) -> usize {
        s_x.div_ceil(self.k).max(s_i)
    }

    /// ln ε(s_x, s_I); `-inf` never occurs, ε(0, 0) has log 0.
    pub fn ln_epsilon(&self, s_x: usize, s_i: usize) -> f64 {
        let s = self.envelope_degree(s_x, s_i);
        if s == 0 {
            return 0.0;
        }
        let sf = s as f64;
        let mut acc = sf * (self.c_const * self.delta).ln() + (self.t as f64 - 2.0) / 2.0 * sf * (sf / self.n).ln();
        if s_x > 0 {
            acc += s_x as f64 / 2.0 * (sf / s_x as f64).ln();
        }
        acc
    }

    /// ε(s_x, s_I) = (CΔ)^s·(s/n)^{((t−2)/2)s}·(s/s_x)^{s_x/2} with s = max(⌈s_x/k⌉, s_I).
    pub fn epsilon(&self, s_x: usize, s_i: usize) -> f64 {
        self.ln_epsilon(s_x, s_i).exp()
    }

    /// Instance degrees u checked by clause 3: max(d_I − 2b, 1) ≤ u ≤ d_I.
    pub fn clause3_range(&self) -> std::ops::RangeInclusive<usize> {
        self.d_i.saturating_sub(2 * self.b_cbd).max(1)..=self.d_i
    }

    /// The constraint 2^b·ε(s_x,u) ≤ ε(s_x,1)^{1−ν} places on ν at one grid point.
    fn nu_constraint(&self, s_x: usize, u: usize) -> NuConstraint {
        let base = self.ln_epsilon(s_x, 1);
        let lhs = self.b_cbd as f64 * LN_2 + self.ln_epsilon(s_x, u);
        if base == 0.0 {
            return if lhs <= 0.0 { NuConstraint::Always } else { NuConstraint::Never };
        }
        let bound = 1.0 - lhs / base;
        // Dividing by ln ε(s_x,1) flips the inequality when ε(s_x,1) < 1.
        if base < 0.0 {
            NuConstraint::AtLeast(bound)
        } else {
            NuConstraint::AtMost(bound)
        }
    }
}

enum NuConstraint {
    AtLeast(f64),
    AtMost(f64),
    Always,
    Never,
}

/// ε(s_x, s_I) for the given parameters.
pub fn epsilon_decay(dp: &DecayParams, s_x: usize, s_i: usize) -> f64 {
    dp.epsilon(s_x, s_i)
}

/// One grid point of clause 3.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Clause3Point {
    pub s_x: usize,
    pub u: usize,
    pub nu: f64,
}

/// Outcome of the three rapid-decay clauses on the finite grid.
///
/// Where ε(s_x,1) < 1 the clause-3 inequality only gets easier as ν grows, so the
/// feasible set is an interval [nu_min, nu_upper] intersected with ν > 0.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RapidDecayReport {
    pub clause1: bool,
    pub max_epsilon: f64,
    pub clause2: bool,
    pub clause2_sum: f64,
    pub clause3: bool,
    /// Smallest ν feasible at every clause-3 grid point (may be ≤ 0).
    pub nu_min: f64,
    /// The binding point for `nu_min`.
    pub binding: Option<Clause3Point>,
    /// Upper end of the feasible interval; finite only in the vacuous regime.
    pub nu_upper: f64,
    /// The smallest positive-limit ν the clause admits: max(nu_min, 0).
    pub nu_fit: f64,
    /// The configured ν lies in the feasible interval.
    pub nu_target_feasible: bool,
    pub delta_in_range: bool,
    /// Some ε(s, 1) ≥ 1, so tail bounds built on it are vacuous.
    pub vacuous: bool,
}

/// Checks the clauses of rapid decay over s_x ≤ d_x, s_I ≤ d_I.
pub fn check_rapid_decay(dp: &DecayParams) -> Result<RapidDecayReport> {
    dp.validate()?;
    let max_epsilon = (0..=dp.d_x)
        .flat_map(|s_x| (0..=dp.d_i).map(move |s_i| (s_x, s_i)))
        .filter(|&pt| pt != (0, 0))
        .map(|(s_x, s_i)| dp.epsilon(s_x, s_i))
        .fold(0.0, f64::max);
    let clause2_sum: f64 = (1..=dp.d_x).map(|s_x| dp.epsilon(s_x, 1).powf(dp.clause2_exp)).sum();

    let mut nu_min = f64::NEG_INFINITY;
    let mut nu_upper = f64::INFINITY;
    let mut binding = None;
    let mut never = false;
    for s_x in 0..=dp.d_x {
        for u in dp.clause3_range() {
            match dp.nu_constraint(s_x, u) {
                NuConstraint::AtLeast(nu) if nu > nu_min => {
                    nu_min = nu;
                    binding = Some(Clause3Point { s_x, u, nu });
                }
                NuConstraint::AtMost(nu) => nu_upper = nu_upper.min(nu),
                NuConstraint::Never => never = true,
                _ => {}
            }
        }
    }
    let nu_fit = nu_min.max(0.0);
    let clause3 = !never && nu_min < 1.0 && nu_upper > 0.0 && nu_fit <= nu_upper;
    let vacuous = (0..=dp.d_x).any(|s| dp.epsilon(s, 1) >= 1.0);
    Ok(RapidDecayReport {
        clause1: max_epsilon < dp.clause1_tol,
        max_epsilon,
        clause2: clause2_sum < dp.clause2_tol,
        clause2_sum,
        clause3,
        nu_min,
        binding,
        nu_upper,
        nu_fit,
        nu_target_feasible: !never && nu_min <= dp.nu && dp.nu <= nu_upper,
        delta_in_range: dp.delta_in_range(),
        vacuous,
    })
}

/// Pr[|f| ≥ τ‖f‖₂] ≤ exp(−(k/2e)·τ^{2/k}) for degree-k f, valid when τ ≥ √(2e)^k.
pub fn hypercontractive_tail(k: usize, tau: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::OutOfRegime("degree must be positive".into()));
    }
    let kf = k as f64;
    let threshold = (2.0 * E).sqrt().powf(kf);
    // Relative slack so that τ = 2e at k = 2 is accepted despite rounding.
    if tau.is_nan() || tau < threshold * (1.0 - 4.0 * f64::EPSILON) {
        return Err(Error::OutOfRegime(format!(
            "tau = {tau} is below the validity threshold {threshold} for degree {k}"
        )));
    }
    Ok((-(kf / (2.0 * E)) * tau.powf(2.0 / kf)).exp())
}

/// Value of the nonnegativity tail bound and the ν it was evaluated at.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NonnegBound {
    pub value: f64,
    pub nu: f64,
    /// Per-degree terms, s = 1..=d_x.
    pub terms: Vec<f64>,
    pub vacuous: bool,
}

/// Σ_{s=1}^{d_x} exp(−(s/2e)·ε(s,1)^{−(2−2ν)/s}) at an explicit ν.
pub fn nonneg_probability_bound_with_nu(dp: &DecayParams, nu: f64) -> NonnegBound {
    let terms: Vec<f64> = (1..=dp.d_x)
        .map(|s| {
            let sf = s as f64;
            let power = (-(2.0 - 2.0 * nu) / sf * dp.ln_epsilon(s, 1)).exp();
            (-(sf / (2.0 * E)) * power).exp()
        })
        .collect();
    NonnegBound { value: terms.iter().sum(), nu, vacuous: (1..=dp.d_x).any(|s| dp.epsilon(s, 1) >= 1.0), terms }
}

/// The tail bound at the fitted ν of the rapid-decay report. Fails when the
/// parameters are out of regime or no positive ν satisfies clause 3.
pub fn nonneg_probability_bound(dp: &DecayParams) -> Result<NonnegBound> {
    let report = check_rapid_decay(dp)?;
    if !report.clause3 {
        return Err(Error::OutOfRegime(format!(
            "no positive nu satisfies the decay comparison (nu_min = {}, nu_upper = {})",
            report.nu_min, report.nu_upper
        )));
    }
    Ok(nonneg_probability_bound_with_nu(dp, report.nu_fit))
}

/// One row of the decay CSV.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayRow {
    pub s_x: usize,
    pub s_i: usize,
    pub epsilon: f64,
    pub bound_satisfied: bool,
}

/// The full grid. A point satisfies its bound when ε is below the clause-1 tolerance
/// (or it is the origin) and, inside the clause-3 range, 2^b·ε ≤ ε(s_x,1)^{1−ν}.
pub fn decay_grid(dp: &DecayParams) -> Vec<DecayRow> {
    let range = dp.clause3_range();
    let mut rows = Vec::with_capacity((dp.d_x + 1) * (dp.d_i + 1));
    for s_x in 0..=dp.d_x {
        for s_i in 0..=dp.d_i {
            let epsilon = dp.epsilon(s_x, s_i);
            let mut ok = (s_x, s_i) == (0, 0) || epsilon < dp.clause1_tol;
            if range.contains(&s_i) {
                let lhs = dp.b_cbd as f64 * LN_2 + dp.ln_epsilon(s_x, s_i);
                ok &= lhs <= (1.0 - dp.nu) * dp.ln_epsilon(s_x, 1);
            }
            rows.push(DecayRow { s_x, s_i, epsilon, bound_satisfied: ok });
        }
    }
    rows
}

/// Writes rows with header `s_x,s_I,epsilon,bound_satisfied`.
pub fn write_decay_csv<W: Write>(rows: &[DecayRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["s_x", "s_I", "epsilon", "bound_satisfied"])?;
    for r in rows {
        w.write_record([
            r.s_x.to_string(),
            r.s_i.to_string(),
            format!("{:e}", r.epsilon),
            r.bound_satisfied.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    fn scaling_regime() -> DecayParams {
        DecayParams::new(1e4, 3, 3, 2.0, 1, 1).with_scaling_caps()
    }

    #[test]
    fn epsilon_origin_and_worked_value() {
        let dp = DecayParams::new(1e4, 3, 3, 2.0, 3, 1);
        assert_eq!(dp.epsilon(0, 0), 1.0);
        let expected = 2.0 * 1e-2 * (1.0f64 / 3.0).powf(1.5);
        assert!(rel(dp.epsilon(3, 1), expected) < 1e-13);
        assert!(rel(dp.epsilon(3, 1), 3.849e-3) < 1e-3);
    }

    #[test]
    fn epsilon_decreases_in_n() {
        for s_x in 1..6 {
            let mut last = f64::INFINITY;
            for n in [10.0, 100.0, 1e3, 1e4] {
                let e = DecayParams::new(n, 3, 3, 2.0, 6, 3).epsilon(s_x, 1);
                assert!(e < last);
                last = e;
            }
        }
    }

    #[test]
    fn scaling_caps_give_positive_nu() {
        let dp = scaling_regime();
        assert_eq!((dp.d_x, dp.d_i), (10, 11));
        let report = check_rapid_decay(&dp).unwrap();
        assert!(report.clause3 && report.nu_fit < 1.0);
        assert!(report.nu_target_feasible);
        assert!(report.clause1 && report.clause2);
        assert!(report.delta_in_range);
        assert!(!report.vacuous);
    }

    #[test]
    fn zero_block_bound_reduces_to_plain_comparison() {
        let mut dp = scaling_regime();
        dp.b_cbd = 0;
        let report = check_rapid_decay(&dp).unwrap();
        assert!(report.clause3);
        for s_x in 0..=dp.d_x {
            for u in dp.clause3_range() {
                assert!(dp.epsilon(s_x, u) <= dp.epsilon(s_x, 1));
            }
        }
    }

    #[test]
    fn delta_at_boundary_is_flagged() {
        let mut dp = scaling_regime();
        dp.delta = dp.n.sqrt();
        dp.b_cbd = 0;
        dp.d_x = 1;
        dp.d_i = 1;
        let report = check_rapid_decay(&dp).unwrap();
        assert!(!report.delta_in_range);
    }

    #[test]
    fn regime_ranges_are_enforced() {
        let mut dp = scaling_regime();
        dp.rho = 0.5;
        assert!(matches!(check_rapid_decay(&dp), Err(Error::OutOfRegime(_))));
        let mut dp = scaling_regime();
        dp.nu = 0.05;
        assert!(matches!(dp.validate(), Err(Error::OutOfRegime(_))));
        let mut dp = scaling_regime();
        dp.nu_y = dp.nu_x;
        assert!(dp.validate().is_err());
    }

    #[test]
    fn tail_worked_values() {
        assert!(rel(hypercontractive_tail(1, 3.0).unwrap(), (-9.0 / (2.0 * E)).exp()) < 1e-15);
        assert!(rel(hypercontractive_tail(1, 3.0).unwrap(), 0.191) < 1e-2);
        assert!(rel(hypercontractive_tail(2, 2.0 * E).unwrap(), (-2.0f64).exp()) < 1e-14);
        assert!(matches!(hypercontractive_tail(2, 5.0), Err(Error::OutOfRegime(_))));
        assert!(hypercontractive_tail(0, 10.0).is_err());
    }

    #[test]
    fn nonneg_bound_small_in_scaling_regime() {
        let bound = nonneg_probability_bound(&scaling_regime()).unwrap();
        assert!(bound.value < 1e-3, "{bound:?}");
        assert!(!bound.vacuous);
    }

    #[test]
    fn nonneg_bound_vacuous_term_floor() {
        let mut dp = DecayParams::new(16.0, 3, 3, 5.0, 2, 3);
        dp.rho = 2.0;
        let b = nonneg_probability_bound_with_nu(&dp, 0.5);
        assert!(b.vacuous);
        for (i, term) in b.terms.iter().enumerate() {
            let s = (i + 1) as f64;
            if dp.epsilon(i + 1, 1) >= 1.0 {
                assert!(*term >= (-s / (2.0 * E)).exp());
            }
        }
    }

    #[test]
    fn nonneg_bound_decreases_in_n() {
        let mut last = f64::INFINITY;
        for n in [1e3, 1e4, 1e5, 1e6] {
            let mut dp = DecayParams::new(n, 3, 3, 2.0, 4, 6);
            dp.rho = 2.0;
            let v = nonneg_probability_bound_with_nu(&dp, 0.3).value;
            assert!(v < last);
            last = v;
        }
    }

    #[test]
    fn grid_csv_shape() {
        let dp = DecayParams::new(100.0, 3, 3, 2.0, 2, 2);
        let rows = decay_grid(&dp);
        assert_eq!(rows.len(), 9);
        let mut buf = Vec::new();
        write_decay_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("s_x,s_I,epsilon,bound_satisfied\n0,0,1e0,true\n"));
        assert_eq!(text.lines().count(), 10);
    }
}
