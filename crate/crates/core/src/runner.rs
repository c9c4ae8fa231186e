//! Configured experiment runs: per-trial CSV rows plus a JSON summary.
//!
//! Trial `i` draws from `ChaCha8(seed)` on stream `i`, so rows do not depend on the
//! execution mode or thread count.

use std::path::PathBuf;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::cbd::{decompose, DecomposeParams, DistributionTable, InstanceSet};
use crate::config::ConfigMap;
use crate::csp::{sample_null, sample_planted, Predicate, ScopeSpace};
use crate::decay::{check_rapid_decay, decay_grid, nonneg_probability_bound, write_decay_csv, DecayParams};
use crate::exec::Exec;
use crate::experiments::{
    avg_over_distribution, expected_count, lhs_event_check, local_moments, min_value, negative_fraction,
};
use crate::fourier::DegreeCaps;
use crate::io::predicate_by_name;
use crate::scalar::{rational_string, Rational};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    /// `G` and the refutation event on null instances.
    Concentration,
    /// Averaged densities over CBD parts of planted-tilted tables.
    Nonnegativity,
    /// Local pseudo-moments of sampled instances.
    Moments,
    /// The decay envelope over the degree grid.
    DecayGrid,
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "concentration" => Ok(Self::Concentration),
            "nonnegativity" => Ok(Self::Nonnegativity),
            "moments" => Ok(Self::Moments),
            "decay-grid" => Ok(Self::DecayGrid),
            other => Err(Error::Config(format!(
                "unknown experiment `{other}` (expected concentration, nonnegativity, moments or decay-grid)"
            ))),
        }
    }
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Concentration => "concentration",
            Self::Nonnegativity => "nonnegativity",
            Self::Moments => "moments",
            Self::DecayGrid => "decay-grid",
        }
    }
}

/// Either `Δ` (so `p = Δn/|E_{n,k}|`) or `p` directly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Density {
    Delta(Rational),
    P(Rational),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub n: usize,
    pub k: usize,
    pub density: Density,
    pub pred: String,
    pub caps: DegreeCaps,
    /// Refutation slack η.
    pub eta: Rational,
    pub trials: usize,
    pub seed: u64,
    pub tau_neg: Rational,
    pub output: Option<PathBuf>,
    /// Scopes of the random restricted spaces in the nonnegativity run.
    pub scopes: usize,
    pub delta_cbd: Rational,
    pub t_param: usize,
    pub subset_cap: usize,
    /// Sample planted instances instead of null ones in the moments run.
    pub planted: bool,
    /// Replace the caps by the scaling caps in the decay grid.
    pub scaling_caps: bool,
    pub c_const: f64,
    pub rho: f64,
    pub nu: f64,
    pub b_cbd: usize,
}

impl ExperimentConfig {
    /// Reads every key; required ones are `experiment`, `n`, `k`, `delta` (or `p`),
    /// `d_x`, `d_i`, and for sampled runs `trials` and `seed`.
    pub fn from_map(c: &ConfigMap) -> Result<Self> {
        let kind: ExperimentKind = c.raw("experiment")?.parse()?;
        let density = match c.rational_opt("p")? {
            Some(p) => Density::P(p),
            None => Density::Delta(c.rational("delta")?),
        };
        let sampled = kind != ExperimentKind::DecayGrid;
        let trials = if sampled { c.get("trials")? } else { c.get_or("trials", 1)? };
        if trials == 0 {
            return Err(Error::Config("key `trials`: must be at least 1".into()));
        }
        let k: usize = c.get("k")?;
        Ok(ExperimentConfig {
            kind,
            n: c.get("n")?,
            k,
            density,
            pred: c.get_or("pred", "xor".to_string())?,
            caps: DegreeCaps::new(c.get("d_x")?, c.get("d_i")?),
            eta: c.rational_or("eta", Rational::new(BigInt::from(3), BigInt::from(10)))?,
            trials,
            seed: if sampled { c.get("seed")? } else { c.get_or("seed", 0)? },
            tau_neg: c.rational_or("tau_neg", Rational::new(BigInt::one(), BigInt::from(100)))?,
            output: c.get_opt("output")?,
            scopes: c.get_or("scopes", 3)?,
            delta_cbd: c.rational_or("delta_cbd", Rational::new(BigInt::one(), BigInt::from(2)))?,
            t_param: c.get_or("t_param", k)?,
            subset_cap: c.get_or("subset_cap", 2)?,
            planted: c.bool_or("planted", false)?,
            scaling_caps: c.bool_or("scaling_caps", false)?,
            c_const: c.get_or("c_const", 1.0)?,
            rho: c.get_or("rho", 1.2)?,
            nu: c.get_or("nu", 0.6)?,
            b_cbd: c.get_or("b_cbd", 1)?,
        })
    }

    pub fn predicate(&self) -> Result<Predicate> {
        predicate_by_name(&self.pred, self.k)
    }

    /// `|E_{n,k}| = n!/(n−k)!`.
    fn full_size(&self) -> Result<BigInt> {
        if self.k == 0 || self.k > self.n {
            return Err(Error::Config(format!("need 1 <= k <= n, got n = {}, k = {}", self.n, self.k)));
        }
        Ok(crate::csp::falling_factorial(self.n, self.k))
    }

    pub fn p(&self) -> Result<Rational> {
        let p = match &self.density {
            Density::P(p) => p.clone(),
            Density::Delta(d) => {
                d * Rational::from_integer(BigInt::from(self.n)) / Rational::from_integer(self.full_size()?)
            }
        };
        if p < Rational::zero() || p > Rational::one() {
            return Err(Error::Config(format!("inclusion probability {p} outside [0, 1]")));
        }
        Ok(p)
    }

    pub fn delta(&self) -> Result<Rational> {
        Ok(match &self.density {
            Density::Delta(d) => d.clone(),
            Density::P(p) => {
                p * Rational::from_integer(self.full_size()?) / Rational::from_integer(BigInt::from(self.n))
            }
        })
    }

    /// `c = (1 − η)·Δn`.
    pub fn c(&self) -> Result<Rational> {
        Ok((Rational::one() - &self.eta) * self.delta()? * Rational::from_integer(BigInt::from(self.n)))
    }

    pub fn decay_params(&self, t: usize) -> Result<DecayParams> {
        let mut dp = DecayParams::new(
            self.n as f64,
            self.k,
            t,
            self.delta()?.to_f64().unwrap_or(f64::NAN),
            self.caps.d_x,
            self.caps.d_i,
        );
        dp.c_const = self.c_const;
        dp.rho = self.rho;
        dp.nu = self.nu;
        dp.b_cbd = self.b_cbd;
        Ok(if self.scaling_caps { dp.with_scaling_caps() } else { dp })
    }

    fn snapshot(&self) -> Result<serde_json::Value> {
        Ok(json!({
            "experiment": self.kind.name(),
            "n": self.n,
            "k": self.k,
            "p": rational_string(&self.p()?),
            "delta": rational_string(&self.delta()?),
            "pred": self.pred,
            "d_x": self.caps.d_x,
            "d_i": self.caps.d_i,
            "eta": rational_string(&self.eta),
            "c": rational_string(&self.c()?),
            "trials": self.trials,
            "seed": self.seed,
            "tau_neg": rational_string(&self.tau_neg),
        }))
    }
}

/// The generator for trial `i`.
pub fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// CSV text and JSON summary of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentOutput {
    pub csv: String,
    pub summary: serde_json::Value,
}

pub fn run_experiment(cfg: &ExperimentConfig, exec: Exec) -> Result<ExperimentOutput> {
    match cfg.kind {
        ExperimentKind::Concentration => run_concentration(cfg, exec),
        ExperimentKind::Nonnegativity => run_nonnegativity(cfg, exec),
        ExperimentKind::Moments => run_moments(cfg, exec),
        ExperimentKind::DecayGrid => run_decay_grid(cfg),
    }
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Internal(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Internal(e.to_string()))
}

fn f64_of(q: &Rational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

/// Mean, sample standard deviation and standard error.
fn moments_of(values: &[f64]) -> (f64, f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt(), var.sqrt() / n.sqrt())
}

fn run_concentration(cfg: &ExperimentConfig, exec: Exec) -> Result<ExperimentOutput> {
    let pred = cfg.predicate()?;
    let space = Arc::new(ScopeSpace::full(cfg.n, cfg.k, cfg.p()?)?);
    let events = exec.try_map_indexed(cfg.trials, |i| {
        let inst = sample_null(&space, &mut trial_rng(cfg.seed, i));
        lhs_event_check(&pred, &inst, cfg.caps, &cfg.eta)
    })?;
    let expected = expected_count(&space);
    let gs: Vec<f64> = events.iter().map(|e| f64_of(&e.g)).collect();
    let (mean, sd, se) = moments_of(&gs);
    let expected_f = f64_of(&expected);
    let z = if se > 0.0 {
        (mean - expected_f) / se
    } else if mean == expected_f {
        0.0
    } else {
        f64::INFINITY
    };
    let event_rate = events.iter().filter(|e| e.event).count() as f64 / cfg.trials as f64;
    let second = gs.iter().map(|g| g * g).sum::<f64>() / cfg.trials as f64;
    let csv = csv_text(
        &["trial", "m", "g", "lhs", "count_ok", "lhs_ok", "event"],
        events.iter().enumerate().map(|(i, e)| {
            vec![
                i.to_string(),
                e.m.to_string(),
                f64_of(&e.g).to_string(),
                f64_of(&e.lhs).to_string(),
                e.count_ok.to_string(),
                e.lhs_ok.to_string(),
                e.event.to_string(),
            ]
        }),
    )?;
    let summary = json!({
        "config": cfg.snapshot()?,
        "expected_g": expected_f,
        "mean_g": mean,
        "sd_g": sd,
        "stderr_g": se,
        "z_score": z,
        "within_3_stderr": z.abs() <= 3.0,
        "event_rate": event_rate,
        "mean_g_squared": second,
        "second_moment_bound_shape": expected_f * expected_f,
        "degenerate_eta": events.first().is_some_and(|e| e.degenerate),
        "seeds": { "base": cfg.seed, "stream": "trial index" },
    });
    Ok(ExperimentOutput { csv, summary })
}

/// `count` distinct scopes of `E_{n,k}` drawn uniformly; `count` must not exceed `n!/(n−k)!`.
pub fn random_scopes<R: Rng + ?Sized>(n: usize, k: usize, count: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::with_capacity(count);
    while out.len() < count {
        let scope = rand::seq::index::sample(rng, n, k).into_vec();
        if !out.contains(&scope) {
            out.push(scope);
        }
    }
    out
}

fn run_nonnegativity(cfg: &ExperimentConfig, exec: Exec) -> Result<ExperimentOutput> {
    let pred = cfg.predicate()?;
    let p = cfg.p()?;
    let full = self::full_size_u128(cfg)?;
    if (cfg.scopes as u128) > full {
        return Err(Error::Config(format!("key `scopes`: {} exceeds |E_(n,k)| = {full}", cfg.scopes)));
    }
    let bound = cfg.decay_params(pred.t()).and_then(|dp| nonneg_probability_bound(&dp));
    let rows = exec.try_map_indexed(cfg.trials, |i| -> Result<Vec<Vec<String>>> {
        let mut rng = trial_rng(cfg.seed, i);
        let scopes = random_scopes(cfg.n, cfg.k, cfg.scopes, &mut rng);
        let space = Arc::new(ScopeSpace::restricted(cfg.n, cfg.k, scopes, p.clone())?);
        let x_star: u64 = rng.gen::<u64>() & ((1u64 << cfg.n) - 1);
        let table = DistributionTable::planted_given(space.clone(), &pred, x_star)?;
        let params = DecomposeParams::new(&space, cfg.delta_cbd.clone(), cfg.t_param)?;
        let part = decompose(&table, &params)?;
        let mut rows = Vec::new();
        for (j, piece) in part.parts.iter().enumerate() {
            let set = InstanceSet::from_ids(table.instance_count(), piece.instances.iter().copied());
            let cond = table.conditioned(&set)?;
            let h = avg_over_distribution(&cond, &pred, cfg.caps, Exec::Sequential)?;
            let frac = negative_fraction(&h, &cfg.tau_neg, Exec::Sequential)?;
            let min_h = min_value(&h, Exec::Sequential)?;
            rows.push(vec![
                i.to_string(),
                j.to_string(),
                piece.instances.len().to_string(),
                piece.fixed.len().to_string(),
                f64_of(&min_h).to_string(),
                frac.to_string(),
            ]);
        }
        Ok(rows)
    })?;
    let rows: Vec<Vec<String>> = rows.into_iter().flatten().collect();
    let bound_value = bound.as_ref().ok().map(|b| b.value);
    let fractions: Vec<f64> = rows.iter().map(|r| r[5].parse().unwrap_or(f64::NAN)).collect();
    let max_fraction = fractions.iter().copied().fold(0.0, f64::max);
    let within = bound_value.is_some_and(|b| fractions.iter().all(|&f| f <= b));
    let csv = csv_text(
        &["trial", "part", "size", "fixed", "min_h", "neg_fraction", "bound", "within"],
        rows.into_iter().zip(&fractions).map(|(mut r, &f)| {
            r.push(bound_value.map_or("NA".into(), |b| b.to_string()));
            r.push(bound_value.is_some_and(|b| f <= b).to_string());
            r
        }),
    )?;
    let summary = json!({
        "config": cfg.snapshot()?,
        "parts": fractions.len(),
        "max_neg_fraction": max_fraction,
        "bound": match &bound {
            Ok(b) => json!({ "value": b.value, "nu": b.nu, "vacuous": b.vacuous, "terms": b.terms }),
            Err(e) => json!({ "unavailable": e.to_string() }),
        },
        "all_within_bound": within,
        "seeds": { "base": cfg.seed, "stream": "trial index" },
    });
    Ok(ExperimentOutput { csv, summary })
}

fn full_size_u128(cfg: &ExperimentConfig) -> Result<u128> {
    Ok(cfg.full_size()?.to_u128().unwrap_or(u128::MAX))
}

fn run_moments(cfg: &ExperimentConfig, exec: Exec) -> Result<ExperimentOutput> {
    let pred = cfg.predicate()?;
    let space = Arc::new(ScopeSpace::full(cfg.n, cfg.k, cfg.p()?)?);
    let reports = exec.try_map_indexed(cfg.trials, |i| {
        let mut rng = trial_rng(cfg.seed, i);
        let inst = if cfg.planted { sample_planted(&space, &pred, &mut rng)?.1 } else { sample_null(&space, &mut rng) };
        let r = local_moments(&pred, &inst, cfg.caps, cfg.subset_cap, format!("trial {i}"))?;
        Ok::<_, Error>((inst.constraint_count(), r))
    })?;
    let masses: Vec<f64> = reports.iter().map(|(_, r)| f64_of(&r.mass)).collect();
    let (mean, sd, se) = moments_of(&masses);
    let min_local = reports.iter().map(|(_, r)| f64_of(&r.min_local_mass)).fold(f64::INFINITY, f64::min);
    let csv = csv_text(
        &["trial", "m", "mass", "min_local_mass", "negative_subsets"],
        reports.iter().enumerate().map(|(i, (m, r))| {
            vec![
                i.to_string(),
                m.to_string(),
                f64_of(&r.mass).to_string(),
                f64_of(&r.min_local_mass).to_string(),
                r.local.iter().filter(|l| !l.nonneg).count().to_string(),
            ]
        }),
    )?;
    let summary = json!({
        "config": cfg.snapshot()?,
        "planted": cfg.planted,
        "subset_cap": cfg.subset_cap,
        "mean_mass": mean,
        "sd_mass": sd,
        "stderr_mass": se,
        "min_local_mass": min_local,
        "seeds": { "base": cfg.seed, "stream": "trial index" },
    });
    Ok(ExperimentOutput { csv, summary })
}

fn run_decay_grid(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let t = cfg.predicate()?.t();
    let dp = cfg.decay_params(t)?;
    let mut buf = Vec::new();
    write_decay_csv(&decay_grid(&dp), &mut buf)?;
    let csv = String::from_utf8(buf).map_err(|e| Error::Internal(e.to_string()))?;
    let report = check_rapid_decay(&dp);
    let bound = nonneg_probability_bound(&dp);
    let summary = json!({
        "config": cfg.snapshot()?,
        "decay_params": serde_json::to_value(&dp)?,
        "rapid_decay": match &report {
            Ok(r) => serde_json::to_value(r)?,
            Err(e) => json!({ "out_of_regime": e.to_string() }),
        },
        "nonneg_bound": match &bound {
            Ok(b) => serde_json::to_value(b)?,
            Err(e) => json!({ "unavailable": e.to_string() }),
        },
    });
    Ok(ExperimentOutput { csv, summary })
}
