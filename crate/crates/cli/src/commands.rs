//! Subcommand bodies. Each reads a merged [`ConfigMap`], writes its outputs through an
//! [`OutputDir`] and reports whether its checks passed.

use std::path::PathBuf;
use std::sync::Arc;

use num_traits::ToPrimitive;
use pseudocal::cbd::{decompose, partition_json, verify_partition, DecomposeParams, DistributionTable};
use pseudocal::config::ConfigMap;
use pseudocal::csp::{sample_null, sample_planted, Instance, ScopeSpace};
use pseudocal::exec::Exec;
use pseudocal::experiments::{expected_count, instance_density, lhs_event_check, local_moments};
use pseudocal::fourier::DegreeCaps;
use pseudocal::io::{predicate_by_name, read_instance, InstanceFile};
use pseudocal::runner::{random_scopes, run_experiment, trial_rng, ExperimentConfig};
use pseudocal::scalar::{rational_string, Rational};
use pseudocal::suites::{run_suite, Suite, SuiteOptions};
use pseudocal::{Error, Result};
use rand::Rng;
use serde_json::json;

use crate::manifest::OutputDir;

/// Whether every check a command performs passed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

fn json_bytes(v: &serde_json::Value) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| Error::Internal(e.to_string()))
}

/// `p` directly, or `Δn/|E_{n,k}|` from `delta`.
fn density_p(c: &ConfigMap, n: usize, k: usize) -> Result<Rational> {
    if let Some(p) = c.rational_opt("p")? {
        return Ok(p);
    }
    let delta = c.rational("delta")?;
    if k == 0 || k > n {
        return Err(Error::Config(format!("need 1 <= k <= n, got n = {n}, k = {k}")));
    }
    let edges = pseudocal::csp::falling_factorial(n, k);
    Ok(delta * Rational::from_integer(n.into()) / Rational::from_integer(edges))
}

fn caps(c: &ConfigMap) -> Result<DegreeCaps> {
    Ok(DegreeCaps::new(c.get("d_x")?, c.get("d_i")?))
}

fn load_instance(c: &ConfigMap) -> Result<Instance> {
    let path: PathBuf = c.get("instance")?;
    read_instance(&path, c.rational_opt("p")?.as_ref())
}

pub fn sample(c: &ConfigMap, out: &mut OutputDir, exec: Exec) -> Result<Verdict> {
    let (n, k): (usize, usize) = (c.get("n")?, c.get("k")?);
    let p = density_p(c, n, k)?;
    let count: usize = c.get("count")?;
    let seed: u64 = c.get("seed")?;
    let planted = c.bool_or("planted", false)?;
    let pred = predicate_by_name(&c.get_or("pred", "xor".to_string())?, k)?;
    let space = Arc::new(ScopeSpace::full(n, k, p)?);
    let drawn = exec.try_map_indexed(count, |i| -> Result<(Instance, Option<u64>)> {
        let mut rng = trial_rng(seed, i);
        if planted {
            let (x, inst) = sample_planted(&space, &pred, &mut rng)?;
            Ok((inst, Some(x.mask())))
        } else {
            Ok((sample_null(&space, &mut rng), None))
        }
    })?;
    let width = count.saturating_sub(1).to_string().len().max(4);
    let mut rows = Vec::with_capacity(count);
    for (i, (inst, x)) in drawn.iter().enumerate() {
        let text = serde_json::to_string(&InstanceFile::from_instance(inst))? + "\n";
        out.write(&format!("instance_{i:0width$}.json"), text.as_bytes())?;
        rows.push(vec![i.to_string(), inst.constraint_count().to_string(), x.map_or(String::new(), |m| m.to_string())]);
    }
    let counts: Vec<f64> = drawn.iter().map(|(inst, _)| inst.constraint_count() as f64).collect();
    let mean = counts.iter().sum::<f64>() / count.max(1) as f64;
    let var = if count > 1 { counts.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (count - 1) as f64 } else { 0.0 };
    let stderr = (var / count.max(1) as f64).sqrt();
    let expected = expected_count(&space);
    let expected_f = expected.to_f64().unwrap_or(f64::NAN);
    let z = if stderr > 0.0 { (mean - expected_f) / stderr } else { 0.0 };
    out.write("counts.csv", &csv_bytes(&["index", "constraints", "planted_x_mask"], rows)?)?;
    let summary = json!({
        "instances": count,
        "planted": planted,
        "p": rational_string(space.p()),
        "expected_constraints": rational_string(&expected),
        "mean_constraints": mean,
        "sd_constraints": var.sqrt(),
        "stderr_constraints": stderr,
        "z_score": z,
    });
    out.write("summary.json", &json_bytes(&summary)?)?;
    Ok(Verdict::Pass)
}

pub fn density(c: &ConfigMap, out: &mut OutputDir) -> Result<Verdict> {
    let inst = load_instance(c)?;
    let pred = predicate_by_name(&c.get_or("pred", "xor".to_string())?, inst.space().k())?;
    let caps = caps(c)?;
    let eta = c.rational_or("eta", Rational::new(3.into(), 10.into()))?;
    let mu = instance_density(&pred, &inst, caps)?;
    out.write(
        "density.csv",
        &csv_bytes(
            &["alpha", "coefficient"],
            mu.terms.iter().map(|(a, q)| {
                let vars: Vec<String> = a.indices().iter().map(usize::to_string).collect();
                vec![vars.join(" "), rational_string(q)]
            }),
        )?,
    )?;
    let event = lhs_event_check(&pred, &inst, caps, &eta)?;
    let summary = json!({
        "terms": mu.terms.len(),
        "d_x": caps.d_x,
        "d_i": caps.d_i,
        "eta": rational_string(&eta),
        "event": serde_json::to_value(&event)?,
    });
    out.write("summary.json", &json_bytes(&summary)?)?;
    Ok(Verdict::Pass)
}

pub fn verify(suite: &str, c: &ConfigMap, out: &mut OutputDir, exec: Exec) -> Result<Verdict> {
    let suite: Suite = suite.parse()?;
    let defaults = SuiteOptions::default();
    let opts =
        SuiteOptions { seed: c.get_or("seed", defaults.seed)?, tables: c.get_or("tables", defaults.tables)?, exec };
    let report = run_suite(suite, &opts)?;
    print!("{}", report.to_text());
    out.write("report.json", &json_bytes(&serde_json::to_value(&report)?)?)?;
    Ok(Verdict::from_bool(report.passed()))
}

pub fn decompose_cmd(c: &ConfigMap, out: &mut OutputDir) -> Result<Verdict> {
    let (n, k): (usize, usize) = (c.get("n")?, c.get("k")?);
    let p = density_p(c, n, k)?;
    let m: usize = c.get_or("scopes", 3)?;
    let seed: u64 = c.get("seed")?;
    let source = c.get_or("source", "planted".to_string())?;
    if k == 0 || k > n || n > 20 {
        return Err(Error::Config(format!("decompose needs 1 <= k <= n <= 20, got n = {n}, k = {k}")));
    }
    let mut rng = trial_rng(seed, 0);
    let edges = pseudocal::csp::falling_factorial(n, k);
    if edges < m.into() {
        return Err(Error::Config(format!("key `scopes`: {m} exceeds |E_(n,k)| = {edges}")));
    }
    let space = Arc::new(ScopeSpace::restricted(n, k, random_scopes(n, k, m, &mut rng), p)?);
    let table = match source.as_str() {
        "planted" => {
            let pred = predicate_by_name(&c.get_or("pred", "xor".to_string())?, k)?;
            let x = rng.gen::<u64>() & ((1u64 << n) - 1);
            DistributionTable::planted_given(space.clone(), &pred, x)?
        }
        "null" => DistributionTable::null(space.clone())?,
        "fuzz" => DistributionTable::fuzz(space.clone(), &mut rng)?,
        other => return Err(Error::Config(format!("key `source`: `{other}` is not planted, null or fuzz"))),
    };
    let delta_cbd = c.rational_or("delta_cbd", Rational::new(1.into(), 2.into()))?;
    let params = DecomposeParams::new(&space, delta_cbd, c.get_or("t_param", k)?)?;
    let part = decompose(&table, &params)?;
    let report = verify_partition(&part, &table)?;
    out.write("table.json", &json_bytes(&table.to_json())?)?;
    out.write("partition.json", &json_bytes(&partition_json(&part, &report)?)?)?;
    println!(
        "{} parts, |B| = {}, |C| = {}, verified: {}",
        part.parts.len(),
        part.b.len(),
        part.c.len(),
        if report.all_ok { "yes" } else { "no" }
    );
    Ok(Verdict::from_bool(report.all_ok))
}

pub fn moments(c: &ConfigMap, out: &mut OutputDir) -> Result<Verdict> {
    let inst = load_instance(c)?;
    let pred = predicate_by_name(&c.get_or("pred", "xor".to_string())?, inst.space().k())?;
    let report =
        local_moments(&pred, &inst, caps(c)?, c.get_or("subset_cap", 2)?, c.get_or("label", "instance".to_string())?)?;
    out.write(
        "moments.csv",
        &csv_bytes(
            &["vars", "min_mass", "nonneg"],
            report.local.iter().map(|l| {
                let vars: Vec<String> = l.vars.iter().map(usize::to_string).collect();
                vec![vars.join(" "), rational_string(&l.min_mass), l.nonneg.to_string()]
            }),
        )?,
    )?;
    out.write("moments.json", &json_bytes(&serde_json::to_value(&report)?)?)?;
    Ok(Verdict::Pass)
}

pub fn experiment(c: &ConfigMap, out: &mut OutputDir, exec: Exec) -> Result<Verdict> {
    let cfg = ExperimentConfig::from_map(c)?;
    let result = run_experiment(&cfg, exec)?;
    out.write("results.csv", result.csv.as_bytes())?;
    out.write("summary.json", &json_bytes(&result.summary)?)?;
    Ok(Verdict::Pass)
}
