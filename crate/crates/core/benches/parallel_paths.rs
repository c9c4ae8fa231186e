//! Sequential against rayon-backed execution on the three parallel workloads: oracle
//! enumeration, Monte-Carlo trials and fuzzed CBD partitions. Both paths must produce
//! identical results; this only measures the cost.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pseudocal::cbd::{decompose, verify_partition, DecomposeParams};
use pseudocal::config::ConfigMap;
use pseudocal::csp::Predicate;
use pseudocal::exec::Exec;
use pseudocal::oracle::TinyUniverse;
use pseudocal::runner::{run_experiment, trial_rng, ExperimentConfig};
use pseudocal::scalar::Rational;
use pseudocal::suites::{fourier_universe, fuzz_table};

const PATHS: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn oracle_enumeration(c: &mut Criterion) {
    let u = TinyUniverse::new(fourier_universe().unwrap(), Predicate::xor(3).unwrap()).unwrap();
    let mut g = c.benchmark_group("oracle_mu_table");
    g.sample_size(10);
    for (name, exec) in PATHS {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| u.exact_mu_table(exec).unwrap()));
    }
    g.finish();
}

fn monte_carlo_trials(c: &mut Criterion) {
    let map = ConfigMap::parse(
        "experiment = concentration\nn = 14\nk = 3\ndelta = 2\npred = xor\nd_x = 2\nd_i = 2\ntrials = 16\nseed = 1\n",
    )
    .unwrap();
    let cfg = ExperimentConfig::from_map(&map).unwrap();
    let mut g = c.benchmark_group("concentration_trials");
    g.sample_size(10);
    for (name, exec) in PATHS {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| run_experiment(&cfg, exec).unwrap()));
    }
    g.finish();
}

fn cbd_fuzz(c: &mut Criterion) {
    let half = Rational::new(1.into(), 2.into());
    let run = |exec: Exec| {
        exec.try_map_indexed(16, |i| {
            let table = fuzz_table(&mut trial_rng(9, i))?;
            let params = DecomposeParams::new(table.space(), half.clone(), 3)?;
            let part = decompose(&table, &params)?;
            Ok::<_, pseudocal::Error>(verify_partition(&part, &table)?.all_ok)
        })
        .unwrap()
    };
    let mut g = c.benchmark_group("cbd_fuzz_partitions");
    g.sample_size(10);
    for (name, exec) in PATHS {
        g.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| run(exec)));
    }
    g.finish();
}

criterion_group!(benches, oracle_enumeration, monte_carlo_trials, cbd_fuzz);
criterion_main!(benches);
