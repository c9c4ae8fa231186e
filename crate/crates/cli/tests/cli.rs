use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(args: &[&str], out: &Path, threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pseudocal"));
    cmd.args(args).arg("--out").arg(out);
    match threads {
        Some(t) => cmd.env("PSEUDOCAL_THREADS", t),
        None => cmd.env_remove("PSEUDOCAL_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&read(path)).expect("valid json")
}

fn files_except_manifest(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn planted_sample_is_reproducible_across_thread_counts() {
    let tmp = TempDir::new().unwrap();
    let args = ["sample", "--planted", "--n", "6", "--k", "3", "--p", "0.5", "--count", "3", "--seed", "7"];
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(run(&args, &a, Some("1")).status.success());
    assert!(run(&args, &b, Some("4")).status.success());
    let fa = files_except_manifest(&a);
    assert_eq!(fa.iter().filter(|(n, _)| n.starts_with("instance_")).count(), 3);
    assert_eq!(fa, files_except_manifest(&b));
    let manifest = json(&a.join("manifest.json"));
    assert_eq!(manifest["exit_code"], 0);
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 5);
}

#[test]
fn null_sample_with_zero_density_is_empty() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("s");
    let o = run(&["sample", "--null", "--n", "5", "--k", "3", "--p", "0", "--count", "4", "--seed", "1"], &out, None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for i in 0..4 {
        let inst = json(&out.join(format!("instance_{i:04}.json")));
        assert!(inst["y"].as_array().unwrap().iter().all(|y| y == 1));
    }
}

#[test]
fn null_constraint_counts_concentrate() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("s");
    let o = run(
        &["sample", "--null", "--n", "5", "--k", "3", "--p", "1/10", "--count", "10000", "--seed", "3"],
        &out,
        None,
    );
    assert!(o.status.success());
    let s = json(&out.join("summary.json"));
    assert_eq!(s["expected_constraints"], "6/1");
    let mean = s["mean_constraints"].as_f64().unwrap();
    let sd = s["sd_constraints"].as_f64().unwrap();
    let se = sd / 100.0;
    assert!((mean - 6.0).abs() <= 3.0 * se, "mean {mean}, stderr {se}");
}

#[test]
fn unknown_suite_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let o = run(&["verify", "no-such-suite"], tmp.path(), None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown suite `no-such-suite`"));
    assert_eq!(json(&tmp.path().join("manifest.json"))["exit_code"], 2);
}

#[test]
fn suites_pass_through_the_cli() {
    let tmp = TempDir::new().unwrap();
    for (suite, extra) in [("decay-grid", vec![]), ("cbd-partition", vec!["--tables", "100", "--seed", "11"])] {
        let out = tmp.path().join(suite);
        let mut args = vec!["verify", suite];
        args.extend(extra);
        let o = run(&args, &out, None);
        let stdout = String::from_utf8_lossy(&o.stdout);
        assert_eq!(o.status.code(), Some(0), "{stdout}");
        assert!(stdout.lines().skip(1).all(|l| l.starts_with("PASS")), "{stdout}");
        assert_eq!(json(&out.join("report.json"))["suite"], suite);
    }
}

#[test]
fn missing_key_names_the_key() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("run.cfg");
    std::fs::write(&cfg, "experiment = concentration\nn = 8\nk = 3\ndelta = 2\nd_x = 3\nd_i = 2\nseed = 1\n").unwrap();
    let o = run(&["experiment", "--config", cfg.to_str().unwrap()], &tmp.path().join("e"), None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing key `trials`"));
    // The flag supplies the key.
    let o = run(&["experiment", "--config", cfg.to_str().unwrap(), "--trials", "5"], &tmp.path().join("f"), None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn experiments_are_byte_identical_under_reruns() {
    let tmp = TempDir::new().unwrap();
    let configs = [
        "experiment = concentration\nn = 10\nk = 3\ndelta = 2\nd_x = 3\nd_i = 2\ntrials = 12\nseed = 4\n",
        "experiment = nonnegativity\nn = 6\nk = 3\np = 1/3\nd_x = 3\nd_i = 2\ntrials = 2\nseed = 4\n",
        "experiment = moments\nn = 6\nk = 3\ndelta = 1\nd_x = 3\nd_i = 1\ntrials = 3\nseed = 2\n",
        "experiment = decay-grid\nn = 10000\nk = 3\ndelta = 2\nd_x = 1\nd_i = 1\nscaling_caps = true\n",
    ];
    for (i, text) in configs.iter().enumerate() {
        let cfg = tmp.path().join(format!("{i}.cfg"));
        std::fs::write(&cfg, text).unwrap();
        let a = tmp.path().join(format!("{i}a"));
        let b = tmp.path().join(format!("{i}b"));
        assert!(run(&["experiment", "--config", cfg.to_str().unwrap()], &a, Some("1")).status.success());
        assert!(run(&["experiment", "--config", cfg.to_str().unwrap()], &b, Some("3")).status.success());
        assert_eq!(std::fs::read(a.join("results.csv")).unwrap(), std::fs::read(b.join("results.csv")).unwrap());
        assert_eq!(read(&a.join("summary.json")), read(&b.join("summary.json")));
    }
    let grid = read(&tmp.path().join("3a").join("results.csv"));
    assert!(grid.starts_with("s_x,s_I,epsilon,bound_satisfied\n"));
    let conc = json(&tmp.path().join("0a").join("summary.json"));
    assert!(conc["event_rate"].is_number());
}

#[test]
fn density_decompose_and_moments_run() {
    let tmp = TempDir::new().unwrap();
    let s = tmp.path().join("s");
    assert!(run(
        &["sample", "--planted", "--n", "6", "--k", "3", "--p", "1/20", "--count", "1", "--seed", "5"],
        &s,
        None
    )
    .status
    .success());
    let inst = s.join("instance_0000.json");
    let inst = inst.to_str().unwrap();
    let d = tmp.path().join("d");
    let o = run(&["density", "--instance", inst, "--d-x", "3", "--d-i", "2"], &d, None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(read(&d.join("density.csv")).starts_with("alpha,coefficient\n,"));
    let m = tmp.path().join("m");
    assert!(run(&["moments", "--instance", inst, "--d-x", "3", "--d-i", "2"], &m, None).status.success());
    assert!(json(&m.join("moments.json"))["local"].is_array());
    let c = tmp.path().join("c");
    let o = run(&["decompose", "--n", "5", "--k", "3", "--p", "1/3", "--seed", "9"], &c, None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(json(&c.join("partition.json")).is_object());
}
