use std::path::Path;
use std::process::{Command, Output};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

fn bin(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spikegibbs"))
        .args(args)
        .current_dir(dir)
        .env("RUST_BACKTRACE", "0")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], dir: &Path) -> String {
    let out = bin(args, dir);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn err(args: &[&str], dir: &Path) -> String {
    let out = bin(args, dir);
    assert!(!out.status.success(), "{args:?} should fail");
    String::from_utf8(out.stderr).unwrap()
}

/// y = 2 x0 - 1.5 x3 + noise with 12 columns; binary labels when `binary`.
fn write_data(dir: &Path, binary: bool) {
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    let (n, p) = (100, 12);
    let (mut x, mut y) = (String::new(), String::new());
    for _ in 0..n {
        let row: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
        let e: f64 = StandardNormal.sample(&mut rng);
        let eta = 2.0 * row[0] - 1.5 * row[3] + e;
        x.push_str(&row.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","));
        x.push('\n');
        y.push_str(&if binary { ((eta > 0.0) as u8).to_string() } else { eta.to_string() });
        y.push('\n');
    }
    std::fs::write(dir.join("x.csv"), x).unwrap();
    std::fs::write(dir.join("y.csv"), y).unwrap();
}

fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn fit(dir: &Path, extra: &[&str]) {
    let mut args = vec!["fit", "--data", "x.csv", "--response", "y.csv", "--out", "run", "--iters", "1300", "--burnin", "100"];
    args.extend_from_slice(extra);
    ok(&args, dir);
}

#[test]
fn fit_then_inspect_and_summarize() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write_data(d, false);
    fit(d, &["--chains", "2", "--watch", "0,5", "--group", "8-11", "--switch-trace", "--seed", "4"]);

    let mips = rows(&std::fs::read_to_string(d.join("run/mips.csv")).unwrap());
    assert_eq!(mips.len(), 12);
    let mip = |j: usize| mips[j][1].parse::<f64>().unwrap();
    assert!(mip(0) > 0.99 && mip(3) > 0.99, "{mips:?}");

    let inspect = ok(&["chainstore", "inspect", "run/t0/c0/beta.sgb"], d);
    assert!(inspect.contains("records: 1200"), "{inspect}");
    assert!(inspect.contains(": true"), "size check: {inspect}");
    for f in ["tau", "mip", "energy", "energy_sorted", "scalars", "unbounded"] {
        ok(&["chainstore", "inspect", &format!("run/t0/c0/{f}.sgb")], d);
    }

    let trace = rows(&ok(&["chainstore", "trace", "run/t0/c1/beta.sgb", "--coef", "0", "--from", "200", "--to", "209"], d));
    assert_eq!(trace.iter().map(|r| r[0].parse::<u64>().unwrap()).collect::<Vec<_>>(), (200..210).collect::<Vec<_>>());

    let chain = rows(&ok(&["chainstore", "mips", "run/t0/c0"], d));
    assert_eq!(chain.len(), 12);

    // pooled MIPs over both chains agree with the file written by fit
    let pooled = ok(&["diag", "mips", "run", "--tsv"], d);
    assert!(pooled.starts_with("coordinate\tmip\tinclusion_freq\n"));
    for (line, m) in pooled.lines().skip(1).zip(&mips) {
        let got: f64 = line.split('\t').nth(1).unwrap().parse().unwrap();
        assert!((got - m[1].parse::<f64>().unwrap()).abs() < 1e-9);
    }

    let hpd = rows(&ok(&["diag", "hpd", "run", "--coef", "0", "--levels", "0.5,0.9"], d));
    assert_eq!(hpd.len(), 4, "sparse and unbounded rows for two levels");
    let width = |r: &Vec<String>| r[7].parse::<f64>().unwrap();
    assert!(width(&hpd[0]) < width(&hpd[1]));
    let (lo, hi): (f64, f64) = (hpd[1][5].parse().unwrap(), hpd[1][6].parse().unwrap());
    assert!(lo < 2.0 && 2.0 < hi, "0.9 interval [{lo}, {hi}]");

    let union = rows(&ok(&["diag", "union", "run", "--coefs", "0,1"], d));
    assert_eq!(union[0][2].parse::<f64>().unwrap(), 1.0);

    let out = d.join("switch.csv");
    ok(&["diag", "switch-check", "run/t0/c0/switch_g0.csv", "--replicates", "200", "--out", out.to_str().unwrap()], d);
    let sw = rows(&std::fs::read_to_string(out).unwrap());
    let on = sw.iter().find(|r| r[0] == "on_frequency").unwrap()[1].parse::<f64>().unwrap();
    assert!((0.0..=1.0).contains(&on));
}

#[test]
fn config_file_and_flags_combine() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write_data(d, false);
    std::fs::write(d.join("run.toml"), "[plan]\nchains = 1\nrecord_every = 4\n").unwrap();
    fit(d, &["--config", "run.toml", "--pi-a", "0.2", "--sigma2-prior", "fixed:1.0", "--temps", "1.3,1", "--merge-period", "5"]);
    let saved = std::fs::read_to_string(d.join("run/config.toml")).unwrap();
    assert!(saved.contains("record_every = 4") && saved.contains("pi_a = 0.2") && saved.contains("fixed = 1.0"), "{saved}");
    assert!(!saved.contains("[fixed.pi_hyper]"));
    // the ladder writes one directory per temperature; diag reads the coldest
    assert!(d.join("run/t0/c0/beta.sgb").exists() && d.join("run/t1/c0/beta.sgb").exists());
    let inspect = ok(&["chainstore", "inspect", "run/t1/c0/beta.sgb"], d);
    assert!(inspect.contains("records: 300"), "{inspect}");
    assert_eq!(rows(&ok(&["diag", "mips", "run"], d)).len(), 12);
}

#[test]
fn logistic_fit_reports_weighted_mips() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write_data(d, true);
    fit(d, &["--noise", "logistic", "--chains", "1"]);
    let head = ok(&["diag", "mips", "run"], d);
    assert!(head.starts_with("coordinate,mip,inclusion_freq,weighted_mip\n"), "{head}");
}

#[test]
fn bench_writes_tables_and_long_data() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let stdout =
        ok(&["bench", "--scenario", "small", "--replicates", "2", "--sweeps", "150", "--burnin", "20", "--out", "b"], d);
    assert!(stdout.contains("GB Prior(1,p)") && stdout.contains("GB Prior(k-noise,p)"));
    for f in ["summary.csv", "table.md", "long.csv"] {
        assert!(d.join("b").join(f).exists(), "{f}");
    }
    let long = std::fs::read_to_string(d.join("b/long.csv")).unwrap();
    assert_eq!(long.matches("scenario,prior").count(), 1, "single header");

    ok(&["bench", "--scenario", "ee", "--replicates", "1", "--sweeps", "150", "--burnin", "20", "--out", "e"], d);
    let summary = std::fs::read_to_string(d.join("e/summary.csv")).unwrap();
    assert!(summary.contains("tempered,1,") && summary.contains("untempered,1,"));
}

#[test]
fn bad_inputs_fail_with_messages() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    write_data(d, false);
    assert!(err(&["chainstore", "inspect", "x.csv"], d).contains("not a chain file"));
    assert!(err(&["bench", "--scenario", "nope", "--out", "b"], d).contains("unknown scenario"));
    assert!(err(&["fit", "--data", "x.csv", "--response", "y.csv", "--out", "r", "--noise", "t:-1"], d).contains("degrees of freedom"));
    assert!(err(&["fit", "--data", "x.csv", "--response", "y.csv", "--out", "r", "--noise", "logistic"], d)
        .contains("expected 0 or 1"));
    assert!(err(&["fit", "--data", "x.csv", "--response", "y.csv", "--out", "r", "--temps", "1.2,1.5"], d)
        .contains("temperatures must be"));
    assert!(err(&["diag", "mips", "."], d).contains("no chain files"));
}
