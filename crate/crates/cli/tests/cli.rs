use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hypercauchy"))
}

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin().arg("--config").arg(config).arg("--out-dir").arg(out).arg("--quiet").args(extra).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("exp.ini");
    std::fs::write(&p, text).unwrap();
    p
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

#[test]
fn missing_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&dir.path().join("absent.ini"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot read"));
}

#[test]
fn malformed_and_unknown_keys_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for text in [
        "[experiment\nkind = solve\n",
        "[experiment]\nkind = solve\n[solve]\nspeed = 3\n",
        "[experiment]\nkind = solve\n[solve]\nmodes = -4\n",
        "[experiment]\nkind = teleport\n",
    ] {
        let cfg = write_config(dir.path(), text);
        assert_eq!(run(&cfg, dir.path(), &[]).status.code(), Some(2), "{text}");
    }
}

#[test]
fn bad_thread_count_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .env("HYPERCAUCHY_THREADS", "zero")
        .arg("--config")
        .arg(bundled("advection.ini"))
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn advection_keeps_its_sobolev_norm() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&bundled("advection.ini"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let csv = std::fs::read_to_string(dir.path().join("advection.csv")).unwrap();
    assert!(csv.starts_with("# generated "));
    let hk = column(&csv, "hk_norm");
    let t = column(&csv, "t");
    assert_eq!(t.last().copied(), Some(10.0));
    let (lo, hi) = hk.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    assert!(hi - lo <= 1e-8, "spread {}", hi - lo);
    // ‖sin‖_{H⁴} on the 2π torus: sqrt(5π).
    assert!((hk[0] - (5.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12, "{}", hk[0]);
    assert!(dir.path().join("summary.txt").exists());
}

#[test]
fn failed_check_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "[experiment]\nkind = breakdown\n[breakdown]\nsystem = advection\nmodes = 16\nt_max = 1\nexpect = breakdown\n",
    );
    let out = run(&cfg, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    let summary = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.starts_with("FAIL breakdown"));
}

#[test]
fn outputs_are_reproducible_without_timestamp() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = bundled("moser.ini");
    assert_eq!(run(&cfg, a.path(), &["--no-timestamp"]).status.code(), Some(0));
    let out = bin()
        .env("HYPERCAUCHY_THREADS", "1")
        .arg("--config")
        .arg(&cfg)
        .arg("--out-dir")
        .arg(b.path())
        .args(["--quiet", "--no-timestamp"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let x = std::fs::read(a.path().join("moser.csv")).unwrap();
    let y = std::fs::read(b.path().join("moser.csv")).unwrap();
    assert_eq!(x, y);
    assert!(!String::from_utf8_lossy(&x).starts_with('#'));
}

#[test]
fn seed_flag_overrides_config() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = bundled("commutator.ini");
    run(&cfg, a.path(), &["--no-timestamp"]);
    run(&cfg, b.path(), &["--no-timestamp", "--seed", "11"]);
    let x = std::fs::read(a.path().join("commutator.csv")).unwrap();
    let y = std::fs::read(b.path().join("commutator.csv")).unwrap();
    assert_ne!(x, y);
}

#[test]
fn full_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&bundled("all.ini"), dir.path(), &["--no-timestamp"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let summary = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.ends_with("16 experiments, 0 failed\n"), "{summary}");
    for f in ["causal.csv", "causal_diagram.txt", "dm_demo_initial_spectra.ini", "geometry.csv", "family_burgers.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
}

#[test]
fn every_bundled_config_runs() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for entry in std::fs::read_dir(root).unwrap() {
        let path = entry.unwrap().path();
        let dir = tempfile::tempdir().unwrap();
        let out = run(&path, dir.path(), &[]);
        assert_eq!(out.status.code(), Some(0), "{}", path.display());
    }
}
