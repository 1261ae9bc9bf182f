use std::path::Path;
use std::process::{Command, Output};

fn dhstab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dhstab")).args(args).env_remove("DHSTAB_DATA").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn fixtures_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    let o = dhstab(&["fixtures", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    dir
}

fn file(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn field(out: &str, key: &str) -> f64 {
    let line = out.lines().find(|l| l.starts_with(key)).unwrap_or_else(|| panic!("no `{key}` in {out}"));
    line.rsplit(' ').next().unwrap().parse().unwrap()
}

#[test]
fn ssf_on_the_counterexample_stabilizes() {
    let dir = fixtures_dir();
    let k_out = file(dir.path(), "k.mat");
    let o = dhstab(&["ssf", &file(dir.path(), "counterexample_s3.prob"), "--norm", "spec", "--k-out", &k_out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("status: stabilized"));
    assert!(field(&out, "abscissa") < 0.0);
    assert!(field(&out, "norm (spec)") > 0.0);

    let o = dhstab(&["check", &file(dir.path(), "counterexample_s3.prob"), "--k", &k_out]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("stable: true"));
}

#[test]
fn check_reports_the_reference_gain_abscissa() {
    let dir = fixtures_dir();
    let o = dhstab(&["check", &file(dir.path(), "counterexample_s3.prob"), "--k", &file(dir.path(), "kstar.mat")]);
    assert_eq!(o.status.code(), Some(0));
    let a = field(&stdout(&o), "abscissa");
    assert!((a + 2.4504).abs() < 1e-4, "{a}");
}

#[test]
fn exit_codes() {
    let dir = fixtures_dir();
    assert_eq!(dhstab(&["sof", "missing.prob"]).status.code(), Some(3));
    assert_eq!(dhstab(&["ssf", &file(dir.path(), "unstabilizable_pair.prob")]).status.code(), Some(2));
    assert_eq!(dhstab(&["ssf", "--norm", "max", "x.prob"]).status.code(), Some(3));
    assert_eq!(dhstab(&["frobnicate"]).status.code(), Some(3));
    assert_eq!(dhstab(&["bench"]).status.code(), Some(3));
    assert_eq!(dhstab(&["--help"]).status.code(), Some(0));
    let o = dhstab(&["check", &file(dir.path(), "chain3_output.prob"), "--k", &file(dir.path(), "kstar.mat")]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn sof_on_the_chain_respects_the_stability_interval() {
    let dir = fixtures_dir();
    let k_out = file(dir.path(), "k.mat");
    let o = dhstab(&["sof", &file(dir.path(), "chain3_output.prob"), "--init", "abi", "--k-out", &k_out]);
    assert_eq!(o.status.code(), Some(0));
    let k = std::fs::read_to_string(&k_out).unwrap();
    let v: f64 = k.lines().nth(1).unwrap().trim().parse().unwrap();
    assert!(v > 1.0 && v < 4.0, "{v}");
}

#[test]
fn bench_writes_csv_and_comparison_tables() {
    let dir = fixtures_dir();
    let o = dhstab(&["bench", dir.path().to_str().unwrap(), "--out", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next().unwrap(), "problem,algorithm,init,norm_kind,norm_value,abscissa,status,iterations,wall_time_s");
    assert_eq!(lines.count(), 7);

    let o = dhstab(&["bench", dir.path().to_str().unwrap(), "--compare"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.lines().next().unwrap().split_whitespace().eq(["problem", "Init", "BCD", "SSDP"]));

    let empty = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_dhstab"))
        .args(["bench", "--out", "csv"])
        .env("DHSTAB_DATA", empty.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 1);
}
