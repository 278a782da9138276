use std::path::Path;
use std::process::{Command, Output};

use singheat::scenario::ScenarioConfig;

fn singheat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_singheat")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, toml: &str) -> String {
    let p = dir.join("scenario.toml");
    std::fs::write(&p, toml).unwrap();
    p.to_str().unwrap().to_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn defaults_round_trip_through_the_parser() {
    let o = singheat(&["defaults"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let cfg = ScenarioConfig::from_toml(&text).unwrap();
    assert_eq!(cfg.to_toml().unwrap(), text);
    assert_eq!(cfg.dimensions.n, 4);
}

#[test]
fn codimension_two_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[dimensions]\nn = 3\nm = 1\n");
    let o = singheat(&["--config", &cfg, "--out", dir.path().to_str().unwrap(), "potential"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("codimension"), "{}", stderr(&o));
    // nothing was computed
    assert!(!dir.path().join("potential_asymptotics.csv").exists());
}

#[test]
fn supercritical_strong_pair_names_the_radicand() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[exponents]\np = 4.0\nfamily = \"strong\"\n");
    let o = singheat(&["--config", &cfg, "--out", dir.path().to_str().unwrap(), "comparison"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("radicand"), "{}", stderr(&o));
}

#[test]
fn unknown_keys_are_reported_with_their_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "seed = 3\n\n[solver]\nbogus = 1\n");
    let o = singheat(&["--config", &cfg, "defaults"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("bogus") && err.contains("line 4"), "{err}");
}

#[test]
fn missing_config_file_is_a_config_error() {
    let o = singheat(&["--config", "/nonexistent/scenario.toml", "potential"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn flat_selftest_passes_and_writes_the_scan() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = singheat(&["--out", out.to_str().unwrap(), "potential", "--flat-selftest"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = String::from_utf8(o.stdout).unwrap();
    assert!(report.contains("flat"), "{report}");
    assert!(!report.contains("FAIL"), "{report}");
    let csv = std::fs::read_to_string(out.join("potential_asymptotics.csv")).unwrap();
    assert!(csv.lines().count() > 10);
    assert!(out.join("config.toml").exists() && out.join("report.txt").exists());
}

#[test]
fn identical_config_and_seed_give_identical_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let runs: Vec<_> = ["a", "b"]
        .iter()
        .map(|name| {
            let out = dir.path().join(name);
            let o = singheat(&["--seed", "11", "--out", out.to_str().unwrap(), "potential"]);
            assert!(o.status.success(), "{}", stderr(&o));
            out
        })
        .collect();
    // the config echo differs in `output`, so only the CSVs are compared
    for file in ["potential_asymptotics.csv"] {
        let a = std::fs::read(runs[0].join(file)).unwrap();
        let b = std::fs::read(runs[1].join(file)).unwrap();
        assert!(a == b, "{file} differs between runs");
    }
}

#[test]
fn capacity_skips_eps_outside_the_cap_with_a_warning() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[capacity]\np = [4.0]\n\n[capacity.plan]\neps = [0.5, 0.125, 0.0625, 0.03125]\n");
    let out = dir.path().join("run");
    let o = singheat(&["--config", &cfg, "--out", out.to_str().unwrap(), "capacity"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = String::from_utf8(o.stdout).unwrap();
    assert!(report.contains("warning: eps = 0.5 skipped"), "{report}");
    let csv = std::fs::read_to_string(out.join("capacity_p4.csv")).unwrap();
    assert!(!csv.lines().skip(1).any(|l| l.starts_with("0.5,")), "{csv}");
}

#[test]
fn reference_page_lists_the_current_defaults() {
    let o = singheat(&["defaults"]);
    let page = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../docs/scenario_defaults.toml")).unwrap();
    assert_eq!(String::from_utf8(o.stdout).unwrap(), page, "regenerate with `singheat defaults > docs/scenario_defaults.toml`");
}
