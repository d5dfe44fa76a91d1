use std::path::{Path, PathBuf};
use std::process::Command;

use symrad_cli::config::{BoundRequest, RunConfig, Task};
use symrad_cli::fixtures;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_symrad"));
    c.env_remove("SYMRAD_OUT_DIR");
    c
}

fn library(dir: &Path) -> PathBuf {
    let fx = dir.join("fixtures");
    fixtures::write_library(&fx).unwrap();
    fx
}

fn exit_code(cmd: &mut Command) -> i32 {
    cmd.output().unwrap().status.code().unwrap()
}

fn read_csv(path: &Path) -> Vec<Vec<f64>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

#[test]
fn every_library_config_round_trips() {
    for (name, cfg) in fixtures::library() {
        let text = cfg.to_json();
        let back = RunConfig::from_json(&text, Path::new("")).unwrap_or_else(|e| {
            // the cone config references a file that only exists once written
            assert_eq!(name, "symmetrize_cone", "{e}");
            let mut c: RunConfig = serde_json::from_str(&text).unwrap();
            c.base_dir = PathBuf::new();
            c
        });
        assert_eq!(back, cfg, "{name}");
        assert_eq!(back.to_json(), text, "{name}");
    }
}

#[test]
fn written_configs_parse() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = library(tmp.path());
    for (name, cfg) in fixtures::library() {
        let loaded = RunConfig::load(&fx.join(format!("{name}.json"))).unwrap();
        assert_eq!(loaded.task, cfg.task);
    }
}

#[test]
fn symmetrize_cone_matches_closed_form() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = library(tmp.path());
    let out = tmp.path().join("out");
    let status = bin().arg("symmetrize").arg(fx.join("symmetrize_cone.json")).arg("--out").arg(&out).output().unwrap().status;
    assert!(status.success());
    let rows = read_csv(&out.join("rearrangement.csv"));
    let dx = fixtures::CONE_DX;
    let worst = rows
        .iter()
        .map(|r| (r[1] - (1.0 - (r[0] / std::f64::consts::PI).sqrt())).abs())
        .fold(0.0, f64::max);
    assert!(worst <= 2.0 * dx, "{worst}");
    let mu = read_csv(&out.join("distribution.csv"));
    assert!(mu.windows(2).all(|w| w[1][1] <= w[0][1]));
}

#[test]
fn outputs_are_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = library(tmp.path());
    for cfg in ["symmetrize_cone", "shoot_torsion", "bounds_level_set"] {
        let (a, b) = (tmp.path().join(format!("{cfg}_a")), tmp.path().join(format!("{cfg}_b")));
        let cmd = cfg.split('_').next().unwrap();
        for out in [&a, &b] {
            assert!(bin().arg(cmd).arg(fx.join(format!("{cfg}.json"))).arg("--out").arg(out).output().unwrap().status.success());
        }
        let mut names: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        assert!(!names.is_empty());
        for n in names {
            assert_eq!(std::fs::read(a.join(&n)).unwrap(), std::fs::read(b.join(&n)).unwrap(), "{cfg}/{n:?}");
        }
    }
}

#[test]
fn verify_square_torsion_holds() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = library(tmp.path());
    let out = tmp.path().join("verify");
    let code = exit_code(bin().arg("verify").arg(fx.join("verify_square_torsion.json")).env("SYMRAD_OUT_DIR", &out));
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("verdict.json")).unwrap()).unwrap();
    assert_eq!(v["verdict"]["holds"], true);
    assert_eq!(v["verdict"]["strict"], true);
    assert!(out.join("distribution.csv").exists() && out.join("plot.gp").exists());
}

#[test]
fn flag_overrides_environment_and_config() {
    let tmp = tempfile::tempdir().unwrap();
    let fx = library(tmp.path());
    let (env_dir, flag_dir) = (tmp.path().join("env"), tmp.path().join("flag"));
    let cfg = fx.join("bounds_level_set.json");
    assert_eq!(exit_code(bin().arg("bounds").arg(&cfg).env("SYMRAD_OUT_DIR", &env_dir)), 0);
    assert!(env_dir.join("report.json").exists());
    assert_eq!(exit_code(bin().arg("bounds").arg(&cfg).arg("--out").arg(&flag_dir).env("SYMRAD_OUT_DIR", &env_dir)), 0);
    assert!(flag_dir.join("report.json").exists());
}

fn write_config(dir: &Path, name: &str, cfg: &RunConfig) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, cfg.to_json()).unwrap();
    p
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let malformed = tmp.path().join("bad.json");
    std::fs::write(&malformed, "{ not json").unwrap();
    assert_eq!(exit_code(bin().arg("shoot").arg(&malformed).arg("--out").arg(&out)), 2);
    assert_eq!(exit_code(bin().arg("shoot").arg(tmp.path().join("missing.json"))), 2);
    assert_eq!(exit_code(bin().arg("frobnicate")), 2);

    let violated = RunConfig::new(Task::Bounds {
        request: BoundRequest::LevelSet { n: 2, p: 2.0, q: 2.0, lambda: 5.7832, max_w: 1.0, t: 0.0, measure: 1.0 },
    });
    let p = write_config(tmp.path(), "violated.json", &violated);
    assert_eq!(exit_code(bin().arg("bounds").arg(&p).arg("--out").arg(&out)), 1);

    let mut starved = fixtures::library().into_iter().find(|(n, _)| *n == "solve_square_torsion").unwrap().1;
    starved.overrides.max_iter = Some(1);
    let p = write_config(tmp.path(), "starved.json", &starved);
    assert_eq!(exit_code(bin().arg("solve").arg(&p).arg("--out").arg(&out)), 3);

    let mut negative = starved.clone();
    negative.overrides.solver_tol = Some(-1.0);
    let p = write_config(tmp.path(), "negative.json", &negative);
    assert_eq!(exit_code(bin().arg("solve").arg(&p).arg("--out").arg(&out)), 2);
}

#[test]
fn suite_subset_exit_status() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let pass = write_config(tmp.path(), "pass.json", &RunConfig::new(Task::Suite { dx: None, seed: None, criteria: Some(vec![1, 2]) }));
    let o = bin().arg("suite").arg(&pass).arg("--out").arg(&out).output().unwrap();
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{stdout}");
    assert!(stdout.lines().filter(|l| l.starts_with("PASS")).count() == 2);
    let fail = write_config(tmp.path(), "fail.json", &RunConfig::new(Task::Suite { dx: None, seed: None, criteria: Some(vec![3]) }));
    assert_eq!(exit_code(bin().arg("suite").arg(&fail).arg("--out").arg(&out)), 1);
}
