//! End-to-end runs of the `physbench` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_physbench");

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn physbench(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).env_remove("PHYSBENCH_SEED").env("SOURCE_DATE_EPOCH", "0");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn run_ok(args: &[&str]) -> Output {
    let out = physbench(args, &[]);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&read(&dir.join("report.json"))).unwrap()
}

fn write_config(dir: &Path, v: &Value) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

#[test]
fn validate_matches_golden_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    run_ok(&["validate", "--config", data("small.json").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    for name in ["param_table.csv", "miou_table.csv", "over_time.csv"] {
        let got = read(&out.join(name));
        let golden = data("golden").join(name);
        if std::env::var_os("UPDATE_GOLDEN").is_some() {
            std::fs::write(&golden, &got).unwrap();
        }
        assert_eq!(got, read(&golden), "{name} drifted from the golden file");
        assert!(!got.contains('\r'));
    }
    let text = run_ok(&["report", "--input", out.join("report.json").to_str().unwrap(), "--style", "param-table"]).stdout;
    assert_eq!(String::from_utf8(text).unwrap(), read(&out.join("param_table.csv")));
}

#[test]
fn validate_is_deterministic_across_runs_and_jobs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = data("small.json");
    let mut reports = Vec::new();
    for (i, jobs) in ["1", "1", "3"].iter().enumerate() {
        let out = tmp.path().join(format!("o{i}"));
        let o = physbench(
            &["validate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--jobs", jobs],
            &[("SOURCE_DATE_EPOCH", &i.to_string())],
        );
        assert!(o.status.success());
        let mut r = report(&out);
        assert_eq!(r["generated_at"], Value::String(i.to_string()));
        r.as_object_mut().unwrap().remove("generated_at");
        reports.push(serde_json::to_string(&r).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    assert_eq!(reports[0], reports[2]);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let out = out.to_str().unwrap();

    let missing = physbench(&["validate", "--config", "/nonexistent/config.json", "--out", out], &[]);
    assert_eq!(missing.status.code(), Some(3));

    let bad = write_config(tmp.path(), &serde_json::json!({"version": 1, "surprise": true}));
    let o = physbench(&["validate", "--config", bad.to_str().unwrap(), "--out", out], &[]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));

    let wrong_version = write_config(tmp.path(), &serde_json::json!({"version": 9}));
    assert_eq!(physbench(&["simulate", "--config", wrong_version.to_str().unwrap(), "--out", out], &[]).status.code(), Some(2));

    let no_bundle = write_config(
        tmp.path(),
        &serde_json::json!({
            "estimates": [{"material": "free_fall", "bundle": "missing_dir", "spec": {"kind": "gravity_freefall"}}]
        }),
    );
    let o = physbench(&["estimate", "--config", no_bundle.to_str().unwrap(), "--out", out], &[]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn strict_mode_fails_on_missed_tolerance() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg: Value = serde_json::from_str(&read(&data("small.json"))).unwrap();
    cfg["tolerances"] = serde_json::json!({"gravity_rel": 1e-9, "friction_abs": 1e-9, "viscosity_rel": 1e-9});
    cfg.as_object_mut().unwrap().remove("scenes");
    let path = write_config(tmp.path(), &cfg);
    let out = tmp.path().join("out");
    let args = ["validate", "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()];
    assert_eq!(physbench(&args, &[]).status.code(), Some(0));
    assert!(report(&out)["failures"].as_u64().unwrap() > 0);
    let strict: Vec<&str> = args.iter().copied().chain(["--strict"]).collect();
    assert_eq!(physbench(&strict, &[]).status.code(), Some(1));
}

#[test]
fn simulate_then_estimate_recovers_gravity() {
    let tmp = tempfile::tempdir().unwrap();
    let sim_out = tmp.path().join("sim");
    run_ok(&["simulate", "--config", data("small.json").to_str().unwrap(), "--out", sim_out.to_str().unwrap()]);
    let estimates: Vec<Value> = (0..3)
        .map(|k| {
            serde_json::json!({
                "material": "free_fall",
                "bundle": sim_out.join(format!("bundles/free_fall_{k:03}")),
                "spec": {"kind": "gravity_freefall"}
            })
        })
        .collect();
    let cfg = write_config(tmp.path(), &serde_json::json!({"estimates": estimates}));
    let est_out = tmp.path().join("est");
    run_ok(&["estimate", "--config", cfg.to_str().unwrap(), "--out", est_out.to_str().unwrap(), "--strict"]);
    let r = report(&est_out);
    let row = &r["params"][0];
    assert_eq!(row["material"], "free_fall");
    assert_eq!(row["per_video"].as_array().unwrap().len(), 3);
    let g = row["mean"].as_f64().unwrap();
    assert!((g - 9.81).abs() < 0.2, "{g}");
    assert_eq!(row["in_range"], Value::Bool((9.805..=9.815).contains(&g)));
}

#[test]
fn seed_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg: Value = serde_json::from_str(&read(&data("small.json"))).unwrap();
    cfg.as_object_mut().unwrap().remove("seed");
    cfg.as_object_mut().unwrap().remove("scenes");
    cfg["experiments"].as_array_mut().unwrap().truncate(1);
    let path = write_config(tmp.path(), &cfg);
    let out = tmp.path().join("out");
    let base = ["simulate", "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()];
    let seed_of = |args: &[&str], env: &[(&str, &str)]| {
        assert!(physbench(args, env).status.success());
        report(&out)["seed"].as_u64().unwrap()
    };
    assert_eq!(seed_of(&base, &[]), 0);
    assert_eq!(seed_of(&base, &[("PHYSBENCH_SEED", "99")]), 99);
    let flagged: Vec<&str> = base.iter().copied().chain(["--seed", "5"]).collect();
    assert_eq!(seed_of(&flagged, &[("PHYSBENCH_SEED", "99")]), 5);
    assert_eq!(physbench(&base, &[("PHYSBENCH_SEED", "nope")]).status.code(), Some(2));
}

#[test]
fn published_schema_is_current() {
    let out = run_ok(&["schema"]).stdout;
    let published = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schema/config.schema.json");
    assert_eq!(String::from_utf8(out).unwrap(), read(&published));
    assert_eq!(physbench::pipeline::config_schema(), read(&published));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for entry in std::fs::read_dir(&dir).unwrap() {
        let p = entry.unwrap().path();
        let loaded = physbench::pipeline::LoadedConfig::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        loaded.config.check_common().unwrap();
    }
}

#[test]
fn calibrate_and_pose_commands() {
    use physbench::synth::{calibration_views, default_board, default_camera};
    let tmp = tempfile::tempdir().unwrap();
    let cam = default_camera();
    let views = calibration_views(&cam, &default_board(), 8, 0.0, 1).unwrap();
    let vp = tmp.path().join("views.json");
    std::fs::write(&vp, serde_json::to_string(&views).unwrap()).unwrap();
    let ip = tmp.path().join("intr.json");
    run_ok(&["calibrate", "--views", vp.to_str().unwrap(), "--image-size", "1920x1080", "--out", ip.to_str().unwrap()]);
    let k: Value = serde_json::from_str(&read(&ip)).unwrap();
    assert!((k["fx"].as_f64().unwrap() - cam.fx).abs() / cam.fx < 1e-3);

    let cp = tmp.path().join("corners.json");
    std::fs::write(&cp, serde_json::to_string(&views[0]).unwrap()).unwrap();
    let pose = run_ok(&["pose", "--corners", cp.to_str().unwrap(), "--intrinsics", ip.to_str().unwrap()]).stdout;
    let pose: Value = serde_json::from_slice(&pose).unwrap();
    assert!(pose["rms"].as_f64().unwrap() < 1e-3);
}
