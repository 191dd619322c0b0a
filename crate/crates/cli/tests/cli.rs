use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fjr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fjr"))
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr_json(o: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&o.stderr);
    let line = text.lines().last().unwrap_or_default();
    serde_json::from_str(line).unwrap_or_else(|e| panic!("{e}: {text}"))
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn missing_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = fjr(&["run", "no/such/file.toml", "--out", s(dir.path())]);
    assert_eq!(code(&o), 2);
    let j = stderr_json(&o);
    assert_eq!(j["kind"], "missing_input");
    assert_eq!(j["key"], "no/such/file.toml");
}

#[test]
fn unknown_key_exits_2_naming_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "[controller]\nkp = 50.0\nki = 1.0\n");
    let out = dir.path().join("out");
    let o = fjr(&["run", &cfg, "--out", s(&out)]);
    assert_eq!(code(&o), 2);
    assert_eq!(stderr_json(&o)["key"], "controller.ki");
}

#[test]
fn unknown_preset_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "[scenario]\npreset = \"fig9z\"\n");
    let o = fjr(&["run", &cfg, "--out", s(dir.path())]);
    assert_eq!(code(&o), 2);
    assert_eq!(stderr_json(&o)["key"], "scenario.preset");
}

#[test]
fn blow_up_exits_3_with_time() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "[friction]\nmodel = \"none\"\n[scenario]\ndt = 0.05\nduration = 100.0\n",
    );
    let out = dir.path().join("out");
    let o = fjr(&["run", &cfg, "--out", s(&out)]);
    assert_eq!(code(&o), 3);
    let j = stderr_json(&o);
    let t = j["t"].as_f64().unwrap();
    assert!(t > 0.0 && t <= 100.0, "{t}");
    let file: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("failure.json")).unwrap()).unwrap();
    assert_eq!(file, j);
}

#[test]
fn fig4a_run_oscillates_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let o = fjr(&["run", "fig4a", "--out", s(dir.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("fig4a.json")).unwrap()).unwrap();
    assert_eq!(meta["diagnostics"]["oscillation"]["flag"], true);

    let text = fs::read_to_string(dir.path().join("fig4a.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), meta["columns"].as_array().unwrap().len());
    assert!(header.contains(&"theta_ideal"));
    let mut rows = 0;
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), header.len());
        for f in fields {
            let x: f64 = f.parse().unwrap();
            assert!(x.is_finite());
            assert_eq!(format!("{x:.16e}"), f);
        }
        rows += 1;
    }
    assert_eq!(rows, meta["samples"].as_u64().unwrap() as usize);

    // the sidecar alone reproduces the trace
    let again = dir.path().join("again");
    let o = fjr(&["run", s(&dir.path().join("fig4a.json")), "--out", s(&again)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(again.join("fig4a.csv")).unwrap(), text.as_bytes());
}

#[test]
fn verify_reports_riccati_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let o = fjr(&["run", "verify", "--out", s(dir.path())]);
    assert_eq!(code(&o), 0);
    let stdout = String::from_utf8_lossy(&o.stdout);
    let riccati: Vec<&str> = stdout.lines().filter(|l| l.contains("riccati")).collect();
    assert!(!riccati.is_empty());
    let checks: Vec<serde_json::Value> =
        serde_json::from_str(&fs::read_to_string(dir.path().join("verify.json")).unwrap()).unwrap();
    for c in checks.iter().filter(|c| c["suite"] == "riccati") {
        assert!(c["value"].as_f64().unwrap() <= 1e-9, "{c}");
    }
    assert!(riccati.iter().all(|l| l.starts_with("PASS")));
    assert!(dir.path().join("verify.csv").exists());
}

#[test]
fn single_value_sweep_matches_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "[scenario]\npreset = \"fig4b\"\nduration = 1.0\n",
    );
    let run_dir = dir.path().join("run");
    let sweep_dir = dir.path().join("sweep");
    assert_eq!(code(&fjr(&["run", &cfg, "--out", s(&run_dir)])), 0);
    let o = fjr(&[
        "sweep",
        &cfg,
        "--param",
        "observer.L",
        "--values",
        "50",
        "--out",
        s(&sweep_dir),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        fs::read(run_dir.join("fig4b.csv")).unwrap(),
        fs::read(sweep_dir.join("fig4b_observer.L_50.csv")).unwrap()
    );
    let summary = fs::read_to_string(sweep_dir.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 2);
    assert!(summary.lines().nth(1).unwrap().contains(",ok,"));
}

#[test]
fn inadmissible_sweep_values_are_rejected_individually() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.toml",
        "[scenario]\npreset = \"fig4a\"\nduration = 0.5\n",
    );
    let out = dir.path().join("out");
    // L_p = 10, so L_i >= 50 violates L_p^2 > 2 L_i
    let o = fjr(&[
        "sweep",
        &cfg,
        "--param",
        "observer.L_i",
        "--values",
        "25,50,60",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let mut r = csv::Reader::from_path(out.join("summary.csv")).unwrap();
    let status: Vec<(f64, String)> = r
        .records()
        .map(|rec| {
            let rec = rec.unwrap();
            (rec[0].parse().unwrap(), rec[1].to_string())
        })
        .collect();
    assert_eq!(
        status,
        vec![
            (25.0, "ok".into()),
            (50.0, "rejected".into()),
            (60.0, "rejected".into())
        ]
    );
    assert!(out.join("fig4a_observer.L_i_25.csv").exists());
    assert!(!out.join("fig4a_observer.L_i_50.csv").exists());
}

#[test]
fn sweep_with_every_value_rejected_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = fjr(&[
        "sweep",
        "fig4a",
        "--param",
        "observer.L_i",
        "--values",
        "50",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code(&o), 2);
    assert!(dir.path().join("summary.csv").exists());
}

#[test]
fn cli_overrides_are_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let o = fjr(&[
        "run",
        "fig4c",
        "--out",
        s(dir.path()),
        "--duration",
        "0.5",
        "--dt",
        "5e-6",
        "--seed",
        "7",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("fig4c.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["duration"], 0.5);
    assert_eq!(meta["config"]["dt"], 5e-6);
    assert_eq!(meta["config"]["stride"], 200);
    assert_eq!(meta["config"]["seed"], 7);
    let o = fjr(&["run", "fig4c", "--out", s(dir.path()), "--dt", "1e-3"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn motivating_writes_both_traces() {
    let dir = tempfile::tempdir().unwrap();
    let o = fjr(&["run", "motivating", "--out", s(dir.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "motivating.csv",
        "motivating.json",
        "motivating-none.csv",
        "motivating-none.json",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("motivating.json")).unwrap())
            .unwrap();
    assert!(meta["report"]["first_breakaway_force"].as_f64().is_some());
}
