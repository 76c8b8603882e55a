use std::path::Path;
use std::process::{Command, Output};

fn lab(args: &[&str]) -> Output {
    lab_env(args, &[])
}

fn lab_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_hubbard-lab"));
    cmd.args(args).env_remove("HUBBARD_LAB_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(lab(&["--help"]).status.code(), Some(0));
    let none = lab(&[]);
    assert_eq!(none.status.code(), Some(1));
    assert!(stderr(&none).contains("Usage"));
    let missing = lab(&["bound", "--rho-up", "1e-4"]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(stderr(&missing).contains("--rho-down"));
    let no_value = lab(&["ed", "--n-up"]);
    assert_eq!(no_value.status.code(), Some(1));
    assert_eq!(lab(&["nonsense"]).status.code(), Some(1));
}

#[test]
fn invariant_failures_exit_two() {
    let o = lab(&["scatter", "--U", "-1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("on-site repulsion must be non-negative"));
    let o = lab(&["bound", "--U", "inf", "--delta", "10", "--strict", "--sweep", "1e-12:1e-12:1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("cutoff_loss"), "{}", stderr(&o));
}

#[test]
fn bound_sweep_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let o = lab(&["bound", "--U", "1", "--sweep", "1e-5:1e-2:7", "-o", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers().unwrap().clone();
    assert_eq!(&header[0], "format_version");
    assert!(header.iter().any(|h| h == "cutoff_loss"));
    let rows: Vec<_> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 7);
    assert!(rows.iter().all(|r| &r[0] == "1"));
    let dump: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("sweep.constants.json")).unwrap()).unwrap();
    assert!(dump["constants"]["gamma"]["value"].as_f64().unwrap() > 0.126);
}

#[test]
fn polarization_curve_rows() {
    let o = lab(&["bound", "--polarization", "--sweep", "1e-4:1e-2:5", "--format", "json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = json(&o);
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 5);
    let p: Vec<f64> = rows.iter().map(|r| r["polarization_bound"].as_f64().unwrap()).collect();
    assert!(p.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let o = lab(&["var", "--method", "sampled", "--steps", "20000", "--seed", "7", "-o", path.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read(path).unwrap()
    };
    assert_eq!(run("a.json"), run("b.json"));
}

#[test]
fn json_reports_parse() {
    let o = lab(&["var", "--sites", "3", "--n-up", "1", "--n-down", "1", "--epsilon", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["report"]["method"], "exhaustive");
    assert_eq!(v["at_epsilon"]["epsilon"].as_f64(), Some(2.0));
    let text = stdout(&o);
    assert!(text.contains("e0") || text.contains("e-"), "floats use exponent notation");

    let o = lab(&["ed", "--sites", "2", "--n-up", "1", "--n-down", "1", "--U", "0"]);
    let e = json(&o)["energy"].as_f64().unwrap();
    // Two particles in the lowest mode of a 2³ Dirichlet box: 2·3·(2 − 2cos(π/3)).
    assert!((e - 6.0).abs() < 1e-9, "{e}");

    for args in [
        vec!["scatter", "--radius", "10"],
        vec!["free", "--rho-up", "0.01", "--rho-down", "0.02"],
        vec!["lemmas"],
        vec!["trial", "--U", "inf"],
        vec!["ed", "--scan", "2"],
    ] {
        let o = lab(&args);
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
        json(&o);
    }
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

#[test]
fn config_file_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    write(&cfg, "[global]\nseed = 3\n\n[ed]\nsites = [2]\nn_up = 1\nn_down = 1\nu = \"0\"\n");
    let o = lab(&["ed", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(json(&o)["dimension"], 64);
    let o = lab(&["ed", "--config", cfg.to_str().unwrap(), "--n-down", "0"]);
    assert_eq!(json(&o)["dimension"], 8);

    write(&cfg, "[ed]\nsites = [2]\nbogus = 1\n");
    let o = lab(&["ed", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bogus"));
    write(&cfg, "[nope]\n");
    assert_eq!(lab(&["ed", "--config", cfg.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn thread_count_from_environment() {
    let o = lab_env(&["ed", "--sites", "2"], &[("HUBBARD_LAB_THREADS", "2")]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = lab_env(&["ed", "--sites", "2"], &[("HUBBARD_LAB_THREADS", "many")]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn csv_only_for_bound() {
    assert_eq!(lab(&["free", "--format", "csv"]).status.code(), Some(1));
}

#[test]
fn quick_verification_passes() {
    let o = lab(&["verify-all", "--quick"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = json(&o);
    assert_eq!(v["criteria"].as_array().unwrap().len(), 10);
    let smoke = v["smoke"].as_array().unwrap();
    for command in ["scatter", "free", "lemmas", "trial", "ed", "var", "bound"] {
        assert!(smoke.iter().any(|s| s["command"] == command && s["passed"] == true), "{command}");
    }
}

#[test]
fn flag_aliases_and_selectors() {
    let o = lab(&["scatter", "--U", "1", "--tab-radius", "10"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v = json(&o);
    assert!((v["a"].as_f64().unwrap() - 0.0353249).abs() < 1e-6);
    assert!(v["residual_max"].as_f64().unwrap() < 1e-10);
    assert_eq!(v["flux_checks"].as_array().unwrap().len(), 3);

    let o = lab(&["lemmas", "--which", "1", "--n", "3", "--sites", "4", "--seed", "5"]);
    let v = json(&o);
    assert_eq!(v["passed"], true);
    assert!(v["matrix_norm"].is_null() && v["cutoff_loss"].is_null());
    assert_eq!(v["identities"].as_array().unwrap().len(), 5);
    assert_eq!(lab(&["lemmas", "--which", "4"]).status.code(), Some(1));

    let o = lab(&["trial", "--U", "inf", "--R", "3", "--s", "2", "--sites", "4", "--n-up", "3", "--n-down", "2"]);
    let support = &json(&o)["support"];
    assert_eq!(support["passed"], true);
    assert!(support["nonzero"].as_u64().unwrap() > 0);

    let o = lab(&["var", "--R", "2", "--n-up", "1", "--n-down", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
}
