use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lms_core::io::read_matrix_path;
use serde_json::Value;

const TORUS_SIM: &str = r#"
n = 60
p = 80
sigma = 0.5
kernel = { family = "rbf", scale = 1.0 }
space = { type = "torus_r3", major_radius = 0.36, minor_radius = 0.18 }
"#;

fn lms(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_lms"));
    cmd.args(args).env_remove("LMS_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn run_ok(sub: &str, config: &Path, out: &Path, extra: &[&str]) -> Value {
    let mut args = vec![sub, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = lms(&args, &[]);
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

/// Only the given entries remain in `dir`, so no staging directory leaked.
fn assert_only(dir: &Path, names: &[&str]) {
    let mut found: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    found.sort();
    let mut want: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    want.sort();
    assert_eq!(found, want);
}

#[test]
fn simulate_writes_matrix_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sim.toml", &format!("seed = 4\n[simulate]\n{TORUS_SIM}"));
    let out = dir.path().join("run");
    let m = run_ok("simulate", &cfg, &out, &[]);

    let text = fs::read_to_string(out.join("Y.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 60);
    assert!(lines.iter().all(|l| l.split(',').count() == 80));
    assert_eq!(read_matrix_path(&out.join("Y.csv")).unwrap().shape(), (60, 80));

    assert_eq!(m["command"], "simulate");
    assert_eq!(m["seed"], 4);
    assert_eq!(m["config"]["simulate"]["seed"], 4);
    assert_eq!(m["config_sha256"].as_str().unwrap().len(), 64);
    assert!(m["wall_time_s"].as_f64().unwrap() >= 0.0);
    assert!(m["versions"]["lms"].is_string());
    let outputs: Vec<&str> = m["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert_eq!(outputs, ["Y.csv", "Z.csv"]);
}

#[test]
fn seed_flag_controls_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sim.toml", &format!("[simulate]\n{TORUS_SIM}"));
    let read = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let m = run_ok("simulate", &cfg, &out, &["--seed", seed]);
        assert_eq!(m["seed"].as_u64().unwrap().to_string(), seed);
        fs::read_to_string(out.join("Y.csv")).unwrap()
    };
    let a = read("a", "7");
    let b = read("b", "7");
    let c = read("c", "8");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn manifest_config_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sim.toml", &format!("[simulate]\n{TORUS_SIM}"));
    let first = dir.path().join("first");
    let m = run_ok("simulate", &cfg, &first, &["--seed", "11"]);

    // The config echo alone is enough to repeat the run.
    let echo: toml::Value = serde_json::from_value(m["config"].clone()).unwrap();
    let again = write_config(dir.path(), "again.toml", &toml::to_string(&echo).unwrap());
    let second = dir.path().join("second");
    run_ok("simulate", &again, &second, &[]);
    assert_eq!(
        fs::read(first.join("Y.csv")).unwrap(),
        fs::read(second.join("Y.csv")).unwrap()
    );
}

#[test]
fn threads_from_flag_and_env() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sim.toml", &format!("[simulate]\n{TORUS_SIM}"));
    let out = dir.path().join("flag");
    let m = run_ok("simulate", &cfg, &out, &["--threads", "3"]);
    assert_eq!(m["threads"], 3);

    let out = dir.path().join("env");
    let o = lms(
        &["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()],
        &[("LMS_THREADS", "2")],
    );
    assert!(o.status.success());
    let m: Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["threads"], 2);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cases = [
        ("unknown.toml", "bogus = 1\n".to_string()),
        ("missing.toml", "[embed]\nr = 2\ndata = { path = \"nope.csv\" }\n".to_string()),
        ("nosection.toml", format!("[simulate]\n{TORUS_SIM}")),
        ("bothsources.toml", "[embed]\nr = 2\ndata = {}\n".to_string()),
        ("badsim.toml", "[simulate]\nn = 5\np = 0\nsigma = 1.0\nkernel = { family = \"rbf\", scale = 1.0 }\nspace = { type = \"sphere\", ambient_dim = 3 }\n".to_string()),
    ];
    for (name, body) in cases {
        let cfg = write_config(dir.path(), name, &body);
        let sub = if name == "badsim.toml" { "simulate" } else { "embed" };
        let o = lms(&[sub, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], &[]);
        assert_eq!(o.status.code(), Some(2), "{name}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(!out.exists(), "{name} left outputs behind");
    }
    let o = lms(&["embed", "--config", dir.path().join("absent.toml").to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));
    let o = lms(&["embed"], &[]);
    assert_eq!(o.status.code(), Some(2));
    let o = lms(&["frobnicate", "--config", "x.toml"], &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("zero.csv"), "0,0,0\n0,0,0\n0,0,0\n0,0,0\n").unwrap();
    let cfg = write_config(dir.path(), "z.toml", "[embed]\nr = 1\ndata = { path = \"zero.csv\" }\n");
    let out = dir.path().join("run");
    let o = lms(&["embed", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.exists());
    assert_only(dir.path(), &["zero.csv", "z.toml"]);
}

#[test]
fn partial_outputs_removed_on_failure() {
    // scores.csv is staged before `align` rejects file data.
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("y.csv"), "1,2,3\n4,5,7\n2,1,0\n3,3,1\n").unwrap();
    let cfg = write_config(
        dir.path(),
        "e.toml",
        "[embed]\nr = 2\nalign = true\ndata = { path = \"y.csv\" }\n",
    );
    let out = dir.path().join("run");
    let o = lms(&["embed", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert_only(dir.path(), &["y.csv", "e.toml"]);
}

#[test]
fn embed_file_with_header() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("y.csv"), "a,b,c\n1,2,3\n4,5,7\n2,1,0\n3,3,1\n").unwrap();
    let cfg = write_config(dir.path(), "e.toml", "[embed]\nr = 2\ndata = { path = \"y.csv\" }\n");
    let out = dir.path().join("run");
    let m = run_ok("embed", &cfg, &out, &[]);
    assert_eq!(m["results"]["r"], 2);
    let scores = fs::read_to_string(out.join("scores.csv")).unwrap();
    assert_eq!(scores.lines().next(), Some("pc1,pc2"));
    assert_eq!(scores.lines().count(), 5);
    let eig = fs::read_to_string(out.join("eigenvalues.csv")).unwrap();
    assert_eq!(eig.lines().next(), Some("index,eigenvalue"));
}

#[test]
fn analysis_subcommands_on_small_torus() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(
        r#"
[select_dim]
method = "both"
r_max = 8
[select_dim.data.sim]
{TORUS_SIM}
[tda]
points = "latent"
[tda.data.sim]
{TORUS_SIM}
[geodesic]
r = 5
[geodesic.data.sim]
{TORUS_SIM}
[predict]
targets = {{ from = "torus_angles" }}
r_grid = [1, 3, 5]
n_splits = 5
[predict.data.sim]
{TORUS_SIM}
"#
    );
    let cfg = write_config(dir.path(), "all.toml", &body);

    let m = run_ok("select-dim", &cfg, &dir.path().join("sel"), &[]);
    let r = m["results"]["wasserstein_r"].as_u64().unwrap();
    assert!((1..=8).contains(&r));
    let curve = fs::read_to_string(dir.path().join("sel/wasserstein_curve.csv")).unwrap();
    assert_eq!(curve.lines().next(), Some("r,d_r"));
    assert_eq!(curve.lines().count(), 9);
    assert!(dir.path().join("sel/elbow_profile.csv").exists());

    let m = run_ok("tda", &cfg, &dir.path().join("tda"), &[]);
    assert_eq!(m["results"]["points"], 60);
    let diag = fs::read_to_string(dir.path().join("tda/diagram.csv")).unwrap();
    assert_eq!(diag.lines().next(), Some("dim,birth,death,flagged"));

    let m = run_ok("geodesic", &cfg, &dir.path().join("geo"), &[]);
    assert!(m["results"]["slope"].as_f64().unwrap() > 0.0);
    let pairs = fs::read_to_string(dir.path().join("geo/geodesics.csv")).unwrap();
    assert_eq!(pairs.lines().count(), 1 + 60 * 59 / 2);

    let m = run_ok("predict", &cfg, &dir.path().join("pred"), &[]);
    assert_eq!(m["results"]["metric"], "one_minus_r2");
    let curve = fs::read_to_string(dir.path().join("pred/error_curve.csv")).unwrap();
    assert_eq!(curve.lines().next(), Some("r,metric,mean,p5,p95,target_name"));
    assert_eq!(curve.lines().count(), 1 + 6);
}

#[test]
fn tda_cap_and_subsample() {
    let dir = tempfile::tempdir().unwrap();
    let sim = TORUS_SIM.replace("n = 60", "n = 50");
    let strict = write_config(dir.path(), "s.toml", &format!("[tda]\ncap = 20\n[tda.data.sim]\n{sim}"));
    let out = dir.path().join("run");
    let o = lms(&["tda", "--config", strict.to_str().unwrap(), "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());

    let sub = write_config(
        dir.path(),
        "sub.toml",
        &format!("[tda]\ncap = 20\nsubsample = true\n[tda.data.sim]\n{sim}"),
    );
    let m = run_ok("tda", &sub, &out, &[]);
    assert_eq!(m["results"]["points"], 20);
    assert_eq!(m["results"]["subsampled"], true);
    let rows = fs::read_to_string(out.join("subsample.csv")).unwrap();
    assert_eq!(rows.lines().count(), 21);
}

#[test]
fn predict_classification_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let mut y = String::new();
    let mut labels = String::from("label\n");
    for i in 0..40 {
        let c = i % 2;
        let base = if c == 0 { 0.0 } else { 5.0 };
        y.push_str(&format!("{},{},{}\n", base + (i as f64) * 0.01, base, 1.0));
        labels.push_str(&format!("{c}\n"));
    }
    fs::write(dir.path().join("y.csv"), y).unwrap();
    fs::write(dir.path().join("labels.csv"), labels).unwrap();
    let cfg = write_config(
        dir.path(),
        "p.toml",
        "[predict]\ndata = { path = \"y.csv\" }\ntargets = { from = \"file\", path = \"labels.csv\", task = \"classification\" }\nr_grid = [1, 2]\nn_splits = 10\nk = 3\n",
    );
    let m = run_ok("predict", &cfg, &dir.path().join("run"), &[]);
    assert_eq!(m["results"]["metric"], "misclassification_rate");
    assert_eq!(m["results"]["minima"][0]["mean"].as_f64().unwrap(), 0.0);
}

#[test]
fn reproduce_fig5_headers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "f.toml", "[reproduce]\ntarget = \"fig5\"\n");
    let out = dir.path().join("run");
    let m = run_ok("reproduce", &cfg, &out, &["--seed", "1"]);
    assert_eq!(m["results"]["n"], 200);
    let scores = fs::read_to_string(out.join("fig5_scores.csv")).unwrap();
    assert_eq!(scores.lines().next(), Some("atom,s1,s2,s3"));
    assert_eq!(scores.lines().count(), 201);
    let phi = fs::read_to_string(out.join("fig5_phi.csv")).unwrap();
    assert_eq!(phi.lines().count(), 4);
}

#[test]
fn reproduce_fig4_grid_schema() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "f.toml", "[reproduce]\ntarget = \"fig4\"\nreplicates = 2\n");
    let out = dir.path().join("run");
    run_ok("reproduce", &cfg, &out, &[]);
    let grid = fs::read_to_string(out.join("fig4_grid.csv")).unwrap();
    let mut lines = grid.lines();
    assert_eq!(lines.next(), Some("n,p,mean_pairwise_error,mean_uniform_error,replicates"));
    let cells: Vec<(String, String)> = lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[1].to_string())
        })
        .collect();
    assert_eq!(cells.len(), 9);
    assert!(cells.contains(&("400".into(), "5000".into())));
}
