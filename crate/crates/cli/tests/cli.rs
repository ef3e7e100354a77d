//! End-to-end CLI tests: exit codes, file formats and the determinism
//! contract for reports.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sparpde"))
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("sparpde-cli-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

const L2_SWEEP_CONFIG: &str = r#"
[model]
kind = "affine"
abar = { constant = 1.0, cells = 1 }
psi = [{ constant = 0.5, cells = 1 }]

[fem]
degree = 1
elements = 256

[expansion]
kind = "legendre"
max_degree = 10
quad_points = 8

[allocation]
mode = "optimal"
s = 1.0
t = 1.0

[sweep]
schedule = [1, 2, 3, 4, 6, 8, 10]
estimator = "l2-quadrature"
seed = 99
"#;

#[test]
fn rates_subcommand_prints_known_values() {
    let out = bin()
        .args([
            "rates",
            "--setting",
            "l2",
            "--s",
            "1.0",
            "--t",
            "1.0",
            "--p-x",
            "1.0",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let rate = json["rate"].as_f64().unwrap();
    assert!((rate - 2.0 / 3.0).abs() < 1e-12);
    assert_eq!(json["regime"], "mixed");

    let out = bin()
        .args([
            "rates",
            "--wavelet-alpha",
            "1.5",
            "--m",
            "1",
            "--mode",
            "linear",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((json["wavelet_rate"].as_f64().unwrap() - 0.75).abs() < 1e-12);
}

#[test]
fn invalid_config_exits_two() {
    let dir = temp_dir("invalid");
    let config = write_config(&dir, "bad.toml", "[model]\nkind = \"nonsense\"\n");
    let out = bin()
        .args(["taylor", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // structurally valid TOML with an unknown estimator also exits 2
    let bad_estimator = L2_SWEEP_CONFIG.replace("l2-quadrature", "monte-zeldovich");
    let config = write_config(&dir, "bad2.toml", &bad_estimator);
    let out = bin()
        .args(["sweep", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.join("out2"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_reports_are_deterministic() {
    let dir = temp_dir("determinism");
    let config = write_config(&dir, "sweep.toml", L2_SWEEP_CONFIG);
    for tag in ["a", "b"] {
        let out = bin()
            .args(["sweep", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(dir.join(tag))
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let csv_a = fs::read(dir.join("a/sweep.csv")).unwrap();
    let csv_b = fs::read(dir.join("b/sweep.csv")).unwrap();
    assert_eq!(csv_a, csv_b);
    let plot_a = fs::read(dir.join("a/plotdata.csv")).unwrap();
    let plot_b = fs::read(dir.join("b/plotdata.csv")).unwrap();
    assert_eq!(plot_a, plot_b);

    let mut json_a: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.join("a/sweep.json")).unwrap()).unwrap();
    let mut json_b: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.join("b/sweep.json")).unwrap()).unwrap();
    // timestamps live in a dedicated field outside the determinism contract
    json_a["timestamp_unix"] = serde_json::Value::Null;
    json_b["timestamp_unix"] = serde_json::Value::Null;
    assert_eq!(json_a, json_b);
    // the JSON report embeds the resolved config
    assert_eq!(json_a["config"]["expansion"]["kind"], "legendre");
    assert_eq!(json_a["seed"], 99);
}

#[test]
fn sweep_threads_do_not_change_results() {
    let dir = temp_dir("threads");
    let config = write_config(&dir, "sweep.toml", L2_SWEEP_CONFIG);
    for (tag, threads) in [("t1", "1"), ("t4", "4")] {
        let out = bin()
            .args(["sweep", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(dir.join(tag))
            .args(["--threads", threads])
            .output()
            .unwrap();
        assert!(out.status.success());
    }
    assert_eq!(
        fs::read(dir.join("t1/sweep.csv")).unwrap(),
        fs::read(dir.join("t4/sweep.csv")).unwrap()
    );
}

#[test]
fn failing_check_exits_three() {
    let dir = temp_dir("check");
    let config_text = format!("{L2_SWEEP_CONFIG}\n[check]\nmin_slope = 99.0\n");
    let config = write_config(&dir, "sweep.toml", &config_text);
    let out = bin()
        .args(["sweep", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.join("out"))
        .arg("--check")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    // without --check the same run exits zero but records the failure
    let out = bin()
        .args(["sweep", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.join("out2"))
        .output()
        .unwrap();
    assert!(out.status.success());
    let json: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.join("out2/sweep.json")).unwrap()).unwrap();
    assert_eq!(json["check"]["passed"], false);
}

#[test]
fn taylor_command_writes_diagnostics() {
    let dir = temp_dir("taylor");
    let config = write_config(
        &dir,
        "taylor.toml",
        r#"
[model]
kind = "wavelet"
alpha = 1.5
theta_target = 0.6
levels = 2

[fem]
degree = 1
elements = 64

[expansion]
kind = "taylor"
max_degree = 3

[weights]
beta = 1.0
scale = 0.1
"#,
    );
    let out = bin()
        .args(["taylor", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.join("out/expansion.csv")).unwrap();
    assert!(csv.starts_with("index,degree,norm_v,norm_w"));
    // zero index row is present with both norms
    assert!(csv.lines().any(|l| l.starts_with("[],0,")));
    let json: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.join("out/summability.json")).unwrap()).unwrap();
    let theta = json["theta"].as_f64().unwrap();
    assert!((theta - 0.6).abs() < 1e-10);
    let kappa = json["kappa"].as_f64().unwrap();
    assert!((kappa - 0.6 / 1.4).abs() < 1e-10);
    assert!(json["layers"].as_array().unwrap().len() == 4);
    // t0 dump has boundary rows
    let t0 = fs::read_to_string(dir.join("out/t0.csv")).unwrap();
    assert!(t0.starts_with("x,value"));
    assert!(t0.trim_end().ends_with("1,0"));
}

#[test]
fn hermite_command_reports_rescaling() {
    let dir = temp_dir("hermite");
    let config = write_config(
        &dir,
        "hermite.toml",
        r#"
[model]
kind = "lognormal"
psi = [
  { values = [0.0, 0.3, 0.0] },
  { constant = 0.2, cells = 2 },
]

[fem]
degree = 1
elements = 64

[expansion]
kind = "hermite"
max_degree = 3
quad_points = 6
"#,
    );
    let out = bin()
        .args(["hermite", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let json: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.join("out/parseval.json")).unwrap()).unwrap();
    assert!(json["gap"].as_f64().unwrap() >= -1e-10);
    assert_eq!(json["clamp_events"], 0);
    let rescaling = json["rescaling"].as_array().unwrap();
    assert_eq!(rescaling.len(), 2);
    for row in rescaling {
        assert!(row["k_after"].as_f64().unwrap() < row["target"].as_f64().unwrap());
    }
}

#[test]
fn allocate_command_writes_plan() {
    let dir = temp_dir("allocate");
    let config = write_config(
        &dir,
        "alloc.toml",
        r#"
[model]
kind = "affine"
abar = { constant = 1.0, cells = 1 }
psi = [{ constant = 0.5, cells = 1 }]

[fem]
degree = 1
elements = 128

[expansion]
kind = "taylor"
max_degree = 8

[allocation]
mode = "optimal"
s = 1.0
t = 1.0
n = 4
"#,
    );
    let out = bin()
        .args(["allocate", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.join("out/plan.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("index,norm_x,dofs_real,dofs_int"));
    assert_eq!(lines.count(), 4);
}

#[test]
fn joint_command_runs() {
    let dir = temp_dir("joint");
    let config = write_config(
        &dir,
        "joint.toml",
        r#"
[model]
kind = "affine"
abar = { constant = 1.0, cells = 2 }
psi = [
  { cell_values = [0.4, 0.0] },
  { cell_values = [0.0, 0.3] },
]

[fem]
degree = 1
elements = 64

[expansion]
kind = "legendre"
max_degree = 3
quad_points = 5

[allocation]
mode = "joint"
s = 1.0
t = 1.0

[sweep]
schedule = [4, 8, 16, 32, 64, 128, 256]
estimator = "l2-quadrature"
"#,
    );
    let out = bin()
        .args(["joint", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.join("out/sweep.csv")).unwrap();
    let errors: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    for w in errors.windows(2) {
        assert!(w[1] <= w[0] + 1e-12);
    }
}
