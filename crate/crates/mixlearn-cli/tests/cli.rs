//! End-to-end tests of the command-line interface: each subcommand is run as
//! a real subprocess and judged on its files, stdout, and exit code.

use std::path::Path;
use std::process::{Command, Output};

fn mixlearn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mixlearn"))
        .args(args)
        .output()
        .expect("spawning the binary")
}

fn stdout_of(out: &Output) -> String {
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn effobs_prints_known_values() {
    let cases = [
        (vec!["effobs", "--class", "iid", "--n", "1000"], "1000"),
        (
            vec!["effobs", "--class", "geo-alpha-markov", "--n", "1000"],
            "144.76482730108395",
        ),
        (
            vec![
                "effobs",
                "--class",
                "geo-alpha",
                "--gamma",
                "1.0",
                "--n",
                "1000",
            ],
            "31.622776601683793",
        ),
    ];
    for (args, expect) in cases {
        let out = mixlearn(&args);
        assert_eq!(stdout_of(&out).trim(), expect, "args {args:?}");
    }
}

#[test]
fn sample_writes_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("path.csv");
    let out = mixlearn(&[
        "sample",
        "--class",
        "geo-alpha",
        "--n",
        "40",
        "--seed",
        "9",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success());

    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x1,y"));
    assert_eq!(lines.count(), 40);

    let sidecar: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(csv.with_extension("json")).unwrap())
            .unwrap();
    assert_eq!(sidecar["class"], "GeoAlpha");
    assert_eq!(sidecar["seed"], 9);
    assert_eq!(sidecar["M"], 1.0);
    assert!(sidecar["params"].is_object());
    assert!(sidecar["bayes_tag"].is_object());
    assert!(sidecar["bayes_risk"].as_f64().unwrap() >= 0.0);
}

#[test]
fn train_lssvm_writes_a_full_kernel_model() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("data.csv");
    let model_path = dir.path().join("model.json");
    mixlearn(&[
        "sample",
        "--class",
        "iid",
        "--n",
        "60",
        "--seed",
        "7",
        "--out",
        csv.to_str().unwrap(),
    ]);
    let out = mixlearn(&[
        "train",
        "--learner",
        "lssvm",
        "--sigma",
        "0.3",
        "--lambda",
        "0.001",
        "--data",
        csv.to_str().unwrap(),
        "--model-out",
        model_path.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let model: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&model_path).unwrap()).unwrap();
    assert_eq!(model["kind"], "lssvm");
    assert_eq!(model["kernel"], "gaussian");
    assert_eq!(model["sigma"], 0.3);
    assert_eq!(model["lambda"], 0.001);
    assert_eq!(model["M"], 1.0);
    assert_eq!(model["support_points"].as_array().unwrap().len(), 60);
    assert_eq!(model["coefficients"].as_array().unwrap().len(), 60);
    // The direct solver is exact up to roundoff.
    assert!(model["delta_achieved"].as_f64().unwrap() < 1e-12);
}

#[test]
fn train_qsvm_reports_its_optimization_gap() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("data.csv");
    let model_path = dir.path().join("model.json");
    mixlearn(&[
        "sample",
        "--class",
        "iid",
        "--n",
        "50",
        "--seed",
        "3",
        "--out",
        csv.to_str().unwrap(),
    ]);
    let out = mixlearn(&[
        "train",
        "--learner",
        "qsvm",
        "--sigma",
        "0.3",
        "--lambda",
        "0.01",
        "--tau",
        "0.5",
        "--data",
        csv.to_str().unwrap(),
        "--model-out",
        model_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let model: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&model_path).unwrap()).unwrap();
    assert_eq!(model["kind"], "qsvm");
    let delta = model["delta_achieved"].as_f64().unwrap();
    assert!(delta.is_finite() && delta >= 0.0 && delta < 1e-3, "{delta}");
}

#[test]
fn train_erm_reports_the_chosen_hypothesis() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("data.csv");
    let model_path = dir.path().join("model.json");
    mixlearn(&[
        "sample",
        "--class",
        "geo-alpha",
        "--n",
        "200",
        "--seed",
        "5",
        "--out",
        csv.to_str().unwrap(),
    ]);
    let out = mixlearn(&[
        "train",
        "--learner",
        "erm",
        "--data",
        csv.to_str().unwrap(),
        "--model-out",
        model_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let model: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&model_path).unwrap()).unwrap();
    assert_eq!(model["kind"], "erm");
    assert_eq!(model["kernel"], "none");
    assert!(model["support_points"].as_array().unwrap().is_empty());
    assert!(model["hypothesis"].is_object() || model["hypothesis"].is_string());
    // The demo target is a 0.8-amplitude sine and the catalog contains it,
    // so a 200-point fit should pick exactly that entry.
    assert_eq!(model["hypothesis"]["Sine"]["amplitude"], 0.8);
}

#[test]
fn train_rejects_unimplemented_kernels() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("data.csv");
    mixlearn(&[
        "sample",
        "--class",
        "iid",
        "--n",
        "20",
        "--seed",
        "1",
        "--out",
        csv.to_str().unwrap(),
    ]);
    for kernel in ["linear", "poly"] {
        let out = mixlearn(&[
            "train",
            "--learner",
            "lssvm",
            "--kernel",
            kernel,
            "--data",
            csv.to_str().unwrap(),
            "--model-out",
            dir.path().join("m.json").to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(1));
        let err = String::from_utf8_lossy(&out.stderr).to_lowercase();
        assert!(err.contains("gaussian"), "{err}");
    }
}

#[test]
fn bernstein_verify_emits_the_tail_csv() {
    let out = mixlearn(&[
        "bernstein-verify",
        "--class",
        "iid",
        "--n",
        "100",
        "--reps",
        "1000",
        "--seed",
        "2",
        "--eps",
        "0.1,0.2",
    ]);
    let text = stdout_of(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "eps,empirical_tail,wilson_upper,bound");
    assert_eq!(lines.len(), 3);
    for line in &lines[1..] {
        let fields: Vec<f64> = line.split(',').map(|f| f.parse().unwrap()).collect();
        assert_eq!(fields.len(), 4);
        let (tail, wilson) = (fields[1], fields[2]);
        assert!((0.0..=1.0).contains(&tail));
        assert!(tail <= wilson);
    }
}

#[test]
fn bound_evaluates_the_finite_set_formula() {
    let out = mixlearn(&[
        "bound",
        "--class",
        "iid",
        "--tau",
        "50",
        "--n",
        "100",
        "--covering",
        "finite-set",
        "--cardinality",
        "8",
        "--mode",
        "sum",
        "--upsilon",
        "0.25",
        "--excess",
        "0.1",
    ]);
    let json: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();

    // With theta = 1 the radius is linear in the constants and can be
    // recomputed by hand from the class constants (c_sigma = 2, c_b = 2/3).
    let cv = 64.0 * (4.0 * 2.0 * 1.0 + 2.0 / 3.0);
    let r = cv * (50.0 + (8.0f64).ln()) / 100.0 + 8.0 * (2.0 / 3.0) * 50.0 / 100.0;
    let got_r = json["r"].as_f64().unwrap();
    assert!((got_r - r).abs() < 1e-9 * r, "{got_r} vs {r}");
    assert_eq!(json["flags"]["out_of_regime"], true);

    let rhs = json["rhs"].as_f64().unwrap();
    let expect_rhs = 2.0 * 0.25 + 4.0 * 0.1 + 4.0 * r;
    assert!((rhs - expect_rhs).abs() < 1e-9 * expect_rhs);

    let conf = json["confidence"].as_f64().unwrap();
    assert!((conf - (1.0 - 8.0 * (-50.0f64).exp())).abs() < 1e-12);
}

#[test]
fn bound_clamps_in_max_mode() {
    let out = mixlearn(&[
        "bound",
        "--class",
        "iid",
        "--tau",
        "50",
        "--n",
        "100",
        "--covering",
        "finite-set",
        "--cardinality",
        "8",
        "--mode",
        "max",
    ]);
    let json: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(json["r"], 1.0);
    assert_eq!(json["flags"]["out_of_regime"], true);
}

fn rates_config(target: f64, tolerance: f64) -> String {
    format!(
        r#"
n_grid = [100, 200, 400]
repetitions = 3
mc_eval = 2000
master_seed = 11
target_exponent = {target}
tolerance = {tolerance}

[spec]
class = "Iid"
b = 1.0
c = 0.0
gamma = 1.0

[spec.params.Iid]
dim = 1

[model]
s_noise = 0.2
m_bound = 1.0
quantile_level = 0.5

[model.target.Sine]
amplitude = 0.8

[loss]
kind = "LeastSquares"
m_bound = 1.0
scale = 0.25

[learner]
kind = "kernel_least_squares"

[kernel.Gaussian]
sigma = 0.3

[schedule]
kind = "gaussian_smoothness"
t = 1.0
"#
    )
}

#[test]
fn rates_pass_writes_report_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.toml");
    let report = dir.path().join("report.json");
    std::fs::write(&config, rates_config(2.0 / 3.0, 0.6)).unwrap();
    let out = mixlearn(&[
        "rates",
        "--config",
        config.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout_of(&out).contains("verdict: pass"));

    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["verdict"], "pass");
    assert_eq!(json["rows"].as_array().unwrap().len(), 3);
    assert!(json["fitted_slope"].as_f64().unwrap() < 0.0);

    let csv = std::fs::read_to_string(report.with_extension("csv")).unwrap();
    assert!(csv.starts_with("n,n_eff,lambda,sigma,mean_excess,stderr\n"));
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn rates_fail_exits_two_and_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("exp.toml");
    let report = dir.path().join("report.json");
    std::fs::write(&config, rates_config(0.05, 0.01)).unwrap();
    let out = mixlearn(&[
        "rates",
        "--config",
        config.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    // The report is still written even when the verdict fails.
    assert!(Path::new(&report).exists());

    let missing = dir.path().join("nope.toml");
    let out = mixlearn(&[
        "rates",
        "--config",
        missing.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}
