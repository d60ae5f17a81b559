use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
run_id = "tiny"

[system]
name = "van_der_pol"

[data]
count = 2000
seed = 4
eval_per_axis = 21
lipschitz_samples = 500

[net]
m = 6

[train]
epochs = 4
seed = 4

[sim]
h = 0.01
T = 2.0
initial = [[1.0, 0.0], [-2.0, 1.0]]

[analysis]
taus = [1e6, 1e3]
tau_T = 2.0
potential_per_axis = 21
"#;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctrnn-synth"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = cli(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn recipes_are_listed() {
    let out = ok(&["recipes"]);
    let names: Vec<&str> = out.lines().collect();
    assert_eq!(names.len(), 8);
    for n in [
        "example1_fixed_point",
        "example5_duffing",
        "example6_lorenz",
    ] {
        assert!(names.contains(&n));
    }
}

#[test]
fn stepwise_commands_build_a_run_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("tiny.toml");
    fs::write(&config, TINY).unwrap();
    let out = tmp.path().join("runs");
    let printed = ok(&["train", "--config", s(&config), "--out", s(&out)]);
    let dir = out.join("tiny");
    assert_eq!(printed.trim(), s(&dir));
    assert!(dir.join("model.json").is_file() && dir.join("field_grid.csv").is_file());

    ok(&["synth", s(&dir)]);
    assert_eq!(json(&dir.join("rnn.json"))["kind"], "rnn");
    ok(&["simulate", s(&dir)]);
    assert!(dir.join("tiny__rnn-1.csv").is_file());
    let metrics: serde_json::Value = serde_json::from_str(&ok(&["analyze", s(&dir)])).unwrap();
    assert!(metrics["e_l"].is_number() || metrics["e_l"].is_null());
    assert!(metrics["e_orb"].as_f64().unwrap() >= 0.0);
    assert_eq!(json(&dir.join("metrics.json"))["run_id"], "tiny");
    assert!(dir.join("tau_sweep").join("tiny__tau-1e3-1.csv").is_file());

    ok(&["sweep-tau", s(&dir), "--taus", "50,5e5"]);
    assert!(dir.join("tau_sweep").join("tiny__tau-5e1-0.csv").is_file());
    assert!(dir.join("tau_sweep").join("tiny__tau-5e5-1.csv").is_file());

    ok(&["synth", s(&dir), "--tau", "1e4"]);
    assert_eq!(json(&dir.join("rnn.json"))["tau"], 1e4);
    assert!(fs::read_to_string(dir.join("config.toml"))
        .unwrap()
        .contains("tau = 10000.0"));
}

#[test]
fn synth_and_analyze_an_untrained_net() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("raw");
    fs::create_dir_all(&dir).unwrap();
    fs::write(
        dir.join("config.toml"),
        TINY.replace("run_id = \"tiny\"", "run_id = \"raw\""),
    )
    .unwrap();
    let model = serde_json::json!({
        "n": 2,
        "m": 3,
        "activation": "tanh",
        "A": [[0.4, -0.3, 0.2], [0.1, 0.5, -0.6]],
        "B": [[0.7, -0.2], [0.3, 0.9], [-0.8, 0.1]],
        "theta": [0.05, -0.1, 0.2],
        "provenance": {
            "field": "van_der_pol",
            "params": {},
            "seed": 0,
            "d_count": 0,
            "final_mse": 0.0,
            "e_max": null,
            "trainer": "none"
        }
    });
    fs::write(
        dir.join("model.json"),
        serde_json::to_string_pretty(&model).unwrap(),
    )
    .unwrap();
    ok(&["synth", s(&dir)]);
    let metrics: serde_json::Value = serde_json::from_str(&ok(&["analyze", s(&dir)])).unwrap();
    let e_l = metrics["e_l"].as_f64().unwrap_or(f64::INFINITY);
    assert!(e_l >= metrics["e_orb"].as_f64().unwrap() * metrics["T"].as_f64().unwrap());
    assert!(dir.join("raw__true-0.csv").is_file());
}

#[test]
fn fixed_point_example_meets_its_orbit_target() {
    let tmp = tempfile::tempdir().unwrap();
    let printed = ok(&["example", "example1_fixed_point", "--out", s(tmp.path())]);
    let dir = Path::new(printed.trim());
    let m = json(&dir.join("metrics.json"));
    assert!(m["e_orb"].as_f64().unwrap() < 1e-2, "E_orb {}", m["e_orb"]);
    assert_eq!(m["T"], 40.0);
}

#[test]
fn duffing_example_builds_ten_plus_four_network() {
    let tmp = tempfile::tempdir().unwrap();
    let printed = ok(&["example", "example5_duffing", "--out", s(tmp.path())]);
    let rnn = json(&Path::new(printed.trim()).join("rnn.json"));
    assert_eq!(rnn["kind"], "frnn");
    assert_eq!((rnn["n"].as_u64(), rnn["p"].as_u64()), (Some(2), Some(3)));
    assert_eq!((rnn["m"].as_u64(), rnn["q"].as_u64()), (Some(10), Some(4)));
    assert_eq!(rnn["W_sigma"].as_array().unwrap().len(), 2 + 3 + 10 + 4);
}

#[test]
fn example_run_uses_the_given_config() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("tiny.toml");
    fs::write(&config, TINY).unwrap();
    let printed = ok(&[
        "example",
        "run",
        "--config",
        s(&config),
        "--out",
        s(tmp.path()),
        "--seed",
        "9",
    ]);
    let m = json(&Path::new(printed.trim()).join("metrics.json"));
    assert_eq!(m["config"]["train"]["seed"], 9);
}

#[test]
fn failures_exit_nonzero_with_a_diagnostic() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, TINY.replace("[net]", "[net]\nwidth = 3")).unwrap();
    for args in [
        vec!["train", "--config", s(&bad)],
        vec!["train"],
        vec!["example", "no_such_recipe"],
        vec!["analyze", s(tmp.path())],
    ] {
        let out = cli(&args);
        assert!(!out.status.success(), "{args:?} succeeded");
        assert!(
            String::from_utf8_lossy(&out.stderr).contains("error"),
            "{args:?}"
        );
    }
}
