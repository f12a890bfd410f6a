use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const RATE1: &str = r#"
schema = 1
[params]
K = 2
L = 2
tau = 0.1
T = 2.0
p0 = 0.5
p1 = 0.5
[channel]
kind = "rate_law"
rates = [1.0]
probs = [1.0]
"#;

const RATE1_BILEVEL: &str = r#"
schema = 1
scenario = "2-optimal"
[params]
K = 2
L = 2
tau = 0.2
T = 2.0
p0 = 0.5
p1 = 0.5
[channel]
kind = "rate_law"
rates = [1.0]
probs = [1.0]
"#;

const TWO_POINT: &str = r#"
schema = 1
[params]
K = 2
L = 2
tau = 0.1
T = 2.0
p0 = 0.5
[channel]
kind = "rate_law"
rates = [0.0, 2.0]
probs = [0.5, 0.5]
"#;

const SMALL: &str = r#"
schema = 1
[params]
p1 = 0.5
[estimator]
mc_samples = 2000
[sim]
packets = 500
"#;

struct Run {
    dir: TempDir,
}

impl Run {
    fn new() -> Self {
        Self {
            dir: TempDir::new().unwrap(),
        }
    }

    fn config(&self, name: &str, text: &str) -> PathBuf {
        let path = self.dir.path().join(name);
        fs::write(&path, text).unwrap();
        path
    }

    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn exec(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_relaystop"))
            .args(args)
            .current_dir(self.dir.path())
            .output()
            .unwrap()
    }
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr_json(o: &Output) -> Value {
    serde_json::from_str(String::from_utf8_lossy(&o.stderr).trim()).unwrap()
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_prints_the_constant_rate_optimum() {
    let r = Run::new();
    let cfg = r.config("c.toml", RATE1);
    let out = r.out("o");
    let o = r.exec(&["solve", "--config", arg(&cfg), "--out", arg(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(
        stdout(&o).contains("lambda_star = 0.454545"),
        "{}",
        stdout(&o)
    );
    let s = summary(&out);
    let lambda = s["thresholds"][0]["value"].as_f64().unwrap();
    assert!((lambda - 1.0 / 2.2).abs() < 1e-8);
    assert!(s["thresholds"][0]["iterations"].as_u64().is_some());
    assert!(s["thresholds"][0]["residual"].as_f64().unwrap().abs() <= 1e-9);
    assert_eq!(s["verdicts"][0]["criterion"], 1);
    assert_eq!(s["config"]["params"]["T"], 2.0);
    assert!(s["runtime"]["wall_clock_secs"].as_f64().is_some());
}

#[test]
fn solve_prints_the_bilevel_closed_form() {
    let r = Run::new();
    let cfg = r.config("c.toml", RATE1_BILEVEL);
    let out = r.out("o");
    for scenario in ["2-optimal", "2-intuitive"] {
        let o = r.exec(&[
            "solve",
            "--config",
            arg(&cfg),
            "--out",
            arg(&out),
            "--scenario",
            scenario,
        ]);
        assert_eq!(o.status.code(), Some(0));
        assert!(stdout(&o).contains("= 0.416666"), "{}", stdout(&o));
        assert_eq!(summary(&out)["scenario"], scenario);
    }
}

#[test]
fn malformed_config_names_the_field() {
    let r = Run::new();
    let cases = [
        ("schema = 1\n[params]\nK = \"four\"\n", "params.K"),
        ("schema = 1\n[params]\np0 = 1.5\n", "params.p0"),
        (
            "schema = 1\n[estimator]\nmax_iter = 3\n",
            "estimator.max_iter",
        ),
        (
            "schema = 1\n[estimator]\nmc_samples = 10\n",
            "estimator.mc_samples",
        ),
        ("schema = 3\n", "schema"),
    ];
    for (text, field) in cases {
        let cfg = r.config("bad.toml", text);
        let o = r.exec(&["solve", "--config", arg(&cfg), "--out", arg(&r.out("o"))]);
        assert_eq!(o.status.code(), Some(2), "{text}");
        let err = stderr_json(&o);
        assert_eq!(err["error"], "config");
        assert_eq!(err["field"], field, "{err}");
    }
    let cfg = r.config("typo.toml", "schema = 1\n[sim]\npacket = 5\n");
    let o = r.exec(&["solve", "--config", arg(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr_json(&o)["message"]
        .as_str()
        .unwrap()
        .contains("packet"));
}

#[test]
fn missing_config_file_is_an_error() {
    let r = Run::new();
    let o = r.exec(&["solve", "--config", "nope.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error"], "io");
}

#[test]
fn simulate_writes_one_row_per_packet() {
    let r = Run::new();
    let cfg = r.config("c.toml", RATE1);
    let out = r.out("o");
    let o = r.exec(&[
        "simulate",
        "--config",
        arg(&cfg),
        "--out",
        arg(&out),
        "--packets",
        "300",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let mut rd = csv::Reader::from_path(out.join("packets.csv")).unwrap();
    assert_eq!(
        rd.headers().unwrap().iter().collect::<Vec<_>>(),
        [
            "packet_index",
            "main_observations",
            "sub_observations",
            "rate_at_stop",
            "relay",
            "elapsed",
            "bits"
        ]
    );
    let rows: Vec<csv::StringRecord> = rd.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 300);
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row[0].parse::<usize>().unwrap(), i);
        assert_eq!(&row[1], "1");
        let relay: usize = row[4].parse().unwrap();
        assert!((1..=2).contains(&relay));
    }
    let s = summary(&out);
    assert_eq!(s["simulations"][0]["packets"], 300);
    assert!(s["simulations"][0]["stderr"].as_f64().unwrap() > 0.0);
    assert_eq!(s["all_pass"], true);
}

#[test]
fn one_packet_is_insufficient_data() {
    let r = Run::new();
    let cfg = r.config("c.toml", RATE1);
    let o = r.exec(&[
        "simulate",
        "--config",
        arg(&cfg),
        "--packets",
        "1",
        "--out",
        arg(&r.out("o")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error"], "insufficient-data");
}

#[test]
fn flags_override_the_file_and_runs_reproduce() {
    let r = Run::new();
    let cfg = r.config("c.toml", SMALL);
    let run = |name: &str| {
        let out = r.out(name);
        let o = r.exec(&[
            "simulate",
            "--config",
            arg(&cfg),
            "--seed",
            "42",
            "--packets",
            "200",
            "--scenario",
            "2-intuitive",
            "--out",
            arg(&out),
        ]);
        assert!(o.status.code() == Some(0) || o.status.code() == Some(1));
        out
    };
    let (a, b) = (run("a"), run("b"));
    let (mut sa, mut sb) = (summary(&a), summary(&b));
    assert_eq!(sa["seed"]["estimator"], 42);
    assert_eq!(sa["seed"]["sim"], 42);
    assert_eq!(sa["config"]["sim"]["packets"], 200);
    assert_eq!(sa["config"]["scenario"], "2-intuitive");
    assert_eq!(sa["config"]["estimator"]["mc_samples"], 2000);
    for s in [&mut sa, &mut sb] {
        s["runtime"] = Value::Null;
        s["config"]["output"] = Value::Null;
        for sim in s["simulations"].as_array_mut().unwrap() {
            sim["packets_csv"] = Value::Null;
        }
    }
    assert_eq!(sa, sb);
    assert_eq!(
        fs::read(a.join("packets.csv")).unwrap(),
        fs::read(b.join("packets.csv")).unwrap()
    );
}

#[test]
fn compare_requires_p1() {
    let r = Run::new();
    let cfg = r.config("c.toml", TWO_POINT);
    let o = r.exec(&["compare", "--config", arg(&cfg), "--out", arg(&r.out("o"))]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["field"], "params.p1");
}

#[test]
fn compare_on_a_deterministic_hook_is_exact() {
    let r = Run::new();
    let cfg = r.config(
        "c.toml",
        r#"
schema = 1
[params]
K = 1
L = 1
tau = 0.2
T = 2.0
p0 = 1.0
p1 = 1.0
[channel]
kind = "fading"
first_hop = { fixed = 3.0 }
second_hop = { fixed = 1.0 }
[sim]
packets = 200
"#,
    );
    let out = r.out("o");
    let o = r.exec(&["compare", "--config", arg(&cfg), "--out", arg(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let s = summary(&out);
    let sims = s["simulations"].as_array().unwrap();
    assert_eq!(sims.len(), 2);
    assert_eq!(sims[0]["stderr"], 0.0);
    assert_eq!(sims[1]["stderr"], 0.0);
    assert_eq!(sims[0]["throughput"], sims[1]["throughput"]);
    assert_eq!(s["thresholds"].as_array().unwrap().len(), 2);
    assert!(out.join("packets_intuitive.csv").exists() && out.join("packets_optimal.csv").exists());
}

#[test]
fn sweep_over_relays() {
    let r = Run::new();
    let cfg = r.config("c.toml", "schema = 1\n[estimator]\nmc_samples = 20000\n");
    let out = r.out("o");
    let o = r.exec(&[
        "sweep",
        "--config",
        arg(&cfg),
        "--axis",
        "L",
        "--values",
        "1,2,4,8",
        "--out",
        arg(&out),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let mut rd = csv::Reader::from_path(out.join("sweep.csv")).unwrap();
    assert_eq!(&rd.headers().unwrap()[0], "axis");
    let lambdas: Vec<f64> = rd
        .records()
        .map(|r| r.unwrap()[3].parse().unwrap())
        .collect();
    assert_eq!(lambdas.len(), 4);
    assert!(lambdas.windows(2).all(|w| w[0] <= w[1]), "{lambdas:?}");
}

#[test]
fn sweep_with_simulation_fills_throughput() {
    let r = Run::new();
    let cfg = r.config(
        "c.toml",
        "schema = 1\n[estimator]\nmc_samples = 20000\n[sim]\npackets = 2000\n[sweep]\naxis = \"p0\"\nvalues = [0.2, 0.3]\nsimulate = true\n",
    );
    let out = r.out("o");
    let o = r.exec(&["sweep", "--config", arg(&cfg), "--out", arg(&out)]);
    assert!(matches!(o.status.code(), Some(0) | Some(1)));
    let s = summary(&out);
    for row in s["sweep"].as_array().unwrap() {
        assert!(row["throughput"].as_f64().unwrap() > 0.0);
        assert!(row["stderr"].as_f64().unwrap() > 0.0);
    }
}

#[test]
fn sweep_rejects_bad_axes_and_empty_values() {
    let r = Run::new();
    let out = r.out("o");
    let o = r.exec(&[
        "sweep",
        "--axis",
        "packets",
        "--values",
        "1,2",
        "--out",
        arg(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["field"], "sweep.axis");
    let o = r.exec(&["sweep", "--axis", "L", "--out", arg(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["field"], "sweep.values");
    let o = r.exec(&[
        "sweep",
        "--axis",
        "L",
        "--values",
        "1.5",
        "--out",
        arg(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn oracle_agrees_on_the_two_point_hook() {
    let r = Run::new();
    let cfg = r.config("c.toml", TWO_POINT);
    let out = r.out("o");
    let o = r.exec(&["oracle", "--config", arg(&cfg), "--out", arg(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let s = summary(&out);
    let oracle = &s["oracle"];
    assert!((oracle["best_throughput"].as_f64().unwrap() - 5.0 / 6.0).abs() < 1e-12);
    assert!((oracle["solver_throughput"].as_f64().unwrap() - 5.0 / 6.0).abs() < 1e-8);
    assert_eq!(oracle["bracket_mismatch"], false);
    assert!(s["verdicts"]
        .as_array()
        .unwrap()
        .iter()
        .all(|v| v["pass"] == true));
}

#[test]
fn oracle_flags_a_grid_that_misses_the_optimum() {
    let r = Run::new();
    let cfg = r.config(
        "c.toml",
        &format!("{SMALL}[oracle]\ngrid_points = 50\nlo = 0.0\nhi = 0.5\n"),
    );
    let out = r.out("o");
    let o = r.exec(&["oracle", "--config", arg(&cfg), "--out", arg(&out)]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    let s = summary(&out);
    assert_eq!(s["oracle"]["bracket_mismatch"], true);
    assert_eq!(s["all_pass"], false);
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn oracle_needs_scenario_1() {
    let r = Run::new();
    let o = r.exec(&[
        "oracle",
        "--scenario",
        "2-optimal",
        "--out",
        arg(&r.out("o")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["field"], "scenario");
}
