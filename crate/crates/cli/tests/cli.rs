use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_infospread"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json_out(o: &Output) -> Value {
    assert_eq!(code(o), 0, "stderr: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).expect("JSON output")
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

const PROFILE_B: &str = r#"{"theta":{"p":0.5157,"eta":11.5924,"z":-0.9050,"vartheta":1.3159,"c_p":0.0493,"c":0.2382},"len":336}"#;

#[test]
fn ensemble_reports_thresholds() {
    let r = json_out(&run(&["ensemble", "--config", r#"{"kernel":{"gamma":5,"k_cut":11}}"#]));
    let rho = r["rho_c_uncorrelated"].as_f64().unwrap();
    // Discrete sum on [1, 11] sits well above the continuum 2/3.
    assert!(rho > 2.0 / 3.0 && rho < 1.0, "{rho}");
    assert!((r["rho_c_correlated"].as_f64().unwrap() - rho).abs() < 1e-9);
    assert_eq!(r["annd"].as_array().unwrap().len(), 11);

    let c = json_out(&run(&[
        "ensemble",
        "--config",
        r#"{"kernel":{"gamma":5,"k_cut":11,"theta":0.5},"annd":false}"#,
    ]));
    // The mixing approximation rises with θ; the exact 1/Λ_m falls, since the
    // θ·k self term dominates the spectrum on this narrow support.
    assert!(c["rho_c_mixing_approx"].as_f64().unwrap() > rho);
    assert!(c["rho_c_correlated"].as_f64().unwrap() < rho);
    assert!(c.get("annd").is_none());
}

#[test]
fn config_errors_exit_2() {
    for cfg in [
        r#"{"kernel":{"gamma":1.5,"k_cut":11}}"#,
        r#"{"kernel":{"gamma":3,"k_cut":11},"bogus":1}"#,
        r#"{"kernel":{"gamma":3"#,
        r#"{}"#,
    ] {
        assert_eq!(code(&run(&["ensemble", "--config", cfg])), 2, "{cfg}");
    }
    let sweep = r#"{"kernel":{"gamma":5,"k_cut":11},"axis":"alpha","grid":[],"lambda":1,"beta":0.3}"#;
    assert_eq!(code(&run(&["sweep", "--config", sweep])), 2);
    assert_eq!(code(&run(&["ensemble", "--jobs", "0"])), 2);
}

#[test]
fn numerical_failure_exits_3_and_io_exits_4() {
    let unstable = r#"{"kernel":{"gamma":2.5,"k_cut":473},"params":{"alpha":1,"lambda":1,"beta":0.3},"options":{"dt":0.1}}"#;
    assert_eq!(code(&run(&["solve", "--config", unstable])), 3);
    assert_eq!(code(&run(&["smooth", "--input", "/nonexistent/series.csv"])), 4);
    assert_eq!(code(&run(&["ensemble", "--config", "/nonexistent/config.json"])), 4);
}

#[test]
fn sweep_csv_shape() {
    let cfg = r#"{"kernel":{"gamma":5,"k_cut":11},"axis":"alpha","grid":{"start":0.1,"stop":0.5,"step":0.1},
        "lambda":1,"beta":0.3,"thetas":[0,0.4]}"#;
    let o = run(&["sweep", "--config", cfg]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "theta,alpha,prevalence,iterations,efficiency,seed_mass,dt");
    assert_eq!(lines.len(), 1 + 2 * 5);
    assert!(lines[3].starts_with("0,0.3,"));
    assert!(lines[6].starts_with("0.4,0.1,"));
}

#[test]
fn rate_series_fit_recovers_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let series = path(dir.path(), "series.csv");
    assert_eq!(code(&run(&["tv-series", "--config", PROFILE_B, "--out", &series])), 0);
    let head = fs::read_to_string(&series).unwrap();
    assert!(head.starts_with("t,rate\n"));
    assert_eq!(head.lines().count(), 337);

    let fit = path(dir.path(), "fit.json");
    let o = run(&[
        "fit", "--input", &series, "--seed", "5", "--config", r#"{"options":{"restarts":8}}"#, "--out", &fit,
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r: Value = serde_json::from_str(&fs::read_to_string(&fit).unwrap()).unwrap();
    let th = &r["theta"];
    // Canonical form: z ≥ 0 with the phase moved by π.
    let expect = [("p", 0.5157), ("eta", 11.5924), ("z", 0.9050), ("c_p", 0.0493), ("c", 0.2382)];
    for (k, v) in expect {
        let got = th[k].as_f64().unwrap();
        assert!((got - v).abs() < 0.01 * v, "{k}: {got} vs {v}");
    }
    let phase = th["vartheta"].as_f64().unwrap() - (1.3159 + std::f64::consts::PI);
    assert!(phase.sin().abs() < 0.01);
}

#[test]
fn sidecar_rerun_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let graph = path(dir.path(), "g.txt");
    assert_eq!(code(&run(&["gen-graph", "--config", r#"{"model":"configuration","n":500,"gamma":2.5,"m":2}"#, "--out", &graph])), 0);
    let side: Value = serde_json::from_str(&fs::read_to_string(format!("{graph}.run.json")).unwrap()).unwrap();
    assert_eq!(side["command"], "gen-graph");
    assert!(side["seed"].is_u64(), "auto seed recorded");
    assert!(side["config"]["k_cut"].is_u64(), "natural cutoff resolved");

    let again = path(dir.path(), "g2.txt");
    let sc = format!("{graph}.run.json");
    assert_eq!(code(&run(&["gen-graph", "--config", &sc, "--out", &again])), 0);
    assert_eq!(fs::read(&graph).unwrap(), fs::read(&again).unwrap());

    // A sidecar for another command is refused.
    assert_eq!(code(&run(&["simulate", "--config", &sc])), 2);
}

#[test]
fn thread_count_does_not_change_results() {
    let cfg = r#"{"kernel":{"gamma":2.5,"k_cut":60},"axis":"theta","grid":[0,0.2,0.4,0.6],"alpha":0.7,"lambda":1,"beta":0.3,
        "options":{"seeding":"sampled_class","runs":20}}"#;
    let a = run(&["sweep", "--config", cfg, "--seed", "9", "--jobs", "1"]);
    let b = run(&["sweep", "--config", cfg, "--seed", "9", "--jobs", "3"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn pipeline_composes() {
    let dir = tempfile::tempdir().unwrap();
    let graph = path(dir.path(), "ba.txt");
    let trace = path(dir.path(), "trace.csv");
    let smooth = path(dir.path(), "smooth.csv");
    assert_eq!(code(&run(&["gen-graph", "--seed", "1", "--config", r#"{"model":"ba","n":3000,"m":3}"#, "--out", &graph])), 0);
    let sim = r#"{"params":{"alpha":0.9,"lambda":0.3,"beta":0.05},"initial_active":0}"#;
    assert_eq!(code(&run(&["simulate", "--seed", "2", "--input", &graph, "--config", sim, "--out", &trace])), 0);
    let text = fs::read_to_string(&trace).unwrap();
    assert!(text.starts_with("t,ignorant,active,indifferent,quiet,new_active\n"));
    for line in text.lines().skip(1) {
        let v: Vec<u64> = line.split(',').skip(1).take(4).map(|x| x.parse().unwrap()).collect();
        assert_eq!(v.iter().sum::<u64>(), 3000);
    }
    assert_eq!(code(&run(&["smooth", "--input", &trace, "--out", &smooth])), 0);
    // Fit and prediction read the smoothed series as is; a poor fit is
    // acceptable, a format failure is not.
    let fit = run(&["fit", "--seed", "3", "--input", &smooth, "--config", r#"{"options":{"restarts":2}}"#]);
    assert!(matches!(code(&fit), 0 | 3), "{}", String::from_utf8_lossy(&fit.stderr));
    let pred = run(&["predict", "--seed", "3", "--input", &smooth, "--config", r#"{"options":{"restarts":2}}"#]);
    assert!(matches!(code(&pred), 0 | 3), "{}", String::from_utf8_lossy(&pred.stderr));
}

#[test]
fn predict_reports_three_arms() {
    let dir = tempfile::tempdir().unwrap();
    let series = path(dir.path(), "series.csv");
    assert_eq!(code(&run(&["tv-series", "--config", PROFILE_B, "--out", &series])), 0);
    let r = json_out(&run(&[
        "predict", "--input", &series, "--seed", "1", "--config",
        r#"{"train_fraction":0.3333333333333333,"options":{"restarts":4}}"#,
    ]));
    assert_eq!(r["train_len"], 112);
    let names: Vec<&str> = r["arms"].as_array().unwrap().iter().map(|a| a["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["model", "ar6", "ar39"]);
}

#[test]
fn smooth_reads_stdin() {
    let mut child = bin()
        .args(["smooth", "--input", "-", "--config", r#"{"sigma":1.5}"#])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let mut input = String::from("t,count\n");
    for i in 0..40 {
        input.push_str(&format!("{},{}\n", i as f64 * 0.5, if i == 20 { 1.0 } else { 0.0 }));
    }
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    let o = child.wait_with_output().unwrap();
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let total: f64 = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9);
    assert_eq!(text.lines().count(), 41);
}

#[test]
fn cluster_wide_csv() {
    let dir = tempfile::tempdir().unwrap();
    let wide = path(dir.path(), "corpus.csv");
    let len = 48;
    let mut header = vec!["t".to_owned()];
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for s in 0..12 {
        header.push(format!("s{s}"));
        let shape = s % 3;
        cols.push(
            (0..len)
                .map(|t| {
                    let x = t as f64;
                    let scale = 1.0 + s as f64;
                    scale
                        * match shape {
                            0 => (-(x - 10.0).powi(2) / 8.0).exp(),
                            1 => (-(x - 30.0).powi(2) / 30.0).exp(),
                            _ => 1.0 + (x / 3.0).sin(),
                        }
                })
                .collect(),
        );
    }
    let mut text = header.join(",") + "\n";
    for t in 0..len {
        let row: Vec<String> = std::iter::once(format!("{}", t as f64 * 0.5))
            .chain(cols.iter().map(|c| c[t].to_string()))
            .collect();
        text += &(row.join(",") + "\n");
    }
    fs::write(&wide, text).unwrap();
    let r = json_out(&run(&["cluster", "--seed", "4", "--input", &wide, "--config", r#"{"k":3}"#]));
    let a: Vec<u64> = r["assignments"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).collect();
    assert_eq!(a.len(), 12);
    for s in 3..12 {
        assert_eq!(a[s], a[s % 3], "series {s}");
    }
    assert_eq!(r["names"][0], "s0");
    assert_eq!(r["k_source"], "config");
}
