use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_qcsm");

fn scenarios() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn qcsm(args: &[&str]) -> std::process::Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn json_stdout(args: &[&str]) -> Value {
    let out = qcsm(args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn simulate_writes_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run.csv");
    let cfg = scenarios().join("perturbed_gamma150.json");
    let st = qcsm(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(
        st.status.success(),
        "{}",
        String::from_utf8_lossy(&st.stderr)
    );

    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,x1,x2,u,u_filt,d,region,in_ca,v_new,energy"
    );
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(first[1].parse::<f64>().unwrap(), 1.5);
    assert_eq!(first[6], "U-I");
    assert_eq!(csv.lines().count(), 20_002);

    let side: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("run.csv.json")).unwrap())
            .unwrap();
    let tc = side["captured_at"].as_f64().unwrap();
    assert!(tc > 0.0 && tc < 2.0);
    assert_eq!(side["config"]["gamma"], 150.0);
    assert_eq!(side["provenance"]["gamma"], Value::Null);
    assert_eq!(side["provenance"]["dt"], "specified");
    assert_eq!(side["provenance"]["eta"], "default");
    assert_eq!(side["provenance"]["epsilon"], "fallback");
    assert_eq!(side["events"][0]["kind"], "EnterU");
}

#[test]
fn sidecar_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let cfg = scenarios().join("unperturbed_ca.json");
    assert!(qcsm(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        a.to_str().unwrap()
    ])
    .status
    .success());
    let side: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("a.csv.json")).unwrap())
            .unwrap();
    let echo = dir.path().join("echo.json");
    std::fs::write(&echo, side["config"].to_string()).unwrap();
    let b = dir.path().join("b.csv");
    assert!(qcsm(&[
        "simulate",
        "--config",
        echo.to_str().unwrap(),
        "--out",
        b.to_str().unwrap()
    ])
    .status
    .success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn malformed_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"x0":[1,2],"gamma":"fast","D":0,"t_end":1}"#).unwrap();
    let out = qcsm(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        "/dev/null",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gamma"));

    std::fs::write(&cfg, r#"{"x0":[1,2],"gamma":50,"D":100,"t_end":1}"#).unwrap();
    let out = qcsm(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        "/dev/null",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn analytic_subcommand() {
    let v = json_stdout(&[
        "analytic", "--x1", "1", "--x2", "-10", "--gamma", "100", "--format", "json",
    ]);
    let arc = &v["arcs"][0];
    assert_eq!(arc["B"], 1.0);
    assert_eq!(arc["omega"], 10.0);
    assert!((arc["phi"].as_f64().unwrap() - 4.712389).abs() < 1e-6);
    assert!((arc["t_reach"].as_f64().unwrap() - 0.15708).abs() < 1e-5);

    let v = json_stdout(&[
        "analytic", "--x1", "1", "--x2", "2", "--gamma", "100", "--format", "json",
    ]);
    assert_eq!(v["arcs"].as_array().unwrap().len(), 2);
    assert!((v["total_time"].as_f64().unwrap() - 0.24436).abs() < 1e-5);

    let out = qcsm(&["analytic", "--x1", "0.1", "--x2", "-10", "--gamma", "100"]);
    assert_ne!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not in C_a"));
}

#[test]
fn gain_subcommand() {
    let v = json_stdout(&["gain", "--D", "100"]);
    let g = v["gamma_min_new"].as_f64().unwrap();
    assert!((g - 2928.93).abs() < 0.01);
    assert_eq!(v["gamma_min_old"], 1100.5);

    let v = json_stdout(&["gain", "--D", "0"]);
    assert_eq!(v["gamma_min_old"], 0.5);
    assert_eq!(v["gamma_min_new"], 0.5);

    let v = json_stdout(&["gain", "--D", "1"]);
    assert_eq!(v["gamma_min_old"], 2.5);
    assert!((v["gamma_min_new"].as_f64().unwrap() - 4.3284).abs() < 1e-4);
}

#[test]
fn lyapunov_map_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("map.csv");
    let st = qcsm(&[
        "lyapunov-map",
        "--gamma",
        "2929",
        "--D",
        "100",
        "--resolution",
        "21",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(
        st.status.success(),
        "{}",
        String::from_utf8_lossy(&st.stderr)
    );
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().count(), 1 + 21 * 21);
    let origin = csv
        .lines()
        .skip(1)
        .map(|l| {
            l.split(',')
                .map(|f| f.parse::<f64>().unwrap())
                .collect::<Vec<_>>()
        })
        .find(|r| r[0] == 0.0 && r[1] == 0.0)
        .unwrap();
    assert_eq!(origin[2], 0.0);
    let meta: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("map.csv.json")).unwrap())
            .unwrap();
    assert_eq!(meta["provenance"]["eta"], "default");

    let bad = qcsm(&[
        "lyapunov-map",
        "--gamma",
        "150",
        "--resolution",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_ne!(bad.status.code(), Some(0));
    let bad = qcsm(&[
        "lyapunov-map",
        "--gamma",
        "150",
        "--D",
        "100",
        "--epsilon",
        "50",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn compare_subcommand() {
    let cfg = scenarios().join("unperturbed_u.json");
    let v = json_stdout(&["compare", "--config", cfg.to_str().unwrap()]);
    assert!(v["report"]["max_x1_err"].as_f64().unwrap() < 0.1);
    let cfg = scenarios().join("unperturbed_axis.json");
    let v = json_stdout(&[
        "compare",
        "--config",
        cfg.to_str().unwrap(),
        "--ref-dt",
        "1e-5",
    ]);
    assert!(v["report"]["compared_samples"].as_u64().unwrap() > 100);
}

#[test]
fn sweep_subcommand_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.json");
    std::fs::write(
        &cfg,
        r#"{
          "base": { "x0": [1, 1], "gamma": 150, "D": 100, "t_end": 1.0 },
          "samples": 20, "x0_region": "U", "x0_box": [[0.1, 2], [0.1, 20]],
          "disturbance_family": { "type": "uniform_random", "bound": 100, "seed": 0 },
          "seed": 5
        }"#,
    )
    .unwrap();
    let mut outs = Vec::new();
    for name in ["a.json", "b.json"] {
        let out = dir.path().join(name);
        let st = qcsm(&[
            "sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(
            st.status.success(),
            "{}",
            String::from_utf8_lossy(&st.stderr)
        );
        outs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(outs[0], outs[1]);
    let v: Value = serde_json::from_slice(&outs[0]).unwrap();
    assert_eq!(v["aggregate"]["bracket_ok"], 20);

    let text = std::fs::read_to_string(&cfg)
        .unwrap()
        .replace("\"samples\": 20", "\"samples\": 0");
    std::fs::write(&cfg, text).unwrap();
    let st = qcsm(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert_eq!(st.status.code(), Some(2));
}
