use serde_json::Value;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_field-triple")).args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("field-triple-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is the JSON report")
}

#[test]
fn solves_the_harmonic_quadratic() {
    let dir = scratch("quadratic");
    let out = dir.join("sol.csv");
    let o = bin(&["solve", "--model", "harmonic", "--m", "1", "--grid", "33x33", "--bc", "x^2-y^2", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&o);
    assert!(r["max_error"].as_f64().unwrap() <= 1e-9);
    assert!(r["final_residual"].as_f64().unwrap() <= 1e-10);
    assert_eq!(r["pass"], Value::Bool(true));
    assert_eq!(r["grid"], "33x33");
    for key in ["command", "model", "grid", "iterations", "final_residual", "action", "max_error", "pass"] {
        assert!(r.get(key).is_some(), "{key}");
    }
    let field = std::fs::read_to_string(&out).unwrap();
    assert_eq!(field.lines().next(), Some("x,y,comp0"));
    assert_eq!(field.lines().count(), 1 + 33 * 33);
    let second: Vec<&str> = field.lines().nth(2).unwrap().split(',').collect();
    assert_eq!(second[0], "3.1250000000000000e-2");
    let momenta = std::fs::read_to_string(dir.join("sol.momenta.csv")).unwrap();
    assert_eq!(momenta.lines().next(), Some("cell_i,cell_j,p1_0,p2_0"));
    assert_eq!(momenta.lines().count(), 1 + 32 * 32);
    let saved: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("sol.report.json")).unwrap()).unwrap();
    assert_eq!(saved, r);

    // the action of the written field reproduces the reported one
    let a = bin(&["action", "--grid", "33x33", "--input", out.to_str().unwrap()]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    let ar = report(&a);
    assert!((ar["action"].as_f64().unwrap() - r["action"].as_f64().unwrap()).abs() <= 1e-14);
    assert!(ar["final_residual"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn same_seed_gives_identical_bytes() {
    let dir = scratch("determinism");
    let run = |tag: &str, threads: &str| {
        let out = dir.join(format!("{tag}.csv"));
        let o = Command::new(env!("CARGO_BIN_EXE_field-triple"))
            .env("FIELD_TRIPLE_THREADS", threads)
            .args(["solve", "--model", "sigma", "--m", "2", "--grid", "13x11", "--domain", "disc"])
            .args(["--bc", "0.3*sin(x)", "--bc", "x*y", "--seed", "7", "--out", out.to_str().unwrap()])
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let read = |p: PathBuf| std::fs::read(p).unwrap();
        (o.stdout, read(out.clone()), read(out.with_extension("momenta.csv")), read(out.with_extension("report.json")))
    };
    let a = run("a", "1");
    assert_eq!(a, run("b", "1"));
    assert_eq!(a, run("c", "4"));

    let check = |seed: &str| bin(&["check-maps", "--seed", seed, "--points", "200"]).stdout;
    assert_eq!(check("42"), check("42"));
    assert_ne!(check("42"), check("43"));
}

#[test]
fn check_maps_passes() {
    let o = bin(&["check-maps", "--seed", "42", "--points", "1000"]);
    assert_eq!(o.status.code(), Some(0));
    let r = report(&o);
    assert_eq!(r["details"]["dimensions"].as_array().unwrap().len(), 3);
}

#[test]
fn legendre_and_phase_commands() {
    for model in ["harmonic", "sigma", "nambu"] {
        for cmd in ["legendre", "phase-check"] {
            let o = bin(&[cmd, "--model", model, "--m", if model == "nambu" { "4" } else { "3" }, "--points", "100"]);
            assert_eq!(o.status.code(), Some(0), "{cmd} {model}: {}", String::from_utf8_lossy(&o.stderr));
        }
    }
}

#[test]
fn string_solve_falls_back_to_extended_start() {
    let o = bin(&["solve", "--model", "nambu", "--grid", "9x9", "--bc", "x", "--bc", "y", "--bc", "0.1*x*y", "--bc", "0"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(report(&o)["details"]["init"], "extend");
    let o = bin(&["solve", "--model", "nambu", "--grid", "9x9", "--init", "zero", "--bc", "x", "--bc", "y", "--bc", "0.1*x*y", "--bc", "0"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("inadmissible"));
}

#[test]
fn validation_failures_exit_2() {
    let cases: [&[&str]; 7] = [
        &["solve", "--m", "2", "--bc", "x"],
        &["solve", "--bc", "x +"],
        &["solve", "--bc", "sqrt(x - 2)"],
        &["solve", "--bc", "x", "--grid", "33"],
        &["legendre", "--model", "nambu", "--m", "2"],
        &["action", "--input", "/nonexistent/field.csv"],
        &["solve", "--bogus"],
    ];
    for args in cases {
        let o = bin(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!o.stderr.is_empty(), "{args:?}");
        assert!(o.stdout.is_empty(), "{args:?}");
    }
    let o = bin(&["solve", "--bc", "x +"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("offset 3"));
    let o = bin(&["solve", "--m", "2", "--bc", "x"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("got 1 for m = 2"));
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = scratch("config");
    let cfg = dir.join("run.json");
    std::fs::write(&cfg, r#"{"command": "solve", "model": "harmonic", "grid": "9x9", "bc": ["x*y"], "tol": 1e-11}"#).unwrap();
    let o = bin(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(report(&o)["grid"], "9x9");
    let o = bin(&["--config", cfg.to_str().unwrap(), "--grid", "5x7"]);
    assert_eq!(report(&o)["grid"], "5x7");

    for bad in [r#"{"command": "solve", "gird": "9x9"}"#, r#"{"command": "solve", "#, r#"{"command": "sovle"}"#, r#"{"m": -1}"#] {
        std::fs::write(&cfg, bad).unwrap();
        let o = bin(&["--config", cfg.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(2), "{bad}");
        assert!(String::from_utf8_lossy(&o.stderr).contains("run.json"));
    }
}

#[test]
fn nonconvergence_exits_3() {
    let o = bin(&["solve", "--model", "sigma", "--bc", "3*sin(4*x)*cosh(y)", "--max-iter", "1", "--tol", "1e-14"]);
    assert_eq!(o.status.code(), Some(3));
    let r = report(&o);
    assert_eq!(r["pass"], Value::Bool(false));
    assert_eq!(r["details"]["converged"], Value::Bool(false));
}
