use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const BASE: &str = r#"
[demography]
mu = { kind = "exponential", scale = 0.0005, rate = 0.08 }

[epi]
mu1 = 0.2
q1 = 0.1
gamma1 = 0.05
gamma2 = 0.1
gamma = 0.1
k1 = { kind = "piecewise_linear", points = [[0.0, 2.0], [15.0, 1.4], [40.0, 1.0], [100.0, 1.0]] }
k2 = { kind = "piecewise_linear", points = [[0.0, 0.5], [20.0, 1.0], [40.0, 0.6], [100.0, 0.5]] }
"#;

const COSTS: &str = r#"
[costs]
g2 = { kind = "constant", value = 0.5 }
f = { kind = "piecewise_linear", points = [[0.0, 1.0], [100.0, 3.0]] }
"#;

fn seqir(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seqir")).args(args).output().unwrap()
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    seqir(&args)
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn r0_run_matches_closed_form() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("cf.toml");
    fs::write(
        &cfg,
        r#"
run = "r0"
[grid]
a_max = 400.0
[demography]
mu = { kind = "constant", value = 0.02 }
tail_survival = 4e-4
[epi]
mu1 = 0.2
q1 = 0.1
gamma1 = 0.05
gamma2 = 0.1
gamma = 0.1
k2 = { kind = "constant", value = 0.5 }
"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = run(&cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("R0 = "));
    let v = json(&out.join("r0.json"));
    let gap = v["relative_gap"].as_f64().unwrap();
    assert!(gap <= 1e-3, "gap {gap}");
    // k2 = 0.5 halves the unit-mixing value 5.97426
    let r0 = v["quadrature"]["r0"].as_f64().unwrap();
    assert!((r0 - 0.5 * 5.974265).abs() < 1e-3, "{r0}");
    let csv = fs::read_to_string(out.join("r0.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("quantity,quadrature,closed_form"));
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn rerun_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("steady.toml");
    fs::write(&cfg, format!("run = \"steady\"\n[grid]\nn = 401\n{BASE}r0 = 2.0\n")).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = run(&cfg, out, &[]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    for file in ["steady.csv", "steady.json"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }
    let v = json(&a.join("steady.json"));
    assert_eq!(v["endemic"], Value::Bool(true));
    assert!(v["g_residual"].as_f64().unwrap().abs() <= 1e-10);
}

#[test]
fn subcritical_steady_reports_no_endemic_state() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("sub.toml");
    fs::write(&cfg, format!("run = \"steady\"\n[grid]\nn = 401\n{BASE}r0 = 0.8\n")).unwrap();
    let out = dir.path().join("out");
    let o = run(&cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&out.join("steady.json"));
    assert_eq!(v["endemic"], Value::Bool(false));
    assert_eq!(v["h"].as_f64(), Some(0.0));
    assert!(v["average_age_of_infection"].is_null());
}

#[test]
fn zero_seed_stays_disease_free() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("zero.toml");
    fs::write(
        &cfg,
        format!("run = \"simulate\"\n[grid]\nn = 201\n{BASE}r0 = 3.0\n[simulate]\nt_end = 20.0\nseed_mass = 0.0\n"),
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = run(&cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&out.join("simulate.json"));
    for s in v["samples"].as_array().unwrap() {
        assert_eq!(s["prevalence"].as_f64(), Some(0.0));
    }
}

#[test]
fn grid_overrides_take_effect() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("g.toml");
    fs::write(&cfg, format!("run = \"steady\"\n{BASE}r0 = 2.0\n")).unwrap();
    let out = dir.path().join("out");
    let o = run(&cfg, &out, &["--grid-n", "301", "--a-max", "120"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("steady.csv")).unwrap();
    assert_eq!(csv.lines().count(), 302);
    assert!(csv.lines().last().unwrap().starts_with("1.2000000000000000e2,"), "{}", csv.lines().last().unwrap());
}

#[test]
fn vaccinate_and_sweep_succeed() {
    let dir = TempDir::new().unwrap();
    let vac = dir.path().join("vac.toml");
    fs::write(&vac, format!("run = \"vaccinate\"\n[grid]\nn = 401\n{BASE}r0 = 2.0\n{COSTS}f_bar = 0.01\n")).unwrap();
    let out = dir.path().join("vac");
    let o = run(&vac, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&out.join("vaccinate.json"));
    assert_eq!(v["kkt"]["pass"], Value::Bool(true));
    assert_eq!(v["converged"], Value::Bool(true));
    let atoms = v["atoms"].as_array().unwrap();
    assert!(!atoms.is_empty() && atoms.len() <= 3);
    assert!(v["prevalence"].as_f64().unwrap() <= 0.01 * (1.0 + 1e-9));

    let sweep = dir.path().join("sweep.toml");
    fs::write(
        &sweep,
        format!(
            "run = \"sweep\"\n[grid]\nn = 401\n{BASE}r0 = 2.0\n{COSTS}\n[vaccinate]\nsweep = [0.02, 0.015, 0.01, 0.007, 0.005]\n"
        ),
    )
    .unwrap();
    let out = dir.path().join("sweep");
    let o = run(&sweep, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let costs: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(2).unwrap().parse().unwrap()).collect();
    assert_eq!(costs.len(), 5);
    assert!(costs.windows(2).all(|w| w[1] >= w[0]), "{costs:?}");
}

#[test]
fn unbracketed_endemic_state_exits_with_2() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("huge.toml");
    fs::write(&cfg, format!("run = \"steady\"\n[grid]\nn = 401\n{BASE}r0 = 1e12\n")).unwrap();
    let o = run(&cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("could not bracket"), "{}", stderr(&o));
}

#[test]
fn tiny_cap_vaccinates_at_birth() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("tiny.toml");
    fs::write(
        &cfg,
        format!("run = \"vaccinate\"\n[grid]\nn = 401\n{BASE}r0 = 2.0\n{COSTS}f_bar = 1e-9\n[vaccinate]\nself_consistent = false\n"),
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = run(&cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v = json(&out.join("vaccinate.json"));
    let first = &v["atoms"][0];
    assert_eq!(first["age"].as_f64(), Some(0.0));
    assert!(first["weight"].as_f64().unwrap() > 0.99);
    assert!(v["prevalence"].as_f64().unwrap() <= 1e-9 * (1.0 + 1e-4));
}

#[test]
fn bad_config_exits_with_1_and_lists_every_problem() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "run = \"r0\"\nbogus = 1\n[epi]\nmu1 = -0.2\nq1 = 0.1\n").unwrap();
    for cmd in ["validate", "run"] {
        let o = seqir(&[cmd, cfg.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(1));
        let err = stderr(&o);
        assert!(err.contains("bogus") && err.contains("unknown key"), "{err}");
        assert!(err.contains("epi.mu1") && err.contains("≥ 0"), "{err}");
        assert!(err.contains("epi.gamma") && err.contains("missing required field"), "{err}");
        assert!(err.contains("demography"), "{err}");
    }
}

#[test]
fn missing_file_exits_with_1() {
    let o = seqir(&["validate", "/nonexistent/scenario.toml"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn validate_reports_defaults() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("ok.toml");
    fs::write(&cfg, format!("run = \"r0\"\n{BASE}")).unwrap();
    let o = seqir(&["validate", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("a_max = 100") && text.contains("n = 2001"), "{text}");
    assert!(text.starts_with("ok:"), "{text}");
}
