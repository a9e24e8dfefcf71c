use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const FULL12: &str = r#"{"variant":"full","n":2,"p":1}"#;
const FULL22: &str = r#"{"variant":"full","n":2,"p":2}"#;
const FULL23: &str = r#"{"variant":"full","n":3,"p":2}"#;

fn gpsh(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gpsh"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))).unwrap()
}

fn schema_check(out: &Path) -> Value {
    let schema: Value =
        serde_json::from_str(include_str!("../schema/manifest.schema.json")).unwrap();
    let m = json(out.join("manifest.json"));
    let v = jsonschema::validator_for(&schema).unwrap();
    let errs: Vec<String> = v.iter_errors(&m).map(|e| e.to_string()).collect();
    assert!(errs.is_empty(), "manifest violates schema: {errs:?}\n{m:#}");
    m
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn classify_exit_codes() {
    let t = TempDir::new().unwrap();
    let a = write(t.path(), "a.csv", "1,0\n0,2\n");
    let o = t.path().join("a");
    let r = gpsh(&o, &["classify", "--g", FULL12, "--matrix", &a]);
    assert_eq!(r.status.code(), Some(0));
    let v = json(o.join("verdict.json"));
    assert_eq!(v["verdict"], "strict");
    assert_eq!(v["min_trace"].as_f64().unwrap(), 1.0);
    schema_check(&o);

    let b = write(t.path(), "b.csv", "-1,0\n0,5\n");
    let o = t.path().join("b");
    let r = gpsh(&o, &["classify", "--g", FULL12, "--matrix", &b]);
    assert_eq!(r.status.code(), Some(1));
    let v = json(o.join("verdict.json"));
    assert_eq!(v["dual"], true);
    assert_eq!(v["verdict"], "outside");

    for (name, text) in [("c.csv", "1,2\n3\n"), ("d.csv", "1,x\n0,1\n"), ("e.csv", "1,2\n0,1\n")] {
        let c = write(t.path(), name, text);
        let o = t.path().join(name.replace(".csv", "_out"));
        let r = gpsh(&o, &["classify", "--g", FULL12, "--matrix", &c]);
        assert_eq!(r.status.code(), Some(2), "{name}");
        let m = schema_check(&o);
        assert_eq!(m["exit_code"], 2);
        assert!(m["error"].is_string());
    }
}

#[test]
fn classify_fiber_field_needs_point() {
    let t = TempDir::new().unwrap();
    let a = write(t.path(), "a.csv", "-1\n");
    let g = r#"{"variant":"fiber_field","n":1,"p":1,"fiber_rule":"ex2.3"}"#;
    let r = gpsh(&t.path().join("a"), &["classify", "--g", g, "--matrix", &a]);
    assert_eq!(r.status.code(), Some(2));
    let r = gpsh(&t.path().join("b"), &["classify", "--g", g, "--matrix", &a, "--point", "-0.5"]);
    assert_eq!(r.status.code(), Some(0), "empty fiber: vacuously in P");
    let r = gpsh(&t.path().join("c"), &["classify", "--g", g, "--matrix", &a, "--point", "0.5"]);
    assert_eq!(r.status.code(), Some(1));
}

#[test]
fn solve_saddle_and_xsq() {
    let t = TempDir::new().unwrap();
    let o = t.path().join("saddle");
    let r = gpsh(&o, &["solve", "--g", FULL22, "--boundary", "saddle", "--h", "1/32", "--radius", "1"]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let rep = json(o.join("report.json"));
    assert!(rep["max_abs_diff_from_builtin"].as_f64().unwrap() <= 1e-8, "{rep:#}");
    assert_eq!(rep["stencil"]["lattice_counts"], serde_json::json!([65, 65]));
    let sweeps = rep["sweeps"].as_u64().unwrap() as usize;
    let hist = fs::read_to_string(o.join("history.csv")).unwrap();
    assert_eq!(hist.lines().count(), sweeps + 1);
    let u = fs::read_to_string(o.join("u.csv")).unwrap();
    assert!(u.starts_with("x,y,value\n"));
    assert_eq!(u.lines().count(), 65 * 65 + 1);
    for f in ["u.gp", "history.gp"] {
        assert!(fs::read_to_string(o.join(f)).unwrap().contains("set datafile separator ','"));
    }
    let m = schema_check(&o);
    assert_eq!(m["config"]["boundary"], "saddle");
    assert_eq!(m["config"]["lattice"]["h"], 0.03125);

    let o = t.path().join("xsq");
    let r = gpsh(&o, &["solve", "--g", FULL12, "--boundary", "xsq", "--h", "1/32"]);
    assert_eq!(r.status.code(), Some(0));
    let rep = json(o.join("report.json"));
    assert!(rep["max_abs_diff_from_builtin"].as_f64().unwrap() <= 5e-3);
    assert_eq!(rep["stencil"]["lattice_counts"], serde_json::json!([65, 65]));
}

#[test]
fn solve_custom_csv_boundary() {
    let t = TempDir::new().unwrap();
    let first = t.path().join("first");
    let args = ["solve", "--g", FULL12, "--boundary", "abs", "--h", "1/4", "--radius", "1"];
    assert_eq!(gpsh(&first, &args).status.code(), Some(0));
    let csv = first.join("u.csv").display().to_string();
    let second = t.path().join("second");
    let r = gpsh(
        &second,
        &["solve", "--g", FULL12, "--boundary", "custom-csv", "--boundary-file", &csv, "--h", "1/4", "--radius", "1"],
    );
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    assert_eq!(
        fs::read_to_string(first.join("u.csv")).unwrap(),
        fs::read_to_string(second.join("u.csv")).unwrap()
    );
    let m = schema_check(&second);
    assert!(m["config"]["inputs"].as_array().unwrap().iter().any(|v| v.as_str() == Some(csv.as_str())));

    let partial = write(t.path(), "partial.csv", "x,y,value\n-1,-1,0\n");
    let r = gpsh(
        &t.path().join("p"),
        &["solve", "--g", FULL12, "--boundary", "custom-csv", "--boundary-file", &partial, "--h", "1/4", "--radius", "1"],
    );
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("no value for lattice point"));
}

#[test]
fn missing_inputs_exit_2() {
    let t = TempDir::new().unwrap();
    let o = t.path().join("a");
    let r = gpsh(
        &o,
        &["solve", "--g", FULL12, "--boundary", "custom-csv", "--boundary-file", "/nonexistent/b.csv"],
    );
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("/nonexistent/b.csv"));
    schema_check(&o);
    let r = gpsh(&t.path().join("b"), &["solve", "--boundary", "xsq"]);
    assert_eq!(r.status.code(), Some(2));
    let r = gpsh(&t.path().join("c"), &["solve", "--g", FULL12, "--boundary", "cubic"]);
    assert_eq!(r.status.code(), Some(2));
    let r = gpsh(&t.path().join("d"), &["solve", "--g", FULL12, "--boundary", "xsq", "--h", "0.3"]);
    assert_eq!(r.status.code(), Some(2), "step does not divide the box");
    let r = gpsh(&t.path().join("e"), &["solve", "--g", "{\"variant\":\"full\"}", "--boundary", "xsq"]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn repro_all_pass() {
    let t = TempDir::new().unwrap();
    for name in ["ex2.3", "ex5.13", "ex6.6", "ex8.6", "appA-nonclosed", "remark5.10"] {
        let o = t.path().join(name);
        let r = gpsh(&o, &["repro", name]);
        assert_eq!(r.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&r.stderr));
        let v = json(o.join("repro.json"));
        assert_eq!(v["pass"], true);
        schema_check(&o);
    }
    let d = json(t.path().join("ex5.13/repro.json"));
    assert_eq!(d["details"]["locally_convex"], true);
    assert_eq!(d["details"]["globally_convex"], false);
    let d = json(t.path().join("remark5.10/repro.json"));
    assert!(d["details"]["hessian_norm_max_error"].as_f64().unwrap() <= 1e-5);
    let d = json(t.path().join("ex8.6/repro.json"));
    assert_eq!(d["attachment"], "ex8.6_trace.csv");
    let csv = fs::read_to_string(t.path().join("ex8.6/ex8.6_trace.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("y,trace"));
    for l in lines {
        let (y, tr) = l.split_once(',').unwrap();
        let (y, tr): (f64, f64) = (y.parse().unwrap(), tr.parse().unwrap());
        assert!((tr - y * y).abs() <= 1e-4);
    }

    let o = t.path().join("unknown");
    let r = gpsh(&o, &["repro", "ex9.9"]);
    assert_eq!(r.status.code(), Some(2));
    schema_check(&o);
}

#[test]
fn boundary_verdicts() {
    let t = TempDir::new().unwrap();
    let ball3 = r#"{"builtin":"ball","dim":3}"#;
    let o = t.path().join("ball");
    let r = gpsh(&o, &["boundary", "--g", FULL23, "--domain", ball3, "--grid-h", "0.2"]);
    assert_eq!(r.status.code(), Some(0));
    let rep = json(o.join("report.json"));
    assert_eq!(rep["all_strictly_convex"], true);
    let csv = fs::read_to_string(o.join("boundary.csv")).unwrap();
    assert!(csv.starts_with("x0,x1,x2,normal0,normal1,normal2,min_tangential_trace,verdict\n"));
    assert_eq!(csv.lines().count() as u64, rep["samples"].as_u64().unwrap() + 1);
    schema_check(&o);

    let o = t.path().join("hyp");
    let r = gpsh(&o, &["boundary", "--g", r#"{"variant":"full","n":3,"p":1}"#, "--domain", "hyperboloid", "--grid-h", "0.2"]);
    assert_eq!(r.status.code(), Some(0));
    let rep = json(o.join("report.json"));
    assert!(rep["counts"]["not_convex"].as_u64().unwrap() > 0, "{rep:#}");
    assert!(rep["witnesses"]["not_convex"]["x"].is_array());

    let o = t.path().join("free");
    let r = gpsh(&o, &["boundary", "--g", r#"{"variant":"full","n":3,"p":3}"#, "--domain", ball3, "--grid-h", "0.2"]);
    assert_eq!(r.status.code(), Some(0));
    let rep = json(o.join("report.json"));
    let n = rep["samples"].as_u64().unwrap();
    assert!(n > 0);
    assert_eq!(rep["counts"]["free"].as_u64().unwrap(), n);
}

#[test]
fn span_freedim_mp_check() {
    let t = TempDir::new().unwrap();
    let o = t.path().join("span");
    let r = gpsh(&o, &["span", "--g", r#"{"variant":"finite","n":2,"p":1,"planes":[[[1],[0]]]}"#]);
    assert_eq!(r.status.code(), Some(0));
    assert_eq!(json(o.join("span.json"))["involves_all"], false);

    let o = t.path().join("fd");
    let r = gpsh(&o, &["freedim", "--g", r#"{"variant":"full","n":5,"p":3}"#]);
    assert_eq!(r.status.code(), Some(0));
    assert_eq!(json(o.join("freedim.json"))["dim"], 2);

    let o = t.path().join("mp");
    let r = gpsh(&o, &["mp-check", "--g", FULL22, "--h", "1/8", "--radius", "1", "--trials", "20"]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let rep = json(o.join("report.json"));
    assert_eq!(rep["violations"], 0);
    assert_eq!(rep["trials"], 20);
    schema_check(&o);
}

#[test]
fn envelope_and_hull() {
    let t = TempDir::new().unwrap();
    let o = t.path().join("env");
    let g1 = r#"{"variant":"full","n":1,"p":1}"#;
    let r = gpsh(&o, &["envelope", "--g", g1, "--obstacle", "double-well", "--h", "1/16", "--lo=-2", "--hi", "2"]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let csv = fs::read_to_string(o.join("envelope.csv")).unwrap();
    for l in csv.lines().skip(1) {
        let (x, v) = l.split_once(',').unwrap();
        let (x, v): (f64, f64) = (x.parse().unwrap(), v.parse().unwrap());
        let exact = if x.abs() <= 1.0 { 0.0 } else { (x * x - 1.0).powi(2) };
        assert!((v - exact).abs() <= 1e-6, "x = {x}: {v} vs {exact}");
    }
    schema_check(&o);

    let o = t.path().join("hull");
    let pts = "-0.5,-0.5;0.5,-0.5;-0.5,0.5";
    let r = gpsh(&o, &["hull", "--g", FULL12, "--h", "1/16", "--points", pts]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let rep = json(o.join("report.json"));
    assert_eq!(rep["set_points"], 3);
    let sweep = rep["threshold_sweep"].as_array().unwrap();
    let counts: Vec<u64> = sweep.iter().map(|s| s["points"].as_u64().unwrap()).collect();
    assert!(counts.windows(2).all(|w| w[0] >= w[1]), "{counts:?}");
    let csv = fs::read_to_string(o.join("hull.csv")).unwrap();
    assert!(csv.starts_with("x,y,w,in_set,in_hull\n"));
    let centroid = csv
        .lines()
        .skip(1)
        .find(|l| l.starts_with("-0.125,-0.125,"))
        .expect("lattice point inside the triangle");
    assert!(centroid.ends_with(",1"));
    let r = gpsh(&t.path().join("bad"), &["hull", "--g", FULL12, "--h", "1/16", "--points", "5,5"]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn runs_are_deterministic() {
    let t = TempDir::new().unwrap();
    let args = ["hull", "--g", FULL12, "--h", "1/8", "--points", "0,0;0.5,0.5", "--seed", "7"];
    let (a, b) = (t.path().join("a"), t.path().join("b"));
    assert_eq!(gpsh(&a, &args).status.code(), Some(0));
    assert_eq!(gpsh(&b, &args).status.code(), Some(0));
    for f in ["hull.csv", "report.json", "hull.gp"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let (mut ma, mut mb) = (json(a.join("manifest.json")), json(b.join("manifest.json")));
    for m in [&mut ma, &mut mb] {
        m.as_object_mut().unwrap().remove("created_unix");
        m["config"].as_object_mut().unwrap().remove("out");
    }
    assert_eq!(ma, mb);
}

#[test]
fn config_file_and_overrides() {
    let t = TempDir::new().unwrap();
    let cfg = write(
        t.path(),
        "run.toml",
        r#"
        tol = 1e-9
        seed = 3
        boundary = "saddle"
        g = { variant = "full", n = 2, p = 2 }
        [lattice]
        h = 0.125
        radius = 1
        "#,
    );
    let o = t.path().join("a");
    let r = gpsh(&o, &["--config", &cfg, "solve", "--tol", "1e-11"]);
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let m = schema_check(&o);
    assert_eq!(m["config"]["tol"], 1e-11);
    assert_eq!(m["config"]["seed"], 3);
    assert_eq!(m["config"]["lattice"]["h"], 0.125);
    assert_eq!(m["config"]["g"]["variant"], "full");
    assert_eq!(m["config"]["g"]["seed"], 3);
    assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
    assert!(m["outputs"].as_array().unwrap().iter().any(|f| f == "u.csv"));

    let bad = write(t.path(), "bad.toml", "nonsense_key = 1\n");
    let o = t.path().join("b");
    let r = gpsh(&o, &["--config", &bad, "solve"]);
    assert_eq!(r.status.code(), Some(2));
    schema_check(&o);
}
