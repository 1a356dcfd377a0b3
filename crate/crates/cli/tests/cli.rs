//! End-to-end tests of the `kfan` binary: exit codes, schema conformance and determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use jsonschema::JSONSchema;
use serde_json::Value;

const SUBCOMMANDS: [&str; 8] = ["project", "dirderiv", "gph-check", "kkt", "sosc", "srcq", "calmness", "error-bound"];

const SCALAR_NLS: &str = r#"{"kind":"nls","m":1,"n":1,"A":{"rows":1,"cols":1,"data":[1]},"b":[3],"rho":1}"#;

fn kfan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kfan"))
        .args(args)
        .env_remove("KFAN_SEED")
        .env_remove("KFAN_TOL")
        .output()
        .expect("binary runs")
}

fn schema_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas")
}

fn load_schema(name: &str) -> Value {
    let path = schema_dir().join(format!("{name}.schema.json"));
    serde_json::from_str(&std::fs::read_to_string(&path).expect("schema exists")).expect("schema is json")
}

fn assert_valid(schema: &str, v: &Value) {
    let raw = load_schema(schema);
    let compiled = JSONSchema::compile(&raw).expect("schema compiles");
    let msgs: Vec<String> = match compiled.validate(v) {
        Ok(()) => Vec::new(),
        Err(errors) => errors.map(|e| format!("{} at {}", e, e.instance_path)).collect(),
    };
    assert!(msgs.is_empty(), "{schema} schema rejects output: {msgs:?}\n{v:#}");
}

fn json_of(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("stdout is not json ({e}): {}", String::from_utf8_lossy(&out.stdout)))
}

fn point(t: f64, rows: usize, cols: usize, data: &[f64]) -> String {
    serde_json::json!({"t": t, "x": {"rows": rows, "cols": cols, "data": data}}).to_string()
}

#[test]
fn help_succeeds_for_every_subcommand() {
    assert_eq!(kfan(&["--help"]).status.code(), Some(0));
    for sub in SUBCOMMANDS {
        let out = kfan(&[sub, "--help"]);
        assert_eq!(out.status.code(), Some(0), "{sub} --help");
        assert!(!out.stdout.is_empty());
    }
}

#[test]
fn input_schemas_accept_examples_and_reject_bad_shapes() {
    let p: Value = serde_json::from_str(&point(0.0, 1, 1, &[2.0])).unwrap();
    assert_valid("point", &p);
    assert_valid("instance", &serde_json::from_str(SCALAR_NLS).unwrap());
    let bad = JSONSchema::compile(&load_schema("point")).unwrap();
    assert!(!bad.is_valid(&serde_json::json!({"t": 0.0})));
    assert!(!bad.is_valid(&serde_json::json!({"t": 0.0, "x": {"rows": 1, "cols": 1, "data": [1.0]}, "extra": 1})));
}

#[test]
fn planar_projection() {
    let out = kfan(&["project", "--k", "1", "--point", &point(0.0, 1, 1, &[2.0])]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert_valid("project", &v);
    assert_eq!(v["regime"], "boundary_pos");
    assert!((v["onto_k"]["t"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((v["onto_k"]["x"]["data"][0].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((v["onto_kpolar"]["t"].as_f64().unwrap() + 1.0).abs() < 1e-12);
}

#[test]
fn projection_reads_files_and_writes_out() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("p.json");
    let output = dir.path().join("r.json");
    std::fs::write(&input, point(-1.0, 2, 3, &[1.0, 2.0, 0.0, -1.0, 0.5, 3.0])).unwrap();
    let arg = format!("@{}", input.display());
    let out = kfan(&["project", "--k", "2", "--point", &arg, "--out", output.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&output).unwrap()).unwrap();
    assert_valid("project", &v);
}

#[test]
fn dirderiv_output_conforms() {
    let base = point(1.0, 2, 2, &[1.0, 0.0, 0.0, 1.0]);
    let dir = point(0.3, 2, 2, &[1.0, 0.5, -0.2, 0.1]);
    let out = kfan(&["dirderiv", "--k", "1", "--point", &base, "--direction", &dir]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json_of(&out);
    assert_valid("dirderiv", &v);
    assert_eq!(v["block_equations"]["holds"], true);
}

#[test]
fn gph_check_agrees_and_is_deterministic() {
    let args = ["gph-check", "--samples", "25", "--seed", "7"];
    let a = kfan(&args);
    let b = kfan(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let v = json_of(&a);
    assert_valid("gph-check", &v);
    assert_eq!(v["disagreements"], 0);
}

#[test]
fn kkt_commands_on_fixtures() {
    for (cmd, schema) in [("kkt", "kkt"), ("sosc", "sosc"), ("srcq", "srcq"), ("calmness", "calmness")] {
        let out = kfan(&[cmd, "--fixture", "scalar-nls", "--samples", "20"]);
        assert_eq!(out.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
        assert_valid(schema, &json_of(&out));
    }
    // the doubled constraint has non-unique multipliers
    for cmd in ["srcq", "calmness"] {
        let out = kfan(&[cmd, "--fixture", "rank-deficient", "--samples", "20"]);
        assert_eq!(out.status.code(), Some(1), "{cmd}");
        assert_valid(cmd, &json_of(&out));
    }
}

#[test]
fn kkt_solves_user_instances_and_checks_given_triples() {
    let out = kfan(&["kkt", "--instance", SCALAR_NLS]);
    assert_eq!(out.status.code(), Some(0));
    let v = json_of(&out);
    assert_valid("kkt", &v);
    assert_eq!(v["triple_source"], "solved");
    assert!((v["objective"].as_f64().unwrap() - 2.5).abs() < 1e-8);

    let good = serde_json::json!({"x": {"t": 2.0, "x": {"rows": 1, "cols": 1, "data": [2.0]}}, "lambda": [],
                                  "y": {"t": -1.0, "x": {"rows": 1, "cols": 1, "data": [1.0]}}});
    assert_valid("triple", &good);
    let out = kfan(&["kkt", "--instance", SCALAR_NLS, "--triple", &good.to_string()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json_of(&out)["triple_source"], "given");

    let bad = serde_json::json!({"x": {"t": 2.0, "x": {"rows": 1, "cols": 1, "data": [1.0]}}, "lambda": [],
                                 "y": {"t": -1.0, "x": {"rows": 1, "cols": 1, "data": [1.0]}}});
    let out = kfan(&["kkt", "--instance", SCALAR_NLS, "--triple", &bad.to_string()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json_of(&out)["is_kkt"], false);
}

#[test]
fn error_bound_csv_and_summary_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |tag: &str| {
        let csv = dir.path().join(format!("{tag}.csv"));
        let summary = dir.path().join(format!("{tag}.json"));
        let out = kfan(&[
            "error-bound",
            "--fixture",
            "scalar-nls",
            "--samples",
            "8",
            "--seed",
            "3",
            "--out",
            csv.to_str().unwrap(),
            "--summary",
            summary.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        (std::fs::read_to_string(csv).unwrap(), std::fs::read_to_string(summary).unwrap())
    };
    let (csv_a, sum_a) = run("a");
    let (csv_b, sum_b) = run("b");
    assert_eq!(csv_a, csv_b);
    assert_eq!(sum_a, sum_b);
    let mut lines = csv_a.lines();
    assert_eq!(lines.next(), Some("sample_id,scale,delta_norm,psi_norm,piK_Y_norm,distance,ratio,solver_iters,flag"));
    assert_eq!(lines.count(), 8 * 3);
    let v: Value = serde_json::from_str(&sum_a).unwrap();
    assert_valid("error-bound-summary", &v);
    assert_eq!(v["calm_evidence"], true);
}

#[test]
fn seed_comes_from_the_environment() {
    let flag = kfan(&["gph-check", "--samples", "5", "--seed", "11"]);
    let env = Command::new(env!("CARGO_BIN_EXE_kfan"))
        .args(["gph-check", "--samples", "5"])
        .env("KFAN_SEED", "11")
        .output()
        .unwrap();
    assert_eq!(flag.stdout, env.stdout);
}

#[test]
fn exit_codes_for_bad_input() {
    assert_eq!(kfan(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(kfan(&["project", "--k", "1"]).status.code(), Some(2));
    assert_eq!(kfan(&["project", "--k", "1", "--point", "{not json"]).status.code(), Some(2));
    assert_eq!(kfan(&["project", "--k", "3", "--point", &point(0.0, 1, 1, &[2.0])]).status.code(), Some(2));
    assert_eq!(kfan(&["project", "--k", "1", "--point", &point(0.0, 1, 2, &[2.0])]).status.code(), Some(2));
    assert_eq!(kfan(&["kkt", "--fixture", "unknown"]).status.code(), Some(2));
    assert_eq!(kfan(&["kkt", "--fixture", "scalar-nls", "--instance", SCALAR_NLS]).status.code(), Some(2));
    assert_eq!(
        kfan(&["project", "--k", "1", "--tol", "-1", "--point", &point(0.0, 1, 1, &[2.0])]).status.code(),
        Some(2)
    );
    let quad = r#"{"kind":"quadratic","m":1,"n":1,"k":1,"Q":{"rows":2,"cols":2,"data":[1,0,0,1]},"c":[0,0]}"#;
    assert_eq!(kfan(&["error-bound", "--instance", quad]).status.code(), Some(2));
}
