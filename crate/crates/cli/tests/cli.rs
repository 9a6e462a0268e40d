//! End-to-end runs of the `sigma-mono` binary: exit codes, JSON shapes and
//! the documented examples.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use proptest::prelude::*;
use serde_json::Value;
use sigma_mono_cli::{run, SystemSpec, EXIT_FAILURE, EXIT_HYPOTHESIS, EXIT_IO, EXIT_UNDETERMINED};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_sigma-mono"));
    c.env_remove("SIGMA_MONO_LOG");
    c
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn sigma(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout)
        .unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&o.stdout)))
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn assert_valid(schema: &str, instance: &Value) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(format!("{schema}.schema.json"));
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let v = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = v.iter_errors(instance).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "{}: {errors:#?}", path.display());
}

fn verdict(report: &Value) -> &str {
    report["verdict"]["kind"].as_str().unwrap()
}

#[test]
fn classify_fold2_fold4_spec_is_case_i() {
    let o = sigma(&["classify", "--spec", data("fold2_fold4.json").to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = stdout_json(&o);
    assert_valid("sigma_point_report", &r);
    assert_eq!(r["monodromy"]["verdict"], "Monodromic");
    assert_eq!(r["monodromy"]["case"], "i");
    assert_eq!(r["region"], "TangentBoth");
}

#[test]
fn classify_sewing_point() {
    let o = sigma(&["classify", "--spec", data("sewing.json").to_str().unwrap(), "--point", "0.3,0"]);
    assert_eq!(code(&o), 0);
    let r = stdout_json(&o);
    assert_valid("sigma_point_report", &r);
    assert_eq!(r["region"], "Sewing");
    assert_eq!(r["monodromy"]["verdict"], "NotMonodromic");
}

#[test]
fn classify_negative_point_and_off_sigma() {
    let o = sigma(&["classify", "--case", "fold2-fold4", "--point", "-0.5,0"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(stdout_json(&o)["point"][0], -0.5);
    let o = sigma(&["classify", "--case", "fold2-fold4", "--point", "0,1"]);
    assert_eq!(code(&o), EXIT_FAILURE);
    assert!(stderr(&o).contains("not on the switching curve"));
}

#[test]
fn malformed_triple_names_path() {
    let o = sigma(&["classify", "--spec", data("malformed.json").to_str().unwrap()]);
    assert_eq!(code(&o), EXIT_FAILURE);
    assert!(stderr(&o).contains("upper.P[0]"), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
}

#[test]
fn missing_spec_is_io_error() {
    let o = sigma(&["classify", "--spec", "/nonexistent/system.json"]);
    assert_eq!(code(&o), EXIT_IO);
}

#[test]
fn displacement_elementary_degenerate_center() {
    let o = sigma(&["displacement", "--case", "elementary-degenerate", "--params", "a=0,b=1,c=1,d=0"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = stdout_json(&o);
    assert_valid("displacement_report", &r);
    assert_eq!(verdict(&r), "Center");
    assert_eq!(r["free_of_limit_cycles"], true);
    assert_ne!(r["certificate_upper"]["kind"], "None");
    assert_ne!(r["certificate_lower"]["kind"], "None");
}

#[test]
fn displacement_fold2_fold4_leading_four_thirds() {
    let o = sigma(&["displacement", "--spec", data("fold2_fold4.json").to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = stdout_json(&o);
    assert_valid("displacement_report", &r);
    assert_eq!(verdict(&r), "UnstableFocus");
    assert_eq!(r["leading_w_exponent"], 2);
    let c = r["w_coeffs"][r["leading_index"].as_u64().unwrap() as usize].as_f64().unwrap();
    assert!((c - 4.0 / 3.0).abs() < 1e-8, "{c}");
}

#[test]
fn displacement_cusp_fold2_exponent_four_thirds() {
    let o = sigma(&["displacement", "--case", "cusp-fold2", "-p", "b=0.5"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = stdout_json(&o);
    assert_eq!(verdict(&r), "UnstableFocus");
    assert!((r["leading_x0_exponent"].as_f64().unwrap() - 4.0 / 3.0).abs() < 1e-12);
}

#[test]
fn displacement_options_from_spec_and_flags() {
    let spec = data("degenerate_lower.json");
    let o = sigma(&["displacement", "--spec", spec.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = stdout_json(&o);
    assert_eq!(r["w_coeffs"].as_array().unwrap().len(), 6);
    assert_eq!(r["weights_upper"]["wx"], 3);
    let o = sigma(&["displacement", "--spec", spec.to_str().unwrap(), "--order", "4", "--no-cross-check"]);
    let r = stdout_json(&o);
    assert_eq!(r["w_coeffs"].as_array().unwrap().len(), 4);
    assert!(r["transport"]["routes_agree"].is_null());
    assert_valid("displacement_report", &r);
}

#[test]
fn displacement_needs_monodromy_or_override() {
    let saddle = data("saddle.json");
    let o = sigma(&["displacement", "--spec", saddle.to_str().unwrap()]);
    assert_eq!(code(&o), EXIT_UNDETERMINED);
    assert!(stderr(&o).contains("--assume-monodromic"));
    let o = sigma(&["displacement", "--spec", saddle.to_str().unwrap(), "--assume-monodromic"]);
    assert_eq!(code(&o), EXIT_HYPOTHESIS);
    assert!(stderr(&o).contains("theta"), "{}", stderr(&o));
}

#[test]
fn simulate_center_closes() {
    // one loop takes about 44 time units at this amplitude
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("center.csv");
    let o = sigma(&[
        "simulate",
        "--case",
        "cusp-degenerate",
        "-p",
        "b=0",
        "--start",
        "0.05,0",
        "--t",
        "100",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_valid("simulate_summary", &summary);
    let c: Vec<f64> = summary["positive_crossings"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!(c.len() >= 2, "{c:?}");
    assert!((c[0] - c[1]).abs() < 1e-7 && (c[0] - 0.05).abs() < 1e-7, "{c:?}");

    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,x,y,segment"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len() as u64, summary["samples"].as_u64().unwrap());
    assert!(rows.iter().all(|r| r.len() == 4 && r[..3].iter().all(|v| v.parse::<f64>().is_ok())));
    let ts: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert!(ts.windows(2).all(|p| p[1] >= p[0]));

    let events: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("center.csv.events.json")).unwrap()).unwrap();
    assert_valid("events", &events);
    assert!(events.as_array().unwrap().iter().all(|e| e["kind"] == "cross"));
}

#[test]
fn simulate_outward_spiral() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("spiral.csv");
    let spec = data("fold2_fold4.json");
    let o = sigma(&[
        "simulate",
        "--spec",
        spec.to_str().unwrap(),
        "--start",
        "0.02,0",
        "--t",
        "10",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let summary: Value = serde_json::from_slice(&o.stdout).unwrap();
    let c: Vec<f64> = summary["positive_crossings"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!(c.len() >= 2 && c[0] > 0.02 && c.windows(2).all(|p| p[1] > p[0]), "{c:?}");
}

#[test]
fn simulate_zero_span_single_sample() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("z.csv");
    let o = sigma(&[
        "simulate",
        "--case",
        "elementary-degenerate",
        "--start",
        "0.1,0",
        "--t",
        "0",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert_eq!(std::fs::read_to_string(dir.path().join("z.csv.events.json")).unwrap(), "[]");
}

#[test]
fn simulate_unwritable_output() {
    let o = sigma(&[
        "simulate",
        "--case",
        "fold2-fold4",
        "--start",
        "0.02,0",
        "--t",
        "1",
        "--out",
        "/nonexistent/dir/t.csv",
    ]);
    assert_eq!(code(&o), EXIT_IO);
}

#[test]
fn case_study_cusp_fold2_stable() {
    let o = sigma(&["case-study", "cusp-fold2", "-p", "b=-1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let b = stdout_json(&o);
    assert_valid("case_bundle", &b);
    assert_eq!(verdict(&b["displacement"]), "StableFocus");
    assert_eq!(b["verdict_agrees"], true);
    let p = &b["predictions"][0];
    assert!(p["relative_deviation"].as_f64().unwrap() < 1e-6);
    let c = b["simulation"]["positive_crossings"].as_array().unwrap();
    assert!(c.len() >= 2 && c[1].as_f64() < c[0].as_f64());
}

#[test]
fn case_study_fold2_fold4_center() {
    let o = sigma(&["case-study", "fold2-fold4", "--params", "a=1,b=-1,c=0"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let b = stdout_json(&o);
    assert_valid("case_bundle", &b);
    assert_eq!(verdict(&b["displacement"]), "Center");
    assert_eq!(b["classification"]["monodromy"]["case"], "i");
}

#[test]
fn case_study_elementary_degenerate_sign_of_d() {
    // computed verdict for d < 0 is stable; the bundle flags the disagreement
    let o = sigma(&["case-study", "elementary-degenerate", "--params", "a=0,b=1,c=1,d=-1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let b = stdout_json(&o);
    assert_valid("case_bundle", &b);
    assert_eq!(verdict(&b["displacement"]), "StableFocus");
    assert_eq!(b["published_verdict"], "UnstableFocus");
    assert_eq!(b["verdict_agrees"], false);
}

#[test]
fn case_study_all_defaults_validate() {
    for id in ["cusp-fold2", "cusp-degenerate", "fold2-fold4", "elementary-degenerate"] {
        let o = sigma(&["case-study", id]);
        assert_eq!(code(&o), 0, "{id}: {}", stderr(&o));
        assert_valid("case_bundle", &stdout_json(&o));
    }
}

#[test]
fn case_study_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("b.json");
    let o = sigma(&["case-study", "fold2-fold4", "--out", path.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    let b: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(b["id"], "fold2-fold4");
    let o = sigma(&["case-study", "fold2-fold4", "--out", "/nonexistent/dir/b.json"]);
    assert_eq!(code(&o), EXIT_IO);
}

#[test]
fn case_study_errors() {
    let o = sigma(&["case-study", "fold3-fold5"]);
    assert_eq!(code(&o), EXIT_FAILURE);
    assert!(stderr(&o).contains("unknown case study"));
    assert_eq!(code(&sigma(&["case-study", "cusp-fold2", "-p", "a=1"])), EXIT_FAILURE);
    assert_eq!(code(&sigma(&["case-study", "cusp-fold2", "--sweep", "z=0:1:3"])), EXIT_FAILURE);
    assert_eq!(code(&sigma(&["case-study", "cusp-fold2", "--sweep", "b=0:1"])), EXIT_FAILURE);
}

#[test]
fn sweep_tracks_sign_of_divergence() {
    let o = sigma(&["case-study", "fold2-fold4", "-p", "c=0", "--sweep", "a=-2:2:5"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = stdout_json(&o);
    assert_valid("sweep", &rows);
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 5);
    let kinds: Vec<&str> = rows.iter().map(|r| r["verdict"]["kind"].as_str().unwrap()).collect();
    assert_eq!(kinds, ["StableFocus", "Center", "UnstableFocus", "UnstableFocus", "UnstableFocus"]);
    assert!(rows.iter().all(|r| r["verdict_agrees"] == true));
    // same rows as a sequential run
    let again = stdout_json(&sigma(&["case-study", "fold2-fold4", "-p", "c=0", "--sweep", "a=-2:2:5"]));
    assert_eq!(again.as_array().unwrap(), rows);
}

#[test]
fn help_version_and_usage() {
    let o = sigma(&["--help"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("displacement"));
    assert_eq!(code(&sigma(&["--version"])), 0);
    assert_eq!(code(&sigma(&[])), EXIT_FAILURE);
    assert_eq!(code(&sigma(&["classify", "--case", "fold2-fold4", "--point", "1"])), EXIT_FAILURE);
    assert_eq!(code(&sigma(&["displacement", "--case", "fold2-fold4", "--order", "0"])), EXIT_FAILURE);
    assert_eq!(code(&sigma(&["classify", "--spec", "x.json", "--case", "fold2-fold4"])), EXIT_FAILURE);
}

#[test]
fn logging_goes_to_stderr() {
    let o = bin().env("SIGMA_MONO_LOG", "info").args(["displacement", "--case", "fold2-fold4"]).output().unwrap();
    assert_eq!(code(&o), 0);
    assert!(stderr(&o).contains("monodromic"));
    stdout_json(&o);
}

#[test]
fn spec_schema_accepts_shipped_specs_and_round_trip() {
    for name in ["fold2_fold4.json", "sewing.json", "saddle.json", "degenerate_lower.json"] {
        let text = std::fs::read_to_string(data(name)).unwrap();
        let raw: Value = serde_json::from_str(&text).unwrap();
        assert_valid("system_spec", &raw);
        let spec = SystemSpec::parse(&text).unwrap();
        let out = serde_json::to_value(&spec).unwrap();
        assert_valid("system_spec", &out);
        assert_eq!(SystemSpec::parse(&out.to_string()).unwrap(), spec);
    }
}

#[test]
fn schemas_reject_wrong_shapes() {
    let load = |name: &str| {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(format!("{name}.schema.json"));
        jsonschema::validator_for(&serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()).unwrap()
    };
    let mut r = stdout_json(&sigma(&["displacement", "--case", "fold2-fold4"]));
    let v = load("displacement_report");
    assert!(v.is_valid(&r));
    r["verdict"]["kind"] = "Spiral".into();
    assert!(!v.is_valid(&r));
    let spec = load("system_spec");
    assert!(!spec.is_valid(&serde_json::json!({"upper": {"P": [[1, "x", 2]], "Q": []}, "lower": {"P": [], "Q": []}})));
    assert!(!spec.is_valid(&serde_json::json!({"upper": {"P": [], "Q": []}})));
    assert!(!load("events").is_valid(&serde_json::json!([{"t": 0.0, "x": 0.0, "y": 0.0, "kind": "bounce"}])));
}

fn run_on_spec(text: &str) -> i32 {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    std::io::Write::write_all(&mut f, text.as_bytes()).unwrap();
    let path = f.path().to_str().unwrap().to_string();
    match run(["sigma-mono", "classify", "--spec", &path], &mut Vec::new()) {
        Ok(()) => 0,
        Err(e) => e.code,
    }
}

const VALID: &str = r#"{"upper": {"P": [[1, 0, 1], [0, 0, -1]], "Q": [[1, 0, 1], [0, 1, 1]]}, "lower": {"P": [[0, 1, 1], [0, 0, 1]], "Q": [[3, 0, 1], [2, 1, 1]]}}"#;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn truncated_specs_exit_one(cut in 1usize..VALID.len() - 1) {
        prop_assert_eq!(run_on_spec(&VALID[..cut]), EXIT_FAILURE);
    }

    #[test]
    fn corrupted_tokens_exit_one(pos in 0usize..VALID.len(), junk in "[a-z\"{}\\[\\]:,-]{1,3}") {
        // replacing a digit breaks the grammar or the types
        let digits: Vec<usize> = VALID.char_indices().filter(|(_, c)| c.is_ascii_digit()).map(|(i, _)| i).collect();
        let at = digits[pos % digits.len()];
        let text = format!("{}{}{}", &VALID[..at], junk, &VALID[at + 1..]);
        let code = run_on_spec(&text);
        prop_assert!(code == EXIT_FAILURE, "{text} -> {code}");
    }

    #[test]
    fn arbitrary_text_never_succeeds(text in "\\PC{0,40}") {
        prop_assert_eq!(run_on_spec(&text), EXIT_FAILURE);
    }

    #[test]
    fn bad_points_exit_one(s in "[0-9a-z,. -]{0,8}") {
        prop_assume!(sigma_mono_cli::parse_point(&s).is_err());
        let r = run(["sigma-mono", "classify", "--case", "fold2-fold4", "--point", &s], &mut Vec::new());
        prop_assert_eq!(r.unwrap_err().code, EXIT_FAILURE);
    }
}
