use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fracemb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracemb")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn schema_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas/v1")
}

fn validate(schema: &str, doc: &Value) {
    let text = std::fs::read_to_string(schema_dir().join(schema)).unwrap();
    let schema: Value = serde_json::from_str(&text).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(doc).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "{schema}: {errors:#?}");
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Checks every JSON file in an output directory against its schema.
fn validate_dir(dir: &Path, report_schema: &str) {
    let manifest = read_json(&dir.join("manifest.json"));
    validate("manifest.schema.json", &manifest);
    for entry in manifest["outputs"].as_array().unwrap() {
        let file = entry["file"].as_str().unwrap();
        assert!(dir.join(file).exists(), "{file} listed but missing");
        if file.ends_with(".csv.json") {
            validate("profile.schema.json", &read_json(&dir.join(file)));
        } else if file.ends_with(".json") {
            validate(report_schema, &read_json(&dir.join(file)));
        }
    }
}

#[test]
fn example_three_reports_the_published_interval() {
    let out = fracemb(&["exponents", "--example", "3", "--N", "3", "--s", "0.75"]);
    assert_eq!(code(&out), 0);
    let doc = stdout_json(&out);
    validate("exponents.schema.json", &doc);
    assert_eq!(doc["report"]["q_single_interval"]["lo"], 2.0);
    assert_eq!(doc["report"]["q_single_interval"]["hi"], 4.0);
    assert_eq!(doc["matches_published"], true);
}

#[test]
fn example_four_is_compact_for_every_exponent() {
    let out = fracemb(&["exponents", "--example", "4", "--a", "1", "--b", "1", "--d", "0"]);
    assert_eq!(code(&out), 0);
    let doc = stdout_json(&out);
    validate("exponents.schema.json", &doc);
    assert_eq!(doc["published"]["statement"], "compact for every q > 1");
    assert_eq!(doc["matches_published"], true);
}

#[test]
fn usage_errors_exit_with_two() {
    let out = fracemb(&["exponents", "--family", "power", "--a", "0", "--b", "-3", "--N", "3", "--s", "0.75"]);
    assert_eq!(code(&out), 2);
    assert!(!out.stderr.is_empty());
    assert_eq!(code(&fracemb(&["exponents", "--s", "1.5"])), 2);
    assert_eq!(code(&fracemb(&["verify", "nonsense"])), 2);
    assert_eq!(code(&fracemb(&["solve", "--q", "1.5"])), 2);
    assert_eq!(code(&fracemb(&["solve", "--config", "/nonexistent/fracemb.toml"])), 2);

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[solver]\nbogus = 1\n").unwrap();
    assert_eq!(code(&fracemb(&["solve", "--config", cfg.to_str().unwrap()])), 2);
}

#[test]
fn solver_failure_exits_with_one_and_dumps_history() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tight.toml");
    std::fs::write(&cfg, "[solver]\nmax_outer = 3\ntol = 1e-30\n").unwrap();
    let out = fracemb(&["solve", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("history"), "{err}");
}

#[test]
fn supercritical_solve_warns_before_running() {
    let out = fracemb(&["solve", "--q", "5"]);
    assert_eq!(code(&out), 0);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("outside admissible range (2, 4)"), "{err}");
    let doc = stdout_json(&out);
    validate("solve.schema.json", &doc);
    assert_eq!(code(&fracemb(&["solve", "--q", "5", "--strict"])), 1);
}

#[test]
fn solve_outputs_match_their_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let out = fracemb(&["solve", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    validate_dir(dir.path(), "solve.schema.json");
    let doc = read_json(&dir.path().join("solve.json"));
    let sol = &doc["solutions"][0];
    assert!(sol["grad_norm"].as_f64().unwrap() < 1e-6);
    assert!(sol["energy"].as_f64().unwrap() > 0.0);
    assert_eq!(sol["nonneg"], true);
}

#[test]
fn verify_campaigns_match_their_schemas() {
    for campaign in ["strauss", "s0-decay", "sinf-decay", "lemma41", "annulus"] {
        let dir = tempfile::tempdir().unwrap();
        let out = fracemb(&["verify", campaign, "--out", dir.path().to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{campaign}: {}", String::from_utf8_lossy(&out.stderr));
        validate_dir(dir.path(), "verify.schema.json");
        let doc = read_json(&dir.path().join("verify.json"));
        assert_eq!(doc["summary"]["failed"], 0, "{campaign}");
        let csvs = std::fs::read_dir(dir.path()).unwrap().filter(|e| {
            e.as_ref().unwrap().path().extension().is_some_and(|x| x == "csv")
        });
        assert_eq!(csvs.count(), 1, "{campaign}");
    }
}

#[test]
fn s0_series_has_one_row_per_radius() {
    let dir = tempfile::tempdir().unwrap();
    let out = fracemb(&["verify", "s0-decay", "--R-grid", "0.1,0.2,0.4", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    let csv = std::fs::read_to_string(dir.path().join("s0-decay.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    let doc = stdout_json(&out);
    let fit = doc["reports"].as_array().unwrap().iter().find(|r| r["operation"] == "decay_rate_fit").unwrap();
    assert!(fit["inputs"]["delta"].is_number());
}

#[test]
fn lemma41_campaign_has_150_records() {
    let out = fracemb(&["verify", "lemma41"]);
    assert_eq!(code(&out), 0);
    let doc = stdout_json(&out);
    assert_eq!(doc["reports"].as_array().unwrap().len(), 150);
    assert_eq!(doc["summary"]["passed"], 150);
}

#[test]
fn sweep_outputs_match_their_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let out = fracemb(&["sweep", "--s-grid", "0.6,0.75,0.9", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    validate_dir(dir.path(), "sweep.schema.json");
    let doc = read_json(&dir.path().join("sweep.json"));
    assert_eq!(doc["rows"].as_array().unwrap().len(), 3);
}

#[test]
fn exponents_output_directory_is_described_by_its_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = fracemb(&["exponents", "--example", "1", "--a", "1", "--b", "0.5", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    validate_dir(dir.path(), "exponents.schema.json");
}

fn output_hashes(dir: &Path) -> Value {
    read_json(&dir.join("manifest.json"))["outputs"].clone()
}

#[test]
fn repeated_runs_are_hash_identical() {
    for args in [vec!["verify", "s0-decay"], vec!["verify", "lemma41", "--seed", "11"], vec!["solve"]] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        for d in [&a, &b] {
            let mut full = args.clone();
            full.extend(["--out", d.path().to_str().unwrap()]);
            assert_eq!(code(&fracemb(&full)), 0);
        }
        assert_eq!(output_hashes(a.path()), output_hashes(b.path()), "{args:?}");
    }
}

#[test]
fn different_seeds_change_the_random_campaigns() {
    let a = stdout_json(&fracemb(&["verify", "lemma41", "--seed", "1"]));
    let b = stdout_json(&fracemb(&["verify", "lemma41", "--seed", "2"]));
    assert_ne!(a["reports"], b["reports"]);
}
