use std::path::Path;
use std::process::{Command, Output};

use modloc::artifact::RepresentationArtifact;
use serde_json::Value;

fn modloc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_modloc"))
        .args(args)
        .current_dir(dir)
        .env_remove("MODLOC_CONFIG")
        .env("SOURCE_DATE_EPOCH", "0")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn build_echoes_header_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a_dir, b_dir) = (dir.path().join("a"), dir.path().join("b"));
    std::fs::create_dir_all(&a_dir).unwrap();
    std::fs::create_dir_all(&b_dir).unwrap();
    let o = modloc(&["build", "--M", "48", "--out", "x.artifact"], &a_dir);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("k = 1  beta = 1  M = 48"), "{text}");
    assert!(text.contains("tilde: beta_tilde 0.005"), "{text}");

    // the output path is part of the embedded config, so keep it equal
    let o = modloc(&["build", "--M", "48", "--out", "x.artifact"], &b_dir);
    assert_eq!(o.status.code(), Some(0));
    let a = std::fs::read(a_dir.join("x.artifact")).unwrap();
    let b = std::fs::read(b_dir.join("x.artifact")).unwrap();
    assert!(a == b, "rebuilt artifact differs");

    let art = RepresentationArtifact::load(a_dir.join("x.artifact")).unwrap();
    assert_eq!(art.header.m, 48);
    assert_eq!(art.header.provenance["config"]["suite"]["m"], 48);
}

#[test]
fn weight_below_half_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = modloc(&["build", "--k", "0.4", "--M", "16"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error[ConfigError]"), "{}", stderr(&o));
    assert!(!dir.path().join("modloc.artifact").exists());
}

#[test]
fn localize_writes_states_within_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let o = modloc(&["localize", "--interval", "1", "2", "--M", "128", "--out", "loc"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let loc = dir.path().join("loc");
    let summary = read_json(&loc.join("summary.json"));
    assert_eq!(summary["format_version"], 1);
    assert_eq!(summary["config"]["suite"]["intervals"], serde_json::json!([[1.0, 2.0]]));
    let row = &summary["rows"][0];
    assert_eq!(row["in_bounds"], true);
    let t = row["t"].as_f64().unwrap();
    assert!((0.0..=2f64.ln()).contains(&t), "T = {t}");

    let csv = std::fs::read_to_string(loc.join("state_0_0_zt.csv")).unwrap();
    assert!(csv.starts_with("# format_version=1\n# config="));
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(csv.as_bytes());
    assert_eq!(r.headers().unwrap(), vec!["E", "re", "im"]);
    assert_eq!(r.records().count(), 1024);
    assert!(loc.join("state_0_0_z.json").exists());
}

#[test]
fn localize_below_one_has_non_positive_t() {
    let dir = tempfile::tempdir().unwrap();
    let o = modloc(&["localize", "--interval", "0.5", "1", "--M", "128", "--format", "csv", "--out", "loc"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("loc/summary.csv")).unwrap();
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let headers = r.headers().unwrap().clone();
    let col = headers.iter().position(|h| h == "t").unwrap();
    let row = r.records().next().unwrap().unwrap();
    let t: f64 = row[col].parse().unwrap();
    assert!((-(2f64.ln())..=0.0).contains(&t), "T = {t}");
}

#[test]
fn inverted_interval_fails_before_computing() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in ["localize", "verify"] {
        let o = modloc(&[cmd, "--interval", "2", "1", "--out", "x"], dir.path());
        assert_eq!(o.status.code(), Some(2), "{cmd}: {}", stderr(&o));
        assert!(!dir.path().join("x").exists());
    }
}

#[test]
fn unknown_scope_and_profile_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(modloc(&["verify", "--scope", "nonsense"], dir.path()).status.code(), Some(2));
    assert_eq!(modloc(&["verify", "--tol-profile", "lax"], dir.path()).status.code(), Some(2));
}

#[test]
fn scoped_verify_reports_only_that_group() {
    let dir = tempfile::tempdir().unwrap();
    let o = modloc(&["verify", "--M", "64", "--scope", "commutators", "--out", "r.json"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let doc = read_json(&dir.path().join("r.json"));
    assert_eq!(doc["format_version"], 1);
    assert_eq!(doc["config"]["scope"], serde_json::json!(["commutators"]));
    let reports = doc["reports"].as_array().unwrap();
    assert!(!reports.is_empty());
    assert!(reports.iter().all(|r| r["group"] == "commutators"));
    assert_eq!(doc["aggregate"]["passed"], true);
    assert!(dir.path().join("r.csv").exists());
    assert!(dir.path().join("r.curves.csv").exists());
}

#[test]
fn empty_scope_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = modloc(&["verify", "--scope", "--format", "md"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("**PASS**: 0 checks"));
}

#[test]
fn tampered_artifact_fails_lowest_weights() {
    let dir = tempfile::tempdir().unwrap();
    let o = modloc(&["build", "--M", "48", "--out", "good.artifact"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let mut art = RepresentationArtifact::load(dir.path().join("good.artifact")).unwrap();
    let c = art.matrix_mut("C").unwrap();
    for j in 0..c.ncols() {
        for i in 0..c.nrows() {
            c[(i, j)] *= 2.0;
        }
    }
    art.save(dir.path().join("bad.artifact")).unwrap();

    let good = modloc(&["verify", "--artifact", "good.artifact", "--scope", "lowest_weights", "--out", "g.json"], dir.path());
    assert_eq!(good.status.code(), Some(0), "{}", stderr(&good));
    let bad = modloc(&["verify", "--artifact", "bad.artifact", "--scope", "lowest_weights", "--out", "b.json"], dir.path());
    assert_eq!(bad.status.code(), Some(1), "{}", stderr(&bad));
    let doc = read_json(&dir.path().join("b.json"));
    assert_eq!(doc["aggregate"]["passed"], false);
    assert_eq!(doc["config"]["suite"]["m"], 48);
}

#[test]
fn config_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "scope = []\n[suite]\nm = 40\nseed = 7\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_modloc"))
        .args(["verify", "--print-config", "--seed", "9"])
        .current_dir(dir.path())
        .env("MODLOC_CONFIG", "c.toml")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("m = 40"), "{text}");
    assert!(text.contains("seed = 9"), "{text}");
    assert!(text.contains("scope = []"), "{text}");

    std::fs::write(dir.path().join("bad.toml"), "[suite]\nmm = 1\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_modloc"))
        .args(["verify"])
        .current_dir(dir.path())
        .env("MODLOC_CONFIG", "bad.toml")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn report_rerenders_a_verify_document() {
    let dir = tempfile::tempdir().unwrap();
    let o = modloc(&["verify", "--M", "128", "--scope", "j_relations", "f_alpha", "--out", "r.json"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let md = modloc(&["report", "r.json"], dir.path());
    assert_eq!(md.status.code(), Some(0));
    let text = stdout(&md);
    assert!(text.starts_with("# modloc report"));
    assert!(text.contains("```toml\nformat_version = 1"));

    let csv = modloc(&["report", "r.json", "--format", "csv"], dir.path());
    assert!(stdout(&csv).starts_with("# format_version=1\n"));

    let curves = modloc(&["report", "r.json", "--curves", "--out", "c.csv"], dir.path());
    assert_eq!(curves.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("c.csv")).unwrap();
    assert!(text.lines().any(|l| l.starts_with("f_alpha,")), "{text}");
}
