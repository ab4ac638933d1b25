use std::path::Path;
use std::process::{Command, Output};

fn affinv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_affinv")).args(args).env_remove("AFFINV_BUDGET").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

fn generate(dir: &Path, name: &str, args: &[&str]) -> String {
    let out = path(dir, name);
    let mut full = vec!["generate"];
    full.extend_from_slice(args);
    full.extend_from_slice(&["-o", &out]);
    let o = affinv(&full);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn complexity_of_blr_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let blr = generate(dir.path(), "blr.txt", &["blr_constraint", "-p", "2"]);
    let o = affinv(&["complexity", "--constraints", &blr]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "1\n");
}

#[test]
fn tester_accepts_free_fixture_and_rejects_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let blr = generate(dir.path(), "blr.txt", &["blr_constraint", "-p", "2"]);
    let lin = generate(dir.path(), "lin.txt", &["degree_d_table", "-p", "2", "-n", "5", "-d", "1", "--seed", "4"]);
    let o = affinv(&["--json", "test", "--constraints", &blr, "--function", &lin, "--trials", "300"]);
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["rejections"], 0);
    assert_eq!(report["verdict"], "accept");

    let pv = generate(dir.path(), "pv.txt", &["planted_violations", "-p", "2", "-n", "4", "--count", "3", "--seed", "2"]);
    let o = affinv(&["test", "--constraints", &blr, "--function", &pv, "--trials", "300"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("witness"));
}

#[test]
fn budget_exhaustion_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let blr = generate(dir.path(), "blr.txt", &["blr_constraint", "-p", "2"]);
    let lin = generate(dir.path(), "lin.txt", &["degree_d_table", "-p", "2", "-n", "5", "-d", "1"]);
    let o = affinv(&["--budget", "2", "distance", "--function", &lin, "--degree", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_affinv"))
        .args(["test", "--constraints", &blr, "--function", &lin, "--trials", "5"])
        .env("AFFINV_BUDGET", "1")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(affinv(&["no-such-command"]).status.code(), Some(64));
    assert_eq!(affinv(&["complexity", "--constraints", "/nonexistent/file"]).status.code(), Some(64));
    assert_eq!(affinv(&["--help"]).status.code(), Some(0));
}

#[test]
fn generate_is_deterministic() {
    let a = affinv(&["generate", "random_function", "-p", "3", "-n", "2", "-r", "3", "--seed", "9"]);
    let b = affinv(&["generate", "random_function", "-p", "3", "-n", "2", "-r", "3", "--seed", "9"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = affinv(&["generate", "random_function", "-p", "3", "-n", "2", "-r", "3", "--seed", "10"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn degree_table_has_distance_zero() {
    let dir = tempfile::tempdir().unwrap();
    let t = generate(dir.path(), "t.txt", &["degree_d_table", "-p", "2", "-n", "4", "-d", "1", "--seed", "7"]);
    let o = affinv(&["distance", "--function", &t, "--degree", "1"]);
    assert_eq!(stdout(&o), "0\n");
}

#[test]
fn planted_density_is_reported() {
    let o = affinv(&["--json", "generate", "planted_violations", "-p", "2", "-n", "3", "--count", "1", "--seed", "1"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["violation_density"].as_f64().unwrap() > 0.0);
    assert!(v["content"].as_str().unwrap().starts_with("# planted points"));
}

#[test]
fn reports_do_not_depend_on_threads() {
    let dir = tempfile::tempdir().unwrap();
    let blr = generate(dir.path(), "blr.txt", &["blr_constraint", "-p", "2"]);
    let f = generate(dir.path(), "f.txt", &["random_function", "-p", "2", "-n", "5", "-r", "2", "--seed", "1"]);
    for args in [
        vec!["--json", "test", "--constraints", &blr, "--function", &f, "--trials", "40", "--seed", "3"],
        vec!["--json", "gowers", "--function", &f, "-k", "3", "--samples", "5000", "--seed", "2"],
        vec!["--json", "gowers", "--function", &f, "-k", "2"],
    ] {
        let one = affinv(&[&["--threads", "1"], args.as_slice()].concat());
        let four = affinv(&[&["--threads", "4"], args.as_slice()].concat());
        assert!(!one.stdout.is_empty());
        assert_eq!(one.stdout, four.stdout, "{args:?}");
    }
}

#[test]
fn decompose_select_cleanup_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let f = generate(dir.path(), "f.txt", &["random_function", "-p", "2", "-n", "5", "-r", "2", "--seed", "5"]);
    let out = path(dir.path(), "dec");
    let o = affinv(&["--json", "decompose", "--function", &f, "-d", "1", "--mode", "super", "--out-dir", &out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rec = path(dir.path(), "dec/decomposition.json");
    let record: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&rec).unwrap()).unwrap();
    assert_eq!(record["mode"], "super");
    assert!(record["refined"].as_str().unwrap().starts_with("2 5 "));
    let trace = std::fs::read_to_string(path(dir.path(), "dec/trace.jsonl")).unwrap();
    assert!(trace.lines().all(|l| serde_json::from_str::<serde_json::Value>(l).is_ok()));

    let o = affinv(&["--json", "select-subcell", "--function", &f, "--decomposition", &rec, "--seed", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let sel: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let s: Vec<String> = sel["s"].as_array().unwrap().iter().map(|v| v.to_string()).collect();
    let cleaned = path(dir.path(), "g.txt");
    let o = affinv(&[
        "--json",
        "cleanup",
        "--function",
        &f,
        "--decomposition",
        &rec,
        "--subcell",
        &s.join(","),
        "--out",
        &cleaned,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let c: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(c["distance"].as_f64().unwrap() <= c["bound"].as_f64().unwrap());
    assert!(std::fs::read_to_string(&cleaned).unwrap().starts_with("2 5 2\n"));
}

#[test]
fn experiment_runs_selected_criteria() {
    let dir = tempfile::tempdir().unwrap();
    let csv = path(dir.path(), "stats.csv");
    let o = affinv(&["experiment", "--criterion", "4", "--criterion", "5", "--csv", &csv]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("2 of 2 criteria passed"));
    assert!(std::fs::read_to_string(&csv).unwrap().starts_with("criterion,name,kind,key,value\n"));
}

#[test]
fn factor_stats_and_consistency() {
    let dir = tempfile::tempdir().unwrap();
    let b = generate(dir.path(), "b.txt", &["linear_factor", "-p", "3", "-n", "3", "-c", "2", "--seed", "1"]);
    let o = affinv(&["--json", "factor-stats", "--factor", &b]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["cells"], 9);
    assert_eq!(v["nonempty"], 9);
    assert_eq!(v["bias"]["exhaustive"], true);

    let blr = generate(dir.path(), "blr.txt", &["blr_constraint", "-p", "2"]);
    let o = affinv(&["consistency", "--constraints", &blr, "--degrees", "1", "--images", "0;1;1;0"]);
    assert_eq!(stdout(&o), "consistent\n");
    let o = affinv(&["consistency", "--constraints", &blr, "--degrees", "1", "--images", "0;1;1;1"]);
    assert_eq!(stdout(&o), "inconsistent\n");
}
