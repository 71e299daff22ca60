use std::path::Path;
use std::process::{Command, Output};

const SQUARE: &str = r#"{"vertices": [[0, 0], [1, 0], [1, 1], [0, 1]], "sigma": [1, 1, 1, 1], "base_point": [0.5, 0.5]}"#;

fn abreu(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_abreu")).current_dir(dir).env_remove("ABREU_THREADS").args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("square.json"), SQUARE).unwrap();
    dir
}

fn solved(dir: &Path) {
    let o = abreu(dir, &["solve", "square.json", "--A", "4", "--out", "sol.json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn check_prints_the_constant() {
    let dir = workspace();
    let o = abreu(dir.path(), &["check", "square.json"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).starts_with("A = 4 "), "{}", stdout(&o));
    assert_eq!(code(&abreu(dir.path(), &["check", "square.json", "--A", "5"])), 2);
    assert_eq!(code(&abreu(dir.path(), &["check", "missing.json"])), 2);
    std::fs::write(dir.path().join("bad.json"), r#"{"vertices": [[0, 0], [1, 1], [1, 0]], "sigma": [1, 1, 1], "base_point": [0.6, 0.3]}"#)
        .unwrap();
    assert_eq!(code(&abreu(dir.path(), &["check", "bad.json"])), 2);
}

#[test]
fn solve_writes_a_converged_solution() {
    let dir = workspace();
    solved(dir.path());
    let text = std::fs::read_to_string(dir.path().join("sol.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!(v["solver"]["residual_rms"].as_f64().unwrap() < 1e-8);
    assert_eq!(v["solver"]["converged"], true);
    let leftovers: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with(".tmp"))
        .collect();
    assert!(leftovers.is_empty());
}

#[test]
fn solver_failure_exits_three() {
    let dir = workspace();
    let o = abreu(
        dir.path(),
        &["solve", "square.json", "--A", "4 + 0.1*(x-0.5)*(y-0.5)", "--max-iter", "1", "--tol", "1e-14", "--out", "x.json"],
    );
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!dir.path().join("x.json").exists());
    assert_eq!(code(&abreu(dir.path(), &["solve", "square.json", "--A", "x +", "--out", "x.json"])), 2);
}

#[test]
fn verify_exit_codes() {
    let dir = workspace();
    solved(dir.path());
    let d = dir.path();
    let o = abreu(d, &["verify", "sol.json", "--checks", "s_forms,chi", "--report", "r.json"]);
    assert_eq!(code(&o), 0);
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("r.json")).unwrap()).unwrap();
    assert_eq!(r["passed"], true);
    assert_eq!(r["checks"].as_array().unwrap().len(), 2);

    std::fs::write(d.join("corrupt.json"), "{\"polygon\": ").unwrap();
    assert_eq!(code(&abreu(d, &["verify", "corrupt.json", "--report", "r2.json"])), 2);
    assert!(!d.join("r2.json").exists());
    assert_eq!(code(&abreu(d, &["verify", "sol.json", "--checks", "no_such_check"])), 2);

    // the identity on a disc involves A, so a wrong forcing breaks it
    let text = std::fs::read_to_string(d.join("sol.json")).unwrap().replace("\"forcing\": 4.0", "\"forcing\": 5.0");
    std::fs::write(d.join("wrong.json"), text).unwrap();
    let o = abreu(d, &["verify", "wrong.json", "--checks", "mean_value_identity", "--report", "r3.json"]);
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(d.join("r3.json").exists());
}

#[test]
fn grid_contract() {
    let dir = workspace();
    solved(dir.path());
    let d = dir.path();
    assert_eq!(code(&abreu(d, &["grid", "sol.json", "--n", "3", "--out", "g.csv"])), 0);
    let text = std::fs::read_to_string(d.join("g.csv")).unwrap();
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    let header = rows.headers().unwrap().clone();
    let s = header.iter().position(|h| h == "S").unwrap();
    let records: Vec<_> = rows.records().map(|r| r.unwrap()).collect();
    assert_eq!(records.len(), 9);
    assert!(records.iter().all(|r| &r[s] == "4.00000000000"));
    assert_eq!(code(&abreu(d, &["grid", "sol.json", "--n", "3", "--out", "g2.csv"])), 0);
    assert_eq!(std::fs::read(d.join("g2.csv")).unwrap(), text.as_bytes());

    assert_eq!(code(&abreu(d, &["grid", "sol.json", "--n", "0"])), 2);
    assert_eq!(code(&abreu(d, &["grid", "sol.json", "--n", "3", "--out", "no/such/dir/g.csv"])), 2);
    let o = abreu(d, &["grid", "sol.json", "--n", "2"]);
    assert_eq!(stdout(&o).lines().count(), 5);
}

#[test]
fn conjugate_sections_lambda_chi() {
    let dir = workspace();
    solved(dir.path());
    let d = dir.path();
    let o = abreu(d, &["conjugate", "sol.json", "--grid", "6", "--origin", "0,0", "--csv", "h.csv", "--report", "h.json"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let h: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("h.json")).unwrap()).unwrap();
    assert!((h["K"].as_f64().unwrap() - 2f64.sqrt()).abs() < 1e-12);
    for key in ["sup_grad_h", "sup_w", "sup_v", "qh_residual", "boundary_deviation"] {
        assert!(h[key].is_number(), "{key}");
    }
    let csv_text = std::fs::read_to_string(d.join("h.csv")).unwrap();
    assert!(csv_text.starts_with("x,y,H,w1,w2\n"));
    assert_eq!(csv_text.lines().count(), 37);

    let o = abreu(
        d,
        &[
            "sections",
            "sol.json",
            "--point",
            "0.5,0.5",
            "--levels",
            "0.05,0.1,9",
            "--rays",
            "64",
            "--report",
            "s.json",
            "--polylines",
            "p.csv",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("s.json")).unwrap()).unwrap();
    let secs = s["sections"].as_array().unwrap();
    assert!(secs[0]["volume"].as_f64().unwrap() > 0.0);
    assert!(secs[2]["error"].is_string());
    assert_eq!(std::fs::read_to_string(d.join("p.csv")).unwrap().lines().count(), 1 + 2 * 64);
    assert_eq!(code(&abreu(d, &["sections", "sol.json", "--point", "2,2", "--levels", "0.1"])), 2);

    let o = abreu(d, &["lambda", "square.json", "--directions", "8", "--offsets", "8"]);
    assert_eq!(code(&o), 0);
    let l: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(l["lambda_lb"].as_f64().unwrap() >= 5.0 / 3.0);
    assert_eq!(l["kernel_residuals"].as_array().unwrap().len(), 3);

    let o = abreu(d, &["chi", "sol.json", "sol.json", "--report", "c.json"]);
    assert_eq!(code(&o), 0);
    let c: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("c.json")).unwrap()).unwrap();
    assert!((c["values"][0].as_f64().unwrap() + 8.0).abs() < 1e-9);
    assert_eq!(c["spread"].as_f64().unwrap(), 0.0);
}
