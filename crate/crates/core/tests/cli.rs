use std::path::Path;
use std::process::{Command, Output};

fn phifem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phifem")).args(args).output().expect("binary runs")
}

fn files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    v.sort();
    v
}

#[test]
fn list_cases_prints_every_case() {
    let out = phifem(&["list-cases"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let names: Vec<&str> = text.lines().filter(|l| !l.starts_with(' ')).filter_map(|l| l.split_whitespace().next()).collect();
    assert_eq!(
        names,
        ["dirichlet-direct", "dirichlet-dual", "mixed", "mixed-unresolved", "interface", "crack", "crack-unresolved", "heat-dt-h", "heat-dt-h2"]
    );
}

#[test]
fn usage_errors_exit_2_and_write_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    for args in [
        vec!["run", "--case", "bogus", "--out", out],
        vec!["run", "--case", "dirichlet-direct", "--N", "1", "--out", out],
        vec!["run", "--case", "dirichlet-direct", "--degree", "3", "--out", out],
        vec!["run", "--case", "dirichlet-direct", "--param", "sigma_d=-1", "--out", out],
        vec!["run", "--case", "dirichlet-direct", "--param", "nope=1", "--out", out],
        vec!["run", "--case", "heat-dt-h", "--param", "t_final=0", "--out", out],
        vec!["run", "--out", out],
    ] {
        let r = phifem(&args);
        assert_eq!(r.status.code(), Some(2), "{args:?}");
    }
    assert!(files(dir.path()).is_empty());
}

fn strip_timings(csv: &str) -> Vec<String> {
    csv.lines().map(|l| l.split(',').take(6).collect::<Vec<_>>().join(",")).collect()
}

#[test]
fn small_sweep_writes_reports_and_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let args = ["run", "--case", "dirichlet-direct", "--N", "8,4,6", "--out", out, "--threads", "2"];
    let r = phifem(&args);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert_eq!(files(dir.path()), ["dirichlet-direct.csv", "dirichlet-direct.json"]);

    let csv = std::fs::read_to_string(dir.path().join("dirichlet-direct.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("case,N,h,ndofs,rel_l2,rel_h1,assemble_s,solve_s"));
    let ns: Vec<&str> = lines.map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(ns, ["4", "6", "8"]);

    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("dirichlet-direct.json")).unwrap()).unwrap();
    for key in ["case", "params", "rows", "orders"] {
        assert!(json.get(key).is_some(), "missing {key}");
    }
    assert_eq!(json["case"], "dirichlet-direct");
    assert_eq!(json["rows"].as_array().unwrap().len(), 3);
    assert!(json["params"]["sigma_d"].is_number());
    assert!(json["orders"]["l2"].as_f64().unwrap() > 2.0);

    let r = phifem(&args);
    assert!(r.status.success());
    let again = std::fs::read_to_string(dir.path().join("dirichlet-direct.csv")).unwrap();
    assert_eq!(strip_timings(&csv), strip_timings(&again));
}

#[test]
fn format_flags_select_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let r = phifem(&["run", "--case", "heat-dt-h", "--N", "4", "--out", out, "--csv"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert_eq!(files(dir.path()), ["heat-dt-h.csv"]);
}
