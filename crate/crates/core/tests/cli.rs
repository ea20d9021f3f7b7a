use std::process::{Command, Output};

use qbroadcast::cli::{ReportEnvelope, CSV_HEADER};

fn qbroadcast(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qbroadcast"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn exit_codes() {
    assert_eq!(qbroadcast(&["range", "--eta", "0.6"]).status.code(), Some(0));
    assert_eq!(qbroadcast(&["range", "--eta", "1.5"]).status.code(), Some(2));
    assert_eq!(qbroadcast(&["range", "--eta", "abc"]).status.code(), Some(2));
    assert_eq!(qbroadcast(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(qbroadcast(&["clone3", "--alpha-sq", "-0.1"]).status.code(), Some(2));
    assert_eq!(qbroadcast(&["sweep", "--eta-grid", "0.9"]).status.code(), Some(2));
    let o = qbroadcast(&["sweep", "--eta-grid", "0.6", "--alpha-grid", "0.5", "--out", "/nonexistent/dir/r.csv"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(!o.stderr.is_empty());
}

#[test]
fn domain_error_goes_to_stderr() {
    let o = qbroadcast(&["range", "--eta", "1.5"]);
    assert!(o.stdout.is_empty());
    assert!(String::from_utf8_lossy(&o.stderr).contains("eta"));
}

#[test]
fn sweep_csv_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.csv");
    let o = qbroadcast(&[
        "sweep",
        "--eta-grid",
        "0.6,0.6666666666666666",
        "--alpha-grid",
        "0,0.25,0.5,0.75,1",
        "--format",
        "csv",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&path).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rdr.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header.join(","), CSV_HEADER);
    let records: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(records.len(), 10);
    assert_eq!(&records[2][0], "0.6");
    assert_eq!(&records[2][1], "0.5");
    assert_eq!(&records[2][2], "Entangled");
    assert_eq!(&records[0][2], "Separable");
}

#[test]
fn below_threshold_sweep_is_all_separable() {
    let o = qbroadcast(&["sweep", "--eta-grid", "0.5", "--format", "json", "--timestamp", "x"]);
    assert_eq!(o.status.code(), Some(0));
    let env: ReportEnvelope = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(env.rows.len(), 101);
    assert!(env.rows.iter().all(|r| r["nonlocal_verdict"] == "Separable"));
}

#[test]
fn json_round_trips_exactly() {
    for args in [
        vec!["range", "--eta", "0.61", "--numeric"],
        vec!["clone3", "--alpha-sq", "0.3"],
        vec!["nonlocal", "--max-m", "10"],
        vec!["sweep", "--eta-grid", "0.59", "--alpha-grid", "0.1,0.37,0.5"],
    ] {
        let mut full = args.clone();
        full.extend(["--format", "json"]);
        let text = stdout(&qbroadcast(&full));
        let env: ReportEnvelope = serde_json::from_str(&text).unwrap();
        let again = serde_json::to_string_pretty(&env).unwrap() + "\n";
        assert_eq!(again, text, "{args:?}");
        assert_eq!(serde_json::from_str::<ReportEnvelope>(&again).unwrap(), env);
    }
}

#[test]
fn floats_survive_serialization() {
    let o = qbroadcast(&["range", "--eta", "0.6666666666666666", "--format", "json"]);
    let env: ReportEnvelope = serde_json::from_str(&stdout(&o)).unwrap();
    let lo = env.rows[0]["lo"].as_f64().unwrap();
    let direct = qbroadcast::separability::inseparable_alpha_range(0.6666666666666666).unwrap();
    assert_eq!(lo.to_bits(), direct.lo().unwrap().to_bits());
}

#[test]
fn output_is_deterministic() {
    let args = [
        "sweep",
        "--eta-grid",
        "0.58,0.62",
        "--alpha-grid",
        "0.2,0.5,0.8",
        "--format",
        "json",
        "--timestamp",
        "2024-01-01T00:00:00Z",
    ];
    assert_eq!(qbroadcast(&args).stdout, qbroadcast(&args).stdout);
    let csv = ["sweep", "--eta-grid", "0.58,0.62", "--format", "csv"];
    assert_eq!(qbroadcast(&csv).stdout, qbroadcast(&csv).stdout);
    let verify = ["verify", "--format", "json", "--timestamp", "t", "--seed", "7"];
    assert_eq!(qbroadcast(&verify).stdout, qbroadcast(&verify).stdout);
}

#[test]
fn nonlocal_summary() {
    let o = qbroadcast(&["nonlocal", "--max-m", "8"]);
    let text = stdout(&o);
    assert!(text.contains("max entangled copies: 6"), "{text}");
    let row7 = text.lines().find(|l| l.trim_start().starts_with("7 ")).unwrap();
    assert!(row7.contains("0.3142857") && row7.contains("Separable"), "{row7}");
    let row1 = text.lines().find(|l| l.trim_start().starts_with("1 ")).unwrap();
    assert!(row1.contains("Entangled"), "{row1}");
}

#[test]
fn verify_passes() {
    let o = qbroadcast(&["verify"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("0 failed"));
}
