use std::path::Path;
use std::process::Command;

fn sep(args: &[&str], out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_sep")).args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn validate_defaults_pass() {
    let dir = tempfile::tempdir().unwrap();
    let out = sep(&["validate", "--seed", "1"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let table = read(&dir.path().join("validate.csv"));
    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert!(rows.len() >= 5);
    assert!(rows.iter().all(|r| r.split(',').nth(1) == Some("true")), "{table}");
    let summary: serde_json::Value = serde_json::from_str(&read(&dir.path().join("validate.json"))).unwrap();
    assert_eq!(summary["results"]["passed"], summary["results"]["checks"]);
}

#[test]
fn malformed_law_is_usage_error_without_files() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("run");
    let out = sep(&["simulate", "--law", "uniform(0.6"], &target);
    assert_eq!(out.status.code(), Some(2));
    assert!(!target.exists());
    let out = sep(&["exact", "--rho", "1.5"], &target);
    assert_eq!(out.status.code(), Some(2));
    let out = sep(&["exact", "--law", "uniform(0.1,0.3)"], &target);
    assert_eq!(out.status.code(), Some(2), "non-ballistic law");
    assert!(!target.exists());
}

#[test]
fn scaling_writes_records_and_slope() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["scaling", "--law", "uniform(0.6,0.9)", "--grid", "8,12,16,24", "--replicas", "20", "--seed", "5"];
    let out = sep(&args, dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = read(&dir.path().join("scaling.csv"));
    let records = sep_core::estimate::read_scaling_csv(text.as_bytes()).unwrap();
    assert_eq!(records.len(), 4 * 5 + 1);
    assert_eq!(records.last().unwrap().estimator, sep_core::estimate::SLOPE_ESTIMATOR);
    assert!(records[..20].iter().all(|r| r.estimator == "coalescence" && r.regime == "non-nestling"));
    let summary: serde_json::Value = serde_json::from_str(&read(&dir.path().join("scaling.json"))).unwrap();
    assert!(summary["results"]["slope"].is_number());
}

#[test]
fn identical_seed_gives_identical_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for cmd in
        [&["simulate", "--n", "10", "--horizon", "5", "--seed", "9"][..], &["exact", "--n", "6", "--seed", "9"][..]]
    {
        assert_eq!(sep(cmd, a.path()).status.code(), Some(0));
        assert_eq!(sep(cmd, b.path()).status.code(), Some(0));
        let name = cmd[0];
        for ext in ["csv", "json"] {
            let f = format!("{name}.{ext}");
            assert_eq!(read(&a.path().join(&f)), read(&b.path().join(&f)), "{f}");
        }
    }
}

#[test]
fn config_file_mirrors_flags_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "n = 7\nk = 3\nseed = 2\nlaw = \"constant(0.75)\"\n").unwrap();
    let out = sep(&["exact", "--config", cfg.to_str().unwrap(), "--n", "6"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_str(&read(&dir.path().join("exact.json"))).unwrap();
    assert_eq!(summary["settings"]["n"], 6);
    assert_eq!(summary["settings"]["k"], 3);
    assert_eq!(summary["results"]["states"], 20);
    std::fs::write(&cfg, "typo = 1\n").unwrap();
    assert_eq!(sep(&["exact", "--config", cfg.to_str().unwrap()], dir.path()).status.code(), Some(2));
}

#[test]
fn rows_follow_their_schemas() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        sep(&["boundary", "--m", "4", "--replicas", "2000", "--horizon", "100"], dir.path()).status.code(),
        Some(0)
    );
    let profile = read(&dir.path().join("boundary.csv"));
    let mut lines = profile.lines();
    assert_eq!(lines.next(), Some("M,c,site,density,stderr"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().all(|r| r.len() == 5 && r[3].parse::<f64>().is_ok()));
    assert_eq!(rows[0][3].parse::<f64>().unwrap(), 0.875);

    assert_eq!(sep(&["censor", "--n", "5", "--k", "2"], dir.path()).status.code(), Some(0));
    let table = read(&dir.path().join("censor.csv"));
    assert!(table.starts_with("time,censored_tv,uncensored_tv,dominates,margin\n"));
    assert!(table.lines().skip(1).all(|l| l.split(',').nth(3) == Some("true")));

    assert_eq!(sep(&["simulate", "--n", "6", "--horizon", "2"], dir.path()).status.code(), Some(0));
    let traj = read(&dir.path().join("simulate.csv"));
    assert!(traj.starts_with("time,configuration\n0,111000\n"), "{traj}");
}
