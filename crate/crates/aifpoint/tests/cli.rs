use std::path::Path;
use std::process::{Command, Output};

fn aifpoint(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aifpoint"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

// Small and fast: two targets, two reps, few plans.
const QUICK: [&str; 6] = ["--targets", "4,13", "--reps", "2", "--set", "plans=60"];

#[test]
fn simulate_then_analyze_writes_fitts_table() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["simulate", "--config", "default", "--seed", "7", "--out", "run"];
    args.extend(QUICK);
    ok(&aifpoint(&args, dir.path()));
    ok(&aifpoint(&["analyze", "run"], dir.path()));
    let fitts = std::fs::read_to_string(dir.path().join("run/fitts.csv")).unwrap();
    let mut lines = fitts.lines();
    assert_eq!(lines.next(), Some("trial,id_bits,mt_s"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert!(!rows.is_empty() && rows.len() <= 4);
    assert!(rows.iter().all(|r| r.len() == 3 && r[2] > 0.0 && r[2] <= 2.0));
    for f in ["fitts_fit.csv", "endpoints.csv", "endpoint_summary.csv", "trials.csv", "trajectories.csv", "timing.csv", "config.toml"] {
        assert!(dir.path().join("run").join(f).is_file(), "{f}");
    }
}

#[test]
fn logs_are_byte_identical_across_job_counts() {
    let dir = tempfile::tempdir().unwrap();
    for (out, jobs) in [("a", "1"), ("b", "3"), ("c", "1")] {
        let mut args = vec!["simulate", "--seed", "11", "--out", out, "--jobs", jobs];
        args.extend(QUICK);
        ok(&aifpoint(&args, dir.path()));
    }
    let read = |d: &str| std::fs::read(dir.path().join(d).join("trajectories.jsonl")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_eq!(read("a"), read("c"));

    let mut args = vec!["simulate", "--seed", "12", "--out", "d"];
    args.extend(QUICK);
    ok(&aifpoint(&args, dir.path()));
    assert_ne!(read("a"), read("d"));
}

#[test]
fn sweep_emits_one_log_set_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["sweep", "--param", "damping", "--values", "24,40", "--out", "sw", "--targets", "6", "--reps", "1", "--set", "plans=60"];
    ok(&aifpoint(&args, dir.path()));
    for v in ["damping=24", "damping=40"] {
        let log = dir.path().join("sw").join(v).join("trajectories.jsonl");
        let text = std::fs::read_to_string(&log).unwrap();
        let header: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(header["meta"]["sweep"]["parameter"], "damping");
    }
    let summary = std::fs::read_to_string(dir.path().join("sw/sweep.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
}

#[test]
fn usage_errors_exit_2_and_validation_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(aifpoint(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert_eq!(aifpoint(&["simulate", "--no-such-flag"], dir.path()).status.code(), Some(2));
    assert_eq!(aifpoint(&[], dir.path()).status.code(), Some(2));

    std::fs::write(dir.path().join("bad.toml"), "[noise]\nposition_std = -1.0\ndisplacement_std = 0.01\n").unwrap();
    let out = aifpoint(&["simulate", "--config", "bad.toml", "--out", "x"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));

    let out = aifpoint(&["sweep", "--param", "nope", "--values", "1", "--out", "x"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let out = aifpoint(&["simulate", "--targets", "19", "--out", "x"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let out = aifpoint(&["analyze", "missing-dir"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn ingest_analyze_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let export = "# aifpoint-recorder v1\n# session=cli\nparticipant,target_id,t_ms,event,x_px,y_px,correct\n\
                  p,4,0,start,900,0,\np,4,150,move,1000,0,\np,4,380,click,1122,0,1\n\
                  p,13,1000,start,900,0,\np,13,1200,move,750,0,\np,13,1420,click,660,0,1\n\
                  p,13,2000,start,900,0,\np,13,2100,move,9000,0,\np,13,2400,click,690,0,1\n";
    std::fs::write(dir.path().join("export.csv"), export).unwrap();
    ok(&aifpoint(&["ingest", "export.csv", "--out", "human"], dir.path()));
    let rejected = std::fs::read_to_string(dir.path().join("human/rejected.csv")).unwrap();
    assert_eq!(rejected.lines().count(), 2, "{rejected}");
    assert!(rejected.contains("\n11,"));
    ok(&aifpoint(&["analyze", "human"], dir.path()));
    assert!(dir.path().join("human/fitts.csv").is_file());

    let mut args = vec!["simulate", "--out", "run"];
    args.extend(QUICK);
    ok(&aifpoint(&args, dir.path()));
    ok(&aifpoint(&["compare", "run", "human", "--out", "cmp.csv"], dir.path()));
    let cmp = std::fs::read_to_string(dir.path().join("cmp.csv")).unwrap();
    assert!(cmp.starts_with("metric,agent,human,difference"));
    assert!(cmp.contains("fitts_b_s_per_bit"));
    assert!(cmp.contains("endpoint_std_px_w20"));
}
