use aifpoint::analyze::{analyze, from_agent};
use aifpoint::config::RunConfig;
use aifpoint::log::{read_log, read_log_from, write_log, Header, LogWriter, LoggedTrial};
use aifpoint::runner::run_config;
use aifpoint::Error;
use aifpoint_core::agent::{ClickEvent, Event, Outcome, StepRecord, TrialRecord};
use aifpoint_core::belief::ViStatus;
use aifpoint_core::dynamics::{Action, Observation, State, SystemParams, TaskSpec};
use proptest::prelude::*;

fn awkward(i: usize) -> f64 {
    const V: [f64; 8] = [0.1, -0.0, 1e-300, 5e-324, -1.7976931348623157e308, 1.0 / 3.0, std::f64::consts::SQRT_2, 0.30000000000000004];
    V[i % V.len()] * (1.0 - i as f64 * 1e-4)
}

fn synthetic(steps: usize) -> TrialRecord {
    let steps = (1..=steps)
        .map(|k| StepRecord {
            step: k,
            state: State::new(awkward(k), awkward(k + 1), awkward(k + 2), awkward(k + 3)),
            action: Action::new(awkward(k + 4), awkward(k + 5)),
            observation: (k > 5).then(|| Observation {
                position: awkward(k),
                displacement: awkward(k + 7),
                click: 0.0,
                hit: 0.0,
                misclick: -0.0,
            }),
            belief_mean: [awkward(k); 4],
            belief_cov: core::array::from_fn(|i| awkward(i + k)),
            compensated_mean: [awkward(k + 9); 4],
            compensated_cov: core::array::from_fn(|i| awkward(2 * i + k)),
            vi_status: match k % 4 {
                0 => None,
                1 => Some(ViStatus::Converged),
                2 => Some(ViStatus::Diverged),
                _ => Some(ViStatus::PointMass),
            },
            event: if k == 50 { Event::Misclick } else { Event::None },
        })
        .collect();
    TrialRecord {
        seed: u64::MAX - 3,
        task: TaskSpec::standard(1750.0, 20.0),
        params: SystemParams::new(24.0, 10.0, 0.85, 0.02, 0.05).unwrap(),
        dt: 0.02,
        delay: 5,
        initial_state: State::ZERO,
        steps,
        outcome: Outcome::Timeout,
        clicks: vec![ClickEvent { step: 50, position: 0.123456789012345678, hit: false }],
        misclicks: 1,
        diagnostics: vec!["vi diverged at t=7 \"quoted\"\nnewline".into()],
    }
}

fn logged(index: usize, record: TrialRecord) -> LoggedTrial {
    LoggedTrial { index, target_id: 6, rep: index as u32, record }
}

fn roundtrip(trials: &[LoggedTrial]) -> Vec<LoggedTrial> {
    let mut buf = Vec::new();
    let mut w = LogWriter::new(&mut buf, &Header::new(serde_json::json!({"k": 1}))).unwrap();
    for t in trials {
        w.write_trial(t).unwrap();
    }
    w.finish().unwrap();
    read_log_from(buf.as_slice()).unwrap().trials
}

fn bits(t: &TrialRecord) -> Vec<u64> {
    let mut v = Vec::new();
    for s in &t.steps {
        v.extend(s.state.as_array().map(f64::to_bits));
        v.extend(s.action.as_array().map(f64::to_bits));
        v.extend(s.belief_cov.map(f64::to_bits));
        v.extend(s.compensated_cov.map(f64::to_bits));
        if let Some(o) = s.observation {
            v.extend(o.as_array().map(f64::to_bits));
        }
    }
    v
}

#[test]
fn hundred_step_record_is_bit_identical() {
    let t = logged(0, synthetic(100));
    let back = roundtrip(std::slice::from_ref(&t));
    assert_eq!(back.len(), 1);
    assert_eq!(back[0], t);
    assert_eq!(bits(&back[0].record), bits(&t.record));
    // -0.0 == 0.0 under PartialEq, so compare the sign explicitly
    assert!(back[0].record.steps[0].observation.is_none());
    assert!(back[0].record.steps[5].observation.unwrap().misclick.is_sign_negative());
}

#[test]
fn empty_trial_set_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("empty.jsonl");
    write_log(&p, &Header::new(serde_json::Value::Null), &[]).unwrap();
    let text = std::fs::read_to_string(&p).unwrap();
    assert_eq!(text.lines().count(), 1);
    let log = read_log(&p).unwrap();
    assert!(log.trials.is_empty());
}

#[test]
fn truncated_and_reordered_logs_are_rejected_with_lines() {
    let t = logged(0, synthetic(3));
    let mut buf = Vec::new();
    let mut w = LogWriter::new(&mut buf, &Header::new(serde_json::Value::Null)).unwrap();
    w.write_trial(&t).unwrap();
    w.finish().unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();

    let truncated = lines[..4].join("\n");
    match read_log_from(truncated.as_bytes()) {
        Err(Error::Malformed { line, message }) => {
            assert_eq!(line, 4);
            assert!(message.contains("missing 1"), "{message}");
        }
        other => panic!("{other:?}"),
    }
    let swapped = [lines[0], lines[1], lines[3], lines[2], lines[4]].join("\n");
    assert!(matches!(read_log_from(swapped.as_bytes()), Err(Error::Malformed { line: 3, .. })));
    let no_header = lines[1..].join("\n");
    assert!(matches!(read_log_from(no_header.as_bytes()), Err(Error::Malformed { line: 1, .. })));
}

#[test]
fn simulated_block_reads_back_with_identical_analysis() {
    let mut run = RunConfig::default();
    run.set_parameter("plans", 40.0).unwrap();
    run.reps = 10;
    let out = run_config(&run, 0).unwrap();
    assert_eq!(out.trials.len(), 180);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("block.jsonl");
    write_log(&p, &Header::new(serde_json::Value::Null), &out.trials).unwrap();
    let back = read_log(&p).unwrap().trials;
    assert_eq!(back, out.trials);
    assert_eq!(analyze(&from_agent(&back)), analyze(&from_agent(&out.trials)));
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::with_cases(64) })]

    #[test]
    fn any_finite_floats_roundtrip(xs in prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 12)) {
        let mut rec = synthetic(2);
        rec.steps[0].state = State::new(xs[0], xs[1], xs[2], xs[3]);
        rec.steps[1].action = Action::new(xs[4], xs[5]);
        rec.steps[1].belief_mean = [xs[6], xs[7], xs[8], xs[9]];
        rec.initial_state.position = xs[10];
        rec.clicks[0].position = xs[11];
        let t = logged(0, rec);
        let back = roundtrip(std::slice::from_ref(&t));
        prop_assert_eq!(bits(&back[0].record), bits(&t.record));
        prop_assert_eq!(back[0].record.initial_state.position.to_bits(), xs[10].to_bits());
        prop_assert_eq!(&back[0], &t);
    }
}
