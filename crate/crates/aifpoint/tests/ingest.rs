use std::fmt::Write as _;

use aifpoint::analyze::{analyze, from_human, load_dataset};
use aifpoint::ingest::{ingest_human, ingest_str, read_human_log, write_human_log};
use aifpoint_core::experiment::target_set;

/// A scripted session: every target `reps` times, a smooth minimum-jerk
/// movement sampled at irregular intervals, one misclick on every fifth
/// trial.
fn session(reps: usize) -> String {
    let mut s = String::from("# aifpoint-recorder v1\n# session=test config_hash=0 seed=3\n");
    s.push_str("participant,target_id,t_ms,event,x_px,y_px,correct\n");
    let mut clock = 500.0;
    let mut n = 0;
    for rep in 0..reps {
        for t in target_set() {
            n += 1;
            let dur = 250.0 + 120.0 * t.id_bits;
            let end = t.position + ((rep as f64 * 7.3 + t.id as f64).sin()) * t.width * 0.3;
            writeln!(s, "p1,{},{clock},start,900,400,", t.id).unwrap();
            let mut u = 0.0;
            let mut k = 0;
            while u < dur - 20.0 {
                k += 1;
                u += 8.0 + (k % 5) as f64 * 3.3;
                let tau = (u / dur).min(1.0);
                let x = 900.0 + (end - 900.0) * (10.0 * tau.powi(3) - 15.0 * tau.powi(4) + 6.0 * tau.powi(5));
                writeln!(s, "p1,{},{:.1},move,{x:.2},400,", t.id, clock + u).unwrap();
            }
            if n % 5 == 0 {
                let miss = if end > 900.0 { t.position - t.width } else { t.position + t.width };
                writeln!(s, "p1,{},{:.1},click,{miss},400,0", t.id, clock + u + 5.0).unwrap();
            }
            writeln!(s, "p1,{},{:.1},click,{end:.2},400,1", t.id, clock + dur + 30.0).unwrap();
            clock += dur + 1500.0;
        }
    }
    s
}

#[test]
fn scripted_session_ingests_cleanly() {
    let data = ingest_str(&session(2)).unwrap();
    assert!(data.rejected.is_empty(), "{:?}", &data.rejected[..data.rejected.len().min(3)]);
    assert_eq!(data.trials.len(), 36);
    assert!(data.trials.iter().all(|t| t.completed));
    assert_eq!(data.trials.iter().map(|t| t.misclicks()).sum::<usize>(), 7);
    assert_eq!(data.meta["seed"], "3");
    let a = analyze(&from_human(&data.trials, 0.02));
    assert_eq!(a.completed, 36);
    let fit = a.fit.unwrap();
    assert!(fit.b > 0.1 && fit.r2 > 0.9, "{fit:?}");
}

#[test]
fn canonical_log_roundtrips_and_analyzes() {
    let dir = tempfile::tempdir().unwrap();
    let export = dir.path().join("export.csv");
    std::fs::write(&export, session(1)).unwrap();
    let data = ingest_human(&export).unwrap();
    let p = dir.path().join("human.jsonl");
    write_human_log(&p, &data).unwrap();
    let (meta, trials) = read_human_log(&p).unwrap();
    assert_eq!(meta, data.meta);
    assert_eq!(trials, data.trials);
    let loaded = load_dataset(dir.path(), 0.02).unwrap();
    assert_eq!(loaded, from_human(&data.trials, 0.02));
}

#[test]
fn misclick_is_logged_and_trial_continues() {
    let text = "# aifpoint-recorder v1\nparticipant,target_id,t_ms,event,x_px,y_px,correct\n\
                p,1,0,start,900,0,\np,1,100,move,800,0,\np,1,200,click,700,0,0\n\
                p,1,250,move,680,0,\np,1,300,click,676,0,1\n";
    let data = ingest_str(text).unwrap();
    assert!(data.rejected.is_empty());
    let t = &data.trials[0];
    assert_eq!(t.clicks.len(), 2);
    assert!(!t.clicks[0].correct && t.clicks[1].correct);
    assert_eq!(t.movement_time(), Some(0.3));
    assert_eq!(t.endpoint_px(), Some(676.0));
}

#[test]
fn resampled_trace_keeps_both_endpoints() {
    let data = ingest_str(&session(1)).unwrap();
    for t in &data.trials {
        let r = t.resample(0.02);
        let (first, last) = (t.samples.first().unwrap(), t.samples.last().unwrap());
        assert_eq!(r.first().unwrap(), &(first.t_ms / 1000.0, first.x_px));
        assert_eq!(r.last().unwrap(), &(last.t_ms / 1000.0, last.x_px));
        assert!(r.windows(2).all(|w| w[1].0 > w[0].0));
        // interior points lie on the 20 ms grid
        for (k, p) in r[..r.len() - 1].iter().enumerate() {
            assert!((p.0 - k as f64 * 0.02).abs() < 1e-12);
        }
    }
}

#[test]
fn boundary_click_counts_as_correct() {
    // target 1: 675 px, width 20 -> [665, 685], closed
    let text = "# aifpoint-recorder v1\nparticipant,target_id,t_ms,event,x_px,y_px,correct\n\
                p,1,0,start,900,0,\np,1,300,click,685,0,1\n\
                p,1,1000,start,900,0,\np,1,1300,click,685.01,0,1\n";
    let data = ingest_str(text).unwrap();
    assert_eq!(data.rejected.len(), 1);
    assert_eq!(data.rejected[0].line, 6);
    assert!(data.trials[0].completed && !data.trials[1].completed);
}
