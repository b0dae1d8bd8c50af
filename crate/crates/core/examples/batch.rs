//! Run the 18-target grid and print the Fitts fit, end-point spread and
//! hit rate.
//!
//! `cargo run --release --example batch -- [reps] [plans] [seed] [name=value ...]`

use aifpoint_core::agent::AgentConfig;
use aifpoint_core::experiment::*;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let reps: u32 = args.first().and_then(|s| s.parse().ok()).unwrap_or(10);
    let plans: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(500);
    let seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1);
    let mut cfg = AgentConfig::default();
    cfg.planner.plans = plans;
    for kv in args.iter().skip(3) {
        let (k, v) = kv.split_once('=').expect("name=value");
        cfg = apply_parameter(&cfg, k, v.parse().unwrap()).unwrap();
    }
    let t0 = std::time::Instant::now();
    let grid = trial_grid(&target_set(), reps, seed);
    let trials = run_grid(&grid, &cfg).unwrap();
    let mut pts = Vec::new();
    let mut ends = Vec::new();
    for (spec, t) in grid.iter().zip(&trials) {
        if let Some(mt) = movement_time(t) {
            pts.push((spec.target.id_bits, mt, spec.target.id, spec.target.width, t.endpoint_px().unwrap()));
        }
    }
    let kept = outlier_filter(&pts, |p| p.1);
    for p in &kept {
        ends.push(Endpoint { target_id: p.2, width: p.3, position: p.4 });
    }
    let xy: Vec<(f64, f64)> = kept.iter().map(|p| (p.0, p.1)).collect();
    let fit = fitts_fit(&xy).unwrap();
    let stats = endpoint_stats(&ends);
    let misclicks: usize = trials.iter().map(|t| t.misclicks).sum();
    println!("hits {}/{} misclicks {} kept {}", pts.len(), trials.len(), misclicks, kept.len());
    println!("fit a={:.3} b={:.3} r2={:.3}", fit.a, fit.b, fit.r2);
    println!("per-width std {:?}", stats.per_width);
    for t in target_set() {
        let mts: Vec<f64> = pts.iter().filter(|p| p.2 == t.id).map(|p| p.1).collect();
        let m = mts.iter().sum::<f64>() / mts.len().max(1) as f64;
        println!("  target {:2} id {:.2} hits {:2} mean mt {:.3}", t.id, t.id_bits, mts.len(), m);
    }
    println!("elapsed {:?}", t0.elapsed());
}
