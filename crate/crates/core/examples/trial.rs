//! Run one trial and print the trajectory.
//!
//! `cargo run --release --example trial -- <target_px> <width_px> <seed> [plans]`

use aifpoint_core::agent::{run_trial, AgentConfig};
use aifpoint_core::dynamics::TaskSpec;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, d: f64| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(d);
    let task = TaskSpec::standard(arg(0, 1750.0), arg(1, 60.0));
    let seed = arg(2, 1.0) as u64;
    let mut cfg = AgentConfig::default();
    cfg.planner.plans = arg(3, 500.0) as usize;
    let t0 = std::time::Instant::now();
    let rec = run_trial(&task, &cfg, seed).expect("trial");
    for r in &rec.steps {
        println!(
            "{:3} x={:7.1} v={:6.3} s4={:.3} a=({:6.1},{:5.2}) belief_x={:7.1} comp_x={:7.1} {:?}",
            r.step,
            task.to_pixels(r.state.position),
            r.state.velocity,
            r.state.displacement,
            r.action.acceleration,
            r.action.force_rate,
            task.to_pixels(r.belief_mean[0]),
            task.to_pixels(r.compensated_mean[0]),
            r.event
        );
    }
    println!("outcome {:?} misclicks {} diag {:?} in {:?}", rec.outcome, rec.misclicks, rec.diagnostics, t0.elapsed());
}
