//! Batches of trials over the 18-target task and the analyses run on them.

mod analysis;
mod targets;

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::agent::{run_trial, AgentConfig, TrialRecord};
use crate::rng::derive_seed;
use crate::{Error, Result};

pub use analysis::{
    endpoint_stats, fitts_fit, fitts_fit_means, movement_time, outlier_filter, outlier_mask,
    peak_velocity, reaction_time, Endpoint, EndpointStats, FittsFit, TargetEndpoints,
};
pub use targets::{index_of_difficulty, target_by_id, target_set, TargetSpec, POSITIONS, WIDTHS};

/// One cell of a batch: a target and a repetition number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub index: usize,
    pub target: TargetSpec,
    pub rep: u32,
    pub seed: u64,
}

/// Targets x repetitions in target-major order, each with its own seed
/// derived from the master seed.
pub fn trial_grid(targets: &[TargetSpec], reps: u32, master_seed: u64) -> Vec<TrialSpec> {
    let mut out = Vec::with_capacity(targets.len() * reps as usize);
    for t in targets {
        for rep in 0..reps {
            out.push(TrialSpec {
                index: out.len(),
                target: *t,
                rep,
                seed: derive_seed(master_seed, &[t.id as u64, rep as u64]),
            });
        }
    }
    out
}

/// Run every trial of the grid, in grid order.
pub fn run_grid(grid: &[TrialSpec], cfg: &AgentConfig) -> Result<Vec<TrialRecord>> {
    grid.iter()
        .map(|s| run_trial(&s.target.task(), cfg, s.seed))
        .collect()
}

/// Scalar configuration entries that can be varied in a sweep.
pub const SWEEP_PARAMETERS: &[&str] = &[
    "damping",
    "stiffness",
    "click_threshold",
    "delay",
    "horizon",
    "plans",
    "noise_position",
    "noise_displacement",
    "preference_position_std",
    "preference_hit_std",
    "preference_misclick_std",
    "vi_steps",
    "vi_samples",
    "vi_learning_rate",
];

fn as_count(name: &'static str, v: f64) -> Result<usize> {
    if v.is_finite() && v >= 0.0 && libm::trunc(v) == v {
        Ok(v as usize)
    } else {
        Err(Error::invalid(name, "must be a non-negative integer"))
    }
}

/// Copy of `cfg` with one named entry set to `value`. Damping, stiffness and
/// threshold change the world and the agent's prior together.
pub fn apply_parameter(cfg: &AgentConfig, name: &str, value: f64) -> Result<AgentConfig> {
    let mut c = *cfg;
    match name {
        "damping" => c.damping = value,
        "stiffness" => c.stiffness = value,
        "click_threshold" => c.click_threshold = value,
        "delay" => c.delay = as_count("delay", value)?,
        "horizon" => c.planner.horizon = as_count("horizon", value)?,
        "plans" => c.planner.plans = as_count("plans", value)?,
        "noise_position" => {
            c.noise.position_std = value;
            c.prior.noise[0] = value;
        }
        "noise_displacement" => {
            c.noise.displacement_std = value;
            c.prior.noise[1] = value;
        }
        "preference_position_std" => c.preference.std[0] = value,
        "preference_hit_std" => c.preference.std[1] = value,
        "preference_misclick_std" => c.preference.std[2] = value,
        "vi_steps" => c.vi.steps = as_count("vi_steps", value)?,
        "vi_samples" => c.vi.samples = as_count("vi_samples", value)?,
        "vi_learning_rate" => c.vi.learning_rate = value,
        _ => {
            return Err(Error::invalid(
                "sweep parameter",
                alloc::format!("unknown parameter '{name}'"),
            ))
        }
    }
    c.validate()?;
    Ok(c)
}

/// Summary of one sweep value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub value: f64,
    pub trials: usize,
    pub hits: usize,
    pub median_mt: Option<f64>,
    pub mean_misclicks: f64,
    pub mean_peak_velocity: f64,
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

pub fn summarize(value: f64, trials: &[TrialRecord]) -> SweepSummary {
    let mts: Vec<f64> = trials.iter().filter_map(movement_time).collect();
    let n = trials.len().max(1) as f64;
    SweepSummary {
        value,
        trials: trials.len(),
        hits: mts.len(),
        median_mt: median(&mts),
        mean_misclicks: trials.iter().map(|t| t.misclicks as f64).sum::<f64>() / n,
        mean_peak_velocity: trials.iter().map(peak_velocity).sum::<f64>() / n,
    }
}
