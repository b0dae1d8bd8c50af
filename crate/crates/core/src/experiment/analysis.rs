use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::agent::TrialRecord;
use crate::math::sqrt;
use crate::{Error, Result};

/// Time from target appearance to the correct click, seconds. `None` for
/// timeouts.
pub fn movement_time(trial: &TrialRecord) -> Option<f64> {
    trial.hit_step().map(|s| s as f64 * trial.dt)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation.
fn std_pop(xs: &[f64]) -> f64 {
    let m = mean(xs);
    sqrt(xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64)
}

/// `true` for values within three standard deviations of the mean (single
/// pass). Fewer than two values are all kept.
pub fn outlier_mask(values: &[f64]) -> Vec<bool> {
    if values.len() < 2 {
        return alloc::vec![true; values.len()];
    }
    let m = mean(values);
    let sd = std_pop(values);
    values.iter().map(|v| (v - m).abs() <= 3.0 * sd).collect()
}

/// Drop items whose key lies more than three standard deviations from the
/// mean key.
pub fn outlier_filter<T: Clone>(items: &[T], key: impl Fn(&T) -> f64) -> Vec<T> {
    let keys: Vec<f64> = items.iter().map(&key).collect();
    items
        .iter()
        .zip(outlier_mask(&keys))
        .filter(|(_, keep)| *keep)
        .map(|(x, _)| x.clone())
        .collect()
}

/// `MT = a + b * ID`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FittsFit {
    pub a: f64,
    pub b: f64,
    pub r2: f64,
    pub n: usize,
}

impl FittsFit {
    pub fn predict(&self, id_bits: f64) -> f64 {
        self.a + self.b * id_bits
    }
}

/// Ordinary least squares of movement time on index of difficulty.
pub fn fitts_fit(points: &[(f64, f64)]) -> Result<FittsFit> {
    if points.iter().any(|(x, y)| !(x.is_finite() && y.is_finite())) {
        return Err(Error::NonFinite("fitts points"));
    }
    let n = points.len();
    if n < 2 {
        return Err(Error::NotEnoughData("fitts_fit needs at least two points"));
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    if sxx <= 1e-12 * (1.0 + mx * mx) * n as f64 {
        return Err(Error::DegenerateDesign("fitts_fit needs two distinct IDs"));
    }
    let b = sxy / sxx;
    let a = my - b * mx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    };
    Ok(FittsFit { a, b, r2, n })
}

/// Fit on the mean movement time of each distinct ID.
pub fn fitts_fit_means(points: &[(f64, f64)]) -> Result<FittsFit> {
    let mut groups: BTreeMap<u64, (f64, f64, usize)> = BTreeMap::new();
    for &(x, y) in points {
        let e = groups.entry(x.to_bits()).or_insert((x, 0.0, 0));
        e.1 += y;
        e.2 += 1;
    }
    let means: Vec<(f64, f64)> = groups.values().map(|(x, s, c)| (*x, s / *c as f64)).collect();
    fitts_fit(&means)
}

/// End point of one correct click.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Endpoint {
    pub target_id: u32,
    pub width: f64,
    pub position: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetEndpoints {
    pub target_id: u32,
    pub width: f64,
    pub n: usize,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointStats {
    pub per_target: Vec<TargetEndpoints>,
    /// `(width, average of per-target stds)`, ascending width.
    pub per_width: Vec<(f64, f64)>,
}

impl EndpointStats {
    pub fn width_std(&self, width: f64) -> Option<f64> {
        self.per_width.iter().find(|(w, _)| *w == width).map(|x| x.1)
    }
}

/// Per-target end-point spread (population std) and its average per width.
pub fn endpoint_stats(endpoints: &[Endpoint]) -> EndpointStats {
    let mut by_target: BTreeMap<u32, (f64, Vec<f64>)> = BTreeMap::new();
    for e in endpoints {
        by_target
            .entry(e.target_id)
            .or_insert((e.width, Vec::new()))
            .1
            .push(e.position);
    }
    let per_target: Vec<TargetEndpoints> = by_target
        .into_iter()
        .map(|(id, (w, xs))| TargetEndpoints {
            target_id: id,
            width: w,
            n: xs.len(),
            mean: mean(&xs),
            std: std_pop(&xs),
        })
        .collect();
    let mut by_width: BTreeMap<u64, (f64, f64, usize)> = BTreeMap::new();
    for t in &per_target {
        let e = by_width.entry(t.width.to_bits()).or_insert((t.width, 0.0, 0));
        e.1 += t.std;
        e.2 += 1;
    }
    let mut per_width: Vec<(f64, f64)> = by_width.values().map(|(w, s, c)| (*w, s / *c as f64)).collect();
    per_width.sort_by(|a, b| a.0.total_cmp(&b.0));
    EndpointStats {
        per_target,
        per_width,
    }
}

/// First time at which the finite-difference acceleration of `positions`
/// exceeds `threshold` in magnitude. Samples must be strictly increasing in
/// time; the acceleration at sample `i` uses samples `i - 1, i, i + 1`.
pub fn reaction_time(times: &[f64], positions: &[f64], threshold: f64) -> Result<Option<f64>> {
    if times.len() != positions.len() {
        return Err(Error::invalid("reaction_time", "times and positions differ in length"));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("reaction_time", "times must be strictly increasing"));
    }
    for i in 1..times.len().saturating_sub(1) {
        let h0 = times[i] - times[i - 1];
        let h1 = times[i + 1] - times[i];
        let v0 = (positions[i] - positions[i - 1]) / h0;
        let v1 = (positions[i + 1] - positions[i]) / h1;
        let acc = (v1 - v0) / (0.5 * (h0 + h1));
        if acc.abs() > threshold {
            return Ok(Some(times[i]));
        }
    }
    Ok(None)
}

/// Largest absolute cursor velocity over the trial, model units per second.
pub fn peak_velocity(trial: &TrialRecord) -> f64 {
    trial
        .steps
        .iter()
        .map(|r| r.state.velocity.abs())
        .fold(0.0, f64::max)
}
