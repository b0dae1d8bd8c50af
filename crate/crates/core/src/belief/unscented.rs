//! Unscented prediction of the state belief.
//!
//! Sigma points are placed in the joint space of the state belief and the
//! parameter belief (4 + 5 dimensions), pushed through the dynamics with the
//! chosen action, and the next-state belief is the weighted Gaussian fit of
//! the propagated points. The parameter belief itself is left unchanged.

use alloc::vec::Vec;

use nalgebra::{Matrix4, Matrix5, SMatrix, SVector, Vector4, Vector5};
use serde::{Deserialize, Serialize};

use super::{GaussianBelief, ParamBelief, StateBelief};
use crate::dynamics::{transition, Action, PARAM_DIM, STATE_DIM};
use crate::linalg::cov_sqrt;
use crate::math::sqrt;
use crate::{Error, Result};

/// Spread parameters of the unscented transform (scaled sigma points).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnscentedConfig {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
}

impl Default for UnscentedConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            beta: 2.0,
            kappa: 0.0,
        }
    }
}

/// Weights and spread for a given dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnscentedWeights {
    /// Distance of the outer points from the mean, in standard deviations.
    pub spread: f64,
    pub mean_centre: f64,
    pub cov_centre: f64,
    pub outer: f64,
}

impl UnscentedConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::invalid("alpha", "must lie in (0, 1]"));
        }
        if !(self.beta.is_finite() && self.kappa.is_finite()) {
            return Err(Error::NonFinite("unscented config"));
        }
        if dim as f64 + self.kappa <= 0.0 {
            return Err(Error::invalid("kappa", "n + kappa must be > 0"));
        }
        Ok(())
    }

    pub fn weights(&self, dim: usize) -> Result<UnscentedWeights> {
        self.validate(dim)?;
        let n = dim as f64;
        let a2 = self.alpha * self.alpha;
        let lambda = a2 * (n + self.kappa) - n;
        let c = n + lambda;
        let mean_centre = lambda / c;
        Ok(UnscentedWeights {
            spread: sqrt(c),
            mean_centre,
            cov_centre: mean_centre + 1.0 - a2 + self.beta,
            outer: 0.5 / c,
        })
    }
}

/// `2D + 1` sigma points with their mean and covariance weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaPoints<const D: usize> {
    pub points: Vec<SVector<f64, D>>,
    pub mean_weights: Vec<f64>,
    pub cov_weights: Vec<f64>,
}

impl<const D: usize> SigmaPoints<D> {
    /// Weighted Gaussian fit of the points.
    pub fn reconstruct(&self) -> GaussianBelief<D> {
        fit(&self.points, &self.mean_weights, &self.cov_weights)
    }
}

pub fn sigma_points<const D: usize>(
    belief: &GaussianBelief<D>,
    cfg: &UnscentedConfig,
) -> Result<SigmaPoints<D>> {
    let w = cfg.weights(D)?;
    let l = belief.sqrt_cov()?;
    let mut points = Vec::with_capacity(2 * D + 1);
    points.push(belief.mean);
    for j in 0..D {
        points.push(belief.mean + l.column(j) * w.spread);
    }
    for j in 0..D {
        points.push(belief.mean - l.column(j) * w.spread);
    }
    let mut mean_weights = alloc::vec![w.outer; 2 * D + 1];
    let mut cov_weights = mean_weights.clone();
    mean_weights[0] = w.mean_centre;
    cov_weights[0] = w.cov_centre;
    Ok(SigmaPoints {
        points,
        mean_weights,
        cov_weights,
    })
}

/// Weighted mean and covariance, accumulated as deviations from the first
/// point so identical points give an exact mean and a zero covariance.
fn fit<const D: usize>(
    points: &[SVector<f64, D>],
    mean_weights: &[f64],
    cov_weights: &[f64],
) -> GaussianBelief<D> {
    let base = points[0];
    let mut shift = SVector::<f64, D>::zeros();
    for (p, w) in points.iter().zip(mean_weights).skip(1) {
        shift += (p - base) * *w;
    }
    let mean = base + shift;
    let mut cov = SMatrix::<f64, D, D>::zeros();
    for (p, w) in points.iter().zip(cov_weights) {
        let dev = (p - base) - shift;
        cov += dev * dev.transpose() * *w;
    }
    GaussianBelief { mean, cov }.symmetrized()
}

/// Propagates state beliefs for a fixed parameter belief.
///
/// The parameter block of the joint square root is computed once, so
/// repeated predictions (plan rollouts) only factor the 4x4 state
/// covariance.
#[derive(Debug, Clone)]
pub struct UkfPredictor {
    param_mean: Vector5<f64>,
    /// Parameter-space offsets of the non-central sigma points; only those
    /// that move the dynamics (nonzero damping or stiffness offset).
    param_offsets: Vec<Vector5<f64>>,
    weights: UnscentedWeights,
    dt: f64,
}

const JOINT_DIM: usize = STATE_DIM + PARAM_DIM;

impl UkfPredictor {
    pub fn new(params: &ParamBelief, cfg: &UnscentedConfig, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid("dt", "must be finite and > 0"));
        }
        let weights = cfg.weights(JOINT_DIM)?;
        let l: Matrix5<f64> = params.sqrt_cov()?;
        let mut param_offsets = Vec::with_capacity(2 * PARAM_DIM);
        for j in 0..PARAM_DIM {
            let col: Vector5<f64> = l.column(j) * weights.spread;
            param_offsets.push(col);
            param_offsets.push(-col);
        }
        Ok(Self {
            param_mean: params.mean,
            param_offsets,
            weights,
            dt,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn predict(&self, state: &StateBelief, action: &Action) -> Result<StateBelief> {
        let l: Matrix4<f64> = cov_sqrt(&state.cov, "ukf state covariance")?;
        Ok(self.predict_with_sqrt(&state.mean, &l, action))
    }

    pub(crate) fn predict_with_sqrt(
        &self,
        mean: &Vector4<f64>,
        sqrt_cov: &Matrix4<f64>,
        action: &Action,
    ) -> StateBelief {
        let w = &self.weights;
        let base = transition(&self.param_mean, mean, action, self.dt);
        // 2 * 9 outer points: 8 move the state, 10 move the parameters.
        let mut devs = [Vector4::<f64>::zeros(); 2 * JOINT_DIM];
        for j in 0..STATE_DIM {
            let off: Vector4<f64> = sqrt_cov.column(j) * w.spread;
            devs[2 * j] = transition(&self.param_mean, &(mean + off), action, self.dt) - base;
            devs[2 * j + 1] = transition(&self.param_mean, &(mean - off), action, self.dt) - base;
        }
        for (i, off) in self.param_offsets.iter().enumerate() {
            devs[2 * STATE_DIM + i] =
                transition(&(self.param_mean + off), mean, action, self.dt) - base;
        }
        let shift: Vector4<f64> = devs.iter().sum::<Vector4<f64>>() * w.outer;
        let mut cov = shift * shift.transpose() * w.cov_centre;
        for d in &devs {
            let e = d - shift;
            cov += e * e.transpose() * w.outer;
        }
        GaussianBelief {
            mean: base + shift,
            cov,
        }
        .symmetrized()
    }
}

/// One unscented prediction step of the state belief.
pub fn ukf_predict(
    state: &StateBelief,
    params: &ParamBelief,
    action: &Action,
    dt: f64,
    cfg: &UnscentedConfig,
) -> Result<StateBelief> {
    UkfPredictor::new(params, cfg, dt)?.predict(state, action)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{step, State, SystemParams};
    use crate::rng::substream;
    use nalgebra::{Matrix1, Vector1};
    use rand::Rng;

    fn prior_params(std: [f64; 5]) -> ParamBelief {
        GaussianBelief::from_std(Vector5::new(24.0, 10.0, 0.85, 0.06, 0.05), &std).unwrap()
    }

    #[test]
    fn one_dimensional_unit_spread() {
        let b = GaussianBelief::new(Vector1::new(0.0), Matrix1::new(1.0)).unwrap();
        let cfg = UnscentedConfig {
            alpha: 1.0,
            beta: 2.0,
            kappa: 0.0,
        };
        let sp = sigma_points(&b, &cfg).unwrap();
        let xs: Vec<f64> = sp.points.iter().map(|p| p[0]).collect();
        assert_eq!(xs, alloc::vec![0.0, 1.0, -1.0]);
        let sum: f64 = sp.mean_weights.iter().sum();
        assert!((sum - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_covariance_points_collapse() {
        let b = GaussianBelief::<3>::point(nalgebra::Vector3::new(1.0, 2.0, 3.0));
        let sp = sigma_points(&b, &UnscentedConfig::default()).unwrap();
        assert!(sp.points.iter().all(|p| *p == b.mean));
    }

    #[test]
    fn reconstructs_random_nine_dim_beliefs() {
        let mut rng = substream(21, &[]);
        for _ in 0..50 {
            let a = SMatrix::<f64, 9, 9>::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let cov = a * a.transpose() * 0.1;
            let mean = SVector::<f64, 9>::from_fn(|_, _| rng.random_range(-5.0..5.0));
            let b = GaussianBelief { mean, cov };
            let r = sigma_points(&b, &UnscentedConfig::default()).unwrap().reconstruct();
            assert!((r.mean - mean).abs().max() < 1e-12);
            assert!((r.cov - cov).abs().max() < 1e-9);
        }
    }

    #[test]
    fn deterministic_limit_equals_step() {
        let p = SystemParams::new(24.0, 10.0, 0.85, 0.06, 0.05).unwrap();
        let s = State::new(0.1, 1.3, 0.02, 0.03);
        let a = Action::new(12.0, 0.4);
        let belief = GaussianBelief::point(s.as_vector());
        let params = GaussianBelief::point(p.as_vector());
        let out = ukf_predict(&belief, &params, &a, 0.02, &UnscentedConfig::default()).unwrap();
        let exact = step(&p, &s, &a, 0.02).unwrap().as_vector();
        assert_eq!(out.mean, exact);
        assert_eq!(out.cov, Matrix4::zeros());
    }

    #[test]
    fn parameter_uncertainty_inflates_prediction() {
        let s = GaussianBelief::from_std(Vector4::new(0.2, 1.5, 0.01, 0.04), &[1e-3, 1e-2, 1e-4, 1e-4])
            .unwrap();
        let a = Action::new(10.0, 0.5);
        let cfg = UnscentedConfig::default();
        let certain = ukf_predict(&s, &prior_params([0.0; 5]), &a, 0.02, &cfg).unwrap();
        let uncertain =
            ukf_predict(&s, &prior_params([0.2, 0.2, 1e-6, 1e-6, 1e-6]), &a, 0.02, &cfg).unwrap();
        for i in 0..4 {
            assert!(uncertain.cov[(i, i)] >= certain.cov[(i, i)] - 1e-18);
        }
        assert!(uncertain.cov[(1, 1)] > certain.cov[(1, 1)]);
        assert!(uncertain.cov[(3, 3)] > certain.cov[(3, 3)]);
        assert!(uncertain.is_psd());
    }
}
