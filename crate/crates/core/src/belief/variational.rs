//! Observation update by variational inference.
//!
//! The posterior `N(m, L Lᵀ)` is fitted by minimising
//!
//! ```text
//! F(m, L) = KL(prior || N(m, L Lᵀ)) - E_{s ~ N(m, L Lᵀ)} [ ln p(o | s) ]
//! ```
//!
//! with Adam. The expectation is estimated with reparameterised samples
//! `s = m + L eps`; the same `eps` (and nuisance draws) are reused for every
//! step, so the recorded free-energy trace is a deterministic function of the
//! iterate. `L` is an unconstrained lower-triangular factor, which keeps the
//! covariance PSD by construction.

use alloc::vec::Vec;

use nalgebra::{SMatrix, SVector, Vector5};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{GaussianBelief, NoiseBelief, ParamBelief, StateBelief};
use crate::dynamics::{click_logic, param, state, Observation, NoiseSpec, State, SystemParams};
use crate::linalg::{cov_sqrt, psd_cholesky, symmetrize, JITTER};
use crate::math::{ln, normal_log_pdf, sqrt};
use crate::{Error, Result};

/// Standard deviation of the narrow Gaussian placed on the click, hit and
/// misclick channels.
pub const DISCRETE_CHANNEL_STD: f64 = 0.05;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViHyper {
    /// Optimisation steps.
    pub steps: usize,
    /// Reparameterised samples per step.
    pub samples: usize,
    pub learning_rate: f64,
    /// Cap on each Adam step, in prior standard deviations of the affected
    /// state coordinate. Keeps tightly known coordinates from being thrown
    /// far off by the first, sign-like steps.
    pub max_step: f64,
    /// Step halvings tried before a step that raises the free energy is
    /// abandoned; 0 takes every step unconditionally.
    pub backtracking: usize,
}

impl Default for ViHyper {
    fn default() -> Self {
        Self {
            steps: 30,
            samples: 300,
            learning_rate: 3.0e-4,
            max_step: 0.25,
            backtracking: 8,
        }
    }
}

impl ViHyper {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::invalid("vi steps", "must be >= 1"));
        }
        if self.samples == 0 {
            return Err(Error::invalid("vi samples", "must be >= 1"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::invalid("vi learning_rate", "must be > 0"));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::invalid("vi max_step", "must be > 0 (inf disables the cap)"));
        }
        Ok(())
    }
}

/// An observation model usable by the variational update.
pub trait Likelihood<const D: usize> {
    /// Nuisance quantities drawn once per sample (noise scales, parameters).
    type Draw: Copy;

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Draw;

    /// `ln p(o | s)` and its gradient with respect to `s`.
    fn evaluate(&self, s: &SVector<f64, D>, draw: &Self::Draw) -> (f64, SVector<f64, D>);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViStatus {
    Converged,
    /// Free energy rose on more than half of the steps; the prior was kept.
    Diverged,
    /// The prior is a point mass, which no observation can move.
    PointMass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViOutcome<const D: usize> {
    pub posterior: GaussianBelief<D>,
    pub status: ViStatus,
    /// Free energy (up to an additive constant) before each step and after
    /// the last one.
    pub trace: Vec<f64>,
}

impl<const D: usize> ViOutcome<D> {
    /// Fraction of steps on which the free energy did not increase.
    pub fn non_increasing_fraction(&self) -> f64 {
        if self.trace.len() < 2 {
            return 1.0;
        }
        let ok = self.trace.windows(2).filter(|w| w[1] <= w[0]).count();
        ok as f64 / (self.trace.len() - 1) as f64
    }
}

struct Objective<'a, const D: usize, L: Likelihood<D>> {
    prior_mean: SVector<f64, D>,
    prior_prec: SMatrix<f64, D, D>,
    lik: &'a L,
    eps: Vec<SVector<f64, D>>,
    draws: Vec<L::Draw>,
}

impl<const D: usize, L: Likelihood<D>> Objective<'_, D, L> {
    /// Free energy and its gradients in `m` and (lower-triangular) `L`.
    fn eval(
        &self,
        m: &SVector<f64, D>,
        l: &SMatrix<f64, D, D>,
    ) -> Option<(f64, SVector<f64, D>, SMatrix<f64, D, D>)> {
        if l.diagonal().iter().any(|&x| x == 0.0 || !x.is_finite()) {
            return None;
        }
        // KL(q || prior) up to a constant
        let delta = m - self.prior_mean;
        let prec_delta = self.prior_prec * delta;
        let prec_l = self.prior_prec * l;
        let logdet: f64 = l.diagonal().iter().map(|x| ln(x.abs())).sum();
        let kl = 0.5 * ((l.transpose() * prec_l).trace() + delta.dot(&prec_delta)) - logdet;

        let mut grad_m = prec_delta;
        let mut grad_l = prec_l;
        for i in 0..D {
            grad_l[(i, i)] -= 1.0 / l[(i, i)];
        }

        let n = self.eps.len() as f64;
        let mut expected_ll = 0.0;
        for (eps, draw) in self.eps.iter().zip(&self.draws) {
            let s = m + l * eps;
            let (v, g) = self.lik.evaluate(&s, draw);
            expected_ll += v;
            grad_m -= g / n;
            grad_l -= g * eps.transpose() / n;
        }
        grad_l.fill_upper_triangle(0.0, 1);
        Some((kl - expected_ll / n, grad_m, grad_l))
    }
}

/// Minimise the free energy for a generic likelihood.
pub fn minimize_free_energy<const D: usize, L, R>(
    prior: &GaussianBelief<D>,
    lik: &L,
    hyper: &ViHyper,
    rng: &mut R,
) -> Result<ViOutcome<D>>
where
    L: Likelihood<D>,
    R: Rng + ?Sized,
{
    hyper.validate()?;
    if prior.is_point_mass() {
        return Ok(ViOutcome {
            posterior: *prior,
            status: ViStatus::PointMass,
            trace: Vec::new(),
        });
    }
    let prior_cov = symmetrize(&prior.cov);
    let mut l = match psd_cholesky(&prior_cov) {
        Some(l) if l.diagonal().iter().all(|&x| x > 0.0) => l,
        // Singular or slightly indefinite prior: start from the jittered
        // factor so the posterior precision exists.
        _ => cov_sqrt(
            &(prior_cov + SMatrix::<f64, D, D>::identity() * JITTER),
            "vi prior",
        )?,
    };
    let l_inv = l
        .solve_lower_triangular(&SMatrix::<f64, D, D>::identity())
        .ok_or(Error::NonFinite("vi prior precision"))?;
    let prior_prec = l_inv.transpose() * l_inv;
    let mut m = prior.mean;
    let scale = SVector::<f64, D>::from_fn(|i, _| sqrt(l.row(i).norm_squared()) * hyper.max_step);

    // Antithetic pairs: the draws have zero sample mean, so the sample
    // objective does not couple the mean and the factor spuriously.
    let mut eps: Vec<SVector<f64, D>> = Vec::with_capacity(hyper.samples);
    while eps.len() < hyper.samples {
        let e = SVector::from_fn(|_, _| rng.sample(StandardNormal));
        eps.push(e);
        if eps.len() < hyper.samples {
            eps.push(-e);
        }
    }
    let draws: Vec<L::Draw> = (0..hyper.samples).map(|_| lik.draw(rng)).collect();
    let objective = Objective {
        prior_mean: prior.mean,
        prior_prec,
        lik,
        eps,
        draws,
    };

    let mut first_m = SVector::<f64, D>::zeros();
    let mut second_m = SVector::<f64, D>::zeros();
    let mut first_l = SMatrix::<f64, D, D>::zeros();
    let mut second_l = SMatrix::<f64, D, D>::zeros();
    let mut trace = Vec::with_capacity(hyper.steps + 1);
    let lr = hyper.learning_rate;

    let Some((mut f, mut gm, mut gl)) = objective.eval(&m, &l) else {
        return Err(Error::NonFinite("vi initial free energy"));
    };
    trace.push(f);
    let mut diverged = false;
    // Adam step count since the last restart.
    let mut t = 0;
    for _ in 0..hyper.steps {
        t += 1;
        let bc1 = 1.0 - libm::pow(ADAM_BETA1, t as f64);
        let bc2 = 1.0 - libm::pow(ADAM_BETA2, t as f64);
        first_m = first_m * ADAM_BETA1 + gm * (1.0 - ADAM_BETA1);
        second_m = second_m * ADAM_BETA2 + gm.component_mul(&gm) * (1.0 - ADAM_BETA2);
        first_l = first_l * ADAM_BETA1 + gl * (1.0 - ADAM_BETA1);
        second_l = second_l * ADAM_BETA2 + gl.component_mul(&gl) * (1.0 - ADAM_BETA2);
        let adam = |a: f64, b: f64| lr * (a / bc1) / (sqrt(b / bc2) + ADAM_EPS);
        let mut dm = SVector::<f64, D>::zeros();
        let mut dl = SMatrix::<f64, D, D>::zeros();
        for i in 0..D {
            let cap = scale[i];
            dm[i] = adam(first_m[i], second_m[i]).clamp(-cap, cap);
            for j in 0..=i {
                dl[(i, j)] = adam(first_l[(i, j)], second_l[(i, j)]).clamp(-cap, cap);
            }
        }
        // Take the step, halving it while the free energy would rise. With
        // `backtracking == 0` every step is taken as is.
        let mut factor = 1.0;
        let mut accepted = false;
        for _ in 0..=hyper.backtracking {
            let (cm, cl) = (m - dm * factor, l - dl * factor);
            match objective.eval(&cm, &cl) {
                Some((cf, cgm, cgl)) if cf <= f || hyper.backtracking == 0 => {
                    (m, l, f, gm, gl) = (cm, cl, cf, cgm, cgl);
                    accepted = true;
                    break;
                }
                None if hyper.backtracking == 0 => {
                    diverged = true;
                    break;
                }
                _ => factor *= 0.5,
            }
        }
        if diverged {
            trace.push(f64::INFINITY);
            break;
        }
        if !accepted {
            // No improving step along the Adam direction: stay put and
            // restart the moments from the gradient at the current point.
            first_m = SVector::zeros();
            second_m = SVector::zeros();
            first_l = SMatrix::zeros();
            second_l = SMatrix::zeros();
            t = 0;
        }
        trace.push(f);
    }

    let increases = trace
        .windows(2)
        .filter(|w| !(w[1] <= w[0]))
        .count();
    let posterior = GaussianBelief {
        mean: m,
        cov: l * l.transpose(),
    }
    .symmetrized();
    let finite = posterior.mean.iter().chain(posterior.cov.iter()).all(|x| x.is_finite());
    if diverged || 2 * increases > hyper.steps || !finite {
        return Ok(ViOutcome {
            posterior: *prior,
            status: ViStatus::Diverged,
            trace,
        });
    }
    Ok(ViOutcome {
        posterior,
        status: ViStatus::Converged,
        trace,
    })
}

/// Observation model of the pointing task as seen by the agent: Gaussian
/// position and displacement channels with noise scales from the noise
/// belief, plus narrow Gaussians on the three discrete channels.
#[derive(Debug, Clone)]
pub struct PointingLikelihood {
    obs: Observation,
    noise: NoiseBelief,
    noise_sqrt: SMatrix<f64, 2, 2>,
    params: ParamBelief,
    params_sqrt: SMatrix<f64, 5, 5>,
}

#[derive(Debug, Clone, Copy)]
pub struct PointingDraw {
    sigma: [f64; 2],
    target: f64,
    width: f64,
    threshold: f64,
}

impl PointingLikelihood {
    pub fn new(obs: Observation, noise: &NoiseBelief, params: &ParamBelief) -> Result<Self> {
        Ok(Self {
            obs,
            noise: *noise,
            noise_sqrt: noise.sqrt_cov()?,
            params: *params,
            params_sqrt: params.sqrt_cov()?,
        })
    }
}

#[inline]
fn discrete_penalty(obs: &Observation, click: bool, hit: bool) -> f64 {
    let c = if click { 1.0 } else { 0.0 };
    let h = if hit { 1.0 } else { 0.0 };
    let r = [obs.click - c, obs.hit - h, obs.misclick - (h - c)];
    let inv = 1.0 / (DISCRETE_CHANNEL_STD * DISCRETE_CHANNEL_STD);
    -0.5 * inv * (r[0] * r[0] + r[1] * r[1] + r[2] * r[2])
}

impl Likelihood<4> for PointingLikelihood {
    type Draw = PointingDraw;

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> PointingDraw {
        let e = SVector::<f64, 2>::from_fn(|_, _| rng.sample(StandardNormal));
        let sigma = self.noise.transform(&self.noise_sqrt, &e);
        let e = Vector5::from_fn(|_, _| rng.sample(StandardNormal));
        let theta = self.params.mean + self.params_sqrt * e;
        PointingDraw {
            sigma: [sigma[0], sigma[1]],
            target: theta[param::TARGET],
            width: theta[param::WIDTH],
            threshold: theta[param::CLICK_THRESHOLD],
        }
    }

    fn evaluate(&self, s: &SVector<f64, 4>, d: &PointingDraw) -> (f64, SVector<f64, 4>) {
        let pos = s[state::POSITION];
        let disp = s[state::DISPLACEMENT];
        let mut ll = normal_log_pdf(self.obs.position, pos, d.sigma[0])
            + normal_log_pdf(self.obs.displacement, disp, d.sigma[1]);
        let (click, hit) = click_logic(
            d.target,
            d.width,
            d.threshold,
            pos,
            s[state::PREV_DISPLACEMENT],
            disp,
        );
        ll += discrete_penalty(&self.obs, click, hit);
        let mut g = SVector::<f64, 4>::zeros();
        g[state::POSITION] = (self.obs.position - pos) / (d.sigma[0] * d.sigma[0]);
        g[state::DISPLACEMENT] = (self.obs.displacement - disp) / (d.sigma[1] * d.sigma[1]);
        (ll, g)
    }
}

/// `ln p(o | s)` for known noise scales and parameters. The discrete
/// channels contribute `-(residual / 0.05)^2 / 2` each, i.e. zero when they
/// match the click logic.
pub fn log_likelihood(
    obs: &Observation,
    s: &State,
    noise: &NoiseSpec,
    params: &SystemParams,
) -> Result<f64> {
    if !(noise.position_std > 0.0 && noise.displacement_std > 0.0) {
        return Err(Error::invalid("noise", "standard deviations must be > 0"));
    }
    let (click, hit) = click_logic(
        params.target,
        params.width,
        params.click_threshold,
        s.position,
        s.prev_displacement,
        s.displacement,
    );
    Ok(normal_log_pdf(obs.position, s.position, noise.position_std)
        + normal_log_pdf(obs.displacement, s.displacement, noise.displacement_std)
        + discrete_penalty(obs, click, hit))
}

/// Fold a (delayed) observation into the state belief.
pub fn vi_update<R: Rng + ?Sized>(
    prior: &StateBelief,
    obs: &Observation,
    noise: &NoiseBelief,
    params: &ParamBelief,
    hyper: &ViHyper,
    rng: &mut R,
) -> Result<ViOutcome<4>> {
    let lik = PointingLikelihood::new(*obs, noise, params)?;
    minimize_free_energy(prior, &lik, hyper, rng)
}
