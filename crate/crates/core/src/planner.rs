//! Action selection by expected free energy over randomly sampled plans.
//!
//! Every plan is a sequence of `N` actions drawn uniformly within the action
//! bounds. A plan is scored by rolling the (delay-compensated) state belief
//! forward with the unscented predictor and averaging, over the horizon, the
//! negated pragmatic value (and, optionally, the negated information gain).
//!
//! All plans of one decision share the same Monte-Carlo draws for each
//! horizon step (common random numbers), so differences between plans are
//! not swamped by sampling noise. Plan `j` is drawn from its own counter-based
//! stream, which makes parallel and sequential evaluation bit-identical.

use alloc::vec::Vec;

use nalgebra::{Matrix4, Vector4};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::belief::{
    kl_gaussian, vi_update, NoiseBelief, ParamBelief, StateBelief, UkfPredictor, UnscentedConfig,
    ViHyper,
};
use crate::dynamics::{click_logic, param, state, Action, ActionBounds, Observation};
use crate::linalg::cov_sqrt;
use crate::math::normal_log_pdf;
use crate::rng::{indexed_stream, SimRng};
use crate::{Error, Result};

/// A sequence of actions, applied one per time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub actions: Vec<Action>,
}

/// Gaussian preference over the position, hit and misclick observations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreferenceDistribution {
    /// Means of (o1, o4, o5).
    pub mean: [f64; 3],
    /// Standard deviations of (o1, o4, o5).
    pub std: [f64; 3],
}

impl PreferenceDistribution {
    pub const DEFAULT_STD: [f64; 3] = [0.01, 0.01, 0.001];

    /// Preference for clicking the target centred at `target`.
    pub fn at_target(target: f64) -> Self {
        Self {
            mean: [target, 1.0, 0.0],
            std: Self::DEFAULT_STD,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mean.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("preference mean"));
        }
        if !self.std.iter().all(|s| s.is_finite() && *s > 0.0) {
            return Err(Error::invalid("preference std", "entries must be finite and > 0"));
        }
        Ok(())
    }

    pub fn log_density(&self, position: f64, hit: f64, misclick: f64) -> f64 {
        normal_log_pdf(position, self.mean[0], self.std[0])
            + normal_log_pdf(hit, self.mean[1], self.std[1])
            + normal_log_pdf(misclick, self.mean[2], self.std[2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    /// Planning horizon `N`.
    pub horizon: usize,
    /// Number of plans `K`.
    pub plans: usize,
    pub bounds: ActionBounds,
    /// State samples per belief for the pragmatic value.
    pub pv_states: usize,
    /// Observation samples per state sample for the pragmatic value.
    pub pv_observations: usize,
    pub info_gain: bool,
    pub ig_states: usize,
    pub ig_observations: usize,
    /// Variational settings of the hypothetical updates inside the
    /// information gain. Larger budget than the observation update: a wide
    /// prior has to contract by an order of magnitude.
    pub ig_vi: ViHyper,
    pub unscented: UnscentedConfig,
    /// Keep the EFE of every plan in the diagnostics.
    pub verbose: bool,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            horizon: 12,
            plans: 3000,
            bounds: ActionBounds::default(),
            pv_states: 50,
            pv_observations: 3,
            info_gain: false,
            ig_states: 8,
            ig_observations: 4,
            ig_vi: ViHyper {
                steps: 100,
                learning_rate: 3.0e-3,
                ..ViHyper::default()
            },
            unscented: UnscentedConfig::default(),
            verbose: false,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("horizon", self.horizon),
            ("plans", self.plans),
            ("pv_states", self.pv_states),
            ("pv_observations", self.pv_observations),
            ("ig_states", self.ig_states),
            ("ig_observations", self.ig_observations),
        ] {
            if v == 0 {
                return Err(Error::invalid(name, "must be >= 1"));
            }
        }
        self.bounds.validate()?;
        self.ig_vi.validate()?;
        self.unscented.validate(4 + 5)
    }
}

/// Plan `index` of the set keyed by `key`.
pub fn sample_plan(cfg: &PlannerConfig, key: u64, index: u64) -> Plan {
    let mut rng = indexed_stream(key, index);
    let (lo, hi) = (cfg.bounds.lower, cfg.bounds.upper);
    let actions = (0..cfg.horizon)
        .map(|_| {
            Action::new(
                rng.random_range(lo[0]..=hi[0]),
                rng.random_range(lo[1]..=hi[1]),
            )
        })
        .collect();
    Plan { actions }
}

/// `K` plans of `N` i.i.d. uniform actions.
pub fn sample_plans<R: RngCore + ?Sized>(cfg: &PlannerConfig, rng: &mut R) -> Result<Vec<Plan>> {
    cfg.validate()?;
    let key = rng.next_u64();
    Ok((0..cfg.plans as u64).map(|j| sample_plan(cfg, key, j)).collect())
}

/// Beliefs after each action of the plan, without observation updates.
pub fn rollout(
    belief: &StateBelief,
    plan: &Plan,
    predictor: &UkfPredictor,
) -> Result<Vec<StateBelief>> {
    let mut out = Vec::with_capacity(plan.actions.len());
    let mut b = *belief;
    for a in &plan.actions {
        b = predictor.predict(&b, a)?;
        out.push(b);
    }
    Ok(out)
}

/// Monte-Carlo draws for scoring one horizon step, shared by all plans.
#[derive(Debug, Clone)]
struct StepBank {
    /// Standard-normal state draws.
    eps: Vec<Vector4<f64>>,
    /// Per state draw: target, width and threshold sampled from the
    /// parameter belief.
    task: Vec<[f64; 3]>,
    /// Per state draw, `pv_observations` position-noise offsets.
    offsets: Vec<f64>,
}

impl StepBank {
    fn draw<R: Rng + ?Sized>(
        cfg: &PlannerConfig,
        params: &ParamBelief,
        params_sqrt: &nalgebra::Matrix5<f64>,
        noise: &NoiseBelief,
        noise_sqrt: &nalgebra::Matrix2<f64>,
        rng: &mut R,
    ) -> Self {
        let n = cfg.pv_states;
        let mut eps = Vec::with_capacity(n);
        let mut task = Vec::with_capacity(n);
        let mut offsets = Vec::with_capacity(n * cfg.pv_observations);
        for _ in 0..n {
            eps.push(Vector4::from_fn(|_, _| rng.sample(StandardNormal)));
            let e = nalgebra::Vector5::from_fn(|_, _| rng.sample(StandardNormal));
            let theta = params.mean + params_sqrt * e;
            task.push([
                theta[param::TARGET],
                theta[param::WIDTH],
                theta[param::CLICK_THRESHOLD],
            ]);
            let e = nalgebra::Vector2::from_fn(|_, _| rng.sample(StandardNormal));
            let sigma = noise.transform(noise_sqrt, &e)[0];
            for _ in 0..cfg.pv_observations {
                let z: f64 = rng.sample(StandardNormal);
                offsets.push(sigma * z);
            }
        }
        Self { eps, task, offsets }
    }

    fn pragmatic_value(
        &self,
        belief: &StateBelief,
        sqrt_cov: &Matrix4<f64>,
        pref: &PreferenceDistribution,
    ) -> f64 {
        let n_obs = self.offsets.len() / self.eps.len();
        let mut total = 0.0;
        for (k, (eps, task)) in self.eps.iter().zip(&self.task).enumerate() {
            let s = belief.mean + sqrt_cov * eps;
            let pos = s[state::POSITION];
            let (click, hit) = click_logic(
                task[0],
                task[1],
                task[2],
                pos,
                s[state::PREV_DISPLACEMENT],
                s[state::DISPLACEMENT],
            );
            let h = if hit { 1.0 } else { 0.0 };
            let c = if click { 1.0 } else { 0.0 };
            let discrete = normal_log_pdf(h, pref.mean[1], pref.std[1])
                + normal_log_pdf(h - c, pref.mean[2], pref.std[2]);
            for off in &self.offsets[k * n_obs..(k + 1) * n_obs] {
                total += discrete + normal_log_pdf(pos + off, pref.mean[0], pref.std[0]);
            }
        }
        total / self.offsets.len() as f64
    }
}

/// Monte-Carlo estimate of `E[ln P^c(o)]` under the belief.
pub fn pragmatic_value<R: Rng + ?Sized>(
    belief: &StateBelief,
    params: &ParamBelief,
    noise: &NoiseBelief,
    pref: &PreferenceDistribution,
    cfg: &PlannerConfig,
    rng: &mut R,
) -> Result<f64> {
    cfg.validate()?;
    pref.validate()?;
    let bank = StepBank::draw(cfg, params, &params.sqrt_cov()?, noise, &noise.sqrt_cov()?, rng);
    let l = cov_sqrt(&belief.cov, "pragmatic value belief")?;
    Ok(bank.pragmatic_value(belief, &l, pref))
}

/// Expected KL divergence between the belief and its variational update on
/// hypothetical observations.
pub fn information_gain<R: Rng + ?Sized>(
    belief: &StateBelief,
    params: &ParamBelief,
    noise: &NoiseBelief,
    cfg: &PlannerConfig,
    rng: &mut R,
) -> Result<f64> {
    if belief.is_point_mass() {
        return Ok(0.0);
    }
    let l = cov_sqrt(&belief.cov, "information gain belief")?;
    let noise_sqrt = noise.sqrt_cov()?;
    let params_sqrt = params.sqrt_cov()?;
    let mut total = 0.0;
    for _ in 0..cfg.ig_states {
        let e = Vector4::from_fn(|_, _| rng.sample(StandardNormal));
        let s = belief.mean + l * e;
        let e = nalgebra::Vector2::from_fn(|_, _| rng.sample(StandardNormal));
        let sigma = noise.transform(&noise_sqrt, &e);
        let e = nalgebra::Vector5::from_fn(|_, _| rng.sample(StandardNormal));
        let theta = params.mean + params_sqrt * e;
        let (click, hit) = click_logic(
            theta[param::TARGET],
            theta[param::WIDTH],
            theta[param::CLICK_THRESHOLD],
            s[state::POSITION],
            s[state::PREV_DISPLACEMENT],
            s[state::DISPLACEMENT],
        );
        for _ in 0..cfg.ig_observations {
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            let c = if click { 1.0 } else { 0.0 };
            let h = if hit { 1.0 } else { 0.0 };
            let obs = Observation {
                position: s[state::POSITION] + sigma[0] * z1,
                displacement: s[state::DISPLACEMENT] + sigma[1] * z2,
                click: c,
                hit: h,
                misclick: h - c,
            };
            let post = vi_update(belief, &obs, noise, params, &cfg.ig_vi, rng)?;
            total += kl_gaussian(&post.posterior, belief)?;
        }
    }
    Ok(total / (cfg.ig_states * cfg.ig_observations) as f64)
}

/// Outcome of one planning call.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub action: Action,
    pub plan_index: usize,
    /// Expected free energy of the winning plan.
    pub efe: f64,
    /// Rolled-out beliefs of the winning plan.
    pub rollout: Vec<StateBelief>,
    /// Expected free energy of every plan, when `verbose` is set.
    pub all_efe: Option<Vec<f64>>,
}

/// Index of the smallest value; ties go to the lowest index, NaN never wins.
fn argmin(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (j, &v) in values.iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        match best {
            Some(b) if values[b] <= v => {}
            _ => best = Some(j),
        }
    }
    best
}

struct Scorer<'a> {
    belief: StateBelief,
    predictor: UkfPredictor,
    banks: Vec<StepBank>,
    pref: &'a PreferenceDistribution,
    params: &'a ParamBelief,
    noise: &'a NoiseBelief,
    cfg: &'a PlannerConfig,
    plan_key: u64,
    ig_key: u64,
}

impl Scorer<'_> {
    fn efe(&self, index: usize) -> Result<f64> {
        let plan = sample_plan(self.cfg, self.plan_key, index as u64);
        let mut ig_rng: Option<SimRng> = self
            .cfg
            .info_gain
            .then(|| indexed_stream(self.ig_key, index as u64));
        let mut mean = self.belief.mean;
        let mut sqrt = cov_sqrt(&self.belief.cov, "planning belief")?;
        let mut total = 0.0;
        for (a, bank) in plan.actions.iter().zip(&self.banks) {
            let b = self.predictor.predict_with_sqrt(&mean, &sqrt, a);
            sqrt = cov_sqrt(&b.cov, "rollout belief")?;
            mean = b.mean;
            total -= bank.pragmatic_value(&b, &sqrt, self.pref);
            if let Some(rng) = ig_rng.as_mut() {
                total -= information_gain(&b, self.params, self.noise, self.cfg, rng)?;
            }
        }
        let g = total / self.cfg.horizon as f64;
        if g.is_finite() {
            Ok(g)
        } else {
            Err(Error::NonFinite("expected free energy"))
        }
    }
}

/// Sample `K` plans, score each by expected free energy and return the first
/// action of the best one.
pub fn select_action<R: RngCore + ?Sized>(
    belief: &StateBelief,
    params: &ParamBelief,
    noise: &NoiseBelief,
    pref: &PreferenceDistribution,
    cfg: &PlannerConfig,
    dt: f64,
    rng: &mut R,
) -> Result<Selection> {
    cfg.validate()?;
    pref.validate()?;
    let predictor = UkfPredictor::new(params, &cfg.unscented, dt)?;
    let plan_key = rng.next_u64();
    let ig_key = rng.next_u64();
    let params_sqrt = params.sqrt_cov()?;
    let noise_sqrt = noise.sqrt_cov()?;
    let banks = (0..cfg.horizon)
        .map(|_| StepBank::draw(cfg, params, &params_sqrt, noise, &noise_sqrt, rng))
        .collect();
    let scorer = Scorer {
        belief: *belief,
        predictor,
        banks,
        pref,
        params,
        noise,
        cfg,
        plan_key,
        ig_key,
    };

    #[cfg(feature = "parallel")]
    let efe: Vec<f64> = {
        use rayon::prelude::*;
        (0..cfg.plans)
            .into_par_iter()
            .map(|j| scorer.efe(j))
            .collect::<Result<Vec<f64>>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let efe: Vec<f64> = (0..cfg.plans)
        .map(|j| scorer.efe(j))
        .collect::<Result<Vec<f64>>>()?;

    let best = argmin(&efe).ok_or(Error::NonFinite("expected free energy"))?;
    let plan = sample_plan(cfg, plan_key, best as u64);
    let rollout = rollout(belief, &plan, &scorer.predictor)?;
    Ok(Selection {
        action: plan.actions[0].clamped(&cfg.bounds),
        plan_index: best,
        efe: efe[best],
        rollout,
        all_efe: cfg.verbose.then_some(efe),
    })
}
