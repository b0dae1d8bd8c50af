//! The delayed interaction loop between the agent and the simulated world.
//!
//! Per step `t` (0-based; the world is in `s(t)`):
//!
//! 1. at `t == delay` the target is revealed to the parameter belief;
//! 2. the stored belief about `s(t - delay)` is rolled forward with the
//!    buffered actions to `Q~(t)`, and the planner picks `a(t)`;
//! 3. the world steps to `s(t + 1)` and emits `o(t + 1)`, which joins the
//!    observation queue;
//! 4. the stored belief is predicted with `a(t - delay)` and, once the queue
//!    has delivered `o(t + 1 - delay)`, corrected by variational inference.
//!
//! The trial ends when the true world reports a hit or after
//! `timeout_steps` steps.

use alloc::collections::VecDeque;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use nalgebra::{Vector4, Vector5};
use serde::{Deserialize, Serialize};

use crate::belief::{
    vi_update, GaussianBelief, NoiseBelief, ParamBelief, StateBelief, UkfPredictor,
    UnscentedConfig, ViHyper, ViStatus,
};
use crate::dynamics::{
    param, sample_observation, scale_task, step, Action, NoiseSpec, Observation, State,
    SystemParams, TaskSpec,
};
use crate::planner::{select_action, PlannerConfig, PreferenceDistribution};
use crate::rng::{purpose, substream, SimRng};
use crate::{Error, Result, DEFAULT_DT};

/// The last `delay` actions, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionBuffer {
    actions: VecDeque<Action>,
    delay: usize,
}

impl ActionBuffer {
    /// Buffer pre-filled with `delay` zero actions.
    pub fn new(delay: usize) -> Self {
        Self {
            actions: core::iter::repeat_n(Action::ZERO, delay).collect(),
            delay,
        }
    }

    /// Append the newest action and return the one that falls out.
    pub fn push(&mut self, a: Action) -> Action {
        self.actions.push_back(a);
        self.actions.pop_front().unwrap_or(a)
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn delay(&self) -> usize {
        self.delay
    }

    pub fn iter(&self) -> impl Iterator<Item = &Action> {
        self.actions.iter()
    }
}

/// Initial beliefs of the agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    pub state_std: [f64; 4],
    /// Prior mean of the target centre and width before the reveal.
    pub target_mean: f64,
    pub width_mean: f64,
    /// Standard deviations of `[d, k, T, W, alpha_c]`.
    pub param_std: [f64; 5],
    /// Standard deviation of target, width and threshold after the reveal.
    pub revealed_std: f64,
    /// Believed observation-noise standard deviations (median of the
    /// log-normal noise belief).
    pub noise: [f64; 2],
    pub noise_log_var: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            state_std: [0.001, 0.0001, 0.00005, 0.00005],
            target_mean: 0.0,
            width_mean: 0.03,
            param_std: [0.2, 0.2, 0.9, 0.02, 1e-6],
            revealed_std: 1e-6,
            noise: [0.01, 0.01],
            noise_log_var: 1e-8,
        }
    }
}

/// Preference parameters; the position mean follows the believed target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreferenceConfig {
    /// Standard deviations of (position, hit, misclick).
    pub std: [f64; 3],
    /// Added to the believed target centre, model units.
    pub position_offset: f64,
}

impl Default for PreferenceConfig {
    fn default() -> Self {
        Self {
            std: PreferenceDistribution::DEFAULT_STD,
            position_offset: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    /// Perceptual delay in steps.
    pub delay: usize,
    pub dt: f64,
    pub timeout_steps: usize,
    /// True cursor damping and finger stiffness; also the agent's prior
    /// means for them.
    pub damping: f64,
    pub stiffness: f64,
    pub click_threshold: f64,
    /// Noise of the simulated world.
    pub noise: NoiseSpec,
    pub prior: PriorConfig,
    pub preference: PreferenceConfig,
    pub planner: PlannerConfig,
    pub vi: ViHyper,
    pub unscented: UnscentedConfig,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            delay: 5,
            dt: DEFAULT_DT,
            timeout_steps: 100,
            damping: 24.0,
            stiffness: 10.0,
            click_threshold: 0.05,
            noise: NoiseSpec::default(),
            prior: PriorConfig::default(),
            preference: PreferenceConfig::default(),
            planner: PlannerConfig::default(),
            vi: ViHyper::default(),
            unscented: UnscentedConfig::default(),
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid("dt", "must be finite and > 0"));
        }
        if self.timeout_steps == 0 {
            return Err(Error::invalid("timeout_steps", "must be >= 1"));
        }
        SystemParams::new(self.damping, self.stiffness, 0.0, 1.0, self.click_threshold)?;
        self.noise.validate()?;
        self.planner.validate()?;
        self.vi.validate()?;
        self.unscented.validate(4 + 5)?;
        PreferenceDistribution {
            mean: [0.0, 1.0, 0.0],
            std: self.preference.std,
        }
        .validate()?;
        if !self.preference.position_offset.is_finite() {
            return Err(Error::NonFinite("preference position_offset"));
        }
        let p = &self.prior;
        let stds = p.state_std.iter().chain(&p.param_std).chain([&p.revealed_std]);
        for s in stds {
            if !(s.is_finite() && *s >= 0.0) {
                return Err(Error::invalid("prior std", "must be finite and >= 0"));
            }
        }
        if !(p.target_mean.is_finite() && p.width_mean.is_finite()) {
            return Err(Error::NonFinite("prior target/width mean"));
        }
        NoiseBelief::from_median(&p.noise, p.noise_log_var)?;
        Ok(())
    }

    pub fn state_prior(&self) -> Result<StateBelief> {
        GaussianBelief::from_std(Vector4::zeros(), &self.prior.state_std)
    }

    pub fn param_prior(&self) -> Result<ParamBelief> {
        GaussianBelief::from_std(
            Vector5::new(
                self.damping,
                self.stiffness,
                self.prior.target_mean,
                self.prior.width_mean,
                self.click_threshold,
            ),
            &self.prior.param_std,
        )
    }

    pub fn noise_belief(&self) -> Result<NoiseBelief> {
        NoiseBelief::from_median(&self.prior.noise, self.prior.noise_log_var)
    }
}

/// Set the target centre and width of the parameter belief to known values.
///
/// Damping and stiffness keep their uncertainty; target, width and click
/// threshold get standard deviation `std` and lose their correlations.
pub fn reveal_target(params: &ParamBelief, target: f64, width: f64, std: f64) -> Result<ParamBelief> {
    if !(target.is_finite() && width.is_finite() && std.is_finite()) {
        return Err(Error::NonFinite("reveal_target"));
    }
    let mut out = *params;
    out.mean[param::TARGET] = target;
    out.mean[param::WIDTH] = width;
    for i in [param::TARGET, param::WIDTH, param::CLICK_THRESHOLD] {
        for j in 0..5 {
            out.cov[(i, j)] = 0.0;
            out.cov[(j, i)] = 0.0;
        }
        out.cov[(i, i)] = std * std;
    }
    Ok(out)
}

/// Roll the stored belief forward through the buffered actions. The stored
/// belief itself is not touched.
pub fn compensate_delay(
    stored: &StateBelief,
    buffer: &ActionBuffer,
    predictor: &UkfPredictor,
) -> Result<StateBelief> {
    buffer
        .iter()
        .try_fold(*stored, |b, a| predictor.predict(&b, a))
}

/// The simulated world: true dynamics plus observation noise.
#[derive(Debug, Clone)]
pub struct World {
    params: SystemParams,
    noise: NoiseSpec,
    state: State,
    dt: f64,
    bounds: crate::dynamics::ActionBounds,
    rng: SimRng,
}

impl World {
    pub fn new(
        params: SystemParams,
        noise: NoiseSpec,
        initial: State,
        dt: f64,
        rng: SimRng,
    ) -> Result<Self> {
        params.validate()?;
        noise.validate()?;
        if !initial.is_finite() {
            return Err(Error::NonFinite("initial state"));
        }
        Ok(Self {
            params,
            noise,
            state: initial,
            dt,
            bounds: Default::default(),
            rng,
        })
    }

    pub fn with_bounds(mut self, bounds: crate::dynamics::ActionBounds) -> Self {
        self.bounds = bounds;
        self
    }

    pub fn state(&self) -> State {
        self.state
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    /// Apply the (clamped) action; returns the new state and its noisy
    /// observation.
    pub fn step(&mut self, a: &Action) -> Result<(State, Observation)> {
        self.state = step(&self.params, &self.state, &a.clamped(&self.bounds), self.dt)?;
        let o = sample_observation(&self.params, &self.state, &self.noise, &mut self.rng);
        Ok((self.state, o))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Event {
    None,
    Click,
    Hit,
    Misclick,
}

/// Everything recorded about one step of the loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// Time index of `state`; the record describes the transition into it.
    pub step: usize,
    pub state: State,
    pub action: Action,
    /// Delayed observation folded into the stored belief this step.
    pub observation: Option<Observation>,
    /// Stored belief after the update (about `s(step - delay)`).
    pub belief_mean: [f64; 4],
    pub belief_cov: [f64; 16],
    /// Delay-compensated belief used for planning (about `s(step - 1)`).
    pub compensated_mean: [f64; 4],
    pub compensated_cov: [f64; 16],
    pub vi_status: Option<ViStatus>,
    pub event: Event,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClickEvent {
    pub step: usize,
    /// Cursor position, model units.
    pub position: f64,
    pub hit: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Hit,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub task: TaskSpec,
    pub params: SystemParams,
    pub dt: f64,
    pub delay: usize,
    pub initial_state: State,
    pub steps: Vec<StepRecord>,
    pub outcome: Outcome,
    pub clicks: Vec<ClickEvent>,
    pub misclicks: usize,
    /// Belief-update problems, one line each.
    pub diagnostics: Vec<String>,
}

impl TrialRecord {
    /// Step of the correct click, if any.
    pub fn hit_step(&self) -> Option<usize> {
        match self.outcome {
            Outcome::Hit => self.steps.last().map(|r| r.step),
            Outcome::Timeout => None,
        }
    }

    /// Cursor position (pixels) at the correct click.
    pub fn endpoint_px(&self) -> Option<f64> {
        match self.outcome {
            Outcome::Hit => self
                .steps
                .last()
                .map(|r| self.task.to_pixels(r.state.position)),
            Outcome::Timeout => None,
        }
    }
}

fn mat16(m: &nalgebra::Matrix4<f64>) -> [f64; 16] {
    let mut out = [0.0; 16];
    out.copy_from_slice(m.as_slice());
    out
}

/// The agent side of the loop.
#[derive(Debug, Clone)]
pub struct Agent {
    cfg: AgentConfig,
    target: f64,
    width: f64,
    stored: StateBelief,
    params: ParamBelief,
    noise: NoiseBelief,
    revealed: bool,
    actions: ActionBuffer,
    observations: VecDeque<Observation>,
    t: usize,
    seed: u64,
}

impl Agent {
    /// Agent for a task whose target (model units) is revealed after the
    /// perceptual delay.
    pub fn new(cfg: &AgentConfig, target: f64, width: f64, seed: u64) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg: *cfg,
            target,
            width,
            stored: cfg.state_prior()?,
            params: cfg.param_prior()?,
            noise: cfg.noise_belief()?,
            revealed: false,
            actions: ActionBuffer::new(cfg.delay),
            observations: VecDeque::with_capacity(cfg.delay + 1),
            t: 0,
            seed,
        })
    }

    /// Replace the beliefs (used by oracle tests).
    pub fn with_beliefs(mut self, state: StateBelief, params: ParamBelief) -> Self {
        self.stored = state;
        self.params = params;
        self
    }

    pub fn stored_belief(&self) -> &StateBelief {
        &self.stored
    }

    pub fn param_belief(&self) -> &ParamBelief {
        &self.params
    }

    pub fn is_revealed(&self) -> bool {
        self.revealed
    }

    pub fn steps_taken(&self) -> usize {
        self.t
    }

    /// Reveal the target; fails when called twice.
    pub fn reveal(&mut self) -> Result<()> {
        if self.revealed {
            return Err(Error::AlreadyRevealed);
        }
        self.params = reveal_target(&self.params, self.target, self.width, self.cfg.prior.revealed_std)?;
        self.revealed = true;
        Ok(())
    }

    fn predictor(&self) -> Result<UkfPredictor> {
        UkfPredictor::new(&self.params, &self.cfg.unscented, self.cfg.dt)
    }

    /// Belief about the current world state.
    pub fn compensated(&self) -> Result<StateBelief> {
        compensate_delay(&self.stored, &self.actions, &self.predictor()?)
    }

    pub fn preference(&self) -> PreferenceDistribution {
        PreferenceDistribution {
            mean: [
                self.params.mean[param::TARGET] + self.cfg.preference.position_offset,
                1.0,
                0.0,
            ],
            std: self.cfg.preference.std,
        }
    }

    /// One pass of the loop against `world`.
    pub fn step(&mut self, world: &mut World, diagnostics: &mut Vec<String>) -> Result<StepRecord> {
        let t = self.t;
        if t == self.cfg.delay && !self.revealed {
            self.reveal()?;
        }
        let predictor = self.predictor()?;
        let compensated = compensate_delay(&self.stored, &self.actions, &predictor)?;
        let mut plan_rng = substream(self.seed, &[purpose::PLANS, t as u64]);
        let selection = select_action(
            &compensated,
            &self.params,
            &self.noise,
            &self.preference(),
            &self.cfg.planner,
            self.cfg.dt,
            &mut plan_rng,
        )?;
        let action = selection.action;

        let (state, obs) = world.step(&action)?;

        let delayed_action = self.actions.push(action);
        self.observations.push_back(obs);
        let delayed_obs = if self.observations.len() > self.cfg.delay {
            self.observations.pop_front()
        } else {
            None
        };
        match predictor.predict(&self.stored, &delayed_action) {
            Ok(b) => self.stored = b,
            Err(e) => diagnostics.push(alloc::format!("step {}: prediction failed: {e}", t + 1)),
        }
        let mut vi_status = None;
        if let Some(o) = &delayed_obs {
            let mut vi_rng = substream(self.seed, &[purpose::VI, t as u64]);
            match vi_update(&self.stored, o, &self.noise, &self.params, &self.cfg.vi, &mut vi_rng) {
                Ok(out) => {
                    if out.status == ViStatus::Diverged {
                        diagnostics.push(alloc::format!("step {}: vi diverged", t + 1));
                    }
                    vi_status = Some(out.status);
                    self.stored = out.posterior;
                }
                Err(e) => diagnostics.push(alloc::format!("step {}: vi failed: {e}", t + 1)),
            }
        }

        let event = if obs.is_hit() {
            Event::Hit
        } else if obs.is_misclick() {
            Event::Misclick
        } else {
            Event::None
        };
        self.t += 1;
        Ok(StepRecord {
            step: t + 1,
            state,
            action,
            observation: delayed_obs,
            belief_mean: self.stored.mean.into(),
            belief_cov: mat16(&self.stored.cov),
            compensated_mean: compensated.mean.into(),
            compensated_cov: mat16(&compensated.cov),
            vi_status,
            event,
        })
    }
}

/// Simulate one trial of `task` from rest at the start position.
pub fn run_trial(task: &TaskSpec, cfg: &AgentConfig, seed: u64) -> Result<TrialRecord> {
    cfg.validate()?;
    let geo = scale_task(task)?;
    let params = SystemParams::new(cfg.damping, cfg.stiffness, geo.target, geo.width, cfg.click_threshold)?;
    let initial = State::ZERO;
    let mut world = World::new(
        params,
        cfg.noise,
        initial,
        cfg.dt,
        substream(seed, &[purpose::WORLD]),
    )?
    .with_bounds(cfg.planner.bounds);
    let mut agent = Agent::new(cfg, geo.target, geo.width, seed)?;
    let mut steps = Vec::with_capacity(cfg.timeout_steps);
    let mut clicks = Vec::new();
    let mut diagnostics = Vec::new();
    let mut outcome = Outcome::Timeout;
    while steps.len() < cfg.timeout_steps {
        let rec = agent.step(&mut world, &mut diagnostics)?;
        let event = rec.event;
        if matches!(event, Event::Hit | Event::Misclick) {
            clicks.push(ClickEvent {
                step: rec.step,
                position: rec.state.position,
                hit: event == Event::Hit,
            });
        }
        steps.push(rec);
        if event == Event::Hit {
            outcome = Outcome::Hit;
            break;
        }
    }
    let misclicks = clicks.iter().filter(|c| !c.hit).count();
    Ok(TrialRecord {
        seed,
        task: *task,
        params,
        dt: cfg.dt,
        delay: cfg.delay,
        initial_state: initial,
        steps,
        outcome,
        clicks,
        misclicks,
        diagnostics: diagnostics.into_iter().map(|d: String| d.to_string()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn buffer_starts_with_zero_actions() {
        let mut b = ActionBuffer::new(3);
        assert_eq!(b.len(), 3);
        assert!(b.iter().all(|a| *a == Action::ZERO));
        let a = Action::new(1.0, 0.5);
        assert_eq!(b.push(a), Action::ZERO);
        assert_eq!(b.len(), 3);
        let mut z = ActionBuffer::new(0);
        assert_eq!(z.push(a), a);
        assert!(z.is_empty());
    }

    #[test]
    fn reveal_keeps_dynamics_uncertainty() {
        let cfg = AgentConfig::default();
        let prior = cfg.param_prior().unwrap();
        let post = reveal_target(&prior, 0.85, 0.06, 1e-6).unwrap();
        let std = post.std();
        assert!((std[0] - 0.2).abs() < 1e-15 && (std[1] - 0.2).abs() < 1e-15);
        for i in 2..5 {
            assert!((std[i] - 1e-6).abs() < 1e-18);
        }
        assert_eq!(post.mean[2], 0.85);
        assert_eq!(post.mean[3], 0.06);
        let same = reveal_target(&prior, 0.0, 0.03, 1e-6).unwrap();
        assert_eq!(same.mean, prior.mean);
    }

    #[test]
    fn double_reveal_is_an_error() {
        let mut a = Agent::new(&AgentConfig::default(), 0.3, 0.06, 1).unwrap();
        a.reveal().unwrap();
        assert!(matches!(a.reveal(), Err(Error::AlreadyRevealed)));
    }

    #[test]
    fn zero_delay_compensation_is_identity() {
        let cfg = AgentConfig::default();
        let b = cfg.state_prior().unwrap();
        let p = UkfPredictor::new(&cfg.param_prior().unwrap(), &cfg.unscented, cfg.dt).unwrap();
        assert_eq!(compensate_delay(&b, &ActionBuffer::new(0), &p).unwrap(), b);
    }
}
