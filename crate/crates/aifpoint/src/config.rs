//! Run configuration, read from a TOML file.
//!
//! Every table and key is optional except `[noise]`, whose two world noise
//! standard deviations must always be given. Unknown keys are rejected.

use std::path::Path;

use aifpoint_core::agent::{AgentConfig, PreferenceConfig, PriorConfig};
use aifpoint_core::belief::{UnscentedConfig, ViHyper};
use aifpoint_core::dynamics::{ActionBounds, NoiseSpec};
use aifpoint_core::experiment::{target_by_id, target_set, TargetSpec};
use aifpoint_core::planner::PlannerConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The configuration used when `--config default` is given.
pub const DEFAULT_TOML: &str = include_str!("../configs/default.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Repetitions per target.
    #[serde(default = "default_reps")]
    pub reps: u32,
    /// Target ids to run; all 18 when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub targets: Option<Vec<u32>>,
    #[serde(default)]
    pub system: SystemSection,
    pub noise: NoiseSection,
    #[serde(default)]
    pub prior: PriorSection,
    #[serde(default)]
    pub preference: PreferenceSection,
    #[serde(default)]
    pub planner: PlannerSection,
    #[serde(default)]
    pub vi: ViSection,
    #[serde(default)]
    pub unscented: UnscentedSection,
}

fn default_seed() -> u64 {
    1
}

fn default_reps() -> u32 {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemSection {
    pub damping: f64,
    pub stiffness: f64,
    pub click_threshold: f64,
    pub dt: f64,
    pub timeout_steps: usize,
    /// Perceptual delay, steps.
    pub delay: usize,
}

impl Default for SystemSection {
    fn default() -> Self {
        let a = AgentConfig::default();
        Self {
            damping: a.damping,
            stiffness: a.stiffness,
            click_threshold: a.click_threshold,
            dt: a.dt,
            timeout_steps: a.timeout_steps,
            delay: a.delay,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    /// World observation noise on position, model units.
    pub position_std: f64,
    /// World observation noise on button displacement.
    pub displacement_std: f64,
    /// The agent's belief about the two stds; defaults to the world values.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub believed_position_std: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub believed_displacement_std: Option<f64>,
    #[serde(default = "default_log_var")]
    pub believed_log_var: f64,
}

fn default_log_var() -> f64 {
    PriorConfig::default().noise_log_var
}

impl Default for NoiseSection {
    fn default() -> Self {
        let n = NoiseSpec::default();
        Self {
            position_std: n.position_std,
            displacement_std: n.displacement_std,
            believed_position_std: None,
            believed_displacement_std: None,
            believed_log_var: default_log_var(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorSection {
    pub state_std: [f64; 4],
    pub target_mean: f64,
    pub width_mean: f64,
    pub param_std: [f64; 5],
    pub revealed_std: f64,
}

impl Default for PriorSection {
    fn default() -> Self {
        let p = PriorConfig::default();
        Self {
            state_std: p.state_std,
            target_mean: p.target_mean,
            width_mean: p.width_mean,
            param_std: p.param_std,
            revealed_std: p.revealed_std,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreferenceSection {
    /// Stds of (position, hit, misclick).
    pub std: [f64; 3],
    pub position_offset: f64,
}

impl Default for PreferenceSection {
    fn default() -> Self {
        let p = PreferenceConfig::default();
        Self {
            std: p.std,
            position_offset: p.position_offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerSection {
    pub horizon: usize,
    pub plans: usize,
    pub action_lower: [f64; 2],
    pub action_upper: [f64; 2],
    pub pv_states: usize,
    pub pv_observations: usize,
    pub info_gain: bool,
    pub ig_states: usize,
    pub ig_observations: usize,
    /// Steps and learning rate of the hypothetical updates inside the
    /// information gain; samples, step cap and backtracking follow `[vi]`.
    pub ig_vi_steps: usize,
    pub ig_vi_learning_rate: f64,
}

impl Default for PlannerSection {
    fn default() -> Self {
        let p = PlannerConfig::default();
        Self {
            horizon: p.horizon,
            plans: p.plans,
            action_lower: p.bounds.lower,
            action_upper: p.bounds.upper,
            pv_states: p.pv_states,
            pv_observations: p.pv_observations,
            info_gain: p.info_gain,
            ig_states: p.ig_states,
            ig_observations: p.ig_observations,
            ig_vi_steps: p.ig_vi.steps,
            ig_vi_learning_rate: p.ig_vi.learning_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ViSection {
    pub steps: usize,
    pub samples: usize,
    pub learning_rate: f64,
    pub max_step: f64,
    pub backtracking: usize,
}

impl Default for ViSection {
    fn default() -> Self {
        let v = ViHyper::default();
        Self {
            steps: v.steps,
            samples: v.samples,
            learning_rate: v.learning_rate,
            max_step: v.max_step,
            backtracking: v.backtracking,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UnscentedSection {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
}

impl Default for UnscentedSection {
    fn default() -> Self {
        let u = UnscentedConfig::default();
        Self {
            alpha: u.alpha,
            beta: u.beta,
            kappa: u.kappa,
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::from_toml_str(DEFAULT_TOML).expect("built-in default config is valid")
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// `default` selects the built-in configuration; anything else is a path.
    pub fn load(spec: &str) -> Result<Self> {
        if spec == "default" {
            return Ok(Self::default());
        }
        let path = Path::new(spec);
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::Config("reps must be >= 1".into()));
        }
        self.target_specs()?;
        self.agent_config()?;
        Ok(())
    }

    pub fn target_specs(&self) -> Result<Vec<TargetSpec>> {
        match &self.targets {
            None => Ok(target_set()),
            Some(ids) if ids.is_empty() => Err(Error::Config("targets must not be empty".into())),
            Some(ids) => ids
                .iter()
                .map(|&id| {
                    target_by_id(id).ok_or_else(|| Error::Config(format!("unknown target id {id}")))
                })
                .collect(),
        }
    }

    pub fn agent_config(&self) -> Result<AgentConfig> {
        let s = &self.system;
        let n = &self.noise;
        let p = &self.planner;
        let v = &self.vi;
        let cfg = AgentConfig {
            delay: s.delay,
            dt: s.dt,
            timeout_steps: s.timeout_steps,
            damping: s.damping,
            stiffness: s.stiffness,
            click_threshold: s.click_threshold,
            noise: NoiseSpec {
                position_std: n.position_std,
                displacement_std: n.displacement_std,
            },
            prior: PriorConfig {
                state_std: self.prior.state_std,
                target_mean: self.prior.target_mean,
                width_mean: self.prior.width_mean,
                param_std: self.prior.param_std,
                revealed_std: self.prior.revealed_std,
                noise: [
                    n.believed_position_std.unwrap_or(n.position_std),
                    n.believed_displacement_std.unwrap_or(n.displacement_std),
                ],
                noise_log_var: n.believed_log_var,
            },
            preference: PreferenceConfig {
                std: self.preference.std,
                position_offset: self.preference.position_offset,
            },
            planner: PlannerConfig {
                horizon: p.horizon,
                plans: p.plans,
                bounds: ActionBounds {
                    lower: p.action_lower,
                    upper: p.action_upper,
                },
                pv_states: p.pv_states,
                pv_observations: p.pv_observations,
                info_gain: p.info_gain,
                ig_states: p.ig_states,
                ig_observations: p.ig_observations,
                ig_vi: ViHyper {
                    steps: p.ig_vi_steps,
                    samples: v.samples,
                    learning_rate: p.ig_vi_learning_rate,
                    max_step: v.max_step,
                    backtracking: v.backtracking,
                },
                unscented: UnscentedConfig {
                    alpha: self.unscented.alpha,
                    beta: self.unscented.beta,
                    kappa: self.unscented.kappa,
                },
                verbose: false,
            },
            vi: ViHyper {
                steps: v.steps,
                samples: v.samples,
                learning_rate: v.learning_rate,
                max_step: v.max_step,
                backtracking: v.backtracking,
            },
            unscented: UnscentedConfig {
                alpha: self.unscented.alpha,
                beta: self.unscented.beta,
                kappa: self.unscented.kappa,
            },
        };
        cfg.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    /// Set one entry by the names used for sweeps.
    pub fn set_parameter(&mut self, name: &str, value: f64) -> Result<()> {
        let count = |v: f64| -> Result<usize> {
            if v >= 0.0 && v.fract() == 0.0 && v.is_finite() {
                Ok(v as usize)
            } else {
                Err(Error::Config(format!("{name} must be a non-negative integer")))
            }
        };
        match name {
            "damping" => self.system.damping = value,
            "stiffness" => self.system.stiffness = value,
            "click_threshold" => self.system.click_threshold = value,
            "delay" => self.system.delay = count(value)?,
            "horizon" => self.planner.horizon = count(value)?,
            "plans" => self.planner.plans = count(value)?,
            "noise_position" => {
                self.noise.position_std = value;
                self.noise.believed_position_std = None;
            }
            "noise_displacement" => {
                self.noise.displacement_std = value;
                self.noise.believed_displacement_std = None;
            }
            "preference_position_std" => self.preference.std[0] = value,
            "preference_hit_std" => self.preference.std[1] = value,
            "preference_misclick_std" => self.preference.std[2] = value,
            "vi_steps" => self.vi.steps = count(value)?,
            "vi_samples" => self.vi.samples = count(value)?,
            "vi_learning_rate" => self.vi.learning_rate = value,
            _ => {
                return Err(Error::Config(format!(
                    "unknown sweep parameter '{name}' (known: {})",
                    aifpoint_core::experiment::SWEEP_PARAMETERS.join(", ")
                )))
            }
        }
        self.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_matches_core_defaults() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.agent_config().unwrap(), AgentConfig::default());
        assert_eq!(cfg.reps, 10);
        assert_eq!(cfg.target_specs().unwrap().len(), 18);
    }

    #[test]
    fn noise_is_mandatory() {
        let err = RunConfig::from_toml_str("seed = 3\n").unwrap_err();
        assert!(err.to_string().contains("noise"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = "[noise]\nposition_std = 0.01\ndisplacement_std = 0.01\n[planner]\nplanz = 3\n";
        assert!(RunConfig::from_toml_str(text).is_err());
    }

    #[test]
    fn domains_are_checked() {
        let base = "[noise]\nposition_std = 0.01\ndisplacement_std = 0.01\n";
        assert!(RunConfig::from_toml_str(&format!("{base}[system]\ndamping = -1.0\n")).is_err());
        assert!(RunConfig::from_toml_str(&format!("targets = [19]\n{base}")).is_err());
        assert!(RunConfig::from_toml_str(&format!("reps = 0\n{base}")).is_err());
        let ok = RunConfig::from_toml_str(&format!("targets = [6, 1]\nreps = 2\n{base}")).unwrap();
        assert_eq!(ok.target_specs().unwrap()[0].position, 1750.0);
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = RunConfig::default();
        cfg.targets = Some(vec![3, 4]);
        cfg.noise.believed_position_std = Some(0.02);
        let back = RunConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn sweep_names_resolve() {
        let mut cfg = RunConfig::default();
        cfg.set_parameter("damping", 40.0).unwrap();
        assert_eq!(cfg.agent_config().unwrap().damping, 40.0);
        assert!(cfg.set_parameter("bogus", 1.0).is_err());
        assert!(cfg.set_parameter("delay", 1.5).is_err());
    }
}
