//! The agent's probabilistic machinery.
//!
//! * [`GaussianBelief`] holds the belief over the system state and over the
//!   system parameters; [`LogNormalBelief`] the belief over observation-noise
//!   standard deviations.
//! * [`unscented`] propagates a state belief through the dynamics, with
//!   sigma points drawn jointly over state and parameter beliefs.
//! * [`variational`] folds an observation into a state belief by stochastic
//!   gradient descent on the variational free energy.

mod gaussian;
pub mod unscented;
pub mod variational;

pub use gaussian::{kl_gaussian, GaussianBelief, LogNormalBelief, NoiseBelief, ParamBelief, StateBelief};
pub use unscented::{sigma_points, ukf_predict, SigmaPoints, UkfPredictor, UnscentedConfig};
pub use variational::{
    log_likelihood, minimize_free_energy, vi_update, Likelihood, PointingDraw, PointingLikelihood, ViHyper, ViOutcome, ViStatus,
    DISCRETE_CHANNEL_STD,
};
