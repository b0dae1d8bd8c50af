//! Continuous active-inference model of one-dimensional mouse pointing and
//! clicking.
//!
//! The crate is `no_std` + `alloc`. It contains the simulated world (cursor
//! and finger dynamics, click logic), the agent's beliefs and their updates
//! (unscented prediction, variational correction), expected-free-energy
//! planning over sampled action sequences, the delayed interaction loop, and
//! the pure analyses run on finished trials (Fitts regression, end-point
//! spread, outlier removal, reaction-time estimation).
//!
//! File formats, configuration, and the command-line driver live in the
//! `aifpoint` crate.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod agent;
pub mod belief;
pub mod dynamics;
mod error;
pub mod experiment;
pub(crate) mod linalg;
pub(crate) mod math;
pub mod planner;
pub mod rng;

pub use error::{Error, Result};

/// Discretisation step of the simulation, in seconds.
pub const DEFAULT_DT: f64 = 0.02;
