//! The generative process: cursor and finger dynamics, click logic, the
//! observation function, and conversion between screen pixels and model
//! units.
//!
//! The cursor is a damped double integrator driven by an acceleration
//! command; the mouse button is a first-order lag driven by a force-rate
//! command. A click fires on the step where the button displacement crosses
//! the threshold from below, so the button has to be released before it can
//! click again.

use nalgebra::{Vector4, Vector5};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const STATE_DIM: usize = 4;
pub const PARAM_DIM: usize = 5;
pub const OBS_DIM: usize = 5;

/// Indices into the parameter vector `[d, k, T, W, alpha_c]`.
pub mod param {
    pub const DAMPING: usize = 0;
    pub const STIFFNESS: usize = 1;
    pub const TARGET: usize = 2;
    pub const WIDTH: usize = 3;
    pub const CLICK_THRESHOLD: usize = 4;
}

/// Indices into the state vector.
pub mod state {
    pub const POSITION: usize = 0;
    pub const VELOCITY: usize = 1;
    pub const PREV_DISPLACEMENT: usize = 2;
    pub const DISPLACEMENT: usize = 3;
}

/// Physical and task parameters of the pointing system, in model units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Cursor damping, 1/s.
    pub damping: f64,
    /// Finger (button) stiffness, 1/s.
    pub stiffness: f64,
    /// Target centre.
    pub target: f64,
    /// Target width.
    pub width: f64,
    /// Button displacement at which a click fires.
    pub click_threshold: f64,
}

impl SystemParams {
    pub fn new(
        damping: f64,
        stiffness: f64,
        target: f64,
        width: f64,
        click_threshold: f64,
    ) -> Result<Self> {
        let params = Self {
            damping,
            stiffness,
            target,
            width,
            click_threshold,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("damping", self.damping),
            ("stiffness", self.stiffness),
            ("width", self.width),
            ("click_threshold", self.click_threshold),
        ];
        for (name, value) in positive {
            if !value.is_finite() {
                return Err(Error::NonFinite(name));
            }
            if value <= 0.0 {
                return Err(Error::invalid(name, "must be > 0"));
            }
        }
        if !self.target.is_finite() {
            return Err(Error::NonFinite("target"));
        }
        Ok(())
    }

    pub fn as_vector(&self) -> Vector5<f64> {
        Vector5::new(
            self.damping,
            self.stiffness,
            self.target,
            self.width,
            self.click_threshold,
        )
    }

    /// Unchecked conversion; used for parameter samples inside the agent,
    /// which may lie outside the physical domain.
    pub fn from_vector(v: &Vector5<f64>) -> Self {
        Self {
            damping: v[param::DAMPING],
            stiffness: v[param::STIFFNESS],
            target: v[param::TARGET],
            width: v[param::WIDTH],
            click_threshold: v[param::CLICK_THRESHOLD],
        }
    }
}

/// Cursor position and velocity plus previous and current button
/// displacement.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub position: f64,
    pub velocity: f64,
    pub prev_displacement: f64,
    pub displacement: f64,
}

impl State {
    pub const ZERO: State = State {
        position: 0.0,
        velocity: 0.0,
        prev_displacement: 0.0,
        displacement: 0.0,
    };

    pub fn new(position: f64, velocity: f64, prev_displacement: f64, displacement: f64) -> Self {
        Self {
            position,
            velocity,
            prev_displacement,
            displacement,
        }
    }

    pub fn as_vector(&self) -> Vector4<f64> {
        Vector4::new(
            self.position,
            self.velocity,
            self.prev_displacement,
            self.displacement,
        )
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn as_array(&self) -> [f64; 4] {
        [
            self.position,
            self.velocity,
            self.prev_displacement,
            self.displacement,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|x| x.is_finite())
    }
}

/// Control input: cursor acceleration and button force rate.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub acceleration: f64,
    pub force_rate: f64,
}

impl Action {
    pub const ZERO: Action = Action {
        acceleration: 0.0,
        force_rate: 0.0,
    };

    pub fn new(acceleration: f64, force_rate: f64) -> Self {
        Self {
            acceleration,
            force_rate,
        }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.acceleration, self.force_rate]
    }

    pub fn clamped(&self, bounds: &ActionBounds) -> Action {
        Action {
            acceleration: self.acceleration.clamp(bounds.lower[0], bounds.upper[0]),
            force_rate: self.force_rate.clamp(bounds.lower[1], bounds.upper[1]),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.acceleration.is_finite() && self.force_rate.is_finite()
    }
}

/// Box constraints on actions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionBounds {
    pub lower: [f64; 2],
    pub upper: [f64; 2],
}

impl Default for ActionBounds {
    fn default() -> Self {
        Self {
            lower: [-50.0, -1.0],
            upper: [50.0, 1.0],
        }
    }
}

impl ActionBounds {
    pub fn validate(&self) -> Result<()> {
        for i in 0..2 {
            if !(self.lower[i].is_finite() && self.upper[i].is_finite()) {
                return Err(Error::NonFinite("action bounds"));
            }
            if self.lower[i] >= self.upper[i] {
                return Err(Error::invalid("action bounds", "lower must be < upper"));
            }
        }
        Ok(())
    }

    pub fn contains(&self, a: &Action) -> bool {
        let v = a.as_array();
        (0..2).all(|i| v[i] >= self.lower[i] && v[i] <= self.upper[i])
    }
}

/// What the agent perceives. The discrete channels carry 0/1 (click, hit)
/// and 0/-1 (misclick) as reals so one vector type serves the pipeline.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub position: f64,
    pub displacement: f64,
    pub click: f64,
    pub hit: f64,
    pub misclick: f64,
}

impl Observation {
    pub fn as_array(&self) -> [f64; OBS_DIM] {
        [
            self.position,
            self.displacement,
            self.click,
            self.hit,
            self.misclick,
        ]
    }

    pub fn from_array(o: [f64; OBS_DIM]) -> Self {
        Self {
            position: o[0],
            displacement: o[1],
            click: o[2],
            hit: o[3],
            misclick: o[4],
        }
    }

    pub fn clicked(&self) -> bool {
        self.click == 1.0
    }

    pub fn is_hit(&self) -> bool {
        self.hit == 1.0
    }

    pub fn is_misclick(&self) -> bool {
        self.misclick == -1.0
    }
}

/// Standard deviations of the two noisy observation channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub position_std: f64,
    pub displacement_std: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            position_std: 0.01,
            displacement_std: 0.01,
        }
    }
}

impl NoiseSpec {
    pub fn new(position_std: f64, displacement_std: f64) -> Result<Self> {
        let n = Self {
            position_std,
            displacement_std,
        };
        n.validate()?;
        Ok(n)
    }

    pub fn zero() -> Self {
        Self {
            position_std: 0.0,
            displacement_std: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("position_std", self.position_std),
            ("displacement_std", self.displacement_std),
        ] {
            if !v.is_finite() {
                return Err(Error::NonFinite(name));
            }
            if v < 0.0 {
                return Err(Error::invalid(name, "must be >= 0"));
            }
        }
        Ok(())
    }
}

/// One step of the discretised dynamics for a raw parameter vector.
///
/// No validation: the agent evaluates this on sampled parameters that may be
/// unphysical.
#[inline]
pub fn transition(theta: &Vector5<f64>, s: &Vector4<f64>, a: &Action, dt: f64) -> Vector4<f64> {
    let d = theta[param::DAMPING];
    let k = theta[param::STIFFNESS];
    Vector4::new(
        s[0] + dt * s[1],
        s[1] - dt * d * s[1] + dt * a.acceleration,
        s[3],
        s[3] - dt * k * s[3] + dt * a.force_rate,
    )
}

/// Advance the true system by one step.
pub fn step(params: &SystemParams, s: &State, a: &Action, dt: f64) -> Result<State> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid("dt", "must be finite and > 0"));
    }
    if !s.is_finite() {
        return Err(Error::NonFinite("state"));
    }
    if !a.is_finite() {
        return Err(Error::NonFinite("action"));
    }
    let next = transition(&params.as_vector(), &s.as_vector(), a, dt);
    Ok(State::from_vector(&next))
}

/// Click and hit flags for a state given target centre, width and
/// threshold. The target interval is closed.
#[inline]
pub fn click_logic(
    target: f64,
    width: f64,
    threshold: f64,
    position: f64,
    prev_displacement: f64,
    displacement: f64,
) -> (bool, bool) {
    let click = prev_displacement < threshold && displacement > threshold;
    let hit = click && (position - target).abs() <= 0.5 * width;
    (click, hit)
}

/// The noiseless observation function.
pub fn observe(params: &SystemParams, s: &State) -> Observation {
    let (click, hit) = click_logic(
        params.target,
        params.width,
        params.click_threshold,
        s.position,
        s.prev_displacement,
        s.displacement,
    );
    let c = if click { 1.0 } else { 0.0 };
    let h = if hit { 1.0 } else { 0.0 };
    Observation {
        position: s.position,
        displacement: s.displacement,
        click: c,
        hit: h,
        misclick: h - c,
    }
}

/// Observation with Gaussian noise on position and displacement; the
/// discrete channels are exact.
pub fn sample_observation<R: Rng + ?Sized>(
    params: &SystemParams,
    s: &State,
    noise: &NoiseSpec,
    rng: &mut R,
) -> Observation {
    let mut o = observe(params, s);
    let e1: f64 = rng.sample(StandardNormal);
    let e2: f64 = rng.sample(StandardNormal);
    o.position += noise.position_std * e1;
    o.displacement += noise.displacement_std * e2;
    o
}

/// Task geometry in screen pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub canvas_width: f64,
    pub start: f64,
    pub target: f64,
    pub width: f64,
    /// Pixels per model unit.
    pub scale: f64,
}

impl TaskSpec {
    pub const CANVAS_WIDTH: f64 = 1800.0;
    pub const START: f64 = 900.0;
    pub const SCALE: f64 = 1000.0;

    /// Task on the standard 1800 px canvas starting at 900 px.
    pub fn standard(target_px: f64, width_px: f64) -> Self {
        Self {
            canvas_width: Self::CANVAS_WIDTH,
            start: Self::START,
            target: target_px,
            width: width_px,
            scale: Self::SCALE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("canvas_width", self.canvas_width),
            ("start", self.start),
            ("target", self.target),
            ("width", self.width),
            ("scale", self.scale),
        ] {
            if !v.is_finite() {
                return Err(Error::NonFinite(name));
            }
        }
        if self.scale <= 0.0 {
            return Err(Error::invalid("scale", "must be > 0"));
        }
        if self.width <= 0.0 {
            return Err(Error::invalid("width", "must be > 0"));
        }
        if self.target < 0.0 || self.target > self.canvas_width {
            return Err(Error::invalid("target", "outside the canvas"));
        }
        Ok(())
    }

    /// Pixel coordinate to model units (centred on the start position).
    pub fn to_model(&self, px: f64) -> f64 {
        (px - self.start) / self.scale
    }

    /// Model units back to pixel coordinates.
    pub fn to_pixels(&self, model: f64) -> f64 {
        model * self.scale + self.start
    }

    /// Distance between start and target centre, pixels.
    pub fn distance(&self) -> f64 {
        (self.target - self.start).abs()
    }
}

/// Target centre and width in model units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskGeometry {
    pub target: f64,
    pub width: f64,
}

pub fn scale_task(task: &TaskSpec) -> Result<TaskGeometry> {
    task.validate()?;
    Ok(TaskGeometry {
        target: task.to_model(task.target),
        width: task.width / task.scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use approx::assert_abs_diff_eq;

    fn params(d: f64, k: f64) -> SystemParams {
        SystemParams::new(d, k, 0.0, 0.06, 0.05).unwrap()
    }

    #[test]
    fn step_fixed_point() {
        let s = step(&params(24.0, 10.0), &State::ZERO, &Action::ZERO, 0.02).unwrap();
        assert_eq!(s, State::ZERO);
    }

    #[test]
    fn step_damped_velocity() {
        let s = State::new(0.0, 1.0, 0.0, 0.0);
        let n = step(&params(24.0, 10.0), &s, &Action::ZERO, 0.02).unwrap();
        assert_abs_diff_eq!(n.position, 0.02, epsilon = 1e-15);
        assert_abs_diff_eq!(n.velocity, 0.52, epsilon = 1e-15);
        assert_eq!(n.prev_displacement, 0.0);
        assert_eq!(n.displacement, 0.0);
    }

    #[test]
    fn step_button_lag() {
        let s = State::new(0.0, 0.0, 0.1, 0.2);
        let n = step(&params(24.0, 10.0), &s, &Action::new(0.0, 1.0), 0.02).unwrap();
        assert_eq!(n.position, 0.0);
        assert_eq!(n.velocity, 0.0);
        assert_abs_diff_eq!(n.prev_displacement, 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(n.displacement, 0.18, epsilon = 1e-15);
    }

    #[test]
    fn step_rejects_bad_input() {
        let p = params(24.0, 10.0);
        let nan = State::new(f64::NAN, 0.0, 0.0, 0.0);
        assert!(step(&p, &nan, &Action::ZERO, 0.02).is_err());
        assert!(step(&p, &State::ZERO, &Action::new(f64::INFINITY, 0.0), 0.02).is_err());
        assert!(step(&p, &State::ZERO, &Action::ZERO, 0.0).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(SystemParams::new(0.0, 10.0, 0.0, 0.06, 0.05).is_err());
        assert!(SystemParams::new(24.0, 10.0, 0.0, -0.06, 0.05).is_err());
        assert!(SystemParams::new(24.0, 10.0, f64::NAN, 0.06, 0.05).is_err());
    }

    #[test]
    fn click_on_target() {
        let p = SystemParams::new(24.0, 10.0, 0.85, 0.06, 0.05).unwrap();
        let o = observe(&p, &State::new(0.85, 0.0, 0.04, 0.06));
        assert_eq!((o.click, o.hit, o.misclick), (1.0, 1.0, 0.0));
        let o = observe(&p, &State::new(0.85 + 0.06, 0.0, 0.04, 0.06));
        assert_eq!((o.click, o.hit, o.misclick), (1.0, 0.0, -1.0));
        // held button does not click again
        let o = observe(&p, &State::new(0.85, 0.0, 0.06, 0.06));
        assert_eq!((o.click, o.hit, o.misclick), (0.0, 0.0, 0.0));
    }

    #[test]
    fn target_boundary_counts_as_hit() {
        let p = SystemParams::new(24.0, 10.0, 0.5, 0.25, 0.05).unwrap();
        let o = observe(&p, &State::new(0.625, 0.0, 0.0, 0.1));
        assert_eq!(o.hit, 1.0);
    }

    #[test]
    fn zero_noise_sample_equals_observe() {
        let p = params(24.0, 10.0);
        let s = State::new(0.3, 1.0, 0.01, 0.07);
        let mut rng = substream(1, &[]);
        let o = sample_observation(&p, &s, &NoiseSpec::zero(), &mut rng);
        assert_eq!(o, observe(&p, &s));
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let p = params(24.0, 10.0);
        let s = State::new(0.3, 1.0, 0.01, 0.07);
        let noise = NoiseSpec::default();
        let a = sample_observation(&p, &s, &noise, &mut substream(5, &[1]));
        let b = sample_observation(&p, &s, &noise, &mut substream(5, &[1]));
        assert_eq!(a.position.to_bits(), b.position.to_bits());
        assert_eq!(a.displacement.to_bits(), b.displacement.to_bits());
    }

    #[test]
    fn position_noise_std_monte_carlo() {
        let p = params(24.0, 10.0);
        let s = State::new(0.3, 0.0, 0.0, 0.0);
        let noise = NoiseSpec::new(0.01, 0.02).unwrap();
        let mut rng = substream(11, &[]);
        let n = 100_000;
        let xs: alloc::vec::Vec<f64> = (0..n)
            .map(|_| sample_observation(&p, &s, &noise, &mut rng).position)
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let std = var.sqrt();
        assert!((std - 0.01).abs() / 0.01 < 0.02, "std {std}");
    }

    #[test]
    fn task_scaling() {
        let task = TaskSpec::standard(1750.0, 60.0);
        let g = scale_task(&task).unwrap();
        assert_abs_diff_eq!(g.target, 0.85, epsilon = 1e-12);
        assert_abs_diff_eq!(g.width, 0.06, epsilon = 1e-12);
        let centre = scale_task(&TaskSpec::standard(900.0, 20.0)).unwrap();
        assert_eq!(centre.target, 0.0);
        for px in [0.0, 50.0, 675.0, 1438.0, 1800.0] {
            assert_abs_diff_eq!(task.to_pixels(task.to_model(px)), px, epsilon = 1e-9);
        }
        assert!(scale_task(&TaskSpec::standard(1900.0, 60.0)).is_err());
    }

    #[test]
    fn action_clamping() {
        let b = ActionBounds::default();
        let a = Action::new(80.0, -3.0).clamped(&b);
        assert_eq!(a, Action::new(50.0, -1.0));
        assert!(b.contains(&a));
    }
}
