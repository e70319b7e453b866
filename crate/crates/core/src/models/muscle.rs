use serde::{Deserialize, Serialize};

use super::positive;
use crate::error::{Error, Result};

/// Slope factor of the eccentric (lengthening) force-velocity branch.
pub const ECCENTRIC_SLOPE: f64 = 7.56;

/// Activation dynamics and mono-synaptic force-feedback reflex shared by both
/// muscle models: u(t) = G * F_L(t - delta) + u0, clamped to [u_min, u_max].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReflexParams {
    /// Activation time constant (s).
    pub tau: f64,
    /// Feedback transport delay (s).
    pub delta: f64,
    /// Feedback gain G (1/N).
    pub gain: f64,
    /// Stimulation at touch-down.
    pub u0: f64,
    pub u_min: f64,
    pub u_max: f64,
}

impl ReflexParams {
    fn with(gain: f64, u0: f64) -> Self {
        Self {
            tau: 0.010,
            delta: 0.015,
            gain,
            u0,
            u_min: 0.001,
            u_max: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("tau", self.tau)?;
        if !(self.delta.is_finite() && self.delta >= 0.0) {
            return Err(Error::param("delta", "must be finite and non-negative"));
        }
        if !self.gain.is_finite() || !self.u0.is_finite() {
            return Err(Error::param("gain", "gain and u0 must be finite"));
        }
        #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN bounds must fail too
        if !(self.u_min <= self.u_max) {
            return Err(Error::param("u_min", "stimulation bounds are empty"));
        }
        Ok(())
    }
}

/// Hill-type muscle fibers with force-length and force-velocity relations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MusFibParams {
    /// Maximum isometric force (N).
    pub f_max: f64,
    /// Optimal fiber length (m).
    pub l_opt: f64,
    /// Width of the force-length relation (relative to l_opt).
    pub width: f64,
    /// Force-length shape exponent factor.
    pub c: f64,
    /// Maximum contraction velocity (m/s, negative).
    pub v_max: f64,
    /// Curvature of the concentric branch.
    pub k: f64,
    /// Eccentric force enhancement asymptote.
    pub n: f64,
    pub reflex: ReflexParams,
}

impl Default for MusFibParams {
    fn default() -> Self {
        let f_max = 2500.0;
        Self {
            f_max,
            l_opt: 0.9,
            width: 0.45,
            c: 30.0,
            v_max: -3.5,
            k: 1.5,
            n: 1.5,
            reflex: ReflexParams::with(2.4 / f_max, 0.027),
        }
    }
}

impl MusFibParams {
    pub fn validate(&self) -> Result<()> {
        positive("f_max", self.f_max)?;
        positive("l_opt", self.l_opt)?;
        positive("width", self.width)?;
        if !(self.v_max.is_finite() && self.v_max < 0.0) {
            return Err(Error::param("v_max", "must be negative"));
        }
        if !self.c.is_finite() || !self.k.is_finite() || !self.n.is_finite() {
            return Err(Error::param("c", "shape parameters must be finite"));
        }
        self.reflex.validate()
    }
}

/// Muscle with the force-length relation dropped and a linear
/// force-velocity relation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MusLinParams {
    pub f_max: f64,
    /// Slope of the linear force-velocity relation (s/m).
    pub mu: f64,
    pub reflex: ReflexParams,
}

impl Default for MusLinParams {
    fn default() -> Self {
        let f_max = 2500.0;
        Self {
            f_max,
            mu: 0.25,
            reflex: ReflexParams::with(0.8 / f_max, 0.19),
        }
    }
}

impl MusLinParams {
    pub fn validate(&self) -> Result<()> {
        positive("f_max", self.f_max)?;
        positive("mu", self.mu)?;
        self.reflex.validate()
    }
}

/// Fiber force F_fib(l_M, l̇_M) at full activation.
///
/// The force-length factor is `exp(-c |(l - l_opt) / (l_opt w)|^3)`. The
/// force-velocity factor has a concentric branch for positive velocities
/// (force drops to zero at `-v_max`) and an eccentric branch for
/// non-positive velocities rising towards `n`. Both branches equal 1 at
/// zero velocity.
pub fn fiber_force(length: f64, velocity: f64, p: &MusFibParams) -> f64 {
    let stretch = ((length - p.l_opt) / (p.l_opt * p.width)).abs();
    let force_length = (-p.c * stretch.powi(3)).exp();
    let v_max = p.v_max;
    let force_velocity = if velocity > 0.0 {
        (v_max + velocity) / (v_max - p.k * velocity)
    } else {
        p.n + (p.n - 1.0) * (v_max - velocity) / (-ECCENTRIC_SLOPE * p.k * velocity - v_max)
    };
    p.f_max * force_length * force_velocity
}

/// Leg force of the linearized muscle: `a * F_max * (1 - mu * l̇_M)`.
pub fn linear_fiber_force(velocity: f64, activation: f64, p: &MusLinParams) -> f64 {
    activation * p.f_max * (1.0 - p.mu * velocity)
}

/// First-order activation dynamics, `(u - a) / tau`.
pub fn activation_derivative(activation: f64, stimulation: f64, tau: f64) -> f64 {
    (stimulation - activation) / tau
}

/// Reflex stimulation from the delayed leg force.
pub fn force_feedback_stimulation(delayed_force: f64, p: &ReflexParams) -> f64 {
    (p.gain * delayed_force + p.u0).clamp(p.u_min, p.u_max)
}
