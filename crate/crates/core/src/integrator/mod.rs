//! Numerical integration: an embedded Dormand-Prince 5(4) stepper, a delay
//! history for the reflex loop, and the hybrid hopper driver built on both.

mod dopri;
mod history;
mod hopper;
mod reference;
mod trace;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ConfigEntry;

pub use dopri::{
    attempt_step, min_step, solve, step_factor, DenseStep, SolverStats, StepAttempt, Tolerances,
};
pub use history::{DelayHistory, Side};
pub use hopper::{integrate, ContactEvent, ContactEventKind, Simulation};
pub use reference::{
    extract_stance_reference, read_reference_csv, stance_runs, write_reference_csv,
    REFERENCE_HEADER,
};
pub use trace::{sensor_channels, Trace};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Simulated duration in seconds, starting at t = 0.
    pub t_end: f64,
    /// Output samples per second.
    pub sample_rate: f64,
    /// Upper bound on the step. Muscle models additionally cap it at the
    /// reflex delay.
    pub max_step: f64,
    pub initial_step: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            t_end: 8.0,
            sample_rate: 1000.0,
            max_step: 1e-3,
            initial_step: 1e-4,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            ("abs_tol", self.abs_tol),
            ("rel_tol", self.rel_tol),
            ("t_end", self.t_end),
            ("sample_rate", self.sample_rate),
            ("max_step", self.max_step),
            ("initial_step", self.initial_step),
        ];
        for (name, v) in checks {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(
                    name,
                    format!("must be positive and finite, got {v}"),
                ));
            }
        }
        Ok(())
    }

    /// Applies one config entry. Returns false for keys it does not know.
    pub fn set_param(&mut self, e: &ConfigEntry) -> Result<bool> {
        let slot = match e.key.as_str() {
            "abs_tol" | "atol" => &mut self.abs_tol,
            "rel_tol" | "rtol" => &mut self.rel_tol,
            "t_end" | "duration" => &mut self.t_end,
            "sample_rate" | "fs" => &mut self.sample_rate,
            "max_step" => &mut self.max_step,
            "initial_step" => &mut self.initial_step,
            _ => return Ok(false),
        };
        *slot = e.number()?;
        Ok(true)
    }
}
