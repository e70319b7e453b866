use serde::{Deserialize, Serialize};

use super::positive;
use crate::error::{Error, Result};

/// Geared DC motor tracking a recorded stance trajectory with a PD law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DcMotParams {
    /// Torque constant k_T (N m / A).
    pub k_t: f64,
    /// Ideal gear ratio gamma.
    pub gear_ratio: f64,
    /// Winding resistance (Ohm).
    pub resistance: f64,
    /// Winding inductance (H).
    pub inductance: f64,
    /// Armature voltage bounds (V).
    pub u_min: f64,
    pub u_max: f64,
    /// Proportional gain (V/m).
    pub kp: f64,
    /// Derivative gain (V s/m).
    pub kd: f64,
    /// Nominal motor torque (N m), used for the mass scaling.
    pub t_nominal: f64,
    /// Body mass and peak force of the muscle hopper the motor is compared
    /// against; the DCMot mass is scaled from these.
    pub reference_mass: f64,
    pub reference_force: f64,
    #[serde(skip)]
    pub reference: Option<StanceReference>,
}

impl Default for DcMotParams {
    fn default() -> Self {
        Self {
            k_t: 0.126,
            gear_ratio: 100.0,
            resistance: 7.19,
            inductance: 0.0016,
            u_min: -48.0,
            u_max: 48.0,
            kp: 5000.0,
            kd: 500.0,
            t_nominal: 0.212,
            reference_mass: 80.0,
            reference_force: 2500.0,
            reference: None,
        }
    }
}

impl DcMotParams {
    /// m_DC = gamma * T_nominal / F_max * m, the body mass giving the motor
    /// the same accelerations as the muscle hoppers.
    pub fn equivalent_mass(&self) -> f64 {
        self.gear_ratio * self.t_nominal / self.reference_force * self.reference_mass
    }

    pub fn with_reference(mut self, reference: StanceReference) -> Self {
        self.reference = Some(reference);
        self
    }

    /// Maps an armature voltage onto [0, 1].
    pub fn normalize_voltage(&self, u: f64) -> f64 {
        (u - self.u_min) / (self.u_max - self.u_min)
    }

    pub fn validate(&self) -> Result<()> {
        positive("k_t", self.k_t)?;
        positive("gear_ratio", self.gear_ratio)?;
        positive("resistance", self.resistance)?;
        positive("inductance", self.inductance)?;
        positive("t_nominal", self.t_nominal)?;
        positive("reference_mass", self.reference_mass)?;
        positive("reference_force", self.reference_force)?;
        #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN bounds must fail too
        if !(self.u_min < self.u_max) {
            return Err(Error::param("u_min", "voltage bounds are empty"));
        }
        if !self.kp.is_finite() || !self.kd.is_finite() {
            return Err(Error::param("kp", "gains must be finite"));
        }
        Ok(())
    }
}

/// PD armature voltage, saturated at the supply bounds.
pub fn pd_voltage(y: f64, yd: f64, y_rec: f64, yd_rec: f64, p: &DcMotParams) -> f64 {
    (p.kp * (y_rec - y) + p.kd * (yd_rec - yd)).clamp(p.u_min, p.u_max)
}

/// Winding current derivative, `(u - k_T gamma yd - R I) / L`.
pub fn motor_current_derivative(current: f64, voltage: f64, yd: f64, p: &DcMotParams) -> f64 {
    (voltage - p.k_t * p.gear_ratio * yd - p.resistance * current) / p.inductance
}

/// Uniformly sampled stance trajectory, indexed by time since touch-down.
#[derive(Clone, Debug, PartialEq)]
pub struct StanceReference {
    pub dt: f64,
    pub y: Vec<f64>,
    pub yd: Vec<f64>,
}

impl StanceReference {
    pub fn new(dt: f64, y: Vec<f64>, yd: Vec<f64>) -> Result<Self> {
        positive("reference dt", dt)?;
        if y.len() != yd.len() {
            return Err(Error::LengthMismatch {
                expected: y.len(),
                found: yd.len(),
            });
        }
        if y.len() < 2 {
            return Err(Error::Empty(
                "stance reference needs at least two samples".into(),
            ));
        }
        Ok(Self { dt, y, yd })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn duration(&self) -> f64 {
        (self.len() - 1) as f64 * self.dt
    }

    /// Linear interpolation at `tau` seconds after touch-down; the end
    /// samples are held outside the recorded window.
    pub fn sample(&self, tau: f64) -> (f64, f64) {
        let last = self.len() - 1;
        if tau <= 0.0 {
            return (self.y[0], self.yd[0]);
        }
        let pos = tau / self.dt;
        let i = pos.floor() as usize;
        if i >= last {
            return (self.y[last], self.yd[last]);
        }
        let frac = pos - i as f64;
        (
            self.y[i] + frac * (self.y[i + 1] - self.y[i]),
            self.yd[i] + frac * (self.yd[i + 1] - self.yd[i]),
        )
    }
}
