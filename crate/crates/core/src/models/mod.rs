//! Hopping models: a point mass on a massless leg whose force comes from a
//! Hill-type muscle (MusFib), a linearized muscle (MusLin) or a PD-driven DC
//! motor (DCMot).
//!
//! Everything here is a pure function of the state and of the controller
//! inputs the caller supplies ([`Drive`]). The transport delay of the reflex
//! and the reference clock of the PD tracker live in the integrator.

mod config;
mod motor;
mod muscle;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use config::{parse_entries, ConfigEntry};
pub use motor::{motor_current_derivative, pd_voltage, DcMotParams, StanceReference};
pub use muscle::{
    activation_derivative, fiber_force, force_feedback_stimulation, linear_fiber_force,
    MusFibParams, MusLinParams, ReflexParams, ECCENTRIC_SLOPE,
};

/// Standard gravity, always acting in negative y.
pub const GRAVITY: f64 = 9.81;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    MusFib,
    MusLin,
    DcMot,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::MusFib, ModelKind::MusLin, ModelKind::DcMot];

    /// Lower-case identifier used on the command line and in file names.
    pub fn id(self) -> &'static str {
        match self {
            ModelKind::MusFib => "musfib",
            ModelKind::MusLin => "muslin",
            ModelKind::DcMot => "dcmot",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ModelKind::MusFib => "MusFib",
            ModelKind::MusLin => "MusLin",
            ModelKind::DcMot => "DCMot",
        }
    }

    pub fn is_muscle(self) -> bool {
        !matches!(self, ModelKind::DcMot)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "musfib" => Ok(ModelKind::MusFib),
            "muslin" => Ok(ModelKind::MusLin),
            "dcmot" => Ok(ModelKind::DcMot),
            other => Err(Error::param("model", format!("unknown model `{other}`"))),
        }
    }
}

/// Body parameters shared by all models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HopperCommon {
    /// kg
    pub mass: f64,
    /// m/s², magnitude only
    pub gravity: f64,
    /// Leg rest length l0 (m); contact while y <= l0.
    pub rest_length: f64,
}

impl Default for HopperCommon {
    fn default() -> Self {
        Self {
            mass: 80.0,
            gravity: GRAVITY,
            rest_length: 1.0,
        }
    }
}

impl HopperCommon {
    pub fn validate(&self) -> Result<()> {
        positive("mass", self.mass)?;
        positive("gravity", self.gravity)?;
        positive("rest_length", self.rest_length)
    }
}

/// What the muscle models report as their sensor channel.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensorTap {
    /// The leg force as seen by the reflex, F_L(t - delta). The stimulation is
    /// a function of this value.
    #[default]
    Delayed,
    /// The leg force at the sample time, F_L(t).
    Instantaneous,
}

impl FromStr for SensorTap {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delayed" => Ok(SensorTap::Delayed),
            "instantaneous" => Ok(SensorTap::Instantaneous),
            other => Err(Error::param(
                "sensor",
                format!("expected `delayed` or `instantaneous`, got `{other}`"),
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ModelParams {
    MusFib(MusFibParams),
    MusLin(MusLinParams),
    DcMot(DcMotParams),
}

/// Full description of one hopper: body, actuator, controller and initial
/// conditions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub common: HopperCommon,
    pub params: ModelParams,
    /// Initial height (m). The run starts at rest at this height.
    pub initial_height: f64,
    pub sensor: SensorTap,
}

impl ModelSpec {
    pub fn musfib() -> Self {
        Self::from_params(ModelParams::MusFib(MusFibParams::default()))
    }

    pub fn muslin() -> Self {
        Self::from_params(ModelParams::MusLin(MusLinParams::default()))
    }

    /// DCMot with the mass scaled so the small motor sees the same
    /// accelerations as the muscle models.
    pub fn dcmot() -> Self {
        Self::from_params(ModelParams::DcMot(DcMotParams::default()))
    }

    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::MusFib => Self::musfib(),
            ModelKind::MusLin => Self::muslin(),
            ModelKind::DcMot => Self::dcmot(),
        }
    }

    fn from_params(params: ModelParams) -> Self {
        let mut common = HopperCommon::default();
        if let ModelParams::DcMot(dc) = &params {
            common.mass = dc.equivalent_mass();
        }
        Self {
            common,
            params,
            initial_height: 1.070,
            sensor: SensorTap::default(),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self.params {
            ModelParams::MusFib(_) => ModelKind::MusFib,
            ModelParams::MusLin(_) => ModelKind::MusLin,
            ModelParams::DcMot(_) => ModelKind::DcMot,
        }
    }

    /// Reflex parameters of the muscle models, `None` for DCMot.
    pub fn reflex(&self) -> Option<&ReflexParams> {
        match &self.params {
            ModelParams::MusFib(p) => Some(&p.reflex),
            ModelParams::MusLin(p) => Some(&p.reflex),
            ModelParams::DcMot(_) => None,
        }
    }

    /// State at t = 0: at rest at the initial height, activation at the
    /// touch-down stimulation, motor current zero.
    pub fn initial_state(&self) -> ContinuousState {
        let aux = match &self.params {
            ModelParams::MusFib(p) => p.reflex.u0,
            ModelParams::MusLin(p) => p.reflex.u0,
            ModelParams::DcMot(_) => 0.0,
        };
        ContinuousState {
            y: self.initial_height,
            yd: 0.0,
            aux,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.common.validate()?;
        if !self.initial_height.is_finite() {
            return Err(Error::param("y0", "must be finite"));
        }
        match &self.params {
            ModelParams::MusFib(p) => p.validate(),
            ModelParams::MusLin(p) => p.validate(),
            ModelParams::DcMot(p) => {
                p.validate()?;
                let expected = p.equivalent_mass();
                let rel = (self.common.mass - expected).abs() / expected;
                if rel > 1e-6 {
                    return Err(Error::param(
                        "mass",
                        format!(
                            "DCMot mass {} violates m_DC = gear_ratio * t_nominal / reference_force * reference_mass = {expected}",
                            self.common.mass
                        ),
                    ));
                }
                Ok(())
            }
        }
    }
}

/// Continuous state of a hopper. `aux` is the muscle activation for the
/// muscle models and the winding current (A) for DCMot.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContinuousState {
    pub y: f64,
    pub yd: f64,
    pub aux: f64,
}

impl ContinuousState {
    pub fn to_array(self) -> [f64; 3] {
        [self.y, self.yd, self.aux]
    }

    pub fn from_slice(x: &[f64]) -> Self {
        Self {
            y: x[0],
            yd: x[1],
            aux: x[2],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.y.is_finite() && self.yd.is_finite() && self.aux.is_finite()
    }
}

/// Controller-side inputs at one instant, resolved by the caller.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Drive {
    /// Ground contact mode. The integrator owns this discrete state and flips
    /// it only at localized crossings of y = l0.
    pub contact: bool,
    /// Leg force at t - delta (muscle reflex input); 0 before the first
    /// contact has propagated through the delay.
    pub delayed_force: f64,
    /// PD reference (y_rec, yd_rec) at the current time since touch-down.
    pub reference: Option<(f64, f64)>,
}

/// Right-hand side of the hybrid system plus the algebraic outputs computed
/// along the way.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Derivative {
    pub dy: f64,
    pub dyd: f64,
    pub daux: f64,
    /// F_L (N), zero in flight.
    pub leg_force: f64,
    /// Controller output: muscle stimulation u, or armature voltage u_DC (V).
    pub control: f64,
}

impl Derivative {
    pub fn as_array(&self) -> [f64; 3] {
        [self.dy, self.dyd, self.daux]
    }
}

/// Muscle length and contraction velocity; held at (l0, 0) during flight.
pub fn muscle_kinematics(state: &ContinuousState, contact: bool, rest_length: f64) -> (f64, f64) {
    if contact {
        (state.y, state.yd)
    } else {
        (rest_length, 0.0)
    }
}

/// Full hopper dynamics: m * ydd = -m * g + F_L, with F_L acting only in
/// ground contact.
pub fn system_derivative(
    spec: &ModelSpec,
    state: &ContinuousState,
    drive: &Drive,
) -> Result<Derivative> {
    let common = &spec.common;
    let (daux, leg_force, control) = match &spec.params {
        ModelParams::MusFib(p) => {
            let u = force_feedback_stimulation(drive.delayed_force, &p.reflex);
            let (l, ld) = muscle_kinematics(state, drive.contact, common.rest_length);
            let force = if drive.contact {
                state.aux * fiber_force(l, ld, p)
            } else {
                0.0
            };
            (activation_derivative(state.aux, u, p.reflex.tau), force, u)
        }
        ModelParams::MusLin(p) => {
            let u = force_feedback_stimulation(drive.delayed_force, &p.reflex);
            let (_, ld) = muscle_kinematics(state, drive.contact, common.rest_length);
            let force = if drive.contact {
                linear_fiber_force(ld, state.aux, p)
            } else {
                0.0
            };
            (activation_derivative(state.aux, u, p.reflex.tau), force, u)
        }
        ModelParams::DcMot(p) => {
            if drive.contact {
                let (y_rec, yd_rec) = drive.reference.ok_or(Error::MissingReference)?;
                let u = pd_voltage(state.y, state.yd, y_rec, yd_rec, p);
                let di = motor_current_derivative(state.aux, u, state.yd, p);
                (di, p.gear_ratio * p.k_t * state.aux, u)
            } else {
                // Motor idle in flight: no voltage, current held.
                (0.0, 0.0, 0.0)
            }
        }
    };
    let ydd = -common.gravity + leg_force / common.mass;
    Ok(Derivative {
        dy: state.yd,
        dyd: ydd,
        daux,
        leg_force,
        control,
    })
}

pub(crate) fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::param(
            name,
            format!("must be positive and finite, got {v}"),
        ))
    }
}
