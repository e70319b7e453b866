//! Hybrid integration of a hopper: adaptive Dormand-Prince between contact
//! events, with the reflex delay served from a history of accepted steps.

use std::cell::Cell;
use std::collections::VecDeque;

use super::dopri::{
    attempt_step, min_step, step_factor, DenseStep, SolverStats, StepAttempt, Tolerances,
};
use super::history::{DelayHistory, Side};
use super::trace::Trace;
use super::IntegratorConfig;
use crate::error::{Error, Result};
use crate::models::{
    system_derivative, ContinuousState, Derivative, Drive, ModelParams, ModelSpec, SensorTap,
    StanceReference,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ContactEventKind {
    Touchdown,
    Liftoff,
}

/// A localized crossing of y = l0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContactEvent {
    pub t: f64,
    pub kind: ContactEventKind,
    /// |y - l0| of the integrated state at the crossing, before the height
    /// is set to l0.
    pub y_error: f64,
    pub yd: f64,
}

/// Output of one hopper run.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub trace: Trace,
    pub events: Vec<ContactEvent>,
    pub stats: SolverStats,
}

struct Hopper<'a> {
    spec: &'a ModelSpec,
    history: Option<DelayHistory>,
    reference: Option<&'a StanceReference>,
    contact: bool,
    touchdown: f64,
    evaluations: Cell<usize>,
}

impl Hopper<'_> {
    fn drive(&self, t: f64, side: Side) -> Drive {
        Drive {
            contact: self.contact,
            delayed_force: self.history.as_ref().map_or(0.0, |h| h.delayed(t, side)),
            reference: match (self.reference, self.contact) {
                (Some(r), true) => Some(r.sample(t - self.touchdown)),
                _ => None,
            },
        }
    }

    fn eval_with(&self, t: f64, x: &[f64; 3], drive: &Drive) -> Result<Derivative> {
        self.evaluations.set(self.evaluations.get() + 1);
        let d = system_derivative(self.spec, &ContinuousState::from_slice(x), drive)?;
        if d.as_array().iter().all(|v| v.is_finite()) && d.leg_force.is_finite() {
            Ok(d)
        } else {
            Err(Error::NonFinite { t })
        }
    }

    fn eval(&self, t: f64, x: &[f64; 3], side: Side) -> Result<Derivative> {
        self.eval_with(t, x, &self.drive(t, side))
    }

    /// One trial step. Stages strictly inside the step see left limits of the
    /// delayed signal so a jump at the step end does not leak into the step.
    fn attempt(&self, t: f64, x: &[f64; 3], h: f64, tol: Tolerances) -> Result<StepAttempt<3>> {
        let k1 = self.eval(t, x, Side::Right)?.as_array();
        let mut f = |tau: f64, xs: &[f64; 3]| {
            let side = if tau > t { Side::Left } else { Side::Right };
            self.eval(tau, xs, side).map(|d| d.as_array())
        };
        attempt_step(&mut f, t, x, &k1, h, tol)
    }
}

/// First time in the step where the height crosses `l0` in the direction
/// that ends the current phase.
fn locate_crossing(dense: &DenseStep<3>, l0: f64, in_contact: bool) -> f64 {
    let crossed = |y: f64| if in_contact { y > l0 } else { y <= l0 };
    let (mut lo, mut hi) = (dense.t0, dense.t1());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if crossed(dense.eval_component(0, mid)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

fn sample_time(k: usize, rate: f64) -> f64 {
    k as f64 / rate
}

/// Integrates `spec` over `[0, cfg.t_end]` and samples the trace at
/// `cfg.sample_rate`.
///
/// DCMot needs a stance reference in its parameters.
pub fn integrate(spec: &ModelSpec, cfg: &IntegratorConfig) -> Result<Simulation> {
    spec.validate()?;
    cfg.validate()?;

    let l0 = spec.common.rest_length;
    let tol = Tolerances {
        abs: cfg.abs_tol,
        rel: cfg.rel_tol,
    };
    let is_muscle = spec.kind().is_muscle();
    let reference = match &spec.params {
        ModelParams::DcMot(p) => Some(p.reference.as_ref().ok_or(Error::MissingReference)?),
        _ => None,
    };
    let delay = spec.reflex().map_or(0.0, |r| r.delta);
    let mut h_max = cfg.max_step;
    if is_muscle && delay > 0.0 {
        // stages must only ask for delayed values that are already recorded
        h_max = h_max.min(delay);
    }

    let mut x = spec.initial_state().to_array();
    let mut hopper = Hopper {
        spec,
        history: is_muscle.then(|| DelayHistory::new(delay, 0.0)),
        reference,
        contact: x[0] <= l0,
        touchdown: 0.0,
        evaluations: Cell::new(0),
    };
    if let Some(history) = hopper.history.as_mut() {
        // F_L(0); nothing earlier exists.
        let f0 = {
            let drive = Drive {
                contact: x[0] <= l0,
                ..Default::default()
            };
            system_derivative(spec, &ContinuousState::from_slice(&x), &drive)?.leg_force
        };
        history.push(0.0, f0);
    }

    let rate = cfg.sample_rate;
    let t_end = cfg.t_end;
    let n_samples = (t_end * rate + 1e-9).floor() as usize + 1;
    let mut trace = Trace::empty(spec.kind(), rate);
    let mut events = Vec::new();
    let mut stats = SolverStats::default();
    let mut breakpoints: VecDeque<f64> = VecDeque::new();

    record_sample(&mut trace, &hopper, 0.0, &x)?;
    let mut next_k = 1;

    let mut t = 0.0;
    let mut h = cfg.initial_step.min(h_max);
    while t < t_end {
        while breakpoints.front().is_some_and(|&bp| bp <= t + min_step(t)) {
            breakpoints.pop_front();
        }
        let limit = breakpoints.front().map_or(t_end, |&bp| bp.min(t_end));
        h = h.min(h_max);
        let hits_limit = t + h >= limit;
        let h_try = if hits_limit { limit - t } else { h };

        let attempt = hopper.attempt(t, &x, h_try, tol)?;
        if attempt.error > 1.0 {
            stats.rejected += 1;
            h = h_try * step_factor(attempt.error, false);
            if h < min_step(t) {
                return Err(Error::StepSizeUnderflow { t, h });
            }
            continue;
        }
        stats.accepted += 1;

        let g1 = attempt.x1[0] - l0;
        let crossed = if hopper.contact { g1 > 0.0 } else { g1 <= 0.0 };
        let (step, t_new, event) = if crossed {
            let t_star = locate_crossing(&attempt.dense, l0, hopper.contact);
            let kind = if hopper.contact {
                ContactEventKind::Liftoff
            } else {
                ContactEventKind::Touchdown
            };
            // Re-take the step so the state at the crossing has full accuracy.
            let step = hopper.attempt(t, &x, t_star - t, tol)?;
            (step, t_star, Some(kind))
        } else {
            let t_new = if hits_limit { limit } else { t + h_try };
            (attempt.clone(), t_new, None)
        };

        while next_k < n_samples && sample_time(next_k, rate) <= t_new {
            let ts = sample_time(next_k, rate);
            let xs = if ts == t_new {
                step.x1
            } else {
                step.dense.eval(ts)
            };
            record_sample(&mut trace, &hopper, ts, &xs)?;
            next_k += 1;
        }

        x = step.x1;
        if is_muscle {
            x[2] = x[2].clamp(0.0, 1.0);
        }
        t = t_new;

        if hopper.history.is_some() {
            let f_left = hopper.eval(t, &x, Side::Left)?.leg_force;
            if let Some(h) = hopper.history.as_mut() {
                h.push(t, f_left);
            }
        }

        if let Some(kind) = event {
            events.push(ContactEvent {
                t,
                kind,
                y_error: (x[0] - l0).abs(),
                yd: x[1],
            });
            x[0] = l0;
            hopper.contact = kind == ContactEventKind::Touchdown;
            match kind {
                ContactEventKind::Touchdown => {
                    hopper.touchdown = t;
                    if let Some(r) = reference {
                        breakpoints.extend((1..r.len()).map(|k| t + k as f64 * r.dt));
                    }
                }
                ContactEventKind::Liftoff => {
                    if reference.is_some() {
                        // motor idles in flight with zero current
                        x[2] = 0.0;
                        breakpoints.clear();
                    }
                }
            }
            if hopper.history.is_some() {
                let f_right = hopper.eval(t, &x, Side::Right)?.leg_force;
                let Some(history) = hopper.history.as_mut() else {
                    unreachable!()
                };
                history.push(t, f_right);
                if delay > 0.0 {
                    breakpoints.push_back(t + delay);
                }
            }
        }
        if let Some(history) = hopper.history.as_mut() {
            history.prune(t);
        }

        if event.is_none() && !hits_limit {
            h = h_try * step_factor(attempt.error, true);
        }
    }

    // The last step ends exactly at t_end, so every sample is recorded.
    debug_assert_eq!(trace.len(), n_samples);
    stats.evaluations = hopper.evaluations.get();
    Ok(Simulation {
        trace,
        events,
        stats,
    })
}

fn record_sample(trace: &mut Trace, hopper: &Hopper<'_>, t: f64, x: &[f64; 3]) -> Result<()> {
    let mut x = *x;
    if hopper.spec.kind().is_muscle() {
        x[2] = x[2].clamp(0.0, 1.0);
    }
    let drive = hopper.drive(t, Side::Right);
    let d = hopper.eval_with(t, &x, &drive)?;
    trace.t.push(t);
    trace.y.push(x[0]);
    trace.yd.push(x[1]);
    trace.ydd.push(d.dyd);
    match hopper.spec.kind().is_muscle() {
        true => trace.sensors[0].push(match hopper.spec.sensor {
            SensorTap::Delayed => drive.delayed_force,
            SensorTap::Instantaneous => d.leg_force,
        }),
        false => {
            trace.sensors[0].push(x[0]);
            trace.sensors[1].push(x[1]);
        }
    }
    trace.action.push(d.control);
    trace.contact.push(hopper.contact);
    Ok(())
}
