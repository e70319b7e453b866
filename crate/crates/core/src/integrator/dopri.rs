//! Dormand-Prince 5(4) with its 4th-order continuous extension.

use crate::error::{Error, Result};

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// 5th minus embedded 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

// continuous extension
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// Mixed absolute/relative error weights.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub abs: f64,
    pub rel: f64,
}

/// Polynomial interpolant over one accepted step.
#[derive(Clone, Debug)]
pub struct DenseStep<const N: usize> {
    pub t0: f64,
    pub h: f64,
    rcont: [[f64; N]; 5],
}

impl<const N: usize> DenseStep<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn eval(&self, t: f64) -> [f64; N] {
        let theta = (t - self.t0) / self.h;
        let theta1 = 1.0 - theta;
        let r = &self.rcont;
        std::array::from_fn(|i| {
            r[0][i] + theta * (r[1][i] + theta1 * (r[2][i] + theta * (r[3][i] + theta1 * r[4][i])))
        })
    }

    pub fn eval_component(&self, i: usize, t: f64) -> f64 {
        let theta = (t - self.t0) / self.h;
        let theta1 = 1.0 - theta;
        let r = &self.rcont;
        r[0][i] + theta * (r[1][i] + theta1 * (r[2][i] + theta * (r[3][i] + theta1 * r[4][i])))
    }
}

/// Result of one trial step; the caller decides whether to accept it.
#[derive(Clone, Debug)]
pub struct StepAttempt<const N: usize> {
    pub x1: [f64; N],
    /// Scaled RMS error estimate; the step is acceptable when <= 1.
    pub error: f64,
    pub dense: DenseStep<N>,
}

fn combine<const N: usize>(x: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    std::array::from_fn(|i| x[i] + h * terms.iter().map(|(c, k)| c * k[i]).sum::<f64>())
}

/// One Dormand-Prince trial step from `(t, x)` with size `h`.
///
/// `f(t, x)` must be smooth on `(t, t + h]`. `k1` is the derivative at the
/// start of the step. Seven derivative evaluations are made, six new.
pub fn attempt_step<const N: usize, F>(
    f: &mut F,
    t: f64,
    x: &[f64; N],
    k1: &[f64; N],
    h: f64,
    tol: Tolerances,
) -> Result<StepAttempt<N>>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let k2 = f(t + C2 * h, &combine(x, h, &[(A21, k1)]))?;
    let k3 = f(t + C3 * h, &combine(x, h, &[(A31, k1), (A32, &k2)]))?;
    let k4 = f(
        t + C4 * h,
        &combine(x, h, &[(A41, k1), (A42, &k2), (A43, &k3)]),
    )?;
    let k5 = f(
        t + C5 * h,
        &combine(x, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
    )?;
    let k6 = f(
        t + h,
        &combine(
            x,
            h,
            &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
        ),
    )?;
    let x1 = combine(
        x,
        h,
        &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
    );
    let k7 = f(t + h, &x1)?;

    let mut sq = 0.0;
    for i in 0..N {
        let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let scale = tol.abs + tol.rel * x[i].abs().max(x1[i].abs());
        sq += (e / scale).powi(2);
    }
    let error = (sq / N as f64).sqrt();
    if !error.is_finite() || x1.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { t: t + h });
    }

    let mut rcont = [[0.0; N]; 5];
    for i in 0..N {
        let dx = x1[i] - x[i];
        let bspl = h * k1[i] - dx;
        rcont[0][i] = x[i];
        rcont[1][i] = dx;
        rcont[2][i] = bspl;
        rcont[3][i] = dx - h * k7[i] - bspl;
        rcont[4][i] =
            h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
    }

    Ok(StepAttempt {
        x1,
        error,
        dense: DenseStep { t0: t, h, rcont },
    })
}

/// Step-size factor after a trial step with the given scaled error.
pub fn step_factor(error: f64, accepted: bool) -> f64 {
    const SAFETY: f64 = 0.9;
    let raw = if error == 0.0 {
        5.0
    } else {
        SAFETY * error.powf(-0.2)
    };
    if accepted {
        raw.clamp(0.2, 5.0)
    } else {
        raw.clamp(0.1, 0.9)
    }
}

/// Smallest admissible step at time `t`.
pub fn min_step(t: f64) -> f64 {
    1e-14 * t.abs().max(1.0)
}

/// Counters for one integration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SolverStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// Adaptive integration of a smooth system from `t0` to `t1`, returning the
/// state at `t1` and, for every accepted step, its dense interpolant.
pub fn solve<const N: usize, F>(
    mut f: F,
    t0: f64,
    x0: [f64; N],
    t1: f64,
    tol: Tolerances,
    max_step: f64,
) -> Result<(Vec<DenseStep<N>>, SolverStats)>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let mut stats = SolverStats::default();
    let mut steps = Vec::new();
    let mut t = t0;
    let mut x = x0;
    let mut h = (1e-4f64).min(max_step).min(t1 - t0);
    while t < t1 {
        let clipped = t + h >= t1;
        let h_try = if clipped { t1 - t } else { h };
        let k1 = f(t, &x)?;
        let attempt = attempt_step(&mut f, t, &x, &k1, h_try, tol)?;
        stats.evaluations += 7;
        if attempt.error <= 1.0 {
            stats.accepted += 1;
            t = if clipped { t1 } else { t + h_try };
            x = attempt.x1;
            steps.push(attempt.dense);
            h = (h_try * step_factor(attempt.error, true)).min(max_step);
        } else {
            stats.rejected += 1;
            h = h_try * step_factor(attempt.error, false);
            if h < min_step(t) {
                return Err(Error::StepSizeUnderflow { t, h });
            }
        }
    }
    Ok((steps, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tight() -> Tolerances {
        Tolerances {
            abs: 1e-12,
            rel: 1e-12,
        }
    }

    #[test]
    fn exponential_decay_to_one() {
        let (steps, _) =
            solve(|_, x: &[f64; 1]| Ok([-x[0]]), 0.0, [1.0], 1.0, tight(), 0.1).unwrap();
        let end = steps.last().unwrap();
        let x1 = end.eval(end.t1());
        assert!((x1[0] - (-1.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn single_step_is_fifth_order() {
        // Local error of one step on x' = x scales like h^6.
        let step_err = |h: f64| {
            let mut f = |_: f64, x: &[f64; 1]| Ok([x[0]]);
            let k1 = [1.0];
            let a = attempt_step(&mut f, 0.0, &[1.0], &k1, h, tight()).unwrap();
            (a.x1[0] - h.exp()).abs()
        };
        let ratio = step_err(0.2) / step_err(0.1);
        assert!(
            (ratio.log2() - 6.0).abs() < 0.3,
            "observed order {}",
            ratio.log2()
        );
    }

    #[test]
    fn global_error_shrinks_with_tolerance() {
        // Harmonic oscillator over one period.
        let run = |tol: f64| {
            let tol = Tolerances { abs: tol, rel: tol };
            let (steps, stats) = solve(
                |_, x: &[f64; 2]| Ok([x[1], -x[0]]),
                0.0,
                [1.0, 0.0],
                std::f64::consts::TAU,
                tol,
                1.0,
            )
            .unwrap();
            let end = steps.last().unwrap().eval(std::f64::consts::TAU);
            (
                ((end[0] - 1.0).powi(2) + end[1].powi(2)).sqrt(),
                stats.accepted,
            )
        };
        let (e6, n6) = run(1e-6);
        let (e9, n9) = run(1e-9);
        assert!(e9 < e6 / 100.0, "{e6} {e9}");
        // Fifth-order: 1000x tighter tolerance costs about 1000^(1/5) ~ 4x steps.
        let growth = n9 as f64 / n6 as f64;
        assert!((2.5..6.5).contains(&growth), "step growth {growth}");
    }

    #[test]
    fn dense_output_matches_endpoints_and_interior() {
        let mut f = |_: f64, x: &[f64; 1]| Ok([x[0].cos()]);
        let x0 = [0.3];
        let k1 = f(0.0, &x0).unwrap();
        let a = attempt_step(&mut f, 0.0, &x0, &k1, 0.05, tight()).unwrap();
        assert_eq!(a.dense.eval(0.0)[0], 0.3);
        assert!((a.dense.eval(0.05)[0] - a.x1[0]).abs() < 1e-15);
        // interior against a very fine reference solution
        let (steps, _) = solve(
            |_, x: &[f64; 1]| Ok([x[0].cos()]),
            0.0,
            x0,
            0.025,
            tight(),
            1e-3,
        )
        .unwrap();
        let reference = steps.last().unwrap().eval(0.025)[0];
        assert!((a.dense.eval_component(0, 0.025) - reference).abs() < 1e-9);
    }

    #[test]
    fn quadratic_motion_is_exact() {
        let mut f = |_: f64, x: &[f64; 2]| Ok([x[1], -9.81]);
        let x0 = [1.07, 0.0];
        let k1 = f(0.0, &x0).unwrap();
        let a = attempt_step(&mut f, 0.0, &x0, &k1, 0.05, tight()).unwrap();
        assert!((a.x1[0] - (1.07 - 4.905 * 0.0025)).abs() < 1e-15);
        assert!(a.error < 1.0);
        let mid = a.dense.eval(0.02);
        assert!((mid[0] - (1.07 - 4.905 * 0.0004)).abs() < 1e-15);
    }

    #[test]
    fn non_finite_derivative_is_reported() {
        let res = solve(
            |t, _x: &[f64; 1]| Ok([1.0 / (0.5 - t)]),
            0.0,
            [0.0],
            1.0,
            tight(),
            0.1,
        );
        assert!(matches!(
            res,
            Err(Error::NonFinite { .. }) | Err(Error::StepSizeUnderflow { .. })
        ));
    }
}
