//! Morphological computation measures over a [`DiscreteTrace`]:
//!
//! * `MC_W = I(W';W|A)`, what the previous world state adds to predicting
//!   the next one beyond the action;
//! * `MC_MI = I(W';W) - I(A;S)`, behaviour complexity minus controller
//!   complexity;
//!
//! together with their per-sample versions whose time average is the
//! aggregate value.

use serde::{Deserialize, Serialize};

use crate::discretize::DiscreteTrace;
use crate::error::{Error, Result};
use crate::infotheory::SparseJoint;

// coordinates in the (w', w, a, s) joint
const WN: usize = 0;
const W: usize = 1;
const A: usize = 2;
const S: usize = 3;

fn full_joint(d: &DiscreteTrace) -> Result<SparseJoint> {
    if d.is_empty() {
        return Err(Error::Empty("discrete trace has no samples".into()));
    }
    SparseJoint::from_sequences(&[&d.w_next, &d.w, &d.a, &d.s])
}

pub fn mc_w(d: &DiscreteTrace) -> Result<f64> {
    full_joint(d)?.conditional_mutual_information(&[WN], &[W], &[A])
}

pub fn mc_mi(d: &DiscreteTrace) -> Result<f64> {
    let j = full_joint(d)?;
    Ok(
        j.entropy_of(&[WN])? - j.conditional_entropy(&[WN], &[W])? - j.entropy_of(&[A])?
            + j.conditional_entropy(&[A], &[S])?,
    )
}

/// Per-sample values of a measure, plus an optional smoothed copy for
/// plotting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateDependentSeries {
    pub values: Vec<f64>,
    pub smoothed: Option<Vec<f64>>,
}

impl StateDependentSeries {
    fn new(values: Vec<f64>) -> Self {
        Self {
            values,
            smoothed: None,
        }
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn smooth(mut self, block: usize) -> Result<Self> {
        self.smoothed = Some(moving_average(&self.values, block)?);
        Ok(self)
    }
}

/// Counts of the projections of every sample's tuple onto `coords`.
fn sample_counts(j: &SparseJoint, d: &DiscreteTrace, coords: &[usize]) -> Result<Vec<f64>> {
    let m = j.marginal(coords)?;
    let cols: [&[u64]; 4] = [&d.w_next, &d.w, &d.a, &d.s];
    let mut key = vec![0; coords.len()];
    Ok((0..d.len())
        .map(|t| {
            for (k, &c) in key.iter_mut().zip(coords) {
                *k = cols[c][t];
            }
            m.count(&key) as f64
        })
        .collect())
}

/// `log2 p(w'|w,a) / p(w'|a)` at every sample.
pub fn mc_w_state(d: &DiscreteTrace) -> Result<StateDependentSeries> {
    let j = full_joint(d)?;
    let c_wn_w_a = sample_counts(&j, d, &[WN, W, A])?;
    let c_w_a = sample_counts(&j, d, &[W, A])?;
    let c_wn_a = sample_counts(&j, d, &[WN, A])?;
    let c_a = sample_counts(&j, d, &[A])?;
    let values = (0..d.len())
        .map(|t| ((c_wn_w_a[t] * c_a[t]) / (c_w_a[t] * c_wn_a[t])).log2())
        .collect();
    Ok(StateDependentSeries::new(values))
}

/// `log2 p(w'|w) / p(w') - log2 p(a|s) / p(a)` at every sample: pointwise
/// I(W';W) minus pointwise I(A;S).
pub fn mc_mi_state(d: &DiscreteTrace) -> Result<StateDependentSeries> {
    let j = full_joint(d)?;
    let n = j.total() as f64;
    let c_wn_w = sample_counts(&j, d, &[WN, W])?;
    let c_wn = sample_counts(&j, d, &[WN])?;
    let c_w = sample_counts(&j, d, &[W])?;
    let c_a_s = sample_counts(&j, d, &[A, S])?;
    let c_a = sample_counts(&j, d, &[A])?;
    let c_s = sample_counts(&j, d, &[S])?;
    let values = (0..d.len())
        .map(|t| {
            (c_wn_w[t] * n / (c_wn[t] * c_w[t])).log2() - (c_a_s[t] * n / (c_a[t] * c_s[t])).log2()
        })
        .collect();
    Ok(StateDependentSeries::new(values))
}

/// Quantities that vanish when world, sensor and policy are deterministic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// I(W';A|W)
    pub i_wnext_a_given_w: f64,
    /// H(A|W')
    pub h_a_given_wnext: f64,
    /// MC_W - MC_MI - H(A|W')
    pub residual: f64,
}

pub fn deterministic_diagnostics(d: &DiscreteTrace) -> Result<Diagnostics> {
    Ok(measure(d)?.diagnostics())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureResult {
    pub samples: usize,
    pub mc_w: f64,
    pub mc_mi: f64,
    pub h_wnext: f64,
    pub h_wnext_given_w: f64,
    pub h_a: f64,
    pub h_a_given_s: f64,
    pub h_a_given_wnext: f64,
    pub i_wnext_a_given_w: f64,
}

impl MeasureResult {
    pub fn residual(&self) -> f64 {
        self.mc_w - self.mc_mi - self.h_a_given_wnext
    }

    pub fn diagnostics(&self) -> Diagnostics {
        Diagnostics {
            i_wnext_a_given_w: self.i_wnext_a_given_w,
            h_a_given_wnext: self.h_a_given_wnext,
            residual: self.residual(),
        }
    }
}

/// Both aggregate measures and their component terms from one joint.
pub fn measure(d: &DiscreteTrace) -> Result<MeasureResult> {
    let j = full_joint(d)?;
    let h_wnext = j.entropy_of(&[WN])?;
    let h_wnext_given_w = j.conditional_entropy(&[WN], &[W])?;
    let h_a = j.entropy_of(&[A])?;
    let h_a_given_s = j.conditional_entropy(&[A], &[S])?;
    Ok(MeasureResult {
        samples: d.len(),
        mc_w: j.conditional_mutual_information(&[WN], &[W], &[A])?,
        mc_mi: h_wnext - h_wnext_given_w - h_a + h_a_given_s,
        h_wnext,
        h_wnext_given_w,
        h_a,
        h_a_given_s,
        h_a_given_wnext: j.conditional_entropy(&[A], &[WN])?,
        i_wnext_a_given_w: j.conditional_mutual_information(&[WN], &[A], &[W])?,
    })
}

/// Centered moving average; near the ends the window shrinks to what is
/// available.
pub fn moving_average(x: &[f64], block: usize) -> Result<Vec<f64>> {
    if block == 0 || block.is_multiple_of(2) {
        return Err(Error::InvalidBlock(block));
    }
    let half = block / 2;
    Ok((0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(x.len());
            x[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect())
}

/// Average of a per-sample series over repeated phases, indexed by samples
/// since the phase began.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseProfile {
    pub mean: Vec<f64>,
    pub phases: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseProfiles {
    pub stance: PhaseProfile,
    pub flight: PhaseProfile,
}

/// Splits `values` into complete stance and flight phases (runs with the
/// other phase on both sides) that start at or after `from`, and averages
/// each kind sample by sample. Profiles are cut to the shortest phase.
pub fn phase_profiles(values: &[f64], contact: &[bool], from: usize) -> Result<PhaseProfiles> {
    let n = values.len().min(contact.len());
    let mut runs: [Vec<(usize, usize)>; 2] = [Vec::new(), Vec::new()];
    let mut i = 0;
    while i < n {
        let start = i;
        while i < n && contact[i] == contact[start] {
            i += 1;
        }
        if start > 0 && i < n && start >= from {
            runs[usize::from(contact[start])].push((start, i));
        }
    }
    let profile = |runs: &[(usize, usize)], what: &str| -> Result<PhaseProfile> {
        let len = runs
            .iter()
            .map(|(a, b)| b - a)
            .min()
            .ok_or_else(|| Error::Empty(format!("no complete {what} phase")))?;
        let mut mean = vec![0.0; len];
        for &(a, _) in runs {
            for (m, v) in mean.iter_mut().zip(&values[a..a + len]) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= runs.len() as f64);
        Ok(PhaseProfile {
            mean,
            phases: runs.len(),
        })
    };
    Ok(PhaseProfiles {
        flight: profile(&runs[0], "flight")?,
        stance: profile(&runs[1], "stance")?,
    })
}

/// Root-mean-square difference over the common prefix, skipping the first
/// `skip` entries.
pub fn rms_difference(a: &[f64], b: &[f64], skip: usize) -> Result<f64> {
    let n = a.len().min(b.len());
    if n <= skip {
        return Err(Error::Empty(
            "profiles shorter than the skipped prefix".into(),
        ));
    }
    let ss: f64 = a[skip..n]
        .iter()
        .zip(&b[skip..n])
        .map(|(x, y)| (x - y).powi(2))
        .sum();
    Ok((ss / (n - skip) as f64).sqrt())
}
