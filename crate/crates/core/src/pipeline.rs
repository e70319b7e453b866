//! End-to-end orchestration: simulate the requested models, bin them on
//! shared domains and evaluate the measures.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::discretize::{
    build_discrete_trace, compute_domains, BinningSpec, ChannelKind, DEFAULT_BINS,
};
use crate::error::{Error, Result};
use crate::integrator::{extract_stance_reference, integrate, IntegratorConfig, Simulation, Trace};
use crate::measures::{mc_mi_state, mc_w_state, measure, MeasureResult, StateDependentSeries};
use crate::models::{
    parse_entries, ConfigEntry, ModelKind, ModelParams, ModelSpec, StanceReference,
};

/// Seconds of each run treated as start-up transient by the hopping-height
/// and phase-profile summaries. The measures always use the whole trace.
pub const TRANSIENT: f64 = 2.0;

/// Everything a config file can set.
#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    pub integrator: IntegratorConfig,
    pub specs: BTreeMap<ModelKind, ModelSpec>,
    pub bins: usize,
    pub bin_overrides: BTreeMap<ChannelKind, usize>,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            integrator: IntegratorConfig::default(),
            specs: ModelKind::ALL
                .into_iter()
                .map(|k| (k, ModelSpec::default_for(k)))
                .collect(),
            bins: DEFAULT_BINS,
            bin_overrides: BTreeMap::new(),
        }
    }
}

impl Settings {
    pub fn spec(&self, kind: ModelKind) -> &ModelSpec {
        &self.specs[&kind]
    }

    /// Parses `key = value` overrides.
    ///
    /// * `<model>.<param>` (e.g. `musfib.f_max`) sets one model's parameter;
    /// * bare model parameters go to every model that has them;
    /// * `bins` and `bins.<channel>` set bin counts;
    /// * solver keys (`abs_tol`, `rel_tol`, `t_end`, `sample_rate`,
    ///   `max_step`, `initial_step`) go to the integrator.
    ///
    /// Unknown keys are errors.
    pub fn from_config(text: &str) -> Result<Self> {
        let mut settings = Settings::default();
        settings.apply(parse_entries(text)?)?;
        Ok(settings)
    }

    pub fn apply(&mut self, entries: Vec<ConfigEntry>) -> Result<()> {
        let mut shared = Vec::new();
        let mut scoped: BTreeMap<ModelKind, Vec<ConfigEntry>> = BTreeMap::new();
        for e in entries {
            if self.integrator.set_param(&e)? {
                continue;
            }
            if e.key == "bins" {
                self.bins = parse_bins(&e)?;
                continue;
            }
            if let Some(channel) = e.key.strip_prefix("bins.") {
                let kind: ChannelKind = channel.parse().map_err(|_| Error::Config {
                    line: e.line,
                    message: format!("unknown channel `{channel}`"),
                })?;
                self.bin_overrides.insert(kind, parse_bins(&e)?);
                continue;
            }
            match e.key.split_once('.') {
                Some((model, key)) => {
                    let kind: ModelKind = model.parse().map_err(|_| Error::Config {
                        line: e.line,
                        message: format!("unknown model `{model}` in `{}`", e.key),
                    })?;
                    let key = key.to_string();
                    scoped
                        .entry(kind)
                        .or_default()
                        .push(ConfigEntry { key, ..e });
                }
                None => shared.push(e),
            }
        }
        // a shared key is unknown only if no model consumed it
        let mut unused = shared.clone();
        for (kind, spec) in self.specs.iter_mut() {
            let own = scoped.remove(kind).unwrap_or_default();
            let mut entries = shared.clone();
            entries.extend(own.iter().cloned());
            let rest = spec.apply_overrides(entries)?;
            if let Some(e) = rest.iter().find(|e| own.contains(e)) {
                return Err(Error::Config {
                    line: e.line,
                    message: format!("`{}` is not a {} parameter", e.key, kind.label()),
                });
            }
            unused.retain(|e| rest.contains(e));
        }
        if let Some(e) = unused.first() {
            return Err(Error::Config {
                line: e.line,
                message: format!("unknown key `{}`", e.key),
            });
        }
        Ok(())
    }

    /// Domains from `runs`, with the configured bin counts.
    pub fn binning(&self, runs: &[(&Trace, &ModelSpec)]) -> Result<BinningSpec> {
        let mut spec = compute_domains(runs, self.bins)?;
        for (&kind, &bins) in &self.bin_overrides {
            if spec.channels.contains_key(&kind) {
                spec.set_bins(kind, bins)?;
            }
        }
        Ok(spec)
    }
}

fn parse_bins(e: &ConfigEntry) -> Result<usize> {
    match e.value.parse::<usize>() {
        Ok(b) if b >= 1 => Ok(b),
        _ => Err(Error::Config {
            line: e.line,
            message: format!("`{}` must be a positive integer, got `{}`", e.key, e.value),
        }),
    }
}

/// DCMot spec with the stance of `musfib` as its reference trajectory.
pub fn with_reference(spec: &ModelSpec, reference: StanceReference) -> Result<ModelSpec> {
    let mut out = spec.clone();
    match &mut out.params {
        ModelParams::DcMot(p) => p.reference = Some(reference),
        _ => {
            return Err(Error::param(
                "reference",
                format!("{} takes no reference", spec.kind()),
            ))
        }
    }
    Ok(out)
}

pub fn stance_reference(musfib: &Trace, spec: &ModelSpec) -> Result<StanceReference> {
    extract_stance_reference(musfib, &spec.common)
}

/// One simulated model together with the parameters that produced it.
#[derive(Clone, Debug)]
pub struct ModelRun {
    pub spec: ModelSpec,
    pub simulation: Simulation,
}

impl ModelRun {
    pub fn kind(&self) -> ModelKind {
        self.spec.kind()
    }

    pub fn trace(&self) -> &Trace {
        &self.simulation.trace
    }

    /// Highest apex after the start-up transient.
    pub fn hopping_height(&self) -> Option<f64> {
        self.trace().max_height_after(TRANSIENT)
    }
}

/// Simulates `models` in a fixed order. The muscle models run in parallel;
/// DCMot follows the last stance of a MusFib run, which is simulated even
/// when not requested.
pub fn run_models(settings: &Settings, models: &[ModelKind]) -> Result<Vec<ModelRun>> {
    let wanted = |k: ModelKind| models.contains(&k);
    let need_fib = wanted(ModelKind::MusFib) || wanted(ModelKind::DcMot);
    let run = |k: ModelKind| -> Result<ModelRun> {
        let spec = settings.spec(k).clone();
        let simulation = integrate(&spec, &settings.integrator)?;
        Ok(ModelRun { spec, simulation })
    };
    let (fib, lin) = std::thread::scope(|s| {
        let fib = s.spawn(|| need_fib.then(|| run(ModelKind::MusFib)).transpose());
        let lin = s.spawn(|| {
            wanted(ModelKind::MusLin)
                .then(|| run(ModelKind::MusLin))
                .transpose()
        });
        (
            fib.join().expect("MusFib worker panicked"),
            lin.join().expect("MusLin worker panicked"),
        )
    });
    let (fib, lin) = (fib?, lin?);
    let dc = match (&fib, wanted(ModelKind::DcMot)) {
        (Some(fib), true) => {
            let reference = stance_reference(fib.trace(), &fib.spec)?;
            let spec = with_reference(settings.spec(ModelKind::DcMot), reference)?;
            let simulation = integrate(&spec, &settings.integrator)?;
            Some(ModelRun { spec, simulation })
        }
        _ => None,
    };
    let mut out = Vec::new();
    for (kind, r) in [
        (ModelKind::MusFib, fib),
        (ModelKind::MusLin, lin),
        (ModelKind::DcMot, dc),
    ] {
        if let Some(r) = r.filter(|_| wanted(kind)) {
            out.push(r);
        }
    }
    Ok(out)
}

/// Aggregate and per-sample measures of one model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelMeasures {
    pub model: ModelKind,
    pub result: MeasureResult,
    pub mc_w_state: StateDependentSeries,
    pub mc_mi_state: StateDependentSeries,
}

/// Measures for each run, binned on `binning`. `smooth_block` adds a moving
/// average of the per-sample series.
pub fn measure_traces(
    runs: &[(&Trace, &ModelSpec)],
    binning: &BinningSpec,
    smooth_block: Option<usize>,
) -> Result<Vec<ModelMeasures>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = runs
            .iter()
            .map(|&(trace, spec)| {
                s.spawn(move || -> Result<ModelMeasures> {
                    let d = build_discrete_trace(trace, spec, binning)?;
                    let mut w = mc_w_state(&d)?;
                    let mut mi = mc_mi_state(&d)?;
                    if let Some(b) = smooth_block {
                        w = w.smooth(b)?;
                        mi = mi.smooth(b)?;
                    }
                    Ok(ModelMeasures {
                        model: trace.model,
                        result: measure(&d)?,
                        mc_w_state: w,
                        mc_mi_state: mi,
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("measure worker panicked"))
            .collect()
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub model: ModelKind,
    pub bins: usize,
    pub result: MeasureResult,
}

/// Aggregate measures for every bin count, on fixed domains.
pub fn sweep_bins(
    runs: &[(&Trace, &ModelSpec)],
    domains: &BinningSpec,
    bins: &[usize],
) -> Result<Vec<SweepRow>> {
    if bins.is_empty() {
        return Err(Error::Empty("no bin counts to sweep".into()));
    }
    let mut rows = Vec::new();
    for &(trace, spec) in runs {
        for &b in bins {
            let binning = domains.with_bins(b);
            binning.validate()?;
            let d = build_discrete_trace(trace, spec, &binning)?;
            rows.push(SweepRow {
                model: trace.model,
                bins: b,
                result: measure(&d)?,
            });
        }
    }
    Ok(rows)
}

pub const SWEEP_HEADER: &str = "model,bins,mc_w,mc_mi,h_a_given_wnext,i_wnext_a_given_w,residual";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for r in rows {
        let m = &r.result;
        let _ = writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6}",
            r.model.id(),
            r.bins,
            m.mc_w,
            m.mc_mi,
            m.h_a_given_wnext,
            m.i_wnext_a_given_w,
            m.residual()
        );
    }
    out
}

/// Fixed-width results table, one row per model.
pub fn format_table(measures: &[ModelMeasures], binning: &BinningSpec) -> String {
    let bins: Vec<String> = binning
        .channels
        .iter()
        .map(|(k, c)| format!("{k}={}", c.bins))
        .collect();
    let mut out = format!("# bins: {}\n", bins.join(" "));
    let _ = writeln!(
        out,
        "{:<8} {:>8} {:>8} {:>9} {:>10} {:>9}",
        "model", "MC_W", "MC_MI", "H(A|W')", "I(W';A|W)", "residual"
    );
    for m in measures {
        let r = &m.result;
        let _ = writeln!(
            out,
            "{:<8} {:>8.3} {:>8.3} {:>9.3} {:>10.3} {:>9.3}",
            m.model.label(),
            r.mc_w,
            r.mc_mi,
            r.h_a_given_wnext,
            r.i_wnext_a_given_w,
            r.residual()
        );
    }
    out
}

pub const STATE_HEADER: &str = "t,mc_w,mc_mi,mc_w_smooth,mc_mi_smooth,y,contact";

/// Per-sample series aligned with the first T-1 samples of `trace`. Without
/// smoothing the smoothed columns repeat the raw values.
pub fn state_csv(trace: &Trace, m: &ModelMeasures) -> String {
    let w = &m.mc_w_state;
    let mi = &m.mc_mi_state;
    let ws = w.smoothed.as_ref().unwrap_or(&w.values);
    let mis = mi.smoothed.as_ref().unwrap_or(&mi.values);
    let mut out = format!("{STATE_HEADER}\n");
    for k in 0..w.values.len() {
        let _ = writeln!(
            out,
            "{:.6},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            trace.t[k],
            w.values[k],
            mi.values[k],
            ws[k],
            mis[k],
            trace.y[k],
            u8::from(trace.contact[k])
        );
    }
    out
}
