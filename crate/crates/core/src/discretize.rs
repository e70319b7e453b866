//! Uniform binning over domains shared by every analysed run, and the
//! aligned (w', w, s, a) symbol sequences the measures consume.

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::Trace;
use crate::models::{ModelParams, ModelSpec};

pub type Symbol = u64;

pub const DEFAULT_BINS: usize = 300;

/// Physical quantity a recorded channel measures. Channels of the same kind
/// share one domain, so DCMot's (y, yd) sensor reuses the world bins.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    Position,
    Velocity,
    Acceleration,
    LegForce,
    Action,
}

impl ChannelKind {
    pub const ALL: [ChannelKind; 5] = [
        ChannelKind::Position,
        ChannelKind::Velocity,
        ChannelKind::Acceleration,
        ChannelKind::LegForce,
        ChannelKind::Action,
    ];

    pub fn id(self) -> &'static str {
        match self {
            ChannelKind::Position => "position",
            ChannelKind::Velocity => "velocity",
            ChannelKind::Acceleration => "acceleration",
            ChannelKind::LegForce => "leg_force",
            ChannelKind::Action => "action",
        }
    }
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ChannelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ChannelKind::ALL
            .into_iter()
            .find(|c| c.id() == s)
            .ok_or_else(|| Error::MissingChannel {
                channel: s.to_string(),
            })
    }
}

/// Domain and bin count of one channel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelBinning {
    pub min: f64,
    pub max: f64,
    pub bins: usize,
}

impl ChannelBinning {
    fn validate(&self, channel: ChannelKind) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite()) {
            return Err(Error::param(channel.id(), "domain bounds must be finite"));
        }
        if self.min >= self.max {
            return Err(Error::ZeroRange {
                channel: channel.id().into(),
                value: self.min,
            });
        }
        if self.bins == 0 {
            return Err(Error::param(channel.id(), "bin count must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BinningSpec {
    pub channels: BTreeMap<ChannelKind, ChannelBinning>,
}

impl BinningSpec {
    pub fn get(&self, channel: ChannelKind) -> Result<&ChannelBinning> {
        self.channels
            .get(&channel)
            .ok_or_else(|| Error::MissingChannel {
                channel: channel.id().into(),
            })
    }

    /// Same domains, `bins` everywhere.
    pub fn with_bins(&self, bins: usize) -> Self {
        let mut out = self.clone();
        for c in out.channels.values_mut() {
            c.bins = bins;
        }
        out
    }

    pub fn set_bins(&mut self, channel: ChannelKind, bins: usize) -> Result<()> {
        let c = self
            .channels
            .get_mut(&channel)
            .ok_or_else(|| Error::MissingChannel {
                channel: channel.id().into(),
            })?;
        c.bins = bins;
        c.validate(channel)
    }

    pub fn validate(&self) -> Result<()> {
        self.channels.iter().try_for_each(|(k, c)| c.validate(*k))
    }

    /// One `channel min max bins` line per channel, bounds with 17
    /// significant digits so a reload reproduces them exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# channel min max bins\n");
        for (k, c) in &self.channels {
            out.push_str(&format!("{} {:.16e} {:.16e} {}\n", k, c.min, c.max, c.bins));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut spec = BinningSpec::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let bad = |message: String| Error::Config { line, message };
            let fields: Vec<&str> = content.split_whitespace().collect();
            let [name, min, max, bins] = fields[..] else {
                return Err(bad(format!(
                    "expected `channel min max bins`, got `{content}`"
                )));
            };
            let kind: ChannelKind = name
                .parse()
                .map_err(|_| bad(format!("unknown channel `{name}`")))?;
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| bad(format!("bad number `{s}`")))
            };
            let binning = ChannelBinning {
                min: num(min)?,
                max: num(max)?,
                bins: bins
                    .parse()
                    .map_err(|_| bad(format!("bad bin count `{bins}`")))?,
            };
            binning.validate(kind)?;
            if spec.channels.insert(kind, binning).is_some() {
                return Err(bad(format!("channel `{kind}` listed twice")));
            }
        }
        if spec.channels.is_empty() {
            return Err(Error::Empty("binning spec lists no channels".into()));
        }
        Ok(spec)
    }
}

/// Maps raw actions into [0, 1]: the motor voltage is rescaled from its
/// clamp range, muscle stimulation passes through.
pub fn normalize_action(action: &[f64], model: &ModelSpec) -> Vec<f64> {
    match &model.params {
        ModelParams::DcMot(p) => action.iter().map(|&u| p.normalize_voltage(u)).collect(),
        _ => action.to_vec(),
    }
}

fn sensor_kinds(trace: &Trace) -> Vec<ChannelKind> {
    if trace.model.is_muscle() {
        vec![ChannelKind::LegForce]
    } else {
        vec![ChannelKind::Position, ChannelKind::Velocity]
    }
}

/// Every (kind, series) pair a run contributes, action already normalized.
fn channel_series<'a>(
    trace: &'a Trace,
    model: &ModelSpec,
) -> Result<Vec<(ChannelKind, Cow<'a, [f64]>)>> {
    if trace.model != model.kind() {
        return Err(Error::param(
            "model",
            format!(
                "trace of {} paired with {} parameters",
                trace.model,
                model.kind()
            ),
        ));
    }
    trace.validate()?;
    let mut out = vec![
        (ChannelKind::Position, Cow::Borrowed(trace.y.as_slice())),
        (ChannelKind::Velocity, Cow::Borrowed(trace.yd.as_slice())),
        (
            ChannelKind::Acceleration,
            Cow::Borrowed(trace.ydd.as_slice()),
        ),
    ];
    for (kind, s) in sensor_kinds(trace).into_iter().zip(&trace.sensors) {
        out.push((kind, Cow::Borrowed(s.as_slice())));
    }
    out.push((
        ChannelKind::Action,
        Cow::Owned(normalize_action(&trace.action, model)),
    ));
    Ok(out)
}

/// Per-kind min and max over all runs, each channel with `bins` bins.
pub fn compute_domains(runs: &[(&Trace, &ModelSpec)], bins: usize) -> Result<BinningSpec> {
    if runs.is_empty() {
        return Err(Error::Empty("no traces to compute domains from".into()));
    }
    let mut ranges: BTreeMap<ChannelKind, (f64, f64)> = BTreeMap::new();
    for (trace, model) in runs {
        if trace.is_empty() {
            return Err(Error::Empty(format!(
                "{} trace has no samples",
                trace.model
            )));
        }
        for (kind, series) in channel_series(trace, model)? {
            let r = ranges
                .entry(kind)
                .or_insert((f64::INFINITY, f64::NEG_INFINITY));
            for &v in series.iter() {
                if !v.is_finite() {
                    return Err(Error::OutOfDomain {
                        channel: kind.id().into(),
                        value: v,
                        min: r.0,
                        max: r.1,
                    });
                }
                r.0 = r.0.min(v);
                r.1 = r.1.max(v);
            }
        }
    }
    let mut spec = BinningSpec::default();
    for (kind, (min, max)) in ranges {
        let c = ChannelBinning { min, max, bins };
        c.validate(kind)?;
        spec.channels.insert(kind, c);
    }
    Ok(spec)
}

/// Uniform bin index of each value: floor((x - min) / (max - min) * B), with
/// x = max mapped into the top bin.
pub fn discretize_channel(
    x: &[f64],
    channel: ChannelKind,
    c: &ChannelBinning,
) -> Result<Vec<Symbol>> {
    c.validate(channel)?;
    let span = c.max - c.min;
    let top = (c.bins - 1) as f64;
    x.iter()
        .map(|&v| {
            if !(v >= c.min && v <= c.max) {
                return Err(Error::OutOfDomain {
                    channel: channel.id().into(),
                    value: v,
                    min: c.min,
                    max: c.max,
                });
            }
            Ok(((v - c.min) / span * c.bins as f64).floor().min(top) as Symbol)
        })
        .collect()
}

/// Mixed-radix index `s1 + B1 s2 + B1 B2 s3 + ...`.
pub fn combine_symbols(symbols: &[Symbol], bases: &[u64]) -> Result<Symbol> {
    if symbols.len() != bases.len() {
        return Err(Error::LengthMismatch {
            expected: bases.len(),
            found: symbols.len(),
        });
    }
    let overflow = || Error::param("bases", "composite alphabet exceeds 64 bits");
    let mut out: u64 = 0;
    let mut radix: u64 = 1;
    for (&s, &b) in symbols.iter().zip(bases) {
        if s >= b {
            return Err(Error::SymbolOutOfRange { symbol: s, base: b });
        }
        out = s
            .checked_mul(radix)
            .and_then(|v| v.checked_add(out))
            .ok_or_else(overflow)?;
        radix = radix.checked_mul(b).ok_or_else(overflow)?;
    }
    Ok(out)
}

/// Inverse of [`combine_symbols`].
pub fn decompose(mut symbol: Symbol, bases: &[u64]) -> Result<Vec<Symbol>> {
    let total = bases.iter().try_fold(1u64, |acc, &b| acc.checked_mul(b));
    if let Some(total) = total {
        if symbol >= total {
            return Err(Error::SymbolOutOfRange {
                symbol,
                base: total,
            });
        }
    }
    let mut out = Vec::with_capacity(bases.len());
    for &b in bases {
        if b == 0 {
            return Err(Error::SymbolOutOfRange { symbol, base: 0 });
        }
        out.push(symbol % b);
        symbol /= b;
    }
    Ok(out)
}

/// Symbol sequences aligned so that index t pairs the world at t + 1 with
/// world, sensor and action at t.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiscreteTrace {
    pub w_next: Vec<Symbol>,
    pub w: Vec<Symbol>,
    pub s: Vec<Symbol>,
    pub a: Vec<Symbol>,
    /// Bin counts of y, yd, ydd, each sensor channel, then the action.
    pub bases: Vec<u64>,
}

impl DiscreteTrace {
    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn world_bases(&self) -> &[u64] {
        &self.bases[..3]
    }
}

fn composite(columns: &[Vec<Symbol>], bases: &[u64], n: usize) -> Result<Vec<Symbol>> {
    let mut buf = vec![0; columns.len()];
    (0..n)
        .map(|t| {
            for (b, col) in buf.iter_mut().zip(columns) {
                *b = col[t];
            }
            combine_symbols(&buf, bases)
        })
        .collect()
}

pub fn build_discrete_trace(
    trace: &Trace,
    model: &ModelSpec,
    spec: &BinningSpec,
) -> Result<DiscreteTrace> {
    let n = trace.len();
    if n < 2 {
        return Err(Error::Empty("trace needs at least two samples".into()));
    }
    let mut world = Vec::new();
    let mut sensor = Vec::new();
    let mut action = Vec::new();
    let (mut wb, mut sb, mut ab) = (Vec::new(), Vec::new(), 0);
    let channels = channel_series(trace, model)?;
    let last = channels.len() - 1;
    for (i, (kind, series)) in channels.into_iter().enumerate() {
        let c = spec.get(kind)?;
        let symbols = discretize_channel(&series, kind, c)?;
        let base = c.bins as u64;
        match i {
            0..=2 => {
                world.push(symbols);
                wb.push(base);
            }
            _ if i == last => {
                action = symbols;
                ab = base;
            }
            _ => {
                sensor.push(symbols);
                sb.push(base);
            }
        }
    }
    let w_all = composite(&world, &wb, n)?;
    let s_all = composite(&sensor, &sb, n)?;
    let mut bases = wb;
    bases.extend(sb);
    bases.push(ab);
    Ok(DiscreteTrace {
        w_next: w_all[1..].to_vec(),
        w: w_all[..n - 1].to_vec(),
        s: s_all[..n - 1].to_vec(),
        a: action[..n - 1].to_vec(),
        bases,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelKind;
    use proptest::prelude::*;

    fn binning(min: f64, max: f64, bins: usize) -> ChannelBinning {
        ChannelBinning { min, max, bins }
    }

    fn toy(model: ModelKind, ys: &[f64]) -> Trace {
        let mut tr = Trace::empty(model, 1000.0);
        for (k, &y) in ys.iter().enumerate() {
            tr.t.push(k as f64 / 1000.0);
            tr.y.push(y);
            tr.yd.push(-(k as f64));
            tr.ydd.push(k as f64 * 2.0);
            if model.is_muscle() {
                tr.sensors[0].push(100.0 * k as f64);
                tr.action.push(0.25 * k as f64);
            } else {
                tr.sensors[0].push(y);
                tr.sensors[1].push(-(k as f64));
                tr.action.push(-48.0 + 10.0 * k as f64);
            }
            tr.contact.push(false);
        }
        tr
    }

    #[test]
    fn discretize_examples() {
        let c = binning(2.0, 4.0, 300);
        let s = discretize_channel(&[2.0, 4.0, 3.0], ChannelKind::Position, &c).unwrap();
        assert_eq!(s, vec![0, 299, 150]);
        let err = discretize_channel(&[4.5], ChannelKind::Position, &c).unwrap_err();
        assert!(matches!(err, Error::OutOfDomain { .. }));
        assert!(discretize_channel(&[f64::NAN], ChannelKind::Position, &c).is_err());
    }

    #[test]
    fn single_bin_maps_everything_to_zero() {
        let s = discretize_channel(&[0.0, 0.5, 1.0], ChannelKind::Action, &binning(0.0, 1.0, 1))
            .unwrap();
        assert_eq!(s, vec![0, 0, 0]);
    }

    #[test]
    fn combine_examples() {
        assert_eq!(
            combine_symbols(&[5, 2, 1], &[300, 300, 300]).unwrap(),
            90605
        );
        assert_eq!(combine_symbols(&[0, 0, 0], &[300, 300, 300]).unwrap(), 0);
        assert!(matches!(
            combine_symbols(&[300, 0, 0], &[300, 300, 300]),
            Err(Error::SymbolOutOfRange { .. })
        ));
        assert_eq!(decompose(90605, &[300, 300, 300]).unwrap(), vec![5, 2, 1]);
        assert!(decompose(27_000_000, &[300, 300, 300]).is_err());
    }

    #[test]
    fn action_normalization() {
        let dc = ModelSpec::dcmot();
        assert_eq!(
            normalize_action(&[-48.0, 48.0, 0.0], &dc),
            vec![0.0, 1.0, 0.5]
        );
        assert_eq!(
            normalize_action(&[0.027], &ModelSpec::musfib()),
            vec![0.027]
        );
    }

    #[test]
    fn domains_are_unions() {
        let a = toy(ModelKind::MusFib, &[0.9, 1.0, 1.05]);
        let b = toy(ModelKind::MusLin, &[0.95, 1.07]);
        let (fa, fb) = (ModelSpec::musfib(), ModelSpec::muslin());
        let spec = compute_domains(&[(&a, &fa), (&b, &fb)], 300).unwrap();
        let y = spec.get(ChannelKind::Position).unwrap();
        assert_eq!((y.min, y.max), (0.9, 1.07));
        let single = compute_domains(&[(&b, &fb)], 300).unwrap();
        assert_eq!(single.get(ChannelKind::Position).unwrap().min, 0.95);
    }

    #[test]
    fn constant_channel_is_an_error() {
        let a = toy(ModelKind::MusFib, &[1.0, 1.0, 1.0]);
        let err = compute_domains(&[(&a, &ModelSpec::musfib())], 300).unwrap_err();
        assert!(matches!(err, Error::ZeroRange { ref channel, .. } if channel == "position"));
    }

    #[test]
    fn mismatched_model_is_rejected() {
        let a = toy(ModelKind::MusFib, &[1.0, 1.1]);
        assert!(compute_domains(&[(&a, &ModelSpec::muslin())], 300).is_err());
    }

    #[test]
    fn shifted_sequences() {
        let tr = toy(ModelKind::MusFib, &[1.0, 1.5, 2.0]);
        let model = ModelSpec::musfib();
        let spec = compute_domains(&[(&tr, &model)], 300).unwrap();
        let d = build_discrete_trace(&tr, &model, &spec).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.w_next[0], d.w[1]);
        assert_eq!(d.bases, vec![300, 300, 300, 300, 300]);
        // y at bin 0 then 150, yd at 299 then 150, ydd at 0 then 150
        assert_eq!(d.w[0], combine_symbols(&[0, 299, 0], &[300; 3]).unwrap());
        assert_eq!(
            d.w[1],
            combine_symbols(&[150, 150, 150], &[300; 3]).unwrap()
        );
        assert_eq!(d.s, vec![0, 150]);
        assert_eq!(d.a, vec![0, 150]);
    }

    #[test]
    fn motor_sensor_combines_position_and_velocity() {
        let tr = toy(ModelKind::DcMot, &[0.9, 1.0, 1.1]);
        let model = ModelSpec::dcmot();
        let spec = compute_domains(&[(&tr, &model)], 300).unwrap();
        assert!(!spec.channels.contains_key(&ChannelKind::LegForce));
        let d = build_discrete_trace(&tr, &model, &spec).unwrap();
        assert_eq!(d.bases, vec![300, 300, 300, 300, 300, 300]);
        assert_eq!(d.s[0], combine_symbols(&[0, 299], &[300, 300]).unwrap());
        // voltages -48 and -38 normalized then binned over [0, 0.2083]
        assert_eq!(d.a[0], 0);
    }

    #[test]
    fn spec_text_round_trip() {
        let a = toy(ModelKind::DcMot, &[0.9, 1.0, 1.0 + 1e-3 / 3.0]);
        let spec = compute_domains(&[(&a, &ModelSpec::dcmot())], 123).unwrap();
        let back = BinningSpec::from_text(&spec.to_text()).unwrap();
        assert_eq!(back, spec);
        assert!(BinningSpec::from_text("position 1 1 300").is_err());
        assert!(BinningSpec::from_text("position 0 1").is_err());
        assert!(BinningSpec::from_text("bogus 0 1 3").is_err());
        assert!(BinningSpec::from_text("# nothing").is_err());
    }

    #[test]
    fn per_channel_override() {
        let a = toy(ModelKind::MusFib, &[0.9, 1.0, 1.1]);
        let mut spec = compute_domains(&[(&a, &ModelSpec::musfib())], 300).unwrap();
        spec.set_bins(ChannelKind::Action, 50).unwrap();
        assert_eq!(spec.get(ChannelKind::Action).unwrap().bins, 50);
        assert_eq!(spec.get(ChannelKind::Position).unwrap().bins, 300);
        assert!(spec.set_bins(ChannelKind::Position, 0).is_err());
    }

    proptest! {
        #[test]
        fn discretize_is_monotone(mut xs in proptest::collection::vec(-5.0f64..5.0, 1..50), bins in 1usize..500) {
            xs.sort_by(f64::total_cmp);
            let c = binning(-5.0, 5.0, bins);
            let s = discretize_channel(&xs, ChannelKind::Velocity, &c).unwrap();
            prop_assert!(s.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(s.iter().all(|&v| v < bins as u64));
        }

        #[test]
        fn mixed_radix_round_trip(
            bases in proptest::collection::vec(1u64..400, 1..5),
            seed in proptest::collection::vec(any::<u64>(), 5),
        ) {
            let symbols: Vec<u64> = bases.iter().zip(&seed).map(|(b, s)| s % b).collect();
            let c = combine_symbols(&symbols, &bases).unwrap();
            prop_assert_eq!(decompose(c, &bases).unwrap(), symbols);
        }

        #[test]
        fn discretization_is_deterministic(ys in proptest::collection::vec(0.8f64..1.2, 3..30)) {
            prop_assume!(ys.iter().any(|y| *y != ys[0]));
            let tr = toy(ModelKind::MusLin, &ys);
            let m = ModelSpec::muslin();
            let spec = compute_domains(&[(&tr, &m)], 300).unwrap();
            let d1 = build_discrete_trace(&tr, &m, &spec).unwrap();
            let d2 = build_discrete_trace(&tr, &m, &spec).unwrap();
            prop_assert_eq!(d1, d2);
        }
    }
}
