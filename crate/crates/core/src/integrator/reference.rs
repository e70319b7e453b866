use std::io::{BufRead, Write};

use super::trace::Trace;
use crate::error::{Error, Result};
use crate::models::{HopperCommon, StanceReference};

/// Half-open sample ranges `[start, end)` of complete stance phases, i.e.
/// contact runs with a flight sample on both sides.
pub fn stance_runs(contact: &[bool]) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut i = 0;
    while i < contact.len() {
        if contact[i] {
            let start = i;
            while i < contact.len() && contact[i] {
                i += 1;
            }
            if start > 0 && i < contact.len() {
                runs.push((start, i));
            }
        } else {
            i += 1;
        }
    }
    runs
}

/// The last complete stance phase of `trace`, as (y_rec, yd_rec) on a
/// uniform grid starting at touch-down.
///
/// Touch-down and lift-off times fall between samples; both are recovered
/// exactly from the neighbouring flight samples, which follow the
/// ballistic parabola.
pub fn extract_stance_reference(trace: &Trace, body: &HopperCommon) -> Result<StanceReference> {
    let (start, end) = *stance_runs(&trace.contact)
        .last()
        .ok_or(Error::NoStancePhase)?;
    let g = body.gravity;
    let l0 = body.rest_length;

    // y_p + yd_p s - g s^2 / 2 = l0, forward from the last flight sample
    let (tp, yp, ydp) = (trace.t[start - 1], trace.y[start - 1], trace.yd[start - 1]);
    let s_td = (ydp + (ydp * ydp + 2.0 * g * (yp - l0)).max(0.0).sqrt()) / g;
    let t_td = tp + s_td;
    let yd_td = ydp - g * s_td;

    // and backward from the first flight sample after the stance
    let (tf, yf, ydf) = (trace.t[end], trace.y[end], trace.yd[end]);
    let s_lo = (-ydf + (ydf * ydf + 2.0 * g * (yf - l0)).max(0.0).sqrt()) / g;
    let t_lo = tf - s_lo;
    let yd_lo = ydf + g * s_lo;

    let mut knots: Vec<(f64, f64, f64)> = Vec::with_capacity(end - start + 2);
    knots.push((0.0, l0, yd_td));
    for k in start..end {
        knots.push((trace.t[k] - t_td, trace.y[k], trace.yd[k]));
    }
    knots.push((t_lo - t_td, l0, yd_lo));

    let dt = trace.dt();
    let duration = t_lo - t_td;
    let n = (duration / dt).floor() as usize + 1;
    let mut y = Vec::with_capacity(n);
    let mut yd = Vec::with_capacity(n);
    let mut j = 0;
    for i in 0..n {
        let tau = i as f64 * dt;
        while j + 2 < knots.len() && knots[j + 1].0 <= tau {
            j += 1;
        }
        let (ta, ya, yda) = knots[j];
        let (tb, yb, ydb) = knots[j + 1];
        let w = if tb > ta {
            ((tau - ta) / (tb - ta)).clamp(0.0, 1.0)
        } else {
            1.0
        };
        y.push(ya + w * (yb - ya));
        yd.push(yda + w * (ydb - yda));
    }
    StanceReference::new(dt, y, yd)
}

pub const REFERENCE_HEADER: &str = "tau,y,yd";

/// Writes `tau,y,yd` rows with 17 significant digits.
pub fn write_reference_csv<W: Write>(r: &StanceReference, mut w: W) -> Result<()> {
    writeln!(w, "{REFERENCE_HEADER}")?;
    for i in 0..r.len() {
        writeln!(
            w,
            "{:.16e},{:.16e},{:.16e}",
            i as f64 * r.dt,
            r.y[i],
            r.yd[i]
        )?;
    }
    Ok(())
}

pub fn read_reference_csv<R: BufRead>(reader: R) -> Result<StanceReference> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("missing header".into()))??;
    if header.trim() != REFERENCE_HEADER {
        return Err(Error::Format(format!(
            "reference header `{}` is not `{REFERENCE_HEADER}`",
            header.trim()
        )));
    }
    let (mut tau, mut y, mut yd) = (Vec::new(), Vec::new(), Vec::new());
    for (row, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Result<Vec<f64>> = line
            .trim()
            .split(',')
            .map(|f| {
                f.parse::<f64>().map_err(|_| {
                    Error::Format(format!("reference row {}: bad number `{f}`", row + 2))
                })
            })
            .collect();
        let [t, a, b] = fields?[..] else {
            return Err(Error::Format(format!(
                "reference row {}: expected 3 fields",
                row + 2
            )));
        };
        tau.push(t);
        y.push(a);
        yd.push(b);
    }
    if tau.len() < 2 {
        return Err(Error::Empty("reference needs at least two rows".into()));
    }
    StanceReference::new(tau[1] - tau[0], y, yd)
}
