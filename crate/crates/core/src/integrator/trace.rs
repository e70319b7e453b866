use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::models::ModelKind;

/// Uniformly sampled record of one simulation run.
///
/// World state is (y, yd, ydd). Muscle models carry one sensor channel (leg
/// force), DCMot two (y, yd). `action` is the raw controller output:
/// stimulation for the muscles, armature voltage for the motor.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub model: ModelKind,
    pub sample_rate: f64,
    pub t: Vec<f64>,
    pub y: Vec<f64>,
    pub yd: Vec<f64>,
    pub ydd: Vec<f64>,
    pub sensors: Vec<Vec<f64>>,
    pub action: Vec<f64>,
    pub contact: Vec<bool>,
}

/// Number of sensor channels a model records.
pub fn sensor_channels(model: ModelKind) -> usize {
    if model.is_muscle() {
        1
    } else {
        2
    }
}

impl Trace {
    pub fn empty(model: ModelKind, sample_rate: f64) -> Self {
        Self {
            model,
            sample_rate,
            t: Vec::new(),
            y: Vec::new(),
            yd: Vec::new(),
            ydd: Vec::new(),
            sensors: vec![Vec::new(); sensor_channels(model)],
            action: Vec::new(),
            contact: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    /// Checks equal channel lengths and the uniform time grid.
    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        let lens = [
            self.y.len(),
            self.yd.len(),
            self.ydd.len(),
            self.action.len(),
            self.contact.len(),
        ];
        for found in lens.into_iter().chain(self.sensors.iter().map(Vec::len)) {
            if found != n {
                return Err(Error::LengthMismatch { expected: n, found });
            }
        }
        if self.sensors.len() != sensor_channels(self.model) {
            return Err(Error::Format(format!(
                "{} expects {} sensor channel(s), found {}",
                self.model,
                sensor_channels(self.model),
                self.sensors.len()
            )));
        }
        let dt = self.dt();
        for (k, &t) in self.t.iter().enumerate() {
            let expected = self.t[0] + k as f64 * dt;
            if (t - expected).abs() > 1e-9 * dt.max(expected.abs()) + 1e-12 {
                return Err(Error::Format(format!(
                    "non-uniform sample time {t} at row {k}"
                )));
            }
        }
        Ok(())
    }

    /// Largest height reached at or after `from` seconds.
    pub fn max_height_after(&self, from: f64) -> Option<f64> {
        self.t
            .iter()
            .zip(&self.y)
            .filter(|(t, _)| **t >= from)
            .map(|(_, y)| *y)
            .reduce(f64::max)
    }

    pub fn csv_header(&self) -> String {
        let sensors: Vec<String> = (1..=self.sensors.len()).map(|i| format!("s{i}")).collect();
        format!("t,y,yd,ydd,{},a,contact", sensors.join(","))
    }

    /// Writes the trace as CSV with 17 significant digits per value.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", self.csv_header())?;
        for k in 0..self.len() {
            write!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                self.t[k], self.y[k], self.yd[k], self.ydd[k]
            )?;
            for s in &self.sensors {
                write!(w, ",{:.16e}", s[k])?;
            }
            writeln!(w, ",{:.16e},{}", self.action[k], u8::from(self.contact[k]))?;
        }
        Ok(())
    }

    /// Reads a CSV written by [`Trace::write_csv`]. The sensor column count
    /// must match the model.
    pub fn read_csv<R: BufRead>(reader: R, model: ModelKind) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("missing header".into()))??;
        let columns: Vec<&str> = header.trim().split(',').collect();
        let n_sensors = sensor_channels(model);
        let mut expected = vec!["t", "y", "yd", "ydd"];
        let sensor_names: Vec<String> = (1..=n_sensors).map(|i| format!("s{i}")).collect();
        expected.extend(sensor_names.iter().map(String::as_str));
        expected.extend(["a", "contact"]);
        if columns != expected {
            return Err(Error::Format(format!(
                "header `{}` does not match `{}` for {model}",
                header.trim(),
                expected.join(",")
            )));
        }

        let mut trace = Trace::empty(model, 0.0);
        for (row, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != expected.len() {
                return Err(Error::Format(format!(
                    "row {}: expected {} fields, found {}",
                    row + 2,
                    expected.len(),
                    fields.len()
                )));
            }
            let num = |i: usize| -> Result<f64> {
                fields[i].parse::<f64>().map_err(|_| {
                    Error::Format(format!("row {}: bad number `{}`", row + 2, fields[i]))
                })
            };
            trace.t.push(num(0)?);
            trace.y.push(num(1)?);
            trace.yd.push(num(2)?);
            trace.ydd.push(num(3)?);
            for s in 0..n_sensors {
                trace.sensors[s].push(num(4 + s)?);
            }
            trace.action.push(num(4 + n_sensors)?);
            trace.contact.push(match fields[5 + n_sensors] {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::Format(format!(
                        "row {}: bad contact flag `{other}`",
                        row + 2
                    )))
                }
            });
        }
        if trace.len() < 2 {
            return Err(Error::Empty("trace needs at least two rows".into()));
        }
        trace.sample_rate = 1.0 / (trace.t[1] - trace.t[0]);
        // Snap to the nearest integer rate; the grid itself was written from k / rate.
        let rounded = trace.sample_rate.round();
        if (trace.sample_rate - rounded).abs() < 1e-6 * rounded {
            trace.sample_rate = rounded;
        }
        trace.validate()?;
        Ok(trace)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(model: ModelKind) -> Trace {
        let mut tr = Trace::empty(model, 1000.0);
        for k in 0..4 {
            let t = k as f64 / 1000.0;
            tr.t.push(t);
            tr.y.push(1.0 + 0.1 * t);
            tr.yd.push(0.1 / 3.0);
            tr.ydd.push(-9.81);
            for s in tr.sensors.iter_mut() {
                s.push(k as f64 * 0.3);
            }
            tr.action.push(0.027);
            tr.contact.push(k % 2 == 1);
        }
        tr
    }

    #[test]
    fn csv_round_trip_is_exact() {
        for model in ModelKind::ALL {
            let tr = toy(model);
            let mut buf = Vec::new();
            tr.write_csv(&mut buf).unwrap();
            let back = Trace::read_csv(buf.as_slice(), model).unwrap();
            assert_eq!(back, tr);
        }
    }

    #[test]
    fn header_layout() {
        assert_eq!(
            toy(ModelKind::MusFib).csv_header(),
            "t,y,yd,ydd,s1,a,contact"
        );
        assert_eq!(
            toy(ModelKind::DcMot).csv_header(),
            "t,y,yd,ydd,s1,s2,a,contact"
        );
    }

    #[test]
    fn rejects_wrong_sensor_layout() {
        let mut buf = Vec::new();
        toy(ModelKind::DcMot).write_csv(&mut buf).unwrap();
        assert!(Trace::read_csv(buf.as_slice(), ModelKind::MusLin).is_err());
    }

    #[test]
    fn validate_catches_ragged_channels() {
        let mut tr = toy(ModelKind::MusFib);
        tr.ydd.pop();
        assert!(matches!(tr.validate(), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn max_height_respects_window() {
        let tr = toy(ModelKind::MusFib);
        assert_eq!(tr.max_height_after(0.0), Some(tr.y[3]));
        assert_eq!(tr.max_height_after(1.0), None);
    }
}
