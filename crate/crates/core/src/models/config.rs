//! `key = value` parameter overrides for [`ModelSpec`].

use super::{ModelParams, ModelSpec, SensorTap};
use crate::error::{Error, Result};

/// One `key = value` line of a config file.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigEntry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

impl ConfigEntry {
    pub fn number(&self) -> Result<f64> {
        self.value.parse::<f64>().map_err(|_| Error::Config {
            line: self.line,
            message: format!("`{}`: expected a number, got `{}`", self.key, self.value),
        })
    }
}

/// Splits config text into entries. Blank lines and `#` comments are
/// skipped; keys are case-insensitive.
pub fn parse_entries(text: &str) -> Result<Vec<ConfigEntry>> {
    let mut entries = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
            line,
            message: format!("expected `key = value`, got `{content}`"),
        })?;
        let key = key.trim().to_ascii_lowercase();
        let value = value.trim().to_string();
        if key.is_empty() || value.is_empty() {
            return Err(Error::Config {
                line,
                message: "empty key or value".into(),
            });
        }
        entries.push(ConfigEntry { line, key, value });
    }
    Ok(entries)
}

impl ModelSpec {
    /// Applies every entry this model understands and returns the rest.
    ///
    /// For DCMot the body mass is re-derived from the motor parameters unless
    /// `mass` is given explicitly, in which case it must agree with them.
    pub fn apply_overrides(&mut self, entries: Vec<ConfigEntry>) -> Result<Vec<ConfigEntry>> {
        let mut rest = Vec::new();
        let mut mass_given = false;
        for entry in entries {
            if entry.key == "mass" {
                mass_given = true;
            }
            if !self.set_param(&entry)? {
                rest.push(entry);
            }
        }
        if let ModelParams::DcMot(dc) = &self.params {
            if !mass_given {
                self.common.mass = dc.equivalent_mass();
            }
        }
        self.validate()?;
        Ok(rest)
    }

    fn set_param(&mut self, e: &ConfigEntry) -> Result<bool> {
        let key = e.key.as_str();
        match key {
            "mass" | "m" => self.common.mass = e.number()?,
            "gravity" | "g" => self.common.gravity = e.number()?,
            "rest_length" | "l0" => self.common.rest_length = e.number()?,
            "y0" | "initial_height" => self.initial_height = e.number()?,
            "sensor" => self.sensor = e.value.parse::<SensorTap>()?,
            _ => {
                return match &mut self.params {
                    ModelParams::MusFib(p) => {
                        let slot = match key {
                            "f_max" => &mut p.f_max,
                            "l_opt" => &mut p.l_opt,
                            "width" | "w" => &mut p.width,
                            "c" => &mut p.c,
                            "v_max" | "ld_max" => &mut p.v_max,
                            "k" => &mut p.k,
                            "n" => &mut p.n,
                            _ => return reflex_slot(&mut p.reflex, e),
                        };
                        *slot = e.number()?;
                        Ok(true)
                    }
                    ModelParams::MusLin(p) => {
                        let slot = match key {
                            "f_max" => &mut p.f_max,
                            "mu" => &mut p.mu,
                            _ => return reflex_slot(&mut p.reflex, e),
                        };
                        *slot = e.number()?;
                        Ok(true)
                    }
                    ModelParams::DcMot(p) => {
                        let slot = match key {
                            "k_t" => &mut p.k_t,
                            "gear_ratio" | "gamma" => &mut p.gear_ratio,
                            "resistance" | "r" => &mut p.resistance,
                            "inductance" | "l" => &mut p.inductance,
                            "u_min" => &mut p.u_min,
                            "u_max" => &mut p.u_max,
                            "kp" | "k_p" => &mut p.kp,
                            "kd" | "k_d" => &mut p.kd,
                            "t_nominal" => &mut p.t_nominal,
                            "reference_mass" => &mut p.reference_mass,
                            "reference_force" => &mut p.reference_force,
                            _ => return Ok(false),
                        };
                        *slot = e.number()?;
                        Ok(true)
                    }
                };
            }
        }
        Ok(true)
    }
}

fn reflex_slot(r: &mut super::ReflexParams, e: &ConfigEntry) -> Result<bool> {
    let slot = match e.key.as_str() {
        "tau" => &mut r.tau,
        "delta" => &mut r.delta,
        "gain" | "g_fb" => &mut r.gain,
        "u0" => &mut r.u0,
        "u_min" => &mut r.u_min,
        "u_max" => &mut r.u_max,
        _ => return Ok(false),
    };
    *slot = e.number()?;
    Ok(true)
}
