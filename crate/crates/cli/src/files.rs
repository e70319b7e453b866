//! On-disk artifacts: traces with JSON sidecars, and the cached stance
//! reference next to a MusFib trace.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use morphcomp_core::integrator::{
    read_reference_csv, write_reference_csv, IntegratorConfig, Trace,
};
use morphcomp_core::models::{ModelKind, ModelSpec, StanceReference};
use morphcomp_core::pipeline::{ModelRun, TRANSIENT};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub fn trace_path(dir: &Path, model: ModelKind) -> PathBuf {
    dir.join(format!("{}.csv", model.id()))
}

pub fn sidecar_path(trace: &Path) -> PathBuf {
    trace.with_extension("meta.json")
}

pub fn reference_path(dir: &Path) -> PathBuf {
    dir.join("musfib.reference.csv")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Metadata written next to every trace.
#[derive(Debug, Serialize, Deserialize)]
pub struct Sidecar {
    pub model: ModelKind,
    pub params: ModelSpec,
    pub integrator: IntegratorConfig,
    pub samples: usize,
    pub max_height: f64,
    /// Highest apex after the start-up transient.
    pub hopping_height: Option<f64>,
    pub transient: f64,
    pub contact_events: usize,
    pub max_event_height_error: f64,
    pub solver: morphcomp_core::integrator::SolverStats,
    /// For MusFib the hash of the stance reference extracted from this
    /// trace, for DCMot the hash of the reference it tracked.
    pub reference_sha256: Option<String>,
}

impl Sidecar {
    pub fn new(
        run: &ModelRun,
        integrator: &IntegratorConfig,
        reference_sha256: Option<String>,
    ) -> Self {
        let sim = &run.simulation;
        Self {
            model: run.kind(),
            params: run.spec.clone(),
            integrator: integrator.clone(),
            samples: sim.trace.len(),
            max_height: sim.trace.max_height_after(0.0).unwrap_or(f64::NAN),
            hopping_height: run.hopping_height(),
            transient: TRANSIENT,
            contact_events: sim.events.len(),
            max_event_height_error: sim.events.iter().map(|e| e.y_error).fold(0.0, f64::max),
            solver: sim.stats,
            reference_sha256,
        }
    }
}

pub fn write_trace(
    dir: &Path,
    run: &ModelRun,
    integrator: &IntegratorConfig,
    reference_sha256: Option<String>,
) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = trace_path(dir, run.kind());
    let mut buf = Vec::new();
    run.trace().write_csv(&mut buf)?;
    fs::write(&path, buf).with_context(|| format!("writing {}", path.display()))?;
    let meta = Sidecar::new(run, integrator, reference_sha256);
    let json = serde_json::to_string_pretty(&meta)? + "\n";
    let meta_path = sidecar_path(&path);
    fs::write(&meta_path, json).with_context(|| format!("writing {}", meta_path.display()))?;
    Ok(path)
}

pub fn reference_bytes(r: &StanceReference) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_reference_csv(r, &mut buf)?;
    Ok(buf)
}

/// Writes the reference cache and returns its hash.
pub fn write_reference(dir: &Path, r: &StanceReference) -> Result<String> {
    let bytes = reference_bytes(r)?;
    let path = reference_path(dir);
    fs::write(&path, &bytes).with_context(|| format!("writing {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

pub fn read_reference(path: &Path) -> Result<(StanceReference, String)> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let r = read_reference_csv(bytes.as_slice())
        .with_context(|| format!("parsing {}", path.display()))?;
    Ok((r, sha256_hex(&bytes)))
}

/// The cached reference in `dir`, if it exists, matches the hash recorded by
/// the MusFib sidecar and was produced with the given parameters.
pub fn cached_reference(
    dir: &Path,
    musfib: &ModelSpec,
    integrator: &IntegratorConfig,
) -> Option<(StanceReference, String)> {
    let meta = read_sidecar(&sidecar_path(&trace_path(dir, ModelKind::MusFib))).ok()??;
    if meta.model != ModelKind::MusFib || &meta.params != musfib || &meta.integrator != integrator {
        return None;
    }
    let (r, hash) = read_reference(&reference_path(dir)).ok()?;
    (meta.reference_sha256.as_deref() == Some(hash.as_str())).then_some((r, hash))
}

pub fn read_sidecar(path: &Path) -> Result<Option<Sidecar>> {
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let meta =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(Some(meta))
}

/// A trace file with the model parameters used to interpret it.
pub struct LoadedTrace {
    pub path: PathBuf,
    pub trace: Trace,
    pub spec: ModelSpec,
}

/// Model of a trace file: from its sidecar, else its file name, else its
/// column count (which only identifies DCMot).
fn infer_model(path: &Path, meta: Option<&Sidecar>) -> Result<ModelKind> {
    if let Some(m) = meta {
        return Ok(m.model);
    }
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("")
        .to_ascii_lowercase();
    for kind in ModelKind::ALL {
        if stem == kind.id()
            || stem.starts_with(&format!("{}_", kind.id()))
            || stem.starts_with(&format!("{}.", kind.id()))
        {
            return Ok(kind);
        }
    }
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut header = String::new();
    std::io::BufRead::read_line(&mut BufReader::new(file), &mut header)?;
    match header.trim().split(',').count() {
        8 => Ok(ModelKind::DcMot),
        7 => bail!(
            "{}: cannot tell MusFib from MusLin; name the file musfib.csv or muslin.csv, or keep its .meta.json",
            path.display()
        ),
        n => bail!("{}: unexpected column count {n}", path.display()),
    }
}

pub fn load_trace(path: &Path, defaults: &dyn Fn(ModelKind) -> ModelSpec) -> Result<LoadedTrace> {
    let meta = read_sidecar(&sidecar_path(path))?;
    let model = infer_model(path, meta.as_ref())?;
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let trace = Trace::read_csv(BufReader::new(file), model)
        .with_context(|| format!("reading {}", path.display()))?;
    let spec = match meta {
        Some(m) => m.params,
        None => defaults(model),
    };
    Ok(LoadedTrace {
        path: path.to_path_buf(),
        trace,
        spec,
    })
}
