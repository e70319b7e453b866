mod files;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use morphcomp_core::integrator::integrate;
use morphcomp_core::models::ModelKind;
use morphcomp_core::pipeline::{
    format_table, measure_traces, run_models, stance_reference, state_csv, sweep_bins, sweep_csv,
    with_reference, ModelMeasures, ModelRun, Settings,
};

use files::LoadedTrace;

const EXIT_USAGE: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;

#[derive(Parser)]
#[command(
    name = "morphcomp",
    version,
    about = "Simulate hopping models and measure their morphological computation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one model and write its trace and metadata.
    Simulate(SimulateArgs),
    /// Compute the measures of one or more traces on shared bin domains.
    Measure(MeasureArgs),
    /// Measures of each trace for several bin counts, as CSV.
    SweepBins(SweepArgs),
    /// Simulate all models, then measure and sweep them.
    Report(ReportArgs),
}

#[derive(Args)]
struct Common {
    /// `key = value` file overriding model, solver and binning parameters.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// musfib, muslin or dcmot.
    #[arg(
        value_name = "MODEL",
        required_unless_present = "model",
        conflicts_with = "model"
    )]
    positional: Option<ModelKind>,
    #[arg(long)]
    model: Option<ModelKind>,
    /// Simulated seconds.
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Stance reference CSV for DCMot. Without it the cached MusFib
    /// reference in the output directory is used, or MusFib is simulated.
    #[arg(long)]
    reference: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct MeasureArgs {
    #[arg(required = true)]
    traces: Vec<PathBuf>,
    /// Bins per channel (default 300, or the config's `bins`).
    #[arg(long)]
    bins: Option<usize>,
    /// Directory for the binning spec and state-dependent series.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Write mc_state_<model>.csv per trace.
    #[arg(long)]
    state_series: bool,
    #[arg(long, default_value_t = 5)]
    smooth_block: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(required = true)]
    traces: Vec<PathBuf>,
    /// Comma-separated bin counts, at least two.
    #[arg(long, value_delimiter = ',', required = true)]
    bins: Vec<usize>,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    state_series: bool,
    #[arg(long, default_value_t = 5)]
    smooth_block: usize,
    #[command(flatten)]
    common: Common,
}

/// Input problems that should exit with the usage code.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let numerical = e.chain().any(|c| {
                c.downcast_ref::<morphcomp_core::Error>()
                    .is_some_and(|e| e.is_numerical())
            });
            ExitCode::from(if numerical {
                EXIT_NUMERICAL
            } else {
                EXIT_USAGE
            })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Measure(a) => measure(a),
        Command::SweepBins(a) => sweep(a),
        Command::Report(a) => report(a),
    }
}

fn load_settings(common: &Common, duration: Option<f64>, bins: Option<usize>) -> Result<Settings> {
    let mut settings = match &common.config {
        Some(path) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Settings::from_config(&text).with_context(|| format!("in {}", path.display()))?
        }
        None => Settings::default(),
    };
    if let Some(d) = duration {
        if !(d.is_finite() && d > 0.0) {
            return Err(usage(format!("--duration must be positive, got {d}")));
        }
        settings.integrator.t_end = d;
    }
    if let Some(b) = bins {
        if b == 0 {
            return Err(usage("--bins must be at least 1"));
        }
        settings.bins = b;
    }
    Ok(settings)
}

fn check_block(block: usize) -> Result<()> {
    if block == 0 || block.is_multiple_of(2) {
        return Err(usage(format!(
            "--smooth-block must be odd and positive, got {block}"
        )));
    }
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let model = a.positional.or(a.model).expect("clap requires a model");
    let settings = load_settings(&a.common, a.duration, None)?;
    let out = &a.out;
    let (run, reference_hash) = match model {
        ModelKind::DcMot => simulate_dcmot(&settings, out, a.reference.as_deref())?,
        _ => {
            if a.reference.is_some() {
                return Err(usage("--reference only applies to dcmot"));
            }
            let run = run_models(&settings, &[model])?.remove(0);
            let hash = save_reference_if_musfib(&run, out)?;
            (run, hash)
        }
    };
    let path = files::write_trace(out, &run, &settings.integrator, reference_hash)?;
    report_run(&run, &path);
    Ok(())
}

fn save_reference_if_musfib(run: &ModelRun, out: &Path) -> Result<Option<String>> {
    if run.kind() != ModelKind::MusFib {
        return Ok(None);
    }
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    match stance_reference(run.trace(), &run.spec) {
        Ok(reference) => Ok(Some(files::write_reference(out, &reference)?)),
        Err(morphcomp_core::Error::NoStancePhase) => {
            eprintln!("MusFib run has no complete stance phase; no reference written");
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

fn simulate_dcmot(
    settings: &Settings,
    out: &Path,
    reference: Option<&Path>,
) -> Result<(ModelRun, Option<String>)> {
    let (reference, hash) = match reference {
        Some(p) => files::read_reference(p)?,
        None => match files::cached_reference(
            out,
            settings.spec(ModelKind::MusFib),
            &settings.integrator,
        ) {
            Some(cached) => {
                eprintln!(
                    "using cached reference {}",
                    files::reference_path(out).display()
                );
                cached
            }
            None => {
                eprintln!(
                    "no usable MusFib reference in {}; simulating MusFib first",
                    out.display()
                );
                let fib = run_models(settings, &[ModelKind::MusFib])?.remove(0);
                let hash = save_reference_if_musfib(&fib, out)?;
                let path = files::write_trace(out, &fib, &settings.integrator, hash)?;
                report_run(&fib, &path);
                files::read_reference(&files::reference_path(out))?
            }
        },
    };
    let spec = with_reference(settings.spec(ModelKind::DcMot), reference)?;
    let simulation = integrate(&spec, &settings.integrator)?;
    Ok((ModelRun { spec, simulation }, Some(hash)))
}

fn report_run(run: &ModelRun, path: &Path) {
    let height = match run.hopping_height() {
        Some(h) => format!("{h:.4} m"),
        None => "n/a (shorter than transient)".into(),
    };
    println!(
        "{}: {} samples -> {} (hopping height {height})",
        run.kind().label(),
        run.trace().len(),
        path.display()
    );
}

fn load_traces(paths: &[PathBuf], settings: &Settings) -> Result<Vec<LoadedTrace>> {
    let defaults = |k: ModelKind| settings.spec(k).clone();
    let mut loaded: Vec<LoadedTrace> = Vec::new();
    for p in paths {
        let t = files::load_trace(p, &defaults).map_err(|e| usage(format!("{e:#}")))?;
        if let Some(prev) = loaded.iter().find(|l| l.trace.model == t.trace.model) {
            return Err(usage(format!(
                "{} and {} are both {} traces",
                prev.path.display(),
                p.display(),
                t.trace.model.label()
            )));
        }
        loaded.push(t);
    }
    Ok(loaded)
}

fn measure_and_write(
    loaded: &[(
        &morphcomp_core::integrator::Trace,
        &morphcomp_core::models::ModelSpec,
    )],
    settings: &Settings,
    out: &Path,
    state_series: bool,
    smooth_block: usize,
) -> Result<Vec<ModelMeasures>> {
    let binning = settings.binning(loaded)?;
    let measures = measure_traces(loaded, &binning, Some(smooth_block))?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    fs::write(out.join("binning.txt"), binning.to_text())?;
    let table = format_table(&measures, &binning);
    print!("{table}");
    fs::write(out.join("measures.txt"), &table)?;
    fs::write(
        out.join("measures.json"),
        serde_json::to_string_pretty(&measure_summary(&measures))? + "\n",
    )?;
    if state_series {
        for ((trace, _), m) in loaded.iter().zip(&measures) {
            let path = out.join(format!("mc_state_{}.csv", m.model.id()));
            fs::write(&path, state_csv(trace, m))
                .with_context(|| format!("writing {}", path.display()))?;
        }
    }
    Ok(measures)
}

fn measure_summary(measures: &[ModelMeasures]) -> serde_json::Value {
    let rows: Vec<_> = measures
        .iter()
        .map(|m| {
            serde_json::json!({
                "model": m.model,
                "transient_included": true,
                "measures": m.result,
                "residual": m.result.residual(),
            })
        })
        .collect();
    serde_json::Value::Array(rows)
}

fn measure(a: MeasureArgs) -> Result<()> {
    check_block(a.smooth_block)?;
    let settings = load_settings(&a.common, None, a.bins)?;
    let loaded = load_traces(&a.traces, &settings)?;
    let pairs: Vec<_> = loaded.iter().map(|l| (&l.trace, &l.spec)).collect();
    measure_and_write(&pairs, &settings, &a.out, a.state_series, a.smooth_block)?;
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<()> {
    if a.bins.len() < 2 {
        return Err(usage("--bins needs at least two bin counts"));
    }
    if a.bins.contains(&0) {
        return Err(usage("bin counts must be at least 1"));
    }
    let settings = load_settings(&a.common, None, None)?;
    let loaded = load_traces(&a.traces, &settings)?;
    let pairs: Vec<_> = loaded.iter().map(|l| (&l.trace, &l.spec)).collect();
    let domains = settings.binning(&pairs)?;
    let csv = sweep_csv(&sweep_bins(&pairs, &domains, &a.bins)?);
    match &a.out {
        Some(p) => fs::write(p, csv).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    check_block(a.smooth_block)?;
    let settings = load_settings(&a.common, a.duration, a.bins)?;
    let runs = run_models(&settings, &ModelKind::ALL)?;
    let mut fib_hash = None;
    for run in &runs {
        let hash = match run.kind() {
            ModelKind::MusFib => {
                fib_hash = save_reference_if_musfib(run, &a.out)?;
                fib_hash.clone()
            }
            ModelKind::DcMot => fib_hash.clone(),
            ModelKind::MusLin => None,
        };
        let path = files::write_trace(&a.out, run, &settings.integrator, hash)?;
        report_run(run, &path);
    }
    println!();
    let pairs: Vec<_> = runs.iter().map(|r| (r.trace(), &r.spec)).collect();
    measure_and_write(&pairs, &settings, &a.out, a.state_series, a.smooth_block)?;
    let domains = settings.binning(&pairs)?;
    let sweep = sweep_bins(&pairs, &domains, &[50, 100, 200, 300, 400])?;
    fs::write(a.out.join("sweep.csv"), sweep_csv(&sweep))?;
    Ok(())
}
