//! Command-line runner: compiles a model, runs one task and writes CSV
//! tables plus a run manifest into the output directory.
//!
//! Usage:
//!   adiabatic-elim <task> [figure] --model <file.json|builtin:name> --out <dir>
//!                  [--grid t0:t1:n] [--param key=value ...]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use adiabatic_core::experiments::{self, Table};
use adiabatic_core::models::{self, builtins, ModelSpec, Reduction};
use adiabatic_core::NumericPolicy;
use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, ValueEnum};
use serde::Serialize;

const THREADS_ENV: &str = "ADIABATIC_ELIM_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Task {
    /// Exact, L0 and alpha-corrected trajectories of the slow state.
    Simulate,
    /// Entries of L0 and L1 and the trace-correction factor.
    Effective,
    /// Linear eigenvalues of L0 and nonlinear eigenvalues of L_eff.
    Spectrum,
    /// Exact and effective steady states.
    Steady,
    /// Steady-state sweep over the total decay rate (or detuning for lambda_fig9).
    Sweep,
    /// All tables behind a named figure.
    Figure,
}

#[derive(Parser, Debug)]
#[command(name = "adiabatic-elim", version, about = "Adiabatic elimination experiments for Lindblad models")]
struct Cli {
    task: Task,

    /// Figure name for the `figure` task: fig2, fig3, fig5, fig6, fig7, fig8, fig9.
    figure: Option<String>,

    /// Model JSON file or `builtin:<name>`.
    #[arg(long)]
    model: Option<String>,

    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,

    /// Grid `start:stop:count` (time, or the swept parameter for `sweep`).
    #[arg(long)]
    grid: Option<String>,

    /// Space the sweep grid logarithmically.
    #[arg(long)]
    log_grid: bool,

    /// Builtin model parameter, repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,

    /// Effective family: exact, closed_form or perturbative:<order>.
    #[arg(long, default_value = "closed_form")]
    reduction: String,

    /// Ground level initially populated by `simulate`.
    #[arg(long, default_value_t = 0)]
    initial_level: usize,

    /// JSON file overriding numeric tolerances.
    #[arg(long)]
    policy: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
struct GridSpec {
    start: f64,
    stop: f64,
    count: usize,
    log: bool,
}

impl GridSpec {
    fn parse(text: &str, log: bool) -> Result<Self> {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            bail!("grid '{text}' must have the form start:stop:count");
        }
        let start: f64 = parts[0].trim().parse().with_context(|| format!("grid start '{}'", parts[0]))?;
        let stop: f64 = parts[1].trim().parse().with_context(|| format!("grid stop '{}'", parts[1]))?;
        let count: usize = parts[2].trim().parse().with_context(|| format!("grid count '{}'", parts[2]))?;
        let g = Self { start, stop, count, log };
        g.validate()?;
        Ok(g)
    }

    fn validate(&self) -> Result<()> {
        if self.count == 0 {
            bail!("grid must contain at least one point");
        }
        if !(self.start.is_finite() && self.stop.is_finite()) {
            bail!("grid bounds must be finite");
        }
        if self.count > 1 && self.stop <= self.start {
            bail!("grid must be increasing: {} >= {}", self.start, self.stop);
        }
        if self.log && self.start <= 0.0 {
            bail!("logarithmic grid needs a positive start");
        }
        Ok(())
    }

    fn points(&self) -> Vec<f64> {
        if self.log {
            experiments::logspace(self.start, self.stop, self.count)
        } else {
            experiments::linspace(self.start, self.stop, self.count)
        }
    }
}

#[derive(Debug, Clone)]
enum ModelSource {
    Builtin(String),
    File(PathBuf),
}

#[derive(Debug, Serialize)]
struct OutputRecord {
    file: String,
    columns: Vec<String>,
    rows: usize,
}

#[derive(Debug, Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    schema_version: u32,
    task: Task,
    figure: Option<String>,
    model_source: Option<String>,
    params: BTreeMap<String, f64>,
    reduction: Option<Reduction>,
    grid: Option<GridSpec>,
    initial_level: Option<usize>,
    panel_gammas: Option<Vec<f64>>,
    threads: usize,
    policy: NumericPolicy,
    model: Option<ModelSpec>,
    notes: Vec<String>,
    outputs: Vec<OutputRecord>,
}

fn parse_params(raw: &[String]) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for p in raw {
        let (k, v) = p.split_once('=').ok_or_else(|| anyhow!("parameter '{p}' must have the form key=value"))?;
        let v: f64 = v.trim().parse().with_context(|| format!("parameter '{k}' value '{v}' is not a number"))?;
        if out.insert(k.trim().to_string(), v).is_some() {
            bail!("parameter '{k}' given twice");
        }
    }
    Ok(out)
}

fn parse_reduction(text: &str) -> Result<Reduction> {
    match text {
        "exact" => Ok(Reduction::Exact),
        "closed_form" => Ok(Reduction::ClosedForm),
        _ => match text.strip_prefix("perturbative:") {
            Some(order) => Ok(Reduction::Perturbative(
                order.parse().with_context(|| format!("perturbative order '{order}'"))?,
            )),
            None => bail!("unknown reduction '{text}'; expected exact, closed_form or perturbative:<order>"),
        },
    }
}

fn parse_source(text: &str) -> ModelSource {
    match text.strip_prefix("builtin:") {
        Some(name) => ModelSource::Builtin(name.to_string()),
        None => ModelSource::File(PathBuf::from(text)),
    }
}

fn load_model(source: &ModelSource, params: &BTreeMap<String, f64>) -> Result<ModelSpec> {
    match source {
        ModelSource::Builtin(name) => Ok(builtins::builtin(name, params)?),
        ModelSource::File(path) => {
            if !params.is_empty() {
                bail!("--param applies to builtin models only");
            }
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ModelSpec::from_json(&text).with_context(|| format!("{}", path.display()))
        }
    }
}

fn load_policy(path: Option<&Path>) -> Result<NumericPolicy> {
    match path {
        None => Ok(NumericPolicy::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("{}", p.display()))
        }
    }
}

fn configure_threads() -> Result<usize> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.trim().parse().with_context(|| format!("{THREADS_ENV}='{v}' is not a count"))?;
        if n == 0 {
            bail!("{THREADS_ENV} must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(rayon::current_num_threads())
}

/// Scales every excited-level decay rate so the total equals `gamma`.
fn with_total_decay(spec: &ModelSpec, gamma: f64) -> Result<ModelSpec> {
    if !spec.continua.is_empty() || spec.excited_levels.is_empty() {
        bail!("sweeps over a file model need discrete excited levels");
    }
    let mut s = spec.clone();
    for e in &mut s.excited_levels {
        let total: f64 = e.decay_rates.iter().sum();
        if total <= 0.0 {
            bail!("excited level '{}' has no decay to rescale", e.label);
        }
        for r in &mut e.decay_rates {
            *r *= gamma / total;
        }
    }
    Ok(s)
}

fn write_table(dir: &Path, stem: &str, table: &Table, outputs: &mut Vec<OutputRecord>) -> Result<()> {
    let file = format!("{stem}.csv");
    std::fs::write(dir.join(&file), table.to_csv()).with_context(|| format!("writing {file}"))?;
    outputs.push(OutputRecord {
        file,
        columns: table.columns.clone(),
        rows: table.rows.len(),
    });
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let threads = configure_threads()?;
    let policy = load_policy(cli.policy.as_deref())?;
    let params = parse_params(&cli.params)?;
    let reduction = parse_reduction(&cli.reduction)?;
    std::fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;

    let mut manifest = Manifest {
        tool: "adiabatic-elim",
        version: env!("CARGO_PKG_VERSION"),
        schema_version: models::SCHEMA_VERSION,
        task: cli.task,
        figure: None,
        model_source: cli.model.clone(),
        params: params.clone(),
        reduction: None,
        grid: None,
        initial_level: None,
        panel_gammas: None,
        threads,
        policy,
        model: None,
        notes: Vec::new(),
        outputs: Vec::new(),
    };
    let out = cli.out.as_path();

    if cli.task == Task::Figure {
        let name = cli.figure.clone().ok_or_else(|| anyhow!("the figure task needs a figure name"))?;
        if cli.model.is_some() || !params.is_empty() {
            bail!("figures use fixed builtin models; drop --model and --param");
        }
        let grid = cli.grid.as_deref().map(|g| GridSpec::parse(g, false)).transpose()?;
        let times = grid.as_ref().map(|g| g.points());
        let (tables, notes) = experiments::figure(&name, times.as_deref(), &policy).with_context(|| format!("figure {name}"))?;
        for (stem, table) in &tables {
            write_table(out, stem, table, &mut manifest.outputs)?;
        }
        if matches!(name.as_str(), "fig3" | "fig5" | "fig6") {
            manifest.panel_gammas = Some(experiments::PANEL_GAMMAS.to_vec());
            manifest.reduction = Some(Reduction::ClosedForm);
            manifest.initial_level = Some(0);
        }
        manifest.grid = grid.or_else(|| match name.as_str() {
            "fig2" => Some(GridSpec { start: 0.0, stop: 10.0, count: 201, log: false }),
            "fig3" | "fig5" | "fig6" => Some(GridSpec { start: 0.0, stop: 20.0, count: 201, log: false }),
            "fig7" | "fig8" => Some(GridSpec { start: 0.1, stop: 1000.0, count: 41, log: true }),
            _ => Some(GridSpec { start: -5.0, stop: 5.0, count: 101, log: false }),
        });
        manifest.figure = Some(name);
        manifest.notes = notes;
        return write_manifest(out, &manifest);
    }
    if cli.figure.is_some() {
        bail!("a figure name is only accepted by the figure task");
    }

    let source = parse_source(cli.model.as_deref().ok_or_else(|| anyhow!("--model is required for this task"))?);
    let spec = load_model(&source, &params)?;
    let context = format!("model '{}'", spec.name);
    manifest.model = Some(spec.clone());

    match cli.task {
        Task::Sweep => {
            let is_detuning = matches!(&source, ModelSource::Builtin(n) if n == "lambda_fig9");
            let grid = match cli.grid.as_deref() {
                Some(g) => GridSpec::parse(g, cli.log_grid)?,
                None if is_detuning => GridSpec { start: -5.0, stop: 5.0, count: 101, log: false },
                None => GridSpec { start: 0.1, stop: 1000.0, count: 41, log: true },
            };
            let points = grid.points();
            let table = if is_detuning {
                if !params.is_empty() {
                    bail!("the detuning sweep takes no parameters");
                }
                experiments::detuning_sweep(&points, &policy)
            } else {
                match &source {
                    ModelSource::Builtin(name) => {
                        if params.contains_key("gamma") {
                            bail!("gamma is the swept parameter; drop --param gamma");
                        }
                        experiments::steady_sweep(
                            |g| {
                                let mut p = params.clone();
                                p.insert("gamma".into(), g);
                                builtins::builtin(name, &p)
                            },
                            &points,
                            &policy,
                        )
                    }
                    ModelSource::File(_) => experiments::steady_sweep(
                        |g| with_total_decay(&spec, g).map_err(|e| adiabatic_core::Error::InvalidModel(e.to_string())),
                        &points,
                        &policy,
                    ),
                }
            }
            .with_context(|| context.clone())?;
            write_table(out, "sweep", &table, &mut manifest.outputs)?;
            manifest.grid = Some(grid);
            manifest.reduction = Some(Reduction::Exact);
        }
        task => {
            let model = models::compile(&spec, reduction, &policy).with_context(|| context.clone())?;
            manifest.reduction = Some(reduction);
            match task {
                Task::Simulate => {
                    let grid = match cli.grid.as_deref() {
                        Some(g) => GridSpec::parse(g, false)?,
                        None => GridSpec { start: 0.0, stop: 20.0, count: 201, log: false },
                    };
                    let r = spec.n_ground();
                    if cli.initial_level >= r {
                        bail!("initial level {} out of range for {r} ground levels", cli.initial_level);
                    }
                    let rho0 = models::ground_population(r, cli.initial_level);
                    let (table, notes) =
                        experiments::trajectory_table(&model, &rho0, &grid.points()).with_context(|| context.clone())?;
                    write_table(out, "trajectories", &table, &mut manifest.outputs)?;
                    manifest.grid = Some(grid);
                    manifest.initial_level = Some(cli.initial_level);
                    manifest.notes = notes;
                }
                Task::Effective => {
                    write_table(out, "effective", &experiments::effective_table(&model), &mut manifest.outputs)?;
                    match adiabatic_core::effective::trace_correction(&model.family, &policy) {
                        Ok(tc) => manifest.notes.push(format!("alpha = {}", experiments::format_number(tc.alpha))),
                        Err(e) => manifest.notes.push(format!("alpha unavailable: {e}")),
                    }
                }
                Task::Spectrum => {
                    let (table, notes) = experiments::spectrum_table(&model).with_context(|| context.clone())?;
                    write_table(out, "spectrum", &table, &mut manifest.outputs)?;
                    manifest.notes = notes;
                }
                Task::Steady => {
                    let (table, notes) = experiments::steady_table(&model).with_context(|| context.clone())?;
                    write_table(out, "steady", &table, &mut manifest.outputs)?;
                    manifest.notes = notes;
                }
                Task::Sweep | Task::Figure => unreachable!(),
            }
        }
    }
    write_manifest(out, &manifest)
}

fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<()> {
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    std::fs::write(dir.join("manifest.json"), text).context("writing manifest.json")
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
