//! Command-line interface. `--threads` runs the command on a dedicated
//! pool, so several invocations can share one process.

use std::ffi::OsString;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use crate::io::{read_dataset, save_dataset, save_json, truth_path, TruthFile};
use crate::path::{render_svg, solution_path, write_path_csv};
use crate::report::{BandwidthArg, FitReport, FitRequest, Solver};
use crate::sweep::{run_sweep, summarize, write_metrics, SweepSpec};
use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ksfiqr_core::scm::ModelId;
use ksfiqr_core::{GumbelConfig, KernelFamily, PenaltyExtension};
use rayon::ThreadPoolBuilder;

#[derive(Parser)]
#[command(
    name = "ksfiqr",
    version,
    about = "Invariance-penalised smoothed quantile regression across environments"
)]
struct Cli {
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a benchmark dataset and its truth sidecar.
    Simulate(SimulateArgs),
    /// Fit one dataset and write a JSON report.
    Fit(FitArgs),
    /// Run a replication sweep described by a JSON spec.
    Sweep(SweepArgs),
    /// Exhaustive fits along a grid of penalty weights.
    Path(PathArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    #[value(name = "1i")]
    M1i,
    #[value(name = "1ii")]
    M1ii,
    #[value(name = "2")]
    M2,
    #[value(name = "3")]
    M3,
}

impl ModelArg {
    fn label(self) -> &'static str {
        match self {
            Self::M1i => "1i",
            Self::M1ii => "1ii",
            Self::M2 => "2",
            Self::M3 => "3",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Gaussian,
    Uniform,
    Epanechnikov,
}

impl From<KernelArg> for KernelFamily {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Gaussian => Self::Gaussian,
            KernelArg::Uniform => Self::Uniform,
            KernelArg::Epanechnikov => Self::Epanechnikov,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Exhaustive,
    Gumbel,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExtensionArg {
    None,
    Square,
    Cosine,
}

impl From<ExtensionArg> for PenaltyExtension {
    fn from(e: ExtensionArg) -> Self {
        match e {
            ExtensionArg::None => Self::None,
            ExtensionArg::Square => Self::Square,
            ExtensionArg::Cosine => Self::Cosine,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    model: ModelArg,
    /// Observations per environment.
    #[arg(long)]
    n: usize,
    /// Threshold quantile (Model 3 only).
    #[arg(long, default_value_t = 0.8)]
    q: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Dataset CSV; the truth goes next to it as `.truth.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    #[arg(long, default_value_t = 20.0)]
    gamma: f64,
    /// `auto` or a positive number.
    #[arg(long, default_value = "auto")]
    bandwidth: BandwidthArg,
    #[arg(long, value_enum, default_value = "gaussian")]
    kernel: KernelArg,
    #[arg(long, value_enum, default_value = "exhaustive")]
    solver: SolverArg,
    #[arg(long = "penalty-ext", value_enum, default_value = "none")]
    penalty_ext: ExtensionArg,
    /// Gumbel solver seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Gumbel solver iterations.
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// SweepSpec as JSON.
    #[arg(long)]
    spec: PathBuf,
    /// Metrics CSV; defaults to the sweep file's `out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the number of replications.
    #[arg(long)]
    replications: Option<usize>,
    /// Also write per-cell summaries as JSON.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct PathArgs {
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated penalty weights.
    #[arg(long, value_delimiter = ',', required = true)]
    gammas: Vec<f64>,
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    #[arg(long, default_value = "auto")]
    bandwidth: BandwidthArg,
    #[arg(long, value_enum, default_value = "gaussian")]
    kernel: KernelArg,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    svg: Option<PathBuf>,
}

fn create(path: &Path) -> anyhow::Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(path).with_context(
        || format!("cannot create {}", path.display()),
    )?))
}

fn simulate(args: SimulateArgs) -> anyhow::Result<()> {
    let q = matches!(args.model, ModelArg::M3).then_some(args.q);
    let model = ModelId::from_label(args.model.label(), q)?;
    let (ds, truth) = model.generate(args.n, args.seed)?;
    save_dataset(&ds, &args.out)?;
    save_json(
        &TruthFile::new(&truth, args.n, args.seed),
        &truth_path(&args.out),
    )?;
    Ok(())
}

fn fit(args: FitArgs) -> anyhow::Result<()> {
    let ds = read_dataset(&args.data)?;
    let mut gumbel = GumbelConfig::default().with_seed(args.seed);
    if let Some(t) = args.iterations {
        gumbel.iterations = t;
    }
    let req = FitRequest {
        tau: args.tau,
        gamma: args.gamma,
        bandwidth: args.bandwidth,
        kernel: args.kernel.into(),
        solver: match args.solver {
            SolverArg::Exhaustive => Solver::Exhaustive,
            SolverArg::Gumbel => Solver::Gumbel,
        },
        penalty_extension: args.penalty_ext.into(),
        gumbel,
    };
    let result = req.run(&ds)?;
    save_json(&FitReport::new(&ds, &req, &result), &args.out)?;
    Ok(())
}

fn sweep(args: SweepArgs) -> anyhow::Result<()> {
    let text = fs::read_to_string(&args.spec)
        .with_context(|| format!("cannot read {}", args.spec.display()))?;
    let mut spec: SweepSpec = serde_json::from_str(&text).context("invalid sweep spec")?;
    if let Some(r) = args.replications {
        spec.replications = r;
    }
    let Some(out) = args.out.or_else(|| spec.out.as_ref().map(PathBuf::from)) else {
        bail!("no output path: pass --out or set `out` in the sweep file");
    };
    let rows = run_sweep(&spec)?;
    write_metrics(&rows, create(&out)?)?;
    if let Some(path) = args.summary {
        let covariates = spec.model_id()?.generate(1, 0)?.0.p() - 1;
        save_json(&summarize(&rows, covariates), &path)?;
    }
    let failures = rows.iter().filter(|r| !r.ok()).count();
    if failures > 0 {
        eprintln!(
            "{failures} of {} fits failed; see the `error` column",
            rows.len()
        );
    }
    Ok(())
}

fn path(args: PathArgs) -> anyhow::Result<()> {
    let ds = read_dataset(&args.data)?;
    let req = FitRequest {
        tau: args.tau,
        bandwidth: args.bandwidth,
        kernel: args.kernel.into(),
        ..FitRequest::default()
    };
    let points = solution_path(&ds, &args.gammas, &req.config())?;
    write_path_csv(&points, create(&args.out)?)?;
    if let Some(svg) = args.svg {
        fs::write(&svg, render_svg(&points))
            .with_context(|| format!("cannot write {}", svg.display()))?;
    }
    Ok(())
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> anyhow::Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::parse_from(args);
    let dispatch = move || match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Fit(args) => fit(args),
        Command::Sweep(args) => sweep(args),
        Command::Path(args) => path(args),
    };
    match cli.threads {
        Some(threads) => ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()?
            .install(dispatch),
        None => dispatch(),
    }
}
