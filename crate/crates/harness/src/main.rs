use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mcbo_harness::config::{Boundary, ProposerKind, RoutineKind, RunConfig};
use mcbo_harness::diagnose::{diagnose, write_artifacts, DiagnoseConfig};
use mcbo_harness::output::{repeat_csv_path, write_records, RepeatMeta, RunMetadata};
use mcbo_harness::runner::run_repeat;
use mcbo_harness::summary::{load_traces, summarize, write_summary};
use mcbo_harness::{HarnessError, Result};

#[derive(Parser)]
#[command(name = "mcbo", version, about = "Batch Bayesian optimization with MCMC-transitioned Thompson samples")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the optimization loop and write one CSV per repeat plus run.toml.
    Run(RunArgs),
    /// Aggregate best-so-far traces of a run directory into summary.csv.
    Summarize {
        dir: PathBuf,
        /// Output file (default: DIR/summary.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare long MCMC chains with the Thompson-sampling distribution on a 2-d grid.
    Diagnose(DiagnoseArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Routine {
    Mh,
    Ld,
    None,
}

impl From<Routine> for RoutineKind {
    fn from(r: Routine) -> Self {
        match r {
            Routine::Mh => RoutineKind::Mh,
            Routine::Ld => RoutineKind::Ld,
            Routine::None => RoutineKind::None,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Proposer {
    Sobol,
    Turbo,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Matern52,
    Rbf,
}

impl KernelArg {
    fn name(self) -> &'static str {
        match self {
            KernelArg::Matern52 => "matern52",
            KernelArg::Rbf => "rbf",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundaryArg {
    Reflect,
    Clip,
}

impl From<BoundaryArg> for Boundary {
    fn from(b: BoundaryArg) -> Self {
        match b {
            BoundaryArg::Reflect => Boundary::Reflect,
            BoundaryArg::Clip => Boundary::Clip,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    objective: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    init: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long, value_enum)]
    routine: Option<Routine>,
    #[arg(long)]
    transitions: Option<usize>,
    #[arg(long)]
    proposal_sigma: Option<f64>,
    #[arg(long)]
    ld_eps: Option<f64>,
    #[arg(long)]
    ld_h: Option<f64>,
    #[arg(long, value_enum)]
    boundary: Option<BoundaryArg>,
    #[arg(long, value_enum)]
    proposer: Option<Proposer>,
    #[arg(long)]
    pool: Option<usize>,
    #[arg(long, value_enum)]
    kernel: Option<KernelArg>,
    #[arg(long, value_enum)]
    fit_hypers: Option<OnOff>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn resolve(self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($f:ident => $field:ident),*) => {$(
                if let Some(v) = self.$f { c.$field = v.into(); }
            )*};
        }
        set!(objective => objective, dim => dim, budget => budget, init => n_init, batch => batch_size,
             routine => routine, proposal_sigma => proposal_sigma, ld_eps => ld_eps, ld_h => ld_h,
             boundary => boundary, seed => seed, repeats => repeats);
        if self.transitions.is_some() {
            c.transitions = self.transitions;
        }
        if self.pool.is_some() {
            c.pool = self.pool;
        }
        if let Some(p) = self.proposer {
            c.proposer = match p {
                Proposer::Sobol => ProposerKind::Sobol,
                Proposer::Turbo => ProposerKind::Turbo,
            };
        }
        if let Some(k) = self.kernel {
            c.kernel = k.name().into();
        }
        if let Some(f) = self.fit_hypers {
            c.fit_hypers = matches!(f, OnOff::On);
        }
        if self.out.is_some() {
            c.out = self.out;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args)]
struct DiagnoseArgs {
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    objective: Option<String>,
    /// Design points of the fitted GP.
    #[arg(long)]
    samples: Option<usize>,
    /// Cells per axis.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    burn_in: Option<u64>,
    #[arg(long)]
    ts_samples: Option<usize>,
    /// Chains to run; repeat the flag for several.
    #[arg(long, value_enum)]
    routine: Vec<Routine>,
    #[arg(long)]
    proposal_sigma: Option<f64>,
    #[arg(long)]
    ld_eps: Option<f64>,
    #[arg(long)]
    ld_h: Option<f64>,
    #[arg(long, value_enum)]
    kernel: Option<KernelArg>,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

impl DiagnoseArgs {
    fn resolve(self) -> Result<DiagnoseConfig> {
        let mut c = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| HarnessError::Io { path: p.clone(), source: e })?;
                toml::from_str(&text).map_err(|e| HarnessError::Parse {
                    path: p.clone(),
                    message: e.to_string().lines().next().unwrap_or("").to_string(),
                })?
            }
            None => DiagnoseConfig::default(),
        };
        macro_rules! set {
            ($($f:ident => $field:ident),*) => {$(
                if let Some(v) = self.$f { c.$field = v; }
            )*};
        }
        set!(objective => objective, samples => n_samples, grid => grid, steps => steps, burn_in => burn_in,
             ts_samples => ts_samples, proposal_sigma => proposal_sigma, ld_eps => ld_eps, ld_h => ld_h,
             top_k => top_k, seed => seed);
        if !self.routine.is_empty() {
            c.routines = self.routine.into_iter().map(Into::into).collect();
        }
        if let Some(k) = self.kernel {
            c.kernel = k.name().into();
        }
        Ok(c)
    }
}

fn run(args: RunArgs) -> Result<()> {
    let cfg = args.resolve()?;
    let dir = cfg.out.clone().ok_or_else(|| HarnessError::Config("an output directory is required (--out)".into()))?;
    std::fs::create_dir_all(&dir).map_err(|e| HarnessError::Io { path: dir.clone(), source: e })?;
    let mut metas = Vec::with_capacity(cfg.repeats);
    let mut first_failure = None;
    for r in 0..cfg.repeats {
        match run_repeat(&cfg, r) {
            Ok(outcome) => {
                write_records(&repeat_csv_path(&dir, r), &outcome.records)?;
                println!("repeat {r}: best {} after {} evaluations", outcome.best_value(), outcome.records.len());
                metas.push(RepeatMeta::ok(&outcome));
            }
            Err(e) => {
                eprintln!("repeat {r} failed: {e}");
                metas.push(RepeatMeta::failed(r, cfg.repeat_seed(r), &e));
                first_failure.get_or_insert(e);
            }
        }
    }
    RunMetadata::new(&cfg, metas).write(&dir)?;
    first_failure.map_or(Ok(()), Err)
}

fn summarize_dir(dir: &Path, out: Option<PathBuf>) -> Result<()> {
    let rows = summarize(&load_traces(dir)?);
    let out = out.unwrap_or_else(|| dir.join("summary.csv"));
    write_summary(&out, &rows)?;
    if let Some(last) = rows.last() {
        println!("{} evaluations, final mean best {} (stderr {})", rows.len(), last.mean, last.stderr);
    }
    Ok(())
}

fn run_diagnose(args: DiagnoseArgs) -> Result<()> {
    let out = args.out.clone();
    let report = diagnose(&args.resolve()?)?;
    write_artifacts(&report, &out)?;
    for c in &report.chains {
        println!(
            "{}: split-half tv {:.4}, tv to ts {:.4}, top-{} overlap {}",
            c.routine.name(),
            c.split_half_tv,
            c.tv_to_ts,
            report.config.top_k,
            c.top_k_overlap
        );
    }
    Ok(())
}

fn report(kind: &str, message: &str) -> ExitCode {
    let message = message.trim().replace('\\', "\\\\").replace('"', "\\\"").replace('\n', " ");
    eprintln!("error: kind={kind} message=\"{message}\"");
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
            return report("usage", first);
        }
    };
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Summarize { dir, out } => summarize_dir(&dir, out),
        Command::Diagnose(args) => run_diagnose(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(e.kind(), &e.to_string()),
    }
}
