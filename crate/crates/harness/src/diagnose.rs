//! Stationary-distribution diagnostics on a 2-d grid: long MCMC chains
//! against the Monte-Carlo Thompson-sampling distribution.

use std::path::Path;

use mcbo::benchmarks::ObjectiveFn;
use mcbo::gp::{Dataset, GpPosterior};
use mcbo::hyper::fit_hyperparams;
use mcbo::kernel::KernelFamily;
use mcbo::mcmc::{stationary_diagnostics, ChainHistogram, Grid, LdParams, MhParams, Routine};
use mcbo::rng::{derive_seed, stream};
use mcbo::sobol::SobolGenerator;
use mcbo::space::{Bounds, Standardizer};
use mcbo::thompson::{top_k, top_k_overlap, ts_distribution_mc, tv_distance};
use serde::{Deserialize, Serialize};

use crate::config::{Boundary, RoutineKind};
use crate::error::{HarnessError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnoseConfig {
    pub objective: String,
    /// Box the design and grid live in (native coordinates, per axis).
    pub lower: f64,
    pub upper: f64,
    pub n_samples: usize,
    pub grid: usize,
    pub steps: u64,
    pub burn_in: u64,
    pub ts_samples: usize,
    pub routines: Vec<RoutineKind>,
    pub proposal_sigma: f64,
    pub ld_eps: f64,
    pub ld_h: f64,
    pub boundary: Boundary,
    pub kernel: String,
    pub hyper_iters: usize,
    pub top_k: usize,
    pub seed: u64,
}

impl Default for DiagnoseConfig {
    fn default() -> Self {
        Self {
            objective: "rastrigin".into(),
            lower: -1.0,
            upper: 1.0,
            n_samples: 20,
            grid: 50,
            steps: 1_000_000,
            burn_in: 100_000,
            ts_samples: 1_000_000,
            routines: vec![RoutineKind::Mh, RoutineKind::Ld],
            proposal_sigma: MhParams::DEFAULT_SIGMA,
            ld_eps: LdParams::DEFAULT_EPS,
            ld_h: LdParams::DEFAULT_H,
            boundary: Boundary::Reflect,
            kernel: KernelFamily::Matern52.name().into(),
            hyper_iters: 200,
            top_k: 10,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ChainReport {
    pub routine: RoutineKind,
    pub histogram: ChainHistogram,
    pub frequencies: Vec<f64>,
    pub split_half_tv: f64,
    pub tv_to_ts: f64,
    pub top_k_overlap: usize,
}

#[derive(Clone, Debug)]
pub struct DiagnoseReport {
    pub config: DiagnoseConfig,
    pub posterior: GpPosterior,
    pub grid: Grid,
    /// Grid points in native coordinates.
    pub native_points: Vec<Vec<f64>>,
    pub ts: Vec<f64>,
    pub chains: Vec<ChainReport>,
}

/// A GP fitted (with ML-II hyperparameters) to a scrambled-Sobol design of
/// the objective inside `[lower, upper]^2`, in unit coordinates.
pub fn fit_design_posterior(cfg: &DiagnoseConfig) -> Result<GpPosterior> {
    let objective = ObjectiveFn::by_name(&cfg.objective, 2)?;
    let family = KernelFamily::from_name(&cfg.kernel).ok_or_else(|| HarnessError::Config(format!("unknown kernel `{}`", cfg.kernel)))?;
    if cfg.n_samples < 2 {
        return Err(HarnessError::Config("n_samples must be at least 2".into()));
    }
    let bounds = Bounds::uniform(2, cfg.lower, cfg.upper)?;
    let native = objective.bounds();
    let mut gen = SobolGenerator::scrambled(2, derive_seed(cfg.seed, 1))?;
    let unit = gen.next_points(cfg.n_samples);
    let mut y = Vec::with_capacity(unit.len());
    for u in &unit {
        let x = bounds.from_unit(u);
        if !native.contains(&x) {
            return Err(HarnessError::Config("diagnostic box leaves the objective's domain".into()));
        }
        y.push(objective.eval(&x)?);
    }
    let y = Standardizer::fit(&y)?.apply_all(&y);
    let data = Dataset::new(unit, y, 1e-3)?;
    let fit = fit_hyperparams(&data, family, cfg.hyper_iters)?;
    Ok(GpPosterior::fit(data.with_noise_variance(fit.noise_variance)?, fit.kernel)?)
}

pub fn diagnose(cfg: &DiagnoseConfig) -> Result<DiagnoseReport> {
    if cfg.grid < 2 {
        return Err(HarnessError::Config("grid must have at least 2 cells per axis".into()));
    }
    if cfg.steps <= cfg.burn_in {
        return Err(HarnessError::Config("steps must exceed burn_in".into()));
    }
    let post = fit_design_posterior(cfg)?;
    let grid = Grid::cell_centres(2, cfg.grid)?;
    let bounds = Bounds::uniform(2, cfg.lower, cfg.upper)?;
    let points = grid.points();
    let native_points = points.iter().map(|p| bounds.from_unit(p)).collect();

    let ts = ts_distribution_mc(&post, &points, cfg.ts_samples, &mut stream(derive_seed(cfg.seed, 2), 0))?;

    let mut chains = Vec::new();
    for (i, &kind) in cfg.routines.iter().enumerate() {
        let routine = match kind {
            RoutineKind::Mh => Routine::Mh(MhParams {
                proposal_sigma: cfg.proposal_sigma,
                n_transitions: 1,
                boundary_policy: cfg.boundary.into(),
            }),
            RoutineKind::Ld => Routine::Ld(LdParams {
                step_eps: cfg.ld_eps,
                fd_step: cfg.ld_h,
                n_transitions: 1,
                boundary_policy: cfg.boundary.into(),
            }),
            RoutineKind::None => continue,
        };
        let mut rng = stream(derive_seed(cfg.seed, 3), i as u64);
        let histogram = stationary_diagnostics(&post, &grid, &routine, cfg.steps, cfg.burn_in, &mut rng)?;
        let frequencies = histogram.frequencies();
        chains.push(ChainReport {
            routine: kind,
            split_half_tv: histogram.split_half_tv(),
            tv_to_ts: tv_distance(&frequencies, &ts)?,
            top_k_overlap: top_k_overlap(&frequencies, &ts, cfg.top_k),
            frequencies,
            histogram,
        });
    }
    Ok(DiagnoseReport {
        config: cfg.clone(),
        posterior: post,
        grid,
        native_points,
        ts,
        chains,
    })
}

#[derive(Serialize)]
struct ChainSummary {
    routine: RoutineKind,
    split_half_tv: f64,
    tv_to_ts: f64,
    top_k_overlap: usize,
    top_k_cells: Vec<usize>,
    acceptance_rate: Option<f64>,
}

#[derive(Serialize)]
struct ReportFile<'a> {
    config: &'a DiagnoseConfig,
    lengthscales: Vec<f64>,
    outputscale: f64,
    noise_variance: f64,
    ts_top_k_cells: Vec<usize>,
    chains: Vec<ChainSummary>,
}

fn write_hist(path: &Path, report: &DiagnoseReport, columns: &[(&str, &[f64])]) -> Result<()> {
    let csv_err = |source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header = vec!["cell", "x0", "x1"];
    header.extend(columns.iter().map(|c| c.0));
    w.write_record(&header).map_err(csv_err)?;
    for (cell, x) in report.native_points.iter().enumerate() {
        let mut row = vec![cell.to_string(), x[0].to_string(), x[1].to_string()];
        row.extend(columns.iter().map(|c| c.1[cell].to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// Writes `ts_hist.csv`, one `chain_<routine>.csv` per chain and
/// `diagnose.toml` into `dir`.
pub fn write_artifacts(report: &DiagnoseReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    write_hist(&dir.join("ts_hist.csv"), report, &[("freq", &report.ts)])?;
    for c in &report.chains {
        let first = c.histogram.first_frequencies();
        let second = c.histogram.second_frequencies();
        write_hist(
            &dir.join(format!("chain_{}.csv", c.routine.name())),
            report,
            &[("freq", &c.frequencies), ("first_half", &first), ("second_half", &second)],
        )?;
    }
    let k = report.config.top_k;
    let file = ReportFile {
        config: &report.config,
        lengthscales: report.posterior.kernel().lengthscales.clone(),
        outputscale: report.posterior.kernel().outputscale,
        noise_variance: report.posterior.dataset().noise_variance(),
        ts_top_k_cells: top_k(&report.ts, k),
        chains: report
            .chains
            .iter()
            .map(|c| ChainSummary {
                routine: c.routine,
                split_half_tv: c.split_half_tv,
                tv_to_ts: c.tv_to_ts,
                top_k_overlap: c.top_k_overlap,
                top_k_cells: top_k(&c.frequencies, k),
                acceptance_rate: (c.histogram.proposal_count > 0)
                    .then(|| c.histogram.accept_count as f64 / c.histogram.proposal_count as f64),
            })
            .collect(),
    };
    let path = dir.join("diagnose.toml");
    let text = toml::to_string(&file).map_err(|e| HarnessError::Parse {
        path: path.clone(),
        message: e.to_string(),
    })?;
    std::fs::write(&path, text).map_err(|e| HarnessError::io(&path, e))
}
