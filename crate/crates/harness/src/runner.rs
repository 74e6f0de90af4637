//! The optimization loop: initial design, then rounds of posterior fit,
//! candidate pool, batch Thompson sampling, MCMC transitions and evaluation.

use std::time::Instant;

use mcbo::gp::{Dataset, GpPosterior, JointSampler};
use mcbo::hyper::{fit_hyperparams_from, NOISE_BOUNDS};
use mcbo::kernel::Kernel;
use mcbo::mcmc::{run_transitions_in, ChainBatch};
use mcbo::rng::{derive_seed, substream, Stream};
use mcbo::sobol::SobolGenerator;
use mcbo::space::{Bounds, Standardizer};
use mcbo::thompson::argmax;
use mcbo::trust_region::TrustRegion;

use crate::config::{ProposerKind, RunConfig};
use crate::error::{HarnessError, Result};

const INITIAL_LENGTHSCALE: f64 = 0.5;
const INITIAL_NOISE: f64 = 1e-3;

const LABEL_INIT: u64 = 1;
const LABEL_POOL: u64 = 2;
const LABEL_TS: u64 = 3;
const LABEL_MCMC: u64 = 4;

/// One evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub repeat: usize,
    pub round: usize,
    pub eval_index: usize,
    /// Native-domain coordinates.
    pub point: Vec<f64>,
    pub value: f64,
    pub best_so_far: f64,
    /// Seconds spent on the round that produced this evaluation.
    pub wall_clock: f64,
    /// MH acceptance rate of the round, when MH ran.
    pub accept_rate: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct RepeatOutcome {
    pub repeat: usize,
    pub seed: u64,
    pub records: Vec<RunRecord>,
    /// MCMC transition steps executed, summed over chains.
    pub transitions_run: u64,
    pub rounds: usize,
    pub restarts: usize,
    pub kernel: Kernel,
    pub noise_variance: f64,
}

impl RepeatOutcome {
    pub fn best_value(&self) -> f64 {
        self.records.last().map_or(f64::NEG_INFINITY, |r| r.best_so_far)
    }
}

/// Runs every repeat in order; stops at the first failing repeat.
pub fn run_bo_loop(config: &RunConfig) -> Result<Vec<RepeatOutcome>> {
    config.validate()?;
    (0..config.repeats).map(|r| run_repeat(config, r)).collect()
}

/// Runs repeat `r` with seed `config.seed + r`.
pub fn run_repeat(config: &RunConfig, r: usize) -> Result<RepeatOutcome> {
    config.validate()?;
    let seed = config.repeat_seed(r);
    Repeat::new(config, r, seed)?.run().map_err(|e| match e {
        HarnessError::Model(source) => HarnessError::Repeat { repeat: r, source },
        other => other,
    })
}

struct Repeat<'a> {
    cfg: &'a RunConfig,
    repeat: usize,
    seed: u64,
    objective: mcbo::benchmarks::ObjectiveFn,
    bounds: Bounds,
    unit: Vec<Vec<f64>>,
    values: Vec<f64>,
    records: Vec<RunRecord>,
    kernel: Kernel,
    noise: f64,
    restart_gen: SobolGenerator,
    pool_gen: SobolGenerator,
    region: Option<TrustRegion>,
    /// Last round's posterior, extended while the hyperparameters stay put.
    post: Option<GpPosterior>,
    transitions_run: u64,
    restarts: usize,
}

impl<'a> Repeat<'a> {
    fn new(cfg: &'a RunConfig, repeat: usize, seed: u64) -> Result<Self> {
        let objective = cfg.objective_fn()?;
        let bounds = objective.bounds();
        let d = cfg.dim;
        Ok(Self {
            cfg,
            repeat,
            seed,
            objective,
            bounds,
            unit: Vec::with_capacity(cfg.budget),
            values: Vec::with_capacity(cfg.budget),
            records: Vec::with_capacity(cfg.budget),
            kernel: Kernel::ard(cfg.kernel_family()?, d, INITIAL_LENGTHSCALE, 1.0)?,
            noise: INITIAL_NOISE,
            restart_gen: SobolGenerator::scrambled(d, derive_seed(seed, LABEL_INIT))?,
            pool_gen: SobolGenerator::scrambled(d, derive_seed(seed, LABEL_POOL))?,
            region: None,
            post: None,
            transitions_run: 0,
            restarts: 0,
        })
    }

    fn evaluate(&mut self, round: usize, batch: Vec<Vec<f64>>, wall: f64, accept_rate: Option<f64>) -> Result<()> {
        for u in batch {
            let x = self.bounds.from_unit(&u);
            let y = self.objective.eval(&x)?;
            let best = self.records.last().map_or(y, |r| r.best_so_far.max(y));
            self.records.push(RunRecord {
                repeat: self.repeat,
                round,
                eval_index: self.records.len(),
                point: x,
                value: y,
                best_so_far: best,
                wall_clock: wall,
                accept_rate,
            });
            self.unit.push(u);
            self.values.push(y);
        }
        Ok(())
    }

    fn incumbent(&self) -> (f64, usize) {
        let i = argmax(&self.values);
        (self.values[i], i)
    }

    fn run(mut self) -> Result<RepeatOutcome> {
        let cfg = self.cfg;
        let started = Instant::now();
        let init = self.restart_gen.next_points(cfg.n_init);
        self.evaluate(0, init, 0.0, None)?;
        let wall = started.elapsed().as_secs_f64();
        for rec in &mut self.records {
            rec.wall_clock = wall;
        }

        if cfg.proposer == ProposerKind::Turbo {
            let (_, i) = self.incumbent();
            self.region = Some(TrustRegion::new(self.unit[i].clone())?);
        }

        let routine = cfg.mcmc_routine();
        let mut round = 0;
        while self.values.len() < cfg.budget {
            round += 1;
            let started = Instant::now();
            let m = cfg.batch_size.min(cfg.budget - self.values.len());

            let std = Standardizer::fit(&self.values)?;
            let y = std.apply_all(&self.values);
            if cfg.fit_hypers && (round - 1) % cfg.refit_every == 0 {
                self.refit(&y)?;
                self.post = None;
            }
            let data = Dataset::new(self.unit.clone(), y, self.noise)?;
            let post = match self.post.take() {
                Some(prev) => prev.extend(data)?,
                None => GpPosterior::fit(data, self.kernel.clone())?,
            };

            let pool = match &mut self.region {
                Some(tr) => {
                    tr.set_shape(&self.kernel.lengthscales);
                    tr.propose(&mut self.pool_gen, cfg.pool_size())?
                }
                None => self.pool_gen.next_points(cfg.pool_size()),
            };

            let sampler = JointSampler::new(&post, &pool)?;
            let picks: Vec<Vec<f64>> = (0..m)
                .map(|k| {
                    let mut rng = substream(self.seed, LABEL_TS, round as u64, k as u64);
                    pool[argmax(&sampler.draw(&mut rng))].clone()
                })
                .collect();

            let (batch, accept_rate) = match &routine {
                Some(routine) => {
                    let domain = match &self.region {
                        Some(tr) => tr.bounds(),
                        None => Bounds::uniform(cfg.dim, 0.0, 1.0)?,
                    };
                    let mut rngs: Vec<Stream> = (0..m).map(|k| substream(self.seed, LABEL_MCMC, round as u64, k as u64)).collect();
                    let out = run_transitions_in(&post, ChainBatch::new(picks), routine, &domain, &mut rngs)?;
                    self.transitions_run += (routine.n_transitions() * m) as u64;
                    let rate = out.acceptance_rate();
                    (out.points, rate)
                }
                None => (picks, None),
            };

            self.post = Some(post);
            let (incumbent, _) = self.incumbent();
            let first = self.values.len();
            self.evaluate(round, batch, 0.0, accept_rate)?;
            let wall = started.elapsed().as_secs_f64();
            for rec in &mut self.records[first..] {
                rec.wall_clock = wall;
            }

            if let Some(tr) = &mut self.region {
                let batch_vals = &self.values[first..];
                let k = argmax(batch_vals);
                tr.update(batch_vals[k], incumbent, &self.unit[first + k]);
                if tr.is_collapsed() {
                    let c = self.restart_gen.next_points(1).remove(0);
                    tr.restart(c);
                    self.restarts += 1;
                }
            }
        }

        Ok(RepeatOutcome {
            repeat: self.repeat,
            seed: self.seed,
            records: self.records,
            transitions_run: self.transitions_run,
            rounds: round,
            restarts: self.restarts,
            kernel: self.kernel,
            noise_variance: self.noise,
        })
    }

    /// ML-II refit on the most recent points, warm-started from the
    /// current kernel.
    fn refit(&mut self, y: &[f64]) -> Result<()> {
        let n = self.unit.len();
        let start = n.saturating_sub(self.cfg.hyper_max_points);
        let data = Dataset::new(self.unit[start..].to_vec(), y[start..].to_vec(), self.noise)?;
        let fit = fit_hyperparams_from(&data, &self.kernel, self.noise.clamp(NOISE_BOUNDS.0, NOISE_BOUNDS.1), self.cfg.hyper_iters)?;
        self.kernel = fit.kernel;
        self.noise = fit.noise_variance;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RoutineKind;

    fn small(routine: RoutineKind, proposer: ProposerKind) -> RunConfig {
        RunConfig {
            objective: "branin".into(),
            dim: 2,
            budget: 30,
            n_init: 6,
            batch_size: 4,
            routine,
            proposer,
            hyper_iters: 10,
            ..RunConfig::default()
        }
    }

    #[test]
    fn dataset_grows_by_batches_and_best_is_monotone() {
        for proposer in [ProposerKind::Sobol, ProposerKind::Turbo] {
            for routine in [RoutineKind::Mh, RoutineKind::Ld, RoutineKind::None] {
                let cfg = small(routine, proposer);
                let out = run_repeat(&cfg, 0).unwrap();
                assert_eq!(out.records.len(), 30);
                assert_eq!(out.rounds, 6);
                for (i, r) in out.records.iter().enumerate() {
                    assert_eq!(r.eval_index, i);
                    let expected_round = if i < 6 { 0 } else { (i - 6) / 4 + 1 };
                    assert_eq!(r.round, expected_round);
                    assert!(cfg.objective_fn().unwrap().bounds().contains(&r.point));
                }
                assert!(out.records.windows(2).all(|w| w[1].best_so_far >= w[0].best_so_far));
                let expect_steps = match routine {
                    RoutineKind::None => 0,
                    _ => 6 * 4 * 2,
                };
                assert_eq!(out.transitions_run, expect_steps);
            }
        }
    }

    #[test]
    fn budget_equal_to_init_runs_no_rounds() {
        let cfg = RunConfig { budget: 6, ..small(RoutineKind::Mh, ProposerKind::Sobol) };
        let out = run_repeat(&cfg, 0).unwrap();
        assert_eq!(out.records.len(), 6);
        assert_eq!(out.rounds, 0);
        assert_eq!(out.transitions_run, 0);
    }

    #[test]
    fn last_batch_is_truncated_to_budget() {
        let cfg = RunConfig { budget: 12, ..small(RoutineKind::None, ProposerKind::Sobol) };
        let out = run_repeat(&cfg, 0).unwrap();
        assert_eq!(out.records.len(), 12);
        assert_eq!(out.rounds, 2);
    }

    #[test]
    fn same_seed_same_records() {
        let cfg = small(RoutineKind::Mh, ProposerKind::Turbo);
        let strip = |o: RepeatOutcome| -> Vec<(Vec<f64>, f64, Option<f64>)> {
            o.records.into_iter().map(|r| (r.point, r.value, r.accept_rate)).collect()
        };
        let a = strip(run_repeat(&cfg, 1).unwrap());
        let b = strip(run_repeat(&cfg, 1).unwrap());
        assert_eq!(a, b);
        let c = strip(run_repeat(&cfg, 2).unwrap());
        assert_ne!(a, c);
    }
}
