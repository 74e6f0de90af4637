//! Experiment configuration.

use std::path::{Path, PathBuf};

use mcbo::benchmarks::ObjectiveFn;
use mcbo::kernel::KernelFamily;
use mcbo::mcmc::{BoundaryPolicy, LdParams, MhParams, Routine};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RoutineKind {
    Mh,
    Ld,
    None,
}

impl RoutineKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mh" => Some(Self::Mh),
            "ld" => Some(Self::Ld),
            "none" => Some(Self::None),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Mh => "mh",
            Self::Ld => "ld",
            Self::None => "none",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProposerKind {
    Sobol,
    Turbo,
}

impl ProposerKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sobol" => Some(Self::Sobol),
            "turbo" | "trust-region" => Some(Self::Turbo),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Sobol => "sobol",
            Self::Turbo => "turbo",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Reflect,
    Clip,
}

impl From<Boundary> for BoundaryPolicy {
    fn from(b: Boundary) -> Self {
        match b {
            Boundary::Reflect => BoundaryPolicy::Reflect,
            Boundary::Clip => BoundaryPolicy::Clip,
        }
    }
}

/// Everything needed to reproduce a run. Optional fields fall back to
/// dimension-dependent defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub objective: String,
    pub dim: usize,
    pub budget: usize,
    pub n_init: usize,
    pub batch_size: usize,
    pub routine: RoutineKind,
    /// N; defaults to `dim`.
    pub transitions: Option<usize>,
    pub proposal_sigma: f64,
    pub ld_eps: f64,
    pub ld_h: f64,
    pub boundary: Boundary,
    pub proposer: ProposerKind,
    /// Candidates per round; defaults to 50·m (Sobol) or 100·m (trust region).
    pub pool: Option<usize>,
    pub kernel: String,
    pub fit_hypers: bool,
    pub hyper_iters: usize,
    pub refit_every: usize,
    /// Hyperparameters are fitted on at most this many of the most recent points.
    pub hyper_max_points: usize,
    pub seed: u64,
    pub repeats: usize,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            objective: "branin".into(),
            dim: 2,
            budget: 100,
            n_init: 10,
            batch_size: 5,
            routine: RoutineKind::Mh,
            transitions: None,
            proposal_sigma: MhParams::DEFAULT_SIGMA,
            ld_eps: LdParams::DEFAULT_EPS,
            ld_h: LdParams::DEFAULT_H,
            boundary: Boundary::Reflect,
            proposer: ProposerKind::Sobol,
            pool: None,
            kernel: KernelFamily::Matern52.name().into(),
            fit_hypers: true,
            hyper_iters: 50,
            refit_every: 5,
            hyper_max_points: 300,
            seed: 0,
            repeats: 1,
            out: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> std::result::Result<Self, String> {
        toml::from_str(s).map_err(|e| e.to_string().lines().next().unwrap_or("").to_string())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml_str(&text)
            .or_else(|message| {
                // a run directory's run.toml embeds the config under [config]
                #[derive(Deserialize)]
                struct Persisted {
                    config: RunConfig,
                }
                toml::from_str::<Persisted>(&text).map(|p| p.config).map_err(|_| message)
            })
            .map_err(|message| HarnessError::Parse {
                path: path.to_path_buf(),
                message,
            })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn n_transitions(&self) -> usize {
        self.transitions.unwrap_or(self.dim)
    }

    pub fn pool_size(&self) -> usize {
        self.pool.unwrap_or(match self.proposer {
            ProposerKind::Sobol => 50 * self.batch_size,
            ProposerKind::Turbo => 100 * self.batch_size,
        })
    }

    pub fn kernel_family(&self) -> Result<KernelFamily> {
        KernelFamily::from_name(&self.kernel).ok_or_else(|| HarnessError::Config(format!("unknown kernel `{}`", self.kernel)))
    }

    pub fn objective_fn(&self) -> Result<ObjectiveFn> {
        Ok(ObjectiveFn::by_name(&self.objective, self.dim)?)
    }

    pub fn mcmc_routine(&self) -> Option<Routine> {
        let n = self.n_transitions();
        match self.routine {
            RoutineKind::Mh => Some(Routine::Mh(MhParams {
                proposal_sigma: self.proposal_sigma,
                n_transitions: n,
                boundary_policy: self.boundary.into(),
            })),
            RoutineKind::Ld => Some(Routine::Ld(LdParams {
                step_eps: self.ld_eps,
                fd_step: self.ld_h,
                n_transitions: n,
                boundary_policy: self.boundary.into(),
            })),
            RoutineKind::None => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        self.objective_fn()?;
        self.kernel_family()?;
        if self.n_init < 2 {
            return bad("n_init must be at least 2");
        }
        if self.batch_size < 1 {
            return bad("batch_size must be at least 1");
        }
        if self.budget < self.n_init + self.batch_size && self.budget != self.n_init {
            return bad("budget must be n_init, or at least n_init + batch_size");
        }
        if self.pool_size() < self.batch_size {
            return bad("pool must be at least batch_size");
        }
        if self.pool_size() > mcbo::gp::MAX_JOINT_CANDIDATES {
            return bad("pool exceeds the joint-sampling cap of 4096");
        }
        if self.repeats < 1 {
            return bad("repeats must be at least 1");
        }
        if self.refit_every < 1 {
            return bad("refit_every must be at least 1");
        }
        if self.hyper_max_points < 2 {
            return bad("hyper_max_points must be at least 2");
        }
        if let Some(r) = self.mcmc_routine() {
            r.validate()?;
        }
        Ok(())
    }

    /// Seed of repeat `r`.
    pub fn repeat_seed(&self, r: usize) -> u64 {
        self.seed.wrapping_add(r as u64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_dimension_and_proposer() {
        let mut c = RunConfig { dim: 7, batch_size: 4, ..RunConfig::default() };
        c.objective = "ackley".into();
        assert_eq!(c.n_transitions(), 7);
        assert_eq!(c.pool_size(), 200);
        c.proposer = ProposerKind::Turbo;
        assert_eq!(c.pool_size(), 400);
        c.validate().unwrap();
    }

    #[test]
    fn toml_round_trip() {
        let c = RunConfig {
            objective: "rastrigin".into(),
            dim: 3,
            routine: RoutineKind::Ld,
            proposer: ProposerKind::Turbo,
            pool: Some(64),
            ..RunConfig::default()
        };
        assert_eq!(RunConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);
        let partial = RunConfig::from_toml_str("objective = \"levy1d\"\ndim = 1\nroutine = \"none\"\n").unwrap();
        assert_eq!(partial.routine, RoutineKind::None);
        assert_eq!(partial.budget, RunConfig::default().budget);
        assert!(RunConfig::from_toml_str("bogus = 1").is_err());
    }

    #[test]
    fn validation_rejects_bad_shapes() {
        let ok = RunConfig::default();
        ok.validate().unwrap();
        for bad in [
            RunConfig { n_init: 1, ..ok.clone() },
            RunConfig { batch_size: 0, ..ok.clone() },
            RunConfig { budget: 12, ..ok.clone() },
            RunConfig { pool: Some(2), ..ok.clone() },
            RunConfig { objective: "nope".into(), ..ok.clone() },
            RunConfig { kernel: "cubic".into(), ..ok.clone() },
            RunConfig { dim: 3, ..ok.clone() },
            RunConfig { proposal_sigma: 0.0, ..ok.clone() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
        RunConfig { budget: 10, ..ok }.validate().unwrap();
    }
}
