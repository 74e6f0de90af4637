//! Exact Gaussian-process regression and the two-point posterior statistics
//! consumed by the MCMC routines.
//!
//! Everything here works in normalized coordinates: inputs live in the unit
//! cube and observations are standardized by the caller (see [`crate::space`]).
//! A fitted [`GpPosterior`] is immutable and can be shared read-only.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::kernel::Kernel;
use crate::linalg::{self, dot, Matrix};
use crate::math::{log, sqrt, standard_normal_cdf};

/// Joint sampling refuses candidate sets larger than this.
pub const MAX_JOINT_CANDIDATES: usize = 4096;

/// Below this variance a pair of values is treated as deterministic.
pub const DEFAULT_DEGENERACY_EPS: f64 = 1e-12;

/// Observed points and values in normalized space.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    points: Vec<Vec<f64>>,
    observations: Vec<f64>,
    noise_variance: f64,
}

impl Dataset {
    /// Builds a dataset, checking that every point lies in the unit cube and
    /// that points and observations line up.
    pub fn new(points: Vec<Vec<f64>>, observations: Vec<f64>, noise_variance: f64) -> Result<Self> {
        if points.len() != observations.len() {
            return Err(Error::LengthMismatch {
                left: points.len(),
                right: observations.len(),
            });
        }
        if !(noise_variance > 0.0) || !noise_variance.is_finite() {
            return Err(Error::InvalidArgument("noise variance must be positive"));
        }
        if let Some(first) = points.first() {
            let d = first.len();
            if d == 0 {
                return Err(Error::InvalidArgument("points must have at least one coordinate"));
            }
            for p in &points {
                if p.len() != d {
                    return Err(Error::DimensionMismatch {
                        expected: d,
                        got: p.len(),
                    });
                }
                if p.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                    return Err(Error::InvalidArgument("dataset point outside the unit cube"));
                }
            }
        }
        if observations.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("observations must be finite"));
        }
        Ok(Self {
            points,
            observations,
            noise_variance,
        })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn observations(&self) -> &[f64] {
        &self.observations
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.points.first().map(Vec::len)
    }

    pub fn push(&mut self, point: Vec<f64>, observation: f64) -> Result<()> {
        if let Some(d) = self.dim() {
            if point.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: point.len(),
                });
            }
        }
        if point.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::InvalidArgument("dataset point outside the unit cube"));
        }
        self.points.push(point);
        self.observations.push(observation);
        Ok(())
    }

    pub fn with_noise_variance(mut self, noise_variance: f64) -> Result<Self> {
        if !(noise_variance > 0.0) || !noise_variance.is_finite() {
            return Err(Error::InvalidArgument("noise variance must be positive"));
        }
        self.noise_variance = noise_variance;
        Ok(self)
    }
}

/// Mean and variance of `f(x_p) − f(x_o)` under the joint posterior.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairStats {
    pub mean_diff: f64,
    pub var_diff: f64,
}

impl PairStats {
    /// `P(f(x_p) > f(x_o))`, i.e. `Φ(mean / √var)`.
    ///
    /// When the variance is below `degeneracy_eps` the comparison is treated
    /// as deterministic: 0.5 if the means are also indistinguishable,
    /// otherwise 1 or 0 according to the sign of the mean difference.
    pub fn win_prob(&self, degeneracy_eps: f64) -> f64 {
        if self.var_diff < degeneracy_eps {
            if self.mean_diff.abs() < degeneracy_eps {
                0.5
            } else if self.mean_diff > 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            standard_normal_cdf(self.mean_diff / sqrt(self.var_diff)).clamp(0.0, 1.0)
        }
    }
}

/// A query point together with its posterior mean and whitened
/// cross-covariance `L⁻¹ k_n(x)`. Pair statistics between two projections
/// cost O(n) instead of a fresh triangular solve.
#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub point: Vec<f64>,
    pub mean: f64,
    whitened: Vec<f64>,
}

impl Projection {
    /// Posterior variance at the projected point, given the kernel diagonal.
    pub fn variance(&self, prior_var: f64) -> f64 {
        (prior_var - dot(&self.whitened, &self.whitened)).max(0.0)
    }
}

/// A GP conditioned on a [`Dataset`]: the factor `L` of `K + σ²I` and
/// `(K + σ²I)⁻¹ y`.
#[derive(Clone, Debug)]
pub struct GpPosterior {
    dataset: Dataset,
    kernel: Kernel,
    dim: usize,
    chol: Matrix,
    solved_obs: Vec<f64>,
    jitter: f64,
}

impl GpPosterior {
    /// Conditions `kernel` on `dataset`.
    pub fn fit(dataset: Dataset, kernel: Kernel) -> Result<Self> {
        let dim = dataset.dim().ok_or(Error::EmptyDataset)?;
        if !kernel.accepts_dim(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: kernel.lengthscales.len(),
            });
        }
        let mut k = kernel.gram(dataset.points());
        k.add_diagonal(dataset.noise_variance());
        let (chol, jitter) = linalg::cholesky_jittered(&k, kernel.outputscale)?;
        let mut solved_obs = dataset.observations().to_vec();
        linalg::solve_lower_in_place(&chol, &mut solved_obs);
        linalg::solve_lower_transposed_in_place(&chol, &mut solved_obs);
        Ok(Self {
            dataset,
            kernel,
            dim,
            chol,
            solved_obs,
            jitter,
        })
    }

    /// Conditions on `dataset`, whose leading points must be this
    /// posterior's points in the same order (all observations may change,
    /// the noise may not). Reuses the existing factor and only factorizes the
    /// new block; falls back to [`fit`](Self::fit) when the block needs more
    /// jitter or the datasets are unrelated.
    pub fn extend(&self, dataset: Dataset) -> Result<Self> {
        let n = self.dataset.len();
        let total = dataset.len();
        let reusable = n > 0
            && total >= n
            && dataset.noise_variance() == self.dataset.noise_variance()
            && dataset.points()[..n] == self.dataset.points()[..];
        if !reusable {
            return Self::fit(dataset, self.kernel.clone());
        }
        let new = &dataset.points()[n..];
        let m = new.len();
        let mut cross = self.kernel.cross(self.dataset.points(), new);
        linalg::solve_lower_matrix_in_place(&self.chol, &mut cross);
        let mut schur = self.kernel.gram(new);
        let reduced = cross.gram();
        for (s, r) in schur.as_mut_slice().iter_mut().zip(reduced.as_slice()) {
            *s -= r;
        }
        schur.add_diagonal(dataset.noise_variance() + self.jitter);
        if linalg::cholesky_in_place(&mut schur).is_err() {
            return Self::fit(dataset, self.kernel.clone());
        }
        let mut chol = Matrix::zeros(total, total);
        for i in 0..n {
            chol.row_mut(i)[..=i].copy_from_slice(&self.chol.row(i)[..=i]);
        }
        for j in 0..m {
            let row = chol.row_mut(n + j);
            for i in 0..n {
                row[i] = cross[(i, j)];
            }
            row[n..=n + j].copy_from_slice(&schur.row(j)[..=j]);
        }
        let mut solved_obs = dataset.observations().to_vec();
        linalg::solve_lower_in_place(&chol, &mut solved_obs);
        linalg::solve_lower_transposed_in_place(&chol, &mut solved_obs);
        Ok(Self {
            dataset,
            kernel: self.kernel.clone(),
            dim: self.dim,
            chol,
            solved_obs,
            jitter: self.jitter,
        })
    }

    /// The unconditioned prior over `[0, 1]^dim`.
    pub fn prior(kernel: Kernel, dim: usize) -> Result<Self> {
        if dim == 0 || !kernel.accepts_dim(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: kernel.lengthscales.len(),
            });
        }
        Ok(Self {
            dataset: Dataset {
                points: Vec::new(),
                observations: Vec::new(),
                noise_variance: 1.0,
            },
            kernel,
            dim,
            chol: Matrix::zeros(0, 0),
            solved_obs: Vec::new(),
            jitter: 0.0,
        })
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Lower Cholesky factor of `K + σ²I` (plus the jitter that was needed).
    pub fn chol_factor(&self) -> &Matrix {
        &self.chol
    }

    /// `(K + σ²I)⁻¹ y`.
    pub fn solved_obs(&self) -> &[f64] {
        &self.solved_obs
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// `log p(y | X)` for the fitted hyperparameters.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.dataset.len() as f64;
        let fit = dot(self.dataset.observations(), &self.solved_obs);
        let logdet: f64 = (0..self.chol.rows()).map(|i| log(self.chol[(i, i)])).sum();
        -0.5 * fit - logdet - 0.5 * n * log(2.0 * core::f64::consts::PI)
    }

    /// Posterior mean and variance at `x`.
    pub fn posterior_mean_var(&self, x: &[f64]) -> Result<(f64, f64)> {
        let p = self.project(x)?;
        Ok((p.mean, p.variance(self.kernel.diag())))
    }

    pub fn project(&self, x: &[f64]) -> Result<Projection> {
        self.check_dim(x)?;
        let mut k = vec![0.0; self.dataset.len()];
        self.kernel.vector_into(self.dataset.points(), x, &mut k);
        let mean = dot(&k, &self.solved_obs);
        linalg::solve_lower_in_place(&self.chol, &mut k);
        Ok(Projection {
            point: x.to_vec(),
            mean,
            whitened: k,
        })
    }

    /// Projects many points with one blocked triangular solve.
    pub fn project_many(&self, xs: &[Vec<f64>]) -> Result<Vec<Projection>> {
        for x in xs {
            self.check_dim(x)?;
        }
        let n = self.dataset.len();
        if n == 0 {
            return Ok(xs
                .iter()
                .map(|x| Projection {
                    point: x.clone(),
                    mean: 0.0,
                    whitened: Vec::new(),
                })
                .collect());
        }
        let (means, kmat) = self.whitened_cross(xs);
        Ok(xs
            .iter()
            .enumerate()
            .map(|(j, x)| Projection {
                point: x.clone(),
                mean: means[j],
                whitened: kmat.column(j),
            })
            .collect())
    }

    /// Posterior means at `xs` and `L⁻¹ K(X, xs)` (one column per point).
    fn whitened_cross(&self, xs: &[Vec<f64>]) -> (Vec<f64>, Matrix) {
        let mut kmat = self.kernel.cross(self.dataset.points(), xs);
        let mut means = vec![0.0; xs.len()];
        for (i, &a) in self.solved_obs.iter().enumerate() {
            for (m, &k) in means.iter_mut().zip(kmat.row(i)) {
                *m += a * k;
            }
        }
        linalg::solve_lower_matrix_in_place(&self.chol, &mut kmat);
        (means, kmat)
    }

    /// Statistics of `f(p) − f(o)` from two projections.
    pub fn pair_stats(&self, p: &Projection, o: &Projection) -> PairStats {
        let prior = 2.0 * self.kernel.diag() - 2.0 * self.kernel.eval(&p.point, &o.point);
        let mut explained = 0.0;
        for (a, b) in p.whitened.iter().zip(&o.whitened) {
            let d = a - b;
            explained += d * d;
        }
        PairStats {
            mean_diff: p.mean - o.mean,
            var_diff: (prior - explained).max(0.0),
        }
    }

    /// Mean and variance of `f(x_p) − f(x_o)`; a single cached factor is
    /// reused and no inverse is ever formed.
    pub fn pair_diff_stats(&self, x_p: &[f64], x_o: &[f64]) -> Result<PairStats> {
        let p = self.project(x_p)?;
        let o = self.project(x_o)?;
        Ok(self.pair_stats(&p, &o))
    }

    /// Posterior mean vector and covariance matrix over `candidates`.
    pub fn joint(&self, candidates: &[Vec<f64>]) -> Result<(Vec<f64>, Matrix)> {
        for x in candidates {
            self.check_dim(x)?;
        }
        let mut cov = self.kernel.gram(candidates);
        if self.dataset.is_empty() {
            return Ok((vec![0.0; candidates.len()], cov));
        }
        let (means, w) = self.whitened_cross(candidates);
        let explained = w.gram();
        for (c, e) in cov.as_mut_slice().iter_mut().zip(explained.as_slice()) {
            *c -= e;
        }
        Ok((means, cov))
    }

    /// One draw from the joint posterior over `candidates`.
    pub fn sample_joint<R: Rng + ?Sized>(&self, candidates: &[Vec<f64>], rng: &mut R) -> Result<Vec<f64>> {
        Ok(JointSampler::new(self, candidates)?.draw(rng))
    }
}

/// Factorized joint posterior over a fixed candidate set, for repeated draws.
#[derive(Clone, Debug)]
pub struct JointSampler {
    mean: Vec<f64>,
    factor: Matrix,
    jitter: f64,
}

impl JointSampler {
    pub fn new(post: &GpPosterior, candidates: &[Vec<f64>]) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::InvalidArgument("candidate set is empty"));
        }
        if candidates.len() > MAX_JOINT_CANDIDATES {
            return Err(Error::TooManyCandidates {
                size: candidates.len(),
                cap: MAX_JOINT_CANDIDATES,
            });
        }
        let (mean, cov) = post.joint(candidates)?;
        let (factor, jitter) = linalg::cholesky_jittered(&cov, post.kernel().outputscale)?;
        Ok(Self { mean, factor, jitter })
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = (0..self.len()).map(|_| StandardNormal.sample(rng)).collect();
        self.mean
            .iter()
            .enumerate()
            .map(|(i, m)| m + dot(&self.factor.row(i)[..=i], &z[..=i]))
            .collect()
    }

    /// Index of the largest value in each of `n` independent draws, in draw
    /// order. Normals are consumed draw by draw, exactly as repeated calls
    /// to [`draw`](Self::draw) would.
    pub fn argmax_draws<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<usize> {
        const BATCH: usize = 256;
        let m = self.len();
        let mut out = Vec::with_capacity(n);
        let mut z = Matrix::zeros(m, BATCH.min(n.max(1)));
        let mut done = 0;
        while done < n {
            let b = BATCH.min(n - done);
            if z.cols() != b {
                z = Matrix::zeros(m, b);
            }
            for j in 0..b {
                for i in 0..m {
                    z[(i, j)] = StandardNormal.sample(rng);
                }
            }
            let y = linalg::lower_matmul(&self.factor, &z);
            for j in 0..b {
                let mut best = 0;
                let mut best_val = f64::NEG_INFINITY;
                for i in 0..m {
                    let v = self.mean[i] + y[(i, j)];
                    if v > best_val {
                        best_val = v;
                        best = i;
                    }
                }
                out.push(best);
            }
            done += b;
        }
        out
    }
}
