//! Type-II maximum likelihood for kernel hyperparameters.
//!
//! Projected gradient ascent on log-transformed lengthscales, outputscale and
//! noise variance. A step is kept only if it raises the log marginal
//! likelihood, so the result is never worse than the starting point.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::gp::{Dataset, GpPosterior};
use crate::kernel::{Kernel, KernelFamily};
use crate::linalg::{self, dot};
use crate::math::{exp, log};

pub const LENGTHSCALE_BOUNDS: (f64, f64) = (5e-3, 10.0);
pub const OUTPUTSCALE_BOUNDS: (f64, f64) = (5e-2, 20.0);
pub const NOISE_BOUNDS: (f64, f64) = (1e-6, 1e-1);

const INITIAL_LENGTHSCALE: f64 = 0.5;
const INITIAL_OUTPUTSCALE: f64 = 1.0;
const INITIAL_STEP: f64 = 0.25;
const MAX_STEP: f64 = 1.0;
const MIN_STEP: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct HyperFit {
    pub kernel: Kernel,
    pub noise_variance: f64,
    pub log_marginal_likelihood: f64,
    /// Number of likelihood evaluations after the initial one.
    pub iterations: usize,
}

/// Fits an ARD kernel of `family` starting from lengthscale 0.5,
/// outputscale 1 and the dataset's noise variance.
pub fn fit_hyperparams(dataset: &Dataset, family: KernelFamily, iteration_cap: usize) -> Result<HyperFit> {
    let dim = dataset.dim().ok_or(Error::EmptyDataset)?;
    let init = Kernel::ard(family, dim, INITIAL_LENGTHSCALE, INITIAL_OUTPUTSCALE)?;
    fit_hyperparams_from(dataset, &init, dataset.noise_variance(), iteration_cap)
}

/// Same as [`fit_hyperparams`] with an explicit starting point. The start is
/// projected into the bounds first.
pub fn fit_hyperparams_from(dataset: &Dataset, init: &Kernel, init_noise: f64, iteration_cap: usize) -> Result<HyperFit> {
    if dataset.len() < 2 {
        return Err(Error::InvalidArgument("hyperparameter fitting needs at least two points"));
    }
    let dim = dataset.dim().unwrap_or(0);
    if !init.accepts_dim(dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: init.lengthscales.len(),
        });
    }
    let n_ls = init.lengthscales.len();
    let mut bounds = Vec::with_capacity(n_ls + 2);
    bounds.extend(core::iter::repeat_n(LENGTHSCALE_BOUNDS, n_ls));
    bounds.push(OUTPUTSCALE_BOUNDS);
    bounds.push(NOISE_BOUNDS);
    let bounds: Vec<(f64, f64)> = bounds.into_iter().map(|(lo, hi)| (log(lo), log(hi))).collect();

    let clamp = |v: f64, (lo, hi): (f64, f64)| v.clamp(lo, hi);
    let family = init.family;
    let mut kernel = Kernel {
        family,
        lengthscales: init.lengthscales.iter().map(|&l| clamp(l, LENGTHSCALE_BOUNDS)).collect(),
        outputscale: clamp(init.outputscale, OUTPUTSCALE_BOUNDS),
    };
    let mut noise_variance = clamp(init_noise, NOISE_BOUNDS);

    let mut theta: Vec<f64> = kernel.lengthscales.iter().map(|&l| log(l)).collect();
    theta.push(log(kernel.outputscale));
    theta.push(log(noise_variance));
    project(&mut theta, &bounds);

    let Some((mut best_lml, mut grad)) = evaluate(dataset, family, &theta) else {
        // The starting point itself cannot be factorized; hand it back.
        return Ok(HyperFit {
            kernel,
            noise_variance,
            log_marginal_likelihood: f64::NEG_INFINITY,
            iterations: 0,
        });
    };

    let mut step = INITIAL_STEP;
    let mut iterations = 0;
    while iterations < iteration_cap && step > MIN_STEP {
        iterations += 1;
        let scale = free_gradient_norm(&theta, &grad, &bounds);
        if scale == 0.0 {
            break;
        }
        let mut cand: Vec<f64> = theta.iter().zip(&grad).map(|(t, g)| t + step * g / scale).collect();
        project(&mut cand, &bounds);
        let improved = posterior(dataset, family, &cand)
            .filter(|(_, lml)| *lml > best_lml)
            .and_then(|(post, lml)| Some((lml, gradient(&post)?)));
        match improved {
            Some((lml, g)) => {
                (kernel, noise_variance) = unpack(family, &cand);
                theta = cand;
                best_lml = lml;
                grad = g;
                step = (step * 1.5).min(MAX_STEP);
            }
            None => step *= 0.5,
        }
    }

    Ok(HyperFit {
        kernel,
        noise_variance,
        log_marginal_likelihood: best_lml,
        iterations,
    })
}

fn project(theta: &mut [f64], bounds: &[(f64, f64)]) {
    for (t, (lo, hi)) in theta.iter_mut().zip(bounds) {
        *t = t.clamp(*lo, *hi);
    }
}

/// Max-norm of the gradient over coordinates that are free to move.
fn free_gradient_norm(theta: &[f64], grad: &[f64], bounds: &[(f64, f64)]) -> f64 {
    let mut m: f64 = 0.0;
    for ((t, g), (lo, hi)) in theta.iter().zip(grad).zip(bounds) {
        let pinned = (*g > 0.0 && *t >= *hi) || (*g < 0.0 && *t <= *lo);
        if !pinned {
            m = m.max(g.abs());
        }
    }
    m
}

fn unpack(family: KernelFamily, theta: &[f64]) -> (Kernel, f64) {
    let k = theta.len();
    let kernel = Kernel {
        family,
        lengthscales: theta[..k - 2].iter().map(|&t| exp(t)).collect(),
        outputscale: exp(theta[k - 2]),
    };
    (kernel, exp(theta[k - 1]))
}

/// Log marginal likelihood and its gradient in log-parameter space, or
/// `None` if the covariance cannot be factorized.
fn posterior(dataset: &Dataset, family: KernelFamily, theta: &[f64]) -> Option<(GpPosterior, f64)> {
    let (kernel, noise) = unpack(family, theta);
    let ds = dataset.clone().with_noise_variance(noise).ok()?;
    let post = GpPosterior::fit(ds, kernel).ok()?;
    let lml = post.log_marginal_likelihood();
    lml.is_finite().then_some((post, lml))
}

/// Gradient of the log marginal likelihood in log-parameter space.
fn gradient(post: &GpPosterior) -> Option<Vec<f64>> {
    // W = α αᵀ − (K + σ²I)⁻¹; dLML/dθ = ½ tr(W ∂K/∂θ).
    let alpha = post.solved_obs();
    let mut w = linalg::cholesky_inverse(post.chol_factor());
    let n = alpha.len();
    for i in 0..n {
        for j in 0..n {
            w[(i, j)] = alpha[i] * alpha[j] - w[(i, j)];
        }
    }
    let ds = post.dataset();
    let mut grad: Vec<f64> = post
        .kernel()
        .contract_log_lengthscale_grad(ds.points(), &w)
        .into_iter()
        .map(|g| 0.5 * g)
        .collect();
    // tr(W K̃) = yᵀα − n for the factorized K̃ = K_f + (σ² + jitter) I
    let trace: f64 = (0..n).map(|i| w[(i, i)]).sum();
    let shift = ds.noise_variance() + post.jitter();
    let tr_wk = dot(ds.observations(), alpha) - n as f64;
    grad.push(0.5 * (tr_wk - shift * trace));
    grad.push(0.5 * ds.noise_variance() * trace);
    grad.iter().all(|g| g.is_finite()).then_some(grad)
}

fn evaluate(dataset: &Dataset, family: KernelFamily, theta: &[f64]) -> Option<(f64, Vec<f64>)> {
    let (post, lml) = posterior(dataset, family, theta)?;
    Some((lml, gradient(&post)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lml_at(ds: &Dataset, kernel: &Kernel, noise: f64) -> f64 {
        GpPosterior::fit(ds.clone().with_noise_variance(noise).unwrap(), kernel.clone())
            .unwrap()
            .log_marginal_likelihood()
    }

    fn draw_from_prior(n: usize, lengthscale: f64, rng: &mut ChaCha8Rng) -> Dataset {
        let pts: Vec<Vec<f64>> = (0..n).map(|i| vec![(i as f64 + rng.random::<f64>()) / n as f64]).collect();
        let k = Kernel::isotropic(KernelFamily::SquaredExponential, lengthscale, 1.0).unwrap();
        let prior = GpPosterior::prior(k, 1).unwrap();
        let mut y = prior.sample_joint(&pts, rng).unwrap();
        for v in &mut y {
            *v += 1e-2 * rng.sample::<f64, _>(rand_distr::StandardNormal);
        }
        Dataset::new(pts, y, 1e-3).unwrap()
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts: Vec<Vec<f64>> = (0..25).map(|_| vec![rng.random(), rng.random()]).collect();
        let y: Vec<f64> = pts.iter().map(|p| (4.0 * p[0]).sin() + p[1] * p[1]).collect();
        let ds = Dataset::new(pts, y, 1e-2).unwrap();
        for family in [KernelFamily::SquaredExponential, KernelFamily::Matern52] {
            let theta = vec![log(0.3), log(0.7), log(1.3), log(1e-2)];
            let (_, g) = evaluate(&ds, family, &theta).unwrap();
            for i in 0..theta.len() {
                let h = 1e-5;
                let mut up = theta.clone();
                up[i] += h;
                let mut dn = theta.clone();
                dn[i] -= h;
                let fd = (evaluate(&ds, family, &up).unwrap().0 - evaluate(&ds, family, &dn).unwrap().0) / (2.0 * h);
                assert!((fd - g[i]).abs() < 1e-5 * (1.0 + fd.abs()), "{family:?} {i}: {fd} vs {}", g[i]);
            }
        }
    }

    #[test]
    fn zero_cap_returns_initial_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ds = draw_from_prior(20, 0.2, &mut rng);
        let init = Kernel::isotropic(KernelFamily::Matern52, 0.4, 2.0).unwrap();
        let fit = fit_hyperparams_from(&ds, &init, 1e-3, 0).unwrap();
        assert_eq!(fit.kernel, init);
        assert_eq!(fit.noise_variance, 1e-3);
        assert_eq!(fit.iterations, 0);
    }

    #[test]
    fn never_decreases_likelihood() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for cap in [1, 5, 50] {
            let ds = draw_from_prior(30, 0.1, &mut rng);
            let init = Kernel::ard(KernelFamily::Matern52, 1, 0.5, 1.0).unwrap();
            let before = lml_at(&ds, &init, 1e-3);
            let fit = fit_hyperparams(&ds, KernelFamily::Matern52, cap).unwrap();
            assert!(fit.log_marginal_likelihood >= before);
            assert!(fit.iterations <= cap);
            assert!((lml_at(&ds, &fit.kernel, fit.noise_variance) - fit.log_marginal_likelihood).abs() < 1e-9);
        }
    }

    #[test]
    fn recovers_generating_lengthscale() {
        let truth = 0.15;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ds = draw_from_prior(50, truth, &mut rng);
        let fit = fit_hyperparams(&ds, KernelFamily::SquaredExponential, 200).unwrap();
        let l = fit.kernel.lengthscales[0];
        assert!(l > truth / 2.0 && l < truth * 2.0, "fitted lengthscale {l}");
    }

    #[test]
    fn constant_data_pushes_outputscale_down() {
        let pts: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 / 9.0]).collect();
        let ds = Dataset::new(pts, vec![0.0; 10], 1e-6).unwrap();
        let fit = fit_hyperparams(&ds, KernelFamily::Matern52, 200).unwrap();
        assert!((fit.kernel.outputscale - OUTPUTSCALE_BOUNDS.0).abs() < 1e-9);
        // the profile in the outputscale is monotone for y = 0
        let at = |s| lml_at(&ds, &Kernel::new(KernelFamily::Matern52, fit.kernel.lengthscales.clone(), s).unwrap(), fit.noise_variance);
        assert!(at(0.05) > at(0.1) && at(0.1) > at(1.0));
    }

    #[test]
    fn results_respect_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<Vec<f64>> = (0..15).map(|_| vec![rng.random(), rng.random(), rng.random()]).collect();
        let y: Vec<f64> = (0..15).map(|_| rng.random::<f64>() * 10.0).collect();
        let ds = Dataset::new(pts, y, 1e-3).unwrap();
        let fit = fit_hyperparams(&ds, KernelFamily::Matern52, 100).unwrap();
        for &l in &fit.kernel.lengthscales {
            assert!((LENGTHSCALE_BOUNDS.0 - 1e-12..=LENGTHSCALE_BOUNDS.1 + 1e-12).contains(&l));
        }
        assert!((OUTPUTSCALE_BOUNDS.0 - 1e-12..=OUTPUTSCALE_BOUNDS.1 + 1e-12).contains(&fit.kernel.outputscale));
        assert!((NOISE_BOUNDS.0 - 1e-15..=NOISE_BOUNDS.1 + 1e-12).contains(&fit.noise_variance));
    }

    #[test]
    fn needs_two_points() {
        let ds = Dataset::new(vec![vec![0.5]], vec![1.0], 1e-3).unwrap();
        assert!(fit_hyperparams(&ds, KernelFamily::Matern52, 10).is_err());
    }
}
