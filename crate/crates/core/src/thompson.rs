//! Exact Thompson sampling over finite candidate sets.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::gp::{GpPosterior, JointSampler};

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Argmax of one joint posterior draw over `candidates`.
pub fn exact_ts_select<R: Rng + ?Sized>(post: &GpPosterior, candidates: &[Vec<f64>], rng: &mut R) -> Result<usize> {
    Ok(argmax(&post.sample_joint(candidates, rng)?))
}

/// Argmaxes of `m` independent joint draws over the same candidates.
pub fn batch_ts_select<R: Rng + ?Sized>(post: &GpPosterior, candidates: &[Vec<f64>], m: usize, rng: &mut R) -> Result<Vec<usize>> {
    let sampler = JointSampler::new(post, candidates)?;
    Ok(sampler.argmax_draws(m, rng))
}

/// Empirical Thompson-sampling selection frequencies over `n_samples`
/// independent draws.
pub fn ts_distribution_mc<R: Rng + ?Sized>(post: &GpPosterior, candidates: &[Vec<f64>], n_samples: usize, rng: &mut R) -> Result<Vec<f64>> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample"));
    }
    let sampler = JointSampler::new(post, candidates)?;
    let mut counts = vec![0u64; candidates.len()];
    const CHUNK: usize = 1 << 14;
    let mut left = n_samples;
    while left > 0 {
        let b = left.min(CHUNK);
        for i in sampler.argmax_draws(b, rng) {
            counts[i] += 1;
        }
        left -= b;
    }
    Ok(counts.into_iter().map(|c| c as f64 / n_samples as f64).collect())
}

/// `½ Σ |p_i − q_i|`.
pub fn tv_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Indices of the `k` largest entries, largest first; ties go to the lower
/// index.
pub fn top_k(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Number of indices shared by the top-`k` sets of `p` and `q`.
pub fn top_k_overlap(p: &[f64], q: &[f64], k: usize) -> usize {
    let a = top_k(p, k);
    let b = top_k(q, k);
    a.iter().filter(|i| b.contains(i)).count()
}
