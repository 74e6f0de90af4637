//! Metropolis-Hastings and Langevin transitions that move candidate points
//! toward regions the posterior believes are better.
//!
//! Both routines only ever compare two points through [`PairStats`]: the
//! target is the probability that a proposal beats the current state.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::gp::{GpPosterior, PairStats, Projection, DEFAULT_DEGENERACY_EPS};
use crate::math::sqrt;
use crate::space::Bounds;

/// Largest magnitude allowed for a gradient component.
pub const GRAD_CLIP: f64 = 1e3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum BoundaryPolicy {
    #[default]
    Reflect,
    Clip,
}

impl BoundaryPolicy {
    /// Maps `x` back into `bounds` coordinate by coordinate.
    pub fn apply(self, x: &mut [f64], bounds: &Bounds) {
        for ((v, &lo), &hi) in x.iter_mut().zip(bounds.lower()).zip(bounds.upper()) {
            *v = match self {
                BoundaryPolicy::Clip => v.clamp(lo, hi),
                BoundaryPolicy::Reflect => reflect(*v, lo, hi),
            };
        }
    }
}

fn reflect(v: f64, lo: f64, hi: f64) -> f64 {
    if (lo..=hi).contains(&v) {
        return v;
    }
    if !v.is_finite() {
        return v.clamp(lo, hi);
    }
    let w = hi - lo;
    let period = 2.0 * w;
    let mut y = (v - lo) % period;
    if y < 0.0 {
        y += period;
    }
    if y > w {
        y = period - y;
    }
    (lo + y).clamp(lo, hi)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MhParams {
    pub proposal_sigma: f64,
    pub n_transitions: usize,
    pub boundary_policy: BoundaryPolicy,
}

impl MhParams {
    pub const DEFAULT_SIGMA: f64 = 0.05;

    /// Defaults for a `dim`-dimensional problem: σ = 0.05, N = dim.
    pub fn for_dim(dim: usize) -> Self {
        Self {
            proposal_sigma: Self::DEFAULT_SIGMA,
            n_transitions: dim.max(1),
            boundary_policy: BoundaryPolicy::Reflect,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.proposal_sigma > 0.0) || !self.proposal_sigma.is_finite() {
            return Err(Error::InvalidArgument("proposal sigma must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LdParams {
    pub step_eps: f64,
    pub fd_step: f64,
    pub n_transitions: usize,
    pub boundary_policy: BoundaryPolicy,
}

impl LdParams {
    pub const DEFAULT_EPS: f64 = 1e-4;
    pub const DEFAULT_H: f64 = 1e-4;

    pub fn for_dim(dim: usize) -> Self {
        Self {
            step_eps: Self::DEFAULT_EPS,
            fd_step: Self::DEFAULT_H,
            n_transitions: dim.max(1),
            boundary_policy: BoundaryPolicy::Reflect,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_eps >= 0.0) || !self.step_eps.is_finite() {
            return Err(Error::InvalidArgument("langevin step must be non-negative"));
        }
        if !(self.fd_step > 0.0) || !self.fd_step.is_finite() {
            return Err(Error::InvalidArgument("finite-difference step must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Routine {
    Mh(MhParams),
    Ld(LdParams),
}

impl Routine {
    pub fn n_transitions(&self) -> usize {
        match self {
            Routine::Mh(p) => p.n_transitions,
            Routine::Ld(p) => p.n_transitions,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Routine::Mh(p) => p.validate(),
            Routine::Ld(p) => p.validate(),
        }
    }
}

/// The `m` points being transitioned in one round.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ChainBatch {
    pub points: Vec<Vec<f64>>,
    pub accept_count: u64,
    pub proposal_count: u64,
}

impl ChainBatch {
    pub fn new(points: Vec<Vec<f64>>) -> Self {
        Self {
            points,
            accept_count: 0,
            proposal_count: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn acceptance_rate(&self) -> Option<f64> {
        (self.proposal_count > 0).then(|| self.accept_count as f64 / self.proposal_count as f64)
    }
}

/// `min{1, p / (1 − p)}`.
pub fn mh_acceptance(p: f64) -> f64 {
    if p >= 0.5 {
        1.0
    } else if p > 0.0 {
        p / (1.0 - p)
    } else {
        0.0
    }
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

fn unit_cube(dim: usize) -> Bounds {
    Bounds::uniform(dim, 0.0, 1.0).expect("unit cube is a valid box")
}

fn check_in(x: &[f64], bounds: &Bounds) -> Result<()> {
    if x.len() != bounds.dim() {
        return Err(Error::DimensionMismatch {
            expected: bounds.dim(),
            got: x.len(),
        });
    }
    if !bounds.contains(x) {
        return Err(Error::InvalidArgument("chain state outside its domain"));
    }
    Ok(())
}

fn propose<R: Rng + ?Sized>(x: &[f64], params: &MhParams, bounds: &Bounds, rng: &mut R) -> Vec<f64> {
    let mut y: Vec<f64> = x
        .iter()
        .map(|v| v + params.proposal_sigma * normal(rng))
        .collect();
    params.boundary_policy.apply(&mut y, bounds);
    y
}

/// One Metropolis-Hastings transition in the unit cube.
pub fn mh_step<R: Rng + ?Sized>(post: &GpPosterior, x_o: &[f64], params: &MhParams, rng: &mut R) -> Result<(Vec<f64>, bool)> {
    let bounds = unit_cube(post.dim());
    check_in(x_o, &bounds)?;
    let x_p = propose(x_o, params, &bounds, rng);
    let p = post.pair_diff_stats(&x_p, x_o)?.win_prob(DEFAULT_DEGENERACY_EPS);
    let u: f64 = rng.random();
    Ok(if u < mh_acceptance(p) { (x_p, true) } else { (x_o.to_vec(), false) })
}

/// Point used for the finite difference along axis `i`, and the sign that
/// turns the difference into a forward estimate.
fn fd_point(x: &[f64], i: usize, h: f64, upper: f64) -> (Vec<f64>, f64) {
    let mut y = x.to_vec();
    if x[i] + h <= upper {
        y[i] += h;
        (y, 1.0)
    } else {
        y[i] -= h;
        (y, -1.0)
    }
}

fn grad_component(stats: &PairStats, h: f64, sign: f64) -> f64 {
    let p = stats.win_prob(DEFAULT_DEGENERACY_EPS);
    let raw = if p >= 1.0 {
        GRAD_CLIP
    } else if p <= 0.0 {
        -GRAD_CLIP
    } else {
        (p / (1.0 - p) - 1.0) / h
    };
    (sign * raw).clamp(-GRAD_CLIP, GRAD_CLIP)
}

/// Finite-difference estimate of `∇ log p` at `x`: component `i` is
/// `(1/h)(p_i/(1 − p_i) − 1)` with `p_i` the probability that `x + h·e_i`
/// beats `x`.
pub fn grad_log_p(post: &GpPosterior, x: &[f64], h: f64) -> Result<Vec<f64>> {
    let bounds = unit_cube(post.dim());
    check_in(x, &bounds)?;
    if !(h > 0.0) {
        return Err(Error::InvalidArgument("finite-difference step must be positive"));
    }
    let mut pts = Vec::with_capacity(x.len() + 1);
    let mut signs = Vec::with_capacity(x.len());
    pts.push(x.to_vec());
    for i in 0..x.len() {
        let (y, s) = fd_point(x, i, h, bounds.upper()[i]);
        pts.push(y);
        signs.push(s);
    }
    let proj = post.project_many(&pts)?;
    Ok((0..x.len())
        .map(|i| grad_component(&post.pair_stats(&proj[i + 1], &proj[0]), h, signs[i]))
        .collect())
}

/// One unadjusted Langevin step in the unit cube.
pub fn ld_step<R: Rng + ?Sized>(post: &GpPosterior, x: &[f64], params: &LdParams, rng: &mut R) -> Result<Vec<f64>> {
    params.validate()?;
    let g = grad_log_p(post, x, params.fd_step)?;
    let noise = sqrt(2.0 * params.step_eps);
    let mut y: Vec<f64> = x
        .iter()
        .zip(&g)
        .map(|(v, gi)| v + params.step_eps * gi + noise * normal(rng))
        .collect();
    params.boundary_policy.apply(&mut y, &unit_cube(post.dim()));
    Ok(y)
}

/// Applies `routine` to every chain of `batch` inside the unit cube. Chain
/// `k` draws only from `rngs[k]`.
pub fn run_transitions<R: Rng>(post: &GpPosterior, batch: ChainBatch, routine: &Routine, rngs: &mut [R]) -> Result<ChainBatch> {
    run_transitions_in(post, batch, routine, &unit_cube(post.dim()), rngs)
}

/// Like [`run_transitions`] with the chains confined to `bounds`.
///
/// All chains advance in lockstep so the posterior work for a step is done
/// in one blocked solve; the result is identical to running each chain on
/// its own.
pub fn run_transitions_in<R: Rng>(
    post: &GpPosterior,
    mut batch: ChainBatch,
    routine: &Routine,
    bounds: &Bounds,
    rngs: &mut [R],
) -> Result<ChainBatch> {
    routine.validate()?;
    if batch.is_empty() {
        return Err(Error::InvalidArgument("chain batch is empty"));
    }
    if rngs.len() != batch.len() {
        return Err(Error::LengthMismatch {
            left: batch.len(),
            right: rngs.len(),
        });
    }
    if bounds.dim() != post.dim() {
        return Err(Error::DimensionMismatch {
            expected: post.dim(),
            got: bounds.dim(),
        });
    }
    for x in &batch.points {
        check_in(x, bounds)?;
    }
    match routine {
        Routine::Mh(p) => mh_chains(post, &mut batch, p, bounds, rngs)?,
        Routine::Ld(p) => ld_chains(post, &mut batch, p, bounds, rngs)?,
    }
    Ok(batch)
}

fn mh_chains<R: Rng>(post: &GpPosterior, batch: &mut ChainBatch, params: &MhParams, bounds: &Bounds, rngs: &mut [R]) -> Result<()> {
    if params.n_transitions == 0 {
        return Ok(());
    }
    let mut current: Vec<Projection> = post.project_many(&batch.points)?;
    for _ in 0..params.n_transitions {
        let proposals: Vec<Vec<f64>> = current
            .iter()
            .zip(rngs.iter_mut())
            .map(|(c, rng)| propose(&c.point, params, bounds, rng))
            .collect();
        let proj = post.project_many(&proposals)?;
        for ((cur, prop), rng) in current.iter_mut().zip(proj).zip(rngs.iter_mut()) {
            let p = post.pair_stats(&prop, cur).win_prob(DEFAULT_DEGENERACY_EPS);
            let u: f64 = rng.random();
            batch.proposal_count += 1;
            if u < mh_acceptance(p) {
                batch.accept_count += 1;
                *cur = prop;
            }
        }
    }
    batch.points = current.into_iter().map(|c| c.point).collect();
    Ok(())
}

fn ld_chains<R: Rng>(post: &GpPosterior, batch: &mut ChainBatch, params: &LdParams, bounds: &Bounds, rngs: &mut [R]) -> Result<()> {
    let d = post.dim();
    let h = params.fd_step;
    let noise = sqrt(2.0 * params.step_eps);
    for _ in 0..params.n_transitions {
        let mut pts = Vec::with_capacity(batch.len() * (d + 1));
        let mut signs = Vec::with_capacity(batch.len() * d);
        for x in &batch.points {
            pts.push(x.clone());
            for i in 0..d {
                let (y, s) = fd_point(x, i, h, bounds.upper()[i]);
                pts.push(y);
                signs.push(s);
            }
        }
        let proj = post.project_many(&pts)?;
        for (k, (x, rng)) in batch.points.iter_mut().zip(rngs.iter_mut()).enumerate() {
            let base = &proj[k * (d + 1)];
            for i in 0..d {
                let g = grad_component(&post.pair_stats(&proj[k * (d + 1) + 1 + i], base), h, signs[k * d + i]);
                let z: f64 = StandardNormal.sample(rng);
                x[i] += params.step_eps * g + noise * z;
            }
            params.boundary_policy.apply(x, bounds);
        }
    }
    Ok(())
}

/// A regular lattice given by per-axis coordinates. Cells are numbered
/// row-major with the last axis varying fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    axes: Vec<Vec<f64>>,
}

impl Grid {
    /// Axis coordinates must be strictly increasing.
    pub fn new(axes: Vec<Vec<f64>>) -> Result<Self> {
        if axes.is_empty() || axes.iter().any(Vec::is_empty) {
            return Err(Error::InvalidArgument("grid needs at least one coordinate per axis"));
        }
        if axes.iter().any(|a| a.windows(2).any(|w| !(w[0] < w[1]))) {
            return Err(Error::InvalidArgument("grid axes must be strictly increasing"));
        }
        Ok(Self { axes })
    }

    /// `per_axis` cell centres on each side of `[0, 1]^dim`.
    pub fn cell_centres(dim: usize, per_axis: usize) -> Result<Self> {
        let axis: Vec<f64> = (0..per_axis).map(|i| (i as f64 + 0.5) / per_axis as f64).collect();
        Self::new(vec![axis; dim])
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, mut cell: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        for (a, axis) in self.axes.iter().enumerate().rev() {
            x[a] = axis[cell % axis.len()];
            cell /= axis.len();
        }
        x
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|c| self.point(c)).collect()
    }

    /// Index of the lattice point nearest to `x` (per axis, ties to the
    /// lower coordinate).
    pub fn nearest(&self, x: &[f64]) -> usize {
        let mut cell = 0;
        for (axis, &v) in self.axes.iter().zip(x) {
            let j = axis.partition_point(|&a| a < v);
            let idx = if j == 0 {
                0
            } else if j == axis.len() {
                axis.len() - 1
            } else if v - axis[j - 1] <= axis[j] - v {
                j - 1
            } else {
                j
            };
            cell = cell * axis.len() + idx;
        }
        cell
    }

    /// Bounding box of the lattice points.
    pub fn bounds(&self) -> Result<Bounds> {
        let lo: Vec<f64> = self.axes.iter().map(|a| a[0]).collect();
        let hi: Vec<f64> = self.axes.iter().map(|a| a[a.len() - 1]).collect();
        Bounds::new(lo, hi)
    }
}

/// Visit counts of one long chain, split into the two halves of the
/// post-burn-in run.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainHistogram {
    pub first_half: Vec<u64>,
    pub second_half: Vec<u64>,
    pub accept_count: u64,
    pub proposal_count: u64,
}

impl ChainHistogram {
    fn normalized(counts: &[u64]) -> Vec<f64> {
        let total: u64 = counts.iter().sum();
        counts.iter().map(|&c| c as f64 / total.max(1) as f64).collect()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        let all: Vec<u64> = self.first_half.iter().zip(&self.second_half).map(|(a, b)| a + b).collect();
        Self::normalized(&all)
    }

    pub fn first_frequencies(&self) -> Vec<f64> {
        Self::normalized(&self.first_half)
    }

    pub fn second_frequencies(&self) -> Vec<f64> {
        Self::normalized(&self.second_half)
    }

    pub fn split_half_tv(&self) -> f64 {
        crate::thompson::tv_distance(&self.first_frequencies(), &self.second_frequencies()).unwrap_or(1.0)
    }
}

/// Runs one chain of `n_steps` transitions on `grid`, discards the first
/// `burn_in` states and histograms the rest.
///
/// For MH the proposal is snapped to the nearest lattice point, so the chain
/// lives on the grid. For LD the chain moves in the continuous box spanned
/// by the grid and each state is binned to its nearest cell. The start cell
/// is drawn uniformly.
pub fn stationary_diagnostics<R: Rng + ?Sized>(
    post: &GpPosterior,
    grid: &Grid,
    routine: &Routine,
    n_steps: u64,
    burn_in: u64,
    rng: &mut R,
) -> Result<ChainHistogram> {
    routine.validate()?;
    if grid.dim() != post.dim() {
        return Err(Error::DimensionMismatch {
            expected: post.dim(),
            got: grid.dim(),
        });
    }
    if n_steps <= burn_in {
        return Err(Error::InvalidArgument("n_steps must exceed burn_in"));
    }
    let cells = grid.len();
    let kept = n_steps - burn_in;
    let half = burn_in + kept / 2;
    let mut hist = ChainHistogram {
        first_half: vec![0; cells],
        second_half: vec![0; cells],
        accept_count: 0,
        proposal_count: 0,
    };
    let record = |step: u64, cell: usize, hist: &mut ChainHistogram| {
        if step >= half {
            hist.second_half[cell] += 1;
        } else if step >= burn_in {
            hist.first_half[cell] += 1;
        }
    };
    let start = rng.random_range(0..cells);

    match routine {
        Routine::Mh(params) => {
            let proj = post.project_many(&grid.points())?;
            let bounds = unit_cube(post.dim());
            let mut cur = start;
            for step in 0..n_steps {
                let y = propose(&proj[cur].point, params, &bounds, rng);
                let next = grid.nearest(&y);
                let p = post.pair_stats(&proj[next], &proj[cur]).win_prob(DEFAULT_DEGENERACY_EPS);
                let u: f64 = rng.random();
                hist.proposal_count += 1;
                if u < mh_acceptance(p) {
                    hist.accept_count += 1;
                    cur = next;
                }
                record(step, cur, &mut hist);
            }
        }
        Routine::Ld(params) => {
            let bounds = grid.bounds()?;
            let mut x = grid.point(start);
            let noise = sqrt(2.0 * params.step_eps);
            let d = post.dim();
            let mut pts = Vec::with_capacity(d + 1);
            let mut signs = vec![0.0; d];
            for step in 0..n_steps {
                pts.clear();
                pts.push(x.clone());
                for (i, s) in signs.iter_mut().enumerate() {
                    let (y, sg) = fd_point(&x, i, params.fd_step, bounds.upper()[i]);
                    pts.push(y);
                    *s = sg;
                }
                let proj = post.project_many(&pts)?;
                for i in 0..d {
                    let g = grad_component(&post.pair_stats(&proj[i + 1], &proj[0]), params.fd_step, signs[i]);
                    let z: f64 = StandardNormal.sample(rng);
                    x[i] += params.step_eps * g + noise * z;
                }
                params.boundary_policy.apply(&mut x, &bounds);
                record(step, grid.nearest(&x), &mut hist);
            }
        }
    }
    Ok(hist)
}
