//! Stationary covariance functions.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::math::{exp, sqrt};

const SQRT5: f64 = 2.236_067_977_499_79;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    SquaredExponential,
    #[default]
    Matern52,
}

impl KernelFamily {
    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::SquaredExponential => "rbf",
            KernelFamily::Matern52 => "matern52",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "rbf" | "se" | "squared-exponential" => Some(KernelFamily::SquaredExponential),
            "matern52" | "matern" => Some(KernelFamily::Matern52),
            _ => None,
        }
    }

    /// Correlation as a function of the scaled squared distance `r²`.
    #[inline]
    fn correlation(self, r2: f64) -> f64 {
        match self {
            KernelFamily::SquaredExponential => exp(-0.5 * r2),
            KernelFamily::Matern52 => {
                let r = sqrt(r2);
                let a = SQRT5 * r;
                (1.0 + a + 5.0 / 3.0 * r2) * exp(-a)
            }
        }
    }

    /// `-2 · d(correlation)/d(r²)`, the factor that multiplies `Δ²/ℓ²` in
    /// the derivative with respect to a log-lengthscale.
    #[inline]
    fn log_lengthscale_factor(self, r2: f64) -> f64 {
        match self {
            KernelFamily::SquaredExponential => exp(-0.5 * r2),
            KernelFamily::Matern52 => {
                let a = SQRT5 * sqrt(r2);
                5.0 / 3.0 * (1.0 + a) * exp(-a)
            }
        }
    }
}

/// A stationary kernel `k(x, x') = outputscale · ρ(‖(x − x') / ℓ‖)`.
///
/// `lengthscales` holds either one entry per input dimension (ARD) or a
/// single shared entry.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    pub family: KernelFamily,
    pub lengthscales: Vec<f64>,
    pub outputscale: f64,
}

impl Kernel {
    pub fn new(family: KernelFamily, lengthscales: Vec<f64>, outputscale: f64) -> Result<Self> {
        if lengthscales.is_empty() {
            return Err(Error::InvalidArgument("kernel needs at least one lengthscale"));
        }
        if lengthscales.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::InvalidArgument("lengthscales must be positive"));
        }
        if !(outputscale > 0.0) || !outputscale.is_finite() {
            return Err(Error::InvalidArgument("outputscale must be positive"));
        }
        Ok(Self {
            family,
            lengthscales,
            outputscale,
        })
    }

    pub fn isotropic(family: KernelFamily, lengthscale: f64, outputscale: f64) -> Result<Self> {
        Self::new(family, vec![lengthscale], outputscale)
    }

    pub fn ard(family: KernelFamily, dim: usize, lengthscale: f64, outputscale: f64) -> Result<Self> {
        Self::new(family, vec![lengthscale; dim], outputscale)
    }

    pub fn is_ard(&self) -> bool {
        self.lengthscales.len() > 1
    }

    /// Whether the kernel accepts inputs of dimension `dim`.
    pub fn accepts_dim(&self, dim: usize) -> bool {
        self.lengthscales.len() == 1 || self.lengthscales.len() == dim
    }

    #[inline]
    fn lengthscale(&self, i: usize) -> f64 {
        if self.lengthscales.len() == 1 {
            self.lengthscales[0]
        } else {
            self.lengthscales[i]
        }
    }

    /// `1 / ℓ_i` for every input dimension.
    fn inverse_lengthscales(&self, dim: usize) -> Vec<f64> {
        (0..dim).map(|i| 1.0 / self.lengthscale(i)).collect()
    }

    /// Points divided by their lengthscales, flattened row-major.
    fn scaled(&self, points: &[Vec<f64>], inv: &[f64]) -> Vec<f64> {
        points.iter().flat_map(|p| p.iter().zip(inv).map(|(x, l)| x * l)).collect()
    }

    #[inline]
    pub(crate) fn scaled_sq_dist(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        if self.lengthscales.len() == 1 {
            let l = self.lengthscales[0];
            sq_dist(a, b) / (l * l)
        } else {
            let mut s = 0.0;
            for ((x, y), l) in a.iter().zip(b).zip(&self.lengthscales) {
                let d = (x - y) / l;
                s += d * d;
            }
            s
        }
    }

    #[inline]
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        self.outputscale * self.family.correlation(self.scaled_sq_dist(a, b))
    }

    /// `k(x, x)`.
    #[inline]
    pub fn diag(&self) -> f64 {
        self.outputscale
    }

    /// Gram matrix on a point set.
    pub fn gram(&self, points: &[Vec<f64>]) -> Matrix {
        let n = points.len();
        let d = points.first().map_or(0, Vec::len);
        let sc = self.scaled(points, &self.inverse_lengthscales(d));
        let mut k = Matrix::zeros(n, n);
        // column tiles keep the inner rows cache resident
        const TILE: usize = 128;
        for j0 in (0..n).step_by(TILE) {
            for i in j0..n {
                let a = &sc[i * d..(i + 1) * d];
                for j in j0..(j0 + TILE).min(i) {
                    k[(i, j)] = self.outputscale * self.family.correlation(sq_dist(a, &sc[j * d..(j + 1) * d]));
                }
            }
        }
        for i in 0..n {
            k[(i, i)] = self.outputscale;
        }
        k.mirror_lower();
        k
    }

    /// `k(x_i, y_j)` as an `|xs| × |ys|` matrix.
    pub fn cross(&self, xs: &[Vec<f64>], ys: &[Vec<f64>]) -> Matrix {
        let d = xs.first().or(ys.first()).map_or(0, Vec::len);
        let inv = self.inverse_lengthscales(d);
        let (a, b) = (self.scaled(xs, &inv), self.scaled(ys, &inv));
        Matrix::from_fn(xs.len(), ys.len(), |i, j| {
            self.outputscale * self.family.correlation(sq_dist(&a[i * d..(i + 1) * d], &b[j * d..(j + 1) * d]))
        })
    }

    /// Writes `k(x, p)` for every `p` in `points` into `out`.
    pub fn vector_into(&self, points: &[Vec<f64>], x: &[f64], out: &mut [f64]) {
        let inv = self.inverse_lengthscales(x.len());
        let xs: Vec<f64> = x.iter().zip(&inv).map(|(v, l)| v * l).collect();
        let mut buf = vec![0.0; x.len()];
        for (o, p) in out.iter_mut().zip(points) {
            for ((b, v), l) in buf.iter_mut().zip(p).zip(&inv) {
                *b = v * l;
            }
            *o = self.outputscale * self.family.correlation(sq_dist(&buf, &xs));
        }
    }

    /// Derivatives of the Gram matrix with respect to each log-lengthscale,
    /// contracted against a symmetric weight matrix: returns
    /// `Σ_ij W_ij ∂K_ij/∂log ℓ_k` for every lengthscale `k`.
    pub(crate) fn contract_log_lengthscale_grad(&self, points: &[Vec<f64>], w: &Matrix) -> Vec<f64> {
        let n = points.len();
        let m = self.lengthscales.len();
        let d = points.first().map_or(0, Vec::len);
        let sc = self.scaled(points, &self.inverse_lengthscales(d));
        let mut out = vec![0.0; m];
        for i in 0..n {
            let a = &sc[i * d..(i + 1) * d];
            for j in 0..i {
                let b = &sc[j * d..(j + 1) * d];
                let r2 = sq_dist(a, b);
                let f = 2.0 * w[(i, j)] * self.outputscale * self.family.log_lengthscale_factor(r2);
                if m == 1 {
                    out[0] += f * r2;
                } else {
                    for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
                        let t = x - y;
                        *o += f * t * t;
                    }
                }
            }
        }
        out
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    // independent lanes so the sum is not one serial dependency chain
    let mut acc = [0.0; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            let t = x[k] - y[k];
            acc[k] += t * t;
        }
    }
    let mut s = ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
    for (x, y) in ra.iter().zip(rb) {
        let t = x - y;
        s += t * t;
    }
    s
}
