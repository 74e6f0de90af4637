//! Dense row-major matrices with the handful of factorizations the GP needs.
//!
//! The level-3 kernels (Cholesky, triangular solves with many right-hand
//! sides, triangular products) are blocked so that nearly all the work goes
//! through `matrixmultiply`'s GEMM.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::math::sqrt;

const BLOCK: usize = 64;

/// Smallest jitter tried, relative to the matrix scale.
pub const JITTER_START: f64 = 1e-10;
/// Largest jitter tried before giving up, relative to the matrix scale.
pub const JITTER_MAX: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Wraps row-major data. Panics if the length does not match.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major buffer has wrong length");
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    pub fn add_diagonal(&mut self, v: f64) {
        for i in 0..self.rows.min(self.cols) {
            self[(i, i)] += v;
        }
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zeros(self.rows, other.cols);
        // SAFETY: shapes are checked above and the three buffers are distinct.
        unsafe {
            matrixmultiply::dgemm(
                self.rows,
                self.cols,
                other.cols,
                1.0,
                self.data.as_ptr(),
                self.cols as isize,
                1,
                other.data.as_ptr(),
                other.cols as isize,
                1,
                0.0,
                out.data.as_mut_ptr(),
                out.cols as isize,
                1,
            );
        }
        out
    }

    /// `selfᵀ * self`. Only blocks on or below the diagonal are multiplied;
    /// the rest is mirrored.
    pub fn gram(&self) -> Matrix {
        const BLOCK: usize = 128;
        let m = self.cols;
        let mut out = Matrix::zeros(m, m);
        let mut i0 = 0;
        while i0 < m {
            let b = BLOCK.min(m - i0);
            let width = i0 + b;
            // SAFETY: the transpose is expressed through strides on the same
            // read-only buffer; the output rows i0..i0+b, columns 0..width lie
            // inside the separate output allocation.
            unsafe {
                matrixmultiply::dgemm(
                    b,
                    self.rows,
                    width,
                    1.0,
                    self.data.as_ptr().add(i0),
                    1,
                    self.cols as isize,
                    self.data.as_ptr(),
                    self.cols as isize,
                    1,
                    0.0,
                    out.data.as_mut_ptr().add(i0 * m),
                    m as isize,
                    1,
                );
            }
            i0 += b;
        }
        out.mirror_lower();
        out
    }

    /// Copies the strict lower triangle onto the upper one.
    pub(crate) fn mirror_lower(&mut self) {
        const TILE: usize = 64;
        let m = self.cols;
        debug_assert_eq!(self.rows, m);
        for bi in (0..m).step_by(TILE) {
            for bj in (bi..m).step_by(TILE) {
                for i in bi..(bi + TILE).min(m) {
                    for j in bj.max(i + 1)..(bj + TILE).min(m) {
                        self.data[i * m + j] = self.data[j * m + i];
                    }
                }
            }
        }
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // Four accumulators let the compiler vectorize without reassociating.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let j = 4 * i;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for j in 4 * chunks..a.len() {
        s += a[j] * b[j];
    }
    s
}

/// In-place lower Cholesky factorization. On success the strict upper
/// triangle is zeroed. On failure the contents are unspecified.
pub fn cholesky_in_place(a: &mut Matrix) -> Result<()> {
    let n = a.rows;
    assert_eq!(n, a.cols, "cholesky needs a square matrix");
    let ld = n;
    let mut k0 = 0;
    while k0 < n {
        let b = BLOCK.min(n - k0);
        let k1 = k0 + b;

        // diagonal block
        for j in k0..k1 {
            let s = {
                let r = &a.data[j * ld + k0..j * ld + j];
                dot(r, r)
            };
            let d = a.data[j * ld + j] - s;
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { size: n, jitter: 0.0 });
            }
            let d = sqrt(d);
            a.data[j * ld + j] = d;
            for i in j + 1..k1 {
                let s = {
                    let ri = &a.data[i * ld + k0..i * ld + j];
                    let rj = &a.data[j * ld + k0..j * ld + j];
                    dot(ri, rj)
                };
                a.data[i * ld + j] = (a.data[i * ld + j] - s) / d;
            }
        }

        // panel below the diagonal block: X * L_kkᵀ = A_panel
        for i in k1..n {
            for j in k0..k1 {
                let s = {
                    let ri = &a.data[i * ld + k0..i * ld + j];
                    let rj = &a.data[j * ld + k0..j * ld + j];
                    dot(ri, rj)
                };
                a.data[i * ld + j] = (a.data[i * ld + j] - s) / a.data[j * ld + j];
            }
        }

        // trailing update, lower block-triangle only
        let mut r0 = k1;
        while r0 < n {
            let r1 = (r0 + BLOCK).min(n);
            let ptr = a.data.as_mut_ptr();
            // SAFETY: reads columns k0..k1 and writes columns k1..r1 of rows
            // r0..r1; the read and written regions never overlap.
            unsafe {
                matrixmultiply::dgemm(
                    r1 - r0,
                    b,
                    r1 - k1,
                    -1.0,
                    ptr.add(r0 * ld + k0),
                    ld as isize,
                    1,
                    ptr.add(k1 * ld + k0),
                    1,
                    ld as isize,
                    1.0,
                    ptr.add(r0 * ld + k1),
                    ld as isize,
                    1,
                );
            }
            r0 = r1;
        }
        k0 = k1;
    }
    for i in 0..n {
        for j in i + 1..n {
            a.data[i * ld + j] = 0.0;
        }
    }
    Ok(())
}

/// Cholesky of `a + jitter·I`, escalating jitter by ×10 from
/// `JITTER_START·scale` to `JITTER_MAX·scale`. Returns the factor and the
/// jitter that was used.
pub fn cholesky_jittered(a: &Matrix, scale: f64) -> Result<(Matrix, f64)> {
    let mut jitter = JITTER_START * scale;
    let max = JITTER_MAX * scale * (1.0 + 1e-9);
    loop {
        let mut l = a.clone();
        l.add_diagonal(jitter);
        if cholesky_in_place(&mut l).is_ok() {
            return Ok((l, jitter));
        }
        jitter *= 10.0;
        if jitter > max {
            return Err(Error::NotPositiveDefinite {
                size: a.rows,
                jitter: jitter / 10.0,
            });
        }
    }
}

/// Solves `L x = b` in place.
pub fn solve_lower_in_place(l: &Matrix, b: &mut [f64]) {
    let n = l.rows;
    debug_assert_eq!(b.len(), n);
    for i in 0..n {
        let s = dot(&l.row(i)[..i], &b[..i]);
        b[i] = (b[i] - s) / l[(i, i)];
    }
}

/// Solves `Lᵀ x = b` in place.
pub fn solve_lower_transposed_in_place(l: &Matrix, b: &mut [f64]) {
    let n = l.rows;
    debug_assert_eq!(b.len(), n);
    for i in (0..n).rev() {
        let xi = b[i] / l[(i, i)];
        b[i] = xi;
        let row = &l.row(i)[..i];
        for (bp, &lp) in b[..i].iter_mut().zip(row) {
            *bp -= xi * lp;
        }
    }
}

/// Solves `L X = B` in place for a row-major right-hand side with any
/// number of columns.
pub fn solve_lower_matrix_in_place(l: &Matrix, b: &mut Matrix) {
    let n = l.rows;
    assert_eq!(b.rows, n);
    let q = b.cols;
    if q == 0 {
        return;
    }
    let mut i0 = 0;
    while i0 < n {
        let i1 = (i0 + BLOCK).min(n);
        if i0 > 0 {
            let bp = b.data.as_mut_ptr();
            // SAFETY: reads rows 0..i0 of B and writes rows i0..i1; disjoint.
            unsafe {
                matrixmultiply::dgemm(
                    i1 - i0,
                    i0,
                    q,
                    -1.0,
                    l.data.as_ptr().add(i0 * n),
                    n as isize,
                    1,
                    bp,
                    q as isize,
                    1,
                    1.0,
                    bp.add(i0 * q),
                    q as isize,
                    1,
                );
            }
        }
        for i in i0..i1 {
            let (done, rest) = b.data.split_at_mut(i * q);
            let bi = &mut rest[..q];
            for p in i0..i {
                let lip = l.data[i * n + p];
                if lip != 0.0 {
                    let bpr = &done[p * q..(p + 1) * q];
                    for (x, &y) in bi.iter_mut().zip(bpr) {
                        *x -= lip * y;
                    }
                }
            }
            let inv = 1.0 / l.data[i * n + i];
            for x in bi.iter_mut() {
                *x *= inv;
            }
        }
        i0 = i1;
    }
}

/// `L * Z` for lower-triangular `L` (strict upper triangle must be zero).
pub fn lower_matmul(l: &Matrix, z: &Matrix) -> Matrix {
    let n = l.rows;
    assert_eq!(z.rows, n);
    let q = z.cols;
    let mut out = Matrix::zeros(n, q);
    let mut i0 = 0;
    while i0 < n {
        let i1 = (i0 + BLOCK).min(n);
        // SAFETY: distinct buffers; block row i0..i1 of L times rows 0..i1 of Z.
        unsafe {
            matrixmultiply::dgemm(
                i1 - i0,
                i1,
                q,
                1.0,
                l.data.as_ptr().add(i0 * n),
                n as isize,
                1,
                z.data.as_ptr(),
                q as isize,
                1,
                0.0,
                out.data.as_mut_ptr().add(i0 * q),
                q as isize,
                1,
            );
        }
        i0 = i1;
    }
    out
}

/// Inverse of `L Lᵀ` given the factor `L`.
pub fn cholesky_inverse(l: &Matrix) -> Matrix {
    let mut linv = Matrix::identity(l.rows);
    solve_lower_matrix_in_place(l, &mut linv);
    linv.gram()
}
