//! Matrix-free linear maps, the weight operators used in the proximal terms,
//! and spectral-norm estimation by power iteration.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Result};
use crate::linalg::{dot, norm, norm_sq};
use crate::par;
use crate::rng::{streams, SeededStream};

/// Row-major dense matrix of 64-bit floats.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_len("DenseMatrix::new", rows * cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

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
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn diag(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = Self::zeros(n, n);
        for (i, v) in d.iter().enumerate() {
            m.data[i * n + i] = *v;
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// `out = self * v`, parallel over row blocks for large matrices.
    pub fn matvec_into(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        let chunk = (par::PAR_THRESHOLD / self.cols.max(1)).max(8);
        par::fill_chunks(out, chunk, self.rows * self.cols, |start, block| {
            for (r, o) in block.iter_mut().enumerate() {
                *o = dot(self.row(start + r), v);
            }
        });
    }

    pub fn matvec_seq_into(&self, v: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = dot(self.row(i), v);
        }
    }

    /// `out = selfᵀ * v`, parallel over column blocks. Each output entry is
    /// accumulated in row order, so results do not depend on the thread count.
    pub fn tmatvec_into(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        let chunk = (par::PAR_THRESHOLD / self.rows.max(1)).max(64);
        par::fill_chunks(out, chunk, self.rows * self.cols, |start, block| {
            block.iter_mut().for_each(|o| *o = 0.0);
            let end = start + block.len();
            for (i, vi) in v.iter().enumerate() {
                if *vi == 0.0 {
                    continue;
                }
                let row = &self.row(i)[start..end];
                for (o, a) in block.iter_mut().zip(row) {
                    *o += vi * a;
                }
            }
        });
    }

    pub fn tmatvec_seq_into(&self, v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, vi) in v.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += vi * a;
            }
        }
    }

    /// `self * other`.
    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        check_len("DenseMatrix::matmul", self.cols, other.rows)?;
        let ot = other.transpose();
        let rows: Vec<usize> = (0..self.rows).collect();
        let data = par::map(&rows, |&i| {
            (0..other.cols)
                .map(|j| dot(self.row(i), ot.row(j)))
                .collect::<Vec<_>>()
        });
        Ok(DenseMatrix {
            rows: self.rows,
            cols: other.cols,
            data: data.concat(),
        })
    }

    /// `self * selfᵀ`.
    pub fn gram_rows(&self) -> DenseMatrix {
        let n = self.rows;
        let idx: Vec<usize> = (0..n).collect();
        let rows = par::map(&idx, |&i| {
            (0..n)
                .map(|j| dot(self.row(i), self.row(j)))
                .collect::<Vec<_>>()
        });
        DenseMatrix {
            rows: n,
            cols: n,
            data: rows.concat(),
        }
    }

    /// `selfᵀ * self`.
    pub fn gram_cols(&self) -> DenseMatrix {
        self.transpose().gram_rows()
    }

    pub fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub fn from_nalgebra(m: &nalgebra::DMatrix<f64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

/// User-supplied operator with forward and adjoint procedures.
pub trait LinearOperator: Send + Sync + fmt::Debug {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn apply_into(&self, v: &[f64], out: &mut [f64]);
    fn adjoint_into(&self, v: &[f64], out: &mut [f64]);
}

/// Forward differences with wraparound on an `height × width` image stored
/// row-major. Output stacks the horizontal differences on top of the vertical
/// ones; the adjoint is the negative periodic divergence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodicDiff {
    pub height: usize,
    pub width: usize,
}

impl PeriodicDiff {
    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let (h, w) = (self.height, self.width);
        let (horiz, vert) = out.split_at_mut(h * w);
        for i in 0..h {
            let down = ((i + 1) % h) * w;
            for j in 0..w {
                let right = (j + 1) % w;
                let here = x[i * w + j];
                horiz[i * w + j] = x[i * w + right] - here;
                vert[i * w + j] = x[down + j] - here;
            }
        }
    }

    fn adjoint_into(&self, u: &[f64], out: &mut [f64]) {
        let (h, w) = (self.height, self.width);
        let (horiz, vert) = u.split_at(h * w);
        for i in 0..h {
            let up = ((i + h - 1) % h) * w;
            for j in 0..w {
                let left = (j + w - 1) % w;
                out[i * w + j] =
                    horiz[i * w + left] - horiz[i * w + j] + vert[up + j] - vert[i * w + j];
            }
        }
    }

    /// Largest eigenvalue of DᵀD: max over frequencies of 4sin²(πi/h)+4sin²(πj/w).
    pub fn norm_sq_exact(&self) -> f64 {
        let top = |n: usize| {
            (0..n)
                .map(|i| 4.0 * (std::f64::consts::PI * i as f64 / n as f64).sin().powi(2))
                .fold(0.0, f64::max)
        };
        top(self.height) + top(self.width)
    }
}

/// Dense maps up to this inner dimension get an exact spectral norm.
const DENSE_EIGEN_LIMIT: usize = 1200;

/// A linear operator with forward and adjoint application.
#[derive(Clone, Debug)]
pub enum LinearMap {
    Dense(Arc<DenseMatrix>),
    /// `scale · I` on ℝⁿ.
    Identity {
        n: usize,
        scale: f64,
    },
    Zero {
        rows: usize,
        cols: usize,
    },
    PeriodicDiff(PeriodicDiff),
    Custom(Arc<dyn LinearOperator>),
}

impl LinearMap {
    pub fn dense(m: DenseMatrix) -> Self {
        LinearMap::Dense(Arc::new(m))
    }

    pub fn identity(n: usize) -> Self {
        LinearMap::Identity { n, scale: 1.0 }
    }

    pub fn scaled_identity(n: usize, scale: f64) -> Self {
        LinearMap::Identity { n, scale }
    }

    pub fn rows(&self) -> usize {
        match self {
            LinearMap::Dense(m) => m.rows,
            LinearMap::Identity { n, .. } => *n,
            LinearMap::Zero { rows, .. } => *rows,
            LinearMap::PeriodicDiff(d) => 2 * d.pixels(),
            LinearMap::Custom(op) => op.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            LinearMap::Dense(m) => m.cols,
            LinearMap::Identity { n, .. } => *n,
            LinearMap::Zero { cols, .. } => *cols,
            LinearMap::PeriodicDiff(d) => d.pixels(),
            LinearMap::Custom(op) => op.cols(),
        }
    }

    /// Returns `M v`.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("LinearMap::apply", self.cols(), v.len())?;
        let mut out = vec![0.0; self.rows()];
        self.apply_into(v, &mut out);
        Ok(out)
    }

    /// Returns `Mᵀ v`.
    pub fn adjoint(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len("LinearMap::adjoint", self.rows(), v.len())?;
        let mut out = vec![0.0; self.cols()];
        self.adjoint_into(v, &mut out);
        Ok(out)
    }

    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.cols());
        debug_assert_eq!(out.len(), self.rows());
        match self {
            LinearMap::Dense(m) => m.matvec_into(v, out),
            LinearMap::Identity { scale, .. } => {
                for (o, x) in out.iter_mut().zip(v) {
                    *o = scale * x;
                }
            }
            LinearMap::Zero { .. } => out.iter_mut().for_each(|o| *o = 0.0),
            LinearMap::PeriodicDiff(d) => d.apply_into(v, out),
            LinearMap::Custom(op) => op.apply_into(v, out),
        }
    }

    pub fn adjoint_into(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.rows());
        debug_assert_eq!(out.len(), self.cols());
        match self {
            LinearMap::Dense(m) => m.tmatvec_into(v, out),
            LinearMap::Identity { scale, .. } => {
                for (o, x) in out.iter_mut().zip(v) {
                    *o = scale * x;
                }
            }
            LinearMap::Zero { .. } => out.iter_mut().for_each(|o| *o = 0.0),
            LinearMap::PeriodicDiff(d) => d.adjoint_into(v, out),
            LinearMap::Custom(op) => op.adjoint_into(v, out),
        }
    }

    pub(crate) fn apply_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows()];
        self.apply_into(v, &mut out);
        out
    }

    pub(crate) fn adjoint_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols()];
        self.adjoint_into(v, &mut out);
        out
    }

    /// `MᵀM v`.
    pub(crate) fn gram_apply(&self, v: &[f64]) -> Vec<f64> {
        self.adjoint_vec(&self.apply_vec(v))
    }

    pub fn explicit_matrix(&self) -> Option<&DenseMatrix> {
        match self {
            LinearMap::Dense(m) => Some(m),
            _ => None,
        }
    }

    /// Materializes the operator column by column.
    pub fn to_dense(&self) -> DenseMatrix {
        if let Some(m) = self.explicit_matrix() {
            return m.clone();
        }
        let (rows, cols) = (self.rows(), self.cols());
        let mut out = DenseMatrix::zeros(rows, cols);
        let mut e = vec![0.0; cols];
        let mut col = vec![0.0; rows];
        for j in 0..cols {
            e[j] = 1.0;
            self.apply_into(&e, &mut col);
            for (i, v) in col.iter().enumerate() {
                out.data[i * cols + j] = *v;
            }
            e[j] = 0.0;
        }
        out
    }

    /// `Some(s)` when the map is `s · I`.
    pub fn identity_scale(&self) -> Option<f64> {
        match self {
            LinearMap::Identity { scale, .. } => Some(*scale),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            LinearMap::Zero { .. } => true,
            LinearMap::Identity { scale, .. } => *scale == 0.0,
            _ => false,
        }
    }

    /// Exact ‖M‖₂² for operators with a known spectrum.
    pub fn norm_sq_exact(&self) -> Option<f64> {
        match self {
            LinearMap::Identity { scale, .. } => Some(scale * scale),
            LinearMap::Zero { .. } => Some(0.0),
            LinearMap::PeriodicDiff(d) => Some(d.norm_sq_exact()),
            _ => None,
        }
    }

    /// ‖M‖₂², exact when known, from a symmetric eigendecomposition of the
    /// smaller Gram matrix for dense maps, and otherwise by power iteration.
    pub fn norm_sq(&self) -> f64 {
        if let Some(v) = self.norm_sq_exact() {
            return v;
        }
        if let LinearMap::Dense(m) = self {
            if m.rows.min(m.cols) <= DENSE_EIGEN_LIMIT {
                let g = if m.rows <= m.cols {
                    m.gram_rows()
                } else {
                    m.gram_cols()
                };
                let eig = g.to_nalgebra().symmetric_eigenvalues();
                return eig.iter().cloned().fold(0.0, f64::max);
            }
        }
        let est = spectral_norm(self, 1e-10, 20_000, 0);
        est.value * est.value
    }

    /// Whether two maps denote the same operator instance.
    pub fn same_as(&self, other: &LinearMap) -> bool {
        match (self, other) {
            (LinearMap::Dense(a), LinearMap::Dense(b)) => Arc::ptr_eq(a, b) || a == b,
            (LinearMap::Identity { n: a, scale: s }, LinearMap::Identity { n: b, scale: t }) => {
                a == b && s == t
            }
            (LinearMap::Zero { rows: r1, cols: c1 }, LinearMap::Zero { rows: r2, cols: c2 }) => {
                r1 == r2 && c1 == c2
            }
            (LinearMap::PeriodicDiff(a), LinearMap::PeriodicDiff(b)) => a == b,
            (LinearMap::Custom(a), LinearMap::Custom(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

/// Result of power iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralEstimate {
    pub value: f64,
    pub iterations: usize,
    /// False when `max_iter` was exhausted; `value` is then the best estimate.
    pub converged: bool,
}

/// Estimates ‖M‖₂ by power iteration on MᵀM.
///
/// Stops once the eigen-residual ‖MᵀMv − ρv‖ drops below `tol · ρ`, where ρ is
/// the Rayleigh quotient of the current unit vector. The start vector is a
/// pseudo-random unit vector drawn from `seed`.
pub fn spectral_norm(map: &LinearMap, tol: f64, max_iter: usize, seed: u64) -> SpectralEstimate {
    let n = map.cols();
    if n == 0 || map.rows() == 0 || map.is_zero() {
        return SpectralEstimate {
            value: 0.0,
            iterations: 0,
            converged: true,
        };
    }
    let mut rng = SeededStream::new(seed, streams::POWER_START);
    let mut v = rng.normal_vec(n);
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut rho = 0.0;
    for it in 1..=max_iter {
        let w = map.gram_apply(&v);
        rho = dot(&v, &w);
        let resid = w
            .iter()
            .zip(&v)
            .map(|(wi, vi)| (wi - rho * vi).powi(2))
            .sum::<f64>()
            .sqrt();
        let nw = norm(&w);
        if nw == 0.0 {
            return SpectralEstimate {
                value: 0.0,
                iterations: it,
                converged: true,
            };
        }
        if resid <= tol * rho {
            return SpectralEstimate {
                value: rho.max(0.0).sqrt(),
                iterations: it,
                converged: true,
            };
        }
        v = w.into_iter().map(|x| x / nw).collect();
    }
    SpectralEstimate {
        value: rho.max(0.0).sqrt(),
        iterations: max_iter,
        converged: false,
    }
}

/// Weight operator `W` of a proximal term ½‖v‖²_W.
#[derive(Clone, Debug)]
pub enum ScalingOperator {
    /// `a · I`
    ScaledIdentity(f64),
    /// `a · I − c · MᵀM`. A negative `c` gives `a·I + |c|·MᵀM`.
    IdentityMinusGram { a: f64, c: f64, map: LinearMap },
}

impl ScalingOperator {
    pub fn zero() -> Self {
        ScalingOperator::ScaledIdentity(0.0)
    }

    /// Coefficient of the identity part.
    pub fn identity_part(&self) -> f64 {
        match self {
            ScalingOperator::ScaledIdentity(a) => *a,
            ScalingOperator::IdentityMinusGram { a, .. } => *a,
        }
    }

    /// `(c, M)` of the Gram part, if any.
    pub fn gram_part(&self) -> Option<(f64, &LinearMap)> {
        match self {
            ScalingOperator::ScaledIdentity(_) => None,
            ScalingOperator::IdentityMinusGram { c, map, .. } => Some((*c, map)),
        }
    }

    /// ‖v‖²_W = vᵀWv; negative when W is indefinite.
    pub fn norm_sq(&self, v: &[f64]) -> Result<f64> {
        match self {
            ScalingOperator::ScaledIdentity(a) => Ok(a * norm_sq(v)),
            ScalingOperator::IdentityMinusGram { a, c, map } => {
                check_len("ScalingOperator::norm_sq", map.cols(), v.len())?;
                Ok(a * norm_sq(v) - c * norm_sq(&map.apply_vec(v)))
            }
        }
    }

    /// Returns `W v`.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        match self {
            ScalingOperator::ScaledIdentity(a) => Ok(v.iter().map(|x| a * x).collect()),
            ScalingOperator::IdentityMinusGram { a, c, map } => {
                check_len("ScalingOperator::apply", map.cols(), v.len())?;
                let g = map.gram_apply(v);
                Ok(v.iter().zip(&g).map(|(x, y)| a * x - c * y).collect())
            }
        }
    }

    /// Spectrum enclosure `[lo, hi]` given ‖M‖₂² for the Gram part.
    pub fn eigen_bounds(&self, map_norm_sq: f64) -> (f64, f64) {
        match self {
            ScalingOperator::ScaledIdentity(a) => (*a, *a),
            ScalingOperator::IdentityMinusGram { a, c, .. } => {
                let edge = a - c * map_norm_sq;
                (a.min(edge), a.max(edge))
            }
        }
    }

    /// PSD certificate: `a ≥ 0` and `a ≥ c‖M‖₂²`, within 1e-10.
    pub fn is_psd_certified(&self) -> bool {
        self.is_psd_certified_shifted(0.0)
    }

    /// Certifies `W − shift · I ⪰ 0` via the eigenvalue enclosure.
    pub fn is_psd_certified_shifted(&self, shift: f64) -> bool {
        let ns = match self {
            ScalingOperator::ScaledIdentity(_) => 0.0,
            ScalingOperator::IdentityMinusGram { map, .. } => map.norm_sq(),
        };
        let (lo, _) = self.eigen_bounds(ns);
        let slack = 1e-10 * self.identity_part().abs().max(1.0);
        lo - shift >= -slack
    }

    pub fn validate_dim(&self, n: usize) -> Result<()> {
        if let ScalingOperator::IdentityMinusGram { map, .. } = self {
            check_len("ScalingOperator", n, map.cols())?;
        }
        if !self.identity_part().is_finite() {
            return Err(invalid("scaling operator has a non-finite coefficient"));
        }
        Ok(())
    }
}
