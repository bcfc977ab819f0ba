//! Elastic-net regularized hinge-loss SVM on two Gaussian classes.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Result};
use crate::functions::{ProxFn, SmoothFn};
use crate::ladmm::TwoBlockProblem;
use crate::operators::{DenseMatrix, LinearMap};
use crate::rng::{streams, SeededStream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmDataset {
    /// p×m, one sample per column.
    pub a: DenseMatrix,
    /// Labels in {+1, −1}; the first half is +1.
    pub labels: Vec<f64>,
    /// Class mean of the +1 samples, u = [1_s; 0].
    pub u: Vec<f64>,
    pub s: usize,
    pub rho: f64,
    pub mu1: f64,
    pub mu2: f64,
}

impl SvmDataset {
    pub fn m(&self) -> usize {
        self.a.cols
    }

    pub fn p(&self) -> usize {
        self.a.rows
    }

    /// Diag(b)·Aᵀ: row i is bᵢ·aᵢᵀ.
    pub fn signed_samples(&self) -> DenseMatrix {
        let (m, p) = (self.m(), self.p());
        DenseMatrix::from_fn(m, p, |i, j| self.labels[i] * self.a.get(j, i))
    }

    /// (1/m)·Σ[1 − bᵢaᵢᵀx]₊ + μ₁‖x‖₁ + (μ₂/2)‖x‖².
    pub fn objective(&self, x: &[f64]) -> Result<f64> {
        check_len("SvmDataset::objective", self.p(), x.len())?;
        let m = self.m();
        let mut hinge = 0.0;
        for i in 0..m {
            let mut ax = 0.0;
            for (j, xj) in x.iter().enumerate() {
                ax += self.a.get(j, i) * xj;
            }
            hinge += (1.0 - self.labels[i] * ax).max(0.0);
        }
        let reg = ProxFn::ElasticNet {
            mu1: self.mu1,
            mu2: self.mu2,
        }
        .value(x)
        .unwrap_or(f64::INFINITY);
        Ok(hinge / m as f64 + reg)
    }
}

/// Draws m samples (half from N(u, Σ), half from N(−u, Σ)) with
/// Σ = [ρE + ρI, 0; 0, I] on the first s coordinates, and builds
/// `min (1/m)eᵀ[y]₊ + μ₁‖x‖₁ + (μ₂/2)‖x‖²  s.t.  y + Bx = e`, B = Diag(b)Aᵀ.
/// y is the first block (map I), x the second (map B).
pub fn gen_svm(
    m: usize,
    p: usize,
    s: usize,
    rho: f64,
    seed: u64,
    mu1: f64,
    mu2: f64,
) -> Result<(TwoBlockProblem, SvmDataset)> {
    if m == 0 || !m.is_multiple_of(2) {
        return Err(invalid(format!(
            "SVM needs an even positive sample count, got {m}"
        )));
    }
    if s > p || p == 0 {
        return Err(invalid(format!("SVM needs s ≤ p, got s={s}, p={p}")));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(invalid(format!("SVM needs ρ ∈ [0,1], got {rho}")));
    }
    if !(mu1 >= 0.0 && mu2 > 0.0) {
        return Err(invalid("SVM needs μ₁ ≥ 0 and μ₂ > 0"));
    }
    let mut rng = SeededStream::new(seed, streams::SVM_SAMPLES);
    let sr = rho.sqrt();
    let mut a = DenseMatrix::zeros(p, m);
    let mut labels = Vec::with_capacity(m);
    for i in 0..m {
        let label = if i < m / 2 { 1.0 } else { -1.0 };
        labels.push(label);
        let w = correlated_sample(&mut rng, p, s, sr);
        for (j, wj) in w.into_iter().enumerate() {
            let mean = if j < s { label } else { 0.0 };
            a.data[j * m + i] = mean + wj;
        }
    }
    let mut u = vec![0.0; p];
    u[..s].iter_mut().for_each(|v| *v = 1.0);
    let data = SvmDataset {
        a,
        labels,
        u,
        s,
        rho,
        mu1,
        mu2,
    };
    let b = data.signed_samples();
    let problem = TwoBlockProblem::new(
        ProxFn::HingeSum { m },
        ProxFn::ElasticNet { mu1, mu2 },
        SmoothFn::Zero { n: p },
        LinearMap::identity(m),
        LinearMap::dense(b),
        vec![1.0; m],
    )?;
    Ok((problem, data))
}

/// Zero-mean draw with covariance [ρE + ρI, 0; 0, I], using √ρ·ζ·1 + √ρ·ξ on
/// the first s coordinates.
pub fn correlated_sample(rng: &mut SeededStream, p: usize, s: usize, sqrt_rho: f64) -> Vec<f64> {
    let zeta = rng.normal();
    (0..p)
        .map(|j| {
            let xi = rng.normal();
            if j < s {
                sqrt_rho * (zeta + xi)
            } else {
                xi
            }
        })
        .collect()
}
