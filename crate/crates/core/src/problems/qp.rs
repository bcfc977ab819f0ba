//! Quadratic programs: equality-constrained (ECQP), nonnegative (NNQP) and a
//! strongly convex two-block QP.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Error, Result};
use crate::functions::{ProxFn, SmoothFn};
use crate::ladmm::{TwoBlockProblem, TwoBlockReference};
use crate::lalm::{CompositeProblem, Reference};
use crate::linalg::norm;
use crate::operators::{DenseMatrix, LinearMap};
use crate::rng::{streams, SeededStream};

/// Strong-convexity shift added to GᵀG in the ECQP Hessian.
pub const ECQP_SHIFT: f64 = 1e-2;
/// Number of directions removed from the NNQP Hessian rank.
pub const NNQP_RANK_DEFICIT: usize = 100;

fn gaussian_matrix(rng: &mut SeededStream, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.normal())
}

fn max_eigenvalue(m: &DenseMatrix) -> f64 {
    m.to_nalgebra()
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Solves the KKT system of `min ½xᵀHx + lᵀx s.t. Ax = b`, i.e.
/// `Hx + l − Aᵀλ = 0, Ax = b`, returning (x, λ). LU with one refinement step,
/// falling back to an SVD least-squares solve when LU fails.
pub fn equality_qp_kkt(
    hess: &DenseMatrix,
    lin: &[f64],
    a: &DenseMatrix,
    b: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = hess.cols;
    let m = a.rows;
    check_len("equality_qp_kkt H", n, hess.rows)?;
    check_len("equality_qp_kkt A", n, a.cols)?;
    check_len("equality_qp_kkt l", n, lin.len())?;
    check_len("equality_qp_kkt b", m, b.len())?;
    let mut k = DMatrix::<f64>::zeros(n + m, n + m);
    for i in 0..n {
        for j in 0..n {
            k[(i, j)] = hess.get(i, j);
        }
    }
    for r in 0..m {
        for j in 0..n {
            let v = a.get(r, j);
            k[(n + r, j)] = v;
            k[(j, n + r)] = -v;
        }
    }
    let mut rhs = DVector::<f64>::zeros(n + m);
    for i in 0..n {
        rhs[i] = -lin[i];
    }
    for r in 0..m {
        rhs[n + r] = b[r];
    }
    let lu = k.clone().lu();
    let sol = match lu.solve(&rhs) {
        Some(mut s) => {
            let resid = &rhs - &k * &s;
            if let Some(ds) = lu.solve(&resid) {
                s += ds;
            }
            s
        }
        None => k
            .clone()
            .svd(true, true)
            .solve(&rhs, 1e-13)
            .map_err(|e| Error::Singular(e.to_string()))?,
    };
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("KKT system".into()));
    }
    Ok((
        sol.rows(0, n).iter().cloned().collect(),
        sol.rows(n, m).iter().cloned().collect(),
    ))
}

/// `min ½xᵀQx + cᵀx s.t. Ax = b` with Gaussian A, b, c and Q = GᵀG + 10⁻²·I.
/// The dense KKT solution is attached as reference.
pub fn gen_ecqp(m: usize, n: usize, seed: u64) -> Result<CompositeProblem> {
    if m == 0 || m >= n {
        return Err(invalid(format!("ECQP needs 0 < m < n, got m={m}, n={n}")));
    }
    let a = gaussian_matrix(&mut SeededStream::new(seed, streams::ECQP_A), m, n);
    let b = SeededStream::new(seed, streams::ECQP_B).normal_vec(m);
    let c = SeededStream::new(seed, streams::ECQP_C).normal_vec(n);
    let g = gaussian_matrix(&mut SeededStream::new(seed, streams::ECQP_Q), n, n);
    let mut q = g.gram_cols();
    for i in 0..n {
        q.data[i * n + i] += ECQP_SHIFT;
    }
    let lip = max_eigenvalue(&q);
    let (x, lambda) = equality_qp_kkt(&q, &c, &a, &b)?;
    let f = SmoothFn::quadratic(LinearMap::dense(q), c, Some(lip), ECQP_SHIFT)?;
    let problem = CompositeProblem::new(f, ProxFn::Zero, LinearMap::dense(a), b)?;
    let value = problem
        .objective(&x)
        .ok_or_else(|| Error::Infeasible("ECQP reference".into()))?;
    problem.with_reference(Reference { x, lambda, value })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NnqpDist {
    Gaussian,
    Uniform,
}

impl std::str::FromStr for NnqpDist {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(NnqpDist::Gaussian),
            "uniform" => Ok(NnqpDist::Uniform),
            other => Err(invalid(format!("unknown NNQP distribution {other:?}"))),
        }
    }
}

/// `min ½xᵀQx + cᵀx s.t. Ax = b, x ≥ 0` with Q = HHᵀ, H ∈ ℝ^{n×(n−100)}
/// Gaussian, A = [B, I], B Gaussian or uniform on [0,1], b uniform on [0,1]
/// and c Gaussian. No reference is attached.
pub fn gen_nnqp(m: usize, n: usize, seed: u64, dist: NnqpDist) -> Result<CompositeProblem> {
    if n <= NNQP_RANK_DEFICIT {
        return Err(invalid(format!(
            "NNQP needs n > {NNQP_RANK_DEFICIT}, got {n}"
        )));
    }
    if m == 0 || m >= n {
        return Err(invalid(format!("NNQP needs 0 < m < n, got m={m}, n={n}")));
    }
    let r = n - NNQP_RANK_DEFICIT;
    let h = gaussian_matrix(&mut SeededStream::new(seed, streams::NNQP_H), n, r);
    let q = h.gram_rows();
    let lip = max_eigenvalue(&q);
    let mut rb = SeededStream::new(seed, streams::NNQP_B);
    let bcols = n - m;
    let a = DenseMatrix::from_fn(m, n, |i, j| {
        if j < bcols {
            match dist {
                NnqpDist::Gaussian => rb.normal(),
                NnqpDist::Uniform => rb.uniform(),
            }
        } else if j - bcols == i {
            1.0
        } else {
            0.0
        }
    });
    let b = SeededStream::new(seed, streams::NNQP_RHS).uniform_vec(m);
    let c = SeededStream::new(seed, streams::NNQP_C).normal_vec(n);
    let f = SmoothFn::quadratic(LinearMap::dense(q), c, Some(lip), 0.0)?;
    CompositeProblem::new(f, ProxFn::NonNegative, LinearMap::dense(a), b)
}

/// A feasible point of an NNQP instance: x = (0, b).
pub fn nnqp_feasible_point(problem: &CompositeProblem) -> Vec<f64> {
    let (m, n) = (problem.m(), problem.n());
    let mut x = vec![0.0; n];
    x[n - m..].copy_from_slice(&problem.b);
    x
}

/// Strong convexity of the smooth z-term of [`gen_two_block_qp`].
pub const QP2_MU_H: f64 = 0.1;

/// Strongly convex two-block QP
/// `min ½‖y − c_y‖² + ½‖z − c_z‖² + ½zᵀHz + hᵀz  s.t.  By + Cz = b`
/// with H = GᵀG/n + 0.1·I, Gaussian B, C scaled by 1/√n and b = By₀ + Cz₀.
/// The dense KKT solution is attached as reference.
pub fn gen_two_block_qp(m: usize, n: usize, seed: u64) -> Result<TwoBlockProblem> {
    if m == 0 || n == 0 || m > 2 * n {
        return Err(invalid(format!(
            "two-block QP needs 0 < m ≤ 2n, got m={m}, n={n}"
        )));
    }
    let mut rng = SeededStream::new(seed, streams::QP2);
    let s = 1.0 / (n as f64).sqrt();
    let bm = DenseMatrix::from_fn(m, n, |_, _| s * rng.normal());
    let cm = DenseMatrix::from_fn(m, n, |_, _| s * rng.normal());
    let cy = rng.normal_vec(n);
    let cz = rng.normal_vec(n);
    let g = DenseMatrix::from_fn(n, n, |_, _| s * rng.normal());
    let mut hq = g.gram_cols();
    for i in 0..n {
        hq.data[i * n + i] += QP2_MU_H;
    }
    let hv = rng.normal_vec(n);
    let y0 = rng.normal_vec(n);
    let z0 = rng.normal_vec(n);
    let mut rhs = vec![0.0; m];
    let mut tmp = vec![0.0; m];
    bm.matvec_seq_into(&y0, &mut rhs);
    cm.matvec_seq_into(&z0, &mut tmp);
    for (r, t) in rhs.iter_mut().zip(&tmp) {
        *r += t;
    }

    // Reference: Hessian blockdiag(I, I + H), linear part (−c_y, −c_z + h).
    let hess = DenseMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let eye = if i == j { 1.0 } else { 0.0 };
        if i < n || j < n {
            if i < n && j < n {
                eye
            } else {
                0.0
            }
        } else {
            eye + hq.get(i - n, j - n)
        }
    });
    let mut lin: Vec<f64> = cy.iter().map(|v| -v).collect();
    lin.extend(cz.iter().zip(&hv).map(|(c, h)| h - c));
    let a = DenseMatrix::from_fn(m, 2 * n, |i, j| {
        if j < n {
            bm.get(i, j)
        } else {
            cm.get(i, j - n)
        }
    });
    let (x, lambda) = equality_qp_kkt(&hess, &lin, &a, &rhs)?;

    let lip = max_eigenvalue(&hq);
    let h = SmoothFn::quadratic(LinearMap::dense(hq), hv, Some(lip), QP2_MU_H)?;
    let problem = TwoBlockProblem::new(
        ProxFn::SquaredDistance {
            center: cy,
            weight: 1.0,
        },
        ProxFn::SquaredDistance {
            center: cz,
            weight: 1.0,
        },
        h,
        LinearMap::dense(bm),
        LinearMap::dense(cm),
        rhs,
    )?;
    let (y, z) = (x[..n].to_vec(), x[n..].to_vec());
    let value = problem
        .objective(&y, &z)
        .ok_or_else(|| Error::Infeasible("two-block QP reference".into()))?;
    let r = norm(&problem.residual(&y, &z));
    if r > 1e-9 * (1.0 + norm(&problem.rhs)) {
        return Err(Error::Singular(format!(
            "two-block QP reference residual {r:e}"
        )));
    }
    problem.with_reference(TwoBlockReference {
        y,
        z,
        lambda,
        value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ecqp_tiny_reference_is_feasible() {
        let p = gen_ecqp(1, 3, 5).unwrap();
        let r = p.reference().unwrap();
        assert!(norm(&p.residual(&r.x)) <= 1e-10);
    }

    #[test]
    fn ecqp_rejects_wide_constraints() {
        assert!(gen_ecqp(3, 3, 0).is_err());
        assert!(gen_ecqp(0, 3, 0).is_err());
    }

    #[test]
    fn ecqp_is_bit_reproducible() {
        let a = gen_ecqp(2, 6, 11).unwrap();
        let b = gen_ecqp(2, 6, 11).unwrap();
        assert_eq!(a.b, b.b);
        assert_eq!(a.reference, b.reference);
        assert_eq!(a.a.to_dense(), b.a.to_dense());
    }

    #[test]
    fn nnqp_shape_and_feasible_point() {
        assert!(gen_nnqp(5, 100, 0, NnqpDist::Gaussian).is_err());
        let p = gen_nnqp(5, 110, 1, NnqpDist::Uniform).unwrap();
        let x = nnqp_feasible_point(&p);
        assert!(x.iter().all(|v| *v >= 0.0));
        assert!(norm(&p.residual(&x)) == 0.0);
        assert!(p.b.iter().all(|v| (0.0..1.0).contains(v)));
        let a = p.a.to_dense();
        assert!((0..5).all(|i| (0..105).all(|j| (0.0..1.0).contains(&a.get(i, j)))));
    }

    #[test]
    fn two_block_reference_is_feasible() {
        let p = gen_two_block_qp(3, 6, 2).unwrap();
        let r = p.reference().unwrap();
        assert!(norm(&p.residual(&r.y, &r.z)) < 1e-10);
        assert!(p.l_h() >= QP2_MU_H);
    }
}
