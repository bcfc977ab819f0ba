//! KKT residuals, gap-to-bound conversion and empirical rate fits.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Error, Result};
use crate::ladmm::TwoBlockProblem;
use crate::lalm::CompositeProblem;
use crate::linalg::{dist_sq, norm};
use crate::record::RunRecord;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KktResidual {
    /// ‖Ax − b‖ (or ‖By + Cz − b‖).
    pub primal: f64,
    /// Distance of x from the prox-gradient fixed point.
    pub dual: f64,
}

impl KktResidual {
    pub fn max(&self) -> f64 {
        self.primal.max(self.dual)
    }
}

/// `(‖Ax − b‖, ‖x − prox_g(x − (∇f(x) − Aᵀλ), 1)‖)`.
pub fn kkt_residual(problem: &CompositeProblem, x: &[f64], lambda: &[f64]) -> Result<KktResidual> {
    check_len("kkt_residual x", problem.n(), x.len())?;
    check_len("kkt_residual lambda", problem.m(), lambda.len())?;
    let primal = norm(&problem.residual(x));
    let grad = problem.f.gradient(x);
    let at_l = problem.a.adjoint(lambda)?;
    let v: Vec<f64> = x
        .iter()
        .zip(&grad)
        .zip(&at_l)
        .map(|((xi, gi), ai)| xi - (gi - ai))
        .collect();
    let p = problem.g.prox(&v, 1.0)?;
    Ok(KktResidual {
        primal,
        dual: dist_sq(x, &p).sqrt(),
    })
}

/// Two-block analogue: the dual part stacks
/// `y − prox_f(y + Bᵀλ, 1)` and `z − prox_g(z − (∇h(z) − Cᵀλ), 1)`.
pub fn kkt_residual_two_block(
    problem: &TwoBlockProblem,
    y: &[f64],
    z: &[f64],
    lambda: &[f64],
) -> Result<KktResidual> {
    check_len("kkt_residual_two_block y", problem.ny(), y.len())?;
    check_len("kkt_residual_two_block z", problem.nz(), z.len())?;
    check_len("kkt_residual_two_block lambda", problem.m(), lambda.len())?;
    let primal = norm(&problem.residual(y, z));
    let bt = problem.b_map.adjoint(lambda)?;
    let vy: Vec<f64> = y.iter().zip(&bt).map(|(a, b)| a + b).collect();
    let py = problem.f.prox(&vy, 1.0)?;
    let ct = problem.c_map.adjoint(lambda)?;
    let gh = problem.h.gradient(z);
    let vz: Vec<f64> = z
        .iter()
        .zip(&gh)
        .zip(&ct)
        .map(|((zi, gi), ci)| zi - (gi - ci))
        .collect();
    let pz = problem.g.prox(&vz, 1.0)?;
    Ok(KktResidual {
        primal,
        dual: (dist_sq(y, &py) + dist_sq(z, &pz)).sqrt(),
    })
}

/// A gap bound of the form `φ(λ) = constant + quadratic·‖λ‖²`, valid for
/// every multiplier λ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticGapBound {
    pub constant: f64,
    pub quadratic: f64,
}

/// sup of φ over the ball ‖λ‖ ≤ ρ. Requires ρ > ‖λ*‖.
pub fn bound_convert(phi: QuadraticGapBound, rho: f64, lambda_star_norm: f64) -> Result<f64> {
    if !(rho > lambda_star_norm) {
        return Err(invalid(format!(
            "ρ must exceed ‖λ*‖: ρ={rho}, ‖λ*‖={lambda_star_norm}"
        )));
    }
    if phi.quadratic < 0.0 {
        return Err(invalid("quadratic coefficient must be nonnegative"));
    }
    Ok(phi.constant + phi.quadratic * rho * rho)
}

/// Feasibility bound implied by a gap bound ε valid on the ρ-ball:
/// ‖Ax − b‖ ≤ ε / (ρ − ‖λ*‖).
pub fn feasibility_from_gap(eps: f64, rho: f64, lambda_star_norm: f64) -> Result<f64> {
    if !(rho > lambda_star_norm) {
        return Err(invalid(format!(
            "ρ must exceed ‖λ*‖: ρ={rho}, ‖λ*‖={lambda_star_norm}"
        )));
    }
    Ok(eps / (rho - lambda_star_norm))
}

/// Least-squares slope of log(field) against log(k) over rows with
/// k ∈ [k_lo, k_hi].
pub fn rate_fit(record: &RunRecord, k_lo: usize, k_hi: usize, field: &str) -> Result<f64> {
    let col = record.column(field)?;
    let pts: Vec<(usize, Option<f64>)> = record
        .rows
        .iter()
        .zip(col)
        .filter(|(r, _)| r.k >= k_lo && r.k <= k_hi)
        .map(|(r, v)| (r.k, v))
        .collect();
    let mut xs = Vec::with_capacity(pts.len());
    let mut ys = Vec::with_capacity(pts.len());
    for (k, v) in pts {
        match v {
            Some(v) if v > 0.0 && v.is_finite() => {
                xs.push((k as f64).ln());
                ys.push(v.ln());
            }
            other => {
                return Err(Error::Format(format!(
                "{field} at k={k} is {other:?}; the fit needs positive values (shrink the range)"
            )))
            }
        }
    }
    log_log_slope(&xs, &ys)
}

/// Slope of the least-squares line through (xs, ys).
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() < 2 {
        return Err(invalid("rate fit needs at least two points"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(invalid("rate fit needs distinct k values"));
    }
    Ok(sxy / sxx)
}
