//! Accelerated linearized ADMM for
//! `min f(y) + g(z) + h(z)  s.t.  By + Cz = b`
//! with prox-friendly f, g and smooth h linearized at the current z.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::InnerOptions;
use crate::error::{check_len, invalid, Error, Result};
use crate::functions::{ProxFn, SmoothFn};
use crate::lalm::{InequalitySlack, RateBound};
use crate::linalg::{dist_sq, dot, norm, norm_sq, sub};
use crate::operators::{LinearMap, ScalingOperator};
use crate::record::{Point, RunFailure, RunMeta, RunRecord, RunResult, TraceRow};
use crate::subproblem::{BlockSubproblem, GramCache, SubproblemInfo};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoBlockReference {
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub lambda: Vec<f64>,
    pub value: f64,
}

/// `min f(y) + g(z) + h(z)  s.t.  By + Cz = b`.
#[derive(Clone, Debug)]
pub struct TwoBlockProblem {
    pub f: ProxFn,
    pub g: ProxFn,
    pub h: SmoothFn,
    pub b_map: LinearMap,
    pub c_map: LinearMap,
    pub rhs: Vec<f64>,
    pub reference: Option<TwoBlockReference>,
}

impl TwoBlockProblem {
    pub fn new(
        f: ProxFn,
        g: ProxFn,
        h: SmoothFn,
        b_map: LinearMap,
        c_map: LinearMap,
        rhs: Vec<f64>,
    ) -> Result<Self> {
        check_len("TwoBlockProblem: B.rows vs b", rhs.len(), b_map.rows())?;
        check_len("TwoBlockProblem: C.rows vs b", rhs.len(), c_map.rows())?;
        check_len("TwoBlockProblem: h vs C.cols", c_map.cols(), h.dim())?;
        f.validate(b_map.cols())?;
        g.validate(c_map.cols())?;
        Ok(TwoBlockProblem {
            f,
            g,
            h,
            b_map,
            c_map,
            rhs,
            reference: None,
        })
    }

    pub fn with_reference(mut self, r: TwoBlockReference) -> Result<Self> {
        check_len("TwoBlockReference y", self.ny(), r.y.len())?;
        check_len("TwoBlockReference z", self.nz(), r.z.len())?;
        check_len("TwoBlockReference lambda", self.m(), r.lambda.len())?;
        self.reference = Some(r);
        Ok(self)
    }

    pub fn ny(&self) -> usize {
        self.b_map.cols()
    }

    pub fn nz(&self) -> usize {
        self.c_map.cols()
    }

    pub fn m(&self) -> usize {
        self.rhs.len()
    }

    pub fn mu_g(&self) -> f64 {
        self.g.strong_convexity()
    }

    pub fn mu_h(&self) -> f64 {
        self.h.strong_convexity()
    }

    pub fn l_h(&self) -> f64 {
        self.h.lipschitz()
    }

    /// f(y) + g(z) + h(z); `None` outside the domains.
    pub fn objective(&self, y: &[f64], z: &[f64]) -> Option<f64> {
        Some(self.f.value(y)? + self.g.value(z)? + self.h.value(z))
    }

    /// `By + Cz − b`.
    pub fn residual(&self, y: &[f64], z: &[f64]) -> Vec<f64> {
        let by = self.b_map.apply_vec(y);
        let cz = self.c_map.apply_vec(z);
        by.iter()
            .zip(&cz)
            .zip(&self.rhs)
            .map(|((a, c), b)| a + c - b)
            .collect()
    }

    pub fn reference(&self) -> Result<&TwoBlockReference> {
        self.reference
            .as_ref()
            .ok_or_else(|| Error::MissingReference("problem has no reference solution".into()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadmmState {
    pub k: usize,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl LadmmState {
    /// λ¹ = 0.
    pub fn initial(y1: Vec<f64>, z1: Vec<f64>, m: usize) -> Self {
        LadmmState {
            k: 1,
            y: y1,
            z: z1,
            lambda: vec![0.0; m],
        }
    }
}

#[derive(Clone, Debug)]
pub struct LadmmParams {
    pub beta: f64,
    pub gamma: f64,
    pub p: ScalingOperator,
    pub q: ScalingOperator,
}

/// Constant part of the adaptive schedule.
#[derive(Clone, Debug)]
pub struct AdaptiveLadmmConfig {
    pub gamma: f64,
    /// Scalar p with P^k = (p/(k+1))·I.
    pub p: f64,
    pub q: ScalingOperator,
    pub eta: f64,
    pub k0: usize,
}

/// ⌈1 + 2(L_h − μ_h)/(μ_g + μ_h)⌉, at least 1.
pub fn compute_k0(l_h: f64, mu_g: f64, mu_h: f64) -> Result<usize> {
    let s = mu_g + mu_h;
    if !(s > 0.0) {
        return Err(Error::Schedule(format!("μ_g + μ_h > 0 required, got {s}")));
    }
    let raw = (1.0 + 2.0 * (l_h - mu_h) / s).ceil();
    Ok(if raw < 1.0 { 1 } else { raw as usize })
}

impl AdaptiveLadmmConfig {
    /// Validates ηγCᵀC ⪯ Q ⪯ ((μ_g+μ_h)/2)·I and derives k₀.
    pub fn new(
        gamma: f64,
        p: f64,
        q: ScalingOperator,
        eta: f64,
        problem: &TwoBlockProblem,
    ) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::Schedule(format!("γ > 0 required, got {gamma}")));
        }
        if !(p >= 0.0) {
            return Err(Error::Schedule(format!("p ≥ 0 required, got {p}")));
        }
        if !(eta >= 1.0) {
            return Err(Error::Schedule(format!("η ≥ 1 required, got {eta}")));
        }
        q.validate_dim(problem.nz())?;
        let (mu_g, mu_h, l_h) = (problem.mu_g(), problem.mu_h(), problem.l_h());
        let k0 = compute_k0(l_h, mu_g, mu_h)?;
        let cn = problem.c_map.norm_sq();
        let tol = 1e-10 * q.identity_part().abs().max(gamma * cn).max(1e-300);
        let lower_margin = match &q {
            ScalingOperator::IdentityMinusGram { a, c, map } if map.same_as(&problem.c_map) => {
                // aI − (c + ηγ)CᵀC
                let coef = c + eta * gamma;
                a.min(a - coef * cn)
            }
            ScalingOperator::IdentityMinusGram { map, .. } => {
                let (lo, _) = q.eigen_bounds(map.norm_sq());
                lo - eta * gamma * cn
            }
            ScalingOperator::ScaledIdentity(a) => a - eta * gamma * cn,
        };
        if lower_margin < -tol {
            return Err(Error::Schedule(format!(
                "ηγCᵀC ⪯ Q not certified (margin {lower_margin:e})"
            )));
        }
        let qmap_norm = q.gram_part().map(|(_, m)| m.norm_sq()).unwrap_or(0.0);
        let (_, hi) = q.eigen_bounds(qmap_norm);
        let cap = 0.5 * (mu_g + mu_h);
        if hi > cap + tol {
            return Err(Error::Schedule(format!(
                "Q ⪯ ((μ_g+μ_h)/2)·I not certified: λ_max(Q) ≤ {hi}, cap {cap}"
            )));
        }
        if let Some((_, m)) = q.gram_part() {
            if !m.same_as(&problem.c_map) {
                return Err(invalid(
                    "adaptive Q^k needs Q to be a·I or a·I − c·CᵀC with the constraint map C",
                ));
            }
        }
        Ok(AdaptiveLadmmConfig {
            gamma,
            p,
            q,
            eta,
            k0,
        })
    }

    /// Upper end of the spectrum enclosure of Q.
    pub(crate) fn q_max(&self) -> f64 {
        let ns = self.q.gram_part().map(|(_, m)| m.norm_sq()).unwrap_or(0.0);
        self.q.eigen_bounds(ns).1
    }
}

#[derive(Clone, Debug)]
pub enum LadmmSchedule {
    /// β_k = γ_k = γ, P^k = P, Q^k = Q.
    Constant {
        gamma: f64,
        p: ScalingOperator,
        q: ScalingOperator,
    },
    /// β_k = γ_k = (k+1)γ, P^k = (p/(k+1))·I, Q^k = (k+1)(Q − γCᵀC) + L_h·I.
    Adaptive {
        cfg: AdaptiveLadmmConfig,
        l_h: f64,
        c_map: LinearMap,
    },
}

impl LadmmSchedule {
    /// Requires γ > 0, P ⪰ 0 and Q ⪰ L_h·I.
    pub fn constant(
        gamma: f64,
        p: ScalingOperator,
        q: ScalingOperator,
        problem: &TwoBlockProblem,
    ) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::Schedule(format!("γ > 0 required, got {gamma}")));
        }
        p.validate_dim(problem.ny())?;
        q.validate_dim(problem.nz())?;
        if !p.is_psd_certified() {
            return Err(Error::Schedule("P ⪰ 0 not certified".into()));
        }
        let l_h = problem.l_h();
        if !q.is_psd_certified_shifted(l_h) {
            return Err(Error::Schedule(format!(
                "Q ⪰ L_h·I not certified (L_h={l_h})"
            )));
        }
        Ok(LadmmSchedule::Constant { gamma, p, q })
    }

    pub fn adaptive(cfg: AdaptiveLadmmConfig, problem: &TwoBlockProblem) -> Self {
        LadmmSchedule::Adaptive {
            cfg,
            l_h: problem.l_h(),
            c_map: problem.c_map.clone(),
        }
    }

    pub fn params(&self, k: usize) -> LadmmParams {
        match self {
            LadmmSchedule::Constant { gamma, p, q } => LadmmParams {
                beta: *gamma,
                gamma: *gamma,
                p: p.clone(),
                q: q.clone(),
            },
            LadmmSchedule::Adaptive { cfg, l_h, c_map } => {
                let s = (k + 1) as f64;
                let gk = s * cfg.gamma;
                let (a, c) = match &cfg.q {
                    ScalingOperator::ScaledIdentity(a) => (*a, 0.0),
                    ScalingOperator::IdentityMinusGram { a, c, .. } => (*a, *c),
                };
                let qa = s * a + l_h;
                let qc = s * (c + cfg.gamma);
                let q = if qc == 0.0 {
                    ScalingOperator::ScaledIdentity(qa)
                } else {
                    ScalingOperator::IdentityMinusGram {
                        a: qa,
                        c: qc,
                        map: c_map.clone(),
                    }
                };
                LadmmParams {
                    beta: gk,
                    gamma: gk,
                    p: ScalingOperator::ScaledIdentity(cfg.p / s),
                    q,
                }
            }
        }
    }

    pub fn is_adaptive(&self) -> bool {
        matches!(self, LadmmSchedule::Adaptive { .. })
    }

    pub fn name(&self) -> &'static str {
        if self.is_adaptive() {
            "adaptive"
        } else {
            "constant"
        }
    }
}

#[derive(Debug, Default)]
pub(crate) struct LadmmWorkspace {
    b: GramCache,
    p: GramCache,
    c: GramCache,
    q: GramCache,
}

/// One iteration: y-update, z-update with h linearized at zᵏ, multiplier step.
pub fn ladmm_step(
    problem: &TwoBlockProblem,
    state: &LadmmState,
    params: &LadmmParams,
    inner: &InnerOptions,
) -> Result<LadmmState> {
    let mut ws = LadmmWorkspace::default();
    step_with(problem, state, params, inner, &mut ws).map(|(s, _)| s)
}

pub(crate) fn step_with(
    problem: &TwoBlockProblem,
    state: &LadmmState,
    params: &LadmmParams,
    inner: &InnerOptions,
    ws: &mut LadmmWorkspace,
) -> Result<(LadmmState, SubproblemInfo)> {
    check_len("ladmm_step y", problem.ny(), state.y.len())?;
    check_len("ladmm_step z", problem.nz(), state.z.len())?;
    check_len("ladmm_step lambda", problem.m(), state.lambda.len())?;
    if !(params.beta > 0.0 && params.gamma > 0.0) {
        return Err(invalid("β_k and γ_k must be positive"));
    }

    let cz = problem.c_map.apply_vec(&state.z);
    let target_y: Vec<f64> = problem.rhs.iter().zip(&cz).map(|(b, c)| b - c).collect();
    let lin_y: Vec<f64> = problem
        .b_map
        .adjoint_vec(&state.lambda)
        .into_iter()
        .map(|v| -v)
        .collect();
    let (y_next, info_y) = BlockSubproblem {
        prox: &problem.f,
        map: &problem.b_map,
        target: &target_y,
        linear: &lin_y,
        beta: params.beta,
        weight: &params.p,
        anchor: &state.y,
    }
    .solve(&mut ws.b, &mut ws.p, inner)?;

    let by = problem.b_map.apply_vec(&y_next);
    let target_z: Vec<f64> = problem.rhs.iter().zip(&by).map(|(b, v)| b - v).collect();
    let mut lin_z = problem.h.gradient(&state.z);
    let ct_lambda = problem.c_map.adjoint_vec(&state.lambda);
    for (l, c) in lin_z.iter_mut().zip(&ct_lambda) {
        *l -= c;
    }
    let (z_next, info_z) = BlockSubproblem {
        prox: &problem.g,
        map: &problem.c_map,
        target: &target_z,
        linear: &lin_z,
        beta: params.beta,
        weight: &params.q,
        anchor: &state.z,
    }
    .solve(&mut ws.c, &mut ws.q, inner)?;

    let r = problem.residual(&y_next, &z_next);
    let lambda_next = state
        .lambda
        .iter()
        .zip(&r)
        .map(|(l, ri)| l - params.gamma * ri)
        .collect();
    Ok((
        LadmmState {
            k: state.k + 1,
            y: y_next,
            z: z_next,
            lambda: lambda_next,
        },
        SubproblemInfo {
            inner_iterations: info_y.inner_iterations + info_z.inner_iterations,
            residual: info_y.residual.max(info_z.residual),
        },
    ))
}

/// φ_k(y, z, λ) evaluated at `state` (whose iteration index is k).
pub fn phi(
    k: usize,
    cfg: &AdaptiveLadmmConfig,
    state: &LadmmState,
    y: &[f64],
    z: &[f64],
    lambda: &[f64],
    problem: &TwoBlockProblem,
) -> Result<f64> {
    if k < 1 {
        return Err(invalid("φ_k needs k ≥ 1"));
    }
    check_len("phi y", state.y.len(), y.len())?;
    check_len("phi z", state.z.len(), z.len())?;
    check_len("phi lambda", state.lambda.len(), lambda.len())?;
    let kf = k as f64;
    let w = kf + cfg.k0 as f64;
    let dz = sub(&state.z, z);
    let y_term = w / (2.0 * kf) * cfg.p * dist_sq(&state.y, y);
    let z_term =
        0.5 * w * (kf * cfg.q.norm_sq(&dz)? + (problem.l_h() + problem.mu_g()) * norm_sq(&dz));
    let l_term = w / (2.0 * cfg.gamma * kf) * dist_sq(lambda, &state.lambda);
    Ok(y_term + z_term + l_term)
}

/// Evaluates the one-iteration inequality of the accelerated ADMM for a
/// feasible `(y_ref, z_ref)` and arbitrary `lambda_test`.
#[allow(clippy::too_many_arguments)]
pub fn check_one_iter_ladmm(
    prev: &LadmmState,
    next: &LadmmState,
    params: &LadmmParams,
    y_ref: &[f64],
    z_ref: &[f64],
    lambda_test: &[f64],
    problem: &TwoBlockProblem,
) -> Result<InequalitySlack> {
    check_len("check_one_iter_ladmm y", problem.ny(), y_ref.len())?;
    check_len("check_one_iter_ladmm z", problem.nz(), z_ref.len())?;
    check_len(
        "check_one_iter_ladmm lambda",
        problem.m(),
        lambda_test.len(),
    )?;
    let rr = norm(&problem.residual(y_ref, z_ref));
    if rr > 1e-8 * (1.0 + norm(&problem.rhs)) {
        return Err(Error::Infeasible(format!(
            "reference has ‖By+Cz−b‖ = {rr:e}"
        )));
    }
    let f_ref = problem
        .objective(y_ref, z_ref)
        .ok_or_else(|| Error::Infeasible("reference outside the domains".into()))?;
    let f_next = problem
        .objective(&next.y, &next.z)
        .ok_or_else(|| Error::Infeasible("iterate outside the domains".into()))?;
    let r_next = problem.residual(&next.y, &next.z);
    let lhs = [f_next, -f_ref, -dot(lambda_test, &r_next)];

    let (beta, gamma) = (params.beta, params.gamma);
    let dl: Vec<f64> = sub(&prev.lambda, &next.lambda);
    let lam_off = sub(lambda_test, &prev.lambda);
    let t1a = -dot(&dl, &lam_off) / gamma;
    let t1b = -beta / (gamma * gamma) * norm_sq(&dl);

    let dz_step = sub(&next.z, &prev.z);
    let c_step = problem.c_map.apply_vec(&dz_step);
    let c_off = problem.c_map.apply_vec(&sub(&next.z, z_ref));
    let t2a = beta / gamma * dot(&dl, &c_step);
    let t2b = -beta * dot(&c_off, &c_step);

    let t3 = 0.5 * problem.l_h() * norm_sq(&dz_step);
    let t4 = -0.5 * problem.mu_h() * dist_sq(&prev.z, z_ref);
    let t5 = -0.5 * problem.mu_g() * dist_sq(&next.z, z_ref);
    let py = params.p.apply(&sub(&next.y, &prev.y))?;
    let t6 = -dot(&sub(&next.y, y_ref), &py);
    let qz = params.q.apply(&dz_step)?;
    let t7 = -dot(&sub(&next.z, z_ref), &qz);
    Ok(InequalitySlack::from_terms(
        &lhs,
        &[t1a, t1b, t2a, t2b, t3, t4, t5, t6, t7],
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveBounds {
    /// Bound on ‖zᵗ − z*‖².
    pub z_dist: f64,
    /// Bound on ‖zᵗ − z*‖²_Q.
    pub z_q: f64,
    /// Bounds for the weighted averages (ỹᵗ⁺¹, z̃ᵗ⁺¹).
    pub obj: f64,
    pub feas: Option<f64>,
}

/// Certificates of the adaptive schedule: z-iterate bounds at index t and
/// weighted-ergodic bounds after t iterations.
#[allow(clippy::too_many_arguments)]
pub fn bounds_ladmm_adaptive(
    t: usize,
    cfg: &AdaptiveLadmmConfig,
    y1: &[f64],
    z1: &[f64],
    ystar: &[f64],
    zstar: &[f64],
    lambda_star: &[f64],
    problem: &TwoBlockProblem,
) -> Result<AdaptiveBounds> {
    if t < 1 {
        return Err(invalid("bounds need t ≥ 1"));
    }
    let s1 = LadmmState::initial(y1.to_vec(), z1.to_vec(), lambda_star.len());
    let phi1 = phi(1, cfg, &s1, ystar, zstar, lambda_star, problem)?;
    let twice: Vec<f64> = lambda_star.iter().map(|v| 2.0 * v).collect();
    let phi1_2 = phi(1, cfg, &s1, ystar, zstar, &twice, problem)?;
    let tf = t as f64;
    let k0 = cfg.k0 as f64;
    let obj = 2.0 * phi1_2 / (tf * (tf + 2.0 * k0 + 3.0));
    let ln = norm(lambda_star);
    let denom_dist = problem.l_h() + problem.mu_h() + 2.0 * problem.mu_g();
    Ok(AdaptiveBounds {
        z_dist: 2.0 * phi1 / ((tf + k0) * denom_dist),
        z_q: 2.0 * phi1 / (tf * (tf + k0)),
        obj,
        feas: (ln > 0.0).then(|| obj / ln),
    })
}

/// (4‖λ*‖²/γ + ‖y¹−y*‖²_P + ‖z¹−z*‖²_{Q+γCᵀC}) / (2t) for the uniform averages.
#[allow(clippy::too_many_arguments)]
pub fn bounds_ladmm_constant(
    t: usize,
    gamma: f64,
    p: &ScalingOperator,
    q: &ScalingOperator,
    c_map: &LinearMap,
    y1: &[f64],
    z1: &[f64],
    ystar: &[f64],
    zstar: &[f64],
    lambda_star: &[f64],
) -> Result<RateBound> {
    if t < 1 {
        return Err(invalid("bounds need t ≥ 1"));
    }
    let dz = sub(z1, zstar);
    let ln = norm(lambda_star);
    let num = 4.0 * ln * ln / gamma
        + p.norm_sq(&sub(y1, ystar))?
        + q.norm_sq(&dz)?
        + gamma * norm_sq(&c_map.apply(&dz)?);
    Ok(RateBound::from_numerator(num / (2.0 * t as f64), ln))
}

/// Normalized weights (k+k₀+1)/Σ for k = 1..t.
pub fn weighted_average_weights(t: usize, k0: usize) -> Vec<f64> {
    let raw: Vec<f64> = (1..=t).map(|k| (k + k0 + 1) as f64).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Smallest eigenvalue margin, relative to the coefficient scale, of
/// (k+k₀)(kQ + (L_h+μ_g)I) − (k+k₀+1)((k+1)Q + (L_h−μ_h)I) over k = 1..k_max,
/// using the upper end of the spectrum enclosure of Q. Nonnegative means
/// certified.
pub fn matrix_inequality_margin(
    cfg: &AdaptiveLadmmConfig,
    problem: &TwoBlockProblem,
    k_max: usize,
) -> f64 {
    let q_hi = cfg.q_max();
    let (l_h, mu_g, mu_h) = (problem.l_h(), problem.mu_g(), problem.mu_h());
    let k0 = cfg.k0 as f64;
    let mut worst = f64::INFINITY;
    for k in 1..=k_max {
        let kf = k as f64;
        // coefficient of Q is −(2k + k₀ + 1); the identity part:
        let ident = (kf + k0) * (l_h + mu_g) - (kf + k0 + 1.0) * (l_h - mu_h);
        let qcoef = 2.0 * kf + k0 + 1.0;
        let scale = 1.0 + ident.abs() + qcoef * q_hi.abs();
        worst = worst.min((ident - qcoef * q_hi) / scale);
    }
    worst
}

#[derive(Clone, Debug)]
pub struct LadmmOptions {
    pub max_iter: usize,
    pub inner: InnerOptions,
    pub checks: bool,
}

impl Default for LadmmOptions {
    fn default() -> Self {
        LadmmOptions {
            max_iter: 1000,
            inner: InnerOptions::default(),
            checks: true,
        }
    }
}

pub struct LadmmEvent<'a> {
    pub t: usize,
    pub prev: &'a LadmmState,
    pub next: &'a LadmmState,
    pub params: &'a LadmmParams,
    pub info: SubproblemInfo,
}

pub fn run_ladmm(
    problem: &TwoBlockProblem,
    schedule: &LadmmSchedule,
    y1: &[f64],
    z1: &[f64],
    opts: &LadmmOptions,
) -> RunResult {
    run_ladmm_observed(problem, schedule, y1, z1, opts, &mut |_| {})
}

struct RunningAverage {
    y: Vec<f64>,
    z: Vec<f64>,
    total: f64,
}

impl RunningAverage {
    fn new(ny: usize, nz: usize) -> Self {
        RunningAverage {
            y: vec![0.0; ny],
            z: vec![0.0; nz],
            total: 0.0,
        }
    }

    fn push(&mut self, w: f64, y: &[f64], z: &[f64]) {
        self.total += w;
        let s = w / self.total;
        for (a, v) in self.y.iter_mut().zip(y) {
            *a += s * (v - *a);
        }
        for (a, v) in self.z.iter_mut().zip(z) {
            *a += s * (v - *a);
        }
    }
}

/// [`run_ladmm`] with a callback invoked after every iteration.
pub fn run_ladmm_observed(
    problem: &TwoBlockProblem,
    schedule: &LadmmSchedule,
    y1: &[f64],
    z1: &[f64],
    opts: &LadmmOptions,
    observer: &mut dyn FnMut(&LadmmEvent<'_>),
) -> RunResult {
    let start = Instant::now();
    let mut record = RunRecord {
        meta: RunMeta {
            solver: "ladmm".into(),
            schedule: schedule.name().into(),
            seed: None,
            subtol: Some(opts.inner.subtol),
        },
        ..Default::default()
    };
    let fail = |error: Error, record: RunRecord| RunFailure {
        error,
        partial: Box::new(record),
    };
    if let Err(e) = check_len("run_ladmm y1", problem.ny(), y1.len())
        .and_then(|_| check_len("run_ladmm z1", problem.nz(), z1.len()))
    {
        return Err(fail(e, record));
    }
    if problem.objective(y1, z1).is_none() {
        return Err(fail(
            Error::Infeasible("initial point outside the domains".into()),
            record,
        ));
    }
    let mut state = LadmmState::initial(y1.to_vec(), z1.to_vec(), problem.m());
    record.initial = Point::pair(state.y.clone(), state.z.clone(), state.lambda.clone());
    record.last = record.initial.clone();
    record.certificate = record.initial.clone();

    let reference = problem.reference.as_ref();
    let mut ws = LadmmWorkspace::default();
    let mut uniform = RunningAverage::new(problem.ny(), problem.nz());
    let mut weighted = RunningAverage::new(problem.ny(), problem.nz());
    let k0 = match schedule {
        LadmmSchedule::Adaptive { cfg, .. } => Some(cfg.k0),
        LadmmSchedule::Constant { .. } => None,
    };

    for t in 1..=opts.max_iter {
        let params = schedule.params(t);
        let (next, info) = match step_with(problem, &state, &params, &opts.inner, &mut ws) {
            Ok(v) => v,
            Err(e) => return Err(fail(e, record)),
        };
        record.inner_iterations += info.inner_iterations;
        record.max_inner_residual = record.max_inner_residual.max(info.residual);
        uniform.push(1.0, &next.y, &next.z);
        if let Some(k0) = k0 {
            weighted.push((t + k0 + 1) as f64, &next.y, &next.z);
        }
        let cert = if k0.is_some() { &weighted } else { &uniform };

        let mut row = TraceRow {
            k: t,
            feas: Some(norm(&problem.residual(&cert.y, &cert.z))),
            ..Default::default()
        };
        if let Some(rf) = reference {
            row.obj_err = problem
                .objective(&cert.y, &cert.z)
                .map(|v| (v - rf.value).abs());
            match schedule {
                LadmmSchedule::Adaptive { cfg, .. } => {
                    if let Ok(b) =
                        bounds_ladmm_adaptive(t, cfg, y1, z1, &rf.y, &rf.z, &rf.lambda, problem)
                    {
                        row.bound_obj = Some(b.obj);
                        row.bound_feas = b.feas;
                    }
                    row.phi = phi(t + 1, cfg, &next, &rf.y, &rf.z, &rf.lambda, problem).ok();
                }
                LadmmSchedule::Constant { gamma, p, q } => {
                    if let Ok(b) = bounds_ladmm_constant(
                        t,
                        *gamma,
                        p,
                        q,
                        &problem.c_map,
                        y1,
                        z1,
                        &rf.y,
                        &rf.z,
                        &rf.lambda,
                    ) {
                        row.bound_obj = Some(b.obj);
                        row.bound_feas = b.feas;
                    }
                }
            }
            if opts.checks {
                match check_one_iter_ladmm(
                    &state, &next, &params, &rf.y, &rf.z, &rf.lambda, problem,
                ) {
                    Ok(s) => row.ineq_slack = Some(s.normalized()),
                    Err(e) => return Err(fail(e, record)),
                }
            }
        }
        observer(&LadmmEvent {
            t,
            prev: &state,
            next: &next,
            params: &params,
            info,
        });
        row.wall_time_s = start.elapsed().as_secs_f64();
        record.rows.push(row);
        record.last = Point::pair(next.y.clone(), next.z.clone(), next.lambda.clone());
        record.certificate = Point::pair(cert.y.clone(), cert.z.clone(), next.lambda.clone());
        state = next;
    }
    if opts.max_iter > 0 {
        record.uniform_average = Some(Point::pair(
            uniform.y.clone(),
            uniform.z.clone(),
            state.lambda.clone(),
        ));
        if k0.is_some() {
            record.weighted_average = Some(Point::pair(
                weighted.y.clone(),
                weighted.z.clone(),
                state.lambda.clone(),
            ));
        }
    }
    Ok(record)
}

/// Σ (k+k₀+1)/(k+1)·‖λᵏ − λᵏ⁺¹‖² term for one step, used by the multiplier
/// summability check.
pub fn multiplier_increment(k: usize, k0: usize, prev: &LadmmState, next: &LadmmState) -> f64 {
    (k + k0 + 1) as f64 / (k + 1) as f64 * dist_sq(&prev.lambda, &next.lambda)
}

/// y and z stacked, convenient for iterate comparisons.
pub fn stack(y: &[f64], z: &[f64]) -> Vec<f64> {
    let mut v = y.to_vec();
    v.extend_from_slice(z);
    v
}
