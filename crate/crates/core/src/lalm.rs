//! Accelerated linearized augmented Lagrangian method for
//! `min f(x) + g(x)  s.t.  Ax = b`.
//!
//! Each iteration evaluates ∇f at the blended point x̂ = (1−α)x̄ + αx, solves a
//! proximal subproblem for x, updates the aggregate x̄ and takes a multiplier
//! step of size γ.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::InnerOptions;
use crate::error::{check_len, invalid, Error, Result};
use crate::functions::{ProxFn, SmoothFn};
use crate::linalg::{dist_sq, dot, lerp, norm, norm_sq, sub};
use crate::operators::{LinearMap, ScalingOperator};
use crate::record::{Point, RunFailure, RunMeta, RunRecord, RunResult, TraceRow};
use crate::subproblem::{BlockSubproblem, GramCache, SubproblemInfo};

/// Primal-dual solution used for diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub x: Vec<f64>,
    pub lambda: Vec<f64>,
    pub value: f64,
}

/// `min f(x) + g(x)  s.t.  Ax = b`.
#[derive(Clone, Debug)]
pub struct CompositeProblem {
    pub f: SmoothFn,
    pub g: ProxFn,
    pub a: LinearMap,
    pub b: Vec<f64>,
    pub reference: Option<Reference>,
}

impl CompositeProblem {
    pub fn new(f: SmoothFn, g: ProxFn, a: LinearMap, b: Vec<f64>) -> Result<Self> {
        check_len("CompositeProblem: b vs A.rows", a.rows(), b.len())?;
        check_len("CompositeProblem: f vs A.cols", a.cols(), f.dim())?;
        g.validate(a.cols())?;
        Ok(CompositeProblem {
            f,
            g,
            a,
            b,
            reference: None,
        })
    }

    pub fn with_reference(mut self, reference: Reference) -> Result<Self> {
        check_len("Reference x", self.n(), reference.x.len())?;
        check_len("Reference lambda", self.m(), reference.lambda.len())?;
        self.reference = Some(reference);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.a.cols()
    }

    pub fn m(&self) -> usize {
        self.a.rows()
    }

    /// F(x) = f(x) + g(x); `None` outside the domain of g.
    pub fn objective(&self, x: &[f64]) -> Option<f64> {
        self.g.value(x).map(|gv| self.f.value(x) + gv)
    }

    /// `Ax − b`.
    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut r = self.a.apply_vec(x);
        for (ri, bi) in r.iter_mut().zip(&self.b) {
            *ri -= bi;
        }
        r
    }

    pub fn reference(&self) -> Result<&Reference> {
        self.reference
            .as_ref()
            .ok_or_else(|| Error::MissingReference("problem has no reference solution".into()))
    }
}

/// F(x) − ⟨λ, Ax−b⟩ + (β/2)‖Ax−b‖²; `None` outside the domain of g.
pub fn augmented_lagrangian(
    problem: &CompositeProblem,
    x: &[f64],
    lambda: &[f64],
    beta: f64,
) -> Result<Option<f64>> {
    check_len("augmented_lagrangian x", problem.n(), x.len())?;
    check_len("augmented_lagrangian lambda", problem.m(), lambda.len())?;
    let r = problem.residual(x);
    Ok(problem
        .objective(x)
        .map(|fx| fx - dot(lambda, &r) + 0.5 * beta * norm_sq(&r)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LalmState {
    pub k: usize,
    pub x: Vec<f64>,
    pub xbar: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl LalmState {
    /// x̄¹ = x¹ and λ¹ = 0.
    pub fn initial(x1: Vec<f64>, m: usize) -> Self {
        LalmState {
            k: 1,
            xbar: x1.clone(),
            x: x1,
            lambda: vec![0.0; m],
        }
    }
}

#[derive(Clone, Debug)]
pub struct LalmParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub p: ScalingOperator,
}

/// Rule producing β_k from γ_k in the adaptive schedule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum BetaRule {
    /// β_k = γ_k
    EqualGamma,
    /// β_k = c·γ_k with c ≥ 1/2.
    Scaled(f64),
}

#[derive(Clone, Debug)]
pub enum LalmSchedule {
    /// α = 1, fixed β, γ and P.
    Constant {
        beta: f64,
        gamma: f64,
        p: ScalingOperator,
    },
    /// α_k = 2/(k+1), γ_k = kγ, β_k from the rule, P^k = (η/k)·I.
    Adaptive {
        gamma: f64,
        eta: f64,
        beta_rule: BetaRule,
    },
}

impl LalmSchedule {
    /// Constant schedule with P = η·I − β·AᵀA when `linearize_aug`, else P = η·I.
    /// Requires 0 < γ < 2β and P ≻ L_f·I.
    pub fn constant(
        beta: f64,
        gamma: f64,
        eta: f64,
        linearize_aug: bool,
        problem: &CompositeProblem,
    ) -> Result<Self> {
        check_beta_gamma(beta, gamma)?;
        let lf = problem.f.lipschitz();
        let p = if linearize_aug {
            let an = problem.a.norm_sq();
            if !(eta > lf + beta * an) {
                return Err(Error::Schedule(format!(
                    "η > L_f + β‖A‖² required: η={eta}, L_f={lf}, β‖A‖²={}",
                    beta * an
                )));
            }
            ScalingOperator::IdentityMinusGram {
                a: eta,
                c: beta,
                map: problem.a.clone(),
            }
        } else {
            if !(eta > lf) {
                return Err(Error::Schedule(format!(
                    "η > L_f required: η={eta}, L_f={lf}"
                )));
            }
            ScalingOperator::ScaledIdentity(eta)
        };
        Ok(LalmSchedule::Constant { beta, gamma, p })
    }

    /// Constant schedule with a caller-supplied weight, accepted when
    /// P ⪰ L_f·I. This admits the boundary case P = L_f·I.
    pub fn constant_with_weight(
        beta: f64,
        gamma: f64,
        p: ScalingOperator,
        problem: &CompositeProblem,
    ) -> Result<Self> {
        check_beta_gamma(beta, gamma)?;
        p.validate_dim(problem.n())?;
        let lf = problem.f.lipschitz();
        if !p.is_psd_certified_shifted(lf) {
            return Err(Error::Schedule(format!(
                "P ⪰ L_f·I not certified (L_f={lf})"
            )));
        }
        Ok(LalmSchedule::Constant { beta, gamma, p })
    }

    /// Adaptive schedule; requires γ > 0 and η ≥ 2L_f.
    pub fn adaptive(
        gamma: f64,
        eta: f64,
        beta_rule: BetaRule,
        problem: &CompositeProblem,
    ) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(Error::Schedule(format!("γ > 0 required, got {gamma}")));
        }
        let lf = problem.f.lipschitz();
        if !(eta >= 2.0 * lf) {
            return Err(Error::Schedule(format!(
                "η ≥ 2L_f required: η={eta}, L_f={lf}"
            )));
        }
        if let BetaRule::Scaled(c) = beta_rule {
            if !(c >= 0.5) {
                return Err(Error::Schedule(format!(
                    "β_k ≥ γ_k/2 required, got factor {c}"
                )));
            }
        }
        Ok(LalmSchedule::Adaptive {
            gamma,
            eta,
            beta_rule,
        })
    }

    pub fn params(&self, k: usize) -> LalmParams {
        match self {
            LalmSchedule::Constant { beta, gamma, p } => LalmParams {
                alpha: 1.0,
                beta: *beta,
                gamma: *gamma,
                p: p.clone(),
            },
            LalmSchedule::Adaptive {
                gamma,
                eta,
                beta_rule,
            } => {
                let kf = k as f64;
                let gk = kf * gamma;
                let beta = match beta_rule {
                    BetaRule::EqualGamma => gk,
                    BetaRule::Scaled(c) => c * gk,
                };
                LalmParams {
                    alpha: 2.0 / (kf + 1.0),
                    beta,
                    gamma: gk,
                    p: ScalingOperator::ScaledIdentity(eta / kf),
                }
            }
        }
    }

    pub fn is_adaptive(&self) -> bool {
        matches!(self, LalmSchedule::Adaptive { .. })
    }

    pub fn name(&self) -> &'static str {
        if self.is_adaptive() {
            "adaptive"
        } else {
            "constant"
        }
    }
}

fn check_beta_gamma(beta: f64, gamma: f64) -> Result<()> {
    if !(beta > 0.0) {
        return Err(Error::Schedule(format!("β > 0 required, got {beta}")));
    }
    if !(gamma > 0.0 && gamma < 2.0 * beta) {
        return Err(Error::Schedule(format!(
            "γ ∈ (0, 2β) required: γ={gamma}, β={beta}"
        )));
    }
    Ok(())
}

/// Caches reused by consecutive steps on the same problem.
#[derive(Debug, Default)]
pub(crate) struct LalmWorkspace {
    a: GramCache,
    p: GramCache,
}

/// One iteration from `state` with the given parameters.
pub fn lalm_step(
    problem: &CompositeProblem,
    state: &LalmState,
    params: &LalmParams,
    inner: &InnerOptions,
) -> Result<LalmState> {
    let mut ws = LalmWorkspace::default();
    step_with(problem, state, params, inner, &mut ws).map(|(s, _)| s)
}

pub(crate) fn step_with(
    problem: &CompositeProblem,
    state: &LalmState,
    params: &LalmParams,
    inner: &InnerOptions,
    ws: &mut LalmWorkspace,
) -> Result<(LalmState, SubproblemInfo)> {
    let n = problem.n();
    check_len("lalm_step x", n, state.x.len())?;
    check_len("lalm_step xbar", n, state.xbar.len())?;
    check_len("lalm_step lambda", problem.m(), state.lambda.len())?;
    let alpha = params.alpha;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(invalid(format!("α_k must lie in [0,1], got {alpha}")));
    }
    let xhat = if alpha == 1.0 {
        state.x.clone()
    } else {
        lerp(&state.xbar, &state.x, alpha)
    };
    let mut d = problem.f.gradient(&xhat);
    let at_lambda = problem.a.adjoint_vec(&state.lambda);
    for (di, ai) in d.iter_mut().zip(&at_lambda) {
        *di -= ai;
    }
    let sub = BlockSubproblem {
        prox: &problem.g,
        map: &problem.a,
        target: &problem.b,
        linear: &d,
        beta: params.beta,
        weight: &params.p,
        anchor: &state.x,
    };
    let (x_next, info) = sub.solve(&mut ws.a, &mut ws.p, inner)?;
    let xbar_next = if alpha == 1.0 {
        x_next.clone()
    } else {
        lerp(&state.xbar, &x_next, alpha)
    };
    let r = problem.residual(&x_next);
    let lambda_next: Vec<f64> = state
        .lambda
        .iter()
        .zip(&r)
        .map(|(l, ri)| l - params.gamma * ri)
        .collect();
    Ok((
        LalmState {
            k: state.k + 1,
            x: x_next,
            xbar: xbar_next,
            lambda: lambda_next,
        },
        info,
    ))
}

/// Right-hand side minus left-hand side of a one-iteration inequality,
/// together with the sum of magnitudes of its terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InequalitySlack {
    pub slack: f64,
    pub scale: f64,
}

impl InequalitySlack {
    pub(crate) fn from_terms(lhs: &[f64], rhs: &[f64]) -> Self {
        let l: f64 = lhs.iter().sum();
        let r: f64 = rhs.iter().sum();
        let scale = 1.0 + lhs.iter().chain(rhs).map(|t| t.abs()).sum::<f64>();
        InequalitySlack {
            slack: r - l,
            scale,
        }
    }

    /// Slack divided by the term scale.
    pub fn normalized(&self) -> f64 {
        self.slack / self.scale
    }

    pub fn holds(&self, tol: f64) -> bool {
        self.slack >= -tol * self.scale
    }
}

/// Evaluates the one-iteration inequality of the accelerated ALM for a
/// feasible `x_feas` and arbitrary `lambda_test`.
pub fn check_one_iter_lalm(
    prev: &LalmState,
    next: &LalmState,
    params: &LalmParams,
    x_feas: &[f64],
    lambda_test: &[f64],
    problem: &CompositeProblem,
) -> Result<InequalitySlack> {
    let alpha = params.alpha;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(invalid(format!("α_k must lie in [0,1], got {alpha}")));
    }
    check_len("check_one_iter_lalm x_feas", problem.n(), x_feas.len())?;
    check_len("check_one_iter_lalm lambda", problem.m(), lambda_test.len())?;
    let rf = problem.residual(x_feas);
    if norm(&rf) > 1e-8 * (1.0 + norm(&problem.b)) {
        return Err(Error::Infeasible(format!(
            "reference point has ‖Ax−b‖ = {:e}",
            norm(&rf)
        )));
    }
    let fx = problem
        .objective(x_feas)
        .ok_or_else(|| Error::Infeasible("reference point outside the domain of g".into()))?;
    let gap = |xb: &[f64]| -> Result<f64> {
        let v = problem
            .objective(xb)
            .ok_or_else(|| Error::Infeasible("aggregate iterate outside the domain of g".into()))?;
        Ok(v - fx - dot(lambda_test, &problem.residual(xb)))
    };
    let lhs_next = gap(&next.xbar)?;
    let lhs_prev = -(1.0 - alpha) * gap(&prev.xbar)?;

    let p = &params.p;
    let d_next = sub(&next.x, x_feas);
    let d_prev = sub(&prev.x, x_feas);
    let step = sub(&next.x, &prev.x);
    let g = params.gamma;
    let dl_prev = dist_sq(&prev.lambda, lambda_test);
    let dl_next = dist_sq(&next.lambda, lambda_test);
    let dl_step = dist_sq(&next.lambda, &prev.lambda);
    let rhs = [
        -0.5 * alpha * p.norm_sq(&d_next)?,
        0.5 * alpha * p.norm_sq(&d_prev)?,
        -0.5 * alpha * p.norm_sq(&step)?,
        0.5 * alpha * alpha * problem.f.lipschitz() * norm_sq(&step),
        alpha / (2.0 * g) * dl_prev,
        -alpha / (2.0 * g) * dl_next,
        alpha / (2.0 * g) * dl_step,
        -alpha * params.beta / (g * g) * dl_step,
    ];
    Ok(InequalitySlack::from_terms(&[lhs_next, lhs_prev], &rhs))
}

/// Objective and feasibility bounds of a rate certificate. The feasibility
/// bound is unavailable when ‖λ*‖ = 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateBound {
    pub obj: f64,
    pub feas: Option<f64>,
}

impl RateBound {
    pub(crate) fn from_numerator(obj: f64, lambda_norm: f64) -> Self {
        RateBound {
            obj,
            feas: (lambda_norm > 0.0).then(|| obj / lambda_norm),
        }
    }
}

/// (η‖x¹−x*‖² + 4‖λ*‖²/γ) / (t(t+1)) for the aggregate iterate x̄ᵗ⁺¹.
pub fn bound_lalm_adaptive(
    t: usize,
    x1: &[f64],
    xstar: &[f64],
    lambda_star: &[f64],
    eta: f64,
    gamma: f64,
) -> Result<RateBound> {
    if t < 1 {
        return Err(invalid("bound needs t ≥ 1"));
    }
    check_len("bound_lalm_adaptive", x1.len(), xstar.len())?;
    let ln = norm(lambda_star);
    let num = eta * dist_sq(x1, xstar) + 4.0 * ln * ln / gamma;
    let tf = t as f64;
    Ok(RateBound::from_numerator(num / (tf * (tf + 1.0)), ln))
}

/// (½‖x¹−x*‖²_P + 2‖λ*‖²/γ) / t for the running average x̃ᵗ⁺¹.
pub fn bound_lalm_constant(
    t: usize,
    x1: &[f64],
    xstar: &[f64],
    lambda_star: &[f64],
    p: &ScalingOperator,
    gamma: f64,
) -> Result<RateBound> {
    if t < 1 {
        return Err(invalid("bound needs t ≥ 1"));
    }
    check_len("bound_lalm_constant", x1.len(), xstar.len())?;
    let ln = norm(lambda_star);
    let num = 0.5 * p.norm_sq(&sub(x1, xstar))? + 2.0 * ln * ln / gamma;
    Ok(RateBound::from_numerator(num / t as f64, ln))
}

/// ‖xᵏ−x*‖²_P + (1/γ)‖λᵏ−λ*‖², nonincreasing under the constant schedule.
pub fn lyapunov_lalm(
    state: &LalmState,
    xstar: &[f64],
    lambda_star: &[f64],
    p: &ScalingOperator,
    gamma: f64,
) -> Result<f64> {
    Ok(p.norm_sq(&sub(&state.x, xstar))? + dist_sq(&state.lambda, lambda_star) / gamma)
}

#[derive(Clone, Debug)]
pub struct LalmOptions {
    pub max_iter: usize,
    /// Restart period R: after R iterations the counter returns to 1 and
    /// x̄ ← x, keeping λ.
    pub restart_every: Option<usize>,
    pub inner: InnerOptions,
    /// Evaluate the one-iteration inequality at the reference every step.
    pub checks: bool,
}

impl Default for LalmOptions {
    fn default() -> Self {
        LalmOptions {
            max_iter: 1000,
            restart_every: None,
            inner: InnerOptions::default(),
            checks: true,
        }
    }
}

/// Data handed to a step observer after each iteration.
pub struct LalmEvent<'a> {
    /// Global iteration number t (1-based).
    pub t: usize,
    pub prev: &'a LalmState,
    pub next: &'a LalmState,
    pub params: &'a LalmParams,
    pub info: SubproblemInfo,
}

pub fn run_lalm(
    problem: &CompositeProblem,
    schedule: &LalmSchedule,
    x1: &[f64],
    opts: &LalmOptions,
) -> RunResult {
    run_lalm_observed(problem, schedule, x1, opts, &mut |_| {})
}

/// [`run_lalm`] with a callback invoked after every iteration.
pub fn run_lalm_observed(
    problem: &CompositeProblem,
    schedule: &LalmSchedule,
    x1: &[f64],
    opts: &LalmOptions,
    observer: &mut dyn FnMut(&LalmEvent<'_>),
) -> RunResult {
    let start = Instant::now();
    let mut record = RunRecord {
        meta: RunMeta {
            solver: "lalm".into(),
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
    if let Err(e) = check_len("run_lalm x1", problem.n(), x1.len()) {
        return Err(fail(e, record));
    }
    if problem.g.value(x1).is_none() {
        return Err(fail(
            Error::Infeasible("x¹ lies outside the domain of g".into()),
            record,
        ));
    }
    let mut state = LalmState::initial(x1.to_vec(), problem.m());
    record.initial = Point::single(state.x.clone(), state.lambda.clone());
    let set_points = |record: &mut RunRecord, state: &LalmState, cert: &[f64]| {
        record.last = Point::single(state.x.clone(), state.lambda.clone());
        record.certificate = Point::single(cert.to_vec(), state.lambda.clone());
    };
    set_points(&mut record, &state, x1);

    let adaptive = schedule.is_adaptive();
    let restart = opts.restart_every.filter(|r| *r > 0);
    let reference = problem.reference.as_ref();
    let mut ws = LalmWorkspace::default();
    let mut local_k = 1usize;
    let mut avg = vec![0.0; problem.n()];
    let mut avg_count = 0usize;

    for t in 1..=opts.max_iter {
        let params = schedule.params(local_k);
        let mut local = state.clone();
        local.k = local_k;
        let (mut next, info) = match step_with(problem, &local, &params, &opts.inner, &mut ws) {
            Ok(v) => v,
            Err(e) => return Err(fail(e, record)),
        };
        record.inner_iterations += info.inner_iterations;
        record.max_inner_residual = record.max_inner_residual.max(info.residual);

        avg_count += 1;
        let w = 1.0 / avg_count as f64;
        for (a, xi) in avg.iter_mut().zip(&next.x) {
            *a += w * (xi - *a);
        }
        let cert: &[f64] = if adaptive { &next.xbar } else { &avg };

        let mut row = TraceRow {
            k: t,
            ..Default::default()
        };
        row.feas = Some(norm(&problem.residual(cert)));
        if let Some(rf) = reference {
            row.obj_err = problem.objective(cert).map(|v| (v - rf.value).abs());
            if restart.is_none() {
                let bound = match schedule {
                    LalmSchedule::Adaptive { gamma, eta, .. } => {
                        bound_lalm_adaptive(t, x1, &rf.x, &rf.lambda, *eta, *gamma)
                    }
                    LalmSchedule::Constant { gamma, p, .. } => {
                        bound_lalm_constant(t, x1, &rf.x, &rf.lambda, p, *gamma)
                    }
                };
                if let Ok(b) = bound {
                    row.bound_obj = Some(b.obj);
                    row.bound_feas = b.feas;
                }
            }
            if opts.checks {
                match check_one_iter_lalm(&local, &next, &params, &rf.x, &rf.lambda, problem) {
                    Ok(s) => row.ineq_slack = Some(s.normalized()),
                    Err(e) => return Err(fail(e, record)),
                }
            }
        }
        observer(&LalmEvent {
            t,
            prev: &local,
            next: &next,
            params: &params,
            info,
        });
        row.wall_time_s = start.elapsed().as_secs_f64();
        record.rows.push(row);
        set_points(&mut record, &next, cert);

        local_k += 1;
        if let Some(r) = restart {
            if local_k > r {
                local_k = 1;
                next.xbar = next.x.clone();
                avg.iter_mut().for_each(|a| *a = 0.0);
                avg_count = 0;
            }
        }
        next.k = t + 1;
        state = next;
    }
    if !adaptive && restart.is_none() && opts.max_iter > 0 {
        record.uniform_average = Some(Point::single(avg, state.lambda.clone()));
    }
    Ok(record)
}
