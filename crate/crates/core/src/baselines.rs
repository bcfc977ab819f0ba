//! Inner proximal-gradient solver for non-closed-form subproblems, and the
//! comparison methods: FISTA with periodic restart, projected gradient and the
//! accelerated Chambolle–Pock iteration for TV denoising.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::functions::ProxFn;
use crate::lalm::CompositeProblem;
use crate::linalg::{dist, dot, norm, norm_sq};
use crate::operators::{LinearMap, PeriodicDiff};
use crate::problems::image::ImageGrid;
use crate::record::{Point, RunFailure, RunMeta, RunRecord, RunResult, TraceRow};

/// Smooth convex objective q for the inner solver.
pub trait SmoothObjective {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient_into(&self, x: &[f64], out: &mut [f64]);
    fn lipschitz(&self) -> f64;
    fn strong_convexity(&self) -> f64 {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerOptions {
    /// Target for ‖x − prox_g(x − ∇q(x), 1)‖.
    pub subtol: f64,
    pub max_inner: usize,
    /// Residual evaluation period.
    pub check_every: usize,
}

impl Default for InnerOptions {
    fn default() -> Self {
        InnerOptions {
            subtol: 1e-10,
            max_inner: 50_000,
            check_every: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InnerSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Prox-gradient residual ‖x − prox_g(x − ∇q(x), 1)‖.
pub fn prox_gradient_residual<S: SmoothObjective + ?Sized>(q: &S, g: &ProxFn, x: &[f64]) -> f64 {
    let mut v = vec![0.0; x.len()];
    q.gradient_into(x, &mut v);
    for (vi, xi) in v.iter_mut().zip(x) {
        *vi = xi - *vi;
    }
    g.prox_in_place(&mut v, 1.0);
    dist(x, &v)
}

/// Minimizes q(x) + g(x) by accelerated proximal gradient from `x0`.
///
/// Uses the constant momentum (√L−√μ)/(√L+√μ) when q is strongly convex and
/// the FISTA sequence otherwise, with a gradient-based adaptive restart in
/// both cases. Stops once the prox-gradient residual is at most `subtol`.
pub fn inner_prox_solve<S: SmoothObjective + ?Sized>(
    q: &S,
    g: &ProxFn,
    x0: &[f64],
    opts: &InnerOptions,
) -> Result<InnerSolution> {
    if !(opts.subtol > 0.0) {
        return Err(invalid("subtol must be positive"));
    }
    let n = x0.len();
    let lip = q.lipschitz();
    if !(lip.is_finite() && lip >= 0.0) {
        return Err(invalid(format!(
            "inner solver needs a finite Lipschitz constant, got {lip}"
        )));
    }
    let lip = if lip > 0.0 { lip } else { 1.0 };
    let mu = q.strong_convexity().clamp(0.0, lip);
    let step = 1.0 / lip;
    let fixed_momentum = (mu > 0.0).then(|| {
        let (sl, sm) = (lip.sqrt(), mu.sqrt());
        (sl - sm) / (sl + sm)
    });
    let check_every = opts.check_every.max(1);

    let mut x = x0.to_vec();
    g.prox_in_place(&mut x, 0.0);
    let mut best = x.clone();
    let mut best_res = prox_gradient_residual(q, g, &x);
    if best_res <= opts.subtol {
        return Ok(InnerSolution {
            x,
            iterations: 0,
            residual: best_res,
        });
    }
    let mut y = x.clone();
    let mut grad = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut t = 1.0f64;
    for it in 1..=opts.max_inner {
        q.gradient_into(&y, &mut grad);
        for i in 0..n {
            x_new[i] = y[i] - step * grad[i];
        }
        g.prox_in_place(&mut x_new, step);

        let mut restart_test = 0.0;
        for i in 0..n {
            restart_test += (y[i] - x_new[i]) * (x_new[i] - x[i]);
        }
        let beta = if restart_test > 0.0 {
            t = 1.0;
            0.0
        } else if let Some(b) = fixed_momentum {
            b
        } else {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let b = (t - 1.0) / t_next;
            t = t_next;
            b
        };
        for i in 0..n {
            y[i] = x_new[i] + beta * (x_new[i] - x[i]);
        }
        std::mem::swap(&mut x, &mut x_new);

        if it % check_every == 0 || it == opts.max_inner {
            let res = prox_gradient_residual(q, g, &x);
            if res < best_res {
                best_res = res;
                best.copy_from_slice(&x);
            }
            if res <= opts.subtol {
                return Ok(InnerSolution {
                    x,
                    iterations: it,
                    residual: res,
                });
            }
        }
    }
    Err(Error::InnerNotConverged {
        residual: best_res,
        iterations: opts.max_inner,
        best,
    })
}

/// Dual of the projection onto {x : Ax = b, x ≥ 0}:
/// ψ(w) = ½‖max(v + Aᵀw, 0)‖² − ⟨w, b⟩, with ∇ψ(w) = A·max(v + Aᵀw, 0) − b.
struct ProjectionDual<'a> {
    a: &'a LinearMap,
    b: &'a [f64],
    v: &'a [f64],
    lipschitz: f64,
}

impl ProjectionDual<'_> {
    fn primal(&self, w: &[f64]) -> Vec<f64> {
        let mut x = self.a.adjoint_vec(w);
        for (xi, vi) in x.iter_mut().zip(self.v) {
            *xi = (*xi + vi).max(0.0);
        }
        x
    }
}

impl SmoothObjective for ProjectionDual<'_> {
    fn value(&self, w: &[f64]) -> f64 {
        0.5 * norm_sq(&self.primal(w)) - dot(w, self.b)
    }

    fn gradient_into(&self, w: &[f64], out: &mut [f64]) {
        let x = self.primal(w);
        self.a.apply_into(&x, out);
        for (o, bi) in out.iter_mut().zip(self.b) {
            *o -= bi;
        }
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
}

/// Projection onto {x : Ax = b, x ≥ 0}, solved on the dual and warm-started
/// from `w`. On return `w` holds the final dual point; the primal point has
/// ‖Ax − b‖ ≤ subtol.
pub fn project_affine_nonneg(
    a: &LinearMap,
    a_norm_sq: f64,
    b: &[f64],
    v: &[f64],
    w: &mut [f64],
    inner: &InnerOptions,
) -> Result<(Vec<f64>, InnerSolution)> {
    let dual = ProjectionDual {
        a,
        b,
        v,
        lipschitz: a_norm_sq,
    };
    let sol = inner_prox_solve(&dual, &ProxFn::Zero, w, inner)?;
    w.copy_from_slice(&sol.x);
    Ok((dual.primal(&sol.x), sol))
}

#[derive(Clone, Debug)]
pub struct FistaOptions {
    /// Step 1/L with L ≥ L_f.
    pub lipschitz: f64,
    /// Momentum reset period; `None` never resets.
    pub restart_every: Option<usize>,
    pub max_iter: usize,
    pub inner: InnerOptions,
}

fn check_fista(problem: &CompositeProblem, opts: &FistaOptions) -> Result<()> {
    if !matches!(problem.g, ProxFn::NonNegative | ProxFn::Zero) {
        return Err(invalid(
            "FISTA baseline handles g = 0 or g = indicator of x ≥ 0",
        ));
    }
    if !(opts.lipschitz >= problem.f.lipschitz() && opts.lipschitz > 0.0) {
        return Err(invalid(format!(
            "FISTA needs L ≥ L_f: L={}, L_f={}",
            opts.lipschitz,
            problem.f.lipschitz()
        )));
    }
    Ok(())
}

/// Projector onto the feasible set of `problem` (affine constraints, plus
/// x ≥ 0 when g is the orthant indicator).
struct FeasibleProjector<'a> {
    problem: &'a CompositeProblem,
    a_norm_sq: f64,
    w: Vec<f64>,
    gram: Option<nalgebra::linalg::Cholesky<f64, nalgebra::Dyn>>,
}

impl<'a> FeasibleProjector<'a> {
    fn new(problem: &'a CompositeProblem) -> Result<Self> {
        let gram = if problem.g == ProxFn::Zero && problem.m() > 0 {
            let g = problem.a.to_dense().gram_rows().to_nalgebra();
            Some(
                g.cholesky()
                    .ok_or_else(|| Error::Singular("A Aᵀ is not positive definite".into()))?,
            )
        } else {
            None
        };
        Ok(FeasibleProjector {
            a_norm_sq: problem.a.norm_sq(),
            w: vec![0.0; problem.m()],
            problem,
            gram,
        })
    }

    fn project(&mut self, v: &[f64], inner: &InnerOptions) -> Result<(Vec<f64>, usize, f64)> {
        let p = self.problem;
        if p.m() == 0 {
            let mut x = v.to_vec();
            p.g.prox_in_place(&mut x, 1.0);
            return Ok((x, 0, 0.0));
        }
        if let Some(ch) = &self.gram {
            // v − Aᵀ(AAᵀ)⁻¹(Av − b)
            let r = nalgebra::DVector::from_vec(p.residual(v));
            let s = ch.solve(&r);
            let back = p.a.adjoint_vec(s.as_slice());
            let x: Vec<f64> = v.iter().zip(&back).map(|(vi, bi)| vi - bi).collect();
            return Ok((x, 0, 0.0));
        }
        let (x, sol) = project_affine_nonneg(&p.a, self.a_norm_sq, &p.b, v, &mut self.w, inner)?;
        Ok((x, sol.iterations, sol.residual))
    }
}

fn smooth_row(problem: &CompositeProblem, t: usize, x: &[f64], start: &Instant) -> TraceRow {
    let fx = problem.f.value(x);
    TraceRow {
        k: t,
        obj_err: problem.reference.as_ref().map(|r| (fx - r.value).abs()),
        feas: Some(norm(&problem.residual(x))),
        wall_time_s: start.elapsed().as_secs_f64(),
        ..Default::default()
    }
}

/// FISTA on min f(x) over {Ax = b, x ≥ 0}; the projection is solved to
/// `inner.subtol` in feasibility and the momentum is reset every
/// `restart_every` iterations.
pub fn fista(problem: &CompositeProblem, x1: &[f64], opts: &FistaOptions) -> RunResult {
    let start = Instant::now();
    let mut record = RunRecord {
        meta: RunMeta {
            solver: "fista".into(),
            schedule: match opts.restart_every {
                Some(r) => format!("restart-{r}"),
                None => "no-restart".into(),
            },
            seed: None,
            subtol: Some(opts.inner.subtol),
        },
        initial: Point::single(x1.to_vec(), vec![]),
        last: Point::single(x1.to_vec(), vec![]),
        certificate: Point::single(x1.to_vec(), vec![]),
        ..Default::default()
    };
    let fail = |error: Error, record: RunRecord| RunFailure {
        error,
        partial: Box::new(record),
    };
    if let Err(e) = check_fista(problem, opts) {
        return Err(fail(e, record));
    }
    let mut proj = match FeasibleProjector::new(problem) {
        Ok(p) => p,
        Err(e) => return Err(fail(e, record)),
    };
    let n = problem.n();
    let step = 1.0 / opts.lipschitz;
    let mut x = x1.to_vec();
    let mut y = x.clone();
    let mut tk = 1.0f64;
    let mut since_restart = 0usize;
    let mut grad = vec![0.0; n];
    for t in 1..=opts.max_iter {
        problem.f.gradient_into(&y, &mut grad);
        let v: Vec<f64> = y.iter().zip(&grad).map(|(yi, gi)| yi - step * gi).collect();
        let (x_new, iters, res) = match proj.project(&v, &opts.inner) {
            Ok(p) => p,
            Err(e) => return Err(fail(e, record)),
        };
        record.inner_iterations += iters;
        record.max_inner_residual = record.max_inner_residual.max(res);

        since_restart += 1;
        let reset = opts.restart_every.is_some_and(|r| since_restart >= r);
        let beta = if reset {
            since_restart = 0;
            tk = 1.0;
            0.0
        } else {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * tk * tk).sqrt());
            let b = (tk - 1.0) / t_next;
            tk = t_next;
            b
        };
        y = if beta == 0.0 {
            x_new.clone()
        } else {
            x_new
                .iter()
                .zip(&x)
                .map(|(a, b)| a + beta * (a - b))
                .collect()
        };
        x = x_new;
        record.rows.push(smooth_row(problem, t, &x, &start));
        record.last = Point::single(x.clone(), vec![]);
    }
    record.certificate = record.last.clone();
    Ok(record)
}

/// Projected gradient x ← Proj(x − ∇f(x)/L) on the same feasible set as
/// [`fista`].
pub fn projected_gradient(
    problem: &CompositeProblem,
    x1: &[f64],
    opts: &FistaOptions,
) -> RunResult {
    let start = Instant::now();
    let mut record = RunRecord {
        meta: RunMeta {
            solver: "projected-gradient".into(),
            schedule: "constant".into(),
            seed: None,
            subtol: Some(opts.inner.subtol),
        },
        initial: Point::single(x1.to_vec(), vec![]),
        last: Point::single(x1.to_vec(), vec![]),
        certificate: Point::single(x1.to_vec(), vec![]),
        ..Default::default()
    };
    let fail = |error: Error, record: RunRecord| RunFailure {
        error,
        partial: Box::new(record),
    };
    if let Err(e) = check_fista(problem, opts) {
        return Err(fail(e, record));
    }
    let mut proj = match FeasibleProjector::new(problem) {
        Ok(p) => p,
        Err(e) => return Err(fail(e, record)),
    };
    let step = 1.0 / opts.lipschitz;
    let mut x = x1.to_vec();
    let mut grad = vec![0.0; problem.n()];
    for t in 1..=opts.max_iter {
        problem.f.gradient_into(&x, &mut grad);
        let v: Vec<f64> = x.iter().zip(&grad).map(|(xi, gi)| xi - step * gi).collect();
        let (x_new, iters, res) = match proj.project(&v, &opts.inner) {
            Ok(p) => p,
            Err(e) => return Err(fail(e, record)),
        };
        record.inner_iterations += iters;
        record.max_inner_residual = record.max_inner_residual.max(res);
        x = x_new;
        record.rows.push(smooth_row(problem, t, &x, &start));
        record.last = Point::single(x.clone(), vec![]);
    }
    record.certificate = record.last.clone();
    Ok(record)
}

/// State of the accelerated Chambolle–Pock iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CpState {
    /// Dual variable, |Z_ij| ≤ 1, stacked like the output of D.
    pub z: Vec<f64>,
    pub x: Vec<f64>,
    pub xbar: Vec<f64>,
    pub tau: f64,
    pub sigma: f64,
    /// θ used in the most recent step (1 before the first).
    pub theta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CpConfig {
    pub mu: f64,
    pub tau1: f64,
    pub sigma1: f64,
    /// Acceleration parameter; zero gives constant steps.
    pub gamma: f64,
    pub max_iter: usize,
}

/// ½‖X − M‖² + μ‖DX‖₁
pub fn tv_objective(noisy: &ImageGrid, mu: f64, x: &[f64]) -> f64 {
    let d = PeriodicDiff {
        height: noisy.height,
        width: noisy.width,
    };
    let dx = LinearMap::PeriodicDiff(d).apply_vec(x);
    0.5 * crate::linalg::dist_sq(x, &noisy.pixels) + mu * dx.iter().map(|v| v.abs()).sum::<f64>()
}

/// One accelerated Chambolle–Pock step for TV denoising of `noisy`.
pub fn cp_step(state: &CpState, noisy: &ImageGrid, mu: f64, gamma: f64) -> CpState {
    let d = LinearMap::PeriodicDiff(PeriodicDiff {
        height: noisy.height,
        width: noisy.width,
    });
    let (tau, sigma) = (state.tau, state.sigma);
    let dxb = d.apply_vec(&state.xbar);
    let z: Vec<f64> = state
        .z
        .iter()
        .zip(&dxb)
        .map(|(zi, gi)| (zi + sigma * gi).clamp(-1.0, 1.0))
        .collect();
    let dtz = d.adjoint_vec(&z);
    let x: Vec<f64> = state
        .x
        .iter()
        .zip(&dtz)
        .zip(&noisy.pixels)
        .map(|((xi, di), mi)| (mu * (xi - tau * di) + tau * mi) / (mu + tau))
        .collect();
    let theta = 1.0 / (1.0 + 2.0 * gamma * tau).sqrt();
    let xbar = x
        .iter()
        .zip(&state.x)
        .map(|(a, b)| a + theta * (a - b))
        .collect();
    CpState {
        z,
        x,
        xbar,
        tau: theta * tau,
        sigma: sigma / theta,
        theta,
    }
}

/// Runs Chambolle–Pock from X¹ = X̄¹ = M, Z¹ = 0. Rows report |F(X) − F*|
/// when `f_star` is given.
pub fn chambolle_pock_tv(
    noisy: &ImageGrid,
    cfg: &CpConfig,
    f_star: Option<f64>,
) -> Result<(RunRecord, CpState)> {
    if !(cfg.mu > 0.0 && cfg.tau1 > 0.0 && cfg.sigma1 > 0.0 && cfg.gamma >= 0.0) {
        return Err(invalid("Chambolle–Pock needs μ, τ₁, σ₁ > 0 and γ ≥ 0"));
    }
    let d = PeriodicDiff {
        height: noisy.height,
        width: noisy.width,
    };
    let dn = d.norm_sq_exact();
    if cfg.tau1 * cfg.sigma1 * dn > 1.0 + 1e-12 {
        return Err(Error::Schedule(format!(
            "τ₁σ₁‖D‖² ≤ 1 required, got {}",
            cfg.tau1 * cfg.sigma1 * dn
        )));
    }
    let start = Instant::now();
    let mut state = CpState {
        z: vec![0.0; 2 * d.pixels()],
        x: noisy.pixels.clone(),
        xbar: noisy.pixels.clone(),
        tau: cfg.tau1,
        sigma: cfg.sigma1,
        theta: 1.0,
    };
    let mut record = RunRecord {
        meta: RunMeta {
            solver: "chambolle-pock".into(),
            schedule: if cfg.gamma > 0.0 {
                "accelerated"
            } else {
                "constant"
            }
            .into(),
            ..Default::default()
        },
        initial: Point::single(state.x.clone(), state.z.clone()),
        ..Default::default()
    };
    for k in 1..=cfg.max_iter {
        state = cp_step(&state, noisy, cfg.mu, cfg.gamma);
        let fx = tv_objective(noisy, cfg.mu, &state.x);
        record.rows.push(TraceRow {
            k,
            obj_err: f_star.map(|fs| (fx - fs).abs()),
            wall_time_s: start.elapsed().as_secs_f64(),
            ..Default::default()
        });
    }
    record.last = Point::single(state.x.clone(), state.z.clone());
    record.certificate = record.last.clone();
    Ok((record, state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::SmoothFn;
    use crate::operators::DenseMatrix;
    use approx::assert_relative_eq;

    struct Quad {
        a: f64,
        c: f64,
    }

    impl SmoothObjective for Quad {
        fn value(&self, x: &[f64]) -> f64 {
            0.5 * self.a * (x[0] - self.c).powi(2)
        }
        fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
            out[0] = self.a * (x[0] - self.c);
        }
        fn lipschitz(&self) -> f64 {
            self.a
        }
        fn strong_convexity(&self) -> f64 {
            self.a
        }
    }

    #[test]
    fn inner_nonneg_one_dimensional() {
        let opts = InnerOptions::default();
        let s = inner_prox_solve(
            &Quad { a: 1.0, c: 2.0 },
            &ProxFn::NonNegative,
            &[0.0],
            &opts,
        )
        .unwrap();
        assert_relative_eq!(s.x[0], 2.0, epsilon = 1e-10);
        let s = inner_prox_solve(
            &Quad { a: 1.0, c: -1.0 },
            &ProxFn::NonNegative,
            &[3.0],
            &opts,
        )
        .unwrap();
        assert_eq!(s.x[0], 0.0);
    }

    #[test]
    fn inner_reports_best_iterate_on_budget_exhaustion() {
        let opts = InnerOptions {
            subtol: 1e-300,
            max_inner: 3,
            check_every: 1,
        };
        match inner_prox_solve(&Quad { a: 1.0, c: 2.0 }, &ProxFn::Zero, &[0.3], &opts) {
            Err(Error::InnerNotConverged { best, .. }) => assert_eq!(best.len(), 1),
            Ok(s) => assert!(s.residual <= 1e-300),
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn cp_box_projection_and_gamma_zero() {
        let img = ImageGrid::new(2, 2, vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        let st = CpState {
            z: vec![1.7, -0.4, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            x: img.pixels.clone(),
            xbar: vec![0.0; 4],
            tau: 0.25,
            sigma: 0.25,
            theta: 1.0,
        };
        let next = cp_step(&st, &img, 0.1, 0.0);
        assert_eq!(next.z[0], 1.0);
        assert_eq!(next.z[1], -0.4);
        assert_eq!(next.theta, 1.0);
        assert_eq!(next.tau, 0.25);
        assert_eq!(next.sigma, 0.25);
    }

    #[test]
    fn cp_x_update_is_stationary() {
        let img = ImageGrid::new(
            3,
            4,
            (0..12).map(|i| (i as f64 * 0.37).sin().abs()).collect(),
        )
        .unwrap();
        let d = LinearMap::PeriodicDiff(PeriodicDiff {
            height: 3,
            width: 4,
        });
        let st = CpState {
            z: (0..24).map(|i| ((i as f64) * 0.11).cos() * 0.9).collect(),
            x: (0..12).map(|i| i as f64 * 0.05).collect(),
            xbar: (0..12).map(|i| 1.0 - i as f64 * 0.03).collect(),
            tau: 0.3,
            sigma: 0.4,
            theta: 1.0,
        };
        let mu = 0.04;
        let next = cp_step(&st, &img, mu, 0.35 / mu);
        // (τ/μ)(X⁺ − M) + X⁺ − X + τDᵀZ⁺ = 0
        let dtz = d.adjoint_vec(&next.z);
        for i in 0..12 {
            let r =
                st.tau / mu * (next.x[i] - img.pixels[i]) + next.x[i] - st.x[i] + st.tau * dtz[i];
            assert!(r.abs() <= 1e-12, "stationarity residual {r}");
        }
    }

    #[test]
    fn fista_rejects_small_lipschitz() {
        let q = DenseMatrix::identity(2);
        let f = SmoothFn::quadratic(LinearMap::dense(q), vec![0.0, 0.0], None, 1.0).unwrap();
        let a = LinearMap::dense(DenseMatrix::new(1, 2, vec![1.0, 1.0]).unwrap());
        let p = CompositeProblem::new(f, ProxFn::NonNegative, a, vec![1.0]).unwrap();
        let opts = FistaOptions {
            lipschitz: 0.5,
            restart_every: None,
            max_iter: 5,
            inner: InnerOptions::default(),
        };
        assert!(fista(&p, &[0.5, 0.5], &opts).is_err());
    }
}
