//! Experiment configuration files and the runner behind `solve` and `bench`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::baselines::{self, CpConfig, FistaOptions, InnerOptions};
use crate::error::{invalid, Error, Result};
use crate::format::to_json;
use crate::ladmm::{run_ladmm, AdaptiveLadmmConfig, LadmmOptions, LadmmSchedule, TwoBlockProblem};
use crate::lalm::{run_lalm, BetaRule, CompositeProblem, LalmOptions, LalmSchedule};
use crate::operators::{LinearMap, ScalingOperator};
use crate::problems::{psnr, ImageGrid, Instance, ProblemSpec};
use crate::record::{RunRecord, RunResult};

use super::presets::{ladmm_preset, LadmmPreset};
use super::reference::reference_solve_cached;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub solver: SolverSpec,
    #[serde(default)]
    pub run: RunSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case", deny_unknown_fields)]
pub enum SolverSpec {
    Lalm {
        schedule: LalmScheduleSpec,
    },
    Ladmm {
        schedule: LadmmScheduleSpec,
    },
    /// Step 1/L; L defaults to L_f.
    Fista {
        #[serde(default)]
        lipschitz: Option<f64>,
    },
    ProjectedGradient {
        #[serde(default)]
        lipschitz: Option<f64>,
    },
    /// τ₁ = σ₁ = 1/‖D‖, γ = gamma_scale/μ.
    ChambollePock {
        #[serde(default = "default_cp_scale")]
        gamma_scale: f64,
    },
}

fn default_cp_scale() -> f64 {
    0.35
}

/// Unset fields take the ECQP defaults γ = β = m and η = 2L_f (adaptive) or
/// P = L_f·I (constant).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LalmScheduleSpec {
    Adaptive {
        #[serde(default)]
        gamma: Option<f64>,
        #[serde(default)]
        eta: Option<f64>,
        /// β_k = beta_factor·γ_k.
        #[serde(default)]
        beta_factor: Option<f64>,
    },
    Constant {
        #[serde(default)]
        beta: Option<f64>,
        #[serde(default)]
        gamma: Option<f64>,
        /// P = η·I, or η·I − β·AᵀA with `linearize_aug`.
        #[serde(default)]
        eta: Option<f64>,
        #[serde(default)]
        linearize_aug: bool,
    },
}

/// `identity·I − gram·MᵀM`, with M = B for P and M = C for Q.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingSpec {
    pub identity: f64,
    #[serde(default)]
    pub gram: f64,
}

impl ScalingSpec {
    fn build(&self, map: &LinearMap) -> ScalingOperator {
        if self.gram == 0.0 {
            ScalingOperator::ScaledIdentity(self.identity)
        } else {
            ScalingOperator::IdentityMinusGram {
                a: self.identity,
                c: self.gram,
                map: map.clone(),
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LadmmScheduleSpec {
    Preset {
        preset: LadmmPreset,
        #[serde(default)]
        gamma: Option<f64>,
    },
    Constant {
        gamma: f64,
        p: ScalingSpec,
        q: ScalingSpec,
    },
    Adaptive {
        gamma: f64,
        p: f64,
        q: ScalingSpec,
        eta: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSpec {
    pub max_iter: usize,
    pub subtol: f64,
    pub restart_every: Option<usize>,
    pub checks: bool,
    /// KKT tolerance for the reference solve.
    pub reference_tol: f64,
}

impl Default for RunSpec {
    fn default() -> Self {
        RunSpec {
            max_iter: 1000,
            subtol: 1e-10,
            restart_every: None,
            checks: true,
            reference_tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    /// Directory for `<name>.csv` and `<name>.json`; nothing is written when unset.
    pub dir: Option<PathBuf>,
    /// File stem; defaults to `<problem key>_<solver label>`.
    pub name: Option<String>,
    /// Directory for cached reference solutions.
    pub reference_cache: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    ConfigError,
    SolverError,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub status: RunStatus,
    pub error: Option<String>,
    pub problem: ProblemSpec,
    pub solver: SolverSpec,
    pub run: RunSpec,
    pub iterations: usize,
    pub f_star: Option<f64>,
    pub final_obj_err: Option<f64>,
    pub final_feas: Option<f64>,
    pub final_bound_obj: Option<f64>,
    pub min_ineq_slack: Option<f64>,
    pub inner_iterations: usize,
    pub max_inner_residual: f64,
    pub wall_time_s: f64,
    pub psnr_noisy: Option<f64>,
    /// PSNR of the certificate iterate.
    pub psnr: Option<f64>,
    pub psnr_last: Option<f64>,
    pub csv: Option<PathBuf>,
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub summary: RunSummary,
    /// Full or partial trace; `None` when the configuration was rejected.
    pub record: Option<RunRecord>,
}

impl SolverSpec {
    pub fn label(&self) -> String {
        match self {
            SolverSpec::Lalm { schedule } => match schedule {
                LalmScheduleSpec::Adaptive { .. } => "lalm_adaptive".into(),
                LalmScheduleSpec::Constant { .. } => "lalm_constant".into(),
            },
            SolverSpec::Ladmm { schedule } => match schedule {
                LadmmScheduleSpec::Preset { preset, .. } => preset.name().into(),
                LadmmScheduleSpec::Constant { .. } => "ladmm_constant".into(),
                LadmmScheduleSpec::Adaptive { .. } => "ladmm_adaptive".into(),
            },
            SolverSpec::Fista { .. } => "fista".into(),
            SolverSpec::ProjectedGradient { .. } => "projected_gradient".into(),
            SolverSpec::ChambollePock { .. } => "chambolle_pock".into(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn name(&self) -> String {
        self.output
            .name
            .clone()
            .unwrap_or_else(|| format!("{}_{}", self.problem.key(), self.solver.label()))
    }
}

/// Starting point: x¹ = 0 for composite problems. Two-block runs start
/// from z¹ = M for TV and z¹ = 0 otherwise, with y¹ solving By = b − Cz¹
/// when B is a multiple of the identity (so (DM, M) for TV and (e, 0) for
/// SVM) and y¹ = 0 otherwise.
pub fn default_start(instance: &Instance) -> (Vec<f64>, Vec<f64>) {
    match instance {
        Instance::Composite(p) => (vec![0.0; p.n()], vec![]),
        Instance::Tv { problem, noisy, .. } => start_from_z(problem, noisy.pixels.clone()),
        Instance::TwoBlock(p) | Instance::Svm { problem: p, .. } => {
            start_from_z(p, vec![0.0; p.nz()])
        }
    }
}

fn start_from_z(p: &TwoBlockProblem, z: Vec<f64>) -> (Vec<f64>, Vec<f64>) {
    let y = match p.b_map.identity_scale() {
        Some(s) if s != 0.0 => {
            let cz = p.c_map.apply_vec(&z);
            p.rhs.iter().zip(&cz).map(|(b, c)| (b - c) / s).collect()
        }
        _ => vec![0.0; p.ny()],
    };
    (y, z)
}

fn lalm_schedule(spec: &LalmScheduleSpec, p: &CompositeProblem) -> Result<LalmSchedule> {
    let m = p.m() as f64;
    let lf = p.f.lipschitz();
    match *spec {
        LalmScheduleSpec::Adaptive {
            gamma,
            eta,
            beta_factor,
        } => {
            let rule = match beta_factor {
                None => BetaRule::EqualGamma,
                Some(1.0) => BetaRule::EqualGamma,
                Some(c) => BetaRule::Scaled(c),
            };
            LalmSchedule::adaptive(gamma.unwrap_or(m), eta.unwrap_or(2.0 * lf), rule, p)
        }
        LalmScheduleSpec::Constant {
            beta,
            gamma,
            eta,
            linearize_aug,
        } => {
            let beta = beta.unwrap_or(m);
            let gamma = gamma.unwrap_or(beta);
            match eta {
                Some(eta) => LalmSchedule::constant(beta, gamma, eta, linearize_aug, p),
                None if linearize_aug => Err(invalid("linearize_aug needs an explicit η")),
                None => LalmSchedule::constant_with_weight(
                    beta,
                    gamma,
                    ScalingOperator::ScaledIdentity(lf),
                    p,
                ),
            }
        }
    }
}

fn ladmm_schedule(spec: &LadmmScheduleSpec, p: &TwoBlockProblem) -> Result<LadmmSchedule> {
    match spec {
        LadmmScheduleSpec::Preset { preset, gamma } => ladmm_preset(*preset, p, *gamma),
        LadmmScheduleSpec::Constant { gamma, p: ps, q } => {
            LadmmSchedule::constant(*gamma, ps.build(&p.b_map), q.build(&p.c_map), p)
        }
        LadmmScheduleSpec::Adaptive {
            gamma,
            p: pw,
            q,
            eta,
        } => {
            let cfg = AdaptiveLadmmConfig::new(*gamma, *pw, q.build(&p.c_map), *eta, p)?;
            Ok(LadmmSchedule::adaptive(cfg, p))
        }
    }
}

/// A validated, ready-to-run solver.
enum Prepared {
    Lalm(LalmSchedule),
    Ladmm(LadmmSchedule),
    Fista(FistaOptions),
    ProjectedGradient(FistaOptions),
    ChambollePock(CpConfig),
}

fn inner_options(run: &RunSpec) -> InnerOptions {
    InnerOptions {
        subtol: run.subtol,
        ..Default::default()
    }
}

fn prepare(cfg: &ExperimentConfig, instance: &Instance) -> Result<Prepared> {
    if cfg.run.max_iter == 0 {
        return Err(invalid("max_iter must be positive"));
    }
    if !(cfg.run.subtol > 0.0) {
        return Err(invalid("subtol must be positive"));
    }
    if cfg.run.restart_every == Some(0) {
        return Err(invalid("restart_every must be positive"));
    }
    let composite = || {
        instance
            .composite()
            .ok_or_else(|| invalid(format!("{} needs a composite problem", cfg.solver.label())))
    };
    let fista_opts = |p: &CompositeProblem, lipschitz: Option<f64>| FistaOptions {
        lipschitz: lipschitz.unwrap_or_else(|| p.f.lipschitz()),
        restart_every: cfg.run.restart_every,
        max_iter: cfg.run.max_iter,
        inner: inner_options(&cfg.run),
    };
    Ok(match &cfg.solver {
        SolverSpec::Lalm { schedule } => Prepared::Lalm(lalm_schedule(schedule, composite()?)?),
        SolverSpec::Ladmm { schedule } => {
            let p = instance
                .two_block()
                .ok_or_else(|| invalid("LADMM needs a two-block problem"))?;
            Prepared::Ladmm(ladmm_schedule(schedule, p)?)
        }
        SolverSpec::Fista { lipschitz } => Prepared::Fista(fista_opts(composite()?, *lipschitz)),
        SolverSpec::ProjectedGradient { lipschitz } => {
            Prepared::ProjectedGradient(fista_opts(composite()?, *lipschitz))
        }
        SolverSpec::ChambollePock { gamma_scale } => {
            let Instance::Tv { noisy, mu, .. } = instance else {
                return Err(invalid("Chambolle–Pock runs on TV instances only"));
            };
            if !(*gamma_scale >= 0.0) {
                return Err(invalid("gamma_scale must be nonnegative"));
            }
            let dn = crate::operators::PeriodicDiff {
                height: noisy.height,
                width: noisy.width,
            }
            .norm_sq_exact();
            let step = 1.0 / dn.sqrt();
            Prepared::ChambollePock(CpConfig {
                mu: *mu,
                tau1: step,
                sigma1: step,
                gamma: gamma_scale / mu,
                max_iter: cfg.run.max_iter,
            })
        }
    })
}

fn has_reference(instance: &Instance) -> bool {
    match instance {
        Instance::Composite(p) => p.reference.is_some(),
        other => other.two_block().is_some_and(|p| p.reference.is_some()),
    }
}

fn reference_value(instance: &Instance) -> Option<f64> {
    match instance {
        Instance::Composite(p) => p.reference.as_ref().map(|r| r.value),
        other => other.two_block()?.reference.as_ref().map(|r| r.value),
    }
}

/// Builds the instance and attaches a reference solution (cached in
/// `cache` when given).
pub fn prepare_instance(spec: &ProblemSpec, tol: f64, cache: Option<&Path>) -> Result<Instance> {
    let mut instance = spec.build()?;
    if !has_reference(&instance) {
        let r = reference_solve_cached(spec, &instance, tol, cache)?;
        r.attach(&mut instance)?;
    }
    Ok(instance)
}

fn execute(prepared: &Prepared, cfg: &ExperimentConfig, instance: &Instance) -> RunResult {
    let (x1, z1) = default_start(instance);
    let run = &cfg.run;
    match prepared {
        Prepared::Lalm(schedule) => {
            let p = instance.composite().expect("checked in prepare");
            let opts = LalmOptions {
                max_iter: run.max_iter,
                restart_every: run.restart_every,
                inner: inner_options(run),
                checks: run.checks,
            };
            run_lalm(p, schedule, &x1, &opts)
        }
        Prepared::Ladmm(schedule) => {
            let p = instance.two_block().expect("checked in prepare");
            let opts = LadmmOptions {
                max_iter: run.max_iter,
                inner: inner_options(run),
                checks: run.checks,
            };
            run_ladmm(p, schedule, &x1, &z1, &opts)
        }
        Prepared::Fista(o) => baselines::fista(instance.composite().expect("checked"), &x1, o),
        Prepared::ProjectedGradient(o) => {
            baselines::projected_gradient(instance.composite().expect("checked"), &x1, o)
        }
        Prepared::ChambollePock(c) => {
            let Instance::Tv { noisy, .. } = instance else {
                unreachable!("checked in prepare")
            };
            baselines::chambolle_pock_tv(noisy, c, reference_value(instance))
                .map(|(r, _)| r)
                .map_err(|error| crate::record::RunFailure {
                    error,
                    partial: Box::default(),
                })
        }
    }
}

fn tv_psnr(clean: &ImageGrid, block: Option<&Vec<f64>>) -> Option<f64> {
    let x = block?;
    let img = ImageGrid::new(clean.height, clean.width, x.clone()).ok()?;
    psnr(&img, clean).ok().flatten()
}

/// Runs one experiment. Rejected configurations give `ConfigError` with no
/// trace; solver failures give `SolverError` with the partial trace, which is
/// still written to disk. Only I/O and reference-solve failures are `Err`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let name = cfg.name();
    let mut summary = RunSummary {
        name: name.clone(),
        status: RunStatus::Ok,
        error: None,
        problem: cfg.problem.clone(),
        solver: cfg.solver.clone(),
        run: cfg.run.clone(),
        iterations: 0,
        f_star: None,
        final_obj_err: None,
        final_feas: None,
        final_bound_obj: None,
        min_ineq_slack: None,
        inner_iterations: 0,
        max_inner_residual: 0.0,
        wall_time_s: 0.0,
        psnr_noisy: None,
        psnr: None,
        psnr_last: None,
        csv: None,
    };
    let start = Instant::now();
    let instance = match cfg.problem.build() {
        Ok(i) => i,
        Err(e) => return Ok(reject(cfg, summary, e)),
    };
    let prepared = match prepare(cfg, &instance) {
        Ok(p) => p,
        Err(e) => return Ok(reject(cfg, summary, e)),
    };
    let instance = if has_reference(&instance) {
        instance
    } else {
        prepare_instance(
            &cfg.problem,
            cfg.run.reference_tol,
            cfg.output.reference_cache.as_deref(),
        )?
    };
    summary.f_star = reference_value(&instance);
    let (mut record, error) = match execute(&prepared, cfg, &instance) {
        Ok(r) => (r, None),
        Err(f) => (*f.partial, Some(f.error)),
    };
    record.meta.seed = Some(cfg.problem.seed());
    if let Some(e) = error {
        summary.status = RunStatus::SolverError;
        summary.error = Some(e.to_string());
    }
    summary.iterations = record.rows.len();
    if let Some(last) = record.last_row() {
        summary.final_obj_err = last.obj_err;
        summary.final_feas = last.feas;
        summary.final_bound_obj = last.bound_obj;
    }
    summary.min_ineq_slack = record
        .rows
        .iter()
        .filter_map(|r| r.ineq_slack)
        .reduce(f64::min);
    summary.inner_iterations = record.inner_iterations;
    summary.max_inner_residual = record.max_inner_residual;
    if let Instance::Tv { clean, noisy, .. } = &instance {
        summary.psnr_noisy = psnr(noisy, clean).ok().flatten();
        let pick = |p: &crate::record::Point| p.blocks.last().cloned();
        summary.psnr = tv_psnr(clean, pick(&record.certificate).as_ref());
        summary.psnr_last = tv_psnr(clean, pick(&record.last).as_ref());
    }
    summary.wall_time_s = start.elapsed().as_secs_f64();
    if let Some(dir) = &cfg.output.dir {
        std::fs::create_dir_all(dir)?;
        let csv = dir.join(format!("{name}.csv"));
        record.write_csv_file(&csv)?;
        summary.csv = Some(csv);
        write_summary(dir, &summary)?;
    }
    Ok(ExperimentOutcome {
        summary,
        record: Some(record),
    })
}

fn reject(cfg: &ExperimentConfig, mut summary: RunSummary, e: Error) -> ExperimentOutcome {
    summary.status = RunStatus::ConfigError;
    summary.error = Some(e.to_string());
    if let Some(dir) = &cfg.output.dir {
        let _ = std::fs::create_dir_all(dir).and_then(|_| {
            write_summary(dir, &summary).map_err(|e| std::io::Error::other(e.to_string()))
        });
    }
    ExperimentOutcome {
        summary,
        record: None,
    }
}

fn write_summary(dir: &Path, summary: &RunSummary) -> Result<()> {
    let path = dir.join(format!("{}.json", summary.name));
    std::fs::write(path, to_json(summary, true)?)?;
    Ok(())
}

/// A batch of experiments sharing an output directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Suite {
    pub experiments: Vec<ExperimentConfig>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub reference_cache: Option<PathBuf>,
}

/// Runs the suite concurrently. Each experiment writes its own files; the
/// combined summaries go to `summary.json` in the output directory.
pub fn run_suite(suite: &Suite) -> Result<Vec<RunSummary>> {
    let mut configs = suite.experiments.clone();
    for c in &mut configs {
        if c.output.dir.is_none() {
            c.output.dir = suite.output_dir.clone();
        }
        if c.output.reference_cache.is_none() {
            c.output.reference_cache = suite.reference_cache.clone();
        }
    }
    // Build each distinct reference once before the parallel runs.
    let mut seen: Vec<&ProblemSpec> = Vec::new();
    for c in &configs {
        if !seen.contains(&&c.problem) {
            seen.push(&c.problem);
            if let Some(cache) = &c.output.reference_cache {
                prepare_instance(&c.problem, c.run.reference_tol, Some(cache))?;
            }
        }
    }
    let results = crate::par::map(&configs, |c| run_experiment(c).map(|o| o.summary));
    let summaries = results.into_iter().collect::<Result<Vec<_>>>()?;
    if let Some(dir) = &suite.output_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("summary.json"), to_json(&summaries, true)?)?;
    }
    Ok(summaries)
}
