//! The primal block update shared by the linearized ALM and ADMM:
//!
//! `argmin_u φ(u) + ⟨d, u⟩ + (β/2)‖M u − e‖² + ½‖u − u₀‖²_W`
//!
//! with `W = a·I − c·NᵀN`. When `N = M` and `c = β` the augmented term is
//! linearized and the update is a single prox. Otherwise the quadratic part has
//! Hessian `a·I + (β − c)·MᵀM`; it is solved exactly when φ is itself quadratic
//! (identity-scaled map, Woodbury on the small Gram matrix, or the 2-D DFT for
//! periodic differences) and by the inner accelerated prox-gradient otherwise.

use nalgebra::DMatrix;

use crate::baselines::{inner_prox_solve, InnerOptions, SmoothObjective};
use crate::error::{invalid, Error, Result};
use crate::functions::ProxFn;
use crate::linalg::dot;
use crate::operators::{LinearMap, ScalingOperator};
use crate::spectral;

pub(crate) struct BlockSubproblem<'a> {
    pub prox: &'a ProxFn,
    pub map: &'a LinearMap,
    pub target: &'a [f64],
    pub linear: &'a [f64],
    pub beta: f64,
    pub weight: &'a ScalingOperator,
    pub anchor: &'a [f64],
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SubproblemInfo {
    /// Inner iterations; zero for closed-form or direct solves.
    pub inner_iterations: usize,
    /// Prox-gradient residual of the returned point; zero for exact solves.
    pub residual: f64,
}

/// Per-map cached quantities reused across iterations.
#[derive(Debug, Default)]
pub(crate) struct GramCache {
    norm_sq: Option<f64>,
    /// `M Mᵀ` when `M` is wide, `MᵀM` otherwise.
    gram: Option<DMatrix<f64>>,
}

impl GramCache {
    pub fn norm_sq(&mut self, map: &LinearMap) -> f64 {
        *self.norm_sq.get_or_insert_with(|| map.norm_sq())
    }

    fn gram(&mut self, map: &LinearMap) -> &DMatrix<f64> {
        self.gram.get_or_insert_with(|| {
            let dense = map.to_dense();
            let g = if dense.rows < dense.cols {
                dense.gram_rows()
            } else {
                dense.gram_cols()
            };
            g.to_nalgebra()
        })
    }

    /// Solves `(alpha·I + s·MᵀM) u = r`.
    pub fn solve_shifted_gram(
        &mut self,
        map: &LinearMap,
        alpha: f64,
        s: f64,
        r: &[f64],
    ) -> Result<Vec<f64>> {
        if s == 0.0 || map.is_zero() {
            if alpha == 0.0 {
                return Err(Error::Singular("zero system matrix".into()));
            }
            return Ok(r.iter().map(|v| v / alpha).collect());
        }
        if let Some(scale) = map.identity_scale() {
            let diag = alpha + s * scale * scale;
            if diag == 0.0 {
                return Err(Error::Singular("singular scaled-identity system".into()));
            }
            return Ok(r.iter().map(|v| v / diag).collect());
        }
        if let LinearMap::PeriodicDiff(d) = map {
            return spectral::solve_identity_plus_gram(r, d.height, d.width, alpha, s);
        }
        let (rows, cols) = (map.rows(), map.cols());
        if rows < cols {
            if alpha == 0.0 {
                return Err(Error::Singular(
                    "Woodbury solve needs a nonzero identity shift".into(),
                ));
            }
            // (αI + sMᵀM)⁻¹ r = (1/α)(r − s Mᵀ (αI + s MMᵀ)⁻¹ M r)
            let g = self.gram(map);
            let mut k = g * s;
            for i in 0..rows {
                k[(i, i)] += alpha;
            }
            let mr = nalgebra::DVector::from_vec(map.apply_vec(r));
            let w = solve_symmetric(k, mr)?;
            let back = map.adjoint_vec(w.as_slice());
            Ok(r.iter()
                .zip(&back)
                .map(|(ri, bi)| (ri - s * bi) / alpha)
                .collect())
        } else {
            let g = self.gram(map);
            let mut k = g * s;
            for i in 0..cols {
                k[(i, i)] += alpha;
            }
            let w = solve_symmetric(k, nalgebra::DVector::from_column_slice(r))?;
            Ok(w.as_slice().to_vec())
        }
    }
}

fn solve_symmetric(k: DMatrix<f64>, rhs: nalgebra::DVector<f64>) -> Result<nalgebra::DVector<f64>> {
    if let Some(ch) = k.clone().cholesky() {
        return Ok(ch.solve(&rhs));
    }
    k.lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("dense system has no unique solution".into()))
}

/// ½ uᵀ(a·I + Σ cᵢ NᵢᵀNᵢ)u − rhsᵀu
struct QuadraticModel<'a> {
    a: f64,
    terms: Vec<(f64, &'a LinearMap)>,
    rhs: Vec<f64>,
    lipschitz: f64,
    strong_convexity: f64,
}

impl SmoothObjective for QuadraticModel<'_> {
    fn value(&self, u: &[f64]) -> f64 {
        let mut v = 0.5 * self.a * dot(u, u) - dot(&self.rhs, u);
        for (c, m) in &self.terms {
            let mu = m.apply_vec(u);
            v += 0.5 * c * dot(&mu, &mu);
        }
        v
    }

    fn gradient_into(&self, u: &[f64], out: &mut [f64]) {
        for ((o, ui), ri) in out.iter_mut().zip(u).zip(&self.rhs) {
            *o = self.a * ui - ri;
        }
        for (c, m) in &self.terms {
            let g = m.gram_apply(u);
            for (o, gi) in out.iter_mut().zip(&g) {
                *o += c * gi;
            }
        }
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn strong_convexity(&self) -> f64 {
        self.strong_convexity
    }
}

impl BlockSubproblem<'_> {
    pub fn solve(
        &self,
        cache: &mut GramCache,
        weight_cache: &mut GramCache,
        inner: &InnerOptions,
    ) -> Result<(Vec<f64>, SubproblemInfo)> {
        let n = self.anchor.len();
        let a = self.weight.identity_part();
        let (c, wmap) = match self.weight.gram_part() {
            Some((c, m)) => (c, Some(m)),
            None => (0.0, None),
        };
        let same_map = wmap.map(|m| m.same_as(self.map)).unwrap_or(true);
        let exact = SubproblemInfo::default();

        // residual of the penalty at the anchor
        let mut res = self.map.apply_vec(self.anchor);
        for (r, e) in res.iter_mut().zip(self.target) {
            *r -= e;
        }

        if same_map {
            let s = self.beta - c;
            let linearized = s.abs() <= 1e-13 * self.beta.abs().max(c.abs()).max(1.0);
            if linearized || self.map.is_zero() {
                // gradient of the smooth model at the anchor, then one prox step
                if a <= 0.0 {
                    return Err(invalid(
                        "linearized update needs a positive proximal weight",
                    ));
                }
                let back = self.map.adjoint_vec(&res);
                let mut v: Vec<f64> = self
                    .anchor
                    .iter()
                    .zip(self.linear)
                    .zip(&back)
                    .map(|((u0, d), g)| u0 - (d + self.beta * g) / a)
                    .collect();
                if !linearized {
                    // map is zero: penalty contributes nothing
                    for ((vi, u0), d) in v.iter_mut().zip(self.anchor).zip(self.linear) {
                        *vi = u0 - d / a;
                    }
                }
                self.prox.prox_in_place(&mut v, 1.0 / a);
                return Ok((v, exact));
            }

            // rhs = a u₀ − d + β Mᵀe − c MᵀM u₀ = (a − ...) expressed via the residual:
            //     = a u₀ − d − β Mᵀ(M u₀ − e) + s MᵀM u₀
            let back_res = self.map.adjoint_vec(&res);
            let gram_u0 = self.map.gram_apply(self.anchor);
            let rhs: Vec<f64> = (0..n)
                .map(|i| {
                    a * self.anchor[i] - self.linear[i] - self.beta * back_res[i] + s * gram_u0[i]
                })
                .collect();

            if let Some(scale) = self.map.identity_scale() {
                let total = a + s * scale * scale;
                if total <= 0.0 {
                    return Err(invalid("block subproblem is not strongly convex"));
                }
                let mut v: Vec<f64> = rhs.iter().map(|r| r / total).collect();
                self.prox.prox_in_place(&mut v, 1.0 / total);
                return Ok((v, exact));
            }

            if let Some((w, center)) = self.prox.as_quadratic() {
                let mut r = rhs;
                if let Some(center) = center {
                    for (ri, ci) in r.iter_mut().zip(center) {
                        *ri += w * ci;
                    }
                }
                let u = cache.solve_shifted_gram(self.map, a + w, s, &r)?;
                return Ok((u, exact));
            }

            let ns = cache.norm_sq(self.map);
            let model = QuadraticModel {
                a,
                terms: vec![(s, self.map)],
                rhs,
                lipschitz: a + s.max(0.0) * ns,
                strong_convexity: a + s.min(0.0) * ns,
            };
            return self.run_inner(&model, inner);
        }

        // Weight with a Gram part on a different operator.
        let wmap = wmap.expect("checked above");
        let back_res = self.map.adjoint_vec(&res);
        let gram_w = wmap.gram_apply(self.anchor);
        let gram_m = self.map.gram_apply(self.anchor);
        let rhs: Vec<f64> = (0..n)
            .map(|i| {
                a * self.anchor[i] - self.linear[i] - self.beta * back_res[i]
                    + self.beta * gram_m[i]
                    - c * gram_w[i]
            })
            .collect();
        let nm = cache.norm_sq(self.map);
        let nw = weight_cache.norm_sq(wmap);
        let model = QuadraticModel {
            a,
            terms: vec![(self.beta, self.map), (-c, wmap)],
            rhs,
            lipschitz: a + self.beta.max(0.0) * nm + (-c).max(0.0) * nw,
            strong_convexity: a + self.beta.min(0.0) * nm + (-c).min(0.0) * nw,
        };
        self.run_inner(&model, inner)
    }

    fn run_inner(
        &self,
        model: &QuadraticModel<'_>,
        inner: &InnerOptions,
    ) -> Result<(Vec<f64>, SubproblemInfo)> {
        if model.strong_convexity < -1e-12 * model.lipschitz.max(1.0) {
            return Err(invalid("block subproblem is not certified convex"));
        }
        let sol = inner_prox_solve(model, self.prox, self.anchor, inner)?;
        Ok((
            sol.x,
            SubproblemInfo {
                inner_iterations: sol.iterations,
                residual: sol.residual,
            },
        ))
    }
}
