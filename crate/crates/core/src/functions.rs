//! Smooth terms (value, gradient, Lipschitz constant) and prox-friendly terms
//! (value, proximal map, strong-convexity modulus).

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, invalid, Result};
use crate::linalg::{dist_sq, dot};
use crate::operators::LinearMap;

/// Smooth term supplied by the caller.
pub trait SmoothTerm: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient_into(&self, x: &[f64], out: &mut [f64]);
    fn lipschitz(&self) -> f64;
    fn strong_convexity(&self) -> f64;
}

/// Convex differentiable term with Lipschitz gradient.
#[derive(Clone, Debug)]
pub enum SmoothFn {
    Zero {
        n: usize,
    },
    /// ½ xᵀQx + cᵀx with symmetric PSD `Q`.
    Quadratic {
        q: LinearMap,
        c: Vec<f64>,
        lipschitz: f64,
        strong_convexity: f64,
    },
    Custom(Arc<dyn SmoothTerm>),
}

impl SmoothFn {
    /// Builds ½ xᵀQx + cᵀx. The Lipschitz constant is ‖Q‖₂ (power iteration
    /// when not supplied); the strong-convexity modulus is taken as given.
    pub fn quadratic(
        q: LinearMap,
        c: Vec<f64>,
        lipschitz: Option<f64>,
        strong_convexity: f64,
    ) -> Result<Self> {
        if q.rows() != q.cols() {
            return Err(invalid("quadratic term needs a square operator"));
        }
        check_len("SmoothFn::quadratic", q.cols(), c.len())?;
        if strong_convexity < 0.0 {
            return Err(invalid("strong convexity modulus must be nonnegative"));
        }
        let lipschitz = lipschitz.unwrap_or_else(|| q.norm_sq().sqrt());
        Ok(SmoothFn::Quadratic {
            q,
            c,
            lipschitz,
            strong_convexity,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            SmoothFn::Zero { n } => *n,
            SmoothFn::Quadratic { c, .. } => c.len(),
            SmoothFn::Custom(t) => t.dim(),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            SmoothFn::Zero { .. } => 0.0,
            SmoothFn::Quadratic { q, c, .. } => 0.5 * dot(x, &q.apply_vec(x)) + dot(c, x),
            SmoothFn::Custom(t) => t.value(x),
        }
    }

    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            SmoothFn::Zero { .. } => out.iter_mut().for_each(|o| *o = 0.0),
            SmoothFn::Quadratic { q, c, .. } => {
                q.apply_into(x, out);
                for (o, ci) in out.iter_mut().zip(c) {
                    *o += ci;
                }
            }
            SmoothFn::Custom(t) => t.gradient_into(x, out),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        self.gradient_into(x, &mut g);
        g
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            SmoothFn::Zero { .. } => 0.0,
            SmoothFn::Quadratic { lipschitz, .. } => *lipschitz,
            SmoothFn::Custom(t) => t.lipschitz(),
        }
    }

    pub fn strong_convexity(&self) -> f64 {
        match self {
            SmoothFn::Zero { .. } => 0.0,
            SmoothFn::Quadratic {
                strong_convexity, ..
            } => *strong_convexity,
            SmoothFn::Custom(t) => t.strong_convexity(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, SmoothFn::Zero { .. })
    }
}

/// Convex term with an inexpensive proximal map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProxFn {
    Zero,
    /// Indicator of the nonnegative orthant.
    NonNegative,
    /// `weight · ‖x‖₁`
    L1 {
        weight: f64,
    },
    /// `(1/m) Σ [x_i]₊`
    HingeSum {
        m: usize,
    },
    /// `mu1 · ‖x‖₁ + (mu2/2) ‖x‖²`
    ElasticNet {
        mu1: f64,
        mu2: f64,
    },
    /// `(weight/2) ‖x − center‖²`
    SquaredDistance {
        center: Vec<f64>,
        weight: f64,
    },
}

impl ProxFn {
    /// Function value; `None` when `x` lies outside the domain (indicators).
    pub fn value(&self, x: &[f64]) -> Option<f64> {
        match self {
            ProxFn::Zero => Some(0.0),
            ProxFn::NonNegative => x.iter().all(|v| *v >= 0.0).then_some(0.0),
            ProxFn::L1 { weight } => Some(weight * x.iter().map(|v| v.abs()).sum::<f64>()),
            ProxFn::HingeSum { m } => Some(x.iter().map(|v| v.max(0.0)).sum::<f64>() / *m as f64),
            ProxFn::ElasticNet { mu1, mu2 } => Some(
                mu1 * x.iter().map(|v| v.abs()).sum::<f64>()
                    + 0.5 * mu2 * x.iter().map(|v| v * v).sum::<f64>(),
            ),
            ProxFn::SquaredDistance { center, weight } => Some(0.5 * weight * dist_sq(x, center)),
        }
    }

    /// argmin_u g(u) + (1/2t)‖u − v‖².
    pub fn prox(&self, v: &[f64], t: f64) -> Result<Vec<f64>> {
        if !(t >= 0.0) {
            return Err(invalid(format!("prox step must be nonnegative, got {t}")));
        }
        if let ProxFn::SquaredDistance { center, .. } = self {
            check_len("ProxFn::prox", center.len(), v.len())?;
        }
        let mut out = v.to_vec();
        self.prox_in_place(&mut out, t);
        Ok(out)
    }

    /// In-place prox; callers guarantee `t ≥ 0` and matching dimensions.
    pub(crate) fn prox_in_place(&self, v: &mut [f64], t: f64) {
        match self {
            ProxFn::Zero => {}
            ProxFn::NonNegative => v.iter_mut().for_each(|x| *x = x.max(0.0)),
            ProxFn::L1 { weight } => soft_threshold_in_place(v, t * weight),
            ProxFn::HingeSum { m } => {
                let thr = t / *m as f64;
                for x in v.iter_mut() {
                    *x = hinge_prox_scalar(*x, thr);
                }
            }
            ProxFn::ElasticNet { mu1, mu2 } => {
                let shrink = 1.0 / (1.0 + t * mu2);
                soft_threshold_in_place(v, t * mu1);
                v.iter_mut().for_each(|x| *x *= shrink);
            }
            ProxFn::SquaredDistance { center, weight } => {
                let s = t * weight;
                for (x, c) in v.iter_mut().zip(center) {
                    *x = (*x + s * c) / (1.0 + s);
                }
            }
        }
    }

    pub fn strong_convexity(&self) -> f64 {
        match self {
            ProxFn::ElasticNet { mu2, .. } => *mu2,
            ProxFn::SquaredDistance { weight, .. } => *weight,
            _ => 0.0,
        }
    }

    /// `(w, center)` when the term is `(w/2)‖x − center‖²` (w = 0 for `Zero`).
    pub fn as_quadratic(&self) -> Option<(f64, Option<&[f64]>)> {
        match self {
            ProxFn::Zero => Some((0.0, None)),
            ProxFn::SquaredDistance { center, weight } => Some((*weight, Some(center.as_slice()))),
            _ => None,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            ProxFn::L1 { weight } if *weight < 0.0 => Err(invalid("l1 weight must be nonnegative")),
            ProxFn::HingeSum { m } if *m == 0 => Err(invalid("hinge sum needs m ≥ 1")),
            ProxFn::ElasticNet { mu1, mu2 } if *mu1 < 0.0 || *mu2 < 0.0 => {
                Err(invalid("elastic net weights must be nonnegative"))
            }
            ProxFn::SquaredDistance { center, weight } => {
                check_len("ProxFn::SquaredDistance", n, center.len())?;
                if *weight < 0.0 {
                    return Err(invalid("squared distance weight must be nonnegative"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

fn soft_threshold_in_place(v: &mut [f64], thr: f64) {
    for x in v.iter_mut() {
        *x = x.signum() * (x.abs() - thr).max(0.0);
        if *x == 0.0 {
            *x = 0.0;
        }
    }
}

fn hinge_prox_scalar(v: f64, thr: f64) -> f64 {
    if v > thr {
        v - thr
    } else if v >= 0.0 {
        0.0
    } else {
        v
    }
}

/// Componentwise sign(v)·max(|v| − t, 0).
pub fn prox_l1(v: &[f64], t: f64) -> Result<Vec<f64>> {
    ProxFn::L1 { weight: 1.0 }.prox(v, t)
}

/// Componentwise max(v, 0).
pub fn project_nonneg(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| x.max(0.0)).collect()
}

/// Prox of `(1/m) Σ [y_i]₊` with step `t`.
pub fn prox_hinge_sum(v: &[f64], t: f64, m: usize) -> Result<Vec<f64>> {
    if m == 0 {
        return Err(invalid("hinge sum needs m ≥ 1"));
    }
    ProxFn::HingeSum { m }.prox(v, t)
}

/// Prox of `mu1‖x‖₁ + (mu2/2)‖x‖²` with step `t`.
pub fn prox_elastic_net(v: &[f64], t: f64, mu1: f64, mu2: f64) -> Result<Vec<f64>> {
    if mu1 < 0.0 || mu2 < 0.0 {
        return Err(invalid("elastic net weights must be nonnegative"));
    }
    ProxFn::ElasticNet { mu1, mu2 }.prox(v, t)
}
