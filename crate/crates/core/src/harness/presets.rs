//! Named LADMM configurations, expressed through the problem constants so
//! the same preset applies to TV denoising, SVM and generic two-block QPs.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::ladmm::{AdaptiveLadmmConfig, LadmmSchedule, TwoBlockProblem};
use crate::operators::ScalingOperator;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LadmmPreset {
    /// β = γ = γ₀ (default 10), P = Q = 0. Needs L_h = 0.
    Admm,
    /// Adaptive with Q = γCᵀC, η = 1, P = 0, γ = (μ_g+μ_h)/(2‖C‖²).
    AcceleratedAdmm,
    /// β = γ = 1/(2‖C‖²), Q = (½ + L_h)·I − γCᵀC, P = 0.
    Linearized,
    /// Adaptive with Q = q·I, q = (μ_g+μ_h)/20, γ = q/‖C‖², η = 1, P = 0.
    AcceleratedLinearized,
}

impl LadmmPreset {
    pub const ALL: [LadmmPreset; 4] = [
        LadmmPreset::Admm,
        LadmmPreset::AcceleratedAdmm,
        LadmmPreset::Linearized,
        LadmmPreset::AcceleratedLinearized,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LadmmPreset::Admm => "admm",
            LadmmPreset::AcceleratedAdmm => "accelerated_admm",
            LadmmPreset::Linearized => "linearized_admm",
            LadmmPreset::AcceleratedLinearized => "accelerated_linearized_admm",
        }
    }
}

impl FromStr for LadmmPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LadmmPreset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| invalid(format!("unknown LADMM preset {s:?}")))
    }
}

/// Default γ of the plain ADMM preset.
pub const ADMM_GAMMA: f64 = 10.0;

/// Builds the schedule of `preset`; `gamma` overrides the preset's γ.
pub fn ladmm_preset(
    preset: LadmmPreset,
    problem: &TwoBlockProblem,
    gamma: Option<f64>,
) -> Result<LadmmSchedule> {
    let cn = problem.c_map.norm_sq();
    let strong = problem.mu_g() + problem.mu_h();
    let need_strong = || {
        if strong > 0.0 {
            Ok(())
        } else {
            Err(Error::Schedule(
                "accelerated presets need μ_g + μ_h > 0".into(),
            ))
        }
    };
    match preset {
        LadmmPreset::Admm => LadmmSchedule::constant(
            gamma.unwrap_or(ADMM_GAMMA),
            ScalingOperator::zero(),
            ScalingOperator::zero(),
            problem,
        ),
        LadmmPreset::Linearized => {
            let g = gamma.unwrap_or(0.5 / cn);
            let q = ScalingOperator::IdentityMinusGram {
                a: g * cn + problem.l_h(),
                c: g,
                map: problem.c_map.clone(),
            };
            LadmmSchedule::constant(g, ScalingOperator::zero(), q, problem)
        }
        LadmmPreset::AcceleratedAdmm => {
            need_strong()?;
            let g = gamma.unwrap_or(0.5 * strong / cn);
            let q = ScalingOperator::IdentityMinusGram {
                a: 0.0,
                c: -g,
                map: problem.c_map.clone(),
            };
            let cfg = AdaptiveLadmmConfig::new(g, 0.0, q, 1.0, problem)?;
            Ok(LadmmSchedule::adaptive(cfg, problem))
        }
        LadmmPreset::AcceleratedLinearized => {
            need_strong()?;
            let q = strong / 20.0;
            let g = gamma.unwrap_or(q / cn);
            let cfg =
                AdaptiveLadmmConfig::new(g, 0.0, ScalingOperator::ScaledIdentity(q), 1.0, problem)?;
            Ok(LadmmSchedule::adaptive(cfg, problem))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{gen_svm, synth_image, tv_problem};

    #[test]
    fn names_round_trip() {
        for p in LadmmPreset::ALL {
            assert_eq!(p.name().parse::<LadmmPreset>().unwrap(), p);
        }
        assert!("fast".parse::<LadmmPreset>().is_err());
    }

    #[test]
    fn tv_presets_match_the_published_constants() {
        let img = synth_image(8);
        let p = tv_problem(&img, 0.04).unwrap();
        let dn = p.c_map.norm_sq();
        assert!((dn - 8.0).abs() < 1e-12);
        match ladmm_preset(LadmmPreset::AcceleratedAdmm, &p, None).unwrap() {
            LadmmSchedule::Adaptive { cfg, .. } => {
                assert_eq!(cfg.gamma, 1.0 / 16.0);
                assert_eq!(cfg.k0, 1);
            }
            _ => panic!("expected adaptive"),
        }
        match ladmm_preset(LadmmPreset::Linearized, &p, None).unwrap() {
            LadmmSchedule::Constant { gamma, q, .. } => {
                assert_eq!(gamma, 1.0 / 16.0);
                assert_eq!(q.identity_part(), 0.5);
            }
            _ => panic!("expected constant"),
        }
        match ladmm_preset(LadmmPreset::AcceleratedLinearized, &p, None).unwrap() {
            LadmmSchedule::Adaptive { cfg, .. } => {
                assert_eq!(cfg.gamma, 1.0 / 160.0);
                assert_eq!(cfg.q.identity_part(), 0.05);
            }
            _ => panic!("expected adaptive"),
        }
    }

    #[test]
    fn svm_accelerated_preset_uses_mu2() {
        let (p, _) = gen_svm(10, 20, 5, 0.5, 0, 0.01, 0.01).unwrap();
        match ladmm_preset(LadmmPreset::AcceleratedLinearized, &p, None).unwrap() {
            LadmmSchedule::Adaptive { cfg, .. } => {
                assert!((cfg.q.identity_part() - 0.01 / 20.0).abs() < 1e-18);
                let bn = p.c_map.norm_sq();
                assert!((cfg.gamma - 0.01 / (20.0 * bn)).abs() < 1e-18);
            }
            _ => panic!("expected adaptive"),
        }
    }
}
