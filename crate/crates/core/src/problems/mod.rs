//! Seeded instance generators.

pub mod image;
pub mod io;
pub mod qp;
pub mod svm;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ladmm::TwoBlockProblem;
use crate::lalm::CompositeProblem;

pub use image::{
    add_noise, dft_quadratic_solve, diff_op_periodic, psnr, synth_image, tv_problem, ImageGrid,
};
pub use qp::{gen_ecqp, gen_nnqp, gen_two_block_qp, NnqpDist};
pub use svm::{gen_svm, SvmDataset};

/// Problem family with its parameters; a pure description from which the
/// instance is regenerated bit-for-bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ProblemSpec {
    Ecqp {
        m: usize,
        n: usize,
        seed: u64,
    },
    Nnqp {
        m: usize,
        n: usize,
        seed: u64,
        dist: NnqpDist,
    },
    TwoBlockQp {
        m: usize,
        n: usize,
        seed: u64,
    },
    Tv {
        size: usize,
        noise: f64,
        mu: f64,
        seed: u64,
    },
    Svm {
        m: usize,
        p: usize,
        s: usize,
        rho: f64,
        mu1: f64,
        mu2: f64,
        seed: u64,
    },
}

#[derive(Clone, Debug)]
pub enum Instance {
    Composite(CompositeProblem),
    TwoBlock(TwoBlockProblem),
    Tv {
        problem: TwoBlockProblem,
        clean: ImageGrid,
        noisy: ImageGrid,
        mu: f64,
    },
    Svm {
        problem: TwoBlockProblem,
        data: SvmDataset,
    },
}

impl Instance {
    pub fn composite(&self) -> Option<&CompositeProblem> {
        match self {
            Instance::Composite(p) => Some(p),
            _ => None,
        }
    }

    pub fn two_block(&self) -> Option<&TwoBlockProblem> {
        match self {
            Instance::Composite(_) => None,
            Instance::TwoBlock(p)
            | Instance::Tv { problem: p, .. }
            | Instance::Svm { problem: p, .. } => Some(p),
        }
    }

    pub fn two_block_mut(&mut self) -> Option<&mut TwoBlockProblem> {
        match self {
            Instance::Composite(_) => None,
            Instance::TwoBlock(p)
            | Instance::Tv { problem: p, .. }
            | Instance::Svm { problem: p, .. } => Some(p),
        }
    }
}

impl ProblemSpec {
    pub fn seed(&self) -> u64 {
        match self {
            ProblemSpec::Ecqp { seed, .. }
            | ProblemSpec::Nnqp { seed, .. }
            | ProblemSpec::TwoBlockQp { seed, .. }
            | ProblemSpec::Tv { seed, .. }
            | ProblemSpec::Svm { seed, .. } => *seed,
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            ProblemSpec::Ecqp { .. } => "ecqp",
            ProblemSpec::Nnqp { .. } => "nnqp",
            ProblemSpec::TwoBlockQp { .. } => "two_block_qp",
            ProblemSpec::Tv { .. } => "tv",
            ProblemSpec::Svm { .. } => "svm",
        }
    }

    /// File-name-safe key built from the family and every parameter.
    pub fn key(&self) -> String {
        // Display prints the shortest decimal that round-trips.
        let f = |v: f64| v.to_string().replace('-', "m").replace('.', "d");
        match self {
            ProblemSpec::Ecqp { m, n, seed } => format!("ecqp_m{m}_n{n}_s{seed}"),
            ProblemSpec::Nnqp { m, n, seed, dist } => {
                format!(
                    "nnqp_m{m}_n{n}_s{seed}_{}",
                    match dist {
                        NnqpDist::Gaussian => "gaussian",
                        NnqpDist::Uniform => "uniform",
                    }
                )
            }
            ProblemSpec::TwoBlockQp { m, n, seed } => format!("qp2_m{m}_n{n}_s{seed}"),
            ProblemSpec::Tv {
                size,
                noise,
                mu,
                seed,
            } => format!("tv_{size}_noise{}_mu{}_s{seed}", f(*noise), f(*mu)),
            ProblemSpec::Svm {
                m,
                p,
                s,
                rho,
                mu1,
                mu2,
                seed,
            } => format!(
                "svm_m{m}_p{p}_k{s}_rho{}_a{}_b{}_s{seed}",
                f(*rho),
                f(*mu1),
                f(*mu2)
            ),
        }
    }

    pub fn build(&self) -> Result<Instance> {
        Ok(match *self {
            ProblemSpec::Ecqp { m, n, seed } => Instance::Composite(gen_ecqp(m, n, seed)?),
            ProblemSpec::Nnqp { m, n, seed, dist } => {
                Instance::Composite(gen_nnqp(m, n, seed, dist)?)
            }
            ProblemSpec::TwoBlockQp { m, n, seed } => {
                Instance::TwoBlock(gen_two_block_qp(m, n, seed)?)
            }
            ProblemSpec::Tv {
                size,
                noise,
                mu,
                seed,
            } => {
                let clean = synth_image(size);
                let noisy = add_noise(&clean, noise, seed)?;
                Instance::Tv {
                    problem: tv_problem(&noisy, mu)?,
                    clean,
                    noisy,
                    mu,
                }
            }
            ProblemSpec::Svm {
                m,
                p,
                s,
                rho,
                mu1,
                mu2,
                seed,
            } => {
                let (problem, data) = gen_svm(m, p, s, rho, seed, mu1, mu2)?;
                Instance::Svm { problem, data }
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_are_distinct_and_path_safe() {
        let a = ProblemSpec::Tv {
            size: 64,
            noise: 0.1,
            mu: 0.04,
            seed: 1,
        };
        let b = ProblemSpec::Tv {
            size: 64,
            noise: 0.1,
            mu: 0.05,
            seed: 1,
        };
        assert_ne!(a.key(), b.key());
        assert!(a
            .key()
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_'));
    }

    #[test]
    fn spec_json_round_trip() {
        let s = ProblemSpec::Nnqp {
            m: 20,
            n: 200,
            seed: 4,
            dist: NnqpDist::Gaussian,
        };
        let txt = serde_json::to_string(&s).unwrap();
        assert!(txt.contains("\"family\":\"nnqp\""));
        let back: ProblemSpec = serde_json::from_str(&txt).unwrap();
        assert_eq!(back, s);
    }
}
