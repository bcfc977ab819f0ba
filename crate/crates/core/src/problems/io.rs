//! JSON instance files. Field names mirror the in-memory types; every float is
//! written with 17 significant digits so a load reproduces the instance bits.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::format::to_json;
use crate::functions::{ProxFn, SmoothFn};
use crate::ladmm::{TwoBlockProblem, TwoBlockReference};
use crate::lalm::{CompositeProblem, Reference};
use crate::operators::{DenseMatrix, LinearMap, PeriodicDiff};
use crate::rng::GENERATOR;

use super::{ImageGrid, Instance, ProblemSpec, SvmDataset};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapData {
    Dense(DenseMatrix),
    Identity { n: usize, scale: f64 },
    Zero { rows: usize, cols: usize },
    PeriodicDiff(PeriodicDiff),
}

impl MapData {
    pub fn from_map(map: &LinearMap) -> Result<Self> {
        Ok(match map {
            LinearMap::Dense(m) => MapData::Dense((**m).clone()),
            LinearMap::Identity { n, scale } => MapData::Identity {
                n: *n,
                scale: *scale,
            },
            LinearMap::Zero { rows, cols } => MapData::Zero {
                rows: *rows,
                cols: *cols,
            },
            LinearMap::PeriodicDiff(d) => MapData::PeriodicDiff(*d),
            LinearMap::Custom(_) => return Err(invalid("custom operators cannot be serialized")),
        })
    }

    pub fn into_map(self) -> LinearMap {
        match self {
            MapData::Dense(m) => LinearMap::dense(m),
            MapData::Identity { n, scale } => LinearMap::Identity { n, scale },
            MapData::Zero { rows, cols } => LinearMap::Zero { rows, cols },
            MapData::PeriodicDiff(d) => LinearMap::PeriodicDiff(d),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SmoothData {
    Zero {
        n: usize,
    },
    Quadratic {
        q: MapData,
        c: Vec<f64>,
        lipschitz: f64,
        strong_convexity: f64,
    },
}

impl SmoothData {
    pub fn from_fn(f: &SmoothFn) -> Result<Self> {
        Ok(match f {
            SmoothFn::Zero { n } => SmoothData::Zero { n: *n },
            SmoothFn::Quadratic {
                q,
                c,
                lipschitz,
                strong_convexity,
            } => SmoothData::Quadratic {
                q: MapData::from_map(q)?,
                c: c.clone(),
                lipschitz: *lipschitz,
                strong_convexity: *strong_convexity,
            },
            SmoothFn::Custom(_) => return Err(invalid("custom smooth terms cannot be serialized")),
        })
    }

    pub fn into_fn(self) -> SmoothFn {
        match self {
            SmoothData::Zero { n } => SmoothFn::Zero { n },
            SmoothData::Quadratic {
                q,
                c,
                lipschitz,
                strong_convexity,
            } => SmoothFn::Quadratic {
                q: q.into_map(),
                c,
                lipschitz,
                strong_convexity,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompositeData {
    pub f: SmoothData,
    pub g: ProxFn,
    pub a: MapData,
    pub b: Vec<f64>,
    pub reference: Option<Reference>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoBlockData {
    pub f: ProxFn,
    pub g: ProxFn,
    pub h: SmoothData,
    pub b_map: MapData,
    pub c_map: MapData,
    pub rhs: Vec<f64>,
    pub reference: Option<TwoBlockReference>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceData {
    Composite(CompositeData),
    TwoBlock(TwoBlockData),
    Tv {
        problem: TwoBlockData,
        clean: ImageGrid,
        noisy: ImageGrid,
        mu: f64,
    },
    Svm {
        problem: TwoBlockData,
        data: SvmDataset,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub generator: String,
    pub spec: ProblemSpec,
    pub instance: InstanceData,
}

fn composite_data(p: &CompositeProblem) -> Result<CompositeData> {
    Ok(CompositeData {
        f: SmoothData::from_fn(&p.f)?,
        g: p.g.clone(),
        a: MapData::from_map(&p.a)?,
        b: p.b.clone(),
        reference: p.reference.clone(),
    })
}

fn two_block_data(p: &TwoBlockProblem) -> Result<TwoBlockData> {
    Ok(TwoBlockData {
        f: p.f.clone(),
        g: p.g.clone(),
        h: SmoothData::from_fn(&p.h)?,
        b_map: MapData::from_map(&p.b_map)?,
        c_map: MapData::from_map(&p.c_map)?,
        rhs: p.rhs.clone(),
        reference: p.reference.clone(),
    })
}

fn composite_problem(d: CompositeData) -> Result<CompositeProblem> {
    let p = CompositeProblem::new(d.f.into_fn(), d.g, d.a.into_map(), d.b)?;
    match d.reference {
        Some(r) => p.with_reference(r),
        None => Ok(p),
    }
}

fn two_block_problem(d: TwoBlockData) -> Result<TwoBlockProblem> {
    let p = TwoBlockProblem::new(
        d.f,
        d.g,
        d.h.into_fn(),
        d.b_map.into_map(),
        d.c_map.into_map(),
        d.rhs,
    )?;
    match d.reference {
        Some(r) => p.with_reference(r),
        None => Ok(p),
    }
}

impl InstanceFile {
    pub fn from_instance(spec: &ProblemSpec, inst: &Instance) -> Result<Self> {
        let instance = match inst {
            Instance::Composite(p) => InstanceData::Composite(composite_data(p)?),
            Instance::TwoBlock(p) => InstanceData::TwoBlock(two_block_data(p)?),
            Instance::Tv {
                problem,
                clean,
                noisy,
                mu,
            } => InstanceData::Tv {
                problem: two_block_data(problem)?,
                clean: clean.clone(),
                noisy: noisy.clone(),
                mu: *mu,
            },
            Instance::Svm { problem, data } => InstanceData::Svm {
                problem: two_block_data(problem)?,
                data: data.clone(),
            },
        };
        Ok(InstanceFile {
            generator: GENERATOR.to_string(),
            spec: spec.clone(),
            instance,
        })
    }

    pub fn into_instance(self) -> Result<Instance> {
        Ok(match self.instance {
            InstanceData::Composite(d) => Instance::Composite(composite_problem(d)?),
            InstanceData::TwoBlock(d) => Instance::TwoBlock(two_block_problem(d)?),
            InstanceData::Tv {
                problem,
                clean,
                noisy,
                mu,
            } => Instance::Tv {
                problem: two_block_problem(problem)?,
                clean,
                noisy,
                mu,
            },
            InstanceData::Svm { problem, data } => Instance::Svm {
                problem: two_block_problem(problem)?,
                data,
            },
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(to_json(self, false)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: InstanceFile = serde_json::from_str(s)?;
        if f.generator != GENERATOR {
            return Err(Error::Format(format!(
                "instance written by generator {:?}, expected {GENERATOR:?}",
                f.generator
            )));
        }
        Ok(f)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ecqp_file_round_trip_is_bit_exact() {
        let spec = ProblemSpec::Ecqp {
            m: 2,
            n: 5,
            seed: 7,
        };
        let inst = spec.build().unwrap();
        let file = InstanceFile::from_instance(&spec, &inst).unwrap();
        let text = file.to_json().unwrap();
        let back = InstanceFile::from_json(&text).unwrap();
        assert_eq!(back, file);
    }

    #[test]
    fn tv_file_round_trip() {
        let spec = ProblemSpec::Tv {
            size: 4,
            noise: 0.1,
            mu: 0.04,
            seed: 2,
        };
        let inst = spec.build().unwrap();
        let file = InstanceFile::from_instance(&spec, &inst).unwrap();
        let back = InstanceFile::from_json(&file.to_json().unwrap()).unwrap();
        assert_eq!(back, file);
        assert!(matches!(back.into_instance().unwrap(), Instance::Tv { .. }));
    }

    #[test]
    fn foreign_generator_rejected() {
        let spec = ProblemSpec::TwoBlockQp {
            m: 1,
            n: 2,
            seed: 0,
        };
        let mut file = InstanceFile::from_instance(&spec, &spec.build().unwrap()).unwrap();
        file.generator = "other".into();
        assert!(InstanceFile::from_json(&file.to_json().unwrap()).is_err());
    }
}
