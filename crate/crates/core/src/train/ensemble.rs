use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::network::Network;
use crate::tensor::{Scalar, Tensor};
use crate::util::derive_seed;

use super::{run_training, Predictor, TrainConfig, TrainOutcome};

/// How member predictions are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Combine {
    /// Average the members' softmax outputs.
    MeanSoftmax,
    /// Average the parameter arrays into one network, then run it once.
    WeightAverage,
}

impl Combine {
    pub fn name(self) -> &'static str {
        match self {
            Combine::MeanSoftmax => "mean-softmax",
            Combine::WeightAverage => "weight-average",
        }
    }
}

impl fmt::Display for Combine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Combine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean-softmax" | "mean_softmax" => Ok(Combine::MeanSoftmax),
            "weight-average" | "weight_average" => Ok(Combine::WeightAverage),
            other => Err(Error::Config(format!(
                "unknown combine mode {other:?} (expected mean-softmax or weight-average)"
            ))),
        }
    }
}

/// Where the members came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// Per-epoch checkpoints of a single run.
    Snapshot,
    /// Separately initialized and trained runs.
    Independent,
}

#[derive(Debug, Clone)]
pub struct EnsembleMember<T> {
    pub source: Option<PathBuf>,
    pub net: Network<T>,
}

#[derive(Debug, Clone)]
pub struct Ensemble<T> {
    members: Vec<EnsembleMember<T>>,
    combine: Combine,
    provenance: Provenance,
    averaged: Option<Network<T>>,
}

/// Mean of probability rows. Computed as `p0 + sum(p_i - p0) / n`, which
/// returns `p0` bitwise when every member agrees.
pub fn mean_softmax<T: Scalar>(probs: &[Tensor<T>]) -> Result<Tensor<T>> {
    let (first, rest) = probs
        .split_first()
        .ok_or_else(|| Error::Config("ensemble needs at least one member".into()))?;
    let mut acc = Tensor::<T>::zeros(first.shape());
    for p in rest {
        if p.shape() != first.shape() {
            return Err(Error::dim(format!(
                "member output {:?} does not match {:?}",
                p.shape(),
                first.shape()
            )));
        }
        for ((a, &x), &x0) in acc.data_mut().iter_mut().zip(p.data()).zip(first.data()) {
            *a = *a + (x - x0);
        }
    }
    let n = T::from_usize(probs.len()).expect("member count");
    let mut out = first.clone();
    for (o, &a) in out.data_mut().iter_mut().zip(acc.data()) {
        *o = *o + a / n;
    }
    Ok(out)
}

impl<T: Scalar> Ensemble<T> {
    pub fn new(nets: Vec<Network<T>>, combine: Combine, provenance: Provenance) -> Result<Self> {
        Self::from_members(
            nets.into_iter().map(|net| EnsembleMember { source: None, net }).collect(),
            combine,
            provenance,
        )
    }

    pub fn from_members(members: Vec<EnsembleMember<T>>, combine: Combine, provenance: Provenance) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::Config("ensemble needs at least one member".into()))?;
        let fp = first.net.fingerprint();
        for m in &members {
            if m.net.fingerprint() != fp {
                return Err(Error::Spec(format!(
                    "member {} has fingerprint {:016x}, expected {fp:016x}",
                    m.source.as_deref().map_or("<memory>".into(), |p| p.display().to_string()),
                    m.net.fingerprint()
                )));
            }
        }
        let averaged = match combine {
            Combine::WeightAverage => {
                let nets: Vec<Network<T>> = members.iter().map(|m| m.net.clone()).collect();
                Some(Network::average(&nets)?)
            }
            Combine::MeanSoftmax => None,
        };
        Ok(Ensemble {
            members,
            combine,
            provenance,
            averaged,
        })
    }

    /// Load checkpoints in the given order.
    pub fn load(paths: &[PathBuf], combine: Combine, provenance: Provenance) -> Result<Self> {
        let members = paths
            .iter()
            .map(|p| {
                Ok(EnsembleMember {
                    source: Some(p.clone()),
                    net: Network::load_checkpoint(p)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_members(members, combine, provenance)
    }

    pub fn members(&self) -> &[EnsembleMember<T>] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn combine(&self) -> Combine {
        self.combine
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Each member's probabilities, in member order.
    pub fn member_probs(&self, x: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        self.members.par_iter().map(|m| m.net.predict_probs(x)).collect()
    }

    pub fn predict_probs(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        match &self.averaged {
            Some(net) => net.predict_probs(x),
            None => mean_softmax(&self.member_probs(x)?),
        }
    }
}

impl<T: Scalar> Predictor<T> for Ensemble<T> {
    fn predict_probs(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ensemble::predict_probs(self, x)
    }

    fn num_classes(&self) -> usize {
        self.members[0].net.spec().num_classes
    }
}

/// Train `n` members from seeds derived from `cfg.seed` and the member index.
/// With `out`, member `i` writes under `out/member_XX/`.
pub fn independent_ensemble<T: Scalar>(
    cfg: &TrainConfig,
    n: usize,
    train_data: &Dataset,
    val_data: Option<&Dataset>,
    out: Option<&Path>,
) -> Result<Vec<(Network<T>, TrainOutcome)>> {
    if n == 0 {
        return Err(Error::Config("independent ensemble needs at least one member".into()));
    }
    (0..n)
        .map(|i| {
            let member_cfg = TrainConfig {
                seed: member_seed(cfg.seed, i),
                ..cfg.clone()
            };
            let dir = out.map(|o| o.join(format!("member_{i:02}")));
            run_training(&member_cfg, train_data, val_data, dir.as_deref())
        })
        .collect()
}

pub fn member_seed(base: u64, index: usize) -> u64 {
    derive_seed(base, &[index as u64])
}

/// `*.vrck` files directly inside `dir`, sorted by name.
pub fn list_snapshots(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "vrck") {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}
