//! Training loop, evaluation, ensembles and hyperparameter sweeps.

mod ensemble;
mod metrics;
mod sweep;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tape;
use crate::data::{batch_iter, Dataset};
use crate::error::{Error, Result};
use crate::network::{Checkpoint, Network, NetworkSpec};
use crate::ops::{BnConfig, Mode};
use crate::optim::{Optimizer, OptimizerConfig, PlateauSchedule};
use crate::tensor::{Scalar, Tensor};
use crate::util::derive_seed;

pub use ensemble::{
    independent_ensemble, list_snapshots, mean_softmax, member_seed, Combine, Ensemble, EnsembleMember, Provenance,
};
pub use metrics::{append_metrics, ConfusionMatrix, EpochRecord, METRICS_HEADER};
pub use sweep::{sweep, sweep_csv, SweepCell, SweepGrid, SweepOutcome, SweepResult, SweepStatus, SWEEP_HEADER};

/// Stream labels mixed into the run seed.
const INIT_STREAM: u64 = 1;
const DATA_STREAM: u64 = 2;
const DROPOUT_STREAM: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub k: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub optimizer: OptimizerConfig,
    pub schedule: PlateauSchedule,
    pub dropout_rate: f64,
    pub seed: u64,
    /// Save a snapshot every this many epochs; 0 disables snapshots.
    pub snapshot_every: usize,
    pub augment: bool,
    pub bn: BnConfig,
    /// Stop once an epoch's training accuracy reaches this value.
    pub stop_at_train_acc: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            k: 1,
            batch_size: 64,
            epochs: 10,
            optimizer: OptimizerConfig::default(),
            schedule: PlateauSchedule::default(),
            dropout_rate: 0.3,
            seed: 0,
            snapshot_every: 1,
            augment: true,
            bn: BnConfig::default(),
            stop_at_train_acc: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        self.optimizer.validate()?;
        self.schedule.validate()
    }

    /// Network spec for data of the given shape.
    pub fn network_spec(&self, input_dims: [usize; 3], num_classes: usize) -> NetworkSpec {
        NetworkSpec {
            k: self.k,
            num_classes,
            input_dims,
            stem_pool: true,
            dropout_rate: self.dropout_rate,
            bn: self.bn,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub records: Vec<EpochRecord>,
    pub snapshots: Vec<PathBuf>,
    pub final_lr: f64,
}

/// Loss, accuracy and confusion counts of one evaluation pass.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
}

/// Anything that maps a batch to class probabilities in eval mode.
pub trait Predictor<T: Scalar>: Sync {
    fn predict_probs(&self, x: &Tensor<T>) -> Result<Tensor<T>>;
    fn num_classes(&self) -> usize;
}

impl<T: Scalar> Predictor<T> for Network<T> {
    fn predict_probs(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Network::predict_probs(self, x)
    }

    fn num_classes(&self) -> usize {
        self.spec().num_classes
    }
}

/// Row-wise argmax; ties go to the lowest class index.
pub fn argmax_rows<T: Scalar>(probs: &Tensor<T>) -> Vec<usize> {
    let classes = probs.shape()[1];
    probs
        .data()
        .chunks(classes)
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, T::neg_infinity()), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
                .0
        })
        .collect()
}

/// Eval-mode pass over `data` without augmentation. Loss is the mean
/// negative log of the predicted probability of the true class.
pub fn evaluate<T: Scalar, P: Predictor<T> + ?Sized>(
    model: &P,
    data: &Dataset,
    batch_size: usize,
    class_names: Option<&[String]>,
) -> Result<Evaluation> {
    let classes = model.num_classes();
    let mut confusion = match class_names {
        Some(names) if names.len() == classes => ConfusionMatrix::new(names.to_vec()),
        Some(names) => {
            return Err(Error::Data(format!(
                "{} class names for a {classes}-class model",
                names.len()
            )))
        }
        None => ConfusionMatrix::unnamed(classes),
    };
    let floor = T::min_positive_value();
    let mut loss = 0.0;
    for batch in batch_iter::<T>(data, batch_size, 0, 0, false, false)? {
        let batch = batch?;
        let probs = model.predict_probs(&batch.x)?;
        for ((row, &label), pred) in probs.data().chunks(classes).zip(&batch.labels).zip(argmax_rows(&probs)) {
            if label >= classes {
                return Err(Error::Label {
                    row: 0,
                    label,
                    classes,
                });
            }
            loss -= row[label].max(floor).to_f64().expect("finite").ln();
            confusion.add(label, pred);
        }
    }
    Ok(Evaluation {
        loss: loss / data.len() as f64,
        accuracy: confusion.accuracy(),
        confusion,
    })
}

/// Build and initialize the network for `cfg` and `data`.
pub fn init_network<T: Scalar>(cfg: &TrainConfig, data: &Dataset) -> Result<Network<T>> {
    let spec = cfg.network_spec(data.dims, data.num_classes);
    Network::new(&spec, &mut ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[INIT_STREAM])))
}

pub fn snapshot_path(out: &Path, epoch: usize) -> PathBuf {
    out.join("snapshots").join(format!("epoch_{epoch:03}.vrck"))
}

fn scalar(v: f64) -> Tensor<f64> {
    Tensor::from_vec(&[1], vec![v]).expect("rank 1")
}

/// Train `net` in place. With `out`, appends `metrics.csv` there and writes
/// snapshots to `out/snapshots/epoch_XXX.vrck`.
///
/// The run is a pure function of the config, the data and the initial
/// weights: shuffling, augmentation and dropout masks all derive from
/// `cfg.seed`, and no kernel's result depends on the thread count.
pub fn train<T: Scalar>(
    net: &mut Network<T>,
    train_data: &Dataset,
    val_data: Option<&Dataset>,
    cfg: &TrainConfig,
    out: Option<&Path>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    net.set_dropout_rate(cfg.dropout_rate)?;
    if train_data.num_classes != net.spec().num_classes || train_data.dims != net.spec().input_dims {
        return Err(Error::Spec(format!(
            "data has {} classes at {:?}, network expects {} at {:?}",
            train_data.num_classes,
            train_data.dims,
            net.spec().num_classes,
            net.spec().input_dims
        )));
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut opt = Optimizer::new(cfg.optimizer, net.params())?;
    let mut schedule = cfg.schedule.clone();
    let mut lr = cfg.optimizer.lr;
    let data_seed = derive_seed(cfg.seed, &[DATA_STREAM]);
    let mut tape = Tape::new();
    let mut outcome = TrainOutcome {
        records: Vec::new(),
        snapshots: Vec::new(),
        final_lr: lr,
    };

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        let (mut loss_sum, mut correct, mut seen) = (0.0, 0usize, 0usize);
        let batches = batch_iter::<T>(train_data, cfg.batch_size, data_seed, epoch as u64, true, cfg.augment)?;
        for (b, batch) in batches.enumerate() {
            let batch = batch?;
            let mut rng =
                ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[DROPOUT_STREAM, epoch as u64, b as u64]));
            let step = net.loss_and_grads(&mut tape, batch.x, &batch.labels, Mode::Train, &mut rng)?;
            let loss = step.loss.to_f64().unwrap_or(f64::NAN);
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, batch: b, loss });
            }
            opt.step(net.params_mut(), &step.grads, lr)?;
            let n = batch.labels.len();
            loss_sum += loss * n as f64;
            seen += n;
            correct += argmax_rows(&step.logits)
                .iter()
                .zip(&batch.labels)
                .filter(|(p, l)| p == l)
                .count();
        }
        let train_loss = loss_sum / seen as f64;
        let train_acc = correct as f64 / seen as f64;
        let (val_loss, val_acc) = match val_data {
            Some(v) => {
                let e = evaluate(&*net, v, cfg.batch_size, None)?;
                (e.loss, e.accuracy)
            }
            None => (train_loss, train_acc),
        };
        let record = EpochRecord {
            epoch,
            train_loss,
            train_acc,
            val_loss,
            val_acc,
            lr,
            seconds: started.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {epoch}/{}: train loss {train_loss:.4} acc {train_acc:.4}, val loss {val_loss:.4} acc {val_acc:.4}, lr {lr:e}",
            cfg.epochs
        );
        lr = schedule.update(val_loss, lr).map_err(|e| match e {
            Error::Divergence { loss, .. } => Error::Divergence { epoch, batch: 0, loss },
            other => other,
        })?;
        if let Some(dir) = out {
            append_metrics(&dir.join("metrics.csv"), &record)?;
            if cfg.snapshot_every > 0 && epoch % cfg.snapshot_every == 0 {
                let mut ckpt: Checkpoint = net.to_checkpoint();
                ckpt.insert("meta/epoch", scalar(epoch as f64));
                ckpt.insert("meta/step", scalar(opt.t as f64));
                ckpt.insert("meta/lr", scalar(lr));
                ckpt.insert("sched/state", Tensor::<f64>::from_vec(&[3], schedule.state().to_vec())?);
                opt.save_into(&mut ckpt, net.params());
                let path = snapshot_path(dir, epoch);
                ckpt.save(&path)?;
                outcome.snapshots.push(path);
            }
        }
        outcome.records.push(record);
        if cfg.stop_at_train_acc.is_some_and(|target| train_acc >= target) {
            break;
        }
    }
    outcome.final_lr = lr;
    Ok(outcome)
}

/// Initialize from the config seed and train.
pub fn run_training<T: Scalar>(
    cfg: &TrainConfig,
    train_data: &Dataset,
    val_data: Option<&Dataset>,
    out: Option<&Path>,
) -> Result<(Network<T>, TrainOutcome)> {
    cfg.validate()?;
    let mut net = init_network(cfg, train_data)?;
    let outcome = train(&mut net, train_data, val_data, cfg, out)?;
    Ok((net, outcome))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{VoxelCache, VoxelGrid};

    /// Two classes: a filled slab in the low or the high half of the grid.
    pub(crate) fn toy_data(n_per_class: usize, dims: [usize; 3], seed: u64) -> Dataset {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut labels = Vec::new();
        let mut grids = Vec::new();
        for c in 0..2 {
            for _ in 0..n_per_class {
                let mut g = VoxelGrid::empty(dims);
                for _ in 0..dims[0] * dims[1] {
                    let d = rng.random_range(0..dims[0] / 2) + c * dims[0] / 2;
                    g.set([d, rng.random_range(0..dims[1]), rng.random_range(0..dims[2])]);
                }
                labels.push(c);
                grids.push(g);
            }
        }
        Dataset::from_cache(VoxelCache { dims, labels, grids }, 2).unwrap()
    }

    fn tiny_cfg() -> TrainConfig {
        TrainConfig {
            batch_size: 4,
            epochs: 2,
            augment: false,
            dropout_rate: 0.2,
            optimizer: OptimizerConfig {
                lr: 0.01,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn loss_trajectory_is_bitwise_reproducible() {
        let data = toy_data(4, [8, 8, 8], 1);
        let (_, a) = run_training::<f64>(&tiny_cfg(), &data, None, None).unwrap();
        let (_, b) = run_training::<f64>(&tiny_cfg(), &data, None, None).unwrap();
        for (x, y) in a.records.iter().zip(&b.records) {
            assert_eq!(x.train_loss.to_bits(), y.train_loss.to_bits());
        }
    }

    #[test]
    fn snapshots_and_metrics_written() {
        let data = toy_data(3, [8, 8, 8], 2);
        let dir = tempfile::tempdir().unwrap();
        let cfg = TrainConfig {
            epochs: 3,
            ..tiny_cfg()
        };
        let (net, out) = run_training::<f32>(&cfg, &data, Some(&data), Some(dir.path())).unwrap();
        assert_eq!(out.snapshots.len(), 3);
        let metrics = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
        assert_eq!(metrics.lines().count(), 4);
        let last = Network::<f32>::load_checkpoint(&out.snapshots[2]).unwrap();
        assert_eq!(last.fingerprint(), net.fingerprint());
        let ckpt = Checkpoint::load(&out.snapshots[2]).unwrap();
        let opt = Optimizer::<f32>::load_from(cfg.optimizer, &ckpt, last.params()).unwrap();
        assert_eq!(opt.t, 3 * 2);
    }

    #[test]
    fn label_mismatch_is_spec_error() {
        let data = toy_data(2, [8, 8, 8], 3);
        let spec = NetworkSpec {
            num_classes: 3,
            input_dims: [8, 8, 8],
            ..Default::default()
        };
        let mut net = Network::<f32>::build(&spec).unwrap();
        assert!(matches!(train(&mut net, &data, None, &tiny_cfg(), None), Err(Error::Spec(_))));
    }

    #[test]
    fn huge_lr_diverges_with_context() {
        let data = toy_data(4, [8, 8, 8], 4);
        let cfg = TrainConfig {
            epochs: 30,
            optimizer: OptimizerConfig {
                kind: crate::optim::OptimizerKind::SgdNesterov,
                lr: 1e30,
                ..Default::default()
            },
            ..tiny_cfg()
        };
        match run_training::<f32>(&cfg, &data, None, None) {
            Err(Error::Divergence { epoch, .. }) => assert!(epoch >= 1),
            other => panic!("expected divergence, got {:?}", other.map(|o| o.1.records)),
        }
    }
}
