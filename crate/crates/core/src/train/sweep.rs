use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::optim::OptimizerKind;
use crate::tensor::Scalar;
use crate::util::{derive_seed, write_atomic};

use super::{run_training, TrainConfig};

/// Axes of a grid search. An empty axis keeps the base config's value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepGrid {
    pub k: Vec<usize>,
    pub lr: Vec<f64>,
    pub dropout: Vec<f64>,
    pub batch_size: Vec<usize>,
    pub optimizer: Vec<OptimizerKind>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub index: usize,
    pub config: TrainConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepStatus {
    Completed,
    Diverged,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub index: usize,
    pub config: TrainConfig,
    pub status: SweepStatus,
    pub epochs_run: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    pub seconds: f64,
    pub message: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    /// Sorted by validation accuracy, best first; unfinished cells last.
    pub results: Vec<SweepResult>,
    /// Cells trained by this call.
    pub trained: Vec<usize>,
    /// Cells whose on-disk records were reused.
    pub reused: Vec<usize>,
}

pub const SWEEP_HEADER: &str =
    "rank,cell,k,lr,dropout,batch_size,optimizer,seed,status,epochs,train_loss,train_acc,val_loss,val_acc,seconds,message";

impl SweepGrid {
    /// Cartesian product in axis order k, lr, dropout, batch_size, optimizer
    /// (the last axis varies fastest). Cell `i` trains with seed
    /// `derive_seed(base.seed, [i])`.
    pub fn cells(&self, base: &TrainConfig) -> Vec<SweepCell> {
        fn axis<V: Clone>(values: &[V], fallback: V) -> Vec<V> {
            if values.is_empty() {
                vec![fallback]
            } else {
                values.to_vec()
            }
        }
        let mut cells = Vec::new();
        for &k in &axis(&self.k, base.k) {
            for &lr in &axis(&self.lr, base.optimizer.lr) {
                for &dropout in &axis(&self.dropout, base.dropout_rate) {
                    for &batch_size in &axis(&self.batch_size, base.batch_size) {
                        for &kind in &axis(&self.optimizer, base.optimizer.kind) {
                            let index = cells.len();
                            let mut config = base.clone();
                            config.k = k;
                            config.optimizer.lr = lr;
                            config.optimizer.kind = kind;
                            config.dropout_rate = dropout;
                            config.batch_size = batch_size;
                            config.seed = derive_seed(base.seed, &[index as u64]);
                            cells.push(SweepCell { index, config });
                        }
                    }
                }
            }
        }
        cells
    }
}

fn cell_record(out: &Path, index: usize) -> PathBuf {
    out.join("cells").join(format!("cell_{index:04}.json"))
}

fn run_cell<T: Scalar>(cell: &SweepCell, train_data: &Dataset, val_data: Option<&Dataset>, out: &Path) -> SweepResult {
    let started = Instant::now();
    let dir = out.join("cells").join(format!("cell_{:04}", cell.index));
    // a rerun starts the cell from scratch
    let _ = std::fs::remove_dir_all(&dir);
    let mut result = SweepResult {
        index: cell.index,
        config: cell.config.clone(),
        status: SweepStatus::Completed,
        epochs_run: 0,
        train_loss: f64::NAN,
        train_acc: f64::NAN,
        val_loss: f64::NAN,
        val_acc: f64::NAN,
        seconds: 0.0,
        message: None,
    };
    match run_training::<T>(&cell.config, train_data, val_data, Some(&dir)) {
        Ok((_, outcome)) => {
            let last = outcome.records.last().expect("at least one epoch");
            result.epochs_run = outcome.records.len();
            result.train_loss = last.train_loss;
            result.train_acc = last.train_acc;
            result.val_loss = last.val_loss;
            result.val_acc = last.val_acc;
        }
        Err(e) => {
            result.status = match e {
                Error::Divergence { epoch, .. } => {
                    result.epochs_run = epoch.saturating_sub(1);
                    SweepStatus::Diverged
                }
                _ => SweepStatus::Failed,
            };
            result.message = Some(e.to_string());
        }
    }
    result.seconds = started.elapsed().as_secs_f64();
    result
}

/// Train every cell of the grid under `out/cells/`, reusing completed
/// records whose config matches, and write `out/sweep.csv`.
pub fn sweep<T: Scalar>(
    base: &TrainConfig,
    grid: &SweepGrid,
    train_data: &Dataset,
    val_data: Option<&Dataset>,
    out: &Path,
) -> Result<SweepOutcome> {
    base.validate()?;
    let cells = grid.cells(base);
    for c in &cells {
        c.config.validate()?;
    }
    std::fs::create_dir_all(out.join("cells")).map_err(|e| Error::io(out, e))?;
    let mut outcome = SweepOutcome {
        results: Vec::with_capacity(cells.len()),
        trained: Vec::new(),
        reused: Vec::new(),
    };
    for cell in &cells {
        let record = cell_record(out, cell.index);
        let previous = std::fs::read_to_string(&record)
            .ok()
            .and_then(|s| serde_json::from_str::<SweepResult>(&s).ok())
            .filter(|r| r.config == cell.config);
        let result = match previous {
            Some(r) => {
                outcome.reused.push(cell.index);
                r
            }
            None => {
                log::info!("sweep cell {}/{}", cell.index + 1, cells.len());
                let r = run_cell::<T>(cell, train_data, val_data, out);
                write_atomic(&record, serde_json::to_string_pretty(&r)?.as_bytes())?;
                outcome.trained.push(cell.index);
                r
            }
        };
        outcome.results.push(result);
    }
    outcome.results.sort_by(|a, b| {
        let key = |r: &SweepResult| if r.status == SweepStatus::Completed { r.val_acc } else { f64::NEG_INFINITY };
        key(b).total_cmp(&key(a)).then(a.index.cmp(&b.index))
    });
    write_atomic(&out.join("sweep.csv"), sweep_csv(&outcome.results).as_bytes())?;
    Ok(outcome)
}

pub fn sweep_csv(results: &[SweepResult]) -> String {
    let mut s = format!("{SWEEP_HEADER}\n");
    for (rank, r) in results.iter().enumerate() {
        let c = &r.config;
        let status = serde_json::to_value(r.status).expect("status");
        let message = r.message.as_deref().unwrap_or("").replace('"', "\"\"");
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{:.3},\"{}\"",
            rank + 1,
            r.index,
            c.k,
            c.optimizer.lr,
            c.dropout_rate,
            c.batch_size,
            c.optimizer.kind.name(),
            c.seed,
            status.as_str().unwrap_or_default(),
            r.epochs_run,
            r.train_loss,
            r.train_acc,
            r.val_loss,
            r.val_acc,
            r.seconds,
            message
        )
        .unwrap();
    }
    s
}
