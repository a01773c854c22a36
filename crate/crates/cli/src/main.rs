//! `volres`: voxelize ModelNet-style mesh trees, train volumetric wide
//! residual networks, evaluate single models and ensembles, check gradients
//! and run grid searches.

mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use volres::autodiff::OpKind;
use volres::data::{Dataset, DatasetIndex, Split, VoxelCache};
use volres::gradcheck::{run_gradcheck, GradCheckConfig};
use volres::network::{Checkpoint, Network, NetworkSpec, REFERENCE_PARAM_COUNTS};
use volres::optim::OptimizerKind;
use volres::train::{
    evaluate, run_training, sweep, Combine, ConfusionMatrix, Ensemble, Evaluation, Provenance,
    TrainConfig,
};
use volres::util::write_atomic;
use volres::{DType, Scalar};

use config::{parse_dims, EnsembleMode, Precision, RunConfig};

const EXIT_INPUT: u8 = 1;
const EXIT_DIVERGENCE: u8 = 2;
const EXIT_VERIFICATION: u8 = 3;

#[derive(Parser)]
#[command(name = "volres", version, about = "Volumetric wide residual networks for voxel classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a `<class>/<train|test>/*.off` tree into voxel caches.
    Voxelize(VoxelizeArgs),
    /// Train one network, saving snapshots and per-epoch metrics.
    Train(TrainArgs),
    /// Evaluate checkpoints, alone or as an ensemble.
    Eval(EvalArgs),
    /// Finite-difference check of every differentiable op.
    Gradcheck(GradcheckArgs),
    /// Grid search over training hyperparameters.
    Sweep(SweepArgs),
    /// Print parameter counts per widening factor.
    Params(ParamsArgs),
}

#[derive(Args)]
struct VoxelizeArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input_dir: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// `N` for a cube or `D,H,W`.
    #[arg(long, value_parser = parse_dims)]
    dims: Option<[usize; 3]>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_skip_fraction: Option<f64>,
}

#[derive(Args)]
struct TrainFlags {
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, value_parser = parse_optimizer)]
    optimizer: Option<OptimizerKind>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    snapshot_every: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Random-rotation augmentation (needs the source meshes listed in index.json).
    #[arg(long)]
    augment: Option<bool>,
    #[arg(long)]
    stop_at_train_acc: Option<f64>,
    #[arg(long, value_enum)]
    precision: Option<Precision>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory written by `voxelize`.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    flags: TrainFlags,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Glob pattern, e.g. `run/snapshots/*.vrck`.
    #[arg(long)]
    checkpoints: Option<String>,
    #[arg(long, value_enum)]
    ensemble: Option<EnsembleMode>,
    #[arg(long, value_parser = parse_split)]
    split: Option<Split>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    report_dir: Option<PathBuf>,
    #[arg(long)]
    batch_size: Option<usize>,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Also write `gradcheck.json` and `resolved_config.json` here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    cases_per_op: Option<usize>,
    #[arg(long)]
    network_coords_per_param: Option<usize>,
    /// Negate one op's backward pass; the check must then fail.
    #[arg(long, hide = true, value_parser = parse_op)]
    inject_sign_flip: Option<OpKind>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    flags: TrainFlags,
}

#[derive(Args)]
struct ParamsArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 4, 8, 16])]
    k: Vec<usize>,
    #[arg(long, default_value_t = 40)]
    classes: usize,
    #[arg(long, value_parser = parse_dims, default_value = "30")]
    dims: [usize; 3],
    #[arg(long)]
    no_stem_pool: bool,
}

fn parse_optimizer(s: &str) -> std::result::Result<OptimizerKind, String> {
    s.parse().map_err(|e: volres::Error| e.to_string())
}

fn parse_split(s: &str) -> std::result::Result<Split, String> {
    s.parse().map_err(|e: volres::Error| e.to_string())
}

fn parse_op(s: &str) -> std::result::Result<OpKind, String> {
    OpKind::from_name(s).ok_or_else(|| format!("unknown op {s:?}"))
}

/// A failure with the process exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        let diverged = error
            .chain()
            .any(|e| matches!(e.downcast_ref::<volres::Error>(), Some(volres::Error::Divergence { .. })));
        Failure {
            code: if diverged { EXIT_DIVERGENCE } else { EXIT_INPUT },
            error,
        }
    }
}

impl From<volres::Error> for Failure {
    fn from(e: volres::Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

type CmdResult = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(EXIT_INPUT);
    }
    let result = match cli.command {
        Command::Voxelize(a) => cmd_voxelize(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Gradcheck(a) => cmd_gradcheck(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Params(a) => cmd_params(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            if f.code == EXIT_DIVERGENCE {
                eprintln!("hint: lower the learning rate or the batch size");
            }
            ExitCode::from(f.code)
        }
    }
}

/// `VOLRES_THREADS` caps the worker pool; unset or 0 means one per core.
fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("VOLRES_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().with_context(|| format!("VOLRES_THREADS={v:?} is not a count"))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn cmd_voxelize(a: VoxelizeArgs) -> CmdResult {
    let mut cfg = RunConfig::load(a.config.as_deref(), "voxelize")?;
    let v = &mut cfg.voxelize;
    if let Some(x) = a.input_dir {
        v.input_dir = Some(x);
    }
    if let Some(x) = a.dims {
        v.dims = x;
    }
    if let Some(x) = a.seed {
        v.seed = x;
    }
    if let Some(x) = a.max_skip_fraction {
        v.max_skip_fraction = x;
    }
    if let Some(x) = a.output {
        cfg.out = Some(x);
    }
    let input = cfg
        .voxelize
        .input_dir
        .clone()
        .context("no input directory: pass --input-dir")?;
    let input = input
        .canonicalize()
        .with_context(|| format!("input directory {}", input.display()))?;
    let out = cfg.out_dir()?.to_path_buf();
    let dims = cfg.voxelize.dims;
    if dims.iter().any(|&d| d == 0) {
        return Err(anyhow::anyhow!("dims must be positive, got {dims:?}").into());
    }

    let index = DatasetIndex::scan(&input)?;
    let mut skipped = Vec::new();
    for split in Split::ALL {
        let (cache, skips) = VoxelCache::build(&index, split, dims);
        cache.save(&cache_path(&out, split))?;
        println!("{split}: {} cached, {} skipped", cache.len(), skips.len());
        skipped.extend(skips);
    }

    let mut doc: serde_json::Value = serde_json::from_str(&index.to_json()?).map_err(anyhow::Error::from)?;
    doc["dims"] = serde_json::json!(dims);
    doc["seed"] = serde_json::json!(cfg.voxelize.seed);
    doc["skipped"] = serde_json::json!(skipped.iter().map(|s| &s.path).collect::<Vec<_>>());
    write_atomic(&out.join("index.json"), serde_json::to_string_pretty(&doc).map_err(anyhow::Error::from)?.as_bytes())?;
    let mut report = String::new();
    for s in &skipped {
        writeln!(report, "{}\t{}", s.path.display(), s.reason).unwrap();
    }
    write_atomic(&out.join("skipped.txt"), report.as_bytes())?;
    cfg.voxelize.input_dir = Some(input);
    cfg.write_resolved("voxelize")?;

    println!(
        "{} classes, {} train, {} test, {} total",
        index.num_classes(),
        index.split_len(Split::Train),
        index.split_len(Split::Test),
        index.entries.len()
    );
    let fraction = skipped.len() as f64 / index.entries.len().max(1) as f64;
    if fraction > cfg.voxelize.max_skip_fraction {
        return Err(anyhow::anyhow!(
            "{} of {} meshes could not be converted ({:.2}% > {:.2}%); see skipped.txt",
            skipped.len(),
            index.entries.len(),
            100.0 * fraction,
            100.0 * cfg.voxelize.max_skip_fraction
        )
        .into());
    }
    Ok(())
}

fn cache_path(dir: &Path, split: Split) -> PathBuf {
    dir.join(format!("{}.voxl", split.name()))
}

/// Index written by `voxelize`, with the skipped entries dropped so entry
/// order matches cache order.
fn load_index(data: &Path) -> Result<DatasetIndex> {
    let path = data.join("index.json");
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let mut index = DatasetIndex::from_json(&text)?;
    let doc: serde_json::Value = serde_json::from_str(&text)?;
    let skipped: Vec<PathBuf> = serde_json::from_value(doc.get("skipped").cloned().unwrap_or_default()).unwrap_or_default();
    index.entries.retain(|e| !skipped.contains(&e.path));
    Ok(index)
}

/// Load one split. With `with_sources`, the OFF paths are attached so the
/// samples can be re-voxelized under random rotations.
fn load_split(data: &Path, split: Split, with_sources: bool) -> Result<(Dataset, Vec<String>)> {
    let index = load_index(data)?;
    let path = cache_path(data, split);
    let cache = VoxelCache::load(&path).with_context(|| format!("loading voxel cache {}", path.display()))?;
    let mut ds = Dataset::from_cache(cache, index.num_classes())?;
    if with_sources {
        let paths: Vec<PathBuf> = index.split(split).map(|e| e.path.clone()).collect();
        if let Some(missing) = paths.iter().find(|p| !p.is_file()) {
            bail!(
                "augmentation needs the source meshes but {} is missing; rerun with --augment false",
                missing.display()
            );
        }
        ds.attach_sources(paths)?;
    }
    Ok((ds, index.classes))
}

fn apply_train_flags(t: &mut TrainConfig, f: TrainFlags, precision: &mut Precision) {
    macro_rules! set {
        ($flag:expr, $field:expr) => {
            if let Some(v) = $flag {
                $field = v;
            }
        };
    }
    set!(f.k, t.k);
    set!(f.batch_size, t.batch_size);
    set!(f.lr, t.optimizer.lr);
    set!(f.optimizer, t.optimizer.kind);
    set!(f.dropout, t.dropout_rate);
    set!(f.epochs, t.epochs);
    set!(f.snapshot_every, t.snapshot_every);
    set!(f.seed, t.seed);
    set!(f.augment, t.augment);
    set!(f.precision, *precision);
    if let Some(v) = f.stop_at_train_acc {
        t.stop_at_train_acc = Some(v);
    }
}

fn cmd_train(a: TrainArgs) -> CmdResult {
    let mut cfg = RunConfig::load(a.config.as_deref(), "train")?;
    if let Some(x) = a.data {
        cfg.data = Some(x);
    }
    if let Some(x) = a.out {
        cfg.out = Some(x);
    }
    apply_train_flags(&mut cfg.train, a.flags, &mut cfg.precision);
    cfg.train.validate()?;
    let data = cfg.data_dir()?.to_path_buf();
    let out = cfg.out_dir()?.to_path_buf();
    let (train, _) = load_split(&data, Split::Train, cfg.train.augment)?;
    let val = cache_path(&data, Split::Test)
        .is_file()
        .then(|| load_split(&data, Split::Test, false).map(|(d, _)| d))
        .transpose()?
        .filter(|d| !d.is_empty());
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    cfg.write_resolved("train")?;
    match cfg.precision {
        Precision::F32 => train_typed::<f32>(&cfg.train, &train, val.as_ref(), &out),
        Precision::F64 => train_typed::<f64>(&cfg.train, &train, val.as_ref(), &out),
    }
}

fn train_typed<T: Scalar>(cfg: &TrainConfig, train: &Dataset, val: Option<&Dataset>, out: &Path) -> CmdResult {
    log::info!(
        "training k={} on {} samples ({} validation), {} epochs",
        cfg.k,
        train.len(),
        val.map_or(0, Dataset::len),
        cfg.epochs
    );
    let (net, outcome) = run_training::<T>(cfg, train, val, Some(out))?;
    net.save_checkpoint(&out.join("final.vrck"))?;
    let last = outcome.records.last().expect("at least one epoch");
    println!(
        "finished {} epochs: train acc {:.4}, val acc {:.4}, {} snapshots in {}",
        outcome.records.len(),
        last.train_acc,
        last.val_acc,
        outcome.snapshots.len(),
        out.join("snapshots").display()
    );
    Ok(())
}

#[derive(Serialize)]
struct MemberRow {
    path: PathBuf,
    accuracy: f64,
    loss: f64,
}

#[derive(Serialize)]
struct EvalReport {
    split: Split,
    samples: usize,
    mode: EnsembleMode,
    members: Vec<MemberRow>,
    ensemble_accuracy: Option<f64>,
    ensemble_loss: Option<f64>,
    best_member: Option<usize>,
}

fn cmd_eval(a: EvalArgs) -> CmdResult {
    let mut cfg = RunConfig::load(a.config.as_deref(), "eval")?;
    if let Some(x) = a.checkpoints {
        cfg.eval.checkpoints = Some(x);
    }
    if let Some(x) = a.ensemble {
        cfg.eval.ensemble = x;
    }
    if let Some(x) = a.split {
        cfg.eval.split = x;
    }
    if let Some(x) = a.batch_size {
        cfg.eval.batch_size = x;
    }
    if let Some(x) = a.data {
        cfg.data = Some(x);
    }
    if let Some(x) = a.report_dir {
        cfg.out = Some(x);
    }
    let pattern = cfg
        .eval
        .checkpoints
        .clone()
        .context("no checkpoints: pass --checkpoints <glob>")?;
    let mut paths: Vec<PathBuf> = glob::glob(&pattern)
        .with_context(|| format!("bad glob {pattern:?}"))?
        .filter_map(|p| p.ok())
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(anyhow::anyhow!("no checkpoint matches {pattern:?}").into());
    }
    if cfg.eval.batch_size == 0 {
        return Err(anyhow::anyhow!("batch size must be >= 1").into());
    }
    let (data, classes) = load_split(cfg.data_dir()?, cfg.eval.split, false)?;
    let out = cfg.out_dir()?.to_path_buf();
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    cfg.write_resolved("eval")?;

    let dtype = Checkpoint::load(&paths[0])?
        .get("head.dense.weight")
        .map(|t| t.dtype())
        .context("checkpoint has no head.dense.weight")?;
    match dtype {
        DType::F32 => eval_typed::<f32>(&cfg, &paths, &data, &classes, &out),
        DType::F64 => eval_typed::<f64>(&cfg, &paths, &data, &classes, &out),
    }
}

fn eval_typed<T: Scalar>(
    cfg: &RunConfig,
    paths: &[PathBuf],
    data: &Dataset,
    classes: &[String],
    out: &Path,
) -> CmdResult {
    let batch = cfg.eval.batch_size;
    let combine = match cfg.eval.ensemble {
        EnsembleMode::MeanSoftmax => Some(Combine::MeanSoftmax),
        EnsembleMode::WeightAverage => Some(Combine::WeightAverage),
        EnsembleMode::None => None,
    };
    let ensemble = Ensemble::<T>::load(paths, combine.unwrap_or(Combine::MeanSoftmax), Provenance::Snapshot)?;
    if ensemble.members()[0].net.spec().input_dims != data.dims {
        return Err(anyhow::anyhow!(
            "checkpoints expect {:?} grids but the {} cache holds {:?}",
            ensemble.members()[0].net.spec().input_dims,
            cfg.eval.split,
            data.dims
        )
        .into());
    }

    let mut members = Vec::new();
    let mut evals = Vec::new();
    // a lone checkpoint needs no per-member pass in ensemble mode
    if combine.is_none() || paths.len() > 1 {
        for m in ensemble.members() {
            let e = evaluate(&m.net, data, batch, Some(classes))?;
            members.push(MemberRow {
                path: m.source.clone().unwrap_or_default(),
                accuracy: e.accuracy,
                loss: e.loss,
            });
            evals.push(e);
        }
    }
    let best = (0..members.len()).max_by(|&a, &b| members[a].accuracy.total_cmp(&members[b].accuracy).then(b.cmp(&a)));

    let (headline, confusion): (Option<Evaluation>, ConfusionMatrix) = if combine.is_some() {
        let e = evaluate(&ensemble, data, batch, Some(classes))?;
        let cm = e.confusion.clone();
        (Some(e), cm)
    } else {
        let b = best.expect("at least one member");
        (None, evals[b].confusion.clone())
    };

    if !members.is_empty() {
        println!("{:>6}  {:>8}  {:>8}  checkpoint", "member", "accuracy", "loss");
        for (i, m) in members.iter().enumerate() {
            println!("{i:>6}  {:>8.4}  {:>8.4}  {}", m.accuracy, m.loss, m.path.display());
        }
    }
    match (&headline, best) {
        (Some(e), _) => println!(
            "{} ensemble of {} on {} {}: accuracy {:.4} loss {:.4}",
            cfg.eval.ensemble.name(),
            paths.len(),
            data.len(),
            cfg.eval.split,
            e.accuracy,
            e.loss
        ),
        (None, Some(b)) if members.len() > 1 => println!(
            "best single member: {} accuracy {:.4}",
            members[b].path.display(),
            members[b].accuracy
        ),
        (None, _) => println!("accuracy {:.4} on {} {} samples", members[0].accuracy, data.len(), cfg.eval.split),
    }

    write_atomic(&out.join("confusion.json"), confusion.to_json()?.as_bytes())?;
    write_atomic(&out.join("confusion.csv"), confusion.to_csv().as_bytes())?;
    let report = EvalReport {
        split: cfg.eval.split,
        samples: data.len(),
        mode: cfg.eval.ensemble,
        members,
        ensemble_accuracy: headline.as_ref().map(|e| e.accuracy),
        ensemble_loss: headline.as_ref().map(|e| e.loss),
        best_member: best,
    };
    write_atomic(
        &out.join("eval.json"),
        serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)?.as_bytes(),
    )?;
    Ok(())
}

fn cmd_gradcheck(a: GradcheckArgs) -> CmdResult {
    let mut cfg = RunConfig::load(a.config.as_deref(), "gradcheck")?;
    if let Some(x) = a.seed {
        cfg.gradcheck.seed = x;
    }
    if let Some(x) = a.cases_per_op {
        cfg.gradcheck.cases_per_op = x;
    }
    if let Some(x) = a.network_coords_per_param {
        cfg.gradcheck.network_coords_per_param = x;
    }
    if let Some(x) = a.out {
        cfg.out = Some(x);
    }
    let g = &cfg.gradcheck;
    let report = run_gradcheck(&GradCheckConfig {
        seed: g.seed,
        cases_per_op: g.cases_per_op,
        network_coords_per_param: g.network_coords_per_param,
        sign_flip: a.inject_sign_flip,
    })?;
    for r in &report.results {
        println!(
            "{:<18} max_rel_err {:.3e}  tol {:.0e}  coords {:>5}  {}",
            r.name,
            r.max_rel_error,
            r.tolerance,
            r.coords,
            if r.passed() { "PASS" } else { "FAIL" }
        );
    }
    if let Some(out) = &cfg.out {
        std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        cfg.write_resolved("gradcheck")?;
        write_atomic(
            &out.join("gradcheck.json"),
            serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)?.as_bytes(),
        )?;
    }
    if !report.passed() {
        return Err(Failure {
            code: EXIT_VERIFICATION,
            error: anyhow::anyhow!("gradient check failed for: {}", report.failures().join(", ")),
        });
    }
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> CmdResult {
    let mut cfg = RunConfig::load(a.config.as_deref(), "sweep")?;
    if let Some(x) = a.data {
        cfg.data = Some(x);
    }
    if let Some(x) = a.out {
        cfg.out = Some(x);
    }
    apply_train_flags(&mut cfg.train, a.flags, &mut cfg.precision);
    cfg.train.validate()?;
    let data = cfg.data_dir()?.to_path_buf();
    let out = cfg.out_dir()?.to_path_buf();
    let (train, _) = load_split(&data, Split::Train, cfg.train.augment)?;
    let val = cache_path(&data, Split::Test)
        .is_file()
        .then(|| load_split(&data, Split::Test, false).map(|(d, _)| d))
        .transpose()?
        .filter(|d| !d.is_empty());
    std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    cfg.write_resolved("sweep")?;
    let outcome = match cfg.precision {
        Precision::F32 => sweep::<f32>(&cfg.train, &cfg.grid, &train, val.as_ref(), &out)?,
        Precision::F64 => sweep::<f64>(&cfg.train, &cfg.grid, &train, val.as_ref(), &out)?,
    };
    println!(
        "{} cells ({} trained, {} reused); results in {}",
        outcome.results.len(),
        outcome.trained.len(),
        outcome.reused.len(),
        out.join("sweep.csv").display()
    );
    for r in outcome.results.iter().take(5) {
        println!(
            "cell {:>3}: k={} lr={:e} dropout={} batch={} {} -> {:?} val acc {:.4}",
            r.index,
            r.config.k,
            r.config.optimizer.lr,
            r.config.dropout_rate,
            r.config.batch_size,
            r.config.optimizer.kind.name(),
            r.status,
            r.val_acc
        );
    }
    Ok(())
}

fn cmd_params(a: ParamsArgs) -> CmdResult {
    println!(
        "{:>3}  {:>12}  {:>12}  {:>6}  {:>12}  {:>8}",
        "k", "trainable", "total", "ratio", "reference", "diff"
    );
    let mut prev: Option<usize> = None;
    for &k in &a.k {
        let spec = NetworkSpec {
            k,
            num_classes: a.classes,
            input_dims: a.dims,
            stem_pool: !a.no_stem_pool,
            ..NetworkSpec::default()
        };
        let count = Network::<f32>::build(&spec)?.count_parameters();
        let ratio = prev.map_or("-".to_owned(), |p| format!("{:.3}", count.trainable as f64 / p as f64));
        let reference = REFERENCE_PARAM_COUNTS.iter().find(|(rk, _)| *rk == k).map(|(_, c)| *c);
        let (ref_s, diff) = match reference {
            Some(r) => (
                r.to_string(),
                format!("{:+.1}%", 100.0 * (count.trainable as f64 - r as f64) / r as f64),
            ),
            None => ("-".into(), "-".into()),
        };
        println!(
            "{k:>3}  {:>12}  {:>12}  {ratio:>6}  {ref_s:>12}  {diff:>8}",
            count.trainable, count.total
        );
        prev = Some(count.trainable);
    }
    Ok(())
}
