//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any gating criterion fails. Pass criterion numbers as
//! arguments to run a subset: `cargo test --test acceptance -- 3 5`.

mod common;

use std::f64::consts::FRAC_PI_2;
use std::panic::AssertUnwindSafe;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use volres::autodiff::Tape;
use volres::data::{mesh_to_grid, Dataset, normalize_mesh, rotate_mesh, voxelize, DatasetIndex, RotationSpec, Split, VoxelCache};
use volres::gradcheck::{run_gradcheck, GradCheckConfig};
use volres::network::{Checkpoint, Network, NetworkSpec, REFERENCE_PARAM_COUNTS};
use volres::ops::{conv3d_direct, conv3d_forward, softmax_xent_forward, Mode};
use volres::optim::{OptimizerConfig, PlateauSchedule};
use volres::train::{independent_ensemble, list_snapshots, run_training, Combine, Ensemble, Provenance, TrainConfig};
use volres::Tensor;

use common::*;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn within(elapsed: Duration, limit_s: f64, what: &str) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_s, || {
        format!("{what} took {:.1} s, limit {limit_s} s", elapsed.as_secs_f64())
    })
}

fn gradient_suite() -> Check {
    let started = Instant::now();
    let report = run_gradcheck(&GradCheckConfig::default()).map_err(err)?;
    let elapsed = started.elapsed();
    let required = [
        "conv3d",
        "batchnorm3d",
        "relu",
        "maxpool3d",
        "avgpool3d_global",
        "dense",
        "softmax_xent",
        "network_k1",
    ];
    for name in required {
        ensure(report.results.iter().any(|r| r.name == name), || format!("no check for {name}"))?;
    }
    ensure(report.passed(), || format!("failing: {}", report.failures().join(", ")))?;
    within(elapsed, 120.0, "gradient suite")?;
    let worst_op = report
        .results
        .iter()
        .filter(|r| r.name != "network_k1")
        .map(|r| r.max_rel_error)
        .fold(0.0, f64::max);
    let net = report.results.iter().find(|r| r.name == "network_k1").expect("checked above");
    Ok(format!(
        "{} checks, worst op error {worst_op:.2e} (tol 1e-5), network {:.2e} (tol 1e-4), {:.1} s",
        report.results.len(),
        net.max_rel_error,
        elapsed.as_secs_f64()
    ))
}

fn conv_equivalence() -> Check {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut cases = 0;
    while cases < 50 {
        let n = rng.random_range(1..3);
        let c = rng.random_range(1..5);
        let co = rng.random_range(1..6);
        let k = rng.random_range(1..4);
        let stride = rng.random_range(1..3);
        let pad = rng.random_range(0..3);
        let dims = [0; 3].map(|_| rng.random_range(1..10usize));
        if dims.iter().any(|&d| d + 2 * pad < k) {
            continue;
        }
        let x = Tensor::<f64>::randn(&[n, c, dims[0], dims[1], dims[2]], 1.0, &mut rng);
        let w = Tensor::randn(&[co, c, k, k, k], 1.0, &mut rng);
        let b = Tensor::randn(&[co], 1.0, &mut rng);
        let fast = conv3d_forward(&x, &w, &b, stride, pad).map_err(err)?;
        let slow = conv3d_direct(&x, &w, &b, stride, pad).map_err(err)?;
        ensure(fast.bitwise_eq(&slow), || {
            format!("mismatch on x {:?}, kernel {k}, stride {stride}, pad {pad}", x.shape())
        })?;
        cases += 1;
    }
    within(started.elapsed(), 60.0, "convolution comparison")?;
    Ok(format!("50 shapes bitwise equal in {:.2} s", started.elapsed().as_secs_f64()))
}

fn init_loss() -> Check {
    let target = 40f64.ln();
    let mut parts = Vec::new();
    for k in [1, 8] {
        let mut rng = ChaCha8Rng::seed_from_u64(3 + k as u64);
        let mut net = Network::<f32>::new(&NetworkSpec::with_k(k), &mut rng).map_err(err)?;
        let n = 16;
        let mut data = Vec::with_capacity(n * 27_000);
        for _ in 0..n {
            let grid = mesh_to_grid(&random_blob(&mut rng), [30, 30, 30], None).map_err(err)?;
            let mut dense = vec![0.0f32; grid.len()];
            grid.write_into(&mut dense);
            data.extend(dense);
        }
        let x = Tensor::from_vec(&[n, 1, 30, 30, 30], data).map_err(err)?;
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..40)).collect();
        let mut tape = Tape::new();
        let pass = net.forward(&mut tape, x, Mode::Train, &mut rng).map_err(err)?;
        let (loss, _) = softmax_xent_forward(tape.value(pass.logits), &labels).map_err(err)?;
        let loss = loss as f64;
        ensure((loss - target).abs() <= 0.15, || {
            format!("k={k}: loss {loss:.4}, expected {target:.4} +- 0.15")
        })?;
        parts.push(format!("k={k} loss {loss:.4}"));
    }
    Ok(format!("{} (ln 40 = {target:.4})", parts.join(", ")))
}

fn param_scaling() -> Check {
    let mut counts = Vec::new();
    for (k, _) in REFERENCE_PARAM_COUNTS {
        counts.push(Network::<f32>::build(&NetworkSpec::with_k(k)).map_err(err)?.count_parameters().trainable);
    }
    println!("      {:>3} {:>12} {:>12} {:>7} {:>8} {:>8}", "k", "ours", "reference", "diff", "ratio", "ref ratio");
    let mut ratios = Vec::new();
    for (i, (&(k, reference), &ours)) in REFERENCE_PARAM_COUNTS.iter().zip(&counts).enumerate() {
        let (ratio, ref_ratio) = if i == 0 {
            ("-".to_owned(), "-".to_owned())
        } else {
            let r = ours as f64 / counts[i - 1] as f64;
            ratios.push(r);
            (
                format!("{r:.3}"),
                format!("{:.3}", reference as f64 / REFERENCE_PARAM_COUNTS[i - 1].1 as f64),
            )
        };
        let diff = 100.0 * (ours as f64 - reference as f64) / reference as f64;
        println!("      {k:>3} {ours:>12} {reference:>12} {diff:>+6.1}% {ratio:>8} {ref_ratio:>8}");
    }
    ensure(counts.windows(2).all(|w| w[0] < w[1]), || format!("counts not increasing: {counts:?}"))?;
    ensure(ratios.iter().all(|r| (2.5..4.0).contains(r)), || format!("ratios {ratios:?} outside [2.5, 4)"))?;
    ensure(ratios.windows(2).all(|w| w[0] <= w[1]), || format!("ratios {ratios:?} decrease"))?;
    Ok(format!(
        "counts {counts:?}, ratios {}",
        ratios.iter().map(|r| format!("{r:.2}")).collect::<Vec<_>>().join("/")
    ))
}

fn overfit() -> Check {
    let started = Instant::now();
    // arbitrary labels on look-alike blobs, so only memorization fits them
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let meshes = (0..20).map(|i| (random_blob(&mut rng), i % 2)).collect();
    let data = Dataset::from_meshes(meshes, [30, 30, 30], 2).map_err(err)?;
    let cfg = TrainConfig {
        k: 1,
        batch_size: 10,
        epochs: 200,
        augment: false,
        stop_at_train_acc: Some(1.0),
        optimizer: OptimizerConfig {
            lr: 1e-3,
            ..Default::default()
        },
        // a capacity check: no plateau drops within the run
        schedule: PlateauSchedule {
            patience: 200,
            ..Default::default()
        },
        seed: 5,
        ..Default::default()
    };
    let (_, outcome) = run_training::<f32>(&cfg, &data, None, None).map_err(err)?;
    let last = outcome.records.last().expect("one epoch at least");
    ensure(last.train_acc == 1.0, || {
        format!("train accuracy {:.3} after {} epochs", last.train_acc, last.epoch)
    })?;
    within(started.elapsed(), 600.0, "overfit run")?;
    Ok(format!(
        "100% train accuracy on 2x10 arbitrarily labeled blobs at epoch {} ({:.1} s)",
        last.epoch,
        started.elapsed().as_secs_f64()
    ))
}

fn voxel_oracle() -> Check {
    let dims = [30, 30, 30];
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 1.0f64;
    for i in 0..20 {
        let mesh = normalize_mesh(&random_blob(&mut rng), dims).map_err(err)?;
        let exact = voxelize(&mesh, dims).map_err(err)?;
        let sampled = point_sampling_oracle(&mesh, dims, 1000, i);
        worst = worst.min(agreement(&exact, &sampled));
    }
    ensure(worst >= 0.995, || format!("worst per-voxel agreement {worst:.5} < 0.995"))?;

    let n = 30;
    let solids = [box_mesh([0.9, 0.5, 0.7]), box_mesh([1.0, 0.35, 0.6]), octahedron([1.0, 0.6, 0.8])];
    let mut turns = 0;
    for mesh in &solids {
        let plain = mesh_to_grid(mesh, dims, None).map_err(err)?;
        for axis in 0..3 {
            let mut unit = [0.0; 3];
            unit[axis] = 1.0;
            for q in 1..4 {
                let rot = RotationSpec::new(unit, q as f64 * FRAC_PI_2).map_err(err)?;
                let turned = mesh_to_grid(mesh, dims, Some(&rot)).map_err(err)?;
                let (p, r) = ((axis + 1) % 3, (axis + 2) % 3);
                for i in 0..n {
                    for j in 0..n {
                        for k in 0..n {
                            let mut to = [i, j, k];
                            for _ in 0..q {
                                let (a, b) = (to[p], to[r]);
                                to[p] = n - 1 - b;
                                to[r] = a;
                            }
                            ensure(plain.get([i, j, k]) == turned.get(to), || {
                                format!("axis {axis}, {q} quarter turns: voxel {:?} not carried to {to:?}", [i, j, k])
                            })?;
                        }
                    }
                }
                turns += 1;
            }
        }
    }
    Ok(format!(
        "worst agreement {:.3}% over 20 meshes; {turns} quarter turns permute exactly",
        100.0 * worst
    ))
}

fn rotation_isometry() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mesh = random_blob(&mut rng);
    let norm = |v: [f64; 3]| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    let dist = |a: [f64; 3], b: [f64; 3]| norm([a[0] - b[0], a[1] - b[1], a[2] - b[2]]);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let rot = RotationSpec::random(&mut rng);
        let turned = rotate_mesh(&mesh, &rot).map_err(err)?;
        let v = &mesh.vertices;
        let t = &turned.vertices;
        for i in 0..v.len() {
            worst = worst.max((norm(v[i]) - norm(t[i])).abs());
            for j in i + 1..v.len() {
                worst = worst.max((dist(v[i], v[j]) - dist(t[i], t[j])).abs());
            }
        }
        let still = rotate_mesh(&mesh, &rot.with_angle(0.0)).map_err(err)?;
        ensure(still == mesh, || format!("zero-angle rotation about {:?} moved the mesh", rot.axis))?;
    }
    ensure(worst <= 1e-10, || format!("max norm/distance change {worst:e} > 1e-10"))?;
    Ok(format!(
        "100 rotations of a {}-vertex mesh, max change {worst:.1e}; zero angle is identity",
        mesh.vertices.len()
    ))
}

fn tiny_cfg(epochs: usize) -> TrainConfig {
    TrainConfig {
        batch_size: 4,
        epochs,
        augment: false,
        optimizer: OptimizerConfig {
            lr: 0.005,
            ..Default::default()
        },
        ..Default::default()
    }
}

fn ensemble_identities() -> Check {
    let dir = tempfile::tempdir().map_err(err)?;
    let data = shape_dataset(3, [12, 12, 12], 8);
    let cfg = TrainConfig {
        snapshot_every: 1,
        ..tiny_cfg(10)
    };
    let (net, outcome) = run_training::<f64>(&cfg, &data, None, Some(dir.path())).map_err(err)?;
    let snaps = list_snapshots(&dir.path().join("snapshots")).map_err(err)?;
    ensure(snaps.len() == 10 && outcome.snapshots == snaps, || {
        format!("{} snapshots after 10 epochs", snaps.len())
    })?;
    for p in &snaps {
        let ckpt = Checkpoint::load(p).map_err(err)?;
        ensure(ckpt.fingerprint == net.fingerprint(), || format!("{} has another fingerprint", p.display()))?;
    }
    let all = Ensemble::<f64>::load(&snaps, Combine::MeanSoftmax, Provenance::Snapshot).map_err(err)?;

    let copies = vec![snaps[9].clone(); 5];
    let same = Ensemble::<f64>::load(&copies, Combine::MeanSoftmax, Provenance::Snapshot).map_err(err)?;
    let x = data.batch_tensor::<f64>(&(0..data.len()).collect::<Vec<_>>(), None).map_err(err)?;
    let single = net.predict_probs(&x).map_err(err)?;
    ensure(same.predict_probs(&x).map_err(err)?.bitwise_eq(&single), || {
        "mean-softmax of 5 identical checkpoints differs from the single model".into()
    })?;
    Ok(format!(
        "10 snapshots load with one fingerprint ({} members); identical-copy ensemble is bitwise the single model",
        all.len()
    ))
}

fn ensemble_cost() -> Check {
    let members = 5;
    let data = shape_dataset(12, [20, 20, 20], 9);
    let val = shape_dataset(4, [20, 20, 20], 10);
    let cfg = tiny_cfg(members);
    let dir = tempfile::tempdir().map_err(err)?;

    let started = Instant::now();
    let snapshot_cfg = TrainConfig {
        snapshot_every: 1,
        ..cfg.clone()
    };
    let (_, run) = run_training::<f32>(&snapshot_cfg, &data, Some(&val), Some(&dir.path().join("snapshot")))
        .map_err(err)?;
    let snapshot_s = started.elapsed().as_secs_f64();
    ensure(run.snapshots.len() == members, || format!("{} snapshots", run.snapshots.len()))?;

    let started = Instant::now();
    let independent_cfg = TrainConfig {
        snapshot_every: cfg.epochs,
        ..cfg
    };
    let trained = independent_ensemble::<f32>(&independent_cfg, members, &data, Some(&val), Some(&dir.path().join("independent")))
        .map_err(err)?;
    let independent_s = started.elapsed().as_secs_f64();
    ensure(trained.len() == members, || format!("{} members", trained.len()))?;

    let ratio = independent_s / snapshot_s;
    let n = members as f64;
    ensure((0.8 * n..=1.2 * n).contains(&ratio), || {
        format!("independent {independent_s:.2} s / snapshot {snapshot_s:.2} s = {ratio:.2}, expected {n} +- 20%")
    })?;
    Ok(format!(
        "{members} members: independent {independent_s:.2} s, snapshot {snapshot_s:.2} s, ratio {ratio:.2}"
    ))
}

fn determinism() -> Check {
    let data = shape_dataset(4, [12, 12, 12], 11);
    let cfg = tiny_cfg(3);
    let trajectory = |threads: usize| -> Result<Vec<u64>, String> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(err)?;
        let (net, outcome) = pool.install(|| run_training::<f64>(&cfg, &data, None, None)).map_err(err)?;
        let mut bits: Vec<u64> = outcome.records.iter().map(|r| r.train_loss.to_bits()).collect();
        bits.extend(net.params().iter().flat_map(|p| p.value.data().iter().map(|v| v.to_bits())));
        Ok(bits)
    };
    let first = trajectory(1)?;
    ensure(first == trajectory(1)?, || "repeated run differs".into())?;
    ensure(first == trajectory(2)?, || "two-thread run differs".into())?;

    let dir = tempfile::tempdir().map_err(err)?;
    fixture_tree(dir.path());
    let index = DatasetIndex::scan(dir.path()).map_err(err)?;
    let build = || VoxelCache::build(&index, Split::Train, [30, 30, 30]).0.to_bytes();
    let a = build();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().map_err(err)?;
    ensure(a == build() && a == pool.install(build), || "voxel caches differ between builds".into())?;
    Ok(format!(
        "3-epoch f64 trajectories and weights bitwise equal across runs and thread counts; {}-byte cache identical",
        a.len()
    ))
}

fn scheduler() -> Check {
    let base = PlateauSchedule::default();
    let lr0 = 0.0002;
    let mut s = base.clone();
    let mut lr = lr0;
    let mut drops = Vec::new();
    for epoch in 0..2 * base.patience {
        let next = s.update(0.7, lr).map_err(err)?;
        if next != lr {
            drops.push((epoch, next));
        }
        lr = next;
    }
    ensure(drops.len() == 1, || format!("constant stream dropped at {drops:?}"))?;
    let (at, new_lr) = drops[0];
    ensure(at == base.patience, || format!("drop after update {at}, patience {}", base.patience))?;
    ensure((new_lr - lr0 * 0.02).abs() <= 1e-18, || format!("new lr {new_lr:e}, expected {:e}", lr0 * 0.02))?;

    let mut s = base.clone();
    let mut lr = lr0;
    for epoch in 0..100 {
        lr = s.update(1.0 - 0.005 * epoch as f64, lr).map_err(err)?;
        ensure(lr == lr0, || format!("improving stream dropped lr at update {epoch}"))?;
    }
    Ok(format!(
        "one drop after {} stalled epochs, {lr0:e} -> {new_lr:e}; 100 improving epochs keep {lr0:e}",
        base.patience
    ))
}

/// Per-class train/test counts of ModelNet-40.
const MODELNET40: [(&str, usize, usize); 40] = [
    ("airplane", 626, 100),
    ("bathtub", 106, 50),
    ("bed", 515, 100),
    ("bench", 173, 20),
    ("bookshelf", 572, 100),
    ("bottle", 335, 100),
    ("bowl", 64, 20),
    ("car", 197, 100),
    ("chair", 889, 100),
    ("cone", 167, 20),
    ("cup", 79, 20),
    ("curtain", 138, 20),
    ("desk", 200, 86),
    ("door", 109, 20),
    ("dresser", 200, 86),
    ("flower_pot", 149, 20),
    ("glass_box", 171, 100),
    ("guitar", 155, 100),
    ("keyboard", 145, 20),
    ("lamp", 124, 20),
    ("laptop", 149, 20),
    ("mantel", 284, 100),
    ("monitor", 465, 100),
    ("night_stand", 200, 86),
    ("person", 88, 20),
    ("piano", 231, 100),
    ("plant", 240, 100),
    ("radio", 104, 20),
    ("range_hood", 115, 100),
    ("sink", 128, 20),
    ("sofa", 680, 100),
    ("stairs", 124, 20),
    ("stool", 90, 20),
    ("table", 392, 100),
    ("tent", 163, 20),
    ("toilet", 344, 100),
    ("tv_stand", 267, 100),
    ("vase", 475, 100),
    ("wardrobe", 87, 20),
    ("xbox", 103, 20),
];

fn check_modelnet_counts(index: &DatasetIndex, source: &str) -> Result<(), String> {
    let (train, test) = (index.split_len(Split::Train), index.split_len(Split::Test));
    ensure(index.num_classes() == 40 && train == 9_843 && test == 2_468 && train + test == 12_311, || {
        format!("{source}: {} classes, {train} train, {test} test", index.num_classes())
    })
}

fn dataset_accounting() -> Check {
    let dir = tempfile::tempdir().map_err(err)?;
    let tree = dir.path().join("ModelNet40");
    let tetra = octahedron([1.0, 0.5, 0.25]);
    write_tree(&tree, &MODELNET40, |_, _| tetra.clone());
    let index = DatasetIndex::scan(&tree).map_err(err)?;
    check_modelnet_counts(&index, "synthetic tree")?;
    let want_train: Vec<usize> = MODELNET40.iter().map(|c| c.1).collect();
    ensure(index.per_class_counts(Split::Train) == want_train, || "per-class train counts differ".into())?;

    let fixture = dir.path().join("fixture");
    fixture_tree(&fixture);
    let index = DatasetIndex::scan(&fixture).map_err(err)?;
    let (cache, skipped) = VoxelCache::build(&index, Split::Train, [30, 30, 30]);
    ensure(
        index.num_classes() == 2
            && index.split_len(Split::Train) == 6
            && index.split_len(Split::Test) == 2
            && cache.len() == 6
            && skipped.is_empty(),
        || format!("fixture: {} classes, {} cached", index.num_classes(), cache.len()),
    )?;

    let real = match std::env::var_os("MODELNET40_DIR") {
        Some(root) => {
            let index = DatasetIndex::scan(Path::new(&root)).map_err(err)?;
            check_modelnet_counts(&index, "MODELNET40_DIR")?;
            "; MODELNET40_DIR matches"
        }
        None => "; MODELNET40_DIR not set",
    };
    Ok(format!(
        "40 classes, 9843 train + 2468 test = 12311; fixture 2 classes, 6 train, 2 test{real}"
    ))
}

fn smoke_run_documented() -> Check {
    let readme = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../README.md");
    let text = std::fs::read_to_string(&readme).map_err(|e| format!("{}: {e}", readme.display()))?;
    ensure(text.contains("Overnight smoke run") && text.contains("--k 2") && text.contains("--epochs 10"), || {
        "README lacks the k=2, 10-epoch smoke-run instructions".into()
    })?;
    Ok("README documents the k=2, 10-epoch full-data run (not executed here)".into())
}

struct Criterion {
    number: usize,
    name: &'static str,
    gating: bool,
    run: fn() -> Check,
}

const CRITERIA: [Criterion; 13] = [
    Criterion { number: 1, name: "gradient suite", gating: true, run: gradient_suite },
    Criterion { number: 2, name: "convolution oracle", gating: true, run: conv_equivalence },
    Criterion { number: 3, name: "initial loss", gating: true, run: init_loss },
    Criterion { number: 4, name: "parameter scaling", gating: true, run: param_scaling },
    Criterion { number: 5, name: "overfit capacity", gating: true, run: overfit },
    Criterion { number: 6, name: "voxelizer oracle", gating: true, run: voxel_oracle },
    Criterion { number: 7, name: "rotation isometry", gating: true, run: rotation_isometry },
    Criterion { number: 8, name: "ensemble identities", gating: true, run: ensemble_identities },
    Criterion { number: 9, name: "ensembling cost", gating: true, run: ensemble_cost },
    Criterion { number: 10, name: "determinism", gating: true, run: determinism },
    Criterion { number: 11, name: "plateau scheduler", gating: true, run: scheduler },
    Criterion { number: 12, name: "dataset accounting", gating: true, run: dataset_accounting },
    Criterion { number: 13, name: "overnight smoke run", gating: false, run: smoke_run_documented },
];

fn main() {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for c in CRITERIA.iter().filter(|c| selected.is_empty() || selected.contains(&c.number)) {
        let started = Instant::now();
        let result = std::panic::catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = started.elapsed().as_secs_f64();
        let tag = if c.gating { "" } else { " (non-gating)" };
        match result {
            Ok(detail) => println!("PASS {:>2} {}{tag}: {detail} [{secs:.1} s]", c.number, c.name),
            Err(why) => {
                println!("FAIL {:>2} {}{tag}: {why} [{secs:.1} s]", c.number, c.name);
                if c.gating {
                    failed.push(c.number);
                }
            }
        }
    }
    if !failed.is_empty() {
        println!("acceptance failed: {failed:?}");
        std::process::exit(1);
    }
}
