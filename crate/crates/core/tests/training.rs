mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use volres::data::{DatasetIndex, Split, VoxelCache};
use volres::network::{Checkpoint, Network, NetworkSpec, Param, ParamKind};
use volres::optim::{Optimizer, OptimizerConfig, OptimizerKind};
use volres::train::{
    evaluate, list_snapshots, run_training, sweep, Combine, Ensemble, Predictor, Provenance, SweepGrid, SweepStatus,
    TrainConfig,
};
use volres::Tensor;

use common::*;

fn small_cfg() -> TrainConfig {
    TrainConfig {
        batch_size: 4,
        epochs: 3,
        augment: false,
        optimizer: OptimizerConfig {
            lr: 0.005,
            ..Default::default()
        },
        ..Default::default()
    }
}

fn params_bitwise_eq(a: &Network<f64>, b: &Network<f64>) -> bool {
    a.params().iter().zip(b.params()).all(|(p, q)| p.value.bitwise_eq(&q.value))
}

fn random_params(shapes: &[Vec<usize>], rng: &mut ChaCha8Rng) -> Vec<Param<f64>> {
    shapes
        .iter()
        .enumerate()
        .map(|(i, s)| Param {
            name: format!("p{i}"),
            kind: if i % 3 == 2 { ParamKind::RunningMean } else { ParamKind::Weight },
            value: Tensor::randn(s, 1.0, rng),
        })
        .collect()
}

fn optimizer_cfg(kind: OptimizerKind, lr: f64) -> OptimizerConfig {
    OptimizerConfig {
        kind,
        lr,
        ..Default::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn optimizer_runs_are_deterministic_and_resumable(
        shapes in prop::collection::vec(prop::collection::vec(1usize..5, 1..4), 1..6),
        nadam in any::<bool>(),
        lr in 1e-4f64..1e-1,
        steps in 2usize..6,
        seed in any::<u64>(),
    ) {
        let kind = if nadam { OptimizerKind::Nadam } else { OptimizerKind::SgdNesterov };
        let cfg = optimizer_cfg(kind, lr);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let start = random_params(&shapes, &mut rng);
        let grads: Vec<Vec<Option<Tensor<f64>>>> = (0..steps)
            .map(|_| {
                start
                    .iter()
                    .map(|p| p.kind.trainable().then(|| Tensor::randn(p.value.shape(), 1.0, &mut rng)))
                    .collect()
            })
            .collect();

        let run = |from: usize, params: &mut Vec<Param<f64>>, opt: &mut Optimizer<f64>| {
            for g in &grads[from..] {
                opt.step(params, g, lr).unwrap();
            }
        };
        let mut a = start.clone();
        let mut opt_a = Optimizer::new(cfg, &a).unwrap();
        run(0, &mut a, &mut opt_a);
        let mut b = start.clone();
        let mut opt_b = Optimizer::new(cfg, &b).unwrap();
        run(0, &mut b, &mut opt_b);

        // stop after one step, round-trip the state through a checkpoint, continue
        let mut c = start.clone();
        let mut opt_c = Optimizer::new(cfg, &c).unwrap();
        opt_c.step(&mut c, &grads[0], lr).unwrap();
        let mut ckpt = Checkpoint::new(0);
        opt_c.save_into(&mut ckpt, &c);
        let ckpt = Checkpoint::from_bytes(&ckpt.to_bytes()).unwrap();
        let mut opt_c = Optimizer::load_from(cfg, &ckpt, &c).unwrap();
        run(1, &mut c, &mut opt_c);

        for ((p, q), r) in a.iter().zip(&b).zip(&c) {
            prop_assert!(p.value.bitwise_eq(&q.value));
            prop_assert!(p.value.bitwise_eq(&r.value));
        }
        for (p, s) in a.iter().zip(&start) {
            if !p.kind.trainable() {
                prop_assert!(p.value.bitwise_eq(&s.value));
            }
        }
    }

    #[test]
    fn parameter_count_grows_with_k(k in 1usize..6, classes in 2usize..50) {
        let count = |k| {
            let spec = NetworkSpec { k, num_classes: classes, ..Default::default() };
            Network::<f32>::build(&spec).unwrap().count_parameters()
        };
        let (small, large) = (count(k), count(k + 1));
        prop_assert!(small.trainable < large.trainable);
        prop_assert!(small.trainable < small.total);
    }
}

#[test]
fn trajectories_do_not_depend_on_thread_count() {
    let data = shape_dataset(4, [12, 12, 12], 1);
    let cfg = small_cfg();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_training::<f64>(&cfg, &data, None, None).unwrap())
    };
    let (net_a, a) = run(1);
    let (net_b, b) = run(3);
    assert_eq!(a.records.len(), 3);
    for (x, y) in a.records.iter().zip(&b.records) {
        assert_eq!(x.train_loss.to_bits(), y.train_loss.to_bits(), "epoch {}", x.epoch);
        assert_eq!(x.val_acc.to_bits(), y.val_acc.to_bits());
    }
    assert!(params_bitwise_eq(&net_a, &net_b));
}

#[test]
fn one_cell_sweep_equals_direct_training() {
    let data = shape_dataset(3, [10, 10, 10], 2);
    let cfg = TrainConfig { epochs: 2, ..small_cfg() };
    let dir = tempfile::tempdir().unwrap();
    let grid = SweepGrid::default();
    let outcome = sweep::<f64>(&cfg, &grid, &data, None, dir.path()).unwrap();
    assert_eq!(outcome.results.len(), 1);
    let cell = &outcome.results[0];
    assert_eq!(cell.status, SweepStatus::Completed);

    let (_, direct) = run_training::<f64>(&cell.config, &data, None, None).unwrap();
    let last = direct.records.last().unwrap();
    assert_eq!(cell.train_loss.to_bits(), last.train_loss.to_bits());
    assert_eq!(cell.val_acc.to_bits(), last.val_acc.to_bits());
    assert_eq!(cell.epochs_run, direct.records.len());
}

#[test]
fn ten_epochs_leave_ten_consistent_snapshots() {
    let data = shape_dataset(2, [8, 8, 8], 3);
    let cfg = TrainConfig {
        epochs: 10,
        snapshot_every: 1,
        ..small_cfg()
    };
    let dir = tempfile::tempdir().unwrap();
    let (net, outcome) = run_training::<f32>(&cfg, &data, None, Some(dir.path())).unwrap();
    let paths = list_snapshots(&dir.path().join("snapshots")).unwrap();
    assert_eq!(paths.len(), 10);
    assert_eq!(paths, outcome.snapshots);
    for (epoch, p) in (1..=10).zip(&paths) {
        let ckpt = Checkpoint::load(p).unwrap();
        assert_eq!(ckpt.fingerprint, net.fingerprint());
        assert_eq!(ckpt.tensor::<f64>("meta/epoch").unwrap().data()[0], epoch as f64);
    }
    let last = Network::<f32>::load_checkpoint(&paths[9]).unwrap();
    assert!(last.params().iter().zip(net.params()).all(|(a, b)| a.value.bitwise_eq(&b.value)));

    let ensemble = Ensemble::<f32>::load(&paths, Combine::MeanSoftmax, Provenance::Snapshot).unwrap();
    assert_eq!(ensemble.len(), 10);
    let x = data.batch_tensor::<f32>(&[0, 1, 2], None).unwrap();
    let probs = ensemble.predict_probs(&x).unwrap();
    assert_eq!(probs.shape(), &[3, 2]);
}

#[test]
fn copies_of_one_checkpoint_ensemble_to_the_same_model() {
    let data = shape_dataset(3, [8, 8, 8], 4);
    let cfg = TrainConfig { epochs: 1, ..small_cfg() };
    let (net, _) = run_training::<f64>(&cfg, &data, None, None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.vrck");
    net.save_checkpoint(&path).unwrap();
    let paths = vec![path; 4];
    let ensemble = Ensemble::<f64>::load(&paths, Combine::MeanSoftmax, Provenance::Snapshot).unwrap();
    let x = data.batch_tensor::<f64>(&(0..data.len()).collect::<Vec<_>>(), None).unwrap();
    assert!(ensemble.predict_probs(&x).unwrap().bitwise_eq(&net.predict_probs(&x).unwrap()));
    let single = evaluate(&net, &data, 4, None).unwrap();
    let combined = evaluate(&ensemble, &data, 4, None).unwrap();
    assert_eq!(single.accuracy, combined.accuracy);
    assert_eq!(single.loss.to_bits(), combined.loss.to_bits());
    assert_eq!(Predictor::<f64>::num_classes(&ensemble), 2);
}

#[test]
fn fixture_tree_caches_are_counted_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    fixture_tree(dir.path());
    let index = DatasetIndex::scan(dir.path()).unwrap();
    assert_eq!(index.classes, ["box", "octahedron"]);
    assert_eq!(index.split_len(Split::Train), 6);
    assert_eq!(index.split_len(Split::Test), 2);
    assert_eq!(index.per_class_counts(Split::Train), [3, 3]);

    let dims = [16, 16, 16];
    let (a, skipped) = VoxelCache::build(&index, Split::Train, dims);
    assert!(skipped.is_empty());
    assert_eq!(a.len(), 6);
    assert_eq!(a.labels, [0, 0, 0, 1, 1, 1]);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let (b, _) = pool.install(|| VoxelCache::build(&index, Split::Train, dims));
    assert_eq!(a.to_bytes(), b.to_bytes());

    let path = dir.path().join("train.voxl");
    a.save(&path).unwrap();
    assert_eq!(VoxelCache::load(&path).unwrap(), a);
}
