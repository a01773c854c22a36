//! Central finite-difference checks of every differentiable op, plus one
//! end-to-end check of a reduced network, all in f64.
//!
//! Each op is checked on a linear probe `f(inputs) = <r, op(inputs)>` with a
//! fixed random `r`, so the tape's backward seeded with `r` gives the
//! analytic gradient of `f`. Numeric derivatives are central differences
//! at steps `h` and `h/2` combined by Richardson extrapolation. Error per
//! coordinate is `|analytic - numeric| / max(|analytic|, |numeric|, floor)`.

use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::autodiff::{OpKind, Tape, ValueId};
use crate::error::Result;
use crate::network::{Network, NetworkSpec};
use crate::ops::{BnConfig, Mode};
use crate::tensor::Tensor;
use crate::util::derive_seed;

pub const OP_TOLERANCE: f64 = 1e-5;
pub const NETWORK_TOLERANCE: f64 = 1e-4;
/// Denominator floor for single ops, so that gradients that are zero up to
/// rounding are compared absolutely.
pub const OP_REL_FLOOR: f64 = 1e-7;
/// Denominator floor for the network check. Conv biases feeding a batch
/// norm have an exact zero gradient, and the loss difference there is pure
/// rounding, about `1e-16 * loss / NETWORK_STEP`.
pub const NETWORK_REL_FLOOR: f64 = 1e-5;

/// Probe step for ops that are linear (or piecewise linear away from kinks)
/// in each input coordinate, where truncation error vanishes.
const LINEAR_STEP: f64 = 1e-3;
/// Probe step for smooth nonlinear ops.
const SMOOTH_STEP: f64 = 1e-5;
/// Probe step for the network check; probes that cross a relu kink are redrawn.
const NETWORK_STEP: f64 = 1e-6;
/// Relu and pool inputs stay at least this far from every kink.
const KINK_MARGIN: f64 = 0.02;

#[derive(Debug, Clone)]
pub struct GradCheckConfig {
    pub seed: u64,
    /// Random shapes drawn per op.
    pub cases_per_op: usize,
    /// Coordinates probed per trainable tensor in the network check.
    pub network_coords_per_param: usize,
    /// Negate the backward of one op kind, to confirm the suite notices.
    pub sign_flip: Option<OpKind>,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            seed: 0,
            cases_per_op: 4,
            network_coords_per_param: 4,
            sign_flip: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub max_rel_error: f64,
    pub tolerance: f64,
    /// Number of coordinates compared.
    pub coords: usize,
    /// Coordinates redrawn because the probe crossed a relu kink.
    pub skipped: usize,
    pub seconds: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub seed: u64,
    pub results: Vec<CheckResult>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(CheckResult::passed)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.results
            .iter()
            .filter(|r| !r.passed())
            .map(|r| r.name.as_str())
            .collect()
    }
}

/// Running maximum of per-coordinate errors.
struct ErrorStats {
    floor: f64,
    max: f64,
    coords: usize,
    /// Probes dropped because they straddled a relu kink.
    skipped: usize,
}

impl ErrorStats {
    fn new(floor: f64) -> Self {
        ErrorStats {
            floor,
            max: 0.0,
            coords: 0,
            skipped: 0,
        }
    }

    fn push(&mut self, analytic: f64, numeric: f64) {
        let denom = analytic.abs().max(numeric.abs()).max(self.floor);
        let e = (analytic - numeric).abs() / denom;
        // NaN counts as a failure
        self.max = if e.is_nan() { f64::INFINITY } else { self.max.max(e) };
        self.coords += 1;
    }
}

/// Central difference at steps `h` and `h / 2`, combined to cancel the
/// `h^2` error term.
fn richardson(h: f64, mut f: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    let wide = (f(h)? - f(-h)?) / (2.0 * h);
    let narrow = (f(h / 2.0)? - f(-h / 2.0)?) / h;
    Ok((4.0 * narrow - wide) / 3.0)
}

fn dot(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

fn uniform(shape: &[usize], lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::from_vec(shape, (0..n).map(|_| rng.random_range(lo..hi)).collect()).expect("shape")
}

/// Values with magnitude in `[KINK_MARGIN, 1)` and random signs.
fn away_from_zero(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let n = shape.iter().product();
    let values = (0..n)
        .map(|_| {
            let m = rng.random_range(KINK_MARGIN..1.0);
            if rng.random_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect();
    Tensor::from_vec(shape, values).expect("shape")
}

/// Distinct values spaced `2 * KINK_MARGIN` apart, none near zero, in random order.
fn distinct_lattice(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    let mut values: Vec<f64> = (0..n)
        .map(|i| (i as f64 - (n / 2) as f64 + 0.5) * 2.0 * KINK_MARGIN)
        .collect();
    rand::seq::SliceRandom::shuffle(values.as_mut_slice(), rng);
    Tensor::from_vec(shape, values).expect("shape")
}

/// Compare the tape gradient of `<r, build(inputs)>` with central
/// differences for every coordinate of every input.
fn check_op<F>(
    inputs: &[Tensor<f64>],
    step: f64,
    sign_flip: Option<OpKind>,
    rng: &mut ChaCha8Rng,
    stats: &mut ErrorStats,
    build: F,
) -> Result<()>
where
    F: Fn(&mut Tape<f64>, &[ValueId]) -> Result<ValueId>,
{
    let mut tape = Tape::new();
    tape.inject_sign_flip(sign_flip);
    let ids: Vec<ValueId> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = build(&mut tape, &ids)?;
    let shape = tape.value(out).shape().to_vec();
    let r = if tape.value(out).len() == 1 {
        Tensor::ones(&shape)
    } else {
        uniform(&shape, -1.0, 1.0, rng)
    };
    let grads = tape.backward_with(out, r.clone())?;

    let objective = |inputs: &[Tensor<f64>]| -> Result<f64> {
        let mut tape = Tape::new();
        let ids: Vec<ValueId> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
        let out = build(&mut tape, &ids)?;
        Ok(dot(tape.value(out), &r))
    };
    let mut probe = inputs.to_vec();
    for (k, id) in ids.iter().enumerate() {
        let zero = Tensor::zeros(inputs[k].shape());
        let analytic = grads.get(*id).unwrap_or(&zero);
        for i in 0..inputs[k].len() {
            let orig = inputs[k].data()[i];
            let numeric = richardson(step, |d| {
                probe[k].data_mut()[i] = orig + d;
                let v = objective(&probe);
                probe[k].data_mut()[i] = orig;
                v
            })?;
            stats.push(analytic.data()[i], numeric);
        }
    }
    Ok(())
}

fn check_conv3d(cfg: &GradCheckConfig, rng: &mut ChaCha8Rng, stats: &mut ErrorStats) -> Result<()> {
    for _ in 0..cfg.cases_per_op {
        let n = rng.random_range(1..=2);
        let cin = rng.random_range(1..=3);
        let cout = rng.random_range(1..=3);
        let kernel = if rng.random_bool(0.5) { 3 } else { 1 };
        let pad = rng.random_range(0..=kernel / 2);
        let stride = rng.random_range(1..=2);
        let dims: Vec<usize> = (0..3).map(|_| rng.random_range(3..=5)).collect();
        let inputs = [
            uniform(&[n, cin, dims[0], dims[1], dims[2]], -1.0, 1.0, rng),
            uniform(&[cout, cin, kernel, kernel, kernel], -1.0, 1.0, rng),
            uniform(&[cout], -1.0, 1.0, rng),
        ];
        check_op(&inputs, LINEAR_STEP, cfg.sign_flip, rng, stats, |t, v| {
            t.conv3d(v[0], v[1], v[2], stride, pad)
        })?;
    }
    Ok(())
}

fn check_batchnorm3d(cfg: &GradCheckConfig, rng: &mut ChaCha8Rng, stats: &mut ErrorStats) -> Result<()> {
    let bn = BnConfig::default();
    for case in 0..cfg.cases_per_op {
        let n = rng.random_range(2..=3);
        let c = rng.random_range(1..=3);
        let dims: Vec<usize> = (0..3).map(|_| rng.random_range(1..=3)).collect();
        let mode = if case % 2 == 0 { Mode::Train } else { Mode::Eval };
        let inputs = [
            uniform(&[n, c, dims[0], dims[1], dims[2]], -2.0, 2.0, rng),
            uniform(&[c], 0.5, 1.5, rng),
            uniform(&[c], -0.5, 0.5, rng),
        ];
        let mean = uniform(&[c], -0.5, 0.5, rng);
        let var = uniform(&[c], 0.5, 2.0, rng);
        check_op(&inputs, SMOOTH_STEP, cfg.sign_flip, rng, stats, |t, v| {
            let (mut m, mut s) = (mean.clone(), var.clone());
            t.batchnorm3d(v[0], v[1], v[2], &mut m, &mut s, bn, mode)
        })?;
    }
    Ok(())
}

fn check_relu(cfg: &GradCheckConfig, rng: &mut ChaCha8Rng, stats: &mut ErrorStats) -> Result<()> {
    for _ in 0..cfg.cases_per_op {
        let shape = [rng.random_range(1..=2), rng.random_range(1..=3), 3, 2, rng.random_range(2..=4)];
        let inputs = [away_from_zero(&shape, rng)];
        check_op(&inputs, LINEAR_STEP, cfg.sign_flip, rng, stats, |t, v| Ok(t.relu(v[0])))?;
    }
    Ok(())
}

fn check_maxpool3d(cfg: &GradCheckConfig, rng: &mut ChaCha8Rng, stats: &mut ErrorStats) -> Result<()> {
    for case in 0..cfg.cases_per_op {
        let window = rng.random_range(2..=3);
        let stride = rng.random_range(1..=window);
        let ceil = case % 2 == 0;
        let dims: Vec<usize> = (0..3).map(|_| rng.random_range(window..=5)).collect();
        let shape = [rng.random_range(1..=2), rng.random_range(1..=2), dims[0], dims[1], dims[2]];
        let inputs = [distinct_lattice(&shape, rng)];
        check_op(&inputs, LINEAR_STEP, cfg.sign_flip, rng, stats, |t, v| {
            t.maxpool3d(v[0], window, stride, ceil)
        })?;
    }
    Ok(())
}

fn check_avgpool(cfg: &GradCheckConfig, rng: &mut ChaCha8Rng, stats: &mut ErrorStats) -> Result<()> {
    for _ in 0..cfg.cases_per_op {
        let shape = [rng.random_range(1..=3), rng.random_range(1..=4), rng.random_range(1..=3), 2, 3];
        let inputs = [uniform(&shape, -1.0, 1.0, rng)];
        check_op(&inputs, LINEAR_STEP, cfg.sign_flip, rng, stats, |t, v| t.avgpool3d_global(v[0]))?;
    }
    Ok(())
}

fn check_dense(cfg: &GradCheckConfig, rng: &mut ChaCha8Rng, stats: &mut ErrorStats) -> Result<()> {
    for _ in 0..cfg.cases_per_op {
        let (n, f, c) = (rng.random_range(1..=4), rng.random_range(1..=6), rng.random_range(1..=5));
        let inputs = [
            uniform(&[n, f], -1.0, 1.0, rng),
            uniform(&[f, c], -1.0, 1.0, rng),
            uniform(&[c], -1.0, 1.0, rng),
        ];
        check_op(&inputs, LINEAR_STEP, cfg.sign_flip, rng, stats, |t, v| t.dense(v[0], v[1], v[2]))?;
    }
    Ok(())
}

fn check_softmax_xent(cfg: &GradCheckConfig, rng: &mut ChaCha8Rng, stats: &mut ErrorStats) -> Result<()> {
    for _ in 0..cfg.cases_per_op {
        let (n, c) = (rng.random_range(1..=4), rng.random_range(2..=6));
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
        let inputs = [uniform(&[n, c], -3.0, 3.0, rng)];
        check_op(&inputs, SMOOTH_STEP, cfg.sign_flip, rng, stats, |t, v| t.softmax_xent(v[0], &labels))?;
    }
    Ok(())
}

fn check_dropout(cfg: &GradCheckConfig, rng: &mut ChaCha8Rng, stats: &mut ErrorStats) -> Result<()> {
    for _ in 0..cfg.cases_per_op {
        let shape = [rng.random_range(1..=2), 2, 2, 3, 3];
        let mask_seed: u64 = rng.random();
        let inputs = [uniform(&shape, -1.0, 1.0, rng)];
        check_op(&inputs, LINEAR_STEP, cfg.sign_flip, rng, stats, |t, v| {
            t.dropout(v[0], 0.4, Mode::Train, &mut ChaCha8Rng::seed_from_u64(mask_seed))
        })?;
    }
    Ok(())
}

fn check_add(cfg: &GradCheckConfig, rng: &mut ChaCha8Rng, stats: &mut ErrorStats) -> Result<()> {
    for _ in 0..cfg.cases_per_op {
        let shape = [rng.random_range(1..=2), 2, 3, 2, 2];
        let inputs = [uniform(&shape, -1.0, 1.0, rng), uniform(&shape, -1.0, 1.0, rng)];
        check_op(&inputs, LINEAR_STEP, cfg.sign_flip, rng, stats, |t, v| t.add(v[0], v[1]))?;
    }
    Ok(())
}

/// The reduced network: k = 1, 8^3 input, no stem pool, 4 classes.
pub fn reduced_network_spec() -> NetworkSpec {
    NetworkSpec {
        k: 1,
        num_classes: 4,
        input_dims: [8, 8, 8],
        stem_pool: false,
        dropout_rate: 0.3,
        bn: BnConfig::default(),
    }
}

/// Train-mode loss of the reduced network against sampled parameter
/// coordinates. Dropout masks are replayed from a fixed seed.
fn check_network(cfg: &GradCheckConfig, rng: &mut ChaCha8Rng, stats: &mut ErrorStats) -> Result<()> {
    let spec = reduced_network_spec();
    let mut net = Network::<f64>::new(&spec, rng)?;
    // nonzero shifts so the identity-block branches contribute
    for p in net.params_mut() {
        if p.name.ends_with(".beta") || p.name.ends_with(".bias") {
            p.value = uniform(p.value.shape(), -0.1, 0.1, rng);
        }
    }
    let x = Tensor::from_vec(
        &[3, 1, 8, 8, 8],
        (0..3 * 512).map(|_| if rng.random_bool(0.3) { 1.0 } else { 0.0 }).collect(),
    )?;
    let labels: Vec<usize> = (0..3).map(|_| rng.random_range(0..spec.num_classes)).collect();
    let mask_seed: u64 = rng.random();

    // loss plus the sign pattern of every relu output
    let loss = |net: &Network<f64>| -> Result<(f64, Vec<bool>)> {
        let mut net = net.clone();
        let mut tape = Tape::new();
        let pass = net.forward(&mut tape, x.clone(), Mode::Train, &mut ChaCha8Rng::seed_from_u64(mask_seed))?;
        let l = tape.softmax_xent(pass.logits, &labels)?;
        let signs = tape
            .ids()
            .filter(|&id| tape.kind(id) == OpKind::Relu)
            .flat_map(|id| tape.value(id).data().iter().map(|&v| v > 0.0))
            .collect();
        Ok((tape.value(l).data()[0], signs))
    };
    let (_, base_signs) = loss(&net)?;

    let mut tape = Tape::new();
    tape.inject_sign_flip(cfg.sign_flip);
    let step = net
        .clone()
        .loss_and_grads(&mut tape, x.clone(), &labels, Mode::Train, &mut ChaCha8Rng::seed_from_u64(mask_seed))?;

    let mut probe = net.clone();
    for (pi, grad) in step.grads.iter().enumerate() {
        let Some(grad) = grad else { continue };
        let len = grad.len();
        let mut accepted = 0;
        for i in sample(rng, len, len) {
            if accepted == cfg.network_coords_per_param {
                break;
            }
            let orig = net.params()[pi].value.data()[i];
            let mut crosses_kink = false;
            let numeric = richardson(NETWORK_STEP, |d| {
                probe.params_mut()[pi].value.data_mut()[i] = orig + d;
                let v = loss(&probe);
                probe.params_mut()[pi].value.data_mut()[i] = orig;
                let (l, signs) = v?;
                crosses_kink |= signs != base_signs;
                Ok(l)
            })?;
            // the loss is not differentiable along this probe window
            if crosses_kink {
                stats.skipped += 1;
                continue;
            }
            stats.push(grad.data()[i], numeric);
            accepted += 1;
        }
    }
    Ok(())
}

type Check = fn(&GradCheckConfig, &mut ChaCha8Rng, &mut ErrorStats) -> Result<()>;

/// Row names, checks and tolerances, in report order.
const CHECKS: [(&str, Check, f64, f64); 10] = [
    ("conv3d", check_conv3d, OP_TOLERANCE, OP_REL_FLOOR),
    ("batchnorm3d", check_batchnorm3d, OP_TOLERANCE, OP_REL_FLOOR),
    ("relu", check_relu, OP_TOLERANCE, OP_REL_FLOOR),
    ("maxpool3d", check_maxpool3d, OP_TOLERANCE, OP_REL_FLOOR),
    ("avgpool3d_global", check_avgpool, OP_TOLERANCE, OP_REL_FLOOR),
    ("dense", check_dense, OP_TOLERANCE, OP_REL_FLOOR),
    ("softmax_xent", check_softmax_xent, OP_TOLERANCE, OP_REL_FLOOR),
    ("dropout", check_dropout, OP_TOLERANCE, OP_REL_FLOOR),
    ("add", check_add, OP_TOLERANCE, OP_REL_FLOOR),
    ("network_k1", check_network, NETWORK_TOLERANCE, NETWORK_REL_FLOOR),
];

/// Run every check. Each row draws from its own stream derived from the seed,
/// so rows are reproducible independently of each other.
pub fn run_gradcheck(cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    let mut results = Vec::with_capacity(CHECKS.len());
    for (i, (name, check, tolerance, floor)) in CHECKS.iter().enumerate() {
        let started = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[i as u64]));
        let mut stats = ErrorStats::new(*floor);
        check(cfg, &mut rng, &mut stats)?;
        results.push(CheckResult {
            name: (*name).to_owned(),
            max_rel_error: stats.max,
            tolerance: *tolerance,
            coords: stats.coords,
            skipped: stats.skipped,
            seconds: started.elapsed().as_secs_f64(),
        });
    }
    Ok(GradCheckReport { seed: cfg.seed, results })
}
