use std::path::Path;

use rand::{Rng, SeedableRng};

use super::checkpoint::Checkpoint;
use super::{BlockKind, BlockSpec, NetworkSpec, KERNEL, STEM_POOL_WINDOW};
use crate::autodiff::{Tape, ValueId};
use crate::error::{Error, Result};
use crate::ops::{BnConfig, Mode};
use crate::tensor::{Scalar, Tensor};

/// Std multiplier on the He-normal draw for the classifier weights.
pub(crate) const HEAD_INIT_GAIN: f64 = 0.1;

const META_SPEC: &str = "meta/spec";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Weight,
    Bias,
    Gamma,
    Beta,
    RunningMean,
    RunningVar,
}

impl ParamKind {
    pub fn trainable(self) -> bool {
        !matches!(self, ParamKind::RunningMean | ParamKind::RunningVar)
    }
}

#[derive(Debug, Clone)]
pub struct Param<T> {
    pub name: String,
    pub kind: ParamKind,
    pub value: Tensor<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamCount {
    pub trainable: usize,
    /// Trainable plus batch-norm running statistics.
    pub total: usize,
}

#[derive(Debug, Clone, Copy)]
struct ConvLayer {
    weight: usize,
    bias: usize,
    pad: usize,
}

#[derive(Debug, Clone, Copy)]
struct BnLayer {
    gamma: usize,
    beta: usize,
    mean: usize,
    var: usize,
}

#[derive(Debug, Clone)]
struct Block {
    spec: BlockSpec,
    bn1: BnLayer,
    conv1: ConvLayer,
    bn2: BnLayer,
    conv2: ConvLayer,
    shortcut: Option<(ConvLayer, BnLayer)>,
}

/// Values recorded for one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub logits: ValueId,
    /// Output of each residual block, in order.
    pub block_outputs: Vec<ValueId>,
    /// Tape leaf of each parameter, `None` for running statistics.
    pub params: Vec<Option<ValueId>>,
}

/// Result of a forward and backward pass over one batch.
#[derive(Debug, Clone)]
pub struct StepOutput<T> {
    pub loss: T,
    pub logits: Tensor<T>,
    pub probs: Tensor<T>,
    /// Aligned with [`Network::params`]; `None` for running statistics.
    pub grads: Vec<Option<Tensor<T>>>,
}

#[derive(Debug, Clone)]
pub struct Network<T> {
    spec: NetworkSpec,
    params: Vec<Param<T>>,
    stem: ConvLayer,
    blocks: Vec<Block>,
    head_weight: usize,
    head_bias: usize,
}

struct Builder<T> {
    params: Vec<Param<T>>,
}

impl<T: Scalar> Builder<T> {
    fn add(&mut self, name: String, kind: ParamKind, value: Tensor<T>) -> usize {
        self.params.push(Param { name, kind, value });
        self.params.len() - 1
    }

    fn conv(&mut self, prefix: &str, cin: usize, cout: usize, kernel: usize) -> ConvLayer {
        ConvLayer {
            weight: self.add(
                format!("{prefix}.weight"),
                ParamKind::Weight,
                Tensor::zeros(&[cout, cin, kernel, kernel, kernel]),
            ),
            bias: self.add(format!("{prefix}.bias"), ParamKind::Bias, Tensor::zeros(&[cout])),
            pad: kernel / 2,
        }
    }

    fn bn(&mut self, prefix: &str, channels: usize) -> BnLayer {
        BnLayer {
            gamma: self.add(format!("{prefix}.gamma"), ParamKind::Gamma, Tensor::ones(&[channels])),
            beta: self.add(format!("{prefix}.beta"), ParamKind::Beta, Tensor::zeros(&[channels])),
            mean: self.add(
                format!("{prefix}.running_mean"),
                ParamKind::RunningMean,
                Tensor::zeros(&[channels]),
            ),
            var: self.add(
                format!("{prefix}.running_var"),
                ParamKind::RunningVar,
                Tensor::ones(&[channels]),
            ),
        }
    }
}

impl<T: Scalar> Network<T> {
    /// Build the architecture with all weights zero, biases zero, BN gamma one.
    /// Call [`Network::init_weights`] before training.
    pub fn build(spec: &NetworkSpec) -> Result<Self> {
        spec.validate()?;
        let mut b = Builder { params: Vec::new() };
        let stem = b.conv("stem.conv", 1, spec.stem_width(), KERNEL);
        let blocks = spec
            .blocks()
            .into_iter()
            .enumerate()
            .map(|(i, bs)| {
                let p = format!("block{i}");
                if bs.kind == BlockKind::IdentityBlock3D && bs.in_channels != bs.width {
                    return Err(Error::Spec(format!(
                        "{p}: identity block needs equal input and output channels ({} vs {})",
                        bs.in_channels, bs.width
                    )));
                }
                let bn1 = b.bn(&format!("{p}.bn1"), bs.in_channels);
                let conv1 = b.conv(&format!("{p}.conv1"), bs.in_channels, bs.width, bs.kernel);
                let bn2 = b.bn(&format!("{p}.bn2"), bs.width);
                let conv2 = b.conv(&format!("{p}.conv2"), bs.width, bs.width, bs.kernel);
                let shortcut = (bs.kind == BlockKind::ConvBlock3D).then(|| {
                    (
                        b.conv(&format!("{p}.shortcut.conv"), bs.in_channels, bs.width, 1),
                        b.bn(&format!("{p}.shortcut.bn"), bs.width),
                    )
                });
                Ok(Block {
                    spec: bs,
                    bn1,
                    conv1,
                    bn2,
                    conv2,
                    shortcut,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let features = spec.feature_width();
        let head_weight = b.add(
            "head.dense.weight".into(),
            ParamKind::Weight,
            Tensor::zeros(&[features, spec.num_classes]),
        );
        let head_bias = b.add("head.dense.bias".into(), ParamKind::Bias, Tensor::zeros(&[spec.num_classes]));
        Ok(Network {
            spec: spec.clone(),
            params: b.params,
            stem,
            blocks,
            head_weight,
            head_bias,
        })
    }

    /// Build and initialize in one call.
    pub fn new<R: Rng + ?Sized>(spec: &NetworkSpec, rng: &mut R) -> Result<Self> {
        let mut net = Self::build(spec)?;
        net.init_weights(rng);
        Ok(net)
    }

    /// He-normal weights, zero biases, unit gamma, zero beta, fresh running stats.
    /// Parameters are drawn in declaration order, so the result depends only on the seed.
    pub fn init_weights<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let head = self.head_weight;
        for (i, p) in self.params.iter_mut().enumerate() {
            let shape = p.value.shape().to_vec();
            p.value = match p.kind {
                ParamKind::Weight => {
                    let fan_in = if shape.len() == 5 {
                        shape[1..].iter().product::<usize>()
                    } else {
                        shape[0]
                    };
                    let gain = if i == head { HEAD_INIT_GAIN } else { 1.0 };
                    Tensor::randn(&shape, gain * (2.0 / fan_in as f64).sqrt(), rng)
                }
                ParamKind::Bias | ParamKind::Beta | ParamKind::RunningMean => Tensor::zeros(&shape),
                ParamKind::Gamma | ParamKind::RunningVar => Tensor::ones(&shape),
            };
        }
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn fingerprint(&self) -> u64 {
        self.spec.fingerprint()
    }

    pub fn params(&self) -> &[Param<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param<T>] {
        &mut self.params
    }

    pub fn param(&self, name: &str) -> Option<&Param<T>> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut Param<T>> {
        self.params.iter_mut().find(|p| p.name == name)
    }

    pub fn count_parameters(&self) -> ParamCount {
        let total = self.params.iter().map(|p| p.value.len()).sum();
        let trainable = self
            .params
            .iter()
            .filter(|p| p.kind.trainable())
            .map(|p| p.value.len())
            .sum();
        ParamCount { trainable, total }
    }

    /// Override the dropout rate used by every block.
    pub fn set_dropout_rate(&mut self, rate: f64) -> Result<()> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout rate must be in [0, 1), got {rate}")));
        }
        self.spec.dropout_rate = rate;
        for b in &mut self.blocks {
            b.spec.dropout_rate = rate;
        }
        Ok(())
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        let [d, h, w] = self.spec.input_dims;
        match x.shape() {
            &[n, 1, xd, xh, xw] if n > 0 && [xd, xh, xw] == [d, h, w] => Ok(()),
            other => Err(Error::dim(format!("network expects input [n, 1, {d}, {h}, {w}], got {other:?}"))),
        }
    }

    /// Record a forward pass on `tape`. Batch-norm running statistics updated
    /// in train mode are pushed to `updates` rather than written in place.
    fn record<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape<T>,
        input: Tensor<T>,
        mode: Mode,
        rng: &mut R,
        updates: &mut Vec<(usize, Tensor<T>)>,
    ) -> Result<ForwardPass> {
        self.check_input(&input)?;
        let leaves: Vec<Option<ValueId>> = self
            .params
            .iter()
            .map(|p| p.kind.trainable().then(|| tape.leaf(p.value.clone())))
            .collect();
        let leaf = |i: usize| leaves[i].expect("trainable parameter");
        let bn_cfg: BnConfig = self.spec.bn;

        let conv = |tape: &mut Tape<T>, x: ValueId, l: &ConvLayer| {
            tape.conv3d(x, leaf(l.weight), leaf(l.bias), 1, l.pad)
        };
        let mut bn = |tape: &mut Tape<T>, x: ValueId, l: &BnLayer| -> Result<ValueId> {
            let mut mean = self.params[l.mean].value.clone();
            let mut var = self.params[l.var].value.clone();
            let y = tape.batchnorm3d(x, leaf(l.gamma), leaf(l.beta), &mut mean, &mut var, bn_cfg, mode)?;
            if mode == Mode::Train {
                updates.push((l.mean, mean));
                updates.push((l.var, var));
            }
            Ok(y)
        };

        let x = tape.leaf(input);
        let mut h = conv(tape, x, &self.stem)?;
        if self.spec.stem_pool {
            h = tape.maxpool3d(h, STEM_POOL_WINDOW, STEM_POOL_WINDOW, true)?;
        }
        let mut block_outputs = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            let a = bn(tape, h, &block.bn1)?;
            let a = tape.relu(a);
            let a = conv(tape, a, &block.conv1)?;
            let a = tape.dropout(a, block.spec.dropout_rate, mode, rng)?;
            let a = bn(tape, a, &block.bn2)?;
            let a = tape.relu(a);
            let branch = conv(tape, a, &block.conv2)?;
            let shortcut = match &block.shortcut {
                Some((c, b)) => {
                    let s = conv(tape, h, c)?;
                    bn(tape, s, b)?
                }
                None => h,
            };
            let sum = tape.add(shortcut, branch)?;
            h = tape.relu(sum);
            block_outputs.push(h);
        }
        let pooled = tape.avgpool3d_global(h)?;
        let logits = tape.dense(pooled, leaf(self.head_weight), leaf(self.head_bias))?;
        Ok(ForwardPass {
            logits,
            block_outputs,
            params: leaves,
        })
    }

    /// Record a forward pass, writing updated running statistics back in train mode.
    pub fn forward<R: Rng + ?Sized>(
        &mut self,
        tape: &mut Tape<T>,
        input: Tensor<T>,
        mode: Mode,
        rng: &mut R,
    ) -> Result<ForwardPass> {
        let mut updates = Vec::new();
        let pass = self.record(tape, input, mode, rng, &mut updates)?;
        for (i, t) in updates {
            self.params[i].value = t;
        }
        Ok(pass)
    }

    /// Eval-mode logits `[n, classes]`. Takes `&self`, so one network can serve
    /// concurrent evaluations.
    pub fn eval_logits(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        let mut tape = Tape::new();
        // eval-mode dropout draws nothing
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let pass = self.record(&mut tape, input.clone(), Mode::Eval, &mut rng, &mut Vec::new())?;
        Ok(tape.value(pass.logits).clone())
    }

    /// Eval-mode class probabilities `[n, classes]`.
    pub fn predict_probs(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        crate::ops::softmax(&self.eval_logits(input)?)
    }

    /// Forward, mean cross-entropy and backward on one batch. Running
    /// statistics are updated in train mode; weights are left untouched.
    pub fn loss_and_grads<R: Rng + ?Sized>(
        &mut self,
        tape: &mut Tape<T>,
        input: Tensor<T>,
        labels: &[usize],
        mode: Mode,
        rng: &mut R,
    ) -> Result<StepOutput<T>> {
        tape.clear();
        let pass = self.forward(tape, input, mode, rng)?;
        let loss_id = tape.softmax_xent(pass.logits, labels)?;
        let loss = tape.value(loss_id).data()[0];
        let logits = tape.value(pass.logits).clone();
        let probs = tape.probs(loss_id).expect("softmax_xent node").clone();
        let mut g = tape.backward(loss_id)?;
        let grads = pass
            .params
            .iter()
            .zip(&self.params)
            .map(|(id, p)| {
                id.map(|id| g.take(id).unwrap_or_else(|| Tensor::zeros(p.value.shape())))
            })
            .collect();
        Ok(StepOutput {
            loss,
            logits,
            probs,
            grads,
        })
    }

    /// Parameters plus the spec under `meta/spec`.
    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut c = Checkpoint::new(self.fingerprint());
        let s = &self.spec;
        let meta = vec![
            s.k as f64,
            s.num_classes as f64,
            s.input_dims[0] as f64,
            s.input_dims[1] as f64,
            s.input_dims[2] as f64,
            if s.stem_pool { 1.0 } else { 0.0 },
            s.dropout_rate,
            s.bn.momentum,
            s.bn.eps,
        ];
        c.insert(META_SPEC, Tensor::<f64>::from_vec(&[meta.len()], meta).expect("rank 1"));
        for p in &self.params {
            c.insert(p.name.clone(), p.value.clone());
        }
        c
    }

    /// Rebuild the spec stored in a checkpoint.
    pub fn spec_from_checkpoint(ckpt: &Checkpoint) -> Result<NetworkSpec> {
        let m = ckpt.tensor::<f64>(META_SPEC)?.data();
        if m.len() != 9 {
            return Err(Error::Format {
                offset: 0,
                msg: format!("{META_SPEC} has {} entries, expected 9", m.len()),
            });
        }
        let spec = NetworkSpec {
            k: m[0] as usize,
            num_classes: m[1] as usize,
            input_dims: [m[2] as usize, m[3] as usize, m[4] as usize],
            stem_pool: m[5] != 0.0,
            dropout_rate: m[6],
            bn: BnConfig {
                momentum: m[7],
                eps: m[8],
            },
        };
        if spec.fingerprint() != ckpt.fingerprint {
            return Err(Error::Spec(format!(
                "stored spec hashes to {:016x} but header says {:016x}",
                spec.fingerprint(),
                ckpt.fingerprint
            )));
        }
        Ok(spec)
    }

    /// Load parameters into a network built from `spec`; the checkpoint's
    /// fingerprint must match.
    pub fn from_checkpoint(ckpt: &Checkpoint, spec: &NetworkSpec) -> Result<Self> {
        if ckpt.fingerprint != spec.fingerprint() {
            return Err(Error::Spec(format!(
                "checkpoint fingerprint {:016x} does not match network spec (k={}, classes={}, input={:?}, stem_pool={}) with fingerprint {:016x}",
                ckpt.fingerprint,
                spec.k,
                spec.num_classes,
                spec.input_dims,
                spec.stem_pool,
                spec.fingerprint()
            )));
        }
        let mut net = Self::build(spec)?;
        for p in &mut net.params {
            let t = ckpt.tensor::<T>(&p.name)?;
            if t.shape() != p.value.shape() {
                return Err(Error::Spec(format!(
                    "{}: checkpoint shape {:?}, network expects {:?}",
                    p.name,
                    t.shape(),
                    p.value.shape()
                )));
            }
            p.value = t.clone();
        }
        Ok(net)
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        self.to_checkpoint().save(path)
    }

    /// Load a checkpoint, taking the spec from the file itself.
    pub fn load_checkpoint(path: &Path) -> Result<Self> {
        let ckpt = Checkpoint::load(path)?;
        let spec = Self::spec_from_checkpoint(&ckpt)?;
        Self::from_checkpoint(&ckpt, &spec)
    }

    /// Load a checkpoint that must match `spec`.
    pub fn load_checkpoint_as(path: &Path, spec: &NetworkSpec) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?, spec)
    }

    /// Arithmetic mean of every parameter array (running statistics included),
    /// accumulated in member order.
    pub fn average(members: &[Network<T>]) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::Config("weight averaging needs at least one member".into()))?;
        for (i, m) in members.iter().enumerate().skip(1) {
            if m.fingerprint() != first.fingerprint() {
                return Err(Error::Spec(format!(
                    "member {i} fingerprint {:016x} differs from member 0 ({:016x})",
                    m.fingerprint(),
                    first.fingerprint()
                )));
            }
        }
        let mut out = first.clone();
        let scale = T::one() / T::from_usize(members.len()).expect("member count fits");
        for (pi, p) in out.params.iter_mut().enumerate() {
            let mut acc = p.value.clone();
            for m in &members[1..] {
                acc.add_assign(&m.params[pi].value)?;
            }
            p.value = acc.scale(scale);
        }
        Ok(out)
    }
}
