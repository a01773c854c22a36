//! Reverse-mode tape over the layer primitives in [`crate::ops`].
//!
//! Each recorded node owns its output value plus whatever its backward
//! needs (argmax indices, normalized inputs, dropout masks). Backward
//! walks the nodes in reverse creation order; a tape may be differentiated
//! once, after which it must be cleared and re-recorded.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ops::{self, BnConfig, BnSaved, MaxPoolSaved, Mode};
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ValueId(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpKind {
    Leaf,
    Conv3d,
    BatchNorm3d,
    Relu,
    MaxPool3d,
    AvgPool3dGlobal,
    Dense,
    Dropout,
    Add,
    SoftmaxXent,
}

impl OpKind {
    pub fn name(self) -> &'static str {
        match self {
            OpKind::Leaf => "leaf",
            OpKind::Conv3d => "conv3d",
            OpKind::BatchNorm3d => "batchnorm3d",
            OpKind::Relu => "relu",
            OpKind::MaxPool3d => "maxpool3d",
            OpKind::AvgPool3dGlobal => "avgpool3d_global",
            OpKind::Dense => "dense",
            OpKind::Dropout => "dropout",
            OpKind::Add => "add",
            OpKind::SoftmaxXent => "softmax_xent",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [
            OpKind::Leaf,
            OpKind::Conv3d,
            OpKind::BatchNorm3d,
            OpKind::Relu,
            OpKind::MaxPool3d,
            OpKind::AvgPool3dGlobal,
            OpKind::Dense,
            OpKind::Dropout,
            OpKind::Add,
            OpKind::SoftmaxXent,
        ]
        .into_iter()
        .find(|k| k.name() == name)
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

enum Saved<T> {
    Leaf,
    Conv3d {
        x: ValueId,
        weight: ValueId,
        bias: ValueId,
        stride: usize,
        pad: usize,
    },
    BatchNorm3d {
        x: ValueId,
        gamma: ValueId,
        beta: ValueId,
        saved: BnSaved<T>,
    },
    Relu {
        x: ValueId,
    },
    MaxPool3d {
        x: ValueId,
        saved: MaxPoolSaved,
    },
    AvgPool3dGlobal {
        x: ValueId,
    },
    Dense {
        x: ValueId,
        weight: ValueId,
        bias: ValueId,
    },
    Dropout {
        x: ValueId,
        mask: Option<Vec<T>>,
    },
    Add {
        a: ValueId,
        b: ValueId,
    },
    SoftmaxXent {
        logits: ValueId,
        labels: Vec<usize>,
        probs: Tensor<T>,
    },
}

impl<T> Saved<T> {
    fn kind(&self) -> OpKind {
        match self {
            Saved::Leaf => OpKind::Leaf,
            Saved::Conv3d { .. } => OpKind::Conv3d,
            Saved::BatchNorm3d { .. } => OpKind::BatchNorm3d,
            Saved::Relu { .. } => OpKind::Relu,
            Saved::MaxPool3d { .. } => OpKind::MaxPool3d,
            Saved::AvgPool3dGlobal { .. } => OpKind::AvgPool3dGlobal,
            Saved::Dense { .. } => OpKind::Dense,
            Saved::Dropout { .. } => OpKind::Dropout,
            Saved::Add { .. } => OpKind::Add,
            Saved::SoftmaxXent { .. } => OpKind::SoftmaxXent,
        }
    }
}

struct Node<T> {
    value: Tensor<T>,
    saved: Saved<T>,
}

/// Gradients produced by [`Tape::backward`], indexed by value.
#[derive(Debug)]
pub struct Gradients<T> {
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Gradients<T> {
    pub fn get(&self, id: ValueId) -> Option<&Tensor<T>> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, id: ValueId) -> Option<Tensor<T>> {
        self.grads.get_mut(id.0).and_then(Option::take)
    }
}

pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    consumed: bool,
    sign_flip: Option<OpKind>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            consumed: false,
            sign_flip: None,
        }
    }

    /// Drop all recorded nodes so the tape can record a fresh forward pass.
    pub fn clear(&mut self) {
        self.nodes.clear();
        self.consumed = false;
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Negate every input gradient produced by `kind` during backward.
    ///
    /// Exists so the gradient-check harness can prove it detects a broken op.
    #[doc(hidden)]
    pub fn inject_sign_flip(&mut self, kind: Option<OpKind>) {
        self.sign_flip = kind;
    }

    /// Every recorded value, in creation order.
    pub fn ids(&self) -> impl Iterator<Item = ValueId> {
        (0..self.nodes.len()).map(ValueId)
    }

    pub fn value(&self, id: ValueId) -> &Tensor<T> {
        &self.nodes[id.0].value
    }

    pub fn kind(&self, id: ValueId) -> OpKind {
        self.nodes[id.0].saved.kind()
    }

    /// Probabilities saved by a [`Tape::softmax_xent`] node.
    pub fn probs(&self, id: ValueId) -> Option<&Tensor<T>> {
        match &self.nodes.get(id.0)?.saved {
            Saved::SoftmaxXent { probs, .. } => Some(probs),
            _ => None,
        }
    }

    fn push(&mut self, value: Tensor<T>, saved: Saved<T>) -> ValueId {
        self.nodes.push(Node { value, saved });
        ValueId(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Tensor<T>) -> ValueId {
        self.push(value, Saved::Leaf)
    }

    pub fn conv3d(
        &mut self,
        x: ValueId,
        weight: ValueId,
        bias: ValueId,
        stride: usize,
        pad: usize,
    ) -> Result<ValueId> {
        let y = ops::conv3d_forward(self.value(x), self.value(weight), self.value(bias), stride, pad)?;
        Ok(self.push(
            y,
            Saved::Conv3d {
                x,
                weight,
                bias,
                stride,
                pad,
            },
        ))
    }

    #[allow(clippy::too_many_arguments)]
    pub fn batchnorm3d(
        &mut self,
        x: ValueId,
        gamma: ValueId,
        beta: ValueId,
        running_mean: &mut Tensor<T>,
        running_var: &mut Tensor<T>,
        config: BnConfig,
        mode: Mode,
    ) -> Result<ValueId> {
        let (y, saved) = ops::batchnorm3d_forward(
            self.value(x),
            self.value(gamma),
            self.value(beta),
            running_mean,
            running_var,
            config,
            mode,
        )?;
        Ok(self.push(
            y,
            Saved::BatchNorm3d {
                x,
                gamma,
                beta,
                saved,
            },
        ))
    }

    pub fn relu(&mut self, x: ValueId) -> ValueId {
        let y = ops::relu_forward(self.value(x));
        self.push(y, Saved::Relu { x })
    }

    pub fn maxpool3d(
        &mut self,
        x: ValueId,
        window: usize,
        stride: usize,
        ceil_pad: bool,
    ) -> Result<ValueId> {
        let (y, saved) = ops::maxpool3d_forward(self.value(x), window, stride, ceil_pad)?;
        Ok(self.push(y, Saved::MaxPool3d { x, saved }))
    }

    pub fn avgpool3d_global(&mut self, x: ValueId) -> Result<ValueId> {
        let y = ops::avgpool3d_global_forward(self.value(x))?;
        Ok(self.push(y, Saved::AvgPool3dGlobal { x }))
    }

    pub fn dense(&mut self, x: ValueId, weight: ValueId, bias: ValueId) -> Result<ValueId> {
        let y = ops::dense_forward(self.value(x), self.value(weight), self.value(bias))?;
        Ok(self.push(y, Saved::Dense { x, weight, bias }))
    }

    pub fn dropout<R: Rng + ?Sized>(
        &mut self,
        x: ValueId,
        rate: f64,
        mode: Mode,
        rng: &mut R,
    ) -> Result<ValueId> {
        let (y, mask) = ops::dropout_forward(self.value(x), rate, mode, rng)?;
        Ok(self.push(y, Saved::Dropout { x, mask }))
    }

    pub fn add(&mut self, a: ValueId, b: ValueId) -> Result<ValueId> {
        let y = self.value(a).add(self.value(b))?;
        Ok(self.push(y, Saved::Add { a, b }))
    }

    /// Mean cross-entropy; the node's value is the `[1]`-shaped loss.
    pub fn softmax_xent(&mut self, logits: ValueId, labels: &[usize]) -> Result<ValueId> {
        let (loss, probs) = ops::softmax_xent_forward(self.value(logits), labels)?;
        Ok(self.push(
            Tensor::scalar(loss),
            Saved::SoftmaxXent {
                logits,
                labels: labels.to_vec(),
                probs,
            },
        ))
    }

    /// Differentiate the scalar `output` with respect to every recorded value.
    pub fn backward(&mut self, output: ValueId) -> Result<Gradients<T>> {
        if self.value(output).len() != 1 {
            return Err(Error::dim(format!(
                "backward needs a scalar output, got shape {:?}",
                self.value(output).shape()
            )));
        }
        let seed = Tensor::ones(self.value(output).shape());
        self.backward_with(output, seed)
    }

    /// Backward from `output` of any shape, given the gradient flowing into it.
    pub fn backward_with(&mut self, output: ValueId, upstream: Tensor<T>) -> Result<Gradients<T>> {
        if self.consumed {
            return Err(Error::BackwardReused);
        }
        if upstream.shape() != self.value(output).shape() {
            return Err(Error::dim(format!(
                "upstream gradient {:?} does not match output {:?}",
                upstream.shape(),
                self.value(output).shape()
            )));
        }
        self.consumed = true;

        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(upstream);

        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            if matches!(node.saved, Saved::Leaf) {
                continue;
            }
            let Some(dy) = grads[idx].take() else {
                continue;
            };
            let mut contributions = self.node_backward(node, &dy)?;
            if self.sign_flip == Some(node.saved.kind()) {
                for (_, g) in contributions.iter_mut() {
                    *g = g.scale(-T::one());
                }
            }
            for (id, g) in contributions {
                match &mut grads[id.0] {
                    Some(acc) => acc.add_assign(&g)?,
                    slot @ None => *slot = Some(g),
                }
            }
        }
        Ok(Gradients { grads })
    }

    fn node_backward(&self, node: &Node<T>, dy: &Tensor<T>) -> Result<Vec<(ValueId, Tensor<T>)>> {
        let v = |id: ValueId| self.value(id);
        Ok(match &node.saved {
            Saved::Leaf => Vec::new(),
            Saved::Conv3d {
                x,
                weight,
                bias,
                stride,
                pad,
            } => {
                let g = ops::conv3d_backward(v(*x), v(*weight), v(*bias), *stride, *pad, dy)?;
                vec![(*x, g.dx), (*weight, g.dweight), (*bias, g.dbias)]
            }
            Saved::BatchNorm3d {
                x,
                gamma,
                beta,
                saved,
            } => {
                let g = ops::batchnorm3d_backward(v(*x), v(*gamma), saved, dy)?;
                vec![(*x, g.dx), (*gamma, g.dgamma), (*beta, g.dbeta)]
            }
            Saved::Relu { x } => vec![(*x, ops::relu_backward(v(*x), dy)?)],
            Saved::MaxPool3d { x, saved } => vec![(*x, ops::maxpool3d_backward(saved, dy)?)],
            Saved::AvgPool3dGlobal { x } => {
                vec![(*x, ops::avgpool3d_global_backward(v(*x).shape(), dy)?)]
            }
            Saved::Dense { x, weight, bias } => {
                let g = ops::dense_backward(v(*x), v(*weight), v(*bias), dy)?;
                vec![(*x, g.dx), (*weight, g.dweight), (*bias, g.dbias)]
            }
            Saved::Dropout { x, mask } => vec![(*x, ops::dropout_backward(mask.as_deref(), dy)?)],
            Saved::Add { a, b } => vec![(*a, dy.clone()), (*b, dy.clone())],
            Saved::SoftmaxXent {
                logits,
                labels,
                probs,
            } => vec![(*logits, ops::softmax_xent_backward(probs, labels, dy.data()[0])?)],
        })
    }
}
