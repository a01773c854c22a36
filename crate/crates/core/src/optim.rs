//! Nesterov SGD, Nadam, and the plateau learning-rate schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Checkpoint, Param};
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    SgdNesterov,
    Nadam,
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::SgdNesterov => "sgd-nesterov",
            OptimizerKind::Nadam => "nadam",
        }
    }

    fn code(self) -> f64 {
        match self {
            OptimizerKind::SgdNesterov => 0.0,
            OptimizerKind::Nadam => 1.0,
        }
    }
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nadam" => Ok(OptimizerKind::Nadam),
            "sgd-nesterov" | "sgd_nesterov" => Ok(OptimizerKind::SgdNesterov),
            other => Err(Error::Config(format!(
                "unknown optimizer {other:?}, expected nadam or sgd-nesterov"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
    /// Nesterov SGD momentum.
    pub momentum: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub schedule_decay: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Nadam,
            lr: 0.0002,
            momentum: 0.9,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            schedule_decay: 0.04,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..1.0).contains(&v);
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be > 0, got {}", self.lr)));
        }
        if !unit(self.momentum) || !unit(self.beta1) || !unit(self.beta2) {
            return Err(Error::Config(format!(
                "momentum, beta1 and beta2 must lie in [0, 1), got {}, {}, {}",
                self.momentum, self.beta1, self.beta2
            )));
        }
        if !(self.eps > 0.0) || !(self.schedule_decay >= 0.0) {
            return Err(Error::Config(format!(
                "eps must be > 0 and schedule_decay >= 0, got {} and {}",
                self.eps, self.schedule_decay
            )));
        }
        Ok(())
    }
}

fn check_shapes<T: Scalar>(param: &Tensor<T>, grad: &Tensor<T>, state: &Tensor<T>) -> Result<()> {
    if param.shape() != grad.shape() || param.shape() != state.shape() {
        return Err(Error::dim(format!(
            "optimizer shapes differ: param {:?}, grad {:?}, state {:?}",
            param.shape(),
            grad.shape(),
            state.shape()
        )));
    }
    Ok(())
}

/// `v <- mu v - lr g; param <- param + mu v - lr g`.
pub fn sgd_nesterov_step<T: Scalar>(
    param: &mut Tensor<T>,
    grad: &Tensor<T>,
    velocity: &mut Tensor<T>,
    momentum: f64,
    lr: f64,
) -> Result<()> {
    check_shapes(param, grad, velocity)?;
    let mu = T::from_f64_lossy(momentum);
    let lr = T::from_f64_lossy(lr);
    for ((p, &g), v) in param.data_mut().iter_mut().zip(grad.data()).zip(velocity.data_mut()) {
        *v = mu * *v - lr * g;
        *p = *p + (mu * *v - lr * g);
    }
    Ok(())
}

/// Momentum schedule `mu_t = beta1 (1 - 0.5 * 0.96^(t * decay))`.
pub fn nadam_mu(beta1: f64, schedule_decay: f64, t: u64) -> f64 {
    beta1 * (1.0 - 0.5 * 0.96f64.powf(t as f64 * schedule_decay))
}

/// Per-step scalars of one Nadam update, computed in `f64`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NadamCoeffs {
    pub t: u64,
    pub mu_t: f64,
    pub mu_next: f64,
    /// `prod_{i <= t} mu_i`
    pub prod_t: f64,
    /// `prod_{i <= t+1} mu_i`
    pub prod_next: f64,
}

impl NadamCoeffs {
    /// Advance from the product after step `t - 1` to step `t`.
    pub fn at(cfg: &OptimizerConfig, t: u64, prev_prod: f64) -> Self {
        let mu_t = nadam_mu(cfg.beta1, cfg.schedule_decay, t);
        let mu_next = nadam_mu(cfg.beta1, cfg.schedule_decay, t + 1);
        let prod_t = prev_prod * mu_t;
        NadamCoeffs {
            t,
            mu_t,
            mu_next,
            prod_t,
            prod_next: prod_t * mu_next,
        }
    }
}

/// One Nadam update for step `c.t`. `m` and `v` are the raw moments.
pub fn nadam_step<T: Scalar>(
    param: &mut Tensor<T>,
    grad: &Tensor<T>,
    m: &mut Tensor<T>,
    v: &mut Tensor<T>,
    cfg: &OptimizerConfig,
    c: &NadamCoeffs,
    lr: f64,
) -> Result<()> {
    check_shapes(param, grad, m)?;
    check_shapes(param, grad, v)?;
    let f = T::from_f64_lossy;
    let (b1, b2) = (f(cfg.beta1), f(cfg.beta2));
    let (one_b1, one_b2) = (f(1.0 - cfg.beta1), f(1.0 - cfg.beta2));
    let m_coef = f(c.mu_next / (1.0 - c.prod_next));
    let g_coef = f((1.0 - c.mu_t) / (1.0 - c.prod_t));
    let v_coef = f(1.0 / (1.0 - cfg.beta2.powf(c.t as f64)));
    let (lr, eps) = (f(lr), f(cfg.eps));
    let it = param
        .data_mut()
        .iter_mut()
        .zip(grad.data())
        .zip(m.data_mut().iter_mut().zip(v.data_mut()));
    for ((p, &g), (mi, vi)) in it {
        *mi = b1 * *mi + one_b1 * g;
        *vi = b2 * *vi + one_b2 * g * g;
        let m_hat = m_coef * *mi + g_coef * g;
        let v_hat = *vi * v_coef;
        *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

/// Optimizer state for a whole network, aligned with its parameter list.
#[derive(Debug, Clone)]
pub struct Optimizer<T> {
    pub cfg: OptimizerConfig,
    /// Completed steps.
    pub t: u64,
    /// `prod_{i <= t} mu_i` (Nadam).
    pub mu_prod: f64,
    /// Velocity (SGD) or first moment (Nadam); `None` for non-trainable slots.
    first: Vec<Option<Tensor<T>>>,
    /// Second moment (Nadam only).
    second: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Optimizer<T> {
    pub fn new(cfg: OptimizerConfig, params: &[Param<T>]) -> Result<Self> {
        cfg.validate()?;
        let zeros = |p: &Param<T>| p.kind.trainable().then(|| Tensor::zeros(p.value.shape()));
        Ok(Optimizer {
            cfg,
            t: 0,
            mu_prod: 1.0,
            first: params.iter().map(zeros).collect(),
            second: match cfg.kind {
                OptimizerKind::Nadam => params.iter().map(zeros).collect(),
                OptimizerKind::SgdNesterov => params.iter().map(|_| None).collect(),
            },
        })
    }

    /// Apply one update with learning rate `lr` to every trainable parameter.
    pub fn step(&mut self, params: &mut [Param<T>], grads: &[Option<Tensor<T>>], lr: f64) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != params.len() {
            return Err(Error::dim(format!(
                "optimizer tracks {} parameters, got {} params and {} grads",
                self.first.len(),
                params.len(),
                grads.len()
            )));
        }
        let t = self.t + 1;
        let coeffs = NadamCoeffs::at(&self.cfg, t, self.mu_prod);
        for (i, p) in params.iter_mut().enumerate() {
            let (Some(g), Some(first)) = (&grads[i], &mut self.first[i]) else {
                continue;
            };
            match self.cfg.kind {
                OptimizerKind::SgdNesterov => sgd_nesterov_step(&mut p.value, g, first, self.cfg.momentum, lr)?,
                OptimizerKind::Nadam => {
                    let second = self.second[i].as_mut().expect("nadam second moment");
                    nadam_step(&mut p.value, g, first, second, &self.cfg, &coeffs, lr)?
                }
            }
        }
        self.t = t;
        self.mu_prod = coeffs.prod_t;
        Ok(())
    }

    /// Store state under `optim/...` entries.
    pub fn save_into(&self, ckpt: &mut Checkpoint, params: &[Param<T>]) {
        let scalar = |v: f64| Tensor::<f64>::from_vec(&[1], vec![v]).expect("rank 1");
        ckpt.insert("optim/kind", scalar(self.cfg.kind.code()));
        ckpt.insert("optim/t", scalar(self.t as f64));
        ckpt.insert("optim/mu_prod", scalar(self.mu_prod));
        for (i, p) in params.iter().enumerate() {
            if let Some(m) = &self.first[i] {
                ckpt.insert(format!("optim/m/{}", p.name), m.clone());
            }
            if let Some(v) = &self.second[i] {
                ckpt.insert(format!("optim/v/{}", p.name), v.clone());
            }
        }
    }

    /// Restore state saved by [`Optimizer::save_into`]; the optimizer kind must match.
    pub fn load_from(cfg: OptimizerConfig, ckpt: &Checkpoint, params: &[Param<T>]) -> Result<Self> {
        let mut opt = Self::new(cfg, params)?;
        let scalar = |name: &str| -> Result<f64> { Ok(ckpt.tensor::<f64>(name)?.data()[0]) };
        if scalar("optim/kind")? != cfg.kind.code() {
            return Err(Error::Spec(format!(
                "checkpoint optimizer state does not belong to {}",
                cfg.kind.name()
            )));
        }
        opt.t = scalar("optim/t")? as u64;
        opt.mu_prod = scalar("optim/mu_prod")?;
        for (i, p) in params.iter().enumerate() {
            for (prefix, slot) in [("m", &mut opt.first[i]), ("v", &mut opt.second[i])] {
                if let Some(s) = slot {
                    let t = ckpt.tensor::<T>(&format!("optim/{prefix}/{}", p.name))?;
                    if t.shape() != s.shape() {
                        return Err(Error::Spec(format!("optimizer state shape mismatch for {}", p.name)));
                    }
                    *s = t.clone();
                }
            }
        }
        Ok(opt)
    }
}

/// Multiplicative learning-rate drop after the validation loss stalls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlateauSchedule {
    pub factor: f64,
    pub patience: usize,
    pub min_lr: f64,
    /// Absolute improvement needed to reset the patience counter.
    pub threshold: f64,
    #[serde(skip)]
    pub best_loss: Option<f64>,
    #[serde(skip)]
    pub epochs_since_best: usize,
    #[serde(skip)]
    pub epochs_seen: usize,
}

impl Default for PlateauSchedule {
    fn default() -> Self {
        PlateauSchedule {
            factor: 0.02,
            patience: 3,
            min_lr: 1e-7,
            threshold: 1e-4,
            best_loss: None,
            epochs_since_best: 0,
            epochs_seen: 0,
        }
    }
}

impl PlateauSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.factor > 0.0 && self.factor < 1.0) || self.patience == 0 || !(self.min_lr > 0.0) {
            return Err(Error::Config(format!(
                "plateau schedule needs 0 < factor < 1, patience >= 1, min_lr > 0; got {}, {}, {}",
                self.factor, self.patience, self.min_lr
            )));
        }
        Ok(())
    }

    /// Feed one epoch's validation loss and return the learning rate for the
    /// next epoch. A non-finite loss is a divergence (reported with batch 0).
    pub fn update(&mut self, val_loss: f64, lr: f64) -> Result<f64> {
        let epoch = self.epochs_seen;
        self.epochs_seen += 1;
        if !val_loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                batch: 0,
                loss: val_loss,
            });
        }
        match self.best_loss {
            Some(best) if val_loss >= best - self.threshold => {
                self.epochs_since_best += 1;
                if self.epochs_since_best >= self.patience {
                    self.epochs_since_best = 0;
                    return Ok((lr * self.factor).max(self.min_lr));
                }
            }
            _ => {
                self.best_loss = Some(val_loss);
                self.epochs_since_best = 0;
            }
        }
        Ok(lr)
    }

    /// Scheduler counters as `[best (NaN if none), since_best, seen]`.
    pub fn state(&self) -> [f64; 3] {
        [
            self.best_loss.unwrap_or(f64::NAN),
            self.epochs_since_best as f64,
            self.epochs_seen as f64,
        ]
    }

    pub fn restore(&mut self, state: [f64; 3]) {
        self.best_loss = (!state[0].is_nan()).then_some(state[0]);
        self.epochs_since_best = state[1] as usize;
        self.epochs_seen = state[2] as usize;
    }
}
