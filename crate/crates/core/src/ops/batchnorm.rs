use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{channel_moments, Scalar, Tensor};

use super::Mode;

/// Hyperparameters shared by every batch-norm layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BnConfig {
    /// Weight on the old running statistic: `running <- m * running + (1 - m) * batch`.
    pub momentum: f64,
    pub eps: f64,
}

impl Default for BnConfig {
    fn default() -> Self {
        BnConfig {
            momentum: 0.99,
            eps: 1e-5,
        }
    }
}

/// Affine parameters plus running statistics of one batch-norm layer.
#[derive(Debug, Clone)]
pub struct BnState<T> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
    pub config: BnConfig,
}

impl<T: Scalar> BnState<T> {
    pub fn new(channels: usize, config: BnConfig) -> Self {
        BnState {
            gamma: Tensor::ones(&[channels]),
            beta: Tensor::zeros(&[channels]),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::ones(&[channels]),
            config,
        }
    }
}

/// What backward needs from a forward call.
#[derive(Debug, Clone)]
pub struct BnSaved<T> {
    pub mode: Mode,
    pub xhat: Tensor<T>,
    /// `1 / sqrt(var + eps)` per channel, using batch or running variance per mode.
    pub inv_std: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct BnGrads<T> {
    pub dx: Tensor<T>,
    pub dgamma: Tensor<T>,
    pub dbeta: Tensor<T>,
}

fn check_affine<T: Scalar>(c: usize, t: &Tensor<T>, what: &str) -> Result<()> {
    if t.shape() != [c] {
        return Err(Error::dim(format!(
            "batchnorm {what} must be [{c}], got {:?}",
            t.shape()
        )));
    }
    Ok(())
}

/// Per-channel normalization. Train mode normalizes with batch moments and
/// folds them into the running statistics; eval mode uses the running ones.
#[allow(clippy::too_many_arguments)]
pub fn batchnorm3d_forward<T: Scalar>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    running_mean: &mut Tensor<T>,
    running_var: &mut Tensor<T>,
    config: BnConfig,
    mode: Mode,
) -> Result<(Tensor<T>, BnSaved<T>)> {
    let s = x.shape5()?;
    for (t, what) in [
        (&*gamma, "gamma"),
        (&*beta, "beta"),
        (&*running_mean, "running mean"),
        (&*running_var, "running var"),
    ] {
        check_affine(s.c, t, what)?;
    }
    let eps = T::from_f64_lossy(config.eps);
    let spatial = s.spatial();

    let (mean, inv_std) = match mode {
        Mode::Train => {
            if s.n * spatial < 2 {
                return Err(Error::DegenerateBatch(format!(
                    "train-mode batchnorm needs at least 2 values per channel, got shape {:?}",
                    x.shape()
                )));
            }
            let (mean, var) = channel_moments(x)?;
            let m = T::from_f64_lossy(config.momentum);
            let one = T::one();
            for c in 0..s.c {
                let rm = &mut running_mean.data_mut()[c];
                *rm = m * *rm + (one - m) * mean.data()[c];
                let rv = &mut running_var.data_mut()[c];
                *rv = m * *rv + (one - m) * var.data()[c];
            }
            let inv: Vec<T> = var.data().iter().map(|&v| (v + eps).sqrt().recip()).collect();
            (mean.into_vec(), inv)
        }
        Mode::Eval => {
            let inv: Vec<T> = running_var
                .data()
                .iter()
                .map(|&v| (v + eps).sqrt().recip())
                .collect();
            (running_mean.data().to_vec(), inv)
        }
    };

    let mut xhat = vec![T::zero(); x.len()];
    let mut y = vec![T::zero(); x.len()];
    for n in 0..s.n {
        for c in 0..s.c {
            let off = (n * s.c + c) * spatial;
            let (mu, is, g, b) = (mean[c], inv_std[c], gamma.data()[c], beta.data()[c]);
            for i in off..off + spatial {
                let h = (x.data()[i] - mu) * is;
                xhat[i] = h;
                y[i] = g * h + b;
            }
        }
    }
    let saved = BnSaved {
        mode,
        xhat: Tensor::from_vec(x.shape(), xhat)?,
        inv_std,
    };
    Ok((Tensor::from_vec(x.shape(), y)?, saved))
}

/// Convenience wrapper over [`batchnorm3d_forward`] for a self-contained state.
pub fn batchnorm3d<T: Scalar>(
    x: &Tensor<T>,
    state: &mut BnState<T>,
    mode: Mode,
) -> Result<(Tensor<T>, BnSaved<T>)> {
    batchnorm3d_forward(
        x,
        &state.gamma,
        &state.beta,
        &mut state.running_mean,
        &mut state.running_var,
        state.config,
        mode,
    )
}

pub fn batchnorm3d_backward<T: Scalar>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    saved: &BnSaved<T>,
    dy: &Tensor<T>,
) -> Result<BnGrads<T>> {
    let s = x.shape5()?;
    dy.expect_same_shape(x)?;
    let spatial = s.spatial();
    let count = T::from_usize(s.n * spatial).expect("count fits");
    let mut dgamma = vec![T::zero(); s.c];
    let mut dbeta = vec![T::zero(); s.c];
    let mut dx = vec![T::zero(); x.len()];

    let xhat = &saved.xhat;
    for c in 0..s.c {
        let (mut sum_dy, mut sum_dy_xhat) = (T::zero(), T::zero());
        for n in 0..s.n {
            let off = (n * s.c + c) * spatial;
            for i in off..off + spatial {
                sum_dy = sum_dy + dy.data()[i];
                sum_dy_xhat = sum_dy_xhat + dy.data()[i] * xhat.data()[i];
            }
        }
        dgamma[c] = sum_dy_xhat;
        dbeta[c] = sum_dy;
        let scale = gamma.data()[c] * saved.inv_std[c];
        match saved.mode {
            Mode::Train => {
                let mean_dy = sum_dy / count;
                let mean_dy_xhat = sum_dy_xhat / count;
                for n in 0..s.n {
                    let off = (n * s.c + c) * spatial;
                    for i in off..off + spatial {
                        dx[i] = scale * (dy.data()[i] - mean_dy - xhat.data()[i] * mean_dy_xhat);
                    }
                }
            }
            // frozen statistics: an affine map
            Mode::Eval => {
                for n in 0..s.n {
                    let off = (n * s.c + c) * spatial;
                    for i in off..off + spatial {
                        dx[i] = scale * dy.data()[i];
                    }
                }
            }
        }
    }

    Ok(BnGrads {
        dx: Tensor::from_vec(x.shape(), dx)?,
        dgamma: Tensor::from_vec(&[s.c], dgamma)?,
        dbeta: Tensor::from_vec(&[s.c], dbeta)?,
    })
}
