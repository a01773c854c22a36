use crate::error::{Error, Result};

use super::kernels::{col2im_t, gemm_acc, im2col_t, ConvGeometry};
use super::{Scalar, Shape5, Tensor};

/// `a[m x k] * b[k x n]`. Each output element sums its products in ascending `p`.
pub fn matmul<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    let (&[m, k], &[k2, n]) = (a.shape(), b.shape()) else {
        return Err(Error::dim(format!(
            "matmul needs two matrices, got {:?} x {:?}",
            a.shape(),
            b.shape()
        )));
    };
    if k != k2 {
        return Err(Error::dim(format!(
            "matmul inner extents differ: {:?} x {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let mut c = vec![T::zero(); m * n];
    gemm_acc(a.data(), b.data(), &mut c, m, k, n);
    Tensor::from_vec(&[m, n], c)
}

/// Patch matrix of a `(n, c, d, h, w)` tensor for a cubic `kernel`.
///
/// One row per `(sample, output voxel)` and one column per `(c, kd, kh, kw)`;
/// padding reads as zero.
pub fn im2col3d<T: Scalar>(
    x: &Tensor<T>,
    kernel: usize,
    stride: usize,
    pad: usize,
) -> Result<Tensor<T>> {
    let s = x.shape5()?;
    let g = ConvGeometry::new(s.c, [s.d, s.h, s.w], kernel, stride, pad)?;
    let (k, p) = (g.patch_len(), g.positions());
    let mut cols_t = vec![T::zero(); k * p];
    let mut out = vec![T::zero(); s.n * p * k];
    for n in 0..s.n {
        let sample = &x.data()[n * s.sample_len()..(n + 1) * s.sample_len()];
        im2col_t(sample, &g, &mut cols_t);
        let block = &mut out[n * p * k..(n + 1) * p * k];
        for r in 0..k {
            for c in 0..p {
                block[c * k + r] = cols_t[r * p + c];
            }
        }
    }
    Tensor::from_vec(&[s.n * p, k], out)
}

/// Adjoint of [`im2col3d`]: scatter-add patch rows back into a tensor of `shape`.
pub fn col2im3d<T: Scalar>(
    cols: &Tensor<T>,
    shape: Shape5,
    kernel: usize,
    stride: usize,
    pad: usize,
) -> Result<Tensor<T>> {
    let g = ConvGeometry::new(shape.c, [shape.d, shape.h, shape.w], kernel, stride, pad)?;
    let (k, p) = (g.patch_len(), g.positions());
    if cols.shape() != [shape.n * p, k] {
        return Err(Error::dim(format!(
            "col2im3d expects a {:?} patch matrix, got {:?}",
            [shape.n * p, k],
            cols.shape()
        )));
    }
    let mut cols_t = vec![T::zero(); k * p];
    let mut dx = Tensor::zeros(&shape.dims());
    for n in 0..shape.n {
        let block = &cols.data()[n * p * k..(n + 1) * p * k];
        for r in 0..k {
            for c in 0..p {
                cols_t[r * p + c] = block[c * k + r];
            }
        }
        let len = shape.sample_len();
        col2im_t(&cols_t, &g, &mut dx.data_mut()[n * len..(n + 1) * len]);
    }
    Ok(dx)
}

/// Per-channel mean and biased variance over every non-channel axis.
///
/// Two passes; within a channel, samples are visited in ascending `n` and
/// voxels in ascending linear order.
pub fn channel_moments<T: Scalar>(x: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>)> {
    let s = x.shape5()?;
    let spatial = s.spatial();
    let count = T::from_usize(s.n * spatial).expect("count fits");
    let mut mean = vec![T::zero(); s.c];
    let mut var = vec![T::zero(); s.c];
    for c in 0..s.c {
        let mut acc = T::zero();
        for n in 0..s.n {
            let off = (n * s.c + c) * spatial;
            for &v in &x.data()[off..off + spatial] {
                acc = acc + v;
            }
        }
        let mu = acc / count;
        let mut sq = T::zero();
        for n in 0..s.n {
            let off = (n * s.c + c) * spatial;
            for &v in &x.data()[off..off + spatial] {
                let d = v - mu;
                sq = sq + d * d;
            }
        }
        mean[c] = mu;
        var[c] = sq / count;
    }
    Ok((Tensor::from_vec(&[s.c], mean)?, Tensor::from_vec(&[s.c], var)?))
}
