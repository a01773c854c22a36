use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::tensor::{col2im_t, dot, gemm_acc, im2col_t, ConvGeometry, Scalar, Shape5, Tensor};

/// Samples whose weight-gradient partials are materialized at once during backward.
const GRAD_GROUP: usize = 8;

#[derive(Debug, Clone)]
pub struct ConvGrads<T> {
    pub dx: Tensor<T>,
    pub dweight: Tensor<T>,
    pub dbias: Tensor<T>,
}

fn geometry<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
    stride: usize,
    pad: usize,
) -> Result<(Shape5, ConvGeometry, usize)> {
    let s = x.shape5()?;
    let &[co, ci, kd, kh, kw] = weight.shape() else {
        return Err(Error::dim(format!(
            "conv3d weight must be (co, ci, k, k, k), got {:?}",
            weight.shape()
        )));
    };
    if kd != kh || kh != kw {
        return Err(Error::dim(format!("conv3d kernel must be cubic, got {:?}", weight.shape())));
    }
    if ci != s.c {
        return Err(Error::dim(format!(
            "conv3d channel mismatch: input has {} channels, weight expects {ci}",
            s.c
        )));
    }
    if bias.shape() != [co] {
        return Err(Error::dim(format!(
            "conv3d bias must be [{co}], got {:?}",
            bias.shape()
        )));
    }
    let g = ConvGeometry::new(ci, [s.d, s.h, s.w], kd, stride, pad)?;
    Ok((s, g, co))
}

/// Cross-correlation (no kernel flip) with zero padding, lowered to a patch
/// matrix times the weight matrix.
///
/// Every output is `sum_{c,kd,kh,kw} w * x + bias`, accumulated in that
/// index order, so the result is bitwise equal to [`conv3d_direct`].
pub fn conv3d_forward<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
    stride: usize,
    pad: usize,
) -> Result<Tensor<T>> {
    let (s, g, co) = geometry(x, weight, bias, stride, pad)?;
    let (k, p) = (g.patch_len(), g.positions());
    let in_len = s.sample_len();
    let mut out = vec![T::zero(); s.n * co * p];
    out.par_chunks_mut(co * p)
        .zip(x.data().par_chunks(in_len))
        .for_each(|(y, sample)| {
            let mut cols = vec![T::zero(); k * p];
            im2col_t(sample, &g, &mut cols);
            gemm_acc(weight.data(), &cols, y, co, k, p);
            for (c, row) in y.chunks_mut(p).enumerate() {
                let b = bias.data()[c];
                for v in row {
                    *v = *v + b;
                }
            }
        });
    let [od, oh, ow] = g.output;
    Tensor::from_vec(&[s.n, co, od, oh, ow], out)
}

/// Reference convolution by direct nested loops over the definition.
pub fn conv3d_direct<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
    stride: usize,
    pad: usize,
) -> Result<Tensor<T>> {
    let (s, g, co) = geometry(x, weight, bias, stride, pad)?;
    let [od, oh, ow] = g.output;
    let kk = g.kernel;
    let mut out = Tensor::zeros(&[s.n, co, od, oh, ow]);
    for n in 0..s.n {
        for o in 0..co {
            for z in 0..od {
                for y in 0..oh {
                    for xo in 0..ow {
                        let mut acc = T::zero();
                        for c in 0..s.c {
                            for a in 0..kk {
                                for b in 0..kk {
                                    for e in 0..kk {
                                        let iz = (z * stride + a) as isize - pad as isize;
                                        let iy = (y * stride + b) as isize - pad as isize;
                                        let ix = (xo * stride + e) as isize - pad as isize;
                                        if iz < 0
                                            || iy < 0
                                            || ix < 0
                                            || iz as usize >= s.d
                                            || iy as usize >= s.h
                                            || ix as usize >= s.w
                                        {
                                            continue;
                                        }
                                        let xv = x.at(&[
                                            n,
                                            c,
                                            iz as usize,
                                            iy as usize,
                                            ix as usize,
                                        ]);
                                        acc = acc + weight.at(&[o, c, a, b, e]) * xv;
                                    }
                                }
                            }
                        }
                        out.set(&[n, o, z, y, xo], acc + bias.data()[o]);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Gradients of [`conv3d_forward`] given the upstream gradient `dy`.
pub fn conv3d_backward<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
    stride: usize,
    pad: usize,
    dy: &Tensor<T>,
) -> Result<ConvGrads<T>> {
    let (s, g, co) = geometry(x, weight, bias, stride, pad)?;
    let (k, p) = (g.patch_len(), g.positions());
    let [od, oh, ow] = g.output;
    if dy.shape() != [s.n, co, od, oh, ow] {
        return Err(Error::dim(format!(
            "conv3d upstream gradient has shape {:?}, expected {:?}",
            dy.shape(),
            [s.n, co, od, oh, ow]
        )));
    }

    // weight as k x co so the patch gradient is an axpy-form product
    let mut w_t = vec![T::zero(); k * co];
    for o in 0..co {
        for r in 0..k {
            w_t[r * co + o] = weight.data()[o * k + r];
        }
    }

    let in_len = s.sample_len();
    let mut dx = vec![T::zero(); s.n * in_len];
    let mut dweight = vec![T::zero(); co * k];
    let out_len = co * p;

    let samples: Vec<usize> = (0..s.n).collect();
    for group in samples.chunks(GRAD_GROUP) {
        let first = group[0];
        let last = group[group.len() - 1] + 1;
        let partials: Vec<Vec<T>> = dx[first * in_len..last * in_len]
            .par_chunks_mut(in_len)
            .zip(group.par_iter())
            .map(|(dx_n, &n)| {
                let sample = &x.data()[n * in_len..(n + 1) * in_len];
                let dy_n = &dy.data()[n * out_len..(n + 1) * out_len];
                let mut cols = vec![T::zero(); k * p];
                im2col_t(sample, &g, &mut cols);
                let mut dw = vec![T::zero(); co * k];
                for o in 0..co {
                    let dy_row = &dy_n[o * p..(o + 1) * p];
                    for r in 0..k {
                        dw[o * k + r] = dot(dy_row, &cols[r * p..(r + 1) * p]);
                    }
                }
                cols.fill(T::zero());
                gemm_acc(&w_t, dy_n, &mut cols, k, co, p);
                col2im_t(&cols, &g, dx_n);
                dw
            })
            .collect();
        for dw in partials {
            for (acc, v) in dweight.iter_mut().zip(dw) {
                *acc = *acc + v;
            }
        }
    }

    let mut dbias = vec![T::zero(); co];
    for n in 0..s.n {
        for (o, db) in dbias.iter_mut().enumerate() {
            let row = &dy.data()[n * out_len + o * p..n * out_len + (o + 1) * p];
            *db = row.iter().fold(*db, |acc, &v| acc + v);
        }
    }

    Ok(ConvGrads {
        dx: Tensor::from_vec(x.shape(), dx)?,
        dweight: Tensor::from_vec(weight.shape(), dweight)?,
        dbias: Tensor::from_vec(&[co], dbias)?,
    })
}
