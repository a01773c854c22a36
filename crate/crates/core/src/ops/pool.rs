use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Marks an argmax that landed on high-side padding; it receives no gradient.
pub const PADDING: usize = usize::MAX;

#[derive(Debug, Clone)]
pub struct MaxPoolSaved {
    pub input_shape: Vec<usize>,
    /// Flat input index of each output's maximum, or [`PADDING`].
    pub argmax: Vec<usize>,
}

fn pooled_extent(len: usize, window: usize, stride: usize, ceil_pad: bool) -> Result<usize> {
    if ceil_pad {
        Ok(len.div_ceil(stride))
    } else if window > len {
        Err(Error::dim(format!("pool window {window} exceeds extent {len}")))
    } else {
        Ok((len - window) / stride + 1)
    }
}

/// Windowed maximum. With `ceil_pad` the input is zero-padded on the high
/// side so each output extent is `ceil(len / stride)`; padded cells take part
/// in the maximum as zeros. Ties go to the first cell in window scan order.
pub fn maxpool3d_forward<T: Scalar>(
    x: &Tensor<T>,
    window: usize,
    stride: usize,
    ceil_pad: bool,
) -> Result<(Tensor<T>, MaxPoolSaved)> {
    if window == 0 || stride == 0 {
        return Err(Error::dim("pool window and stride must be >= 1"));
    }
    let s = x.shape5()?;
    let od = pooled_extent(s.d, window, stride, ceil_pad)?;
    let oh = pooled_extent(s.h, window, stride, ceil_pad)?;
    let ow = pooled_extent(s.w, window, stride, ceil_pad)?;
    let mut out = Vec::with_capacity(s.n * s.c * od * oh * ow);
    let mut argmax = Vec::with_capacity(out.capacity());
    let spatial = s.spatial();
    for plane in 0..s.n * s.c {
        let base = plane * spatial;
        for z in 0..od {
            for y in 0..oh {
                for xo in 0..ow {
                    let mut best: Option<(T, usize)> = None;
                    for a in 0..window {
                        let iz = z * stride + a;
                        for b in 0..window {
                            let iy = y * stride + b;
                            for e in 0..window {
                                let ix = xo * stride + e;
                                let cand = if iz < s.d && iy < s.h && ix < s.w {
                                    let idx = base + (iz * s.h + iy) * s.w + ix;
                                    (x.data()[idx], idx)
                                } else {
                                    (T::zero(), PADDING)
                                };
                                if best.is_none_or(|(v, _)| cand.0 > v) {
                                    best = Some(cand);
                                }
                            }
                        }
                    }
                    let (v, idx) = best.expect("window is non-empty");
                    out.push(v);
                    argmax.push(idx);
                }
            }
        }
    }
    Ok((
        Tensor::from_vec(&[s.n, s.c, od, oh, ow], out)?,
        MaxPoolSaved {
            input_shape: x.shape().to_vec(),
            argmax,
        },
    ))
}

pub fn maxpool3d_backward<T: Scalar>(saved: &MaxPoolSaved, dy: &Tensor<T>) -> Result<Tensor<T>> {
    if dy.len() != saved.argmax.len() {
        return Err(Error::dim(format!(
            "maxpool upstream gradient has {} elements, forward produced {}",
            dy.len(),
            saved.argmax.len()
        )));
    }
    let mut dx = Tensor::zeros(&saved.input_shape);
    let buf = dx.data_mut();
    for (&idx, &g) in saved.argmax.iter().zip(dy.data()) {
        if idx != PADDING {
            buf[idx] = buf[idx] + g;
        }
    }
    Ok(dx)
}

/// Mean over all spatial positions: `(n, c, d, h, w) -> (n, c)`.
pub fn avgpool3d_global_forward<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let s = x.shape5()?;
    let spatial = s.spatial();
    let denom = T::from_usize(spatial).expect("extent fits");
    let out = x
        .data()
        .chunks(spatial)
        .map(|plane| plane.iter().fold(T::zero(), |acc, &v| acc + v) / denom)
        .collect();
    Tensor::from_vec(&[s.n, s.c], out)
}

pub fn avgpool3d_global_backward<T: Scalar>(
    input_shape: &[usize],
    dy: &Tensor<T>,
) -> Result<Tensor<T>> {
    let &[n, c, d, h, w] = input_shape else {
        return Err(Error::dim(format!("expected 5-d input shape, got {input_shape:?}")));
    };
    if dy.shape() != [n, c] {
        return Err(Error::dim(format!(
            "avgpool upstream gradient must be [{n}, {c}], got {:?}",
            dy.shape()
        )));
    }
    let spatial = d * h * w;
    let denom = T::from_usize(spatial).expect("extent fits");
    let mut dx = Vec::with_capacity(n * c * spatial);
    for &g in dy.data() {
        let v = g / denom;
        dx.extend(std::iter::repeat_n(v, spatial));
    }
    Tensor::from_vec(input_shape, dx)
}
