//! Inner loops. Everything here works on raw slices and has a fixed
//! accumulation order so results are reproducible bit for bit.

use crate::error::{Error, Result};

use super::Scalar;

/// Columns of `b`/`c` processed per tile; keeps a `k x TILE` panel of `b` hot in cache.
const TILE: usize = 512;

/// `c[m x n] += a[m x k] * b[k x n]`, all row-major.
///
/// Each `c[i, j]` accumulates its products in ascending `p` order regardless
/// of tiling; the tiles only reorder which elements are being worked on.
pub(crate) fn gemm_acc<T: Scalar>(a: &[T], b: &[T], c: &mut [T], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    let mut j0 = 0;
    while j0 < n {
        let j1 = (j0 + TILE).min(n);
        for i in 0..m {
            let c_row = &mut c[i * n + j0..i * n + j1];
            let a_row = &a[i * k..(i + 1) * k];
            for (p, &a_ip) in a_row.iter().enumerate() {
                let b_row = &b[p * n + j0..p * n + j1];
                for (cv, &bv) in c_row.iter_mut().zip(b_row) {
                    *cv = *cv + a_ip * bv;
                }
            }
        }
        j0 = j1;
    }
}

/// Dot product with eight interleaved partial sums, combined pairwise at the end.
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let mut lanes = [T::zero(); 8];
    let chunks = a.len() / 8;
    for c in 0..chunks {
        let (xa, xb) = (&a[c * 8..c * 8 + 8], &b[c * 8..c * 8 + 8]);
        for l in 0..8 {
            lanes[l] = lanes[l] + xa[l] * xb[l];
        }
    }
    for i in chunks * 8..a.len() {
        lanes[i % 8] = lanes[i % 8] + a[i] * b[i];
    }
    let q = [
        lanes[0] + lanes[4],
        lanes[1] + lanes[5],
        lanes[2] + lanes[6],
        lanes[3] + lanes[7],
    ];
    (q[0] + q[2]) + (q[1] + q[3])
}

/// Geometry of a cubic-kernel 3D convolution on one sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub channels: usize,
    pub input: [usize; 3],
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    pub output: [usize; 3],
}

impl ConvGeometry {
    pub fn new(
        channels: usize,
        input: [usize; 3],
        kernel: usize,
        stride: usize,
        pad: usize,
    ) -> Result<Self> {
        if stride == 0 {
            return Err(Error::dim("stride must be >= 1"));
        }
        if kernel == 0 {
            return Err(Error::dim("kernel extent must be >= 1"));
        }
        let mut output = [0; 3];
        for axis in 0..3 {
            let padded = input[axis] + 2 * pad;
            if kernel > padded {
                return Err(Error::dim(format!(
                    "kernel {kernel} larger than padded input {padded} (input {:?}, pad {pad})",
                    input
                )));
            }
            output[axis] = (padded - kernel) / stride + 1;
        }
        Ok(ConvGeometry {
            channels,
            input,
            kernel,
            stride,
            pad,
            output,
        })
    }

    /// Rows of the transposed patch matrix: one per `(c, kd, kh, kw)`.
    pub fn patch_len(&self) -> usize {
        self.channels * self.kernel.pow(3)
    }

    /// Output voxels per sample.
    pub fn positions(&self) -> usize {
        self.output.iter().product()
    }

    pub fn input_len(&self) -> usize {
        self.channels * self.input.iter().product::<usize>()
    }

    /// Input coordinate read by output coordinate `o` at kernel offset `k`, if inside.
    #[inline]
    fn source(&self, axis: usize, o: usize, k: usize) -> Option<usize> {
        let i = (o * self.stride + k) as isize - self.pad as isize;
        (i >= 0 && (i as usize) < self.input[axis]).then_some(i as usize)
    }
}

/// Lower one sample into a `patch_len x positions` matrix (row = patch element,
/// column = output voxel). Out-of-bounds reads are zero.
pub(crate) fn im2col_t<T: Scalar>(sample: &[T], g: &ConvGeometry, out: &mut [T]) {
    debug_assert_eq!(sample.len(), g.input_len());
    debug_assert_eq!(out.len(), g.patch_len() * g.positions());
    let [id, ih, iw] = g.input;
    let [od, oh, ow] = g.output;
    let kk = g.kernel;
    let positions = g.positions();
    let mut row = 0;
    for c in 0..g.channels {
        let chan = &sample[c * id * ih * iw..(c + 1) * id * ih * iw];
        for kd in 0..kk {
            for kh in 0..kk {
                for kw in 0..kk {
                    let dst = &mut out[row * positions..(row + 1) * positions];
                    let mut col = 0;
                    for z in 0..od {
                        let Some(sz) = g.source(0, z, kd) else {
                            dst[col..col + oh * ow].fill(T::zero());
                            col += oh * ow;
                            continue;
                        };
                        for y in 0..oh {
                            let Some(sy) = g.source(1, y, kh) else {
                                dst[col..col + ow].fill(T::zero());
                                col += ow;
                                continue;
                            };
                            let src = &chan[(sz * ih + sy) * iw..(sz * ih + sy + 1) * iw];
                            for x in 0..ow {
                                dst[col] = match g.source(2, x, kw) {
                                    Some(sx) => src[sx],
                                    None => T::zero(),
                                };
                                col += 1;
                            }
                        }
                    }
                    row += 1;
                }
            }
        }
    }
}

/// Adjoint of [`im2col_t`]: scatter-add a `patch_len x positions` matrix back
/// into a sample-shaped gradient. Accumulation runs in row-then-column order.
pub(crate) fn col2im_t<T: Scalar>(cols: &[T], g: &ConvGeometry, dx: &mut [T]) {
    debug_assert_eq!(dx.len(), g.input_len());
    debug_assert_eq!(cols.len(), g.patch_len() * g.positions());
    let [id, ih, iw] = g.input;
    let [od, oh, ow] = g.output;
    let kk = g.kernel;
    let positions = g.positions();
    let mut row = 0;
    for c in 0..g.channels {
        let chan = &mut dx[c * id * ih * iw..(c + 1) * id * ih * iw];
        for kd in 0..kk {
            for kh in 0..kk {
                for kw in 0..kk {
                    let src = &cols[row * positions..(row + 1) * positions];
                    for z in 0..od {
                        let Some(sz) = g.source(0, z, kd) else {
                            continue;
                        };
                        for y in 0..oh {
                            let Some(sy) = g.source(1, y, kh) else {
                                continue;
                            };
                            let base = (sz * ih + sy) * iw;
                            let col = (z * oh + y) * ow;
                            for x in 0..ow {
                                if let Some(sx) = g.source(2, x, kw) {
                                    chan[base + sx] = chan[base + sx] + src[col + x];
                                }
                            }
                        }
                    }
                    row += 1;
                }
            }
        }
    }
}
