use crate::error::{Error, Result};
use crate::tensor::{gemm_acc, matmul, Scalar, Tensor};

#[derive(Debug, Clone)]
pub struct DenseGrads<T> {
    pub dx: Tensor<T>,
    pub dweight: Tensor<T>,
    pub dbias: Tensor<T>,
}

fn check<T: Scalar>(x: &Tensor<T>, weight: &Tensor<T>, bias: &Tensor<T>) -> Result<(usize, usize, usize)> {
    let (&[n, f], &[f2, classes]) = (x.shape(), weight.shape()) else {
        return Err(Error::dim(format!(
            "dense expects x [n, f] and weight [f, classes], got {:?} and {:?}",
            x.shape(),
            weight.shape()
        )));
    };
    if f != f2 || bias.shape() != [classes] {
        return Err(Error::dim(format!(
            "dense shape mismatch: x {:?}, weight {:?}, bias {:?}",
            x.shape(),
            weight.shape(),
            bias.shape()
        )));
    }
    Ok((n, f, classes))
}

/// `x * W + b`.
pub fn dense_forward<T: Scalar>(x: &Tensor<T>, weight: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let (_, _, classes) = check(x, weight, bias)?;
    let mut y = matmul(x, weight)?;
    for row in y.data_mut().chunks_mut(classes) {
        for (v, &b) in row.iter_mut().zip(bias.data()) {
            *v = *v + b;
        }
    }
    Ok(y)
}

pub fn dense_backward<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
    dy: &Tensor<T>,
) -> Result<DenseGrads<T>> {
    let (n, f, classes) = check(x, weight, bias)?;
    if dy.shape() != [n, classes] {
        return Err(Error::dim(format!(
            "dense upstream gradient must be [{n}, {classes}], got {:?}",
            dy.shape()
        )));
    }
    // dx = dy * W^T
    let mut w_t = vec![T::zero(); classes * f];
    for i in 0..f {
        for j in 0..classes {
            w_t[j * f + i] = weight.data()[i * classes + j];
        }
    }
    let mut dx = vec![T::zero(); n * f];
    gemm_acc(dy.data(), &w_t, &mut dx, n, classes, f);
    // dW = x^T * dy
    let mut x_t = vec![T::zero(); f * n];
    for r in 0..n {
        for i in 0..f {
            x_t[i * n + r] = x.data()[r * f + i];
        }
    }
    let mut dw = vec![T::zero(); f * classes];
    gemm_acc(&x_t, dy.data(), &mut dw, f, n, classes);
    let mut db = vec![T::zero(); classes];
    for row in dy.data().chunks(classes) {
        for (acc, &g) in db.iter_mut().zip(row) {
            *acc = *acc + g;
        }
    }
    Ok(DenseGrads {
        dx: Tensor::from_vec(&[n, f], dx)?,
        dweight: Tensor::from_vec(&[f, classes], dw)?,
        dbias: Tensor::from_vec(&[classes], db)?,
    })
}
