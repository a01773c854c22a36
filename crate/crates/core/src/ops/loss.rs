use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Row-wise softmax with the row maximum subtracted first.
pub fn softmax<T: Scalar>(logits: &Tensor<T>) -> Result<Tensor<T>> {
    let &[_, classes] = logits.shape() else {
        return Err(Error::dim(format!("softmax expects [n, classes], got {:?}", logits.shape())));
    };
    let mut probs = logits.data().to_vec();
    for row in probs.chunks_mut(classes) {
        let max = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
        let mut total = T::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total = total + *v;
        }
        for v in row.iter_mut() {
            *v = *v / total;
        }
    }
    Tensor::from_vec(logits.shape(), probs)
}

/// Mean cross-entropy of `labels` under the softmax of `logits`.
///
/// Returns the scalar loss and the probability rows.
pub fn softmax_xent_forward<T: Scalar>(logits: &Tensor<T>, labels: &[usize]) -> Result<(T, Tensor<T>)> {
    let &[n, classes] = logits.shape() else {
        return Err(Error::dim(format!(
            "softmax_xent expects [n, classes], got {:?}",
            logits.shape()
        )));
    };
    if labels.len() != n {
        return Err(Error::dim(format!("{} labels for {n} rows", labels.len())));
    }
    if let Some((row, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= classes) {
        return Err(Error::Label { row, label, classes });
    }
    let mut probs = Vec::with_capacity(n * classes);
    let mut loss = T::zero();
    for (row, &label) in logits.data().chunks(classes).zip(labels) {
        let max = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
        let start = probs.len();
        probs.extend(row.iter().map(|&v| (v - max).exp()));
        let total = probs[start..].iter().fold(T::zero(), |acc, &e| acc + e);
        for p in &mut probs[start..] {
            *p = *p / total;
        }
        loss = loss + (max + total.ln() - row[label]);
    }
    let n_t = T::from_usize(n).expect("batch fits");
    Ok((loss / n_t, Tensor::from_vec(&[n, classes], probs)?))
}

/// `dloss * (softmax - onehot) / n`.
pub fn softmax_xent_backward<T: Scalar>(probs: &Tensor<T>, labels: &[usize], dloss: T) -> Result<Tensor<T>> {
    let &[n, classes] = probs.shape() else {
        return Err(Error::dim("softmax_xent backward expects [n, classes] probabilities"));
    };
    let scale = dloss / T::from_usize(n).expect("batch fits");
    let mut g = probs.data().to_vec();
    for (row, &label) in g.chunks_mut(classes).zip(labels) {
        row[label] = row[label] - T::one();
        for v in row.iter_mut() {
            *v = *v * scale;
        }
    }
    Tensor::from_vec(&[n, classes], g)
}
