use super::tensor::{Scalar, Tensor};
use super::NnError;

/// Numerically stable softmax cross-entropy for one row of logits.
/// Returns the loss and the gradient `softmax - onehot`.
pub fn softmax_xent<T: Scalar>(logits: &[T], label: usize) -> Result<(T, Vec<T>), NnError> {
    if label >= logits.len() {
        return Err(NnError::LabelOutOfRange {
            label,
            n_classes: logits.len(),
        });
    }
    let max = logits
        .iter()
        .copied()
        .fold(T::neg_infinity(), |a, b| if b > a { b } else { a });
    let mut sum = T::zero();
    for &l in logits {
        sum = sum + (l - max).exp();
    }
    let lse = max + sum.ln();
    let loss = lse - logits[label];
    let mut grad: Vec<T> = logits.iter().map(|&l| (l - lse).exp()).collect();
    grad[label] = grad[label] - T::one();
    Ok((loss, grad))
}

/// Mean cross-entropy over a batch of logits [N, K]; gradient is scaled by
/// 1/N so it backpropagates the mean loss.
pub fn softmax_xent_batch<T: Scalar>(
    logits: &Tensor<T>,
    labels: &[usize],
) -> Result<(T, Tensor<T>), NnError> {
    let (n, k) = logits.dims2();
    assert_eq!(labels.len(), n);
    let inv_n = T::from_f64_(1.0 / n as f64);
    let mut total = T::zero();
    let mut grad = Tensor::zeros(&[n, k]);
    for i in 0..n {
        let row = &logits.data()[i * k..(i + 1) * k];
        let (loss, g) = softmax_xent(row, labels[i])?;
        total = total + loss;
        for (dst, gv) in grad.data_mut()[i * k..(i + 1) * k].iter_mut().zip(g) {
            *dst = gv * inv_n;
        }
    }
    Ok((total * inv_n, grad))
}
