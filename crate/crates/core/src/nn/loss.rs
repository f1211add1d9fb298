use super::Matrix;
use crate::error::{Error, Result};
use crate::mode::{TravelMode, NUM_CLASSES};

/// Row-wise softmax with the row maximum subtracted first.
pub fn softmax(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Mean cross-entropy of the softmax of `logits` against one-hot targets,
/// with its gradient `(p - y) / batch`.
pub fn softmax_xent(logits: &Matrix, targets: &Matrix) -> Result<(f64, Matrix)> {
    if logits.shape() != targets.shape() {
        return Err(Error::shape(
            "softmax_xent",
            format!("{:?}", logits.shape()),
            format!("{:?}", targets.shape()),
        ));
    }
    let n = logits.rows();
    if n == 0 {
        return Ok((0.0, Matrix::zeros(0, logits.cols())));
    }
    let mut grad = softmax(logits);
    let mut loss = 0.0;
    for i in 0..n {
        let z = logits.row(i);
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_sum = z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        for (j, &y) in targets.row(i).iter().enumerate() {
            if y != 0.0 {
                loss -= y * (z[j] - max - log_sum);
            }
        }
        for (g, &y) in grad.row_mut(i).iter_mut().zip(targets.row(i)) {
            *g = (*g - y) / n as f64;
        }
    }
    Ok((loss / n as f64, grad))
}

pub fn one_hot(labels: &[TravelMode]) -> Matrix {
    let mut m = Matrix::zeros(labels.len(), NUM_CLASSES);
    for (i, l) in labels.iter().enumerate() {
        m[(i, l.index())] = 1.0;
    }
    m
}
