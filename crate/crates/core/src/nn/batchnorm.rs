use super::{Matrix, Phase};
use crate::error::{Error, Result};

pub const DEFAULT_BN_MOMENTUM: f64 = 0.9;
pub const DEFAULT_BN_EPS: f64 = 1e-5;

/// Per-feature batch normalization with running statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
}

/// Values kept from a train-mode forward pass.
#[derive(Debug, Clone)]
pub struct BatchNormCache {
    pub normalized: Matrix,
    pub inv_std: Vec<f64>,
    pub mean: Vec<f64>,
    /// Population variance of the batch.
    pub var: Vec<f64>,
}

impl BatchNorm {
    pub fn new(width: usize) -> Self {
        BatchNorm {
            gamma: vec![1.0; width],
            beta: vec![0.0; width],
            running_mean: vec![0.0; width],
            running_var: vec![1.0; width],
            momentum: DEFAULT_BN_MOMENTUM,
            eps: DEFAULT_BN_EPS,
        }
    }

    pub fn width(&self) -> usize {
        self.gamma.len()
    }

    fn check_width(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.width() {
            return Err(Error::shape("batchnorm", self.width(), x.cols()));
        }
        Ok(())
    }

    /// Normalizes with batch statistics without touching the running stats.
    pub fn forward_batch(&self, x: &Matrix) -> Result<(Matrix, BatchNormCache)> {
        self.check_width(x)?;
        let n = x.rows();
        if n < 2 {
            return Err(Error::BatchTooSmall);
        }
        let mean: Vec<f64> = x.column_sums().into_iter().map(|s| s / n as f64).collect();
        let mut var = vec![0.0; self.width()];
        for i in 0..n {
            for ((v, &xi), m) in var.iter_mut().zip(x.row(i)).zip(&mean) {
                *v += (xi - m) * (xi - m);
            }
        }
        for v in &mut var {
            *v /= n as f64;
        }
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.eps).sqrt()).collect();
        let mut normalized = x.clone();
        let mut out = x.clone();
        for i in 0..n {
            let nrow = normalized.row_mut(i);
            for (j, v) in nrow.iter_mut().enumerate() {
                *v = (*v - mean[j]) * inv_std[j];
            }
            let nrow = normalized.row(i).to_vec();
            for (j, o) in out.row_mut(i).iter_mut().enumerate() {
                *o = self.gamma[j] * nrow[j] + self.beta[j];
            }
        }
        Ok((
            out,
            BatchNormCache {
                normalized,
                inv_std,
                mean,
                var,
            },
        ))
    }

    /// Normalizes with the running statistics.
    pub fn forward_running(&self, x: &Matrix) -> Result<Matrix> {
        self.check_width(x)?;
        let mut out = x.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                let inv = 1.0 / (self.running_var[j] + self.eps).sqrt();
                *v = self.gamma[j] * (*v - self.running_mean[j]) * inv + self.beta[j];
            }
        }
        Ok(out)
    }

    /// Exponential moving update of the running statistics.
    pub fn update_running(&mut self, mean: &[f64], var: &[f64]) {
        let m = self.momentum;
        for (r, b) in self.running_mean.iter_mut().zip(mean) {
            *r = m * *r + (1.0 - m) * b;
        }
        for (r, b) in self.running_var.iter_mut().zip(var) {
            *r = m * *r + (1.0 - m) * b;
        }
    }

    /// Train mode normalizes by batch statistics and updates the running
    /// stats; eval mode only reads them.
    pub fn forward(&mut self, x: &Matrix, phase: Phase) -> Result<(Matrix, Option<BatchNormCache>)> {
        match phase {
            Phase::Train => {
                let (out, cache) = self.forward_batch(x)?;
                self.update_running(&cache.mean, &cache.var);
                Ok((out, Some(cache)))
            }
            Phase::Eval => Ok((self.forward_running(x)?, None)),
        }
    }

    /// Returns `(d_input, d_gamma, d_beta)` for an eval-mode pass over `x`,
    /// where the statistics are constants.
    pub fn backward_running(&self, x: &Matrix, d_out: &Matrix) -> (Matrix, Vec<f64>, Vec<f64>) {
        let w = self.width();
        let mut d_gamma = vec![0.0; w];
        let mut d_beta = vec![0.0; w];
        let mut d_input = Matrix::zeros(d_out.rows(), w);
        for i in 0..d_out.rows() {
            let (dy, xi) = (d_out.row(i), x.row(i));
            for j in 0..w {
                let inv = 1.0 / (self.running_var[j] + self.eps).sqrt();
                d_gamma[j] += dy[j] * (xi[j] - self.running_mean[j]) * inv;
                d_beta[j] += dy[j];
                d_input.row_mut(i)[j] = dy[j] * self.gamma[j] * inv;
            }
        }
        (d_input, d_gamma, d_beta)
    }

    /// Returns `(d_input, d_gamma, d_beta)` for a train-mode pass.
    pub fn backward(&self, cache: &BatchNormCache, d_out: &Matrix) -> (Matrix, Vec<f64>, Vec<f64>) {
        let n = d_out.rows();
        let w = self.width();
        let mut d_gamma = vec![0.0; w];
        let mut d_beta = vec![0.0; w];
        let mut sum_dxhat = vec![0.0; w];
        let mut sum_dxhat_xhat = vec![0.0; w];
        for i in 0..n {
            let dy = d_out.row(i);
            let xhat = cache.normalized.row(i);
            for j in 0..w {
                d_gamma[j] += dy[j] * xhat[j];
                d_beta[j] += dy[j];
                let dxhat = dy[j] * self.gamma[j];
                sum_dxhat[j] += dxhat;
                sum_dxhat_xhat[j] += dxhat * xhat[j];
            }
        }
        let mut d_input = Matrix::zeros(n, w);
        let nf = n as f64;
        for i in 0..n {
            let dy = d_out.row(i);
            let xhat = cache.normalized.row(i).to_vec();
            for (j, d) in d_input.row_mut(i).iter_mut().enumerate() {
                let dxhat = dy[j] * self.gamma[j];
                *d = cache.inv_std[j] / nf
                    * (nf * dxhat - sum_dxhat[j] - xhat[j] * sum_dxhat_xhat[j]);
            }
        }
        (d_input, d_gamma, d_beta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Matrix {
        Matrix::from_rows(&[[1.0, 10.0], [2.0, -4.0], [4.0, 3.0], [-3.0, 0.5]]).unwrap()
    }

    #[test]
    fn train_output_is_standardized() {
        let mut bn = BatchNorm::new(2);
        bn.eps = 1e-12;
        let (y, _) = bn.forward(&sample(), Phase::Train).unwrap();
        for j in 0..2 {
            let col: Vec<f64> = (0..4).map(|i| y[(i, j)]).collect();
            let mean = col.iter().sum::<f64>() / 4.0;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0;
            assert!(mean.abs() < 1e-6);
            assert!((var - 1.0).abs() < 1e-6);
        }
        assert_ne!(bn.running_mean, vec![0.0, 0.0]);
    }

    #[test]
    fn eval_is_repeatable() {
        let mut bn = BatchNorm::new(2);
        bn.forward(&sample(), Phase::Train).unwrap();
        let a = bn.forward(&sample(), Phase::Eval).unwrap().0;
        let b = bn.forward(&sample(), Phase::Eval).unwrap().0;
        assert_eq!(a, b);
    }

    #[test]
    fn single_row_train_fails() {
        let mut bn = BatchNorm::new(2);
        let x = Matrix::zeros(1, 2);
        assert!(matches!(bn.forward(&x, Phase::Train), Err(Error::BatchTooSmall)));
        assert!(bn.forward(&x, Phase::Eval).is_ok());
    }

    #[test]
    fn running_update_uses_momentum() {
        let mut bn = BatchNorm::new(1);
        bn.update_running(&[2.0], &[3.0]);
        assert!((bn.running_mean[0] - 0.2).abs() < 1e-15);
        assert!((bn.running_var[0] - 1.2).abs() < 1e-15);
    }
}
