use rand::Rng as _;

use super::Matrix;
use crate::error::{Error, Result};
use crate::seed::Rng;

/// Fully connected layer `y = x·Wᵀ + b` with `W` shaped `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DenseGrads {
    pub d_input: Matrix,
    pub d_weight: Matrix,
    pub d_bias: Vec<f64>,
}

impl DenseParams {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        DenseParams {
            weight: Matrix::zeros(outputs, inputs),
            bias: vec![0.0; outputs],
        }
    }

    /// He-uniform weights (bound `scale·√(6/fan_in)`), zero biases.
    pub fn he_uniform(inputs: usize, outputs: usize, scale: f64, rng: &mut Rng) -> Self {
        let bound = scale * (6.0 / inputs as f64).sqrt();
        let mut p = Self::zeros(inputs, outputs);
        for w in p.weight.data_mut() {
            *w = rng.random_range(-bound..=bound);
        }
        p
    }

    pub fn inputs(&self) -> usize {
        self.weight.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.inputs() {
            return Err(Error::shape("dense_forward", self.inputs(), x.cols()));
        }
        let mut out = x.matmul_t(&self.weight);
        for i in 0..out.rows() {
            for (o, b) in out.row_mut(i).iter_mut().zip(&self.bias) {
                *o += b;
            }
        }
        Ok(out)
    }

    /// Gradients given the forward input and the upstream gradient.
    pub fn backward(&self, input: &Matrix, d_out: &Matrix) -> Result<DenseGrads> {
        if d_out.cols() != self.outputs() || d_out.rows() != input.rows() {
            return Err(Error::shape(
                "dense_backward",
                format!("{}x{}", input.rows(), self.outputs()),
                format!("{}x{}", d_out.rows(), d_out.cols()),
            ));
        }
        Ok(DenseGrads {
            d_input: d_out.matmul(&self.weight),
            d_weight: d_out.t_matmul(input),
            d_bias: d_out.column_sums(),
        })
    }
}
