use rand::Rng as _;

use super::{Matrix, Phase};
use crate::error::{Error, Result};
use crate::seed::Rng;

pub fn relu_forward(x: &Matrix) -> Matrix {
    let mut out = x.clone();
    for v in out.data_mut() {
        *v = v.max(0.0);
    }
    out
}

/// Passes the gradient where the forward input was strictly positive.
pub fn relu_backward(input: &Matrix, d_out: &Matrix) -> Matrix {
    let mut d = d_out.clone();
    for (g, &x) in d.data_mut().iter_mut().zip(input.data()) {
        if x <= 0.0 {
            *g = 0.0;
        }
    }
    d
}

/// Inverted-dropout mask: each entry is 0 or `1 / (1 - rate)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask(pub Vec<f64>);

pub fn check_dropout_rate(rate: f64) -> Result<()> {
    if (0.0..1.0).contains(&rate) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "dropout rate must lie in [0, 1), got {rate}"
        )))
    }
}

/// Drops units in train mode; identity in eval mode or at rate 0.
pub fn dropout_forward(
    x: &Matrix,
    rate: f64,
    phase: Phase,
    rng: &mut Rng,
) -> Result<(Matrix, Option<DropoutMask>)> {
    check_dropout_rate(rate)?;
    if phase == Phase::Eval || rate == 0.0 {
        return Ok((x.clone(), None));
    }
    let keep = 1.0 - rate;
    let scale = 1.0 / keep;
    let mask: Vec<f64> = (0..x.data().len())
        .map(|_| if rng.random::<f64>() < keep { scale } else { 0.0 })
        .collect();
    let mut out = x.clone();
    for (v, m) in out.data_mut().iter_mut().zip(&mask) {
        *v *= m;
    }
    Ok((out, Some(DropoutMask(mask))))
}

pub fn dropout_backward(mask: Option<&DropoutMask>, d_out: &Matrix) -> Matrix {
    let mut d = d_out.clone();
    if let Some(DropoutMask(mask)) = mask {
        for (g, m) in d.data_mut().iter_mut().zip(mask) {
            *g *= m;
        }
    }
    d
}
