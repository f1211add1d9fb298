use rand::Rng as _;

use super::{ArchitectureSpec, CheckBatch, Model, ModelConfig};
use crate::error::{Error, Result};
use crate::mode::TravelMode;
use crate::nn::{grad_check_fourth_order, one_hot, GradCheckReport, Matrix, Phase};
use crate::seed;

pub const GRADCHECK_STEP: f64 = 1e-4;
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;
const BATCH_ROWS: usize = 6;
const MAX_DRAWS: u64 = 64;

/// Moves biases, BN shifts and scales and running statistics off their
/// initial values so no ReLU input sits exactly on the kink at zero and
/// eval-mode BN is not an identity map.
pub fn perturb_for_check(model: &mut Model, seed: u64) {
    let mut rng = seed::rng(seed);
    for (name, t) in model.named_tensors_mut() {
        for v in t.iter_mut() {
            if name.ends_with("bias") || name.ends_with("beta") || name.ends_with("running_mean") {
                *v += rng.random_range(-0.1..0.1);
            } else if name.ends_with("gamma") || name.ends_with("running_var") {
                *v *= rng.random_range(0.8..1.2);
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckCase {
    pub config: ModelConfig,
    pub arch: ArchitectureSpec,
    pub phase: Phase,
    pub report: GradCheckReport,
}

/// Fourth-order central-difference check of one model on a random
/// normalized batch.
pub fn gradcheck_case(config: ModelConfig, arch: ArchitectureSpec, phase: Phase, seed: u64) -> Result<GradCheckReport> {
    let mut model = Model::build(config, arch, seed)?;
    perturb_for_check(&mut model, seed::derive_seed(seed, 1));
    let labels: Vec<TravelMode> = (0..BATCH_ROWS).map(|i| TravelMode::ALL[i % 3]).collect();
    let width = model.input_width();
    for draw in 0..MAX_DRAWS {
        let mut rng = seed::rng(seed::derive_seed(seed, 2 + draw));
        let x = Matrix::from_vec(
            BATCH_ROWS,
            width,
            (0..BATCH_ROWS * width).map(|_| rng.random_range(0.0..1.0)).collect(),
        )?;
        if !kink_free(&mut model, &x, phase)? {
            continue;
        }
        let batch = CheckBatch {
            x,
            targets: one_hot(&labels),
            phase,
            dropout_seed: None,
        };
        return Ok(grad_check_fourth_order(&mut model, &batch, GRADCHECK_STEP, GRADCHECK_TOLERANCE));
    }
    Err(Error::InvalidArgument(format!(
        "no batch keeps every ReLU off its kink for {config} {}",
        arch.name()
    )))
}

/// True when shifting any single parameter by the outermost stencil offset
/// leaves the sign of every ReLU input unchanged.
fn kink_free(model: &mut Model, x: &Matrix, phase: Phase) -> Result<bool> {
    let base = model.forward(x, phase, None)?.1.relu_pattern();
    let sizes = model.parameter_sizes();
    for (t, &len) in sizes.iter().enumerate() {
        for k in 0..len {
            let original = model.parameters_mut()[t][k];
            for h in [2.0 * GRADCHECK_STEP, -2.0 * GRADCHECK_STEP] {
                model.parameters_mut()[t][k] = original + h;
                let same = model.forward(x, phase, None)?.1.relu_pattern() == base;
                model.parameters_mut()[t][k] = original;
                if !same {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// Every configuration at two blocks of two and of three layers, checked
/// in eval mode; configurations without dropout are also checked in train
/// mode, where BN uses batch statistics.
pub fn gradcheck_suite(seed: u64) -> Result<Vec<GradCheckCase>> {
    let mut out = Vec::new();
    for config in ModelConfig::grid() {
        for lpb in [2, 3] {
            let arch = ArchitectureSpec::from_depth(2 * lpb + 2, lpb)?;
            let phases: &[Phase] = if config.use_dropout { &[Phase::Eval] } else { &[Phase::Eval, Phase::Train] };
            for &phase in phases {
                let case_seed = seed::derive_seed(seed, seed::name_key(&format!("{config}/{}/{phase:?}", arch.name())));
                out.push(GradCheckCase {
                    config,
                    arch,
                    phase,
                    report: gradcheck_case(config, arch, phase, case_seed)?,
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_case_passes() {
        let r = gradcheck_case("b10".parse().unwrap(), ArchitectureSpec::from_depth(6, 2).unwrap(), Phase::Train, 3).unwrap();
        assert!(r.passed(), "{r:?}");
        assert!(r.checked > 0);
    }
}
