/// Anything with parameters and a scalar loss over some batch type.
pub trait Differentiable {
    type Batch: ?Sized;

    fn loss(&self, batch: &Self::Batch) -> f64;

    /// Loss plus one gradient tensor per parameter tensor, in
    /// [`Differentiable::parameters_mut`] order.
    fn loss_and_gradients(&self, batch: &Self::Batch) -> (f64, Vec<Vec<f64>>);

    fn parameters_mut(&mut self) -> Vec<&mut [f64]>;
}

/// Gradient magnitudes below this are compared in absolute terms.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

/// `|a - n| / max(|a|, |n|, REL_ERROR_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// (tensor index, element index) of the worst relative error.
    pub worst: (usize, usize),
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.tolerance
    }
}

/// Compares analytic gradients with central differences for every parameter.
pub fn grad_check<N: Differentiable>(
    net: &mut N,
    batch: &N::Batch,
    step: f64,
    tolerance: f64,
) -> GradCheckReport {
    check_with(net, batch, tolerance, |net, t, k| {
        let plus = shifted_loss(net, batch, t, k, step);
        let minus = shifted_loss(net, batch, t, k, -step);
        (plus - minus) / (2.0 * step)
    })
}

/// Like [`grad_check`] with the fourth-order central stencil
/// `(-L(+2h) + 8L(+h) - 8L(-h) + L(-2h)) / 12h`. Its truncation error is
/// small enough to use a larger step, which keeps loss roundoff from
/// dominating parameters whose gradient is exactly zero.
pub fn grad_check_fourth_order<N: Differentiable>(
    net: &mut N,
    batch: &N::Batch,
    step: f64,
    tolerance: f64,
) -> GradCheckReport {
    check_with(net, batch, tolerance, |net, t, k| {
        let l = |net: &mut N, h: f64| shifted_loss(net, batch, t, k, h);
        (-l(net, 2.0 * step) + 8.0 * l(net, step) - 8.0 * l(net, -step) + l(net, -2.0 * step)) / (12.0 * step)
    })
}

fn shifted_loss<N: Differentiable>(net: &mut N, batch: &N::Batch, t: usize, k: usize, h: f64) -> f64 {
    let original = net.parameters_mut()[t][k];
    net.parameters_mut()[t][k] = original + h;
    let loss = net.loss(batch);
    net.parameters_mut()[t][k] = original;
    loss
}

fn check_with<N: Differentiable>(
    net: &mut N,
    batch: &N::Batch,
    tolerance: f64,
    numeric: impl Fn(&mut N, usize, usize) -> f64,
) -> GradCheckReport {
    let (_, analytic) = net.loss_and_gradients(batch);
    let mut report = GradCheckReport {
        checked: 0,
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        worst: (0, 0),
        tolerance,
    };
    for (t, grad) in analytic.iter().enumerate() {
        for (k, &a) in grad.iter().enumerate() {
            let n = numeric(net, t, k);
            let rel = relative_error(a, n);
            report.checked += 1;
            report.max_abs_error = report.max_abs_error.max((a - n).abs());
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = (t, k);
            }
        }
    }
    report
}
