//! Finite-difference verification of tape gradients.

use super::tape::{Tape, Var};
use super::tensor::{AdError, AdResult, Tensor};

/// Outcome of a gradient check.
#[derive(Clone, Debug)]
pub struct GradCheckReport {
    /// Max over checked coordinates of
    /// `|analytic - central| / max(1, |analytic|, |central|)`.
    pub max_rel_err: f64,
    /// Coordinates that were compared.
    pub checked: usize,
    /// Coordinates skipped because the two one-sided difference quotients
    /// disagree, i.e. a kink (relu / abs / ...) lies inside `[x-h, x+h]`.
    pub excluded: Vec<usize>,
}

/// Relative disagreement between one-sided slopes above which a coordinate
/// counts as kink-adjacent. Smooth functions land around `h * |f''|`, many
/// orders below this.
const KINK_TOL: f64 = 1e-3;

/// Compare the tape gradient of a scalar-valued `f` at `point` against
/// central differences with the given `step`, coordinate by coordinate.
pub fn grad_check_report<F>(f: F, point: &Tensor, step: f64) -> AdResult<GradCheckReport>
where
    F: for<'t> Fn(&'t Tape, Var<'t>) -> AdResult<Var<'t>>,
{
    if step <= 0.0 {
        return Err(AdError::Invalid { op: "grad_check", reason: format!("step must be positive, got {step}") });
    }
    // Analytic gradient.
    let tape = Tape::new();
    let x = tape.leaf(point.clone());
    let y = f(&tape, x)?;
    if y.numel() != 1 {
        return Err(AdError::NonScalarLoss { shape: y.shape() });
    }
    let f0 = y.item()?;
    tape.backward(y)?;
    let analytic = x.grad().unwrap_or_else(|| Tensor::zeros(point.shape()));

    let eval = |t: &Tensor| -> AdResult<f64> {
        let tape = Tape::new();
        let x = tape.constant(t.clone());
        f(&tape, x)?.item()
    };

    let mut report = GradCheckReport { max_rel_err: 0.0, checked: 0, excluded: Vec::new() };
    let mut probe = point.clone();
    for i in 0..point.numel() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + step;
        let fp = eval(&probe)?;
        probe.data_mut()[i] = orig - step;
        let fm = eval(&probe)?;
        probe.data_mut()[i] = orig;

        let s_plus = (fp - f0) / step;
        let s_minus = (f0 - fm) / step;
        let slope_scale = 1.0_f64.max(s_plus.abs()).max(s_minus.abs());
        if (s_plus - s_minus).abs() > KINK_TOL * slope_scale {
            report.excluded.push(i);
            continue;
        }
        let central = 0.5 * (s_plus + s_minus);
        let a = analytic.data()[i];
        let rel = (a - central).abs() / 1.0_f64.max(a.abs()).max(central.abs());
        report.max_rel_err = report.max_rel_err.max(rel);
        report.checked += 1;
    }
    Ok(report)
}

/// Max relative error only; see [`grad_check_report`].
pub fn grad_check<F>(f: F, point: &Tensor, step: f64) -> AdResult<f64>
where
    F: for<'t> Fn(&'t Tape, Var<'t>) -> AdResult<Var<'t>>,
{
    grad_check_report(f, point, step).map(|r| r.max_rel_err)
}
