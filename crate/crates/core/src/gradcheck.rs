//! Central finite-difference check of the analytic FLR gradient.

use crate::loss::{flr_loss, flr_loss_and_grad, Sample};
use crate::mlp::ModelParams;
use crate::Result;

/// Agreement between the analytic gradient and its central difference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdReport {
    /// Largest entrywise `|a - b| / max(|a|, |b|, 1e-8)`.
    pub max_entry: f64,
    /// `||a - b||_2 / max(||a||_2, ||b||_2, 1e-12)`.
    pub norm: f64,
}

/// Largest entrywise relative error between the analytic gradient of the
/// mean FLR loss and its central difference with step `step`.
///
/// Relative error is `|a - b| / max(|a|, |b|, 1e-8)`. Entries far below the
/// difference quotient's roundoff (about `eps * |L| / step`) dominate this
/// measure; [`fd_report`] also gives the vector-norm version.
pub fn fd_check(params: &ModelParams, batch: &[Sample<'_>], lambda: f64, step: f64) -> Result<f64> {
    Ok(fd_report(params, batch, lambda, step)?.max_entry)
}

/// Both the entrywise and the norm-wise relative error.
pub fn fd_report(params: &ModelParams, batch: &[Sample<'_>], lambda: f64, step: f64) -> Result<FdReport> {
    let analytic = flr_loss_and_grad(params, batch, lambda)?.grad;
    let mut probe = params.clone();
    let mut worst = 0.0f64;
    let (mut diff2, mut a2, mut n2) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..params.len() {
        let original = probe.values()[i];
        probe.values_mut()[i] = original + step;
        let plus = flr_loss(&probe, batch, lambda)?;
        probe.values_mut()[i] = original - step;
        let minus = flr_loss(&probe, batch, lambda)?;
        probe.values_mut()[i] = original;
        let numeric = (plus - minus) / (2.0 * step);
        let a = analytic.values()[i];
        let denom = a.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((a - numeric).abs() / denom);
        diff2 += (a - numeric) * (a - numeric);
        a2 += a * a;
        n2 += numeric * numeric;
    }
    let norm = libm::sqrt(diff2) / libm::sqrt(a2.max(n2)).max(1e-12);
    Ok(FdReport { max_entry: worst, norm })
}
