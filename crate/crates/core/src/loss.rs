//! Softmax, cross entropy and the FLR regularizer with its analytic gradient.
//!
//! For logits `z`, `p = softmax(z)` and a fixed target `t`, the per-example
//! objective is `-log p[y] + lambda * log(1 - <p, t>)`. Its gradient with
//! respect to `z` is `p - y + lambda * g`, where
//!
//! ```text
//! g[c] = p[c] / (1 - <p, t>) * sum_r (t[r] - t[c]) * p[r]
//!      = -(p[c] * t[c] - <p, t> * p[c]) / (1 - <p, t>)
//! ```
//!
//! and backpropagation through the network turns it into a parameter
//! gradient. `t` is treated as a constant.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::mlp::{Gradient, ModelParams, Workspace};
use crate::prob::{OneHotLabel, ProbVector};
use crate::{Error, Result};

/// Lower clamp applied to a probability before taking its log.
pub const PROB_FLOOR: f64 = 1e-12;
/// Upper clamp applied to `<p, t>` before taking `log(1 - <p, t>)`.
pub const INNER_CEIL: f64 = 1.0 - 1e-12;

/// Numerically stable softmax (max subtraction).
pub fn softmax(logits: &[f64]) -> Result<ProbVector> {
    if logits.iter().any(|z| z.is_nan()) {
        return Err(Error::numeric("NaN logit"));
    }
    if logits.is_empty() {
        return Err(Error::config("softmax of an empty vector"));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::numeric(format!("non-finite logit {max}")));
    }
    let mut out: Vec<f64> = logits.iter().map(|z| libm::exp(z - max)).collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    Ok(ProbVector::from_vec_unchecked(out))
}

/// `-log p[y]` with `p[y]` floored at [`PROB_FLOOR`]; the flag reports
/// whether the floor was hit.
pub fn ce_loss_counted(p: &ProbVector, y: OneHotLabel) -> (f64, bool) {
    let py = p.as_slice()[y.class];
    let clamped = py < PROB_FLOOR;
    (-libm::log(py.max(PROB_FLOOR)), clamped)
}

/// `-log p[y]`, clamped.
pub fn ce_loss(p: &ProbVector, y: OneHotLabel) -> f64 {
    ce_loss_counted(p, y).0
}

/// `<p, t>` clamped to at most [`INNER_CEIL`], with a flag for the clamp.
pub fn clamped_inner(p: &ProbVector, t: &ProbVector) -> (f64, bool) {
    let inner = p.dot(t);
    if inner > INNER_CEIL {
        (INNER_CEIL, true)
    } else {
        (inner, false)
    }
}

/// `log(1 - <p, t>)` with the inner product clamped.
pub fn flr_regularizer(p: &ProbVector, t: &ProbVector) -> f64 {
    let (inner, _) = clamped_inner(p, t);
    libm::log(1.0 - inner)
}

/// Logit-space gradient of [`flr_regularizer`], in the
/// `p[c] / (1 - <p,t>) * sum_r (t[r] - t[c]) p[r]` form.
pub fn flr_g_term(p: &ProbVector, t: &ProbVector) -> Vec<f64> {
    let (inner, _) = clamped_inner(p, t);
    let denom = 1.0 - inner;
    let (p, t) = (p.as_slice(), t.as_slice());
    p.iter()
        .zip(t)
        .map(|(pc, tc)| {
            let s: f64 = t.iter().zip(p).map(|(tr, pr)| (tr - tc) * pr).sum();
            pc / denom * s
        })
        .collect()
}

/// The same gradient in the `-(p * t - <p,t> p) / (1 - <p,t>)` form.
pub fn flr_g_term_projected(p: &ProbVector, t: &ProbVector) -> Vec<f64> {
    let (inner, _) = clamped_inner(p, t);
    let denom = 1.0 - inner;
    p.as_slice()
        .iter()
        .zip(t.as_slice())
        .map(|(pc, tc)| -(pc * tc - inner * pc) / denom)
        .collect()
}

/// One training example as seen by the loss.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    /// Features.
    pub x: &'a [f64],
    /// Given (possibly corrupted) label.
    pub label: OneHotLabel,
    /// Regularization target; `None` means plain cross entropy.
    pub target: Option<&'a ProbVector>,
}

/// Mean loss and gradient over a minibatch.
#[derive(Debug, Clone)]
pub struct LossAndGrad {
    /// `mean CE + lambda * mean regularizer`.
    pub loss: f64,
    /// Gradient of `loss` with respect to the parameters.
    pub grad: Gradient,
    /// Number of times a log argument had to be clamped.
    pub clamp_events: usize,
}

/// Mean FLR loss and its gradient over `batch`.
///
/// Samples without a target contribute only cross entropy. With
/// `lambda == 0` the result is bit-for-bit the cross-entropy loss and
/// gradient: the regularizer enters as `err + 0 * g`, which leaves `err`
/// unchanged.
pub fn flr_loss_and_grad(params: &ModelParams, batch: &[Sample<'_>], lambda: f64) -> Result<LossAndGrad> {
    let mut ws = Workspace::new(params);
    flr_loss_and_grad_with(params, batch, lambda, &mut ws, None)
}

/// Cross-entropy loss and gradient (targets ignored).
pub fn ce_loss_and_grad(params: &ModelParams, batch: &[Sample<'_>]) -> Result<LossAndGrad> {
    let stripped: Vec<Sample<'_>> = batch.iter().map(|s| Sample { target: None, ..*s }).collect();
    flr_loss_and_grad(params, &stripped, 0.0)
}

/// [`flr_loss_and_grad`] with a caller-owned workspace. When `probs_out` is
/// given, the softmax output of every sample is pushed to it.
pub fn flr_loss_and_grad_with(
    params: &ModelParams,
    batch: &[Sample<'_>],
    lambda: f64,
    ws: &mut Workspace,
    mut probs_out: Option<&mut Vec<ProbVector>>,
) -> Result<LossAndGrad> {
    loss_and_grad_by(
        params,
        batch.len(),
        |i| (batch[i].x, batch[i].label),
        |i, p| {
            if let Some(out) = probs_out.as_deref_mut() {
                out.push(p.clone());
            }
            Ok(batch[i].target.cloned())
        },
        lambda,
        ws,
    )
}

/// Core of the loss: `target_for(i, p_i)` is called once per sample with its
/// current prediction and returns the regularization target (if any). The
/// engine uses this to refresh running averages without a second forward
/// pass.
pub(crate) fn loss_and_grad_by<'x, S, T>(
    params: &ModelParams,
    len: usize,
    sample_at: S,
    mut target_for: T,
    lambda: f64,
    ws: &mut Workspace,
) -> Result<LossAndGrad>
where
    S: Fn(usize) -> (&'x [f64], OneHotLabel),
    T: FnMut(usize, &ProbVector) -> Result<Option<ProbVector>>,
{
    if len == 0 {
        return Err(Error::config("empty minibatch"));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::config(format!("lambda must be a nonnegative real, got {lambda}")));
    }
    let classes = params.output_dim();
    let mut grad = Gradient::zeros_like(params);
    let mut err = vec![0.0; classes];
    let (mut ce_sum, mut reg_sum) = (0.0, 0.0);
    let mut clamp_events = 0;
    for i in 0..len {
        let (x, label) = sample_at(i);
        if label.classes != classes || label.class >= classes {
            return Err(Error::config("label does not match the model's class count"));
        }
        let p = softmax(params.forward_with(x, ws)?)?;
        let (ce, clamped) = ce_loss_counted(&p, label);
        ce_sum += ce;
        clamp_events += clamped as usize;
        err.copy_from_slice(p.as_slice());
        err[label.class] -= 1.0;
        if let Some(t) = target_for(i, &p)? {
            if t.len() != classes {
                return Err(Error::config("target class count does not match the model"));
            }
            let (_, clamped) = clamped_inner(&p, &t);
            clamp_events += clamped as usize;
            reg_sum += flr_regularizer(&p, &t);
            for (e, g) in err.iter_mut().zip(flr_g_term(&p, &t)) {
                *e += lambda * g;
            }
        }
        params.backward_accumulate(ws, &err, &mut grad);
    }
    let n = len as f64;
    grad.scale(1.0 / n);
    let loss = ce_sum / n + lambda * (reg_sum / n);
    if !loss.is_finite() || !grad.is_finite() {
        return Err(Error::numeric("non-finite loss or gradient"));
    }
    Ok(LossAndGrad {
        loss,
        grad,
        clamp_events,
    })
}

/// Loss only, used by the finite-difference oracle.
pub fn flr_loss(params: &ModelParams, batch: &[Sample<'_>], lambda: f64) -> Result<f64> {
    let mut ws = Workspace::new(params);
    let (mut ce_sum, mut reg_sum) = (0.0, 0.0);
    for sample in batch {
        let p = softmax(params.forward_with(sample.x, &mut ws)?)?;
        ce_sum += ce_loss(&p, sample.label);
        if let Some(t) = sample.target {
            reg_sum += flr_regularizer(&p, t);
        }
    }
    let n = batch.len() as f64;
    Ok(ce_sum / n + lambda * (reg_sum / n))
}
