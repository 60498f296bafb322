//! Diagonal Gaussian heads: log-std bounding and negative log-likelihood.

use super::real::Real;
use crate::error::{check_len, Error, Result};

pub const HALF_LOG_2PI: f64 = 0.918_938_533_204_672_7;

/// Range the log standard deviation is squashed into.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogStdBounds {
    pub min: f64,
    pub max: f64,
}

impl Default for LogStdBounds {
    fn default() -> Self {
        Self {
            min: -10.0,
            max: 2.0,
        }
    }
}

impl LogStdBounds {
    /// Smooth clamp `min + softplus(max - softplus(max - x) - min)`, landing
    /// in `[min, max]` and differentiable inside the range so gradient
    /// oracles see no kinks.
    #[inline]
    pub fn apply<T: Real>(&self, raw: T) -> T {
        let max = T::from_f64(self.max);
        let min = T::from_f64(self.min);
        let upper = max - (max - raw).softplus();
        let out = min + (upper - min).softplus();
        // The composition overshoots `max` by at most e^-(max-min) far above
        // the range, where its slope is already ~0.
        if out.value() > self.max {
            max
        } else {
            out
        }
    }

    /// Returns the bounded value and its derivative with respect to `raw`.
    #[inline]
    pub fn apply_with_grad<T: Real>(&self, raw: T) -> (T, T) {
        let max = T::from_f64(self.max);
        let min = T::from_f64(self.min);
        let upper = max - (max - raw).softplus();
        let out = min + (upper - min).softplus();
        if out.value() > self.max {
            return (max, T::zero());
        }
        let d = (max - raw).sigmoid() * (upper - min).sigmoid();
        (out, d)
    }
}

/// Mean and (bounded) log standard deviation of a diagonal Gaussian.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianOutput {
    pub mean: Vec<f64>,
    pub log_std: Vec<f64>,
}

impl GaussianOutput {
    /// Build from raw network outputs, bounding the log-std.
    pub fn from_raw(mean: Vec<f64>, raw_log_std: &[f64], bounds: LogStdBounds) -> Result<Self> {
        check_len("gaussian log_std", mean.len(), raw_log_std.len())?;
        let log_std = raw_log_std.iter().map(|&r| bounds.apply(r)).collect();
        Ok(Self { mean, log_std })
    }
}

/// `Σ_i log σ_i + ½ log 2π + ½ ((t_i − μ_i) / σ_i)²`.
pub fn gaussian_nll(out: &GaussianOutput, target: &[f64]) -> Result<f64> {
    check_len("gaussian target", out.mean.len(), target.len())?;
    check_len("gaussian log_std", out.mean.len(), out.log_std.len())?;
    let mut total = 0.0;
    for ((&m, &ls), &t) in out.mean.iter().zip(&out.log_std).zip(target) {
        if !(m.is_finite() && ls.is_finite() && t.is_finite()) {
            return Err(Error::NonFinite {
                what: "gaussian_nll input",
                step: None,
            });
        }
        let z = (t - m) * (-ls).exp();
        total += ls + HALF_LOG_2PI + 0.5 * z * z;
    }
    Ok(total)
}

/// NLL of one row of raw head outputs together with its gradient.
///
/// `raw` holds `dim` means followed by `dim` raw log-stds. Gradients are
/// written to `d_raw` (same layout) scaled by `weight`; the returned loss is
/// unweighted.
#[inline]
pub(crate) fn nll_row<T: Real>(
    raw: &[T],
    target: &[T],
    bounds: LogStdBounds,
    weight: f64,
    d_raw: &mut [T],
) -> T {
    let dim = target.len();
    let mut total = T::zero();
    let w = T::from_f64(weight);
    for i in 0..dim {
        let mean = raw[i];
        let (ls, dls) = bounds.apply_with_grad(raw[dim + i]);
        let inv_std = (-ls).exp();
        let z = (target[i] - mean) * inv_std;
        total += ls + T::from_f64(HALF_LOG_2PI) + T::from_f64(0.5) * z * z;
        // d/dmean = -(t-m)/σ² ; d/dls = 1 - z²
        d_raw[i] = -(z * inv_std) * w;
        d_raw[dim + i] = (T::one() - z * z) * dls * w;
    }
    total
}
