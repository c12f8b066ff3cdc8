//! Out-of-sample prediction, residual variance and normal prediction intervals.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{check_len, Error, Result};
use crate::estimator::{center, FittedModel, FunctionalSample};

/// Symmetric interval `point ± z_{1-τ/2} σ̂_ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionInterval {
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    /// Confidence level `1 - τ`.
    pub level: f64,
    pub sigma_eps: f64,
}

impl PredictionInterval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, y: f64) -> bool {
        self.lower <= y && y <= self.upper
    }
}

/// `Ŷ = α̂₀ + (1/p) Σ_j α̂(t_j) x_j` for a curve sampled on the model grid.
pub fn predict(model: &FittedModel, x_new: &[f64]) -> Result<f64> {
    check_len(model.p(), x_new.len())?;
    let dot: f64 = model.alpha_hat.iter().zip(x_new).map(|(a, x)| a * x).sum();
    Ok(model.alpha0_hat + dot / model.p() as f64)
}

/// Prediction for a curve sampled on a finer midpoint grid of `N = k·p`
/// points: the integral uses the spline `α̂(t)` at the fine points.
pub fn predict_fine(model: &FittedModel, x_fine: &[f64]) -> Result<f64> {
    let count = x_fine.len();
    if count == model.p() {
        return predict(model, x_fine);
    }
    if count < model.p() || !count.is_multiple_of(model.p()) {
        return Err(Error::InvalidInput(format!(
            "curve has {count} points; expected {} or a multiple of it",
            model.p()
        )));
    }
    let denom = 2.0 * count as f64;
    let integral: f64 = x_fine
        .iter()
        .enumerate()
        .map(|(k, x)| model.alpha_at((2 * k + 1) as f64 / denom) * x)
        .sum::<f64>()
        / count as f64;
    Ok(model.alpha0_hat + integral)
}

/// `σ̂²_ε = (1/n) Σ_i (Y_i - Ȳ - (1/p) Σ_j α̂_j (X_ij - X̄_j))²` on the
/// training sample.
pub fn residual_variance(model: &FittedModel, sample: &FunctionalSample) -> Result<f64> {
    check_len(model.p(), sample.p())?;
    let design = center(sample);
    let fitted = &design.xc * &model.alpha_hat / model.p() as f64;
    let resid: DVector<f64> = &design.yc - fitted;
    Ok(resid.norm_squared() / sample.n() as f64)
}

/// Interval at level `1 - tau` around `point`.
pub fn prediction_interval(point: f64, sigma_eps: f64, tau: f64) -> Result<PredictionInterval> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidArgument(format!("tau must lie in (0, 1), got {tau}")));
    }
    if !(sigma_eps >= 0.0) {
        return Err(Error::InvalidArgument(format!("sigma must be nonnegative, got {sigma_eps}")));
    }
    let half = normal_quantile(1.0 - tau / 2.0) * sigma_eps;
    Ok(PredictionInterval {
        point,
        lower: point - half,
        upper: point + half,
        level: 1.0 - tau,
        sigma_eps,
    })
}

/// Mean squared prediction error on a test set.
pub fn eqm(predictions: &[f64], actuals: &[f64]) -> Result<f64> {
    check_len(actuals.len(), predictions.len())?;
    if actuals.is_empty() {
        return Err(Error::InvalidArgument("empty test set".into()));
    }
    let sum: f64 = predictions.iter().zip(actuals).map(|(p, a)| (a - p).powi(2)).sum();
    Ok(sum / actuals.len() as f64)
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile: Acklam's rational approximation followed by one
/// Halley correction against the erfc-based CDF.
pub fn normal_quantile(prob: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if prob.is_nan() || !(0.0..=1.0).contains(&prob) {
        return f64::NAN;
    }
    if prob == 0.0 {
        return f64::NEG_INFINITY;
    }
    if prob == 1.0 {
        return f64::INFINITY;
    }

    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let x = if prob < P_LOW {
        tail((-2.0 * prob.ln()).sqrt())
    } else if prob <= 1.0 - P_LOW {
        let q = prob - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail((-2.0 * (1.0 - prob).ln()).sqrt())
    };

    let e = normal_cdf(x) - prob;
    let u = e * (2.0 * std::f64::consts::PI).sqrt() * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}
