//! Predictor curves observed with additive noise, `W_i(t_j) = X_i(t_j) + δ_ij`.
//!
//! Noise inflates the design second-moment matrix by `σ²_δ/p²·I`, so the
//! corrected estimator subtracts an estimate of that term before solving:
//!
//! ```text
//! α̂_W = (1/(np)) ((1/(np²)) WcᵀWc + (ρ/p) A_m - (σ̂²_δ/p²) I)⁻¹ Wcᵀ yc
//! ```
//!
//! The noise variance is estimated from second differences along each curve.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::estimator::{center, check_grid, check_rho, fit_with, CenteredDesign, FitWarning, FittedModel, FunctionalSample};
use crate::selection::{select_on_paths, GcvPath, GcvResult};
use crate::smoother::SpectralSmoother;
use crate::spline::PenaltyOperator;

/// Output of [`fit_corrected`].
#[derive(Debug, Clone)]
pub struct NoisyFitReport {
    pub sigma_delta_hat_sq: f64,
    /// Smallest pivot of the corrected system in spectral coordinates.
    pub min_pivot: f64,
    /// `false` when the correction broke positive definiteness and the
    /// uncorrected fit was returned.
    pub corrected: bool,
    pub model: FittedModel,
}

/// `σ̂²_δ = (1/n) Σ_i (1/(6(p-2))) Σ_{j=2}^{p-1} (W_{i,j-1} - 2W_{ij} + W_{i,j+1})²`.
pub fn estimate_noise_variance(w: &DMatrix<f64>) -> Result<f64> {
    let (n, p) = w.shape();
    if p < 3 {
        return Err(Error::InsufficientGrid { p });
    }
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one curve".into()));
    }
    let total: f64 = w
        .row_iter()
        .map(|row| {
            (1..p - 1)
                .map(|j| {
                    let d = row[j - 1] - row[j] + row[j + 1] - row[j];
                    d * d
                })
                .sum::<f64>()
                / (6.0 * (p - 2) as f64)
        })
        .sum();
    Ok(total / n as f64)
}

fn resolve_sigma(w: &DMatrix<f64>, sigma_override: Option<f64>) -> Result<f64> {
    match sigma_override {
        Some(s) if !(s >= 0.0 && s.is_finite()) => Err(Error::InvalidArgument(format!(
            "noise variance must be nonnegative, got {s}"
        ))),
        Some(s) => Ok(s),
        None => estimate_noise_variance(w),
    }
}

/// Bias-corrected fit on noisy curves.
///
/// `sigma_override` replaces the second-difference estimate of `σ²_δ` (a
/// variance, not a standard deviation). When the corrected system is not
/// positive definite the uncorrected fit is returned with
/// [`FitWarning::CorrectionFallback`].
pub fn fit_corrected(
    sample_w: &FunctionalSample,
    op: &PenaltyOperator,
    rho: f64,
    sigma_override: Option<f64>,
) -> Result<NoisyFitReport> {
    check_rho(rho)?;
    check_grid(sample_w.p(), op)?;
    let sigma_sq = resolve_sigma(sample_w.x(), sigma_override)?;
    let design = center(sample_w);
    let p = sample_w.p() as f64;
    let corrected = SpectralSmoother::new(&design.xc, op, sigma_sq / p);
    let min_pivot = corrected.min_pivot(rho);
    match fit_with(&design, &corrected, op, rho) {
        Ok(model) => Ok(NoisyFitReport {
            sigma_delta_hat_sq: sigma_sq,
            min_pivot,
            corrected: true,
            model,
        }),
        Err(Error::Conditioning { .. }) => {
            let plain = SpectralSmoother::new(&design.xc, op, 0.0);
            let mut model = fit_with(&design, &plain, op, rho)?;
            model.warnings.push(FitWarning::CorrectionFallback);
            Ok(NoisyFitReport {
                sigma_delta_hat_sq: sigma_sq,
                min_pivot,
                corrected: false,
                model,
            })
        }
        Err(e) => Err(e),
    }
}

/// GCV with `(1/(np²)) WcᵀWc - (σ²_δ/p²) I` in place of the design matrix
/// inside the inverse; the outer factors of the smoother keep `Wc`.
pub fn gcv_score_corrected(
    design_w: &CenteredDesign,
    op: &PenaltyOperator,
    rho: f64,
    sigma_delta_sq: f64,
) -> Result<(f64, f64)> {
    corrected_path(design_w, op, sigma_delta_sq)?.score(rho)
}

fn corrected_path(design_w: &CenteredDesign, op: &PenaltyOperator, sigma_delta_sq: f64) -> Result<GcvPath> {
    if !(sigma_delta_sq >= 0.0 && sigma_delta_sq.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "noise variance must be nonnegative, got {sigma_delta_sq}"
        )));
    }
    GcvPath::with_correction(design_w, op, sigma_delta_sq / design_w.p() as f64)
}

/// Minimise the corrected GCV criterion over `rho_grid`. Grid points where
/// the corrected system is not positive definite are skipped with a warning.
pub fn select_rho_corrected(
    design_w: &CenteredDesign,
    op: &PenaltyOperator,
    rho_grid: &[f64],
    sigma_delta_sq: f64,
) -> Result<GcvResult> {
    select_on_paths(&[corrected_path(design_w, op, sigma_delta_sq)?], rho_grid)
}

/// Default `ρ` grid for the corrected criterion, built on the uncorrected
/// design scale so that both criteria share one grid.
pub fn default_grid(design_w: &CenteredDesign, op: &PenaltyOperator) -> Result<Vec<f64>> {
    Ok(GcvPath::new(design_w, op)?.default_grid())
}
