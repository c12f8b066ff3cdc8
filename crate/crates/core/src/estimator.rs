//! Centring, the closed-form penalised fit and the error semi-norms.
//!
//! Given centred curves `Xc` (n × p) and responses `yc`, the estimate of the
//! slope function at the grid minimises
//!
//! ```text
//! (1/n) ‖yc - (1/p) Xc a‖² + (ρ/p) aᵀ A_m a
//! ```
//!
//! whose unique solution is `α̂ = (1/n) ((1/(np)) XcᵀXc + ρ A_m)⁻¹ Xcᵀ yc`.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::smoother::SpectralSmoother;
use crate::spline::{Grid, PenaltyOperator, SplineFunction};

/// `n` curves sampled on a common equidistant grid, with scalar responses.
#[derive(Debug, Clone)]
pub struct FunctionalSample {
    grid: Grid,
    x: DMatrix<f64>,
    y: DVector<f64>,
}

impl FunctionalSample {
    pub fn new(grid: Grid, x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let (n, p) = x.shape();
        if n < 2 {
            return Err(Error::InvalidArgument(format!("need n >= 2 curves, got {n}")));
        }
        check_len(grid.p(), p)?;
        check_len(n, y.len())?;
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("sample contains non-finite values".into()));
        }
        Ok(Self { grid, x, y })
    }

    /// Build from row-major curves.
    pub fn from_rows(grid: Grid, rows: &[Vec<f64>], y: &[f64]) -> Result<Self> {
        let p = grid.p();
        for row in rows {
            check_len(p, row.len())?;
        }
        let x = DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]);
        Self::new(grid, x, DVector::from_column_slice(y))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn with_responses(&self, y: DVector<f64>) -> Result<Self> {
        Self::new(self.grid.clone(), self.x.clone(), y)
    }
}

/// Column-centred curves and centred responses.
#[derive(Debug, Clone)]
pub struct CenteredDesign {
    pub xc: DMatrix<f64>,
    pub yc: DVector<f64>,
    pub x_mean: DVector<f64>,
    pub y_mean: f64,
}

impl CenteredDesign {
    pub fn n(&self) -> usize {
        self.xc.nrows()
    }

    pub fn p(&self) -> usize {
        self.xc.ncols()
    }
}

/// Subtract the mean curve and the mean response.
pub fn center(sample: &FunctionalSample) -> CenteredDesign {
    let x_mean = sample.x.row_mean().transpose();
    let y_mean = sample.y.mean();
    let mut xc = sample.x.clone();
    for (mut col, mu) in xc.column_iter_mut().zip(x_mean.iter()) {
        col.add_scalar_mut(-mu);
    }
    let yc = sample.y.add_scalar(-y_mean);
    CenteredDesign {
        xc,
        yc,
        x_mean,
        y_mean,
    }
}

/// Conditions detected during a fit that do not prevent a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum FitWarning {
    /// All centred curves are zero; the estimate is identically zero.
    DegenerateDesign,
    /// The errors-in-variables correction broke positive definiteness and
    /// the uncorrected estimate was returned instead.
    CorrectionFallback,
}

/// Estimated slope function, intercept and the quantities needed to predict.
#[derive(Debug, Clone)]
pub struct FittedModel {
    pub alpha_hat: DVector<f64>,
    pub spline: SplineFunction,
    pub alpha0_hat: f64,
    pub m: usize,
    pub rho: f64,
    pub x_mean: DVector<f64>,
    pub y_mean: f64,
    pub sigma_eps_hat_sq: Option<f64>,
    pub warnings: Vec<FitWarning>,
}

impl FittedModel {
    /// Assemble a model from grid values; the intercept is
    /// `ȳ - (1/p) Σ_j α̂_j x̄_j`.
    pub fn from_parts(
        op: &PenaltyOperator,
        alpha_hat: DVector<f64>,
        rho: f64,
        x_mean: DVector<f64>,
        y_mean: f64,
    ) -> Result<Self> {
        check_len(op.p(), alpha_hat.len())?;
        check_len(op.p(), x_mean.len())?;
        let spline = op.interpolate(alpha_hat.as_slice())?;
        let alpha0_hat = y_mean - alpha_hat.dot(&x_mean) / op.p() as f64;
        Ok(Self {
            alpha_hat,
            spline,
            alpha0_hat,
            m: op.m(),
            rho,
            x_mean,
            y_mean,
            sigma_eps_hat_sq: None,
            warnings: Vec::new(),
        })
    }

    pub fn p(&self) -> usize {
        self.alpha_hat.len()
    }

    /// `α̂(t)` anywhere on `[0, 1]`.
    pub fn alpha_at(&self, t: f64) -> f64 {
        self.spline.eval(t)
    }
}

pub(crate) fn check_rho(rho: f64) -> Result<()> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::InvalidArgument(format!("rho must be positive and finite, got {rho}")));
    }
    Ok(())
}

pub(crate) fn check_grid(sample_p: usize, op: &PenaltyOperator) -> Result<()> {
    check_len(op.p(), sample_p)
}

/// Closed-form penalised fit for one `ρ`.
pub fn fit(sample: &FunctionalSample, op: &PenaltyOperator, rho: f64) -> Result<FittedModel> {
    check_rho(rho)?;
    check_grid(sample.p(), op)?;
    let design = center(sample);
    let smoother = SpectralSmoother::new(&design.xc, op, 0.0);
    fit_with(&design, &smoother, op, rho)
}

pub(crate) fn fit_with(
    design: &CenteredDesign,
    smoother: &SpectralSmoother,
    op: &PenaltyOperator,
    rho: f64,
) -> Result<FittedModel> {
    smoother.check_pivots(rho)?;
    let g = smoother.project(&design.yc);
    let alpha = smoother.coefficients(&g, rho);
    let mut model = FittedModel::from_parts(op, alpha, rho, design.x_mean.clone(), design.y_mean)?;
    if design.xc.iter().all(|&v| v == 0.0) {
        model.warnings.push(FitWarning::DegenerateDesign);
    }
    Ok(model)
}

/// A spectral decomposition of one design that can be refitted at any `ρ`.
#[derive(Debug, Clone)]
pub struct FitPath<'a> {
    op: &'a PenaltyOperator,
    design: CenteredDesign,
    smoother: SpectralSmoother,
}

impl<'a> FitPath<'a> {
    pub fn new(sample: &FunctionalSample, op: &'a PenaltyOperator) -> Result<Self> {
        check_grid(sample.p(), op)?;
        let design = center(sample);
        let smoother = SpectralSmoother::new(&design.xc, op, 0.0);
        Ok(Self {
            op,
            design,
            smoother,
        })
    }

    pub fn design(&self) -> &CenteredDesign {
        &self.design
    }

    pub fn fit(&self, rho: f64) -> Result<FittedModel> {
        check_rho(rho)?;
        fit_with(&self.design, &self.smoother, self.op, rho)
    }

    /// `α̂(ρ)` at the grid without building the spline.
    pub fn alpha(&self, rho: f64) -> Result<DVector<f64>> {
        check_rho(rho)?;
        self.smoother.check_pivots(rho)?;
        let g = self.smoother.project(&self.design.yc);
        Ok(self.smoother.coefficients(&g, rho))
    }
}

/// `‖u‖²_{Γ_{n,p}} = (1/n) Σ_i [(1/p) Σ_j u_j Xc_ij]²`.
pub fn seminorm_gamma_np(u: &[f64], design: &CenteredDesign) -> Result<f64> {
    check_len(design.p(), u.len())?;
    let u = DVector::from_column_slice(u);
    let proj = &design.xc * u / design.p() as f64;
    Ok(proj.norm_squared() / design.n() as f64)
}

/// Midpoint grid of `count` points used for quadrature on `[0, 1]`.
pub fn midpoint_grid(count: usize) -> Vec<f64> {
    let denom = 2.0 * count as f64;
    (1..=count).map(|k| (2 * k - 1) as f64 / denom).collect()
}

/// `‖u‖²_{Γ_n} = (1/n) Σ_i ⟨X_i - X̄, u⟩²`.
///
/// `u` and the rows of `curves_fine` are values on the same midpoint grid of
/// `N` points (see [`midpoint_grid`]); inner products use the midpoint rule.
/// The rows are centred here.
pub fn seminorm_gamma_n(u: &[f64], curves_fine: &DMatrix<f64>) -> Result<f64> {
    let (n, count) = curves_fine.shape();
    check_len(count, u.len())?;
    let mean = curves_fine.row_mean();
    let u = DVector::from_column_slice(u);
    let total: f64 = curves_fine
        .row_iter()
        .map(|row| {
            let ip: f64 = row
                .iter()
                .zip(mean.iter())
                .zip(u.iter())
                .map(|((x, mu), u)| (x - mu) * u)
                .sum::<f64>()
                / count as f64;
            ip * ip
        })
        .sum();
    Ok(total / n as f64)
}

/// One eigenpair of a covariance operator, the eigenfunction sampled on a
/// midpoint grid.
#[derive(Debug, Clone)]
pub struct SpectralMode {
    pub lambda: f64,
    pub zeta: Vec<f64>,
}

/// `‖u‖²_Γ = Σ_r λ_r ⟨ζ_r, u⟩²`, truncated to the supplied modes.
pub fn seminorm_gamma_true(u: &[f64], spectrum: &[SpectralMode]) -> Result<f64> {
    let count = u.len() as f64;
    let mut total = 0.0;
    for mode in spectrum {
        if !(mode.lambda >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "eigenvalues must be nonnegative, got {}",
                mode.lambda
            )));
        }
        check_len(u.len(), mode.zeta.len())?;
        let ip: f64 = mode.zeta.iter().zip(u).map(|(z, u)| z * u).sum::<f64>() / count;
        total += mode.lambda * ip * ip;
    }
    Ok(total)
}
