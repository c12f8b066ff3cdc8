//! Generalised cross-validation for the smoothing parameter and spline order.
//!
//! `GCV_m(ρ) = (1/n)‖yc - H_ρ yc‖² / (1 - Tr(H_ρ)/n)²`, where `H_ρ` maps the
//! centred responses to the fitted values `(1/p) Xc α̂(ρ)`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{check_grid, check_rho, CenteredDesign};
use crate::smoother::SpectralSmoother;
use crate::spline::PenaltyOperator;

/// Smallest admissible value of `1 - Tr(H_ρ)/n`.
pub const DENOMINATOR_GUARD: f64 = 1e-8;

/// Number of points in the default `ρ` grid.
pub const DEFAULT_GRID_POINTS: usize = 40;

/// Default grid bounds, relative to the largest whitened design eigenvalue.
pub const DEFAULT_GRID_RANGE: (f64, f64) = (1e-8, 1e2);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GcvPoint {
    pub m: usize,
    pub rho: f64,
    pub score: f64,
    pub trace: f64,
}

/// A grid point that was skipped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcvWarning {
    pub m: usize,
    pub rho: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcvResult {
    pub rho_grid: Vec<f64>,
    /// Valid evaluations, in grid order (and by `m` for joint selection).
    pub points: Vec<GcvPoint>,
    pub best_rho: f64,
    pub best_m: usize,
    pub warnings: Vec<GcvWarning>,
}

impl GcvResult {
    pub fn best(&self) -> GcvPoint {
        *self
            .points
            .iter()
            .find(|p| p.rho == self.best_rho && p.m == self.best_m)
            .expect("best point is one of the evaluated points")
    }

    pub fn scores(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.score).collect()
    }

    pub fn traces(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.trace).collect()
    }
}

/// Cached spectral decomposition for evaluating GCV at many `ρ`.
#[derive(Debug, Clone)]
pub struct GcvPath {
    m: usize,
    n: usize,
    yc: DVector<f64>,
    g: DVector<f64>,
    smoother: SpectralSmoother,
}

impl GcvPath {
    pub fn new(design: &CenteredDesign, op: &PenaltyOperator) -> Result<Self> {
        Self::with_correction(design, op, 0.0)
    }

    /// GCV path where `(1/(np))XcᵀXc - correction·I` replaces the design
    /// second-moment matrix inside the inverse. `correction` is expressed in
    /// the `p`-scaled system, i.e. `σ̂²_δ / p`.
    pub(crate) fn with_correction(design: &CenteredDesign, op: &PenaltyOperator, correction: f64) -> Result<Self> {
        check_grid(design.p(), op)?;
        let smoother = SpectralSmoother::new(&design.xc, op, correction);
        let g = smoother.project(&design.yc);
        Ok(Self {
            m: op.m(),
            n: design.n(),
            yc: design.yc.clone(),
            g,
            smoother,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Largest whitened design eigenvalue, the scale of the default grid.
    pub fn scale(&self) -> f64 {
        self.smoother.max_eigenvalue().max(f64::MIN_POSITIVE)
    }

    pub fn trace(&self, rho: f64) -> f64 {
        self.smoother.trace(rho)
    }

    /// `(score, trace)` at `ρ`.
    pub fn score(&self, rho: f64) -> Result<(f64, f64)> {
        check_rho(rho)?;
        self.smoother
            .check_pivots(rho)
            .map_err(|e| Error::DegenerateSmoother {
                rho,
                reason: e.to_string(),
            })?;
        let trace = self.smoother.trace(rho);
        let denom = 1.0 - trace / self.n as f64;
        if !(denom > DENOMINATOR_GUARD) {
            return Err(Error::DegenerateSmoother {
                rho,
                reason: format!("1 - Tr(H)/n = {denom:.3e} is below the guard {DENOMINATOR_GUARD:.0e}"),
            });
        }
        let fitted = self.smoother.fitted(&self.g, rho);
        let rss = (&self.yc - fitted).norm_squared() / self.n as f64;
        Ok((rss / (denom * denom), trace))
    }

    /// Default grid: log-spaced over `[1e-8, 1e2]` times [`Self::scale`].
    pub fn default_grid(&self) -> Vec<f64> {
        let s = self.scale();
        log_grid(DEFAULT_GRID_RANGE.0 * s, DEFAULT_GRID_RANGE.1 * s, DEFAULT_GRID_POINTS)
    }

    fn sweep(&self, grid: &[f64], points: &mut Vec<GcvPoint>, warnings: &mut Vec<GcvWarning>) -> Result<()> {
        for &rho in grid {
            match self.score(rho) {
                Ok((score, trace)) => points.push(GcvPoint {
                    m: self.m,
                    rho,
                    score,
                    trace,
                }),
                Err(e @ Error::DegenerateSmoother { .. }) => warnings.push(GcvWarning {
                    m: self.m,
                    rho,
                    reason: e.to_string(),
                }),
                Err(e) => return Err(e),
            }
        }
        Ok(())
    }
}

/// `n` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..count)
                .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
                .collect()
        }
    }
}

/// GCV score and `Tr(H_ρ)` at a single `ρ`.
pub fn gcv_score(design: &CenteredDesign, op: &PenaltyOperator, rho: f64) -> Result<(f64, f64)> {
    GcvPath::new(design, op)?.score(rho)
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("rho grid is empty".into()));
    }
    for &rho in grid {
        check_rho(rho)?;
    }
    Ok(())
}

/// Minimum score; ties go to larger `ρ`, then smaller `m`.
fn choose(points: &[GcvPoint]) -> Option<GcvPoint> {
    let mut best: Option<GcvPoint> = None;
    for &pt in points {
        best = match best {
            None => Some(pt),
            Some(b) => {
                let better = pt.score < b.score
                    || (pt.score == b.score && (pt.rho > b.rho || (pt.rho == b.rho && pt.m < b.m)));
                Some(if better { pt } else { b })
            }
        };
    }
    best
}

pub(crate) fn select_on_paths(paths: &[GcvPath], rho_grid: &[f64]) -> Result<GcvResult> {
    validate_grid(rho_grid)?;
    let mut points = Vec::new();
    let mut warnings = Vec::new();
    for path in paths {
        path.sweep(rho_grid, &mut points, &mut warnings)?;
    }
    let best = choose(&points).ok_or(Error::NoValidRho)?;
    Ok(GcvResult {
        rho_grid: rho_grid.to_vec(),
        points,
        best_rho: best.rho,
        best_m: best.m,
        warnings,
    })
}

/// Minimise GCV over `rho_grid` for a fixed order.
pub fn select_rho(design: &CenteredDesign, op: &PenaltyOperator, rho_grid: &[f64]) -> Result<GcvResult> {
    select_on_paths(&[GcvPath::new(design, op)?], rho_grid)
}

/// Minimise GCV jointly over `rho_grid` and the orders of `ops`.
pub fn select_rho_and_m(design: &CenteredDesign, ops: &[PenaltyOperator], rho_grid: &[f64]) -> Result<GcvResult> {
    if ops.is_empty() {
        return Err(Error::InvalidArgument("no candidate orders".into()));
    }
    if 2 * ops.len() > design.n() {
        return Err(Error::InvalidArgument(format!(
            "{} candidate orders exceed n/2 = {}",
            ops.len(),
            design.n() / 2
        )));
    }
    let paths = ops
        .iter()
        .map(|op| GcvPath::new(design, op))
        .collect::<Result<Vec<_>>>()?;
    select_on_paths(&paths, rho_grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(m: usize, rho: f64, score: f64) -> GcvPoint {
        GcvPoint { m, rho, score, trace: 0.0 }
    }

    #[test]
    fn tie_breaking() {
        let best = choose(&[pt(1, 0.1, 1.0), pt(1, 1.0, 1.0), pt(2, 1.0, 1.0), pt(2, 0.01, 2.0)]).unwrap();
        assert_eq!((best.m, best.rho), (1, 1.0));
        let best = choose(&[pt(2, 1.0, 1.0), pt(1, 1.0, 1.0)]).unwrap();
        assert_eq!(best.m, 1);
        let best = choose(&[pt(1, 0.1, 3.0), pt(1, 0.2, 2.0), pt(1, 0.3, 1.0)]).unwrap();
        assert_eq!(best.rho, 0.3);
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_grid(1e-3, 10.0, 5);
        assert!((g[0] - 1e-3).abs() < 1e-18);
        assert!((g[4] - 10.0).abs() < 1e-12);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(log_grid(2.0, 3.0, 1), vec![2.0]);
    }

    #[test]
    fn empty_grid_rejected() {
        assert!(validate_grid(&[]).is_err());
        assert!(validate_grid(&[1.0, -2.0]).is_err());
    }
}
