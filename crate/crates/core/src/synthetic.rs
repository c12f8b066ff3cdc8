//! Synthetic functional data and Monte Carlo studies.
//!
//! Curves are simulated on a fine midpoint grid that nests the estimation
//! grid (an odd refinement factor keeps every coarse point on the fine grid),
//! so exact-in-the-limit functionals such as `⟨X_i, α⟩` can be approximated
//! independently of the discretisation used by the estimator.
//!
//! Every replicate owns seeds derived from `(base seed, replicate, sample
//! size, purpose)`, so serial and parallel runs produce identical output.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{
    center, midpoint_grid, seminorm_gamma_n, seminorm_gamma_np, seminorm_gamma_true, CenteredDesign, FitPath,
    FunctionalSample, SpectralMode,
};
use crate::prediction::{predict, prediction_interval, residual_variance};
use crate::selection::select_rho;
use crate::spline::{Grid, PenaltyOperator};

/// Fine-grid refinement factor; odd so that the coarse grid is nested.
pub const DEFAULT_REFINE: usize = 11;

/// A slope function on `[0, 1]`.
pub type SlopeFn = fn(f64) -> f64;

/// `sin(2πt) + 0.5 cos(4πt)`.
pub fn default_alpha(t: f64) -> f64 {
    (2.0 * PI * t).sin() + 0.5 * (4.0 * PI * t).cos()
}

pub const DEFAULT_ALPHA0: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProcessKind {
    /// Standard Brownian motion.
    Brownian,
    /// `X(t) = Σ_{r≤R} √λ_r ξ_r ζ_r(t)` with `λ_r = r^{-(2q+1)}` and the
    /// Fourier basis `ζ_{2k-1} = √2 cos(2πkt)`, `ζ_{2k} = √2 sin(2πkt)`.
    FourierKl { q: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessSpec {
    pub kind: ProcessKind,
    /// Truncation `R` of the eigen-expansion.
    pub modes: usize,
    pub seed: u64,
}

impl ProcessSpec {
    pub fn brownian(seed: u64) -> Self {
        Self {
            kind: ProcessKind::Brownian,
            modes: 400,
            seed,
        }
    }

    pub fn fourier(q: f64, modes: usize, seed: u64) -> Self {
        Self {
            kind: ProcessKind::FourierKl { q },
            modes,
            seed,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    fn validate(&self) -> Result<()> {
        if self.modes == 0 {
            return Err(Error::InvalidArgument("process needs at least one mode".into()));
        }
        if let ProcessKind::FourierKl { q } = self.kind {
            if !(q > 0.0 && q.is_finite()) {
                return Err(Error::InvalidArgument(format!("eigendecay q must be positive, got {q}")));
            }
        }
        Ok(())
    }

    /// Eigendecay exponent `q` with `Σ_{r>k} λ_r ≍ k^{-2q}`. Brownian motion
    /// has `λ_r = (π(r - 1/2))^{-2}`, hence `q = 1/2`.
    pub fn q(&self) -> f64 {
        match self.kind {
            ProcessKind::Brownian => 0.5,
            ProcessKind::FourierKl { q } => q,
        }
    }

    /// `λ_r`, `r = 1..=R`.
    pub fn eigenvalues(&self) -> Vec<f64> {
        (1..=self.modes)
            .map(|r| match self.kind {
                ProcessKind::Brownian => (PI * (r as f64 - 0.5)).powi(-2),
                ProcessKind::FourierKl { q } => (r as f64).powf(-(2.0 * q + 1.0)),
            })
            .collect()
    }

    /// `ζ_r(t)`, `r >= 1`.
    pub fn eigenfunction(&self, r: usize, t: f64) -> f64 {
        match self.kind {
            ProcessKind::Brownian => 2f64.sqrt() * ((r as f64 - 0.5) * PI * t).sin(),
            ProcessKind::FourierKl { .. } => {
                let k = r.div_ceil(2) as f64;
                if r % 2 == 1 {
                    2f64.sqrt() * (2.0 * PI * k * t).cos()
                } else {
                    2f64.sqrt() * (2.0 * PI * k * t).sin()
                }
            }
        }
    }

    /// Truncated spectrum sampled on the midpoint grid `points`.
    pub fn spectrum(&self, points: &[f64]) -> Vec<SpectralMode> {
        self.eigenvalues()
            .into_iter()
            .enumerate()
            .map(|(i, lambda)| SpectralMode {
                lambda,
                zeta: points.iter().map(|&t| self.eigenfunction(i + 1, t)).collect(),
            })
            .collect()
    }
}

/// Curves on a fine midpoint grid nesting an estimation grid.
#[derive(Debug, Clone)]
pub struct CurveBatch {
    grid: Grid,
    refine: usize,
    fine: DMatrix<f64>,
}

impl CurveBatch {
    pub fn new(grid: Grid, refine: usize, fine: DMatrix<f64>) -> Result<Self> {
        if refine == 0 || refine.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!("refinement must be odd, got {refine}")));
        }
        if fine.ncols() != grid.p() * refine {
            return Err(Error::DimensionMismatch {
                expected: grid.p() * refine,
                found: fine.ncols(),
            });
        }
        Ok(Self { grid, refine, fine })
    }

    pub fn n(&self) -> usize {
        self.fine.nrows()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn refine(&self) -> usize {
        self.refine
    }

    /// Values on the fine grid (`n × p·refine`).
    pub fn fine(&self) -> &DMatrix<f64> {
        &self.fine
    }

    pub fn fine_points(&self) -> Vec<f64> {
        midpoint_grid(self.fine.ncols())
    }

    /// Values at the estimation grid (`n × p`).
    pub fn coarse(&self) -> DMatrix<f64> {
        let offset = (self.refine - 1) / 2;
        DMatrix::from_fn(self.n(), self.grid.p(), |i, j| self.fine[(i, j * self.refine + offset)])
    }

    /// `⟨X_i, f⟩` by the midpoint rule on the fine grid.
    pub fn inner_products(&self, f: impl Fn(f64) -> f64) -> DVector<f64> {
        let fv = DVector::from_vec(self.fine_points().into_iter().map(f).collect());
        &self.fine * fv / self.fine.ncols() as f64
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for one replicate: `base + replicate`, mixed with the sample size and
/// the purpose of the stream.
pub fn derive_seed(base: u64, replicate: usize, n: usize, purpose: u64) -> u64 {
    let mut h = splitmix(base.wrapping_add(replicate as u64));
    h = splitmix(h ^ n as u64);
    splitmix(h ^ purpose)
}

/// Simulate `n` curves with [`DEFAULT_REFINE`].
pub fn generate_curves(spec: &ProcessSpec, n: usize, grid: &Grid) -> Result<CurveBatch> {
    generate_curves_refined(spec, n, grid, DEFAULT_REFINE)
}

pub fn generate_curves_refined(spec: &ProcessSpec, n: usize, grid: &Grid, refine: usize) -> Result<CurveBatch> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::InvalidArgument("need n >= 1 curves".into()));
    }
    if refine == 0 || refine.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("refinement must be odd, got {refine}")));
    }
    let count = grid.p() * refine;
    let points = midpoint_grid(count);
    let mut rng = rng(spec.seed);
    let fine = match spec.kind {
        ProcessKind::Brownian => {
            let first_sd = points[0].sqrt();
            let step_sd = (1.0 / count as f64).sqrt();
            let mut fine = DMatrix::zeros(n, count);
            for i in 0..n {
                let mut acc = 0.0;
                for k in 0..count {
                    let z: f64 = rng.sample(StandardNormal);
                    acc += z * if k == 0 { first_sd } else { step_sd };
                    fine[(i, k)] = acc;
                }
            }
            fine
        }
        ProcessKind::FourierKl { .. } => {
            let lambdas = spec.eigenvalues();
            let basis = DMatrix::from_fn(spec.modes, count, |r, k| spec.eigenfunction(r + 1, points[k]));
            let scores = DMatrix::from_fn(n, spec.modes, |_, r| {
                let z: f64 = rng.sample(StandardNormal);
                lambdas[r].sqrt() * z
            });
            scores * basis
        }
    };
    CurveBatch::new(grid.clone(), refine, fine)
}

/// `Y_i = α₀ + ⟨X_i, α⟩ + ε_i`, the integral by the fine-grid midpoint rule
/// and `ε_i ~ N(0, σ²_ε)`.
pub fn generate_responses(
    curves: &CurveBatch,
    alpha: impl Fn(f64) -> f64,
    alpha0: f64,
    sigma_eps: f64,
    seed: u64,
) -> Result<DVector<f64>> {
    if !(sigma_eps >= 0.0) {
        return Err(Error::InvalidArgument(format!("sigma must be nonnegative, got {sigma_eps}")));
    }
    let mut y = curves.inner_products(alpha).add_scalar(alpha0);
    if sigma_eps > 0.0 {
        let mut rng = rng(seed);
        for v in y.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v += sigma_eps * z;
        }
    }
    Ok(y)
}

/// `W = X + δ` with i.i.d. `δ ~ N(0, σ²_δ)`.
pub fn add_observation_noise(curves: &DMatrix<f64>, sigma_delta: f64, seed: u64) -> Result<DMatrix<f64>> {
    if !(sigma_delta >= 0.0) {
        return Err(Error::InvalidArgument(format!("sigma must be nonnegative, got {sigma_delta}")));
    }
    if sigma_delta == 0.0 {
        return Ok(curves.clone());
    }
    let mut rng = rng(seed);
    let mut w = curves.clone();
    for v in w.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *v += sigma_delta * z;
    }
    Ok(w)
}

/// Centred true regression signal `⟨X_i - X̄, α⟩`.
pub fn centered_signal(curves: &CurveBatch, alpha: impl Fn(f64) -> f64) -> DVector<f64> {
    let s = curves.inner_products(alpha);
    let mean = s.mean();
    s.add_scalar(-mean)
}

/// Average squared error of the fitted conditional means,
/// `(1/n) Σ_i [⟨X_i - X̄, α⟩ - (1/p) Σ_j Xc_ij α̂_j]²`.
pub fn average_squared_error(design: &CenteredDesign, alpha_hat: &DVector<f64>, signal: &DVector<f64>) -> f64 {
    let fitted = &design.xc * alpha_hat / design.p() as f64;
    (signal - fitted).norm_squared() / design.n() as f64
}

/// Variance of the centred signal, used to calibrate noise levels.
pub fn signal_variance(signal: &DVector<f64>) -> f64 {
    signal.norm_squared() / signal.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Seminorm {
    GammaNp,
    GammaN,
    GammaTrue,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum RhoRule {
    /// GCV over the default grid.
    Gcv,
    /// `ρ = scale · n^{-(2m+2q+1)/(2m+2q+2)}`.
    Theoretical { scale: f64 },
}

/// `-(2m + 2q + 1) / (2m + 2q + 2)`.
pub fn theoretical_exponent(m: usize, q: f64) -> f64 {
    let a = 2.0 * m as f64 + 2.0 * q;
    -(a + 1.0) / (a + 2.0)
}

/// Configuration of a convergence-rate study.
#[derive(Debug, Clone)]
pub struct RateStudyConfig {
    pub process: ProcessSpec,
    pub alpha: SlopeFn,
    pub alpha0: f64,
    pub sigma_eps: f64,
    pub m: usize,
    pub n_values: Vec<usize>,
    pub p: usize,
    pub replicates: usize,
    pub seminorm: Seminorm,
    pub rho_rule: RhoRule,
    pub parallel: bool,
}

impl RateStudyConfig {
    /// Brownian curves, `m = 2`, `p = 100`, `n ∈ {50, …, 800}`, 50
    /// replicates, the discretised empirical semi-norm and the theoretical
    /// smoothing rule.
    pub fn brownian_default(seed: u64) -> Self {
        Self {
            process: ProcessSpec::brownian(seed),
            alpha: default_alpha,
            alpha0: DEFAULT_ALPHA0,
            sigma_eps: DEFAULT_RATE_SIGMA_EPS,
            m: 2,
            n_values: vec![50, 100, 200, 400, 800],
            p: 100,
            replicates: 50,
            seminorm: Seminorm::GammaNp,
            rho_rule: RhoRule::Theoretical {
                scale: DEFAULT_RHO_SCALE,
            },
            parallel: true,
        }
    }
}

/// Noise level of the default rate study.
pub const DEFAULT_RATE_SIGMA_EPS: f64 = 0.5;

/// Constant in front of the theoretical smoothing rule.
pub const DEFAULT_RHO_SCALE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateStudyResult {
    pub n_values: Vec<usize>,
    /// `errors[k][r]`: replicate `r` at `n_values[k]`.
    pub errors: Vec<Vec<f64>>,
    pub medians: Vec<f64>,
    pub slope: f64,
    pub theoretical_exponent: f64,
    pub seminorm: Seminorm,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Least-squares slope of `ln(y)` against `ln(x)`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / lx.len() as f64;
    let my = ly.iter().sum::<f64>() / ly.len() as f64;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Assemble a study from per-`n` replicate errors.
pub fn summarize_rates(
    n_values: &[usize],
    errors: Vec<Vec<f64>>,
    theoretical_exponent: f64,
    seminorm: Seminorm,
) -> RateStudyResult {
    let medians: Vec<f64> = errors.iter().map(|e| median(e)).collect();
    let xs: Vec<f64> = n_values.iter().map(|&n| n as f64).collect();
    RateStudyResult {
        n_values: n_values.to_vec(),
        slope: loglog_slope(&xs, &medians),
        errors,
        medians,
        theoretical_exponent,
        seminorm,
    }
}

struct Replicate {
    curves: CurveBatch,
    sample: FunctionalSample,
}

fn simulate_replicate(
    process: &ProcessSpec,
    alpha: SlopeFn,
    alpha0: f64,
    sigma_eps: f64,
    n: usize,
    grid: &Grid,
    seeds: (u64, u64),
) -> Result<Replicate> {
    let curves = generate_curves(&process.with_seed(seeds.0), n, grid)?;
    let y = generate_responses(&curves, alpha, alpha0, sigma_eps, seeds.1)?;
    let sample = FunctionalSample::new(grid.clone(), curves.coarse(), y)?;
    Ok(Replicate { curves, sample })
}

/// Run a convergence-rate study.
pub fn rate_study(config: &RateStudyConfig) -> Result<RateStudyResult> {
    let n_values = &config.n_values;
    if n_values.len() < 3 {
        return Err(Error::InvalidArgument("rate study needs at least three sample sizes".into()));
    }
    if n_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("sample sizes must be strictly increasing".into()));
    }
    if config.replicates < 10 {
        return Err(Error::InvalidArgument("rate study needs at least 10 replicates".into()));
    }
    config.process.validate()?;
    let grid = Grid::new(config.p)?;
    let op = PenaltyOperator::new(&grid, config.m)?;
    let exponent = theoretical_exponent(config.m, config.process.q());

    let fine_points = midpoint_grid(config.p * DEFAULT_REFINE);
    let spectrum = match config.seminorm {
        Seminorm::GammaTrue => config.process.spectrum(&fine_points),
        _ => Vec::new(),
    };
    let alpha_grid: Vec<f64> = grid.points().iter().map(|&t| (config.alpha)(t)).collect();
    let alpha_fine: Vec<f64> = fine_points.iter().map(|&t| (config.alpha)(t)).collect();

    let run = |n: usize, rep: usize| -> Result<f64> {
        let seeds = (
            derive_seed(config.process.seed, rep, n, 0),
            derive_seed(config.process.seed, rep, n, 1),
        );
        let data = simulate_replicate(&config.process, config.alpha, config.alpha0, config.sigma_eps, n, &grid, seeds)?;
        let path = FitPath::new(&data.sample, &op)?;
        let rho = match config.rho_rule {
            RhoRule::Theoretical { scale } => scale * (n as f64).powf(exponent),
            RhoRule::Gcv => {
                let gcv = crate::selection::GcvPath::new(path.design(), &op)?;
                select_rho(path.design(), &op, &gcv.default_grid())?.best_rho
            }
        };
        let model = path.fit(rho)?;
        match config.seminorm {
            Seminorm::GammaNp => {
                let diff: Vec<f64> = model.alpha_hat.iter().zip(&alpha_grid).map(|(a, b)| a - b).collect();
                seminorm_gamma_np(&diff, path.design())
            }
            Seminorm::GammaN => {
                let diff: Vec<f64> = fine_points
                    .iter()
                    .zip(&alpha_fine)
                    .map(|(&t, a)| model.alpha_at(t) - a)
                    .collect();
                seminorm_gamma_n(&diff, data.curves.fine())
            }
            Seminorm::GammaTrue => {
                let diff: Vec<f64> = fine_points
                    .iter()
                    .zip(&alpha_fine)
                    .map(|(&t, a)| model.alpha_at(t) - a)
                    .collect();
                seminorm_gamma_true(&diff, &spectrum)
            }
        }
        .map_err(|e| Error::Study {
            n,
            replicate: rep,
            source: Box::new(e),
        })
    };

    let mut errors = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let reps: Vec<usize> = (0..config.replicates).collect();
        let outcome: Vec<Result<f64>> = if config.parallel {
            reps.par_iter().map(|&r| run(n, r)).collect()
        } else {
            reps.iter().map(|&r| run(n, r)).collect()
        };
        let mut row = Vec::with_capacity(outcome.len());
        for (rep, res) in outcome.into_iter().enumerate() {
            match res {
                Ok(e) => row.push(e),
                Err(e @ Error::Study { .. }) => return Err(e),
                Err(e) => {
                    return Err(Error::Study {
                        n,
                        replicate: rep,
                        source: Box::new(e),
                    })
                }
            }
        }
        errors.push(row);
    }
    Ok(summarize_rates(n_values, errors, exponent, config.seminorm))
}

/// Configuration of a prediction-interval coverage study.
#[derive(Debug, Clone)]
pub struct CoverageConfig {
    pub process: ProcessSpec,
    pub alpha: SlopeFn,
    pub alpha0: f64,
    pub sigma_eps: f64,
    pub m: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub p: usize,
    pub replicates: usize,
    /// Confidence level `1 - τ`.
    pub level: f64,
    pub parallel: bool,
}

impl CoverageConfig {
    pub fn brownian_default(seed: u64) -> Self {
        Self {
            process: ProcessSpec::brownian(seed),
            alpha: default_alpha,
            alpha0: DEFAULT_ALPHA0,
            sigma_eps: 0.2,
            m: 2,
            n_train: 300,
            n_test: 50,
            p: 100,
            replicates: 20,
            level: 0.95,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReplicate {
    pub rho: f64,
    pub sigma_eps_hat: f64,
    pub covered: usize,
    pub tested: usize,
    pub eqm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageResult {
    pub level: f64,
    pub replicates: Vec<CoverageReplicate>,
    pub coverage: f64,
}

/// Fit on a training sample with GCV-selected `ρ`, then count how many test
/// responses fall inside their prediction intervals.
pub fn coverage_study(config: &CoverageConfig) -> Result<CoverageResult> {
    if !(config.level > 0.0 && config.level < 1.0) {
        return Err(Error::InvalidArgument(format!("level must lie in (0, 1), got {}", config.level)));
    }
    if config.n_test == 0 || config.replicates == 0 {
        return Err(Error::InvalidArgument("need test points and replicates".into()));
    }
    config.process.validate()?;
    let grid = Grid::new(config.p)?;
    let op = PenaltyOperator::new(&grid, config.m)?;
    let total = config.n_train + config.n_test;
    let run = |rep: usize| -> Result<CoverageReplicate> {
        let seeds = (
            derive_seed(config.process.seed, rep, total, 0),
            derive_seed(config.process.seed, rep, total, 1),
        );
        let data = simulate_replicate(&config.process, config.alpha, config.alpha0, config.sigma_eps, total, &grid, seeds)?;
        let x = data.sample.x();
        let y = data.sample.y();
        let train = FunctionalSample::new(
            grid.clone(),
            x.rows(0, config.n_train).into_owned(),
            y.rows(0, config.n_train).into_owned(),
        )?;
        let design = center(&train);
        let gcv = crate::selection::GcvPath::new(&design, &op)?;
        let rho = select_rho(&design, &op, &gcv.default_grid())?.best_rho;
        let model = crate::estimator::fit(&train, &op, rho)?;
        let sigma = residual_variance(&model, &train)?.sqrt();
        let mut covered = 0;
        let mut sq = 0.0;
        for i in config.n_train..total {
            let row: Vec<f64> = x.row(i).iter().copied().collect();
            let yhat = predict(&model, &row)?;
            let iv = prediction_interval(yhat, sigma, 1.0 - config.level)?;
            if iv.contains(y[i]) {
                covered += 1;
            }
            sq += (y[i] - yhat).powi(2);
        }
        Ok(CoverageReplicate {
            rho,
            sigma_eps_hat: sigma,
            covered,
            tested: config.n_test,
            eqm: sq / config.n_test as f64,
        })
    };
    let reps: Vec<usize> = (0..config.replicates).collect();
    let replicates: Vec<CoverageReplicate> = if config.parallel {
        reps.par_iter().map(|&r| run(r)).collect::<Result<_>>()?
    } else {
        reps.iter().map(|&r| run(r)).collect::<Result<_>>()?
    };
    let covered: usize = replicates.iter().map(|r| r.covered).sum();
    let tested: usize = replicates.iter().map(|r| r.tested).sum();
    Ok(CoverageResult {
        level: config.level,
        coverage: covered as f64 / tested as f64,
        replicates,
    })
}
