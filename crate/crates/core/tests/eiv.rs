mod common;

use common::{dense_solve, explicit_hat, explicit_score, normal_matrix, normal_vector, rng, walk_curves};
use funreg::eiv::{estimate_noise_variance, fit_corrected, gcv_score_corrected, select_rho_corrected};
use funreg::estimator::{center, fit, FitWarning};
use funreg::selection::{gcv_score, log_grid};
use funreg::synthetic::{add_observation_noise, generate_curves, ProcessSpec};
use funreg::{build_grid, build_penalty, Error, FunctionalSample};
use nalgebra::{DMatrix, DVector, SymmetricEigen};

fn noisy_sample(n: usize, p: usize, sigma: f64, seed: u64) -> FunctionalSample {
    let mut r = rng(seed);
    let x = walk_curves(&mut r, n, p);
    let w = &x + normal_matrix(&mut r, n, p) * sigma;
    FunctionalSample::new(build_grid(p).unwrap(), w, normal_vector(&mut r, n)).unwrap()
}

/// `(1/(np)) WcᵀWc + ρ A_m - (σ²/p) I` as nested vectors.
fn corrected_system(s: &FunctionalSample, a_m: &DMatrix<f64>, rho: f64, sigma_sq: f64) -> DMatrix<f64> {
    let d = center(s);
    let (n, p) = (s.n() as f64, s.p() as f64);
    d.xc.transpose() * &d.xc / (n * p) + a_m * rho - DMatrix::identity(s.p(), s.p()) * (sigma_sq / p)
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

#[test]
fn pure_noise_estimate_within_monte_carlo_error() {
    let (n, p, reps) = (200, 100, 40);
    let estimates: Vec<f64> = (0..reps)
        .map(|k| estimate_noise_variance(&normal_matrix(&mut rng(500 + k), n, p)).unwrap())
        .collect();
    let mean = estimates.iter().sum::<f64>() / reps as f64;
    let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
    let se = (var / reps as f64).sqrt();
    assert!((mean - 1.0).abs() < 3.0 * se, "mean {mean}, se {se}");
    // A single replicate sits within three of its own standard deviations.
    assert!((estimates[0] - 1.0).abs() < 3.0 * var.sqrt());
}

#[test]
fn estimate_scales_with_variance_and_ignores_affine_trends() {
    let mut r = rng(510);
    let noise = normal_matrix(&mut r, 30, 40);
    let trend = DMatrix::from_fn(30, 40, |i, j| 2.0 - 0.3 * i as f64 + 0.7 * j as f64);
    let base = estimate_noise_variance(&noise).unwrap();
    let scaled = estimate_noise_variance(&(&noise * 3.0 + trend)).unwrap();
    assert!((scaled / base - 9.0).abs() < 1e-9);
}

#[test]
fn zero_override_matches_plain_fit() {
    let s = noisy_sample(40, 20, 0.3, 511);
    let op = build_penalty(s.grid(), 2).unwrap();
    let report = fit_corrected(&s, &op, 1e-3, Some(0.0)).unwrap();
    let plain = fit(&s, &op, 1e-3).unwrap();
    assert!(report.corrected);
    assert!((&report.model.alpha_hat - &plain.alpha_hat).amax() < 1e-12 * plain.alpha_hat.amax().max(1.0));
    assert_eq!(report.sigma_delta_hat_sq, 0.0);
}

#[test]
fn corrected_fit_matches_dense_solve() {
    for (seed, m) in [(512, 1), (513, 2), (514, 3)] {
        let s = noisy_sample(35, 18, 0.2, seed);
        let op = build_penalty(s.grid(), m).unwrap();
        let report = fit_corrected(&s, &op, 1e-3, None).unwrap();
        assert!(report.corrected && report.min_pivot > 0.0);
        let sigma_sq = estimate_noise_variance(s.x()).unwrap();
        assert_eq!(report.sigma_delta_hat_sq, sigma_sq);
        let k = corrected_system(&s, op.a_m(), 1e-3, sigma_sq);
        let d = center(&s);
        let b = d.xc.transpose() * &d.yc / s.n() as f64;
        let eig = SymmetricEigen::new(k.clone()).eigenvalues;
        let cond = eig.max() / eig.min();
        let oracle = DVector::from_vec(dense_solve(&rows(&k), b.as_slice()));
        let err = (&report.model.alpha_hat - &oracle).norm() / oracle.norm();
        // Both solvers lose accuracy in proportion to the conditioning.
        let tol = 1e-8_f64.max(1e-14 * cond);
        assert!(err < tol, "m={m} cond={cond:e}: {err}");
    }
}

#[test]
fn noiseless_curves_respect_perturbation_bound() {
    let p = 30;
    let grid = build_grid(p).unwrap();
    let mut r = rng(515);
    let coef = normal_matrix(&mut r, 50, 3);
    let x = DMatrix::from_fn(50, p, |i, j| {
        let t = grid.points()[j];
        coef[(i, 0)] * (std::f64::consts::PI * t).sin() + coef[(i, 1)] * t * t + coef[(i, 2)] * (3.0 * t).cos()
    });
    let s = FunctionalSample::new(grid.clone(), x, normal_vector(&mut r, 50)).unwrap();
    let op = build_penalty(&grid, 2).unwrap();
    let rho = 1e-4;
    let report = fit_corrected(&s, &op, rho, None).unwrap();
    let plain = fit(&s, &op, rho).unwrap();
    let sigma_sq = report.sigma_delta_hat_sq;
    assert!(sigma_sq < 1e-3, "{sigma_sq}");
    let k = corrected_system(&s, op.a_m(), rho, sigma_sq);
    let lambda_min = SymmetricEigen::new(k).eigenvalues.min();
    let bound = sigma_sq / p as f64 / lambda_min * plain.alpha_hat.norm();
    let diff = (&report.model.alpha_hat - &plain.alpha_hat).norm();
    assert!(diff <= bound * (1.0 + 1e-6), "{diff} > {bound}");
}

#[test]
fn derivative_in_noise_variance_matches_finite_difference() {
    let s = noisy_sample(40, 16, 0.2, 516);
    let op = build_penalty(s.grid(), 2).unwrap();
    let (rho, sigma_sq, h) = (1e-3, 0.01, 1e-5);
    let at = |v: f64| fit_corrected(&s, &op, rho, Some(v)).unwrap().model.alpha_hat;
    let fd = (at(sigma_sq + h) - at(sigma_sq - h)) / (2.0 * h);
    let alpha = at(sigma_sq);
    let k = corrected_system(&s, op.a_m(), rho, sigma_sq);
    let rhs = &alpha / s.p() as f64;
    let analytic = DVector::from_vec(dense_solve(&rows(&k), rhs.as_slice()));
    let err = (&fd - &analytic).norm() / analytic.norm();
    assert!(err < 1e-5, "{err}");
}

#[test]
fn excessive_noise_variance_falls_back() {
    let s = noisy_sample(30, 15, 0.2, 517);
    let op = build_penalty(s.grid(), 2).unwrap();
    let report = fit_corrected(&s, &op, 1e-3, Some(1e3)).unwrap();
    assert!(!report.corrected);
    assert!(report.min_pivot <= 0.0);
    assert!(report.model.warnings.contains(&FitWarning::CorrectionFallback));
    let plain = fit(&s, &op, 1e-3).unwrap();
    assert_eq!(report.model.alpha_hat, plain.alpha_hat);
}

#[test]
fn corrected_gcv_matches_explicit_hat_matrix() {
    for (seed, n, p) in [(518, 12, 10), (519, 25, 20), (520, 30, 28)] {
        let s = noisy_sample(n, p, 0.3, seed);
        let op = build_penalty(s.grid(), 2).unwrap();
        let d = center(&s);
        let sigma_sq = estimate_noise_variance(s.x()).unwrap();
        for rho in [1e-3, 1e-2, 1e-1] {
            let (score, trace) = gcv_score_corrected(&d, &op, rho, sigma_sq).unwrap();
            let h = explicit_hat(&d.xc, op.a_m(), rho, sigma_sq / (p * p) as f64);
            let (es, et) = explicit_score(&d.yc, &h);
            assert!(((score - es) / es).abs() < 1e-9, "n={n} rho={rho}: {score} vs {es}");
            assert!(((trace - et) / et).abs() < 1e-9);
        }
    }
}

#[test]
fn corrected_gcv_limits() {
    let s = noisy_sample(20, 12, 0.3, 521);
    let op = build_penalty(s.grid(), 2).unwrap();
    let d = center(&s);
    for rho in [1e-4, 1e-2, 1.0] {
        let a = gcv_score_corrected(&d, &op, rho, 0.0).unwrap();
        let b = gcv_score(&d, &op, rho).unwrap();
        assert!(((a.0 - b.0) / b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
    }
    let (score, trace) = gcv_score_corrected(&d, &op, 1e12, 0.05).unwrap();
    assert!(trace < 1e-8);
    let expected = d.yc.norm_squared() / 20.0;
    assert!(((score - expected) / expected).abs() < 1e-6);
}

#[test]
fn corrected_gcv_rejects_indefinite_systems() {
    let s = noisy_sample(20, 12, 0.3, 522);
    let op = build_penalty(s.grid(), 2).unwrap();
    let d = center(&s);
    assert!(matches!(gcv_score_corrected(&d, &op, 1e-3, 1e3), Err(Error::DegenerateSmoother { .. })));
    let grid = log_grid(1e-6, 1e-2, 5);
    assert!(matches!(select_rho_corrected(&d, &op, &grid, 1e3), Err(Error::NoValidRho)));
    assert!(gcv_score_corrected(&d, &op, 1e-3, -1.0).is_err());
}

#[test]
fn design_bias_shrinks_with_sample_size() {
    let (p, sigma, reps) = (20, 0.5, 200);
    let grid = build_grid(p).unwrap();
    let pf = p as f64;
    let max_bias = |n: usize| {
        let mut acc = DMatrix::zeros(p, p);
        for rep in 0..reps {
            let seed = 10_000 * n as u64 + rep as u64;
            let x = generate_curves(&ProcessSpec::brownian(seed), n, &grid).unwrap().coarse();
            let w = add_observation_noise(&x, sigma, seed + 1).unwrap();
            let y = DVector::zeros(n);
            let xc = center(&FunctionalSample::new(grid.clone(), x, y.clone()).unwrap()).xc;
            let wc = center(&FunctionalSample::new(grid.clone(), w, y).unwrap()).xc;
            let nf = n as f64;
            acc += (wc.transpose() * &wc - xc.transpose() * &xc) / (nf * pf * pf)
                - DMatrix::identity(p, p) * (sigma * sigma / (pf * pf));
        }
        (acc / reps as f64).amax()
    };
    let ratio = max_bias(50) / max_bias(200);
    assert!((1.3..=3.0).contains(&ratio), "{ratio}");
}

#[test]
fn correction_reduces_error_at_fixed_rho() {
    use funreg::estimator::seminorm_gamma_np;
    use funreg::synthetic::{default_alpha, derive_seed, generate_responses, median};
    let (n, p, reps, rho) = (150, 100, 30, 1e-7);
    let grid = build_grid(p).unwrap();
    let op = build_penalty(&grid, 2).unwrap();
    let sigma_sq: f64 = 0.125;
    let alpha: Vec<f64> = grid.points().iter().map(|&t| default_alpha(t)).collect();
    let (mut corrected, mut naive) = (Vec::new(), Vec::new());
    for rep in 0..reps {
        let curves = generate_curves(&ProcessSpec::brownian(derive_seed(530, rep, n, 0)), n, &grid).unwrap();
        let y = generate_responses(&curves, default_alpha, 1.0, 0.05, derive_seed(530, rep, n, 1)).unwrap();
        let x = curves.coarse();
        let w = add_observation_noise(&x, sigma_sq.sqrt(), derive_seed(530, rep, n, 2)).unwrap();
        let clean = center(&FunctionalSample::new(grid.clone(), x, y.clone()).unwrap());
        let noisy = FunctionalSample::new(grid.clone(), w, y).unwrap();
        let err = |a: &DVector<f64>| {
            let diff: Vec<f64> = a.iter().zip(&alpha).map(|(u, v)| u - v).collect();
            seminorm_gamma_np(&diff, &clean).unwrap()
        };
        naive.push(err(&fit(&noisy, &op, rho).unwrap().alpha_hat));
        let report = fit_corrected(&noisy, &op, rho, Some(sigma_sq)).unwrap();
        assert!(report.corrected);
        corrected.push(err(&report.model.alpha_hat));
    }
    assert!(median(&corrected) < 0.8 * median(&naive), "{} vs {}", median(&corrected), median(&naive));
}
