use funreg::estimator::{center, fit, midpoint_grid, seminorm_gamma_n, seminorm_gamma_np};
use funreg::synthetic::{
    add_observation_noise, default_alpha, derive_seed, generate_curves, generate_responses, rate_study,
    CurveBatch, ProcessSpec, RateStudyConfig, RhoRule, Seminorm,
};
use funreg::{build_grid, build_penalty, FunctionalSample};
use nalgebra::{DMatrix, SymmetricEigen};

#[test]
fn brownian_covariance_matches_min() {
    let (n, p) = (2000, 100);
    let grid = build_grid(p).unwrap();
    let x = generate_curves(&ProcessSpec::brownian(700), n, &grid).unwrap().coarse();
    let t = grid.points();
    for (a, b) in [(0, 0), (9, 49), (24, 74), (49, 99), (99, 99)] {
        let cov = (0..n).map(|i| x[(i, a)] * x[(i, b)]).sum::<f64>() / n as f64;
        let expected = t[a].min(t[b]);
        // Var(X_s X_t) = st + min(s, t)² for a centred Gaussian pair.
        let se = ((t[a] * t[b] + expected * expected) / n as f64).sqrt();
        assert!((cov - expected).abs() < 3.0 * se, "({a}, {b}): {cov} vs {expected}");
    }
}

#[test]
fn fourier_sample_spectrum_matches_eigenvalues() {
    let (n, p) = (2000, 100);
    let grid = build_grid(p).unwrap();
    let spec = ProcessSpec::fourier(1.0, 50, 701);
    let x = generate_curves(&spec, n, &grid).unwrap().coarse();
    let xc = center(&FunctionalSample::new(grid, x, nalgebra::DVector::zeros(n)).unwrap()).xc;
    // Covariance operator discretised with quadrature weight 1/p.
    let op = xc.transpose() * &xc / (n as f64 * p as f64);
    let mut eig: Vec<f64> = SymmetricEigen::new(op).eigenvalues.iter().copied().collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    for r in 1..=5 {
        let expected = (r as f64).powi(-3);
        let rel = (eig[r - 1] - expected).abs() / expected;
        assert!(rel < 0.15, "r={r}: {} vs {expected}", eig[r - 1]);
    }
}

#[test]
fn fourier_tail_law() {
    for q in [0.5, 1.0, 2.0] {
        let lambdas = ProcessSpec::fourier(q, 20_000, 0).eigenvalues();
        for k in 1..=100usize {
            let tail: f64 = lambdas[k..].iter().sum();
            assert!(tail <= (k as f64).powf(-2.0 * q) / (2.0 * q), "q={q} k={k}");
        }
    }
}

#[test]
fn responses_integrate_on_the_fine_grid() {
    let grid = build_grid(100).unwrap();
    let refine = 11;
    let points = midpoint_grid(100 * refine);
    let batch = CurveBatch::new(grid, refine, DMatrix::from_fn(2, points.len(), |_, k| points[k])).unwrap();
    let y = generate_responses(&batch, |t| t, 1.0, 0.0, 0).unwrap();
    for v in y.iter() {
        assert!((v - (1.0 + 1.0 / 3.0)).abs() < 1e-6);
    }
}

#[test]
fn observation_noise_moments() {
    let x = DMatrix::from_fn(200, 500, |i, j| (i * j) as f64 * 1e-3);
    let w = add_observation_noise(&x, 2.0, 702).unwrap();
    let d = &w - &x;
    let count = d.len() as f64;
    let mean = d.sum() / count;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0);
    let se = 4.0 * (2.0 / count).sqrt();
    assert!((var - 4.0).abs() < 3.0 * se, "{var}");
    assert_eq!(add_observation_noise(&x, 0.0, 1).unwrap(), x);
    assert_eq!(w, add_observation_noise(&x, 2.0, 702).unwrap());
    assert!(add_observation_noise(&x, -1.0, 1).is_err());
}

#[test]
fn generators_are_deterministic() {
    let grid = build_grid(30).unwrap();
    for spec in [ProcessSpec::brownian(9), ProcessSpec::fourier(1.5, 20, 9)] {
        let a = generate_curves(&spec, 10, &grid).unwrap();
        let b = generate_curves(&spec, 10, &grid).unwrap();
        assert_eq!(a.fine(), b.fine());
        let c = generate_curves(&spec.with_seed(10), 10, &grid).unwrap();
        assert_ne!(a.fine(), c.fine());
    }
    assert_ne!(derive_seed(1, 0, 50, 0), derive_seed(1, 0, 50, 1));
    assert_ne!(derive_seed(1, 0, 50, 0), derive_seed(1, 0, 100, 0));
}

fn small_study(parallel: bool) -> RateStudyConfig {
    RateStudyConfig {
        n_values: vec![50, 100, 200],
        p: 40,
        replicates: 10,
        parallel,
        ..RateStudyConfig::brownian_default(703)
    }
}

#[test]
fn studies_are_reproducible_serial_or_parallel() {
    let a = rate_study(&small_study(true)).unwrap();
    let b = rate_study(&small_study(true)).unwrap();
    let c = rate_study(&small_study(false)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, c);
    assert!(a.slope.is_finite());
    assert!(a.errors.iter().flatten().all(|&e| e >= 0.0));
}

#[test]
fn study_rejects_bad_configurations() {
    let mut cfg = small_study(false);
    cfg.n_values = vec![50, 100];
    assert!(rate_study(&cfg).is_err());
    cfg.n_values = vec![50, 200, 100];
    assert!(rate_study(&cfg).is_err());
    let mut cfg = small_study(false);
    cfg.replicates = 9;
    assert!(rate_study(&cfg).is_err());
}

#[test]
fn error_decreases_from_smallest_to_largest_sample() {
    for (seminorm, rho_rule) in [
        (Seminorm::GammaNp, RhoRule::Theoretical { scale: 1e-4 }),
        (Seminorm::GammaTrue, RhoRule::Gcv),
    ] {
        let cfg = RateStudyConfig {
            n_values: vec![50, 200, 800],
            replicates: 10,
            seminorm,
            rho_rule,
            ..RateStudyConfig::brownian_default(704)
        };
        let res = rate_study(&cfg).unwrap();
        assert!(res.medians[2] < res.medians[0], "{seminorm:?}: {:?}", res.medians);
    }
}

#[test]
fn discrete_and_fine_seminorms_agree() {
    let (n, p) = (200, 100);
    let grid = build_grid(p).unwrap();
    let spec = ProcessSpec::fourier(1.0, 50, 705);
    let curves = generate_curves(&spec, n, &grid).unwrap();
    let y = generate_responses(&curves, default_alpha, 1.0, 0.3, 706).unwrap();
    let s = FunctionalSample::new(grid.clone(), curves.coarse(), y).unwrap();
    let op = build_penalty(&grid, 2).unwrap();
    let model = fit(&s, &op, 1e-5).unwrap();
    let coarse: Vec<f64> = grid.points().iter().zip(model.alpha_hat.iter()).map(|(&t, a)| a - default_alpha(t)).collect();
    let fine: Vec<f64> = curves.fine_points().iter().map(|&t| model.alpha_at(t) - default_alpha(t)).collect();
    let np = seminorm_gamma_np(&coarse, &center(&s)).unwrap();
    let nf = seminorm_gamma_n(&fine, curves.fine()).unwrap();
    assert!(((np - nf) / nf).abs() < 0.05, "{np} vs {nf}");
}
