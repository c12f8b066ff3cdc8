#![allow(dead_code)]

use funreg::PenaltyOperator;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| normal(rng))
}

pub fn normal_vector(rng: &mut ChaCha8Rng, len: usize) -> DVector<f64> {
    DVector::from_fn(len, |_, _| normal(rng))
}

/// Random-walk curves, one per row.
pub fn walk_curves(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DMatrix<f64> {
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..p {
            acc += normal(rng) / (p as f64).sqrt();
            x[(i, j)] = acc;
        }
    }
    x
}

/// Gauss–Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// `∫_a^b f` with `cells` equal cells of `nodes`-point Gauss–Legendre.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, cells: usize, nodes: usize) -> f64 {
    let gl = gauss_legendre(nodes);
    let h = (b - a) / cells as f64;
    let mut total = 0.0;
    for c in 0..cells {
        let lo = a + c as f64 * h;
        for &(x, w) in &gl {
            total += 0.5 * h * w * f(lo + 0.5 * h * (x + 1.0));
        }
    }
    total
}

/// Gaussian elimination with partial pivoting on plain vectors.
pub fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(row, &r)| {
        let mut v = row.clone();
        v.push(r);
        v
    }).collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).unwrap();
        m.swap(col, piv);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for c in col..=n {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| m[r][c] * x[c]).sum();
        x[r] = (m[r][n] - s) / m[r][r];
    }
    x
}

pub fn rel_err(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// `H = (1/(np²)) Xc ((1/(np²)) XcᵀXc + (ρ/p) A_m - shift·I)⁻¹ Xcᵀ`, built
/// column by column with [`dense_solve`].
pub fn explicit_hat(xc: &DMatrix<f64>, a_m: &DMatrix<f64>, rho: f64, shift: f64) -> DMatrix<f64> {
    let (n, p) = xc.shape();
    let (nf, pf) = (n as f64, p as f64);
    let m: Vec<Vec<f64>> = (0..p)
        .map(|j| {
            (0..p)
                .map(|k| {
                    let gram = (0..n).map(|i| xc[(i, j)] * xc[(i, k)]).sum::<f64>() / (nf * pf * pf);
                    gram + rho / pf * a_m[(j, k)] - if j == k { shift } else { 0.0 }
                })
                .collect()
        })
        .collect();
    let mut h = DMatrix::zeros(n, n);
    for c in 0..n {
        let rhs: Vec<f64> = (0..p).map(|j| xc[(c, j)]).collect();
        let sol = dense_solve(&m, &rhs);
        for r in 0..n {
            h[(r, c)] = (0..p).map(|j| xc[(r, j)] * sol[j]).sum::<f64>() / (nf * pf * pf);
        }
    }
    h
}

/// GCV score and trace from an explicit smoother matrix.
pub fn explicit_score(yc: &DVector<f64>, h: &DMatrix<f64>) -> (f64, f64) {
    let n = yc.len() as f64;
    let trace = h.trace();
    let resid = yc - h * yc;
    (resid.norm_squared() / n / (1.0 - trace / n).powi(2), trace)
}

/// Plain-loop centring.
pub fn centred(x: &DMatrix<f64>, y: &DVector<f64>) -> (Vec<Vec<f64>>, Vec<f64>) {
    let (n, p) = x.shape();
    let mut xc = vec![vec![0.0; p]; n];
    for j in 0..p {
        let mean: f64 = (0..n).map(|i| x[(i, j)]).sum::<f64>() / n as f64;
        for i in 0..n {
            xc[i][j] = x[(i, j)] - mean;
        }
    }
    let ym = y.iter().sum::<f64>() / n as f64;
    (xc, y.iter().map(|v| v - ym).collect())
}

pub fn a_rows(op: &PenaltyOperator) -> Vec<Vec<f64>> {
    let a = op.a_m();
    (0..a.nrows()).map(|i| a.row(i).iter().copied().collect()).collect()
}

/// `(1/(np²)) XcᵀXc + (ρ/p) A_m` and `(1/(np)) Xcᵀyc`, assembled with loops.
pub fn normal_system(xc: &[Vec<f64>], yc: &[f64], a: &[Vec<f64>], rho: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let (n, p) = (xc.len(), xc[0].len());
    let (nf, pf) = (n as f64, p as f64);
    let mut m = vec![vec![0.0; p]; p];
    let mut b = vec![0.0; p];
    for j in 0..p {
        for k in 0..p {
            let s: f64 = (0..n).map(|i| xc[i][j] * xc[i][k]).sum();
            m[j][k] = s / (nf * pf * pf) + rho / pf * a[j][k];
        }
        b[j] = (0..n).map(|i| xc[i][j] * yc[i]).sum::<f64>() / (nf * pf);
    }
    (m, b)
}

/// Objective `(1/n)‖yc - Xc a/p‖² + (ρ/p) aᵀAa` and its gradient.
pub fn objective(xc: &[Vec<f64>], yc: &[f64], a: &[Vec<f64>], rho: f64, v: &[f64]) -> (f64, Vec<f64>) {
    let (n, p) = (xc.len(), v.len());
    let (nf, pf) = (n as f64, p as f64);
    let resid: Vec<f64> = (0..n)
        .map(|i| yc[i] - (0..p).map(|j| xc[i][j] * v[j]).sum::<f64>() / pf)
        .collect();
    let av: Vec<f64> = (0..p).map(|j| (0..p).map(|k| a[j][k] * v[k]).sum()).collect();
    let value = resid.iter().map(|r| r * r).sum::<f64>() / nf + rho / pf * v.iter().zip(&av).map(|(a, b)| a * b).sum::<f64>();
    let grad = (0..p)
        .map(|j| -2.0 / (nf * pf) * (0..n).map(|i| xc[i][j] * resid[i]).sum::<f64>() + 2.0 * rho / pf * av[j])
        .collect();
    (value, grad)
}

/// Conjugate gradients on the quadratic objective, driven only by gradients.
pub fn cg_minimize(xc: &[Vec<f64>], yc: &[f64], a: &[Vec<f64>], rho: f64) -> Vec<f64> {
    let p = xc[0].len();
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let mut x = vec![0.0; p];
    let g0 = objective(xc, yc, a, rho, &vec![0.0; p]).1;
    // Hessian-vector product from gradient differences (exact for a quadratic).
    let hess = |d: &[f64]| {
        let g = objective(xc, yc, a, rho, d).1;
        g.iter().zip(&g0).map(|(a, b)| a - b).collect::<Vec<f64>>()
    };
    for _restart in 0..20 {
        let mut r: Vec<f64> = objective(xc, yc, a, rho, &x).1.iter().map(|g| -g).collect();
        let mut d = r.clone();
        let mut rr = dot(&r, &r);
        for _ in 0..4 * p {
            if rr.sqrt() < 1e-15 {
                break;
            }
            let hd = hess(&d);
            let step = rr / dot(&d, &hd);
            for k in 0..p {
                x[k] += step * d[k];
                r[k] -= step * hd[k];
            }
            let rr_new = dot(&r, &r);
            for k in 0..p {
                d[k] = r[k] + rr_new / rr * d[k];
            }
            rr = rr_new;
        }
    }
    x
}
