//! Equidistant grids, natural-spline interpolation and the roughness penalty.
//!
//! A natural spline of order `2m` with knots `t_1 < ... < t_p` is a piecewise
//! polynomial of degree `2m - 1` on `[t_1, t_p]` with `2m - 2` continuous
//! derivatives, extended outside `[t_1, t_p]` by a polynomial of degree
//! `m - 1`. The space has dimension `p`, and every vector of values at the
//! knots has exactly one interpolant in it. That interpolant minimises
//! `∫ (f^{(m)})²` among all interpolants, which turns the roughness penalty of
//! a function into a quadratic form in its values at the grid.
//!
//! The basis used here is a clamped B-spline basis of order `2m` recombined so
//! that the derivatives of orders `m..=2m-2` vanish at both boundary knots.
//! The penalty matrices do not depend on which basis of the space is chosen.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::bspline::{gauss_legendre_on, KnotVector};
use crate::error::{check_len, Error, Result};

/// Largest accepted condition estimate of `BᵀB`.
pub const MAX_BASIS_CONDITION: f64 = 1e12;

/// Largest supported smoothness order `m`.
pub const MAX_ORDER: usize = 3;

/// Equidistant midpoint grid `t_j = (2j - 1) / (2p)` on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points: Vec<f64>,
}

impl Grid {
    pub fn new(p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidArgument("grid needs p >= 1 points".into()));
        }
        let denom = 2.0 * p as f64;
        let points = (1..=p).map(|j| (2 * j - 1) as f64 / denom).collect();
        Ok(Self { points })
    }

    pub fn p(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Grid spacing `1/p`.
    pub fn spacing(&self) -> f64 {
        1.0 / self.p() as f64
    }
}

/// Build the equidistant grid with `p` points.
pub fn build_grid(p: usize) -> Result<Grid> {
    Grid::new(p)
}

/// The space of natural splines of order `2m` on arbitrary increasing knots.
#[derive(Debug, Clone)]
pub struct NaturalSplineSpace {
    m: usize,
    knots: Arc<KnotVector>,
    breakpoints: Vec<f64>,
    /// Orthonormal basis of admissible B-spline coefficient vectors (N × p).
    recombination: DMatrix<f64>,
    /// `(BᵀB)⁻¹Bᵀ`, mapping knot values to basis coefficients.
    value_to_coef: DMatrix<f64>,
    condition: f64,
}

impl NaturalSplineSpace {
    /// Natural splines of order `2m` with knots at `breakpoints`.
    ///
    /// Requires `1 <= m <= 3`, at least `max(m, 2)` strictly increasing knots,
    /// and a basis matrix whose Gram condition estimate stays below
    /// [`MAX_BASIS_CONDITION`].
    pub fn new(breakpoints: &[f64], m: usize) -> Result<Self> {
        if !(1..=MAX_ORDER).contains(&m) {
            return Err(Error::UnsupportedOrder(m));
        }
        let p = breakpoints.len();
        let needed = m.max(2);
        if p < needed {
            return Err(Error::UnderdeterminedBasis { p, m, needed });
        }
        if breakpoints.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidInput("knots must be finite".into()));
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(
                "knots must be strictly increasing (duplicate or unsorted times)".into(),
            ));
        }

        let knots = KnotVector::clamped(breakpoints, 2 * m);
        let n_full = knots.len();
        let recombination = natural_constraints_null_space(&knots, m)?;
        debug_assert_eq!(recombination.ncols(), p);

        let mut eval = DMatrix::zeros(p, n_full);
        for (j, &t) in breakpoints.iter().enumerate() {
            eval.row_mut(j)
                .copy_from_slice(&knots.dense_row(t, 0));
        }
        let basis = &eval * &recombination;
        let svd = basis.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        let condition = if smin > 0.0 { (smax / smin).powi(2) } else { f64::INFINITY };
        if condition > MAX_BASIS_CONDITION {
            return Err(Error::IllConditioned { condition });
        }
        let value_to_coef = svd
            .pseudo_inverse(0.0)
            .map_err(|e| Error::InvalidInput(e.to_string()))?;

        Ok(Self {
            m,
            knots: Arc::new(knots),
            breakpoints: breakpoints.to_vec(),
            recombination,
            value_to_coef,
            condition,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn knots(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Condition estimate of `BᵀB`.
    pub fn basis_condition(&self) -> f64 {
        self.condition
    }

    /// The natural spline interpolant of `values` at the knots.
    pub fn interpolate(&self, values: &[f64]) -> Result<SplineFunction> {
        check_len(self.breakpoints.len(), values.len())?;
        let w = DVector::from_column_slice(values);
        let coef = &self.value_to_coef * w;
        let full = &self.recombination * coef;
        Ok(SplineFunction::new(
            self.m,
            Arc::clone(&self.knots),
            full.as_slice().to_vec(),
        ))
    }

    /// Matrix `R` with `∫ s_w^{(m)}(t)² dt = ‖R w‖²` for every value vector `w`.
    ///
    /// Rows are Gauss–Legendre samples of the `m`-th derivative with `2m`
    /// nodes per knot interval, which is exact for the squared derivative.
    fn roughness_root(&self) -> DMatrix<f64> {
        let kv = &self.knots;
        let nodes = 2 * self.m;
        let rows = kv.intervals() * nodes;
        let mut deriv = DMatrix::zeros(rows, kv.len());
        let mut r = 0;
        for i in 0..kv.intervals() {
            let (a, b) = (kv.breakpoint(i), kv.breakpoint(i + 1));
            let span = kv.interval_span(i);
            for (x, w) in gauss_legendre_on(nodes, a, b) {
                let row = kv.dense_row_on_span(span, x, self.m);
                let sw = w.sqrt();
                for (c, v) in row.into_iter().enumerate() {
                    deriv[(r, c)] = sw * v;
                }
                r += 1;
            }
        }
        deriv * &self.recombination * &self.value_to_coef
    }
}

/// Orthonormal basis of the B-spline coefficient vectors satisfying the
/// natural boundary conditions `s^{(l)}(t_1) = s^{(l)}(t_p) = 0`, `m <= l <= 2m-2`.
fn natural_constraints_null_space(knots: &KnotVector, m: usize) -> Result<DMatrix<f64>> {
    let n_full = knots.len();
    let n_constraints = 2 * m - 2;
    if n_constraints == 0 {
        return Ok(DMatrix::identity(n_full, n_full));
    }
    let first_span = knots.interval_span(0);
    let last_span = knots.interval_span(knots.intervals() - 1);
    // Padded square matrix whose first columns are the constraint rows; the
    // trailing columns of its full Q span the null space.
    let mut padded = DMatrix::zeros(n_full, n_full);
    let mut c = 0;
    for l in m..=2 * m - 2 {
        for (span, x) in [(first_span, knots.first()), (last_span, knots.last())] {
            let row = knots.dense_row_on_span(span, x, l);
            let scale = row.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            for (i, v) in row.into_iter().enumerate() {
                padded[(i, c)] = v / scale;
            }
            c += 1;
        }
    }
    let qr = padded.qr();
    let r = qr.r();
    let diag = r.diagonal();
    let rmax = diag.iter().take(n_constraints).fold(0.0f64, |a, v| a.max(v.abs()));
    if diag.iter().take(n_constraints).any(|v| v.abs() <= 1e-12 * rmax) {
        return Err(Error::UnderdeterminedBasis {
            p: knots.intervals() + 1,
            m,
            needed: m,
        });
    }
    let q = qr.q();
    Ok(q.columns(n_constraints, n_full - n_constraints).into_owned())
}

/// A natural spline on `[t_1, t_p]`, extended by its degree `m - 1` Taylor
/// polynomial outside the knot range.
#[derive(Debug, Clone)]
pub struct SplineFunction {
    m: usize,
    knots: Arc<KnotVector>,
    coefs: Vec<f64>,
    left: Vec<f64>,
    right: Vec<f64>,
}

impl SplineFunction {
    fn new(m: usize, knots: Arc<KnotVector>, coefs: Vec<f64>) -> Self {
        let left = (0..m).map(|l| knots.evaluate(&coefs, knots.first(), l)).collect();
        let right = (0..m).map(|l| knots.evaluate(&coefs, knots.last(), l)).collect();
        Self {
            m,
            knots,
            coefs,
            left,
            right,
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Value at `t`.
    pub fn eval(&self, t: f64) -> f64 {
        self.derivative(t, 0)
    }

    /// `order`-th derivative at `t`.
    pub fn derivative(&self, t: f64, order: usize) -> f64 {
        let (a, b) = (self.knots.first(), self.knots.last());
        if t < a || t > b {
            let (anchor, taylor) = if t < a { (a, &self.left) } else { (b, &self.right) };
            let h = t - anchor;
            let mut sum = 0.0;
            let mut fact = 1.0;
            for (k, c) in taylor.iter().enumerate().skip(order) {
                let power = (k - order) as i32;
                if k > order {
                    fact *= (k - order) as f64;
                }
                sum += c * h.powi(power) / fact;
            }
            return sum;
        }
        if order > self.knots.degree() {
            return 0.0;
        }
        self.knots.evaluate(&self.coefs, t, order)
    }

    pub fn eval_many(&self, ts: &[f64]) -> Vec<f64> {
        ts.iter().map(|&t| self.eval(t)).collect()
    }

    /// `∫_0^1 s^{(m)}(t)² dt`, exact up to rounding.
    pub fn roughness(&self) -> f64 {
        let kv = &self.knots;
        let mut total = 0.0;
        for i in 0..kv.intervals() {
            let (a, b) = (kv.breakpoint(i), kv.breakpoint(i + 1));
            for (x, w) in gauss_legendre_on(2 * self.m, a, b) {
                let d = kv.evaluate(&self.coefs, x, self.m);
                total += w * d * d;
            }
        }
        total
    }

    /// `∫_lo^hi s(t) g(t) dt` by Gauss–Legendre on each knot interval (and on
    /// the polynomial tails), with `nodes` nodes per piece.
    pub fn integrate_product<F: Fn(f64) -> f64>(&self, g: F, lo: f64, hi: f64, nodes: usize) -> f64 {
        let mut cuts = vec![lo];
        let kv = &self.knots;
        for i in 0..=kv.intervals() {
            let t = kv.breakpoint(i);
            if t > lo && t < hi {
                cuts.push(t);
            }
        }
        cuts.push(hi);
        cuts.windows(2)
            .map(|w| {
                gauss_legendre_on(nodes, w[0], w[1])
                    .map(|(x, wt)| wt * self.eval(x) * g(x))
                    .sum::<f64>()
            })
            .sum()
    }
}

/// Penalty matrices of the discretised roughness criterion for one `(grid, m)`.
///
/// `A_m* = B(BᵀB)⁻¹ G (BᵀB)⁻¹Bᵀ` gives `wᵀA_m*w = ∫ (s_w^{(m)})²`, `P_m`
/// projects onto discretised polynomials of degree `m - 1`, and
/// `A_m = P_m + p·A_m*` is positive definite. Immutable once built.
#[derive(Debug, Clone)]
pub struct PenaltyOperator {
    grid: Grid,
    space: NaturalSplineSpace,
    basis: DMatrix<f64>,
    gram: DMatrix<f64>,
    projector: DMatrix<f64>,
    roughness_root: DMatrix<f64>,
    a_star: DMatrix<f64>,
    a_m: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl PenaltyOperator {
    pub fn new(grid: &Grid, m: usize) -> Result<Self> {
        if !(1..=MAX_ORDER).contains(&m) {
            return Err(Error::UnsupportedOrder(m));
        }
        let p = grid.p();
        if p < 2 * m {
            return Err(Error::UnderdeterminedBasis { p, m, needed: 2 * m });
        }
        let space = NaturalSplineSpace::new(grid.points(), m)?;

        let kv = &space.knots;
        let mut eval = DMatrix::zeros(p, kv.len());
        for (j, &t) in grid.points().iter().enumerate() {
            eval.row_mut(j).copy_from_slice(&kv.dense_row(t, 0));
        }
        let basis = eval * &space.recombination;

        // Condense the quadrature rows to a p × p triangular root.
        let tall = space.roughness_root();
        let roughness_root = if tall.nrows() >= p {
            tall.qr().r()
        } else {
            tall
        };
        let mut a_star = roughness_root.tr_mul(&roughness_root);
        a_star = (&a_star + a_star.transpose()) * 0.5;

        // G in basis coordinates: G = Bᵀ A_m* B.
        let gram = basis.tr_mul(&(&a_star * &basis));
        let gram = (&gram + gram.transpose()) * 0.5;

        let projector = polynomial_projector(grid.points(), m);
        let a_m = &projector + &a_star * p as f64;
        let a_m = (&a_m + a_m.transpose()) * 0.5;
        let chol = a_m.clone().cholesky().ok_or_else(|| {
            let sv = a_m.singular_values();
            Error::IllConditioned {
                condition: sv.max() / sv.min().max(f64::MIN_POSITIVE),
            }
        })?;

        Ok(Self {
            grid: grid.clone(),
            space,
            basis,
            gram,
            projector,
            roughness_root,
            a_star,
            a_m,
            chol,
        })
    }

    pub fn m(&self) -> usize {
        self.space.m
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn p(&self) -> usize {
        self.grid.p()
    }

    /// `B` with entries `b_k(t_j)` (row `j`, column `k`).
    pub fn basis_matrix(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// `∫ b^{(m)}(t) b^{(m)}(t)ᵀ dt` in the same basis.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn projector(&self) -> &DMatrix<f64> {
        &self.projector
    }

    pub fn a_star(&self) -> &DMatrix<f64> {
        &self.a_star
    }

    pub fn a_m(&self) -> &DMatrix<f64> {
        &self.a_m
    }

    /// Cholesky factor of `A_m`.
    pub fn cholesky(&self) -> &Cholesky<f64, Dyn> {
        &self.chol
    }

    pub fn space(&self) -> &NaturalSplineSpace {
        &self.space
    }

    pub fn basis_condition(&self) -> f64 {
        self.space.condition
    }

    /// Eigenvalues of `p·A_m*` in increasing order.
    ///
    /// Computed as squared singular values of the roughness root, so the `m`
    /// null eigenvalues are resolved far below the rounding level of the
    /// assembled matrix.
    pub fn penalty_eigenvalues(&self) -> Vec<f64> {
        let scaled = &self.roughness_root * (self.p() as f64).sqrt();
        let sv = scaled.singular_values();
        let mut eig: Vec<f64> = sv.iter().map(|s| s * s).collect();
        eig.resize(self.p(), 0.0);
        eig.sort_by(f64::total_cmp);
        eig
    }

    pub fn interpolate(&self, w: &[f64]) -> Result<SplineFunction> {
        self.space.interpolate(w)
    }

    /// `(1/p) wᵀ A_m w = (1/p) wᵀ P_m w + wᵀ A_m* w`.
    pub fn penalty_quadratic(&self, w: &[f64]) -> Result<f64> {
        check_len(self.p(), w.len())?;
        let v = DVector::from_column_slice(w);
        let poly = v.dot(&(&self.projector * &v)) / self.p() as f64;
        let rough = (&self.roughness_root * &v).norm_squared();
        Ok(poly + rough)
    }
}

/// Build the penalty operator for `grid` and order `m`.
pub fn build_penalty(grid: &Grid, m: usize) -> Result<PenaltyOperator> {
    PenaltyOperator::new(grid, m)
}

/// Orthogonal projector onto `{(π(t_j))_j : deg π < m}`, from a QR
/// factorisation of the Vandermonde matrix in the centred variable `t - 1/2`.
fn polynomial_projector(points: &[f64], m: usize) -> DMatrix<f64> {
    let p = points.len();
    let vander = DMatrix::from_fn(p, m, |j, l| (points[j] - 0.5).powi(l as i32));
    let q = vander.qr().q();
    let p_m = &q * q.transpose();
    (&p_m + p_m.transpose()) * 0.5
}
