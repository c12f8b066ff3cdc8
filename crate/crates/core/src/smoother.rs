//! Spectral form of the penalised normal equations.
//!
//! With `A_m = LLᵀ` and `S̃ = L⁻¹ S L⁻ᵀ = U diag(s) Uᵀ`, the system matrix is
//! `M(ρ) = S + ρA_m = L U diag(s + ρ) Uᵀ Lᵀ`, so one decomposition serves
//! every `ρ`: `M(ρ)⁻¹ = V diag(1/(s + ρ)) Vᵀ` with `V = L⁻ᵀU`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::spline::PenaltyOperator;

#[derive(Debug, Clone)]
pub(crate) struct SpectralSmoother {
    n: usize,
    p: usize,
    v: DMatrix<f64>,
    s: DVector<f64>,
    /// `Xc V`, the design in spectral coordinates.
    z: DMatrix<f64>,
    /// Diagonal of `Vᵀ ((1/(np)) XcᵀXc) V`.
    d: DVector<f64>,
}

impl SpectralSmoother {
    /// Decompose `S = (1/(np)) XcᵀXc - correction·I` against `A_m`.
    pub(crate) fn new(xc: &DMatrix<f64>, op: &PenaltyOperator, correction: f64) -> Self {
        let (n, p) = xc.shape();
        let np = (n * p) as f64;
        let l = op.cholesky().l();
        // Xc L⁻ᵀ, computed as (L⁻¹ Xcᵀ)ᵀ.
        let mut t = xc.transpose();
        l.solve_lower_triangular_mut(&mut t);
        let white = t.transpose();
        let mut inner = white.tr_mul(&white) / np;
        if correction != 0.0 {
            let mut linv = DMatrix::identity(p, p);
            l.solve_lower_triangular_mut(&mut linv);
            inner -= (&linv * linv.transpose()) * correction;
        }
        let inner = (&inner + inner.transpose()) * 0.5;
        let eig = SymmetricEigen::new(inner);
        let u = eig.eigenvectors;
        let mut v = u.clone();
        l.transpose().solve_upper_triangular_mut(&mut v);
        let z = &white * &u;
        let d = DVector::from_iterator(p, z.column_iter().map(|c| c.norm_squared() / np));
        Self {
            n,
            p,
            v,
            s: eig.eigenvalues,
            z,
            d,
        }
    }

    pub(crate) fn max_eigenvalue(&self) -> f64 {
        self.s.max()
    }

    /// Smallest diagonal entry of `diag(s + ρ)`, the pivots of `M(ρ)` in
    /// spectral coordinates.
    pub(crate) fn min_pivot(&self, rho: f64) -> f64 {
        self.s.min() + rho
    }

    pub(crate) fn check_pivots(&self, rho: f64) -> Result<()> {
        let min_pivot = self.min_pivot(rho);
        let scale = self.s.amax().max(rho);
        if !(min_pivot > f64::EPSILON * scale) {
            return Err(Error::Conditioning { min_pivot });
        }
        Ok(())
    }

    /// `g = Vᵀ Xcᵀ yc`.
    pub(crate) fn project(&self, yc: &DVector<f64>) -> DVector<f64> {
        self.z.tr_mul(yc)
    }

    fn scaled(&self, g: &DVector<f64>, rho: f64) -> DVector<f64> {
        g.zip_map(&self.s, |gi, si| gi / (si + rho))
    }

    /// `α̂(ρ) = (1/n) M(ρ)⁻¹ Xcᵀ yc`.
    pub(crate) fn coefficients(&self, g: &DVector<f64>, rho: f64) -> DVector<f64> {
        &self.v * self.scaled(g, rho) / self.n as f64
    }

    /// Fitted centred responses `(1/p) Xc α̂(ρ) = H_ρ yc`.
    pub(crate) fn fitted(&self, g: &DVector<f64>, rho: f64) -> DVector<f64> {
        &self.z * self.scaled(g, rho) / (self.n * self.p) as f64
    }

    /// `Tr(H_ρ) = Σ d_i / (s_i + ρ)`.
    pub(crate) fn trace(&self, rho: f64) -> f64 {
        self.d.iter().zip(self.s.iter()).map(|(d, s)| d / (s + rho)).sum()
    }
}
