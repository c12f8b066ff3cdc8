//! Clamped B-spline bases and Gauss–Legendre rules.
//!
//! Basis values and derivatives follow the triangular Cox–de Boor scheme:
//! only the `order` functions that are nonzero on a knot span are evaluated.

/// Clamped knot vector of a given order over strictly increasing breakpoints.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct KnotVector {
    knots: Vec<f64>,
    order: usize,
    breakpoints: usize,
}

impl KnotVector {
    /// Breakpoints become simple interior knots; both ends repeat `order` times.
    pub(crate) fn clamped(breakpoints: &[f64], order: usize) -> Self {
        debug_assert!(breakpoints.len() >= 2 && order >= 1);
        let first = breakpoints[0];
        let last = breakpoints[breakpoints.len() - 1];
        let mut knots = Vec::with_capacity(breakpoints.len() - 2 + 2 * order);
        knots.extend(std::iter::repeat_n(first, order));
        knots.extend_from_slice(&breakpoints[1..breakpoints.len() - 1]);
        knots.extend(std::iter::repeat_n(last, order));
        Self {
            knots,
            order,
            breakpoints: breakpoints.len(),
        }
    }

    pub(crate) fn degree(&self) -> usize {
        self.order - 1
    }

    /// Number of basis functions.
    pub(crate) fn len(&self) -> usize {
        self.knots.len() - self.order
    }

    pub(crate) fn first(&self) -> f64 {
        self.knots[0]
    }

    pub(crate) fn last(&self) -> f64 {
        self.knots[self.knots.len() - 1]
    }

    /// Breakpoint `i` (0-based) of the underlying partition.
    pub(crate) fn breakpoint(&self, i: usize) -> f64 {
        self.knots[self.degree() + i]
    }

    pub(crate) fn intervals(&self) -> usize {
        self.breakpoints - 1
    }

    /// Knot span index `s` with `knots[s] <= x < knots[s + 1]`, clamped to
    /// the supported interval. The right end maps to the last nonempty span.
    pub(crate) fn span(&self, x: f64) -> usize {
        let d = self.degree();
        let n = self.len();
        if x >= self.knots[n] {
            return n - 1;
        }
        if x <= self.knots[d] {
            return d;
        }
        // knots[d..=n] is sorted; find last index with knots[i] <= x.
        let slice = &self.knots[d..=n];
        let pos = slice.partition_point(|&k| k <= x);
        d + pos - 1
    }

    /// Values and derivatives (orders `0..=max_deriv`) of the nonzero basis
    /// functions on `span` at `x`. Returns `ders[k][r]` for basis index
    /// `span - degree + r`.
    pub(crate) fn derivatives(&self, span: usize, x: f64, max_deriv: usize) -> Vec<Vec<f64>> {
        let p = self.degree();
        let u = &self.knots;
        let mut ndu = vec![vec![0.0; p + 1]; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        ndu[0][0] = 1.0;
        for j in 1..=p {
            left[j] = x - u[span + 1 - j];
            right[j] = u[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                ndu[j][r] = right[r + 1] + left[j - r];
                let temp = ndu[r][j - 1] / ndu[j][r];
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }

        let nd = max_deriv.min(p);
        let mut ders = vec![vec![0.0; p + 1]; max_deriv + 1];
        for j in 0..=p {
            ders[0][j] = ndu[j][p];
        }
        let mut a = vec![vec![0.0; p + 1]; 2];
        for r in 0..=p {
            let (mut s1, mut s2) = (0usize, 1usize);
            a[0][0] = 1.0;
            for k in 1..=nd {
                let mut d = 0.0;
                let rk = r as isize - k as isize;
                let pk = p - k;
                if r >= k {
                    a[s2][0] = a[s1][0] / ndu[pk + 1][rk as usize];
                    d = a[s2][0] * ndu[rk as usize][pk];
                }
                let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
                let j2 = if (r as isize - 1) <= pk as isize { k - 1 } else { p - r };
                for j in j1..=j2 {
                    let idx = (rk + j as isize) as usize;
                    a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                    d += a[s2][j] * ndu[idx][pk];
                }
                if r <= pk {
                    a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                    d += a[s2][k] * ndu[r][pk];
                }
                ders[k][r] = d;
                std::mem::swap(&mut s1, &mut s2);
            }
        }
        let mut factor = p as f64;
        for k in 1..=nd {
            for v in ders[k].iter_mut() {
                *v *= factor;
            }
            factor *= (p - k) as f64;
        }
        ders
    }

    /// Dense row of the `deriv`-th derivative of every basis function at `x`.
    pub(crate) fn dense_row(&self, x: f64, deriv: usize) -> Vec<f64> {
        let span = self.span(x);
        self.dense_row_on_span(span, x, deriv)
    }

    pub(crate) fn dense_row_on_span(&self, span: usize, x: f64, deriv: usize) -> Vec<f64> {
        let mut row = vec![0.0; self.len()];
        let ders = self.derivatives(span, x, deriv);
        let start = span - self.degree();
        for (r, v) in ders[deriv].iter().enumerate() {
            row[start + r] = *v;
        }
        row
    }

    /// Span index covering breakpoint interval `i` (0-based).
    pub(crate) fn interval_span(&self, i: usize) -> usize {
        self.degree() + i
    }

    /// Evaluate `sum_i coefs[i] * B_i^{(deriv)}(x)` for `x` inside the knot range.
    pub(crate) fn evaluate(&self, coefs: &[f64], x: f64, deriv: usize) -> f64 {
        let span = self.span(x);
        let ders = self.derivatives(span, x, deriv);
        let start = span - self.degree();
        ders[deriv]
            .iter()
            .enumerate()
            .map(|(r, b)| b * coefs[start + r])
            .sum()
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub(crate) fn gauss_legendre(count: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; count];
    let mut weights = vec![0.0; count];
    let n = count as f64;
    for i in 0..count.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=count {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            let pn = if count == 1 { x } else { p1 };
            let pm1 = if count == 1 { 1.0 } else { p0 };
            dp = n * (x * pn - pm1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[count - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[count - 1 - i] = w;
    }
    (nodes, weights)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub(crate) fn gauss_legendre_on(count: usize, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> {
    let (nodes, weights) = gauss_legendre(count);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    nodes
        .into_iter()
        .zip(weights)
        .map(move |(x, w)| (mid + half * x, half * w))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_of_unity() {
        let kv = KnotVector::clamped(&[0.0, 0.2, 0.5, 0.7, 1.0], 4);
        assert_eq!(kv.len(), 7);
        for &x in &[0.0, 0.1, 0.33, 0.5, 0.99, 1.0] {
            let s: f64 = kv.dense_row(x, 0).iter().sum();
            assert!((s - 1.0).abs() < 1e-14, "x = {x}: {s}");
            let ds: f64 = kv.dense_row(x, 1).iter().sum();
            assert!(ds.abs() < 1e-12);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let kv = KnotVector::clamped(&[0.0, 0.15, 0.4, 0.6, 0.8, 1.0], 6);
        let coefs: Vec<f64> = (0..kv.len()).map(|i| ((i * 7 % 5) as f64) - 1.7).collect();
        let h = 1e-6;
        for &x in &[0.05, 0.3, 0.47, 0.71, 0.9] {
            for d in 0..4 {
                let fd = (kv.evaluate(&coefs, x + h, d) - kv.evaluate(&coefs, x - h, d)) / (2.0 * h);
                let an = kv.evaluate(&coefs, x, d + 1);
                assert!((fd - an).abs() <= 1e-5 * (1.0 + an.abs()), "x={x} d={d}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for count in 1..=8 {
            let (x, w) = gauss_legendre(count);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
            for deg in 0..2 * count {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-14, "count={count} deg={deg}");
            }
        }
    }

    #[test]
    fn span_lookup() {
        let kv = KnotVector::clamped(&[0.0, 0.5, 1.0], 2);
        assert_eq!(kv.span(0.0), 1);
        assert_eq!(kv.span(0.25), 1);
        assert_eq!(kv.span(0.5), 2);
        assert_eq!(kv.span(1.0), 2);
    }
}
