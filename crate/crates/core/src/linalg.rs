//! Dense-band linear algebra: symmetric banded SPD systems (Cholesky) and the
//! symmetric tridiagonal eigenproblem used for Gauss quadrature rules.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // std test builds shadow these with inherent methods
use crate::real::Real;
use crate::{Error, Result};

/// Symmetric banded matrix stored by diagonals.
///
/// `bands[0]` is the main diagonal (length `n`); `bands[k]` holds the k-th
/// super-diagonal (length `n - k`). P1 stiffness is tridiagonal (`bw = 1`),
/// P2 stiffness pentadiagonal (`bw = 2`).
#[derive(Debug, Clone)]
pub struct SymBanded {
    n: usize,
    bands: Vec<Vec<f64>>,
}

impl SymBanded {
    pub fn zeros(n: usize, bandwidth: usize) -> Self {
        let bands = (0..=bandwidth).map(|k| vec![0.0; n - k.min(n)]).collect();
        SymBanded { n, bands }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bands.len() - 1
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        let k = hi - lo;
        if k < self.bands.len() {
            self.bands[k][lo]
        } else {
            0.0
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        let k = hi - lo;
        debug_assert!(k < self.bands.len(), "entry outside band");
        self.bands[k][lo] += v;
    }

    pub fn scale(&mut self, s: f64) {
        for band in &mut self.bands {
            for v in band {
                *v *= s;
            }
        }
    }

    /// y = A x for the full symmetric matrix.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            y[i] += self.bands[0][i] * x[i];
        }
        for (k, band) in self.bands.iter().enumerate().skip(1) {
            for (i, &v) in band.iter().enumerate() {
                y[i] += v * x[i + k];
                y[i + k] += v * x[i];
            }
        }
        y
    }

    /// x^T A x without forming A x.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let y = self.matvec(x);
        x.iter().zip(&y).map(|(a, b)| a * b).sum()
    }

    /// Banded Cholesky factorization A = L L^T.
    pub fn cholesky(&self) -> Result<BandedCholesky> {
        let n = self.n;
        let bw = self.bandwidth();
        let mut l = self.bands.clone();
        for j in 0..n {
            let start = j.saturating_sub(bw);
            let mut d = l[0][j];
            for k in start..j {
                let v = l[j - k][k];
                d -= v * v;
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::SingularSystem("matrix is not positive definite"));
            }
            let dj = d.sqrt();
            l[0][j] = dj;
            let last = (j + bw).min(n - 1);
            for i in (j + 1)..=last {
                let mut s = self.get(i, j);
                let start_i = i.saturating_sub(bw);
                for k in start_i.max(start)..j {
                    s -= l[i - k][k] * l[j - k][k];
                }
                l[i - j][j] = s / dj;
            }
        }
        Ok(BandedCholesky { n, l })
    }
}

/// Lower-triangular banded Cholesky factor.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    n: usize,
    l: Vec<Vec<f64>>,
}

impl BandedCholesky {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        debug_assert_eq!(rhs.len(), self.n);
        let bw = self.l.len() - 1;
        let mut x = rhs.to_vec();
        // forward: L y = b
        for i in 0..self.n {
            let start = i.saturating_sub(bw);
            let mut s = x[i];
            for k in start..i {
                s -= self.l[i - k][k] * x[k];
            }
            x[i] = s / self.l[0][i];
        }
        // backward: L^T x = y
        for i in (0..self.n).rev() {
            let last = (i + bw).min(self.n - 1);
            let mut s = x[i];
            for j in (i + 1)..=last {
                s -= self.l[j - i][i] * x[j];
            }
            x[i] = s / self.l[0][i];
        }
        x
    }
}

/// Eigenvalues and first eigenvector components of a symmetric tridiagonal
/// matrix, by the implicit-shift QL iteration.
///
/// `diag` has length `n`, `offdiag[i]` couples rows `i` and `i+1`. Returns
/// pairs `(lambda_i, z_i)` sorted by eigenvalue, where `z_i` is the first
/// component of the normalized eigenvector (all that Golub-Welsch needs).
pub fn tridiag_eigen_first_components(diag: &[f64], offdiag: &[f64]) -> Result<Vec<(f64, f64)>> {
    let n = diag.len();
    debug_assert!(offdiag.len() + 1 >= n);
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(&offdiag[..n - 1]);
    let mut z = vec![0.0; n];
    z[0] = 1.0;
    let eps = f64::EPSILON;

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m < n - 1 {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= eps * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 50 {
                return Err(Error::SingularSystem("QL iteration did not converge"));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            let sign_r = if g >= 0.0 { r.abs() } else { -r.abs() };
            g = d[m] - d[l] + e[l] / (g + sign_r);
            let (mut s, mut c) = (1.0, 1.0);
            let mut p = 0.0;
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                f = z[i + 1];
                z[i + 1] = s * z[i] + c * f;
                z[i] = c * z[i] - s * f;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }

    let mut pairs: Vec<(f64, f64)> = d.into_iter().zip(z).collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite eigenvalues"));
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_solves_tridiagonal_poisson() {
        // 1D Laplacian, n = 5, h = 1: known SPD system.
        let n = 5;
        let mut a = SymBanded::zeros(n, 1);
        for i in 0..n {
            a.add(i, i, 2.0);
            if i + 1 < n {
                a.add(i, i + 1, -1.0);
            }
        }
        let rhs = vec![1.0, 0.0, 2.0, -1.0, 0.5];
        let x = a.cholesky().unwrap().solve(&rhs);
        let res = a.matvec(&x);
        for (r, b) in res.iter().zip(&rhs) {
            assert!((r - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut a = SymBanded::zeros(3, 1);
        a.add(0, 0, 1.0);
        a.add(1, 1, -2.0);
        a.add(2, 2, 1.0);
        assert!(a.cholesky().is_err());
    }

    #[test]
    fn pentadiagonal_roundtrip() {
        let n = 12;
        let mut a = SymBanded::zeros(n, 2);
        for i in 0..n {
            a.add(i, i, 6.0);
            if i + 1 < n {
                a.add(i, i + 1, -2.0);
            }
            if i + 2 < n {
                a.add(i, i + 2, 0.5);
            }
        }
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64) * 0.3 - 1.0).collect();
        let x = a.cholesky().unwrap().solve(&rhs);
        let res = a.matvec(&x);
        for (r, b) in res.iter().zip(&rhs) {
            assert!((r - b).abs() < 1e-11);
        }
    }

    #[test]
    fn eigen_matches_analytic_laplacian_spectrum() {
        // Eigenvalues of tridiag(-1, 2, -1) of size n: 2 - 2 cos(k pi / (n+1)).
        let n = 8;
        let d = vec![2.0; n];
        let e = vec![-1.0; n - 1];
        let pairs = tridiag_eigen_first_components(&d, &e).unwrap();
        for (k, (lambda, _)) in pairs.iter().enumerate() {
            let exact =
                2.0 - 2.0 * ((k + 1) as f64 * core::f64::consts::PI / (n as f64 + 1.0)).cos();
            assert!((lambda - exact).abs() < 1e-12, "k={k}: {lambda} vs {exact}");
        }
        // First components squared sum to 1 over... each eigenvector is normalized,
        // so the squares of first components sum to 1 (rows of orthogonal matrix).
        let sum: f64 = pairs.iter().map(|(_, z)| z * z).sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }
}
