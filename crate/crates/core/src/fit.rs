//! Log-log least-squares rate fitting shared by the spatial and sweep
//! diagnostics.

use alloc::vec::Vec;

#[allow(unused_imports)] // std test builds shadow these with inherent methods
use crate::real::Real;
use crate::{Error, Result};

/// Result of fitting `log(e) = intercept - slope * log(n)`.
///
/// `slope` is reported with the sign convention of a convergence rate:
/// data decaying like `n^{-r}` fits to `slope = r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual of the fit in log space.
    pub residual: f64,
    pub points: usize,
}

/// Least-squares fit in log-log coordinates of `(n, e)` pairs.
///
/// Refuses fits on fewer than 4 points or on non-positive data.
pub fn fit_loglog(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 4 {
        return Err(Error::TooFewPoints(points.len()));
    }
    let mut xs = Vec::with_capacity(points.len());
    let mut ys = Vec::with_capacity(points.len());
    for &(n, e) in points {
        if !(n > 0.0 && e > 0.0) || !n.is_finite() || !e.is_finite() {
            return Err(Error::InvalidParameter(alloc::format!(
                "rate fit requires positive finite data, got ({n}, {e})"
            )));
        }
        xs.push(n.ln());
        ys.push(e.ln());
    }
    let m = points.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return Err(Error::InvalidParameter(alloc::string::String::from(
            "rate fit requires distinct abscissae",
        )));
    }
    let b = sxy / sxx;
    let a = my - b * mx;
    let mut ss = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        let r = y - (a + b * x);
        ss += r * r;
    }
    Ok(RateFit {
        slope: -b,
        intercept: a,
        residual: (ss / m).sqrt(),
        points: points.len(),
    })
}

/// Decades spanned by the abscissae, used to guard rate fits.
pub fn span_decades(points: &[(f64, f64)]) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for &(n, _) in points {
        lo = lo.min(n);
        hi = hi.max(n);
    }
    if lo > 0.0 && hi > lo {
        (hi / lo).log10()
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn exact_power_law_recovered() {
        let pts: Vec<(f64, f64)> = (1..=8)
            .map(|k| {
                let n = (1u64 << k) as f64;
                (n, 3.5 * n.powf(-2.0))
            })
            .collect();
        let fit = fit_loglog(&pts).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!(fit.residual < 1e-12);
    }

    #[test]
    fn slope_invariant_under_rescaling() {
        let pts: Vec<(f64, f64)> = (1..=6)
            .map(|k| {
                let n = (10.0f64).powi(k);
                (n, n.powf(-1.0))
            })
            .collect();
        let scaled: Vec<(f64, f64)> = pts.iter().map(|&(n, e)| (7.0 * n, 0.01 * e)).collect();
        let f1 = fit_loglog(&pts).unwrap();
        let f2 = fit_loglog(&scaled).unwrap();
        assert!((f1.slope - f2.slope).abs() < 1e-12);
    }

    #[test]
    fn refuses_small_samples() {
        let pts = vec![(1.0, 1.0), (2.0, 0.5), (4.0, 0.25)];
        assert!(matches!(fit_loglog(&pts), Err(Error::TooFewPoints(3))));
    }

    #[test]
    fn noisy_slope_recovered() {
        // Deterministic +-3% multiplicative perturbation.
        let noise = [1.03, 0.97, 1.02, 0.98, 1.01, 0.99, 1.03, 0.97];
        let pts: Vec<(f64, f64)> = (1..=8)
            .map(|k| {
                let n = (1u64 << k) as f64;
                (n, 2.0 * n.powf(-1.5) * noise[k - 1])
            })
            .collect();
        let fit = fit_loglog(&pts).unwrap();
        assert!((fit.slope - 1.5).abs() < 0.05, "slope {}", fit.slope);
    }

    #[test]
    fn span_guard() {
        let pts = vec![(2.0, 1.0), (64.0, 0.1)];
        assert!((span_decades(&pts) - (32.0f64).log10()).abs() < 1e-12);
    }
}
