//! Optimal per-coefficient allocation of spatial degrees of freedom under a
//! parametric error budget, total-dof accounting, regime detection and
//! convergence-rate prediction, plus the wavelet-family predicted rates.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)] // std test builds shadow these with inherent methods
use crate::real::Real;
use crate::{Error, Result};

/// Error metric of the outer approximation: sup over parameters or the
/// `L^2` mean square.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Setting {
    Sup,
    L2,
}

impl Setting {
    /// Offset `c` in `s = 1/p - c` that ties a summability exponent to a
    /// best n-term rate: 1 in the sup setting, 1/2 in the mean-square one.
    pub fn rate_offset(&self) -> f64 {
        match self {
            Setting::Sup => 1.0,
            Setting::L2 => 0.5,
        }
    }
}

/// Rate parameters: parametric best n-term rate `s`, spatial rate `t`,
/// summability exponents of the coefficient norms in `V` and in the
/// smoothness class `X`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateParams {
    pub setting: Setting,
    pub s: f64,
    pub t: f64,
    pub p_v: f64,
    pub p_x: f64,
}

impl RateParams {
    /// `s` derived from `p_v` (`s = 1/p_v - 1` sup, `1/p_v - 1/2` mean-square).
    pub fn from_summability(setting: Setting, t: f64, p_v: f64, p_x: f64) -> Result<Self> {
        let s = 1.0 / p_v - setting.rate_offset();
        let params = RateParams {
            setting,
            s,
            t,
            p_v,
            p_x,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_v > 0.0 && self.p_v <= self.p_x && self.p_x < 2.0) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < p_V <= p_X < 2 (got {}, {})",
                self.p_v, self.p_x
            )));
        }
        if !(self.s > 0.0) || !(self.t > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "need s > 0 and t > 0 (got s = {}, t = {})",
                self.s, self.t
            )));
        }
        Ok(())
    }
}

/// One allocated coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllocEntry {
    pub norm: f64,
    /// Real-valued optimizer output; zero for zero-norm coefficients.
    pub dofs_real: f64,
    /// `max(1, ceil(dofs_real))`.
    pub dofs: usize,
}

/// Result of the constrained dof minimization over one index selection.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationPlan {
    pub setting: Setting,
    pub entries: Vec<AllocEntry>,
    /// Lagrange scale: `n_nu = eta * norm^{exponent}`.
    pub eta: f64,
    /// Closed-form total over the positive-norm entries.
    pub n_total_real: f64,
    /// Integer total including the floor-1 entries.
    pub n_total_int: usize,
    pub parametric_n: f64,
    pub s: f64,
    pub t: f64,
}

impl AllocationPlan {
    /// Residual of the saturated error-budget constraint with the
    /// real-valued dofs; zero up to roundoff by construction.
    pub fn constraint_residual(&self) -> f64 {
        let mut lhs = 0.0;
        for e in &self.entries {
            if e.norm > 0.0 {
                lhs += match self.setting {
                    Setting::Sup => e.dofs_real.powf(-self.t) * e.norm,
                    Setting::L2 => e.dofs_real.powf(-2.0 * self.t) * e.norm * e.norm,
                };
            }
        }
        let rhs = match self.setting {
            Setting::Sup => self.parametric_n.powf(-self.s),
            Setting::L2 => self.parametric_n.powf(-2.0 * self.s),
        };
        lhs - rhs
    }
}

fn ceil_with_slack(x: f64) -> usize {
    ((x - 1e-9).ceil().max(1.0)) as usize
}

fn allocate_impl(
    norms: &[f64],
    s: f64,
    t: f64,
    n: f64,
    setting: Setting,
) -> Result<AllocationPlan> {
    if norms.is_empty() {
        return Err(Error::EmptySelection);
    }
    if !(s > 0.0) || !(t > 0.0) || !(n >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "allocation needs s > 0, t > 0, n >= 1 (got {s}, {t}, {n})"
        )));
    }
    if norms.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidParameter(
            "coefficient norms must be finite and nonnegative".into(),
        ));
    }
    // exponent of the norm in the optimizer and in the total-dof formula
    let (expo, total_expo) = match setting {
        Setting::Sup => (1.0 / (1.0 + t), (1.0 + t) / t),
        Setting::L2 => (2.0 / (1.0 + 2.0 * t), (1.0 + 2.0 * t) / (2.0 * t)),
    };
    let sum_q: f64 = norms
        .iter()
        .filter(|v| **v > 0.0)
        .map(|v| v.powf(expo))
        .sum();
    if sum_q == 0.0 {
        return Err(Error::InvalidParameter(
            "allocation needs at least one positive norm".into(),
        ));
    }
    let eta = match setting {
        Setting::Sup => n.powf(s / t) * sum_q.powf(1.0 / t),
        Setting::L2 => n.powf(s / t) * sum_q.powf(1.0 / (2.0 * t)),
    };
    let n_total_real = n.powf(s / t) * sum_q.powf(total_expo);
    let entries: Vec<AllocEntry> = norms
        .iter()
        .map(|&norm| {
            if norm > 0.0 {
                let real = eta * norm.powf(expo);
                AllocEntry {
                    norm,
                    dofs_real: real,
                    dofs: ceil_with_slack(real),
                }
            } else {
                // zero-norm coefficients still need a representable slot
                AllocEntry {
                    norm,
                    dofs_real: 0.0,
                    dofs: 1,
                }
            }
        })
        .collect();
    let n_total_int = entries.iter().map(|e| e.dofs).sum();
    Ok(AllocationPlan {
        setting,
        entries,
        eta,
        n_total_real,
        n_total_int,
        parametric_n: n,
        s,
        t,
    })
}

/// Sup-setting allocation: `n_nu = eta ||u_nu||_X^{1/(1+t)}` with the
/// saturated budget `sum n_nu^{-t} ||u_nu||_X = n^{-s}`.
pub fn allocate(norms: &[f64], s: f64, t: f64, n: f64) -> Result<AllocationPlan> {
    allocate_impl(norms, s, t, n, Setting::Sup)
}

/// Mean-square allocation: `n_nu = eta ||u_nu||_X^{2/(1+2t)}` with the
/// saturated budget `sum n_nu^{-2t} ||u_nu||_X^2 = n^{-2s}`.
pub fn allocate_l2(norms: &[f64], s: f64, t: f64, n: f64) -> Result<AllocationPlan> {
    allocate_impl(norms, s, t, n, Setting::L2)
}

/// Uniform comparison arm: every coefficient gets the same `n_hat` dofs.
pub fn fixed_space_baseline(norms: &[f64], n: f64, n_hat: usize) -> Result<AllocationPlan> {
    if norms.is_empty() {
        return Err(Error::EmptySelection);
    }
    if n_hat == 0 {
        return Err(Error::InvalidParameter(
            "fixed baseline needs n_hat >= 1".into(),
        ));
    }
    let entries: Vec<AllocEntry> = norms
        .iter()
        .map(|&norm| AllocEntry {
            norm,
            dofs_real: n_hat as f64,
            dofs: n_hat,
        })
        .collect();
    Ok(AllocationPlan {
        setting: Setting::Sup,
        entries,
        eta: n_hat as f64,
        n_total_real: (norms.len() * n_hat) as f64,
        n_total_int: norms.len() * n_hat,
        parametric_n: n,
        s: f64::NAN,
        t: f64::NAN,
    })
}

/// Balanced uniform resolution `n_hat ~ n^{s/t}` for the fixed-space arm.
pub fn balanced_fixed_dofs(n: f64, s: f64, t: f64) -> usize {
    n.powf(s / t).round().max(1.0) as usize
}

/// Which branch of the rate analysis applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `p_X` small: the spatial rate `t` survives unharmed.
    SpatialDominated,
    /// Mixed rate `r` below `t`.
    Mixed,
}

/// Predicted convergence rate in the total number of degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePrediction {
    pub regime: Regime,
    /// `min{r, t}` as realized: `t` in the spatial regime, `r` otherwise.
    pub rate: f64,
    /// The mixed-rate formula value (also reported in the spatial regime
    /// when it is finite and positive).
    pub r_formula: f64,
    /// `[1/p_X - c, 1/p_V - c]` with `c` the setting's rate offset.
    pub bracket: (f64, f64),
    /// Whether `r_formula` lies inside the bracket (mixed regime only).
    pub within_bracket: bool,
}

/// Case split of the dof-allocation analysis: regime detection, the mixed
/// rate, and the summability bracket it must respect.
pub fn predict_rate(params: &RateParams) -> Result<RatePrediction> {
    params.validate()?;
    let RateParams {
        setting,
        s,
        t,
        p_v,
        p_x,
    } = *params;
    let c = setting.rate_offset();
    let bracket = (1.0 / p_x - c, 1.0 / p_v - c);
    let (regime, r_formula) = match setting {
        Setting::Sup => {
            let boundary = 1.0 / (t + 1.0);
            let delta = 1.0 - 1.0 / (p_x * (1.0 + t));
            let r = s * t / (s + (1.0 + t) * delta);
            if p_x <= boundary {
                (Regime::SpatialDominated, r)
            } else {
                (Regime::Mixed, r)
            }
        }
        Setting::L2 => {
            let boundary = 2.0 / (2.0 * t + 1.0);
            let r = s * t / (s + t + 0.5 - 1.0 / p_x);
            if p_x <= boundary {
                (Regime::SpatialDominated, r)
            } else {
                (Regime::Mixed, r)
            }
        }
    };
    let rate = match regime {
        Regime::SpatialDominated => t,
        Regime::Mixed => r_formula,
    };
    let within_bracket = match regime {
        Regime::SpatialDominated => true,
        Regime::Mixed => r_formula >= bracket.0 - 1e-12 && r_formula <= bracket.1 + 1e-12,
    };
    Ok(RatePrediction {
        regime,
        rate,
        r_formula,
        bracket,
        within_bracket,
    })
}

/// Spatial approximation mode of the wavelet-family rate summary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpatialMode {
    /// Fixed linear spaces of sufficient order.
    Linear,
    /// Best n-term (adaptive) spatial approximation.
    Nonlinear,
}

/// Limiting fully discrete rates for the dyadic wavelet family with
/// amplitude decay `2^{-alpha l}` on a domain of dimension `m`: `alpha/(2m)`
/// for linear spatial approximation; `min{alpha, 1}/m` nonlinearly for
/// `m >= 2`, and `min{2 alpha / 3, 1}` in one dimension.
pub fn wavelet_predicted_rate(alpha: f64, m: u32, mode: SpatialMode) -> Result<f64> {
    if !(alpha > 0.0) || m == 0 {
        return Err(Error::InvalidParameter(
            "wavelet rates need alpha > 0 and m >= 1".into(),
        ));
    }
    let mf = m as f64;
    Ok(match mode {
        SpatialMode::Linear => alpha / (2.0 * mf),
        SpatialMode::Nonlinear => {
            if m == 1 {
                (2.0 * alpha / 3.0).min(1.0)
            } else {
                alpha.min(1.0) / mf
            }
        }
    })
}
