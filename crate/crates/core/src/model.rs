//! Diffusion-coefficient parametrizations on `D = (0,1)`: affine families
//! `a(y) = abar + sum y_j psi_j`, lognormal families `a = exp(sum y_j psi_j)`,
//! and the dyadic hat-wavelet family, together with the exact ellipticity and
//! weight functionals the summability diagnostics require.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::multiindex::WeightSequence;
#[allow(unused_imports)] // std test builds shadow these with inherent methods
use crate::real::Real;
use crate::{Error, Result};

/// A piecewise polynomial of degree <= 1 on a uniform grid over `(0,1)`.
///
/// Each cell stores the value at its left edge and the slope, so the field may
/// be discontinuous across breakpoints. Sup norms of the field and its
/// gradient are exact, not sampled.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseField {
    /// (value at left edge, slope) per cell.
    cells: Vec<(f64, f64)>,
}

impl PiecewiseField {
    pub fn constant(value: f64, cells: usize) -> Self {
        PiecewiseField {
            cells: vec![(value, 0.0); cells.max(1)],
        }
    }

    /// Continuous piecewise-linear interpolant of node values on the uniform
    /// grid with `values.len() - 1` cells.
    pub fn from_nodes(values: &[f64]) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidParameter(
                "a piecewise field needs at least 2 node values".into(),
            ));
        }
        let n = values.len() - 1;
        let cells = (0..n)
            .map(|c| (values[c], (values[c + 1] - values[c]) * n as f64))
            .collect();
        Ok(PiecewiseField { cells })
    }

    /// Piecewise-constant field from per-cell values.
    pub fn piecewise_constant(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter(
                "a piecewise field needs at least 1 cell".into(),
            ));
        }
        Ok(PiecewiseField {
            cells: values.iter().map(|&v| (v, 0.0)).collect(),
        })
    }

    /// Hat of the given height supported on grid cells `[c0, c1)`, rising
    /// linearly to its peak at the midpoint (the cell span must be even).
    pub fn hat(grid_cells: usize, c0: usize, c1: usize, height: f64) -> Result<Self> {
        if c1 <= c0 || c1 > grid_cells || !(c1 - c0).is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "hat support [{c0}, {c1}) must be a nonempty even cell span within the grid"
            )));
        }
        let mut nodes = vec![0.0; grid_cells + 1];
        let mid = (c0 + c1) / 2;
        let half = (c1 - c0) as f64 / 2.0;
        for (i, node) in nodes.iter_mut().enumerate() {
            if i > c0 && i < c1 {
                let t = if i <= mid {
                    (i - c0) as f64 / half
                } else {
                    (c1 - i) as f64 / half
                };
                *node = height * t;
            }
        }
        Self::from_nodes(&nodes)
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    fn width(&self) -> f64 {
        1.0 / self.cells.len() as f64
    }

    /// Cell containing `x`, clamped to `[0, 1]`.
    fn cell_of(&self, x: f64) -> usize {
        let c = (x * self.cells.len() as f64).floor() as isize;
        c.clamp(0, self.cells.len() as isize - 1) as usize
    }

    pub fn eval(&self, x: f64) -> f64 {
        let c = self.cell_of(x);
        let (v, s) = self.cells[c];
        v + s * (x - c as f64 * self.width())
    }

    pub fn slope_in_cell(&self, c: usize) -> f64 {
        self.cells[c].1
    }

    /// Value at the left and right edge of cell `c` (one-sided).
    pub fn edge_values(&self, c: usize) -> (f64, f64) {
        let (v, s) = self.cells[c];
        (v, v + s * self.width())
    }

    pub fn sup_norm(&self) -> f64 {
        let mut m = 0.0f64;
        for c in 0..self.cells.len() {
            let (l, r) = self.edge_values(c);
            m = m.max(l.abs()).max(r.abs());
        }
        m
    }

    pub fn grad_sup_norm(&self) -> f64 {
        self.cells.iter().map(|&(_, s)| s.abs()).fold(0.0, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        let mut m = f64::INFINITY;
        for c in 0..self.cells.len() {
            let (l, r) = self.edge_values(c);
            m = m.min(l).min(r);
        }
        m
    }

    /// `self + scale * other`; both fields must share the grid.
    pub fn add_scaled(&mut self, other: &PiecewiseField, scale: f64) -> Result<()> {
        if self.cells.len() != other.cells.len() {
            return Err(Error::MeshMismatch(format!(
                "field grids differ: {} vs {} cells",
                self.cells.len(),
                other.cells.len()
            )));
        }
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            a.0 += scale * b.0;
            a.1 += scale * b.1;
        }
        Ok(())
    }
}

/// Exact `sup_x sum_j w_j |psi_j(x)| / den(x)` for piecewise-linear fields.
///
/// Each cell is split at the zero crossings of the `psi_j`; between
/// consecutive breakpoints the numerator is linear and the denominator is
/// linear and positive, so the ratio is monotone and the sup is attained at a
/// breakpoint.
fn weighted_abs_sup(
    psi: &[PiecewiseField],
    weight: impl Fn(usize) -> f64,
    den: Option<&PiecewiseField>,
) -> f64 {
    if psi.is_empty() {
        return 0.0;
    }
    let n = psi[0].num_cells();
    let h = 1.0 / n as f64;
    let mut sup = 0.0f64;
    let mut ts: Vec<f64> = Vec::new();
    for c in 0..n {
        ts.clear();
        ts.push(0.0);
        ts.push(h);
        for f in psi {
            let (v, s) = f.cells[c];
            if s != 0.0 {
                let t = -v / s;
                if t > 0.0 && t < h {
                    ts.push(t);
                }
            }
        }
        let x0 = c as f64 * h;
        for &t in &ts {
            let mut num = 0.0;
            for (j, f) in psi.iter().enumerate() {
                let (v, s) = f.cells[c];
                num += weight(j) * (v + s * t).abs();
            }
            let d = match den {
                Some(a) => {
                    let (v, s) = a.cells[c];
                    v + s * t
                }
                None => 1.0,
            };
            sup = sup.max(num / d);
            let _ = x0;
        }
    }
    sup
}

/// Affine parametrization `a(y) = abar + sum_{j=1}^{J} y_j psi_j`,
/// `y_j in [-1, 1]`, with the uniform ellipticity constant cached.
#[derive(Debug, Clone)]
pub struct AffineModel {
    abar: PiecewiseField,
    psi: Vec<PiecewiseField>,
    essinf_abar: f64,
    theta: f64,
}

impl AffineModel {
    pub fn new(abar: PiecewiseField, psi: Vec<PiecewiseField>) -> Result<Self> {
        for f in &psi {
            if f.num_cells() != abar.num_cells() {
                return Err(Error::MeshMismatch(
                    "all model fields must share the reference grid".into(),
                ));
            }
        }
        let essinf_abar = abar.min_value();
        if essinf_abar <= 0.0 {
            return Err(Error::NonPositiveMeanField(essinf_abar));
        }
        let theta = weighted_abs_sup(&psi, |_| 1.0, Some(&abar));
        if theta >= 1.0 {
            return Err(Error::EllipticityViolated(theta));
        }
        Ok(AffineModel {
            abar,
            psi,
            essinf_abar,
            theta,
        })
    }

    pub fn abar(&self) -> &PiecewiseField {
        &self.abar
    }

    pub fn psi(&self) -> &[PiecewiseField] {
        &self.psi
    }

    /// Number of active parameter dimensions `J`.
    pub fn dims(&self) -> usize {
        self.psi.len()
    }

    pub fn grid_cells(&self) -> usize {
        self.abar.num_cells()
    }

    pub fn essinf_abar(&self) -> f64 {
        self.essinf_abar
    }

    /// Keep only the first `d` expansion functions.
    pub fn truncated(&self, d: usize) -> Result<AffineModel> {
        AffineModel::new(
            self.abar.clone(),
            self.psi[..d.min(self.psi.len())].to_vec(),
        )
    }

    /// The exact diffusion coefficient at a parameter point.
    pub fn coefficient(&self, y: &[f64]) -> Result<PiecewiseField> {
        if y.len() > self.psi.len() {
            return Err(Error::InvalidParameter(format!(
                "parameter vector has {} entries but the model has {} dimensions",
                y.len(),
                self.psi.len()
            )));
        }
        for (j, &yj) in y.iter().enumerate() {
            if !(-1.0..=1.0).contains(&yj) {
                return Err(Error::InvalidParameter(format!(
                    "affine parameter y_{} = {yj} outside [-1, 1]",
                    j + 1
                )));
            }
        }
        let mut a = self.abar.clone();
        for (f, &yj) in self.psi.iter().zip(y) {
            a.add_scaled(f, yj)?;
        }
        // theta < 1 guarantees positivity for every admissible y
        let min = a.min_value();
        debug_assert!(min > 0.0, "coefficient lost positivity: min = {min}");
        if min <= 0.0 {
            return Err(Error::NonPositiveCoefficient {
                element: 0,
                value: min,
            });
        }
        Ok(a)
    }
}

/// `theta = || sum_j |psi_j| / abar ||_inf` (uniform ellipticity constant).
pub fn theta_uniform(model: &AffineModel) -> f64 {
    model.theta
}

/// `theta(rho) = || sum_j rho_j |psi_j| / abar ||_inf`. Values >= 1 are
/// returned as-is; admissibility is the caller's decision.
pub fn theta_weighted(model: &AffineModel, rho: &WeightSequence) -> f64 {
    weighted_abs_sup(&model.psi, |j| rho.get(j as u32 + 1), Some(&model.abar))
}

/// `|| sum_j rho_j |grad psi_j| ||_inf`, exact since gradients are piecewise
/// constant.
pub fn grad_weighted_sum(model: &AffineModel, rho: &WeightSequence) -> f64 {
    let mut sup = 0.0f64;
    for c in 0..model.grid_cells() {
        let mut s = 0.0;
        for (j, f) in model.psi.iter().enumerate() {
            s += rho.get(j as u32 + 1) * f.slope_in_cell(c).abs();
        }
        sup = sup.max(s);
    }
    sup
}

/// Lognormal parametrization `a(y) = exp(sum_j y_j psi_j)` with i.i.d.
/// standard Gaussian parameters.
#[derive(Debug, Clone)]
pub struct LognormalModel {
    psi: Vec<PiecewiseField>,
}

impl LognormalModel {
    pub fn new(psi: Vec<PiecewiseField>) -> Result<Self> {
        if psi.is_empty() {
            return Err(Error::InvalidParameter(
                "lognormal model needs at least one expansion function".into(),
            ));
        }
        let cells = psi[0].num_cells();
        if psi.iter().any(|f| f.num_cells() != cells) {
            return Err(Error::MeshMismatch(
                "all model fields must share the reference grid".into(),
            ));
        }
        Ok(LognormalModel { psi })
    }

    pub fn psi(&self) -> &[PiecewiseField] {
        &self.psi
    }

    pub fn dims(&self) -> usize {
        self.psi.len()
    }

    pub fn grid_cells(&self) -> usize {
        self.psi[0].num_cells()
    }

    /// `b(y) = sum_j y_j psi_j` as an exact piecewise-linear field; the
    /// coefficient itself is `exp(b)` and is sampled where needed.
    pub fn log_field(&self, y: &[f64]) -> Result<PiecewiseField> {
        if y.len() > self.psi.len() {
            return Err(Error::InvalidParameter(format!(
                "parameter vector has {} entries but the model has {} dimensions",
                y.len(),
                self.psi.len()
            )));
        }
        for &yj in y {
            if !yj.is_finite() {
                return Err(Error::InvalidParameter(
                    "lognormal parameters must be finite".into(),
                ));
            }
        }
        let mut b = PiecewiseField::constant(0.0, self.grid_cells());
        for (f, &yj) in self.psi.iter().zip(y) {
            b.add_scaled(f, yj)?;
        }
        Ok(b)
    }

    /// `K(rho) = || sum_j rho_j |psi_j| ||_inf`, exact.
    pub fn weighted_sup(&self, rho: &WeightSequence) -> f64 {
        weighted_abs_sup(&self.psi, |j| rho.get(j as u32 + 1), None)
    }
}

/// Dyadic hat-wavelet family on `(0,1)`: level `l` contributes `2^l` hats of
/// height `C 2^{-alpha l}` on the dyadic cells, enumerated coarse to fine and
/// left to right within a level.
#[derive(Debug, Clone, Copy)]
pub struct WaveletFamily {
    /// Smoothness exponent `alpha > 0` of the amplitude decay.
    pub alpha: f64,
    /// Amplitude `C` of the level-0 function.
    pub amplitude: f64,
    /// Finest level `L`; levels `0..=L` are generated.
    pub max_level: u32,
}

impl WaveletFamily {
    pub fn new(alpha: f64, amplitude: f64, max_level: u32) -> Result<Self> {
        if !(alpha > 0.0) || !(amplitude > 0.0) {
            return Err(Error::InvalidParameter(
                "wavelet family needs alpha > 0 and amplitude > 0".into(),
            ));
        }
        Ok(WaveletFamily {
            alpha,
            amplitude,
            max_level,
        })
    }

    /// Total number of functions over levels `0..=L`.
    pub fn count(&self) -> usize {
        (1usize << (self.max_level + 1)) - 1
    }

    /// Level of the 1-based index `j` in the coarse-to-fine enumeration.
    pub fn level_of(&self, j: u32) -> u32 {
        debug_assert!(j >= 1);
        j.ilog2()
    }

    /// `||psi_j||_inf = C 2^{-alpha l}` for the enumerated index `j`.
    pub fn amplitude_of(&self, j: u32) -> f64 {
        self.amplitude * 2.0f64.powf(-self.alpha * self.level_of(j) as f64)
    }
}

/// Per-point overlap of closed wavelet supports within one level.
pub const WAVELET_LEVEL_OVERLAP: usize = 2;

/// Instantiate the wavelet family as an affine model with `abar = 1`.
pub fn build_wavelet_model(fam: &WaveletFamily) -> Result<AffineModel> {
    let grid_cells = 1usize << (fam.max_level + 1);
    let mut psi = Vec::with_capacity(fam.count());
    for l in 0..=fam.max_level {
        let span = grid_cells >> l;
        let height = fam.amplitude * 2.0f64.powf(-fam.alpha * l as f64);
        for k in 0..(1usize << l) {
            psi.push(PiecewiseField::hat(
                grid_cells,
                k * span,
                (k + 1) * span,
                height,
            )?);
        }
    }
    let abar = PiecewiseField::constant(1.0, grid_cells);
    AffineModel::new(abar, psi).map_err(|e| match e {
        Error::EllipticityViolated(theta) => Error::WaveletAmplitudeTooLarge { theta },
        other => other,
    })
}

/// Result of `wavelet_weights`: the weights together with the weighted
/// ellipticity constant they induce. `admissible()` is false when the caller
/// should shrink `c`.
#[derive(Debug, Clone)]
pub struct WaveletWeights {
    pub weights: WeightSequence,
    pub theta: f64,
}

impl WaveletWeights {
    pub fn admissible(&self) -> bool {
        self.theta < 1.0
    }
}

/// `rho_j = 1 + c 2^{beta |lambda(j)|}`, evaluated against a built model to
/// report the weighted ellipticity constant.
pub fn wavelet_weights(
    fam: &WaveletFamily,
    model: &AffineModel,
    beta: f64,
    c: f64,
) -> Result<WaveletWeights> {
    if !(beta > 0.0) || beta >= fam.alpha {
        return Err(Error::InvalidParameter(format!(
            "wavelet weights need 0 < beta < alpha (got beta = {beta}, alpha = {})",
            fam.alpha
        )));
    }
    if !(c > 0.0) {
        return Err(Error::InvalidParameter(
            "wavelet weight scale c must be positive".into(),
        ));
    }
    let values: Vec<f64> = (1..=model.dims() as u32)
        .map(|j| 1.0 + c * 2.0f64.powf(beta * fam.level_of(j) as f64))
        .collect();
    let weights = WeightSequence::new(values)?;
    let theta = theta_weighted(model, &weights);
    Ok(WaveletWeights { weights, theta })
}

/// Rescale lognormal weights by the largest dyadic `tau <= 1` such that
/// `K(tau rho) < ln(theta_H) / sqrt(r)` with `theta_H = 1 + (1 - 1/sqrt(2))^2`.
pub fn rescale_weights_lognormal(
    model: &LognormalModel,
    rho: &WeightSequence,
    r: u32,
) -> Result<WeightSequence> {
    if r < 1 {
        return Err(Error::InvalidParameter("rescaling needs r >= 1".into()));
    }
    let theta_h = 1.0 + (1.0 - 1.0 / 2.0f64.sqrt()).powi(2);
    let target = theta_h.ln() / (r as f64).sqrt();
    let k = model.weighted_sup(rho);
    if !k.is_finite() {
        return Err(Error::InvalidParameter(
            "weighted sup of the expansion functions is not finite".into(),
        ));
    }
    let mut tau = 1.0;
    while tau * k >= target {
        tau *= 0.5;
    }
    Ok(rho.scaled(tau))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_eval_and_norms() {
        let f = PiecewiseField::from_nodes(&[0.0, 1.0, -0.5]).unwrap();
        assert_eq!(f.num_cells(), 2);
        assert!((f.eval(0.25) - 0.5).abs() < 1e-15);
        assert!((f.eval(0.75) - 0.25).abs() < 1e-15);
        assert_eq!(f.sup_norm(), 1.0);
        assert_eq!(f.grad_sup_norm(), 3.0); // falling from 1 to -0.5 over h = 1/2
        assert_eq!(f.min_value(), -0.5);
    }

    #[test]
    fn theta_uniform_examples() {
        let abar = PiecewiseField::constant(1.0, 2);
        let psi1 = PiecewiseField::piecewise_constant(&[0.3, 0.0]).unwrap();
        let psi2 = PiecewiseField::piecewise_constant(&[0.0, 0.4]).unwrap();
        let m = AffineModel::new(abar.clone(), vec![psi1, psi2]).unwrap();
        assert!((theta_uniform(&m) - 0.4).abs() < 1e-15);

        let empty = AffineModel::new(abar, vec![]).unwrap();
        assert_eq!(theta_uniform(&empty), 0.0);

        let m2 = AffineModel::new(
            PiecewiseField::constant(2.0, 4),
            vec![PiecewiseField::constant(1.0, 4)],
        )
        .unwrap();
        assert!((theta_uniform(&m2) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn theta_weighted_examples() {
        let abar = PiecewiseField::constant(1.0, 2);
        let psi1 = PiecewiseField::piecewise_constant(&[0.3, 0.0]).unwrap();
        let psi2 = PiecewiseField::piecewise_constant(&[0.0, 0.4]).unwrap();
        let m = AffineModel::new(abar, vec![psi1, psi2]).unwrap();
        let ones = WeightSequence::constant(1.0, 2).unwrap();
        assert!((theta_weighted(&m, &ones) - theta_uniform(&m)).abs() < 1e-15);
        let twos = WeightSequence::constant(2.0, 2).unwrap();
        assert!((theta_weighted(&m, &twos) - 0.8).abs() < 1e-15);
        // inadmissible weights are reported, not rejected
        let big = WeightSequence::constant(5.0, 2).unwrap();
        assert!(theta_weighted(&m, &big) >= 1.0);
    }

    #[test]
    fn theta_handles_sign_changes_inside_cells() {
        // psi crosses zero inside each cell; sup of |psi| is at the node.
        let abar = PiecewiseField::constant(1.0, 2);
        let psi = PiecewiseField::from_nodes(&[-0.5, 0.5, -0.5]).unwrap();
        let m = AffineModel::new(abar, vec![psi]).unwrap();
        assert!((theta_uniform(&m) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn theta_with_varying_denominator() {
        // abar rises from 1 to 2, psi constant 0.5: sup of ratio at x = 0.
        let abar = PiecewiseField::from_nodes(&[1.0, 1.5, 2.0]).unwrap();
        let psi = PiecewiseField::constant(0.5, 2);
        let m = AffineModel::new(abar, vec![psi]).unwrap();
        assert!((theta_uniform(&m) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn grad_weighted_sum_examples() {
        let abar = PiecewiseField::constant(1.0, 4);
        let constants = AffineModel::new(
            abar.clone(),
            vec![
                PiecewiseField::constant(0.2, 4),
                PiecewiseField::constant(0.1, 4),
            ],
        )
        .unwrap();
        let ones = WeightSequence::constant(1.0, 2).unwrap();
        assert_eq!(grad_weighted_sum(&constants, &ones), 0.0);

        // hat of height 0.4 on [0, 1/2): slope magnitude 2 * 0.4 / 0.5 = 1.6
        let hat = PiecewiseField::hat(4, 0, 2, 0.4).unwrap();
        let m = AffineModel::new(abar, vec![hat]).unwrap();
        let one = WeightSequence::constant(1.0, 1).unwrap();
        assert!((grad_weighted_sum(&m, &one) - 1.6).abs() < 1e-14);
        let two = WeightSequence::constant(2.0, 1).unwrap();
        assert!((grad_weighted_sum(&m, &two) - 3.2).abs() < 1e-14);
    }

    #[test]
    fn affine_coefficient_positivity() {
        let fam = WaveletFamily::new(1.0, 0.3, 3).unwrap();
        let m = build_wavelet_model(&fam).unwrap();
        let theta = theta_uniform(&m);
        let floor = m.essinf_abar() * (1.0 - theta);
        let mut rng = crate::rng::Rng::new(11);
        for _ in 0..20 {
            let y: Vec<f64> = (0..m.dims()).map(|_| rng.symmetric()).collect();
            let a = m.coefficient(&y).unwrap();
            assert!(a.min_value() >= floor - 1e-12);
        }
    }

    #[test]
    fn affine_coefficient_at_zero_is_abar() {
        let abar = PiecewiseField::from_nodes(&[1.0, 2.0]).unwrap();
        let m = AffineModel::new(abar.clone(), vec![PiecewiseField::constant(0.25, 1)]).unwrap();
        let a = m.coefficient(&[0.0]).unwrap();
        assert_eq!(a, abar);
        assert!(m.coefficient(&[1.5]).is_err());
    }

    #[test]
    fn wavelet_model_structure() {
        let single = WaveletFamily::new(1.5, 0.7, 0).unwrap();
        let m0 = build_wavelet_model(&single).unwrap();
        assert_eq!(m0.dims(), 1);
        assert!((m0.psi()[0].sup_norm() - 0.7).abs() < 1e-15);

        let fam = WaveletFamily::new(1.5, 0.25, 3).unwrap();
        let m = build_wavelet_model(&fam).unwrap();
        assert_eq!(m.dims(), fam.count());
        assert_eq!(m.dims(), 15);
        // enumerated amplitudes reproduce C 2^{-alpha l} exactly
        for j in 1..=m.dims() as u32 {
            let expected = fam.amplitude_of(j);
            let got = m.psi()[j as usize - 1].sup_norm();
            assert!(
                (got - expected).abs() <= 1e-15 * expected,
                "j = {j}: {got} vs {expected}"
            );
        }
    }

    #[test]
    fn wavelet_overlap_at_most_two_per_level() {
        let fam = WaveletFamily::new(1.0, 0.2, 3).unwrap();
        let m = build_wavelet_model(&fam).unwrap();
        // closed-support membership, checked on a fine sample grid
        for l in 0..=fam.max_level {
            let span = 1.0 / (1u32 << l) as f64;
            for s in 0..=200 {
                let x = s as f64 / 200.0;
                let mut overlap = 0;
                for j in 1..=m.dims() as u32 {
                    if fam.level_of(j) != l {
                        continue;
                    }
                    let k = (j - (1 << l)) as f64;
                    if x >= k * span - 1e-12 && x <= (k + 1.0) * span + 1e-12 {
                        overlap += 1;
                    }
                }
                assert!(overlap <= WAVELET_LEVEL_OVERLAP);
            }
        }
    }

    #[test]
    fn wavelet_theta_monotone_in_amplitude() {
        let mut last = 0.0;
        for i in 1..=6 {
            let c = 0.05 * i as f64;
            let fam = WaveletFamily::new(1.2, c, 3).unwrap();
            let m = build_wavelet_model(&fam).unwrap();
            let theta = theta_uniform(&m);
            assert!(theta > last);
            last = theta;
        }
    }

    #[test]
    fn wavelet_amplitude_gate() {
        let fam = WaveletFamily::new(0.5, 1.2, 3).unwrap();
        assert!(matches!(
            build_wavelet_model(&fam),
            Err(Error::WaveletAmplitudeTooLarge { .. })
        ));
    }

    #[test]
    fn wavelet_weights_examples() {
        let fam = WaveletFamily::new(1.5, 0.2, 3).unwrap();
        let m = build_wavelet_model(&fam).unwrap();
        let w = wavelet_weights(&fam, &m, 1.0, 0.25).unwrap();
        // level-0 weight is 1 + c
        assert!((w.weights.get(1) - 1.25).abs() < 1e-15);
        // monotone non-decreasing in level
        for j in 2..=m.dims() as u32 {
            assert!(w.weights.get(j) >= w.weights.get(j - 1) - 1e-15);
        }
        assert!(w.admissible());
        // c -> 0 limit gives unit weights; c = 0 itself is rejected
        assert!(wavelet_weights(&fam, &m, 1.0, 0.0).is_err());
        let tiny = wavelet_weights(&fam, &m, 1.0, 1e-12).unwrap();
        assert!((tiny.weights.get(5) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn theta_weighted_homogeneous_in_rho() {
        let fam = WaveletFamily::new(1.1, 0.2, 2).unwrap();
        let m = build_wavelet_model(&fam).unwrap();
        let rho =
            WeightSequence::new((1..=m.dims()).map(|j| 1.0 + 0.1 * j as f64).collect()).unwrap();
        let t1 = theta_weighted(&m, &rho);
        let t3 = theta_weighted(&m, &rho.scaled(3.0));
        assert!((t3 - 3.0 * t1).abs() < 1e-12);
    }

    #[test]
    fn lognormal_log_field_and_sup() {
        let psi = vec![
            PiecewiseField::constant(2.0f64.ln(), 4),
            PiecewiseField::hat(4, 0, 4, 0.5).unwrap(),
        ];
        let m = LognormalModel::new(psi).unwrap();
        let b = m.log_field(&[1.0, 0.0]).unwrap();
        assert!((b.eval(0.3) - 2.0f64.ln()).abs() < 1e-15);
        let ones = WeightSequence::constant(1.0, 2).unwrap();
        assert!((m.weighted_sup(&ones) - (2.0f64.ln() + 0.5)).abs() < 1e-14);
    }

    #[test]
    fn rescaling_meets_the_hermite_condition() {
        let theta_h = 1.0 + (1.0 - 1.0 / 2.0f64.sqrt()).powi(2);
        assert!((theta_h - 1.0857864376269049).abs() < 1e-12);
        let m = LognormalModel::new(vec![
            PiecewiseField::constant(0.3, 2),
            PiecewiseField::constant(0.2, 2),
        ])
        .unwrap();
        let rho = WeightSequence::constant(1.0, 2).unwrap();
        for r in [1u32, 2, 4] {
            let scaled = rescale_weights_lognormal(&m, &rho, r).unwrap();
            let k = m.weighted_sup(&scaled);
            assert!(k < theta_h.ln() / (r as f64).sqrt());
        }
        // already-admissible weights are unchanged
        let small = WeightSequence::constant(1e-3, 2).unwrap();
        let same = rescale_weights_lognormal(&m, &small, 1).unwrap();
        assert_eq!(same, small);
        // halving rho halves K
        let k1 = m.weighted_sup(&rho);
        let k2 = m.weighted_sup(&rho.scaled(0.5));
        assert!((k2 - 0.5 * k1).abs() < 1e-14);
    }
}
