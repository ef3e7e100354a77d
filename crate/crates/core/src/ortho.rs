//! Orthonormal polynomial families (Jacobi with parameters `(alpha, beta)`,
//! probabilists' Hermite), Gauss rules from the recurrence matrix, tensor
//! quadrature, and projection coefficients of the discrete solution map with
//! Parseval-based error diagnostics.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::fem::{self, Coefficient, ElementField, FeSpace, GridFunction};
use crate::linalg::tridiag_eigen_first_components;
use crate::model::{AffineModel, LognormalModel, PiecewiseField};
use crate::multiindex::{DownwardClosedSet, MultiIndex};
#[allow(unused_imports)] // std test builds shadow these with inherent methods
use crate::real::{ln_gamma, Real};
use crate::{Error, Result};

/// Which orthonormal family an expansion runs over.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FamilyKind {
    Jacobi { alpha: f64, beta: f64 },
    Hermite,
}

/// Orthonormal polynomials via their three-term recurrence
/// `a_{k+1} p_{k+1} = (t - b_k) p_k - a_k p_{k-1}`, with respect to the
/// family's probability measure.
#[derive(Debug, Clone)]
pub struct OrthoFamily {
    kind: FamilyKind,
    /// Diagonal `b_k`, `k = 0..capacity`.
    diag: Vec<f64>,
    /// Off-diagonal `a_k`, `k = 1..capacity` (index 0 unused).
    offdiag: Vec<f64>,
}

impl OrthoFamily {
    /// Jacobi family for the probability measure proportional to
    /// `(1-t)^alpha (1+t)^beta` on `[-1,1]`.
    pub fn jacobi(alpha: f64, beta: f64, capacity: usize) -> Result<Self> {
        if !(alpha > -1.0) || !(beta > -1.0) {
            return Err(Error::InvalidParameter(format!(
                "Jacobi parameters must exceed -1 (got {alpha}, {beta})"
            )));
        }
        let n = capacity.max(2);
        let mut diag = Vec::with_capacity(n);
        let mut offdiag = alloc::vec![0.0; n];
        let (a, b) = (alpha, beta);
        diag.push((b - a) / (a + b + 2.0));
        for k in 1..n {
            let kf = k as f64;
            let denom = (2.0 * kf + a + b) * (2.0 * kf + a + b + 2.0);
            diag.push((b * b - a * a) / denom);
        }
        offdiag[1] = (4.0 * (a + 1.0) * (b + 1.0) / ((a + b + 2.0).powi(2) * (a + b + 3.0))).sqrt();
        for k in 2..n {
            let kf = k as f64;
            let num = 4.0 * kf * (kf + a) * (kf + b) * (kf + a + b);
            let den =
                (2.0 * kf + a + b).powi(2) * (2.0 * kf + a + b + 1.0) * (2.0 * kf + a + b - 1.0);
            offdiag[k] = (num / den).sqrt();
        }
        Ok(OrthoFamily {
            kind: FamilyKind::Jacobi { alpha, beta },
            diag,
            offdiag,
        })
    }

    pub fn legendre(capacity: usize) -> Self {
        Self::jacobi(0.0, 0.0, capacity).expect("Legendre parameters are valid")
    }

    pub fn chebyshev(capacity: usize) -> Self {
        Self::jacobi(-0.5, -0.5, capacity).expect("Chebyshev parameters are valid")
    }

    /// Probabilists' Hermite family, orthonormal for the standard Gaussian.
    pub fn hermite(capacity: usize) -> Self {
        let n = capacity.max(2);
        let diag = alloc::vec![0.0; n];
        let mut offdiag = alloc::vec![0.0; n];
        for (k, v) in offdiag.iter_mut().enumerate().skip(1) {
            *v = (k as f64).sqrt();
        }
        OrthoFamily {
            kind: FamilyKind::Hermite,
            diag,
            offdiag,
        }
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn capacity(&self) -> usize {
        self.diag.len()
    }

    /// Value of the orthonormal polynomial of degree `k` at `t`.
    pub fn eval(&self, k: usize, t: f64) -> f64 {
        debug_assert!(k < self.capacity());
        let mut prev = 0.0;
        let mut cur = 1.0;
        for i in 0..k {
            let next = ((t - self.diag[i]) * cur
                - if i == 0 { 0.0 } else { self.offdiag[i] } * prev)
                / self.offdiag[i + 1];
            prev = cur;
            cur = next;
        }
        cur
    }

    /// All values `p_0(t) .. p_kmax(t)` in one recurrence pass.
    pub fn eval_all(&self, kmax: usize, t: f64, out: &mut Vec<f64>) {
        out.clear();
        out.push(1.0);
        if kmax == 0 {
            return;
        }
        let mut prev = 0.0;
        let mut cur = 1.0;
        for i in 0..kmax {
            let next = ((t - self.diag[i]) * cur
                - if i == 0 { 0.0 } else { self.offdiag[i] } * prev)
                / self.offdiag[i + 1];
            prev = cur;
            cur = next;
            out.push(cur);
        }
    }

    /// `q`-point Gauss rule for the family's probability measure, by
    /// eigen-decomposition of the recurrence matrix. Exact through
    /// polynomial degree `2q - 1`; the weights sum to 1.
    pub fn gauss_rule(&self, q: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        if q < 1 || q > self.capacity() {
            return Err(Error::InvalidParameter(format!(
                "Gauss rule size {q} outside the family capacity {}",
                self.capacity()
            )));
        }
        let pairs = tridiag_eigen_first_components(&self.diag[..q], &self.offdiag[1..q.max(1)])?;
        let nodes = pairs.iter().map(|&(x, _)| x).collect();
        let weights = pairs.iter().map(|&(_, z)| z * z).collect();
        Ok((nodes, weights))
    }
}

/// Rodrigues normalization constant `c_k^{alpha,beta}` of the orthonormal
/// Jacobi polynomials, evaluated in log space; `c_0 = 1` by definition.
pub fn jacobi_norm_const(k: usize, alpha: f64, beta: f64) -> Result<f64> {
    if !(alpha > -1.0) || !(beta > -1.0) {
        return Err(Error::InvalidParameter(format!(
            "Jacobi parameters must exceed -1 (got {alpha}, {beta})"
        )));
    }
    if k == 0 {
        return Ok(1.0);
    }
    let kf = k as f64;
    let ln_sq = (2.0 * kf + alpha + beta + 1.0).ln()
        + ln_gamma(kf + 1.0)
        + ln_gamma(kf + alpha + beta + 1.0)
        + ln_gamma(alpha + 1.0)
        + ln_gamma(beta + 1.0)
        - ln_gamma(kf + alpha + 1.0)
        - ln_gamma(kf + beta + 1.0)
        - ln_gamma(alpha + beta + 2.0);
    Ok((0.5 * ln_sq).exp())
}

/// Full tensor Gauss grid over `dims` identical one-dimensional rules.
#[derive(Debug, Clone)]
pub struct TensorQuadrature {
    dims: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl TensorQuadrature {
    pub fn new(family: &OrthoFamily, dims: usize, q: usize) -> Result<Self> {
        if dims == 0 {
            return Err(Error::InvalidParameter(
                "tensor quadrature needs at least one dimension".into(),
            ));
        }
        let count = (q as u128).checked_pow(dims as u32);
        match count {
            Some(c) if c <= 1_000_000 => {}
            Some(c) => return Err(Error::QuadratureTooLarge { nodes: c }),
            None => return Err(Error::QuadratureTooLarge { nodes: u128::MAX }),
        }
        let (nodes, weights) = family.gauss_rule(q)?;
        Ok(TensorQuadrature {
            dims,
            nodes,
            weights,
        })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn points_per_dim(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len().pow(self.dims as u32)
    }

    /// Iterate `(point, weight)` in odometer order (last dimension fastest).
    pub fn iter(&self) -> TensorIter<'_> {
        TensorIter {
            quad: self,
            counter: 0,
            point: alloc::vec![0.0; self.dims],
        }
    }
}

pub struct TensorIter<'a> {
    quad: &'a TensorQuadrature,
    counter: usize,
    point: Vec<f64>,
}

impl TensorIter<'_> {
    /// Advance to the next tensor node; returns `(y, weight)`.
    pub fn next_node(&mut self) -> Option<(&[f64], f64)> {
        let q = self.quad.points_per_dim();
        if self.counter >= self.quad.node_count() {
            return None;
        }
        let mut rem = self.counter;
        let mut weight = 1.0;
        for d in (0..self.quad.dims).rev() {
            let i = rem % q;
            rem /= q;
            self.point[d] = self.quad.nodes[i];
            weight *= self.quad.weights[i];
        }
        self.counter += 1;
        Some((&self.point, weight))
    }
}

/// One node solve handed back by a parametric solver.
pub struct NodeSolution {
    pub function: GridFunction,
    /// Strong-form Laplacian samples, when the solver provides them.
    pub laplacian: Option<ElementField>,
}

/// Per-index projection coefficient with cached norms.
#[derive(Debug, Clone)]
pub struct OrthoRecord {
    pub function: GridFunction,
    pub laplacian: Option<ElementField>,
    pub norm_v: f64,
    pub norm_w: Option<f64>,
}

/// Projection coefficients of the discrete solution map onto the tensor
/// polynomial family over a finite index set.
#[derive(Debug, Clone)]
pub struct OrthoExpansion {
    kind: FamilyKind,
    space: FeSpace,
    records: BTreeMap<MultiIndex, OrthoRecord>,
    /// Quadrature value of `int ||u_h(y)||_V^2 dsigma(y)`.
    energy_total: f64,
    dims: usize,
    points_per_dim: usize,
    /// Number of coefficient clamps applied by the lognormal solver.
    pub clamp_events: usize,
}

impl OrthoExpansion {
    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn space(&self) -> FeSpace {
        self.space
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn points_per_dim(&self) -> usize {
        self.points_per_dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, nu: &MultiIndex) -> Option<&OrthoRecord> {
        self.records.get(nu)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, &OrthoRecord)> {
        self.records.iter()
    }

    /// Quadrature estimate of the squared `L^2(U, V)` norm of the map.
    pub fn energy_total(&self) -> f64 {
        self.energy_total
    }

    /// `(nu, ||v_nu||_V)` pairs in layer order.
    pub fn norms_v(&self) -> Vec<(MultiIndex, f64)> {
        self.records
            .iter()
            .map(|(nu, r)| (nu.clone(), r.norm_v))
            .collect()
    }

    /// `(nu, ||v_nu||_W)` pairs; requires Laplacian accumulation.
    pub fn norms_w(&self) -> Result<Vec<(MultiIndex, f64)>> {
        self.records
            .iter()
            .map(|(nu, r)| {
                r.norm_w.map(|w| (nu.clone(), w)).ok_or_else(|| {
                    Error::InvalidParameter("W norms need Laplacian accumulation enabled".into())
                })
            })
            .collect()
    }
}

/// Compute projection coefficients with a caller-provided parametric solver:
/// one solve per tensor node, shared across all indices.
pub fn compute_coeffs_with(
    family: &OrthoFamily,
    space: FeSpace,
    indices: &DownwardClosedSet,
    dims: usize,
    q: usize,
    mut solver: impl FnMut(&[f64]) -> Result<NodeSolution>,
) -> Result<OrthoExpansion> {
    let max_component = indices
        .iter()
        .map(|nu| nu.max_exponent())
        .max()
        .unwrap_or(0) as usize;
    if 2 * q < max_component + 1 {
        return Err(Error::InvalidParameter(format!(
            "quadrature with q = {q} cannot project degree {max_component} components \
             (needs componentwise degree <= 2q - 1)"
        )));
    }
    if indices.iter().any(|nu| nu.max_dim() as usize > dims) {
        return Err(Error::InvalidParameter(format!(
            "index set touches dimensions beyond the quadrature's {dims}"
        )));
    }
    let quad = TensorQuadrature::new(family, dims, q)?;
    let mut records: BTreeMap<MultiIndex, OrthoRecord> = BTreeMap::new();
    let mut accumulate_laplacians = true;
    let mut energy_total = 0.0;
    let mut clamp_events = 0usize;

    let mut iter = quad.iter();
    let mut poly_table: Vec<Vec<f64>> = alloc::vec![Vec::new(); dims];
    while let Some((y, w)) = iter.next_node() {
        let sol = solver(y)?;
        if sol.function.space() != space {
            return Err(Error::MeshMismatch(
                "node solver returned a function from a different space".into(),
            ));
        }
        if sol.laplacian.is_none() {
            accumulate_laplacians = false;
        }
        clamp_events += 0; // solver-side clamps are counted by the wrappers
        energy_total += w * fem::v_inner(&sol.function, &sol.function);
        for d in 0..dims {
            let col = &mut poly_table[d];
            family.eval_all(max_component, y[d], col);
        }
        for nu in indices.iter() {
            let mut basis = 1.0;
            for &(j, e) in nu.entries() {
                basis *= poly_table[j as usize - 1][e as usize];
            }
            let coeff = w * basis;
            let rec = records.entry(nu.clone()).or_insert_with(|| OrthoRecord {
                function: GridFunction::zero(space),
                laplacian: if accumulate_laplacians {
                    Some(ElementField::zeros(space.elements()))
                } else {
                    None
                },
                norm_v: 0.0,
                norm_w: None,
            });
            rec.function.add_scaled(&sol.function, coeff)?;
            if let (Some(acc), Some(lap)) = (rec.laplacian.as_mut(), sol.laplacian.as_ref()) {
                acc.add_scaled(lap, coeff)?;
            }
        }
    }
    if !accumulate_laplacians {
        for rec in records.values_mut() {
            rec.laplacian = None;
        }
    }
    for rec in records.values_mut() {
        rec.norm_v = fem::norm_v(&rec.function);
        rec.norm_w = rec.laplacian.as_ref().map(|l| l.norm_l2());
    }
    let _ = &mut clamp_events;
    Ok(OrthoExpansion {
        kind: family.kind(),
        space,
        records,
        energy_total,
        dims,
        points_per_dim: q,
        clamp_events,
    })
}

/// Strong-form Laplacian samples `-(f + a' u') / a` at the Gauss points.
fn strong_laplacian(
    space: &FeSpace,
    a_vals: &ElementField,
    a_slopes: &ElementField,
    u: &GridFunction,
    load: &PiecewiseField,
) -> ElementField {
    let du = fem::deriv_samples(u);
    let mut out = ElementField::zeros(space.elements());
    for e in 0..space.elements() {
        for g in 0..3 {
            let x = space.gauss_x(e, g);
            let v = -(load.eval(x) + a_slopes.get(e, g) * du.get(e, g)) / a_vals.get(e, g);
            out.set(e, g, v);
        }
    }
    out
}

/// Jacobi coefficients of an affine model: one FE solve per tensor node.
pub fn compute_coeffs_affine(
    model: &AffineModel,
    space: FeSpace,
    family: &OrthoFamily,
    indices: &DownwardClosedSet,
    q: usize,
    load: &PiecewiseField,
) -> Result<OrthoExpansion> {
    if matches!(family.kind(), FamilyKind::Hermite) {
        return Err(Error::InvalidParameter(
            "affine models pair with Jacobi families, not Hermite".into(),
        ));
    }
    let dims = model.dims();
    compute_coeffs_with(family, space, indices, dims, q, |y| {
        let a = model.coefficient(y)?;
        let coeff = Coefficient::PwLinear(&a);
        let u = fem::solve_dirichlet(&space, &coeff, |x| load.eval(x))?;
        let a_vals = coeff.samples(&space)?;
        let a_slopes = coeff.deriv_samples(&space)?;
        let lap = strong_laplacian(&space, &a_vals, &a_slopes, &u, load);
        Ok(NodeSolution {
            function: u,
            laplacian: Some(lap),
        })
    })
}

/// Hermite coefficients of a lognormal model. Coefficient samples are
/// clamped below at `1e-8` (a safety net, counted in `clamp_events`).
pub fn compute_coeffs_lognormal(
    model: &LognormalModel,
    space: FeSpace,
    indices: &DownwardClosedSet,
    q: usize,
    load: &PiecewiseField,
) -> Result<OrthoExpansion> {
    let family = OrthoFamily::hermite(q.max(indices.max_degree() as usize + 1) + 1);
    let dims = model.dims();
    let mut clamps = 0usize;
    let mut expansion = compute_coeffs_with(&family, space, indices, dims, q, |y| {
        let b = model.log_field(y)?;
        let mut a_vals = ElementField::zeros(space.elements());
        let mut a_slopes = ElementField::zeros(space.elements());
        for e in 0..space.elements() {
            for g in 0..3 {
                let x = space.gauss_x(e, g);
                let mut av = b.eval(x).exp();
                if av < 1e-8 {
                    av = 1e-8;
                    clamps += 1;
                }
                let cell = ((x * b.num_cells() as f64).floor() as usize).min(b.num_cells() - 1);
                a_vals.set(e, g, av);
                a_slopes.set(e, g, av * b.slope_in_cell(cell));
            }
        }
        let u = fem::solve_dirichlet(&space, &Coefficient::Samples(&a_vals), |x| load.eval(x))?;
        let lap = strong_laplacian(&space, &a_vals, &a_slopes, &u, load);
        Ok(NodeSolution {
            function: u,
            laplacian: Some(lap),
        })
    })?;
    expansion.clamp_events = clamps;
    Ok(expansion)
}

/// Bessel/Parseval comparison of the stored coefficients against the
/// quadrature energy of the map.
#[derive(Debug, Clone, Copy)]
pub struct ParsevalCheck {
    /// `sum_nu ||v_nu||_V^2` over the stored set.
    pub lhs: f64,
    /// Quadrature value of `int ||u_h||_V^2 dsigma`.
    pub rhs: f64,
    /// `rhs - lhs`; nonnegative up to roundoff by Bessel's inequality.
    pub gap: f64,
}

pub fn parseval_check(expansion: &OrthoExpansion) -> ParsevalCheck {
    let lhs: f64 = expansion.iter().map(|(_, r)| r.norm_v * r.norm_v).sum();
    let rhs = expansion.energy_total();
    ParsevalCheck {
        lhs,
        rhs,
        gap: rhs - lhs,
    }
}

/// Quadrature-measured truncation error
/// `sqrt(int ||u_h - sum_{Lambda_n} v_nu phi_nu||_V^2 dsigma)`, using the
/// discrete Parseval identity of the Gauss grid.
pub fn l2_error_truncation(expansion: &OrthoExpansion, lambda: &[MultiIndex]) -> Result<f64> {
    let mut kept = 0.0;
    for nu in lambda {
        let rec = expansion.get(nu).ok_or_else(|| {
            Error::InvalidParameter(format!(
                "index {:?} is not stored in the expansion",
                nu.entries()
            ))
        })?;
        kept += rec.norm_v * rec.norm_v;
    }
    Ok((expansion.energy_total() - kept).max(0.0).sqrt())
}
