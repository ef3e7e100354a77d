//! Conforming 1D finite elements on `(0,1)` with homogeneous Dirichlet
//! conditions: stiffness assembly against piecewise-linear or sampled
//! coefficients, banded direct solves, norms, exact cross-mesh V-orthogonal
//! projection, and a hierarchical (multiscale) hat basis for nonlinear
//! best n-term spatial approximation.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::fit;
use crate::linalg::{BandedCholesky, SymBanded};
use crate::model::PiecewiseField;
#[allow(unused_imports)] // std test builds shadow these with inherent methods
use crate::real::Real;
use crate::{Error, Result};

/// 3-point Gauss rule on the reference cell `[0,1]`: exact through degree 5.
pub const GAUSS_XI: [f64; 3] = [
    0.5 - 0.387_298_334_620_741_7,
    0.5,
    0.5 + 0.387_298_334_620_741_7,
];
pub const GAUSS_W: [f64; 3] = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];

/// Uniform Lagrange finite element space on `(0,1)` with zero boundary
/// values. `degree` is 1 or 2; the interior dof count is
/// `degree * elements - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeSpace {
    elements: usize,
    degree: u8,
}

impl FeSpace {
    pub fn new(elements: usize, degree: u8) -> Result<Self> {
        if elements < 1 || !(degree == 1 || degree == 2) {
            return Err(Error::InvalidParameter(format!(
                "FE space needs elements >= 1 and degree in {{1, 2}} (got {elements}, {degree})"
            )));
        }
        Ok(FeSpace { elements, degree })
    }

    pub fn elements(&self) -> usize {
        self.elements
    }

    pub fn degree(&self) -> u8 {
        self.degree
    }

    /// Interior degrees of freedom.
    pub fn dofs(&self) -> usize {
        self.degree as usize * self.elements - 1
    }

    pub fn mesh_width(&self) -> f64 {
        1.0 / self.elements as f64
    }

    /// Coordinate of interior dof `i` (full nodes minus the two boundary ones).
    pub fn dof_x(&self, i: usize) -> f64 {
        (i + 1) as f64 / (self.degree as usize * self.elements) as f64
    }

    /// Gauss point `g` of element `e`.
    pub fn gauss_x(&self, e: usize, g: usize) -> f64 {
        (e as f64 + GAUSS_XI[g]) * self.mesh_width()
    }

    /// Local shape values at reference coordinate `xi`, one per local node.
    fn shape(&self, xi: f64) -> ([f64; 3], usize) {
        match self.degree {
            1 => ([1.0 - xi, xi, 0.0], 2),
            _ => (
                [
                    (2.0 * xi - 1.0) * (xi - 1.0),
                    4.0 * xi * (1.0 - xi),
                    xi * (2.0 * xi - 1.0),
                ],
                3,
            ),
        }
    }

    /// Local shape derivatives with respect to `xi`.
    fn shape_deriv(&self, xi: f64) -> ([f64; 3], usize) {
        match self.degree {
            1 => ([-1.0, 1.0, 0.0], 2),
            _ => ([4.0 * xi - 3.0, 4.0 - 8.0 * xi, 4.0 * xi - 1.0], 3),
        }
    }

    /// Global full-node index of local node `l` of element `e`; full nodes
    /// include the boundary, dof index = full node - 1.
    fn full_node(&self, e: usize, l: usize) -> usize {
        self.degree as usize * e + l
    }

    fn dof_of_full_node(&self, node: usize) -> Option<usize> {
        if node == 0 || node == self.degree as usize * self.elements {
            None
        } else {
            Some(node - 1)
        }
    }
}

/// A function in an [`FeSpace`], stored as interior dof coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    space: FeSpace,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn zero(space: FeSpace) -> Self {
        GridFunction {
            space,
            values: vec![0.0; space.dofs()],
        }
    }

    pub fn from_values(space: FeSpace, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.dofs() {
            return Err(Error::MeshMismatch(format!(
                "expected {} dof values, got {}",
                space.dofs(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "grid function values must be finite".into(),
            ));
        }
        Ok(GridFunction { space, values })
    }

    pub fn space(&self) -> FeSpace {
        self.space
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn local_coeff(&self, e: usize, l: usize) -> f64 {
        match self.space.dof_of_full_node(self.space.full_node(e, l)) {
            Some(i) => self.values[i],
            None => 0.0,
        }
    }

    fn locate(&self, x: f64) -> (usize, f64) {
        let n = self.space.elements as f64;
        let e = ((x * n).floor() as isize).clamp(0, self.space.elements as isize - 1) as usize;
        (e, x * n - e as f64)
    }

    pub fn value_at(&self, x: f64) -> f64 {
        let (e, xi) = self.locate(x);
        let (sh, k) = self.space.shape(xi);
        (0..k).map(|l| self.local_coeff(e, l) * sh[l]).sum()
    }

    pub fn deriv_at(&self, x: f64) -> f64 {
        let (e, xi) = self.locate(x);
        let (dsh, k) = self.space.shape_deriv(xi);
        let scale = self.space.elements as f64;
        (0..k).map(|l| self.local_coeff(e, l) * dsh[l]).sum::<f64>() * scale
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.values {
            *v *= s;
        }
    }

    pub fn add_scaled(&mut self, other: &GridFunction, s: f64) -> Result<()> {
        if self.space != other.space {
            return Err(Error::MeshMismatch(
                "grid functions live in different spaces".into(),
            ));
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += s * b;
        }
        Ok(())
    }
}

/// `||u'||_{L^2}` by element Gauss quadrature (exact for P1/P2).
pub fn norm_v(u: &GridFunction) -> f64 {
    v_inner(u, u).max(0.0).sqrt()
}

/// V inner product `int u' v'` of two functions in the same space.
pub fn v_inner(u: &GridFunction, v: &GridFunction) -> f64 {
    debug_assert_eq!(u.space, v.space);
    let space = u.space;
    let h = space.mesh_width();
    let scale = space.elements as f64;
    let mut acc = 0.0;
    for e in 0..space.elements {
        for g in 0..3 {
            let (dsh, k) = space.shape_deriv(GAUSS_XI[g]);
            let du: f64 = (0..k).map(|l| u.local_coeff(e, l) * dsh[l]).sum::<f64>() * scale;
            let dv: f64 = (0..k).map(|l| v.local_coeff(e, l) * dsh[l]).sum::<f64>() * scale;
            acc += h * GAUSS_W[g] * du * dv;
        }
    }
    acc
}

/// An L^2 field known only at the element Gauss points (e.g. the strong-form
/// Laplacian of a coefficient function, which lies outside the FE space).
#[derive(Debug, Clone, PartialEq)]
pub struct ElementField {
    elements: usize,
    /// `3 * elements` values, Gauss-point major within each element.
    values: Vec<f64>,
}

impl ElementField {
    pub fn zeros(elements: usize) -> Self {
        ElementField {
            elements,
            values: vec![0.0; 3 * elements],
        }
    }

    pub fn sample(elements: usize, f: impl Fn(f64) -> f64) -> Self {
        let h = 1.0 / elements as f64;
        let mut values = Vec::with_capacity(3 * elements);
        for e in 0..elements {
            for g in 0..3 {
                values.push(f((e as f64 + GAUSS_XI[g]) * h));
            }
        }
        ElementField { elements, values }
    }

    pub fn elements(&self) -> usize {
        self.elements
    }

    pub fn get(&self, e: usize, g: usize) -> f64 {
        self.values[3 * e + g]
    }

    pub fn set(&mut self, e: usize, g: usize, v: f64) {
        self.values[3 * e + g] = v;
    }

    pub fn add_scaled(&mut self, other: &ElementField, s: f64) -> Result<()> {
        if self.elements != other.elements {
            return Err(Error::MeshMismatch(
                "element fields have different meshes".into(),
            ));
        }
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += s * b;
        }
        Ok(())
    }

    /// `L^tau` norm by the same Gauss rule that sampled the field.
    pub fn norm_ltau(&self, tau: f64) -> f64 {
        debug_assert!(tau >= 1.0);
        let h = 1.0 / self.elements as f64;
        let mut acc = 0.0;
        for e in 0..self.elements {
            for g in 0..3 {
                acc += h * GAUSS_W[g] * self.get(e, g).abs().powf(tau);
            }
        }
        acc.powf(1.0 / tau)
    }

    pub fn norm_l2(&self) -> f64 {
        let h = 1.0 / self.elements as f64;
        let mut acc = 0.0;
        for e in 0..self.elements {
            for g in 0..3 {
                let v = self.get(e, g);
                acc += h * GAUSS_W[g] * v * v;
            }
        }
        acc.sqrt()
    }

    /// Weighted squared L^2 norm `int w |field|^2` with a per-Gauss-point weight.
    pub fn weighted_sq_norm(&self, weight: &ElementField) -> f64 {
        debug_assert_eq!(self.elements, weight.elements);
        let h = 1.0 / self.elements as f64;
        let mut acc = 0.0;
        for e in 0..self.elements {
            for g in 0..3 {
                let v = self.get(e, g);
                acc += h * GAUSS_W[g] * weight.get(e, g) * v * v;
            }
        }
        acc
    }
}

/// Diffusion coefficient as seen by the assembler.
#[derive(Debug, Clone, Copy)]
pub enum Coefficient<'a> {
    Constant(f64),
    /// Exact piecewise-linear field; its grid must not cut through elements,
    /// so that the assembly quadrature stays exact.
    PwLinear(&'a PiecewiseField),
    /// Gauss-point samples on this very mesh (lognormal coefficients).
    Samples(&'a ElementField),
}

impl Coefficient<'_> {
    fn validate(&self, space: &FeSpace) -> Result<()> {
        match self {
            Coefficient::Constant(_) => Ok(()),
            Coefficient::PwLinear(f) => {
                if !space.elements.is_multiple_of(f.num_cells()) {
                    return Err(Error::MeshMismatch(format!(
                        "coefficient grid ({} cells) must divide the FE mesh ({} elements)",
                        f.num_cells(),
                        space.elements
                    )));
                }
                Ok(())
            }
            Coefficient::Samples(s) => {
                if s.elements() != space.elements {
                    return Err(Error::MeshMismatch(format!(
                        "sampled coefficient has {} elements, space has {}",
                        s.elements(),
                        space.elements
                    )));
                }
                Ok(())
            }
        }
    }

    fn value(&self, space: &FeSpace, e: usize, g: usize) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::PwLinear(f) => f.eval(space.gauss_x(e, g)),
            Coefficient::Samples(s) => s.get(e, g),
        }
    }

    /// Gauss-point samples of the spatial derivative (piecewise-constant for
    /// linear fields, zero for constants).
    pub fn deriv_samples(&self, space: &FeSpace) -> Result<ElementField> {
        match self {
            Coefficient::Constant(_) => Ok(ElementField::zeros(space.elements)),
            Coefficient::PwLinear(f) => {
                self.validate(space)?;
                let cells = f.num_cells();
                let mut out = ElementField::zeros(space.elements);
                for e in 0..space.elements {
                    for g in 0..3 {
                        let x = space.gauss_x(e, g);
                        let cell = ((x * cells as f64).floor() as usize).min(cells - 1);
                        out.set(e, g, f.slope_in_cell(cell));
                    }
                }
                Ok(out)
            }
            Coefficient::Samples(_) => Err(Error::InvalidParameter(
                "sampled coefficients carry no derivative information".into(),
            )),
        }
    }

    pub fn samples(&self, space: &FeSpace) -> Result<ElementField> {
        self.validate(space)?;
        let mut out = ElementField::zeros(space.elements);
        for e in 0..space.elements {
            for g in 0..3 {
                out.set(e, g, self.value(space, e, g));
            }
        }
        Ok(out)
    }
}

/// Assemble the stiffness matrix `int a u' v'` over the interior dofs.
///
/// The result is tridiagonal for P1 and pentadiagonal for P2; 3-point Gauss
/// per element is exact for piecewise-linear `a` against P1/P2 gradients.
pub fn assemble_stiffness(space: &FeSpace, a: &Coefficient) -> Result<SymBanded> {
    assemble_gradient_matrix(space, a, true)
}

/// Gradient-product matrix `int w u' v'` for a possibly sign-indefinite
/// weight, as needed by the Taylor recursion right-hand sides.
pub(crate) fn assemble_gradient_matrix(
    space: &FeSpace,
    a: &Coefficient,
    require_positive: bool,
) -> Result<SymBanded> {
    a.validate(space)?;
    let bw = space.degree as usize;
    let mut mat = SymBanded::zeros(space.dofs(), bw);
    let h = space.mesh_width();
    let local = space.degree as usize + 1;
    for e in 0..space.elements {
        let mut lm = [[0.0f64; 3]; 3];
        for g in 0..3 {
            let av = a.value(space, e, g);
            if !av.is_finite() || (require_positive && !(av > 0.0)) {
                return Err(Error::NonPositiveCoefficient {
                    element: e,
                    value: av,
                });
            }
            let (dsh, k) = space.shape_deriv(GAUSS_XI[g]);
            // d/dx = (1/h) d/dxi and dx = h dxi cancel to a single 1/h
            let w = GAUSS_W[g] * av / h;
            for i in 0..k {
                for j in i..k {
                    lm[i][j] += w * dsh[i] * dsh[j];
                }
            }
        }
        for i in 0..local {
            let Some(gi) = space.dof_of_full_node(space.full_node(e, i)) else {
                continue;
            };
            for j in i..local {
                let Some(gj) = space.dof_of_full_node(space.full_node(e, j)) else {
                    continue;
                };
                mat.add(gi, gj, lm[i][j]);
            }
        }
    }
    Ok(mat)
}

/// Gauss-point samples of `u'`.
pub fn deriv_samples(u: &GridFunction) -> ElementField {
    let space = u.space;
    let scale = space.elements as f64;
    let mut out = ElementField::zeros(space.elements);
    for e in 0..space.elements {
        for g in 0..3 {
            let (dsh, k) = space.shape_deriv(GAUSS_XI[g]);
            let du: f64 = (0..k).map(|l| u.local_coeff(e, l) * dsh[l]).sum::<f64>() * scale;
            out.set(e, g, du);
        }
    }
    out
}

/// Assemble the load vector `int f v` by element Gauss quadrature.
pub fn assemble_load(space: &FeSpace, f: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut rhs = vec![0.0; space.dofs()];
    let h = space.mesh_width();
    let local = space.degree as usize + 1;
    for e in 0..space.elements {
        for g in 0..3 {
            let x = space.gauss_x(e, g);
            let fv = f(x);
            let (sh, _) = space.shape(GAUSS_XI[g]);
            for l in 0..local {
                if let Some(gl) = space.dof_of_full_node(space.full_node(e, l)) {
                    rhs[gl] += h * GAUSS_W[g] * fv * sh[l];
                }
            }
        }
    }
    rhs
}

/// A factorized Dirichlet operator, reusable across right-hand sides.
#[derive(Debug, Clone)]
pub struct FactoredOperator {
    space: FeSpace,
    matrix: SymBanded,
    factor: BandedCholesky,
}

impl FactoredOperator {
    pub fn new(space: FeSpace, a: &Coefficient) -> Result<Self> {
        let matrix = assemble_stiffness(&space, a)?;
        let factor = matrix.cholesky()?;
        Ok(FactoredOperator {
            space,
            matrix,
            factor,
        })
    }

    pub fn space(&self) -> FeSpace {
        self.space
    }

    pub fn matrix(&self) -> &SymBanded {
        &self.matrix
    }

    /// Solve for a dof right-hand side vector, with a backward-error check.
    pub fn solve(&self, rhs: &[f64]) -> Result<GridFunction> {
        let x = self.factor.solve(rhs);
        let res = self.matrix.matvec(&x);
        let mut rnorm = 0.0f64;
        let mut bnorm = 0.0f64;
        let mut xnorm = 0.0f64;
        for i in 0..x.len() {
            rnorm += (res[i] - rhs[i]) * (res[i] - rhs[i]);
            bnorm += rhs[i] * rhs[i];
            xnorm += x[i] * x[i];
        }
        let anorm = (0..x.len())
            .map(|i| self.matrix.get(i, i))
            .fold(0.0, f64::max);
        let denom = anorm * xnorm.sqrt() + bnorm.sqrt();
        if denom > 0.0 && rnorm.sqrt() > 1e-12 * denom {
            return Err(Error::SingularSystem("solve residual above tolerance"));
        }
        GridFunction::from_values(self.space, x)
    }
}

/// Assemble, factor and solve `-(a u')' = f` with zero Dirichlet data.
pub fn solve_dirichlet(
    space: &FeSpace,
    a: &Coefficient,
    f: impl Fn(f64) -> f64,
) -> Result<GridFunction> {
    let op = FactoredOperator::new(*space, a)?;
    op.solve(&assemble_load(space, &f))
}

// ---------------------------------------------------------------------------
// cross-mesh machinery
// ---------------------------------------------------------------------------

/// Sorted union of the mesh breakpoints of several uniform meshes, as exact
/// fractions `k / elements`.
fn union_breakpoints(element_counts: &[usize]) -> Vec<f64> {
    let mut set: BTreeSet<(u128, u128)> = BTreeSet::new();
    for &n in element_counts {
        let n = n as u128;
        for k in 0..=n {
            let g = gcd(k.max(1), n);
            set.insert((k / g, n / g));
        }
    }
    let mut points: Vec<(u128, u128)> = set.into_iter().collect();
    points.sort_by(|a, b| (a.0 * b.1).cmp(&(b.0 * a.1)));
    points.dedup_by(|a, b| a.0 * b.1 == b.0 * a.1);
    points.iter().map(|&(k, n)| k as f64 / n as f64).collect()
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// `|| lhs' - sum_k c_k v_k' ||_{L^2}` for functions on arbitrary (possibly
/// different) uniform meshes, integrated exactly on the union partition.
pub fn v_norm_of_difference(lhs: &GridFunction, terms: &[(f64, &GridFunction)]) -> f64 {
    let mut counts = vec![lhs.space.elements];
    counts.extend(terms.iter().map(|(_, v)| v.space.elements));
    let pts = union_breakpoints(&counts);
    // 2-point Gauss per union interval: derivatives are polynomials of degree
    // <= 1 there, so the squared difference is integrated exactly.
    let q = [0.5 - 0.5 / 3.0f64.sqrt(), 0.5 + 0.5 / 3.0f64.sqrt()];
    let mut acc = 0.0;
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = b - a;
        if len <= 0.0 {
            continue;
        }
        for &t in &q {
            let x = a + t * len;
            let mut d = lhs.deriv_at(x);
            for (c, v) in terms {
                d -= c * v.deriv_at(x);
            }
            acc += 0.5 * len * d * d;
        }
    }
    acc.max(0.0).sqrt()
}

/// V-orthogonal projection (unit-coefficient energy) onto another uniform
/// space of the same degree. The target mesh need not be nested; the mixed
/// stiffness integrals are evaluated exactly on the union partition.
pub fn project(u: &GridFunction, coarse: &FeSpace) -> Result<GridFunction> {
    if *coarse == u.space {
        return Ok(u.clone());
    }
    let op = FactoredOperator::new(*coarse, &Coefficient::Constant(1.0))?;
    let rhs = mixed_v_load(u, coarse);
    op.solve(&rhs)
}

/// `rhs_i = int u' phi_i'` for the coarse basis, exact on the union partition.
fn mixed_v_load(u: &GridFunction, coarse: &FeSpace) -> Vec<f64> {
    let pts = union_breakpoints(&[u.space.elements, coarse.elements]);
    let q = [0.5 - 0.5 / 3.0f64.sqrt(), 0.5 + 0.5 / 3.0f64.sqrt()];
    let mut rhs = vec![0.0; coarse.dofs()];
    let local = coarse.degree as usize + 1;
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = b - a;
        if len <= 0.0 {
            continue;
        }
        for &t in &q {
            let x = a + t * len;
            let du = u.deriv_at(x);
            let e = ((x * coarse.elements as f64).floor() as usize).min(coarse.elements - 1);
            let xi = x * coarse.elements as f64 - e as f64;
            let (dsh, _) = coarse.shape_deriv(xi);
            for l in 0..local {
                if let Some(gi) = coarse.dof_of_full_node(coarse.full_node(e, l)) {
                    rhs[gi] += 0.5 * len * du * dsh[l] * coarse.elements as f64;
                }
            }
        }
    }
    rhs
}

/// `||u - P_coarse u||_V` via Galerkin orthogonality (no union quadrature).
pub fn projection_error(u: &GridFunction, projected: &GridFunction) -> f64 {
    let full = v_inner(u, u);
    let part = v_inner(projected, projected);
    (full - part).max(0.0).sqrt()
}

// ---------------------------------------------------------------------------
// hierarchical multiscale basis
// ---------------------------------------------------------------------------

/// Hierarchical hat basis on the dyadic P1 space with `2^levels` elements.
///
/// The hats are V-orthogonal across levels and positions in 1D, so hard
/// thresholding of hierarchical coefficients is exactly best n-term in V.
#[derive(Debug, Clone, Copy)]
pub struct HierarchicalBasis {
    levels: u32,
}

/// One hierarchical coefficient with its selection score.
#[derive(Debug, Clone, Copy)]
pub struct HierEntry {
    pub level: u32,
    pub position: u32,
    /// Interpolation detail coefficient.
    pub coeff: f64,
    /// Energy contribution `|coeff| * ||hat||_V`.
    pub energy: f64,
}

impl HierarchicalBasis {
    pub fn new(levels: u32) -> Result<Self> {
        if levels == 0 || levels > 24 {
            return Err(Error::InvalidParameter(
                "hierarchical basis needs 1 <= levels <= 24".into(),
            ));
        }
        Ok(HierarchicalBasis { levels })
    }

    pub fn levels(&self) -> u32 {
        self.levels
    }

    pub fn space(&self) -> FeSpace {
        FeSpace {
            elements: 1usize << self.levels,
            degree: 1,
        }
    }

    /// `||hat_{l,i}||_V = 2^{(l+2)/2}` (slope `2^{l+1}` over width `2^{-l}`).
    pub fn hat_v_norm(level: u32) -> f64 {
        2.0f64.powf((level as f64 + 2.0) / 2.0)
    }

    fn check_space(&self, u: &GridFunction) -> Result<()> {
        if u.space != self.space() {
            return Err(Error::MeshMismatch(format!(
                "hierarchical basis expects the P1 space with {} elements",
                1usize << self.levels
            )));
        }
        Ok(())
    }

    /// Nodal to hierarchical coefficients. Entry order is level-major,
    /// position within level.
    pub fn analyze(&self, u: &GridFunction) -> Result<Vec<HierEntry>> {
        self.check_space(u)?;
        let n_full = (1usize << self.levels) + 1;
        let full = |i: usize| -> f64 {
            if i == 0 || i == n_full - 1 {
                0.0
            } else {
                u.values[i - 1]
            }
        };
        let mut out = Vec::with_capacity(n_full - 2 + 1);
        for l in 0..self.levels {
            let stride = 1usize << (self.levels - l); // support width in fine nodes
            let half = stride / 2;
            for i in 0..(1usize << l) {
                let left = i * stride;
                let peak = left + half;
                let right = left + stride;
                let coeff = full(peak) - 0.5 * (full(left) + full(right));
                out.push(HierEntry {
                    level: l,
                    position: i as u32,
                    coeff,
                    energy: coeff.abs() * Self::hat_v_norm(l),
                });
            }
        }
        Ok(out)
    }

    /// Hierarchical coefficients back to a nodal grid function.
    pub fn synthesize(&self, entries: &[HierEntry]) -> Result<GridFunction> {
        let n_full = (1usize << self.levels) + 1;
        let mut full = vec![0.0; n_full];
        let mut iter = entries.iter();
        for l in 0..self.levels {
            let stride = 1usize << (self.levels - l);
            let half = stride / 2;
            for i in 0..(1usize << l) {
                let entry = iter.next().ok_or_else(|| {
                    Error::InvalidParameter("hierarchical coefficient list too short".into())
                })?;
                if entry.level != l || entry.position != i as u32 {
                    return Err(Error::InvalidParameter(format!(
                        "hierarchical coefficients out of order at level {l}, position {i}"
                    )));
                }
                let left = i * stride;
                full[left + half] = 0.5 * (full[left] + full[left + stride]) + entry.coeff;
            }
        }
        GridFunction::from_values(self.space(), full[1..n_full - 1].to_vec())
    }
}

/// Keep the `n` hierarchical coefficients with the largest energy-norm
/// contribution (exact best n-term in V for the 1D hat hierarchy); ties break
/// by level then position. `n` beyond the coefficient count returns `u`.
pub fn best_nterm_spatial(
    u: &GridFunction,
    basis: &HierarchicalBasis,
    n: usize,
) -> Result<GridFunction> {
    let entries = basis.analyze(u)?;
    if n >= entries.len() {
        return Ok(u.clone());
    }
    let mut ranked: Vec<usize> = (0..entries.len()).collect();
    ranked.sort_by(|&a, &b| {
        entries[b]
            .energy
            .partial_cmp(&entries[a].energy)
            .expect("finite energies")
            .then_with(|| {
                (entries[a].level, entries[a].position)
                    .cmp(&(entries[b].level, entries[b].position))
            })
    });
    let keep: BTreeSet<usize> = ranked[..n].iter().copied().collect();
    let thresholded: Vec<HierEntry> = entries
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let mut e = *e;
            if !keep.contains(&i) {
                e.coeff = 0.0;
                e.energy = 0.0;
            }
            e
        })
        .collect();
    basis.synthesize(&thresholded)
}

/// Least-squares spatial rate from `(dofs, error)` samples: the negated
/// log-log slope.
pub fn measure_spatial_rate(errors: &[(f64, f64)]) -> Result<f64> {
    Ok(fit::fit_loglog(errors)?.slope)
}
