//! Taylor coefficients of the affine solution map by the variational
//! recursion with the fixed mean-field operator, strong-form Laplacian fields
//! by the first-order recursion, and the summability / layer-decay
//! diagnostics built on them.
//!
//! The coefficients computed here are the Taylor coefficients of the
//! *discrete* solution map: the recursion is run inside the FE space, which
//! commutes with Galerkin projection for the fixed mean-field energy and
//! makes the geometric single-parameter oracle exact.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use crate::fem::{self, Coefficient, ElementField, FactoredOperator, FeSpace, GridFunction};
use crate::linalg::SymBanded;
use crate::model::{theta_uniform, AffineModel, PiecewiseField};
use crate::multiindex::{weight_power, DownwardClosedSet, MultiIndex, WeightSequence};
#[allow(unused_imports)] // std test builds shadow these with inherent methods
use crate::real::Real;
use crate::rng::Rng;
use crate::{Error, Result};

/// Which coefficient norm a diagnostic runs on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Metric {
    /// `||u'||_{L^2}`.
    V,
    /// `||Delta u||_{L^2}` from the strong-form recursion field.
    W,
    /// `||u||_V + ||Delta u||_{L^tau}`.
    BTau(f64),
}

/// Per-index data: the coefficient, its gradient samples, the strong-form
/// Laplacian field once computed, and cached norms.
#[derive(Debug, Clone)]
pub struct CoefficientRecord {
    pub function: GridFunction,
    pub deriv: ElementField,
    pub laplacian: Option<ElementField>,
    pub norm_v: f64,
    /// `int abar |grad t_nu|^2`, the layer-sum summand.
    pub energy_abar: f64,
    pub norm_w: Option<f64>,
}

impl CoefficientRecord {
    pub fn metric_norm(&self, metric: Metric) -> Result<f64> {
        match metric {
            Metric::V => Ok(self.norm_v),
            Metric::W => self.norm_w.ok_or_else(|| {
                Error::InvalidParameter("W norms need compute_laplacians to run first".into())
            }),
            Metric::BTau(tau) => {
                let lap = self.laplacian.as_ref().ok_or_else(|| {
                    Error::InvalidParameter(
                        "B-tau norms need compute_laplacians to run first".into(),
                    )
                })?;
                Ok(self.norm_v + lap.norm_ltau(tau))
            }
        }
    }
}

/// Taylor expansion of the discrete solution map over a downward-closed set.
#[derive(Debug, Clone)]
pub struct TaylorExpansion {
    model: AffineModel,
    load: PiecewiseField,
    space: FeSpace,
    records: BTreeMap<MultiIndex, CoefficientRecord>,
    theta: f64,
}

impl TaylorExpansion {
    pub fn space(&self) -> FeSpace {
        self.space
    }

    pub fn model(&self) -> &AffineModel {
        &self.model
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, nu: &MultiIndex) -> Option<&CoefficientRecord> {
        self.records.get(nu)
    }

    /// Layer-ordered iteration over stored indices.
    pub fn iter(&self) -> impl Iterator<Item = (&MultiIndex, &CoefficientRecord)> {
        self.records.iter()
    }

    pub fn max_degree(&self) -> u32 {
        self.records.keys().map(|nu| nu.degree()).max().unwrap_or(0)
    }

    /// `(nu, norm)` pairs in layer order.
    pub fn norms(&self, metric: Metric) -> Result<Vec<(MultiIndex, f64)>> {
        self.records
            .iter()
            .map(|(nu, rec)| Ok((nu.clone(), rec.metric_norm(metric)?)))
            .collect()
    }

    /// Fill the strong-form Laplacian fields layer by layer via
    /// `-abar Delta t_nu = grad abar . grad t_nu + sum_j (psi_j Delta
    /// t_{nu-e_j} + grad psi_j . grad t_{nu-e_j})`, with the base case read
    /// off the strong form of the mean problem.
    pub fn compute_laplacians(&mut self) -> Result<()> {
        let space = self.space;
        let elements = space.elements();
        let abar_c = Coefficient::PwLinear(self.model.abar());
        let abar_vals = abar_c.samples(&space)?;
        let abar_slopes = abar_c.deriv_samples(&space)?;
        let mut psi_vals = Vec::with_capacity(self.model.dims());
        let mut psi_slopes = Vec::with_capacity(self.model.dims());
        for f in self.model.psi() {
            let c = Coefficient::PwLinear(f);
            psi_vals.push(c.samples(&space)?);
            psi_slopes.push(c.deriv_samples(&space)?);
        }
        let load_c = Coefficient::PwLinear(&self.load);
        let load_vals = load_c.samples(&space)?;

        let keys: Vec<MultiIndex> = self.records.keys().cloned().collect();
        for nu in keys {
            let rec = self.records.get(&nu).expect("key just listed");
            let deriv = rec.deriv.clone();
            let mut field = ElementField::zeros(elements);
            if nu.is_zero() {
                for e in 0..elements {
                    for g in 0..3 {
                        let a = abar_vals.get(e, g);
                        if a.abs() < 1e-14 {
                            return Err(Error::NonPositiveCoefficient {
                                element: e,
                                value: a,
                            });
                        }
                        let v =
                            -(load_vals.get(e, g) + abar_slopes.get(e, g) * deriv.get(e, g)) / a;
                        field.set(e, g, v);
                    }
                }
            } else {
                // gather ancestors once per index
                let mut parents: Vec<(usize, &CoefficientRecord)> = Vec::new();
                for j in nu.support().collect::<Vec<_>>() {
                    let anc = nu.decremented(j).expect("support dimension");
                    let anc_rec = self.records.get(&anc).ok_or(Error::MissingAncestor)?;
                    if anc_rec.laplacian.is_none() {
                        return Err(Error::MissingAncestor);
                    }
                    parents.push((j as usize - 1, anc_rec));
                }
                for e in 0..elements {
                    for g in 0..3 {
                        let a = abar_vals.get(e, g);
                        if a.abs() < 1e-14 {
                            return Err(Error::NonPositiveCoefficient {
                                element: e,
                                value: a,
                            });
                        }
                        let mut sum = abar_slopes.get(e, g) * deriv.get(e, g);
                        for &(j, anc) in &parents {
                            let lap = anc.laplacian.as_ref().expect("checked above");
                            sum += psi_vals[j].get(e, g) * lap.get(e, g)
                                + psi_slopes[j].get(e, g) * anc.deriv.get(e, g);
                        }
                        field.set(e, g, -sum / a);
                    }
                }
            }
            let norm_w = field.norm_l2();
            let rec = self.records.get_mut(&nu).expect("key just listed");
            rec.laplacian = Some(field);
            rec.norm_w = Some(norm_w);
        }
        Ok(())
    }
}

/// Run the variational recursion over a downward-closed set: the zero index
/// solves the mean problem, every other index solves the same operator
/// against the psi-weighted gradient products of its ancestors. The factored
/// mean operator is shared across all solves.
pub fn compute_taylor(
    model: &AffineModel,
    space: FeSpace,
    set: &DownwardClosedSet,
    load: &PiecewiseField,
) -> Result<TaylorExpansion> {
    let theta = theta_uniform(model);
    if theta >= 1.0 {
        return Err(Error::EllipticityViolated(theta));
    }
    let op = FactoredOperator::new(space, &Coefficient::PwLinear(model.abar()))?;
    let abar_samples = Coefficient::PwLinear(model.abar()).samples(&space)?;
    let psi_mats: Vec<SymBanded> = model
        .psi()
        .iter()
        .map(|f| fem::assemble_gradient_matrix(&space, &Coefficient::PwLinear(f), false))
        .collect::<Result<_>>()?;

    let mut records: BTreeMap<MultiIndex, CoefficientRecord> = BTreeMap::new();
    for nu in set.iter() {
        let function = if nu.is_zero() {
            op.solve(&fem::assemble_load(&space, |x| load.eval(x)))?
        } else {
            let mut rhs = alloc::vec![0.0; space.dofs()];
            for j in nu.support().collect::<Vec<_>>() {
                if j as usize > psi_mats.len() {
                    return Err(Error::InvalidParameter(format!(
                        "index touches dimension {j} but the model has {} dimensions",
                        psi_mats.len()
                    )));
                }
                let anc = nu.decremented(j).expect("support dimension");
                let anc_rec = records.get(&anc).ok_or(Error::MissingAncestor)?;
                let prod = psi_mats[j as usize - 1].matvec(anc_rec.function.values());
                for (r, p) in rhs.iter_mut().zip(&prod) {
                    *r -= p;
                }
            }
            op.solve(&rhs)?
        };
        let deriv = fem::deriv_samples(&function);
        let mut norm_v_sq = 0.0;
        let mut energy = 0.0;
        let h = space.mesh_width();
        for e in 0..space.elements() {
            for g in 0..3 {
                let d = deriv.get(e, g);
                let w = h * fem::GAUSS_W[g] * d * d;
                norm_v_sq += w;
                energy += w * abar_samples.get(e, g);
            }
        }
        records.insert(
            nu.clone(),
            CoefficientRecord {
                function,
                deriv,
                laplacian: None,
                norm_v: norm_v_sq.max(0.0).sqrt(),
                energy_abar: energy,
                norm_w: None,
            },
        );
    }
    Ok(TaylorExpansion {
        model: model.clone(),
        load: load.clone(),
        space,
        records,
        theta,
    })
}

/// `kappa = theta / (2 - theta)`, the layer-decay ratio.
pub fn kappa(theta: f64) -> f64 {
    theta / (2.0 - theta)
}

/// Per-layer sums of the mean-field gradient and Laplacian energies.
#[derive(Debug, Clone)]
pub struct LayerSums {
    pub degree: u32,
    pub count: usize,
    /// Whether the stored set contains the full layer over the model's
    /// dimension count; incomplete layers are excluded from decay checks.
    pub complete: bool,
    /// `D_n = sum_{|nu|=n} int abar |grad t_nu|^2`.
    pub d_sum: f64,
    /// `C_n = sum_{|nu|=n} int abar |Delta t_nu|^2`, when Laplacians exist.
    pub c_sum: Option<f64>,
}

/// Summability diagnostics of one expansion.
#[derive(Debug, Clone)]
pub struct SummabilityReport {
    pub theta: f64,
    pub kappa: f64,
    pub layers: Vec<LayerSums>,
    /// `sum (rho^nu ||t_nu||_V)^2` over the stored set.
    pub weighted_l2_v: f64,
    /// Same with the W norm, when Laplacians exist.
    pub weighted_l2_w: Option<f64>,
    /// `(p, (sum ||t_nu||_V^p)^{1/p})` for the requested exponents.
    pub lp_values: Vec<(f64, f64)>,
    /// Fitted decay exponent of the sorted-norm l^1 tails, when enough
    /// indices are stored.
    pub tail_exponent: Option<f64>,
}

/// Layer sums, weighted totals and tail diagnostics for an expansion.
pub fn layer_sums(
    expansion: &TaylorExpansion,
    rho: &WeightSequence,
    lp_exponents: &[f64],
) -> Result<SummabilityReport> {
    let theta = expansion.theta();
    let dims = expansion.model().dims() as u32;
    let max_degree = expansion.max_degree();
    let abar = Coefficient::PwLinear(expansion.model().abar()).samples(&expansion.space())?;
    let mut layers = Vec::with_capacity(max_degree as usize + 1);
    for n in 0..=max_degree {
        let mut d_sum = 0.0;
        let mut c_sum = Some(0.0);
        let mut count = 0usize;
        for (nu, rec) in expansion.iter() {
            if nu.degree() != n {
                continue;
            }
            count += 1;
            d_sum += rec.energy_abar;
            match (&rec.laplacian, c_sum) {
                (Some(lap), Some(acc)) => {
                    c_sum = Some(acc + lap.weighted_sq_norm(&abar));
                }
                _ => c_sum = None,
            }
        }
        // count-based completeness against the full simplex layer
        let complete = {
            let mut expected: u128 = 1;
            let mut ok = true;
            if n > 0 {
                expected = 1;
                for i in 0..n as u128 {
                    expected = match expected.checked_mul(dims as u128 + i) {
                        Some(v) => v / (i + 1),
                        None => {
                            ok = false;
                            break;
                        }
                    };
                }
            }
            ok && count as u128 == expected
        };
        layers.push(LayerSums {
            degree: n,
            count,
            complete,
            d_sum,
            c_sum,
        });
    }
    let weighted_l2_v = weighted_l2(expansion, rho, Metric::V)?;
    let weighted_l2_w = weighted_l2(expansion, rho, Metric::W).ok();
    let norms_v: Vec<f64> = expansion.iter().map(|(_, r)| r.norm_v).collect();
    let lp_values = lp_exponents
        .iter()
        .map(|&p| (p, lp_quasinorm(&norms_v, p)))
        .collect();
    let tail_exponent = tail_exponent(&norms_v, 8, 256).ok();
    Ok(SummabilityReport {
        theta,
        kappa: kappa(theta),
        layers,
        weighted_l2_v,
        weighted_l2_w,
        lp_values,
        tail_exponent,
    })
}

/// `sum_nu (rho^nu ||t_nu||)^2` over the stored set.
pub fn weighted_l2(
    expansion: &TaylorExpansion,
    rho: &WeightSequence,
    metric: Metric,
) -> Result<f64> {
    let mut acc = 0.0;
    for (nu, rec) in expansion.iter() {
        let w = weight_power(rho, nu) * rec.metric_norm(metric)?;
        acc += w * w;
    }
    Ok(acc)
}

/// `(sum v^p)^{1/p}` for positive `p`.
pub fn lp_quasinorm(values: &[f64], p: f64) -> f64 {
    debug_assert!(p > 0.0);
    values
        .iter()
        .map(|v| v.abs().powf(p))
        .sum::<f64>()
        .powf(1.0 / p)
}

/// Hoelder upper bound for the `l^p` quasi-norm with `1/p = 1/q + 1/2`:
/// the weighted `l^2` total times `(sum_nu rho^{-q nu})^{1/q}`, the latter by
/// the per-dimension geometric factorization (all weights must exceed 1).
pub fn holder_lp_bound(
    expansion: &TaylorExpansion,
    rho: &WeightSequence,
    q: f64,
    metric: Metric,
) -> Result<f64> {
    if !(q > 0.0) {
        return Err(Error::InvalidParameter("Hoelder bound needs q > 0".into()));
    }
    let dims = expansion.model().dims();
    let mut tail_factor: f64 = 1.0;
    for j in 1..=dims as u32 {
        let r = rho.get(j);
        if r <= 1.0 {
            return Err(Error::SurrogateNotSummable {
                j: j as usize,
                value: r,
            });
        }
        tail_factor *= 1.0 / (1.0 - r.powf(-q));
    }
    let weighted = weighted_l2(expansion, rho, metric)?;
    Ok(weighted.sqrt() * tail_factor.powf(1.0 / q))
}

/// The `n` indices of largest norm; ties break by degree then lexicographic
/// order, so selections are nested as `n` grows.
pub fn select_best_n(pairs: &[(MultiIndex, f64)], n: usize) -> Vec<(MultiIndex, f64)> {
    let mut sorted: Vec<(MultiIndex, f64)> = pairs.to_vec();
    sorted.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("finite norms")
            .then_with(|| a.0.cmp(&b.0))
    });
    sorted.truncate(n);
    sorted
}

/// Evaluate the truncated expansion `sum_{nu in Lambda} t_nu y^nu`.
pub fn eval_truncated(
    expansion: &TaylorExpansion,
    lambda: &[MultiIndex],
    y: &[f64],
) -> Result<GridFunction> {
    for (j, &yj) in y.iter().enumerate() {
        if !(-1.0..=1.0).contains(&yj) {
            return Err(Error::InvalidParameter(format!(
                "affine parameter y_{} = {yj} outside [-1, 1]",
                j + 1
            )));
        }
    }
    let mut out = GridFunction::zero(expansion.space());
    for nu in lambda {
        let rec = expansion.get(nu).ok_or_else(|| {
            Error::InvalidParameter(format!(
                "index {:?} is not stored in the expansion",
                nu.entries()
            ))
        })?;
        let mut coeff = 1.0;
        for &(j, e) in nu.entries() {
            let yj = y.get(j as usize - 1).copied().unwrap_or(0.0);
            coeff *= yj.powi(e as i32);
        }
        if coeff != 0.0 {
            out.add_scaled(&rec.function, coeff)?;
        }
    }
    Ok(out)
}

/// `||u_h(y) - sum_{Lambda} t_nu y^nu||_V` at one parameter point, with a
/// fresh direct solve as the reference.
pub fn sup_error_at(expansion: &TaylorExpansion, lambda: &[MultiIndex], y: &[f64]) -> Result<f64> {
    let a = expansion.model().coefficient(y)?;
    let load = expansion.load.clone();
    let mut reference =
        fem::solve_dirichlet(&expansion.space(), &Coefficient::PwLinear(&a), |x| {
            load.eval(x)
        })?;
    let truncated = eval_truncated(expansion, lambda, y)?;
    reference.add_scaled(&truncated, -1.0)?;
    Ok(fem::norm_v(&reference))
}

/// Result of the seeded sup-norm truncation-error estimate.
#[derive(Debug, Clone)]
pub struct SupErrorEstimate {
    pub max_error: f64,
    /// `sum_{stored nu not in Lambda} ||t_nu||_V`, the stored-tail bound.
    pub tail_bound: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Seeded Monte-Carlo sup-norm estimate over `samples` uniform draws from
/// `[-1,1]^J`, reported with the stored-tail bound it must not exceed.
pub fn sup_error_estimate(
    expansion: &TaylorExpansion,
    lambda: &[MultiIndex],
    samples: usize,
    seed: u64,
) -> Result<SupErrorEstimate> {
    let dims = expansion.model().dims();
    let chosen: alloc::collections::BTreeSet<&MultiIndex> = lambda.iter().collect();
    let tail_bound = expansion
        .iter()
        .filter(|(nu, _)| !chosen.contains(nu))
        .map(|(_, rec)| rec.norm_v)
        .sum();
    let mut rng = Rng::new(seed);
    let mut max_error = 0.0f64;
    for _ in 0..samples {
        let y: Vec<f64> = (0..dims).map(|_| rng.symmetric()).collect();
        max_error = max_error.max(sup_error_at(expansion, lambda, &y)?);
    }
    Ok(SupErrorEstimate {
        max_error,
        tail_bound,
        samples,
        seed,
    })
}

/// `sum_nu (rho^nu (||t_nu||_V + ||Delta t_nu||_{L^tau}))^tau`.
pub fn ltau_summability(
    expansion: &TaylorExpansion,
    tau: f64,
    rho: &WeightSequence,
) -> Result<f64> {
    if !(tau >= 1.0) {
        return Err(Error::InvalidParameter(
            "l^tau summability needs tau >= 1".into(),
        ));
    }
    let mut acc = 0.0;
    for (nu, rec) in expansion.iter() {
        let b = rec.metric_norm(Metric::BTau(tau))?;
        acc += (weight_power(rho, nu) * b).powf(tau);
    }
    Ok(acc)
}

/// Fitted decay exponent of the `l^1` tails of the sorted norms: fits
/// `log(sum_{i > k} v_(i))` against `log k` over ranks `[lo, hi]`.
pub fn tail_exponent(norms: &[f64], rank_lo: usize, rank_hi: usize) -> Result<f64> {
    if norms.len() <= rank_hi {
        return Err(Error::TooFewPoints(norms.len()));
    }
    let mut sorted = norms.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite norms"));
    // suffix sums: tail[k] = sum_{i >= k} sorted[i]
    let mut tail = alloc::vec![0.0; sorted.len() + 1];
    for i in (0..sorted.len()).rev() {
        tail[i] = tail[i + 1] + sorted[i];
    }
    let pts: Vec<(f64, f64)> = (rank_lo..=rank_hi)
        .filter(|&k| tail[k] > 0.0)
        .map(|k| (k as f64, tail[k]))
        .collect();
    Ok(crate::fit::fit_loglog(&pts)?.slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_wavelet_model, WaveletFamily};

    fn constant_psi_model(c: f64) -> AffineModel {
        AffineModel::new(
            PiecewiseField::constant(1.0, 1),
            alloc::vec![PiecewiseField::constant(c, 1)],
        )
        .unwrap()
    }

    fn unit_load() -> PiecewiseField {
        PiecewiseField::constant(1.0, 1)
    }

    #[test]
    fn base_case_solves_mean_problem() {
        let model = constant_psi_model(0.5);
        let space = FeSpace::new(64, 1).unwrap();
        let set = DownwardClosedSet::total_degree(1, 0);
        let exp = compute_taylor(&model, space, &set, &unit_load()).unwrap();
        let direct = fem::solve_dirichlet(&space, &Coefficient::Constant(1.0), |_| 1.0).unwrap();
        let t0 = &exp.get(&MultiIndex::zero()).unwrap().function;
        for (a, b) in t0.values().iter().zip(direct.values()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn geometric_decay_is_discretely_exact() {
        let c = 0.5;
        let model = constant_psi_model(c);
        let space = FeSpace::new(64, 1).unwrap();
        let set = DownwardClosedSet::total_degree(1, 12);
        let exp = compute_taylor(&model, space, &set, &unit_load()).unwrap();
        let n0 = exp.get(&MultiIndex::zero()).unwrap().norm_v;
        for k in 1..=12u32 {
            let nu = MultiIndex::from_pairs(&[(1, k)]).unwrap();
            let nk = exp.get(&nu).unwrap().norm_v;
            let expected = c.powi(k as i32) * n0;
            assert!(
                (nk - expected).abs() <= 1e-10 * expected,
                "k={k}: {nk} vs {expected}"
            );
        }
    }

    #[test]
    fn recursion_is_linear_in_the_load() {
        let model = constant_psi_model(0.4);
        let space = FeSpace::new(32, 1).unwrap();
        let set = DownwardClosedSet::total_degree(1, 4);
        let e1 = compute_taylor(&model, space, &set, &unit_load()).unwrap();
        let e3 = compute_taylor(&model, space, &set, &PiecewiseField::constant(3.0, 1)).unwrap();
        for (nu, rec) in e1.iter() {
            let r3 = e3.get(nu).unwrap();
            assert!((3.0 * rec.norm_v - r3.norm_v).abs() < 1e-12 * (1.0 + r3.norm_v));
        }
    }

    #[test]
    fn disjoint_support_cross_index_is_well_defined() {
        let abar = PiecewiseField::constant(1.0, 2);
        let psi1 = PiecewiseField::piecewise_constant(&[0.3, 0.0]).unwrap();
        let psi2 = PiecewiseField::piecewise_constant(&[0.0, 0.4]).unwrap();
        let m_a = AffineModel::new(abar.clone(), alloc::vec![psi1.clone(), psi2.clone()]).unwrap();
        let m_b = AffineModel::new(abar, alloc::vec![psi2, psi1]).unwrap();
        let space = FeSpace::new(32, 1).unwrap();
        let set = DownwardClosedSet::total_degree(2, 2);
        let ea = compute_taylor(&m_a, space, &set, &unit_load()).unwrap();
        let eb = compute_taylor(&m_b, space, &set, &unit_load()).unwrap();
        let cross = MultiIndex::from_exponents(&[1, 1]);
        let fa = &ea.get(&cross).unwrap().function;
        let fb = &eb.get(&cross).unwrap().function;
        for (a, b) in fa.values().iter().zip(fb.values()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn laplacian_base_case_and_geometric_decay() {
        let c = 0.5;
        let model = constant_psi_model(c);
        let space = FeSpace::new(256, 1).unwrap();
        let set = DownwardClosedSet::total_degree(1, 6);
        let mut exp = compute_taylor(&model, space, &set, &unit_load()).unwrap();
        exp.compute_laplacians().unwrap();
        // abar = 1, f = 1: Delta t_0 = -1 exactly at every Gauss point
        let rec0 = exp.get(&MultiIndex::zero()).unwrap();
        let lap0 = rec0.laplacian.as_ref().unwrap();
        for e in 0..space.elements() {
            for g in 0..3 {
                assert!((lap0.get(e, g) + 1.0).abs() < 1e-12);
            }
        }
        assert!((rec0.norm_w.unwrap() - 1.0).abs() < 1e-12);
        // constant psi: Delta t_k = (-c)^k Delta t_0
        for k in 1..=6u32 {
            let nu = MultiIndex::from_pairs(&[(1, k)]).unwrap();
            let w = exp.get(&nu).unwrap().norm_w.unwrap();
            let expected = c.powi(k as i32);
            assert!(
                (w - expected).abs() < 1e-10 * expected,
                "k={k}: {w} vs {expected}"
            );
        }
    }

    #[test]
    fn w_norm_consistency_under_refinement() {
        // nonconstant abar: the strong-form field converges at first order
        let abar = PiecewiseField::from_nodes(&[1.0, 1.5]).unwrap();
        let model = AffineModel::new(abar, alloc::vec![]).unwrap();
        let set = DownwardClosedSet::total_degree(1, 0);
        // reference at a fine mesh
        let fine = FeSpace::new(1 << 10, 1).unwrap();
        let mut fine_exp = compute_taylor(&model, fine, &set, &unit_load()).unwrap();
        fine_exp.compute_laplacians().unwrap();
        let w_ref = fine_exp.get(&MultiIndex::zero()).unwrap().norm_w.unwrap();
        let mut pts = Vec::new();
        for k in 3..=6 {
            let space = FeSpace::new(1 << k, 1).unwrap();
            let mut exp = compute_taylor(&model, space, &set, &unit_load()).unwrap();
            exp.compute_laplacians().unwrap();
            let w = exp.get(&MultiIndex::zero()).unwrap().norm_w.unwrap();
            pts.push(((1 << k) as f64, (w - w_ref).abs()));
        }
        let rate = crate::fit::fit_loglog(&pts).unwrap().slope;
        assert!(rate >= 1.0 - 0.2, "W-consistency rate {rate}");
    }

    #[test]
    fn kappa_substitution() {
        assert!((kappa(0.5) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn layer_sums_on_wavelet_model() {
        let fam = WaveletFamily::new(1.5, 1.0, 2).unwrap();
        let probe = build_wavelet_model(&WaveletFamily::new(1.5, 0.01, 2).unwrap()).unwrap();
        let scale = 0.6 * 0.01 / theta_uniform(&probe);
        let fam = WaveletFamily::new(fam.alpha, scale, fam.max_level).unwrap();
        let model = build_wavelet_model(&fam).unwrap();
        let theta = theta_uniform(&model);
        assert!((theta - 0.6).abs() < 1e-12);

        let space = FeSpace::new(32, 1).unwrap();
        let set = DownwardClosedSet::total_degree(model.dims() as u32, 3);
        let mut exp = compute_taylor(&model, space, &set, &unit_load()).unwrap();
        exp.compute_laplacians().unwrap();
        let ones = WeightSequence::constant(1.0, model.dims()).unwrap();
        let report = layer_sums(&exp, &ones, &[1.0, 2.0]).unwrap();
        let k = report.kappa;
        let d0 = report.layers[0].d_sum;
        assert!(
            (report.layers[0].d_sum - exp.get(&MultiIndex::zero()).unwrap().energy_abar).abs()
                < 1e-14
        );
        for n in 1..=3usize {
            assert!(report.layers[n].complete);
            let bound = 1.05 * k.powi(n as i32) * d0;
            assert!(
                report.layers[n].d_sum <= bound,
                "layer {n}: {} > {bound}",
                report.layers[n].d_sum
            );
        }
        // weighted l2 with unit weights matches sum of D_n when abar = 1
        let total_d: f64 = report.layers.iter().map(|l| l.d_sum).sum();
        assert!((report.weighted_l2_v - total_d).abs() < 1e-12 * total_d);
    }

    #[test]
    fn weighted_l2_geometric_oracle() {
        let c = 0.5;
        let model = constant_psi_model(c);
        let space = FeSpace::new(64, 1).unwrap();
        let kmax = 12u32;
        let set = DownwardClosedSet::total_degree(1, kmax);
        let exp = compute_taylor(&model, space, &set, &unit_load()).unwrap();
        let rho = WeightSequence::constant(1.0 / (2.0 * c), 1).unwrap();
        let total = weighted_l2(&exp, &rho, Metric::V).unwrap();
        let n0sq = exp.get(&MultiIndex::zero()).unwrap().norm_v.powi(2);
        // sum_{k<=K} 4^{-k} = (1 - 4^{-(K+1)}) / (3/4)
        let partial = (1.0 - 0.25f64.powi(kmax as i32 + 1)) / 0.75;
        assert!((total - n0sq * partial).abs() < 1e-10 * total);
    }

    #[test]
    fn lp_quasinorm_examples_and_holder_bound() {
        assert_eq!(lp_quasinorm(&[3.0, 4.0], 1.0), 7.0);
        assert!((lp_quasinorm(&[3.0, 4.0], 2.0) - 5.0).abs() < 1e-12);

        let model = constant_psi_model(0.5);
        let space = FeSpace::new(32, 1).unwrap();
        let set = DownwardClosedSet::total_degree(1, 10);
        let exp = compute_taylor(&model, space, &set, &unit_load()).unwrap();
        let rho = WeightSequence::constant(1.5, 1).unwrap();
        for q in [1.0, 2.0, 4.0] {
            let p = 1.0 / (1.0 / q + 0.5);
            let norms: Vec<f64> = exp.iter().map(|(_, r)| r.norm_v).collect();
            let direct = lp_quasinorm(&norms, p);
            let bound = holder_lp_bound(&exp, &rho, q, Metric::V).unwrap();
            assert!(bound >= direct, "q={q}: bound {bound} < direct {direct}");
        }
    }

    #[test]
    fn select_best_n_is_nested() {
        let model = constant_psi_model(0.5);
        let space = FeSpace::new(32, 1).unwrap();
        let set = DownwardClosedSet::total_degree(1, 8);
        let exp = compute_taylor(&model, space, &set, &unit_load()).unwrap();
        let pairs = exp.norms(Metric::V).unwrap();
        let all = select_best_n(&pairs, 100);
        assert_eq!(all.len(), pairs.len());
        let one = select_best_n(&pairs, 1);
        assert!(one[0].0.is_zero());
        let mut previous: Vec<MultiIndex> = Vec::new();
        for n in 1..=pairs.len() {
            let sel: Vec<MultiIndex> = select_best_n(&pairs, n)
                .into_iter()
                .map(|(nu, _)| nu)
                .collect();
            for nu in &previous {
                assert!(sel.contains(nu));
            }
            previous = sel;
        }
    }

    #[test]
    fn eval_truncated_examples() {
        let model = constant_psi_model(0.5);
        let space = FeSpace::new(64, 1).unwrap();
        let set = DownwardClosedSet::total_degree(1, 10);
        let exp = compute_taylor(&model, space, &set, &unit_load()).unwrap();
        let t0 = exp.get(&MultiIndex::zero()).unwrap().function.clone();
        let lambda: Vec<MultiIndex> = exp.iter().map(|(nu, _)| nu.clone()).collect();

        let at_zero = eval_truncated(&exp, &lambda, &[0.0]).unwrap();
        for (a, b) in at_zero.values().iter().zip(t0.values()) {
            assert!((a - b).abs() < 1e-14);
        }
        let only_zero = eval_truncated(&exp, &lambda[..1], &[0.77]).unwrap();
        for (a, b) in only_zero.values().iter().zip(t0.values()) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(eval_truncated(&exp, &lambda, &[1.5]).is_err());

        // full truncation error at y = 0.5 vs the geometric tail
        let err = sup_error_at(&exp, &lambda, &[0.5]).unwrap();
        let n0 = fem::norm_v(&t0);
        let cy = 0.25f64;
        let tail = n0 * cy.powi(11) / (1.0 - cy);
        assert!(err <= tail + 1e-9, "err {err} vs tail {tail}");
    }

    #[test]
    fn sup_error_estimate_respects_tail_bound() {
        let model = constant_psi_model(0.5);
        let space = FeSpace::new(64, 1).unwrap();
        let set = DownwardClosedSet::total_degree(1, 20);
        let exp = compute_taylor(&model, space, &set, &unit_load()).unwrap();
        let pairs = exp.norms(Metric::V).unwrap();
        let lambda: Vec<MultiIndex> = select_best_n(&pairs, 9)
            .into_iter()
            .map(|(nu, _)| nu)
            .collect();
        let est = sup_error_estimate(&exp, &lambda, 16, 7).unwrap();
        assert!(est.max_error <= est.tail_bound + 2e-9);
        // y = 0 reproduces t_0 up to solver tolerance
        let at_zero = sup_error_at(&exp, &lambda, &[0.0]).unwrap();
        assert!(at_zero < 1e-11);
        // determinism
        let again = sup_error_estimate(&exp, &lambda, 16, 7).unwrap();
        assert_eq!(est.max_error, again.max_error);
    }

    #[test]
    fn ltau_summability_consistency() {
        let model = constant_psi_model(0.5);
        let space = FeSpace::new(64, 1).unwrap();
        let set = DownwardClosedSet::total_degree(1, 8);
        let mut exp = compute_taylor(&model, space, &set, &unit_load()).unwrap();
        exp.compute_laplacians().unwrap();
        let ones = WeightSequence::constant(1.0, 1).unwrap();
        let via_ltau = ltau_summability(&exp, 2.0, &ones).unwrap();
        let via_weighted = weighted_l2(&exp, &ones, Metric::BTau(2.0)).unwrap();
        assert!((via_ltau - via_weighted).abs() < 1e-12 * via_ltau.max(1.0));
        // zero expansion edge: an expansion with zero load has zero norms
        let zero_exp = {
            let mut e =
                compute_taylor(&model, space, &set, &PiecewiseField::constant(0.0, 1)).unwrap();
            e.compute_laplacians().unwrap();
            e
        };
        assert!(ltau_summability(&zero_exp, 1.5, &ones).unwrap() < 1e-20);
    }

    #[test]
    fn tail_exponent_on_synthetic_power_law() {
        // long sequence so the finite-tail truncation bias is negligible
        let norms: Vec<f64> = (1..=50_000).map(|k| (k as f64).powf(-2.0)).collect();
        // l1 tail of k^{-2} decays like k^{-1}
        let t = tail_exponent(&norms, 8, 256).unwrap();
        assert!((t - 1.0).abs() < 0.05, "tail exponent {t}");
    }
}
