//! Fully discrete error-versus-dofs experiments: best n-term selection,
//! per-coefficient dof allocation, realization by V-orthogonal projection
//! (linear mode) or joint space-parameter selection (nonlinear mode), and
//! the rate fits over the resulting `(N, error)` clouds.
//!
//! Errors are measured against the resolved reference expansion on the fine
//! mesh; the quadrature residual beyond the stored index set is reported
//! separately as `floor` rather than folded into the fitted data.

use alloc::format;
use alloc::vec::Vec;

use crate::dof::{self, AllocationPlan};
use crate::fem::{self, FeSpace, GridFunction, HierarchicalBasis};
use crate::fit::{self, RateFit};
use crate::multiindex::MultiIndex;
use crate::ortho::OrthoExpansion;
#[allow(unused_imports)] // std test builds shadow these with inherent methods
use crate::real::Real;
use crate::rng::Rng;
use crate::taylor::{self, Metric, TaylorExpansion};
use crate::{Error, Result};

/// How spatial resolutions are assigned to the retained coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AllocationMode {
    /// Lagrange-multiplier optimal allocation from the X-norms.
    Optimal,
    /// One shared resolution, balanced as `n_hat ~ n^{s/t}`.
    FixedBalanced,
}

/// One sweep sample.
#[derive(Debug, Clone, Copy)]
pub struct SweepPoint {
    /// Retained parametric indices.
    pub n: usize,
    /// Realized total spatial dofs.
    pub dofs: usize,
    /// Real-valued total from the closed-form allocation.
    pub dofs_real: f64,
    pub error: f64,
    /// Coefficients whose allocation hit the reference-resolution cap.
    pub capped: usize,
}

/// A full sweep with its floor diagnostics.
#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub points: Vec<SweepPoint>,
    /// Residual of the reference expansion itself (quadrature tail beyond
    /// the stored index set); meaningful for the orthonormal settings.
    pub floor: f64,
}

impl SweepOutcome {
    /// `(N, error)` pairs for rate fitting, dropping exact zeros.
    pub fn fit_points(&self) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .filter(|p| p.error > 1e-14)
            .map(|p| (p.dofs as f64, p.error))
            .collect()
    }
}

/// Fit a sweep, requiring the dof axis to span at least 1.5 decades.
pub fn fit_sweep(outcome: &SweepOutcome) -> Result<RateFit> {
    let pts = outcome.fit_points();
    let span = fit::span_decades(&pts);
    if span < 1.5 {
        return Err(Error::InvalidParameter(format!(
            "sweep spans only {span:.2} decades of dofs; rate fits need 1.5"
        )));
    }
    fit::fit_loglog(&pts)
}

/// Uniform space of the same degree with at least `dofs` interior dofs,
/// capped at a quarter of the reference resolution so the reference stays
/// meaningfully finer.
fn allocated_space(reference: FeSpace, dofs: usize) -> (FeSpace, bool) {
    let degree = reference.degree() as usize;
    let wanted = (dofs + 1).div_ceil(degree);
    let cap = (reference.elements() / 4).max(1);
    let capped = wanted > cap;
    let elements = wanted.min(cap);
    (
        FeSpace::new(elements, reference.degree()).expect("valid element count"),
        capped,
    )
}

fn plan_for(
    norms_x: &[f64],
    n: usize,
    s: f64,
    t: f64,
    mode: AllocationMode,
    setting: dof::Setting,
) -> Result<AllocationPlan> {
    match mode {
        AllocationMode::Optimal => match setting {
            dof::Setting::Sup => dof::allocate(norms_x, s, t, n as f64),
            dof::Setting::L2 => dof::allocate_l2(norms_x, s, t, n as f64),
        },
        AllocationMode::FixedBalanced => {
            let n_hat = dof::balanced_fixed_dofs(n as f64, s, t);
            dof::fixed_space_baseline(norms_x, n as f64, n_hat)
        }
    }
}

/// One point of the sup-norm Taylor sweep: select, allocate, project, and
/// measure the seeded Monte-Carlo max error against fresh direct solves.
pub fn taylor_sup_point(
    expansion: &TaylorExpansion,
    n: usize,
    s: f64,
    t: f64,
    mode: AllocationMode,
    samples: usize,
    seed: u64,
) -> Result<SweepPoint> {
    let pairs = expansion.norms(Metric::V)?;
    let selected = taylor::select_best_n(&pairs, n);
    let norms_x: Vec<f64> = selected
        .iter()
        .map(|(nu, _)| {
            expansion
                .get(nu)
                .expect("selected from stored set")
                .metric_norm(Metric::W)
        })
        .collect::<Result<_>>()?;
    let plan = plan_for(&norms_x, n, s, t, mode, dof::Setting::Sup)?;

    let mut projected: Vec<(MultiIndex, GridFunction)> = Vec::with_capacity(selected.len());
    let mut dofs_total = 0usize;
    let mut capped_count = 0usize;
    for ((nu, _), entry) in selected.iter().zip(&plan.entries) {
        let (space, capped) = allocated_space(expansion.space(), entry.dofs);
        if capped {
            capped_count += 1;
        }
        dofs_total += space.dofs();
        let rec = expansion.get(nu).expect("selected from stored set");
        projected.push((nu.clone(), fem::project(&rec.function, &space)?));
    }

    let dims = expansion.model().dims();
    let mut rng = Rng::new(seed ^ (n as u64).wrapping_mul(0x9e3779b97f4a7c15));
    let mut max_error = 0.0f64;
    for _ in 0..samples {
        let y: Vec<f64> = (0..dims).map(|_| rng.symmetric()).collect();
        let a = expansion.model().coefficient(&y)?;
        let reference =
            fem::solve_dirichlet(&expansion.space(), &fem::Coefficient::PwLinear(&a), |_| 1.0)?;
        let terms: Vec<(f64, &GridFunction)> = projected
            .iter()
            .map(|(nu, p)| {
                let mut c = 1.0;
                for &(j, e) in nu.entries() {
                    c *= y[j as usize - 1].powi(e as i32);
                }
                (c, p)
            })
            .collect();
        max_error = max_error.max(fem::v_norm_of_difference(&reference, &terms));
    }
    Ok(SweepPoint {
        n,
        dofs: dofs_total,
        dofs_real: plan.n_total_real,
        error: max_error,
        capped: capped_count,
    })
}

/// Sup-norm Taylor sweep over a schedule of retained-index counts.
///
/// The sup sweep assumes a unit load (the same one the expansion was built
/// with); reference solves are repeated per sample point.
pub fn run_taylor_sup_sweep(
    expansion: &TaylorExpansion,
    schedule: &[usize],
    s: f64,
    t: f64,
    mode: AllocationMode,
    samples: usize,
    seed: u64,
) -> Result<SweepOutcome> {
    let points = schedule
        .iter()
        .map(|&n| taylor_sup_point(expansion, n, s, t, mode, samples, seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepOutcome { points, floor: 0.0 })
}

/// One point of the mean-square sweep in an orthonormal family: the error
/// against the resolved expansion splits into the dropped-coefficient tail
/// plus the projection losses of the kept coefficients.
pub fn ortho_l2_point(
    expansion: &OrthoExpansion,
    n: usize,
    s: f64,
    t: f64,
    mode: AllocationMode,
) -> Result<SweepPoint> {
    let pairs = expansion.norms_v();
    let selected = taylor::select_best_n(&pairs, n);
    let norms_x: Vec<f64> = selected
        .iter()
        .map(|(nu, _)| {
            expansion
                .get(nu)
                .expect("selected from stored set")
                .norm_w
                .ok_or_else(|| {
                    Error::InvalidParameter(
                        "l2 sweep needs W norms; enable Laplacian accumulation".into(),
                    )
                })
        })
        .collect::<Result<_>>()?;
    let plan = plan_for(&norms_x, n, s, t, mode, dof::Setting::L2)?;

    let total_sq: f64 = pairs.iter().map(|(_, v)| v * v).sum();
    let mut kept_sq = 0.0;
    let mut dofs_total = 0usize;
    let mut capped_count = 0usize;
    for ((nu, norm_v), entry) in selected.iter().zip(&plan.entries) {
        let (space, capped) = allocated_space(expansion.space(), entry.dofs);
        if capped {
            capped_count += 1;
        }
        dofs_total += space.dofs();
        let rec = expansion.get(nu).expect("selected from stored set");
        let projected = fem::project(&rec.function, &space)?;
        let kept = fem::v_inner(&projected, &projected);
        // Galerkin orthogonality: ||v - Pv||^2 = ||v||^2 - ||Pv||^2
        kept_sq += kept.min(norm_v * norm_v);
    }
    let error = (total_sq - kept_sq).max(0.0).sqrt();
    Ok(SweepPoint {
        n,
        dofs: dofs_total,
        dofs_real: plan.n_total_real,
        error,
        capped: capped_count,
    })
}

/// Mean-square sweep over a schedule of retained-index counts.
pub fn run_ortho_l2_sweep(
    expansion: &OrthoExpansion,
    schedule: &[usize],
    s: f64,
    t: f64,
    mode: AllocationMode,
) -> Result<SweepOutcome> {
    let points = schedule
        .iter()
        .map(|&n| ortho_l2_point(expansion, n, s, t, mode))
        .collect::<Result<Vec<_>>>()?;
    let check = crate::ortho::parseval_check(expansion);
    Ok(SweepOutcome {
        points,
        floor: check.gap.max(0.0).sqrt(),
    })
}

/// One atom of the joint space-parameter dictionary.
#[derive(Debug, Clone)]
pub struct JointAtom {
    pub index: MultiIndex,
    pub level: u32,
    pub position: u32,
    /// `|c| * ||hat||_V`: the V x L^2 energy of the atom.
    pub energy: f64,
}

/// The joint dictionary `hat_lambda x phi_nu`, energy-sorted.
///
/// Both factors are orthonormal (hats after V-normalization, polynomials in
/// `L^2` of the parameter measure), so the squared error of any selection is
/// the sum of the squared dropped energies.
#[derive(Debug, Clone)]
pub struct JointDictionary {
    atoms: Vec<JointAtom>,
    /// prefix[k] = sum of squared energies of the first k atoms.
    prefix: Vec<f64>,
    total_sq: f64,
    /// Quadrature residual of the reference expansion itself.
    pub floor: f64,
}

impl JointDictionary {
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn atoms(&self) -> &[JointAtom] {
        &self.atoms
    }

    /// Error of the best `n`-atom selection: the Parseval tail of the
    /// dropped coefficients.
    pub fn error_at(&self, n: usize) -> f64 {
        let kept = self.prefix[n.min(self.atoms.len())];
        (self.total_sq - kept).max(0.0).sqrt()
    }

    /// The selected atoms themselves.
    pub fn selection(&self, n: usize) -> &[JointAtom] {
        &self.atoms[..n.min(self.atoms.len())]
    }
}

/// Expand every stored coefficient in the hierarchical basis and sort the
/// joint atoms by energy (ties by index order, then level, then position).
pub fn joint_dictionary(
    expansion: &OrthoExpansion,
    basis: &HierarchicalBasis,
) -> Result<JointDictionary> {
    if expansion.space() != basis.space() {
        return Err(Error::MeshMismatch(
            "joint selection needs the expansion on the hierarchical P1 space".into(),
        ));
    }
    let mut atoms: Vec<JointAtom> = Vec::new();
    let mut total_sq = 0.0;
    for (nu, rec) in expansion.iter() {
        for entry in basis.analyze(&rec.function)? {
            total_sq += entry.energy * entry.energy;
            if entry.energy != 0.0 {
                atoms.push(JointAtom {
                    index: nu.clone(),
                    level: entry.level,
                    position: entry.position,
                    energy: entry.energy,
                });
            }
        }
    }
    atoms.sort_by(|a, b| {
        b.energy
            .partial_cmp(&a.energy)
            .expect("finite energies")
            .then_with(|| a.index.cmp(&b.index))
            .then_with(|| (a.level, a.position).cmp(&(b.level, b.position)))
    });
    let mut prefix = Vec::with_capacity(atoms.len() + 1);
    prefix.push(0.0);
    for a in &atoms {
        let last = *prefix.last().expect("nonempty");
        prefix.push(last + a.energy * a.energy);
    }
    let check = crate::ortho::parseval_check(expansion);
    Ok(JointDictionary {
        atoms,
        prefix,
        total_sq,
        floor: check.gap.max(0.0).sqrt(),
    })
}

/// Best joint `N`-term selection: the atom set and its Parseval error.
pub fn joint_best_n(dictionary: &JointDictionary, n: usize) -> (&[JointAtom], f64) {
    (dictionary.selection(n), dictionary.error_at(n))
}

/// Nonlinear joint sweep over a schedule of total atom counts.
pub fn run_joint_sweep(
    expansion: &OrthoExpansion,
    basis: &HierarchicalBasis,
    schedule: &[usize],
) -> Result<SweepOutcome> {
    let dict = joint_dictionary(expansion, basis)?;
    let points = schedule
        .iter()
        .map(|&n| SweepPoint {
            n,
            dofs: n.min(dict.len()),
            dofs_real: n as f64,
            error: dict.error_at(n),
            capped: 0,
        })
        .collect();
    Ok(SweepOutcome {
        points,
        floor: dict.floor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AffineModel, PiecewiseField};
    use crate::multiindex::DownwardClosedSet;
    use crate::ortho::{compute_coeffs_affine, OrthoFamily};

    fn two_param_model() -> AffineModel {
        AffineModel::new(
            PiecewiseField::constant(1.0, 2),
            alloc::vec![
                PiecewiseField::piecewise_constant(&[0.5, 0.0]).unwrap(),
                PiecewiseField::piecewise_constant(&[0.0, 0.35]).unwrap(),
            ],
        )
        .unwrap()
    }

    fn unit_load() -> PiecewiseField {
        PiecewiseField::constant(1.0, 1)
    }

    #[test]
    fn l2_sweep_errors_decrease() {
        let model = two_param_model();
        let space = FeSpace::new(256, 1).unwrap();
        let fam = OrthoFamily::legendre(16);
        let set = DownwardClosedSet::total_degree(2, 5);
        let exp = compute_coeffs_affine(&model, space, &fam, &set, 6, &unit_load()).unwrap();
        let schedule = [1usize, 2, 4, 8, 16];
        let out = run_ortho_l2_sweep(&exp, &schedule, 1.0, 1.0, AllocationMode::Optimal).unwrap();
        for w in out.points.windows(2) {
            assert!(w[1].error <= w[0].error + 1e-12);
            assert!(w[1].dofs >= w[0].dofs);
        }
        assert!(out.points.iter().all(|p| p.capped == 0));
    }

    #[test]
    fn taylor_sup_sweep_runs_and_decreases() {
        let model = two_param_model();
        let space = FeSpace::new(128, 1).unwrap();
        let set = DownwardClosedSet::total_degree(2, 6);
        let mut exp = crate::taylor::compute_taylor(&model, space, &set, &unit_load()).unwrap();
        exp.compute_laplacians().unwrap();
        let schedule = [2usize, 4, 8, 16];
        let out = run_taylor_sup_sweep(&exp, &schedule, 1.0, 1.0, AllocationMode::Optimal, 8, 42)
            .unwrap();
        for w in out.points.windows(2) {
            assert!(w[1].error <= w[0].error * 1.5 + 1e-10, "{:?}", out.points);
        }
        // determinism: same seed, same errors
        let again = run_taylor_sup_sweep(&exp, &schedule, 1.0, 1.0, AllocationMode::Optimal, 8, 42)
            .unwrap();
        for (a, b) in out.points.iter().zip(&again.points) {
            assert_eq!(a.error, b.error);
        }
    }

    #[test]
    fn joint_error_is_parseval_tail() {
        let model = two_param_model();
        let basis = HierarchicalBasis::new(6).unwrap();
        let space = basis.space();
        let fam = OrthoFamily::legendre(16);
        let set = DownwardClosedSet::total_degree(2, 4);
        let exp = compute_coeffs_affine(&model, space, &fam, &set, 6, &unit_load()).unwrap();
        let dict = joint_dictionary(&exp, &basis).unwrap();
        // manual tail at a few cut points
        let energies: Vec<f64> = dict.atoms().iter().map(|a| a.energy).collect();
        for n in [0usize, 3, 17, energies.len()] {
            let manual: f64 = energies[n.min(energies.len())..]
                .iter()
                .map(|e| e * e)
                .sum::<f64>()
                .sqrt();
            assert!(
                (dict.error_at(n) - manual).abs() < 1e-10,
                "n={n}: {} vs {manual}",
                dict.error_at(n)
            );
        }
        // full selection leaves nothing
        assert!(dict.error_at(usize::MAX) < 1e-10);
        // monotone in n
        let mut last = f64::INFINITY;
        for n in 0..energies.len() {
            let e = dict.error_at(n);
            assert!(e <= last + 1e-14);
            last = e;
        }
    }

    #[test]
    fn fit_sweep_guards_span() {
        let narrow = SweepOutcome {
            points: alloc::vec![
                SweepPoint {
                    n: 1,
                    dofs: 10,
                    dofs_real: 10.0,
                    error: 1.0,
                    capped: 0
                },
                SweepPoint {
                    n: 2,
                    dofs: 20,
                    dofs_real: 20.0,
                    error: 0.5,
                    capped: 0
                },
                SweepPoint {
                    n: 3,
                    dofs: 40,
                    dofs_real: 40.0,
                    error: 0.25,
                    capped: 0
                },
                SweepPoint {
                    n: 4,
                    dofs: 80,
                    dofs_real: 80.0,
                    error: 0.125,
                    capped: 0
                },
            ],
            floor: 0.0,
        };
        assert!(fit_sweep(&narrow).is_err());
        let wide = SweepOutcome {
            points: (0..8)
                .map(|k| SweepPoint {
                    n: k + 1,
                    dofs: 10 << k,
                    dofs_real: (10 << k) as f64,
                    error: 2.0 / (10u64 << k) as f64,
                    capped: 0,
                })
                .collect(),
            floor: 0.0,
        };
        let fit = fit_sweep(&wide).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-12);
    }
}
