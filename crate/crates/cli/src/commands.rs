//! Implementations of the CLI subcommands.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sparpde::dof::{self, RateParams, Setting, SpatialMode};
use sparpde::fem::{FeSpace, HierarchicalBasis};
use sparpde::model::{rescale_weights_lognormal, PiecewiseField};
use sparpde::multiindex::{DownwardClosedSet, MultiIndex};
use sparpde::ortho::{
    self, compute_coeffs_affine, compute_coeffs_lognormal, OrthoExpansion, OrthoFamily,
};
use sparpde::sweep::{self, AllocationMode, SweepOutcome, SweepPoint};
use sparpde::taylor::{self, Metric};

use crate::config::{BuiltModel, ExperimentConfig};
use crate::report::{self, CheckOutcome, RateReport};
use crate::CliError;

/// Everything a command needs besides its config.
pub struct RunContext {
    pub config: ExperimentConfig,
    pub out: PathBuf,
    pub seed_override: Option<u64>,
    pub threads: usize,
    pub check: bool,
}

/// Whether a `--check` gate passed; commands without gates return `Ok`.
#[derive(Debug, PartialEq)]
pub enum Outcome {
    Ok,
    CheckFailed(String),
}

impl RunContext {
    fn seed(&self) -> u64 {
        self.seed_override
            .or(self.config.sweep.as_ref().map(|s| s.seed))
            .unwrap_or(2024)
    }

    fn unit_load(&self) -> PiecewiseField {
        PiecewiseField::constant(1.0, 1)
    }
}

fn ortho_family(config: &ExperimentConfig, capacity: usize) -> Result<OrthoFamily, CliError> {
    match config.expansion.kind.as_str() {
        "legendre" => Ok(OrthoFamily::legendre(capacity)),
        "chebyshev" => Ok(OrthoFamily::chebyshev(capacity)),
        "jacobi" => Ok(OrthoFamily::jacobi(
            config.expansion.jacobi_alpha.expect("validated"),
            config.expansion.jacobi_beta.expect("validated"),
            capacity,
        )?),
        "hermite" => Ok(OrthoFamily::hermite(capacity)),
        other => Err(CliError::Config(format!(
            "expansion kind '{other}' is not an orthonormal family"
        ))),
    }
}

fn quad_points(config: &ExperimentConfig) -> Result<usize, CliError> {
    config
        .expansion
        .quad_points
        .ok_or_else(|| CliError::Config("orthonormal expansions need quad_points".into()))
}

fn compute_ortho(
    config: &ExperimentConfig,
    built: &BuiltModel,
    set: &DownwardClosedSet,
    space: FeSpace,
    load: &PiecewiseField,
) -> Result<OrthoExpansion, CliError> {
    let q = quad_points(config)?;
    match built {
        BuiltModel::Affine { model, .. } => {
            let family = ortho_family(config, 2 * q + config.expansion.max_degree as usize + 2)?;
            Ok(compute_coeffs_affine(model, space, &family, set, q, load)?)
        }
        BuiltModel::Lognormal(model) => {
            if config.expansion.kind != "hermite" {
                return Err(CliError::Config(
                    "lognormal models pair with hermite expansions".into(),
                ));
            }
            Ok(compute_coeffs_lognormal(model, space, set, q, load)?)
        }
    }
}

#[derive(Serialize)]
struct LayerJson {
    degree: u32,
    count: usize,
    complete: bool,
    d_sum: f64,
    c_sum: Option<f64>,
}

#[derive(Serialize)]
struct SummabilityJson {
    theta: f64,
    kappa: f64,
    layers: Vec<LayerJson>,
    weighted_l2_v: f64,
    weighted_l2_w: Option<f64>,
    lp_values: Vec<(f64, f64)>,
    tail_exponent: Option<f64>,
}

/// `taylor`: compute the Taylor expansion, export coefficient norms and the
/// summability diagnostics.
pub fn run_taylor(ctx: &RunContext) -> Result<Outcome, CliError> {
    report::ensure_writable(&ctx.out)?;
    let built = ctx.config.model.build()?;
    let BuiltModel::Affine { model, .. } = &built else {
        return Err(CliError::Config(
            "taylor expansions need an affine (or wavelet) model".into(),
        ));
    };
    let weights = ctx.config.weights_for(&built)?;
    let set = ctx.config.index_set(model.dims(), &weights)?;
    let space = ctx.config.fem.space()?;
    let load = ctx.unit_load();
    let mut expansion = taylor::compute_taylor(model, space, &set, &load)?;
    expansion.compute_laplacians()?;

    let rows: Vec<(MultiIndex, f64, Option<f64>)> = expansion
        .iter()
        .map(|(nu, rec)| (nu.clone(), rec.norm_v, rec.norm_w))
        .collect();
    report::write_expansion_csv(&ctx.out.join("expansion.csv"), None, &rows)?;
    let t0 = &expansion
        .get(&MultiIndex::zero())
        .expect("base case")
        .function;
    report::write_gridfunction_csv(&ctx.out.join("t0.csv"), t0)?;

    let summary = taylor::layer_sums(&expansion, &weights, &[1.0, 2.0])?;
    let json = SummabilityJson {
        theta: summary.theta,
        kappa: summary.kappa,
        layers: summary
            .layers
            .iter()
            .map(|l| LayerJson {
                degree: l.degree,
                count: l.count,
                complete: l.complete,
                d_sum: l.d_sum,
                c_sum: l.c_sum,
            })
            .collect(),
        weighted_l2_v: summary.weighted_l2_v,
        weighted_l2_w: summary.weighted_l2_w,
        lp_values: summary.lp_values.clone(),
        tail_exponent: summary.tail_exponent,
    };
    std::fs::write(
        ctx.out.join("summability.json"),
        serde_json::to_string_pretty(&json)?,
    )?;
    Ok(Outcome::Ok)
}

#[derive(Serialize)]
struct ParsevalJson {
    lhs: f64,
    rhs: f64,
    gap: f64,
    clamp_events: usize,
    dims: usize,
    quad_points: usize,
    rescaling: Vec<RescaleJson>,
}

#[derive(Serialize)]
struct RescaleJson {
    r: u32,
    k_before: f64,
    k_after: f64,
    target: f64,
}

/// `jacobi` / `hermite`: orthonormal projection coefficients with the
/// Parseval diagnostics (plus the weight-rescaling report for lognormal).
pub fn run_ortho(ctx: &RunContext, lognormal: bool) -> Result<Outcome, CliError> {
    report::ensure_writable(&ctx.out)?;
    let built = ctx.config.model.build()?;
    match (&built, lognormal) {
        (BuiltModel::Affine { .. }, false) | (BuiltModel::Lognormal(_), true) => {}
        (BuiltModel::Affine { .. }, true) => {
            return Err(CliError::Config(
                "the hermite command needs a lognormal model".into(),
            ))
        }
        (BuiltModel::Lognormal(_), false) => {
            return Err(CliError::Config(
                "the jacobi command needs an affine model".into(),
            ))
        }
    }
    let weights = ctx.config.weights_for(&built)?;
    let dims = match &built {
        BuiltModel::Affine { model, .. } => model.dims(),
        BuiltModel::Lognormal(model) => model.dims(),
    };
    let set = ctx.config.index_set(dims, &weights)?;
    let space = ctx.config.fem.space()?;
    let load = ctx.unit_load();
    let expansion = compute_ortho(&ctx.config, &built, &set, space, &load)?;

    let rows: Vec<(MultiIndex, f64, Option<f64>)> = expansion
        .iter()
        .map(|(nu, rec)| (nu.clone(), rec.norm_v, rec.norm_w))
        .collect();
    let metadata = match expansion.kind() {
        ortho::FamilyKind::Jacobi { alpha, beta } => format!(
            "family: jacobi(alpha={alpha}, beta={beta}), dims: {}, quad_points: {}",
            expansion.dims(),
            expansion.points_per_dim()
        ),
        ortho::FamilyKind::Hermite => format!(
            "family: hermite, dims: {}, quad_points: {}",
            expansion.dims(),
            expansion.points_per_dim()
        ),
    };
    report::write_expansion_csv(&ctx.out.join("expansion.csv"), Some(&metadata), &rows)?;

    let check = ortho::parseval_check(&expansion);
    let mut rescaling = Vec::new();
    if let BuiltModel::Lognormal(model) = &built {
        let theta_h = 1.0 + (1.0 - 1.0 / 2.0f64.sqrt()).powi(2);
        for r in [1u32, 2] {
            let scaled = rescale_weights_lognormal(model, &weights, r)?;
            rescaling.push(RescaleJson {
                r,
                k_before: model.weighted_sup(&weights),
                k_after: model.weighted_sup(&scaled),
                target: theta_h.ln() / (r as f64).sqrt(),
            });
        }
    }
    let json = ParsevalJson {
        lhs: check.lhs,
        rhs: check.rhs,
        gap: check.gap,
        clamp_events: expansion.clamp_events,
        dims: expansion.dims(),
        quad_points: expansion.points_per_dim(),
        rescaling,
    };
    std::fs::write(
        ctx.out.join("parseval.json"),
        serde_json::to_string_pretty(&json)?,
    )?;
    Ok(Outcome::Ok)
}

/// `allocate`: best-n selection and dof plan export for the configured
/// expansion.
pub fn run_allocate(ctx: &RunContext) -> Result<Outcome, CliError> {
    report::ensure_writable(&ctx.out)?;
    let alloc = ctx
        .config
        .allocation
        .as_ref()
        .ok_or_else(|| CliError::Config("allocate needs an [allocation] section".into()))?;
    let n = alloc
        .n
        .ok_or_else(|| CliError::Config("allocate needs allocation.n".into()))?;
    let built = ctx.config.model.build()?;
    let weights = ctx.config.weights_for(&built)?;
    let space = ctx.config.fem.space()?;
    let load = ctx.unit_load();

    type NormPairs = Vec<(MultiIndex, f64)>;
    // norms in V for selection and in W for the allocation itself
    let (pairs_v, norms_w, setting): (NormPairs, NormPairs, Setting) =
        if ctx.config.expansion.kind == "taylor" {
            let BuiltModel::Affine { model, .. } = &built else {
                return Err(CliError::Config(
                    "taylor expansions need an affine model".into(),
                ));
            };
            let set = ctx.config.index_set(model.dims(), &weights)?;
            let mut exp = taylor::compute_taylor(model, space, &set, &load)?;
            exp.compute_laplacians()?;
            (exp.norms(Metric::V)?, exp.norms(Metric::W)?, Setting::Sup)
        } else {
            let dims = match &built {
                BuiltModel::Affine { model, .. } => model.dims(),
                BuiltModel::Lognormal(model) => model.dims(),
            };
            let set = ctx.config.index_set(dims, &weights)?;
            let exp = compute_ortho(&ctx.config, &built, &set, space, &load)?;
            (exp.norms_v(), exp.norms_w()?, Setting::L2)
        };

    let selected = taylor::select_best_n(&pairs_v, n);
    let lookup: std::collections::BTreeMap<&MultiIndex, f64> =
        norms_w.iter().map(|(nu, w)| (nu, *w)).collect();
    let norms_x: Vec<f64> = selected
        .iter()
        .map(|(nu, _)| *lookup.get(nu).expect("same index set"))
        .collect();
    let plan = match (alloc.mode.as_str(), setting) {
        ("fixed", _) => {
            let n_hat = dof::balanced_fixed_dofs(n as f64, alloc.s, alloc.t);
            dof::fixed_space_baseline(&norms_x, n as f64, n_hat)?
        }
        (_, Setting::Sup) => dof::allocate(&norms_x, alloc.s, alloc.t, n as f64)?,
        (_, Setting::L2) => dof::allocate_l2(&norms_x, alloc.s, alloc.t, n as f64)?,
    };
    let indices: Vec<MultiIndex> = selected.into_iter().map(|(nu, _)| nu).collect();
    report::write_plan_csv(&ctx.out.join("plan.csv"), &indices, &plan)?;
    Ok(Outcome::Ok)
}

/// Run independent sweep points, optionally across scoped threads; results
/// are reassembled in schedule order either way.
fn run_points<F>(count: usize, threads: usize, point: F) -> Result<Vec<SweepPoint>, CliError>
where
    F: Fn(usize) -> Result<SweepPoint, CliError> + Sync,
{
    if threads <= 1 || count <= 1 {
        return (0..count).map(&point).collect();
    }
    let workers = threads.min(count);
    let mut slots: Vec<Option<Result<SweepPoint, CliError>>> = Vec::new();
    slots.resize_with(count, || None);
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for tid in 0..workers {
            let point = &point;
            handles.push(scope.spawn(move || {
                let mut mine = Vec::new();
                let mut i = tid;
                while i < count {
                    mine.push((i, point(i)));
                    i += workers;
                }
                mine
            }));
        }
        for handle in handles {
            for (i, res) in handle.join().expect("sweep worker panicked") {
                slots[i] = Some(res);
            }
        }
    });
    slots
        .into_iter()
        .map(|s| s.expect("every slot filled"))
        .collect()
}

fn evaluate_check(
    config: &ExperimentConfig,
    fit: Option<&sparpde::fit::RateFit>,
) -> Option<CheckOutcome> {
    let gate = &config.check;
    if gate.min_slope.is_none() && gate.max_slope.is_none() {
        return None;
    }
    let Some(fit) = fit else {
        return Some(CheckOutcome {
            passed: false,
            details: "no rate fit available".to_string(),
        });
    };
    let mut passed = true;
    let mut details = Vec::new();
    if let Some(lo) = gate.min_slope {
        if fit.slope < lo {
            passed = false;
        }
        details.push(format!("slope {} vs min {}", fit.slope, lo));
    }
    if let Some(hi) = gate.max_slope {
        if fit.slope > hi {
            passed = false;
        }
        details.push(format!("slope {} vs max {}", fit.slope, hi));
    }
    Some(CheckOutcome {
        passed,
        details: details.join("; "),
    })
}

fn write_sweep_reports(
    ctx: &RunContext,
    command: &str,
    outcome: &SweepOutcome,
) -> Result<Outcome, CliError> {
    let fit = sweep::fit_sweep(outcome).ok();
    let check = evaluate_check(&ctx.config, fit.as_ref());
    let report = RateReport::new(
        command,
        &ctx.config,
        ctx.seed(),
        outcome,
        fit,
        ctx.config.check.predicted_rate,
        check.clone(),
    );
    report::write_sweep_csv(&ctx.out.join("sweep.csv"), &outcome.points)?;
    report::write_plotdata_csv(
        &ctx.out.join("plotdata.csv"),
        &outcome.points,
        ctx.config.check.predicted_rate,
    )?;
    report.write(&ctx.out.join("sweep.json"))?;
    match check {
        Some(c) if ctx.check && !c.passed => Ok(Outcome::CheckFailed(c.details)),
        _ => Ok(Outcome::Ok),
    }
}

/// `sweep`: the fully discrete error-versus-dofs experiment in the
/// configured estimator and allocation mode.
pub fn run_sweep(ctx: &RunContext) -> Result<Outcome, CliError> {
    report::ensure_writable(&ctx.out)?;
    let sweep_cfg = ctx
        .config
        .sweep
        .clone()
        .ok_or_else(|| CliError::Config("sweep needs a [sweep] section".into()))?;
    let alloc = ctx
        .config
        .allocation
        .clone()
        .ok_or_else(|| CliError::Config("sweep needs an [allocation] section".into()))?;
    let mode = match alloc.mode.as_str() {
        "optimal" => AllocationMode::Optimal,
        "fixed" => AllocationMode::FixedBalanced,
        other => {
            return Err(CliError::Config(format!(
                "sweep supports optimal/fixed allocation, not '{other}'"
            )))
        }
    };
    let built = ctx.config.model.build()?;
    let weights = ctx.config.weights_for(&built)?;
    let space = ctx.config.fem.space()?;
    let load = ctx.unit_load();
    let seed = ctx.seed();

    let outcome = match sweep_cfg.estimator.as_str() {
        "sup-mc" => {
            let BuiltModel::Affine { model, .. } = &built else {
                return Err(CliError::Config(
                    "sup-mc sweeps need an affine model".into(),
                ));
            };
            if ctx.config.expansion.kind != "taylor" {
                return Err(CliError::Config(
                    "sup-mc sweeps run on taylor expansions".into(),
                ));
            }
            let set = ctx.config.index_set(model.dims(), &weights)?;
            let mut expansion = taylor::compute_taylor(model, space, &set, &load)?;
            expansion.compute_laplacians()?;
            let points = run_points(sweep_cfg.schedule.len(), ctx.threads, |i| {
                Ok(sweep::taylor_sup_point(
                    &expansion,
                    sweep_cfg.schedule[i],
                    alloc.s,
                    alloc.t,
                    mode,
                    sweep_cfg.samples,
                    seed,
                )?)
            })?;
            SweepOutcome { points, floor: 0.0 }
        }
        "l2-quadrature" => {
            let dims = match &built {
                BuiltModel::Affine { model, .. } => model.dims(),
                BuiltModel::Lognormal(model) => model.dims(),
            };
            let set = ctx.config.index_set(dims, &weights)?;
            let expansion = compute_ortho(&ctx.config, &built, &set, space, &load)?;
            let points = run_points(sweep_cfg.schedule.len(), ctx.threads, |i| {
                Ok(sweep::ortho_l2_point(
                    &expansion,
                    sweep_cfg.schedule[i],
                    alloc.s,
                    alloc.t,
                    mode,
                )?)
            })?;
            let check = ortho::parseval_check(&expansion);
            SweepOutcome {
                points,
                floor: check.gap.max(0.0).sqrt(),
            }
        }
        other => return Err(CliError::Config(format!("unknown estimator '{other}'"))),
    };
    write_sweep_reports(ctx, "sweep", &outcome)
}

/// `joint`: nonlinear space-parameter selection over the hierarchical-hat
/// times polynomial dictionary.
pub fn run_joint(ctx: &RunContext) -> Result<Outcome, CliError> {
    report::ensure_writable(&ctx.out)?;
    let sweep_cfg = ctx
        .config
        .sweep
        .clone()
        .ok_or_else(|| CliError::Config("joint needs a [sweep] section".into()))?;
    let space = ctx.config.fem.space()?;
    if space.degree() != 1 || !space.elements().is_power_of_two() {
        return Err(CliError::Config(
            "joint selection needs a P1 space with a power-of-two element count".into(),
        ));
    }
    let levels = space.elements().trailing_zeros();
    let basis = HierarchicalBasis::new(levels)?;
    let built = ctx.config.model.build()?;
    let weights = ctx.config.weights_for(&built)?;
    let dims = match &built {
        BuiltModel::Affine { model, .. } => model.dims(),
        BuiltModel::Lognormal(model) => model.dims(),
    };
    let set = ctx.config.index_set(dims, &weights)?;
    let load = ctx.unit_load();
    let expansion = compute_ortho(&ctx.config, &built, &set, space, &load)?;
    let outcome = sweep::run_joint_sweep(&expansion, &basis, &sweep_cfg.schedule)?;
    write_sweep_reports(ctx, "joint", &outcome)
}

#[derive(Serialize)]
struct RatesJson {
    setting: Option<String>,
    regime: Option<String>,
    rate: Option<f64>,
    r_formula: Option<f64>,
    bracket: Option<(f64, f64)>,
    wavelet_mode: Option<String>,
    wavelet_rate: Option<f64>,
}

/// `rates`: pure rate arithmetic, printed as JSON to stdout.
#[allow(clippy::too_many_arguments)]
pub fn run_rates(
    setting: Option<&str>,
    s: Option<f64>,
    t: Option<f64>,
    p_x: Option<f64>,
    p_v: Option<f64>,
    wavelet_alpha: Option<f64>,
    m: u32,
    mode: &str,
) -> Result<String, CliError> {
    let mut out = RatesJson {
        setting: None,
        regime: None,
        rate: None,
        r_formula: None,
        bracket: None,
        wavelet_mode: None,
        wavelet_rate: None,
    };
    if let (Some(setting), Some(t), Some(p_x)) = (setting, t, p_x) {
        let setting_enum = match setting {
            "sup" => Setting::Sup,
            "l2" => Setting::L2,
            other => return Err(CliError::Config(format!("unknown setting '{other}'"))),
        };
        let params = match (s, p_v) {
            (Some(s), Some(p_v)) => RateParams {
                setting: setting_enum,
                s,
                t,
                p_v,
                p_x,
            },
            (Some(s), None) => {
                // derive p_v from s for the bracket
                let p_v = 1.0 / (s + setting_enum.rate_offset());
                RateParams {
                    setting: setting_enum,
                    s,
                    t,
                    p_v,
                    p_x,
                }
            }
            (None, Some(p_v)) => RateParams::from_summability(setting_enum, t, p_v, p_x)?,
            (None, None) => {
                return Err(CliError::Config(
                    "rate prediction needs --s or --p-v".into(),
                ))
            }
        };
        let pred = dof::predict_rate(&params)?;
        out.setting = Some(setting.to_string());
        out.regime = Some(
            match pred.regime {
                dof::Regime::SpatialDominated => "spatial",
                dof::Regime::Mixed => "mixed",
            }
            .to_string(),
        );
        out.rate = Some(pred.rate);
        out.r_formula = Some(pred.r_formula);
        out.bracket = Some(pred.bracket);
    }
    if let Some(alpha) = wavelet_alpha {
        let mode_enum = match mode {
            "linear" => SpatialMode::Linear,
            "nonlinear" => SpatialMode::Nonlinear,
            other => return Err(CliError::Config(format!("unknown spatial mode '{other}'"))),
        };
        out.wavelet_mode = Some(mode.to_string());
        out.wavelet_rate = Some(dof::wavelet_predicted_rate(alpha, m, mode_enum)?);
    }
    if out.rate.is_none() && out.wavelet_rate.is_none() {
        return Err(CliError::Config(
            "rates needs either --setting/--t/--p-x or --wavelet-alpha".into(),
        ));
    }
    Ok(serde_json::to_string_pretty(&out)?)
}

/// Load a config file and wrap it in a run context.
pub fn load_context(
    config_path: &Path,
    out: Option<PathBuf>,
    seed: Option<u64>,
    threads: usize,
    check: bool,
) -> Result<RunContext, CliError> {
    let text = std::fs::read_to_string(config_path).map_err(|e| {
        CliError::Config(format!("cannot read config {}: {e}", config_path.display()))
    })?;
    let config = ExperimentConfig::parse(&text)?;
    let out = out.unwrap_or_else(|| PathBuf::from("out"));
    Ok(RunContext {
        config,
        out,
        seed_override: seed,
        threads: threads.max(1),
        check,
    })
}
