//! Declarative experiment configuration (TOML) and its validation.
//!
//! Every run embeds the resolved configuration in its JSON report, so a
//! report is reproducible from itself.

use serde::{Deserialize, Serialize};
use sparpde::fem::FeSpace;
use sparpde::model::{
    build_wavelet_model, theta_uniform, AffineModel, LognormalModel, PiecewiseField, WaveletFamily,
};
use sparpde::multiindex::{generate_envelope, DownwardClosedSet, WeightSequence};

use crate::CliError;

/// One piecewise-linear field on the model's uniform reference grid.
///
/// Exactly one of `values` (continuous node values), `cell_values`
/// (piecewise constant) or `constant` + `cells` must be given.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub values: Option<Vec<f64>>,
    pub cell_values: Option<Vec<f64>>,
    pub constant: Option<f64>,
    pub cells: Option<usize>,
}

impl FieldSpec {
    pub fn build(&self) -> Result<PiecewiseField, CliError> {
        match (&self.values, &self.cell_values, self.constant) {
            (Some(v), None, None) => Ok(PiecewiseField::from_nodes(v)?),
            (None, Some(v), None) => Ok(PiecewiseField::piecewise_constant(v)?),
            (None, None, Some(c)) => Ok(PiecewiseField::constant(c, self.cells.unwrap_or(1))),
            _ => Err(CliError::Config(
                "field spec needs exactly one of values / cell_values / constant".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// "affine" | "lognormal" | "wavelet"
    pub kind: String,
    // wavelet family parameters
    pub alpha: Option<f64>,
    pub amplitude: Option<f64>,
    /// Alternative to `amplitude`: scale the family to this uniform
    /// ellipticity constant (the constant is linear in the amplitude).
    pub theta_target: Option<f64>,
    pub levels: Option<u32>,
    /// Keep only the first `active_dims` expansion functions.
    pub active_dims: Option<usize>,
    // explicit field lists for affine / lognormal models
    pub abar: Option<FieldSpec>,
    pub psi: Option<Vec<FieldSpec>>,
}

/// A built parametric model of either kind.
pub enum BuiltModel {
    Affine {
        model: AffineModel,
        family: Option<WaveletFamily>,
    },
    Lognormal(LognormalModel),
}

impl ModelConfig {
    pub fn build(&self) -> Result<BuiltModel, CliError> {
        match self.kind.as_str() {
            "wavelet" => {
                let alpha = self
                    .alpha
                    .ok_or_else(|| CliError::Config("wavelet model needs alpha".into()))?;
                let levels = self
                    .levels
                    .ok_or_else(|| CliError::Config("wavelet model needs levels".into()))?;
                let amplitude = match (self.amplitude, self.theta_target) {
                    (Some(c), None) => c,
                    (None, Some(theta)) => {
                        if !(theta > 0.0 && theta < 1.0) {
                            return Err(CliError::Config("theta_target must lie in (0, 1)".into()));
                        }
                        let probe = build_wavelet_model(&WaveletFamily::new(alpha, 1e-3, levels)?)?;
                        1e-3 * theta / theta_uniform(&probe)
                    }
                    _ => {
                        return Err(CliError::Config(
                            "wavelet model needs exactly one of amplitude / theta_target".into(),
                        ))
                    }
                };
                let family = WaveletFamily::new(alpha, amplitude, levels)?;
                let mut model = build_wavelet_model(&family)?;
                if let Some(d) = self.active_dims {
                    model = model.truncated(d)?;
                }
                Ok(BuiltModel::Affine {
                    model,
                    family: Some(family),
                })
            }
            "affine" => {
                let abar = self
                    .abar
                    .as_ref()
                    .ok_or_else(|| CliError::Config("affine model needs abar".into()))?
                    .build()?;
                let psi = self
                    .psi
                    .as_ref()
                    .map(|list| list.iter().map(|f| f.build()).collect())
                    .transpose()?
                    .unwrap_or_default();
                Ok(BuiltModel::Affine {
                    model: AffineModel::new(abar, psi)?,
                    family: None,
                })
            }
            "lognormal" => {
                let psi: Vec<PiecewiseField> = self
                    .psi
                    .as_ref()
                    .ok_or_else(|| CliError::Config("lognormal model needs psi".into()))?
                    .iter()
                    .map(|f| f.build())
                    .collect::<Result<_, _>>()?;
                Ok(BuiltModel::Lognormal(LognormalModel::new(psi)?))
            }
            other => Err(CliError::Config(format!("unknown model kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsConfig {
    /// Wavelet weights `rho_j = 1 + scale * 2^{beta * level(j)}`.
    pub beta: Option<f64>,
    pub scale: Option<f64>,
    /// Explicit per-dimension weights.
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FemConfig {
    pub degree: u8,
    pub elements: usize,
}

impl FemConfig {
    pub fn space(&self) -> Result<FeSpace, CliError> {
        Ok(FeSpace::new(self.elements, self.degree)?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpansionConfig {
    /// "taylor" | "legendre" | "chebyshev" | "jacobi" | "hermite"
    pub kind: String,
    pub max_degree: u32,
    /// 0 selects the full total-degree set; otherwise an envelope of this
    /// many indices is generated from the weights.
    #[serde(default)]
    pub budget: usize,
    /// Tensor Gauss points per dimension (orthonormal families only).
    pub quad_points: Option<usize>,
    pub jacobi_alpha: Option<f64>,
    pub jacobi_beta: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocationConfig {
    /// "optimal" | "fixed" | "joint"
    pub mode: String,
    pub s: f64,
    pub t: f64,
    /// Retained-index count for the standalone `allocate` command.
    pub n: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub schedule: Vec<usize>,
    /// "l2-quadrature" | "sup-mc"
    pub estimator: String,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_samples() -> usize {
    64
}

fn default_seed() -> u64 {
    2024
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    pub predicted_rate: Option<f64>,
    pub min_slope: Option<f64>,
    pub max_slope: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub fem: FemConfig,
    pub expansion: ExpansionConfig,
    pub weights: Option<WeightsConfig>,
    pub allocation: Option<AllocationConfig>,
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub check: CheckConfig,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: ExperimentConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        match self.expansion.kind.as_str() {
            "taylor" | "legendre" | "chebyshev" | "jacobi" | "hermite" => {}
            other => {
                return Err(CliError::Config(format!(
                    "unknown expansion kind '{other}'"
                )))
            }
        }
        if self.expansion.kind == "jacobi"
            && (self.expansion.jacobi_alpha.is_none() || self.expansion.jacobi_beta.is_none())
        {
            return Err(CliError::Config(
                "jacobi expansions need jacobi_alpha and jacobi_beta".into(),
            ));
        }
        if let Some(alloc) = &self.allocation {
            match alloc.mode.as_str() {
                "optimal" | "fixed" | "joint" => {}
                other => {
                    return Err(CliError::Config(format!(
                        "unknown allocation mode '{other}'"
                    )))
                }
            }
            if !(alloc.s > 0.0 && alloc.t > 0.0) {
                return Err(CliError::Config("allocation needs s > 0 and t > 0".into()));
            }
        }
        if let Some(sweep) = &self.sweep {
            match sweep.estimator.as_str() {
                "l2-quadrature" | "sup-mc" => {}
                other => return Err(CliError::Config(format!("unknown estimator '{other}'"))),
            }
            if sweep.schedule.is_empty() {
                return Err(CliError::Config("sweep schedule must be nonempty".into()));
            }
        }
        Ok(())
    }

    /// Weight sequence for a built model: explicit values, the wavelet rule,
    /// or unit weights when nothing is configured.
    pub fn weights_for(&self, built: &BuiltModel) -> Result<WeightSequence, CliError> {
        let dims = match built {
            BuiltModel::Affine { model, .. } => model.dims(),
            BuiltModel::Lognormal(model) => model.dims(),
        };
        if let Some(w) = &self.weights {
            if let Some(values) = &w.values {
                return Ok(WeightSequence::new(values.clone())?);
            }
            if let (Some(beta), Some(scale)) = (w.beta, w.scale) {
                if let BuiltModel::Affine {
                    family: Some(fam), ..
                } = built
                {
                    let values: Vec<f64> = (1..=dims as u32)
                        .map(|j| 1.0 + scale * 2.0f64.powf(beta * fam.level_of(j) as f64))
                        .collect();
                    return Ok(WeightSequence::new(values)?);
                }
                return Err(CliError::Config(
                    "beta/scale weights need a wavelet model".into(),
                ));
            }
            return Err(CliError::Config(
                "weights need either values or beta + scale".into(),
            ));
        }
        Ok(WeightSequence::constant(1.0, dims.max(1))?)
    }

    /// The index set: a full total-degree simplex, or a weighted envelope.
    pub fn index_set(
        &self,
        dims: usize,
        weights: &WeightSequence,
    ) -> Result<DownwardClosedSet, CliError> {
        if self.expansion.budget == 0 {
            Ok(DownwardClosedSet::total_degree(
                dims as u32,
                self.expansion.max_degree,
            ))
        } else {
            Ok(generate_envelope(
                weights,
                self.expansion.budget,
                self.expansion.max_degree,
            )?)
        }
    }
}
