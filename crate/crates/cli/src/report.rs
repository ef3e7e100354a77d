//! Machine-readable run artifacts: CSV tables, plot data and the JSON rate
//! report. Reports embed the resolved config and seed; the timestamp lives
//! in its own field so that byte-level determinism holds for everything else.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sparpde::dof::AllocationPlan;
use sparpde::fem::GridFunction;
use sparpde::fit::RateFit;
use sparpde::multiindex::MultiIndex;
use sparpde::sweep::{SweepOutcome, SweepPoint};

use crate::config::ExperimentConfig;
use crate::CliError;

/// Serialize a multi-index as a JSON array of `[dimension, exponent]` pairs.
pub fn index_json(nu: &MultiIndex) -> String {
    let inner: Vec<String> = nu
        .entries()
        .iter()
        .map(|(j, e)| format!("[{j},{e}]"))
        .collect();
    format!("[{}]", inner.join(","))
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn write_lines(path: &Path, lines: &[String]) -> Result<(), CliError> {
    let mut file = fs::File::create(path)?;
    for line in lines {
        writeln!(file, "{line}")?;
    }
    Ok(())
}

/// Expansion table: one row per stored index. An optional metadata comment
/// (the orthonormal family and quadrature) precedes the header.
pub fn write_expansion_csv(
    path: &Path,
    metadata: Option<&str>,
    rows: &[(MultiIndex, f64, Option<f64>)],
) -> Result<(), CliError> {
    let mut lines = Vec::with_capacity(rows.len() + 2);
    if let Some(meta) = metadata {
        lines.push(format!("# {meta}"));
    }
    lines.push("index,degree,norm_v,norm_w".to_string());
    for (nu, norm_v, norm_w) in rows {
        let w = norm_w.map(|v| v.to_string()).unwrap_or_default();
        lines.push(format!(
            "{},{},{},{}",
            csv_field(&index_json(nu)),
            nu.degree(),
            norm_v,
            w
        ));
    }
    write_lines(path, &lines)
}

/// Allocation plan table aligned with its index selection.
pub fn write_plan_csv(
    path: &Path,
    indices: &[MultiIndex],
    plan: &AllocationPlan,
) -> Result<(), CliError> {
    let mut lines = vec!["index,norm_x,dofs_real,dofs_int".to_string()];
    for (nu, entry) in indices.iter().zip(&plan.entries) {
        lines.push(format!(
            "{},{},{},{}",
            csv_field(&index_json(nu)),
            entry.norm,
            entry.dofs_real,
            entry.dofs
        ));
    }
    write_lines(path, &lines)
}

/// Node-value dump of a grid function.
pub fn write_gridfunction_csv(path: &Path, u: &GridFunction) -> Result<(), CliError> {
    let mut lines = vec!["x,value".to_string()];
    lines.push("0,0".to_string());
    for (i, v) in u.values().iter().enumerate() {
        lines.push(format!("{},{}", u.space().dof_x(i), v));
    }
    lines.push("1,0".to_string());
    write_lines(path, &lines)
}

pub fn write_sweep_csv(path: &Path, points: &[SweepPoint]) -> Result<(), CliError> {
    let mut lines = vec!["n,dofs,dofs_real,error,capped".to_string()];
    for p in points {
        lines.push(format!(
            "{},{},{},{},{}",
            p.n, p.dofs, p.dofs_real, p.error, p.capped
        ));
    }
    write_lines(path, &lines)
}

/// Log-log plot data with the intercept-matched predicted line
/// `C N^{-r}` anchored at the first sweep point.
pub fn write_plotdata_csv(
    path: &Path,
    points: &[SweepPoint],
    predicted_rate: Option<f64>,
) -> Result<(), CliError> {
    let mut lines = vec!["log10_dofs,log10_error,predicted_error".to_string()];
    let anchor = points.iter().find(|p| p.error > 0.0);
    for p in points {
        let predicted = match (predicted_rate, anchor) {
            (Some(r), Some(a)) => {
                let c = a.error * (a.dofs as f64).powf(r);
                (c * (p.dofs as f64).powf(-r)).to_string()
            }
            _ => String::new(),
        };
        let log_err = if p.error > 0.0 {
            p.error.log10().to_string()
        } else {
            String::new()
        };
        lines.push(format!(
            "{},{},{}",
            (p.dofs as f64).log10(),
            log_err,
            predicted
        ));
    }
    write_lines(path, &lines)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointRow {
    pub n: usize,
    pub dofs: usize,
    pub dofs_real: f64,
    pub error: f64,
    pub capped: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitRow {
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub passed: bool,
    pub details: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Fingerprint {
    pub package: String,
    pub version: String,
    pub os: String,
    pub arch: String,
}

impl Fingerprint {
    pub fn current() -> Self {
        Fingerprint {
            package: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
        }
    }
}

/// The JSON run report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateReport {
    pub command: String,
    pub config: ExperimentConfig,
    pub seed: u64,
    pub points: Vec<PointRow>,
    pub fit: Option<FitRow>,
    pub predicted_rate: Option<f64>,
    /// Residual of the reference expansion beyond the stored index set.
    pub floor: f64,
    pub check: Option<CheckOutcome>,
    pub fingerprint: Fingerprint,
    /// Wall-clock stamp; excluded from the determinism contract.
    pub timestamp_unix: u64,
}

impl RateReport {
    pub fn new(
        command: &str,
        config: &ExperimentConfig,
        seed: u64,
        outcome: &SweepOutcome,
        fit: Option<RateFit>,
        predicted_rate: Option<f64>,
        check: Option<CheckOutcome>,
    ) -> Self {
        RateReport {
            command: command.to_string(),
            config: config.clone(),
            seed,
            points: outcome
                .points
                .iter()
                .map(|p| PointRow {
                    n: p.n,
                    dofs: p.dofs,
                    dofs_real: p.dofs_real,
                    error: p.error,
                    capped: p.capped,
                })
                .collect(),
            fit: fit.map(|f| FitRow {
                slope: f.slope,
                intercept: f.intercept,
                residual: f.residual,
                points: f.points,
            }),
            predicted_rate,
            floor: outcome.floor,
            check,
            fingerprint: Fingerprint::current(),
            timestamp_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let json = serde_json::to_string_pretty(self)?;
        fs::write(path, json)?;
        Ok(())
    }
}

/// Fail fast on unwritable output directories before any compute starts.
pub fn ensure_writable(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    let probe = dir.join(".write_probe");
    fs::write(&probe, b"ok")?;
    fs::remove_file(&probe)?;
    Ok(())
}
