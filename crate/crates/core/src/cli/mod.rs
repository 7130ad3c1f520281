//! Scenario runner behind the `fva` binary.
//!
//! A config expands to sweep points, one per `(regime, λ̄_I)` for the funded
//! regimes and one per `θ` for the correlated one. Points are solved in
//! parallel but rows are always written in `(regime, sweep index, t)` order,
//! so reports are byte-identical across runs and thread counts.

pub mod config;

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::credit::JointDefaultModel;
use crate::curves::TermCurve;
use crate::engine::{
    adjustment_correlated, adjustment_independent, adjustment_riskfree_cpty, AdjustmentProfile, Regime, SolverSettings,
};
use crate::measure::{bond_price, bond_price_internal, internal_rate, reprice_contingent_bond, BondSpec, REPRICING_TOLERANCE};
use crate::oracle::{mc_value_correlated, mc_value_independent, mc_value_riskfree_cpty, McEstimate, McSettings};
use crate::par::{map_indexed, Execution};

pub use config::{Diagnostic, Scenario, ScenarioConfig};

pub const PROFILES_FILE: &str = "profiles.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const BONDS_FILE: &str = "bonds.csv";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read config {path}: {source}")]
    ConfigUnreadable { path: PathBuf, source: io::Error },
    #[error("config does not parse: {0}")]
    ConfigParse(#[from] serde_json::Error),
    #[error("config has {} problem(s): {}", .0.len(), join_diagnostics(.0))]
    ConfigInvalid(Vec<Diagnostic>),
    #[error("{regime} sweep point {index}: {source}")]
    Model {
        regime: Regime,
        index: usize,
        source: crate::Error,
    },
    #[error("cannot write {path}: {message}")]
    Output { path: PathBuf, message: String },
}

fn join_diagnostics(diags: &[Diagnostic]) -> String {
    diags.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; ")
}

impl CliError {
    pub fn code(&self) -> &'static str {
        match self {
            CliError::ConfigUnreadable { .. } => "config_unreadable",
            CliError::ConfigParse(_) => "config_parse",
            CliError::ConfigInvalid(_) => "config_invalid",
            CliError::Model { source, .. } => match source {
                crate::Error::InvariantViolation(_) => "invariant_violation",
                crate::Error::Singular(_) => "singular",
                crate::Error::Numeric(_) => "numeric",
                crate::Error::Domain(_) | crate::Error::InvalidCurve(_) | crate::Error::InvalidSchedule(_) => "domain",
            },
            CliError::Output { .. } => "output",
        }
    }

    /// 2 for config problems, 3 for numerical or invariant failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ConfigUnreadable { .. } | CliError::ConfigParse(_) | CliError::ConfigInvalid(_) => 2,
            CliError::Model { .. } => 3,
            CliError::Output { .. } => 1,
        }
    }

    /// One-line JSON object for stderr.
    pub fn to_json(&self) -> String {
        let diagnostics = match self {
            CliError::ConfigInvalid(d) => d.clone(),
            _ => Vec::new(),
        };
        serde_json::json!({
            "error": self.code(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
            "diagnostics": diagnostics,
        })
        .to_string()
    }
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::ConfigUnreadable {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(ScenarioConfig::from_json(&text)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Run the Monte Carlo oracle even if the config leaves it off.
    pub monte_carlo: bool,
    /// Overrides `numerics.panels_per_year`.
    pub panels_per_year: Option<usize>,
    pub execution: Execution,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            monte_carlo: false,
            panels_per_year: None,
            execution: Execution::Parallel,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub regime: Regime,
    pub index: usize,
    /// Zero for the correlated regime.
    pub lambda_bar: TermCurve,
    pub theta: Option<f64>,
}

/// Sweep points in report order.
pub fn sweep_points(scenario: &Scenario) -> Vec<SweepPoint> {
    let mut points = Vec::new();
    for &regime in &scenario.regimes {
        match regime {
            Regime::RiskFreeCounterparty | Regime::Independent => {
                points.extend(scenario.lambda_bars.iter().enumerate().map(|(index, l)| SweepPoint {
                    regime,
                    index,
                    lambda_bar: l.clone(),
                    theta: None,
                }))
            }
            Regime::Correlated => points.extend(scenario.thetas.iter().enumerate().map(|(index, &theta)| SweepPoint {
                regime,
                index,
                lambda_bar: TermCurve::zero(),
                theta: Some(theta),
            })),
        }
    }
    points
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BondRow {
    pub regime: Regime,
    pub sweep_index: usize,
    #[serde(rename = "lambda_bar_I")]
    pub lambda_bar_investor: f64,
    pub theta: Option<f64>,
    pub maturity: f64,
    pub contingency: f64,
    pub external: f64,
    pub internal: f64,
    pub abs_diff: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub point: SweepPoint,
    pub profile: AdjustmentProfile,
    pub mc: Option<McEstimate>,
    pub bonds: Vec<BondRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub points: Vec<PointResult>,
}

/// Solves every sweep point; the first failing point (in report order) wins.
pub fn run_scenario(scenario: &Scenario, options: RunOptions) -> Result<RunReport, CliError> {
    let points = sweep_points(scenario);
    let results = map_indexed(points.len(), options.execution, |k| solve_point(scenario, &points[k], options));
    let mut out = Vec::with_capacity(points.len());
    for (point, result) in points.into_iter().zip(results) {
        let (profile, mc, bonds) = result.map_err(|source| CliError::Model {
            regime: point.regime,
            index: point.index,
            source,
        })?;
        out.push(PointResult {
            point,
            profile,
            mc,
            bonds,
        });
    }
    Ok(RunReport { points: out })
}

type PointOutput = (AdjustmentProfile, Option<McEstimate>, Vec<BondRow>);

fn solve_point(s: &Scenario, point: &SweepPoint, options: RunOptions) -> crate::Result<PointOutput> {
    let settings = SolverSettings::with_panels_per_year(options.panels_per_year.unwrap_or(s.numerics.panels_per_year));
    let mc_settings = (options.monte_carlo || s.numerics.monte_carlo)
        .then(|| McSettings::new(s.numerics.mc_paths, s.numerics.seed).with_execution(options.execution));
    let l = &point.lambda_bar;
    let lambda0 = l.value_at(0.0);
    let row = |maturity: f64, contingency: f64, external: f64, internal: f64| BondRow {
        regime: point.regime,
        sweep_index: point.index,
        lambda_bar_investor: lambda0,
        theta: point.theta,
        maturity,
        contingency,
        external,
        internal,
        abs_diff: (internal - external).abs(),
    };

    match point.regime {
        Regime::RiskFreeCounterparty | Regime::Independent => {
            let profile = if point.regime == Regime::Independent {
                adjustment_independent(&s.market, &s.investor, &s.counterparty, s.bond_recovery, l, &s.schedule, &s.closeout, settings)?
            } else {
                adjustment_riskfree_cpty(&s.market, &s.investor, s.bond_recovery, l, &s.schedule, &s.closeout, settings)?
            };
            let mc = match mc_settings {
                Some(m) if point.regime == Regime::Independent => Some(mc_value_independent(
                    &s.market, &s.investor, &s.counterparty, s.bond_recovery, l, &s.schedule, &s.closeout, m,
                )?),
                Some(m) => Some(mc_value_riskfree_cpty(&s.market, &s.investor, s.bond_recovery, l, &s.schedule, &s.closeout, m)?),
                None => None,
            };
            let r_bar = internal_rate(&s.market, &s.investor, s.bond_recovery, l)?;
            let mut bonds = Vec::new();
            // Contingent bonds only exist under the correlated completion.
            for b in s.bonds.iter().filter(|b| b.contingency == 0.0) {
                let external = bond_price(&s.market, &s.investor, s.bond_recovery, b.maturity)?;
                let internal = bond_price_internal(&r_bar, l, s.bond_recovery, b.maturity)?;
                if (internal - external).abs() > REPRICING_TOLERANCE {
                    return Err(crate::Error::InvariantViolation(format!(
                        "bond T = {}: internal {internal} vs external {external}",
                        b.maturity
                    )));
                }
                bonds.push(row(b.maturity, 0.0, external, internal));
            }
            Ok((profile, mc, bonds))
        }
        Regime::Correlated => {
            let theta = point.theta.expect("correlated points carry θ");
            let model = JointDefaultModel::new(s.investor.clone(), s.counterparty.clone(), theta)?;
            let profile = adjustment_correlated(&s.market, &model, &s.schedule, &s.closeout, settings)?;
            let mc = mc_settings
                .map(|m| mc_value_correlated(&s.market, &model, &s.schedule, &s.closeout, m))
                .transpose()?;
            let bonds = s
                .bonds
                .iter()
                .map(|b| {
                    let p = reprice_contingent_bond(&s.market, &model, BondSpec::new(b.maturity, b.contingency, 0.0)?)?;
                    Ok(row(b.maturity, b.contingency, p.external, p.internal))
                })
                .collect::<crate::Result<Vec<_>>>()?;
            Ok((profile, mc, bonds))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileRow {
    pub regime: Regime,
    #[serde(rename = "lambda_bar_I")]
    pub lambda_bar_investor: f64,
    pub theta: Option<f64>,
    pub t: f64,
    #[serde(rename = "v_X")]
    pub collateral_value: f64,
    pub u: f64,
    pub v: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Only on the `t = 0` row, where the oracle prices.
    pub mc_mean: Option<f64>,
    pub mc_stderr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub regime: Regime,
    pub sweep_index: usize,
    #[serde(rename = "lambda_bar_I")]
    pub lambda_bar_investor: f64,
    pub theta: Option<f64>,
    #[serde(rename = "v_X")]
    pub collateral_value: f64,
    pub u: f64,
    pub v: f64,
    pub mc_mean: Option<f64>,
    pub mc_stderr: Option<f64>,
    /// `(mc_mean - v) / mc_stderr`; blank when the estimator has no spread.
    pub mc_z: Option<f64>,
}

impl RunReport {
    pub fn profile_rows(&self) -> Vec<ProfileRow> {
        let mut rows = Vec::new();
        for p in &self.points {
            let pr = &p.profile;
            for k in 0..pr.len() {
                let t = pr.grid[k];
                let mc = p.mc.filter(|_| k == 0);
                rows.push(ProfileRow {
                    regime: p.point.regime,
                    lambda_bar_investor: p.point.lambda_bar.value_at(t),
                    theta: p.point.theta,
                    t,
                    collateral_value: pr.collateral_value[k],
                    u: pr.u[k],
                    v: pr.v[k],
                    alpha: pr.alpha[k],
                    beta: pr.beta[k],
                    mc_mean: mc.map(|m| m.mean),
                    mc_stderr: mc.map(|m| m.std_error),
                });
            }
        }
        rows
    }

    pub fn summary_rows(&self) -> Vec<SummaryRow> {
        self.points
            .iter()
            .map(|p| {
                let v = p.profile.v0();
                SummaryRow {
                    regime: p.point.regime,
                    sweep_index: p.point.index,
                    lambda_bar_investor: p.point.lambda_bar.value_at(0.0),
                    theta: p.point.theta,
                    collateral_value: p.profile.collateral_value0(),
                    u: p.profile.u0(),
                    v,
                    mc_mean: p.mc.map(|m| m.mean),
                    mc_stderr: p.mc.map(|m| m.std_error),
                    mc_z: p.mc.filter(|m| m.std_error > 0.0).map(|m| m.z_score(v)),
                }
            })
            .collect()
    }

    pub fn bond_rows(&self) -> Vec<BondRow> {
        self.points.iter().flat_map(|p| p.bonds.iter().cloned()).collect()
    }

    /// Writes the three CSV reports into `dir`, creating it if needed.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::Output {
            path: dir.to_path_buf(),
            message: e.to_string(),
        })?;
        let paths = vec![
            write_csv(&dir.join(PROFILES_FILE), &self.profile_rows())?,
            write_csv(&dir.join(SUMMARY_FILE), &self.summary_rows())?,
            write_csv(&dir.join(BONDS_FILE), &self.bond_rows())?,
        ];
        Ok(paths)
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<PathBuf, CliError> {
    let fail = |message: String| CliError::Output {
        path: path.to_path_buf(),
        message,
    };
    let mut w = csv::Writer::from_path(path).map_err(|e| fail(e.to_string()))?;
    for row in rows {
        w.serialize(row).map_err(|e| fail(e.to_string()))?;
    }
    w.flush().map_err(|e| fail(e.to_string()))?;
    Ok(path.to_path_buf())
}
