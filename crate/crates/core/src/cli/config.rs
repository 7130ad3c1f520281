//! JSON scenario configuration and its validation.
//!
//! Parsing only checks the JSON shape; [`ScenarioConfig::validate`] checks
//! every domain invariant and reports all problems at once as diagnostics.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::credit::{CreditCurve, Name};
use crate::curves::{CurveNode, MarketRates, TermCurve};
use crate::engine::{Regime, DEFAULT_PANELS_PER_YEAR};
use crate::instruments::{Cashflow, CashflowSchedule, CloseoutSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Regimes to run; rows are emitted in the fixed regime order
    /// riskfree_cpty, independent, correlated.
    pub regimes: Vec<Regime>,
    pub market: MarketConfig,
    pub investor_intensity: Vec<CurveNode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterparty_intensity: Option<Vec<CurveNode>>,
    /// `R_I`, recovery of the investor's bonds.
    pub bond_recovery: f64,
    pub closeout: CloseoutSpec,
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub numerics: NumericsConfig,
    /// Investor bonds to reprice under each internal measure.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bonds: Vec<BondConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketConfig {
    pub risk_free: Vec<CurveNode>,
    pub collateral: Vec<CurveNode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub flows: Vec<Cashflow>,
    /// Defaults to the last flow date.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub maturity: Option<f64>,
}

/// Internal investor intensity: a flat level or a full curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaBarSpec {
    Flat(f64),
    Curve(Vec<CurveNode>),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub lambda_bar_investor: Vec<LambdaBarSpec>,
    #[serde(default)]
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsConfig {
    #[serde(default = "default_panels")]
    pub panels_per_year: usize,
    #[serde(default)]
    pub monte_carlo: bool,
    #[serde(default = "default_paths")]
    pub mc_paths: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_panels() -> usize {
    DEFAULT_PANELS_PER_YEAR
}

fn default_paths() -> usize {
    1_000_000
}

fn default_seed() -> u64 {
    20_240_917
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self {
            panels_per_year: default_panels(),
            monte_carlo: false,
            mc_paths: default_paths(),
            seed: default_seed(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BondConfig {
    pub maturity: f64,
    /// `T_C`; 0 for a plain bond.
    #[serde(default)]
    pub contingency: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub code: &'static str,
    pub message: String,
}

impl Diagnostic {
    fn new(code: &'static str, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

/// A validated, typed scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub regimes: Vec<Regime>,
    pub market: MarketRates,
    pub investor: CreditCurve,
    pub counterparty: CreditCurve,
    pub bond_recovery: f64,
    pub closeout: CloseoutSpec,
    pub schedule: CashflowSchedule,
    pub lambda_bars: Vec<TermCurve>,
    pub thetas: Vec<f64>,
    pub numerics: NumericsConfig,
    pub bonds: Vec<BondConfig>,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks every invariant; empty diagnostics means the config is valid.
    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        match self.validate() {
            Ok(_) => Vec::new(),
            Err(d) => d,
        }
    }

    pub fn validate(&self) -> Result<Scenario, Vec<Diagnostic>> {
        let mut diags = Vec::new();
        let curve = |field: &str, nodes: &[CurveNode], diags: &mut Vec<Diagnostic>| {
            TermCurve::from_nodes(nodes)
                .map_err(|e| diags.push(Diagnostic::new("invalid_curve", format!("{field}: {e}"))))
                .ok()
        };

        let mut regimes = self.regimes.clone();
        regimes.sort();
        regimes.dedup();
        if regimes.is_empty() {
            diags.push(Diagnostic::new("no_regime", "at least one regime is required"));
        }
        let needs_counterparty = regimes.iter().any(|r| *r != Regime::RiskFreeCounterparty);
        let correlated = regimes.contains(&Regime::Correlated);
        let funded = regimes
            .iter()
            .any(|r| matches!(r, Regime::RiskFreeCounterparty | Regime::Independent));

        let risk_free = curve("market.risk_free", &self.market.risk_free, &mut diags);
        let collateral = curve("market.collateral", &self.market.collateral, &mut diags);

        let investor = curve("investor_intensity", &self.investor_intensity, &mut diags).and_then(|c| {
            CreditCurve::new(Name::Investor, c)
                .map_err(|e| diags.push(Diagnostic::new("negative_intensity", format!("investor_intensity: {e}"))))
                .ok()
        });
        let counterparty = match &self.counterparty_intensity {
            Some(nodes) => curve("counterparty_intensity", nodes, &mut diags).and_then(|c| {
                CreditCurve::new(Name::Counterparty, c)
                    .map_err(|e| diags.push(Diagnostic::new("negative_intensity", format!("counterparty_intensity: {e}"))))
                    .ok()
            }),
            None if needs_counterparty => {
                diags.push(Diagnostic::new(
                    "missing_counterparty",
                    "independent and correlated regimes need counterparty_intensity",
                ));
                None
            }
            None => Some(CreditCurve::new(Name::Counterparty, TermCurve::zero()).expect("zero curve")),
        };

        for (field, value) in [
            ("bond_recovery", self.bond_recovery),
            ("closeout.recovery_investor", self.closeout.recovery_investor),
            ("closeout.recovery_counterparty", self.closeout.recovery_counterparty),
        ] {
            if !(0.0..=1.0).contains(&value) {
                diags.push(Diagnostic::new(
                    "recovery_out_of_range",
                    format!("recovery out of range: {field} = {value} is not in [0, 1]"),
                ));
            }
        }
        if correlated && self.bond_recovery != 0.0 {
            diags.push(Diagnostic::new(
                "correlated_bond_recovery",
                format!(
                    "regime requires zero bond recovery: correlated regime got bond_recovery = {}",
                    self.bond_recovery
                ),
            ));
        }

        let schedule = {
            let maturity = self
                .schedule
                .maturity
                .or_else(|| self.schedule.flows.last().map(|f| f.t))
                .unwrap_or(0.0);
            CashflowSchedule::new(self.schedule.flows.clone(), maturity)
                .map_err(|e| diags.push(Diagnostic::new("invalid_schedule", e.to_string())))
                .ok()
        };

        let mut lambda_bars = Vec::new();
        for (k, spec) in self.sweep.lambda_bar_investor.iter().enumerate() {
            let parsed = match spec {
                LambdaBarSpec::Flat(v) => TermCurve::flat(*v),
                LambdaBarSpec::Curve(nodes) => TermCurve::from_nodes(nodes),
            };
            match parsed {
                Ok(c) if c.min_value() < 0.0 => diags.push(Diagnostic::new(
                    "negative_intensity",
                    format!("sweep.lambda_bar_investor[{k}] must be non-negative"),
                )),
                Ok(c) => lambda_bars.push(c),
                Err(e) => diags.push(Diagnostic::new("invalid_curve", format!("sweep.lambda_bar_investor[{k}]: {e}"))),
            }
        }
        if funded && self.sweep.lambda_bar_investor.is_empty() {
            diags.push(Diagnostic::new(
                "empty_sweep",
                "riskfree_cpty and independent regimes need a non-empty sweep.lambda_bar_investor",
            ));
        }
        if correlated && self.sweep.theta.is_empty() {
            diags.push(Diagnostic::new("empty_sweep", "correlated regime needs a non-empty sweep.theta"));
        }
        for (k, &theta) in self.sweep.theta.iter().enumerate() {
            if !(theta >= 0.0) || !theta.is_finite() {
                diags.push(Diagnostic::new(
                    "theta_out_of_range",
                    format!("sweep.theta[{k}] = {theta}: dependence must be finite and non-negative"),
                ));
            }
        }

        if self.numerics.panels_per_year == 0 {
            diags.push(Diagnostic::new("invalid_numerics", "numerics.panels_per_year must be positive"));
        }
        if self.numerics.mc_paths == 0 {
            diags.push(Diagnostic::new("invalid_numerics", "numerics.mc_paths must be positive"));
        }

        for (k, b) in self.bonds.iter().enumerate() {
            if !(b.maturity > 0.0 && b.maturity.is_finite()) || !(b.contingency >= 0.0 && b.contingency < b.maturity) {
                diags.push(Diagnostic::new(
                    "invalid_bond",
                    format!("bonds[{k}] needs 0 <= contingency < maturity"),
                ));
            }
        }

        if !diags.is_empty() {
            return Err(diags);
        }
        Ok(Scenario {
            regimes,
            market: MarketRates::new(risk_free.expect("checked"), collateral.expect("checked")),
            investor: investor.expect("checked"),
            counterparty: counterparty.expect("checked"),
            bond_recovery: self.bond_recovery,
            closeout: self.closeout,
            schedule: schedule.expect("checked"),
            lambda_bars,
            thetas: self.sweep.theta.clone(),
            numerics: self.numerics.clone(),
            bonds: self.bonds.clone(),
        })
    }
}
