//! Value-adjustment solver.
//!
//! Every regime reduces to the linear terminal-value problem
//! `-du/dt + α(t) u = β(t)`, `u(T) = 0`, whose solution is
//! `u(t) = ∫_t^T β(s) exp(-∫_t^s α) ds`. The solver walks backwards over
//! panels aligned with every coefficient discontinuity (curve nodes, flow
//! dates), propagates `u` across each panel with the exact `exp(-∫α)`, and
//! integrates the source term with Simpson's rule inside the panel.
//!
//! | regime            | α                   | β                                                   |
//! |-------------------|---------------------|-----------------------------------------------------|
//! | risk-free cpty    | `r̄ + λ̄_I`           | `λ̄_I (k_I - v_X) - (r̄ - r_X) v_X`                    |
//! | independent       | `r̄ + λ̄_I + λ_C`     | `λ̄_I (k_I - v_X) + λ_C (k_C - v_X) - (r̄ - r_X) v_X`  |
//! | correlated        | `r + Λ_I + Λ_C`     | `λ_C (k_C - v_X) - (r + Λ_I + Λ_C - λ_C - r_X) v_X`  |
//!
//! with `r̄ = r_F - (1 - R_I) λ̄_I` in the first two rows.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::credit::{CreditCurve, JointDefaultModel, Name};
use crate::curves::{merge_times, MarketRates, Side, TermCurve};
use crate::error::{domain, Error, Result};
use crate::instruments::{CashflowSchedule, CloseoutSpec};
use crate::measure::{internal_rate, pre_default_rate};

/// Coefficients of `-du/dt + α u = β`.
pub trait LinearCoefficients: Sync {
    /// Exact `∫_{t0}^{t1} α`.
    fn integrated_alpha(&self, t0: f64, t1: f64) -> f64;
    fn alpha(&self, t: f64, side: Side) -> f64;
    fn beta(&self, t: f64, side: Side) -> f64;
    /// Times at which α or β may jump.
    fn breakpoints(&self) -> Vec<f64>;
}

/// Constant α and β; mostly useful for checking the solver.
#[derive(Debug, Clone, Copy)]
pub struct ConstantCoefficients {
    pub alpha: f64,
    pub beta: f64,
}

impl LinearCoefficients for ConstantCoefficients {
    fn integrated_alpha(&self, t0: f64, t1: f64) -> f64 {
        self.alpha * (t1 - t0)
    }
    fn alpha(&self, _: f64, _: Side) -> f64 {
        self.alpha
    }
    fn beta(&self, _: f64, _: Side) -> f64 {
        self.beta
    }
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

pub const DEFAULT_PANELS_PER_YEAR: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolverSettings {
    /// Minimum density of the uniform refinement between breakpoints.
    pub panels_per_year: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            panels_per_year: DEFAULT_PANELS_PER_YEAR,
        }
    }
}

impl SolverSettings {
    pub fn with_panels_per_year(panels_per_year: usize) -> Self {
        Self { panels_per_year }
    }
}

/// Solution of the linear adjustment equation on the panel grid. `alpha`
/// and `beta` are reported as right limits at each grid time.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSolution {
    pub grid: Vec<f64>,
    pub u: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

fn panel_grid(breakpoints: &[f64], maturity: f64, panels_per_year: usize) -> Vec<f64> {
    let mut cuts = vec![0.0];
    cuts.extend(breakpoints.iter().copied().filter(|&t| t > 0.0 && t < maturity));
    cuts.push(maturity);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut grid = vec![0.0];
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let n = (((b - a) * panels_per_year as f64).ceil() as usize).max(1);
        for k in 1..n {
            grid.push(a + (b - a) * k as f64 / n as f64);
        }
        grid.push(b);
    }
    grid
}

/// Solves `-du/dt + α u = β`, `u(T) = 0` on `[0, maturity]`.
pub fn solve_linear_adjustment<C>(coeffs: &C, maturity: f64, settings: SolverSettings) -> Result<LinearSolution>
where
    C: LinearCoefficients + ?Sized,
{
    if !(maturity > 0.0) || !maturity.is_finite() {
        return Err(domain(format!("maturity must be positive, got {maturity}")));
    }
    if settings.panels_per_year == 0 {
        return Err(domain("panels_per_year must be positive"));
    }
    let grid = panel_grid(&coeffs.breakpoints(), maturity, settings.panels_per_year);
    let n = grid.len();
    let mut u = vec![0.0; n];
    for k in (0..n - 1).rev() {
        let (a, b) = (grid[k], grid[k + 1]);
        let m = 0.5 * (a + b);
        let decay_mid = (-coeffs.integrated_alpha(a, m)).exp();
        let decay_end = (-coeffs.integrated_alpha(a, b)).exp();
        let source = (b - a) / 6.0
            * (coeffs.beta(a, Side::Right)
                + 4.0 * coeffs.beta(m, Side::Right) * decay_mid
                + coeffs.beta(b, Side::Left) * decay_end);
        u[k] = decay_end * u[k + 1] + source;
        if !u[k].is_finite() {
            return Err(Error::Numeric(format!(
                "adjustment became non-finite on panel [{a}, {b}]"
            )));
        }
    }
    let alpha: Vec<f64> = grid.iter().map(|&t| coeffs.alpha(t, Side::Right)).collect();
    let beta: Vec<f64> = grid.iter().map(|&t| coeffs.beta(t, Side::Right)).collect();
    if let Some(t) = grid
        .iter()
        .zip(alpha.iter().zip(&beta))
        .find(|(_, (a, b))| !a.is_finite() || !b.is_finite())
        .map(|(t, _)| *t)
    {
        return Err(Error::Numeric(format!("non-finite ODE coefficient at t = {t}")));
    }
    Ok(LinearSolution { grid, u, alpha, beta })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Only the investor can default.
    #[serde(rename = "riskfree_cpty")]
    RiskFreeCounterparty,
    /// Both names default, independently.
    Independent,
    /// Both names default with copula dependence; zero bond recovery and an
    /// internally default-free investor.
    Correlated,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::RiskFreeCounterparty => "riskfree_cpty",
            Regime::Independent => "independent",
            Regime::Correlated => "correlated",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Adjustment `u`, collateral value `v_X` and total value `v = v_X + u` on
/// the solver grid, with the ODE coefficients that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjustmentProfile {
    pub regime: Regime,
    pub grid: Vec<f64>,
    pub collateral_value: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl AdjustmentProfile {
    fn assemble(regime: Regime, solution: LinearSolution, schedule: &CashflowSchedule, collateral: &TermCurve) -> Self {
        let collateral_value: Vec<f64> = solution
            .grid
            .iter()
            .map(|&t| schedule.collateral_value_on(collateral, t, Side::Right))
            .collect();
        let v = collateral_value.iter().zip(&solution.u).map(|(x, u)| x + u).collect();
        Self {
            regime,
            grid: solution.grid,
            collateral_value,
            u: solution.u,
            v,
            alpha: solution.alpha,
            beta: solution.beta,
        }
    }

    /// Adjustment at the valuation date.
    pub fn u0(&self) -> f64 {
        self.u[0]
    }

    pub fn v0(&self) -> f64 {
        self.v[0]
    }

    pub fn collateral_value0(&self) -> f64 {
        self.collateral_value[0]
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }
}

/// Coefficients for the regimes whose rates and intensities are all step
/// functions; α then integrates exactly over curve nodes.
struct StepCoefficients<'a> {
    alpha: TermCurve,
    /// `r̄ - r_X`
    basis: TermCurve,
    investor: TermCurve,
    counterparty: TermCurve,
    collateral: &'a TermCurve,
    schedule: &'a CashflowSchedule,
    closeout: CloseoutSpec,
}

impl<'a> StepCoefficients<'a> {
    fn new(
        internal_rate: TermCurve,
        investor: TermCurve,
        counterparty: TermCurve,
        collateral: &'a TermCurve,
        schedule: &'a CashflowSchedule,
        closeout: CloseoutSpec,
    ) -> Self {
        let alpha = internal_rate
            .combine(&investor, |r, l| r + l)
            .combine(&counterparty, |a, l| a + l);
        let basis = internal_rate.combine(collateral, |r, rx| r - rx);
        Self {
            alpha,
            basis,
            investor,
            counterparty,
            collateral,
            schedule,
            closeout,
        }
    }
}

impl LinearCoefficients for StepCoefficients<'_> {
    fn integrated_alpha(&self, t0: f64, t1: f64) -> f64 {
        self.alpha.integrated_unchecked(t0, t1)
    }

    fn alpha(&self, t: f64, side: Side) -> f64 {
        self.alpha.value_on(t, side)
    }

    fn beta(&self, t: f64, side: Side) -> f64 {
        let vx = self.schedule.collateral_value_on(self.collateral, t, side);
        let k = self.closeout.closeout_values(vx);
        self.investor.value_on(t, side) * (k.investor - vx)
            + self.counterparty.value_on(t, side) * (k.counterparty - vx)
            - self.basis.value_on(t, side) * vx
    }

    fn breakpoints(&self) -> Vec<f64> {
        merge_times(
            &merge_times(self.alpha.times(), self.basis.times()),
            &self.schedule.flow_times(),
        )
    }
}

/// Coefficients of the correlated zero-recovery regime.
struct CorrelatedCoefficients<'a> {
    market: &'a MarketRates,
    model: &'a JointDefaultModel,
    schedule: &'a CashflowSchedule,
    closeout: CloseoutSpec,
}

impl LinearCoefficients for CorrelatedCoefficients<'_> {
    fn integrated_alpha(&self, t0: f64, t1: f64) -> f64 {
        // ∫(Λ_I + Λ_C) = ln U(t0,t0) - ln U(t1,t1)
        let m = self.model;
        self.market.risk_free.integrated_unchecked(t0, t1)
            + m.log_joint_survival(t0, t0).unwrap_or(f64::NAN)
            - m.log_joint_survival(t1, t1).unwrap_or(f64::NAN)
    }

    fn alpha(&self, t: f64, side: Side) -> f64 {
        let m = self.model;
        self.market.risk_free.value_on(t, side)
            + m.ftd_intensity_on(Name::Investor, t, side).unwrap_or(f64::NAN)
            + m.ftd_intensity_on(Name::Counterparty, t, side).unwrap_or(f64::NAN)
    }

    fn beta(&self, t: f64, side: Side) -> f64 {
        let vx = self.schedule.collateral_value_on(&self.market.collateral, t, side);
        let k = self.closeout.closeout_values(vx);
        let lambda_c = self.model.counterparty().intensity().value_on(t, side);
        let pre_default = pre_default_rate(self.market, self.model)
            .at_on(t, side)
            .unwrap_or(f64::NAN);
        lambda_c * (k.counterparty - vx) - (pre_default - self.market.collateral.value_on(t, side)) * vx
    }

    fn breakpoints(&self) -> Vec<f64> {
        let curves = merge_times(
            &merge_times(self.market.risk_free.times(), self.market.collateral.times()),
            &self.model.breakpoints(),
        );
        merge_times(&curves, &self.schedule.flow_times())
    }
}

/// Adjustment with a default-free counterparty, under the completion with
/// internal investor intensity `λ̄_I`.
pub fn adjustment_riskfree_cpty(
    market: &MarketRates,
    investor: &CreditCurve,
    bond_recovery: f64,
    lambda_bar: &TermCurve,
    schedule: &CashflowSchedule,
    closeout: &CloseoutSpec,
    settings: SolverSettings,
) -> Result<AdjustmentProfile> {
    let r_bar = internal_rate(market, investor, bond_recovery, lambda_bar)?;
    let coeffs = StepCoefficients::new(
        r_bar,
        lambda_bar.clone(),
        TermCurve::zero(),
        &market.collateral,
        schedule,
        *closeout,
    );
    let solution = solve_linear_adjustment(&coeffs, schedule.maturity(), settings)?;
    Ok(AdjustmentProfile::assemble(Regime::RiskFreeCounterparty, solution, schedule, &market.collateral))
}

/// Adjustment with independently defaulting investor and counterparty. The
/// counterparty intensity is the market one.
#[allow(clippy::too_many_arguments)]
pub fn adjustment_independent(
    market: &MarketRates,
    investor: &CreditCurve,
    counterparty: &CreditCurve,
    bond_recovery: f64,
    lambda_bar: &TermCurve,
    schedule: &CashflowSchedule,
    closeout: &CloseoutSpec,
    settings: SolverSettings,
) -> Result<AdjustmentProfile> {
    if counterparty.name() != Name::Counterparty {
        return Err(domain("expected the counterparty's credit curve"));
    }
    let r_bar = internal_rate(market, investor, bond_recovery, lambda_bar)?;
    let coeffs = StepCoefficients::new(
        r_bar,
        lambda_bar.clone(),
        counterparty.intensity().clone(),
        &market.collateral,
        schedule,
        *closeout,
    );
    let solution = solve_linear_adjustment(&coeffs, schedule.maturity(), settings)?;
    Ok(AdjustmentProfile::assemble(Regime::Independent, solution, schedule, &market.collateral))
}

/// Adjustment with correlated defaults, zero bond recovery and an internally
/// default-free investor. Only the counterparty recovery `𝓡_C` matters here.
pub fn adjustment_correlated(
    market: &MarketRates,
    model: &JointDefaultModel,
    schedule: &CashflowSchedule,
    closeout: &CloseoutSpec,
    settings: SolverSettings,
) -> Result<AdjustmentProfile> {
    let coeffs = CorrelatedCoefficients {
        market,
        model,
        schedule,
        closeout: *closeout,
    };
    let solution = solve_linear_adjustment(&coeffs, schedule.maturity(), settings)?;
    Ok(AdjustmentProfile::assemble(Regime::Correlated, solution, schedule, &market.collateral))
}
