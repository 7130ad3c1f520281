//! Monte Carlo valuation of the full default-contingent dividend stream,
//! independent of the ODE solver.
//!
//! Each path draws two open-interval uniforms from its own ChaCha8 stream,
//! keyed by `(seed, path index)`, so results do not depend on how paths are
//! spread over threads. Payoffs are collected in path order and reduced with
//! pairwise summation.

use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::credit::{CreditCurve, JointDefaultModel, Name};
use crate::curves::{MarketRates, Side, TermCurve};
use crate::error::{domain, Result};
use crate::instruments::{CashflowSchedule, CloseoutSpec};
use crate::measure::{internal_rate, pre_default_rate};
use crate::par::{map_indexed, pairwise_sum, Execution};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McSettings {
    pub paths: usize,
    pub seed: u64,
    pub execution: Execution,
}

impl McSettings {
    pub fn new(paths: usize, seed: u64) -> Self {
        Self {
            paths,
            seed,
            execution: Execution::default(),
        }
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub paths: usize,
    pub seed: u64,
}

impl McEstimate {
    /// `|mean - value|` in units of the standard error (infinite when the
    /// estimate is exact and disagrees).
    pub fn z_score(&self, value: f64) -> f64 {
        let gap = (self.mean - value).abs();
        if gap == 0.0 {
            0.0
        } else {
            gap / self.std_error
        }
    }
}

/// Default times of one path; `None` means no default ever.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefaultTimes {
    pub investor: Option<f64>,
    pub counterparty: Option<f64>,
}

impl DefaultTimes {
    /// First-to-default time.
    pub fn first(&self) -> Option<f64> {
        match (self.investor, self.counterparty) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOutcome {
    pub defaults: DefaultTimes,
    /// Discounted value of every dividend and closeout on the path.
    pub payoff: f64,
}

/// Prices one path from its pair of uniforms.
pub trait PathPricer: Sync {
    fn price_path(&self, w1: f64, w2: f64) -> PathOutcome;
}

fn stream_key(seed: u64) -> <ChaCha8Rng as SeedableRng>::Seed {
    ChaCha8Rng::seed_from_u64(seed).get_seed()
}

fn path_uniforms(key: <ChaCha8Rng as SeedableRng>::Seed, index: usize) -> (f64, f64) {
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index as u64);
    (rng.sample(Open01), rng.sample(Open01))
}

/// Runs `settings.paths` paths through `pricer`, in path order.
pub fn simulate<P: PathPricer + ?Sized>(pricer: &P, settings: McSettings) -> Result<Vec<PathOutcome>> {
    if settings.paths == 0 {
        return Err(domain("at least one Monte Carlo path is required"));
    }
    let key = stream_key(settings.seed);
    Ok(map_indexed(settings.paths, settings.execution, |i| {
        let (w1, w2) = path_uniforms(key, i);
        pricer.price_path(w1, w2)
    }))
}

pub fn estimate(outcomes: &[PathOutcome], seed: u64) -> McEstimate {
    let payoffs: Vec<f64> = outcomes.iter().map(|o| o.payoff).collect();
    let n = payoffs.len();
    let (lo, hi) = payoffs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    if lo == hi || n < 2 {
        return McEstimate {
            mean: payoffs.first().copied().unwrap_or(f64::NAN),
            std_error: 0.0,
            paths: n,
            seed,
        };
    }
    let mean = pairwise_sum(&payoffs) / n as f64;
    let squares: Vec<f64> = payoffs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let variance = pairwise_sum(&squares) / (n - 1) as f64;
    McEstimate {
        mean,
        std_error: (variance / n as f64).sqrt(),
        paths: n,
        seed,
    }
}

/// Cumulative-hazard levels `(H_I(τ_I), H_C(τ_C))` from two uniforms, by
/// conditional inversion of the Clayton survival copula.
pub fn clayton_hazard_levels(theta: f64, w1: f64, w2: f64) -> (f64, f64) {
    let h_i = -w1.ln();
    let h_c = if theta == 0.0 {
        -w2.ln()
    } else {
        // v^-θ = (w2^(-θ/(1+θ)) - 1) u^-θ + 1
        let bump = (-(theta / (1.0 + theta)) * w2.ln()).exp_m1();
        (bump * (theta * h_i).exp()).ln_1p() / theta
    };
    (h_i, h_c)
}

fn time_for_level(intensity: &TermCurve, level: f64) -> Option<f64> {
    if !level.is_finite() {
        return None;
    }
    intensity.inverse_integrated(level)
}

/// Draws `n` joint default-time pairs from `model`.
pub fn sample_joint_defaults(model: &JointDefaultModel, n: usize, seed: u64, execution: Execution) -> Result<Vec<DefaultTimes>> {
    if n == 0 {
        return Err(domain("at least one sample is required"));
    }
    let key = stream_key(seed);
    Ok(map_indexed(n, execution, |i| {
        let (w1, w2) = path_uniforms(key, i);
        let (h_i, h_c) = clayton_hazard_levels(model.theta(), w1, w2);
        DefaultTimes {
            investor: time_for_level(model.investor().intensity(), h_i),
            counterparty: time_for_level(model.counterparty().intensity(), h_c),
        }
    }))
}

/// Pricer for the risk-free-counterparty and independent regimes: discount at
/// the internal rate `r̄`, investor defaults at `λ̄_I`, counterparty (if any)
/// at its market intensity, independently.
#[derive(Debug, Clone)]
pub struct FundedPricer {
    rate: TermCurve,
    investor: TermCurve,
    counterparty: Option<TermCurve>,
    collateral: TermCurve,
    schedule: CashflowSchedule,
    closeout: CloseoutSpec,
    flow_discounts: Vec<f64>,
}

impl FundedPricer {
    pub fn new(
        market: &MarketRates,
        investor: &CreditCurve,
        counterparty: Option<&CreditCurve>,
        bond_recovery: f64,
        lambda_bar: &TermCurve,
        schedule: &CashflowSchedule,
        closeout: &CloseoutSpec,
    ) -> Result<Self> {
        let rate = internal_rate(market, investor, bond_recovery, lambda_bar)?;
        let flow_discounts = schedule
            .flows()
            .iter()
            .map(|f| rate.discount_factor(0.0, f.t))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            rate,
            investor: lambda_bar.clone(),
            counterparty: counterparty.map(|c| c.intensity().clone()),
            collateral: market.collateral.clone(),
            schedule: schedule.clone(),
            closeout: *closeout,
            flow_discounts,
        })
    }
}

impl PathPricer for FundedPricer {
    fn price_path(&self, w1: f64, w2: f64) -> PathOutcome {
        let defaults = DefaultTimes {
            investor: time_for_level(&self.investor, -w1.ln()),
            counterparty: self
                .counterparty
                .as_ref()
                .and_then(|c| time_for_level(c, -w2.ln())),
        };
        let tau = defaults.first().unwrap_or(f64::INFINITY);
        let mut payoff: f64 = self
            .schedule
            .flows()
            .iter()
            .zip(&self.flow_discounts)
            .take_while(|(f, _)| f.t < tau)
            .map(|(f, d)| f.amount * d)
            .sum();
        if tau <= self.schedule.maturity() {
            let vx = self.schedule.collateral_value_on(&self.collateral, tau, Side::Right);
            let k = self.closeout.closeout_values(vx);
            let amount = if defaults.investor == Some(tau) { k.investor } else { k.counterparty };
            payoff += amount * (-self.rate.integrated_unchecked(0.0, tau)).exp();
        }
        PathOutcome { defaults, payoff }
    }
}

/// Pricer for the correlated regime. The investor never defaults internally;
/// the counterparty defaults with its market survival. Cashflows and the
/// counterparty closeout are discounted with the pre-default bank account
/// `D(0,t) U(t,t) / U_C(t)`.
#[derive(Debug, Clone)]
pub struct CorrelatedPricer {
    market: MarketRates,
    model: JointDefaultModel,
    schedule: CashflowSchedule,
    closeout: CloseoutSpec,
    flow_discounts: Vec<f64>,
}

impl CorrelatedPricer {
    pub fn new(market: &MarketRates, model: &JointDefaultModel, schedule: &CashflowSchedule, closeout: &CloseoutSpec) -> Result<Self> {
        let rate = pre_default_rate(market, model);
        let flow_discounts = schedule
            .flows()
            .iter()
            .map(|f| rate.bank_account_discount(f.t))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            market: market.clone(),
            model: model.clone(),
            schedule: schedule.clone(),
            closeout: *closeout,
            flow_discounts,
        })
    }
}

impl PathPricer for CorrelatedPricer {
    fn price_path(&self, _w1: f64, w2: f64) -> PathOutcome {
        let tau_c = time_for_level(self.model.counterparty().intensity(), -w2.ln());
        let tau = tau_c.unwrap_or(f64::INFINITY);
        let mut payoff: f64 = self
            .schedule
            .flows()
            .iter()
            .zip(&self.flow_discounts)
            .take_while(|(f, _)| f.t < tau)
            .map(|(f, d)| f.amount * d)
            .sum();
        if tau <= self.schedule.maturity() {
            let vx = self.schedule.collateral_value_on(&self.market.collateral, tau, Side::Right);
            let k = self.closeout.closeout_values(vx);
            let discount = pre_default_rate(&self.market, &self.model)
                .bank_account_discount(tau)
                .unwrap_or(f64::NAN);
            payoff += k.counterparty * discount;
        }
        PathOutcome {
            defaults: DefaultTimes {
                investor: None,
                counterparty: tau_c,
            },
            payoff,
        }
    }
}

/// Monte Carlo estimate of `v(0)` with a default-free counterparty.
pub fn mc_value_riskfree_cpty(
    market: &MarketRates,
    investor: &CreditCurve,
    bond_recovery: f64,
    lambda_bar: &TermCurve,
    schedule: &CashflowSchedule,
    closeout: &CloseoutSpec,
    settings: McSettings,
) -> Result<McEstimate> {
    let pricer = FundedPricer::new(market, investor, None, bond_recovery, lambda_bar, schedule, closeout)?;
    Ok(estimate(&simulate(&pricer, settings)?, settings.seed))
}

/// Monte Carlo estimate of `v(0)` with independent defaults.
#[allow(clippy::too_many_arguments)]
pub fn mc_value_independent(
    market: &MarketRates,
    investor: &CreditCurve,
    counterparty: &CreditCurve,
    bond_recovery: f64,
    lambda_bar: &TermCurve,
    schedule: &CashflowSchedule,
    closeout: &CloseoutSpec,
    settings: McSettings,
) -> Result<McEstimate> {
    if counterparty.name() != Name::Counterparty {
        return Err(domain("expected the counterparty's credit curve"));
    }
    let pricer = FundedPricer::new(market, investor, Some(counterparty), bond_recovery, lambda_bar, schedule, closeout)?;
    Ok(estimate(&simulate(&pricer, settings)?, settings.seed))
}

/// Monte Carlo estimate of `v(0)` in the correlated zero-recovery regime.
pub fn mc_value_correlated(
    market: &MarketRates,
    model: &JointDefaultModel,
    schedule: &CashflowSchedule,
    closeout: &CloseoutSpec,
    settings: McSettings,
) -> Result<McEstimate> {
    let pricer = CorrelatedPricer::new(market, model, schedule, closeout)?;
    Ok(estimate(&simulate(&pricer, settings)?, settings.seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instruments::Cashflow;
    use approx::assert_relative_eq;

    fn market() -> MarketRates {
        MarketRates::flat(0.01, 0.005).unwrap()
    }

    fn inv(l: f64) -> CreditCurve {
        CreditCurve::flat(Name::Investor, l).unwrap()
    }

    fn cpty(l: f64) -> CreditCurve {
        CreditCurve::flat(Name::Counterparty, l).unwrap()
    }

    #[test]
    fn sampling_is_deterministic_and_thread_count_independent() {
        let m = JointDefaultModel::new(inv(0.05), cpty(0.08), 1.5).unwrap();
        let a = sample_joint_defaults(&m, 5_000, 7, Execution::Serial).unwrap();
        let b = sample_joint_defaults(&m, 5_000, 7, Execution::Parallel).unwrap();
        let c = sample_joint_defaults(&m, 5_000, 8, Execution::Serial).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(sample_joint_defaults(&m, 0, 7, Execution::Serial).is_err());
    }

    #[test]
    fn hazard_levels_reduce_to_independence() {
        let (hi, hc) = clayton_hazard_levels(0.0, 0.3, 0.6);
        assert_eq!((hi, hc), (-(0.3f64).ln(), -(0.6f64).ln()));
        let (_, hc_small) = clayton_hazard_levels(1e-10, 0.3, 0.6);
        assert!((hc_small - hc).abs() < 1e-8);
    }

    #[test]
    fn conditional_inversion_reproduces_clayton_conditional_cdf() {
        // For fixed u the sampled v has P(V <= v | U = u) = ∂C/∂u(u, v).
        let theta = 2.0;
        let u: f64 = 0.35;
        for &w2 in &[0.1, 0.4, 0.8] {
            let (_, h_c) = clayton_hazard_levels(theta, u, w2);
            let v = (-h_c).exp();
            let s = u.powf(-theta) + v.powf(-theta) - 1.0;
            let cond = s.powf(-1.0 / theta - 1.0) * u.powf(-theta - 1.0);
            assert_relative_eq!(cond, w2, max_relative = 1e-12);
        }
    }

    #[test]
    fn first_default_time() {
        let d = DefaultTimes { investor: Some(3.0), counterparty: Some(1.0) };
        assert_eq!(d.first(), Some(1.0));
        let d = DefaultTimes { investor: None, counterparty: Some(1.0) };
        assert_eq!(d.first(), Some(1.0));
        let d = DefaultTimes { investor: None, counterparty: None };
        assert_eq!(d.first(), None);
    }

    #[test]
    fn pure_funding_is_deterministic() {
        let s = CashflowSchedule::single(3.0, 1.0).unwrap();
        let est = mc_value_riskfree_cpty(&market(), &inv(0.02), 0.4, &TermCurve::zero(), &s, &CloseoutSpec::new(0.4, 0.4).unwrap(), McSettings::new(1_000, 1)).unwrap();
        assert_eq!(est.std_error, 0.0);
        assert_relative_eq!(est.mean, (-0.022f64 * 3.0).exp(), max_relative = 1e-15);
    }

    #[test]
    fn default_free_counterparty_in_correlated_regime_is_investor_survival_discounting() {
        let s = CashflowSchedule::from_flows(vec![Cashflow { t: 1.0, amount: 0.5 }, Cashflow { t: 2.0, amount: -1.0 }]).unwrap();
        let m = JointDefaultModel::new(inv(0.03), cpty(0.0), 0.0).unwrap();
        let est = mc_value_correlated(&market(), &m, &s, &CloseoutSpec::new(0.4, 0.4).unwrap(), McSettings::new(1_000, 3)).unwrap();
        let expected = 0.5 * (-0.04f64).exp() - (-0.08f64).exp();
        assert_eq!(est.std_error, 0.0);
        assert_relative_eq!(est.mean, expected, max_relative = 1e-14);
    }

    #[test]
    fn outcomes_are_consistent() {
        let s = CashflowSchedule::single(5.0, 1.0).unwrap();
        let pricer = FundedPricer::new(&market(), &inv(0.05), Some(&cpty(0.07)), 0.4, &TermCurve::flat(0.05).unwrap(), &s, &CloseoutSpec::new(0.4, 0.4).unwrap()).unwrap();
        for o in simulate(&pricer, McSettings::new(2_000, 11)).unwrap() {
            let tau = o.defaults.first().unwrap();
            assert!(o.defaults.investor.is_none_or(|t| tau <= t));
            assert!(o.defaults.counterparty.is_none_or(|t| tau <= t));
            assert!(o.payoff.is_finite());
        }
    }

    #[test]
    fn full_recovery_without_basis_returns_collateral_value() {
        // r̄ = r_X and 𝓡_I = 1: closeout pays v_X exactly, so v(0) = v_X(0).
        let rx = 0.005;
        let m = MarketRates::flat(rx, rx).unwrap();
        let investor = inv(0.03);
        let s = CashflowSchedule::from_flows(vec![Cashflow { t: 1.0, amount: 1.0 }, Cashflow { t: 4.0, amount: -0.5 }]).unwrap();
        let est = mc_value_riskfree_cpty(&m, &investor, 0.4, investor.intensity(), &s, &CloseoutSpec::new(1.0, 1.0).unwrap(), McSettings::new(200_000, 5)).unwrap();
        let vx = s.collateral_value(&m.collateral, 0.0).unwrap();
        // Every path pays exactly v_X(0) up to rounding.
        assert!((est.mean - vx).abs() <= 3.0 * est.std_error + 1e-12, "{est:?} vs {vx}");
    }
}
