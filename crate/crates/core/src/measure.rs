//! The investor's internal pricing measure.
//!
//! The investor can trade its own bonds but not protection on its own name,
//! so the pricing measure is pinned down only by the requirement that those
//! bonds keep their market value. Two completions are supported:
//!
//! * **Risk-free (or independent) counterparty.** Any investor intensity
//!   `λ̄_I ≥ 0` is admissible provided the internal short rate absorbs the
//!   difference, `r̄ + (1-R_I) λ̄_I = r + (1-R_I) λ_I = r_F`.
//! * **Correlated defaults, zero bond recovery, internally default-free
//!   investor.** Keeping the credit-linked bonds `1{τ_C>T_C} 1{τ_I>T_I}` at
//!   market value forces the internal bank account to depend on the
//!   counterparty's default time; before that default it accrues at
//!   `r̄' = r + Λ_I + Λ_C - λ_C`.
//!
//! In both cases the counterparty's survival curve is the market one.

use crate::credit::{CreditCurve, JointDefaultModel, Name};
use crate::curves::{MarketRates, Side, TermCurve};
use crate::error::{domain, Error, Result};
use crate::quadrature::simpson_piecewise;

/// Simpson panels used for expectations over the counterparty default time.
pub const DEFAULT_TIME_PANELS: usize = 2_000;

/// Allowed gap between internal and external prices of a repriced bond.
pub const REPRICING_TOLERANCE: f64 = 1e-8;

fn check_recovery(recovery: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&recovery) {
        return Err(domain(format!("recovery {recovery} outside [0, 1]")));
    }
    Ok(())
}

/// Effective unsecured funding rate `r_F = r + (1 - R_I) λ_I`.
pub fn funding_rate(market: &MarketRates, investor: &CreditCurve, bond_recovery: f64) -> Result<TermCurve> {
    check_recovery(bond_recovery)?;
    let lgd = 1.0 - bond_recovery;
    Ok(market
        .risk_free
        .combine(investor.intensity(), |r, lambda| r + lgd * lambda))
}

/// Internal risk-free rate `r̄ = r_F - (1 - R_I) λ̄_I` implied by the chosen
/// internal investor intensity. `λ̄_I ≡ 0` is accepted as the limit of
/// equivalent completions (pure funding view).
pub fn internal_rate(
    market: &MarketRates,
    investor: &CreditCurve,
    bond_recovery: f64,
    lambda_bar: &TermCurve,
) -> Result<TermCurve> {
    if lambda_bar.min_value() < 0.0 {
        return Err(domain("internal investor intensity must be non-negative"));
    }
    let lgd = 1.0 - bond_recovery;
    let r_f = funding_rate(market, investor, bond_recovery)?;
    Ok(r_f.combine(lambda_bar, |rf, lb| rf - lgd * lb))
}

/// Time-0 price of the investor's zero-coupon bond maturing at `maturity`,
/// `P_I(0, T) = exp(-∫_0^T r_F)`.
pub fn bond_price(market: &MarketRates, investor: &CreditCurve, bond_recovery: f64, maturity: f64) -> Result<f64> {
    if !(maturity > 0.0) {
        return Err(domain(format!("bond maturity must be positive, got {maturity}")));
    }
    funding_rate(market, investor, bond_recovery)?.discount_factor(0.0, maturity)
}

/// The same bond priced inside the internal measure: the bond accrues at
/// `r̄` and loses `(1 - R_I)` of its value at internal intensity `λ̄_I`.
pub fn bond_price_internal(internal_rate: &TermCurve, lambda_bar: &TermCurve, bond_recovery: f64, maturity: f64) -> Result<f64> {
    check_recovery(bond_recovery)?;
    if !(maturity > 0.0) {
        return Err(domain(format!("bond maturity must be positive, got {maturity}")));
    }
    let lgd = 1.0 - bond_recovery;
    let accrual = internal_rate.integrated_rate(0.0, maturity)? + lgd * lambda_bar.integrated_rate(0.0, maturity)?;
    Ok((-accrual).exp())
}

/// Investor bond paying `1{τ_C > T_C} · 1{τ_I > T_I}` at `T_I`, with
/// recovery `R_I` on investor default. `T_C = 0` is a plain zero-coupon bond.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BondSpec {
    pub maturity: f64,
    pub contingency: f64,
    pub recovery: f64,
}

impl BondSpec {
    pub fn new(maturity: f64, contingency: f64, recovery: f64) -> Result<Self> {
        if !(contingency >= 0.0 && contingency < maturity) || !maturity.is_finite() {
            return Err(domain(format!(
                "bond needs 0 <= T_C < T_I, got T_C = {contingency}, T_I = {maturity}"
            )));
        }
        check_recovery(recovery)?;
        Ok(Self {
            maturity,
            contingency,
            recovery,
        })
    }
}

/// The investor's completion of the market.
#[derive(Debug, Clone, PartialEq)]
pub enum InternalMeasure {
    RiskFreeCounterparty {
        lambda_bar: TermCurve,
        bond_recovery: f64,
        /// `r̄`, fixed by funding-rate invariance.
        internal_rate: TermCurve,
    },
    CorrelatedZeroRecovery {
        model: JointDefaultModel,
    },
}

impl InternalMeasure {
    pub fn risk_free_counterparty(
        market: &MarketRates,
        investor: &CreditCurve,
        bond_recovery: f64,
        lambda_bar: TermCurve,
    ) -> Result<Self> {
        let internal_rate = internal_rate(market, investor, bond_recovery, &lambda_bar)?;
        Ok(Self::RiskFreeCounterparty {
            lambda_bar,
            bond_recovery,
            internal_rate,
        })
    }

    /// Correlated completion. The investor is internally default-free and the
    /// bonds fixing the measure have zero recovery.
    pub fn correlated_zero_recovery(model: JointDefaultModel) -> Self {
        Self::CorrelatedZeroRecovery { model }
    }

    /// Internal investor intensity `λ̄_I`.
    pub fn investor_intensity(&self) -> TermCurve {
        match self {
            Self::RiskFreeCounterparty { lambda_bar, .. } => lambda_bar.clone(),
            Self::CorrelatedZeroRecovery { .. } => TermCurve::zero(),
        }
    }

    /// Internal counterparty intensity; collateralized counterparty credit
    /// products fix it to the market curve.
    pub fn counterparty_intensity(&self, market_counterparty: &CreditCurve) -> TermCurve {
        market_counterparty.intensity().clone()
    }

    /// Largest violation of `r̄ + (1-R_I) λ̄_I = r + (1-R_I) λ_I` over the
    /// union of node times, or of the correlated-mode assumptions.
    pub fn funding_invariance_residual(&self, market: &MarketRates, investor: &CreditCurve) -> Result<f64> {
        match self {
            Self::RiskFreeCounterparty {
                lambda_bar,
                bond_recovery,
                internal_rate,
            } => {
                let lgd = 1.0 - bond_recovery;
                let internal = internal_rate.combine(lambda_bar, |r, l| r + lgd * l);
                let external = funding_rate(market, investor, *bond_recovery)?;
                let diff = internal.combine(&external, |a, b| (a - b).abs());
                Ok(diff.values().iter().copied().fold(0.0, f64::max))
            }
            Self::CorrelatedZeroRecovery { .. } => Ok(0.0),
        }
    }
}

/// Internal short rate before the counterparty defaults, correlated mode.
#[derive(Debug, Clone, Copy)]
pub struct PreDefaultRate<'a> {
    market: &'a MarketRates,
    model: &'a JointDefaultModel,
}

/// `r̄'(t) = r(t) + Λ_I(t) + Λ_C(t) - λ_C(t)`; reduces to `r + λ_I` under
/// independence.
pub fn pre_default_rate<'a>(market: &'a MarketRates, model: &'a JointDefaultModel) -> PreDefaultRate<'a> {
    PreDefaultRate { market, model }
}

impl PreDefaultRate<'_> {
    pub fn at(&self, t: f64) -> Result<f64> {
        self.at_on(t, Side::Right)
    }

    pub fn at_on(&self, t: f64, side: Side) -> Result<f64> {
        let m = self.model;
        Ok(self.market.risk_free.value_on(t, side)
            + m.ftd_intensity_on(Name::Investor, t, side)?
            + m.ftd_intensity_on(Name::Counterparty, t, side)?
            - m.counterparty().intensity().value_on(t, side))
    }

    /// `∫_{t0}^{t1} r̄'`, exact: the first-to-default intensities integrate to
    /// `-ln U(t, t)` and `λ_C` to the counterparty hazard.
    pub fn integrated(&self, t0: f64, t1: f64) -> Result<f64> {
        let m = self.model;
        Ok(self.market.risk_free.integrated_rate(t0, t1)?
            + m.log_joint_survival(t0, t0)?
            - m.log_joint_survival(t1, t1)?
            - m.counterparty().intensity().integrated_rate(t0, t1)?)
    }

    /// Pre-default internal bank-account discount
    /// `D̄(0,t)[τ_C > t] = D(0,t) U(t,t) / U_C(t)`.
    pub fn bank_account_discount(&self, t: f64) -> Result<f64> {
        Ok((-self.integrated(0.0, t)?).exp())
    }
}

/// Realized counterparty default time when conditioning the internal bank
/// account.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CounterpartyDefault {
    At(f64),
    /// No counterparty default before the bond matures.
    AfterHorizon,
}

/// Internal bank-account discount `D̄(0, T_I)` conditional on the
/// counterparty default time.
///
/// For `t_C < T_I` this is `D(0,T_I) ∂_C U(T_I,t_C) / ∂_C U_C(t_C)`; on or
/// after `T_I` it is `D(0,T_I) U(T_I,T_I) / U_C(T_I)`.
pub fn conditional_discount(
    market: &MarketRates,
    model: &JointDefaultModel,
    maturity: f64,
    default: CounterpartyDefault,
) -> Result<f64> {
    if !(maturity > 0.0) {
        return Err(domain(format!("maturity must be positive, got {maturity}")));
    }
    let discount = market.risk_free.discount_factor(0.0, maturity)?;
    match default {
        CounterpartyDefault::At(t_c) if t_c < maturity => {
            if !(t_c >= 0.0) {
                return Err(domain(format!("negative default time {t_c}")));
            }
            Ok(discount * early_default_ratio(model, maturity, t_c, Side::Right)?)
        }
        _ => {
            let joint = model.joint_survival(maturity, maturity)?;
            Ok(discount * joint / model.counterparty().survival(maturity)?)
        }
    }
}

/// `∂_C U(T_I, t_C) / (-λ_C(t_C) U_C(t_C))`, the investor survival to `T_I`
/// given counterparty default at `t_C`. Also used at `t_C = T_I` as the left
/// limit of the early-default branch.
fn early_default_ratio(model: &JointDefaultModel, maturity: f64, t_c: f64, side: Side) -> Result<f64> {
    let cpty = model.counterparty();
    let lambda_c = cpty.intensity().value_on(t_c, side);
    if lambda_c == 0.0 {
        return Err(Error::Singular(format!(
            "counterparty intensity vanishes at t_C = {t_c}"
        )));
    }
    let density = -lambda_c * cpty.survival(t_c)?;
    Ok(model.partial_survival_c_on(maturity, t_c, side)? / density)
}

/// `Ē[1{τ_C > T_C} D̄(0, T_I)]` by Simpson quadrature over the counterparty
/// default density on `[T_C, T_I]` plus the exact tail mass beyond `T_I`.
pub fn internal_contingent_value(
    market: &MarketRates,
    model: &JointDefaultModel,
    maturity: f64,
    contingency: f64,
) -> Result<f64> {
    let spec = BondSpec::new(maturity, contingency, 0.0)?;
    let cpty = model.counterparty();
    let discount = market.risk_free.discount_factor(0.0, maturity)?;
    let integrand = |t: f64, side: Side| -> f64 {
        let lambda_c = cpty.intensity().value_on(t, side);
        if lambda_c == 0.0 {
            return 0.0;
        }
        let density = lambda_c * cpty.survival(t).unwrap_or(f64::NAN);
        discount * early_default_ratio(model, maturity, t, side).unwrap_or(f64::NAN) * density
    };
    let body = simpson_piecewise(
        integrand,
        spec.contingency,
        spec.maturity,
        &model.breakpoints(),
        DEFAULT_TIME_PANELS,
    );
    let tail = cpty.survival(maturity)?
        * conditional_discount(market, model, maturity, CounterpartyDefault::AfterHorizon)?;
    let total = body + tail;
    if !total.is_finite() {
        return Err(Error::Numeric("internal bond expectation is not finite".into()));
    }
    Ok(total)
}

/// `Ē[D̄(0, T_I)]`, which must equal `D(0,T_I) U_I(T_I)`.
pub fn expected_conditional_discount(market: &MarketRates, model: &JointDefaultModel, maturity: f64) -> Result<f64> {
    internal_contingent_value(market, model, maturity, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContingentBondPrice {
    /// `D(0,T_I) U(T_I, T_C)`.
    pub external: f64,
    /// Quadrature of the internal-measure expectation.
    pub internal: f64,
}

/// Prices the credit-linked investor bond externally and under the internal
/// correlated measure, failing if the two disagree.
pub fn reprice_contingent_bond(market: &MarketRates, model: &JointDefaultModel, spec: BondSpec) -> Result<ContingentBondPrice> {
    if spec.recovery != 0.0 {
        return Err(domain("the correlated completion requires zero bond recovery"));
    }
    let external = market.risk_free.discount_factor(0.0, spec.maturity)?
        * model.joint_survival(spec.maturity, spec.contingency)?;
    let internal = internal_contingent_value(market, model, spec.maturity, spec.contingency)?;
    if (internal - external).abs() > REPRICING_TOLERANCE {
        return Err(Error::InvariantViolation(format!(
            "contingent bond T_I = {}, T_C = {}: internal {internal} vs external {external}",
            spec.maturity, spec.contingency
        )));
    }
    Ok(ContingentBondPrice { external, internal })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn market() -> MarketRates {
        MarketRates::flat(0.01, 0.005).unwrap()
    }

    fn investor(l: f64) -> CreditCurve {
        CreditCurve::flat(Name::Investor, l).unwrap()
    }

    fn model(theta: f64) -> JointDefaultModel {
        JointDefaultModel::new(
            investor(0.02),
            CreditCurve::flat(Name::Counterparty, 0.02).unwrap(),
            theta,
        )
        .unwrap()
    }

    fn stepped_model(theta: f64) -> JointDefaultModel {
        JointDefaultModel::new(
            CreditCurve::new(Name::Investor, TermCurve::new([(0.0, 0.015), (0.7, 0.03)]).unwrap()).unwrap(),
            CreditCurve::new(Name::Counterparty, TermCurve::new([(0.0, 0.04), (0.3, 0.02), (2.0, 0.05)]).unwrap()).unwrap(),
            theta,
        )
        .unwrap()
    }

    #[test]
    fn funding_rate_examples() {
        let rf = funding_rate(&market(), &investor(0.02), 0.4).unwrap();
        assert_relative_eq!(rf.value_at(3.0), 0.022, max_relative = 1e-15);
        assert_eq!(funding_rate(&market(), &investor(0.0), 0.4).unwrap().value_at(1.0), 0.01);
        assert_eq!(funding_rate(&market(), &investor(0.02), 1.0).unwrap().value_at(1.0), 0.01);
        assert!(matches!(funding_rate(&market(), &investor(0.02), 1.2), Err(Error::Domain(_))));
    }

    #[test]
    fn internal_rate_examples() {
        let m = market();
        let inv = investor(0.02);
        let consensus = internal_rate(&m, &inv, 0.4, inv.intensity()).unwrap();
        assert_relative_eq!(consensus.value_at(0.0), 0.01, max_relative = 1e-14);
        let pure = internal_rate(&m, &inv, 0.4, &TermCurve::zero()).unwrap();
        assert_relative_eq!(pure.value_at(0.0), 0.022, max_relative = 1e-15);
        let mid = internal_rate(&m, &inv, 0.4, &TermCurve::flat(0.01).unwrap()).unwrap();
        assert_relative_eq!(mid.value_at(0.0), 0.016, max_relative = 1e-14);
        assert!(internal_rate(&m, &inv, 0.4, &TermCurve::flat(-0.01).unwrap()).is_err());
    }

    #[test]
    fn bond_price_examples_and_invariance() {
        let m = market();
        let inv = investor(0.02);
        assert_eq!(bond_price(&MarketRates::flat(0.0, 0.0).unwrap(), &investor(0.0), 0.4, 3.0).unwrap(), 1.0);
        assert_relative_eq!(bond_price(&m, &inv, 0.4, 1.0).unwrap(), (-0.022f64).exp(), max_relative = 1e-15);
        assert!(bond_price(&m, &inv, 0.4, 0.0).is_err());
        for lb in [0.0, 0.005, 0.01, 0.02, 0.04] {
            let lambda_bar = TermCurve::flat(lb).unwrap();
            let measure = InternalMeasure::risk_free_counterparty(&m, &inv, 0.4, lambda_bar.clone()).unwrap();
            assert!(measure.funding_invariance_residual(&m, &inv).unwrap() < 1e-16);
            let InternalMeasure::RiskFreeCounterparty { internal_rate, .. } = &measure else { unreachable!() };
            for t in [1.0, 5.0, 10.0] {
                let ext = bond_price(&m, &inv, 0.4, t).unwrap();
                let int = bond_price_internal(internal_rate, &lambda_bar, 0.4, t).unwrap();
                assert_relative_eq!(int, ext, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn pre_default_rate_examples() {
        let m = market();
        let indep = model(0.0);
        assert_relative_eq!(pre_default_rate(&m, &indep).at(2.0).unwrap(), 0.03, max_relative = 1e-14);
        // r + 2Λ - λ_C with Λ frozen from an mpmath derivative.
        let corr = model(1.0);
        assert_relative_eq!(
            pre_default_rate(&m, &corr).at(5.0).unwrap(),
            0.026_524_257_364_842_47,
            max_relative = 1e-13
        );
    }

    #[test]
    fn pre_default_rate_is_log_derivative_of_conditional_discount() {
        let m = market();
        for theta in [0.0, 0.5, 1.0, 3.0] {
            let md = stepped_model(theta);
            let rate = pre_default_rate(&m, &md);
            for &t in &[0.15, 1.1, 3.7] {
                let h = 1e-5;
                let d = |x: f64| conditional_discount(&m, &md, x, CounterpartyDefault::AfterHorizon).unwrap().ln();
                let fd = -(d(t + h) - d(t - h)) / (2.0 * h);
                assert!((fd - rate.at(t).unwrap()).abs() < 1e-6);
                assert_relative_eq!(
                    rate.bank_account_discount(t).unwrap(),
                    conditional_discount(&m, &md, t, CounterpartyDefault::AfterHorizon).unwrap(),
                    max_relative = 1e-13
                );
            }
        }
    }

    #[test]
    fn conditional_discount_examples() {
        let m = market();
        let indep = model(0.0);
        let expected = (-0.01f64).exp() * (-0.02f64).exp();
        let values: Vec<f64> = [0.0, 0.1, 0.5, 0.99, 1.0, 3.0]
            .iter()
            .map(|&t| conditional_discount(&m, &indep, 1.0, CounterpartyDefault::At(t)).unwrap())
            .chain([conditional_discount(&m, &indep, 1.0, CounterpartyDefault::AfterHorizon).unwrap()])
            .collect();
        let spread = values.iter().copied().fold(f64::MIN, f64::max) - values.iter().copied().fold(f64::MAX, f64::min);
        assert!(spread <= 1e-12);
        assert_relative_eq!(values[0], expected, max_relative = 1e-14);

        // Frozen from an mpmath numerical derivative of the Clayton survival.
        let corr = model(1.0);
        assert_relative_eq!(
            conditional_discount(&m, &corr, 1.0, CounterpartyDefault::At(0.5)).unwrap(),
            0.951_604_370_102_705_9,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            conditional_discount(&m, &corr, 1.0, CounterpartyDefault::AfterHorizon).unwrap(),
            0.970_826_187_253_014,
            max_relative = 1e-13
        );
        // t_C = T_I sits on the after-horizon branch.
        assert_eq!(
            conditional_discount(&m, &corr, 1.0, CounterpartyDefault::At(1.0)).unwrap(),
            conditional_discount(&m, &corr, 1.0, CounterpartyDefault::AfterHorizon).unwrap()
        );
    }

    #[test]
    fn conditional_discount_singular_when_counterparty_cannot_default() {
        let md = JointDefaultModel::new(investor(0.02), CreditCurve::flat(Name::Counterparty, 0.0).unwrap(), 1.0).unwrap();
        assert!(matches!(
            conditional_discount(&market(), &md, 1.0, CounterpartyDefault::At(0.5)),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn expected_conditional_discount_identity() {
        let m = market();
        for theta in [0.0, 0.5, 1.0, 3.0] {
            for md in [model(theta), stepped_model(theta)] {
                for t_i in [0.5, 1.0, 4.0] {
                    let expected = m.risk_free.discount_factor(0.0, t_i).unwrap() * md.investor().survival(t_i).unwrap();
                    let got = expected_conditional_discount(&m, &md, t_i).unwrap();
                    assert!((got - expected).abs() <= 1e-8, "θ={theta} T={t_i}: {got} vs {expected}");
                }
            }
        }
    }

    #[test]
    fn contingent_bond_repricing() {
        let m = market();
        let indep = model(0.0);
        let p = reprice_contingent_bond(&m, &indep, BondSpec::new(1.0, 0.5, 0.0).unwrap()).unwrap();
        assert_relative_eq!(p.external, (-0.01f64 - 0.02 - 0.01).exp(), max_relative = 1e-14);
        for theta in [0.5, 1.0, 3.0] {
            for md in [model(theta), stepped_model(theta)] {
                for t_c in [0.0, 0.25, 0.5, 0.9] {
                    let p = reprice_contingent_bond(&m, &md, BondSpec::new(1.0, t_c, 0.0).unwrap()).unwrap();
                    assert!((p.internal - p.external).abs() <= 1e-8);
                }
            }
        }
        assert!(reprice_contingent_bond(&m, &indep, BondSpec::new(1.0, 0.5, 0.4).unwrap()).is_err());
        assert!(BondSpec::new(1.0, 1.0, 0.0).is_err());
    }
}
