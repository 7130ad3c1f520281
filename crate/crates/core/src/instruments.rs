//! Contract cashflows, their collateralized value, and default closeouts.
//!
//! Amounts are signed from the investor's side: positive flows are received.
//! The collateral value `v_X(t)` is quoted ex-dividend, so a flow paid exactly
//! at `t` is no longer part of `v_X(t)`.

use serde::{Deserialize, Serialize};

use crate::curves::{Side, TermCurve};
use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cashflow {
    pub t: f64,
    pub amount: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CashflowSchedule {
    flows: Vec<Cashflow>,
    maturity: f64,
}

impl CashflowSchedule {
    /// Flows must be strictly increasing in time within `(0, maturity]`.
    pub fn new(flows: Vec<Cashflow>, maturity: f64) -> Result<Self> {
        if flows.is_empty() {
            return Err(Error::InvalidSchedule("schedule has no flows".into()));
        }
        if !maturity.is_finite() {
            return Err(Error::InvalidSchedule(format!("non-finite maturity {maturity}")));
        }
        let mut prev = 0.0;
        for f in &flows {
            if !(f.t > prev) || f.t > maturity {
                return Err(Error::InvalidSchedule(format!(
                    "flow at t = {} must lie after {prev} and no later than maturity {maturity}",
                    f.t
                )));
            }
            if !f.amount.is_finite() {
                return Err(Error::InvalidSchedule(format!("non-finite amount at t = {}", f.t)));
            }
            prev = f.t;
        }
        Ok(Self { flows, maturity })
    }

    /// Schedule maturing at its last flow.
    pub fn from_flows(flows: Vec<Cashflow>) -> Result<Self> {
        let maturity = flows.last().map(|f| f.t).unwrap_or(0.0);
        Self::new(flows, maturity)
    }

    pub fn single(t: f64, amount: f64) -> Result<Self> {
        Self::from_flows(vec![Cashflow { t, amount }])
    }

    pub fn flows(&self) -> &[Cashflow] {
        &self.flows
    }

    pub fn maturity(&self) -> f64 {
        self.maturity
    }

    pub fn flow_times(&self) -> Vec<f64> {
        self.flows.iter().map(|f| f.t).collect()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            flows: self
                .flows
                .iter()
                .map(|f| Cashflow { t: f.t, amount: f.amount * factor })
                .collect(),
            maturity: self.maturity,
        }
    }

    /// Collateralized value `v_X(t) = Σ_{t_i > t} a_i exp(-∫_t^{t_i} r_X)`.
    pub fn collateral_value(&self, collateral: &TermCurve, t: f64) -> Result<f64> {
        if !(0.0..=self.maturity).contains(&t) {
            return Err(domain(format!("t = {t} outside [0, {}]", self.maturity)));
        }
        Ok(self.collateral_value_on(collateral, t, Side::Right))
    }

    /// One-sided collateral value: `Side::Left` is the cum-dividend value
    /// `v_X(t⁻)`, which still includes a flow falling exactly at `t`.
    pub fn collateral_value_on(&self, collateral: &TermCurve, t: f64, side: Side) -> f64 {
        let start = match side {
            Side::Right => self.flows.partition_point(|f| f.t <= t),
            Side::Left => self.flows.partition_point(|f| f.t < t),
        };
        self.flows[start..]
            .iter()
            .map(|f| f.amount * (-collateral.integrated_unchecked(t.max(0.0), f.t)).exp())
            .sum()
    }
}

/// Closeout recoveries `𝓡_I` (applied when the investor defaults owing money)
/// and `𝓡_C` (when the counterparty defaults owing money).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloseoutSpec {
    pub recovery_investor: f64,
    pub recovery_counterparty: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Closeout {
    /// `k_I = v_X⁺ - 𝓡_I v_X⁻`
    pub investor: f64,
    /// `k_C = 𝓡_C v_X⁺ - v_X⁻`
    pub counterparty: f64,
}

impl CloseoutSpec {
    pub fn new(recovery_investor: f64, recovery_counterparty: f64) -> Result<Self> {
        for r in [recovery_investor, recovery_counterparty] {
            if !(0.0..=1.0).contains(&r) {
                return Err(domain(format!("closeout recovery {r} outside [0, 1]")));
            }
        }
        Ok(Self {
            recovery_investor,
            recovery_counterparty,
        })
    }

    pub fn closeout_values(&self, collateral_value: f64) -> Closeout {
        let pos = collateral_value.max(0.0);
        let neg = (-collateral_value).max(0.0);
        Closeout {
            investor: pos - self.recovery_investor * neg,
            counterparty: self.recovery_counterparty * pos - neg,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn schedule_validation() {
        assert!(CashflowSchedule::from_flows(vec![]).is_err());
        assert!(CashflowSchedule::single(0.0, 1.0).is_err());
        assert!(CashflowSchedule::new(vec![Cashflow { t: 2.0, amount: 1.0 }], 1.0).is_err());
        assert!(CashflowSchedule::from_flows(vec![
            Cashflow { t: 1.0, amount: 1.0 },
            Cashflow { t: 1.0, amount: 1.0 }
        ])
        .is_err());
        assert!(CashflowSchedule::single(1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn collateral_value_examples() {
        let s = CashflowSchedule::single(1.0, 1.0).unwrap();
        let zero = TermCurve::zero();
        assert_eq!(s.collateral_value(&zero, 0.0).unwrap(), 1.0);
        assert_eq!(s.collateral_value(&zero, 0.999).unwrap(), 1.0);
        assert_eq!(s.collateral_value(&zero, 1.0).unwrap(), 0.0);
        assert_eq!(s.collateral_value_on(&zero, 1.0, Side::Left), 1.0);

        let rx = TermCurve::flat(0.005).unwrap();
        assert_relative_eq!(s.collateral_value(&rx, 0.0).unwrap(), (-0.005f64).exp(), max_relative = 1e-15);
        assert!(s.collateral_value(&rx, 1.5).is_err());
        assert!(s.collateral_value(&rx, -0.1).is_err());
    }

    #[test]
    fn collateral_value_is_additive() {
        let rx = TermCurve::new([(0.0, 0.004), (1.5, 0.007)]).unwrap();
        let a = CashflowSchedule::new(vec![Cashflow { t: 1.0, amount: 2.0 }], 3.0).unwrap();
        let b = CashflowSchedule::new(vec![Cashflow { t: 3.0, amount: -1.5 }], 3.0).unwrap();
        let both = CashflowSchedule::from_flows(vec![Cashflow { t: 1.0, amount: 2.0 }, Cashflow { t: 3.0, amount: -1.5 }]).unwrap();
        for t in [0.0, 0.5, 1.0, 2.0, 2.9] {
            let sum = a.collateral_value(&rx, t).unwrap() + b.collateral_value(&rx, t).unwrap();
            assert_relative_eq!(both.collateral_value(&rx, t).unwrap(), sum, epsilon = 1e-15);
        }
    }

    #[test]
    fn collateral_value_solves_its_ode_between_flows() {
        let rx = 0.005;
        let curve = TermCurve::flat(rx).unwrap();
        let s = CashflowSchedule::from_flows(vec![
            Cashflow { t: 1.0, amount: 0.3 },
            Cashflow { t: 2.0, amount: -0.7 },
            Cashflow { t: 3.0, amount: 1.0 },
        ])
        .unwrap();
        let h = 1e-5;
        for t in [0.3, 0.7, 1.4, 1.9, 2.5] {
            let vx = s.collateral_value(&curve, t).unwrap();
            let d = (s.collateral_value(&curve, t + h).unwrap() - s.collateral_value(&curve, t - h).unwrap()) / (2.0 * h);
            assert!((d - rx * vx).abs() < 1e-8);
        }
        for f in s.flows() {
            let jump = s.collateral_value_on(&curve, f.t, Side::Left) - s.collateral_value_on(&curve, f.t, Side::Right);
            assert!((jump - f.amount).abs() < 1e-12);
        }
    }

    #[test]
    fn closeout_examples() {
        let spec = CloseoutSpec::new(0.4, 0.4).unwrap();
        let k = spec.closeout_values(1.0);
        assert_eq!((k.investor, k.counterparty), (1.0, 0.4));
        let k = spec.closeout_values(-1.0);
        assert_eq!((k.investor, k.counterparty), (-0.4, -1.0));
        let full = CloseoutSpec::new(1.0, 1.0).unwrap();
        for v in [-2.5, 0.0, 0.7] {
            let k = full.closeout_values(v);
            assert_eq!((k.investor, k.counterparty), (v, v));
        }
        assert!(CloseoutSpec::new(1.5, 0.4).is_err());
    }

    proptest! {
        #[test]
        fn closeout_drivers_have_fixed_signs(v in -10.0f64..10.0, ri in 0.0f64..=1.0, rc in 0.0f64..=1.0) {
            let k = CloseoutSpec::new(ri, rc).unwrap().closeout_values(v);
            let (pos, neg) = (v.max(0.0), (-v).max(0.0));
            prop_assert!((k.investor - v - (1.0 - ri) * neg).abs() < 1e-12);
            prop_assert!((k.counterparty - v + (1.0 - rc) * pos).abs() < 1e-12);
            prop_assert!(k.investor - v >= -1e-12);
            prop_assert!(k.counterparty - v <= 1e-12);
        }
    }
}
