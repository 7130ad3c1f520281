//! Default-time laws for the investor `I` and the counterparty `C`.
//!
//! Marginals are piecewise-constant intensity curves. The joint survival
//! `U(t_I, t_C) = P(τ_I > t_I, τ_C > t_C)` couples them with a Clayton
//! survival copula `C(u, v) = (u^-θ + v^-θ - 1)^(-1/θ)`, `θ ≥ 0`; `θ = 0` is
//! exact independence. The copula is absolutely continuous, so simultaneous
//! defaults have probability zero.
//!
//! Everything here is evaluated in terms of cumulative hazards
//! `H_N(t) = ∫_0^t λ_N`, using `u^-θ = exp(θ H)` together with `expm1`/`ln_1p`
//! so that the `θ → 0` limit is reached without cancellation.

use serde::{Deserialize, Serialize};

use crate::curves::{merge_times, Side, TermCurve};
use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Name {
    #[serde(rename = "I")]
    Investor,
    #[serde(rename = "C")]
    Counterparty,
}

/// Marginal default law of one name: intensity `λ_N(t) ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CreditCurve {
    name: Name,
    intensity: TermCurve,
}

impl CreditCurve {
    pub fn new(name: Name, intensity: TermCurve) -> Result<Self> {
        if intensity.min_value() < 0.0 {
            return Err(Error::InvalidCurve(format!(
                "{name:?} default intensity must be non-negative"
            )));
        }
        Ok(Self { name, intensity })
    }

    pub fn flat(name: Name, intensity: f64) -> Result<Self> {
        Self::new(name, TermCurve::flat(intensity)?)
    }

    pub fn name(&self) -> Name {
        self.name
    }

    pub fn intensity(&self) -> &TermCurve {
        &self.intensity
    }

    /// Cumulative hazard `H(t) = -ln U(t)`.
    pub fn hazard(&self, t: f64) -> Result<f64> {
        self.intensity.integrated_rate(0.0, t)
    }

    /// `U_N(t) = exp(-∫_0^t λ_N)`.
    pub fn survival(&self, t: f64) -> Result<f64> {
        Ok((-self.hazard(t)?).exp())
    }

    /// Default time at which the cumulative hazard reaches `level`; `None`
    /// if the name survives forever with at least that probability.
    pub fn default_time_for_hazard(&self, level: f64) -> Option<f64> {
        self.intensity.inverse_integrated(level)
    }
}

/// Marginal credit curves joined by a Clayton survival copula.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDefaultModel {
    investor: CreditCurve,
    counterparty: CreditCurve,
    theta: f64,
}

impl JointDefaultModel {
    pub fn new(investor: CreditCurve, counterparty: CreditCurve, theta: f64) -> Result<Self> {
        if !(theta >= 0.0) || !theta.is_finite() {
            return Err(domain(format!(
                "copula dependence theta must be finite and non-negative, got {theta}"
            )));
        }
        if investor.name != Name::Investor || counterparty.name != Name::Counterparty {
            return Err(domain("credit curves passed in the wrong roles"));
        }
        Ok(Self {
            investor,
            counterparty,
            theta,
        })
    }

    pub fn investor(&self) -> &CreditCurve {
        &self.investor
    }

    pub fn counterparty(&self) -> &CreditCurve {
        &self.counterparty
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn curve(&self, name: Name) -> &CreditCurve {
        match name {
            Name::Investor => &self.investor,
            Name::Counterparty => &self.counterparty,
        }
    }

    /// Jump times of either intensity.
    pub fn breakpoints(&self) -> Vec<f64> {
        merge_times(
            self.investor.intensity.times(),
            self.counterparty.intensity.times(),
        )
    }

    /// `ln S` where `S = u^-θ + v^-θ - 1`, given the two cumulative hazards.
    fn log_s(&self, h_i: f64, h_c: f64) -> f64 {
        let th = self.theta;
        ((th * h_i).exp_m1() + (th * h_c).exp_m1()).ln_1p()
    }

    fn log_joint_from_hazards(&self, h_i: f64, h_c: f64) -> f64 {
        if self.theta == 0.0 {
            -(h_i + h_c)
        } else {
            -self.log_s(h_i, h_c) / self.theta
        }
    }

    /// `ln U(t_I, t_C)`.
    pub fn log_joint_survival(&self, t_i: f64, t_c: f64) -> Result<f64> {
        let h_i = self.investor.hazard(t_i)?;
        let h_c = self.counterparty.hazard(t_c)?;
        Ok(self.log_joint_from_hazards(h_i, h_c))
    }

    pub fn joint_survival(&self, t_i: f64, t_c: f64) -> Result<f64> {
        Ok(self.log_joint_survival(t_i, t_c)?.exp())
    }

    /// First-to-default intensity `Λ_N(t) = -∂_N ln U(t, t)`.
    pub fn ftd_intensity(&self, name: Name, t: f64) -> Result<f64> {
        self.ftd_intensity_on(name, t, Side::Right)
    }

    /// One-sided [`Self::ftd_intensity`] at intensity jump times.
    pub fn ftd_intensity_on(&self, name: Name, t: f64, side: Side) -> Result<f64> {
        let lambda = self.curve(name).intensity.value_on(t, side);
        if self.theta == 0.0 || lambda == 0.0 {
            self.investor.hazard(t)?;
            return Ok(lambda);
        }
        let h_i = self.investor.hazard(t)?;
        let h_c = self.counterparty.hazard(t)?;
        let h_n = match name {
            Name::Investor => h_i,
            Name::Counterparty => h_c,
        };
        // λ_N u_N^-θ / S
        Ok(lambda * (self.theta * h_n - self.log_s(h_i, h_c)).exp())
    }

    /// `∂U/∂t_C` at `(t_I, t_C)`; always `≤ 0`.
    pub fn partial_survival_c(&self, t_i: f64, t_c: f64) -> Result<f64> {
        self.partial_survival_c_on(t_i, t_c, Side::Right)
    }

    pub fn partial_survival_c_on(&self, t_i: f64, t_c: f64, side: Side) -> Result<f64> {
        let h_i = self.investor.hazard(t_i)?;
        let h_c = self.counterparty.hazard(t_c)?;
        let lambda_c = self.counterparty.intensity.value_on(t_c, side);
        if lambda_c == 0.0 {
            return Ok(0.0);
        }
        let log_partial = if self.theta == 0.0 {
            -(h_i + h_c)
        } else {
            // ∂C/∂v · U_C' = -λ_C S^(-1/θ - 1) v^-θ
            let log_s = self.log_s(h_i, h_c);
            -log_s / self.theta - log_s + self.theta * h_c
        };
        Ok(-lambda_c * log_partial.exp())
    }
}
