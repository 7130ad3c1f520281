//! Value adjustments for uncollateralized deterministic cashflow streams,
//! priced under the investor's own choice of risk-neutral measure.
//!
//! An investor can trade its own bonds but not protection on its own name,
//! so its pricing measure is not unique. This crate parametrizes the
//! admissible measures, solves the resulting linear adjustment equations for
//! `u = v - v_X` and checks every regime against an independent Monte Carlo
//! valuation.
//!
//! Modules, bottom-up:
//!
//! * [`curves`]: piecewise-constant rate and intensity curves.
//! * [`credit`]: marginal default laws, Clayton joint survival, first-to-default intensities.
//! * [`measure`]: funding-rate invariance, internal rates, the default-contingent bank account.
//! * [`instruments`]: cashflow schedules, collateral value, closeouts.
//! * [`engine`]: the adjustment solver and its three regimes.
//! * [`oracle`]: Monte Carlo valuation of the same trades.
//! * [`cli`]: JSON scenario configs, sweeps and CSV reports.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod credit;
pub mod curves;
pub mod engine;
pub mod error;
pub mod instruments;
pub mod measure;
pub mod oracle;
pub mod par;
pub mod quadrature;

pub use credit::{CreditCurve, JointDefaultModel, Name};
pub use curves::{MarketRates, Side, TermCurve};
pub use engine::{
    adjustment_correlated, adjustment_independent, adjustment_riskfree_cpty, AdjustmentProfile, Regime,
    SolverSettings,
};
pub use error::{Error, Result};
pub use instruments::{Cashflow, CashflowSchedule, CloseoutSpec};
pub use oracle::{McEstimate, McSettings};
pub use par::Execution;
