//! Deterministic piecewise-constant term structures.
//!
//! A [`TermCurve`] holds rates or default intensities as a right-continuous
//! step function of time (years from the valuation date), flat beyond the
//! last node. All integrals over such a curve are closed-form sums, so
//! discount factors and survival probabilities carry no quadrature error.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Which one-sided limit to take when evaluating a step function exactly at
/// one of its jump times.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `f(t⁻)`, the value approached from earlier times.
    Left,
    /// `f(t⁺)`, the value approached from later times.
    Right,
}

/// One node of a curve literal, `{"t": ..., "value": ...}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveNode {
    pub t: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TermCurve {
    times: Vec<f64>,
    values: Vec<f64>,
    /// `∫_0^{times[k]} curve`, cached for O(log n) integration.
    cumulative: Vec<f64>,
}

impl TermCurve {
    /// Builds a curve from `(time, value)` nodes. The first node must sit at
    /// time 0 and times must be strictly increasing.
    pub fn new(nodes: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let (times, values): (Vec<f64>, Vec<f64>) = nodes.into_iter().unzip();
        if times.is_empty() {
            return Err(Error::InvalidCurve("curve has no nodes".into()));
        }
        if times[0] != 0.0 {
            return Err(Error::InvalidCurve(format!(
                "first node must be at t = 0, found t = {}",
                times[0]
            )));
        }
        for (k, w) in times.windows(2).enumerate() {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(Error::InvalidCurve(format!(
                    "node times must be strictly increasing and finite (node {} at t = {})",
                    k + 1,
                    w[1]
                )));
            }
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidCurve(format!("non-finite node value {v}")));
        }
        let mut cumulative = Vec::with_capacity(times.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for k in 1..times.len() {
            acc += values[k - 1] * (times[k] - times[k - 1]);
            cumulative.push(acc);
        }
        Ok(Self {
            times,
            values,
            cumulative,
        })
    }

    pub fn flat(value: f64) -> Result<Self> {
        Self::new([(0.0, value)])
    }

    pub fn zero() -> Self {
        Self::flat(0.0).expect("zero curve is valid")
    }

    pub fn from_nodes(nodes: &[CurveNode]) -> Result<Self> {
        Self::new(nodes.iter().map(|n| (n.t, n.value)))
    }

    pub fn to_nodes(&self) -> Vec<CurveNode> {
        self.nodes().map(|(t, value)| CurveNode { t, value }).collect()
    }

    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.times.iter().copied().zip(self.values.iter().copied())
    }

    /// Node times; these are the only points where the curve may jump.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_identically_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Index of the segment containing `t` (right-continuous convention).
    fn segment(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s <= t).saturating_sub(1)
    }

    /// Right-continuous value `curve(t)`. Times before 0 read the first node.
    pub fn value_at(&self, t: f64) -> f64 {
        self.values[self.segment(t)]
    }

    /// One-sided value at `t`; at t = 0 both sides read the first node.
    pub fn value_on(&self, t: f64, side: Side) -> f64 {
        match side {
            Side::Right => self.value_at(t),
            Side::Left => {
                let k = self.times.partition_point(|&s| s < t).saturating_sub(1);
                self.values[k]
            }
        }
    }

    fn integral_from_origin(&self, t: f64) -> f64 {
        let k = self.segment(t);
        self.cumulative[k] + self.values[k] * (t - self.times[k])
    }

    /// `∫_{t0}^{t1} curve(s) ds`, exact over the step segments.
    pub fn integrated_rate(&self, t0: f64, t1: f64) -> Result<f64> {
        check_interval(t0, t1)?;
        Ok(self.integrated_unchecked(t0, t1))
    }

    pub(crate) fn integrated_unchecked(&self, t0: f64, t1: f64) -> f64 {
        if t0 == t1 {
            return 0.0;
        }
        // Within a single segment the difference of cumulatives would lose
        // relative precision on short intervals.
        let k0 = self.segment(t0);
        if k0 == self.segment(t1) {
            return self.values[k0] * (t1 - t0);
        }
        self.integral_from_origin(t1) - self.integral_from_origin(t0)
    }

    /// `exp(-∫_{t0}^{t1} curve)`.
    pub fn discount_factor(&self, t0: f64, t1: f64) -> Result<f64> {
        Ok((-self.integrated_rate(t0, t1)?).exp())
    }

    /// Smallest `t ≥ 0` with `∫_0^t curve = level`, for non-negative curves.
    /// `None` when the level is never reached (the tail segment is zero).
    pub fn inverse_integrated(&self, level: f64) -> Option<f64> {
        if level <= 0.0 {
            return Some(0.0);
        }
        // First node whose cumulative integral reaches the level.
        let k = self.cumulative.partition_point(|&c| c < level);
        let seg = k.saturating_sub(1);
        let rate = self.values[seg];
        if k < self.cumulative.len() && self.cumulative[k] == level {
            return Some(self.times[k]);
        }
        if rate <= 0.0 {
            return None;
        }
        Some(self.times[seg] + (level - self.cumulative[seg]) / rate)
    }

    /// Pointwise combination `f(self(t), other(t))` on the union of the node
    /// grids; exact because both inputs are step functions.
    pub fn combine(&self, other: &TermCurve, f: impl Fn(f64, f64) -> f64) -> TermCurve {
        let times = merge_times(&self.times, &other.times);
        let nodes: Vec<(f64, f64)> = times
            .iter()
            .map(|&t| (t, f(self.value_at(t), other.value_at(t))))
            .collect();
        TermCurve::new(nodes).expect("union of valid grids is a valid grid")
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> TermCurve {
        TermCurve::new(self.nodes().map(|(t, v)| (t, f(v)))).expect("same grid")
    }
}

fn check_interval(t0: f64, t1: f64) -> Result<()> {
    if !(t0 >= 0.0) {
        return Err(domain(format!("negative start time {t0}")));
    }
    if !(t1 >= t0) {
        return Err(domain(format!("interval end {t1} precedes start {t0}")));
    }
    if !t1.is_finite() {
        return Err(domain(format!("non-finite interval end {t1}")));
    }
    Ok(())
}

/// Sorted union of two strictly increasing grids.
pub(crate) fn merge_times(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = a.iter().chain(b).copied().collect();
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// The deterministic market as seen by every player: funded risk-free rate
/// `r` and collateral (OIS) rate `r_X`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketRates {
    pub risk_free: TermCurve,
    pub collateral: TermCurve,
}

impl MarketRates {
    pub fn new(risk_free: TermCurve, collateral: TermCurve) -> Self {
        Self {
            risk_free,
            collateral,
        }
    }

    pub fn flat(risk_free: f64, collateral: f64) -> Result<Self> {
        Ok(Self::new(
            TermCurve::flat(risk_free)?,
            TermCurve::flat(collateral)?,
        ))
    }

    /// Liquidity basis `r - r_X`.
    pub fn basis(&self) -> TermCurve {
        self.risk_free.combine(&self.collateral, |r, rx| r - rx)
    }
}
