//! One-parameter logistic (1PL) skill model.
//!
//! Each sub-skill carries a proficiency `alpha`, a difficulty `beta` and a
//! smoothness `lambda`. Proficiency drifts over teaching steps as a Wiener
//! process and a segment's performance ratio is scored with a continuous
//! Bernoulli density whose parameter is the mastery probability.

use std::f64::consts::{LN_2, PI};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Ratios are clamped into `[EPS_CLAMP, 1 - EPS_CLAMP]` so log-densities stay finite.
pub const EPS_CLAMP: f64 = 1e-3;

/// Below this distance from 1/2 the normalizer uses its Taylor series.
const NORMALIZER_SERIES_RADIUS: f64 = 1e-4;

/// Largest double strictly below 1.
const ONE_MINUS_ULP: f64 = 1.0 - f64::EPSILON / 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SubSkillId(pub usize);

impl SubSkillId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for SubSkillId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkillParams {
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
}

impl SkillParams {
    pub fn new(alpha: f64, beta: f64, lambda: f64) -> Result<Self> {
        if !alpha.is_finite() || !beta.is_finite() {
            return Err(domain("alpha and beta must be finite"));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(domain(format!("lambda must be positive, got {lambda}")));
        }
        Ok(Self { alpha, beta, lambda })
    }

    pub fn mastery(&self) -> f64 {
        logistic(self.alpha - self.beta)
    }
}

/// Student-to-expert return ratio for one training segment.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PerformanceRatio {
    /// NaN when invalid; written as `null` in JSON.
    #[serde(with = "nan_as_null")]
    pub value: f64,
    pub valid: bool,
}

impl PerformanceRatio {
    /// Clamps `raw` into the admissible range. Non-finite input yields an invalid ratio.
    pub fn clamped(raw: f64) -> Self {
        if !raw.is_finite() {
            return Self::invalid();
        }
        Self {
            value: raw.clamp(EPS_CLAMP, 1.0 - EPS_CLAMP),
            valid: true,
        }
    }

    pub fn invalid() -> Self {
        Self {
            value: f64::NAN,
            valid: false,
        }
    }
}

impl PartialEq for PerformanceRatio {
    /// Two invalid ratios are equal whatever their payload.
    fn eq(&self, other: &Self) -> bool {
        self.valid == other.valid && (!self.valid || self.value == other.value)
    }
}

mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_nan() {
            s.serialize_none()
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationRecord {
    pub step: u64,
    pub subskill: SubSkillId,
    pub ratio: PerformanceRatio,
}

#[inline]
pub(crate) fn logistic(x: f64) -> f64 {
    let p = if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    };
    p.clamp(f64::MIN_POSITIVE, ONE_MINUS_ULP)
}

/// Probability that a sub-skill is mastered, `logistic(alpha - beta)`.
pub fn mastery_prob(alpha: f64, beta: f64) -> Result<f64> {
    if !alpha.is_finite() || !beta.is_finite() {
        return Err(domain(format!(
            "mastery_prob needs finite inputs, got alpha={alpha}, beta={beta}"
        )));
    }
    Ok(logistic(alpha - beta))
}

/// Normalized Gaussian transition density of the proficiency random walk:
/// `Normal(alpha_next; alpha, lambda * dt)`.
pub fn wiener_transition_density(alpha_next: f64, alpha: f64, lambda: f64, dt: f64) -> Result<f64> {
    if !(lambda > 0.0) || !(dt > 0.0) {
        return Err(domain(format!(
            "transition density needs lambda > 0 and dt > 0, got lambda={lambda}, dt={dt}"
        )));
    }
    Ok(normal_pdf(alpha_next, alpha, lambda * dt))
}

#[inline]
pub(crate) fn normal_pdf(x: f64, mean: f64, variance: f64) -> f64 {
    let d = x - mean;
    (-0.5 * d * d / variance).exp() / (2.0 * PI * variance).sqrt()
}

#[inline]
pub(crate) fn normal_logpdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - 0.5 * (2.0 * PI).ln()
}

/// `log C(p)` where `C(p) = 2 artanh(1 - 2p) / (1 - 2p)` and `C(1/2) = 2`.
pub(crate) fn log_cb_normalizer(p: f64) -> f64 {
    let x = 1.0 - 2.0 * p;
    if (p - 0.5).abs() < NORMALIZER_SERIES_RADIUS {
        // artanh(x)/x = 1 + x^2/3 + x^4/5 + ...
        let x2 = x * x;
        LN_2 + (x2 / 3.0 + x2 * x2 / 5.0).ln_1p()
    } else {
        // 2 artanh(1 - 2p) = ln(1 - p) - ln(p); stays finite for p near 0 or 1.
        (((-p).ln_1p() - p.ln()) / x).ln()
    }
}

/// Continuous Bernoulli log-density on `[0, 1]` for any `v` in the closed unit interval.
#[inline]
pub(crate) fn cb_log_density(v: f64, p: f64) -> f64 {
    log_cb_normalizer(p) + v * p.ln() + (1.0 - v) * (-p).ln_1p()
}

/// Normalized continuous Bernoulli log-density of an observed ratio.
pub fn continuous_bernoulli_logpdf(v: PerformanceRatio, p: f64) -> Result<f64> {
    if !v.valid || !v.value.is_finite() || !(0.0..=1.0).contains(&v.value) {
        return Err(domain("continuous Bernoulli needs a valid ratio in [0, 1]"));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(domain(format!("continuous Bernoulli needs p in (0, 1), got {p}")));
    }
    Ok(cb_log_density(v.value, p))
}
