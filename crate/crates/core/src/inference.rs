//! Online MAP estimation of `(lambda, alpha_t, beta)` for one sub-skill.
//!
//! Past proficiencies are integrated out one observation at a time: each
//! ratio observed `dt` steps ago is scored against a Gaussian spread of
//! width `sqrt(lambda * dt)` around the current proficiency. The maximizer is
//! found by a fixed coarse grid followed by a shrinking-step coordinate
//! search, so the same history always yields the same point.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::skill_model::{
    cb_log_density, logistic, normal_logpdf, ObservationRecord, PerformanceRatio, SkillParams,
    SubSkillId,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorConfig {
    pub alpha0_mean: f64,
    pub alpha0_sd: f64,
    pub beta_mean: f64,
    pub beta_sd: f64,
    pub log_lambda_mean: f64,
    pub log_lambda_sd: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            alpha0_mean: 0.0,
            alpha0_sd: 1.5,
            beta_mean: 0.0,
            beta_sd: 1.0,
            log_lambda_mean: 0.25f64.ln(),
            log_lambda_sd: 1.0,
        }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, sd) in [
            ("alpha0_sd", self.alpha0_sd),
            ("beta_sd", self.beta_sd),
            ("log_lambda_sd", self.log_lambda_sd),
        ] {
            if !(sd > 0.0) || !sd.is_finite() {
                return Err(Error::Config(format!("{name} must be positive and finite")));
            }
        }
        Ok(())
    }

    pub fn mean_params(&self) -> SkillParams {
        SkillParams {
            alpha: self.alpha0_mean,
            beta: self.beta_mean,
            lambda: self.log_lambda_mean.exp(),
        }
    }

    /// Sum of the independent log-prior densities at a point.
    pub fn log_density(&self, alpha: f64, beta: f64, lambda: f64) -> f64 {
        normal_logpdf(alpha, self.alpha0_mean, self.alpha0_sd)
            + normal_logpdf(beta, self.beta_mean, self.beta_sd)
            + normal_logpdf(lambda.ln(), self.log_lambda_mean, self.log_lambda_sd)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct QuadratureSpec {
    node_count: usize,
    span_sigmas: f64,
}

/// Symmetric trapezoid rule against the standard normal weight.
///
/// Nodes are standardized (`z` in `[-span, span]`); callers rescale them by
/// the kernel's standard deviation. Weights are renormalized to sum to one,
/// the total mass of the normal weight function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "QuadratureSpec", into = "QuadratureSpec")]
pub struct QuadratureRule {
    node_count: usize,
    span_sigmas: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    log_weights: Vec<f64>,
}

impl TryFrom<QuadratureSpec> for QuadratureRule {
    type Error = Error;

    fn try_from(spec: QuadratureSpec) -> Result<Self> {
        Self::new(spec.node_count, spec.span_sigmas)
    }
}

impl From<QuadratureRule> for QuadratureSpec {
    fn from(rule: QuadratureRule) -> Self {
        Self {
            node_count: rule.node_count,
            span_sigmas: rule.span_sigmas,
        }
    }
}

impl Default for QuadratureRule {
    fn default() -> Self {
        Self::new(21, 5.0).expect("default quadrature rule is valid")
    }
}

impl QuadratureRule {
    pub fn new(node_count: usize, span_sigmas: f64) -> Result<Self> {
        if node_count < 3 || node_count.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "quadrature node_count must be odd and >= 3, got {node_count}"
            )));
        }
        if !(span_sigmas > 0.0) || !span_sigmas.is_finite() {
            return Err(Error::Config("quadrature span_sigmas must be positive".into()));
        }
        let half = (node_count / 2) as isize;
        let h = span_sigmas / half as f64;
        let nodes: Vec<f64> = (-half..=half).map(|i| i as f64 * h).collect();
        let mut weights: Vec<f64> = nodes
            .iter()
            .map(|&z| h * (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt())
            .collect();
        weights[0] *= 0.5;
        weights[node_count - 1] *= 0.5;
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        Ok(Self {
            node_count,
            span_sigmas,
            nodes,
            weights,
            log_weights,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn span_sigmas(&self) -> f64 {
        self.span_sigmas
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `E[f(X)]` for `X ~ Normal(mean, sd^2)`.
    pub fn expectation(&self, mean: f64, sd: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(z, w)| w * f(mean + sd * z))
            .sum()
    }

    /// `log E[exp(g(X))]` for `X ~ Normal(mean, sd^2)`, evaluated with a max shift.
    fn log_expectation_exp(&self, mean: f64, sd: f64, g: impl Fn(f64) -> f64) -> f64 {
        let mut terms = [0.0f64; 64];
        let mut buf;
        let terms: &mut [f64] = if self.node_count <= terms.len() {
            &mut terms[..self.node_count]
        } else {
            buf = vec![0.0; self.node_count];
            &mut buf
        };
        let mut max = f64::NEG_INFINITY;
        for (slot, (z, lw)) in terms.iter_mut().zip(self.nodes.iter().zip(&self.log_weights)) {
            *slot = lw + g(mean + sd * z);
            max = max.max(*slot);
        }
        max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
    }
}

/// Log-likelihood of a ratio history given the proficiency at step `now`.
///
/// The observation at `now` itself is scored pointwise; invalid ratios
/// contribute nothing. An empty history has log-likelihood 0.
pub fn log_likelihood(
    history: &[ObservationRecord],
    now: u64,
    lambda: f64,
    alpha_t: f64,
    beta: f64,
    quad: &QuadratureRule,
) -> Result<f64> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(domain(format!("lambda must be positive, got {lambda}")));
    }
    if !alpha_t.is_finite() || !beta.is_finite() {
        return Err(domain("alpha_t and beta must be finite"));
    }
    let mut total = 0.0;
    for obs in history.iter().filter(|o| o.ratio.valid) {
        if obs.step > now {
            return Err(domain(format!(
                "observation at step {} lies after the estimation step {now}",
                obs.step
            )));
        }
        total += observation_log_likelihood(obs.ratio, now - obs.step, lambda, alpha_t, beta, quad);
    }
    Ok(total)
}

#[inline]
fn observation_log_likelihood(
    ratio: PerformanceRatio,
    elapsed: u64,
    lambda: f64,
    alpha_t: f64,
    beta: f64,
    quad: &QuadratureRule,
) -> f64 {
    let v = ratio.value;
    if elapsed == 0 {
        return cb_log_density(v, logistic(alpha_t - beta));
    }
    let sd = (lambda * elapsed as f64).sqrt();
    quad.log_expectation_exp(alpha_t, sd, |alpha| cb_log_density(v, logistic(alpha - beta)))
}

pub fn log_posterior(
    history: &[ObservationRecord],
    now: u64,
    lambda: f64,
    alpha_t: f64,
    beta: f64,
    prior: &PriorConfig,
    quad: &QuadratureRule,
) -> Result<f64> {
    let ll = log_likelihood(history, now, lambda, alpha_t, beta, quad)?;
    Ok(ll + prior.log_density(alpha_t, beta, lambda))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InferenceConfig {
    /// Refit lambda on every MAP call; when false it stays at its calibration value.
    pub reestimate_lambda: bool,
    /// Skip the coarse grid once calibrated and refine from the previous point.
    pub incremental_refit: bool,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            reestimate_lambda: true,
            incremental_refit: false,
            tolerance: 1e-5,
            max_iterations: 20_000,
        }
    }
}

const GRID_GAP_MIN: f64 = -6.0;
const GRID_GAP_MAX: f64 = 6.0;
const GRID_LOG_LAMBDA_MIN: f64 = -4.0;
const GRID_LOG_LAMBDA_MAX: f64 = 1.0;
const GRID_SPACING: f64 = 0.5;

/// Which parameters the optimizer may move.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Anchor {
    /// `beta` is free (calibration).
    Free,
    /// `beta` is frozen; `lambda` is optionally frozen too.
    Beta { beta: f64, lambda: Option<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapResult {
    pub params: SkillParams,
    pub log_posterior: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// MAP point over a raw history. `start` seeds the local search and skips the grid.
pub fn map_estimate_history(
    history: &[ObservationRecord],
    now: u64,
    anchor: Anchor,
    prior: &PriorConfig,
    quad: &QuadratureRule,
    cfg: &InferenceConfig,
    start: Option<SkillParams>,
) -> Result<MapResult> {
    let anchored_beta = match anchor {
        Anchor::Free => None,
        Anchor::Beta { beta, .. } => Some(beta),
    };
    let fixed_lambda = match anchor {
        Anchor::Beta { lambda, .. } => lambda,
        Anchor::Free => None,
    };
    if !history.iter().any(|o| o.ratio.valid) {
        let mut params = prior.mean_params();
        if let Some(beta) = anchored_beta {
            params.beta = beta;
        }
        if let Some(lambda) = fixed_lambda {
            params.lambda = lambda;
        }
        let lp = log_posterior(history, now, params.lambda, params.alpha, params.beta, prior, quad)?;
        return Ok(MapResult {
            params,
            log_posterior: lp,
            converged: true,
            iterations: 0,
        });
    }

    // Search coordinates: x[0] = alpha - beta, x[1] = log lambda, x[2] = beta.
    let beta0 = anchored_beta.unwrap_or(prior.beta_mean);
    let objective = |x: &[f64; 3]| -> f64 {
        let beta = anchored_beta.unwrap_or(x[2]);
        let lambda = fixed_lambda.unwrap_or_else(|| x[1].exp());
        log_posterior(history, now, lambda, x[0] + beta, beta, prior, quad)
            .unwrap_or(f64::NEG_INFINITY)
    };
    let mut free = [true, fixed_lambda.is_none(), anchored_beta.is_none()];
    if !free.iter().any(|f| *f) {
        free[0] = true;
    }

    let mut best = match start {
        Some(p) => [p.alpha - p.beta, p.lambda.ln(), p.beta],
        None => {
            let log_lambda0 = fixed_lambda.map(f64::ln).unwrap_or(prior.log_lambda_mean);
            let lambda_axis: Vec<f64> = if free[1] {
                grid_axis(GRID_LOG_LAMBDA_MIN, GRID_LOG_LAMBDA_MAX)
            } else {
                vec![log_lambda0]
            };
            let mut best = [0.0, log_lambda0, beta0];
            let mut best_val = f64::NEG_INFINITY;
            for gap in grid_axis(GRID_GAP_MIN, GRID_GAP_MAX) {
                for &ll in &lambda_axis {
                    let x = [gap, ll, beta0];
                    let val = objective(&x);
                    if val > best_val {
                        best_val = val;
                        best = x;
                    }
                }
            }
            best
        }
    };
    let mut best_val = objective(&best);
    if !best_val.is_finite() {
        return Err(domain("log posterior is not finite at the search start"));
    }

    let mut step = GRID_SPACING / 2.0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iterations {
        iterations += 1;
        let mut improved = false;
        for axis in 0..3 {
            if !free[axis] {
                continue;
            }
            for dir in [1.0, -1.0] {
                let mut cand = best;
                cand[axis] += dir * step;
                let val = objective(&cand);
                if val > best_val {
                    best = cand;
                    best_val = val;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            if step < cfg.tolerance {
                converged = true;
                break;
            }
            step *= 0.5;
        }
    }

    let beta = anchored_beta.unwrap_or(best[2]);
    let lambda = fixed_lambda.unwrap_or_else(|| best[1].exp());
    Ok(MapResult {
        params: SkillParams {
            alpha: best[0] + beta,
            beta,
            lambda,
        },
        log_posterior: best_val,
        converged,
        iterations,
    })
}

fn grid_axis(lo: f64, hi: f64) -> Vec<f64> {
    let n = ((hi - lo) / GRID_SPACING).round() as usize;
    (0..=n).map(|i| lo + i as f64 * GRID_SPACING).collect()
}

/// The teacher's belief about one sub-skill.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillBelief {
    pub subskill: SubSkillId,
    pub params: SkillParams,
    history: Vec<ObservationRecord>,
    pub last_update_step: u64,
    calibrated: bool,
    anchored_beta: Option<f64>,
    calibration_lambda: Option<f64>,
    /// Set when calibration saw no usable ratio.
    pub calibration_failed: bool,
    /// Set when the last MAP fit hit the iteration cap.
    pub not_converged: bool,
}

impl SkillBelief {
    pub fn new(subskill: SubSkillId, prior: &PriorConfig) -> Self {
        Self {
            subskill,
            params: prior.mean_params(),
            history: Vec::new(),
            last_update_step: 0,
            calibrated: false,
            anchored_beta: None,
            calibration_lambda: None,
            calibration_failed: false,
            not_converged: false,
        }
    }

    /// A calibrated belief pinned at `params` with no history.
    pub fn calibrated_at(subskill: SubSkillId, params: SkillParams) -> Self {
        Self {
            subskill,
            params,
            history: Vec::new(),
            last_update_step: 0,
            calibrated: true,
            anchored_beta: Some(params.beta),
            calibration_lambda: Some(params.lambda),
            calibration_failed: false,
            not_converged: false,
        }
    }

    pub fn history(&self) -> &[ObservationRecord] {
        &self.history
    }

    pub fn is_calibrated(&self) -> bool {
        self.calibrated
    }

    pub fn anchored_beta(&self) -> Option<f64> {
        self.anchored_beta
    }

    pub fn mastery(&self) -> f64 {
        self.params.mastery()
    }

    pub fn valid_observations(&self) -> usize {
        self.history.iter().filter(|o| o.ratio.valid).count()
    }

    /// Appends an observation. Steps must strictly increase.
    pub fn observe(&mut self, record: ObservationRecord) -> Result<()> {
        if record.subskill != self.subskill {
            return Err(domain(format!(
                "observation for sub-skill {} given to belief {}",
                record.subskill, self.subskill
            )));
        }
        if let Some(last) = self.history.last() {
            if record.step <= last.step {
                return Err(domain(format!(
                    "observation step {} does not follow {}",
                    record.step, last.step
                )));
            }
        }
        self.last_update_step = self.last_update_step.max(record.step);
        self.history.push(record);
        Ok(())
    }

    /// Moves the estimation step forward without adding evidence.
    pub fn advance_to(&mut self, now: u64) {
        self.last_update_step = self.last_update_step.max(now);
    }

    /// Pins `beta` directly, bypassing calibration.
    pub fn anchor_beta(&mut self, beta: f64) {
        self.anchored_beta = Some(beta);
        self.params.beta = beta;
    }

    fn anchor(&self, cfg: &InferenceConfig) -> Anchor {
        match self.anchored_beta {
            None => Anchor::Free,
            Some(beta) => Anchor::Beta {
                beta,
                lambda: if cfg.reestimate_lambda {
                    None
                } else {
                    self.calibration_lambda
                },
            },
        }
    }

    pub fn snapshot(&self) -> BeliefSnapshot {
        BeliefSnapshot {
            subskill: self.subskill,
            alpha: self.params.alpha,
            beta: self.params.beta,
            lambda: self.params.lambda,
            mastery: self.mastery(),
            calibrated: self.calibrated,
            history_len: self.history.len(),
        }
    }
}

/// Serialized form of a belief for logs and the session service.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeliefSnapshot {
    pub subskill: SubSkillId,
    pub alpha: f64,
    pub beta: f64,
    pub lambda: f64,
    pub mastery: f64,
    pub calibrated: bool,
    pub history_len: usize,
}

/// MAP parameters for a belief at its `last_update_step`.
///
/// An empty history returns the prior means (with the anchored `beta`, if any).
pub fn map_estimate(
    belief: &SkillBelief,
    prior: &PriorConfig,
    quad: &QuadratureRule,
    cfg: &InferenceConfig,
) -> Result<MapResult> {
    let start = (cfg.incremental_refit && belief.calibrated).then_some(belief.params);
    map_estimate_history(
        &belief.history,
        belief.last_update_step,
        belief.anchor(cfg),
        prior,
        quad,
        cfg,
        start,
    )
}

/// Refits a belief in place and returns whether the optimizer converged.
pub fn refit(
    belief: &mut SkillBelief,
    prior: &PriorConfig,
    quad: &QuadratureRule,
    cfg: &InferenceConfig,
) -> Result<bool> {
    let fit = map_estimate(belief, prior, quad, cfg)?;
    belief.params = fit.params;
    belief.not_converged = !fit.converged;
    Ok(fit.converged)
}

/// Fits all three parameters from the calibration observations and freezes `beta`.
///
/// A belief whose calibration ratios are all invalid stays uncalibrated and
/// is flagged through `calibration_failed`.
pub fn calibrate(
    belief: &SkillBelief,
    prior: &PriorConfig,
    quad: &QuadratureRule,
    cfg: &InferenceConfig,
    n_cal_observations: usize,
) -> Result<SkillBelief> {
    if n_cal_observations == 0 {
        return Err(Error::Config("calibration needs at least one observation".into()));
    }
    if belief.history.len() < n_cal_observations {
        return Err(domain(format!(
            "calibration needs {n_cal_observations} observations, belief has {}",
            belief.history.len()
        )));
    }
    let mut out = belief.clone();
    if belief.valid_observations() == 0 {
        out.calibration_failed = true;
        return Ok(out);
    }
    let fit = map_estimate_history(
        &belief.history,
        belief.last_update_step,
        Anchor::Free,
        prior,
        quad,
        cfg,
        None,
    )?;
    out.params = fit.params;
    out.not_converged = !fit.converged;
    out.anchored_beta = Some(fit.params.beta);
    out.calibration_lambda = Some(fit.params.lambda);
    out.calibrated = true;
    out.calibration_failed = false;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::skill_model::{mastery_prob, EPS_CLAMP};

    fn obs(step: u64, v: f64) -> ObservationRecord {
        ObservationRecord {
            step,
            subskill: SubSkillId(0),
            ratio: PerformanceRatio::clamped(v),
        }
    }

    fn flat_prior() -> PriorConfig {
        PriorConfig {
            alpha0_sd: 1e6,
            beta_sd: 1e6,
            log_lambda_sd: 1e6,
            ..PriorConfig::default()
        }
    }

    #[test]
    fn quadrature_rule_shape() {
        let q = QuadratureRule::default();
        assert_eq!(q.nodes().len(), 21);
        for i in 0..21 {
            assert!((q.nodes()[i] + q.nodes()[20 - i]).abs() < 1e-15);
            assert!(q.weights()[i] > 0.0);
        }
        assert!((q.weights().iter().sum::<f64>() - 1.0).abs() < 1e-14);
        assert!(QuadratureRule::new(4, 5.0).is_err());
        assert!(QuadratureRule::new(1, 5.0).is_err());
        assert!(QuadratureRule::new(5, 0.0).is_err());
    }

    #[test]
    fn quadrature_serializes_as_spec() {
        let json = serde_json::to_string(&QuadratureRule::default()).unwrap();
        assert_eq!(json, r#"{"node_count":21,"span_sigmas":5.0}"#);
        let back: QuadratureRule = serde_json::from_str(&json).unwrap();
        assert_eq!(back, QuadratureRule::default());
        assert!(serde_json::from_str::<QuadratureRule>(r#"{"node_count":2,"span_sigmas":5.0}"#).is_err());
    }

    #[test]
    fn empty_history_has_zero_log_likelihood() {
        let ll = log_likelihood(&[], 4, 0.3, 1.0, -0.5, &QuadratureRule::default()).unwrap();
        assert_eq!(ll, 0.0);
    }

    #[test]
    fn current_step_observation_is_pointwise() {
        let q = QuadratureRule::default();
        let ll = log_likelihood(&[obs(7, 0.6)], 7, 0.4, 0.8, 0.1, &q).unwrap();
        let direct = cb_log_density(0.6, mastery_prob(0.8, 0.1).unwrap());
        assert!((ll - direct).abs() < 1e-15);
    }

    #[test]
    fn invalid_ratios_contribute_nothing() {
        let q = QuadratureRule::default();
        let mut history = vec![obs(1, 0.3)];
        history.push(ObservationRecord {
            step: 2,
            subskill: SubSkillId(0),
            ratio: PerformanceRatio::invalid(),
        });
        let a = log_likelihood(&history, 3, 0.4, 0.2, 0.0, &q).unwrap();
        let b = log_likelihood(&history[..1], 3, 0.4, 0.2, 0.0, &q).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn log_likelihood_rejects_future_observations() {
        let q = QuadratureRule::default();
        assert!(log_likelihood(&[obs(5, 0.3)], 4, 0.4, 0.2, 0.0, &q).is_err());
        assert!(log_likelihood(&[obs(1, 0.3)], 4, 0.0, 0.2, 0.0, &q).is_err());
    }

    #[test]
    fn empty_history_posterior_is_log_prior() {
        let prior = PriorConfig::default();
        let q = QuadratureRule::default();
        let lp = log_posterior(&[], 3, 0.7, 0.4, -0.2, &prior, &q).unwrap();
        assert!((lp - prior.log_density(0.4, -0.2, 0.7)).abs() < 1e-15);
    }

    #[test]
    fn flat_prior_posterior_tracks_likelihood() {
        let prior = flat_prior();
        let q = QuadratureRule::default();
        let history = [obs(1, 0.2), obs(3, 0.55), obs(4, 0.7)];
        let points = [(0.1, 0.3, 0.0), (0.8, -1.0, 0.5), (2.5, 1.5, -0.7), (0.05, 0.0, 1.2)];
        let offsets: Vec<f64> = points
            .iter()
            .map(|&(lambda, alpha, beta)| {
                log_posterior(&history, 4, lambda, alpha, beta, &prior, &q).unwrap()
                    - log_likelihood(&history, 4, lambda, alpha, beta, &q).unwrap()
            })
            .collect();
        for off in &offsets {
            assert!((off - offsets[0]).abs() < 1e-6, "{offsets:?}");
        }
    }

    #[test]
    fn empty_history_map_is_prior_mean() {
        let prior = PriorConfig::default();
        let belief = SkillBelief::new(SubSkillId(1), &prior);
        let fit = map_estimate(&belief, &prior, &QuadratureRule::default(), &InferenceConfig::default())
            .unwrap();
        assert_eq!(fit.params, prior.mean_params());
    }

    #[test]
    fn map_of_empty_posterior_matches_prior_mean_by_search() {
        // With no evidence the grid + coordinate search should still land on the prior mean
        // when forced through the optimizer via an uninformative observation.
        let prior = PriorConfig {
            alpha0_mean: 0.7,
            beta_mean: -0.3,
            ..PriorConfig::default()
        };
        let q = QuadratureRule::default();
        let lp = |a: f64, b: f64, l: f64| log_posterior(&[], 0, l, a, b, &prior, &q).unwrap();
        let at_mean = lp(0.7, -0.3, prior.log_lambda_mean.exp());
        for (da, db, dl) in [(0.1, 0.0, 0.0), (0.0, -0.1, 0.0), (0.0, 0.0, 0.1)] {
            assert!(lp(0.7 + da, -0.3 + db, (prior.log_lambda_mean + dl).exp()) < at_mean);
        }
    }

    #[test]
    fn saturated_ratios_give_high_mastery() {
        let prior = PriorConfig::default();
        let q = QuadratureRule::default();
        let history: Vec<_> = (1..=50).map(|t| obs(t, 1.0 - EPS_CLAMP)).collect();
        let fit = map_estimate_history(
            &history,
            50,
            Anchor::Beta { beta: 0.0, lambda: None },
            &prior,
            &q,
            &InferenceConfig::default(),
            None,
        )
        .unwrap();
        assert!(fit.converged);
        assert!(fit.params.mastery() >= 0.9, "{:?}", fit.params);

        // brute-force grid oracle over the same posterior
        let mut best = (f64::NEG_INFINITY, 0.0);
        for i in 0..=240 {
            let alpha = -6.0 + 0.05 * i as f64;
            for j in 0..=50 {
                let lambda = (-4.0 + 0.1 * j as f64).exp();
                let v = log_posterior(&history, 50, lambda, alpha, 0.0, &prior, &q).unwrap();
                if v > best.0 {
                    best = (v, alpha);
                }
            }
        }
        assert!(fit.log_posterior >= best.0 - 1e-9);
        assert!(logistic(best.1) >= 0.9);
    }

    #[test]
    fn likelihood_is_shift_invariant() {
        let q = QuadratureRule::default();
        let history = [obs(1, 0.25), obs(2, 0.4), obs(5, 0.8)];
        for c in [-2.0, 0.5, 3.0] {
            let a = log_likelihood(&history, 5, 0.3, 0.4, -0.1, &q).unwrap();
            let b = log_likelihood(&history, 5, 0.3, 0.4 + c, -0.1 + c, &q).unwrap();
            assert!((a - b).abs() < 1e-8);
        }
    }

    /// Mean of the continuous Bernoulli with parameter `p`.
    fn cb_mean(p: f64) -> f64 {
        if (p - 0.5).abs() < 1e-6 {
            return 0.5;
        }
        p / (2.0 * p - 1.0) + 1.0 / (2.0 * (1.0 - 2.0 * p).atanh())
    }

    #[test]
    fn single_step_map_matches_mean_matching_mle() {
        let prior = flat_prior();
        let q = QuadratureRule::default();
        let values = [0.62, 0.71, 0.55, 0.8, 0.67, 0.74, 0.59, 0.69];
        let history: Vec<_> = values.iter().map(|&v| obs(9, v)).collect();
        let fit = map_estimate_history(
            &history,
            9,
            Anchor::Beta { beta: 0.0, lambda: Some(0.25) },
            &prior,
            &q,
            &InferenceConfig::default(),
            None,
        )
        .unwrap();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let (mut lo, mut hi) = (1e-9, 1.0 - 1e-9);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if cb_mean(mid) < mean {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((fit.params.mastery() - lo).abs() < 1e-4, "{} vs {lo}", fit.params.mastery());
    }

    #[test]
    fn likelihood_drops_as_ratio_moves_away_from_prediction() {
        let q = QuadratureRule::default();
        // near-MAP parameters for a mastery around 0.73
        let (alpha, beta, lambda) = (1.0, 0.0, 0.2);
        let base = [obs(1, 0.5), obs(2, 0.6), obs(3, 0.6)];
        let ll = |v: f64| {
            let mut h = base.to_vec();
            h.push(obs(4, v));
            log_likelihood(&h, 4, lambda, alpha, beta, &q).unwrap()
        };
        // the continuous Bernoulli log-density is monotone in v for p > 1/2
        assert!(ll(0.9) > ll(0.6));
        assert!(ll(0.6) > ll(0.3));
        assert!(ll(0.3) > ll(0.05));
    }

    #[test]
    fn quadrature_converges_with_node_count() {
        let history = [obs(1, 0.2), obs(2, 0.35), obs(4, 0.5), obs(7, 0.9)];
        let coarse = QuadratureRule::new(21, 5.0).unwrap();
        let fine = QuadratureRule::new(41, 5.0).unwrap();
        for (lambda, alpha, beta) in [(0.1, -1.0, 0.0), (0.5, 0.5, 0.2), (1.5, 2.0, -0.5)] {
            let a = log_likelihood(&history, 7, lambda, alpha, beta, &coarse).unwrap();
            let b = log_likelihood(&history, 7, lambda, alpha, beta, &fine).unwrap();
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn calibration_anchors_beta() {
        let prior = PriorConfig::default();
        let q = QuadratureRule::default();
        let cfg = InferenceConfig::default();
        let mut belief = SkillBelief::new(SubSkillId(0), &prior);
        for (t, v) in [(1, 0.2), (3, 0.3), (5, 0.35)] {
            belief.observe(ObservationRecord {
                step: t,
                subskill: SubSkillId(0),
                ratio: PerformanceRatio::clamped(v),
            })
            .unwrap();
        }
        let cal = calibrate(&belief, &prior, &q, &cfg, 3).unwrap();
        assert!(cal.is_calibrated());
        let beta = cal.anchored_beta().unwrap();
        assert_eq!(cal.params.beta, beta);

        let mut next = cal.clone();
        next.observe(obs(6, 0.9)).unwrap();
        refit(&mut next, &prior, &q, &cfg).unwrap();
        assert_eq!(next.params.beta, beta);
        assert!(next.mastery() > cal.mastery());
    }

    #[test]
    fn calibration_rejects_zero_and_short_histories() {
        let prior = PriorConfig::default();
        let q = QuadratureRule::default();
        let cfg = InferenceConfig::default();
        let mut belief = SkillBelief::new(SubSkillId(0), &prior);
        assert!(matches!(calibrate(&belief, &prior, &q, &cfg, 0), Err(Error::Config(_))));
        belief.observe(obs(1, 0.4)).unwrap();
        assert!(calibrate(&belief, &prior, &q, &cfg, 2).is_err());
    }

    #[test]
    fn calibration_without_valid_ratios_is_flagged() {
        let prior = PriorConfig::default();
        let q = QuadratureRule::default();
        let mut belief = SkillBelief::new(SubSkillId(0), &prior);
        for t in 1..=3 {
            belief
                .observe(ObservationRecord {
                    step: t,
                    subskill: SubSkillId(0),
                    ratio: PerformanceRatio::invalid(),
                })
                .unwrap();
        }
        let cal = calibrate(&belief, &prior, &q, &InferenceConfig::default(), 3).unwrap();
        assert!(!cal.is_calibrated());
        assert!(cal.calibration_failed);
    }

    #[test]
    fn observe_enforces_increasing_steps() {
        let mut belief = SkillBelief::new(SubSkillId(0), &PriorConfig::default());
        belief.observe(obs(2, 0.4)).unwrap();
        assert!(belief.observe(obs(2, 0.5)).is_err());
        assert!(belief.observe(obs(1, 0.5)).is_err());
        let other = ObservationRecord {
            step: 3,
            subskill: SubSkillId(1),
            ratio: PerformanceRatio::clamped(0.5),
        };
        assert!(belief.observe(other).is_err());
    }

    #[test]
    fn fixed_lambda_switch_keeps_calibration_value() {
        let prior = PriorConfig::default();
        let q = QuadratureRule::default();
        let cfg = InferenceConfig {
            reestimate_lambda: false,
            ..InferenceConfig::default()
        };
        let mut belief = SkillBelief::new(SubSkillId(0), &prior);
        for t in 1..=3 {
            belief.observe(obs(t, 0.1 * t as f64)).unwrap();
        }
        let mut cal = calibrate(&belief, &prior, &q, &cfg, 3).unwrap();
        let lambda = cal.params.lambda;
        for t in 4..=8 {
            cal.observe(obs(t, 0.9)).unwrap();
        }
        refit(&mut cal, &prior, &q, &cfg).unwrap();
        assert_eq!(cal.params.lambda, lambda);
    }

    #[test]
    fn snapshot_json_fields() {
        let belief = SkillBelief::new(SubSkillId(1), &PriorConfig::default());
        let v = serde_json::to_value(belief.snapshot()).unwrap();
        for key in ["subskill", "alpha", "beta", "lambda", "mastery", "calibrated", "history_len"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }
}
