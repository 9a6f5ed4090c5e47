//! Teacher decision rule: one-step lookahead on expected mastery gain.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::inference::{QuadratureRule, SkillBelief};
use crate::skill_model::{logistic, SubSkillId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TeachingConfig {
    /// Cost weight.
    pub omega: f64,
    pub cost_per_action: f64,
    /// Teaching discount.
    pub gamma_bar: f64,
    /// Total number of segments `L`.
    pub horizon: usize,
    /// Calibration segments per sub-skill `N`.
    pub calibration: usize,
    /// Stop once every true competence exceeds this value. Off by default.
    #[serde(default)]
    pub early_stop_mastery: Option<f64>,
}

impl Default for TeachingConfig {
    fn default() -> Self {
        Self {
            omega: 0.0,
            cost_per_action: 1.0,
            gamma_bar: 1.0,
            horizon: 20,
            calibration: 3,
            early_stop_mastery: None,
        }
    }
}

impl TeachingConfig {
    pub fn validate(&self, num_subskills: usize) -> Result<()> {
        if num_subskills == 0 {
            return Err(Error::Config("at least one sub-skill is required".into()));
        }
        if !(self.omega >= 0.0) || !(self.cost_per_action >= 0.0) {
            return Err(Error::Config("omega and cost_per_action must be non-negative".into()));
        }
        if !(self.gamma_bar > 0.0 && self.gamma_bar <= 1.0) {
            return Err(Error::Config("gamma_bar must lie in (0, 1]".into()));
        }
        if self.calibration == 0 {
            return Err(Error::Config("calibration must be at least 1".into()));
        }
        if self.horizon < num_subskills * self.calibration {
            return Err(Error::Config(format!(
                "horizon {} is shorter than the {} calibration segments",
                self.horizon,
                num_subskills * self.calibration
            )));
        }
        Ok(())
    }

    pub fn calibration_segments(&self, num_subskills: usize) -> usize {
        num_subskills * self.calibration
    }
}

/// Mastery probability per sub-skill.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MasteryVector(pub Vec<f64>);

impl MasteryVector {
    pub fn from_beliefs(beliefs: &[SkillBelief]) -> Self {
        Self(beliefs.iter().map(SkillBelief::mastery).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Mean of `1 - p_k`.
/// Distances are rounded to multiples of this, so per-step rewards and their
/// running sums are exact in floating point and telescope bit for bit.
pub const DISTANCE_QUANTUM: f64 = 1.0 / (1u64 << 40) as f64;

pub fn policy_distance(m: &MasteryVector) -> Result<f64> {
    if m.is_empty() {
        return Err(domain("policy distance of an empty mastery vector"));
    }
    let d = m.0.iter().map(|p| 1.0 - p).sum::<f64>() / m.len() as f64;
    Ok((d / DISTANCE_QUANTUM).round() * DISTANCE_QUANTUM)
}

pub fn teaching_reward(before: &MasteryVector, after: &MasteryVector, cfg: &TeachingConfig) -> Result<f64> {
    if before.len() != after.len() {
        return Err(domain(format!(
            "mastery vectors differ in size: {} vs {}",
            before.len(),
            after.len()
        )));
    }
    Ok(policy_distance(before)? - policy_distance(after)? - cfg.omega * cfg.cost_per_action)
}

/// Gaussian-smoothed one-step change in mastery, `E[logistic(a' - beta)] - logistic(alpha - beta)`
/// with `a' ~ Normal(alpha, lambda)`.
pub fn expected_gain(belief: &SkillBelief, quad: &QuadratureRule) -> Result<f64> {
    if !belief.is_calibrated() {
        return Err(Error::Uncalibrated(belief.subskill));
    }
    let p = belief.params;
    Ok(lookahead_gain(p.alpha - p.beta, p.lambda, quad))
}

pub(crate) fn lookahead_gain(gap: f64, lambda: f64, quad: &QuadratureRule) -> f64 {
    quad.expectation(gap, lambda.sqrt(), logistic) - logistic(gap)
}

/// Calibrated sub-skill with the largest expected gain; ties go to the lowest index.
pub fn select_subskill(beliefs: &[SkillBelief], quad: &QuadratureRule) -> Result<SubSkillId> {
    let mut best: Option<(SubSkillId, f64)> = None;
    for belief in beliefs.iter().filter(|b| b.is_calibrated()) {
        let gain = expected_gain(belief, quad)?;
        match best {
            Some((_, g)) if gain <= g => {}
            _ => best = Some((belief.subskill, gain)),
        }
    }
    best.map(|(k, _)| k).ok_or(Error::NoCalibratedSubSkill)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::{PriorConfig, SkillBelief};
    use crate::skill_model::SkillParams;
    use proptest::prelude::*;

    pub(crate) fn calibrated(k: usize, gap: f64, lambda: f64, beta: f64) -> SkillBelief {
        SkillBelief::calibrated_at(SubSkillId(k), SkillParams { alpha: beta + gap, beta, lambda })
    }

    #[test]
    fn distance_examples() {
        let near_one = MasteryVector(vec![1.0 - 1e-12; 3]);
        assert!(policy_distance(&near_one).unwrap().abs() < 1e-9);
        assert!((policy_distance(&MasteryVector(vec![0.2, 0.6])).unwrap() - 0.6).abs() <= DISTANCE_QUANTUM);
        assert_eq!(policy_distance(&MasteryVector(vec![0.5])).unwrap(), 0.5);
        assert!(policy_distance(&MasteryVector(vec![])).is_err());
    }

    #[test]
    fn reward_examples() {
        let cfg = TeachingConfig::default();
        let m = MasteryVector(vec![0.4, 0.4]);
        assert_eq!(teaching_reward(&m, &m, &cfg).unwrap(), 0.0);
        let r = teaching_reward(&m, &MasteryVector(vec![0.5, 0.4]), &cfg).unwrap();
        assert!((r - 0.05).abs() <= DISTANCE_QUANTUM);
        assert!(teaching_reward(&m, &MasteryVector(vec![0.5]), &cfg).is_err());
        let costly = TeachingConfig { omega: 0.5, cost_per_action: 0.1, ..cfg };
        assert!((teaching_reward(&m, &m, &costly).unwrap() + 0.05).abs() < 1e-15);
    }

    #[test]
    fn gain_is_zero_at_difficulty() {
        let q = QuadratureRule::default();
        for lambda in [0.1, 1.0, 4.0] {
            let g = expected_gain(&calibrated(0, 0.0, lambda, 0.7), &q).unwrap();
            assert!(g.abs() < 1e-6, "{g}");
        }
    }

    #[test]
    fn gain_requires_calibration() {
        let b = SkillBelief::new(SubSkillId(0), &PriorConfig::default());
        assert!(matches!(expected_gain(&b, &QuadratureRule::default()), Err(Error::Uncalibrated(_))));
        assert!(matches!(select_subskill(&[b], &QuadratureRule::default()), Err(Error::NoCalibratedSubSkill)));
    }

    #[test]
    fn gain_vanishes_with_lambda() {
        let q = QuadratureRule::default();
        for gap in [-3.0, -0.5, 1.0, 2.5] {
            let g = expected_gain(&calibrated(0, gap, 1e-10, 0.0), &q).unwrap();
            assert!(g.abs() < 1e-9);
        }
    }

    #[test]
    fn selection_examples() {
        let q = QuadratureRule::default();
        assert_eq!(select_subskill(&[calibrated(0, 2.0, 0.3, 0.0)], &q).unwrap(), SubSkillId(0));
        let pair = [calibrated(0, -1.0, 1.0, 0.0), calibrated(1, 1.0, 1.0, 0.0)];
        assert_eq!(select_subskill(&pair, &q).unwrap(), SubSkillId(0));
        let twins = [calibrated(0, -0.4, 0.5, 0.2), calibrated(1, -0.4, 0.5, 0.2)];
        assert_eq!(select_subskill(&twins, &q).unwrap(), SubSkillId(0));
    }

    #[test]
    fn selection_skips_uncalibrated() {
        let q = QuadratureRule::default();
        let uncal = SkillBelief::new(SubSkillId(0), &PriorConfig::default());
        let beliefs = [uncal, calibrated(1, 2.0, 0.5, 0.0)];
        assert_eq!(select_subskill(&beliefs, &q).unwrap(), SubSkillId(1));
    }

    #[test]
    fn config_validation() {
        let cfg = TeachingConfig::default();
        assert!(cfg.validate(2).is_ok());
        assert!(TeachingConfig { horizon: 5, ..cfg }.validate(2).is_err());
        assert!(TeachingConfig { calibration: 0, ..cfg }.validate(2).is_err());
        assert!(TeachingConfig { gamma_bar: 0.0, ..cfg }.validate(2).is_err());
        assert!(TeachingConfig { omega: -1.0, ..cfg }.validate(2).is_err());
    }

    proptest! {
        #[test]
        fn telescoping(traj in prop::collection::vec(prop::collection::vec(0.001f64..0.999, 3), 2..30)) {
            let cfg = TeachingConfig::default();
            let ms: Vec<MasteryVector> = traj.into_iter().map(MasteryVector).collect();
            let total: f64 = ms.windows(2).map(|w| teaching_reward(&w[0], &w[1], &cfg).unwrap()).sum();
            let direct = policy_distance(&ms[0]).unwrap() - policy_distance(ms.last().unwrap()).unwrap();
            prop_assert_eq!(total, direct);
        }

        #[test]
        fn selection_invariant_to_joint_shift(
            g0 in -4.0f64..4.0, g1 in -4.0f64..4.0,
            l0 in 0.05f64..3.0, l1 in 0.05f64..3.0,
            shift in -5.0f64..5.0,
        ) {
            let q = QuadratureRule::default();
            let a = [calibrated(0, g0, l0, 0.0), calibrated(1, g1, l1, 0.3)];
            let b = [calibrated(0, g0, l0, shift), calibrated(1, g1, l1, 0.3 + shift)];
            prop_assert_eq!(select_subskill(&a, &q).unwrap(), select_subskill(&b, &q).unwrap());
        }

        #[test]
        fn gain_sign_follows_gap(gap in 0.05f64..6.0, lambda in 0.05f64..3.0) {
            let q = QuadratureRule::default();
            prop_assert!(expected_gain(&calibrated(0, -gap, lambda, 0.0), &q).unwrap() > 0.0);
            prop_assert!(expected_gain(&calibrated(0, gap, lambda, 0.0), &q).unwrap() < 0.0);
        }
    }
}
