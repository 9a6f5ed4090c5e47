//! Synthetic students: an epsilon-expert mixture policy whose competence grows
//! along an exponential learning curve each time a sub-skill is trained.

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::envs::{Actor, Agent, Assistance, ExpertPolicyBundle, SegmentContext};
use crate::error::{Error, Result};
use crate::skill_model::{PerformanceRatio, SubSkillId};

/// Ratio below which a segment counts toward giving up.
pub const GIVE_UP_RATIO: f64 = 0.1;

pub const DEFAULT_LAZY_DISCOUNT: f64 = 0.3;

/// Per-sub-skill student parameters as they appear in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentPreset {
    pub c0: Vec<f64>,
    pub eta: Vec<f64>,
    pub w: Vec<f64>,
    /// Consecutive low-ratio segments before learning stops; 0 disables.
    #[serde(default)]
    pub give_up_threshold: Vec<u32>,
}

impl StudentPreset {
    /// Equal preference for both sub-skills.
    pub fn uniform() -> Self {
        Self {
            c0: vec![0.05, 0.05],
            eta: vec![0.12, 0.12],
            w: vec![1.0, 1.0],
            give_up_threshold: vec![0, 0],
        }
    }

    /// Strong bias toward sub-skill 0.
    pub fn heterogeneous() -> Self {
        Self {
            w: vec![1.0, 0.25],
            ..Self::uniform()
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "uniform" | "default" => Ok(Self::uniform()),
            "heterogeneous" => Ok(Self::heterogeneous()),
            other => Err(Error::Config(format!("unknown student preset `{other}`"))),
        }
    }

    pub fn num_subskills(&self) -> usize {
        self.c0.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.c0.len();
        if k == 0 || self.eta.len() != k || self.w.len() != k {
            return Err(Error::Config("student preset vectors must be non-empty and of equal length".into()));
        }
        if !self.give_up_threshold.is_empty() && self.give_up_threshold.len() != k {
            return Err(Error::Config("give_up_threshold must be empty or have one entry per sub-skill".into()));
        }
        if self.c0.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::Config("c0 must lie in [0, 1]".into()));
        }
        if self.eta.iter().chain(&self.w).any(|x| !(*x >= 0.0)) {
            return Err(Error::Config("eta and w must be non-negative".into()));
        }
        if self.eta.iter().zip(&self.w).any(|(e, w)| e * w > 1.0) {
            return Err(Error::Config("eta * w must not exceed 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticStudent {
    competence: Vec<f64>,
    learn_rate: Vec<f64>,
    preference: Vec<f64>,
    give_up_threshold: Vec<u32>,
    low_streak: Vec<u32>,
    gave_up: Vec<bool>,
    lazy_discount: f64,
}

impl SyntheticStudent {
    pub fn new(preset: &StudentPreset, lazy_discount: f64) -> Result<Self> {
        preset.validate()?;
        if !(0.0..=1.0).contains(&lazy_discount) {
            return Err(Error::Config("lazy_discount must lie in [0, 1]".into()));
        }
        let k = preset.num_subskills();
        let give_up_threshold = if preset.give_up_threshold.is_empty() {
            vec![0; k]
        } else {
            preset.give_up_threshold.clone()
        };
        Ok(Self {
            competence: preset.c0.clone(),
            learn_rate: preset.eta.clone(),
            preference: preset.w.clone(),
            give_up_threshold,
            low_streak: vec![0; k],
            gave_up: vec![false; k],
            lazy_discount,
        })
    }

    pub fn num_subskills(&self) -> usize {
        self.competence.len()
    }

    pub fn competence(&self, k: SubSkillId) -> f64 {
        self.competence[k.0]
    }

    pub fn competences(&self) -> &[f64] {
        &self.competence
    }

    pub fn gave_up(&self, k: SubSkillId) -> bool {
        self.gave_up[k.0]
    }

    /// Learning rate in effect for the next training of `k`.
    pub fn effective_rate(&self, k: SubSkillId, assistance: Assistance) -> f64 {
        if self.gave_up[k.0] {
            return 0.0;
        }
        let lazy = if assistance == Assistance::Full {
            self.lazy_discount
        } else {
            1.0
        };
        self.learn_rate[k.0] * self.preference[k.0] * lazy
    }

    /// Competence increase the next training of `k` would bring.
    pub fn expected_gain(&self, k: SubSkillId, assistance: Assistance) -> f64 {
        self.effective_rate(k, assistance) * (1.0 - self.competence[k.0])
    }

    /// Applies one training segment of `k` that produced `ratio`.
    pub fn update(&mut self, k: SubSkillId, ratio: PerformanceRatio, assistance: Assistance) {
        let i = k.0;
        let rate = self.effective_rate(k, assistance);
        self.competence[i] = (self.competence[i] + rate * (1.0 - self.competence[i])).clamp(0.0, 1.0);
        if ratio.valid {
            if ratio.value < GIVE_UP_RATIO {
                self.low_streak[i] += 1;
            } else {
                self.low_streak[i] = 0;
            }
        }
        let threshold = self.give_up_threshold[i];
        if threshold > 0 && self.low_streak[i] >= threshold {
            self.gave_up[i] = true;
        }
    }

    pub fn actor(&self) -> StudentActor<'_> {
        StudentActor { student: self }
    }
}

/// Plays the trained role: the expert action with probability `c^k`, else uniform.
pub struct StudentActor<'a> {
    student: &'a SyntheticStudent,
}

impl<G: ExpertPolicyBundle> Actor<G> for StudentActor<'_> {
    fn act(&mut self, game: &G, s: &G::State, ctx: &SegmentContext, rng: &mut ChaCha8Rng) -> G::Action {
        let c = self.student.competence(ctx.subskill);
        if rng.random_bool(c) {
            game.expert_action(s, Agent::Student, ctx.student_roles)
        } else {
            *game.actions().choose(rng).expect("games have at least one action")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ratio(v: f64) -> PerformanceRatio {
        PerformanceRatio::clamped(v)
    }

    fn student(c0: f64, eta: f64, w: f64) -> SyntheticStudent {
        let preset = StudentPreset {
            c0: vec![c0, 0.3],
            eta: vec![eta, 0.5],
            w: vec![w, 1.0],
            give_up_threshold: vec![],
        };
        SyntheticStudent::new(&preset, DEFAULT_LAZY_DISCOUNT).unwrap()
    }

    #[test]
    fn update_examples() {
        let mut s = student(0.5, 0.4, 0.5);
        s.update(SubSkillId(0), ratio(0.5), Assistance::Partial);
        assert!((s.competence(SubSkillId(0)) - 0.6).abs() < 1e-15);
        assert_eq!(s.competence(SubSkillId(1)), 0.3);

        let mut done = student(1.0, 0.4, 1.0);
        done.update(SubSkillId(0), ratio(0.9), Assistance::Partial);
        assert_eq!(done.competence(SubSkillId(0)), 1.0);
    }

    #[test]
    fn lazy_discount_applies_under_full_assistance() {
        let mut a = student(0.0, 0.5, 1.0);
        let mut b = a.clone();
        a.update(SubSkillId(0), ratio(0.5), Assistance::Partial);
        b.update(SubSkillId(0), ratio(0.5), Assistance::Full);
        assert!((a.competence(SubSkillId(0)) - 0.5).abs() < 1e-15);
        assert!((b.competence(SubSkillId(0)) - 0.15).abs() < 1e-15);
    }

    #[test]
    fn gives_up_after_streak() {
        let preset = StudentPreset {
            give_up_threshold: vec![2, 0],
            ..StudentPreset::uniform()
        };
        let mut s = SyntheticStudent::new(&preset, DEFAULT_LAZY_DISCOUNT).unwrap();
        let k = SubSkillId(0);
        s.update(k, ratio(0.05), Assistance::Partial);
        s.update(k, ratio(0.5), Assistance::Partial);
        s.update(k, ratio(0.05), Assistance::Partial);
        s.update(k, PerformanceRatio::invalid(), Assistance::Partial);
        assert!(!s.gave_up(k));
        s.update(k, ratio(0.05), Assistance::Partial);
        assert!(s.gave_up(k));
        let frozen = s.competence(k);
        s.update(k, ratio(0.9), Assistance::Partial);
        assert_eq!(s.competence(k), frozen);
    }

    #[test]
    fn preset_validation() {
        assert!(StudentPreset::heterogeneous().validate().is_ok());
        let bad = StudentPreset {
            c0: vec![1.5, 0.0],
            ..StudentPreset::uniform()
        };
        assert!(bad.validate().is_err());
        let ragged = StudentPreset {
            w: vec![1.0],
            ..StudentPreset::uniform()
        };
        assert!(ragged.validate().is_err());
        assert!(StudentPreset::by_name("nope").is_err());
    }

    proptest! {
        #[test]
        fn closed_form_learning_curve(c0 in 0.0f64..1.0, eta in 0.0f64..1.0, w in 0.0f64..1.0, n in 0u32..60) {
            let mut s = student(c0, eta, w);
            for _ in 0..n {
                s.update(SubSkillId(0), ratio(0.5), Assistance::Partial);
            }
            let closed = 1.0 - (1.0 - c0) * (1.0 - eta * w).powi(n as i32);
            prop_assert!((s.competence(SubSkillId(0)) - closed).abs() < 1e-12);
        }

        #[test]
        fn competence_bounded_and_monotone(
            c0 in 0.0f64..=1.0,
            steps in prop::collection::vec((0usize..2, 0.0f64..1.0, any::<bool>()), 0..50),
        ) {
            let mut s = student(c0, 0.7, 1.0);
            for (k, v, full) in steps {
                let before = s.competences().to_vec();
                let assistance = if full { Assistance::Full } else { Assistance::Partial };
                s.update(SubSkillId(k), ratio(v), assistance);
                for (j, &prev) in before.iter().enumerate() {
                    let c = s.competence(SubSkillId(j));
                    prop_assert!((0.0..=1.0).contains(&c));
                    if j == k {
                        prop_assert!(c >= prev);
                    } else {
                        prop_assert_eq!(c, prev);
                    }
                }
            }
        }
    }
}
