//! The closed teaching loop: calibrate every sub-skill, then repeatedly refit,
//! select, train and record.

use std::io::{BufRead, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ExperimentConfig, TeacherKind};
use crate::envs::{performance_ratio, run_training_segment, AnyGame, Assistance, ExpertPolicyBundle};
use crate::error::{Error, Result};
use crate::inference::{
    calibrate, refit, BeliefSnapshot, InferenceConfig, PriorConfig, QuadratureRule, SkillBelief,
};
use crate::planner::{
    expected_gain, policy_distance, select_subskill, teaching_reward, MasteryVector, TeachingConfig,
};
use crate::seed::{derive_seed, rng_for};
use crate::skill_model::{ObservationRecord, PerformanceRatio, SubSkillId};
use crate::students::SyntheticStudent;
use crate::with_game;

const SELECT_STREAM: u64 = 3;
const SEGMENT_STREAM: u64 = 10_000;
const EVAL_STREAM: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Calibration,
    Adaptive,
}

/// How the sub-skill of a step was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    Calibration,
    ArgmaxGain,
    /// No calibrated belief was available; round-robin instead.
    Fallback,
    RoundRobin,
    Uniform,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub t: u64,
    pub phase: Phase,
    pub subskill: SubSkillId,
    pub rule: SelectionRule,
    /// Per-sub-skill gains the rule compared (belief gains or true gains).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gains: Vec<Option<f64>>,
    pub assistance: Assistance,
    pub return_student: f64,
    pub return_expert: f64,
    pub ratio: PerformanceRatio,
    pub exceeded_expert: bool,
    pub reward: f64,
    pub distance: f64,
    pub beliefs: Vec<BeliefSnapshot>,
    pub competence: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub config_hash: String,
    pub seed: u64,
    pub teacher: TeacherKind,
    pub env: String,
    pub subskills: Vec<String>,
    pub initial_mastery: Vec<f64>,
    pub initial_competence: Vec<f64>,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalMetrics {
    pub segments: usize,
    pub calibration_segments: usize,
    pub adaptive_segments: usize,
    /// Adaptive segments spent on each sub-skill.
    pub allocation: Vec<usize>,
    pub final_competence: Vec<f64>,
    pub mean_competence: f64,
    pub final_mastery: Vec<f64>,
    pub mean_mastery: f64,
    pub total_reward: f64,
    pub initial_distance: f64,
    pub final_distance: f64,
    pub fallback_selections: usize,
    pub invalid_ratios: usize,
    pub exceeded_expert: usize,
    pub not_converged_fits: usize,
    pub stopped_early: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_before: Option<Vec<Option<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_after: Option<Vec<Option<f64>>>,
}

/// A replayable record of one teaching run.
#[derive(Debug, Clone, PartialEq)]
pub struct TeachingTrace {
    pub header: TraceHeader,
    pub steps: Vec<StepTrace>,
    pub final_metrics: FinalMetrics,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum TraceLine {
    Header(Box<TraceHeader>),
    Step(Box<StepTrace>),
    Final(Box<FinalMetrics>),
}

impl TeachingTrace {
    /// Header line, one line per step, final-metrics line.
    pub fn write_jsonl(&self, mut out: impl Write) -> Result<()> {
        let mut line = |l: TraceLine| -> Result<()> {
            serde_json::to_writer(&mut out, &l)?;
            out.write_all(b"\n")?;
            Ok(())
        };
        line(TraceLine::Header(Box::new(self.header.clone())))?;
        for s in &self.steps {
            line(TraceLine::Step(Box::new(s.clone())))?;
        }
        line(TraceLine::Final(Box::new(self.final_metrics.clone())))
    }

    pub fn to_jsonl(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory cannot fail");
        buf
    }

    pub fn read_jsonl(input: impl BufRead) -> Result<Self> {
        let mut header = None;
        let mut steps = Vec::new();
        let mut final_metrics = None;
        for line in input.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str(&line)? {
                TraceLine::Header(h) => header = Some(*h),
                TraceLine::Step(s) => steps.push(*s),
                TraceLine::Final(f) => final_metrics = Some(*f),
            }
        }
        match (header, final_metrics) {
            (Some(header), Some(final_metrics)) => Ok(Self {
                header,
                steps,
                final_metrics,
            }),
            _ => Err(Error::Config("trace is missing its header or final line".into())),
        }
    }

    /// Per-step teaching rewards.
    pub fn rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.reward).collect()
    }
}

/// Mean valid ratio per sub-skill of a frozen student over `n` seeded segments.
pub fn evaluate_student<G: ExpertPolicyBundle>(
    game: &G,
    student: &SyntheticStudent,
    n: usize,
    seed: u64,
) -> Result<Vec<Option<f64>>> {
    (0..game.num_subskills())
        .map(|k| {
            let mut sum = 0.0;
            let mut count = 0usize;
            for i in 0..n {
                let seg_seed = derive_seed(seed, EVAL_STREAM + (k * n + i) as u64);
                let seg = run_training_segment(game, SubSkillId(k), Assistance::Partial, &mut student.actor(), seg_seed)?;
                let r = performance_ratio(&seg);
                if r.valid {
                    sum += r.value;
                    count += 1;
                }
            }
            Ok((count > 0).then(|| sum / count as f64))
        })
        .collect()
}

fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.into_iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// The teacher's choice for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub subskill: SubSkillId,
    pub rule: SelectionRule,
    pub gains: Vec<Option<f64>>,
}

/// Belief-side result of one observed segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feedback {
    pub reward: f64,
    pub distance: f64,
}

/// Teacher state shared by batch runs and live sessions: beliefs, the
/// selection rule of its kind, and the calibrate-then-refit schedule.
#[derive(Debug, Clone)]
pub struct Teacher {
    kind: TeacherKind,
    teaching: TeachingConfig,
    prior: PriorConfig,
    quad: QuadratureRule,
    inference: InferenceConfig,
    n_cal: usize,
    beliefs: Vec<SkillBelief>,
    mastery: MasteryVector,
    select_rng: ChaCha8Rng,
    pub fallback_selections: usize,
    pub not_converged_fits: usize,
}

impl Teacher {
    pub fn new(
        kind: TeacherKind,
        teaching: &TeachingConfig,
        prior: &PriorConfig,
        quad: &QuadratureRule,
        inference: &InferenceConfig,
        num_subskills: usize,
        seed: u64,
    ) -> Result<Self> {
        teaching.validate(num_subskills)?;
        prior.validate()?;
        let beliefs: Vec<SkillBelief> = (0..num_subskills)
            .map(|k| SkillBelief::new(SubSkillId(k), prior))
            .collect();
        Ok(Self {
            kind,
            teaching: *teaching,
            prior: *prior,
            quad: quad.clone(),
            inference: *inference,
            n_cal: teaching.calibration_segments(num_subskills),
            mastery: MasteryVector::from_beliefs(&beliefs),
            beliefs,
            select_rng: rng_for(seed, SELECT_STREAM),
            fallback_selections: 0,
            not_converged_fits: 0,
        })
    }

    pub fn kind(&self) -> TeacherKind {
        self.kind
    }

    pub fn num_subskills(&self) -> usize {
        self.beliefs.len()
    }

    pub fn calibration_segments(&self) -> usize {
        self.n_cal
    }

    pub fn horizon(&self) -> usize {
        self.teaching.horizon
    }

    pub fn phase(&self, t: u64) -> Phase {
        if t as usize <= self.n_cal {
            Phase::Calibration
        } else {
            Phase::Adaptive
        }
    }

    pub fn beliefs(&self) -> &[SkillBelief] {
        &self.beliefs
    }

    pub fn snapshots(&self) -> Vec<BeliefSnapshot> {
        self.beliefs.iter().map(SkillBelief::snapshot).collect()
    }

    pub fn mastery(&self) -> &MasteryVector {
        &self.mastery
    }

    /// Picks the sub-skill for step `t` (1-based). Only the oracle reads `truth`.
    pub fn select(&mut self, t: u64, truth: Option<&SyntheticStudent>) -> Result<Selection> {
        let k_count = self.beliefs.len();
        let round_robin = SubSkillId((t as usize - 1) % k_count);
        let assistance = self.kind.assistance();
        let mut gains = Vec::new();
        let (subskill, rule) = match (self.phase(t), self.kind) {
            (Phase::Calibration, _) => (round_robin, SelectionRule::Calibration),
            (_, TeacherKind::StudentAware) => {
                gains = self.beliefs.iter().map(|b| expected_gain(b, &self.quad).ok()).collect();
                match select_subskill(&self.beliefs, &self.quad) {
                    Ok(k) => (k, SelectionRule::ArgmaxGain),
                    Err(Error::NoCalibratedSubSkill) => {
                        self.fallback_selections += 1;
                        (round_robin, SelectionRule::Fallback)
                    }
                    Err(e) => return Err(e),
                }
            }
            (_, TeacherKind::FullyAssistive) => (round_robin, SelectionRule::RoundRobin),
            (_, TeacherKind::RandomSubskill | TeacherKind::RandomAction) => (
                SubSkillId(self.select_rng.random_range(0..k_count)),
                SelectionRule::Uniform,
            ),
            (_, TeacherKind::Oracle) => {
                let student =
                    truth.ok_or_else(|| Error::Config("the oracle teacher needs the true student".into()))?;
                let true_gains: Vec<f64> = (0..k_count)
                    .map(|j| student.expected_gain(SubSkillId(j), assistance))
                    .collect();
                let k = argmax(true_gains.iter().copied());
                gains = true_gains.into_iter().map(Some).collect();
                (SubSkillId(k), SelectionRule::Oracle)
            }
        };
        Ok(Selection { subskill, rule, gains })
    }

    /// Records the ratio of step `t`, then calibrates or refits the beliefs.
    pub fn observe(&mut self, t: u64, k: SubSkillId, ratio: PerformanceRatio) -> Result<Feedback> {
        let (prior, quad, inf) = (&self.prior, &self.quad, &self.inference);
        let n_cal_obs = self.teaching.calibration;
        self.beliefs[k.0].observe(ObservationRecord { step: t, subskill: k, ratio })?;
        if t as usize == self.n_cal {
            for b in self.beliefs.iter_mut() {
                b.advance_to(t);
                *b = calibrate(b, prior, quad, inf, n_cal_obs)?;
                self.not_converged_fits += b.not_converged as usize;
            }
        } else if t as usize > self.n_cal {
            for b in self.beliefs.iter_mut() {
                b.advance_to(t);
                if b.is_calibrated() {
                    self.not_converged_fits += !refit(b, prior, quad, inf)? as usize;
                } else if b.valid_observations() > 0 {
                    // A sub-skill whose calibration saw no usable ratio is
                    // calibrated as soon as evidence arrives.
                    *b = calibrate(b, prior, quad, inf, n_cal_obs)?;
                }
            }
        }
        let next = MasteryVector::from_beliefs(&self.beliefs);
        let reward = teaching_reward(&self.mastery, &next, &self.teaching)?;
        let distance = policy_distance(&next)?;
        self.mastery = next;
        Ok(Feedback { reward, distance })
    }
}

/// Runs one teaching loop of `teacher` against a fresh student.
pub fn run_teaching_loop<G: ExpertPolicyBundle>(
    game: &G,
    config: &ExperimentConfig,
    teacher: TeacherKind,
    seed: u64,
) -> Result<TeachingTrace> {
    let k_count = game.num_subskills();
    let preset = config.student.resolve()?;
    if preset.num_subskills() != k_count {
        return Err(Error::Config(format!(
            "student has {} sub-skills, {} has {k_count}",
            preset.num_subskills(),
            game.name()
        )));
    }
    let mut student = SyntheticStudent::new(&preset, config.lazy_discount)?;
    let mut policy = Teacher::new(
        teacher,
        &config.teaching,
        &config.prior,
        &config.quadrature,
        &config.inference,
        k_count,
        seed,
    )?;
    let assistance = teacher.assistance();
    let header = TraceHeader {
        config_hash: config.hash(),
        seed,
        teacher,
        env: game.name().to_string(),
        subskills: (0..k_count).map(|k| game.subskill_name(SubSkillId(k)).to_string()).collect(),
        initial_mastery: policy.mastery().0.clone(),
        initial_competence: student.competences().to_vec(),
        config: config.clone(),
    };
    let eval_before = (config.n_eval_segments > 0)
        .then(|| evaluate_student(game, &student, config.n_eval_segments, seed))
        .transpose()?;

    let horizon = config.teaching.horizon;
    let mut steps = Vec::with_capacity(horizon);
    let mut allocation = vec![0; k_count];
    let mut stopped_early = false;

    for t in 1..=horizon as u64 {
        let phase = policy.phase(t);
        let Selection { subskill: k, rule, gains } = policy.select(t, Some(&student))?;
        if phase == Phase::Adaptive {
            allocation[k.0] += 1;
        }

        let seg_seed = segment_seed(seed, t);
        let seg = run_training_segment(game, k, assistance, &mut student.actor(), seg_seed)?;
        let ratio = performance_ratio(&seg);
        student.update(k, ratio, assistance);
        let Feedback { reward, distance } = policy.observe(t, k, ratio)?;

        let trajectory = config
            .record_trajectories
            .then(|| serde_json::to_value(&seg.trajectory))
            .transpose()?;
        steps.push(StepTrace {
            t,
            phase,
            subskill: k,
            rule,
            gains,
            assistance,
            return_student: seg.return_student,
            return_expert: seg.return_expert,
            ratio,
            exceeded_expert: seg.exceeded_expert(),
            reward,
            distance,
            beliefs: policy.snapshots(),
            competence: student.competences().to_vec(),
            trajectory,
        });

        if let Some(threshold) = config.teaching.early_stop_mastery {
            if student.competences().iter().all(|&c| c > threshold) {
                stopped_early = true;
                break;
            }
        }
    }

    let eval_after = (config.n_eval_segments > 0)
        .then(|| evaluate_student(game, &student, config.n_eval_segments, seed))
        .transpose()?;
    let final_competence = student.competences().to_vec();
    let mastery = policy.mastery();
    let calibration_segments = steps.iter().filter(|s| s.phase == Phase::Calibration).count();
    let final_metrics = FinalMetrics {
        segments: steps.len(),
        calibration_segments,
        adaptive_segments: steps.len() - calibration_segments,
        allocation,
        mean_competence: final_competence.iter().sum::<f64>() / k_count as f64,
        final_competence,
        mean_mastery: 1.0 - policy_distance(mastery)?,
        final_mastery: mastery.0.clone(),
        total_reward: steps.iter().map(|s| s.reward).sum(),
        initial_distance: policy_distance(&MasteryVector(header.initial_mastery.clone()))?,
        final_distance: policy_distance(mastery)?,
        fallback_selections: policy.fallback_selections,
        invalid_ratios: steps.iter().filter(|s| !s.ratio.valid).count(),
        exceeded_expert: steps.iter().filter(|s| s.exceeded_expert).count(),
        not_converged_fits: policy.not_converged_fits,
        stopped_early,
        eval_before,
        eval_after,
    };
    Ok(TeachingTrace {
        header,
        steps,
        final_metrics,
    })
}

/// Seed of the training segment at teaching step `t`; shared by every teacher kind.
pub fn segment_seed(seed: u64, t: u64) -> u64 {
    derive_seed(seed, SEGMENT_STREAM + t)
}

/// Builds the configured game and runs one loop.
pub fn run_seed(config: &ExperimentConfig, teacher: TeacherKind, seed: u64) -> Result<TeachingTrace> {
    let game = AnyGame::new(&config.env.0)?;
    with_game!(&game, g => run_teaching_loop(g, config, teacher, seed))
}

/// Re-runs a trace from its recorded config and seed; true when byte-identical.
pub fn replay_matches(trace: &TeachingTrace) -> Result<bool> {
    let again = run_seed(&trace.header.config, trace.header.teacher, trace.header.seed)?;
    Ok(again.to_jsonl() == trace.to_jsonl())
}
