//! Closed-loop teaching runs, teacher baselines and batch experiments.

pub mod experiment;
pub mod recovery;
pub mod stats;
pub mod teaching;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::envs::{Assistance, EnvSpec};
use crate::error::{Error, Result};
use crate::inference::{InferenceConfig, PriorConfig, QuadratureRule};
use crate::planner::TeachingConfig;
use crate::students::{StudentPreset, DEFAULT_LAZY_DISCOUNT};

pub use experiment::{compare_teachers, ExperimentReport};
pub use teaching::{evaluate_student, run_seed, run_teaching_loop, TeachingTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TeacherKind {
    /// Belief-driven one-step lookahead.
    StudentAware,
    /// Round-robin sub-skills; the teacher also covers the student's role.
    FullyAssistive,
    /// Uniformly random sub-skill, expert complement.
    RandomSubskill,
    /// Uniformly random sub-skill and random teacher actions.
    RandomAction,
    /// Argmax of the true competence gain.
    Oracle,
}

impl TeacherKind {
    pub const ALL: [TeacherKind; 5] = [
        TeacherKind::StudentAware,
        TeacherKind::FullyAssistive,
        TeacherKind::RandomSubskill,
        TeacherKind::RandomAction,
        TeacherKind::Oracle,
    ];

    pub fn assistance(self) -> Assistance {
        match self {
            TeacherKind::FullyAssistive => Assistance::Full,
            TeacherKind::RandomAction => Assistance::RandomActions,
            _ => Assistance::Partial,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TeacherKind::StudentAware => "student_aware",
            TeacherKind::FullyAssistive => "fully_assistive",
            TeacherKind::RandomSubskill => "random_subskill",
            TeacherKind::RandomAction => "random_action",
            TeacherKind::Oracle => "oracle",
        }
    }
}

impl fmt::Display for TeacherKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TeacherKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown teacher kind `{s}`")))
    }
}

/// Half-open seed range `start..end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRange {
    pub start: u64,
    pub end: u64,
}

impl SeedRange {
    pub fn seeds(&self) -> Vec<u64> {
        (self.start..self.end).collect()
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Default for SeedRange {
    fn default() -> Self {
        Self { start: 0, end: 100 }
    }
}

impl FromStr for SeedRange {
    type Err = Error;

    /// Parses `A..B`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("seed range `{s}` is not of the form A..B"));
        let (a, b) = s.split_once("..").ok_or_else(bad)?;
        let start = a.trim().parse().map_err(|_| bad())?;
        let end = b.trim().parse().map_err(|_| bad())?;
        if end <= start {
            return Err(Error::Config(format!("seed range `{s}` is empty")));
        }
        Ok(Self { start, end })
    }
}

/// Environment: a bundled layout name or an inline layout document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "serde_json::Value", into = "serde_json::Value")]
pub struct EnvChoice(pub EnvSpec);

impl TryFrom<serde_json::Value> for EnvChoice {
    type Error = Error;

    fn try_from(v: serde_json::Value) -> Result<Self> {
        match v {
            serde_json::Value::String(name) => EnvSpec::builtin(&name).map(EnvChoice),
            other => EnvSpec::from_json(&other.to_string()).map(EnvChoice),
        }
    }
}

impl From<EnvChoice> for serde_json::Value {
    fn from(c: EnvChoice) -> Self {
        let text = c.0.to_json().expect("layouts serialize");
        serde_json::from_str(&text).expect("serialized layout is valid JSON")
    }
}

/// Student parameters: a preset name or explicit vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StudentChoice {
    Named(String),
    Explicit(StudentPreset),
}

impl StudentChoice {
    pub fn resolve(&self) -> Result<StudentPreset> {
        match self {
            StudentChoice::Named(name) => StudentPreset::by_name(name),
            StudentChoice::Explicit(p) => Ok(p.clone()),
        }
    }
}

fn default_lazy() -> f64 {
    DEFAULT_LAZY_DISCOUNT
}

fn default_teachers() -> Vec<TeacherKind> {
    TeacherKind::ALL.to_vec()
}

fn default_resamples() -> usize {
    2000
}

/// Everything needed to reproduce a run or a batch of runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub env: EnvChoice,
    #[serde(default)]
    pub teaching: TeachingConfig,
    pub student: StudentChoice,
    #[serde(default = "default_lazy")]
    pub lazy_discount: f64,
    #[serde(default)]
    pub prior: PriorConfig,
    #[serde(default)]
    pub quadrature: QuadratureRule,
    #[serde(default)]
    pub inference: InferenceConfig,
    #[serde(default = "default_teachers")]
    pub teachers: Vec<TeacherKind>,
    #[serde(default)]
    pub seeds: SeedRange,
    /// Frozen-student evaluation segments per sub-skill before and after teaching.
    #[serde(default)]
    pub n_eval_segments: usize,
    /// Keep per-step game trajectories in traces.
    #[serde(default)]
    pub record_trajectories: bool,
    #[serde(default = "default_resamples")]
    pub bootstrap_resamples: usize,
    #[serde(default)]
    pub bootstrap_seed: u64,
}

impl ExperimentConfig {
    pub fn new(env: EnvSpec, student: StudentPreset) -> Self {
        Self {
            env: EnvChoice(env),
            teaching: TeachingConfig::default(),
            student: StudentChoice::Explicit(student),
            lazy_discount: DEFAULT_LAZY_DISCOUNT,
            prior: PriorConfig::default(),
            quadrature: QuadratureRule::default(),
            inference: InferenceConfig::default(),
            teachers: default_teachers(),
            seeds: SeedRange::default(),
            n_eval_segments: 0,
            record_trajectories: false,
            bootstrap_resamples: default_resamples(),
            bootstrap_seed: 0,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let preset = self.student.resolve()?;
        preset.validate()?;
        self.prior.validate()?;
        // Both bundled games have two sub-skills; the teaching config is
        // checked against the game when a run starts.
        self.teaching.validate(preset.num_subskills())?;
        if self.teachers.is_empty() {
            return Err(Error::Config("at least one teacher kind is required".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seed range is empty".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }
}
