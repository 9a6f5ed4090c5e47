//! Live teaching sessions with a human in the student's seat.
//!
//! A session plays one segment at a time, one human action per call. Beliefs
//! change only at segment boundaries, when the caller advances the session.

use std::io::Write;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::envs::{
    performance_ratio, run_expert_segment, run_training_segment, teacher_action, Actor, AnyGame, Assistance,
    ExpertPolicyBundle, SegmentContext, TEACHER_STREAM,
};
use crate::error::{Error, Result};
use crate::harness::teaching::{segment_seed, Feedback, Phase, Selection, SelectionRule, Teacher};
use crate::harness::{EnvChoice, TeacherKind};
use crate::inference::{BeliefSnapshot, InferenceConfig, PriorConfig, QuadratureRule};
use crate::planner::TeachingConfig;
use crate::seed::{derive_seed, rng_for};
use crate::skill_model::{PerformanceRatio, SubSkillId};

const EVAL_STREAM: u64 = 2_000_000;

fn default_teacher() -> TeacherKind {
    TeacherKind::StudentAware
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub env: EnvChoice,
    #[serde(default = "default_teacher")]
    pub teacher: TeacherKind,
    #[serde(default)]
    pub teaching: TeachingConfig,
    #[serde(default)]
    pub prior: PriorConfig,
    #[serde(default)]
    pub quadrature: QuadratureRule,
    #[serde(default)]
    pub inference: InferenceConfig,
    #[serde(default)]
    pub seed: u64,
    /// Show mastery estimates to the player.
    #[serde(default)]
    pub reveal_beliefs: bool,
    /// Frozen evaluation segments per sub-skill after training.
    #[serde(default)]
    pub eval_segments: usize,
}

impl SessionConfig {
    pub fn new(env: &str, teacher: TeacherKind) -> Result<Self> {
        Ok(Self {
            env: EnvChoice(crate::envs::EnvSpec::builtin(env)?),
            teacher,
            teaching: TeachingConfig::default(),
            prior: PriorConfig::default(),
            quadrature: QuadratureRule::default(),
            inference: InferenceConfig::default(),
            seed: 0,
            reveal_beliefs: false,
            eval_segments: 0,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionPhase {
    Calibrating,
    Training,
    Evaluating,
    Done,
}

/// Step-wise play of one game, object-safe so sessions can hold either env.
pub trait LiveGame: Send {
    fn name(&self) -> &'static str;
    fn num_subskills(&self) -> usize;
    fn subskill_name(&self, k: SubSkillId) -> &'static str;
    fn segment_length(&self) -> usize;
    fn action_names(&self) -> Vec<String>;
    fn idle_action_name(&self) -> &'static str;
    /// Resets to the seeded start state of a segment.
    fn start(&mut self, k: SubSkillId, assistance: Assistance, seed: u64);
    /// Plays the teacher's move and the named student move; returns the step reward.
    fn step(&mut self, action: &str) -> Result<f64>;
    fn view(&self) -> serde_json::Value;
    fn expert_return(&self, k: SubSkillId, assistance: Assistance, seed: u64) -> Result<f64>;
}

struct Live<G: ExpertPolicyBundle> {
    game: G,
    ctx: SegmentContext,
    state: G::State,
    teacher_rng: ChaCha8Rng,
}

impl<G> LiveGame for Live<G>
where
    G: ExpertPolicyBundle + Send,
    G::State: Send,
{
    fn name(&self) -> &'static str {
        self.game.name()
    }

    fn num_subskills(&self) -> usize {
        self.game.num_subskills()
    }

    fn subskill_name(&self, k: SubSkillId) -> &'static str {
        self.game.subskill_name(k)
    }

    fn segment_length(&self) -> usize {
        self.game.segment_length()
    }

    fn action_names(&self) -> Vec<String> {
        self.game.actions().iter().map(|&a| self.game.action_name(a).to_string()).collect()
    }

    fn idle_action_name(&self) -> &'static str {
        self.game.action_name(self.game.idle_action())
    }

    fn start(&mut self, k: SubSkillId, assistance: Assistance, seed: u64) {
        // Mirrors the batch rollout: same start state and teacher stream.
        self.ctx = SegmentContext::new(self.game.num_subskills(), k, assistance);
        self.state = self.game.initial_state(seed, self.ctx.student_roles);
        self.teacher_rng = rng_for(seed, TEACHER_STREAM);
    }

    fn step(&mut self, action: &str) -> Result<f64> {
        let a2 = self.game.parse_action(action)?;
        let a1 = teacher_action(&self.game, &self.state, &self.ctx, &mut self.teacher_rng);
        let (next, r) = self.game.step(&self.state, a1, a2)?;
        self.state = next;
        Ok(r)
    }

    fn view(&self) -> serde_json::Value {
        self.game.view(&self.state)
    }

    fn expert_return(&self, k: SubSkillId, assistance: Assistance, seed: u64) -> Result<f64> {
        run_expert_segment(&self.game, k, assistance, seed)
    }
}

fn live<G>(game: G) -> Box<dyn LiveGame>
where
    G: ExpertPolicyBundle + Send + 'static,
    G::State: Send,
{
    let ctx = SegmentContext::new(game.num_subskills(), SubSkillId(0), Assistance::Partial);
    let state = game.initial_state(0, ctx.student_roles);
    Box::new(Live {
        game,
        ctx,
        state,
        teacher_rng: rng_for(0, TEACHER_STREAM),
    })
}

pub fn live_game(choice: &EnvChoice) -> Result<Box<dyn LiveGame>> {
    Ok(match AnyGame::new(&choice.0)? {
        AnyGame::Kitchen(g) => live(g),
        AnyGame::Tilt(g) => live(g),
    })
}

/// One finished segment as it appears in the session trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentLog {
    /// Teaching step for calibration/training, evaluation index otherwise.
    pub t: u64,
    pub phase: SessionPhase,
    pub subskill: SubSkillId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<SelectionRule>,
    pub assistance: Assistance,
    pub seed: u64,
    pub actions: Vec<String>,
    /// Indices of steps whose action was filled in by the timeout.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub timeouts: Vec<usize>,
    pub return_student: f64,
    pub return_expert: f64,
    pub ratio: PerformanceRatio,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward: Option<f64>,
    pub beliefs: Vec<BeliefSnapshot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentProgress {
    /// 1-based index within the current phase.
    pub index: usize,
    pub of: usize,
    pub t: u64,
    pub subskill: SubSkillId,
    pub subskill_name: String,
    pub step: usize,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub env: String,
    pub teacher: TeacherKind,
    pub phase: SessionPhase,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segment: Option<SegmentProgress>,
    /// True once the segment's last action is in and the session waits for `advance`.
    pub awaiting_advance: bool,
    pub legal_actions: Vec<String>,
    pub board: serde_json::Value,
    pub segment_return: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mastery: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub reward: f64,
    pub timed_out: bool,
    pub view: SessionView,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NextSegment {
    pub subskill: SubSkillId,
    pub subskill_name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<SelectionRule>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryOutcome {
    pub completed: SegmentSummary,
    pub phase: SessionPhase,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub next: Option<NextSegment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beliefs: Option<Vec<BeliefSnapshot>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSummary {
    pub t: u64,
    pub subskill: SubSkillId,
    pub ratio: PerformanceRatio,
    pub return_student: f64,
    pub return_expert: f64,
}

struct Current {
    t: u64,
    subskill: SubSkillId,
    rule: Option<SelectionRule>,
    assistance: Assistance,
    seed: u64,
    actions: Vec<String>,
    timeouts: Vec<usize>,
    ret: f64,
}

pub struct Session {
    config: SessionConfig,
    game: Box<dyn LiveGame>,
    teacher: Teacher,
    phase: SessionPhase,
    current: Option<Current>,
    log: Vec<SegmentLog>,
}

impl Session {
    pub fn new(config: SessionConfig) -> Result<Self> {
        if config.teacher == TeacherKind::Oracle {
            return Err(Error::Config("the oracle teacher needs a synthetic student".into()));
        }
        let game = live_game(&config.env)?;
        let teacher = Teacher::new(
            config.teacher,
            &config.teaching,
            &config.prior,
            &config.quadrature,
            &config.inference,
            game.num_subskills(),
            config.seed,
        )?;
        let mut session = Self {
            config,
            game,
            teacher,
            phase: SessionPhase::Calibrating,
            current: None,
            log: Vec::new(),
        };
        session.begin_teaching_step(1)?;
        Ok(session)
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn phase(&self) -> SessionPhase {
        self.phase
    }

    pub fn log(&self) -> &[SegmentLog] {
        &self.log
    }

    pub fn beliefs(&self) -> Vec<BeliefSnapshot> {
        self.teacher.snapshots()
    }

    fn begin_teaching_step(&mut self, t: u64) -> Result<Option<NextSegment>> {
        let seed = segment_seed(self.config.seed, t);
        let Selection { subskill, rule, .. } = self.teacher.select(t, None)?;
        self.phase = teaching_phase(self.teacher.phase(t));
        let assistance = self.config.teacher.assistance();
        Ok(Some(self.begin_segment(t, subskill, Some(rule), assistance, seed)))
    }

    fn begin_segment(
        &mut self,
        t: u64,
        subskill: SubSkillId,
        rule: Option<SelectionRule>,
        assistance: Assistance,
        seed: u64,
    ) -> NextSegment {
        self.game.start(subskill, assistance, seed);
        self.current = Some(Current {
            t,
            subskill,
            rule,
            assistance,
            seed,
            actions: Vec::new(),
            timeouts: Vec::new(),
            ret: 0.0,
        });
        NextSegment {
            subskill,
            subskill_name: self.game.subskill_name(subskill).to_string(),
            rule,
        }
    }

    fn eval_total(&self) -> usize {
        self.config.eval_segments * self.game.num_subskills()
    }

    fn begin_eval(&mut self, i: u64) -> Option<NextSegment> {
        self.phase = SessionPhase::Evaluating;
        let k = SubSkillId((i as usize - 1) / self.config.eval_segments);
        let seed = derive_seed(self.config.seed, EVAL_STREAM + i);
        Some(self.begin_segment(i, k, None, Assistance::Partial, seed))
    }

    fn segment_full(&self) -> bool {
        self.current
            .as_ref()
            .is_some_and(|c| c.actions.len() >= self.game.segment_length())
    }

    pub fn view(&self) -> SessionView {
        let segment = self.current.as_ref().map(|c| {
            let n_cal = self.teacher.calibration_segments();
            let (index, of) = match self.phase {
                SessionPhase::Calibrating => (c.t as usize, n_cal),
                SessionPhase::Training => (c.t as usize - n_cal, self.teacher.horizon() - n_cal),
                _ => (c.t as usize, self.eval_total()),
            };
            SegmentProgress {
                index,
                of,
                t: c.t,
                subskill: c.subskill,
                subskill_name: self.game.subskill_name(c.subskill).to_string(),
                step: c.actions.len(),
                steps: self.game.segment_length(),
            }
        });
        let awaiting_advance = self.segment_full();
        SessionView {
            env: self.game.name().to_string(),
            teacher: self.config.teacher,
            phase: self.phase,
            segment,
            awaiting_advance,
            legal_actions: if self.current.is_some() && !awaiting_advance {
                self.game.action_names()
            } else {
                Vec::new()
            },
            board: self.game.view(),
            segment_return: self.current.as_ref().map_or(0.0, |c| c.ret),
            mastery: self.config.reveal_beliefs.then(|| self.teacher.mastery().0.clone()),
        }
    }

    fn play(&mut self, action: &str, timed_out: bool) -> Result<StepOutcome> {
        if self.phase == SessionPhase::Done {
            return Err(Error::Conflict("the session is finished".into()));
        }
        if self.segment_full() {
            return Err(Error::Conflict("the segment is complete; advance the session first".into()));
        }
        let r = self.game.step(action)?;
        let c = self.current.as_mut().expect("an active phase has a segment");
        if timed_out {
            c.timeouts.push(c.actions.len());
        }
        c.actions.push(action.to_string());
        c.ret += r;
        Ok(StepOutcome {
            reward: r,
            timed_out,
            view: self.view(),
        })
    }

    /// One student action by name.
    pub fn post_action(&mut self, action: &str) -> Result<StepOutcome> {
        self.play(action, false)
    }

    /// Plays the idle action for a player who did not answer in time.
    pub fn timeout(&mut self) -> Result<StepOutcome> {
        let idle = self.game.idle_action_name();
        self.play(idle, true)
    }

    /// Whether a timeout step would be accepted right now.
    pub fn expects_action(&self) -> bool {
        self.phase != SessionPhase::Done && self.current.is_some() && !self.segment_full()
    }

    /// Closes the finished segment: scores it, updates beliefs and starts the next one.
    pub fn advance(&mut self) -> Result<BoundaryOutcome> {
        if self.phase == SessionPhase::Done {
            return Err(Error::Conflict("the session is finished".into()));
        }
        if !self.segment_full() {
            let c = self.current.as_ref().expect("an active phase has a segment");
            return Err(Error::Conflict(format!(
                "segment has {} of {} actions",
                c.actions.len(),
                self.game.segment_length()
            )));
        }
        let c = self.current.take().expect("checked above");
        let return_expert = self.game.expert_return(c.subskill, c.assistance, c.seed)?;
        let ratio = ratio_of(c.ret, return_expert);
        let finished_phase = self.phase;
        let reward = if finished_phase == SessionPhase::Evaluating {
            None
        } else {
            let Feedback { reward, .. } = self.teacher.observe(c.t, c.subskill, ratio)?;
            Some(reward)
        };
        self.log.push(SegmentLog {
            t: c.t,
            phase: finished_phase,
            subskill: c.subskill,
            rule: c.rule,
            assistance: c.assistance,
            seed: c.seed,
            actions: c.actions,
            timeouts: c.timeouts,
            return_student: c.ret,
            return_expert,
            ratio,
            reward,
            beliefs: self.teacher.snapshots(),
        });

        let next = match finished_phase {
            SessionPhase::Calibrating | SessionPhase::Training if (c.t as usize) < self.teacher.horizon() => {
                self.begin_teaching_step(c.t + 1)?
            }
            SessionPhase::Calibrating | SessionPhase::Training if self.eval_total() > 0 => self.begin_eval(1),
            SessionPhase::Evaluating if (c.t as usize) < self.eval_total() => self.begin_eval(c.t + 1),
            _ => {
                self.phase = SessionPhase::Done;
                None
            }
        };
        Ok(BoundaryOutcome {
            completed: SegmentSummary {
                t: c.t,
                subskill: c.subskill,
                ratio,
                return_student: c.ret,
                return_expert,
            },
            phase: self.phase,
            next,
            beliefs: self.config.reveal_beliefs.then(|| self.teacher.snapshots()),
        })
    }

    /// Header line, then one line per finished segment.
    pub fn write_trace_jsonl(&self, mut out: impl Write) -> Result<()> {
        #[derive(Serialize)]
        #[serde(tag = "type", rename_all = "snake_case")]
        enum Line<'a> {
            Header {
                config: &'a SessionConfig,
                env: &'a str,
                phase: SessionPhase,
            },
            Segment(&'a SegmentLog),
        }
        serde_json::to_writer(
            &mut out,
            &Line::Header {
                config: &self.config,
                env: self.game.name(),
                phase: self.phase,
            },
        )?;
        out.write_all(b"\n")?;
        for seg in &self.log {
            serde_json::to_writer(&mut out, &Line::Segment(seg))?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

fn teaching_phase(p: Phase) -> SessionPhase {
    match p {
        Phase::Calibration => SessionPhase::Calibrating,
        Phase::Adaptive => SessionPhase::Training,
    }
}

fn ratio_of(student: f64, expert: f64) -> PerformanceRatio {
    if expert > 0.0 {
        PerformanceRatio::clamped(student / expert)
    } else {
        PerformanceRatio::invalid()
    }
}

/// Plays a recorded action list, one action per call.
struct ScriptedActor<'a, G: ExpertPolicyBundle> {
    actions: std::slice::Iter<'a, G::Action>,
}

impl<G: ExpertPolicyBundle> Actor<G> for ScriptedActor<'_, G> {
    fn act(&mut self, game: &G, _s: &G::State, _ctx: &SegmentContext, _rng: &mut ChaCha8Rng) -> G::Action {
        self.actions.next().copied().unwrap_or_else(|| game.idle_action())
    }
}

fn replay_with<G: ExpertPolicyBundle>(
    game: &G,
    config: &SessionConfig,
    segments: &[Vec<String>],
) -> Result<Vec<SegmentLog>> {
    let mut teacher = Teacher::new(
        config.teacher,
        &config.teaching,
        &config.prior,
        &config.quadrature,
        &config.inference,
        game.num_subskills(),
        config.seed,
    )?;
    let horizon = teacher.horizon();
    let mut out = Vec::with_capacity(segments.len());
    for (i, names) in segments.iter().enumerate() {
        let actions = names
            .iter()
            .map(|n| game.parse_action(n))
            .collect::<Result<Vec<_>>>()?;
        let mut actor = ScriptedActor::<G> { actions: actions.iter() };
        let (t, phase, subskill, rule, assistance, seed) = if i < horizon {
            let t = i as u64 + 1;
            let sel = teacher.select(t, None)?;
            let phase = teaching_phase(teacher.phase(t));
            (t, phase, sel.subskill, Some(sel.rule), config.teacher.assistance(), segment_seed(config.seed, t))
        } else {
            let e = (i - horizon) as u64 + 1;
            let k = SubSkillId((e as usize - 1) / config.eval_segments.max(1));
            let seed = derive_seed(config.seed, EVAL_STREAM + e);
            (e, SessionPhase::Evaluating, k, None, Assistance::Partial, seed)
        };
        let seg = run_training_segment(game, subskill, assistance, &mut actor, seed)?;
        let ratio = performance_ratio(&seg);
        let reward = if phase == SessionPhase::Evaluating {
            None
        } else {
            Some(teacher.observe(t, subskill, ratio)?.reward)
        };
        out.push(SegmentLog {
            t,
            phase,
            subskill,
            rule,
            assistance,
            seed,
            actions: names.clone(),
            timeouts: Vec::new(),
            return_student: seg.return_student,
            return_expert: seg.return_expert,
            ratio,
            reward,
            beliefs: teacher.snapshots(),
        });
    }
    Ok(out)
}

/// Re-runs recorded per-segment action lists through the batch segment runner.
///
/// Independent of the live stepping path; a session's log and its replay must
/// agree field for field (timeout markers aside).
pub fn replay(config: &SessionConfig, segments: &[Vec<String>]) -> Result<Vec<SegmentLog>> {
    let game = AnyGame::new(&config.env.0)?;
    crate::with_game!(&game, g => replay_with(g, config, segments))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> SessionConfig {
        let mut cfg = SessionConfig::new("tilt_maze", TeacherKind::StudentAware).unwrap();
        cfg.teaching.horizon = 8;
        cfg
    }

    #[test]
    fn starts_in_calibration() {
        let s = Session::new(small_config()).unwrap();
        let v = s.view();
        assert_eq!(v.phase, SessionPhase::Calibrating);
        let seg = v.segment.unwrap();
        assert_eq!((seg.index, seg.of), (1, 6));
        assert!(v.mastery.is_none());
        assert_eq!(v.legal_actions, vec!["left", "stay", "right"]);
    }

    #[test]
    fn phase_errors() {
        let mut s = Session::new(small_config()).unwrap();
        assert!(matches!(s.advance(), Err(Error::Conflict(_))));
        assert!(matches!(s.post_action("jump"), Err(Error::InvalidAction { .. })));
        for _ in 0..30 {
            s.post_action("stay").unwrap();
        }
        assert!(matches!(s.post_action("stay"), Err(Error::Conflict(_))));
        s.advance().unwrap();
    }

    #[test]
    fn full_session_matches_replay() {
        let mut cfg = small_config();
        cfg.eval_segments = 1;
        cfg.reveal_beliefs = true;
        let mut s = Session::new(cfg.clone()).unwrap();
        let names = ["left", "right", "stay", "right", "right"];
        let mut i = 0;
        while s.phase() != SessionPhase::Done {
            while s.expects_action() {
                if i % 7 == 3 {
                    s.timeout().unwrap();
                } else {
                    s.post_action(names[i % names.len()]).unwrap();
                }
                i += 1;
            }
            s.advance().unwrap();
        }
        assert_eq!(s.log().len(), 10);
        let recorded: Vec<Vec<String>> = s.log().iter().map(|l| l.actions.clone()).collect();
        let replayed = replay(&cfg, &recorded).unwrap();
        for (live, again) in s.log().iter().zip(&replayed) {
            let mut live = live.clone();
            live.timeouts.clear();
            assert_eq!(&live, again);
        }
        assert!(matches!(s.post_action("stay"), Err(Error::Conflict(_))));
    }
}
