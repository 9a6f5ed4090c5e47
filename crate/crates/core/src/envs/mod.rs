//! Two-player cooperative games, role-based sub-skills and segment rollouts.
//!
//! Agent 0 is always the teacher (`a1`), agent 1 the student (`a2`). A
//! sub-skill is a role; during a training segment the student holds the
//! role being trained and the teacher covers the rest.

pub mod kitchen;
pub mod layout;
pub mod tilt_maze;

use std::fmt::Debug;
use std::io::Write;

use rand::seq::IndexedRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_for;
use crate::skill_model::{PerformanceRatio, SubSkillId};

pub use kitchen::KitchenLite;
pub use layout::{EnvSpec, KitchenLayout, TiltLayout};
pub use tilt_maze::TiltMaze;

/// A concrete game built from an [`EnvSpec`].
#[derive(Debug, Clone)]
pub enum AnyGame {
    Kitchen(KitchenLite),
    Tilt(TiltMaze),
}

impl AnyGame {
    pub fn new(spec: &EnvSpec) -> Result<Self> {
        Ok(match spec {
            EnvSpec::KitchenLite(l) => AnyGame::Kitchen(KitchenLite::new(l.clone())?),
            EnvSpec::TiltMaze(l) => AnyGame::Tilt(TiltMaze::new(l.clone())?),
        })
    }
}

/// Runs `$body` with `$g` bound to the concrete game inside an [`AnyGame`].
#[macro_export]
macro_rules! with_game {
    ($game:expr, $g:ident => $body:expr) => {
        match $game {
            $crate::envs::AnyGame::Kitchen($g) => $body,
            $crate::envs::AnyGame::Tilt($g) => $body,
        }
    };
}

const STUDENT_STREAM: u64 = 1;
pub(crate) const TEACHER_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Agent {
    Teacher,
    Student,
}

impl Agent {
    pub fn index(self) -> usize {
        match self {
            Agent::Teacher => 0,
            Agent::Student => 1,
        }
    }

    pub fn other(self) -> Agent {
        match self {
            Agent::Teacher => Agent::Student,
            Agent::Student => Agent::Teacher,
        }
    }
}

/// Set of sub-skills (roles) held by one agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RoleSet(u32);

impl RoleSet {
    pub const EMPTY: RoleSet = RoleSet(0);

    pub fn single(k: SubSkillId) -> Self {
        RoleSet(1 << k.0)
    }

    pub fn all(num_subskills: usize) -> Self {
        RoleSet(((1u64 << num_subskills) - 1) as u32)
    }

    pub fn complement(self, num_subskills: usize) -> Self {
        RoleSet(!self.0 & Self::all(num_subskills).0)
    }

    pub fn contains(self, k: SubSkillId) -> bool {
        k.0 < 32 && self.0 & (1 << k.0) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = SubSkillId> {
        (0..32).filter(move |i| self.0 & (1 << i) != 0).map(SubSkillId)
    }
}

/// A deterministic two-player cooperative Markov game.
pub trait MarkovGame {
    type State: Clone + Debug + PartialEq + Serialize;
    type Action: Copy + Debug + PartialEq + Serialize;

    fn name(&self) -> &'static str;
    fn actions(&self) -> &[Self::Action];
    fn action_name(&self, a: Self::Action) -> &'static str;
    fn num_subskills(&self) -> usize;
    fn subskill_name(&self, k: SubSkillId) -> &'static str;
    /// Steps per training segment.
    fn segment_length(&self) -> usize;
    fn gamma(&self) -> f64;
    fn idle_action(&self) -> Self::Action;

    /// Seeded start state for a segment in which the student holds `student_roles`.
    fn initial_state(&self, seed: u64, student_roles: RoleSet) -> Self::State;

    fn step(&self, s: &Self::State, a1: Self::Action, a2: Self::Action) -> Result<(Self::State, f64)>;

    /// JSON view of a state for clients.
    fn view(&self, s: &Self::State) -> serde_json::Value;

    fn parse_action(&self, name: &str) -> Result<Self::Action> {
        self.actions()
            .iter()
            .copied()
            .find(|&a| self.action_name(a) == name)
            .ok_or_else(|| Error::InvalidAction {
                given: name.to_string(),
                legal: self.actions().iter().map(|&a| self.action_name(a).to_string()).collect(),
            })
    }
}

/// Scripted experts for every role, plus the role attribution of actions.
pub trait ExpertPolicyBundle: MarkovGame {
    /// Expert action for `agent` when it is responsible for `roles`.
    fn expert_action(&self, s: &Self::State, agent: Agent, roles: RoleSet) -> Self::Action;

    /// Sub-skill whose responsibility `a` exercises in `s`, if any.
    fn responsibility(&self, s: &Self::State, agent: Agent, a: Self::Action) -> Option<SubSkillId>;
}

/// What the teacher does during a training segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assistance {
    /// Expert on every role except the trained one.
    Partial,
    /// Expert on the whole task, the student's role included.
    Full,
    /// Uniform over actions that do not touch the trained role.
    RandomActions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentContext {
    pub subskill: SubSkillId,
    pub student_roles: RoleSet,
    pub teacher_roles: RoleSet,
    pub assistance: Assistance,
}

impl SegmentContext {
    pub fn new(num_subskills: usize, subskill: SubSkillId, assistance: Assistance) -> Self {
        let student_roles = RoleSet::single(subskill);
        let teacher_roles = match assistance {
            Assistance::Full => RoleSet::all(num_subskills),
            _ => student_roles.complement(num_subskills),
        };
        Self {
            subskill,
            student_roles,
            teacher_roles,
            assistance,
        }
    }
}

/// Picks the student's action each step.
pub trait Actor<G: ExpertPolicyBundle> {
    fn act(&mut self, game: &G, s: &G::State, ctx: &SegmentContext, rng: &mut ChaCha8Rng) -> G::Action;
}

pub struct ExpertActor;

impl<G: ExpertPolicyBundle> Actor<G> for ExpertActor {
    fn act(&mut self, game: &G, s: &G::State, ctx: &SegmentContext, _rng: &mut ChaCha8Rng) -> G::Action {
        game.expert_action(s, Agent::Student, ctx.student_roles)
    }
}

pub struct NoOpActor;

impl<G: ExpertPolicyBundle> Actor<G> for NoOpActor {
    fn act(&mut self, game: &G, _s: &G::State, _ctx: &SegmentContext, _rng: &mut ChaCha8Rng) -> G::Action {
        game.idle_action()
    }
}

pub struct RandomActor;

impl<G: ExpertPolicyBundle> Actor<G> for RandomActor {
    fn act(&mut self, game: &G, _s: &G::State, _ctx: &SegmentContext, rng: &mut ChaCha8Rng) -> G::Action {
        *game.actions().choose(rng).expect("games have at least one action")
    }
}

/// The teacher's action under the segment's assistance mode.
pub fn teacher_action<G: ExpertPolicyBundle>(
    game: &G,
    s: &G::State,
    ctx: &SegmentContext,
    rng: &mut ChaCha8Rng,
) -> G::Action {
    match ctx.assistance {
        Assistance::Partial | Assistance::Full => game.expert_action(s, Agent::Teacher, ctx.teacher_roles),
        Assistance::RandomActions => {
            let allowed: Vec<G::Action> = game
                .actions()
                .iter()
                .copied()
                .filter(|&a| game.responsibility(s, Agent::Teacher, a) != Some(ctx.subskill))
                .collect();
            allowed.choose(rng).copied().unwrap_or_else(|| game.idle_action())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord<S, A> {
    pub t: usize,
    pub s: S,
    pub a1: A,
    pub a2: A,
    pub r: f64,
    /// Sub-skill the teacher's action exercised, if any.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub teacher_responsibility: Option<SubSkillId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentResult<S, A> {
    pub subskill: SubSkillId,
    pub assistance: Assistance,
    /// Undiscounted segment return with the student acting.
    pub return_student: f64,
    /// Same start state and seed with the expert in the student's seat.
    pub return_expert: f64,
    pub steps: usize,
    pub trajectory: Vec<StepRecord<S, A>>,
}

impl<S, A> SegmentResult<S, A> {
    pub fn exceeded_expert(&self) -> bool {
        self.return_expert > 0.0 && self.return_student > self.return_expert
    }
}

/// Student-to-expert return ratio; invalid when the expert earned nothing.
pub fn performance_ratio<S, A>(seg: &SegmentResult<S, A>) -> PerformanceRatio {
    if seg.return_expert > 0.0 {
        PerformanceRatio::clamped(seg.return_student / seg.return_expert)
    } else {
        PerformanceRatio::invalid()
    }
}

struct Rollout<S, A> {
    ret: f64,
    trajectory: Vec<StepRecord<S, A>>,
}

fn rollout<G: ExpertPolicyBundle>(
    game: &G,
    ctx: &SegmentContext,
    student: &mut dyn Actor<G>,
    seed: u64,
    steps: usize,
) -> Result<Rollout<G::State, G::Action>> {
    let mut student_rng = rng_for(seed, STUDENT_STREAM);
    let mut teacher_rng = rng_for(seed, TEACHER_STREAM);
    let mut s = game.initial_state(seed, ctx.student_roles);
    let mut ret = 0.0;
    let mut trajectory = Vec::with_capacity(steps);
    for t in 0..steps {
        let a1 = teacher_action(game, &s, ctx, &mut teacher_rng);
        let a2 = student.act(game, &s, ctx, &mut student_rng);
        let teacher_responsibility = game.responsibility(&s, Agent::Teacher, a1);
        let (next, r) = game.step(&s, a1, a2)?;
        ret += r;
        trajectory.push(StepRecord {
            t,
            s,
            a1,
            a2,
            r,
            teacher_responsibility,
        });
        s = next;
    }
    Ok(Rollout { ret, trajectory })
}

/// Return of the expert-in-the-student-seat rollout for `(subskill, seed)`.
pub fn run_expert_segment<G: ExpertPolicyBundle>(
    game: &G,
    subskill: SubSkillId,
    assistance: Assistance,
    seed: u64,
) -> Result<f64> {
    let ctx = SegmentContext::new(game.num_subskills(), subskill, assistance);
    Ok(rollout(game, &ctx, &mut ExpertActor, seed, game.segment_length())?.ret)
}

/// One training segment on `subskill` plus its seed-matched expert counterfactual.
pub fn run_training_segment<G: ExpertPolicyBundle>(
    game: &G,
    subskill: SubSkillId,
    assistance: Assistance,
    student: &mut dyn Actor<G>,
    seed: u64,
) -> Result<SegmentResult<G::State, G::Action>> {
    if subskill.0 >= game.num_subskills() {
        return Err(Error::Domain(format!(
            "sub-skill {subskill} out of range for {} with {} sub-skills",
            game.name(),
            game.num_subskills()
        )));
    }
    let ctx = SegmentContext::new(game.num_subskills(), subskill, assistance);
    let steps = game.segment_length();
    let played = rollout(game, &ctx, student, seed, steps)?;
    let return_expert = run_expert_segment(game, subskill, assistance, seed)?;
    Ok(SegmentResult {
        subskill,
        assistance,
        return_student: played.ret,
        return_expert,
        steps,
        trajectory: played.trajectory,
    })
}

/// Writes one JSON object per step: `t, s, a1, a2, r`.
pub fn write_trajectory_jsonl<S: Serialize, A: Serialize>(
    mut out: impl Write,
    trajectory: &[StepRecord<S, A>],
) -> Result<()> {
    #[derive(Serialize)]
    struct Line<'a, S, A> {
        t: usize,
        s: &'a S,
        a1: &'a A,
        a2: &'a A,
        r: f64,
    }
    for rec in trajectory {
        let line = Line {
            t: rec.t,
            s: &rec.s,
            a1: &rec.a1,
            a2: &rec.a2,
            r: rec.r,
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(student: f64, expert: f64) -> SegmentResult<(), ()> {
        SegmentResult {
            subskill: SubSkillId(0),
            assistance: Assistance::Partial,
            return_student: student,
            return_expert: expert,
            steps: 1,
            trajectory: vec![],
        }
    }

    #[test]
    fn ratio_examples() {
        let r = performance_ratio(&seg(60.0, 80.0));
        assert!(r.valid && (r.value - 0.75).abs() < 1e-15);
        let high = seg(100.0, 80.0);
        assert_eq!(performance_ratio(&high).value, 0.999);
        assert!(high.exceeded_expert());
        assert!(!performance_ratio(&seg(0.0, 0.0)).valid);
        assert!(!performance_ratio(&seg(10.0, -10.0)).valid);
        assert_eq!(performance_ratio(&seg(-10.0, 10.0)).value, 0.001);
    }

    #[test]
    fn role_sets() {
        let r = RoleSet::single(SubSkillId(1));
        assert!(r.contains(SubSkillId(1)) && !r.contains(SubSkillId(0)));
        assert_eq!(r.complement(2), RoleSet::single(SubSkillId(0)));
        assert_eq!(RoleSet::all(2).iter().count(), 2);
        assert!(RoleSet::EMPTY.is_empty());
    }
}
