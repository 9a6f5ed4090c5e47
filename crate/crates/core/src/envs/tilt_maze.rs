//! tilt-maze: two players tilt a 1-D board to roll a ball out of the designated exit.
//!
//! The ball moves one cell in the direction of `a1 + a2` whenever the sum is
//! non-zero, so one player can move it alone if the other holds still, and
//! opposing tilts stall it. Sub-skill 0 is leading (knowing where to go),
//! sub-skill 1 is following (echoing the leader's previous tilt).

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::layout::TiltLayout;
use super::{Agent, ExpertPolicyBundle, MarkovGame, RoleSet};
use crate::error::{Error, Result};
use crate::seed::derive_seed;
use crate::skill_model::SubSkillId;

pub const LEADING: SubSkillId = SubSkillId(0);
pub const FOLLOWING: SubSkillId = SubSkillId(1);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TiltAction {
    Left,
    Stay,
    Right,
}

impl TiltAction {
    pub const ALL: [TiltAction; 3] = [TiltAction::Left, TiltAction::Stay, TiltAction::Right];

    pub fn value(self) -> i8 {
        match self {
            TiltAction::Left => -1,
            TiltAction::Stay => 0,
            TiltAction::Right => 1,
        }
    }

    fn from_value(v: i8) -> Self {
        match v.signum() {
            -1 => TiltAction::Left,
            1 => TiltAction::Right,
            _ => TiltAction::Stay,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TiltState {
    pub ball: u8,
    /// Designated exit: -1 for the left end, +1 for the right end.
    pub exit: i8,
    pub episode: u32,
    /// Previous tilts, teacher first.
    pub prev: [i8; 2],
    pub leader: Agent,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct TiltMaze {
    layout: TiltLayout,
}

impl TiltMaze {
    pub fn new(layout: TiltLayout) -> Result<Self> {
        if layout.width < 3 || layout.width > 255 {
            return Err(Error::Config("tilt-maze width must be between 3 and 255".into()));
        }
        if layout.segment_length == 0 {
            return Err(Error::Config("segment_length must be positive".into()));
        }
        if !(layout.gamma > 0.0 && layout.gamma <= 1.0) {
            return Err(Error::Config("gamma must lie in (0, 1]".into()));
        }
        Ok(Self { layout })
    }

    pub fn width(&self) -> usize {
        self.layout.width
    }

    fn center(&self) -> u8 {
        (self.layout.width / 2) as u8
    }

    fn exit_for(seed: u64, episode: u32) -> i8 {
        if derive_seed(seed, 1000 + episode as u64) & 1 == 0 {
            -1
        } else {
            1
        }
    }
}

impl MarkovGame for TiltMaze {
    type State = TiltState;
    type Action = TiltAction;

    fn name(&self) -> &'static str {
        "tilt_maze"
    }

    fn actions(&self) -> &[TiltAction] {
        &TiltAction::ALL
    }

    fn action_name(&self, a: TiltAction) -> &'static str {
        match a {
            TiltAction::Left => "left",
            TiltAction::Stay => "stay",
            TiltAction::Right => "right",
        }
    }

    fn num_subskills(&self) -> usize {
        2
    }

    fn subskill_name(&self, k: SubSkillId) -> &'static str {
        match k {
            LEADING => "leading the rotation",
            FOLLOWING => "following the rotation",
            _ => "unknown",
        }
    }

    fn segment_length(&self) -> usize {
        self.layout.segment_length
    }

    fn gamma(&self) -> f64 {
        self.layout.gamma
    }

    fn idle_action(&self) -> TiltAction {
        TiltAction::Stay
    }

    /// The student leads whenever it holds the leading role.
    fn initial_state(&self, seed: u64, student_roles: RoleSet) -> TiltState {
        TiltState {
            ball: self.center(),
            exit: Self::exit_for(seed, 0),
            episode: 0,
            prev: [0, 0],
            leader: if student_roles.contains(LEADING) {
                Agent::Student
            } else {
                Agent::Teacher
            },
            seed,
        }
    }

    fn step(&self, s: &TiltState, a1: TiltAction, a2: TiltAction) -> Result<(TiltState, f64)> {
        let last = self.layout.width as u8 - 1;
        if s.ball == 0 || s.ball >= last {
            return Err(Error::Domain(format!("ball at {} is outside the board interior", s.ball)));
        }
        let mut n = s.clone();
        let mut r = -self.layout.rewards.step_cost;
        let push = (a1.value() + a2.value()).signum();
        n.ball = (n.ball as i16 + push as i16) as u8;
        n.prev = [a1.value(), a2.value()];
        if n.ball == 0 || n.ball == last {
            let side = if n.ball == 0 { -1 } else { 1 };
            r += if side == s.exit {
                self.layout.rewards.exit
            } else {
                -self.layout.rewards.exit
            };
            n.episode += 1;
            n.ball = self.center();
            n.exit = Self::exit_for(s.seed, n.episode);
            n.prev = [0, 0];
        }
        Ok((n, r))
    }

    fn view(&self, s: &TiltState) -> serde_json::Value {
        json!({
            "env": self.name(),
            "width": self.layout.width,
            "ball": s.ball,
            "exit": if s.exit < 0 { "left" } else { "right" },
            "episode": s.episode,
            "leader": s.leader,
            "prev": { "teacher": s.prev[0], "student": s.prev[1] },
        })
    }
}

impl ExpertPolicyBundle for TiltMaze {
    /// The leader tilts toward the exit; the follower repeats its partner's previous tilt.
    fn expert_action(&self, s: &TiltState, agent: Agent, roles: RoleSet) -> TiltAction {
        if roles.contains(LEADING) {
            TiltAction::from_value(s.exit)
        } else if roles.contains(FOLLOWING) {
            TiltAction::from_value(s.prev[agent.other().index()])
        } else {
            TiltAction::Stay
        }
    }

    fn responsibility(&self, s: &TiltState, agent: Agent, _a: TiltAction) -> Option<SubSkillId> {
        Some(if agent == s.leader { LEADING } else { FOLLOWING })
    }
}
