//! kitchen-lite: a small two-cook soup kitchen.
//!
//! Sub-skill 0 is potting (onions from the pile into the pot), sub-skill 1 is
//! delivery (dish, plate the cooked soup, serve it). A middle counter row with
//! one gap separates the onion pile from the pot; onions can be staged on
//! those counters and picked up from the other side.

use std::collections::VecDeque;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::layout::KitchenLayout;
use super::{Agent, ExpertPolicyBundle, MarkovGame, RoleSet};
use crate::error::{Error, Result};
use crate::seed::rng_for;
use crate::skill_model::SubSkillId;

pub const POTTING: SubSkillId = SubSkillId(0);
pub const DELIVERY: SubSkillId = SubSkillId(1);

const START_STREAM: u64 = 0;

/// Grid position `(x, y)`, `y` growing downwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pos(pub u8, pub u8);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dir {
    Up,
    Down,
    Left,
    Right,
}

impl Dir {
    const ALL: [Dir; 4] = [Dir::Up, Dir::Down, Dir::Left, Dir::Right];

    fn delta(self) -> (i32, i32) {
        match self {
            Dir::Up => (0, -1),
            Dir::Down => (0, 1),
            Dir::Left => (-1, 0),
            Dir::Right => (1, 0),
        }
    }

    fn action(self) -> KitchenAction {
        match self {
            Dir::Up => KitchenAction::Up,
            Dir::Down => KitchenAction::Down,
            Dir::Left => KitchenAction::Left,
            Dir::Right => KitchenAction::Right,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Item {
    Onion,
    Dish,
    Soup,
}

impl Item {
    fn role(self) -> SubSkillId {
        match self {
            Item::Onion => POTTING,
            Item::Dish | Item::Soup => DELIVERY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum Pot {
    Filling { onions: u8 },
    Cooking { remaining: u8 },
    Ready,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chef {
    pub pos: Pos,
    pub facing: Dir,
    pub held: Option<Item>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KitchenState {
    /// Teacher first, student second.
    pub chefs: [Chef; 2],
    pub pot: Pot,
    /// Item on each counter, in layout order (row-major).
    pub counters: Vec<Option<Item>>,
    pub delivered: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KitchenAction {
    Up,
    Down,
    Left,
    Right,
    Interact,
    Stay,
}

impl KitchenAction {
    pub const ALL: [KitchenAction; 6] = [
        KitchenAction::Up,
        KitchenAction::Down,
        KitchenAction::Left,
        KitchenAction::Right,
        KitchenAction::Interact,
        KitchenAction::Stay,
    ];

    fn dir(self) -> Option<Dir> {
        match self {
            KitchenAction::Up => Some(Dir::Up),
            KitchenAction::Down => Some(Dir::Down),
            KitchenAction::Left => Some(Dir::Left),
            KitchenAction::Right => Some(Dir::Right),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tile {
    Wall,
    Floor,
    Counter(usize),
    Pot,
    Dish,
    Serve,
    Onion,
}

/// What an interact does in a given state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Effect {
    TakeOnion,
    TakeDish,
    Place(usize, Item),
    Pick(usize, Item),
    PotOnion,
    Plate,
    Serve,
}

impl Effect {
    fn role(self) -> SubSkillId {
        match self {
            Effect::TakeOnion | Effect::PotOnion => POTTING,
            Effect::TakeDish | Effect::Plate | Effect::Serve => DELIVERY,
            Effect::Place(_, item) | Effect::Pick(_, item) => item.role(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Pot,
    Gap,
    Pile,
}

/// Where an expert is heading.
enum Goal {
    /// Interact with one of these `(access cell, tile)` pairs, nearest first.
    Use(Vec<(Pos, Pos)>),
    Rest(SubSkillId),
    Stay,
}

#[derive(Debug, Clone)]
pub struct KitchenLite {
    layout: KitchenLayout,
    width: usize,
    height: usize,
    tiles: Vec<Tile>,
    floor: Vec<Pos>,
    pot: Pos,
    counters: Vec<Pos>,
    staging: Vec<usize>,
    rest: [Pos; 2],
}

impl KitchenLite {
    pub fn new(layout: KitchenLayout) -> Result<Self> {
        let height = layout.grid.len();
        let width = layout.grid.first().map_or(0, |r| r.len());
        if height < 3 || !(3..=255).contains(&width) || height > 255 {
            return Err(Error::Config("kitchen grid must be between 3x3 and 255x255".into()));
        }
        let mut tiles = Vec::with_capacity(width * height);
        let mut floor = Vec::new();
        let mut counters = Vec::new();
        let mut pots = Vec::new();
        let (mut dishes, mut serves, mut onions) = (0, 0, 0);
        for (y, row) in layout.grid.iter().enumerate() {
            if row.len() != width {
                return Err(Error::Config(format!("kitchen grid row {y} has a different width")));
            }
            for (x, ch) in row.chars().enumerate() {
                let p = Pos(x as u8, y as u8);
                let tile = match ch {
                    '#' => Tile::Wall,
                    '.' => {
                        floor.push(p);
                        Tile::Floor
                    }
                    'X' => {
                        counters.push(p);
                        Tile::Counter(counters.len() - 1)
                    }
                    'P' => {
                        pots.push(p);
                        Tile::Pot
                    }
                    'D' => {
                        dishes += 1;
                        Tile::Dish
                    }
                    'S' => {
                        serves += 1;
                        Tile::Serve
                    }
                    'O' => {
                        onions += 1;
                        Tile::Onion
                    }
                    other => return Err(Error::Config(format!("unknown kitchen tile `{other}`"))),
                };
                tiles.push(tile);
            }
        }
        if pots.len() != 1 || dishes == 0 || serves == 0 || onions == 0 {
            return Err(Error::Config(
                "kitchen needs exactly one pot and at least one dish stack, serve window and onion pile".into(),
            ));
        }
        if floor.len() < 2 {
            return Err(Error::Config("kitchen needs room for two cooks".into()));
        }
        if layout.pot_capacity == 0 || layout.cook_time == 0 || layout.segment_length == 0 {
            return Err(Error::Config("pot_capacity, cook_time and segment_length must be positive".into()));
        }
        if !(layout.gamma > 0.0 && layout.gamma <= 1.0) {
            return Err(Error::Config("gamma must lie in (0, 1]".into()));
        }
        let staging = counters
            .iter()
            .enumerate()
            .filter(|(_, p)| p.1 as usize == layout.staging_row)
            .map(|(i, _)| i)
            .collect();
        let rest = layout.rest.map(|[x, y]| Pos(x as u8, y as u8));
        let game = Self {
            pot: pots[0],
            width,
            height,
            tiles,
            floor,
            counters,
            staging,
            rest,
            layout,
        };
        if game.rest.iter().any(|&p| !game.in_bounds(p) || game.tile(p) != Tile::Floor) {
            return Err(Error::Config("rest cells must be floor".into()));
        }
        Ok(game)
    }

    pub fn layout(&self) -> &KitchenLayout {
        &self.layout
    }

    fn in_bounds(&self, p: Pos) -> bool {
        (p.0 as usize) < self.width && (p.1 as usize) < self.height
    }

    fn tile(&self, p: Pos) -> Tile {
        self.tiles[p.1 as usize * self.width + p.0 as usize]
    }

    fn neighbor(&self, p: Pos, d: Dir) -> Option<Pos> {
        let (dx, dy) = d.delta();
        let x = p.0 as i32 + dx;
        let y = p.1 as i32 + dy;
        if x < 0 || y < 0 || x >= self.width as i32 || y >= self.height as i32 {
            return None;
        }
        Some(Pos(x as u8, y as u8))
    }

    fn side(&self, p: Pos) -> Side {
        let row = self.layout.staging_row;
        match (p.1 as usize).cmp(&row) {
            std::cmp::Ordering::Less => Side::Pot,
            std::cmp::Ordering::Equal => Side::Gap,
            std::cmp::Ordering::Greater => Side::Pile,
        }
    }

    fn effect(&self, s: &KitchenState, i: usize) -> Option<Effect> {
        let chef = &s.chefs[i];
        let target = self.neighbor(chef.pos, chef.facing)?;
        match (self.tile(target), chef.held) {
            (Tile::Onion, None) => Some(Effect::TakeOnion),
            (Tile::Dish, None) => Some(Effect::TakeDish),
            (Tile::Counter(c), Some(item)) if s.counters[c].is_none() => Some(Effect::Place(c, item)),
            (Tile::Counter(c), None) => s.counters[c].map(|item| Effect::Pick(c, item)),
            (Tile::Pot, Some(Item::Onion)) => match s.pot {
                Pot::Filling { onions } if onions < self.layout.pot_capacity => Some(Effect::PotOnion),
                _ => None,
            },
            (Tile::Pot, Some(Item::Dish)) if s.pot == Pot::Ready => Some(Effect::Plate),
            (Tile::Serve, Some(Item::Soup)) => Some(Effect::Serve),
            _ => None,
        }
    }

    fn apply(&self, s: &mut KitchenState, i: usize, e: Effect) -> f64 {
        let held = &mut s.chefs[i].held;
        match e {
            Effect::TakeOnion => *held = Some(Item::Onion),
            Effect::TakeDish => *held = Some(Item::Dish),
            Effect::Place(c, item) => {
                s.counters[c] = Some(item);
                *held = None;
            }
            Effect::Pick(c, item) => {
                s.counters[c] = None;
                *held = Some(item);
            }
            Effect::PotOnion => {
                *held = None;
                if let Pot::Filling { onions } = s.pot {
                    s.pot = if onions + 1 >= self.layout.pot_capacity {
                        Pot::Cooking {
                            remaining: self.layout.cook_time,
                        }
                    } else {
                        Pot::Filling { onions: onions + 1 }
                    };
                }
            }
            Effect::Plate => {
                *held = Some(Item::Soup);
                s.pot = Pot::Filling { onions: 0 };
            }
            Effect::Serve => {
                *held = None;
                s.delivered += 1;
                return self.layout.rewards.soup;
            }
        }
        0.0
    }

    /// Floor cells next to `tile`, optionally restricted to one side of the staging row.
    fn access(&self, tile: Pos, side: Option<Side>) -> impl Iterator<Item = (Pos, Pos)> + '_ {
        Dir::ALL.into_iter().filter_map(move |d| {
            let a = self.neighbor(tile, d)?;
            let ok = self.tile(a) == Tile::Floor
                && self.side(a) != Side::Gap
                && side.is_none_or(|sd| self.side(a) == sd);
            ok.then_some((a, tile))
        })
    }

    fn tiles_of(&self, kind: Tile) -> impl Iterator<Item = Pos> + '_ {
        (0..self.height).flat_map(move |y| (0..self.width).map(move |x| Pos(x as u8, y as u8)))
            .filter(move |&p| self.tile(p) == kind)
    }

    fn use_tiles(&self, tiles: impl IntoIterator<Item = Pos>, side: Option<Side>) -> Goal {
        let pairs: Vec<_> = tiles.into_iter().flat_map(|t| self.access(t, side)).collect();
        if pairs.is_empty() {
            Goal::Stay
        } else {
            Goal::Use(pairs)
        }
    }

    fn counters_where<'a>(
        &'a self,
        s: &'a KitchenState,
        only_staging: bool,
        pred: impl Fn(Option<Item>) -> bool + 'a,
    ) -> impl Iterator<Item = Pos> + 'a {
        self.counters
            .iter()
            .enumerate()
            .filter(move |(c, _)| !only_staging || self.staging.contains(c))
            .filter(move |(c, _)| pred(s.counters[*c]))
            .map(|(_, &p)| p)
    }

    fn fetch(&self, s: &KitchenState, item: Item) -> Goal {
        let source = match item {
            Item::Onion => Tile::Onion,
            Item::Dish => Tile::Dish,
            Item::Soup => Tile::Pot,
        };
        let mut tiles: Vec<Pos> = self.counters_where(s, false, |c| c == Some(item)).collect();
        if item != Item::Soup {
            tiles.extend(self.tiles_of(source));
        }
        self.use_tiles(tiles, None)
    }

    fn drop_off(&self, s: &KitchenState) -> Goal {
        self.use_tiles(self.counters_where(s, false, |c| c.is_none()).collect::<Vec<_>>(), None)
    }

    fn pot_needs(&self, s: &KitchenState) -> u8 {
        match s.pot {
            Pot::Filling { onions } => self.layout.pot_capacity - onions,
            _ => 0,
        }
    }

    /// Pots directly when the pot needs onions; otherwise stages onions on the
    /// counter row so the next batch can be picked up from the pot side.
    fn potter_goal(&self, s: &KitchenState, me: &Chef) -> Goal {
        let cap = self.layout.pot_capacity as usize;
        let needs = self.pot_needs(s) > 0;
        let staged: Vec<Pos> = self.counters_where(s, true, |c| c == Some(Item::Onion)).collect();
        let free: Vec<Pos> = self.counters_where(s, true, |c| c.is_none()).collect();
        match me.held {
            Some(Item::Onion) if needs => self.use_tiles([self.pot], None),
            Some(Item::Onion) if !free.is_empty() => self.use_tiles(free, None),
            Some(Item::Onion) => Goal::Rest(POTTING),
            Some(_) => self.drop_off(s),
            None if needs => {
                let mut pairs: Vec<_> = staged.iter().flat_map(|&t| self.access(t, Some(Side::Pot))).collect();
                pairs.extend(self.tiles_of(Tile::Onion).flat_map(|t| self.access(t, None)));
                Goal::Use(pairs)
            }
            None if staged.len() < cap && !free.is_empty() => {
                self.use_tiles(self.tiles_of(Tile::Onion).collect::<Vec<_>>(), None)
            }
            None => Goal::Rest(POTTING),
        }
    }

    fn deliverer_goal(&self, s: &KitchenState, me: &Chef) -> Goal {
        match me.held {
            Some(Item::Soup) => self.use_tiles(self.tiles_of(Tile::Serve).collect::<Vec<_>>(), None),
            Some(Item::Dish) if s.pot == Pot::Ready => self.use_tiles([self.pot], None),
            Some(Item::Dish) => Goal::Rest(DELIVERY),
            Some(Item::Onion) => self.drop_off(s),
            None if self.counters_where(s, false, |c| c == Some(Item::Soup)).next().is_some() => {
                self.fetch(s, Item::Soup)
            }
            None if matches!(s.pot, Pot::Cooking { .. } | Pot::Ready) => self.fetch(s, Item::Dish),
            None => Goal::Rest(DELIVERY),
        }
    }

    fn full_goal(&self, s: &KitchenState, me: &Chef) -> Goal {
        let needs = self.pot_needs(s) > 0;
        match me.held {
            Some(Item::Soup) => self.use_tiles(self.tiles_of(Tile::Serve).collect::<Vec<_>>(), None),
            Some(Item::Dish) => match s.pot {
                Pot::Ready => self.use_tiles([self.pot], None),
                Pot::Cooking { .. } => Goal::Rest(DELIVERY),
                Pot::Filling { .. } => self.drop_off(s),
            },
            Some(Item::Onion) if needs => self.use_tiles([self.pot], None),
            Some(Item::Onion) => self.drop_off(s),
            None => {
                if self.counters_where(s, false, |c| c == Some(Item::Soup)).next().is_some() {
                    self.fetch(s, Item::Soup)
                } else if s.pot == Pot::Ready {
                    self.fetch(s, Item::Dish)
                } else if needs {
                    self.fetch(s, Item::Onion)
                } else {
                    self.fetch(s, Item::Dish)
                }
            }
        }
    }

    /// Breadth-first route from `from` to the nearest of `goals`.
    ///
    /// Returns the reached goal and the first move, `None` when already there.
    fn route(&self, from: Pos, goals: &[Pos], blocked: Option<Pos>) -> Option<(Pos, Option<Dir>)> {
        let idx = |p: Pos| p.1 as usize * self.width + p.0 as usize;
        let mut first: Vec<Option<Option<Dir>>> = vec![None; self.tiles.len()];
        first[idx(from)] = Some(None);
        let mut queue = VecDeque::from([from]);
        while let Some(p) = queue.pop_front() {
            if goals.contains(&p) {
                return Some((p, first[idx(p)].flatten()));
            }
            for d in Dir::ALL {
                let Some(q) = self.neighbor(p, d) else { continue };
                if self.tile(q) != Tile::Floor || Some(q) == blocked || first[idx(q)].is_some() {
                    continue;
                }
                first[idx(q)] = Some(Some(first[idx(p)].flatten().unwrap_or(d)));
                queue.push_back(q);
            }
        }
        None
    }

    fn navigate(&self, s: &KitchenState, agent: Agent, goal: Goal) -> KitchenAction {
        let me = &s.chefs[agent.index()];
        let other = s.chefs[agent.other().index()].pos;
        let (cells, pairs) = match &goal {
            Goal::Stay => return KitchenAction::Stay,
            Goal::Rest(k) => (vec![self.rest[k.0]], vec![]),
            Goal::Use(pairs) => (pairs.iter().map(|&(a, _)| a).collect(), pairs.clone()),
        };
        if let Goal::Rest(k) = goal {
            if other == self.rest[k.0] {
                return KitchenAction::Stay;
            }
        }
        let Some((cell, step)) = self.route(me.pos, &cells, Some(other)) else {
            // Blocked by the other cook: the teacher steps aside, the student waits.
            return match self.route(me.pos, &cells, None) {
                Some(_) => self.yield_move(me.pos, other, agent),
                None => KitchenAction::Stay,
            };
        };
        if let Some(d) = step {
            return d.action();
        }
        let Some(&(_, tile)) = pairs.iter().find(|(a, _)| *a == cell) else {
            return KitchenAction::Stay;
        };
        let toward = Dir::ALL
            .into_iter()
            .find(|&d| self.neighbor(cell, d) == Some(tile))
            .expect("access cells border their tile");
        if me.facing == toward {
            KitchenAction::Interact
        } else {
            toward.action()
        }
    }

    /// Teacher backs away from the student when they block each other; the student waits.
    fn yield_move(&self, pos: Pos, other: Pos, agent: Agent) -> KitchenAction {
        if agent == Agent::Student {
            return KitchenAction::Stay;
        }
        let dist = |p: Pos| p.0.abs_diff(other.0) + p.1.abs_diff(other.1);
        let mut best = (dist(pos), KitchenAction::Stay);
        for d in Dir::ALL {
            let Some(q) = self.neighbor(pos, d) else { continue };
            let same_side = self.side(pos) == Side::Gap || self.side(q) == self.side(pos);
            if self.tile(q) == Tile::Floor && q != other && same_side && dist(q) > best.0 {
                best = (dist(q), d.action());
            }
        }
        best.1
    }
}

impl MarkovGame for KitchenLite {
    type State = KitchenState;
    type Action = KitchenAction;

    fn name(&self) -> &'static str {
        "kitchen_lite"
    }

    fn actions(&self) -> &[KitchenAction] {
        &KitchenAction::ALL
    }

    fn action_name(&self, a: KitchenAction) -> &'static str {
        match a {
            KitchenAction::Up => "up",
            KitchenAction::Down => "down",
            KitchenAction::Left => "left",
            KitchenAction::Right => "right",
            KitchenAction::Interact => "interact",
            KitchenAction::Stay => "stay",
        }
    }

    fn num_subskills(&self) -> usize {
        2
    }

    fn subskill_name(&self, k: SubSkillId) -> &'static str {
        match k {
            POTTING => "putting ingredients in the pot",
            DELIVERY => "delivering the soup",
            _ => "unknown",
        }
    }

    fn segment_length(&self) -> usize {
        self.layout.segment_length
    }

    fn gamma(&self) -> f64 {
        self.layout.gamma
    }

    fn idle_action(&self) -> KitchenAction {
        KitchenAction::Stay
    }

    fn initial_state(&self, seed: u64, _student_roles: RoleSet) -> KitchenState {
        let mut rng = rng_for(seed, START_STREAM);
        let picks = sample(&mut rng, self.floor.len(), 2);
        let mut chef = |i: usize| Chef {
            pos: self.floor[picks.index(i)],
            facing: Dir::ALL[rng.random_range(0..4)],
            held: None,
        };
        let chefs = [chef(0), chef(1)];
        let cap = self.layout.pot_capacity;
        let pot = if self.layout.start.random_pot {
            let onions = rng.random_range(0..=cap);
            if onions == cap {
                Pot::Cooking {
                    remaining: rng.random_range(1..=self.layout.cook_time),
                }
            } else {
                Pot::Filling { onions }
            }
        } else {
            Pot::Filling { onions: 0 }
        };
        let p = self.layout.start.staged_onion_prob;
        let counters = (0..self.counters.len())
            .map(|c| (self.staging.contains(&c) && rng.random_bool(p)).then_some(Item::Onion))
            .collect();
        KitchenState {
            chefs,
            pot,
            counters,
            delivered: 0,
        }
    }

    fn step(&self, s: &KitchenState, a1: KitchenAction, a2: KitchenAction) -> Result<(KitchenState, f64)> {
        if s.counters.len() != self.counters.len() || s.chefs.iter().any(|c| self.tile(c.pos) != Tile::Floor) {
            return Err(Error::Domain("state does not belong to this kitchen layout".into()));
        }
        let mut n = s.clone();
        let mut r = 0.0;
        let acts = [a1, a2];
        for (i, a) in acts.iter().enumerate() {
            if *a == KitchenAction::Interact {
                if let Some(e) = self.effect(&n, i) {
                    r += self.apply(&mut n, i, e);
                }
            }
        }
        let mut target = [None, None];
        for (i, a) in acts.iter().enumerate() {
            let Some(d) = a.dir() else { continue };
            let Some(q) = self.neighbor(n.chefs[i].pos, d) else { continue };
            match self.tile(q) {
                Tile::Wall => {}
                Tile::Floor => {
                    n.chefs[i].facing = d;
                    target[i] = Some(q);
                }
                _ => n.chefs[i].facing = d,
            }
        }
        let pos = [n.chefs[0].pos, n.chefs[1].pos];
        let clash = match (target[0], target[1]) {
            (Some(x), Some(y)) => x == y || (x == pos[1] && y == pos[0]),
            _ => false,
        };
        if !clash {
            for i in 0..2 {
                if let Some(q) = target[i] {
                    if q != pos[1 - i] {
                        n.chefs[i].pos = q;
                    }
                }
            }
        }
        if let Pot::Cooking { remaining } = n.pot {
            n.pot = if remaining <= 1 {
                Pot::Ready
            } else {
                Pot::Cooking {
                    remaining: remaining - 1,
                }
            };
        }
        Ok((n, r - self.layout.rewards.step_cost))
    }

    fn view(&self, s: &KitchenState) -> serde_json::Value {
        json!({
            "env": self.name(),
            "grid": self.layout.grid,
            "counters": self.counters.iter().zip(&s.counters).map(|(p, item)| json!({"pos": p, "item": item})).collect::<Vec<_>>(),
            "chefs": s.chefs,
            "pot": s.pot,
            "delivered": s.delivered,
        })
    }
}

impl ExpertPolicyBundle for KitchenLite {
    fn expert_action(&self, s: &KitchenState, agent: Agent, roles: RoleSet) -> KitchenAction {
        let me = &s.chefs[agent.index()];
        let goal = match (roles.contains(POTTING), roles.contains(DELIVERY)) {
            (true, true) => self.full_goal(s, me),
            (true, false) => self.potter_goal(s, me),
            (false, true) => self.deliverer_goal(s, me),
            (false, false) => Goal::Stay,
        };
        self.navigate(s, agent, goal)
    }

    fn responsibility(&self, s: &KitchenState, agent: Agent, a: KitchenAction) -> Option<SubSkillId> {
        if a != KitchenAction::Interact {
            return None;
        }
        self.effect(s, agent.index()).map(Effect::role)
    }
}
