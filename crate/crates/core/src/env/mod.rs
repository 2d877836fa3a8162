//! Enriched prey-predator gridworld.
//!
//! Predators start typeless and become archers or defenders by walking onto
//! an arrow or a defence tool. Archers can `SkillAct` to kill every prey in
//! their view; any predator can `Catch` an adjacent prey but is removed from
//! the map when it does. Defenders may enter campsites; a prey stepping into
//! an unoccupied campsite ends the episode with the breach penalty.
//!
//! One step resolves in a fixed order: predator moves and pickups (ascending
//! agent index, first claim on a cell wins), predator attacks, prey moves
//! (smart prey first), terminal checks.

mod map;
mod observe;
mod record;
mod trace;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use map::{Cell, MapSpec, PreySpawn, Rewards, HARD_MAP, MODERATE_MAP, PRETRAIN_MAP};
pub use observe::{observation_dim, Observation, SparseObs, StateSummary, OBS_CHANNELS, STATE_DIM};
pub use record::{run_episode, Actor, EpisodeRecord};
pub use trace::{EpisodeTrace, TraceHeader, TraceStep};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid map: {0}")]
    InvalidMap(String),
    #[error("map file: {0}")]
    MapParse(String),
    #[error("agent {0} is dead")]
    DeadAgent(usize),
    #[error("agent {0} is alive but got no action")]
    MissingAction(usize),
    #[error("joint action has {got} entries for {expected} agents")]
    ActionCount { got: usize, expected: usize },
    #[error("episode already terminated")]
    EpisodeOver,
    #[error("trace: {0}")]
    Trace(String),
}

pub const NUM_ACTIONS: usize = 7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Action {
    Left = 0,
    Right = 1,
    Up = 2,
    Down = 3,
    Stay = 4,
    Catch = 5,
    SkillAct = 6,
}

impl Action {
    pub const ALL: [Action; NUM_ACTIONS] = [
        Action::Left,
        Action::Right,
        Action::Up,
        Action::Down,
        Action::Stay,
        Action::Catch,
        Action::SkillAct,
    ];

    pub const MOVES: [Action; 4] = [Action::Left, Action::Right, Action::Up, Action::Down];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Grid offset for the four moves.
    pub fn delta(self) -> Option<(isize, isize)> {
        match self {
            Action::Left => Some((-1, 0)),
            Action::Right => Some((1, 0)),
            Action::Up => Some((0, -1)),
            Action::Down => Some((0, 1)),
            _ => None,
        }
    }
}

/// Availability of each of the seven actions for one agent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionMask(pub [bool; NUM_ACTIONS]);

impl ActionMask {
    pub fn allows(&self, a: Action) -> bool {
        self.0[a.index()]
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn available(&self) -> impl Iterator<Item = Action> + '_ {
        Action::ALL.into_iter().filter(|a| self.allows(*a))
    }

    pub fn bits(&self) -> u8 {
        self.0
            .iter()
            .enumerate()
            .fold(0u8, |acc, (i, &b)| acc | ((b as u8) << i))
    }

    pub fn from_bits(bits: u8) -> Self {
        let mut m = [false; NUM_ACTIONS];
        for (i, slot) in m.iter_mut().enumerate() {
            *slot = bits & (1 << i) != 0;
        }
        Self(m)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Item {
    Arrow,
    Tool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Predator {
    pub pos: Cell,
    pub alive: bool,
    pub item: Option<Item>,
}

impl Predator {
    pub fn is_archer(&self) -> bool {
        self.item == Some(Item::Arrow)
    }

    pub fn is_defender(&self) -> bool {
        self.item == Some(Item::Tool)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Prey {
    pub pos: Cell,
    pub alive: bool,
    pub smart: bool,
}

/// What happened during one step besides the reward.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepInfo {
    pub kills: usize,
    pub breach: bool,
    /// Agents whose action was unavailable and was replaced by `Stay`.
    pub invalid: Vec<usize>,
    /// Agents removed from the map after a successful `Catch`.
    pub removed: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub observations: Vec<Observation>,
    pub summary: StateSummary,
    pub reward: f64,
    pub terminal: bool,
    pub info: StepInfo,
}

/// Full simulator state. Owns its RNG, so `(spec, seed, actions)` fixes the
/// trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvState {
    spec: Arc<MapSpec>,
    predators: Vec<Predator>,
    prey: Vec<Prey>,
    items: Vec<Option<Item>>,
    camps: Vec<bool>,
    t: usize,
    done: bool,
    rng: ChaCha8Rng,
}

/// Starts a new episode: every predator alive and typeless, items in place,
/// `t = 0`.
pub fn reset(
    spec: impl Into<Arc<MapSpec>>,
    seed: u64,
) -> Result<(EnvState, Vec<Observation>, StateSummary), EnvError> {
    let spec = spec.into();
    spec.validate()?;
    let cells = spec.width * spec.height;
    let mut items = vec![None; cells];
    let mut camps = vec![false; cells];
    for c in &spec.arrows {
        items[c.y * spec.width + c.x] = Some(Item::Arrow);
    }
    for c in &spec.tools {
        items[c.y * spec.width + c.x] = Some(Item::Tool);
    }
    for c in &spec.campsites {
        camps[c.y * spec.width + c.x] = true;
    }
    let state = EnvState {
        predators: spec
            .agents
            .iter()
            .map(|&pos| Predator {
                pos,
                alive: true,
                item: None,
            })
            .collect(),
        prey: spec
            .prey
            .iter()
            .map(|p| Prey {
                pos: p.cell,
                alive: true,
                smart: p.smart,
            })
            .collect(),
        items,
        camps,
        t: 0,
        done: false,
        rng: ChaCha8Rng::seed_from_u64(seed),
        spec,
    };
    let obs = state.observations();
    let summary = state.summary();
    Ok((state, obs, summary))
}

impl EnvState {
    pub fn spec(&self) -> &MapSpec {
        &self.spec
    }

    pub fn spec_arc(&self) -> &Arc<MapSpec> {
        &self.spec
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn predators(&self) -> &[Predator] {
        &self.predators
    }

    pub fn prey(&self) -> &[Prey] {
        &self.prey
    }

    pub fn num_agents(&self) -> usize {
        self.predators.len()
    }

    pub fn alive_mask(&self) -> Vec<bool> {
        self.predators.iter().map(|p| p.alive).collect()
    }

    pub fn prey_alive(&self) -> usize {
        self.prey.iter().filter(|p| p.alive).count()
    }

    pub fn item_at(&self, c: Cell) -> Option<Item> {
        self.items[self.idx(c)]
    }

    pub fn is_campsite(&self, c: Cell) -> bool {
        self.camps[self.idx(c)]
    }

    pub fn in_campsite(&self, agent: usize) -> bool {
        let p = &self.predators[agent];
        p.alive && self.is_campsite(p.pos)
    }

    /// A campsite is defended while a predator stands on it; only defenders
    /// can enter one.
    pub fn is_defended(&self, camp: Cell) -> bool {
        self.predators.iter().any(|p| p.alive && p.pos == camp)
    }

    fn idx(&self, c: Cell) -> usize {
        c.y * self.spec.width + c.x
    }

    fn offset(&self, c: Cell, a: Action) -> Option<Cell> {
        let (dx, dy) = a.delta()?;
        let x = c.x.checked_add_signed(dx)?;
        let y = c.y.checked_add_signed(dy)?;
        let n = Cell::new(x, y);
        self.spec.contains(n).then_some(n)
    }

    fn occupied(&self, c: Cell) -> bool {
        self.predators.iter().any(|p| p.alive && p.pos == c)
            || self.prey.iter().any(|p| p.alive && p.pos == c)
    }

    fn prey_in_view(&self, agent: usize) -> impl Iterator<Item = usize> + '_ {
        let pos = self.predators[agent].pos;
        let r = self.spec.radius;
        self.prey
            .iter()
            .enumerate()
            .filter(move |(_, p)| p.alive && p.pos.chebyshev(pos) <= r)
            .map(|(j, _)| j)
    }

    /// Adjacent prey in Left, Right, Up, Down order.
    fn adjacent_prey(&self, agent: usize) -> Option<usize> {
        let pos = self.predators[agent].pos;
        Action::MOVES.iter().find_map(|&m| {
            let n = self.offset(pos, m)?;
            self.prey.iter().position(|p| p.alive && p.pos == n)
        })
    }

    pub fn action_mask(&self, agent: usize) -> Result<ActionMask, EnvError> {
        let p = self
            .predators
            .get(agent)
            .filter(|p| p.alive)
            .ok_or(EnvError::DeadAgent(agent))?;
        let mut m = [false; NUM_ACTIONS];
        for a in Action::MOVES {
            m[a.index()] = match self.offset(p.pos, a) {
                Some(n) => !self.occupied(n) && (!self.is_campsite(n) || p.is_defender()),
                None => false,
            };
        }
        m[Action::Stay.index()] = true;
        m[Action::Catch.index()] = self.adjacent_prey(agent).is_some();
        m[Action::SkillAct.index()] = p.is_archer() && self.prey_in_view(agent).next().is_some();
        Ok(ActionMask(m))
    }

    /// Masks for every agent; dead agents get `None`.
    pub fn action_masks(&self) -> Vec<Option<ActionMask>> {
        (0..self.predators.len())
            .map(|i| self.action_mask(i).ok())
            .collect()
    }

    fn prey_legal_moves(&self, prey: usize) -> Vec<Cell> {
        let pos = self.prey[prey].pos;
        Action::MOVES
            .iter()
            .filter_map(|&m| self.offset(pos, m))
            .filter(|&n| !self.occupied(n))
            .collect()
    }

    /// Uniform over `Stay` plus every move into a free in-grid cell.
    /// Returns the destination cell (the current cell for `Stay`).
    pub fn random_prey_move(&self, prey: usize, rng: &mut impl Rng) -> Cell {
        let pos = self.prey[prey].pos;
        let moves = self.prey_legal_moves(prey);
        let pick = rng.gen_range(0..=moves.len());
        if pick == 0 {
            pos
        } else {
            moves[pick - 1]
        }
    }

    /// Greedy step toward the nearest undefended campsite, horizontal axis
    /// first. Falls back to the random-prey rule when every campsite is
    /// defended or both greedy steps are blocked.
    pub fn smart_prey_move(&self, prey: usize, rng: &mut impl Rng) -> Cell {
        let pos = self.prey[prey].pos;
        let target = self
            .spec
            .campsites
            .iter()
            .filter(|&&c| !self.is_defended(c))
            .min_by_key(|&&c| c.manhattan(pos));
        let Some(&target) = target else {
            return self.random_prey_move(prey, rng);
        };
        let horizontal = match target.x.cmp(&pos.x) {
            std::cmp::Ordering::Less => Some(Action::Left),
            std::cmp::Ordering::Greater => Some(Action::Right),
            std::cmp::Ordering::Equal => None,
        };
        let vertical = match target.y.cmp(&pos.y) {
            std::cmp::Ordering::Less => Some(Action::Up),
            std::cmp::Ordering::Greater => Some(Action::Down),
            std::cmp::Ordering::Equal => None,
        };
        for a in [horizontal, vertical].into_iter().flatten() {
            if let Some(n) = self.offset(pos, a) {
                if !self.occupied(n) {
                    return n;
                }
            }
        }
        self.random_prey_move(prey, rng)
    }

    /// Advances one step. `actions[i]` must be `Some` exactly for alive agents.
    pub fn step(&mut self, actions: &[Option<Action>]) -> Result<StepOutcome, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeOver);
        }
        if actions.len() != self.predators.len() {
            return Err(EnvError::ActionCount {
                got: actions.len(),
                expected: self.predators.len(),
            });
        }
        let mut resolved = Vec::with_capacity(actions.len());
        let mut info = StepInfo::default();
        for (i, (a, p)) in actions.iter().zip(&self.predators).enumerate() {
            match (a, p.alive) {
                (Some(_), false) => return Err(EnvError::DeadAgent(i)),
                (None, true) => return Err(EnvError::MissingAction(i)),
                (None, false) => resolved.push(None),
                (Some(a), true) => {
                    let mask = self.action_mask(i)?;
                    if mask.allows(*a) {
                        resolved.push(Some(*a));
                    } else {
                        log::warn!("agent {i}: {a:?} unavailable at t={}, treated as Stay", self.t);
                        info.invalid.push(i);
                        resolved.push(Some(Action::Stay));
                    }
                }
            }
        }

        // moves and pickups
        let mut claimed = Vec::new();
        for (i, a) in resolved.iter().enumerate() {
            let Some(a) = a else { continue };
            let Some(dest) = self.offset(self.predators[i].pos, *a) else { continue };
            if claimed.contains(&dest) {
                continue;
            }
            claimed.push(dest);
            let idx = self.idx(dest);
            let p = &mut self.predators[i];
            p.pos = dest;
            if p.item.is_none() {
                if let Some(item) = self.items[idx].take() {
                    p.item = Some(item);
                }
            }
        }

        // attacks
        for (i, a) in resolved.iter().enumerate() {
            match a {
                Some(Action::Catch) => {
                    if let Some(j) = self.adjacent_prey(i) {
                        self.prey[j].alive = false;
                        self.predators[i].alive = false;
                        info.kills += 1;
                        info.removed.push(i);
                    }
                }
                Some(Action::SkillAct) if self.predators[i].alive => {
                    let victims: Vec<usize> = self.prey_in_view(i).collect();
                    for j in victims {
                        self.prey[j].alive = false;
                        info.kills += 1;
                    }
                }
                _ => {}
            }
        }

        // prey moves
        let mut rng = self.rng.clone();
        for j in 0..self.prey.len() {
            if !self.prey[j].alive {
                continue;
            }
            let dest = if self.prey[j].smart {
                self.smart_prey_move(j, &mut rng)
            } else {
                self.random_prey_move(j, &mut rng)
            };
            self.prey[j].pos = dest;
            if self.is_campsite(dest) {
                info.breach = true;
                break;
            }
        }
        self.rng = rng;

        self.t += 1;
        let rewards = self.spec.rewards;
        let mut reward = rewards.step + rewards.kill * info.kills as f64;
        if info.breach {
            reward += rewards.breach;
        }
        self.done = info.breach
            || self.prey_alive() == 0
            || self.t >= self.spec.max_steps
            || self.predators.iter().all(|p| !p.alive);
        Ok(StepOutcome {
            observations: self.observations(),
            summary: self.summary(),
            reward,
            terminal: self.done,
            info,
        })
    }
}
