//! Scripted demonstrator and the demonstration store used for supervised
//! pre-training.
//!
//! The expert splits the team once, from spawn positions: for every campsite
//! the predator nearest to a defence tool becomes a defender, everyone else
//! an attacker. Defenders walk to their tool and then hold a campsite;
//! attackers fetch an arrow, close in on the nearest prey and `SkillAct` as
//! soon as a prey is in view. Ties are broken by agent index, so the script
//! is a pure function of the state.

mod demos;

use std::collections::VecDeque;

use thiserror::Error;

use crate::env::{Action, ActionMask, Actor, Cell, EnvError, EnvState, Item, MapSpec, Observation};

pub use demos::{generate_demos, DemoManifest, DemoSet, DEMO_MANIFEST, DEMO_TRACES};

#[derive(Debug, Error)]
pub enum ExpertError {
    #[error("scripted expert does not support map {map:?}: {reason}")]
    UnsupportedMap { map: String, reason: String },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("demo generation aborted: {successes} successes in {attempts} attempts")]
    Aborted { successes: usize, attempts: usize },
    #[error("demo set {path}: {reason}")]
    Storage { path: String, reason: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    Defender,
    Attacker,
}

/// Per-agent plan fixed at construction.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Plan {
    role: Role,
    /// Preferred item cell (tool for defenders, arrow for attackers).
    item: Option<Cell>,
    /// Campsite held by a defender.
    camp: Option<Cell>,
}

#[derive(Clone, Debug)]
pub struct ScriptedExpert {
    plans: Vec<Plan>,
}

impl ScriptedExpert {
    /// Fixes roles from the spawn layout. Requires at least one campsite, a
    /// tool per campsite, more agents than campsites and an arrow per
    /// attacker.
    pub fn new(spec: &MapSpec) -> Result<Self, ExpertError> {
        let unsupported = |reason: String| ExpertError::UnsupportedMap {
            map: spec.name.clone(),
            reason,
        };
        let camps = spec.campsites.len();
        let n = spec.num_agents();
        if camps == 0 {
            return Err(unsupported("no campsites to defend".into()));
        }
        if spec.tools.len() < camps {
            return Err(unsupported(format!("{} tools for {camps} campsites", spec.tools.len())));
        }
        if n <= camps {
            return Err(unsupported(format!("{n} agents cannot cover {camps} campsites and hunt")));
        }
        if spec.arrows.len() < n - camps {
            return Err(unsupported(format!(
                "{} arrows for {} attackers",
                spec.arrows.len(),
                n - camps
            )));
        }

        let mut plans: Vec<Option<Plan>> = vec![None; n];
        let mut free_camps: Vec<Cell> = spec.campsites.clone();
        // Tools closest to any agent are claimed first.
        let mut tools: Vec<Cell> = spec.tools.clone();
        for _ in 0..camps {
            let (ti, agent) = tools
                .iter()
                .enumerate()
                .flat_map(|(ti, &tool)| {
                    spec.agents
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| plans[*i].is_none())
                        .map(move |(i, &a)| (a.manhattan(tool), i, ti))
                })
                .min()
                .map(|(_, i, ti)| (ti, i))
                .expect("more agents than campsites");
            let tool = tools.remove(ti);
            let ci = (0..free_camps.len())
                .min_by_key(|&c| (free_camps[c].manhattan(tool), c))
                .expect("one camp per defender");
            let camp = free_camps.remove(ci);
            plans[agent] = Some(Plan {
                role: Role::Defender,
                item: Some(tool),
                camp: Some(camp),
            });
        }
        let mut arrows = spec.arrows.clone();
        for (i, &pos) in spec.agents.iter().enumerate() {
            if plans[i].is_some() {
                continue;
            }
            let ai = (0..arrows.len())
                .min_by_key(|&a| (arrows[a].manhattan(pos), a))
                .expect("one arrow per attacker");
            plans[i] = Some(Plan {
                role: Role::Attacker,
                item: Some(arrows.remove(ai)),
                camp: None,
            });
        }
        Ok(Self {
            plans: plans.into_iter().map(|p| p.expect("every agent planned")).collect(),
        })
    }

    pub fn roles(&self) -> Vec<Role> {
        self.plans.iter().map(|p| p.role).collect()
    }

    /// The scripted joint action for the current state. Every emitted action
    /// is available under the state's masks.
    pub fn joint_action(&self, state: &EnvState) -> Vec<Option<Action>> {
        (0..state.num_agents())
            .map(|i| {
                let mask = state.action_mask(i).ok()?;
                let a = self.agent_action(state, i, &mask);
                Some(if mask.allows(a) { a } else { Action::Stay })
            })
            .collect()
    }

    fn agent_action(&self, state: &EnvState, i: usize, mask: &ActionMask) -> Action {
        let me = &state.predators()[i];
        let plan = &self.plans[i];
        match me.item {
            Some(Item::Tool) => {
                let camp = plan
                    .camp
                    .or_else(|| nearest_undefended_camp(state, me.pos))
                    .unwrap_or(me.pos);
                if me.pos == camp {
                    Action::Stay
                } else {
                    first_step(state, i, |c| c == camp).unwrap_or(Action::Stay)
                }
            }
            Some(Item::Arrow) => {
                if mask.allows(Action::SkillAct) {
                    return Action::SkillAct;
                }
                let r = state.spec().radius;
                let prey: Vec<Cell> = state.prey().iter().filter(|p| p.alive).map(|p| p.pos).collect();
                first_step(state, i, |c| prey.iter().any(|p| p.chebyshev(c) <= r)).unwrap_or(Action::Stay)
            }
            None => {
                let kind = match plan.role {
                    Role::Defender => Item::Tool,
                    Role::Attacker => Item::Arrow,
                };
                let preferred = plan.item.filter(|&c| state.item_at(c) == Some(kind));
                let step = match preferred {
                    Some(target) => first_step(state, i, |c| c == target),
                    None => first_step(state, i, |c| state.item_at(c) == Some(kind)),
                };
                step.unwrap_or(Action::Stay)
            }
        }
    }
}

impl Actor for ScriptedExpert {
    fn begin_episode(&mut self, _: &EnvState) {}

    fn act(
        &mut self,
        state: &EnvState,
        _: &[Observation],
        _: &[Option<ActionMask>],
    ) -> Result<Vec<Option<Action>>, EnvError> {
        Ok(self.joint_action(state))
    }
}

fn nearest_undefended_camp(state: &EnvState, from: Cell) -> Option<Cell> {
    state
        .spec()
        .campsites
        .iter()
        .copied()
        .filter(|&c| !state.is_defended(c))
        .min_by_key(|c| c.manhattan(from))
}

/// Breadth-first search from agent `i` to the nearest cell satisfying
/// `goal`; returns the first move on a shortest path. Cells holding other
/// entities, campsites (for non-defenders) and, for empty-handed agents,
/// items other than a goal cell are not traversed. Neighbours expand in
/// Left, Right, Up, Down order, which fixes tie-breaking.
fn first_step(state: &EnvState, i: usize, goal: impl Fn(Cell) -> bool) -> Option<Action> {
    let spec = state.spec();
    let me = &state.predators()[i];
    let w = spec.width;
    let cells = w * spec.height;
    let mut blocked = vec![false; cells];
    for (j, p) in state.predators().iter().enumerate() {
        if p.alive && j != i {
            blocked[p.pos.y * w + p.pos.x] = true;
        }
    }
    for p in state.prey().iter().filter(|p| p.alive) {
        blocked[p.pos.y * w + p.pos.x] = true;
    }
    let passable = |c: Cell| {
        if blocked[c.y * w + c.x] {
            return false;
        }
        if state.is_campsite(c) && !me.is_defender() {
            return false;
        }
        me.item.is_some() || state.item_at(c).is_none() || goal(c)
    };
    let mut first: Vec<Option<Action>> = vec![None; cells];
    let mut seen = vec![false; cells];
    seen[me.pos.y * w + me.pos.x] = true;
    let mut queue = VecDeque::new();
    for a in Action::MOVES {
        if let Some(n) = neighbour(spec, me.pos, a) {
            if passable(n) && !seen[n.y * w + n.x] {
                seen[n.y * w + n.x] = true;
                first[n.y * w + n.x] = Some(a);
                queue.push_back(n);
            }
        }
    }
    while let Some(c) = queue.pop_front() {
        let via = first[c.y * w + c.x];
        if goal(c) {
            return via;
        }
        for a in Action::MOVES {
            if let Some(n) = neighbour(spec, c, a) {
                if !seen[n.y * w + n.x] && passable(n) {
                    seen[n.y * w + n.x] = true;
                    first[n.y * w + n.x] = via;
                    queue.push_back(n);
                }
            }
        }
    }
    None
}

fn neighbour(spec: &MapSpec, c: Cell, a: Action) -> Option<Cell> {
    let (dx, dy) = a.delta()?;
    let n = Cell::new(c.x.checked_add_signed(dx)?, c.y.checked_add_signed(dy)?);
    spec.contains(n).then_some(n)
}
