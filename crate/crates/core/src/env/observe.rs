use serde::{Deserialize, Serialize};

use super::{Cell, EnvState, Item};

/// Entity channels of the egocentric window, in encoding order.
pub const OBS_CHANNELS: [&str; 6] = ["predator", "prey", "arrow", "tool", "campsite", "wall"];

/// Own-status flags appended after the window: carried item one-hot
/// (none, arrow, tool) and inside-campsite.
const STATUS_LEN: usize = 4;

/// `6 * (2r + 1)^2 + 4`; depends on the view radius only, never on team size.
pub const fn observation_dim(radius: usize) -> usize {
    let side = 2 * radius + 1;
    OBS_CHANNELS.len() * side * side + STATUS_LEN
}

/// Dense per-agent observation. Every entry is 0 or 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation(pub Vec<f32>);

impl Observation {
    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn to_sparse(&self) -> SparseObs {
        SparseObs {
            dim: self.0.len() as u32,
            ones: self
                .0
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(i, _)| i as u32)
                .collect(),
        }
    }
}

/// Compact storage for binary observations: indices of the set entries.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparseObs {
    pub dim: u32,
    pub ones: Vec<u32>,
}

impl SparseObs {
    pub fn write_dense(&self, out: &mut [f32]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for &i in &self.ones {
            out[i as usize] = 1.0;
        }
    }

    pub fn to_dense(&self) -> Observation {
        let mut v = vec![0.0; self.dim as usize];
        self.write_dense(&mut v);
        Observation(v)
    }
}

/// Pooled global features consumed by the mixer's state heads.
pub const STATE_DIM: usize = 20;

/// Fixed-size, permutation-invariant summary of the full state.
///
/// Layout: mean (x, y) for alive predators, archers, defenders, alive prey,
/// remaining arrows and remaining tools (12 values, scaled to `[0, 1]`); the
/// same six populations as fractions of their spawn counts (6); fraction of
/// campsites defended; `t / T`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateSummary(pub Vec<f32>);

impl EnvState {
    pub fn observe(&self, agent: usize) -> Observation {
        let spec = self.spec();
        let dim = observation_dim(spec.radius);
        let me = &self.predators()[agent];
        if !me.alive {
            return Observation::zeros(dim);
        }
        let r = spec.radius as isize;
        let side = (2 * r + 1) as usize;
        let plane = side * side;
        let mut v = vec![0.0f32; dim];
        let mut mark = |channel: usize, c: Cell| {
            let dx = c.x as isize - me.pos.x as isize;
            let dy = c.y as isize - me.pos.y as isize;
            if dx.abs() <= r && dy.abs() <= r {
                let at = channel * plane + (dy + r) as usize * side + (dx + r) as usize;
                v[at] = 1.0;
            }
        };
        for (j, p) in self.predators().iter().enumerate() {
            if p.alive && j != agent {
                mark(0, p.pos);
            }
        }
        for p in self.prey().iter().filter(|p| p.alive) {
            mark(1, p.pos);
        }
        for y in 0..spec.height {
            for x in 0..spec.width {
                let c = Cell::new(x, y);
                match self.item_at(c) {
                    Some(Item::Arrow) => mark(2, c),
                    Some(Item::Tool) => mark(3, c),
                    None => {}
                }
            }
        }
        for &c in &spec.campsites {
            mark(4, c);
        }
        for dy in -r..=r {
            for dx in -r..=r {
                let x = me.pos.x as isize + dx;
                let y = me.pos.y as isize + dy;
                if x < 0 || y < 0 || x >= spec.width as isize || y >= spec.height as isize {
                    v[5 * plane + (dy + r) as usize * side + (dx + r) as usize] = 1.0;
                }
            }
        }
        let status = 6 * plane;
        match me.item {
            None => v[status] = 1.0,
            Some(Item::Arrow) => v[status + 1] = 1.0,
            Some(Item::Tool) => v[status + 2] = 1.0,
        }
        if self.is_campsite(me.pos) {
            v[status + 3] = 1.0;
        }
        Observation(v)
    }

    pub fn observations(&self) -> Vec<Observation> {
        (0..self.num_agents()).map(|i| self.observe(i)).collect()
    }

    pub fn summary(&self) -> StateSummary {
        let spec = self.spec();
        let sx = (spec.width.max(2) - 1) as f32;
        let sy = (spec.height.max(2) - 1) as f32;
        let mut out = Vec::with_capacity(STATE_DIM);
        let mut fractions = Vec::with_capacity(6);
        let mut pool = |cells: Vec<Cell>, spawned: usize| {
            let n = cells.len();
            let (mx, my) = if n == 0 {
                (0.0, 0.0)
            } else {
                let (tx, ty) = cells
                    .iter()
                    .fold((0.0f32, 0.0f32), |(a, b), c| (a + c.x as f32, b + c.y as f32));
                (tx / n as f32 / sx, ty / n as f32 / sy)
            };
            out.push(mx);
            out.push(my);
            fractions.push(if spawned == 0 { 0.0 } else { n as f32 / spawned as f32 });
        };
        let alive: Vec<&super::Predator> = self.predators().iter().filter(|p| p.alive).collect();
        let n_agents = self.num_agents();
        pool(alive.iter().map(|p| p.pos).collect(), n_agents);
        pool(alive.iter().filter(|p| p.is_archer()).map(|p| p.pos).collect(), n_agents);
        pool(alive.iter().filter(|p| p.is_defender()).map(|p| p.pos).collect(), n_agents);
        pool(
            self.prey().iter().filter(|p| p.alive).map(|p| p.pos).collect(),
            spec.prey.len(),
        );
        let remaining = |kind: Item| -> Vec<Cell> {
            let cells = if kind == Item::Arrow { &spec.arrows } else { &spec.tools };
            cells
                .iter()
                .copied()
                .filter(|&c| self.item_at(c) == Some(kind))
                .collect()
        };
        pool(remaining(Item::Arrow), spec.arrows.len());
        pool(remaining(Item::Tool), spec.tools.len());
        out.extend(fractions);
        let defended = if spec.campsites.is_empty() {
            0.0
        } else {
            spec.campsites.iter().filter(|&&c| self.is_defended(c)).count() as f32
                / spec.campsites.len() as f32
        };
        out.push(defended);
        out.push(self.t() as f32 / spec.max_steps as f32);
        debug_assert_eq!(out.len(), STATE_DIM);
        StateSummary(out)
    }
}
