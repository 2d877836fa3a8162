use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::EnvError;

/// Grid coordinate; `y = 0` is the top row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub x: usize,
    pub y: usize,
}

impl Cell {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }

    pub fn manhattan(self, other: Cell) -> usize {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }

    pub fn chebyshev(self, other: Cell) -> usize {
        self.x.abs_diff(other.x).max(self.y.abs_diff(other.y))
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rewards {
    /// Per prey killed.
    pub kill: f64,
    /// Once, when a prey enters an undefended campsite.
    pub breach: f64,
    /// Every step.
    pub step: f64,
}

impl Default for Rewards {
    fn default() -> Self {
        Self {
            kill: 1.0,
            breach: -5.0,
            step: -0.01,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreySpawn {
    pub cell: Cell,
    pub smart: bool,
}

/// Static layout of one game: spawn cells, items, campsites and scalars.
///
/// Smart prey are listed first so they move before ordinary prey.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    pub name: String,
    pub width: usize,
    pub height: usize,
    pub agents: Vec<Cell>,
    pub prey: Vec<PreySpawn>,
    pub campsites: Vec<Cell>,
    pub arrows: Vec<Cell>,
    pub tools: Vec<Cell>,
    pub max_steps: usize,
    pub radius: usize,
    pub rewards: Rewards,
}

/// On-disk form: the grid as character rows plus scalar fields.
#[derive(Debug, Serialize, Deserialize)]
struct MapFile {
    name: String,
    grid: String,
    #[serde(default = "default_max_steps")]
    max_steps: usize,
    #[serde(default = "default_radius")]
    radius: usize,
    #[serde(default)]
    rewards: Rewards,
}

fn default_max_steps() -> usize {
    60
}

fn default_radius() -> usize {
    4
}

pub const PRETRAIN_MAP: &str = include_str!("../../maps/pretrain.toml");
pub const MODERATE_MAP: &str = include_str!("../../maps/moderate.toml");
pub const HARD_MAP: &str = include_str!("../../maps/hard.toml");

impl MapSpec {
    /// 4 agents, 2 campsites, 28 prey on a 10x10 grid.
    pub fn pretrain() -> Self {
        Self::from_toml(PRETRAIN_MAP).expect("bundled map parses")
    }

    /// 8 agents, 2 campsites on a 14x14 grid.
    pub fn moderate() -> Self {
        Self::from_toml(MODERATE_MAP).expect("bundled map parses")
    }

    /// 8 agents, 3 campsites on a 14x14 grid.
    pub fn hard() -> Self {
        Self::from_toml(HARD_MAP).expect("bundled map parses")
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "pretrain" => Some(Self::pretrain()),
            "moderate" => Some(Self::moderate()),
            "hard" => Some(Self::hard()),
            _ => None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, EnvError> {
        let file: MapFile = toml::from_str(text).map_err(|e| EnvError::MapParse(e.to_string()))?;
        let mut spec = Self::from_grid(&file.name, &file.grid)?;
        spec.max_steps = file.max_steps;
        spec.radius = file.radius;
        spec.rewards = file.rewards;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EnvError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| EnvError::MapParse(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_toml(&text)
    }

    /// Parses character rows: `.` empty, `A` agent, `p` prey, `P` smart prey,
    /// `a` arrow, `d` defence tool, `C` campsite.
    pub fn from_grid(name: &str, grid: &str) -> Result<Self, EnvError> {
        let rows: Vec<&str> = grid
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect();
        if rows.is_empty() {
            return Err(EnvError::InvalidMap("grid has no rows".into()));
        }
        let width = rows[0].chars().count();
        let mut spec = MapSpec {
            name: name.to_string(),
            width,
            height: rows.len(),
            agents: Vec::new(),
            prey: Vec::new(),
            campsites: Vec::new(),
            arrows: Vec::new(),
            tools: Vec::new(),
            max_steps: default_max_steps(),
            radius: default_radius(),
            rewards: Rewards::default(),
        };
        let mut smart = Vec::new();
        for (y, row) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return Err(EnvError::InvalidMap(format!(
                    "row {y} has {} cells, expected {width}",
                    row.chars().count()
                )));
            }
            for (x, ch) in row.chars().enumerate() {
                let cell = Cell::new(x, y);
                match ch {
                    '.' => {}
                    'A' => spec.agents.push(cell),
                    'p' => spec.prey.push(PreySpawn { cell, smart: false }),
                    'P' => smart.push(PreySpawn { cell, smart: true }),
                    'a' => spec.arrows.push(cell),
                    'd' => spec.tools.push(cell),
                    'C' => spec.campsites.push(cell),
                    other => {
                        return Err(EnvError::InvalidMap(format!(
                            "unknown character {other:?} at {cell}"
                        )))
                    }
                }
            }
        }
        smart.extend(spec.prey.drain(..));
        spec.prey = smart;
        spec.validate()?;
        Ok(spec)
    }

    /// Renders the grid rows in the file alphabet.
    pub fn grid_rows(&self) -> Vec<String> {
        let mut grid = vec![vec!['.'; self.width]; self.height];
        let mut put = |c: Cell, ch: char| grid[c.y][c.x] = ch;
        for &c in &self.agents {
            put(c, 'A');
        }
        for p in &self.prey {
            put(p.cell, if p.smart { 'P' } else { 'p' });
        }
        for &c in &self.arrows {
            put(c, 'a');
        }
        for &c in &self.tools {
            put(c, 'd');
        }
        for &c in &self.campsites {
            put(c, 'C');
        }
        grid.into_iter().map(|r| r.into_iter().collect()).collect()
    }

    pub fn to_toml(&self) -> String {
        let file = MapFile {
            name: self.name.clone(),
            grid: format!("\n{}\n", self.grid_rows().join("\n")),
            max_steps: self.max_steps,
            radius: self.radius,
            rewards: self.rewards,
        };
        toml::to_string(&file).expect("map serializes")
    }

    /// Short content hash of the canonical file form.
    pub fn content_hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn contains(&self, c: Cell) -> bool {
        c.x < self.width && c.y < self.height
    }

    /// Observation length for this map's view radius.
    pub fn obs_dim(&self) -> usize {
        super::observation_dim(self.radius)
    }

    /// Returns the first violated constraint.
    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |msg: String| Err(EnvError::InvalidMap(msg));
        if self.width == 0 || self.height == 0 {
            return bad("grid is empty".into());
        }
        if self.agents.is_empty() {
            return bad("map has no agents".into());
        }
        if self.prey.is_empty() {
            return bad("map has no prey".into());
        }
        if self.max_steps == 0 {
            return bad("max_steps must be positive".into());
        }
        let mut seen = std::collections::HashSet::new();
        let cells = self
            .agents
            .iter()
            .chain(self.prey.iter().map(|p| &p.cell))
            .chain(&self.campsites)
            .chain(&self.arrows)
            .chain(&self.tools);
        for &c in cells {
            if !self.contains(c) {
                return bad(format!("cell {c} lies outside the {}x{} grid", self.width, self.height));
            }
            if !seen.insert(c) {
                return bad(format!("cell {c} holds more than one object"));
            }
        }
        let smart = self.prey.iter().filter(|p| p.smart).count();
        match (self.campsites.is_empty(), smart) {
            (false, 1) | (true, 0) => {}
            (false, n) => return bad(format!("maps with campsites need exactly one smart prey, found {n}")),
            (true, n) => return bad(format!("smart prey without campsites ({n})")),
        }
        if self.prey.iter().skip(smart).any(|p| p.smart) {
            return bad("smart prey must precede ordinary prey".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_maps_parse() {
        let p = MapSpec::pretrain();
        assert_eq!((p.width, p.height), (10, 10));
        assert_eq!(p.num_agents(), 4);
        assert_eq!(p.campsites.len(), 2);
        assert_eq!(p.prey.len(), 28);
        let m = MapSpec::moderate();
        assert_eq!((m.width, m.height, m.num_agents(), m.campsites.len()), (14, 14, 8, 2));
        let h = MapSpec::hard();
        assert_eq!((h.width, h.height, h.num_agents(), h.campsites.len()), (14, 14, 8, 3));
        for spec in [p, m, h] {
            assert_eq!(spec.prey.iter().filter(|x| x.smart).count(), 1);
            assert!(spec.prey[0].smart);
            assert_eq!(spec.tools.len(), spec.campsites.len());
        }
    }

    #[test]
    fn smart_prey_three_moves_from_top_right_camp() {
        let p = MapSpec::pretrain();
        let top_right = *p.campsites.iter().max_by_key(|c| (c.x, std::cmp::Reverse(c.y))).unwrap();
        assert_eq!(top_right, Cell::new(9, 0));
        assert_eq!(p.prey[0].cell.manhattan(top_right), 3);
    }

    #[test]
    fn toml_roundtrip() {
        let p = MapSpec::pretrain();
        assert_eq!(MapSpec::from_toml(&p.to_toml()).unwrap(), p);
    }

    #[test]
    fn rejects_malformed_grids() {
        assert!(MapSpec::from_grid("x", "A.\nAp.").is_err());
        assert!(MapSpec::from_grid("x", "Ax\n..").is_err());
        // campsite without smart prey
        let e = MapSpec::from_grid("x", "ACp").unwrap_err();
        assert!(e.to_string().contains("smart prey"), "{e}");
        assert!(MapSpec::from_grid("x", "AP").is_err());
        assert!(MapSpec::from_grid("x", "A..").is_err());
        assert!(MapSpec::from_grid("x", "Ap.").is_ok());
    }

    #[test]
    fn validate_reports_outside_cells() {
        let mut s = MapSpec::from_grid("x", "Ap.").unwrap();
        s.arrows.push(Cell::new(5, 0));
        assert!(s.validate().unwrap_err().to_string().contains("outside"));
    }
}
