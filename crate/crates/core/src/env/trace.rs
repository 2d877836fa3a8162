use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    reset, run_episode, Action, ActionMask, Actor, EnvError, EnvState, EpisodeRecord, MapSpec,
    Observation, StepOutcome,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub map: String,
    pub map_hash: String,
    pub seed: u64,
    pub agents: usize,
    pub prey: usize,
    /// Hash of the configuration that produced the trace, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

/// One resolved step. `positions` are predator cells at the start of the
/// step (`None` for dead agents), i.e. where each agent acted from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub t: usize,
    pub actions: Vec<Option<u8>>,
    pub positions: Vec<Option<[usize; 2]>>,
    pub reward: f64,
    pub terminal: bool,
    pub kills: usize,
    pub breach: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Line {
    Header(TraceHeader),
    Step(TraceStep),
}

/// A replayable episode: header plus line-delimited step records.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeTrace {
    pub header: TraceHeader,
    pub steps: Vec<TraceStep>,
}

impl EpisodeTrace {
    pub fn new(spec: &MapSpec, seed: u64) -> Self {
        Self {
            header: TraceHeader {
                map: spec.name.clone(),
                map_hash: spec.content_hash(),
                seed,
                agents: spec.num_agents(),
                prey: spec.prey.len(),
                config_hash: None,
            },
            steps: Vec::new(),
        }
    }

    /// Appends a step; `before` is the state the actions were chosen in.
    pub fn record(&mut self, before: &EnvState, actions: &[Option<Action>], out: &StepOutcome) {
        self.steps.push(TraceStep {
            t: before.t(),
            actions: actions.iter().map(|a| a.map(|a| a as u8)).collect(),
            positions: before
                .predators()
                .iter()
                .map(|p| p.alive.then_some([p.pos.x, p.pos.y]))
                .collect(),
            reward: out.reward,
            terminal: out.terminal,
            kills: out.info.kills,
            breach: out.info.breach,
        });
    }

    pub fn episode_return(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    pub fn breached(&self) -> bool {
        self.steps.iter().any(|s| s.breach)
    }

    pub fn kills(&self) -> usize {
        self.steps.iter().map(|s| s.kills).sum()
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn write_jsonl(&self, mut w: impl Write) -> std::io::Result<()> {
        serde_json::to_writer(&mut w, &Line::Header(self.header.clone()))?;
        w.write_all(b"\n")?;
        for s in &self.steps {
            serde_json::to_writer(&mut w, &Line::Step(s.clone()))?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Reads every episode in a stream of concatenated traces.
    pub fn read_jsonl(r: impl BufRead) -> Result<Vec<Self>, EnvError> {
        let mut out: Vec<Self> = Vec::new();
        for (n, line) in r.lines().enumerate() {
            let line = line.map_err(|e| EnvError::Trace(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: Line = serde_json::from_str(&line)
                .map_err(|e| EnvError::Trace(format!("line {}: {e}", n + 1)))?;
            match parsed {
                Line::Header(header) => out.push(Self {
                    header,
                    steps: Vec::new(),
                }),
                Line::Step(step) => out
                    .last_mut()
                    .ok_or_else(|| EnvError::Trace("step before header".into()))?
                    .steps
                    .push(step),
            }
        }
        Ok(out)
    }

    /// Re-simulates the stored actions from the stored seed and checks that
    /// rewards and terminal flags match.
    pub fn replay(&self, spec: impl Into<Arc<MapSpec>>) -> Result<EnvState, EnvError> {
        let (mut state, _, _) = reset(spec, self.header.seed)?;
        for s in &self.steps {
            let actions = self.actions_at(s.t)?;
            let out = state.step(&actions)?;
            if out.reward != s.reward || out.terminal != s.terminal {
                return Err(EnvError::Trace(format!("replay diverged at t={}", s.t)));
            }
        }
        Ok(state)
    }

    /// Rebuilds the learner-side record by replaying the stored actions.
    pub fn to_record(&self, spec: &Arc<MapSpec>, demo: bool) -> Result<EpisodeRecord, EnvError> {
        let mut actor = ReplayActor { trace: self, t: 0 };
        let (rec, replayed) = run_episode(spec, self.header.seed, &mut actor, demo)?;
        if replayed.steps != self.steps {
            return Err(EnvError::Trace(format!(
                "replay of seed {} diverged from the stored trace",
                self.header.seed
            )));
        }
        Ok(rec)
    }

    fn actions_at(&self, t: usize) -> Result<Vec<Option<Action>>, EnvError> {
        let step = self
            .steps
            .get(t)
            .ok_or_else(|| EnvError::Trace(format!("trace ends before t={t}")))?;
        step.actions
            .iter()
            .map(|a| match a {
                None => Ok(None),
                Some(i) => Action::from_index(*i as usize)
                    .map(Some)
                    .ok_or_else(|| EnvError::Trace(format!("bad action index {i}"))),
            })
            .collect()
    }
}

struct ReplayActor<'a> {
    trace: &'a EpisodeTrace,
    t: usize,
}

impl Actor for ReplayActor<'_> {
    fn begin_episode(&mut self, _: &EnvState) {
        self.t = 0;
    }

    fn act(
        &mut self,
        _: &EnvState,
        _: &[Observation],
        _: &[Option<ActionMask>],
    ) -> Result<Vec<Option<Action>>, EnvError> {
        let a = self.trace.actions_at(self.t)?;
        self.t += 1;
        Ok(a)
    }
}
