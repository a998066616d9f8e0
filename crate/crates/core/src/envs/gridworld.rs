use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Arc;

use crate::error::EnvError;
use crate::model::{AgentId, AgentMap, EnvironmentAdapter, Info, ResetResult, StepResult};
use crate::side_channel::{SideChannel, SideChannelHost};
use crate::space::{BoxSpace, Space};
use crate::value::{Tensor, Value};

pub const UP: i64 = 0;
pub const DOWN: i64 = 1;
pub const LEFT: i64 = 2;
pub const RIGHT: i64 = 3;
pub const STAY: i64 = 4;
pub const NUM_ACTIONS: u64 = 5;

pub const STEP_REWARD: f64 = -1.0;
pub const GOAL_REWARD: f64 = 10.0;

pub type Cell = (u32, u32);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridworldConfig {
    pub width: u32,
    pub height: u32,
    pub starts: Vec<Cell>,
    pub goals: Vec<Cell>,
    pub max_steps: u32,
}

impl GridworldConfig {
    /// Agent `i` starts at `(i mod width, 0)`; every goal is the far corner.
    pub fn new(width: u32, height: u32, agents: usize) -> Result<Self, EnvError> {
        if width == 0 || height == 0 {
            return Err(EnvError::InvalidConfig("grid dimensions must be positive".into()));
        }
        let starts = (0..agents).map(|i| ((i as u64 % width as u64) as u32, 0)).collect();
        let goals = vec![(width - 1, height - 1); agents];
        let cfg = GridworldConfig {
            width,
            height,
            starts,
            goals,
            max_steps: 200,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn agents(&self) -> usize {
        self.starts.len()
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let n = self.starts.len();
        if n == 0 {
            return Err(EnvError::InvalidConfig("gridworld needs at least one agent".into()));
        }
        if self.goals.len() != n {
            return Err(EnvError::InvalidConfig("one goal per agent required".into()));
        }
        if n as u64 > self.width as u64 * self.height as u64 {
            return Err(EnvError::InvalidConfig("more agents than cells".into()));
        }
        let inside = |&(x, y): &Cell| x < self.width && y < self.height;
        if !self.starts.iter().all(inside) || !self.goals.iter().all(inside) {
            return Err(EnvError::InvalidConfig("start or goal outside the grid".into()));
        }
        if self.max_steps == 0 {
            return Err(EnvError::InvalidConfig("max_steps must be positive".into()));
        }
        Ok(())
    }
}

/// Deterministic grid with simultaneous moves, clamped at the walls.
///
/// Each step costs -1, except the step that lands an agent on its goal, which
/// pays +10 and marks it done. Done agents stay frozen with reward 0 until the
/// episode ends (all agents done or `max_steps` reached).
#[derive(Debug)]
pub struct Gridworld {
    config: GridworldConfig,
    ids: Vec<AgentId>,
    positions: Vec<Cell>,
    done: Vec<bool>,
    steps: u32,
    max_steps: Arc<AtomicU32>,
    channel: SideChannelHost,
}

impl Gridworld {
    pub fn new(config: GridworldConfig) -> Result<Self, EnvError> {
        config.validate()?;
        let n = config.agents();
        let max_steps = Arc::new(AtomicU32::new(config.max_steps));
        let channel = SideChannelHost::new();
        let knob = Arc::clone(&max_steps);
        channel
            .env_end()
            .register("env::max_steps", move |m| {
                if let Value::Int(v) = m.value() {
                    if *v > 0 && *v <= u32::MAX as i64 {
                        knob.store(*v as u32, Ordering::Relaxed);
                    }
                }
            })
            .expect("fresh dispatcher");
        Ok(Gridworld {
            ids: (0..n).map(AgentId::indexed).collect(),
            positions: config.starts.clone(),
            done: vec![false; n],
            steps: 0,
            max_steps,
            channel,
            config,
        })
    }

    pub fn config(&self) -> &GridworldConfig {
        &self.config
    }

    pub fn positions(&self) -> &[Cell] {
        &self.positions
    }

    fn observe(&self) -> AgentMap<Value> {
        self.ids
            .iter()
            .zip(&self.positions)
            .map(|(id, &(x, y))| (id.clone(), cell_value(x, y)))
            .collect()
    }

    fn moved(&self, (x, y): Cell, action: i64) -> Cell {
        match action {
            UP if y + 1 < self.config.height => (x, y + 1),
            DOWN if y > 0 => (x, y - 1),
            LEFT if x > 0 => (x - 1, y),
            RIGHT if x + 1 < self.config.width => (x + 1, y),
            _ => (x, y),
        }
    }

    /// Side-channel endpoint owned by the environment.
    pub fn env_channel(&self) -> &SideChannel {
        self.channel.env_end()
    }
}

pub fn cell_value(x: u32, y: u32) -> Value {
    Value::Tensor(Tensor::from_i64(vec![2], &[x as i64, y as i64]).expect("shape [2]"))
}

impl EnvironmentAdapter for Gridworld {
    fn reset(&mut self, _seed: Option<u64>) -> Result<ResetResult, EnvError> {
        self.positions = self.config.starts.clone();
        self.done = self
            .positions
            .iter()
            .zip(&self.config.goals)
            .map(|(p, g)| p == g)
            .collect();
        self.steps = 0;
        Ok(ResetResult {
            observation: self.observe(),
            info: Info::new(),
        })
    }

    fn step(&mut self, actions: &AgentMap<Value>) -> Result<StepResult, EnvError> {
        if self.done.iter().all(|&d| d) {
            return Err(EnvError::EpisodeOver);
        }
        let mut reward = AgentMap::new();
        for (i, id) in self.ids.iter().enumerate() {
            let action = actions
                .get(id)
                .and_then(Value::as_int)
                .ok_or_else(|| EnvError::MissingAgent(id.to_string()))?;
            if self.done[i] {
                reward.insert(id.clone(), 0.0);
                continue;
            }
            self.positions[i] = self.moved(self.positions[i], action);
            if self.positions[i] == self.config.goals[i] {
                self.done[i] = true;
                reward.insert(id.clone(), GOAL_REWARD);
            } else {
                reward.insert(id.clone(), STEP_REWARD);
            }
        }
        self.steps += 1;
        if self.steps >= self.max_steps.load(Ordering::Relaxed) {
            self.done.iter_mut().for_each(|d| *d = true);
        }
        if self.done.iter().all(|&d| d) {
            let _ = self.channel.env_end().send("env::episode_end", Value::Int(self.steps as i64));
        }
        Ok(StepResult {
            observation: self.observe(),
            reward,
            done: self.ids.iter().cloned().zip(self.done.iter().copied()).collect(),
            last_action: actions.clone(),
            info: Info::new(),
        })
    }

    fn close(&mut self) -> Result<(), EnvError> {
        self.channel.env_end().close();
        Ok(())
    }

    fn observation_space(&self) -> AgentMap<Space> {
        let low = Tensor::from_i64(vec![2], &[0, 0]).expect("shape [2]");
        let high = Tensor::from_i64(vec![2], &[self.config.width as i64 - 1, self.config.height as i64 - 1])
            .expect("shape [2]");
        let space = Space::Box(BoxSpace::new(low, high).expect("valid bounds"));
        self.ids.iter().map(|id| (id.clone(), space.clone())).collect()
    }

    fn action_space(&self) -> AgentMap<Space> {
        self.ids
            .iter()
            .map(|id| (id.clone(), Space::Discrete { n: NUM_ACTIONS }))
            .collect()
    }

    fn open_side_channel(&mut self) -> Result<SideChannel, EnvError> {
        Ok(self.channel.open()?)
    }
}
