//! The environment abstraction: agent-keyed results, the adapter contract
//! every backend implements, and the [`Environment`] facade that enforces the
//! lifecycle and action validation in front of any adapter.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::EnvError;
use crate::side_channel::SideChannel;
use crate::space::Space;
use crate::value::Value;

/// Non-empty agent identifier, unique within one environment.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AgentId(String);

impl AgentId {
    pub fn new(id: impl Into<String>) -> Result<AgentId, EnvError> {
        let id = id.into();
        if id.is_empty() {
            return Err(EnvError::InvalidConfig("agent id must be non-empty".into()));
        }
        Ok(AgentId(id))
    }

    /// The conventional id of the `i`-th agent: `agent{i}`.
    pub fn indexed(i: usize) -> AgentId {
        AgentId(format!("agent{i}"))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::borrow::Borrow<str> for AgentId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

pub type AgentMap<T> = BTreeMap<AgentId, T>;
pub type Info = BTreeMap<String, Value>;

/// Everything one step reports, keyed by agent, plus shared info.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: AgentMap<Value>,
    pub reward: AgentMap<f64>,
    pub done: AgentMap<bool>,
    /// The action applied to each agent this step.
    pub last_action: AgentMap<Value>,
    pub info: Info,
}

impl StepResult {
    pub fn all_done(&self) -> bool {
        !self.done.is_empty() && self.done.values().all(|&d| d)
    }

    /// Checks that the four per-agent maps are keyed by exactly `agents`.
    pub fn check_keys(&self, agents: &BTreeSet<AgentId>) -> Result<(), EnvError> {
        let same = |keys: Vec<&AgentId>| keys.len() == agents.len() && keys.iter().all(|k| agents.contains(*k));
        if same(self.observation.keys().collect())
            && same(self.reward.keys().collect())
            && same(self.done.keys().collect())
            && same(self.last_action.keys().collect())
        {
            Ok(())
        } else {
            Err(EnvError::Internal("step result key sets differ from the agent set".into()))
        }
    }
}

/// Initial observations and info returned by `reset`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResetResult {
    pub observation: AgentMap<Value>,
    pub info: Info,
}

/// Behavioral contract of an environment backend.
///
/// Adapters are driven through [`Environment`], which validates lifecycle and
/// actions before calling in, so implementations may assume well-formed input.
pub trait EnvironmentAdapter: Send {
    fn reset(&mut self, seed: Option<u64>) -> Result<ResetResult, EnvError>;

    fn step(&mut self, actions: &AgentMap<Value>) -> Result<StepResult, EnvError>;

    fn close(&mut self) -> Result<(), EnvError>;

    fn observation_space(&self) -> AgentMap<Space>;

    fn action_space(&self) -> AgentMap<Space>;

    /// Agents whose actions this adapter submits. Equal to the full agent set
    /// except for remote clients that claimed a subset.
    fn controlled_agents(&self) -> BTreeSet<AgentId> {
        self.action_space().into_keys().collect()
    }

    /// Hands out the client end of the environment's single side-channel.
    fn open_side_channel(&mut self) -> Result<SideChannel, EnvError> {
        Err(crate::side_channel::ChannelError::Unsupported.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Lifecycle {
    Fresh,
    Running,
    Finished,
    Closed,
}

/// Uniform front for any [`EnvironmentAdapter`], in-process or remote.
pub struct Environment {
    adapter: Box<dyn EnvironmentAdapter>,
    agents: BTreeSet<AgentId>,
    controlled: BTreeSet<AgentId>,
    observation_space: AgentMap<Space>,
    action_space: AgentMap<Space>,
    state: Lifecycle,
    side_channel: Option<SideChannel>,
}

impl Environment {
    pub fn new(adapter: impl EnvironmentAdapter + 'static) -> Environment {
        Environment::from_boxed(Box::new(adapter))
    }

    pub fn from_boxed(adapter: Box<dyn EnvironmentAdapter>) -> Environment {
        let observation_space = adapter.observation_space();
        let action_space = adapter.action_space();
        let agents = action_space.keys().cloned().collect();
        let controlled = adapter.controlled_agents();
        Environment {
            adapter,
            agents,
            controlled,
            observation_space,
            action_space,
            state: Lifecycle::Fresh,
            side_channel: None,
        }
    }

    fn ensure_open(&self) -> Result<(), EnvError> {
        if self.state == Lifecycle::Closed {
            Err(EnvError::EnvClosed)
        } else {
            Ok(())
        }
    }

    /// Every agent in the environment.
    pub fn agents(&self) -> &BTreeSet<AgentId> {
        &self.agents
    }

    /// Agents this caller must supply actions for on each step.
    pub fn controlled_agents(&self) -> &BTreeSet<AgentId> {
        &self.controlled
    }

    pub fn reset(&mut self, seed: Option<u64>) -> Result<ResetResult, EnvError> {
        self.ensure_open()?;
        let result = self.adapter.reset(seed)?;
        if !result.observation.keys().eq(self.agents.iter()) {
            return Err(EnvError::Internal("reset observation keys differ from the agent set".into()));
        }
        self.state = Lifecycle::Running;
        Ok(result)
    }

    pub fn step(&mut self, actions: &AgentMap<Value>) -> Result<StepResult, EnvError> {
        match self.state {
            Lifecycle::Closed => return Err(EnvError::EnvClosed),
            Lifecycle::Fresh => return Err(EnvError::NotReset),
            Lifecycle::Finished => return Err(EnvError::EpisodeOver),
            Lifecycle::Running => {}
        }
        self.validate_actions(actions)?;
        let result = self.adapter.step(actions)?;
        result.check_keys(&self.agents)?;
        for (agent, action) in actions {
            if result.last_action.get(agent) != Some(action) {
                return Err(EnvError::Internal(format!("last_action for {agent} differs from the submitted action")));
            }
        }
        if result.all_done() {
            self.state = Lifecycle::Finished;
        }
        Ok(result)
    }

    /// Checks key set and space membership without stepping.
    pub fn validate_actions(&self, actions: &AgentMap<Value>) -> Result<(), EnvError> {
        if !actions.keys().eq(self.controlled.iter()) {
            let missing: Vec<_> = self.controlled.iter().filter(|a| !actions.contains_key(*a)).collect();
            let extra: Vec<_> = actions.keys().filter(|a| !self.controlled.contains(*a)).collect();
            return Err(EnvError::MissingAgent(format!("missing {missing:?}, unexpected {extra:?}")));
        }
        for (agent, action) in actions {
            self.action_space[agent]
                .check(action)
                .map_err(|why| EnvError::SpaceMismatch(format!("{agent}: {why}")))?;
        }
        Ok(())
    }

    /// Idempotent; later operations fail with `EnvClosed`.
    pub fn close(&mut self) -> Result<(), EnvError> {
        if self.state == Lifecycle::Closed {
            return Ok(());
        }
        self.state = Lifecycle::Closed;
        if let Some(ch) = self.side_channel.take() {
            ch.close();
        }
        self.adapter.close()
    }

    pub fn is_closed(&self) -> bool {
        self.state == Lifecycle::Closed
    }

    pub fn observation_space(&self) -> Result<&AgentMap<Space>, EnvError> {
        self.ensure_open()?;
        Ok(&self.observation_space)
    }

    pub fn action_space(&self) -> Result<&AgentMap<Space>, EnvError> {
        self.ensure_open()?;
        Ok(&self.action_space)
    }

    /// The environment's side-channel, opened on first use.
    pub fn side_channel(&mut self) -> Result<&SideChannel, EnvError> {
        self.ensure_open()?;
        if self.side_channel.is_none() {
            self.side_channel = Some(self.adapter.open_side_channel()?);
        }
        Ok(self.side_channel.as_ref().unwrap())
    }
}

impl fmt::Debug for Environment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Environment")
            .field("agents", &self.agents)
            .field("state", &self.state)
            .finish()
    }
}
