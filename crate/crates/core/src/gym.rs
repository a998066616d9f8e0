//! Classic single-agent view: `reset() -> obs` and
//! `step(action) -> (obs, reward, done, info)`.

use crate::error::EnvError;
use crate::model::{AgentId, AgentMap, Environment, Info};
use crate::space::Space;
use crate::value::Value;

/// Projects a one-agent [`Environment`] onto its sole agent. `last_action` and
/// the reset info have no slot in this interface and are dropped.
#[derive(Debug)]
pub struct SingleAgentView {
    inner: Environment,
    agent: AgentId,
}

pub type GymStep = (Value, f64, bool, Info);

impl SingleAgentView {
    pub fn wrap(inner: Environment) -> Result<Self, EnvError> {
        let n = inner.agents().len();
        if n != 1 {
            return Err(EnvError::MultiAgentUnsupported(n));
        }
        let agent = inner.agents().iter().next().cloned().expect("one agent");
        Ok(SingleAgentView { inner, agent })
    }

    pub fn agent(&self) -> &AgentId {
        &self.agent
    }

    pub fn reset(&mut self, seed: Option<u64>) -> Result<Value, EnvError> {
        let mut r = self.inner.reset(seed)?;
        r.observation
            .remove(&self.agent)
            .ok_or_else(|| EnvError::Internal("reset omitted the wrapped agent".into()))
    }

    pub fn step(&mut self, action: Value) -> Result<GymStep, EnvError> {
        let actions = AgentMap::from([(self.agent.clone(), action)]);
        let mut r = self.inner.step(&actions)?;
        let missing = || EnvError::Internal("step omitted the wrapped agent".into());
        let obs = r.observation.remove(&self.agent).ok_or_else(missing)?;
        let reward = r.reward.remove(&self.agent).ok_or_else(missing)?;
        let done = r.done.remove(&self.agent).ok_or_else(missing)?;
        Ok((obs, reward, done, r.info))
    }

    pub fn close(&mut self) -> Result<(), EnvError> {
        self.inner.close()
    }

    pub fn action_space(&self) -> Result<Space, EnvError> {
        Ok(self.inner.action_space()?[&self.agent].clone())
    }

    pub fn observation_space(&self) -> Result<Space, EnvError> {
        Ok(self.inner.observation_space()?[&self.agent].clone())
    }

    pub fn into_inner(self) -> Environment {
        self.inner
    }
}
