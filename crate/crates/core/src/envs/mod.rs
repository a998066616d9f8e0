//! Deterministic reference environments and the `--env` selection strings
//! that name them (`gridworld:5x5:n2`, `pendulum`).

mod gridworld;
mod pendulum;

use std::fmt;
use std::str::FromStr;

pub use gridworld::{cell_value, Cell, Gridworld, GridworldConfig, DOWN, GOAL_REWARD, LEFT, NUM_ACTIONS, RIGHT, STAY, STEP_REWARD, UP};
pub use pendulum::{wrap_angle, Pendulum, PendulumConfig};

use crate::error::EnvError;
use crate::model::{EnvironmentAdapter, Environment};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvSpec {
    Gridworld { width: u32, height: u32, agents: usize },
    Pendulum,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid environment spec {spec:?}: {reason}")]
pub struct EnvSpecError {
    pub spec: String,
    pub reason: String,
}

impl FromStr for EnvSpec {
    type Err = EnvSpecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let fail = |reason: &str| EnvSpecError {
            spec: s.to_owned(),
            reason: reason.to_owned(),
        };
        let mut parts = s.split(':');
        match parts.next() {
            Some("pendulum") => {
                if parts.next().is_some() {
                    return Err(fail("pendulum takes no parameters"));
                }
                Ok(EnvSpec::Pendulum)
            }
            Some("gridworld") => {
                let dims = parts.next().ok_or_else(|| fail("expected gridworld:WxH:nN"))?;
                let (w, h) = dims.split_once('x').ok_or_else(|| fail("dimensions must look like 5x5"))?;
                let width: u32 = w.parse().map_err(|_| fail("bad width"))?;
                let height: u32 = h.parse().map_err(|_| fail("bad height"))?;
                let agents = match parts.next() {
                    None => 1,
                    Some(n) => n
                        .strip_prefix('n')
                        .and_then(|n| n.parse::<usize>().ok())
                        .ok_or_else(|| fail("agent count must look like n2"))?,
                };
                if parts.next().is_some() {
                    return Err(fail("too many fields"));
                }
                GridworldConfig::new(width, height, agents).map_err(|e| fail(&e.to_string()))?;
                Ok(EnvSpec::Gridworld { width, height, agents })
            }
            _ => Err(fail("unknown environment; expected gridworld:WxH:nN or pendulum")),
        }
    }
}

impl fmt::Display for EnvSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnvSpec::Gridworld { width, height, agents } => write!(f, "gridworld:{width}x{height}:n{agents}"),
            EnvSpec::Pendulum => f.write_str("pendulum"),
        }
    }
}

impl EnvSpec {
    pub fn adapter(&self) -> Result<Box<dyn EnvironmentAdapter>, EnvError> {
        Ok(match *self {
            EnvSpec::Gridworld { width, height, agents } => {
                Box::new(Gridworld::new(GridworldConfig::new(width, height, agents)?)?)
            }
            EnvSpec::Pendulum => Box::new(Pendulum::new(PendulumConfig::default())?),
        })
    }

    pub fn build(&self) -> Result<Environment, EnvError> {
        Ok(Environment::from_boxed(self.adapter()?))
    }
}
