use std::f64::consts::PI;

use crate::error::EnvError;
use crate::model::{AgentId, AgentMap, EnvironmentAdapter, Info, ResetResult, StepResult};
use crate::prng::{entropy_seed, SplitMix64};
use crate::side_channel::{SideChannel, SideChannelHost};
use crate::space::{BoxSpace, Space};
use crate::value::{DType, Tensor, Value};

#[derive(Debug, Clone, PartialEq)]
pub struct PendulumConfig {
    pub g: f64,
    pub m: f64,
    pub l: f64,
    pub dt: f64,
    pub max_torque: f64,
    pub max_speed: f64,
    pub max_steps: u32,
}

impl Default for PendulumConfig {
    fn default() -> Self {
        PendulumConfig {
            g: 10.0,
            m: 1.0,
            l: 1.0,
            dt: 0.05,
            max_torque: 2.0,
            max_speed: 8.0,
            max_steps: 200,
        }
    }
}

impl PendulumConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        let positive = [self.g, self.m, self.l, self.dt, self.max_torque, self.max_speed]
            .iter()
            .all(|&x| x > 0.0 && x.is_finite());
        if !positive || self.max_steps == 0 {
            return Err(EnvError::InvalidConfig("pendulum parameters must be positive".into()));
        }
        Ok(())
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Torque-controlled pendulum; `theta = 0` is upright. Single agent `agent0`.
#[derive(Debug)]
pub struct Pendulum {
    config: PendulumConfig,
    agent: AgentId,
    theta: f64,
    theta_dot: f64,
    steps: u32,
    channel: SideChannelHost,
}

impl Pendulum {
    pub fn new(config: PendulumConfig) -> Result<Self, EnvError> {
        config.validate()?;
        Ok(Pendulum {
            config,
            agent: AgentId::indexed(0),
            theta: 0.0,
            theta_dot: 0.0,
            steps: 0,
            channel: SideChannelHost::new(),
        })
    }

    pub fn state(&self) -> (f64, f64) {
        (self.theta, self.theta_dot)
    }

    /// Overrides the current state, e.g. to start from an equilibrium.
    pub fn set_state(&mut self, theta: f64, theta_dot: f64) {
        self.theta = theta;
        self.theta_dot = theta_dot;
    }

    fn observe(&self) -> AgentMap<Value> {
        let t = Tensor::from_f64(vec![3], &[self.theta.cos(), self.theta.sin(), self.theta_dot]).expect("shape [3]");
        AgentMap::from([(self.agent.clone(), Value::Tensor(t))])
    }

    /// Applies one tick of torque `torque`, returning the reward.
    pub fn advance(&mut self, torque: f64) -> f64 {
        let c = &self.config;
        let a = torque.clamp(-c.max_torque, c.max_torque);
        let accel = 3.0 * c.g / (2.0 * c.l) * self.theta.sin() + 3.0 / (c.m * c.l * c.l) * a;
        let theta_dot = (self.theta_dot + accel * c.dt).clamp(-c.max_speed, c.max_speed);
        let theta = self.theta + theta_dot * c.dt;
        self.theta = theta;
        self.theta_dot = theta_dot;
        let angle = wrap_angle(theta);
        -(angle * angle + 0.1 * theta_dot * theta_dot + 0.001 * a * a)
    }
}

impl EnvironmentAdapter for Pendulum {
    fn reset(&mut self, seed: Option<u64>) -> Result<ResetResult, EnvError> {
        let mut rng = SplitMix64::new(seed.unwrap_or_else(entropy_seed));
        self.theta = rng.uniform(-PI, PI);
        self.theta_dot = rng.uniform(-1.0, 1.0);
        self.steps = 0;
        Ok(ResetResult {
            observation: self.observe(),
            info: Info::new(),
        })
    }

    fn step(&mut self, actions: &AgentMap<Value>) -> Result<StepResult, EnvError> {
        if self.steps >= self.config.max_steps {
            return Err(EnvError::EpisodeOver);
        }
        let action = actions
            .get(&self.agent)
            .ok_or_else(|| EnvError::MissingAgent(self.agent.to_string()))?;
        let torque = action
            .as_tensor()
            .and_then(|t| t.to_f64_vec())
            .and_then(|v| v.first().copied())
            .ok_or_else(|| EnvError::SpaceMismatch("pendulum torque must be an f64 tensor of shape [1]".into()))?;
        let reward = self.advance(torque);
        self.steps += 1;
        let done = self.steps >= self.config.max_steps;
        if done {
            let _ = self.channel.env_end().send("env::episode_end", Value::Int(self.steps as i64));
        }
        Ok(StepResult {
            observation: self.observe(),
            reward: AgentMap::from([(self.agent.clone(), reward)]),
            done: AgentMap::from([(self.agent.clone(), done)]),
            last_action: actions.clone(),
            info: Info::new(),
        })
    }

    fn close(&mut self) -> Result<(), EnvError> {
        self.channel.env_end().close();
        Ok(())
    }

    fn observation_space(&self) -> AgentMap<Space> {
        let low = Tensor::from_f64(vec![3], &[-1.0, -1.0, -self.config.max_speed]).expect("shape [3]");
        let high = Tensor::from_f64(vec![3], &[1.0, 1.0, self.config.max_speed]).expect("shape [3]");
        AgentMap::from([(self.agent.clone(), Space::Box(BoxSpace::new(low, high).expect("valid bounds")))])
    }

    fn action_space(&self) -> AgentMap<Space> {
        let space = BoxSpace::uniform(DType::F64, vec![1], -self.config.max_torque, self.config.max_torque)
            .expect("valid bounds");
        AgentMap::from([(self.agent.clone(), Space::Box(space))])
    }

    fn open_side_channel(&mut self) -> Result<SideChannel, EnvError> {
        Ok(self.channel.open()?)
    }
}
