//! Tabular epsilon-greedy Q-learning over discrete-action environments.
//!
//! Each agent keeps its own table keyed by the joint observation of all
//! agents. Greedy choices break ties toward the lowest action index, and all
//! randomness comes from one seeded stream, so a run is reproducible.

use std::collections::HashMap;
use std::fmt::Write as _;

use envlink::prng::SplitMix64;
use envlink::{AgentId, AgentMap, Environment, Space, Value};

use crate::Failure;

#[derive(Debug, Clone, PartialEq)]
pub struct QConfig {
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub episodes: u64,
    pub eval_every: u64,
    pub eval_rollouts: u64,
    pub seed: u64,
}

impl Default for QConfig {
    fn default() -> Self {
        QConfig {
            alpha: 0.1,
            gamma: 0.99,
            epsilon: 0.1,
            episodes: 500,
            eval_every: 50,
            eval_rollouts: 5,
            seed: 0,
        }
    }
}

impl QConfig {
    pub fn validate(&self) -> Result<(), Failure> {
        let bad = |what: &str| Err(Failure::Usage(what.to_owned()));
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad("alpha must be in (0, 1]");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must be in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return bad("epsilon must be in [0, 1]");
        }
        if self.eval_every == 0 || self.eval_rollouts == 0 {
            return bad("evaluation interval and rollout count must be positive");
        }
        Ok(())
    }
}

type State = Vec<i64>;

/// Greedy action under `q`: lowest index among the maxima.
pub fn argmax(q: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in q.iter().enumerate().skip(1) {
        if v > q[best] {
            best = i;
        }
    }
    best
}

pub struct QLearner {
    config: QConfig,
    agents: Vec<AgentId>,
    actions: usize,
    tables: Vec<HashMap<State, Vec<f64>>>,
    rng: SplitMix64,
}

fn joint_state(obs: &AgentMap<Value>) -> Result<State, Failure> {
    let mut s = Vec::new();
    for v in obs.values() {
        let cells = v
            .as_tensor()
            .and_then(|t| t.to_i64_vec())
            .ok_or_else(|| Failure::Usage("Q-learning needs integer tensor observations".into()))?;
        s.extend(cells);
    }
    Ok(s)
}

impl QLearner {
    pub fn new(env: &Environment, config: QConfig) -> Result<QLearner, Failure> {
        config.validate()?;
        if env.controlled_agents() != env.agents() {
            return Err(Failure::Usage("Q-learning must control every agent".into()));
        }
        let spaces = env.action_space()?;
        let mut actions = None;
        for space in spaces.values() {
            match space {
                Space::Discrete { n } if actions.is_none() || actions == Some(*n) => actions = Some(*n),
                _ => return Err(Failure::Usage("Q-learning needs one shared Discrete action space".into())),
            }
        }
        let agents: Vec<AgentId> = env.agents().iter().cloned().collect();
        Ok(QLearner {
            tables: vec![HashMap::new(); agents.len()],
            agents,
            actions: actions.unwrap_or(0) as usize,
            rng: SplitMix64::new(config.seed),
            config,
        })
    }

    fn q(&self, agent: usize, s: &State) -> Vec<f64> {
        self.tables[agent].get(s).cloned().unwrap_or_else(|| vec![0.0; self.actions])
    }

    fn act(&mut self, s: &State, explore: bool) -> AgentMap<Value> {
        let mut out = AgentMap::new();
        for i in 0..self.agents.len() {
            let a = if explore && self.rng.next_f64() < self.config.epsilon {
                self.rng.below(self.actions as u64) as usize
            } else {
                argmax(&self.q(i, s))
            };
            out.insert(self.agents[i].clone(), Value::Int(a as i64));
        }
        out
    }

    /// Runs one training episode and returns its summed reward.
    pub fn train_episode(&mut self, env: &mut Environment) -> Result<f64, Failure> {
        let mut s = joint_state(&env.reset(Some(self.config.seed))?.observation)?;
        let mut done = vec![false; self.agents.len()];
        let mut total = 0.0;
        loop {
            let actions = self.act(&s, true);
            let r = env.step(&actions)?;
            let next = joint_state(&r.observation)?;
            for (i, agent) in self.agents.iter().enumerate() {
                if done[i] {
                    continue;
                }
                let a = actions[agent].as_int().unwrap() as usize;
                let reward = r.reward[agent];
                let agent_done = r.done[agent];
                let target = if agent_done {
                    reward
                } else {
                    reward + self.config.gamma * self.q(i, &next).into_iter().fold(f64::NEG_INFINITY, f64::max)
                };
                let row = self.tables[i].entry(s.clone()).or_insert_with(|| vec![0.0; self.actions]);
                row[a] += self.config.alpha * (target - row[a]);
                done[i] = agent_done;
            }
            total += r.reward.values().sum::<f64>();
            s = next;
            if r.all_done() {
                return Ok(total);
            }
        }
    }

    /// Mean summed reward of greedy rollouts.
    pub fn evaluate(&mut self, env: &mut Environment) -> Result<f64, Failure> {
        let mut sum = 0.0;
        for _ in 0..self.config.eval_rollouts {
            let mut s = joint_state(&env.reset(Some(self.config.seed))?.observation)?;
            loop {
                let actions = self.act(&s, false);
                let r = env.step(&actions)?;
                sum += r.reward.values().sum::<f64>();
                s = joint_state(&r.observation)?;
                if r.all_done() {
                    break;
                }
            }
        }
        Ok(sum / self.config.eval_rollouts as f64)
    }

    /// Full training run: `(episode, mean greedy return)` every `eval_every` episodes.
    pub fn train(&mut self, env: &mut Environment) -> Result<Vec<(u64, f64)>, Failure> {
        let mut curve = Vec::new();
        for episode in 1..=self.config.episodes {
            self.train_episode(env)?;
            if episode % self.config.eval_every == 0 {
                curve.push((episode, self.evaluate(env)?));
            }
        }
        Ok(curve)
    }
}

pub fn curve_csv(curve: &[(u64, f64)]) -> String {
    let mut out = String::from("episode,mean_eval_return\n");
    for (e, r) in curve {
        writeln!(out, "{e},{r}").unwrap();
    }
    out
}
