//! Seeded random-policy rollouts.

use std::io::Write;

use envlink::prng::SplitMix64;
use envlink::{AgentMap, EnvError, Environment, ResetResult, StepResult, Value};
use serde_json::json;

use crate::value_json;

/// One executed round.
#[derive(Debug, Clone)]
pub struct Round {
    pub index: u64,
    pub actions: AgentMap<Value>,
    pub result: StepResult,
    /// Present when the episode ended and the environment was reset.
    pub reset: Option<ResetResult>,
}

/// Drives an environment with actions sampled from its action spaces.
///
/// The episode after the k-th one starts with `reset(seed + k)`, so a run is
/// fully determined by `seed` and comparable across local and remote targets.
pub struct RandomDriver {
    env: Environment,
    rng: SplitMix64,
    seed: u64,
    episode: u64,
    round: u64,
}

impl RandomDriver {
    pub fn start(mut env: Environment, seed: u64) -> Result<(RandomDriver, ResetResult), EnvError> {
        let first = env.reset(Some(seed))?;
        let driver = RandomDriver {
            env,
            rng: SplitMix64::new(seed),
            seed,
            episode: 0,
            round: 0,
        };
        Ok((driver, first))
    }

    pub fn sample_actions(&mut self) -> Result<AgentMap<Value>, EnvError> {
        let spaces = self.env.action_space()?;
        Ok(self
            .env
            .controlled_agents()
            .iter()
            .map(|a| (a.clone(), spaces[a].sample(&mut self.rng)))
            .collect())
    }

    pub fn step(&mut self) -> Result<Round, EnvError> {
        let actions = self.sample_actions()?;
        let result = self.env.step(&actions)?;
        let reset = if result.all_done() {
            self.episode += 1;
            Some(self.env.reset(Some(self.seed.wrapping_add(self.episode)))?)
        } else {
            None
        };
        let index = self.round;
        self.round += 1;
        Ok(Round {
            index,
            actions,
            result,
            reset,
        })
    }

    pub fn env_mut(&mut self) -> &mut Environment {
        &mut self.env
    }

    pub fn close(mut self) -> Result<(), EnvError> {
        self.env.close()
    }
}

/// Per-episode returns of a finished rollout.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Summary {
    pub steps: u64,
    pub episode_returns: Vec<AgentMap<f64>>,
    pub partial_return: AgentMap<f64>,
}

pub fn record_line(round: &Round) -> String {
    let actions: serde_json::Map<_, _> = round
        .actions
        .iter()
        .map(|(a, v)| (a.to_string(), value_json(v)))
        .collect();
    let rewards: serde_json::Map<_, _> = round.result.reward.iter().map(|(a, r)| (a.to_string(), json!(r))).collect();
    let dones: serde_json::Map<_, _> = round.result.done.iter().map(|(a, d)| (a.to_string(), json!(d))).collect();
    format!(
        r#"{{"round":{},"actions":{},"rewards":{},"dones":{}}}"#,
        round.index,
        serde_json::Value::Object(actions),
        serde_json::Value::Object(rewards),
        serde_json::Value::Object(dones)
    )
}

/// Runs `steps` rounds, writing one JSON line per round to `out`.
pub fn rollout(env: Environment, steps: u64, seed: u64, out: &mut impl Write) -> Result<Summary, EnvError> {
    let mut summary = Summary::default();
    if steps == 0 {
        return Ok(summary);
    }
    let (mut driver, _) = RandomDriver::start(env, seed)?;
    for _ in 0..steps {
        let round = driver.step()?;
        writeln!(out, "{}", record_line(&round)).map_err(|e| EnvError::Internal(e.to_string()))?;
        for (a, r) in &round.result.reward {
            *summary.partial_return.entry(a.clone()).or_default() += r;
        }
        if round.reset.is_some() {
            summary.episode_returns.push(std::mem::take(&mut summary.partial_return));
        }
        summary.steps += 1;
    }
    driver.close()?;
    Ok(summary)
}
