#![allow(dead_code)]

use std::collections::BTreeMap;
use std::net::{SocketAddr, TcpStream};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use envlink::model::{AgentId, AgentMap, EnvironmentAdapter, ResetResult, StepResult};
use envlink::wire::{self, Message};
use envlink::{EnvError, Environment, Space, Value};

/// Counts and records every call the server makes.
#[derive(Clone, Default)]
pub struct Probe {
    pub steps: Arc<AtomicU64>,
    pub resets: Arc<AtomicU64>,
    pub applied: Arc<Mutex<Vec<AgentMap<Value>>>>,
    pub seeds: Arc<Mutex<Vec<Option<u64>>>>,
}

pub struct ProbeEnv {
    probe: Probe,
    agents: usize,
}

impl Probe {
    pub fn env(&self, agents: usize) -> Environment {
        Environment::new(ProbeEnv { probe: self.clone(), agents })
    }

    pub fn steps(&self) -> u64 {
        self.steps.load(Ordering::SeqCst)
    }

    pub fn resets(&self) -> u64 {
        self.resets.load(Ordering::SeqCst)
    }
}

impl ProbeEnv {
    fn ids(&self) -> impl Iterator<Item = AgentId> {
        (0..self.agents).map(AgentId::indexed)
    }
}

impl EnvironmentAdapter for ProbeEnv {
    fn reset(&mut self, seed: Option<u64>) -> Result<ResetResult, EnvError> {
        self.probe.resets.fetch_add(1, Ordering::SeqCst);
        self.probe.seeds.lock().unwrap().push(seed);
        let s = seed.unwrap_or(0) as i64;
        Ok(ResetResult {
            observation: self.ids().map(|a| (a, Value::Int(s))).collect(),
            info: BTreeMap::new(),
        })
    }

    fn step(&mut self, actions: &AgentMap<Value>) -> Result<StepResult, EnvError> {
        let n = self.probe.steps.fetch_add(1, Ordering::SeqCst) + 1;
        self.probe.applied.lock().unwrap().push(actions.clone());
        Ok(StepResult {
            observation: self.ids().map(|a| (a, Value::Int(n as i64))).collect(),
            reward: actions.iter().map(|(a, v)| (a.clone(), v.as_int().unwrap() as f64)).collect(),
            done: self.ids().map(|a| (a, false)).collect(),
            last_action: actions.clone(),
            info: BTreeMap::from([("step".to_owned(), Value::Int(n as i64))]),
        })
    }

    fn close(&mut self) -> Result<(), EnvError> {
        Ok(())
    }

    fn observation_space(&self) -> AgentMap<Space> {
        self.ids().map(|a| (a, Space::discrete(u64::MAX).unwrap())).collect()
    }

    fn action_space(&self) -> AgentMap<Space> {
        self.ids().map(|a| (a, Space::discrete(100).unwrap())).collect()
    }
}

/// A protocol-level client with full control over message order.
pub struct Raw {
    pub stream: TcpStream,
}

impl Raw {
    pub fn connect(addr: SocketAddr) -> Raw {
        let stream = TcpStream::connect(addr).unwrap();
        stream.set_read_timeout(Some(Duration::from_secs(20))).unwrap();
        stream.set_nodelay(true).unwrap();
        Raw { stream }
    }

    pub fn hello(addr: SocketAddr, agents: &[usize]) -> Raw {
        let mut raw = Raw::connect(addr);
        raw.send(&Message::Hello {
            version: 1,
            agents: agents.iter().map(|&i| AgentId::indexed(i)).collect(),
        });
        match raw.recv() {
            Message::HelloAck { .. } => raw,
            other => panic!("handshake failed: {other}"),
        }
    }

    pub fn send(&mut self, msg: &Message) {
        wire::write_message(&mut self.stream, msg).unwrap();
    }

    pub fn recv_frame(&mut self) -> Vec<u8> {
        wire::read_frame(&mut self.stream).unwrap().expect("connection closed")
    }

    pub fn recv(&mut self) -> Message {
        Message::decode_body(&self.recv_frame()).unwrap()
    }

    pub fn step(&mut self, round: u64, agent: usize, action: i64) {
        self.send(&Message::Step {
            round,
            actions: AgentMap::from([(AgentId::indexed(agent), Value::Int(action))]),
        });
    }

    /// Waits until the server has processed everything sent so far.
    /// Returns the frames that arrived in the meantime.
    pub fn sync(&mut self) -> Vec<Vec<u8>> {
        self.send(&Message::SpaceQuery);
        let mut other = Vec::new();
        loop {
            let f = self.recv_frame();
            if f[0] == 0x0A {
                return other;
            }
            other.push(f);
        }
    }
}

/// Runs the reset barrier for round `round` across every client.
pub fn reset_all(clients: &mut [&mut Raw], round: u64) {
    for c in clients.iter_mut() {
        c.send(&Message::Reset { round, seed: Some(0) });
    }
    for c in clients.iter_mut() {
        match c.recv() {
            Message::ResetResult { round: r, .. } if r == round => {}
            other => panic!("expected ResetResult, got {other}"),
        }
    }
}
