//! Client-side adapter that fulfils every environment operation through a
//! server, so a served environment behaves like a local one.
//!
//! Requests carry the round the client believes is current. The server drops
//! requests for rounds that already concluded, and the client matches each
//! reply by round, skipping broadcasts for rounds it did not take part in.

use std::collections::BTreeSet;
use std::net::{Shutdown, SocketAddr, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use log::debug;

use crate::error::EnvError;
use crate::model::{AgentId, AgentMap, Environment, EnvironmentAdapter, ResetResult, StepResult};
use crate::side_channel::{ChannelError, SideChannel};
use crate::space::Space;
use crate::value::Value;
use crate::wire::{self, ErrorCode, Message, PROTOCOL_VERSION};

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    pub address: String,
    pub port: u16,
    /// Agents to control; empty claims every agent the server advertises.
    pub claimed_agents: Vec<AgentId>,
    pub connect_timeout: Duration,
    /// Must exceed the server's barrier timeout.
    pub request_timeout: Duration,
    pub protocol_version: u16,
}

impl RemoteConfig {
    pub fn new(address: impl Into<String>, port: u16) -> Self {
        RemoteConfig {
            address: address.into(),
            port,
            claimed_agents: Vec::new(),
            connect_timeout: Duration::from_secs(5),
            request_timeout: Duration::from_secs(60),
            protocol_version: PROTOCOL_VERSION,
        }
    }

    pub fn for_addr(addr: SocketAddr) -> Self {
        RemoteConfig::new(addr.ip().to_string(), addr.port())
    }

    pub fn claim(mut self, agents: impl IntoIterator<Item = AgentId>) -> Self {
        self.claimed_agents = agents.into_iter().collect();
        self
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if self.port == 0 {
            return Err(EnvError::InvalidConfig("port must be positive".into()));
        }
        if self.connect_timeout.is_zero() || self.request_timeout.is_zero() {
            return Err(EnvError::InvalidConfig("timeouts must be positive".into()));
        }
        Ok(())
    }
}

enum Incoming {
    Msg(Message),
    Lost(String),
}

/// Environment adapter backed by a remote server.
pub struct RemoteAdapter {
    writer: Arc<Mutex<TcpStream>>,
    inbox: Receiver<Incoming>,
    reader: Option<JoinHandle<()>>,
    accepted: BTreeSet<AgentId>,
    observation_space: AgentMap<Space>,
    action_space: AgentMap<Space>,
    barrier_timeout: Duration,
    request_timeout: Duration,
    /// Rounds this client has seen concluded.
    seen: u64,
    side_channel: Option<SideChannel>,
    broken: Option<String>,
    closed: bool,
}

fn send_on(writer: &Mutex<TcpStream>, msg: &Message) -> Result<(), EnvError> {
    let mut stream = writer.lock().unwrap();
    wire::write_message(&mut *stream, msg).map_err(|e| EnvError::ConnectionLost(e.to_string()))
}

impl RemoteAdapter {
    /// Connects and completes the handshake.
    pub fn connect(config: RemoteConfig) -> Result<RemoteAdapter, EnvError> {
        config.validate()?;
        let target = format!("{}:{}", config.address, config.port);
        let addrs: Vec<SocketAddr> = target
            .to_socket_addrs()
            .map_err(|e| EnvError::ConnectionRefused(format!("{target}: {e}")))?
            .collect();
        let mut last_err = format!("{target}: no addresses");
        let mut stream = None;
        for addr in &addrs {
            match TcpStream::connect_timeout(addr, config.connect_timeout) {
                Ok(s) => {
                    stream = Some(s);
                    break;
                }
                Err(e) => last_err = format!("{addr}: {e}"),
            }
        }
        let mut stream = stream.ok_or(EnvError::ConnectionRefused(last_err))?;
        let _ = stream.set_nodelay(true);
        let lost = |e: &dyn std::fmt::Display| EnvError::ConnectionLost(e.to_string());

        wire::write_message(
            &mut stream,
            &Message::Hello {
                version: config.protocol_version,
                agents: config.claimed_agents.clone(),
            },
        )
        .map_err(|e| lost(&e))?;
        stream.set_read_timeout(Some(config.request_timeout)).map_err(|e| lost(&e))?;
        let reply = wire::read_message(&mut stream).map_err(|e| match e {
            wire::WireError::Io(_) => EnvError::RequestTimeout,
            other => lost(&other),
        })?;
        let (accepted, observation_space, action_space, barrier_ms, round) = match reply {
            Some(Message::HelloAck {
                accepted,
                observation_space,
                action_space,
                barrier_timeout_ms,
                round,
            }) => (accepted, observation_space, action_space, barrier_timeout_ms, round),
            Some(Message::Error { code, message, .. }) => return Err(code.to_error(&message)),
            Some(other) => return Err(EnvError::Protocol(format!("expected HelloAck, got {other}"))),
            None => return Err(EnvError::ConnectionLost("server closed during handshake".into())),
        };
        let barrier_timeout = Duration::from_millis(barrier_ms);
        if config.request_timeout <= barrier_timeout {
            let _ = stream.shutdown(Shutdown::Both);
            return Err(EnvError::InvalidConfig(format!(
                "request timeout {:?} must exceed the server barrier timeout {:?}",
                config.request_timeout, barrier_timeout
            )));
        }
        stream.set_read_timeout(None).map_err(|e| lost(&e))?;

        let writer = Arc::new(Mutex::new(stream.try_clone().map_err(|e| lost(&e))?));
        let side_channel = {
            let writer = Arc::clone(&writer);
            SideChannel::with_transport(move |m| {
                send_on(&writer, &Message::SideChannel(m)).map_err(|e| ChannelError::Transport(e.to_string()))
            })
        };
        let deliver = side_channel.deliverer();
        let (tx, rx) = mpsc::channel();
        let reader = thread::Builder::new()
            .name("envlink-client-reader".into())
            .spawn(move || loop {
                match wire::read_message(&mut stream) {
                    Ok(Some(Message::SideChannel(m))) => deliver.deliver(m),
                    Ok(Some(msg)) => {
                        if tx.send(Incoming::Msg(msg)).is_err() {
                            return;
                        }
                    }
                    Ok(None) => {
                        let _ = tx.send(Incoming::Lost("server closed the connection".into()));
                        return;
                    }
                    Err(e) => {
                        let _ = tx.send(Incoming::Lost(e.to_string()));
                        return;
                    }
                }
            })
            .map_err(|e| lost(&e))?;

        Ok(RemoteAdapter {
            writer,
            inbox: rx,
            reader: Some(reader),
            accepted: accepted.into_iter().collect(),
            observation_space,
            action_space,
            barrier_timeout,
            request_timeout: config.request_timeout,
            seen: round,
            side_channel: Some(side_channel),
            broken: None,
            closed: false,
        })
    }

    pub fn accepted_agents(&self) -> &BTreeSet<AgentId> {
        &self.accepted
    }

    pub fn barrier_timeout(&self) -> Duration {
        self.barrier_timeout
    }

    /// Index of the next round this client will take part in.
    pub fn round(&self) -> u64 {
        self.seen
    }

    fn ensure_usable(&self) -> Result<(), EnvError> {
        if self.closed {
            return Err(EnvError::EnvClosed);
        }
        if let Some(why) = &self.broken {
            return Err(EnvError::ConnectionLost(why.clone()));
        }
        Ok(())
    }

    fn note_concluded(&mut self, msg: &Message) {
        let concluded = match msg {
            Message::StepResult { round, .. } | Message::ResetResult { round, .. } => Some(*round),
            Message::Error {
                concludes_round: true,
                round,
                ..
            } => Some(*round),
            _ => None,
        };
        if let Some(r) = concluded {
            self.seen = self.seen.max(r + 1);
        }
    }

    /// Absorbs broadcasts that arrived while idle.
    fn drain(&mut self) {
        while let Ok(incoming) = self.inbox.try_recv() {
            match incoming {
                Incoming::Msg(msg) => {
                    debug!("skipping {msg} received while idle");
                    self.note_concluded(&msg);
                }
                Incoming::Lost(why) => self.broken = Some(why),
            }
        }
    }

    fn send(&mut self, msg: &Message) -> Result<(), EnvError> {
        send_on(&self.writer, msg).inspect_err(|e| self.broken = Some(e.to_string()))
    }

    /// Waits for the first message `pick` accepts; everything else is absorbed.
    fn await_reply<T>(&mut self, mut pick: impl FnMut(&mut Self, Message) -> Option<Result<T, EnvError>>) -> Result<T, EnvError> {
        let deadline = Instant::now() + self.request_timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            match self.inbox.recv_timeout(left) {
                Ok(Incoming::Msg(msg)) => {
                    if let Some(out) = pick(self, msg) {
                        return out;
                    }
                }
                Ok(Incoming::Lost(why)) => {
                    self.broken = Some(why.clone());
                    return Err(EnvError::ConnectionLost(why));
                }
                Err(RecvTimeoutError::Timeout) => return Err(EnvError::RequestTimeout),
                Err(RecvTimeoutError::Disconnected) => {
                    let why = "reader stopped".to_string();
                    self.broken = Some(why.clone());
                    return Err(EnvError::ConnectionLost(why));
                }
            }
        }
    }

    /// Re-reads the space maps from the server.
    pub fn refresh_spaces(&mut self) -> Result<(), EnvError> {
        self.ensure_usable()?;
        self.drain();
        self.send(&Message::SpaceQuery)?;
        let (obs, act) = self.await_reply(|this, msg| match msg {
            Message::SpaceReply {
                observation_space,
                action_space,
            } => Some(Ok((observation_space, action_space))),
            other => {
                this.note_concluded(&other);
                None
            }
        })?;
        self.observation_space = obs;
        self.action_space = act;
        Ok(())
    }
}

impl EnvironmentAdapter for RemoteAdapter {
    fn reset(&mut self, seed: Option<u64>) -> Result<ResetResult, EnvError> {
        self.ensure_usable()?;
        self.drain();
        let target = self.seen;
        self.send(&Message::Reset { round: target, seed })?;
        self.await_reply(|this, msg| {
            this.note_concluded(&msg);
            match msg {
                Message::ResetResult { round, result } if round >= target => Some(Ok(result)),
                // our request aborted a step round in progress; the reset follows it
                Message::Error {
                    code: ErrorCode::RoundAborted,
                    concludes_round: true,
                    ..
                } => None,
                Message::Error {
                    code, round, message, ..
                } if round >= target => Some(Err(code.to_error(&message))),
                Message::Close => Some(Err(EnvError::ConnectionLost("server closed the session".into()))),
                _ => None,
            }
        })
    }

    fn step(&mut self, actions: &AgentMap<Value>) -> Result<StepResult, EnvError> {
        self.ensure_usable()?;
        self.drain();
        let target = self.seen;
        self.send(&Message::Step {
            round: target,
            actions: actions.clone(),
        })?;
        self.await_reply(|this, msg| {
            this.note_concluded(&msg);
            match msg {
                Message::StepResult { round, result } if round == target => Some(Ok(result)),
                Message::Error {
                    code, round, message, ..
                } if round == target => Some(Err(code.to_error(&message))),
                Message::Close => Some(Err(EnvError::ConnectionLost("server closed the session".into()))),
                _ => None,
            }
        })
    }

    fn close(&mut self) -> Result<(), EnvError> {
        if self.closed {
            return Ok(());
        }
        self.closed = true;
        if let Some(ch) = &self.side_channel {
            ch.close();
        }
        if self.broken.is_none() && send_on(&self.writer, &Message::Close).is_ok() {
            let deadline = Instant::now() + self.request_timeout.min(Duration::from_secs(2));
            loop {
                let left = deadline.saturating_duration_since(Instant::now());
                match self.inbox.recv_timeout(left) {
                    Ok(Incoming::Msg(Message::Close)) | Ok(Incoming::Lost(_)) | Err(_) => break,
                    Ok(Incoming::Msg(_)) => {}
                }
            }
        }
        let _ = self.writer.lock().unwrap().shutdown(Shutdown::Both);
        if let Some(h) = self.reader.take() {
            let _ = h.join();
        }
        Ok(())
    }

    fn observation_space(&self) -> AgentMap<Space> {
        self.observation_space.clone()
    }

    fn action_space(&self) -> AgentMap<Space> {
        self.action_space.clone()
    }

    fn controlled_agents(&self) -> BTreeSet<AgentId> {
        self.accepted.clone()
    }

    fn open_side_channel(&mut self) -> Result<SideChannel, EnvError> {
        self.ensure_usable()?;
        Ok(self.side_channel.take().ok_or(ChannelError::AlreadyOpen)?)
    }
}

impl Drop for RemoteAdapter {
    fn drop(&mut self) {
        let _ = EnvironmentAdapter::close(self);
    }
}

/// Connects and wraps the adapter in an [`Environment`].
pub fn connect(config: RemoteConfig) -> Result<Environment, EnvError> {
    Ok(Environment::new(RemoteAdapter::connect(config)?))
}
