//! TCP server hosting one environment for any number of clients.
//!
//! Each client claims a set of agents at handshake. Steps are barrier
//! synchronized: submissions are merged into the round's pending actions (a
//! resubmission overwrites), and once every agent has an action the
//! environment steps exactly once and the identical result frame goes to every
//! client. Resets are barrier synchronized the same way across clients.
//!
//! Connection readers run on their own threads and forward decoded frames to a
//! single executor thread, which owns the session state and is the only caller
//! of the environment.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use log::{debug, info, warn};
use thiserror::Error;

use crate::error::EnvError;
use crate::model::{AgentId, AgentMap, Environment};
use crate::side_channel::SideChannelMessage;
use crate::value::Value;
use crate::wire::{self, encode_frame, Message, WireError, PROTOCOL_VERSION};

pub const DEFAULT_BARRIER_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub bind: String,
    pub port: u16,
    pub barrier_timeout: Duration,
    /// Test hook: corrupts one reward byte in the result of the n-th step
    /// (0-based) so trajectory comparisons can be shown to detect divergence.
    pub fault_round: Option<u64>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            bind: "127.0.0.1".into(),
            port: wire::default_port(),
            barrier_timeout: DEFAULT_BARRIER_TIMEOUT,
            fault_round: None,
        }
    }
}

impl ServerConfig {
    /// Loopback on an ephemeral port.
    pub fn ephemeral() -> Self {
        ServerConfig {
            port: 0,
            ..ServerConfig::default()
        }
    }
}

#[derive(Debug, Error)]
pub enum ServerError {
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: io::Error },
    #[error("barrier timeout must be positive")]
    InvalidTimeout,
}

/// Counters exposed for monitoring and tests.
#[derive(Debug, Default)]
pub struct ServerStats {
    pub steps: AtomicU64,
    pub resets: AtomicU64,
    pub aborted_rounds: AtomicU64,
    pub clients: AtomicU64,
}

impl ServerStats {
    pub fn steps(&self) -> u64 {
        self.steps.load(Ordering::SeqCst)
    }

    pub fn resets(&self) -> u64 {
        self.resets.load(Ordering::SeqCst)
    }

    pub fn aborted_rounds(&self) -> u64 {
        self.aborted_rounds.load(Ordering::SeqCst)
    }

    pub fn clients(&self) -> u64 {
        self.clients.load(Ordering::SeqCst)
    }
}

type ConnId = u64;

enum Event {
    Connected(ConnId, TcpStream),
    Frame(ConnId, Message),
    BadFrame(ConnId, WireError),
    Disconnected(ConnId),
    EnvSideChannel(SideChannelMessage),
    Shutdown,
}

/// Running server. Dropping the handle shuts it down.
pub struct Server {
    addr: SocketAddr,
    events: Sender<Event>,
    stopping: Arc<AtomicBool>,
    stats: Arc<ServerStats>,
    acceptor: Option<JoinHandle<()>>,
    executor: Option<JoinHandle<()>>,
}

impl Server {
    pub fn serve(env: Environment, config: ServerConfig) -> Result<Server, ServerError> {
        if config.barrier_timeout.is_zero() {
            return Err(ServerError::InvalidTimeout);
        }
        let addr_str = format!("{}:{}", config.bind, config.port);
        let bind_err = |source| ServerError::Bind {
            addr: addr_str.clone(),
            source,
        };
        let addrs: Vec<SocketAddr> = (config.bind.as_str(), config.port)
            .to_socket_addrs()
            .map_err(bind_err)?
            .collect();
        let listener = TcpListener::bind(&addrs[..]).map_err(bind_err)?;
        let addr = listener.local_addr().map_err(bind_err)?;

        let (tx, rx) = mpsc::channel();
        let stopping = Arc::new(AtomicBool::new(false));
        let stats = Arc::new(ServerStats::default());

        let session = Session::new(env, config, tx.clone(), Arc::clone(&stats));
        let executor = thread::Builder::new()
            .name("envlink-executor".into())
            .spawn(move || session.run(rx))
            .expect("spawn executor");

        let acceptor = {
            let tx = tx.clone();
            let stopping = Arc::clone(&stopping);
            thread::Builder::new()
                .name("envlink-accept".into())
                .spawn(move || accept_loop(listener, tx, stopping))
                .expect("spawn acceptor")
        };
        info!("serving on {addr}");
        Ok(Server {
            addr,
            events: tx,
            stopping,
            stats,
            acceptor: Some(acceptor),
            executor: Some(executor),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn stats(&self) -> &Arc<ServerStats> {
        &self.stats
    }

    /// Blocks until the server stops.
    pub fn wait(mut self) {
        if let Some(h) = self.executor.take() {
            let _ = h.join();
        }
    }

    pub fn shutdown(&mut self) {
        if self.stopping.swap(true, Ordering::SeqCst) {
            return;
        }
        let _ = self.events.send(Event::Shutdown);
        let mut wake = self.addr;
        if wake.ip().is_unspecified() {
            wake.set_ip(if wake.is_ipv4() {
                std::net::Ipv4Addr::LOCALHOST.into()
            } else {
                std::net::Ipv6Addr::LOCALHOST.into()
            });
        }
        let _ = TcpStream::connect_timeout(&wake, Duration::from_secs(1));
        if let Some(h) = self.acceptor.take() {
            let _ = h.join();
        }
        if let Some(h) = self.executor.take() {
            let _ = h.join();
        }
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn accept_loop(listener: TcpListener, events: Sender<Event>, stopping: Arc<AtomicBool>) {
    let mut next_id: ConnId = 0;
    for stream in listener.incoming() {
        if stopping.load(Ordering::SeqCst) {
            break;
        }
        let stream = match stream {
            Ok(s) => s,
            Err(e) => {
                warn!("accept failed: {e}");
                continue;
            }
        };
        let conn = next_id;
        next_id += 1;
        let _ = stream.set_nodelay(true);
        let _ = stream.set_write_timeout(Some(Duration::from_secs(10)));
        let reader = match stream.try_clone() {
            Ok(r) => r,
            Err(e) => {
                warn!("cannot clone connection: {e}");
                continue;
            }
        };
        if events.send(Event::Connected(conn, stream)).is_err() {
            break;
        }
        let events = events.clone();
        let _ = thread::Builder::new()
            .name(format!("envlink-conn-{conn}"))
            .spawn(move || read_loop(conn, reader, events));
    }
}

fn read_loop(conn: ConnId, mut stream: TcpStream, events: Sender<Event>) {
    loop {
        match wire::read_message(&mut stream) {
            Ok(Some(msg)) => {
                if events.send(Event::Frame(conn, msg)).is_err() {
                    return;
                }
            }
            Ok(None) => break,
            Err(WireError::Io(e)) => {
                debug!("connection {conn} read error: {e}");
                break;
            }
            Err(e) => {
                let _ = events.send(Event::BadFrame(conn, e));
                break;
            }
        }
    }
    let _ = events.send(Event::Disconnected(conn));
}

struct Client {
    stream: TcpStream,
    agents: BTreeSet<AgentId>,
    greeted: bool,
}

enum Round {
    Idle,
    Collecting {
        pending: AgentMap<Value>,
        deadline: Instant,
    },
    Resetting {
        requested: BTreeSet<ConnId>,
        seed: Option<u64>,
        deadline: Instant,
    },
}

struct Session {
    env: Environment,
    config: ServerConfig,
    clients: BTreeMap<ConnId, Client>,
    owner: AgentMap<ConnId>,
    round: Round,
    /// Rounds concluded so far; the index of the round being collected.
    seq: u64,
    stats: Arc<ServerStats>,
    has_side_channel: bool,
}

impl Session {
    fn new(mut env: Environment, config: ServerConfig, events: Sender<Event>, stats: Arc<ServerStats>) -> Session {
        let has_side_channel = match env.side_channel() {
            Ok(ch) => {
                ch.set_default_handler(move |m| {
                    let _ = events.send(Event::EnvSideChannel(m.clone()));
                });
                true
            }
            Err(e) => {
                debug!("hosted environment has no side-channel: {e}");
                false
            }
        };
        Session {
            env,
            config,
            clients: BTreeMap::new(),
            owner: AgentMap::new(),
            round: Round::Idle,
            seq: 0,
            stats,
            has_side_channel,
        }
    }

    fn deadline(&self) -> Option<Instant> {
        match &self.round {
            Round::Idle => None,
            Round::Collecting { deadline, .. } | Round::Resetting { deadline, .. } => Some(*deadline),
        }
    }

    fn run(mut self, events: Receiver<Event>) {
        loop {
            let event = match self.deadline() {
                None => match events.recv() {
                    Ok(e) => e,
                    Err(_) => break,
                },
                Some(deadline) => {
                    let now = Instant::now();
                    if now >= deadline {
                        self.on_timeout();
                        continue;
                    }
                    match events.recv_timeout(deadline - now) {
                        Ok(e) => e,
                        Err(RecvTimeoutError::Timeout) => {
                            self.on_timeout();
                            continue;
                        }
                        Err(RecvTimeoutError::Disconnected) => break,
                    }
                }
            };
            match event {
                Event::Connected(conn, stream) => {
                    self.clients.insert(
                        conn,
                        Client {
                            stream,
                            agents: BTreeSet::new(),
                            greeted: false,
                        },
                    );
                }
                Event::Frame(conn, msg) => self.on_frame(conn, msg),
                Event::BadFrame(conn, err) => {
                    warn!("connection {conn} sent a bad frame: {err}");
                    self.reply(conn, &Message::error(&EnvError::Protocol(err.to_string()), false, self.seq));
                    self.drop_client(conn);
                }
                Event::Disconnected(conn) => self.drop_client(conn),
                Event::EnvSideChannel(m) => self.broadcast(&Message::SideChannel(m)),
                Event::Shutdown => break,
            }
        }
        let _ = self.env.close();
        for c in self.clients.values() {
            let _ = c.stream.shutdown(Shutdown::Both);
        }
        info!("server stopped after {} rounds", self.seq);
    }

    fn reply(&mut self, conn: ConnId, msg: &Message) {
        let Some(client) = self.clients.get_mut(&conn) else { return };
        match encode_frame(msg) {
            Ok(bytes) => {
                if let Err(e) = client.stream.write_all(&bytes) {
                    debug!("write to {conn} failed: {e}");
                    let _ = client.stream.shutdown(Shutdown::Both);
                }
            }
            Err(e) => warn!("cannot encode {msg}: {e}"),
        }
    }

    fn broadcast_bytes(&mut self, bytes: &[u8]) {
        for (conn, client) in self.clients.iter_mut().filter(|(_, c)| c.greeted) {
            if let Err(e) = client.stream.write_all(bytes) {
                // the reader thread sees the shutdown and reports the disconnect
                debug!("broadcast to {conn} failed: {e}");
                let _ = client.stream.shutdown(Shutdown::Both);
            }
        }
    }

    fn broadcast(&mut self, msg: &Message) {
        match encode_frame(msg) {
            Ok(bytes) => self.broadcast_bytes(&bytes),
            Err(e) => warn!("cannot encode {msg}: {e}"),
        }
    }

    /// Ends the current round with `err` for every client.
    fn abort_round(&mut self, err: EnvError) {
        warn!("round {} aborted: {err}", self.seq);
        self.broadcast(&Message::error(&err, true, self.seq));
        self.stats.aborted_rounds.fetch_add(1, Ordering::SeqCst);
        self.seq += 1;
        self.round = Round::Idle;
    }

    fn on_timeout(&mut self) {
        self.abort_round(EnvError::BarrierTimeout);
    }

    fn drop_client(&mut self, conn: ConnId) {
        let Some(client) = self.clients.remove(&conn) else { return };
        let _ = client.stream.shutdown(Shutdown::Both);
        if !client.greeted {
            return;
        }
        self.stats.clients.fetch_sub(1, Ordering::SeqCst);
        for agent in &client.agents {
            self.owner.remove(agent);
        }
        info!("client {conn} left; released {:?}", client.agents);
        if !matches!(self.round, Round::Idle) {
            let names: Vec<&str> = client.agents.iter().map(AgentId::as_str).collect();
            self.abort_round(EnvError::ClientLost(names.join(",")));
        }
    }

    fn on_frame(&mut self, conn: ConnId, msg: Message) {
        let greeted = match self.clients.get(&conn) {
            Some(c) => c.greeted,
            None => return,
        };
        debug!("connection {conn}: {msg}");
        match msg {
            Message::Hello { version, agents } if !greeted => self.on_hello(conn, version, agents),
            _ if !greeted => self.refuse(conn, EnvError::Protocol("expected Hello".into())),
            Message::Step { round, actions } => self.on_step(conn, round, actions),
            Message::Reset { round, seed } => self.on_reset(conn, round, seed),
            Message::SideChannel(m) => self.on_side_channel(m),
            Message::SpaceQuery => {
                let reply = Message::SpaceReply {
                    observation_space: self.env.observation_space().cloned().unwrap_or_default(),
                    action_space: self.env.action_space().cloned().unwrap_or_default(),
                };
                self.reply(conn, &reply);
            }
            Message::Close => {
                self.reply(conn, &Message::Close);
                self.drop_client(conn);
            }
            other => self.refuse(conn, EnvError::Protocol(format!("unexpected {other} from client"))),
        }
    }

    fn refuse(&mut self, conn: ConnId, err: EnvError) {
        self.reply(conn, &Message::error(&err, false, self.seq));
        self.drop_client(conn);
    }

    fn on_hello(&mut self, conn: ConnId, version: u16, claimed: Vec<AgentId>) {
        if version != PROTOCOL_VERSION {
            return self.refuse(
                conn,
                EnvError::VersionMismatch(format!("server speaks {PROTOCOL_VERSION}, client {version}")),
            );
        }
        let all = self.env.agents().clone();
        let claim: BTreeSet<AgentId> = if claimed.is_empty() {
            all.clone()
        } else {
            claimed.into_iter().collect()
        };
        if let Some(unknown) = claim.iter().find(|a| !all.contains(*a)) {
            return self.refuse(conn, EnvError::UnknownAgent(unknown.to_string()));
        }
        if let Some(taken) = claim.iter().find(|a| self.owner.contains_key(*a)) {
            return self.refuse(conn, EnvError::AgentTaken(taken.to_string()));
        }
        for agent in &claim {
            self.owner.insert(agent.clone(), conn);
        }
        let ack = Message::HelloAck {
            accepted: claim.iter().cloned().collect(),
            observation_space: self.env.observation_space().cloned().unwrap_or_default(),
            action_space: self.env.action_space().cloned().unwrap_or_default(),
            barrier_timeout_ms: self.config.barrier_timeout.as_millis() as u64,
            round: self.seq,
        };
        info!("client {conn} joined with {claim:?}");
        let client = self.clients.get_mut(&conn).expect("connected");
        client.agents = claim;
        client.greeted = true;
        self.stats.clients.fetch_add(1, Ordering::SeqCst);
        self.reply(conn, &ack);
    }

    fn on_step(&mut self, conn: ConnId, round: u64, actions: AgentMap<Value>) {
        if round < self.seq {
            debug!("dropping stale step from {conn} for round {round}");
            return;
        }
        let direct = |err: EnvError| Message::error(&err, false, round);
        if round > self.seq {
            return self.reply(conn, &direct(EnvError::Protocol(format!("round {round} is in the future"))));
        }
        if matches!(self.round, Round::Resetting { .. }) {
            return self.reply(conn, &direct(EnvError::ResetInProgress));
        }
        let owned = &self.clients[&conn].agents;
        if let Some(foreign) = actions.keys().find(|a| !owned.contains(*a)) {
            let err = EnvError::NotOwner(foreign.to_string());
            return self.reply(conn, &direct(err));
        }
        let spaces = self.env.action_space().cloned().unwrap_or_default();
        for (agent, action) in &actions {
            if let Err(why) = spaces[agent].check(action) {
                return self.reply(conn, &direct(EnvError::SpaceMismatch(format!("{agent}: {why}"))));
            }
        }
        if let Round::Idle = self.round {
            self.round = Round::Collecting {
                pending: AgentMap::new(),
                deadline: Instant::now() + self.config.barrier_timeout,
            };
        }
        let Round::Collecting { pending, .. } = &mut self.round else { unreachable!() };
        pending.extend(actions);
        if pending.len() == self.env.agents().len() {
            self.complete_step();
        }
    }

    fn complete_step(&mut self) {
        let Round::Collecting { pending, .. } = std::mem::replace(&mut self.round, Round::Idle) else {
            return;
        };
        let round = self.seq;
        self.seq += 1;
        match self.env.step(&pending) {
            Ok(mut result) => {
                let nth = self.stats.steps.fetch_add(1, Ordering::SeqCst);
                if self.config.fault_round == Some(nth) {
                    if let Some(r) = result.reward.values_mut().next() {
                        *r = f64::from_bits(r.to_bits() ^ 1);
                    }
                }
                let rewards: Vec<f64> = result.reward.values().copied().collect();
                info!("round {round}: stepped, rewards {rewards:?}");
                self.broadcast(&Message::StepResult { round, result });
            }
            Err(e) => {
                warn!("round {round}: step failed: {e}");
                self.stats.aborted_rounds.fetch_add(1, Ordering::SeqCst);
                self.broadcast(&Message::error(&e, true, round));
            }
        }
    }

    fn on_reset(&mut self, conn: ConnId, round: u64, seed: Option<u64>) {
        if round > self.seq {
            let err = EnvError::Protocol(format!("round {round} is in the future"));
            return self.reply(conn, &Message::error(&err, false, round));
        }
        let stale = round < self.seq;
        match &mut self.round {
            Round::Resetting { requested, seed: first, .. } => {
                requested.insert(conn);
                if seed != *first {
                    info!("reset seed {seed:?} from {conn} ignored; first request chose {first:?}");
                }
            }
            _ if stale => {
                debug!("dropping stale reset from {conn} for round {round}");
                return;
            }
            Round::Collecting { .. } => {
                self.abort_round(EnvError::RoundAborted("reset requested".into()));
                self.begin_reset(conn, seed);
            }
            Round::Idle => self.begin_reset(conn, seed),
        }
        let ready = match &self.round {
            Round::Resetting { requested, .. } => self
                .clients
                .iter()
                .filter(|(_, c)| c.greeted)
                .all(|(id, _)| requested.contains(id)),
            _ => false,
        };
        if ready {
            self.complete_reset();
        }
    }

    fn begin_reset(&mut self, conn: ConnId, seed: Option<u64>) {
        self.round = Round::Resetting {
            requested: BTreeSet::from([conn]),
            seed,
            deadline: Instant::now() + self.config.barrier_timeout,
        };
    }

    fn complete_reset(&mut self) {
        let Round::Resetting { seed, .. } = std::mem::replace(&mut self.round, Round::Idle) else {
            return;
        };
        let round = self.seq;
        self.seq += 1;
        match self.env.reset(seed) {
            Ok(result) => {
                self.stats.resets.fetch_add(1, Ordering::SeqCst);
                info!("round {round}: reset with seed {seed:?}");
                self.broadcast(&Message::ResetResult { round, result });
            }
            Err(e) => {
                warn!("round {round}: reset failed: {e}");
                self.stats.aborted_rounds.fetch_add(1, Ordering::SeqCst);
                self.broadcast(&Message::error(&e, true, round));
            }
        }
    }

    fn on_side_channel(&mut self, m: SideChannelMessage) {
        if !self.has_side_channel {
            return;
        }
        if let Ok(ch) = self.env.side_channel() {
            let (key, value) = (m.key().to_owned(), m.value().clone());
            if let Err(e) = ch.send(key, value) {
                warn!("side-channel forward failed: {e}");
            }
        }
    }
}
