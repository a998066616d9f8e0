//! Out-of-band key/value messages between an environment and its clients.
//!
//! Each environment owns exactly one channel, made of two connected
//! [`SideChannel`] endpoints. Incoming messages are dispatched to the handler
//! registered for the longest prefix of the message key; unmatched messages go
//! to the default handler if one is set and are otherwise dropped and counted.

use std::collections::{BTreeMap, VecDeque};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::value::Value;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChannelError {
    #[error("side-channel key must be non-empty")]
    InvalidKey,
    #[error("side-channel payload cannot be a {0}")]
    UnsupportedValueTag(&'static str),
    #[error("a handler is already registered for prefix {0:?}")]
    DuplicatePrefix(String),
    #[error("side-channel is closed")]
    ChannelClosed,
    #[error("the environment's side-channel is already open")]
    AlreadyOpen,
    #[error("environment has no side-channel")]
    Unsupported,
    #[error("side-channel transport failed: {0}")]
    Transport(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SideChannelMessage {
    key: String,
    value: Value,
}

impl SideChannelMessage {
    /// Validates the key and restricts the payload to scalar tags.
    pub fn new(key: impl Into<String>, value: Value) -> Result<Self, ChannelError> {
        let key = key.into();
        if key.is_empty() {
            return Err(ChannelError::InvalidKey);
        }
        match value {
            Value::Bool(_) | Value::Int(_) | Value::Float(_) | Value::Str(_) | Value::Bytes(_) => {}
            ref other => return Err(ChannelError::UnsupportedValueTag(other.tag_name())),
        }
        Ok(SideChannelMessage { key, value })
    }

    pub fn key(&self) -> &str {
        &self.key
    }

    pub fn value(&self) -> &Value {
        &self.value
    }
}

pub type Handler = Box<dyn FnMut(&SideChannelMessage) + Send>;

/// Which route a dispatched message took.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Route {
    Prefix(String),
    Default,
    Dropped,
}

/// Longest-prefix handler table.
#[derive(Default)]
pub struct Dispatcher {
    handlers: BTreeMap<String, Handler>,
    default: Option<Handler>,
    dropped: u64,
}

impl Dispatcher {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, prefix: impl Into<String>, handler: Handler) -> Result<(), ChannelError> {
        let prefix = prefix.into();
        if self.handlers.contains_key(&prefix) {
            return Err(ChannelError::DuplicatePrefix(prefix));
        }
        self.handlers.insert(prefix, handler);
        Ok(())
    }

    pub fn set_default(&mut self, handler: Handler) {
        self.default = Some(handler);
    }

    /// The registered prefix that would receive `key`, if any.
    pub fn resolve(&self, key: &str) -> Option<&str> {
        self.handlers
            .keys()
            .filter(|p| key.starts_with(p.as_str()))
            .max_by_key(|p| p.len())
            .map(String::as_str)
    }

    pub fn dispatch(&mut self, msg: &SideChannelMessage) -> Route {
        if let Some(prefix) = self.resolve(&msg.key).map(str::to_owned) {
            let handler = self.handlers.get_mut(&prefix).expect("resolved prefix is registered");
            handler(msg);
            return Route::Prefix(prefix);
        }
        match self.default.as_mut() {
            Some(handler) => {
                handler(msg);
                Route::Default
            }
            None => {
                self.dropped += 1;
                Route::Dropped
            }
        }
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }
}

/// Receive side of an endpoint. Deliveries are queued and drained by whichever
/// caller wins the `draining` flag, so handlers run serially and a handler may
/// send without deadlocking against its peer.
#[derive(Default)]
struct Inbox {
    queue: Mutex<VecDeque<SideChannelMessage>>,
    draining: AtomicBool,
    dispatcher: Mutex<Dispatcher>,
    delivered: AtomicU64,
}

impl Inbox {
    fn deliver(&self, msg: SideChannelMessage) {
        self.queue.lock().unwrap().push_back(msg);
        loop {
            if self
                .draining
                .compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire)
                .is_err()
            {
                return;
            }
            loop {
                let next = self.queue.lock().unwrap().pop_front();
                match next {
                    Some(m) => {
                        self.dispatcher.lock().unwrap().dispatch(&m);
                        self.delivered.fetch_add(1, Ordering::Relaxed);
                    }
                    None => break,
                }
            }
            self.draining.store(false, Ordering::Release);
            if self.queue.lock().unwrap().is_empty() {
                return;
            }
        }
    }
}

type Outbound = Box<dyn Fn(SideChannelMessage) -> Result<(), ChannelError> + Send + Sync>;

/// One end of an environment's side-channel.
pub struct SideChannel {
    outbound: Outbound,
    inbox: Arc<Inbox>,
    closed: Arc<AtomicBool>,
}

impl SideChannel {
    /// Two endpoints wired to each other in-process.
    pub fn pair() -> (SideChannel, SideChannel) {
        let closed = Arc::new(AtomicBool::new(false));
        let inbox_a = Arc::new(Inbox::default());
        let inbox_b = Arc::new(Inbox::default());
        let to_b = Arc::clone(&inbox_b);
        let to_a = Arc::clone(&inbox_a);
        let a = SideChannel {
            outbound: Box::new(move |m| {
                to_b.deliver(m);
                Ok(())
            }),
            inbox: inbox_a,
            closed: Arc::clone(&closed),
        };
        let b = SideChannel {
            outbound: Box::new(move |m| {
                to_a.deliver(m);
                Ok(())
            }),
            inbox: inbox_b,
            closed,
        };
        (a, b)
    }

    /// Endpoint whose sends go through `transport`; incoming messages arrive
    /// via [`SideChannel::deliver`].
    pub fn with_transport<F>(transport: F) -> SideChannel
    where
        F: Fn(SideChannelMessage) -> Result<(), ChannelError> + Send + Sync + 'static,
    {
        SideChannel {
            outbound: Box::new(transport),
            inbox: Arc::new(Inbox::default()),
            closed: Arc::new(AtomicBool::new(false)),
        }
    }

    pub fn send(&self, key: impl Into<String>, value: Value) -> Result<(), ChannelError> {
        let msg = SideChannelMessage::new(key, value)?;
        if self.is_closed() {
            return Err(ChannelError::ChannelClosed);
        }
        (self.outbound)(msg)
    }

    pub fn register<F>(&self, prefix: impl Into<String>, handler: F) -> Result<(), ChannelError>
    where
        F: FnMut(&SideChannelMessage) + Send + 'static,
    {
        self.inbox.dispatcher.lock().unwrap().register(prefix, Box::new(handler))
    }

    pub fn set_default_handler<F>(&self, handler: F)
    where
        F: FnMut(&SideChannelMessage) + Send + 'static,
    {
        self.inbox.dispatcher.lock().unwrap().set_default(Box::new(handler));
    }

    /// Hands an incoming message to this endpoint's handlers.
    pub fn deliver(&self, msg: SideChannelMessage) {
        if !self.is_closed() {
            self.inbox.deliver(msg);
        }
    }

    /// Handle that feeds this endpoint from a transport thread.
    pub fn deliverer(&self) -> Deliverer {
        Deliverer {
            inbox: Arc::clone(&self.inbox),
            closed: Arc::clone(&self.closed),
        }
    }

    /// Messages that matched no handler.
    pub fn dropped(&self) -> u64 {
        self.inbox.dispatcher.lock().unwrap().dropped()
    }

    pub fn delivered(&self) -> u64 {
        self.inbox.delivered.load(Ordering::Relaxed)
    }

    pub fn close(&self) {
        self.closed.store(true, Ordering::Release);
    }

    pub fn is_closed(&self) -> bool {
        self.closed.load(Ordering::Acquire)
    }
}

impl std::fmt::Debug for SideChannel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SideChannel")
            .field("closed", &self.is_closed())
            .field("delivered", &self.delivered())
            .finish()
    }
}

/// Delivery handle for an endpoint, usable from another thread.
#[derive(Clone)]
pub struct Deliverer {
    inbox: Arc<Inbox>,
    closed: Arc<AtomicBool>,
}

impl Deliverer {
    pub fn deliver(&self, msg: SideChannelMessage) {
        if !self.closed.load(Ordering::Acquire) {
            self.inbox.deliver(msg);
        }
    }
}

/// Owns an environment's side-channel and hands out the client endpoint once.
#[derive(Debug)]
pub struct SideChannelHost {
    env_end: SideChannel,
    peer: Option<SideChannel>,
}

impl Default for SideChannelHost {
    fn default() -> Self {
        let (env_end, peer) = SideChannel::pair();
        SideChannelHost {
            env_end,
            peer: Some(peer),
        }
    }
}

impl SideChannelHost {
    pub fn new() -> Self {
        Self::default()
    }

    /// The environment's own endpoint.
    pub fn env_end(&self) -> &SideChannel {
        &self.env_end
    }

    /// Takes the client endpoint. A second call fails with `AlreadyOpen`.
    pub fn open(&mut self) -> Result<SideChannel, ChannelError> {
        self.peer.take().ok_or(ChannelError::AlreadyOpen)
    }
}
