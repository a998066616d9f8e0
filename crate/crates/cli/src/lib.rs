//! Operator tooling around envlink: serving, rollouts, parity checks,
//! benchmarking and a tabular Q-learner.

pub mod bench;
pub mod parity;
pub mod qlearn;
pub mod rollout;

use std::fmt;
use std::time::Duration;

use envlink::envs::{EnvSpec, EnvSpecError};
use envlink::remote::{self, RemoteConfig};
use envlink::value::DType;
use envlink::wire::default_port;
use envlink::{EnvError, Environment, Value};
use serde_json::{json, Value as Json};

/// Process exit status for a failed command.
#[derive(Debug)]
pub enum Failure {
    /// Trajectories or assertions disagreed.
    Mismatch(String),
    Usage(String),
    Network(String),
    Other(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Mismatch(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Network(_) => 3,
            Failure::Other(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Mismatch(m) | Failure::Usage(m) | Failure::Network(m) => f.write_str(m),
            Failure::Other(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<EnvError> for Failure {
    fn from(e: EnvError) -> Self {
        match e {
            EnvError::ConnectionRefused(_) | EnvError::ConnectionLost(_) | EnvError::RequestTimeout => {
                Failure::Network(e.to_string())
            }
            EnvError::InvalidConfig(_) => Failure::Usage(e.to_string()),
            other => Failure::Other(other.into()),
        }
    }
}

impl From<EnvSpecError> for Failure {
    fn from(e: EnvSpecError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Other(e.into())
    }
}

/// `host:port`, or a bare host that takes the default port.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Endpoint {
    pub host: String,
    pub port: u16,
}

impl std::str::FromStr for Endpoint {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.rsplit_once(':') {
            Some((host, port)) if !host.is_empty() => Ok(Endpoint {
                host: host.trim_start_matches('[').trim_end_matches(']').to_owned(),
                port: port.parse().map_err(|_| format!("bad port in {s:?}"))?,
            }),
            Some(_) => Err(format!("missing host in {s:?}")),
            None if s.is_empty() => Err("empty address".into()),
            None => Ok(Endpoint {
                host: s.to_owned(),
                port: default_port(),
            }),
        }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.host, self.port)
    }
}

/// Where a command gets its environment from.
#[derive(Debug, Clone)]
pub enum Target {
    Local(EnvSpec),
    Remote(Endpoint),
}

impl Target {
    pub fn open(&self) -> Result<Environment, Failure> {
        match self {
            Target::Local(spec) => Ok(spec.build()?),
            Target::Remote(ep) => {
                let mut config = RemoteConfig::new(ep.host.clone(), ep.port);
                config.connect_timeout = Duration::from_secs(5);
                Ok(remote::connect(config)?)
            }
        }
    }
}

/// JSON rendering used in rollout records. Tensors become flat arrays.
pub fn value_json(v: &Value) -> Json {
    match v {
        Value::Bool(b) => json!(b),
        Value::Int(i) => json!(i),
        Value::Float(f) => json!(f),
        Value::Str(s) => json!(s),
        Value::Bytes(b) => json!(b),
        Value::Tensor(t) => match t.dtype() {
            DType::I64 => json!(t.to_i64_vec().unwrap()),
            DType::I32 => json!(t.to_i32_vec().unwrap()),
            DType::U8 => json!(t.data()),
            DType::F32 => json!(t.to_f32_vec().unwrap()),
            DType::F64 => json!(t.to_f64_vec().unwrap()),
        },
        Value::List(items) => Json::Array(items.iter().map(value_json).collect()),
        Value::Map(m) => Json::Object(m.iter().map(|(k, v)| (k.clone(), value_json(v))).collect()),
    }
}
