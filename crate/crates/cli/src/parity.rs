//! Byte-exact comparison of the same seeded run through three paths: the
//! environment in-process, served by a server thread in this process, and
//! served by a separate server process over loopback.

use std::io::{BufRead, BufReader};
use std::path::PathBuf;
use std::process::{Child, Command, Stdio};
use std::time::Duration;

use envlink::envs::EnvSpec;
use envlink::remote::{self, RemoteConfig};
use envlink::server::{Server, ServerConfig};
use envlink::wire::{encode_frame, Message};
use envlink::{EnvError, Environment};

use crate::rollout::RandomDriver;
use crate::Failure;

#[derive(Debug, Clone)]
pub struct ParityConfig {
    pub spec: EnvSpec,
    pub steps: u64,
    pub seed: u64,
    /// Corrupts the in-process server's result for this round (0-based step count).
    pub fault_round: Option<u64>,
    /// Binary started as `<exe> serve ...` for the loopback path.
    pub server_exe: PathBuf,
}

/// Encoded frames of a run: the initial reset, then one entry per round
/// holding its StepResult frame and any ResetResult frame that followed.
pub type Trace = Vec<Vec<u8>>;

fn frame(msg: &Message) -> Result<Vec<u8>, EnvError> {
    encode_frame(msg).map_err(|e| EnvError::Internal(e.to_string()))
}

pub fn trace(env: Environment, steps: u64, seed: u64) -> Result<Trace, EnvError> {
    let (mut driver, first) = RandomDriver::start(env, seed)?;
    let mut out = vec![frame(&Message::ResetResult { round: 0, result: first })?];
    for _ in 0..steps {
        let r = driver.step()?;
        let mut entry = frame(&Message::StepResult {
            round: r.index,
            result: r.result,
        })?;
        if let Some(reset) = r.reset {
            entry.extend(frame(&Message::ResetResult {
                round: r.index,
                result: reset,
            })?);
        }
        out.push(entry);
    }
    driver.close()?;
    Ok(out)
}

/// A server process that is killed when dropped.
pub struct ServerProcess {
    child: Child,
    pub port: u16,
}

impl ServerProcess {
    pub fn spawn(exe: &PathBuf, spec: &EnvSpec) -> Result<ServerProcess, Failure> {
        let mut child = Command::new(exe)
            .args(["serve", "--env", &spec.to_string(), "--bind", "127.0.0.1", "--port", "0"])
            .env("RUST_LOG", "warn")
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Failure::Other(anyhow::anyhow!("cannot start {}: {e}", exe.display())))?;
        let stdout = child.stdout.take().expect("piped stdout");
        let mut proc = ServerProcess { child, port: 0 };
        let mut line = String::new();
        BufReader::new(stdout).read_line(&mut line)?;
        proc.port = line
            .trim()
            .rsplit(':')
            .next()
            .and_then(|p| p.parse().ok())
            .ok_or_else(|| Failure::Network(format!("server process did not report its address: {line:?}")))?;
        Ok(proc)
    }
}

impl Drop for ServerProcess {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn connect(port: u16) -> Result<Environment, EnvError> {
    let mut config = RemoteConfig::new("127.0.0.1", port);
    config.connect_timeout = Duration::from_secs(5);
    remote::connect(config)
}

pub const PATHS: [&str; 3] = ["local", "in-process-served", "loopback-served"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Divergence {
    /// `None` for the initial reset.
    pub round: Option<u64>,
    pub path: &'static str,
}

impl std::fmt::Display for Divergence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.round {
            Some(r) => write!(f, "divergence at round {r}: {} differs from {}", self.path, PATHS[0]),
            None => write!(f, "divergence at the initial reset: {} differs from {}", self.path, PATHS[0]),
        }
    }
}

/// First entry where a trace differs from the reference.
pub fn first_divergence(reference: &Trace, other: &Trace, path: &'static str) -> Option<Divergence> {
    let n = reference.len().max(other.len());
    (0..n).find(|&i| reference.get(i) != other.get(i)).map(|i| Divergence {
        round: i.checked_sub(1).map(|r| r as u64),
        path,
    })
}

pub fn run(config: &ParityConfig) -> Result<Result<u64, Divergence>, Failure> {
    let local = trace(config.spec.build()?, config.steps, config.seed)?;

    let server_config = ServerConfig {
        fault_round: config.fault_round,
        ..ServerConfig::ephemeral()
    };
    let server = Server::serve(config.spec.build()?, server_config).map_err(|e| Failure::Network(e.to_string()))?;
    let in_process = trace(connect(server.local_addr().port())?, config.steps, config.seed)?;
    drop(server);

    let process = ServerProcess::spawn(&config.server_exe, &config.spec)?;
    let loopback = trace(connect(process.port)?, config.steps, config.seed)?;
    drop(process);

    for (t, path) in [(&in_process, PATHS[1]), (&loopback, PATHS[2])] {
        if let Some(d) = first_divergence(&local, t, path) {
            return Ok(Err(d));
        }
    }
    Ok(Ok(config.steps))
}
