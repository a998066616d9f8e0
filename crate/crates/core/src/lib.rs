//! Uniform multi-agent environment interface.
//!
//! An [`Environment`] fronts any [`EnvironmentAdapter`]: a builtin simulation
//! running in-process, or a [`remote::RemoteAdapter`] talking to a
//! [`server::Server`] over TCP. Both produce identical trajectories for the
//! same seed and actions. The server lets several clients each drive a subset
//! of agents, stepping the environment once per round after every agent's
//! action has arrived.

pub mod envs;
pub mod error;
pub mod gym;
pub mod model;
pub mod prng;
pub mod remote;
pub mod server;
pub mod side_channel;
pub mod space;
pub mod value;
pub mod wire;

pub use error::EnvError;
pub use model::{AgentId, AgentMap, Environment, EnvironmentAdapter, Info, ResetResult, StepResult};
pub use side_channel::{SideChannel, SideChannelMessage};
pub use space::{BoxSpace, Space};
pub use value::{DType, Tensor, Value};
