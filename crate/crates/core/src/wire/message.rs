//! Protocol messages. A frame body is one type byte followed by the payload
//! fields in the order they are declared below; all integers little-endian.

use std::collections::BTreeMap;
use std::fmt;

use super::codec::{put_len, put_str, write_map_body, write_space, write_value, Reader};
use super::WireError;
use crate::error::EnvError;
use crate::model::{AgentId, AgentMap, Info, ResetResult, StepResult};
use crate::side_channel::SideChannelMessage;
use crate::space::Space;
use crate::value::Value;

pub const MSG_HELLO: u8 = 0x01;
pub const MSG_HELLO_ACK: u8 = 0x02;
pub const MSG_RESET: u8 = 0x03;
pub const MSG_RESET_RESULT: u8 = 0x04;
pub const MSG_STEP: u8 = 0x05;
pub const MSG_STEP_RESULT: u8 = 0x06;
pub const MSG_CLOSE: u8 = 0x07;
pub const MSG_SIDE_CHANNEL: u8 = 0x08;
pub const MSG_SPACE_QUERY: u8 = 0x09;
pub const MSG_SPACE_REPLY: u8 = 0x0A;
pub const MSG_ERROR: u8 = 0x0E;

/// Error categories carried by [`Message::Error`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum ErrorCode {
    VersionMismatch = 0x01,
    AgentTaken = 0x02,
    UnknownAgent = 0x03,
    NotOwner = 0x04,
    BarrierTimeout = 0x05,
    RoundAborted = 0x06,
    ClientLost = 0x07,
    EnvClosed = 0x08,
    NotReset = 0x09,
    EpisodeOver = 0x0A,
    MissingAgent = 0x0B,
    SpaceMismatch = 0x0C,
    ResetInProgress = 0x0D,
    Protocol = 0x0E,
    Internal = 0x0F,
}

impl ErrorCode {
    const ALL: [ErrorCode; 15] = [
        ErrorCode::VersionMismatch,
        ErrorCode::AgentTaken,
        ErrorCode::UnknownAgent,
        ErrorCode::NotOwner,
        ErrorCode::BarrierTimeout,
        ErrorCode::RoundAborted,
        ErrorCode::ClientLost,
        ErrorCode::EnvClosed,
        ErrorCode::NotReset,
        ErrorCode::EpisodeOver,
        ErrorCode::MissingAgent,
        ErrorCode::SpaceMismatch,
        ErrorCode::ResetInProgress,
        ErrorCode::Protocol,
        ErrorCode::Internal,
    ];

    pub fn from_u8(b: u8) -> Option<ErrorCode> {
        ErrorCode::ALL.iter().copied().find(|c| *c as u8 == b)
    }

    /// Classifies an environment error for transmission.
    pub fn of(err: &EnvError) -> (ErrorCode, String) {
        use EnvError as E;
        let code = match err {
            E::VersionMismatch(_) => ErrorCode::VersionMismatch,
            E::AgentTaken(_) => ErrorCode::AgentTaken,
            E::UnknownAgent(_) => ErrorCode::UnknownAgent,
            E::NotOwner(_) => ErrorCode::NotOwner,
            E::BarrierTimeout => ErrorCode::BarrierTimeout,
            E::RoundAborted(_) => ErrorCode::RoundAborted,
            E::ClientLost(_) => ErrorCode::ClientLost,
            E::EnvClosed => ErrorCode::EnvClosed,
            E::NotReset => ErrorCode::NotReset,
            E::EpisodeOver => ErrorCode::EpisodeOver,
            E::MissingAgent(_) => ErrorCode::MissingAgent,
            E::SpaceMismatch(_) => ErrorCode::SpaceMismatch,
            E::ResetInProgress => ErrorCode::ResetInProgress,
            E::Protocol(_) => ErrorCode::Protocol,
            _ => ErrorCode::Internal,
        };
        let detail = match err {
            E::VersionMismatch(s)
            | E::AgentTaken(s)
            | E::UnknownAgent(s)
            | E::NotOwner(s)
            | E::RoundAborted(s)
            | E::ClientLost(s)
            | E::MissingAgent(s)
            | E::SpaceMismatch(s)
            | E::Protocol(s) => s.clone(),
            other => other.to_string(),
        };
        (code, detail)
    }

    /// Rebuilds the environment error a peer reported.
    pub fn to_error(self, detail: &str) -> EnvError {
        let d = detail.to_owned();
        match self {
            ErrorCode::VersionMismatch => EnvError::VersionMismatch(d),
            ErrorCode::AgentTaken => EnvError::AgentTaken(d),
            ErrorCode::UnknownAgent => EnvError::UnknownAgent(d),
            ErrorCode::NotOwner => EnvError::NotOwner(d),
            ErrorCode::BarrierTimeout => EnvError::BarrierTimeout,
            ErrorCode::RoundAborted => EnvError::RoundAborted(d),
            ErrorCode::ClientLost => EnvError::ClientLost(d),
            ErrorCode::EnvClosed => EnvError::EnvClosed,
            ErrorCode::NotReset => EnvError::NotReset,
            ErrorCode::EpisodeOver => EnvError::EpisodeOver,
            ErrorCode::MissingAgent => EnvError::MissingAgent(d),
            ErrorCode::SpaceMismatch => EnvError::SpaceMismatch(d),
            ErrorCode::ResetInProgress => EnvError::ResetInProgress,
            ErrorCode::Protocol => EnvError::Protocol(d),
            ErrorCode::Internal => EnvError::Internal(d),
        }
    }
}

/// One protocol message.
///
/// `round` fields carry the server's round sequence number: the index of the
/// barrier round a request targets or a broadcast concludes. Every completed
/// or aborted round increments it by one.
#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Hello {
        version: u16,
        agents: Vec<AgentId>,
    },
    HelloAck {
        accepted: Vec<AgentId>,
        observation_space: AgentMap<Space>,
        action_space: AgentMap<Space>,
        barrier_timeout_ms: u64,
        round: u64,
    },
    Reset {
        round: u64,
        seed: Option<u64>,
    },
    ResetResult {
        round: u64,
        result: ResetResult,
    },
    Step {
        round: u64,
        actions: AgentMap<Value>,
    },
    StepResult {
        round: u64,
        result: StepResult,
    },
    Close,
    SideChannel(SideChannelMessage),
    SpaceQuery,
    SpaceReply {
        observation_space: AgentMap<Space>,
        action_space: AgentMap<Space>,
    },
    Error {
        code: ErrorCode,
        /// Set when the error ends round `round` for every client.
        concludes_round: bool,
        round: u64,
        message: String,
    },
}

impl Message {
    pub fn type_byte(&self) -> u8 {
        match self {
            Message::Hello { .. } => MSG_HELLO,
            Message::HelloAck { .. } => MSG_HELLO_ACK,
            Message::Reset { .. } => MSG_RESET,
            Message::ResetResult { .. } => MSG_RESET_RESULT,
            Message::Step { .. } => MSG_STEP,
            Message::StepResult { .. } => MSG_STEP_RESULT,
            Message::Close => MSG_CLOSE,
            Message::SideChannel(_) => MSG_SIDE_CHANNEL,
            Message::SpaceQuery => MSG_SPACE_QUERY,
            Message::SpaceReply { .. } => MSG_SPACE_REPLY,
            Message::Error { .. } => MSG_ERROR,
        }
    }

    pub fn error(err: &EnvError, concludes_round: bool, round: u64) -> Message {
        let (code, message) = ErrorCode::of(err);
        Message::Error {
            code,
            concludes_round,
            round,
            message,
        }
    }

    /// Frame body: type byte plus payload.
    pub fn encode_body(&self) -> Result<Vec<u8>, WireError> {
        let mut out = vec![self.type_byte()];
        match self {
            Message::Hello { version, agents } => {
                out.extend_from_slice(&version.to_le_bytes());
                put_agent_list(&mut out, agents)?;
            }
            Message::HelloAck {
                accepted,
                observation_space,
                action_space,
                barrier_timeout_ms,
                round,
            } => {
                put_agent_list(&mut out, accepted)?;
                put_spaces(&mut out, observation_space)?;
                put_spaces(&mut out, action_space)?;
                out.extend_from_slice(&barrier_timeout_ms.to_le_bytes());
                out.extend_from_slice(&round.to_le_bytes());
            }
            Message::Reset { round, seed } => {
                out.extend_from_slice(&round.to_le_bytes());
                match seed {
                    Some(s) => {
                        out.push(1);
                        out.extend_from_slice(&s.to_le_bytes());
                    }
                    None => out.push(0),
                }
            }
            Message::ResetResult { round, result } => {
                out.extend_from_slice(&round.to_le_bytes());
                put_agent_values(&mut out, &result.observation)?;
                put_info(&mut out, &result.info)?;
            }
            Message::Step { round, actions } => {
                out.extend_from_slice(&round.to_le_bytes());
                put_agent_values(&mut out, actions)?;
            }
            Message::StepResult { round, result } => {
                out.extend_from_slice(&round.to_le_bytes());
                put_agent_values(&mut out, &result.observation)?;
                put_len(&mut out, result.reward.len())?;
                for (agent, r) in &result.reward {
                    put_str(&mut out, agent.as_str())?;
                    out.extend_from_slice(&r.to_le_bytes());
                }
                put_len(&mut out, result.done.len())?;
                for (agent, d) in &result.done {
                    put_str(&mut out, agent.as_str())?;
                    out.push(*d as u8);
                }
                put_agent_values(&mut out, &result.last_action)?;
                put_info(&mut out, &result.info)?;
            }
            Message::Close | Message::SpaceQuery => {}
            Message::SideChannel(m) => {
                put_str(&mut out, m.key())?;
                write_value(&mut out, m.value())?;
            }
            Message::SpaceReply {
                observation_space,
                action_space,
            } => {
                put_spaces(&mut out, observation_space)?;
                put_spaces(&mut out, action_space)?;
            }
            Message::Error {
                code,
                concludes_round,
                round,
                message,
            } => {
                out.push(*code as u8);
                out.push(*concludes_round as u8);
                out.extend_from_slice(&round.to_le_bytes());
                put_str(&mut out, message)?;
            }
        }
        Ok(out)
    }

    pub fn decode_body(body: &[u8]) -> Result<Message, WireError> {
        let mut r = Reader::new(body);
        let ty = r.u8()?;
        let msg = match ty {
            MSG_HELLO => Message::Hello {
                version: r.u16()?,
                agents: agent_list(&mut r)?,
            },
            MSG_HELLO_ACK => Message::HelloAck {
                accepted: agent_list(&mut r)?,
                observation_space: spaces(&mut r)?,
                action_space: spaces(&mut r)?,
                barrier_timeout_ms: r.u64()?,
                round: r.u64()?,
            },
            MSG_RESET => {
                let round = r.u64()?;
                let seed = if r.bool()? { Some(r.u64()?) } else { None };
                Message::Reset { round, seed }
            }
            MSG_RESET_RESULT => Message::ResetResult {
                round: r.u64()?,
                result: ResetResult {
                    observation: agent_values(&mut r)?,
                    info: r.map_body(|r| r.value())?,
                },
            },
            MSG_STEP => Message::Step {
                round: r.u64()?,
                actions: agent_values(&mut r)?,
            },
            MSG_STEP_RESULT => {
                let round = r.u64()?;
                let observation = agent_values(&mut r)?;
                let reward = agent_keyed(r.map_body(|r| r.f64())?)?;
                let done = agent_keyed(r.map_body(|r| r.bool())?)?;
                let last_action = agent_values(&mut r)?;
                let info: Info = r.map_body(|r| r.value())?;
                Message::StepResult {
                    round,
                    result: StepResult {
                        observation,
                        reward,
                        done,
                        last_action,
                        info,
                    },
                }
            }
            MSG_CLOSE => Message::Close,
            MSG_SIDE_CHANNEL => {
                let key = r.str()?;
                let value = r.value()?;
                Message::SideChannel(SideChannelMessage::new(key, value).map_err(|e| WireError::Malformed(e.to_string()))?)
            }
            MSG_SPACE_QUERY => Message::SpaceQuery,
            MSG_SPACE_REPLY => Message::SpaceReply {
                observation_space: spaces(&mut r)?,
                action_space: spaces(&mut r)?,
            },
            MSG_ERROR => {
                let raw = r.u8()?;
                let code = ErrorCode::from_u8(raw).ok_or_else(|| WireError::Malformed(format!("unknown error code {raw:#04x}")))?;
                Message::Error {
                    code,
                    concludes_round: r.bool()?,
                    round: r.u64()?,
                    message: r.str()?,
                }
            }
            other => return Err(WireError::UnknownType(other)),
        };
        r.finish()?;
        Ok(msg)
    }
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Message::Hello { .. } => "Hello",
            Message::HelloAck { .. } => "HelloAck",
            Message::Reset { .. } => "Reset",
            Message::ResetResult { .. } => "ResetResult",
            Message::Step { .. } => "Step",
            Message::StepResult { .. } => "StepResult",
            Message::Close => "Close",
            Message::SideChannel(_) => "SideChannel",
            Message::SpaceQuery => "SpaceQuery",
            Message::SpaceReply { .. } => "SpaceReply",
            Message::Error { .. } => "Error",
        };
        f.write_str(name)
    }
}

fn put_agent_list(out: &mut Vec<u8>, agents: &[AgentId]) -> Result<(), WireError> {
    put_len(out, agents.len())?;
    for a in agents {
        put_str(out, a.as_str())?;
    }
    Ok(())
}

fn put_agent_values(out: &mut Vec<u8>, map: &AgentMap<Value>) -> Result<(), WireError> {
    write_map_body(out, map.iter().map(|(k, v)| (k.as_str(), v)), map.len())
}

fn put_info(out: &mut Vec<u8>, info: &Info) -> Result<(), WireError> {
    write_map_body(out, info.iter().map(|(k, v)| (k.as_str(), v)), info.len())
}

fn put_spaces(out: &mut Vec<u8>, map: &AgentMap<Space>) -> Result<(), WireError> {
    put_len(out, map.len())?;
    for (agent, space) in map {
        put_str(out, agent.as_str())?;
        write_space(out, space)?;
    }
    Ok(())
}

fn agent_id(s: String) -> Result<AgentId, WireError> {
    AgentId::new(s).map_err(|_| WireError::Malformed("empty agent id".into()))
}

fn agent_list(r: &mut Reader<'_>) -> Result<Vec<AgentId>, WireError> {
    let n = r.count(4)?;
    (0..n).map(|_| agent_id(r.str()?)).collect()
}

fn agent_keyed<T>(map: BTreeMap<String, T>) -> Result<AgentMap<T>, WireError> {
    map.into_iter().map(|(k, v)| Ok((agent_id(k)?, v))).collect()
}

fn agent_values(r: &mut Reader<'_>) -> Result<AgentMap<Value>, WireError> {
    agent_keyed(r.map_body(|r| r.value())?)
}

fn spaces(r: &mut Reader<'_>) -> Result<AgentMap<Space>, WireError> {
    agent_keyed(r.map_body(|r| r.space())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_codes_roundtrip_through_env_errors() {
        for code in ErrorCode::ALL {
            let err = code.to_error("detail");
            let (back, _) = ErrorCode::of(&err);
            assert_eq!(back, code);
            assert_eq!(ErrorCode::from_u8(code as u8), Some(code));
        }
        assert_eq!(ErrorCode::from_u8(0), None);
        assert_eq!(ErrorCode::from_u8(0x10), None);
    }

    #[test]
    fn detail_survives_transmission() {
        let err = EnvError::NotOwner("agent1".into());
        let (code, detail) = ErrorCode::of(&err);
        assert_eq!(code.to_error(&detail), err);
    }

    #[test]
    fn side_channel_payload_is_validated_on_decode() {
        let mut body = vec![MSG_SIDE_CHANNEL];
        put_str(&mut body, "k").unwrap();
        write_value(&mut body, &Value::List(vec![])).unwrap();
        assert!(matches!(Message::decode_body(&body), Err(WireError::Malformed(_))));
    }

    #[test]
    fn unknown_type_byte() {
        assert_eq!(Message::decode_body(&[0x0B]), Err(WireError::UnknownType(0x0B)));
        assert_eq!(Message::decode_body(&[0x00]), Err(WireError::UnknownType(0x00)));
    }

    #[test]
    fn empty_agent_id_is_malformed() {
        let mut body = vec![MSG_HELLO, 1, 0];
        put_len(&mut body, 1).unwrap();
        put_str(&mut body, "").unwrap();
        assert!(matches!(Message::decode_body(&body), Err(WireError::Malformed(_))));
    }
}
