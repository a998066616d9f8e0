//! Wire protocol v1: canonical value encoding, protocol messages, and
//! length-prefixed framing.
//!
//! A frame is a 4-byte big-endian body length followed by the body. Bodies
//! larger than [`MAX_FRAME`] are a protocol error. Everything inside the body
//! is little-endian.

pub mod codec;
pub mod message;

use std::io::{self, Read, Write};

use thiserror::Error;

pub use codec::{decode_value, encode_value};
pub use message::{ErrorCode, Message};

pub const PROTOCOL_VERSION: u16 = 1;
pub const MAX_FRAME: usize = 64 * 1024 * 1024;
pub const DEFAULT_PORT: u16 = 8888;
/// Overrides [`DEFAULT_PORT`] when set.
pub const PORT_ENV: &str = "ENVLINK_PORT";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("{0} trailing bytes after value")]
    TrailingBytes(usize),
    #[error("frame of {0} bytes exceeds the 64 MiB limit")]
    Oversize(usize),
    #[error("unknown message type {0:#04x}")]
    UnknownType(u8),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<io::Error> for WireError {
    fn from(e: io::Error) -> Self {
        WireError::Io(e.to_string())
    }
}

/// Port from `ENVLINK_PORT`, else 8888.
pub fn default_port() -> u16 {
    std::env::var(PORT_ENV)
        .ok()
        .and_then(|p| p.parse().ok())
        .unwrap_or(DEFAULT_PORT)
}

pub fn frame(body: &[u8]) -> Result<Vec<u8>, WireError> {
    if body.len() > MAX_FRAME {
        return Err(WireError::Oversize(body.len()));
    }
    let mut out = Vec::with_capacity(4 + body.len());
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(body);
    Ok(out)
}

/// Encodes `msg` as a complete frame.
pub fn encode_frame(msg: &Message) -> Result<Vec<u8>, WireError> {
    frame(&msg.encode_body()?)
}

/// Decodes exactly one complete frame.
pub fn decode_frame(bytes: &[u8]) -> Result<Message, WireError> {
    let mut dec = FrameDecoder::new();
    dec.feed(bytes);
    let msg = dec
        .next_message()?
        .ok_or_else(|| WireError::Malformed("incomplete frame".into()))?;
    dec.finish()?;
    Ok(msg)
}

/// Incremental decoder for a byte stream with arbitrary chunk boundaries.
#[derive(Debug, Default)]
pub struct FrameDecoder {
    buf: Vec<u8>,
    start: usize,
}

impl FrameDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn feed(&mut self, bytes: &[u8]) {
        if self.start > 0 && self.start * 2 >= self.buf.len() {
            self.buf.drain(..self.start);
            self.start = 0;
        }
        self.buf.extend_from_slice(bytes);
    }

    /// Bytes received but not yet consumed as a frame.
    pub fn pending(&self) -> usize {
        self.buf.len() - self.start
    }

    /// Next complete message, or `None` until more bytes arrive.
    pub fn next_message(&mut self) -> Result<Option<Message>, WireError> {
        let avail = &self.buf[self.start..];
        if avail.len() < 4 {
            return Ok(None);
        }
        let len = u32::from_be_bytes(avail[..4].try_into().unwrap()) as usize;
        if len > MAX_FRAME {
            return Err(WireError::Oversize(len));
        }
        if avail.len() < 4 + len {
            return Ok(None);
        }
        let msg = Message::decode_body(&avail[4..4 + len])?;
        self.start += 4 + len;
        Ok(Some(msg))
    }

    /// Call at end of stream: leftover bytes mean a truncated frame.
    pub fn finish(&self) -> Result<(), WireError> {
        match self.pending() {
            0 => Ok(()),
            n => Err(WireError::Malformed(format!("stream ended inside a frame ({n} bytes pending)"))),
        }
    }
}

/// Decodes every message from a chunked byte stream.
pub fn decode_stream<'a>(chunks: impl IntoIterator<Item = &'a [u8]>) -> Result<Vec<Message>, WireError> {
    let mut dec = FrameDecoder::new();
    let mut out = Vec::new();
    for chunk in chunks {
        dec.feed(chunk);
        while let Some(m) = dec.next_message()? {
            out.push(m);
        }
    }
    dec.finish()?;
    Ok(out)
}

/// Blocking read of one frame body. `Ok(None)` on a clean end of stream.
pub fn read_frame(r: &mut impl Read) -> Result<Option<Vec<u8>>, WireError> {
    let mut header = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut header[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(WireError::Malformed("stream ended inside a frame header".into())),
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let len = u32::from_be_bytes(header) as usize;
    if len > MAX_FRAME {
        return Err(WireError::Oversize(len));
    }
    let mut body = vec![0u8; len];
    r.read_exact(&mut body).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof => WireError::Malformed("stream ended inside a frame body".into()),
        _ => e.into(),
    })?;
    Ok(Some(body))
}

/// Blocking read of one message. `Ok(None)` on a clean end of stream.
pub fn read_message(r: &mut impl Read) -> Result<Option<Message>, WireError> {
    match read_frame(r)? {
        Some(body) => Message::decode_body(&body).map(Some),
        None => Ok(None),
    }
}

pub fn write_message(w: &mut impl Write, msg: &Message) -> Result<(), WireError> {
    w.write_all(&encode_frame(msg)?)?;
    w.flush()?;
    Ok(())
}
