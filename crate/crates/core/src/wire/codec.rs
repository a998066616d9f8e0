//! Canonical binary encoding of [`Value`] and [`Space`].
//!
//! ```text
//! value  := tag:u8 body
//! 0x00 Bool    u8 (0 or 1)
//! 0x01 Int     i64 little-endian
//! 0x02 Float   f64 little-endian (bit pattern preserved)
//! 0x03 Str     len:u32le utf8[len]
//! 0x04 Bytes   len:u32le raw[len]
//! 0x05 Tensor  dtype:u8 rank:u8 dims:u32le[rank] data (row-major, little-endian)
//! 0x06 List    count:u32le value[count]
//! 0x07 Map     count:u32le (key:str value)[count], keys ascending bytewise
//!
//! space  := 0x00 n:u64le                         Discrete
//!         | 0x01 dtype:u8 rank:u8 dims:u32le[rank] low-data high-data   Box
//! ```

use std::collections::BTreeMap;

use super::WireError;
use crate::space::{BoxSpace, Space};
use crate::value::{element_count, DType, Tensor, Value};

pub const TAG_BOOL: u8 = 0x00;
pub const TAG_INT: u8 = 0x01;
pub const TAG_FLOAT: u8 = 0x02;
pub const TAG_STR: u8 = 0x03;
pub const TAG_BYTES: u8 = 0x04;
pub const TAG_TENSOR: u8 = 0x05;
pub const TAG_LIST: u8 = 0x06;
pub const TAG_MAP: u8 = 0x07;

pub const SPACE_DISCRETE: u8 = 0x00;
pub const SPACE_BOX: u8 = 0x01;

/// Decoding refuses values nested deeper than this.
pub const MAX_DEPTH: usize = 64;

pub fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub fn put_len(out: &mut Vec<u8>, len: usize) -> Result<(), WireError> {
    let len = u32::try_from(len).map_err(|_| WireError::Oversize(len))?;
    put_u32(out, len);
    Ok(())
}

pub fn put_str(out: &mut Vec<u8>, s: &str) -> Result<(), WireError> {
    put_len(out, s.len())?;
    out.extend_from_slice(s.as_bytes());
    Ok(())
}

fn put_tensor_header(out: &mut Vec<u8>, t: &Tensor) -> Result<(), WireError> {
    out.push(t.dtype().code());
    let rank = u8::try_from(t.shape().len()).map_err(|_| WireError::Malformed(format!("tensor rank {} exceeds 255", t.shape().len())))?;
    out.push(rank);
    for &d in t.shape() {
        put_u32(out, d);
    }
    Ok(())
}

pub fn write_value(out: &mut Vec<u8>, v: &Value) -> Result<(), WireError> {
    match v {
        Value::Bool(b) => {
            out.push(TAG_BOOL);
            out.push(*b as u8);
        }
        Value::Int(i) => {
            out.push(TAG_INT);
            out.extend_from_slice(&i.to_le_bytes());
        }
        Value::Float(x) => {
            out.push(TAG_FLOAT);
            out.extend_from_slice(&x.to_le_bytes());
        }
        Value::Str(s) => {
            out.push(TAG_STR);
            put_str(out, s)?;
        }
        Value::Bytes(b) => {
            out.push(TAG_BYTES);
            put_len(out, b.len())?;
            out.extend_from_slice(b);
        }
        Value::Tensor(t) => {
            out.push(TAG_TENSOR);
            put_tensor_header(out, t)?;
            out.extend_from_slice(t.data());
        }
        Value::List(items) => {
            out.push(TAG_LIST);
            put_len(out, items.len())?;
            for item in items {
                write_value(out, item)?;
            }
        }
        Value::Map(entries) => {
            out.push(TAG_MAP);
            write_map_body(out, entries.iter().map(|(k, v)| (k.as_str(), v)), entries.len())?;
        }
    }
    Ok(())
}

/// `count` then `(key, value)` pairs; the iterator must yield ascending keys.
pub fn write_map_body<'a>(
    out: &mut Vec<u8>,
    entries: impl Iterator<Item = (&'a str, &'a Value)>,
    count: usize,
) -> Result<(), WireError> {
    put_len(out, count)?;
    for (k, v) in entries {
        put_str(out, k)?;
        write_value(out, v)?;
    }
    Ok(())
}

pub fn encode_value(v: &Value) -> Result<Vec<u8>, WireError> {
    let mut out = Vec::new();
    write_value(&mut out, v)?;
    Ok(out)
}

/// Decodes exactly one value; leftover bytes are an error.
pub fn decode_value(bytes: &[u8]) -> Result<Value, WireError> {
    let mut r = Reader::new(bytes);
    let v = r.value()?;
    r.finish()?;
    Ok(v)
}

pub fn write_space(out: &mut Vec<u8>, s: &Space) -> Result<(), WireError> {
    match s {
        Space::Discrete { n } => {
            out.push(SPACE_DISCRETE);
            out.extend_from_slice(&n.to_le_bytes());
        }
        Space::Box(b) => {
            out.push(SPACE_BOX);
            put_tensor_header(out, b.low())?;
            out.extend_from_slice(b.low().data());
            out.extend_from_slice(b.high().data());
        }
    }
    Ok(())
}

/// Cursor over an input buffer. Every read checks bounds first.
pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn finish(&self) -> Result<(), WireError> {
        if self.remaining() == 0 {
            Ok(())
        } else {
            Err(WireError::TrailingBytes(self.remaining()))
        }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        if n > self.remaining() {
            return Err(WireError::Malformed(format!(
                "need {n} bytes at offset {}, only {} left",
                self.pos,
                self.remaining()
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }

    pub fn bool(&mut self) -> Result<bool, WireError> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(WireError::Malformed(format!("bool byte {b:#04x}"))),
        }
    }

    pub fn u16(&mut self) -> Result<u16, WireError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub fn u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64, WireError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64, WireError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    /// A count that must be satisfiable with at least `min_item` bytes each.
    pub fn count(&mut self, min_item: usize) -> Result<usize, WireError> {
        let n = self.u32()? as usize;
        if n.saturating_mul(min_item) > self.remaining() {
            return Err(WireError::Malformed(format!("count {n} exceeds remaining input")));
        }
        Ok(n)
    }

    pub fn str(&mut self) -> Result<String, WireError> {
        let len = self.u32()? as usize;
        let raw = self.take(len)?;
        String::from_utf8(raw.to_vec()).map_err(|_| WireError::Malformed("string is not UTF-8".into()))
    }

    fn tensor_header(&mut self) -> Result<(DType, Vec<u32>, usize), WireError> {
        let code = self.u8()?;
        let dtype = DType::from_code(code).ok_or_else(|| WireError::Malformed(format!("unknown dtype {code}")))?;
        let rank = self.u8()? as usize;
        let dims = (0..rank).map(|_| self.u32()).collect::<Result<Vec<_>, _>>()?;
        let bytes = element_count(&dims)
            .and_then(|n| n.checked_mul(dtype.width()))
            .ok_or_else(|| WireError::Malformed(format!("tensor dims {dims:?} overflow")))?;
        Ok((dtype, dims, bytes))
    }

    pub fn value(&mut self) -> Result<Value, WireError> {
        self.value_at(1)
    }

    fn value_at(&mut self, depth: usize) -> Result<Value, WireError> {
        if depth > MAX_DEPTH {
            return Err(WireError::Malformed(format!("value nested deeper than {MAX_DEPTH}")));
        }
        let tag = self.u8()?;
        Ok(match tag {
            TAG_BOOL => Value::Bool(self.bool()?),
            TAG_INT => Value::Int(i64::from_le_bytes(self.take(8)?.try_into().unwrap())),
            TAG_FLOAT => Value::Float(self.f64()?),
            TAG_STR => Value::Str(self.str()?),
            TAG_BYTES => {
                let len = self.u32()? as usize;
                Value::Bytes(self.take(len)?.to_vec())
            }
            TAG_TENSOR => {
                let (dtype, dims, bytes) = self.tensor_header()?;
                let data = self.take(bytes)?.to_vec();
                Value::Tensor(Tensor::from_bytes(dtype, dims, data).map_err(|e| WireError::Malformed(e.to_string()))?)
            }
            TAG_LIST => {
                let n = self.count(1)?;
                let mut items = Vec::with_capacity(n);
                for _ in 0..n {
                    items.push(self.value_at(depth + 1)?);
                }
                Value::List(items)
            }
            TAG_MAP => Value::Map(self.map_body(|r| r.value_at(depth + 1))?),
            other => return Err(WireError::Malformed(format!("unknown value tag {other:#04x}"))),
        })
    }

    /// Map entries; keys must be strictly ascending, which also rules out
    /// duplicates and keeps the encoding canonical.
    pub fn map_body<T>(
        &mut self,
        mut item: impl FnMut(&mut Self) -> Result<T, WireError>,
    ) -> Result<BTreeMap<String, T>, WireError> {
        let n = self.count(5)?;
        let mut out = BTreeMap::new();
        let mut last: Option<String> = None;
        for _ in 0..n {
            let key = self.str()?;
            if let Some(prev) = &last {
                if key.as_bytes() <= prev.as_bytes() {
                    return Err(WireError::Malformed(format!("map key {key:?} not in ascending order")));
                }
            }
            let v = item(self)?;
            last = Some(key.clone());
            out.insert(key, v);
        }
        Ok(out)
    }

    pub fn space(&mut self) -> Result<Space, WireError> {
        match self.u8()? {
            SPACE_DISCRETE => {
                let n = self.u64()?;
                Space::discrete(n).map_err(|e| WireError::Malformed(e.to_string()))
            }
            SPACE_BOX => {
                let (dtype, dims, bytes) = self.tensor_header()?;
                let low = self.take(bytes)?.to_vec();
                let high = self.take(bytes)?.to_vec();
                let bad = |e: &dyn std::fmt::Display| WireError::Malformed(e.to_string());
                let low = Tensor::from_bytes(dtype, dims.clone(), low).map_err(|e| bad(&e))?;
                let high = Tensor::from_bytes(dtype, dims, high).map_err(|e| bad(&e))?;
                Ok(Space::Box(BoxSpace::new(low, high).map_err(|e| bad(&e))?))
            }
            other => Err(WireError::Malformed(format!("unknown space tag {other:#04x}"))),
        }
    }
}
