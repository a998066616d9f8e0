//! Self-describing values carried in observations, actions, info maps and
//! side-channel payloads.

use std::collections::BTreeMap;
use std::fmt;

/// Element type of a [`Tensor`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DType {
    F32,
    F64,
    I32,
    I64,
    U8,
}

impl DType {
    pub const ALL: [DType; 5] = [DType::F32, DType::F64, DType::I32, DType::I64, DType::U8];

    /// Width of one element in bytes.
    pub fn width(self) -> usize {
        match self {
            DType::F32 | DType::I32 => 4,
            DType::F64 | DType::I64 => 8,
            DType::U8 => 1,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            DType::F32 => 0,
            DType::F64 => 1,
            DType::I32 => 2,
            DType::I64 => 3,
            DType::U8 => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<DType> {
        DType::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            DType::F32 => "f32",
            DType::F64 => "f64",
            DType::I32 => "i32",
            DType::I64 => "i64",
            DType::U8 => "u8",
        }
    }

    pub fn is_float(self) -> bool {
        matches!(self, DType::F32 | DType::F64)
    }
}

impl fmt::Display for DType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Error raised when tensor data does not match its declared shape.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("tensor of shape {shape:?} and dtype {dtype} needs {expected} bytes, got {actual}")]
pub struct ShapeError {
    pub dtype: DType,
    pub shape: Vec<u32>,
    pub expected: usize,
    pub actual: usize,
}

/// Dense row-major tensor. Elements are stored as little-endian bytes so that
/// equality is bitwise and the wire encoding is a plain copy.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Tensor {
    dtype: DType,
    shape: Vec<u32>,
    data: Vec<u8>,
}

/// Number of elements implied by `shape`, or `None` on overflow.
pub fn element_count(shape: &[u32]) -> Option<usize> {
    shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
}

macro_rules! typed_ctor {
    ($ctor:ident, $getter:ident, $ty:ty, $dtype:expr) => {
        pub fn $ctor(shape: Vec<u32>, values: &[$ty]) -> Result<Tensor, ShapeError> {
            let data = values.iter().flat_map(|v| v.to_le_bytes()).collect();
            Tensor::from_bytes($dtype, shape, data)
        }

        /// Returns the elements if the dtype matches.
        pub fn $getter(&self) -> Option<Vec<$ty>> {
            if self.dtype != $dtype {
                return None;
            }
            Some(
                self.data
                    .chunks_exact(std::mem::size_of::<$ty>())
                    .map(|c| <$ty>::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            )
        }
    };
}

impl Tensor {
    pub fn from_bytes(dtype: DType, shape: Vec<u32>, data: Vec<u8>) -> Result<Tensor, ShapeError> {
        let expected = element_count(&shape)
            .and_then(|n| n.checked_mul(dtype.width()))
            .unwrap_or(usize::MAX);
        if expected != data.len() {
            return Err(ShapeError {
                dtype,
                shape,
                expected,
                actual: data.len(),
            });
        }
        Ok(Tensor { dtype, shape, data })
    }

    typed_ctor!(from_f32, to_f32_vec, f32, DType::F32);
    typed_ctor!(from_f64, to_f64_vec, f64, DType::F64);
    typed_ctor!(from_i32, to_i32_vec, i32, DType::I32);
    typed_ctor!(from_i64, to_i64_vec, i64, DType::I64);

    pub fn from_u8(shape: Vec<u32>, values: &[u8]) -> Result<Tensor, ShapeError> {
        Tensor::from_bytes(DType::U8, shape, values.to_vec())
    }

    /// Builds a tensor of `dtype` from `f64` values, casting each element.
    pub fn from_f64_cast(dtype: DType, shape: Vec<u32>, values: &[f64]) -> Result<Tensor, ShapeError> {
        let mut data = Vec::with_capacity(values.len() * dtype.width());
        for &v in values {
            match dtype {
                DType::F32 => data.extend_from_slice(&(v as f32).to_le_bytes()),
                DType::F64 => data.extend_from_slice(&v.to_le_bytes()),
                DType::I32 => data.extend_from_slice(&(v as i32).to_le_bytes()),
                DType::I64 => data.extend_from_slice(&(v as i64).to_le_bytes()),
                DType::U8 => data.push(v as u8),
            }
        }
        Tensor::from_bytes(dtype, shape, data)
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    pub fn shape(&self) -> &[u32] {
        &self.shape
    }

    /// Raw little-endian row-major element bytes.
    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dtype.width()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Element `i` widened to `f64` (exact for every dtype except large i64).
    pub fn get_f64(&self, i: usize) -> f64 {
        let w = self.dtype.width();
        let b = &self.data[i * w..(i + 1) * w];
        match self.dtype {
            DType::F32 => f32::from_le_bytes(b.try_into().unwrap()) as f64,
            DType::F64 => f64::from_le_bytes(b.try_into().unwrap()),
            DType::I32 => i32::from_le_bytes(b.try_into().unwrap()) as f64,
            DType::I64 => i64::from_le_bytes(b.try_into().unwrap()) as f64,
            DType::U8 => b[0] as f64,
        }
    }

    pub fn iter_f64(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |i| self.get_f64(i))
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<f64> = self.iter_f64().collect();
        f.debug_struct("Tensor")
            .field("dtype", &self.dtype)
            .field("shape", &self.shape)
            .field("data", &items)
            .finish()
    }
}

/// Tagged datum. Floats compare bitwise, so `NaN == NaN` and `0.0 != -0.0`.
#[derive(Debug, Clone)]
pub enum Value {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    Bytes(Vec<u8>),
    Tensor(Tensor),
    List(Vec<Value>),
    Map(BTreeMap<String, Value>),
}

impl PartialEq for Value {
    fn eq(&self, other: &Value) -> bool {
        use Value::*;
        match (self, other) {
            (Bool(a), Bool(b)) => a == b,
            (Int(a), Int(b)) => a == b,
            (Float(a), Float(b)) => a.to_bits() == b.to_bits(),
            (Str(a), Str(b)) => a == b,
            (Bytes(a), Bytes(b)) => a == b,
            (Tensor(a), Tensor(b)) => a == b,
            (List(a), List(b)) => a == b,
            (Map(a), Map(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Value {}

impl Value {
    pub fn tag_name(&self) -> &'static str {
        match self {
            Value::Bool(_) => "bool",
            Value::Int(_) => "int",
            Value::Float(_) => "float",
            Value::Str(_) => "str",
            Value::Bytes(_) => "bytes",
            Value::Tensor(_) => "tensor",
            Value::List(_) => "list",
            Value::Map(_) => "map",
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_float(&self) -> Option<f64> {
        match self {
            Value::Float(x) => Some(*x),
            _ => None,
        }
    }

    pub fn as_tensor(&self) -> Option<&Tensor> {
        match self {
            Value::Tensor(t) => Some(t),
            _ => None,
        }
    }

    /// Nesting depth; scalars are depth 1.
    pub fn depth(&self) -> usize {
        match self {
            Value::List(items) => 1 + items.iter().map(Value::depth).max().unwrap_or(0),
            Value::Map(entries) => 1 + entries.values().map(Value::depth).max().unwrap_or(0),
            _ => 1,
        }
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Value {
        Value::Bool(v)
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Value {
        Value::Int(v)
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Value {
        Value::Float(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Value {
        Value::Str(v.to_owned())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Value {
        Value::Str(v)
    }
}

impl From<Tensor> for Value {
    fn from(v: Tensor) -> Value {
        Value::Tensor(v)
    }
}
