//! Observation and action domains.

use std::fmt;

use crate::prng::SplitMix64;
use crate::value::{element_count, DType, Tensor, Value};

/// Bounded tensor domain. `low` and `high` have the declared shape and dtype.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoxSpace {
    low: Tensor,
    high: Tensor,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SpaceError {
    #[error("discrete space must have at least one action")]
    EmptyDiscrete,
    #[error("box dimensions must be positive: {0:?}")]
    ZeroDimension(Vec<u32>),
    #[error("box bounds disagree on {0}")]
    BoundsMismatch(&'static str),
    #[error("box low exceeds high at element {0}")]
    Inverted(usize),
}

impl BoxSpace {
    pub fn new(low: Tensor, high: Tensor) -> Result<BoxSpace, SpaceError> {
        if low.dtype() != high.dtype() {
            return Err(SpaceError::BoundsMismatch("dtype"));
        }
        if low.shape() != high.shape() {
            return Err(SpaceError::BoundsMismatch("shape"));
        }
        if low.shape().iter().any(|&d| d == 0) {
            return Err(SpaceError::ZeroDimension(low.shape().to_vec()));
        }
        if let Some(i) = low.iter_f64().zip(high.iter_f64()).position(|(l, h)| !(l <= h)) {
            return Err(SpaceError::Inverted(i));
        }
        Ok(BoxSpace { low, high })
    }

    /// Box with the same bounds on every element.
    pub fn uniform(dtype: DType, shape: Vec<u32>, low: f64, high: f64) -> Result<BoxSpace, SpaceError> {
        let n = element_count(&shape).ok_or(SpaceError::BoundsMismatch("shape"))?;
        let lo = Tensor::from_f64_cast(dtype, shape.clone(), &vec![low; n])
            .map_err(|_| SpaceError::BoundsMismatch("shape"))?;
        let hi = Tensor::from_f64_cast(dtype, shape, &vec![high; n])
            .map_err(|_| SpaceError::BoundsMismatch("shape"))?;
        BoxSpace::new(lo, hi)
    }

    pub fn low(&self) -> &Tensor {
        &self.low
    }

    pub fn high(&self) -> &Tensor {
        &self.high
    }

    pub fn dtype(&self) -> DType {
        self.low.dtype()
    }

    pub fn shape(&self) -> &[u32] {
        self.low.shape()
    }
}

/// Typed descriptor of an agent's observation or action domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Space {
    /// Actions `0..n`, carried as [`Value::Int`].
    Discrete { n: u64 },
    /// Tensors of fixed shape and dtype within elementwise bounds.
    Box(BoxSpace),
}

impl Space {
    pub fn discrete(n: u64) -> Result<Space, SpaceError> {
        if n == 0 {
            return Err(SpaceError::EmptyDiscrete);
        }
        Ok(Space::Discrete { n })
    }

    /// Checks `value` against this space, describing the first violation.
    pub fn check(&self, value: &Value) -> Result<(), String> {
        match (self, value) {
            (Space::Discrete { n }, Value::Int(i)) => {
                if *i >= 0 && (*i as u64) < *n {
                    Ok(())
                } else {
                    Err(format!("{i} outside Discrete({n})"))
                }
            }
            (Space::Discrete { n }, other) => {
                Err(format!("Discrete({n}) expects int, got {}", other.tag_name()))
            }
            (Space::Box(b), Value::Tensor(t)) => {
                if t.dtype() != b.dtype() {
                    return Err(format!("expected dtype {}, got {}", b.dtype(), t.dtype()));
                }
                if t.shape() != b.shape() {
                    return Err(format!("expected shape {:?}, got {:?}", b.shape(), t.shape()));
                }
                for (i, ((x, lo), hi)) in t.iter_f64().zip(b.low.iter_f64()).zip(b.high.iter_f64()).enumerate() {
                    if !(lo <= x && x <= hi) {
                        return Err(format!("element {i} = {x} outside [{lo}, {hi}]"));
                    }
                }
                Ok(())
            }
            (Space::Box(_), other) => Err(format!("Box expects tensor, got {}", other.tag_name())),
        }
    }

    pub fn contains(&self, value: &Value) -> bool {
        self.check(value).is_ok()
    }

    /// Draws a member of the space from `rng`.
    ///
    /// Discrete draws one index; Box draws one uniform per element in row-major
    /// order, truncated toward zero for integer dtypes and clamped to bounds.
    pub fn sample(&self, rng: &mut SplitMix64) -> Value {
        match self {
            Space::Discrete { n } => Value::Int(rng.below(*n) as i64),
            Space::Box(b) => {
                let values: Vec<f64> = b
                    .low
                    .iter_f64()
                    .zip(b.high.iter_f64())
                    .map(|(lo, hi)| {
                        let x = rng.uniform(lo, hi);
                        if b.dtype().is_float() {
                            x
                        } else {
                            x.floor().clamp(lo, hi)
                        }
                    })
                    .collect();
                let t = Tensor::from_f64_cast(b.dtype(), b.shape().to_vec(), &values)
                    .expect("bounds have the declared shape");
                Value::Tensor(t)
            }
        }
    }
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Space::Discrete { n } => write!(f, "Discrete({n})"),
            Space::Box(b) => write!(f, "Box({}, {:?})", b.dtype(), b.shape()),
        }
    }
}
