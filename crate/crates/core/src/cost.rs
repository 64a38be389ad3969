//! Nonnegative path costs with a finite saturating "unreachable" sentinel.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::Add;

use serde::{Deserialize, Serialize};

/// Sentinel cost standing in for a missing edge. Every sum saturates here.
pub const C_MAX: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum CostError {
    #[error("cost must be nonnegative, got {0}")]
    Negative(f64),
    #[error("cost must be a number, got NaN")]
    NotANumber,
}

/// A path cost in `[0, C_MAX]`.
///
/// Addition saturates: `Cost::MAX + x == Cost::MAX`. The ordering is total,
/// which lets value tables use plain `min`/`cmp` without float caveats.
#[derive(Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Cost(f64);

impl Cost {
    pub const ZERO: Cost = Cost(0.0);
    pub const MAX: Cost = Cost(C_MAX);

    /// Validating constructor. Values above `C_MAX` are clamped to it.
    pub fn new(value: f64) -> Result<Self, CostError> {
        if value.is_nan() {
            return Err(CostError::NotANumber);
        }
        if value < 0.0 {
            return Err(CostError::Negative(value));
        }
        Ok(Cost(value.min(C_MAX)))
    }

    /// Clamps any number into `[0, C_MAX]`; NaN maps to `C_MAX`.
    pub fn clamped(value: f64) -> Self {
        if value.is_nan() {
            Cost::MAX
        } else {
            Cost(value.clamp(0.0, C_MAX))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn is_max(self) -> bool {
        self.0 >= C_MAX
    }
}

impl Eq for Cost {}

impl PartialOrd for Cost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cost {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl Add for Cost {
    type Output = Cost;

    #[inline]
    fn add(self, rhs: Cost) -> Cost {
        Cost((self.0 + rhs.0).min(C_MAX))
    }
}

impl Sum for Cost {
    fn sum<I: Iterator<Item = Cost>>(iter: I) -> Cost {
        iter.fold(Cost::ZERO, |acc, c| acc + c)
    }
}

impl fmt::Debug for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_max() {
            write!(f, "Cost(MAX)")
        } else {
            write!(f, "Cost({})", self.0)
        }
    }
}

impl fmt::Display for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<Cost> for f64 {
    fn from(c: Cost) -> f64 {
        c.0
    }
}
