//! Trial scheduling and pass/fail bookkeeping shared by all campaigns.
//!
//! Every trial draws from its own pre-assigned RNG substream and results
//! come back in trial order, so aggregates do not depend on how a runner
//! schedules the work.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::numerics::CompensatedSum;

/// Seed used by every campaign unless the caller supplies one.
pub const DEFAULT_SEED: u64 = 20_240_917;

/// Evaluates `f(0), …, f(n−1)` and returns the results in index order.
pub trait TrialRunner: Sync {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl TrialRunner for Sequential {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    /// Passes when `value ≤ tolerance`.
    AtMost,
    /// Passes when `value > tolerance`.
    Above,
    /// Passes when `value < tolerance`.
    Below,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub bound: Bound,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Check {
        Check {
            name: name.into(),
            value,
            tolerance,
            bound: Bound::AtMost,
            // NaN fails
            pass: value <= tolerance,
        }
    }

    pub fn above(name: impl Into<String>, value: f64, tolerance: f64) -> Check {
        Check {
            name: name.into(),
            value,
            tolerance,
            bound: Bound::Above,
            pass: value > tolerance,
        }
    }

    pub fn below(name: impl Into<String>, value: f64, tolerance: f64) -> Check {
        Check {
            name: name.into(),
            value,
            tolerance,
            bound: Bound::Below,
            pass: value < tolerance,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
    /// Trials that errored or individually broke a contract.
    pub failures: Vec<String>,
}

impl VerificationReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn fail(&mut self, message: String) {
        self.failures.push(message);
    }

    pub fn absorb(&mut self, prefix: &str, other: VerificationReport) {
        for mut c in other.checks {
            c.name = format!("{prefix}{}", c.name);
            self.checks.push(c);
        }
        for f in other.failures {
            self.failures.push(format!("{prefix}{f}"));
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Maximum and compensated mean of a residual series, ignoring nothing:
/// a NaN makes the maximum NaN so that it fails every bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualStats {
    pub count: usize,
    pub max: f64,
    pub mean: f64,
}

impl ResidualStats {
    pub fn from_values(values: &[f64]) -> ResidualStats {
        let mut max = 0.0f64;
        for &v in values {
            if v.is_nan() || max.is_nan() {
                max = f64::NAN;
            } else if v > max {
                max = v;
            }
        }
        let mean = if values.is_empty() {
            0.0
        } else {
            values.iter().copied().collect::<CompensatedSum>().value() / values.len() as f64
        };
        ResidualStats {
            count: values.len(),
            max,
            mean,
        }
    }
}
