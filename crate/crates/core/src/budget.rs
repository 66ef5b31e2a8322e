//! Resource limits for exponential-size objects.
//!
//! Every routine that enumerates sequences or materializes a `d^n`-sized
//! vector or matrix checks one of these limits first and fails with
//! [`Error::Resource`] instead of truncating.

use crate::error::{Error, Result};

pub const ENV_MAX_DIM: &str = "SEQDECODE_MAX_DIM";
pub const ENV_MAX_ENUMERATION: &str = "SEQDECODE_MAX_ENUM";
pub const ENV_MAX_DENSE_DIM: &str = "SEQDECODE_MAX_DENSE_DIM";
pub const ENV_MAX_CODEWORDS: &str = "SEQDECODE_MAX_CODEWORDS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    /// Largest `d^n` for state vectors and the typical-subspace mask.
    pub max_dim: usize,
    /// Largest number of sequences enumerated by a typical-set routine.
    pub max_enumeration: usize,
    /// Largest `d^n` for full dense `d^n x d^n` operators (POVM, PGM).
    pub max_dense_dim: usize,
    /// Largest codebook size.
    pub max_codewords: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_dim: 4096,
            max_enumeration: 1 << 20,
            max_dense_dim: 256,
            max_codewords: 1 << 16,
        }
    }
}

impl Budget {
    /// Defaults, overridden by any of the `SEQDECODE_MAX_*` environment
    /// variables that are set.
    pub fn from_env() -> Result<Self> {
        let mut budget = Budget::default();
        for (key, slot) in [
            (ENV_MAX_DIM, &mut budget.max_dim),
            (ENV_MAX_ENUMERATION, &mut budget.max_enumeration),
            (ENV_MAX_DENSE_DIM, &mut budget.max_dense_dim),
            (ENV_MAX_CODEWORDS, &mut budget.max_codewords),
        ] {
            if let Ok(raw) = std::env::var(key) {
                *slot = raw.trim().parse().map_err(|_| {
                    Error::config(format!("{key}={raw:?} is not an unsigned integer"))
                })?;
            }
        }
        Ok(budget)
    }

    pub fn check_dim(&self, d: usize, n: usize) -> Result<usize> {
        let dim = checked_pow(d, n)
            .filter(|&v| v <= self.max_dim)
            .ok_or_else(|| {
                Error::resource(format!(
                    "dimension {d}^{n} exceeds max_dim = {}",
                    self.max_dim
                ))
            })?;
        Ok(dim)
    }

    pub fn check_dense_dim(&self, d: usize, n: usize) -> Result<usize> {
        checked_pow(d, n)
            .filter(|&v| v <= self.max_dense_dim)
            .ok_or_else(|| {
                Error::resource(format!(
                    "dense operator dimension {d}^{n} exceeds max_dense_dim = {}",
                    self.max_dense_dim
                ))
            })
    }

    pub fn check_enumeration(&self, what: &str, count: Option<usize>) -> Result<usize> {
        count.filter(|&c| c <= self.max_enumeration).ok_or_else(|| {
            Error::resource(format!(
                "{what}: enumeration size exceeds max_enumeration = {}",
                self.max_enumeration
            ))
        })
    }
}

pub(crate) fn checked_pow(base: usize, exp: usize) -> Option<usize> {
    let exp = u32::try_from(exp).ok()?;
    base.checked_pow(exp)
}
