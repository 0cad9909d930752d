//! DMA configuration: one real tuning value in [0, 1] per meta-atom.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The DMA configuration vector. Entry `n` drives meta-atom `n`'s resonance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningState {
    pub values: Vec<f64>,
}

impl TuningState {
    /// Validated constructor: every entry must lie in [0, 1].
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for (index, &value) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) || !value.is_finite() {
                return Err(Error::TuningOutOfRange { index, value });
            }
        }
        Ok(Self { values })
    }

    /// All meta-atoms at the same tuning value.
    pub fn uniform(n: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; n])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Little-endian bit pattern of the tuning vector, for fingerprinting.
    pub fn le_bytes(&self) -> Vec<u8> {
        let mut bytes = Vec::with_capacity(8 * self.values.len());
        for v in &self.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes
    }
}
