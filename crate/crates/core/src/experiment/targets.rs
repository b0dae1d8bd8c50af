use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dynamics::TaskSpec;
use crate::math::log2;
use crate::{Error, Result};

/// One target of the pointing task, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub id: u32,
    pub position: f64,
    pub width: f64,
    /// Index of difficulty, bits.
    pub id_bits: f64,
}

impl TargetSpec {
    pub fn task(&self) -> TaskSpec {
        TaskSpec::standard(self.position, self.width)
    }

    pub fn distance(&self) -> f64 {
        (self.position - TaskSpec::START).abs()
    }
}

/// Shannon form `log2(1 + D / W)`.
pub fn index_of_difficulty(distance: f64, width: f64) -> Result<f64> {
    if !(width.is_finite() && width > 0.0) {
        return Err(Error::invalid("width", "must be finite and > 0"));
    }
    if !(distance.is_finite() && distance >= 0.0) {
        return Err(Error::invalid("distance", "must be finite and >= 0"));
    }
    Ok(log2(1.0 + distance / width))
}

/// Positions repeated for each width, in id order. The sixth position is
/// 1750: start 900 plus the largest distance 850.
pub const POSITIONS: [f64; 6] = [675.0, 363.0, 50.0, 1125.0, 1438.0, 1750.0];
pub const WIDTHS: [f64; 3] = [20.0, 60.0, 100.0];

/// The 18 targets: ids 1-6 have width 20, 7-12 width 60, 13-18 width 100.
pub fn target_set() -> Vec<TargetSpec> {
    let mut out = Vec::with_capacity(18);
    for (wi, &width) in WIDTHS.iter().enumerate() {
        for (pi, &position) in POSITIONS.iter().enumerate() {
            let distance = (position - TaskSpec::START).abs();
            out.push(TargetSpec {
                id: (wi * POSITIONS.len() + pi + 1) as u32,
                position,
                width,
                id_bits: log2(1.0 + distance / width),
            });
        }
    }
    out
}

pub fn target_by_id(id: u32) -> Option<TargetSpec> {
    target_set().into_iter().find(|t| t.id == id)
}
