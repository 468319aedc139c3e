//! JSON formats for behaviors and density matrices.

use serde::{Deserialize, Serialize};

use crate::devices::Behavior;
use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, C64};
use crate::states::DensityMatrix;

/// Largest total dimension accepted from a state file.
pub const MAX_STATE_DIM: usize = 256;
/// Largest number of table entries accepted from a behavior file.
pub const MAX_BEHAVIOR_ENTRIES: usize = 1 << 20;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BehaviorFile {
    pub x_count: usize,
    pub y_count: usize,
    pub a_count: usize,
    pub b_count: usize,
    pub p: Vec<Vec<Vec<Vec<f64>>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateFile {
    pub dims: Vec<usize>,
    /// Row-major `[re, im]` pairs.
    pub entries: Vec<[f64; 2]>,
}

pub fn parse_behavior(text: &str) -> Result<Behavior> {
    let f: BehaviorFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let total = f
        .x_count
        .checked_mul(f.y_count)
        .and_then(|n| n.checked_mul(f.a_count))
        .and_then(|n| n.checked_mul(f.b_count))
        .filter(|&n| n <= MAX_BEHAVIOR_ENTRIES)
        .ok_or_else(|| Error::Parse("behavior table too large".into()))?;
    let shape_ok = f.p.len() == f.x_count
        && f.p.iter().all(|px| {
            px.len() == f.y_count
                && px.iter().all(|py| py.len() == f.a_count && py.iter().all(|pa| pa.len() == f.b_count))
        });
    if !shape_ok {
        return Err(Error::Parse("table shape disagrees with declared counts".into()));
    }
    let p: Vec<f64> = f.p.into_iter().flatten().flatten().flatten().collect();
    debug_assert_eq!(p.len(), total);
    Behavior::new(f.x_count, f.y_count, f.a_count, f.b_count, p)
}

pub fn behavior_to_json(b: &Behavior) -> String {
    let f = BehaviorFile {
        x_count: b.x_count(),
        y_count: b.y_count(),
        a_count: b.a_count(),
        b_count: b.b_count(),
        p: b.to_nested(),
    };
    serde_json::to_string_pretty(&f).expect("plain data serialises")
}

pub fn parse_state(text: &str) -> Result<DensityMatrix> {
    let f: StateFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if f.dims.is_empty() || f.dims.contains(&0) {
        return Err(Error::Parse("dims must be a non-empty list of positive sizes".into()));
    }
    let dim = f
        .dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .filter(|&d| d <= MAX_STATE_DIM)
        .ok_or_else(|| Error::Parse(format!("total dimension exceeds {MAX_STATE_DIM}")))?;
    if f.entries.len() != dim * dim {
        return Err(Error::Parse(format!("expected {} entries, got {}", dim * dim, f.entries.len())));
    }
    let data = f.entries.iter().map(|[re, im]| C64::new(*re, *im)).collect();
    DensityMatrix::new(ComplexMatrix::new(dim, dim, data)?, f.dims)
}

pub fn state_to_json(rho: &DensityMatrix) -> String {
    let f = StateFile {
        dims: rho.dims().to_vec(),
        entries: rho.matrix().data().iter().map(|z| [z.re, z.im]).collect(),
    };
    serde_json::to_string_pretty(&f).expect("plain data serialises")
}
