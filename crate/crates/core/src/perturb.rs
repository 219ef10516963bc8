//! Per-cell quantile interpolation over a stack of observed skims.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{same_zones, SkimMatrix, ZoneSystem};

/// Quantile level in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Quantile(f64);

impl Quantile {
    pub fn new(qt: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&qt) {
            Ok(Quantile(qt))
        } else {
            Err(Error::Range(format!("quantile {qt} outside [0, 1]")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Quantile {
    type Error = Error;

    fn try_from(qt: f64) -> Result<Self> {
        Quantile::new(qt)
    }
}

impl From<Quantile> for f64 {
    fn from(q: Quantile) -> f64 {
        q.0
    }
}

impl fmt::Display for Quantile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Skims observed for one scenario, one per prior iteration.
#[derive(Debug, Clone)]
pub struct SkimStack {
    zones: Arc<ZoneSystem>,
    tag: String,
    members: Vec<SkimMatrix>,
}

impl SkimStack {
    pub fn new(members: Vec<SkimMatrix>) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::Usage("skim stack needs at least one member".into()))?;
        let zones = first.zones().clone();
        let tag = first.tag().to_string();
        for m in &members[1..] {
            if !same_zones(&zones, m.zones()) {
                return Err(Error::Shape("stack members differ in zone system".into()));
            }
            if m.tag() != tag {
                return Err(Error::Shape(format!(
                    "stack mixes scenarios {tag:?} and {:?}",
                    m.tag()
                )));
            }
        }
        Ok(SkimStack {
            zones,
            tag,
            members,
        })
    }

    pub fn push(&mut self, skim: SkimMatrix) -> Result<()> {
        if !same_zones(&self.zones, skim.zones()) || skim.tag() != self.tag {
            return Err(Error::Shape("skim does not belong to this stack".into()));
        }
        self.members.push(skim);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[SkimMatrix] {
        &self.members
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn zones(&self) -> &Arc<ZoneSystem> {
        &self.zones
    }
}

/// Linear interpolation between order statistics at position `qt·(k−1)`.
/// `sorted` must be ascending and non-empty.
pub(crate) fn interpolate_sorted(sorted: &[f64], qt: f64) -> f64 {
    let pos = qt * (sorted.len() - 1) as f64;
    let lower = pos.floor() as usize;
    let frac = pos - lower as f64;
    if frac == 0.0 || lower + 1 >= sorted.len() {
        sorted[lower.min(sorted.len() - 1)]
    } else {
        sorted[lower] + frac * (sorted[lower + 1] - sorted[lower])
    }
}

/// Build a skim whose every cell is the `qt` quantile of that cell's values
/// across the stack.
pub fn quantile_skim(stack: &SkimStack, qt: Quantile) -> Result<SkimMatrix> {
    if stack.is_empty() {
        return Err(Error::Usage("empty skim stack".into()));
    }
    let cells = stack.zones.cells();
    let mut column = Vec::with_capacity(stack.len());
    let mut values = Vec::with_capacity(cells);
    for i in 0..cells {
        column.clear();
        column.extend(stack.members.iter().map(|m| m.values()[i]));
        column.sort_by(f64::total_cmp);
        values.push(interpolate_sorted(&column, qt.value()));
    }
    SkimMatrix::new(stack.zones.clone(), values, stack.tag.clone())
}
