//! Zone-indexed square matrices and their shared comma-separated text format.
//!
//! The text format puts the scenario tag in the top-left cell, zone ids along
//! the first row and first column, and cell `(o, d)` at row `o`, column `d`:
//!
//! ```text
//! AM,z1,z2
//! z1,0,12.5
//! z2,11.25,0
//! ```
//!
//! Values are written with the shortest representation that parses back to
//! the same `f64`, so a write/read cycle is lossless.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::ops::Deref;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Ordered set of opaque zone identifiers. Origins and destinations share it.
#[derive(Debug, Clone)]
pub struct ZoneSystem {
    ids: Vec<String>,
    index: HashMap<String, usize>,
}

impl PartialEq for ZoneSystem {
    fn eq(&self, other: &Self) -> bool {
        self.ids == other.ids
    }
}

impl Eq for ZoneSystem {}

impl ZoneSystem {
    pub fn new<I, S>(ids: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let ids: Vec<String> = ids.into_iter().map(Into::into).collect();
        if ids.is_empty() {
            return Err(Error::Input("zone system must contain at least one zone".into()));
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            check_label(id, "zone id")?;
            if id.is_empty() {
                return Err(Error::Input("zone ids must be non-empty".into()));
            }
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::Input(format!("duplicate zone id {id:?}")));
            }
        }
        Ok(ZoneSystem { ids, index })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Number of cells in a matrix over this system.
    pub fn cells(&self) -> usize {
        self.ids.len() * self.ids.len()
    }
}

/// Labels end up as CSV cells; they may not carry separators.
pub(crate) fn check_label(label: &str, what: &str) -> Result<()> {
    if label.contains([',', '\n', '\r', '\t']) {
        return Err(Error::Input(format!(
            "{what} {label:?} contains a separator character"
        )));
    }
    Ok(())
}

pub(crate) fn same_zones(a: &Arc<ZoneSystem>, b: &Arc<ZoneSystem>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

/// Dense row-major Z×Z matrix bound to a zone system.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneMatrix {
    zones: Arc<ZoneSystem>,
    values: Vec<f64>,
    tag: String,
}

impl ZoneMatrix {
    pub fn new(zones: Arc<ZoneSystem>, values: Vec<f64>, tag: impl Into<String>) -> Result<Self> {
        let tag = tag.into();
        check_label(&tag, "scenario tag")?;
        if values.len() != zones.cells() {
            return Err(Error::Shape(format!(
                "expected {} cells for {} zones, got {}",
                zones.cells(),
                zones.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            let z = zones.len();
            return Err(Error::Input(format!(
                "non-finite value at ({}, {})",
                zones.id(i / z),
                zones.id(i % z)
            )));
        }
        Ok(ZoneMatrix { zones, values, tag })
    }

    pub fn filled(zones: Arc<ZoneSystem>, value: f64, tag: impl Into<String>) -> Result<Self> {
        let n = zones.cells();
        Self::new(zones, vec![value; n], tag)
    }

    pub fn zones(&self) -> &Arc<ZoneSystem> {
        &self.zones
    }

    pub fn size(&self) -> usize {
        self.zones.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn get(&self, origin: usize, destination: usize) -> f64 {
        self.values[origin * self.zones.len() + destination]
    }

    pub fn row(&self, origin: usize) -> &[f64] {
        let z = self.zones.len();
        &self.values[origin * z..(origin + 1) * z]
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Result<Self> {
        let tag = tag.into();
        check_label(&tag, "scenario tag")?;
        self.tag = tag;
        Ok(self)
    }

    pub fn transpose(&self) -> ZoneMatrix {
        let z = self.zones.len();
        let mut values = vec![0.0; z * z];
        for o in 0..z {
            for d in 0..z {
                values[d * z + o] = self.values[o * z + d];
            }
        }
        ZoneMatrix {
            zones: Arc::clone(&self.zones),
            values,
            tag: self.tag.clone(),
        }
    }

    pub(crate) fn check_same_zones(&self, other: &ZoneMatrix) -> Result<()> {
        if same_zones(&self.zones, &other.zones) {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "matrices are over different zone systems ({} vs {} zones)",
                self.zones.len(),
                other.zones.len()
            )))
        }
    }

    pub(crate) fn check_zones(&self, zones: &Arc<ZoneSystem>) -> Result<()> {
        if same_zones(&self.zones, zones) {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "matrix has {} zones, expected the {}-zone system of the network",
                self.zones.len(),
                zones.len()
            )))
        }
    }

    pub fn to_csv(&self) -> String {
        let z = self.zones.len();
        let mut out = String::with_capacity(z * z * 8);
        out.push_str(&self.tag);
        for id in self.zones.ids() {
            out.push(',');
            out.push_str(id);
        }
        out.push('\n');
        for o in 0..z {
            out.push_str(self.zones.id(o));
            for v in self.row(o) {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    /// Parse the comma-separated matrix format. The zone system is taken from
    /// the header row; row labels must repeat it in the same order.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
            .filter(|(_, l)| !l.is_empty());

        let (header_line, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "empty matrix file"))?;
        let mut head = header.split(',');
        let tag = head.next().unwrap_or_default().to_string();
        let ids: Vec<String> = head.map(str::to_string).collect();
        let zones = ZoneSystem::new(ids)
            .map_err(|e| Error::parse(header_line, format!("bad header: {e}")))?;
        let z = zones.len();

        let mut values = Vec::new();
        let mut row = 0usize;
        for (line_no, line) in lines {
            if row == z {
                return Err(Error::parse(line_no, format!("more than {z} data rows")));
            }
            let mut cells = line.split(',');
            let label = cells.next().unwrap_or_default();
            if label != zones.id(row) {
                return Err(Error::parse(
                    line_no,
                    format!("row label {label:?}, expected {:?}", zones.id(row)),
                ));
            }
            let mut count = 0usize;
            for cell in cells {
                count += 1;
                if count > z {
                    break;
                }
                let v: f64 = cell
                    .trim()
                    .parse()
                    .map_err(|_| Error::parse(line_no, format!("not a number: {cell:?}")))?;
                if !v.is_finite() {
                    return Err(Error::parse(line_no, format!("non-finite value {cell:?}")));
                }
                values.push(v);
            }
            if count != z {
                return Err(Error::parse(
                    line_no,
                    format!("row {label:?} has {count} values, expected {z}"),
                ));
            }
            row += 1;
        }
        if row != z {
            return Err(Error::parse(0, format!("found {row} data rows, expected {z}")));
        }
        ZoneMatrix::new(Arc::new(zones), values, tag).map_err(|e| Error::parse(1, e.to_string()))
    }
}

macro_rules! zone_matrix_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name(ZoneMatrix);

        impl Deref for $name {
            type Target = ZoneMatrix;

            fn deref(&self) -> &ZoneMatrix {
                &self.0
            }
        }

        impl $name {
            pub fn into_inner(self) -> ZoneMatrix {
                self.0
            }

            pub fn as_matrix(&self) -> &ZoneMatrix {
                &self.0
            }

            pub fn from_csv(text: &str) -> Result<Self> {
                Self::try_from(ZoneMatrix::from_csv(text)?)
                    .map_err(|e| Error::parse(0, e.to_string()))
            }
        }
    };
}

zone_matrix_newtype!(
    /// Trips per OD pair.
    OdMatrix
);
zone_matrix_newtype!(
    /// Travel times in minutes per OD pair.
    SkimMatrix
);
zone_matrix_newtype!(
    /// Element-wise product of trips and travel times, in trips·minutes.
    TrafficQuantityMatrix
);

impl TryFrom<ZoneMatrix> for OdMatrix {
    type Error = Error;

    fn try_from(m: ZoneMatrix) -> Result<Self> {
        check_non_negative(&m, "trip count")?;
        Ok(OdMatrix(m))
    }
}

impl TryFrom<ZoneMatrix> for TrafficQuantityMatrix {
    type Error = Error;

    fn try_from(m: ZoneMatrix) -> Result<Self> {
        check_non_negative(&m, "traffic quantity")?;
        Ok(TrafficQuantityMatrix(m))
    }
}

impl TryFrom<ZoneMatrix> for SkimMatrix {
    type Error = Error;

    fn try_from(m: ZoneMatrix) -> Result<Self> {
        let z = m.size();
        for o in 0..z {
            for d in 0..z {
                let v = m.get(o, d);
                let bad = if o == d { v < 0.0 } else { v <= 0.0 };
                if bad {
                    return Err(Error::Input(format!(
                        "travel time {v} at ({}, {}) violates skim bounds",
                        m.zones().id(o),
                        m.zones().id(d)
                    )));
                }
            }
        }
        Ok(SkimMatrix(m))
    }
}

fn check_non_negative(m: &ZoneMatrix, what: &str) -> Result<()> {
    let z = m.size();
    if let Some(i) = m.values().iter().position(|&v| v < 0.0) {
        return Err(Error::Input(format!(
            "negative {what} {} at ({}, {})",
            m.values()[i],
            m.zones().id(i / z),
            m.zones().id(i % z)
        )));
    }
    Ok(())
}

impl OdMatrix {
    pub fn new(zones: Arc<ZoneSystem>, values: Vec<f64>, tag: impl Into<String>) -> Result<Self> {
        ZoneMatrix::new(zones, values, tag)?.try_into()
    }
}

impl SkimMatrix {
    pub fn new(zones: Arc<ZoneSystem>, values: Vec<f64>, tag: impl Into<String>) -> Result<Self> {
        ZoneMatrix::new(zones, values, tag)?.try_into()
    }
}

impl TrafficQuantityMatrix {
    pub(crate) fn from_checked(m: ZoneMatrix) -> Self {
        TrafficQuantityMatrix(m)
    }
}
