//! Traffic-quantity matrices (trips × minutes), their binned value
//! distributions, and the ΔTf distance between consecutive iterations.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::matrix::{OdMatrix, SkimMatrix, TrafficQuantityMatrix, ZoneMatrix};

pub const DEFAULT_BINS: usize = 5000;

/// Element-wise product of trips and travel times.
pub fn compute_m(n: &OdMatrix, t: &SkimMatrix) -> Result<TrafficQuantityMatrix> {
    n.check_same_zones(t)?;
    let values = n
        .values()
        .iter()
        .zip(t.values())
        .map(|(trips, minutes)| trips * minutes)
        .collect();
    let m = ZoneMatrix::new(n.zones().clone(), values, n.tag())?;
    Ok(TrafficQuantityMatrix::from_checked(m))
}

/// Equal-width bin counts over `[lo, hi]`. The top bin is closed on the right.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    lo: f64,
    hi: f64,
    width: f64,
    counts: Vec<u64>,
}

impl Histogram {
    /// Bin `values` on `bins` equal intervals of `[lo, hi]`. When `lo == hi`
    /// the grid collapses to one zero-width bin.
    pub fn from_values(values: &[f64], lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(Error::Range("bin count must be at least 1".into()));
        }
        if !(lo.is_finite() && hi.is_finite()) || hi < lo {
            return Err(Error::Range(format!("invalid histogram range [{lo}, {hi}]")));
        }
        let (bins, width) = if hi == lo {
            (1, 0.0)
        } else {
            (bins, (hi - lo) / bins as f64)
        };
        let mut counts = vec![0u64; bins];
        for &v in values {
            if !(lo..=hi).contains(&v) {
                return Err(Error::Range(format!(
                    "value {v} outside histogram range [{lo}, {hi}]"
                )));
            }
            let idx = if width == 0.0 || v >= hi {
                bins - 1
            } else {
                (((v - lo) / width) as usize).min(bins - 1)
            };
            counts[idx] += 1;
        }
        Ok(Histogram {
            lo,
            hi,
            width,
            counts,
        })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    /// Bin width `u`; zero only in the degenerate single-value case.
    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Lower and upper edge of bin `l` (0-based).
    pub fn edges(&self, l: usize) -> (f64, f64) {
        let lower = self.lo + self.width * l as f64;
        let upper = if l + 1 == self.bins() {
            self.hi
        } else {
            self.lo + self.width * (l + 1) as f64
        };
        (lower, upper)
    }
}

pub fn build_histogram(
    m: &TrafficQuantityMatrix,
    lo: f64,
    hi: f64,
    bins: usize,
) -> Result<Histogram> {
    Histogram::from_values(m.values(), lo, hi, bins)
}

/// Two histograms of equal-length value sets on one shared grid.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramPair {
    pub prev: Histogram,
    pub curr: Histogram,
}

impl HistogramPair {
    /// Grid spans the union range of both value sets.
    pub fn over(prev: &[f64], curr: &[f64], bins: usize) -> Result<Self> {
        if prev.len() != curr.len() {
            return Err(Error::Shape(format!(
                "value sets differ in size ({} vs {})",
                prev.len(),
                curr.len()
            )));
        }
        let all = prev.iter().chain(curr);
        let lo = all.clone().copied().fold(f64::INFINITY, f64::min);
        let hi = all.copied().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (0.0, 0.0) };
        Ok(HistogramPair {
            prev: Histogram::from_values(prev, lo, hi, bins)?,
            curr: Histogram::from_values(curr, lo, hi, bins)?,
        })
    }

    pub fn abs_diff_sum(&self) -> u64 {
        self.prev
            .counts()
            .iter()
            .zip(self.curr.counts())
            .map(|(a, b)| a.abs_diff(*b))
            .sum()
    }

    /// Σ|Δv| / (2·cells); 0 for identical histograms, 1 for disjoint ones.
    pub fn distance(&self) -> f64 {
        let cells = self.prev.total();
        if cells == 0 {
            return 0.0;
        }
        self.abs_diff_sum() as f64 / (2.0 * cells as f64)
    }

    /// Tab-separated overlay: one row per bin, `#` header for gnuplot.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("# bin_lower\tbin_upper\tcount_prev\tcount_curr\tabs_diff\n");
        for (l, (a, b)) in self.prev.counts().iter().zip(self.curr.counts()).enumerate() {
            let (lower, upper) = self.prev.edges(l);
            let _ = writeln!(out, "{lower}\t{upper}\t{a}\t{b}\t{}", a.abs_diff(*b));
        }
        out
    }

    /// Parse the output of [`HistogramPair::to_tsv`]. Edges must match the
    /// equal-width grid they imply.
    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let [lower, upper, a, b, diff] = cols[..] else {
                return Err(Error::parse(i + 1, "expected 5 tab-separated columns"));
            };
            let num = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::parse(i + 1, format!("bad edge {s:?}")))
            };
            let count = |s: &str| -> Result<u64> {
                s.parse()
                    .map_err(|_| Error::parse(i + 1, format!("bad count {s:?}")))
            };
            let (a, b) = (count(a)?, count(b)?);
            if count(diff)? != a.abs_diff(b) {
                return Err(Error::parse(i + 1, "abs_diff does not match the counts"));
            }
            rows.push((i + 1, num(lower)?, num(upper)?, a, b));
        }
        let (Some(first), Some(last)) = (rows.first(), rows.last()) else {
            return Err(Error::parse(1, "histogram has no bins"));
        };
        let (lo, hi, bins) = (first.1, last.2, rows.len());
        if hi < lo {
            return Err(Error::parse(last.0, "upper edge below lower edge"));
        }
        let width = if hi == lo {
            if bins != 1 {
                return Err(Error::parse(last.0, "zero-width grid with more than one bin"));
            }
            0.0
        } else {
            (hi - lo) / bins as f64
        };
        let prev = Histogram {
            lo,
            hi,
            width,
            counts: rows.iter().map(|r| r.3).collect(),
        };
        for (l, r) in rows.iter().enumerate() {
            if prev.edges(l) != (r.1, r.2) {
                return Err(Error::parse(r.0, "bin edges are not an equal-width grid"));
            }
        }
        let curr = Histogram {
            counts: rows.iter().map(|r| r.4).collect(),
            ..prev.clone()
        };
        // keep Σ|Δcounts| within u64
        let sum = |h: &Histogram| h.counts.iter().try_fold(0u64, |acc, &c| acc.checked_add(c)).filter(|t| *t <= u64::MAX / 2);
        let (Some(tp), Some(tc)) = (sum(&prev), sum(&curr)) else {
            return Err(Error::parse(last.0, "cell counts overflow"));
        };
        if tp != tc {
            return Err(Error::Shape(format!("histograms hold {tp} and {tc} cells")));
        }
        Ok(HistogramPair { prev, curr })
    }
}

/// Binned L1 distance between the value distributions of two matrices.
pub fn binned_distance(prev: &ZoneMatrix, curr: &ZoneMatrix, bins: usize) -> Result<f64> {
    prev.check_same_zones(curr)?;
    Ok(HistogramPair::over(prev.values(), curr.values(), bins)?.distance())
}

/// ΔTf between the traffic-quantity matrices of two successive iterations.
pub fn delta_tf(
    m_prev: &TrafficQuantityMatrix,
    m_curr: &TrafficQuantityMatrix,
    bins: usize,
) -> Result<f64> {
    binned_distance(m_prev, m_curr, bins)
}

pub fn histogram_pair(
    m_prev: &TrafficQuantityMatrix,
    m_curr: &TrafficQuantityMatrix,
    bins: usize,
) -> Result<HistogramPair> {
    m_prev.check_same_zones(m_curr)?;
    HistogramPair::over(m_prev.values(), m_curr.values(), bins)
}
