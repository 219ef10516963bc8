//! Reports derived from a persisted history: ΔTf trajectories, trip totals,
//! histogram overlays and an optional comparison against baseline figures.
//!
//! Plot data is tab-separated with a `#`-prefixed header line so gnuplot
//! reads it directly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::assign::EngineKind;
use crate::error::{Error, Result};
use crate::io;
use crate::matrix::ZoneMatrix;
use crate::quantity::{binned_distance, histogram_pair};
use crate::search::{EquilibriumSearch, Phase, RunHistory, RunStatus};

/// Per-scenario baseline trip totals, one `scenario trips` pair per line.
pub fn parse_baseline_trips(text: &str) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(tag), Some(trips), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::parse(i + 1, "expected `scenario trips`"));
        };
        let trips: f64 = trips
            .parse()
            .map_err(|_| Error::parse(i + 1, format!("bad trip total {trips:?}")))?;
        if !(trips > 0.0 && trips.is_finite()) {
            return Err(Error::parse(i + 1, "baseline trip total must be positive"));
        }
        if out.insert(tag.to_string(), trips).is_some() {
            return Err(Error::parse(i + 1, format!("scenario {tag} listed twice")));
        }
    }
    Ok(out)
}

/// Signed error of `modeled` against `baseline`, in percent.
pub fn trip_error_percent(modeled: f64, baseline: f64) -> f64 {
    (modeled - baseline) / baseline * 100.0
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Baseline {
    pub trips: BTreeMap<String, f64>,
    /// Baseline OD matrices per scenario.
    pub od: BTreeMap<String, ZoneMatrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationSummary {
    pub index: usize,
    pub engine: EngineKind,
    pub phase: Phase,
    pub delta_tf: Option<f64>,
    pub total_trips: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineComparison {
    pub scenario: String,
    pub modeled_trips: f64,
    pub baseline_trips: Option<f64>,
    pub trip_error_percent: Option<f64>,
    /// `1 − ΔTf` between baseline and final demand distributions.
    pub od_overlap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub status: RunStatus,
    pub iterations: BTreeMap<String, Vec<IterationSummary>>,
    pub baseline: Vec<BaselineComparison>,
}

impl RunReport {
    pub fn new(
        search: &EquilibriumSearch,
        history: &RunHistory,
        baseline: Option<&Baseline>,
    ) -> Result<Self> {
        let mut iterations = BTreeMap::new();
        for hist in &history.scenarios {
            let rows = hist
                .records
                .iter()
                .map(|r| IterationSummary {
                    index: r.index,
                    engine: r.engine,
                    phase: r.phase,
                    delta_tf: r.delta_tf_vs_prev,
                    total_trips: r.total_trips(),
                    seconds: r.elapsed.as_secs_f64(),
                })
                .collect();
            iterations.insert(hist.tag.clone(), rows);
        }

        let mut comparisons = Vec::new();
        if let Some(b) = baseline {
            for tag in b.trips.keys().chain(b.od.keys()) {
                if history.scenario(tag).is_none() {
                    return Err(Error::Usage(format!("baseline names unknown scenario {tag:?}")));
                }
            }
            for hist in &history.scenarios {
                let Some(last) = hist.last() else { continue };
                let base = b.trips.get(&hist.tag).copied();
                let od_overlap = match b.od.get(&hist.tag) {
                    Some(m) => Some(1.0 - binned_distance(m, &last.demand, search.config.bins)?),
                    None => None,
                };
                if base.is_none() && od_overlap.is_none() {
                    continue;
                }
                comparisons.push(BaselineComparison {
                    scenario: hist.tag.clone(),
                    modeled_trips: last.total_trips(),
                    baseline_trips: base,
                    trip_error_percent: base.map(|t| trip_error_percent(last.total_trips(), t)),
                    od_overlap,
                });
            }
        }
        Ok(RunReport {
            status: history.status,
            iterations,
            baseline: comparisons,
        })
    }

    pub fn trajectory_tsv(&self) -> String {
        let mut out = String::from("# scenario\tindex\tengine\tphase\tdelta_tf\n");
        for (tag, rows) in &self.iterations {
            for r in rows.iter() {
                let Some(d) = r.delta_tf else { continue };
                let phase = serde_json::to_value(r.phase).expect("phase serializes");
                let _ = writeln!(
                    out,
                    "{tag}\t{}\t{}\t{}\t{d}",
                    r.index,
                    r.engine,
                    phase.as_str().unwrap_or_default()
                );
            }
        }
        out
    }

    pub fn trips_tsv(&self) -> String {
        let mut out = String::from("# scenario\tindex\tengine\ttotal_trips\tseconds\n");
        for (tag, rows) in &self.iterations {
            for r in rows {
                let _ = writeln!(
                    out,
                    "{tag}\t{}\t{}\t{}\t{:.6}",
                    r.index, r.engine, r.total_trips, r.seconds
                );
            }
        }
        out
    }

    pub fn baseline_tsv(&self) -> String {
        let mut out = String::from(
            "# scenario\tmodeled_trips\tbaseline_trips\ttrip_error_percent\tod_overlap\n",
        );
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| v.to_string());
        for c in &self.baseline {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                c.scenario,
                c.modeled_trips,
                opt(c.baseline_trips),
                opt(c.trip_error_percent),
                opt(c.od_overlap)
            );
        }
        out
    }

    /// Human-readable summary.
    pub fn summary(&self) -> String {
        let status = serde_json::to_value(self.status).expect("status serializes");
        let mut out = format!("status: {}\n", status.as_str().unwrap_or_default());
        for (tag, rows) in &self.iterations {
            let deltas: Vec<String> = rows
                .iter()
                .filter_map(|r| r.delta_tf)
                .map(|d| format!("{d:.3}"))
                .collect();
            let _ = writeln!(out, "{tag}: {} runs, ΔTf {}", rows.len(), deltas.join(" "));
            if let Some(last) = rows.last() {
                let _ = writeln!(out, "{tag}: final trips {:.0}", last.total_trips);
            }
        }
        for c in &self.baseline {
            if let (Some(b), Some(e)) = (c.baseline_trips, c.trip_error_percent) {
                let _ = writeln!(
                    out,
                    "{}: modeled {:.0} vs baseline {:.0}, error {:+.1}%",
                    c.scenario, c.modeled_trips, b, e
                );
            }
            if let Some(o) = c.od_overlap {
                let _ = writeln!(out, "{}: OD histogram overlap {:.3}", c.scenario, o);
            }
        }
        out
    }

    /// Write trajectory, trip, overlay and baseline files into `dir`.
    pub fn write(&self, dir: &Path, search: &EquilibriumSearch, history: &RunHistory) -> Result<()> {
        io::write_atomic(&dir.join("trajectory.tsv"), &self.trajectory_tsv())?;
        io::write_atomic(&dir.join("trips.tsv"), &self.trips_tsv())?;
        if !self.baseline.is_empty() {
            io::write_atomic(&dir.join("baseline.tsv"), &self.baseline_tsv())?;
        }
        for hist in &history.scenarios {
            for pair in hist.records.windows(2) {
                let overlay = histogram_pair(&pair[0].m, &pair[1].m, search.config.bins)?;
                let name = format!(
                    "overlays/{}/pair_{:03}_{:03}.tsv",
                    hist.tag, pair[0].index, pair[1].index
                );
                io::write_atomic(&dir.join(name), &overlay.to_tsv())?;
            }
        }
        io::write_atomic(
            &dir.join("report.json"),
            &(serde_json::to_string_pretty(self).expect("report serializes") + "\n"),
        )?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trip_error_examples() {
        let e = trip_error_percent(108_000.0, 100_094.0);
        assert!((e - 7.898_575_339_181_17).abs() < 1e-9, "{e}");
        assert_eq!(format!("{e:.1}"), "7.9");
        assert_eq!(trip_error_percent(5.0, 5.0), 0.0);
    }

    #[test]
    fn baseline_file() {
        let b = parse_baseline_trips("# car trips\nAM 100094\nPM 98000 # evening\n\n").unwrap();
        assert_eq!(b["AM"], 100094.0);
        assert_eq!(b["PM"], 98000.0);
        let err = parse_baseline_trips("AM 1\nPM\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(parse_baseline_trips("AM 0\n").is_err());
        assert!(parse_baseline_trips("AM 1\nAM 2\n").is_err());
    }
}
