//! On-disk campaign histories.
//!
//! ```text
//! <out>/history/campaign/         copy of every input, loadable on its own
//! <out>/history/records.jsonl     one line per iteration
//! <out>/history/probes.jsonl      one line per probe or injection attempt
//! <out>/history/status.json
//! <out>/history/stability.json    after a stability check
//! <out>/history/matrices/<tag>/iter_NNN_{input,demand,output}.csv
//! <out>/history/histograms/<tag>/pair_I_J.tsv
//! <out>/timings.tsv               wall-clock per iteration
//! ```
//!
//! Everything under `history/` is a pure function of the inputs and seeds,
//! so reruns produce identical bytes. Timings live beside it for that reason.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::assign::EngineKind;
use crate::campaign::Campaign;
use crate::error::{Error, Result};
use crate::io;
use crate::matrix::{OdMatrix, SkimMatrix};
use crate::perturb::Quantile;
use crate::quantity::{compute_m, histogram_pair};
use crate::search::{
    EquilibriumSearch, IterationRecord, Phase, ProbeLogEntry, RunHistory, RunStatus,
    ScenarioHistory, StabilityReport,
};

pub const HISTORY_DIR: &str = "history";
pub const TIMINGS_FILE: &str = "timings.tsv";

/// One line of `records.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordLine {
    pub scenario: String,
    pub index: usize,
    pub engine: EngineKind,
    pub phase: Phase,
    pub delta_tf: Option<f64>,
    pub total_trips: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub injected_qt: Option<Quantile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    pub spillover: f64,
    pub input: PathBuf,
    pub demand: PathBuf,
    pub output: PathBuf,
}

impl RecordLine {
    pub fn parse(line: &str) -> Result<Self> {
        serde_json::from_str(line).map_err(|e| Error::parse(e.line(), e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatusFile {
    pub status: RunStatus,
    pub scenarios: Vec<String>,
    pub incumbent: Option<Quantile>,
    pub main_runs: usize,
    pub probe_runs: usize,
}

/// Parse a JSON-lines file; blank lines are skipped and errors carry the line number.
pub fn parse_jsonl<T: serde::de::DeserializeOwned>(text: &str) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let v = serde_json::from_str(line).map_err(|e| Error::parse(i + 1, e.to_string()))?;
        out.push(v);
    }
    Ok(out)
}

fn to_jsonl<T: Serialize>(items: impl IntoIterator<Item = T>) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(&item).expect("history lines serialize"));
        out.push('\n');
    }
    out
}

fn matrix_path(tag: &str, index: usize, kind: &str) -> PathBuf {
    PathBuf::from(format!("matrices/{tag}/iter_{index:03}_{kind}.csv"))
}

/// Write `history` under `out/history` and timings to `out/timings.tsv`.
/// Returns the history directory.
pub fn save_history(out: &Path, search: &EquilibriumSearch, history: &RunHistory) -> Result<PathBuf> {
    let dir = out.join(HISTORY_DIR);
    Campaign::write_copy(search, &dir.join("campaign"))?;

    let mut lines = Vec::new();
    let mut timings = String::from("scenario\tindex\tseconds\n");
    for hist in &history.scenarios {
        for rec in &hist.records {
            let line = RecordLine {
                scenario: hist.tag.clone(),
                index: rec.index,
                engine: rec.engine,
                phase: rec.phase,
                delta_tf: rec.delta_tf_vs_prev,
                total_trips: rec.total_trips(),
                seed: rec.seed,
                injected_qt: rec.injected_qt,
                gap: rec.gap,
                spillover: rec.spillover,
                input: matrix_path(&hist.tag, rec.index, "input"),
                demand: matrix_path(&hist.tag, rec.index, "demand"),
                output: matrix_path(&hist.tag, rec.index, "output"),
            };
            io::write_matrix(&dir.join(&line.input), &rec.input_skim)?;
            io::write_matrix(&dir.join(&line.demand), &rec.demand)?;
            io::write_matrix(&dir.join(&line.output), &rec.output_skim)?;
            lines.push(line);
            let _ = writeln!(
                timings,
                "{}\t{}\t{}.{:09}",
                hist.tag,
                rec.index,
                rec.elapsed.as_secs(),
                rec.elapsed.subsec_nanos()
            );
        }
        for pair in hist.records.windows(2) {
            let overlay = histogram_pair(&pair[0].m, &pair[1].m, search.config.bins)?;
            let name = format!(
                "histograms/{}/pair_{:03}_{:03}.tsv",
                hist.tag, pair[0].index, pair[1].index
            );
            io::write_atomic(&dir.join(name), &overlay.to_tsv())?;
        }
    }
    io::write_atomic(&dir.join("records.jsonl"), &to_jsonl(&lines))?;
    io::write_atomic(&dir.join("probes.jsonl"), &to_jsonl(&history.probes))?;
    let status = StatusFile {
        status: history.status,
        scenarios: history.scenarios.iter().map(|s| s.tag.clone()).collect(),
        incumbent: history.incumbent,
        main_runs: history.main_runs(),
        probe_runs: history.probe_runs,
    };
    io::write_atomic(
        &dir.join("status.json"),
        &(serde_json::to_string_pretty(&status).expect("status serializes") + "\n"),
    )?;
    if let Some(report) = &history.stability {
        io::write_atomic(
            &dir.join("stability.json"),
            &(serde_json::to_string_pretty(report).expect("report serializes") + "\n"),
        )?;
    }
    io::write_atomic(&out.join(TIMINGS_FILE), &timings)?;
    Ok(dir)
}

fn named<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.with_source_name(path.display().to_string()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = io::read_text(path)?;
    named(
        path,
        serde_json::from_str(&text).map_err(|e| Error::parse(e.line(), e.to_string())),
    )
}

/// `S` or `S.F` with at most 9 fractional digits, read exactly.
fn parse_seconds(text: &str) -> Option<Duration> {
    let (whole, frac) = text.split_once('.').unwrap_or((text, "0"));
    let digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    if !digits(whole) || !digits(frac) || frac.len() > 9 {
        return None;
    }
    let secs: u64 = whole.parse().ok()?;
    let nanos: u32 = format!("{frac:0<9}").parse().ok()?;
    Some(Duration::new(secs, nanos))
}

/// Parse the timings sidecar into `(scenario, index) → elapsed`.
pub fn parse_timings(text: &str) -> Result<BTreeMap<(String, usize), Duration>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        let [tag, index, secs] = cols[..] else {
            return Err(Error::parse(i + 1, "expected 3 tab-separated columns"));
        };
        let index = index
            .parse()
            .map_err(|_| Error::parse(i + 1, format!("bad index {index:?}")))?;
        let elapsed = parse_seconds(secs)
            .ok_or_else(|| Error::parse(i + 1, format!("bad seconds {secs:?}")))?;
        if out.insert((tag.to_string(), index), elapsed).is_some() {
            return Err(Error::parse(i + 1, format!("duplicate timing for {tag} {index}")));
        }
    }
    Ok(out)
}

/// Load a history directory written by [`save_history`], together with the
/// campaign copied into it.
pub fn load_history(dir: &Path) -> Result<(EquilibriumSearch, RunHistory)> {
    let campaign = Campaign::load(&dir.join("campaign").join("campaign.toml"))?;
    let search = campaign.search;
    let zones = search.network.zones().clone();

    let status: StatusFile = read_json(&dir.join("status.json"))?;
    let tags: Vec<String> = search.tags().collect();
    if status.scenarios != tags {
        return Err(Error::Config(format!(
            "history scenarios {:?} do not match campaign {:?}",
            status.scenarios, tags
        )));
    }

    let timings = match dir.parent().map(|p| p.join(TIMINGS_FILE)) {
        Some(path) if path.exists() => named(&path, parse_timings(&io::read_text(&path)?))?,
        _ => BTreeMap::new(),
    };

    let records_path = dir.join("records.jsonl");
    let lines: Vec<RecordLine> = named(&records_path, parse_jsonl(&io::read_text(&records_path)?))?;
    let mut scenarios: Vec<ScenarioHistory> = tags.iter().cloned().map(ScenarioHistory::new).collect();
    for line in lines {
        let hist = scenarios
            .iter_mut()
            .find(|s| s.tag == line.scenario)
            .ok_or_else(|| Error::Config(format!("record for unknown scenario {:?}", line.scenario)))?;
        let read = |p: &Path| -> Result<crate::matrix::ZoneMatrix> {
            let m = io::read_matrix(&dir.join(p))?;
            m.check_zones(&zones)?;
            Ok(m)
        };
        let input_skim = SkimMatrix::try_from(read(&line.input)?)?;
        let demand = OdMatrix::try_from(read(&line.demand)?)?;
        let output_skim = SkimMatrix::try_from(read(&line.output)?)?;
        let m = compute_m(&demand, &output_skim)?;
        let elapsed = timings
            .get(&(line.scenario.clone(), line.index))
            .copied()
            .unwrap_or_default();
        hist.push(IterationRecord {
            index: line.index,
            scenario_tag: line.scenario,
            engine: line.engine,
            phase: line.phase,
            input_skim,
            demand,
            output_skim,
            m,
            delta_tf_vs_prev: line.delta_tf,
            seed: line.seed,
            injected_qt: line.injected_qt,
            gap: line.gap,
            spillover: line.spillover,
            elapsed,
        })?;
    }

    let probes_path = dir.join("probes.jsonl");
    let probes: Vec<ProbeLogEntry> = named(&probes_path, parse_jsonl(&io::read_text(&probes_path)?))?;
    let stability_path = dir.join("stability.json");
    let stability: Option<StabilityReport> = if stability_path.exists() {
        Some(read_json(&stability_path)?)
    } else {
        None
    };

    let history = RunHistory {
        scenarios,
        probes,
        incumbent: status.incumbent,
        status: status.status,
        probe_runs: status.probe_runs,
        stability,
    };
    Ok((search, history))
}
