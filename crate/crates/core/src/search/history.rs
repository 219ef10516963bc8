use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::assign::EngineKind;
use crate::error::{Error, Result};
use crate::matrix::{OdMatrix, SkimMatrix, TrafficQuantityMatrix};
use crate::perturb::{Quantile, SkimStack};

use super::config::StackMembership;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Bootstrap,
    /// Chain restarted from an injected quantile skim.
    Perturbed,
    Stability,
}

/// One demand → assignment pass.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// 1-based position in the scenario's chain.
    pub index: usize,
    pub scenario_tag: String,
    pub engine: EngineKind,
    pub phase: Phase,
    pub input_skim: SkimMatrix,
    pub demand: OdMatrix,
    pub output_skim: SkimMatrix,
    pub m: TrafficQuantityMatrix,
    pub delta_tf_vs_prev: Option<f64>,
    pub seed: u64,
    /// Set on the record whose input skim was an injected quantile skim.
    pub injected_qt: Option<Quantile>,
    pub gap: Option<f64>,
    pub spillover: f64,
    /// Wall-clock time of the pass; not persisted with the history.
    pub elapsed: Duration,
}

impl IterationRecord {
    pub fn total_trips(&self) -> f64 {
        self.demand.total()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScenarioHistory {
    pub tag: String,
    pub records: Vec<IterationRecord>,
}

impl ScenarioHistory {
    pub fn new(tag: impl Into<String>) -> Self {
        ScenarioHistory {
            tag: tag.into(),
            records: Vec::new(),
        }
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }

    pub fn next_index(&self) -> usize {
        self.records.last().map_or(1, |r| r.index + 1)
    }

    pub fn deltas(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().filter_map(|r| r.delta_tf_vs_prev)
    }

    pub fn deltas_in(&self, phase: Phase) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.phase == phase)
            .filter_map(|r| r.delta_tf_vs_prev)
            .collect()
    }

    pub fn push(&mut self, record: IterationRecord) -> Result<()> {
        if let Some(last) = self.records.last() {
            if record.index <= last.index {
                return Err(Error::Usage(format!(
                    "record index {} does not follow {}",
                    record.index, last.index
                )));
            }
        }
        self.records.push(record);
        Ok(())
    }

    pub fn stack(&self, membership: StackMembership) -> Result<SkimStack> {
        let members = self
            .records
            .iter()
            .filter(|r| membership == StackMembership::All || r.phase == Phase::Bootstrap)
            .map(|r| r.output_skim.clone())
            .collect();
        SkimStack::new(members)
    }
}

/// Score of one probed quantile: ΔTf summed over scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub qt: Quantile,
    /// Scenario-specific quantiles; scenarios not listed use `qt`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub scenario_qt: BTreeMap<String, Quantile>,
    pub per_scenario_delta: BTreeMap<String, f64>,
    pub score: f64,
}

impl ProbeResult {
    pub fn qt_for(&self, tag: &str) -> Quantile {
        self.scenario_qt.get(tag).copied().unwrap_or(self.qt)
    }

    pub fn same_point(&self, other: &ProbeResult) -> bool {
        self.qt == other.qt && self.scenario_qt == other.scenario_qt
    }
}

/// Ascending score, ties toward the smaller quantile.
pub(crate) fn rank(results: &mut [ProbeResult]) {
    results.sort_by(|a, b| {
        a.score
            .total_cmp(&b.score)
            .then(a.qt.value().total_cmp(&b.qt.value()))
    });
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeStage {
    Initial,
    Refine,
    /// Candidate tried as the injected skim.
    Injection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeLogEntry {
    pub stage: ProbeStage,
    pub result: ProbeResult,
    /// Injection outcome; `None` for plain probes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accepted: Option<bool>,
    /// First post-injection ΔTf per scenario (injection entries only).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub post_injection_delta: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Running,
    Converged,
    BudgetExhausted,
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub ceiling: f64,
    pub per_scenario: BTreeMap<String, Vec<f64>>,
    pub max: f64,
    pub min: f64,
    pub breached: bool,
    pub diverged: bool,
    /// Largest per-bin count spread over the final window, as a share of Z².
    pub neighborhood_spread: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunHistory {
    pub scenarios: Vec<ScenarioHistory>,
    pub probes: Vec<ProbeLogEntry>,
    pub incumbent: Option<Quantile>,
    pub status: RunStatus,
    /// Model runs spent on probe evaluation, summed over scenarios.
    pub probe_runs: usize,
    pub stability: Option<StabilityReport>,
}

impl RunHistory {
    pub fn new<I: IntoIterator<Item = String>>(tags: I) -> Self {
        RunHistory {
            scenarios: tags.into_iter().map(ScenarioHistory::new).collect(),
            probes: Vec::new(),
            incumbent: None,
            status: RunStatus::Running,
            probe_runs: 0,
            stability: None,
        }
    }

    pub fn scenario(&self, tag: &str) -> Option<&ScenarioHistory> {
        self.scenarios.iter().find(|s| s.tag == tag)
    }

    /// Main-chain model runs per scenario (the longest chain).
    pub fn main_runs(&self) -> usize {
        self.scenarios
            .iter()
            .map(|s| s.records.len())
            .max()
            .unwrap_or(0)
    }

    /// Scores of accepted injections in the order they were accepted.
    pub fn accepted_scores(&self) -> Vec<f64> {
        self.probes
            .iter()
            .filter(|p| p.accepted == Some(true))
            .map(|p| p.result.score)
            .collect()
    }

    /// True when the last two ΔTf values of every scenario are below `threshold`.
    pub fn is_converged(&self, threshold: f64) -> bool {
        !self.scenarios.is_empty()
            && self.scenarios.iter().all(|s| {
                let d: Vec<f64> = s.deltas().collect();
                d.len() >= 2 && d[d.len() - 2..].iter().all(|&x| x < threshold)
            })
    }
}

/// Three strictly increasing consecutive values anywhere in `deltas`.
pub fn has_divergent_run(deltas: &[f64]) -> bool {
    deltas.windows(3).any(|w| w[0] < w[1] && w[1] < w[2])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn divergence_needs_three_rising_values() {
        assert!(!has_divergent_run(&[0.1, 0.2]));
        assert!(has_divergent_run(&[0.1, 0.2, 0.3]));
        assert!(!has_divergent_run(&[0.1, 0.2, 0.2, 0.4]));
        assert!(!has_divergent_run(&[0.3, 0.2, 0.25, 0.1, 0.15]));
        assert!(has_divergent_run(&[0.5, 0.1, 0.2, 0.3]));
    }

    #[test]
    fn ranking_breaks_ties_toward_smaller_qt() {
        let r = |qt: f64, score: f64| ProbeResult {
            qt: Quantile::new(qt).unwrap(),
            scenario_qt: BTreeMap::new(),
            per_scenario_delta: BTreeMap::new(),
            score,
        };
        let mut v = vec![r(0.5, 0.2), r(0.4, 0.2), r(0.3, 0.3), r(0.75, 0.1)];
        rank(&mut v);
        let order: Vec<f64> = v.iter().map(|p| p.qt.value()).collect();
        assert_eq!(order, vec![0.75, 0.4, 0.5, 0.3]);
    }
}
