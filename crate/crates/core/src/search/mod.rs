//! The coupled demand/supply loop and the quantile-perturbation local search
//! that drives it towards a stable equilibrium.
//!
//! A campaign runs a short chain of bootstrap iterations per scenario, probes
//! quantile skims built from the bootstrap outputs, refines around the best
//! probe, injects the winner back into the chain and iterates until ΔTf stays
//! under the threshold. Only candidates that do not worsen ΔTf are accepted.

mod config;
mod history;

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;

use crate::assign::{assign, shortest_path_skim, EngineKind, EngineParams, Network};
use crate::demand::{generate_demand_seeded, DemandConfig};
use crate::error::{Error, Result};
use crate::matrix::SkimMatrix;
use crate::perturb::{quantile_skim, Quantile};
use crate::quantity::{compute_m, delta_tf, HistogramPair};
use crate::seed::iteration_seed;

pub use config::{SearchConfig, StackMembership};
pub use history::{
    has_divergent_run, IterationRecord, Phase, ProbeLogEntry, ProbeResult, ProbeStage, RunHistory,
    RunStatus, ScenarioHistory, StabilityReport,
};

/// One demand → assignment pass. The caller fills in `index`, `phase` and
/// `delta_tf_vs_prev` from its history.
pub fn run_iteration(
    t_in: &SkimMatrix,
    demand_cfg: &DemandConfig,
    network: &Network,
    engine: EngineKind,
    params: &EngineParams,
    seed: u64,
) -> Result<IterationRecord> {
    let started = Instant::now();
    t_in.check_zones(network.zones())?;
    let demand = generate_demand_seeded(t_in, demand_cfg, seed)?;
    let result = assign(&demand, network, engine, params)?;
    let m = compute_m(&demand, &result.skim)?;
    Ok(IterationRecord {
        index: 0,
        scenario_tag: demand_cfg.scenario_tag.clone(),
        engine,
        phase: Phase::Bootstrap,
        input_skim: t_in.clone(),
        demand,
        output_skim: result.skim,
        m,
        delta_tf_vs_prev: None,
        seed,
        injected_qt: None,
        gap: result.gap,
        spillover: result.spillover,
        elapsed: started.elapsed(),
    })
}

/// Candidate quantiles for refinement: `lo, lo + step, …` up to `hi`, with
/// `hi` itself appended when the grid falls short of it.
pub fn refine_candidates(bracket: (f64, f64), step: f64) -> Result<Vec<Quantile>> {
    let (lo, hi) = bracket;
    if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || hi < lo {
        return Err(Error::Range(format!("bad refine bracket [{lo}, {hi}]")));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Range("refine step must be positive".into()));
    }
    let round = |v: f64| (v * 1e9).round() / 1e9;
    let mut out = Vec::new();
    let mut j = 0u32;
    loop {
        let v = round(lo + step * j as f64);
        if v > hi + 1e-9 {
            break;
        }
        out.push(Quantile::new(v.min(hi))?);
        j += 1;
    }
    if out.last().is_some_and(|q| q.value() < hi - 1e-9) {
        out.push(Quantile::new(hi)?);
    }
    Ok(out)
}

/// Scan the refinement grid with `score` and return the best point as
/// `(qt, score)`. The incumbent competes with its known score; ties go to
/// the smaller quantile.
pub fn refine<F>(
    incumbent: (Quantile, f64),
    bracket: (f64, f64),
    step: f64,
    score: F,
) -> Result<(Quantile, f64)>
where
    F: FnOnce(&[Quantile]) -> Result<Vec<f64>>,
{
    let candidates = refine_candidates(bracket, step)?;
    let scores = score(&candidates)?;
    let mut best = incumbent;
    let better = |q: Quantile, s: f64, b: (Quantile, f64)| {
        s < b.1 || (s == b.1 && q.value() < b.0.value())
    };
    for (q, s) in candidates.into_iter().zip(scores) {
        if better(q, s, best) {
            best = (q, s);
        }
    }
    if bracket.0 == bracket.1 {
        // collapsed bracket: the single point is the answer
        return Ok((Quantile::new(bracket.0)?, best.1));
    }
    Ok(best)
}

/// Default refinement bracket around `best`, clipped to `[0, 1]`.
pub fn bracket_around(best: Quantile, halfwidth: f64) -> (f64, f64) {
    let round = |v: f64| (v * 1e9).round() / 1e9;
    (
        round((best.value() - halfwidth).max(0.0)),
        round((best.value() + halfwidth).min(1.0)),
    )
}

/// Largest per-bin count range across `ms`, on one grid spanning all of
/// them, as a share of the cell count.
pub fn neighborhood_spread(
    ms: &[&crate::matrix::TrafficQuantityMatrix],
    bins: usize,
) -> Result<f64> {
    let Some(first) = ms.first() else {
        return Ok(0.0);
    };
    let lo = ms.iter().map(|m| m.min()).fold(f64::INFINITY, f64::min);
    let hi = ms.iter().map(|m| m.max()).fold(f64::NEG_INFINITY, f64::max);
    let mut hists = Vec::with_capacity(ms.len());
    for m in ms {
        first.check_same_zones(m)?;
        hists.push(crate::quantity::build_histogram(m, lo, hi, bins)?);
    }
    let nbins = hists[0].bins();
    let spread = (0..nbins)
        .map(|l| {
            let counts = hists.iter().map(|h| h.counts()[l]);
            counts.clone().max().unwrap_or(0) - counts.min().unwrap_or(0)
        })
        .max()
        .unwrap_or(0);
    Ok(spread as f64 / first.zones().cells() as f64)
}

/// Everything a campaign needs: the shared network, one demand model per
/// scenario and the search settings.
#[derive(Debug, Clone)]
pub struct EquilibriumSearch {
    pub network: Network,
    pub scenarios: Vec<DemandConfig>,
    pub config: SearchConfig,
}

impl EquilibriumSearch {
    pub fn new(network: Network, scenarios: Vec<DemandConfig>, config: SearchConfig) -> Result<Self> {
        config.validate()?;
        if scenarios.is_empty() {
            return Err(Error::Config("campaign needs at least one scenario".into()));
        }
        for (i, s) in scenarios.iter().enumerate() {
            s.validate()?;
            s.potential.check_zones(network.zones())?;
            let ok_tag = !s.scenario_tag.is_empty()
                && s
                    .scenario_tag
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
            if !ok_tag {
                return Err(Error::Config(format!(
                    "scenario tag {:?} must be non-empty ASCII letters, digits, '_' or '-'",
                    s.scenario_tag
                )));
            }
            if scenarios[..i].iter().any(|o| o.scenario_tag == s.scenario_tag) {
                return Err(Error::Config(format!(
                    "scenario tag {:?} used twice",
                    s.scenario_tag
                )));
            }
        }
        Ok(EquilibriumSearch {
            network,
            scenarios,
            config,
        })
    }

    pub fn tags(&self) -> impl Iterator<Item = String> + '_ {
        self.scenarios.iter().map(|s| s.scenario_tag.clone())
    }

    fn demand(&self, tag: &str) -> Result<&DemandConfig> {
        self.scenarios
            .iter()
            .find(|s| s.scenario_tag == tag)
            .ok_or_else(|| Error::Usage(format!("history has unknown scenario {tag:?}")))
    }

    /// Free-flow shortest-path skim, the starting estimate of travel times.
    pub fn free_flow_skim(&self, tag: &str) -> Result<SkimMatrix> {
        shortest_path_skim(&self.network, &self.network.free_flow_times(), tag)
    }

    /// Run the iteration with the given index from `input` under the campaign seed.
    fn pass(
        &self,
        tag: &str,
        index: usize,
        input: &SkimMatrix,
        engine: EngineKind,
    ) -> Result<IterationRecord> {
        let seed = iteration_seed(self.config.seed, tag, index);
        let mut rec = run_iteration(
            input,
            self.demand(tag)?,
            &self.network,
            engine,
            &self.config.engine,
            seed,
        )
        .map_err(|e| e.in_iteration(tag, index))?;
        rec.index = index;
        Ok(rec)
    }

    /// Append one pass to a scenario chain, filling in ΔTf against its predecessor.
    fn extend(
        &self,
        hist: &mut ScenarioHistory,
        input: &SkimMatrix,
        engine: EngineKind,
        phase: Phase,
    ) -> Result<()> {
        let index = hist.next_index();
        let mut rec = self.pass(&hist.tag, index, input, engine)?;
        rec.phase = phase;
        if let Some(prev) = hist.last() {
            rec.delta_tf_vs_prev = Some(delta_tf(&prev.m, &rec.m, self.config.bins)?);
        }
        hist.push(rec)
    }

    /// Run `k` chained iterations per scenario from `t0` (free-flow skims when
    /// `None`). Halts with [`RunStatus::Diverged`] once three successive ΔTf
    /// values rise strictly.
    pub fn bootstrap(&self, t0: Option<&[SkimMatrix]>, k: usize) -> Result<RunHistory> {
        if k < 2 {
            return Err(Error::Usage("bootstrap needs at least 2 iterations".into()));
        }
        let mut history = RunHistory::new(self.tags());
        for (i, hist) in history.scenarios.iter_mut().enumerate() {
            let start = match t0 {
                Some(skims) => skims
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::Usage("one starting skim per scenario".into()))?,
                None => self.free_flow_skim(&hist.tag)?,
            };
            let mut input = start;
            for _ in 0..k {
                self.extend(hist, &input, self.config.main_engine, Phase::Bootstrap)?;
                let deltas: Vec<f64> = hist.deltas().collect();
                if has_divergent_run(&deltas) {
                    history.status = RunStatus::Diverged;
                    return Ok(history);
                }
                input = hist.last().expect("just pushed").output_skim.clone();
            }
        }
        Ok(history)
    }

    /// Score one candidate: in every scenario, two chained passes from the
    /// quantile skim; the score is the sum of their ΔTf.
    fn score_point(
        &self,
        history: &RunHistory,
        qt: Quantile,
        scenario_qt: &BTreeMap<String, Quantile>,
        engine: EngineKind,
    ) -> Result<ProbeResult> {
        let mut per_scenario_delta = BTreeMap::new();
        for hist in &history.scenarios {
            let q = scenario_qt.get(&hist.tag).copied().unwrap_or(qt);
            let stack = hist.stack(self.config.stack)?;
            if stack.len() < 2 {
                return Err(Error::Usage(format!(
                    "scenario {} needs at least 2 stacked skims to probe",
                    hist.tag
                )));
            }
            let start = quantile_skim(&stack, q)?;
            let index = hist.next_index();
            let first = self.pass(&hist.tag, index, &start, engine)?;
            let second = self.pass(&hist.tag, index + 1, &first.output_skim, engine)?;
            per_scenario_delta.insert(
                hist.tag.clone(),
                delta_tf(&first.m, &second.m, self.config.bins)?,
            );
        }
        let score = per_scenario_delta.values().sum();
        Ok(ProbeResult {
            qt,
            scenario_qt: scenario_qt.clone(),
            per_scenario_delta,
            score,
        })
    }

    /// Score each identical-pair quantile, sorted by ascending score.
    pub fn probe_quantiles(
        &self,
        history: &RunHistory,
        probes: &[Quantile],
    ) -> Result<Vec<ProbeResult>> {
        let points: Vec<(Quantile, BTreeMap<String, Quantile>)> =
            probes.iter().map(|&q| (q, BTreeMap::new())).collect();
        self.probe_points(history, &points)
    }

    fn probe_points(
        &self,
        history: &RunHistory,
        points: &[(Quantile, BTreeMap<String, Quantile>)],
    ) -> Result<Vec<ProbeResult>> {
        if points.is_empty() {
            return Err(Error::Usage("no quantiles to probe".into()));
        }
        let engine = self.config.main_engine;
        let mut results = points
            .par_iter()
            .map(|(q, mixed)| self.score_point(history, *q, mixed, engine))
            .collect::<Result<Vec<_>>>()?;
        history::rank(&mut results);
        Ok(results)
    }

    /// Scan the refinement bracket around `best` and return the winner
    /// together with every probe evaluated on the way.
    pub fn refine(
        &self,
        history: &RunHistory,
        best: &ProbeResult,
        bracket: (f64, f64),
        step: f64,
    ) -> Result<(Quantile, f64, Vec<ProbeResult>)> {
        let mut scanned = Vec::new();
        let (qt, score) = refine((best.qt, best.score), bracket, step, |candidates| {
            let results = self.probe_quantiles(history, candidates)?;
            let scores = candidates
                .iter()
                .map(|q| {
                    results
                        .iter()
                        .find(|r| r.qt == *q)
                        .map(|r| r.score)
                        .expect("every candidate is scored")
                })
                .collect();
            scanned = results;
            Ok(scores)
        })?;
        Ok((qt, score, scanned))
    }

    /// Inject the quantile skim of `candidate` into every scenario chain.
    /// Returns the new records and the first post-injection ΔTf per scenario.
    fn try_injection(
        &self,
        history: &RunHistory,
        candidate: &ProbeResult,
    ) -> Result<Vec<IterationRecord>> {
        let mut out = Vec::new();
        for hist in &history.scenarios {
            let q = candidate.qt_for(&hist.tag);
            let start = quantile_skim(&hist.stack(self.config.stack)?, q)?;
            let index = hist.next_index();
            let mut rec = self.pass(&hist.tag, index, &start, self.config.main_engine)?;
            rec.phase = Phase::Perturbed;
            rec.injected_qt = Some(q);
            if let Some(prev) = hist.last() {
                rec.delta_tf_vs_prev = Some(delta_tf(&prev.m, &rec.m, self.config.bins)?);
            }
            out.push(rec);
        }
        Ok(out)
    }

    /// Full search: bootstrap, probe, refine, inject, then iterate until the
    /// last two ΔTf of every scenario are under the threshold or the run
    /// budget is spent.
    pub fn run_to_convergence(&self) -> Result<RunHistory> {
        let cfg = &self.config;
        let mut history = self.bootstrap(None, cfg.bootstrap_iterations)?;
        if history.status == RunStatus::Diverged {
            return Ok(history);
        }
        self.search_and_inject(&mut history)?;
        if history.status == RunStatus::Running {
            self.iterate_until_stable(&mut history)?;
        }
        Ok(history)
    }

    /// Probe, refine and inject on a bootstrapped history. Candidates are
    /// tried best first; the first whose post-injection ΔTf is at or below
    /// the best bootstrap ΔTf in every scenario is kept. Rejected injections
    /// count as probe runs.
    pub fn search_and_inject(&self, history: &mut RunHistory) -> Result<()> {
        let cfg = &self.config;
        let scenario_count = history.scenarios.len();
        let mut points: Vec<(Quantile, BTreeMap<String, Quantile>)> = cfg
            .initial_probes
            .iter()
            .map(|&q| (q, BTreeMap::new()))
            .collect();
        for mixed in &cfg.mixed_probes {
            let qt = history
                .scenarios
                .iter()
                .find_map(|s| mixed.get(&s.tag).copied())
                .ok_or_else(|| Error::Config("mixed probe names no known scenario".into()))?;
            points.push((qt, mixed.clone()));
        }
        let initial = self.probe_points(history, &points)?;
        history.probe_runs += 2 * scenario_count * initial.len();
        history.probes.extend(initial.iter().map(|r| ProbeLogEntry {
            stage: ProbeStage::Initial,
            result: r.clone(),
            accepted: None,
            post_injection_delta: BTreeMap::new(),
        }));

        let best = initial[0].clone();
        let bracket = bracket_around(best.qt, cfg.refine_halfwidth);
        let (_, _, scanned) = self.refine(history, &best, bracket, cfg.refine_step)?;
        history.probe_runs += 2 * scenario_count * scanned.len();
        history.probes.extend(scanned.iter().map(|r| ProbeLogEntry {
            stage: ProbeStage::Refine,
            result: r.clone(),
            accepted: None,
            post_injection_delta: BTreeMap::new(),
        }));

        let mut ranking: Vec<ProbeResult> = Vec::new();
        for r in initial.into_iter().chain(scanned) {
            if !ranking.iter().any(|x| x.same_point(&r)) {
                ranking.push(r);
            }
        }
        history::rank(&mut ranking);

        let best_pre: BTreeMap<String, f64> = history
            .scenarios
            .iter()
            .map(|s| {
                let best = s.deltas().fold(f64::INFINITY, f64::min);
                (s.tag.clone(), best)
            })
            .collect();
        let ceiling = history.accepted_scores().last().copied();

        for candidate in ranking {
            if history.main_runs() >= cfg.max_total_runs {
                history.status = RunStatus::BudgetExhausted;
                return Ok(());
            }
            if ceiling.is_some_and(|c| candidate.score > c) {
                continue;
            }
            let records = self.try_injection(history, &candidate)?;
            let post: BTreeMap<String, f64> = records
                .iter()
                .map(|r| (r.scenario_tag.clone(), r.delta_tf_vs_prev.unwrap_or(0.0)))
                .collect();
            let accepted = post.iter().all(|(tag, d)| *d <= best_pre[tag]);
            history.probes.push(ProbeLogEntry {
                stage: ProbeStage::Injection,
                result: candidate.clone(),
                accepted: Some(accepted),
                post_injection_delta: post,
            });
            if accepted {
                for (hist, rec) in history.scenarios.iter_mut().zip(records) {
                    hist.push(rec)?;
                }
                history.incumbent = Some(candidate.qt);
                return Ok(());
            }
            history.probe_runs += scenario_count;
        }
        // nothing accepted: the unperturbed chain carries on
        Ok(())
    }

    /// Continue the main chains until converged, diverged or out of budget.
    pub fn iterate_until_stable(&self, history: &mut RunHistory) -> Result<()> {
        let cfg = &self.config;
        loop {
            // bootstrap pairs alone never count as convergence
            let past_bootstrap = history
                .scenarios
                .iter()
                .all(|s| s.last().is_some_and(|r| r.phase != Phase::Bootstrap));
            if past_bootstrap && history.is_converged(cfg.threshold) {
                history.status = RunStatus::Converged;
                return Ok(());
            }
            if history.main_runs() >= cfg.max_total_runs {
                history.status = RunStatus::BudgetExhausted;
                return Ok(());
            }
            for hist in history.scenarios.iter_mut() {
                let input = hist
                    .last()
                    .ok_or_else(|| Error::Usage("cannot continue an empty chain".into()))?
                    .output_skim
                    .clone();
                self.extend(hist, &input, self.config.main_engine, Phase::Perturbed)?;
            }
            let diverged = history.scenarios.iter().any(|s| {
                let d: Vec<f64> = s
                    .records
                    .iter()
                    .filter(|r| r.phase == Phase::Perturbed)
                    .filter_map(|r| r.delta_tf_vs_prev)
                    .collect();
                has_divergent_run(&d)
            });
            if diverged {
                history.status = RunStatus::Diverged;
                return Ok(());
            }
        }
    }

    /// Continue a converged history for `k` iterations under the point-queue
    /// engine and summarise the ΔTf trajectory, the switch pair included.
    pub fn stability_check(&self, history: &mut RunHistory, k: usize) -> Result<StabilityReport> {
        if k == 0 {
            return Err(Error::Usage("stability check needs at least 1 iteration".into()));
        }
        if history.status != RunStatus::Converged {
            return Err(Error::Usage(
                "stability check needs a converged history".into(),
            ));
        }
        for hist in history.scenarios.iter_mut() {
            for _ in 0..k {
                let input = hist
                    .last()
                    .ok_or_else(|| Error::Usage("cannot continue an empty chain".into()))?
                    .output_skim
                    .clone();
                self.extend(hist, &input, EngineKind::Dta, Phase::Stability)?;
            }
        }

        let ceiling = self.config.stability_ceiling();
        let per_scenario: BTreeMap<String, Vec<f64>> = history
            .scenarios
            .iter()
            .map(|s| (s.tag.clone(), s.deltas_in(Phase::Stability)))
            .collect();
        let all = per_scenario.values().flatten().copied();
        let max = all.clone().fold(f64::NEG_INFINITY, f64::max);
        let min = all.clone().fold(f64::INFINITY, f64::min);
        let breached = all.clone().any(|d| d > ceiling);
        let diverged = per_scenario.values().any(|d| has_divergent_run(d));

        let window = 4;
        let mut spread: Option<f64> = None;
        for s in &history.scenarios {
            if s.records.len() >= window {
                let ms: Vec<_> = s.records[s.records.len() - window..]
                    .iter()
                    .map(|r| &r.m)
                    .collect();
                let v = neighborhood_spread(&ms, self.config.bins)?;
                spread = Some(spread.map_or(v, |x: f64| x.max(v)));
            }
        }

        let report = StabilityReport {
            ceiling,
            per_scenario,
            max,
            min,
            breached,
            diverged,
            neighborhood_spread: spread,
        };
        history.stability = Some(report.clone());
        Ok(report)
    }

    /// Overlay of the M distributions of records `i` and `i + 1` of a scenario.
    pub fn pair_overlay(&self, hist: &ScenarioHistory, i: usize) -> Result<HistogramPair> {
        let (a, b) = (&hist.records[i], &hist.records[i + 1]);
        crate::quantity::histogram_pair(&a.m, &b.m, self.config.bins)
    }
}
