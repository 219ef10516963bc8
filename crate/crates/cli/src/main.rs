use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tfeq_core::campaign::Campaign;
use tfeq_core::io;
use tfeq_core::persist::{load_history, save_history};
use tfeq_core::report::{parse_baseline_trips, Baseline, RunReport};
use tfeq_core::scenario::{generate, GeneratorParams};
use tfeq_core::search::{
    bracket_around, EquilibriumSearch, ProbeResult, ProbeStage, RunHistory, RunStatus,
};
use tfeq_core::{EngineKind, Error, Quantile};

const EXIT_USAGE: u8 = 1;
const EXIT_BUDGET: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

#[derive(Parser)]
#[command(name = "tfeq", version, about = "Demand-supply equilibrium search with quantile perturbation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a full campaign: bootstrap, probe, refine, inject, iterate.
    Run(RunArgs),
    /// Score quantile skims against an existing bootstrap history.
    Probe(ProbeArgs),
    /// Scan a fine quantile grid around the best probe.
    Refine(RefineArgs),
    /// Continue a converged history under the point-queue engine.
    Stability(StabilityArgs),
    /// Write a synthetic grid scenario.
    GenScenario(GenArgs),
    /// Summarise a history and export plot data.
    Report(ReportArgs),
}

/// Overrides applied on top of the campaign's search config.
#[derive(Args, Clone, Default)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    /// Histogram bins for ΔTf.
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    /// Main-chain run budget per scenario.
    #[arg(long = "max-runs")]
    max_runs: Option<usize>,
    /// Engine for the main chain and probes.
    #[arg(long, value_parser = ["sta", "dta"])]
    engine: Option<String>,
    /// Comma-separated quantiles to probe.
    #[arg(long, value_delimiter = ',')]
    quantiles: Option<Vec<f64>>,
}

impl Overrides {
    fn apply(&self, search: &mut EquilibriumSearch) -> Result<(), Error> {
        let cfg = &mut search.config;
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.bins {
            cfg.bins = v;
        }
        if let Some(v) = self.threshold {
            cfg.threshold = v;
        }
        if let Some(v) = self.max_runs {
            cfg.max_total_runs = v;
        }
        if let Some(e) = &self.engine {
            cfg.main_engine = e.parse::<EngineKind>()?;
        }
        if let Some(qs) = &self.quantiles {
            cfg.initial_probes = quantiles(qs)?;
        }
        cfg.validate()
    }
}

fn quantiles(values: &[f64]) -> Result<Vec<Quantile>, Error> {
    values.iter().map(|&q| Quantile::new(q)).collect()
}

#[derive(Args)]
struct RunArgs {
    /// Campaign file.
    #[arg(long)]
    config: PathBuf,
    /// Output root; the history lands in `<out>/history`. Falls back to the
    /// campaign's `output`, then `$TFEQ_OUT_DIR`, then `tfeq-out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Stop after the bootstrap iterations.
    #[arg(long)]
    bootstrap_only: bool,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct ProbeArgs {
    /// History directory written by `run`.
    #[arg(long)]
    history: PathBuf,
    /// Also write the table to this file.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct RefineArgs {
    #[arg(long)]
    history: PathBuf,
    /// Centre of the scan; defaults to the best recorded initial probe.
    #[arg(long)]
    center: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    halfwidth: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct StabilityArgs {
    #[arg(long)]
    history: PathBuf,
    /// Point-queue iterations; defaults to the search config value.
    #[arg(long)]
    iterations: Option<usize>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    zones: usize,
    /// Grid columns; defaults to ceil(sqrt(zones)).
    #[arg(long)]
    grid_size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, env = "TFEQ_OUT_DIR")]
    out: PathBuf,
    #[arg(long)]
    bins: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    history: PathBuf,
    /// Directory for plot data; defaults to `report` next to the history.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Baseline trip totals, `scenario trips` per line.
    #[arg(long)]
    baseline: Option<PathBuf>,
    /// Baseline OD matrix for one scenario, as `TAG=path.csv`.
    #[arg(long = "baseline-od")]
    baseline_od: Vec<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Probe(a) => cmd_probe(a),
        Command::Refine(a) => cmd_refine(a),
        Command::Stability(a) => cmd_stability(a),
        Command::GenScenario(a) => cmd_gen_scenario(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn status_code(status: RunStatus) -> u8 {
    match status {
        RunStatus::Converged | RunStatus::Running => 0,
        RunStatus::BudgetExhausted => EXIT_BUDGET,
        RunStatus::Diverged => EXIT_DIVERGED,
    }
}

fn print_summary(search: &EquilibriumSearch, history: &RunHistory) -> Result<(), Error> {
    let report = RunReport::new(search, history, None)?;
    print!("{}", report.summary());
    println!(
        "main runs {}, probe runs {}",
        history.main_runs(),
        history.probe_runs
    );
    if let Some(q) = history.incumbent {
        println!("injected quantile {q}");
    }
    Ok(())
}

fn cmd_run(a: RunArgs) -> Result<u8, Error> {
    let campaign = Campaign::load(&a.config)?;
    let mut search = campaign.search;
    a.overrides.apply(&mut search)?;
    let out = a
        .out
        .or(campaign.output)
        .or_else(|| std::env::var_os("TFEQ_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("tfeq-out"));

    let history = if a.bootstrap_only {
        search.bootstrap(None, search.config.bootstrap_iterations)?
    } else {
        search.run_to_convergence()?
    };
    let dir = save_history(&out, &search, &history)?;
    print_summary(&search, &history)?;
    println!("history written to {}", dir.display());
    Ok(status_code(history.status))
}

fn load(history: &Path, overrides: &Overrides) -> Result<(EquilibriumSearch, RunHistory), Error> {
    if !history.join("records.jsonl").exists() {
        return Err(Error::Usage(format!(
            "{} holds no history; run `tfeq run` first",
            history.display()
        )));
    }
    let (mut search, hist) = load_history(history)?;
    overrides.apply(&mut search)?;
    if hist.scenarios.iter().any(|s| s.records.is_empty()) {
        return Err(Error::Usage("history has no bootstrap iterations".into()));
    }
    Ok((search, hist))
}

fn probe_table(tags: &[String], results: &[ProbeResult]) -> String {
    let mut out = String::from("qt\tscore");
    for t in tags {
        out.push('\t');
        out.push_str(t);
    }
    out.push('\n');
    for r in results {
        let _ = write!(out, "{}\t{:.6}", r.qt, r.score);
        for t in tags {
            let _ = write!(out, "\t{:.6}", r.per_scenario_delta.get(t).copied().unwrap_or(f64::NAN));
        }
        out.push('\n');
    }
    out
}

fn emit_table(table: &str, out: Option<&Path>) -> Result<(), Error> {
    print!("{table}");
    if let Some(path) = out {
        io::write_atomic(path, table)?;
    }
    Ok(())
}

fn cmd_probe(a: ProbeArgs) -> Result<u8, Error> {
    let (search, history) = load(&a.history, &a.overrides)?;
    let results = search.probe_quantiles(&history, &search.config.initial_probes)?;
    let tags: Vec<String> = search.tags().collect();
    emit_table(&probe_table(&tags, &results), a.out.as_deref())?;
    Ok(0)
}

fn cmd_refine(a: RefineArgs) -> Result<u8, Error> {
    let (search, history) = load(&a.history, &a.overrides)?;
    let cfg = &search.config;
    let best = match a.center {
        Some(c) => {
            let q = Quantile::new(c)?;
            search.probe_quantiles(&history, &[q])?.remove(0)
        }
        None => {
            let recorded: Option<ProbeResult> = history
                .probes
                .iter()
                .filter(|p| p.stage == ProbeStage::Initial)
                .map(|p| p.result.clone())
                .min_by(|x, y| x.score.total_cmp(&y.score).then(x.qt.value().total_cmp(&y.qt.value())));
            match recorded {
                Some(r) => r,
                None => search.probe_quantiles(&history, &cfg.initial_probes)?.remove(0),
            }
        }
    };
    let step = a.step.unwrap_or(cfg.refine_step);
    let bracket = bracket_around(best.qt, a.halfwidth.unwrap_or(cfg.refine_halfwidth));
    let (qt, score, mut scanned) = search.refine(&history, &best, bracket, step)?;
    scanned.sort_by(|x, y| x.score.total_cmp(&y.score).then(x.qt.value().total_cmp(&y.qt.value())));
    let tags: Vec<String> = search.tags().collect();
    let mut table = probe_table(&tags, &scanned);
    let _ = writeln!(table, "# best qt {qt} score {score:.6}");
    emit_table(&table, a.out.as_deref())?;
    Ok(0)
}

fn cmd_stability(a: StabilityArgs) -> Result<u8, Error> {
    let (search, mut history) = load(&a.history, &a.overrides)?;
    let k = a.iterations.unwrap_or(search.config.stability_iterations);
    let report = search.stability_check(&mut history, k)?;
    let out = a
        .history
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    save_history(&out, &search, &history)?;
    for (tag, deltas) in &report.per_scenario {
        let d: Vec<String> = deltas.iter().map(|d| format!("{d:.3}")).collect();
        println!("{tag}: ΔTf {}", d.join(" "));
    }
    println!(
        "max {:.3}, min {:.3}, ceiling {:.3}{}{}",
        report.max,
        report.min,
        report.ceiling,
        if report.breached { ", ceiling breached" } else { "" },
        if report.diverged { ", diverging" } else { "" }
    );
    if let Some(s) = report.neighborhood_spread {
        println!("neighborhood spread {s:.3} (envelope {:.3})", search.config.neighborhood_envelope);
    }
    Ok(if report.breached || report.diverged {
        EXIT_DIVERGED
    } else {
        0
    })
}

fn cmd_gen_scenario(a: GenArgs) -> Result<u8, Error> {
    let mut params = GeneratorParams::new(a.zones, a.seed);
    params.grid_size = a.grid_size;
    if let Some(b) = a.bins {
        params.bins = b;
    }
    let scenario = generate(&params)?;
    let path = scenario.write(&a.out)?;
    println!("campaign written to {}", path.display());
    Ok(0)
}

fn cmd_report(a: ReportArgs) -> Result<u8, Error> {
    let (search, history) = load(&a.history, &Overrides::default())?;
    let mut baseline = None;
    if a.baseline.is_some() || !a.baseline_od.is_empty() {
        let mut b = Baseline::default();
        if let Some(path) = &a.baseline {
            b.trips = parse_baseline_trips(&io::read_text(path)?)
                .map_err(|e| e.with_source_name(path.display().to_string()))?;
        }
        let mut od = BTreeMap::new();
        for spec in &a.baseline_od {
            let (tag, path) = spec
                .split_once('=')
                .ok_or_else(|| Error::Usage(format!("--baseline-od expects TAG=path, got {spec:?}")))?;
            od.insert(tag.to_string(), io::read_matrix(Path::new(path))?);
        }
        b.od = od;
        baseline = Some(b);
    }
    let report = RunReport::new(&search, &history, baseline.as_ref())?;
    let out = a.out.unwrap_or_else(|| {
        a.history
            .parent()
            .map(|p| p.join("report"))
            .unwrap_or_else(|| PathBuf::from("report"))
    });
    report.write(&out, &search, &history)?;
    print!("{}", report.summary());
    println!("plot data written to {}", out.display());
    Ok(0)
}
