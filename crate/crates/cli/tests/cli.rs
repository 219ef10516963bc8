use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn tfeq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tfeq"))
        .args(args)
        .env_remove("TFEQ_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Generate a small scenario under `dir/scenario` and return its campaign path.
fn scenario(dir: &Path, zones: usize, seed: u64) -> PathBuf {
    let target = dir.join("scenario");
    let out = tfeq(&[
        "gen-scenario",
        "--zones",
        &zones.to_string(),
        "--seed",
        &seed.to_string(),
        "--bins",
        "12",
        "--out",
        s(&target),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    target.join("campaign.toml")
}

fn run(campaign: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--config", s(campaign), "--out", s(out)];
    args.extend_from_slice(extra);
    tfeq(&args)
}

fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let bytes = std::fs::read(&path).unwrap();
                files.push((path.strip_prefix(dir).unwrap().to_path_buf(), bytes));
            }
        }
    }
    files.sort();
    files
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(code(&tfeq(&["--help"])), 0);
    assert_eq!(code(&tfeq(&["run", "--help"])), 0);
    assert_eq!(code(&tfeq(&[])), 1);
    assert_eq!(code(&tfeq(&["run"])), 1);
    assert_eq!(code(&tfeq(&["run", "--config", "c.toml", "--engine", "tram"])), 1);
}

#[test]
fn missing_network_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let campaign = scenario(dir.path(), 4, 1);
    std::fs::remove_file(campaign.with_file_name("network.toml")).unwrap();
    let out = run(&campaign, &dir.path().join("out"), &[]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("network.toml"), "{}", stderr(&out));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn bad_override_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let campaign = scenario(dir.path(), 4, 1);
    let out = run(&campaign, &dir.path().join("out"), &["--quantiles", "0.2,1.4"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).starts_with("error:"));
}

#[test]
fn generated_scenarios_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    scenario(a.path(), 7, 42);
    scenario(b.path(), 7, 42);
    let (ta, tb) = (tree(&a.path().join("scenario")), tree(&b.path().join("scenario")));
    assert!(!ta.is_empty());
    assert_eq!(ta, tb);
}

#[test]
fn two_zone_scenario_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let campaign = scenario(dir.path(), 2, 5);
    let out = run(&campaign, &dir.path().join("out"), &["--threshold", "1.0"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.starts_with("status: converged"), "{text}");
    assert!(text.contains("history written to"));
    assert!(dir.path().join("out/history/records.jsonl").exists());
}

#[test]
fn budget_exhaustion_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let campaign = scenario(dir.path(), 9, 3);
    let out = run(&campaign, &dir.path().join("out"), &["--threshold", "1e-9", "--max-runs", "6"]);
    assert_eq!(code(&out), 2, "{}", stdout(&out));
    assert!(stdout(&out).starts_with("status: budget"), "{}", stdout(&out));
}

#[test]
fn output_root_falls_back_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let campaign = scenario(dir.path(), 4, 1);
    let env_root = dir.path().join("from-env");
    let out = Command::new(env!("CARGO_BIN_EXE_tfeq"))
        .args(["run", "--config", s(&campaign), "--bootstrap-only"])
        .env("TFEQ_OUT_DIR", &env_root)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(env_root.join("history/records.jsonl").exists());

    // an explicit --out wins over the environment
    let explicit = dir.path().join("explicit");
    let out = Command::new(env!("CARGO_BIN_EXE_tfeq"))
        .args(["run", "--config", s(&campaign), "--bootstrap-only", "--out", s(&explicit)])
        .env("TFEQ_OUT_DIR", dir.path().join("unused"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert!(explicit.join("history").exists());
    assert!(!dir.path().join("unused").exists());
}

#[test]
fn probe_and_refine_on_a_bootstrap_history() {
    let dir = tempfile::tempdir().unwrap();
    let campaign = scenario(dir.path(), 6, 2);
    let root = dir.path().join("out");
    assert_eq!(code(&run(&campaign, &root, &["--bootstrap-only"])), 0);
    let history = root.join("history");

    let table_file = dir.path().join("probe.tsv");
    let out = tfeq(&[
        "probe",
        "--history",
        s(&history),
        "--quantiles",
        "0.9,0.1,0.5,0.3",
        "--out",
        s(&table_file),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(std::fs::read_to_string(&table_file).unwrap(), text);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "qt\tscore\tAM\tPM");
    let scores: Vec<f64> = lines.map(|l| l.split('\t').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(scores.len(), 4);
    assert!(scores.windows(2).all(|w| w[0] <= w[1]), "{scores:?}");

    let out = tfeq(&["refine", "--history", s(&history), "--center", "0.4", "--step", "0.05", "--halfwidth", "0.1"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 5);
    assert!(text.lines().last().unwrap().starts_with("# best qt"));
}

#[test]
fn subcommands_refuse_an_empty_history_dir() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in ["probe", "refine", "stability", "report"] {
        let out = tfeq(&[cmd, "--history", s(dir.path())]);
        assert_eq!(code(&out), 1, "{cmd}");
        assert!(stderr(&out).contains("no history"), "{cmd}: {}", stderr(&out));
    }
}

fn last_total_trips(records: &str, tag: &str) -> f64 {
    let line = records
        .lines()
        .rfind(|l| l.contains(&format!("\"scenario\":\"{tag}\"")))
        .unwrap();
    let rest = &line[line.find("\"total_trips\":").unwrap() + "\"total_trips\":".len()..];
    let end = rest.find([',', '}']).unwrap();
    rest[..end].parse().unwrap()
}

#[test]
fn report_compares_against_a_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let campaign = scenario(dir.path(), 6, 2);
    let root = dir.path().join("out");
    assert_eq!(code(&run(&campaign, &root, &["--threshold", "1.0"])), 0);
    let history = root.join("history");
    let records = std::fs::read_to_string(history.join("records.jsonl")).unwrap();
    let modeled = last_total_trips(&records, "AM");

    let baseline = dir.path().join("baseline.txt");
    std::fs::write(&baseline, format!("AM {}\n", modeled / 1.079)).unwrap();
    let report_dir = dir.path().join("report");
    let out = tfeq(&[
        "report",
        "--history",
        s(&history),
        "--baseline",
        s(&baseline),
        "--out",
        s(&report_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("error +7.9%"), "{}", stdout(&out));
    assert!(report_dir.join("report.json").exists());

    let out = tfeq(&["report", "--history", s(&history), "--baseline-od", "AM"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn stability_continues_a_converged_history() {
    let dir = tempfile::tempdir().unwrap();
    let campaign = scenario(dir.path(), 6, 2);
    let root = dir.path().join("out");
    assert_eq!(code(&run(&campaign, &root, &["--threshold", "1.0"])), 0);
    let history = root.join("history");
    let before = std::fs::read_to_string(history.join("records.jsonl")).unwrap().lines().count();

    let out = tfeq(&["stability", "--history", s(&history), "--iterations", "3"]);
    let c = code(&out);
    assert!(c == 0 || c == 3, "{c}: {}", stderr(&out));
    assert!(stdout(&out).contains("ceiling"));
    let after = std::fs::read_to_string(history.join("records.jsonl")).unwrap().lines().count();
    assert_eq!(after, before + 2 * 3);
    assert!(history.join("stability.json").exists());
}
