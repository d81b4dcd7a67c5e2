use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use stirap::adiabaticity::AdiabaticityReport;
use stirap::oracle_check::{oracle_check, CheckTolerances, OracleCheckReport};
use stirap::propagator::fmt17;
use stirap::scenario::{analyze, run, AnalysisReport, Overrides, RunError, RunReport, Scenario, ScenarioError};

const EXIT_NUMERICAL: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "stirap", version, about = "Adiabatic passage between degenerate manifolds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Coupling structure, Morris-Shore summary and transfer feasibility (no integration).
    Analyze {
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Analysis, full integration, adiabatic prediction and adiabaticity scan.
    Run {
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Runs several scenarios in parallel, each into its own subdirectory of --out.
    Sweep {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Compares the closed-form oracles with the numeric decomposition over a θ grid.
    OracleCheck {
        #[arg(long, default_value_t = 100)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct Common {
    /// Output directory; without it the JSON report goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Both)]
    format: Format,
    #[arg(long)]
    rtol: Option<f64>,
    #[arg(long)]
    atol: Option<f64>,
    /// Relative threshold below which singular values count as zero.
    #[arg(long)]
    zero_tol: Option<f64>,
    /// Number of output samples on the time grid.
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Both,
}

impl Format {
    fn csv(self) -> bool {
        self != Format::Json
    }
    fn json(self) -> bool {
        self != Format::Csv
    }
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides { rtol: self.rtol, atol: self.atol, zero_tol: self.zero_tol, samples: self.samples }
    }

    fn check(&self) -> Result<(), String> {
        for (name, v) in [("--rtol", self.rtol), ("--atol", self.atol), ("--zero-tol", self.zero_tol)] {
            if let Some(x) = v {
                if !(x > 0.0 && x.is_finite()) {
                    return Err(format!("{name} must be a positive number, got {x}"));
                }
            }
        }
        if self.samples.is_some_and(|n| n < 2) {
            return Err("--samples must be at least 2".into());
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    status: &'a str,
    version: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    message: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<T>,
}

fn envelope<T: Serialize>(status: &str, message: Option<String>, report: Option<T>) -> String {
    let e = Envelope { status, version: env!("CARGO_PKG_VERSION"), message, report };
    let mut s = serde_json::to_string_pretty(&e).expect("report serializes");
    s.push('\n');
    s
}

fn load(path: &Path, common: &Common) -> Result<Scenario, ScenarioError> {
    let mut sc = Scenario::load(path)?;
    sc.apply(&common.overrides());
    Ok(sc)
}

fn usage_error(path: &Path, e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {}: {e}", path.display());
    ExitCode::from(EXIT_USAGE)
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::write(dir.join(name), contents).with_context(|| format!("writing {}", dir.join(name).display()))
}

fn adiabaticity_csv(r: &AdiabaticityReport) -> String {
    let mut out = String::from("t");
    for p in &r.pairs {
        let _ = write!(out, ",ratio_d{}_b{},closed_d{}_b{}", p.dark, p.bright, p.dark, p.bright);
    }
    out.push('\n');
    let cell = |x: Option<f64>| x.map(fmt17).unwrap_or_default();
    for (k, t) in r.times.iter().enumerate() {
        out.push_str(&fmt17(*t));
        for p in &r.pairs {
            let _ = write!(out, ",{},{}", cell(p.ratio[k]), cell(p.closed_form[k]));
        }
        out.push('\n');
    }
    out
}

enum Outcome {
    Done(RunReport),
    Failed { analysis: Option<AnalysisReport>, message: String },
}

fn run_into(sc: &Scenario, dir: Option<&Path>, format: Format) -> Result<Outcome> {
    match run(sc) {
        Ok(out) => {
            if let Some(dir) = dir {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                write(dir, "report.json", &envelope("ok", None, Some(&out.report)))?;
                if sc.outputs.trajectory {
                    if format.csv() {
                        write(dir, "trajectory.csv", &out.trajectory.to_csv())?;
                    }
                    if format.json() {
                        let mut s = serde_json::to_string(&out.trajectory.to_record())?;
                        s.push('\n');
                        write(dir, "trajectory.json", &s)?;
                    }
                }
                if let (Some(a), true) = (&out.report.adiabaticity, format.csv()) {
                    write(dir, "adiabaticity.csv", &adiabaticity_csv(a))?;
                }
            }
            Ok(Outcome::Done(out.report))
        }
        Err(RunError::Integration(e)) => {
            let analysis = analyze(sc).ok();
            let message = format!("integration failed: {e}");
            if let Some(dir) = dir {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                write(dir, "report.json", &envelope("numerical_failure", Some(message.clone()), analysis.as_ref()))?;
            }
            Ok(Outcome::Failed { analysis, message })
        }
        Err(RunError::Scenario(e)) => Err(e.into()),
    }
}

fn cmd_analyze(path: &Path, common: &Common) -> ExitCode {
    let sc = match load(path, common) {
        Ok(sc) => sc,
        Err(e) => return usage_error(path, e),
    };
    let report = match analyze(&sc) {
        Ok(r) => r,
        Err(e) => return usage_error(path, e),
    };
    let text = envelope("ok", None, Some(&report));
    match &common.out {
        None => print!("{text}"),
        Some(dir) => {
            if let Err(e) = fs::create_dir_all(dir).map_err(anyhow::Error::from).and_then(|_| write(dir, "analysis.json", &text)) {
                eprintln!("error: {e:#}");
                return ExitCode::from(EXIT_NUMERICAL);
            }
            eprintln!("{}: {}", sc.name, report.verdict);
        }
    }
    ExitCode::SUCCESS
}

fn cmd_run(path: &Path, common: &Common) -> ExitCode {
    let sc = match load(path, common) {
        Ok(sc) => sc,
        Err(e) => return usage_error(path, e),
    };
    // initial-state and matrix problems are scenario errors too, caught before any output
    if let Err(e) = sc.build().and_then(|sys| {
        sys.initial.map(|_| ()).ok_or(ScenarioError::Invalid { line: None, path: "initial".into(), message: "a run needs an initial state".into() })
    }) {
        return usage_error(path, e);
    }
    match run_into(&sc, common.out.as_deref(), common.format) {
        Ok(Outcome::Done(report)) => {
            match &common.out {
                None => print!("{}", envelope("ok", None, Some(&report))),
                Some(_) => {
                    let [g, e, f] = report.final_populations;
                    eprintln!("{}: P_g = {g:.6}, P_e = {e:.6}, P_f = {f:.6}", sc.name);
                }
            }
            ExitCode::SUCCESS
        }
        Ok(Outcome::Failed { analysis, message }) => {
            if common.out.is_none() {
                print!("{}", envelope("numerical_failure", Some(message.clone()), analysis.as_ref()));
            }
            eprintln!("error: {}: {message}", path.display());
            ExitCode::from(EXIT_NUMERICAL)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_NUMERICAL)
        }
    }
}

#[derive(Serialize)]
struct SweepEntry {
    scenario: String,
    name: String,
    status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    message: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    verdict: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    final_populations: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    norm_drift: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_adiabaticity_ratio: Option<f64>,
}

fn cmd_sweep(paths: &[PathBuf], common: &Common) -> ExitCode {
    let Some(out) = common.out.clone() else {
        eprintln!("error: sweep needs --out");
        return ExitCode::from(EXIT_USAGE);
    };
    let mut scenarios = Vec::new();
    for path in paths {
        let sc = match load(path, common) {
            Ok(sc) => sc,
            Err(e) => return usage_error(path, e),
        };
        if let Err(e) = sc.build() {
            return usage_error(path, e);
        }
        if scenarios.iter().any(|(_, s): &(PathBuf, Scenario)| s.name == sc.name) {
            return usage_error(path, format!("duplicate scenario name `{}`", sc.name));
        }
        if sc.name.is_empty() || sc.name.contains(['/', '\\']) || sc.name.starts_with('.') {
            return usage_error(path, format!("scenario name `{}` cannot be used as a directory name", sc.name));
        }
        scenarios.push((path.clone(), sc));
    }

    let entries: Vec<SweepEntry> = scenarios
        .par_iter()
        .map(|(path, sc)| {
            let dir = out.join(&sc.name);
            let base = SweepEntry {
                scenario: path.display().to_string(),
                name: sc.name.clone(),
                status: "ok".into(),
                message: None,
                verdict: None,
                final_populations: None,
                norm_drift: None,
                max_adiabaticity_ratio: None,
            };
            match run_into(sc, Some(&dir), common.format) {
                Ok(Outcome::Done(r)) => SweepEntry {
                    verdict: Some(r.analysis.verdict.clone()),
                    final_populations: Some(r.final_populations),
                    norm_drift: Some(r.norm_drift),
                    max_adiabaticity_ratio: r.adiabaticity.as_ref().map(|a| a.max_ratio),
                    ..base
                },
                Ok(Outcome::Failed { analysis, message }) => SweepEntry {
                    status: "numerical_failure".into(),
                    message: Some(message),
                    verdict: analysis.map(|a| a.verdict),
                    ..base
                },
                Err(e) => SweepEntry { status: "io_failure".into(), message: Some(format!("{e:#}")), ..base },
            }
        })
        .collect();

    let failed = entries.iter().filter(|e| e.status != "ok").count();
    let status = if failed == 0 { "ok" } else { "numerical_failure" };
    let text = envelope(status, (failed > 0).then(|| format!("{failed} of {} scenarios failed", entries.len())), Some(&entries));
    if let Err(e) = fs::create_dir_all(&out).map_err(anyhow::Error::from).and_then(|_| write(&out, "sweep.json", &text)) {
        eprintln!("error: {e:#}");
        return ExitCode::from(EXIT_NUMERICAL);
    }
    for e in &entries {
        eprintln!("{}: {}", e.name, e.status);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_NUMERICAL)
    }
}

fn cmd_oracle_check(points: usize, out: Option<&Path>) -> ExitCode {
    if points == 0 {
        eprintln!("error: --points must be positive");
        return ExitCode::from(EXIT_USAGE);
    }
    let report: OracleCheckReport = oracle_check(points, &CheckTolerances::default());
    let text = envelope(if report.pass { "ok" } else { "numerical_failure" }, None, Some(&report));
    match out {
        None => print!("{text}"),
        Some(dir) => {
            if let Err(e) = fs::create_dir_all(dir).map_err(anyhow::Error::from).and_then(|_| write(dir, "oracle_check.json", &text)) {
                eprintln!("error: {e:#}");
                return ExitCode::from(EXIT_NUMERICAL);
            }
        }
    }
    for item in &report.items {
        eprintln!("{} {} (worst {:.3e}, tolerance {:.1e})", if item.pass { "PASS" } else { "FAIL" }, item.name, item.worst, item.tolerance);
    }
    if report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_NUMERICAL)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common_ok = |c: &Common| c.check().map_err(|m| eprintln!("error: {m}")).is_ok();
    match &cli.command {
        Command::Analyze { scenario, common } if common_ok(common) => cmd_analyze(scenario, common),
        Command::Run { scenario, common } if common_ok(common) => cmd_run(scenario, common),
        Command::Sweep { scenarios, common } if common_ok(common) => cmd_sweep(scenarios, common),
        Command::OracleCheck { points, out } => cmd_oracle_check(*points, out.as_deref()),
        _ => ExitCode::from(EXIT_USAGE),
    }
}
