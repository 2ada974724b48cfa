use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use cncroute::engine::{Engine, SimReport};
use cncroute::harness::sweep::{run_sweep, SweepSpec};
use cncroute::model::Outcome;
use cncroute::planner::Scheme;
use cncroute::scenario::{Scenario, ScenarioError};

/// Deadline-aware request routing simulator.
///
/// Log verbosity comes from the CNCROUTE_LOG environment variable
/// (for example `CNCROUTE_LOG=debug`).
#[derive(Parser)]
#[command(name = "cncroute", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Cnc,
    ComputingFirst,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Cnc => Scheme::Cnc,
            SchemeArg::ComputingFirst => Scheme::ComputingFirst,
        }
    }
}

#[derive(clap::Args)]
struct Overrides {
    /// Routing scheme; defaults to the one in the scenario.
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    /// RNG seed; defaults to the one in the scenario.
    #[arg(long)]
    seed: Option<u64>,
    /// Performance deadline applied to every request, in seconds.
    #[arg(long)]
    deadline: Option<f64>,
    /// Background utilization applied to every loaded link.
    #[arg(long)]
    utilization: Option<f64>,
}

impl Overrides {
    fn apply(&self, sc: &mut Scenario) {
        if let Some(s) = self.scheme {
            sc.config.scheme = s.into();
        }
        if let Some(seed) = self.seed {
            sc.rng_seed = seed;
        }
        if let Some(d) = self.deadline {
            sc.set_performance_deadline(d);
        }
        if let Some(u) = self.utilization {
            sc.set_background_utilization(u);
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario file and list every problem found.
    Validate { scenario: PathBuf },
    /// Simulate one scenario and print a per-request summary.
    Run {
        scenario: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Print the full report as JSON instead.
        #[arg(long)]
        json: bool,
    },
    /// Run a (scheme, load, deadline, seed) grid and write the results CSV.
    Sweep {
        scenario: PathBuf,
        sweep: PathBuf,
        #[arg(long, short, default_value = "results.csv")]
        out: PathBuf,
    },
    /// Simulate one scenario and write the event trace.
    Trace {
        scenario: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, default_value = "events.log")]
        events: PathBuf,
    },
}

fn load(path: &PathBuf) -> Result<Scenario> {
    Scenario::load(path).with_context(|| format!("loading {}", path.display()))
}

fn print_summary(report: &SimReport) {
    println!("id\tingress\tsubmit_s\tdeadline_s\toutcome\tpredicted_s\tactual_s\tcost");
    let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.6}"));
    for r in &report.records {
        let outcome = r.outcome.map_or("pending", |o| o.as_str());
        let cost = r.bill.as_ref().map_or(0.0, |b| b.cost);
        println!(
            "{}\t{}\t{:.6}\t{}\t{}\t{}\t{}\t{}",
            r.id,
            r.ingress,
            r.submit_time_s,
            r.deadline_s,
            outcome,
            opt(r.predicted_response_s()),
            opt(r.actual_response_s()),
            cost
        );
    }
    let n = report.records.len();
    let done = report.records.iter().filter(|r| r.outcome == Some(Outcome::Completed)).count();
    let m = &report.metrics;
    println!();
    println!("requests {n}, completed {done}, end time {:.6} s", report.end_time_s);
    println!(
        "traffic: cnc {} B, request {} B, result {} B, background {} B",
        m.traffic.cnc_bytes, m.traffic.request_bytes, m.traffic.result_bytes, m.traffic.background_bytes
    );
    println!("events {}, broadcasts {}", m.events_processed, m.broadcasts);
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Validate { scenario } => {
            let sc = match Scenario::from_path(&scenario) {
                Ok(sc) => sc,
                Err(e) => {
                    eprintln!("{e}");
                    return Ok(ExitCode::FAILURE);
                }
            };
            match sc.validate() {
                Ok(()) => {
                    println!("ok");
                    Ok(ExitCode::SUCCESS)
                }
                Err(issues) => {
                    let err = ScenarioError::Invalid(issues.clone());
                    eprintln!("{err}");
                    for i in issues {
                        println!("{i}");
                    }
                    Ok(ExitCode::FAILURE)
                }
            }
        }
        Command::Run { scenario, overrides, json } => {
            let mut sc = load(&scenario)?;
            overrides.apply(&mut sc);
            let report = Engine::new(&sc)?.run()?;
            if json {
                println!("{}", serde_json::to_string_pretty(&report)?);
            } else {
                print_summary(&report);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep { scenario, sweep, out } => {
            let sc = load(&scenario)?;
            let spec = SweepSpec::load(&sweep).with_context(|| format!("loading {}", sweep.display()))?;
            log::info!("running {} cells", spec.cell_count());
            let results = run_sweep(&sc, &spec)?;
            let file = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            results.write_csv(BufWriter::new(file))?;
            let failed = results.cells.iter().filter(|c| c.error.is_some()).count();
            if failed > 0 {
                eprintln!("{failed} cell(s) failed; their rows are left empty");
            }
            println!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Trace { scenario, overrides, events } => {
            let mut sc = load(&scenario)?;
            overrides.apply(&mut sc);
            let mut engine = Engine::new(&sc)?.with_trace();
            engine.run_to_end()?;
            let mut w = BufWriter::new(File::create(&events).with_context(|| format!("creating {}", events.display()))?);
            for line in engine.trace() {
                writeln!(w, "{line}")?;
            }
            w.flush()?;
            println!("wrote {} events to {}", engine.trace().len(), events.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CNCROUTE_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
