//! Deadline × load × scheme × seed sweeps and their CSV export.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path as FsPath;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{Engine, RequestRecord};
use crate::model::Outcome;
use crate::planner::Scheme;
use crate::scenario::Scenario;

/// CSV header; the plotting side depends on this exact order.
pub const CSV_COLUMNS: [&str; 11] = [
    "scheme",
    "load",
    "deadline_s",
    "seed",
    "submitted",
    "completed",
    "rejected",
    "missed",
    "success_ratio",
    "mean_cost_completed",
    "mean_cost_fig5_convention",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadLevel {
    pub name: String,
    /// Utilization applied to every background load entry of the scenario.
    pub utilization: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub deadlines: Vec<f64>,
    pub load_levels: Vec<LoadLevel>,
    pub schemes: Vec<Scheme>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error("cannot read sweep: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed sweep: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid sweep: {0}")]
    Invalid(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl SweepSpec {
    pub fn from_json(text: &str) -> Result<Self, SweepError> {
        let s: Self = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: impl AsRef<FsPath>) -> Result<Self, SweepError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        let bad = |m: &str| Err(SweepError::Invalid(m.to_string()));
        if self.deadlines.is_empty() || self.load_levels.is_empty() || self.schemes.is_empty() || self.seeds.is_empty() {
            return bad("deadlines, load_levels, schemes and seeds must be non-empty");
        }
        if self.deadlines.iter().any(|d| !(*d > 0.0)) {
            return bad("deadlines must be positive");
        }
        if self.seeds.iter().collect::<BTreeSet<_>>().len() != self.seeds.len() {
            return bad("seeds must be distinct");
        }
        if self.load_levels.iter().map(|l| &l.name).collect::<BTreeSet<_>>().len() != self.load_levels.len() {
            return bad("load level names must be distinct");
        }
        if self.load_levels.iter().any(|l| !(l.utilization >= 0.0 && l.utilization < 1.0)) {
            return bad("load utilization must be in [0, 1)");
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.schemes.len() * self.load_levels.len() * self.deadlines.len() * self.seeds.len()
    }
}

/// One simulated (scheme, load, deadline, seed) combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub scheme: Scheme,
    pub load: String,
    pub deadline_s: f64,
    pub seed: u64,
    pub submitted: usize,
    pub completed: usize,
    pub rejected: usize,
    pub missed: usize,
    pub success_ratio: f64,
    /// Mean bill of requests completed by their deadline; `None` if none were.
    pub mean_cost_completed: Option<f64>,
    /// Mean bill over all submitted requests, rejected ones counting 0.
    pub mean_cost_fig5_convention: f64,
    pub error: Option<String>,
    #[serde(skip)]
    pub records: Vec<RequestRecord>,
}

impl CellResult {
    fn from_records(scheme: Scheme, load: &str, deadline_s: f64, seed: u64, records: Vec<RequestRecord>) -> Self {
        let count = |o| records.iter().filter(|r| r.outcome == Some(o)).count();
        let submitted = records.len();
        let completed = count(Outcome::Completed);
        let cost = |r: &RequestRecord| r.bill.as_ref().map_or(0.0, |b| b.cost);
        let completed_cost: f64 = records
            .iter()
            .filter(|r| r.outcome == Some(Outcome::Completed))
            .map(cost)
            .sum();
        let all_cost: f64 = records.iter().map(cost).sum();
        Self {
            scheme,
            load: load.to_string(),
            deadline_s,
            seed,
            submitted,
            completed,
            rejected: count(Outcome::RejectedInfeasible),
            missed: count(Outcome::DeadlineMissed),
            success_ratio: if submitted == 0 { 1.0 } else { completed as f64 / submitted as f64 },
            mean_cost_completed: (completed > 0).then(|| completed_cost / completed as f64),
            mean_cost_fig5_convention: if submitted == 0 { 0.0 } else { all_cost / submitted as f64 },
            error: None,
            records,
        }
    }

    fn failed(scheme: Scheme, load: &str, deadline_s: f64, seed: u64, error: String) -> Self {
        Self {
            scheme,
            load: load.to_string(),
            deadline_s,
            seed,
            submitted: 0,
            completed: 0,
            rejected: 0,
            missed: 0,
            success_ratio: f64::NAN,
            mean_cost_completed: None,
            mean_cost_fig5_convention: f64::NAN,
            error: Some(error),
            records: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResults {
    pub spec: SweepSpec,
    /// Ordered by scheme, load level (spec order), deadline, seed (spec order).
    pub cells: Vec<CellResult>,
}

/// Scenario configured for one cell.
pub fn cell_scenario(base: &Scenario, scheme: Scheme, utilization: f64, deadline_s: f64, seed: u64) -> Scenario {
    let mut s = base.clone();
    s.config.scheme = scheme;
    s.set_background_utilization(utilization);
    s.set_performance_deadline(deadline_s);
    s.rng_seed = seed;
    s
}

pub fn run_cell(base: &Scenario, scheme: Scheme, load: &LoadLevel, deadline_s: f64, seed: u64) -> CellResult {
    let s = cell_scenario(base, scheme, load.utilization, deadline_s, seed);
    match Engine::new(&s).and_then(Engine::run) {
        Ok(report) => CellResult::from_records(scheme, &load.name, deadline_s, seed, report.records),
        Err(e) => {
            log::error!("cell {} {} {} {}: {e}", scheme.as_str(), load.name, deadline_s, seed);
            CellResult::failed(scheme, &load.name, deadline_s, seed, e.to_string())
        }
    }
}

/// Runs every cell (in parallel) and returns them in a fixed order.
pub fn run_sweep(base: &Scenario, spec: &SweepSpec) -> Result<SweepResults, SweepError> {
    spec.validate()?;
    base.validate()
        .map_err(|v| SweepError::Invalid(format!("scenario: {}", v.join("; "))))?;
    let mut keys = Vec::with_capacity(spec.cell_count());
    for &scheme in &spec.schemes {
        for load in &spec.load_levels {
            for &d in &spec.deadlines {
                for &seed in &spec.seeds {
                    keys.push((scheme, load, d, seed));
                }
            }
        }
    }
    let cells = keys
        .par_iter()
        .map(|&(scheme, load, d, seed)| run_cell(base, scheme, load, d, seed))
        .collect();
    Ok(SweepResults {
        spec: spec.clone(),
        cells,
    })
}

fn fmt(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        String::new()
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_default()
}

fn mean_stdev(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (Some(mean), Some(0.0));
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some(var.sqrt()))
}

impl SweepResults {
    /// Per-seed rows, each group followed by `mean` and `stdev` rows over
    /// its successful seeds.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), SweepError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_COLUMNS)?;
        for group in self.cells.chunk_by(|a, b| (a.scheme, &a.load, a.deadline_s) == (b.scheme, &b.load, b.deadline_s)) {
            for c in group {
                w.write_record([
                    c.scheme.as_str().to_string(),
                    c.load.clone(),
                    fmt(c.deadline_s),
                    c.seed.to_string(),
                    c.submitted.to_string(),
                    c.completed.to_string(),
                    c.rejected.to_string(),
                    c.missed.to_string(),
                    fmt(c.success_ratio),
                    opt(c.mean_cost_completed),
                    fmt(c.mean_cost_fig5_convention),
                ])?;
            }
            let ok: Vec<&CellResult> = group.iter().filter(|c| c.error.is_none()).collect();
            let stat = |f: &dyn Fn(&CellResult) -> Option<f64>| {
                mean_stdev(&ok.iter().filter_map(|c| f(c)).collect::<Vec<_>>())
            };
            let cols: [(Option<f64>, Option<f64>); 7] = [
                stat(&|c| Some(c.submitted as f64)),
                stat(&|c| Some(c.completed as f64)),
                stat(&|c| Some(c.rejected as f64)),
                stat(&|c| Some(c.missed as f64)),
                stat(&|c| Some(c.success_ratio)),
                stat(&|c| c.mean_cost_completed),
                stat(&|c| Some(c.mean_cost_fig5_convention)),
            ];
            let head = &group[0];
            for (label, pick) in [("mean", 0usize), ("stdev", 1)] {
                let mut row = vec![
                    head.scheme.as_str().to_string(),
                    head.load.clone(),
                    fmt(head.deadline_s),
                    label.to_string(),
                ];
                row.extend(cols.iter().map(|c| opt(if pick == 0 { c.0 } else { c.1 })));
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn cell(&self, scheme: Scheme, load: &str, deadline_s: f64, seed: u64) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.scheme == scheme && c.load == load && c.deadline_s == deadline_s && c.seed == seed)
    }
}
