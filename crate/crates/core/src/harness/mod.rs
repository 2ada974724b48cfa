//! Experiment driver: workloads, sweeps and the canonical scenario.

pub mod workload;
pub mod sweep;
pub mod canonical;
