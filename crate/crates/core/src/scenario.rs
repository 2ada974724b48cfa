//! Scenario files: topology, services, requests and simulation knobs as one
//! JSON document.

use std::collections::BTreeSet;
use std::path::Path as FsPath;

use serde::{Deserialize, Serialize};

use crate::harness::workload::{generate_workload, WorkloadSpec};
use crate::ids::{LinkId, RouterId};
use crate::model::{Level, RawRequest};
use crate::planner::{BaselineObjective, PlannerConfig, Scheme};
use crate::regularize::{Regularizer, ResourceClass, DEFAULT_DEADLINE_S};
use crate::topology::{validate_topology, Cnode, Link, ServiceDescriptor, TierTable, Topology};

/// Where a planning router gets its view from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewMode {
    /// Each router plans with the view assembled from flooded CNC packets.
    #[default]
    Distributed,
    /// Views are read from live state at planning time and no CNC traffic
    /// is generated.
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Directions {
    #[default]
    Both,
    AToB,
    BToA,
}

/// Poisson bursts of bulk bytes on one link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackgroundLoad {
    pub link: LinkId,
    pub burst_bytes: u64,
    /// Mean offered load as a fraction of link bandwidth, per direction.
    pub utilization: f64,
    #[serde(default)]
    pub directions: Directions,
}

fn default_period() -> f64 {
    0.1
}
fn default_cnc_bytes() -> u64 {
    1500
}
fn default_deadline() -> f64 {
    DEFAULT_DEADLINE_S
}
fn default_max_split() -> usize {
    PlannerConfig::default().max_split
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    #[serde(default = "default_period")]
    pub cnc_period_s: f64,
    #[serde(default = "default_cnc_bytes")]
    pub cnc_packet_bytes: u64,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default)]
    pub view_mode: ViewMode,
    #[serde(default = "default_deadline")]
    pub default_deadline_s: f64,
    #[serde(default = "default_max_split")]
    pub max_split: usize,
    #[serde(default)]
    pub baseline_objective: BaselineObjective,
    /// Abort with `HorizonExceeded` if an event is due after this time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_time_s: Option<f64>,
    /// Keep broadcasting and injecting background load until at least this
    /// time even without outstanding requests.
    #[serde(default)]
    pub cnc_min_horizon_s: f64,
}

fn default_scheme() -> Scheme {
    Scheme::Cnc
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            cnc_period_s: default_period(),
            cnc_packet_bytes: default_cnc_bytes(),
            scheme: Scheme::Cnc,
            view_mode: ViewMode::Distributed,
            default_deadline_s: DEFAULT_DEADLINE_S,
            max_split: default_max_split(),
            baseline_objective: BaselineObjective::MinCost,
            max_time_s: None,
            cnc_min_horizon_s: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub routers: Vec<RouterId>,
    pub links: Vec<Link>,
    pub cnodes: Vec<Cnode>,
    #[serde(default)]
    pub tiers: TierTable,
    pub services: Vec<ServiceDescriptor>,
    #[serde(default)]
    pub resource_classes: Vec<ResourceClass>,
    #[serde(default)]
    pub requests: Vec<RawRequest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workload: Option<WorkloadSpec>,
    #[serde(default)]
    pub background_load: Vec<BackgroundLoad>,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(flatten)]
    pub config: SimConfig,
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed scenario: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid scenario:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: impl AsRef<FsPath>) -> Result<Self, ScenarioError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Parses and validates.
    pub fn load(path: impl AsRef<FsPath>) -> Result<Self, ScenarioError> {
        let s = Self::from_path(path)?;
        s.validate().map_err(ScenarioError::Invalid)?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn topology(&self) -> Topology {
        Topology::new(
            self.routers.iter().copied(),
            self.links.clone(),
            self.cnodes.clone(),
            self.services.clone(),
            self.tiers,
        )
    }

    pub fn regularizer(&self) -> Regularizer {
        Regularizer::new(self.config.default_deadline_s, self.resource_classes.clone())
    }

    pub fn planner_config(&self) -> PlannerConfig {
        PlannerConfig {
            max_split: self.config.max_split,
            baseline_objective: self.config.baseline_objective,
        }
    }

    /// Explicit requests followed by the generated workload (ids continue
    /// after the largest explicit id), sorted by submit time then id.
    pub fn materialize_requests(&self) -> Vec<RawRequest> {
        let mut out = self.requests.clone();
        if let Some(w) = &self.workload {
            let first = self.requests.iter().map(|r| r.id.0 + 1).max().unwrap_or(0);
            out.extend(generate_workload(w, &self.routers, first, self.rng_seed));
        }
        out.sort_by(|a, b| a.submit_time_s.total_cmp(&b.submit_time_s).then(a.id.cmp(&b.id)));
        out
    }

    /// Sets the deadline of every Performance-level request, including the
    /// generated workload.
    pub fn set_performance_deadline(&mut self, deadline_s: f64) {
        for r in &mut self.requests {
            if r.level == Level::Performance {
                r.deadline_s = Some(deadline_s);
            }
        }
        if let Some(w) = &mut self.workload {
            w.deadline_s = deadline_s;
        }
    }

    pub fn set_background_utilization(&mut self, utilization: f64) {
        for b in &mut self.background_load {
            b.utilization = utilization;
        }
    }

    /// Every problem with the scenario, one message each.
    pub fn validate(&self) -> Result<(), Vec<String>> {
        let topo = self.topology();
        let mut issues: Vec<String> = match validate_topology(&topo) {
            Ok(()) => Vec::new(),
            Err(v) => v.iter().map(ToString::to_string).collect(),
        };

        let c = &self.config;
        if !(c.cnc_period_s > 0.0 && c.cnc_period_s.is_finite()) {
            issues.push(format!("cnc_period_s must be positive, got {}", c.cnc_period_s));
        }
        if c.cnc_packet_bytes == 0 {
            issues.push("cnc_packet_bytes must be positive".into());
        }
        if !(c.default_deadline_s > 0.0) {
            issues.push("default_deadline_s must be positive".into());
        }
        if c.max_split == 0 {
            issues.push("max_split must be at least 1".into());
        }
        if let Some(t) = c.max_time_s {
            if !(t > 0.0) {
                issues.push("max_time_s must be positive".into());
            }
        }

        for class in &self.resource_classes {
            if topo.service(class.service).is_none() {
                issues.push(format!("resource class maps to unknown service {}", class.service));
            }
        }

        let regularizer = self.regularizer();
        let mut ids = BTreeSet::new();
        for r in &self.requests {
            if !ids.insert(r.id) {
                issues.push(format!("duplicate identifier {}", r.id));
            }
            if !topo.has_router(r.ingress) {
                issues.push(format!("{}: unknown ingress router {}", r.id, r.ingress));
            }
            if !(r.submit_time_s >= 0.0 && r.submit_time_s.is_finite()) {
                issues.push(format!("{}: submit time must be non-negative", r.id));
            }
            match regularizer.regularize(r) {
                Ok(reg) => {
                    if topo.service(reg.requirement.service()).is_none() {
                        issues.push(format!("{}: unknown service {}", r.id, reg.requirement.service()));
                    }
                }
                Err(e) => issues.push(e.to_string()),
            }
        }

        if let Some(w) = &self.workload {
            if !(w.arrival_rate_per_s >= 0.0 && w.horizon_s >= 0.0 && w.start_s >= 0.0) {
                issues.push("workload rate, start and horizon must be non-negative".into());
            }
            if w.task_count == 0 {
                issues.push("workload task_count must be at least 1".into());
            }
            if !(w.deadline_s > 0.0) {
                issues.push("workload deadline_s must be positive".into());
            }
            if topo.service(w.service).is_none() {
                issues.push(format!("workload uses unknown service {}", w.service));
            }
            for r in &w.ingress {
                if !topo.has_router(*r) {
                    issues.push(format!("workload ingress {r} is not a router"));
                }
            }
        }

        for b in &self.background_load {
            if topo.link(b.link).is_none() {
                issues.push(format!("background load on unknown link {}", b.link));
            }
            if b.burst_bytes == 0 {
                issues.push(format!("background load on {}: burst_bytes must be positive", b.link));
            }
            if !(b.utilization >= 0.0 && b.utilization < 1.0) {
                issues.push(format!("background load on {}: utilization must be in [0, 1)", b.link));
            }
        }

        if issues.is_empty() {
            Ok(())
        } else {
            Err(issues)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "routers": [0, 1],
        "links": [{"id": 0, "a": 0, "b": 1, "bandwidth_bps": 1e9}],
        "cnodes": [{"id": 0, "router": 1, "tier": "strong", "deployments": {"0": 1}}],
        "services": [{"id": 0, "input_bytes_per_task": 1000, "output_bytes_per_task": 10, "work_wu_per_task": 2.0}],
        "requests": [{"id": 0, "level": "performance", "service": 0, "task_count": 4,
                      "deadline_s": 20.0, "ingress": 0, "submit_time_s": 0.0}]
    }"#;

    #[test]
    fn minimal_scenario_parses_with_defaults() {
        let s = Scenario::from_json(MINIMAL).unwrap();
        assert_eq!(s.config, SimConfig::default());
        assert_eq!(s.tiers, TierTable::default());
        assert_eq!(s.links[0].prop_delay_s, 0.0);
        s.validate().unwrap();
        let back = Scenario::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn validation_collects_every_problem() {
        let mut s = Scenario::from_json(MINIMAL).unwrap();
        s.links[0].bandwidth_bps = 0.0;
        s.requests[0].ingress = RouterId(9);
        s.config.cnc_period_s = 0.0;
        let issues = s.validate().unwrap_err();
        assert!(issues.iter().any(|i| i.contains("non-positive bandwidth")), "{issues:?}");
        assert!(issues.iter().any(|i| i.contains("unknown ingress")));
        assert!(issues.iter().any(|i| i.contains("cnc_period_s")));
    }

    #[test]
    fn knobs_are_read() {
        let text = MINIMAL.replacen('{', r#"{"scheme": "computing_first", "view_mode": "oracle", "cnc_period_s": 0.5, "max_split": 1,"#, 1);
        let s = Scenario::from_json(&text).unwrap();
        assert_eq!(s.config.scheme, Scheme::ComputingFirst);
        assert_eq!(s.config.view_mode, ViewMode::Oracle);
        assert_eq!(s.config.cnc_period_s, 0.5);
        assert_eq!(s.planner_config().max_split, 1);
    }

    #[test]
    fn generated_requests_follow_explicit_ones() {
        let mut s = Scenario::from_json(MINIMAL).unwrap();
        s.workload = Some(WorkloadSpec {
            arrival_rate_per_s: 1.0,
            start_s: 0.0,
            horizon_s: 30.0,
            service: crate::ids::ServiceId(0),
            task_count: 2,
            deadline_s: 5.0,
            ingress: vec![],
        });
        s.set_performance_deadline(7.0);
        let reqs = s.materialize_requests();
        assert!(reqs.len() > 1);
        assert!(reqs.iter().all(|r| r.deadline_s == Some(7.0)));
        let ids: BTreeSet<_> = reqs.iter().map(|r| r.id).collect();
        assert_eq!(ids.len(), reqs.len());
        assert!(reqs.windows(2).all(|w| w[0].submit_time_s <= w[1].submit_time_s));
    }
}
