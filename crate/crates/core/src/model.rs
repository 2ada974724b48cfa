//! Requests, routing plans and bills.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::ids::{CnodeId, RequestId, RouterId, ServiceId};

/// Convergence level a client request is expressed at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    /// Client asks for idle CPU/GPU/memory for a usage duration.
    Resource,
    /// Client names a service; no deadline.
    Function,
    /// Client names a service and a deadline.
    Performance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceSpec {
    pub cpu: u32,
    #[serde(default)]
    pub gpu: u32,
    pub memory_gb: f64,
}

impl ResourceSpec {
    pub fn covered_by(&self, other: &ResourceSpec) -> bool {
        self.cpu <= other.cpu && self.gpu <= other.gpu && self.memory_gb <= other.memory_gb
    }
}

/// A request as submitted by a client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRequest {
    pub id: RequestId,
    pub level: Level,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub service: Option<ServiceId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resource: Option<ResourceSpec>,
    pub task_count: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deadline_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub usage_duration_s: Option<f64>,
    pub ingress: RouterId,
    pub submit_time_s: f64,
}

/// What a request needs executed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Requirement {
    Service(ServiceId),
    /// A resource reservation, served by the pseudo-service of the matching
    /// resource class.
    Resource {
        spec: ResourceSpec,
        service: ServiceId,
    },
}

impl Requirement {
    pub fn service(&self) -> ServiceId {
        match *self {
            Requirement::Service(s) => s,
            Requirement::Resource { service, .. } => service,
        }
    }
}

/// The unified (requirement, deadline) form every request is planned in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularizedRequest {
    pub id: RequestId,
    pub requirement: Requirement,
    pub deadline_s: f64,
    pub task_count: u32,
    pub ingress: RouterId,
    pub submit_time_s: f64,
}

/// A router sequence. Empty means source and destination coincide; otherwise
/// it lists both endpoints.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Path(pub Vec<RouterId>);

impl Path {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn routers(&self) -> &[RouterId] {
        &self.0
    }

    pub fn hop_count(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    /// Consecutive (from, to) router pairs.
    pub fn hops(&self) -> impl Iterator<Item = (RouterId, RouterId)> + '_ {
        self.0.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn is_simple(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        self.0.iter().all(|r| seen.insert(*r))
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("[]");
        }
        for (i, r) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("-")?;
            }
            write!(f, "{}", r.0)?;
        }
        Ok(())
    }
}

/// One candidate placement: where a task set runs and how it travels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSchedule {
    pub cnode: CnodeId,
    pub forward_path: Path,
    pub return_path: Path,
    pub predicted_fwd_s: f64,
    pub predicted_wait_s: f64,
    pub predicted_exec_s: f64,
    pub predicted_ret_s: f64,
    pub cost: f64,
}

impl CandidateSchedule {
    pub fn predicted_response_s(&self) -> f64 {
        self.predicted_fwd_s + self.predicted_wait_s + self.predicted_exec_s + self.predicted_ret_s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    /// Contiguous task indices handled by this assignment.
    pub tasks: Range<u32>,
    pub schedule: CandidateSchedule,
}

impl Assignment {
    pub fn task_count(&self) -> u32 {
        self.tasks.end - self.tasks.start
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Feasible,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingPlan {
    pub assignments: Vec<Assignment>,
    pub predicted_response_s: f64,
    pub predicted_cost: f64,
    pub verdict: Verdict,
}

impl RoutingPlan {
    pub fn infeasible() -> Self {
        Self {
            assignments: Vec::new(),
            predicted_response_s: f64::INFINITY,
            predicted_cost: 0.0,
            verdict: Verdict::Infeasible,
        }
    }

    pub fn is_feasible(&self) -> bool {
        self.verdict == Verdict::Feasible
    }

    pub fn cnodes(&self) -> Vec<CnodeId> {
        self.assignments.iter().map(|a| a.schedule.cnode).collect()
    }
}

/// Terminal state of a request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    RejectedInfeasible,
    DeadlineMissed,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Completed => "completed",
            Outcome::RejectedInfeasible => "rejected_infeasible",
            Outcome::DeadlineMissed => "deadline_missed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BillRecord {
    pub request: RequestId,
    pub metered_wu: f64,
    pub cost: f64,
    pub outcome: Outcome,
}
