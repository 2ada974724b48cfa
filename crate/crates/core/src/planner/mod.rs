//! Target Cnode selection and routing path planning.
//!
//! For a regularized request the planner enumerates candidate schedules
//! (every Cnode hosting the required service, plus a proportional split of
//! the tasks over the `k` cheapest hosts for `k = 2..=max_split`), predicts
//! each candidate's response time from the planning router's view, keeps those
//! meeting the deadline and returns the cheapest. Response time is
//!
//! ```text
//! forward transfer + backlog wait + execution + result transfer
//! ```
//!
//! The congestion-aware scheme uses reported link queues; the
//! computing-first baseline assumes every queue is empty.

pub mod path;
pub(crate) mod timeline;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::ids::{CnodeId, RouterId, ServiceId};
use crate::model::{Assignment, CandidateSchedule, Path, RegularizedRequest, RoutingPlan, Verdict};
use crate::sync::{DirectoryEntry, GlobalView};
use crate::topology::{ServiceDescriptor, Topology};

pub use path::{estimate_path_with, least_latency_path, LinkLoad, QueueModel};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlanError {
    #[error("no Cnode hosts {0}")]
    NoSuchService(ServiceId),
    #[error("view has no report for {0}")]
    UnknownCnode(CnodeId),
    #[error("{service} is not deployed on {cnode}")]
    ServiceNotDeployed { cnode: CnodeId, service: ServiceId },
    #[error("{from} and {to} are not adjacent")]
    NonAdjacentHop { from: RouterId, to: RouterId },
    #[error("{dst} is unreachable from {src}")]
    Unreachable { src: RouterId, dst: RouterId },
    #[error("unknown router {0}")]
    UnknownRouter(RouterId),
}

/// Routing scheme used at request arrival.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Joint compute/network planning with reported congestion.
    Cnc,
    /// Baseline: same selection, transmission estimated on idle links.
    ComputingFirst,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Cnc => "cnc",
            Scheme::ComputingFirst => "computing_first",
        }
    }

    fn queue_model(self) -> QueueModel {
        match self {
            Scheme::Cnc => QueueModel::Reported,
            Scheme::ComputingFirst => QueueModel::Ignored,
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cnc" => Ok(Scheme::Cnc),
            "computing_first" | "computing-first" => Ok(Scheme::ComputingFirst),
            other => Err(format!("unknown scheme `{other}` (expected cnc or computing_first)")),
        }
    }
}

/// How the computing-first baseline picks among the plans it believes
/// feasible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineObjective {
    /// Cheapest, like the congestion-aware planner.
    #[default]
    MinCost,
    /// Shortest predicted compute time (wait plus execution, slowest
    /// assignment), then cheapest.
    Fastest,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    /// Largest number of Cnodes a request may be split across. 1 disables
    /// splitting.
    pub max_split: usize,
    pub baseline_objective: BaselineObjective,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            max_split: 3,
            baseline_objective: BaselineObjective::MinCost,
        }
    }
}

/// Wait plus execution of the slowest assignment.
pub fn compute_time(plan: &RoutingPlan) -> f64 {
    plan.assignments
        .iter()
        .map(|a| a.schedule.predicted_wait_s + a.schedule.predicted_exec_s)
        .fold(0.0, f64::max)
}

/// Splits `task_count` tasks proportionally to `weights` (largest remainder,
/// ties to the lower index).
pub fn proportional_partition(task_count: u32, weights: &[f64]) -> Vec<u32> {
    let total: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights
        .iter()
        .map(|w| task_count as f64 * w / total)
        .collect();
    let mut counts: Vec<u32> = quotas.iter().map(|q| q.floor() as u32).collect();
    let assigned: u32 = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take(task_count.saturating_sub(assigned) as usize) {
        counts[i] += 1;
    }
    counts
}

/// Orders feasible plans: cost, then predicted response, then Cnode ids.
pub fn plan_preference(a: &RoutingPlan, b: &RoutingPlan) -> Ordering {
    a.predicted_cost
        .total_cmp(&b.predicted_cost)
        .then(a.predicted_response_s.total_cmp(&b.predicted_response_s))
        .then_with(|| a.cnodes().cmp(&b.cnodes()))
}

#[derive(Debug, Clone)]
pub struct Planner<'t> {
    topo: &'t Topology,
    config: PlannerConfig,
}

impl<'t> Planner<'t> {
    pub fn new(topo: &'t Topology, config: PlannerConfig) -> Self {
        Self { topo, config }
    }

    pub fn topology(&self) -> &'t Topology {
        self.topo
    }

    pub fn config(&self) -> PlannerConfig {
        self.config
    }

    /// `(wait_s, exec_s)` of `work_wu` on `cnode` given the view's backlog.
    pub fn estimate_execution(
        &self,
        view: &GlobalView,
        cnode: CnodeId,
        service: ServiceId,
        work_wu: f64,
    ) -> Result<(f64, f64), PlanError> {
        let report = view.cnode_report(cnode).ok_or(PlanError::UnknownCnode(cnode))?;
        let replicas = *report
            .deployments
            .get(&service)
            .ok_or(PlanError::ServiceNotDeployed { cnode, service })?;
        let backlog = report.backlog_wu.get(&service).copied().unwrap_or(0.0);
        let rate = self.effective_rate(cnode, replicas)?;
        Ok((backlog / rate, work_wu / rate))
    }

    fn effective_rate(&self, cnode: CnodeId, replicas: u32) -> Result<f64, PlanError> {
        let c = self.topo.cnode(cnode).ok_or(PlanError::UnknownCnode(cnode))?;
        Ok(self.topo.tiers().get(c.tier).rate_wups * replicas as f64)
    }

    fn price(&self, cnode: CnodeId) -> f64 {
        self.topo
            .cnode(cnode)
            .map(|c| self.topo.tiers().get(c.tier).price_per_wu)
            .unwrap_or(f64::INFINITY)
    }

    /// Predicted transfer time of `payload_bytes` along `path` using the
    /// view's reported queues.
    pub fn estimate_path(&self, view: &GlobalView, path: &Path, payload_bytes: u64) -> Result<f64, PlanError> {
        estimate_path_with(self.topo, &LinkLoad::new(view, QueueModel::Reported), path, payload_bytes)
    }

    pub fn shortest_latency_path(
        &self,
        view: &GlobalView,
        src: RouterId,
        dst: RouterId,
        payload_bytes: u64,
    ) -> Result<Path, PlanError> {
        least_latency_path(self.topo, &LinkLoad::new(view, QueueModel::Reported), src, dst, payload_bytes)
    }

    pub fn plan(&self, view: &GlobalView, request: &RegularizedRequest) -> Result<RoutingPlan, PlanError> {
        self.plan_with(Scheme::Cnc, view, request)
    }

    pub fn plan_computing_first(
        &self,
        view: &GlobalView,
        request: &RegularizedRequest,
    ) -> Result<RoutingPlan, PlanError> {
        self.plan_with(Scheme::ComputingFirst, view, request)
    }

    pub fn plan_with(
        &self,
        scheme: Scheme,
        view: &GlobalView,
        request: &RegularizedRequest,
    ) -> Result<RoutingPlan, PlanError> {
        let feasible = self
            .candidates(scheme, view, request)?
            .into_iter()
            .filter(|p| p.predicted_response_s <= request.deadline_s);
        let best = match (scheme, self.config.baseline_objective) {
            (Scheme::ComputingFirst, BaselineObjective::Fastest) => {
                feasible.min_by(|a, b| compute_time(a).total_cmp(&compute_time(b)).then_with(|| plan_preference(a, b)))
            }
            _ => feasible.min_by(plan_preference),
        };
        Ok(best.unwrap_or_else(RoutingPlan::infeasible))
    }

    /// Every candidate plan, feasible or not, marked `Feasible` only if it
    /// meets the request's deadline.
    pub fn candidates(
        &self,
        scheme: Scheme,
        view: &GlobalView,
        request: &RegularizedRequest,
    ) -> Result<Vec<RoutingPlan>, PlanError> {
        let service_id = request.requirement.service();
        let service = self
            .topo
            .service(service_id)
            .ok_or(PlanError::NoSuchService(service_id))?;
        if !self.topo.has_router(request.ingress) {
            return Err(PlanError::UnknownRouter(request.ingress));
        }
        let hosts: Vec<DirectoryEntry> = view
            .hosts(service_id)
            .into_iter()
            .filter(|h| h.replicas > 0 && self.topo.cnode(h.cnode).is_some())
            .collect();
        if hosts.is_empty() {
            return Err(PlanError::NoSuchService(service_id));
        }
        let model = scheme.queue_model();

        let mut out = Vec::new();
        for h in &hosts {
            match self.single(view, model, request, service, h) {
                Ok(p) => out.push(p),
                Err(PlanError::Unreachable { .. }) => {}
                Err(e) => return Err(e),
            }
        }

        let mut by_price = hosts.clone();
        by_price.sort_by(|a, b| {
            self.price(a.cnode)
                .total_cmp(&self.price(b.cnode))
                .then(a.cnode.cmp(&b.cnode))
        });
        let max_k = self.config.max_split.min(by_price.len());
        for k in 2..=max_k {
            match self.split(view, model, request, service, &by_price[..k]) {
                Ok(Some(p)) => out.push(p),
                Ok(None) | Err(PlanError::Unreachable { .. }) => {}
                Err(e) => return Err(e),
            }
        }

        for p in &mut out {
            p.verdict = if p.predicted_response_s <= request.deadline_s {
                Verdict::Feasible
            } else {
                Verdict::Infeasible
            };
        }
        Ok(out)
    }

    fn single(
        &self,
        view: &GlobalView,
        model: QueueModel,
        request: &RegularizedRequest,
        service: &ServiceDescriptor,
        host: &DirectoryEntry,
    ) -> Result<RoutingPlan, PlanError> {
        let attach = self.topo.cnode(host.cnode).ok_or(PlanError::UnknownCnode(host.cnode))?.router;
        let n = request.task_count;
        let input = n as u64 * service.input_bytes_per_task;
        let output = n as u64 * service.output_bytes_per_task;
        let load = LinkLoad::new(view, model);

        let forward_path = least_latency_path(self.topo, &load, request.ingress, attach, input)?;
        let return_path = least_latency_path(self.topo, &load, attach, request.ingress, output)?;
        let fwd = estimate_path_with(self.topo, &load, &forward_path, input)?;
        let ret = estimate_path_with(self.topo, &load, &return_path, output)?;
        let work = n as f64 * service.work_wu_per_task;
        let rate = self.effective_rate(host.cnode, host.replicas)?;
        let schedule = CandidateSchedule {
            cnode: host.cnode,
            forward_path,
            return_path,
            predicted_fwd_s: fwd,
            predicted_wait_s: host.backlog_wu / rate,
            predicted_exec_s: work / rate,
            predicted_ret_s: ret,
            cost: work * self.price(host.cnode),
        };
        Ok(RoutingPlan {
            predicted_response_s: schedule.predicted_response_s(),
            predicted_cost: schedule.cost,
            assignments: vec![Assignment { tasks: 0..n, schedule }],
            verdict: Verdict::Feasible,
        })
    }

    /// Tasks spread over `hosts` proportionally to their effective rates.
    /// `None` when fewer than two hosts would receive tasks.
    fn split(
        &self,
        view: &GlobalView,
        model: QueueModel,
        request: &RegularizedRequest,
        service: &ServiceDescriptor,
        hosts: &[DirectoryEntry],
    ) -> Result<Option<RoutingPlan>, PlanError> {
        let rates = hosts
            .iter()
            .map(|h| self.effective_rate(h.cnode, h.replicas))
            .collect::<Result<Vec<_>, _>>()?;
        let counts = proportional_partition(request.task_count, &rates);
        let parts: Vec<(usize, u32)> = counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (i, c))
            .collect();
        if parts.len() < 2 {
            return Ok(None);
        }

        // Paths are chosen in assignment order; each fragment sees the bytes
        // earlier fragments already put on a directed link.
        let mut own_fwd = vec![0u64; self.topo.directed_count()];
        let mut own_ret = vec![0u64; self.topo.directed_count()];
        let mut assignments = Vec::with_capacity(parts.len());
        let mut next_task = 0;
        for &(i, count) in &parts {
            let h = &hosts[i];
            let attach = self.topo.cnode(h.cnode).ok_or(PlanError::UnknownCnode(h.cnode))?.router;
            let input = count as u64 * service.input_bytes_per_task;
            let output = count as u64 * service.output_bytes_per_task;
            let forward_path = least_latency_path(
                self.topo,
                &LinkLoad::new(view, model).with_own(&own_fwd),
                request.ingress,
                attach,
                input,
            )?;
            let return_path = least_latency_path(
                self.topo,
                &LinkLoad::new(view, model).with_own(&own_ret),
                attach,
                request.ingress,
                output,
            )?;
            self.add_own(&mut own_fwd, &forward_path, input);
            self.add_own(&mut own_ret, &return_path, output);
            let work = count as f64 * service.work_wu_per_task;
            assignments.push(Assignment {
                tasks: next_task..next_task + count,
                schedule: CandidateSchedule {
                    cnode: h.cnode,
                    forward_path,
                    return_path,
                    predicted_fwd_s: 0.0,
                    predicted_wait_s: h.backlog_wu / rates[i],
                    predicted_exec_s: work / rates[i],
                    predicted_ret_s: 0.0,
                    cost: work * self.price(h.cnode),
                },
            });
            next_task += count;
        }

        let fragments: Vec<timeline::Fragment<'_>> = assignments
            .iter()
            .map(|a| timeline::Fragment {
                forward: &a.schedule.forward_path,
                ret: &a.schedule.return_path,
                input_bytes: a.task_count() as u64 * service.input_bytes_per_task,
                output_bytes: a.task_count() as u64 * service.output_bytes_per_task,
                wait_s: a.schedule.predicted_wait_s,
                exec_s: a.schedule.predicted_exec_s,
            })
            .collect();
        let times = timeline::replay(self.topo, LinkLoad::new(view, model), &fragments)?;
        let mut response: f64 = 0.0;
        for (a, t) in assignments.iter_mut().zip(&times) {
            a.schedule.predicted_fwd_s = t.arrive_s;
            a.schedule.predicted_ret_s = t.end_s - t.done_s;
            response = response.max(t.end_s);
        }
        let cost = assignments.iter().map(|a| a.schedule.cost).sum();
        Ok(Some(RoutingPlan {
            assignments,
            predicted_response_s: response,
            predicted_cost: cost,
            verdict: Verdict::Feasible,
        }))
    }

    fn add_own(&self, own: &mut [u64], path: &Path, bytes: u64) {
        for (u, v) in path.hops() {
            if let Some(i) = self
                .topo
                .link_between(u, v)
                .and_then(|l| self.topo.directed_index(l.id, u))
            {
                own[i] += bytes;
            }
        }
    }
}
