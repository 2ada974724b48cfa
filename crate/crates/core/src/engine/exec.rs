//! Per compute-node execution: one FIFO work queue per (Cnode, service),
//! drained at `tier rate x replicas`.

use std::collections::BTreeMap;

use crate::ids::{CnodeId, ServiceId};
use crate::topology::Topology;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExecError {
    #[error("{service} is not deployed on {cnode}")]
    ServiceNotDeployed { cnode: CnodeId, service: ServiceId },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceQueue {
    rate_wups: f64,
    busy_until_s: f64,
    admitted_wu: f64,
    completed_wu: f64,
    in_backlog_wu: f64,
}

impl ServiceQueue {
    pub fn new(rate_wups: f64) -> Self {
        Self {
            rate_wups,
            busy_until_s: 0.0,
            admitted_wu: 0.0,
            completed_wu: 0.0,
            in_backlog_wu: 0.0,
        }
    }

    pub fn rate_wups(&self) -> f64 {
        self.rate_wups
    }

    /// Work not yet drained at `now`.
    pub fn backlog_wu(&self, now: f64) -> f64 {
        (self.busy_until_s - now).max(0.0) * self.rate_wups
    }

    /// Queues `work_wu` behind the current backlog; returns its completion time.
    pub fn admit(&mut self, now: f64, work_wu: f64) -> f64 {
        let start = self.busy_until_s.max(now);
        self.busy_until_s = start + work_wu / self.rate_wups;
        self.admitted_wu += work_wu;
        self.in_backlog_wu += work_wu;
        self.busy_until_s
    }

    pub fn complete(&mut self, work_wu: f64) {
        self.completed_wu += work_wu;
        self.in_backlog_wu -= work_wu;
    }

    pub fn admitted_wu(&self) -> f64 {
        self.admitted_wu
    }

    pub fn completed_wu(&self) -> f64 {
        self.completed_wu
    }

    /// Work of admitted jobs whose completion has not fired yet.
    pub fn in_backlog_wu(&self) -> f64 {
        self.in_backlog_wu
    }
}

/// All service queues of a scenario.
#[derive(Debug, Clone, Default)]
pub struct ExecPool {
    queues: BTreeMap<(CnodeId, ServiceId), ServiceQueue>,
}

impl ExecPool {
    pub fn new(topo: &Topology) -> Self {
        let mut queues = BTreeMap::new();
        for c in topo.cnodes() {
            let rate = topo.tiers().get(c.tier).rate_wups;
            for (&s, &replicas) in &c.deployments {
                queues.insert((c.id, s), ServiceQueue::new(rate * replicas as f64));
            }
        }
        Self { queues }
    }

    pub fn queue(&self, cnode: CnodeId, service: ServiceId) -> Option<&ServiceQueue> {
        self.queues.get(&(cnode, service))
    }

    /// Appends work for `service` on `cnode`; returns the completion time.
    pub fn execute(
        &mut self,
        now: f64,
        cnode: CnodeId,
        service: ServiceId,
        work_wu: f64,
    ) -> Result<f64, ExecError> {
        self.queues
            .get_mut(&(cnode, service))
            .map(|q| q.admit(now, work_wu))
            .ok_or(ExecError::ServiceNotDeployed { cnode, service })
    }

    pub fn complete(&mut self, cnode: CnodeId, service: ServiceId, work_wu: f64) {
        if let Some(q) = self.queues.get_mut(&(cnode, service)) {
            q.complete(work_wu);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(CnodeId, ServiceId), &ServiceQueue)> {
        self.queues.iter()
    }
}
