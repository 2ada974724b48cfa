//! Global view maintenance: status perception, CNC packet flooding and the
//! per-router view built from received packets.
//!
//! Every router periodically snapshots its egress link queues and the
//! backlog of the compute nodes attached to it, stamps the snapshot with a
//! per-origin sequence number and floods it. Receivers keep only the highest
//! sequence number per origin, so the view is order-independent.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::ids::{CnodeId, LinkId, RouterId, ServiceId};
use crate::topology::{Cnode, Topology};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SyncError {
    #[error("no view entry for origin {0}")]
    UnknownOrigin(RouterId),
    #[error("broadcast period must be positive, got {0}")]
    NonPositivePeriod(f64),
}

/// Status of one compute node as seen by its router.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnodeReport {
    pub deployments: BTreeMap<ServiceId, u32>,
    pub backlog_wu: BTreeMap<ServiceId, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CncStatePacket {
    pub origin: RouterId,
    pub seq: u64,
    pub sampled_at_s: f64,
    /// Bytes queued on the origin's egress side of each adjacent link.
    pub link_reports: BTreeMap<LinkId, u64>,
    pub cnode_reports: BTreeMap<CnodeId, CnodeReport>,
}

/// Live state a router can observe locally.
pub trait LocalStatus {
    fn egress_queued_bytes(&self, link: LinkId, from: RouterId) -> u64;
    fn cnode_report(&self, cnode: &Cnode, now: f64) -> CnodeReport;
}

/// Builds the status packet of `router` without touching any counter.
pub fn snapshot(
    topo: &Topology,
    status: &impl LocalStatus,
    router: RouterId,
    now: f64,
    seq: u64,
) -> CncStatePacket {
    let link_reports = topo
        .neighbors(router)
        .iter()
        .map(|&(_, link)| (link, status.egress_queued_bytes(link, router)))
        .collect();
    let cnode_reports = topo
        .cnodes_at(router)
        .map(|c| (c.id, status.cnode_report(c, now)))
        .collect();
    CncStatePacket {
        origin: router,
        seq,
        sampled_at_s: now,
        link_reports,
        cnode_reports,
    }
}

/// A fixed status snapshot, for planning outside a running simulation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StaticStatus {
    /// Queue per directed link `(link, from)`; absent means empty.
    pub queued: BTreeMap<(LinkId, RouterId), u64>,
    /// Backlog per `(cnode, service)`; absent means empty.
    pub backlog: BTreeMap<(CnodeId, ServiceId), f64>,
}

impl LocalStatus for StaticStatus {
    fn egress_queued_bytes(&self, link: LinkId, from: RouterId) -> u64 {
        self.queued.get(&(link, from)).copied().unwrap_or(0)
    }

    fn cnode_report(&self, cnode: &Cnode, _now: f64) -> CnodeReport {
        CnodeReport {
            deployments: cnode.deployments.clone(),
            backlog_wu: cnode
                .deployments
                .keys()
                .map(|&s| (s, self.backlog.get(&(cnode.id, s)).copied().unwrap_or(0.0)))
                .collect(),
        }
    }
}

/// Hands out per-origin sequence numbers.
#[derive(Debug, Clone, Default)]
pub struct Perceiver {
    last_seq: BTreeMap<RouterId, u64>,
}

impl Perceiver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn perceive(
        &mut self,
        topo: &Topology,
        status: &impl LocalStatus,
        router: RouterId,
        now: f64,
    ) -> CncStatePacket {
        let seq = self.last_seq.entry(router).or_insert(0);
        *seq += 1;
        snapshot(topo, status, router, now, *seq)
    }
}

/// Fixed-period broadcast timer. Emission `k` (0-based) happens at
/// `k * period` and carries sequence number `k + 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BroadcastSchedule {
    period_s: f64,
}

impl BroadcastSchedule {
    pub fn new(period_s: f64) -> Result<Self, SyncError> {
        if period_s > 0.0 && period_s.is_finite() {
            Ok(Self { period_s })
        } else {
            Err(SyncError::NonPositivePeriod(period_s))
        }
    }

    pub fn period_s(&self) -> f64 {
        self.period_s
    }

    pub fn tick_time(&self, k: u64) -> f64 {
        k as f64 * self.period_s
    }

    /// `(seq, time)` of every emission strictly before `horizon_s`.
    pub fn emissions_before(&self, horizon_s: f64) -> impl Iterator<Item = (u64, f64)> + '_ {
        (0u64..)
            .map(|k| (k + 1, self.tick_time(k)))
            .take_while(move |&(_, t)| t < horizon_s)
    }
}

/// Duplicate suppression for flooding: a router forwards each
/// `(origin, seq)` at most once and never an older one.
#[derive(Debug, Clone, Default)]
pub struct FloodFilter {
    latest: BTreeMap<(RouterId, RouterId), u64>,
}

impl FloodFilter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns true if `at` has not yet accepted `(origin, seq)` or newer.
    pub fn accept(&mut self, at: RouterId, origin: RouterId, seq: u64) -> bool {
        let latest = self.latest.entry((at, origin)).or_insert(0);
        if seq > *latest {
            *latest = seq;
            true
        } else {
            false
        }
    }
}

/// Neighbours a flooded packet is forwarded to: all but the one it came from.
pub fn flood_targets(topo: &Topology, at: RouterId, arrived_from: Option<RouterId>) -> Vec<RouterId> {
    topo.neighbors(at)
        .iter()
        .map(|&(n, _)| n)
        .filter(|&n| Some(n) != arrived_from)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectoryEntry {
    pub cnode: CnodeId,
    pub replicas: u32,
    pub backlog_wu: f64,
}

/// A router's picture of the whole system: the latest status packet of every
/// origin it has heard from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GlobalView {
    entries: BTreeMap<RouterId, Arc<CncStatePacket>>,
}

impl GlobalView {
    pub fn new() -> Self {
        Self::default()
    }

    /// A view holding a snapshot of every router taken at `now`, with
    /// sequence number 0 so that any perceived packet supersedes it.
    pub fn fresh(topo: &Topology, status: &impl LocalStatus, now: f64) -> Self {
        let mut view = Self::new();
        for r in topo.routers() {
            view.apply(snapshot(topo, status, r, now, 0));
        }
        view
    }

    /// Stores `packet` if it is newer than what is held for its origin.
    /// Returns whether the view changed.
    pub fn apply(&mut self, packet: impl Into<Arc<CncStatePacket>>) -> bool {
        let packet = packet.into();
        match self.entries.get(&packet.origin) {
            Some(cur) if cur.seq >= packet.seq => false,
            _ => {
                self.entries.insert(packet.origin, packet);
                true
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, origin: RouterId) -> Option<&CncStatePacket> {
        self.entries.get(&origin).map(Arc::as_ref)
    }

    pub fn entries(&self) -> impl Iterator<Item = &CncStatePacket> {
        self.entries.values().map(Arc::as_ref)
    }

    pub fn staleness(&self, origin: RouterId, now: f64) -> Result<f64, SyncError> {
        self.entry(origin)
            .map(|p| now - p.sampled_at_s)
            .ok_or(SyncError::UnknownOrigin(origin))
    }

    /// Reported queue on `link` in the direction leaving `from`; zero when
    /// `from` has not reported.
    pub fn queued_bytes(&self, link: LinkId, from: RouterId) -> u64 {
        self.entries
            .get(&from)
            .and_then(|p| p.link_reports.get(&link))
            .copied()
            .unwrap_or(0)
    }

    /// Reported queue per directed link `(link, from)`.
    pub fn congestion_map(&self) -> BTreeMap<(LinkId, RouterId), u64> {
        self.entries
            .values()
            .flat_map(|p| p.link_reports.iter().map(|(&l, &q)| ((l, p.origin), q)))
            .collect()
    }

    pub fn cnode_report(&self, cnode: CnodeId) -> Option<&CnodeReport> {
        self.entries
            .values()
            .find_map(|p| p.cnode_reports.get(&cnode))
    }

    /// Where each service is deployed, per the stored reports.
    pub fn service_directory(&self) -> BTreeMap<ServiceId, Vec<DirectoryEntry>> {
        let mut dir: BTreeMap<ServiceId, Vec<DirectoryEntry>> = BTreeMap::new();
        for p in self.entries.values() {
            for (&cnode, report) in &p.cnode_reports {
                for (&service, &replicas) in &report.deployments {
                    dir.entry(service).or_default().push(DirectoryEntry {
                        cnode,
                        replicas,
                        backlog_wu: report.backlog_wu.get(&service).copied().unwrap_or(0.0),
                    });
                }
            }
        }
        for hosts in dir.values_mut() {
            hosts.sort_by_key(|e| e.cnode);
        }
        dir
    }

    /// Hosts of one service, sorted by Cnode id.
    pub fn hosts(&self, service: ServiceId) -> Vec<DirectoryEntry> {
        let mut hosts: Vec<DirectoryEntry> = self
            .entries
            .values()
            .flat_map(|p| p.cnode_reports.iter())
            .filter_map(|(&cnode, r)| {
                r.deployments.get(&service).map(|&replicas| DirectoryEntry {
                    cnode,
                    replicas,
                    backlog_wu: r.backlog_wu.get(&service).copied().unwrap_or(0.0),
                })
            })
            .collect();
        hosts.sort_by_key(|e| e.cnode);
        hosts
    }
}
