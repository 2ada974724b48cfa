//! Network and compute topology: routers, links, compute nodes, tiers and
//! the services they host.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ids::{CnodeId, LinkId, RouterId, ServiceId};

/// Static description of an undirected link. Queue occupancy is tracked per
/// direction by whoever simulates or observes the link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub id: LinkId,
    pub a: RouterId,
    pub b: RouterId,
    pub bandwidth_bps: f64,
    #[serde(default)]
    pub prop_delay_s: f64,
}

impl Link {
    pub fn other_end(&self, r: RouterId) -> Option<RouterId> {
        if r == self.a {
            Some(self.b)
        } else if r == self.b {
            Some(self.a)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TierKind {
    Weak,
    Medium,
    Strong,
}

impl TierKind {
    pub const ALL: [TierKind; 3] = [TierKind::Weak, TierKind::Medium, TierKind::Strong];

    pub fn as_str(self) -> &'static str {
        match self {
            TierKind::Weak => "weak",
            TierKind::Medium => "medium",
            TierKind::Strong => "strong",
        }
    }
}

impl fmt::Display for TierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TierParams {
    /// Work-units per second for one replica.
    pub rate_wups: f64,
    /// Cost-units per work-unit.
    pub price_per_wu: f64,
}

/// Rate and price of each efficiency tier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TierTable {
    pub weak: TierParams,
    pub medium: TierParams,
    pub strong: TierParams,
}

impl Default for TierTable {
    fn default() -> Self {
        Self {
            weak: TierParams { rate_wups: 1.0, price_per_wu: 1.0 },
            medium: TierParams { rate_wups: 2.0, price_per_wu: 3.0 },
            strong: TierParams { rate_wups: 4.0, price_per_wu: 9.0 },
        }
    }
}

impl TierTable {
    pub fn get(&self, kind: TierKind) -> TierParams {
        match kind {
            TierKind::Weak => self.weak,
            TierKind::Medium => self.medium,
            TierKind::Strong => self.strong,
        }
    }

    /// Multiplies every price by `factor`.
    pub fn scale_prices(mut self, factor: f64) -> Self {
        self.weak.price_per_wu *= factor;
        self.medium.price_per_wu *= factor;
        self.strong.price_per_wu *= factor;
        self
    }
}

/// A computation node. `deployments` maps each hosted service to its replica
/// count; work for a service queues in a single FIFO served by all replicas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cnode {
    pub id: CnodeId,
    pub router: RouterId,
    pub tier: TierKind,
    pub deployments: BTreeMap<ServiceId, u32>,
    /// Work already queued when the simulation starts.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub initial_backlog_wu: BTreeMap<ServiceId, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceDescriptor {
    pub id: ServiceId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub input_bytes_per_task: u64,
    pub output_bytes_per_task: u64,
    pub work_wu_per_task: f64,
}

/// A violated topology invariant.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TopologyIssue {
    #[error("topology has no routers")]
    NoRouters,
    #[error("disconnected: {components} connected components")]
    Disconnected { components: usize },
    #[error("dangling attachment: {cnode} attaches to unknown router {router}")]
    DanglingAttachment { cnode: CnodeId, router: RouterId },
    #[error("link {link} has unknown endpoint {router}")]
    UnknownEndpoint { link: LinkId, router: RouterId },
    #[error("link {link} is a self-loop")]
    SelfLoop { link: LinkId },
    #[error("link {link} duplicates {existing} between the same routers")]
    ParallelLink { link: LinkId, existing: LinkId },
    #[error("duplicate identifier {0}")]
    DuplicateId(String),
    #[error("non-positive bandwidth on link {link}")]
    NonPositiveBandwidth { link: LinkId },
    #[error("negative propagation delay on link {link}")]
    NegativePropDelay { link: LinkId },
    #[error("non-monotone tiers: {0}")]
    NonMonotoneTiers(String),
    #[error("service {service} has a non-positive field")]
    InvalidService { service: ServiceId },
    #[error("{cnode} deploys unknown service {service}")]
    UnknownService { cnode: CnodeId, service: ServiceId },
    #[error("{cnode} deploys {service} with zero replicas")]
    ZeroReplicas { cnode: CnodeId, service: ServiceId },
    #[error("{cnode} has invalid backlog for {service}")]
    InvalidBacklog { cnode: CnodeId, service: ServiceId },
}

/// Immutable network and compute description shared by every component.
#[derive(Debug, Clone)]
pub struct Topology {
    routers: BTreeSet<RouterId>,
    links: Vec<Link>,
    link_index: HashMap<LinkId, usize>,
    pair_index: HashMap<(RouterId, RouterId), usize>,
    adjacency: BTreeMap<RouterId, Vec<(RouterId, LinkId)>>,
    cnodes: BTreeMap<CnodeId, Cnode>,
    services: BTreeMap<ServiceId, ServiceDescriptor>,
    tiers: TierTable,
    // Problems found while indexing (duplicates, parallel links); reported by
    // `validate_topology`.
    build_issues: Vec<TopologyIssue>,
}

impl Topology {
    pub fn new(
        routers: impl IntoIterator<Item = RouterId>,
        links: Vec<Link>,
        cnodes: Vec<Cnode>,
        services: Vec<ServiceDescriptor>,
        tiers: TierTable,
    ) -> Self {
        let mut build_issues = Vec::new();
        let mut router_set = BTreeSet::new();
        for r in routers {
            if !router_set.insert(r) {
                build_issues.push(TopologyIssue::DuplicateId(r.to_string()));
            }
        }

        let mut links = links;
        links.sort_by_key(|l| l.id);
        let mut link_index: HashMap<LinkId, usize> = HashMap::new();
        let mut pair_index: HashMap<(RouterId, RouterId), usize> = HashMap::new();
        let mut adjacency: BTreeMap<RouterId, Vec<(RouterId, LinkId)>> =
            router_set.iter().map(|&r| (r, Vec::new())).collect();
        for (i, l) in links.iter().enumerate() {
            if link_index.insert(l.id, i).is_some() {
                build_issues.push(TopologyIssue::DuplicateId(l.id.to_string()));
                continue;
            }
            if l.a == l.b {
                continue;
            }
            if let Some(&j) = pair_index.get(&(l.a, l.b)) {
                build_issues.push(TopologyIssue::ParallelLink {
                    link: l.id,
                    existing: links[j].id,
                });
                continue;
            }
            pair_index.insert((l.a, l.b), i);
            pair_index.insert((l.b, l.a), i);
            if router_set.contains(&l.a) && router_set.contains(&l.b) {
                adjacency.get_mut(&l.a).unwrap().push((l.b, l.id));
                adjacency.get_mut(&l.b).unwrap().push((l.a, l.id));
            }
        }
        for nbrs in adjacency.values_mut() {
            nbrs.sort();
        }

        let mut cnode_map = BTreeMap::new();
        for c in cnodes {
            let id = c.id;
            if cnode_map.insert(id, c).is_some() {
                build_issues.push(TopologyIssue::DuplicateId(id.to_string()));
            }
        }
        let mut service_map = BTreeMap::new();
        for s in services {
            let id = s.id;
            if service_map.insert(id, s).is_some() {
                build_issues.push(TopologyIssue::DuplicateId(id.to_string()));
            }
        }

        Self {
            routers: router_set,
            links,
            link_index,
            pair_index,
            adjacency,
            cnodes: cnode_map,
            services: service_map,
            tiers,
            build_issues,
        }
    }

    pub fn routers(&self) -> impl Iterator<Item = RouterId> + '_ {
        self.routers.iter().copied()
    }

    pub fn router_count(&self) -> usize {
        self.routers.len()
    }

    pub fn has_router(&self, r: RouterId) -> bool {
        self.routers.contains(&r)
    }

    /// Links sorted by id.
    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, id: LinkId) -> Option<&Link> {
        self.link_index.get(&id).map(|&i| &self.links[i])
    }

    pub fn link_between(&self, u: RouterId, v: RouterId) -> Option<&Link> {
        self.pair_index.get(&(u, v)).map(|&i| &self.links[i])
    }

    /// Dense index of the queue for traffic leaving `from` over `link`.
    pub fn directed_index(&self, link: LinkId, from: RouterId) -> Option<usize> {
        let i = *self.link_index.get(&link)?;
        let l = &self.links[i];
        if from == l.a {
            Some(2 * i)
        } else if from == l.b {
            Some(2 * i + 1)
        } else {
            None
        }
    }

    pub fn directed_count(&self) -> usize {
        2 * self.links.len()
    }

    /// Neighbours of `r` with the connecting link, sorted by neighbour id.
    pub fn neighbors(&self, r: RouterId) -> &[(RouterId, LinkId)] {
        self.adjacency.get(&r).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn cnodes(&self) -> impl Iterator<Item = &Cnode> {
        self.cnodes.values()
    }

    pub fn cnode(&self, id: CnodeId) -> Option<&Cnode> {
        self.cnodes.get(&id)
    }

    pub fn cnodes_at(&self, r: RouterId) -> impl Iterator<Item = &Cnode> {
        self.cnodes.values().filter(move |c| c.router == r)
    }

    pub fn services(&self) -> impl Iterator<Item = &ServiceDescriptor> {
        self.services.values()
    }

    pub fn service(&self, id: ServiceId) -> Option<&ServiceDescriptor> {
        self.services.get(&id)
    }

    pub fn tiers(&self) -> &TierTable {
        &self.tiers
    }

    pub fn with_tiers(mut self, tiers: TierTable) -> Self {
        self.tiers = tiers;
        self
    }

    fn component_count(&self) -> usize {
        let mut seen = BTreeSet::new();
        let mut components = 0;
        for &start in &self.routers {
            if !seen.insert(start) {
                continue;
            }
            components += 1;
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for &(v, _) in self.neighbors(u) {
                    if seen.insert(v) {
                        queue.push_back(v);
                    }
                }
            }
        }
        components
    }
}

fn check_tiers(t: &TierTable, issues: &mut Vec<TopologyIssue>) {
    for kind in TierKind::ALL {
        let p = t.get(kind);
        if !(p.rate_wups > 0.0 && p.rate_wups.is_finite()) {
            issues.push(TopologyIssue::NonMonotoneTiers(format!(
                "{kind} rate must be positive"
            )));
        }
        if !(p.price_per_wu > 0.0 && p.price_per_wu.is_finite()) {
            issues.push(TopologyIssue::NonMonotoneTiers(format!(
                "{kind} price must be positive"
            )));
        }
    }
    for pair in TierKind::ALL.windows(2) {
        let (lo, hi) = (t.get(pair[0]), t.get(pair[1]));
        if lo.rate_wups >= hi.rate_wups {
            issues.push(TopologyIssue::NonMonotoneTiers(format!(
                "rate({}) >= rate({})",
                pair[0], pair[1]
            )));
        }
        if lo.price_per_wu >= hi.price_per_wu {
            issues.push(TopologyIssue::NonMonotoneTiers(format!(
                "price({}) >= price({})",
                pair[0], pair[1]
            )));
        }
    }
}

/// Checks every topology invariant, returning one diagnostic per violation.
pub fn validate_topology(topo: &Topology) -> Result<(), Vec<TopologyIssue>> {
    let mut issues = topo.build_issues.clone();

    if topo.routers.is_empty() {
        issues.push(TopologyIssue::NoRouters);
    }
    for l in &topo.links {
        for r in [l.a, l.b] {
            if !topo.has_router(r) {
                issues.push(TopologyIssue::UnknownEndpoint { link: l.id, router: r });
            }
        }
        if l.a == l.b {
            issues.push(TopologyIssue::SelfLoop { link: l.id });
        }
        if !(l.bandwidth_bps > 0.0 && l.bandwidth_bps.is_finite()) {
            issues.push(TopologyIssue::NonPositiveBandwidth { link: l.id });
        }
        if !(l.prop_delay_s >= 0.0 && l.prop_delay_s.is_finite()) {
            issues.push(TopologyIssue::NegativePropDelay { link: l.id });
        }
    }
    if !topo.routers.is_empty() {
        let components = topo.component_count();
        if components > 1 {
            issues.push(TopologyIssue::Disconnected { components });
        }
    }
    check_tiers(&topo.tiers, &mut issues);
    for s in topo.services.values() {
        if s.input_bytes_per_task == 0
            || s.output_bytes_per_task == 0
            || !(s.work_wu_per_task > 0.0 && s.work_wu_per_task.is_finite())
        {
            issues.push(TopologyIssue::InvalidService { service: s.id });
        }
    }
    for c in topo.cnodes.values() {
        if !topo.has_router(c.router) {
            issues.push(TopologyIssue::DanglingAttachment {
                cnode: c.id,
                router: c.router,
            });
        }
        for (&s, &replicas) in &c.deployments {
            if topo.service(s).is_none() {
                issues.push(TopologyIssue::UnknownService { cnode: c.id, service: s });
            }
            if replicas == 0 {
                issues.push(TopologyIssue::ZeroReplicas { cnode: c.id, service: s });
            }
        }
        for (&s, &wu) in &c.initial_backlog_wu {
            if !c.deployments.contains_key(&s) || !(wu >= 0.0 && wu.is_finite()) {
                issues.push(TopologyIssue::InvalidBacklog { cnode: c.id, service: s });
            }
        }
    }

    if issues.is_empty() {
        Ok(())
    } else {
        Err(issues)
    }
}
