//! Transmission-time estimates and least-latency path search over a view.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use crate::engine::link::link_transfer_time;
use crate::ids::{LinkId, RouterId};
use crate::model::Path;
use crate::sync::GlobalView;
use crate::topology::Topology;

use super::PlanError;

/// Which queue occupancy a planner assumes on each directed link.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueueModel {
    /// Queues as reported in the view.
    Reported,
    /// Every queue empty.
    Ignored,
}

/// Queue occupancy seen by the path search: the view (or nothing) plus bytes
/// the plan under construction has already put on each directed link.
#[derive(Debug, Clone, Copy)]
pub struct LinkLoad<'a> {
    pub view: &'a GlobalView,
    pub model: QueueModel,
    pub own: Option<&'a [u64]>,
}

impl<'a> LinkLoad<'a> {
    pub fn new(view: &'a GlobalView, model: QueueModel) -> Self {
        Self { view, model, own: None }
    }

    pub fn with_own(self, own: &'a [u64]) -> Self {
        Self { own: Some(own), ..self }
    }

    pub fn queued(&self, topo: &Topology, link: LinkId, from: RouterId) -> u64 {
        let base = match self.model {
            QueueModel::Reported => self.view.queued_bytes(link, from),
            QueueModel::Ignored => 0,
        };
        let own = self
            .own
            .and_then(|own| topo.directed_index(link, from).map(|i| own[i]))
            .unwrap_or(0);
        base + own
    }
}

pub(crate) fn hop_time(
    topo: &Topology,
    load: &LinkLoad<'_>,
    from: RouterId,
    to: RouterId,
    payload_bytes: u64,
) -> Result<f64, PlanError> {
    let link = topo
        .link_between(from, to)
        .ok_or(PlanError::NonAdjacentHop { from, to })?;
    Ok(link_transfer_time(
        payload_bytes,
        link,
        load.queued(topo, link.id, from),
    ))
}

/// Sum of per-hop transfer times of `payload_bytes` along `path`.
pub fn estimate_path_with(
    topo: &Topology,
    load: &LinkLoad<'_>,
    path: &Path,
    payload_bytes: u64,
) -> Result<f64, PlanError> {
    let mut total = 0.0;
    for (u, v) in path.hops() {
        total += hop_time(topo, load, u, v, payload_bytes)?;
    }
    Ok(total)
}

#[derive(Debug, Clone)]
struct Label {
    latency: f64,
    routers: Vec<RouterId>,
}

impl Label {
    // Lexicographic on (latency, hop count, router sequence).
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.latency
            .total_cmp(&other.latency)
            .then(self.routers.len().cmp(&other.routers.len()))
            .then_with(|| self.routers.cmp(&other.routers))
    }
}

impl PartialEq for Label {
    fn eq(&self, other: &Self) -> bool {
        self.key_cmp(other) == Ordering::Equal
    }
}

impl Eq for Label {}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Label {
    // BinaryHeap is a max-heap; invert to pop the smallest label.
    fn cmp(&self, other: &Self) -> Ordering {
        other.key_cmp(self)
    }
}

/// Least-latency simple path from `src` to `dst` for a payload of
/// `payload_bytes`. Ties go to fewer hops, then the lexicographically smaller
/// router sequence. `src == dst` yields the empty path.
pub fn least_latency_path(
    topo: &Topology,
    load: &LinkLoad<'_>,
    src: RouterId,
    dst: RouterId,
    payload_bytes: u64,
) -> Result<Path, PlanError> {
    if !topo.has_router(src) {
        return Err(PlanError::UnknownRouter(src));
    }
    if !topo.has_router(dst) {
        return Err(PlanError::UnknownRouter(dst));
    }
    if src == dst {
        return Ok(Path::empty());
    }
    let mut settled = HashSet::new();
    let mut heap = BinaryHeap::new();
    heap.push(Label {
        latency: 0.0,
        routers: vec![src],
    });
    while let Some(label) = heap.pop() {
        let u = *label.routers.last().unwrap();
        if !settled.insert(u) {
            continue;
        }
        if u == dst {
            return Ok(Path(label.routers));
        }
        for &(v, link) in topo.neighbors(u) {
            if settled.contains(&v) {
                continue;
            }
            let link = topo.link(link).expect("adjacency references known links");
            let w = link_transfer_time(payload_bytes, link, load.queued(topo, link.id, u));
            let mut routers = label.routers.clone();
            routers.push(v);
            heap.push(Label {
                latency: label.latency + w,
                routers,
            });
        }
    }
    Err(PlanError::Unreachable { src, dst })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::LinkId;
    use crate::sync::CncStatePacket;
    use crate::topology::{Link, TierTable};
    use std::collections::BTreeMap;

    /// 0 - 1 - 3 and 0 - 2 - 3, all 1 Gbps, no propagation delay.
    fn diamond() -> Topology {
        let l = |id, a, b| Link {
            id: LinkId(id),
            a: RouterId(a),
            b: RouterId(b),
            bandwidth_bps: 1e9,
            prop_delay_s: 0.0,
        };
        Topology::new(
            (0..4).map(RouterId),
            vec![l(0, 0, 1), l(1, 1, 3), l(2, 0, 2), l(3, 2, 3)],
            vec![],
            vec![],
            TierTable::default(),
        )
    }

    fn report(origin: u32, link: u32, q: u64) -> CncStatePacket {
        CncStatePacket {
            origin: RouterId(origin),
            seq: 1,
            sampled_at_s: 0.0,
            link_reports: BTreeMap::from([(LinkId(link), q)]),
            cnode_reports: BTreeMap::new(),
        }
    }

    fn p(rs: &[u32]) -> Path {
        Path(rs.iter().copied().map(RouterId).collect())
    }

    #[test]
    fn estimate_examples() {
        let topo = diamond();
        let mut view = GlobalView::new();
        let load = LinkLoad::new(&view, QueueModel::Reported);
        assert_eq!(estimate_path_with(&topo, &load, &Path::empty(), 1).unwrap(), 0.0);
        assert_eq!(estimate_path_with(&topo, &load, &p(&[0, 1]), 125_000_000).unwrap(), 1.0);

        view.apply(report(1, 1, 125_000_000));
        let load = LinkLoad::new(&view, QueueModel::Reported);
        assert_eq!(estimate_path_with(&topo, &load, &p(&[0, 1, 3]), 125_000_000).unwrap(), 3.0);
        // The reverse direction has its own (empty) queue.
        assert_eq!(estimate_path_with(&topo, &load, &p(&[3, 1, 0]), 125_000_000).unwrap(), 2.0);
        let blind = LinkLoad::new(&view, QueueModel::Ignored);
        assert_eq!(estimate_path_with(&topo, &blind, &p(&[0, 1, 3]), 125_000_000).unwrap(), 2.0);
    }

    #[test]
    fn non_adjacent_hop_is_an_error() {
        let topo = diamond();
        let view = GlobalView::new();
        let load = LinkLoad::new(&view, QueueModel::Reported);
        assert_eq!(
            estimate_path_with(&topo, &load, &p(&[0, 3]), 1),
            Err(PlanError::NonAdjacentHop { from: RouterId(0), to: RouterId(3) })
        );
    }

    #[test]
    fn search_examples() {
        let topo = diamond();
        let mut view = GlobalView::new();
        let load = LinkLoad::new(&view, QueueModel::Reported);
        assert_eq!(least_latency_path(&topo, &load, RouterId(2), RouterId(2), 1).unwrap(), Path::empty());
        // Symmetric and idle: lexicographically smaller route.
        assert_eq!(least_latency_path(&topo, &load, RouterId(0), RouterId(3), 1000).unwrap(), p(&[0, 1, 3]));

        view.apply(report(1, 1, 10_000_000));
        let load = LinkLoad::new(&view, QueueModel::Reported);
        assert_eq!(least_latency_path(&topo, &load, RouterId(0), RouterId(3), 1000).unwrap(), p(&[0, 2, 3]));
        let blind = LinkLoad::new(&view, QueueModel::Ignored);
        assert_eq!(least_latency_path(&topo, &blind, RouterId(0), RouterId(3), 1000).unwrap(), p(&[0, 1, 3]));
    }

    #[test]
    fn own_bytes_steer_later_fragments() {
        let topo = diamond();
        let view = GlobalView::new();
        let mut own = vec![0u64; topo.directed_count()];
        own[topo.directed_index(LinkId(0), RouterId(0)).unwrap()] = 5_000_000;
        let load = LinkLoad::new(&view, QueueModel::Ignored).with_own(&own);
        assert_eq!(least_latency_path(&topo, &load, RouterId(0), RouterId(3), 1000).unwrap(), p(&[0, 2, 3]));
    }

    #[test]
    fn unreachable_destination() {
        let topo = Topology::new([RouterId(0), RouterId(1)], vec![], vec![], vec![], TierTable::default());
        let view = GlobalView::new();
        let load = LinkLoad::new(&view, QueueModel::Reported);
        assert_eq!(
            least_latency_path(&topo, &load, RouterId(0), RouterId(1), 1),
            Err(PlanError::Unreachable { src: RouterId(0), dst: RouterId(1) })
        );
    }
}
