//! Shared generators and independent oracles for the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use cncroute::engine::link::link_transfer_time;
use cncroute::ids::{CnodeId, LinkId, RequestId, RouterId, ServiceId};
use cncroute::model::{Level, Path, RawRequest, RegularizedRequest, Requirement, RoutingPlan};
use cncroute::planner::Scheme;
use cncroute::scenario::{Scenario, SimConfig, ViewMode};
use cncroute::sync::{GlobalView, StaticStatus};
use cncroute::topology::{Cnode, Link, ServiceDescriptor, TierKind, TierTable, Topology};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SVC: ServiceId = ServiceId(0);

/// A small random network with one request and a status snapshot.
#[derive(Debug, Clone)]
pub struct Case {
    pub scenario: Scenario,
    pub status: StaticStatus,
    pub request: RegularizedRequest,
}

impl Case {
    pub fn topology(&self) -> Topology {
        self.scenario.topology()
    }

    pub fn view(&self, topo: &Topology) -> GlobalView {
        GlobalView::fresh(topo, &self.status, 0.0)
    }

    pub fn service(&self) -> &ServiceDescriptor {
        &self.scenario.services[0]
    }

    pub fn raw_request(&self) -> RawRequest {
        RawRequest {
            id: self.request.id,
            level: Level::Performance,
            service: Some(SVC),
            resource: None,
            task_count: self.request.task_count,
            deadline_s: Some(self.request.deadline_s),
            usage_duration_s: None,
            ingress: self.request.ingress,
            submit_time_s: self.request.submit_time_s,
        }
    }
}

/// Connected graph on 2..=`max_routers` routers, 1..=`max_cnodes` hosts of
/// one service. With `idle`, queues and backlogs are all zero.
pub fn random_case(seed: u64, max_routers: u32, max_cnodes: u32, idle: bool) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=max_routers);

    let mut pairs = Vec::new();
    for i in 1..n {
        pairs.push((rng.random_range(0..i), i));
    }
    for a in 0..n {
        for b in a + 1..n {
            if !pairs.contains(&(a, b)) && rng.random_bool(0.4) {
                pairs.push((a, b));
            }
        }
    }
    let links: Vec<Link> = pairs
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| Link {
            id: LinkId(i as u32),
            a: RouterId(a),
            b: RouterId(b),
            bandwidth_bps: [1e8, 5e8, 1e9][rng.random_range(0..3)],
            prop_delay_s: [0.0, 0.001, 0.005][rng.random_range(0..3)],
        })
        .collect();

    let m = rng.random_range(1..=max_cnodes);
    let tiers = [TierKind::Weak, TierKind::Medium, TierKind::Strong];
    let cnodes: Vec<Cnode> = (0..m)
        .map(|i| Cnode {
            id: CnodeId(i),
            router: RouterId(rng.random_range(0..n)),
            tier: tiers[rng.random_range(0..3)],
            deployments: BTreeMap::from([(SVC, rng.random_range(1..=2))]),
            initial_backlog_wu: BTreeMap::new(),
        })
        .collect();

    let service = ServiceDescriptor {
        id: SVC,
        name: None,
        input_bytes_per_task: rng.random_range(100_000..20_000_000),
        output_bytes_per_task: rng.random_range(1_000..2_000_000),
        work_wu_per_task: [0.5, 1.0, 2.0, 3.0][rng.random_range(0..4)],
    };

    let mut status = StaticStatus::default();
    if !idle {
        for l in &links {
            for from in [l.a, l.b] {
                if rng.random_bool(0.5) {
                    status.queued.insert((l.id, from), rng.random_range(0..50_000_000));
                }
            }
        }
        for c in &cnodes {
            if rng.random_bool(0.5) {
                status.backlog.insert((c.id, SVC), rng.random_range(0.0..10.0));
            }
        }
    }

    let request = RegularizedRequest {
        id: RequestId(0),
        requirement: Requirement::Service(SVC),
        deadline_s: rng.random_range(0.1..30.0),
        task_count: rng.random_range(1..=8),
        ingress: RouterId(rng.random_range(0..n)),
        submit_time_s: if idle { rng.random_range(0.0..5.0) } else { 0.0 },
    };

    let scenario = Scenario {
        routers: (0..n).map(RouterId).collect(),
        links,
        cnodes,
        tiers: TierTable::default(),
        services: vec![service],
        resource_classes: vec![],
        requests: vec![],
        workload: None,
        background_load: vec![],
        rng_seed: seed,
        config: SimConfig {
            view_mode: ViewMode::Oracle,
            ..SimConfig::default()
        },
    };
    Case { scenario, status, request }
}

/// All simple paths from `src` to `dst`; `[empty]` when they coincide.
pub fn simple_paths(topo: &Topology, src: RouterId, dst: RouterId) -> Vec<Path> {
    if src == dst {
        return vec![Path::empty()];
    }
    let mut out = Vec::new();
    let mut stack = vec![src];
    fn walk(topo: &Topology, dst: RouterId, stack: &mut Vec<RouterId>, out: &mut Vec<Path>) {
        let u = *stack.last().unwrap();
        if u == dst {
            out.push(Path(stack.clone()));
            return;
        }
        for &(v, _) in topo.neighbors(u) {
            if !stack.contains(&v) {
                stack.push(v);
                walk(topo, dst, stack, out);
                stack.pop();
            }
        }
    }
    walk(topo, dst, &mut stack, &mut out);
    out
}

fn queue_seen(view: &GlobalView, scheme: Scheme, link: LinkId, from: RouterId) -> u64 {
    match scheme {
        Scheme::Cnc => view.queued_bytes(link, from),
        Scheme::ComputingFirst => 0,
    }
}

/// Hop-by-hop sum for a lone payload.
pub fn path_time(topo: &Topology, view: &GlobalView, scheme: Scheme, path: &Path, bytes: u64) -> f64 {
    let mut t = 0.0;
    for (u, v) in path.hops() {
        let l = topo.link_between(u, v).expect("adjacent");
        t += link_transfer_time(bytes, l, queue_seen(view, scheme, l.id, u));
    }
    t
}

fn rate_and_price(topo: &Topology, cnode: CnodeId) -> (f64, f64) {
    let c = topo.cnode(cnode).unwrap();
    let t = topo.tiers().get(c.tier);
    (t.rate_wups * c.deployments[&SVC] as f64, t.price_per_wu)
}

fn backlog(case: &Case, cnode: CnodeId) -> f64 {
    case.status.backlog.get(&(cnode, SVC)).copied().unwrap_or(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleBest {
    pub cnode: CnodeId,
    pub cost: f64,
    pub response_s: f64,
}

/// Exhaustive single-Cnode optimum over every (Cnode, forward simple path,
/// return simple path) triple. `None` when nothing meets the deadline.
pub fn exhaustive_single(case: &Case, scheme: Scheme) -> Option<SingleBest> {
    let topo = case.topology();
    let view = case.view(&topo);
    let svc = case.service();
    let n = case.request.task_count as u64;
    let (input, output) = (n * svc.input_bytes_per_task, n * svc.output_bytes_per_task);
    let work = n as f64 * svc.work_wu_per_task;

    let mut best: Option<SingleBest> = None;
    for c in &case.scenario.cnodes {
        let fwd = simple_paths(&topo, case.request.ingress, c.router)
            .iter()
            .map(|p| path_time(&topo, &view, scheme, p, input))
            .fold(f64::INFINITY, f64::min);
        let ret = simple_paths(&topo, c.router, case.request.ingress)
            .iter()
            .map(|p| path_time(&topo, &view, scheme, p, output))
            .fold(f64::INFINITY, f64::min);
        let (rate, price) = rate_and_price(&topo, c.id);
        let response = fwd + backlog(case, c.id) / rate + work / rate + ret;
        if response > case.request.deadline_s {
            continue;
        }
        let cand = SingleBest { cnode: c.id, cost: work * price, response_s: response };
        let better = match best {
            None => true,
            Some(b) => (cand.cost, cand.response_s, cand.cnode) < (b.cost, b.response_s, b.cnode),
        };
        if better {
            best = Some(cand);
        }
    }
    best
}

/// Replays a plan's fragments through FIFO store-and-forward links on top of
/// the view's queues. Returns the last result arrival, relative to submission.
pub fn replay_plan(case: &Case, scheme: Scheme, plan: &RoutingPlan) -> f64 {
    let topo = case.topology();
    let view = case.view(&topo);
    let svc = case.service();
    let mut own: BTreeMap<(LinkId, RouterId), u64> = BTreeMap::new();

    // (time, seq, fragment, leg (0 fwd / 1 exec done / 2 ret), hop, bytes)
    let mut pending: Vec<(f64, u64, usize, u8, usize, u64)> = Vec::new();
    let mut seq = 0u64;
    let mut end: f64 = 0.0;

    let send = |pending: &mut Vec<_>, own: &mut BTreeMap<_, _>, now: f64, seq: &mut u64, f: usize, leg: u8, path: &Path, hop: usize, bytes: u64| {
        let (u, v) = (path.0[hop], path.0[hop + 1]);
        let l = topo.link_between(u, v).unwrap();
        let q = queue_seen(&view, scheme, l.id, u) + own.get(&(l.id, u)).copied().unwrap_or(0);
        *own.entry((l.id, u)).or_insert(0) += bytes;
        pending.push((now + link_transfer_time(bytes, l, q), *seq, f, leg, hop, bytes));
        *seq += 1;
    };

    let exec_of = |f: usize| {
        let a = &plan.assignments[f];
        let (rate, _) = rate_and_price(&topo, a.schedule.cnode);
        backlog(case, a.schedule.cnode) / rate + a.task_count() as f64 * svc.work_wu_per_task / rate
    };

    for (f, a) in plan.assignments.iter().enumerate() {
        let bytes = a.task_count() as u64 * svc.input_bytes_per_task;
        if a.schedule.forward_path.is_empty() {
            pending.push((exec_of(f), seq, f, 1, 0, 0));
            seq += 1;
        } else {
            send(&mut pending, &mut own, 0.0, &mut seq, f, 0, &a.schedule.forward_path, 0, bytes);
        }
    }

    while !pending.is_empty() {
        let i = (0..pending.len())
            .min_by(|&x, &y| pending[x].0.total_cmp(&pending[y].0).then(pending[x].1.cmp(&pending[y].1)))
            .unwrap();
        let (now, _, f, leg, hop, bytes) = pending.swap_remove(i);
        let a = &plan.assignments[f];
        let out_bytes = a.task_count() as u64 * svc.output_bytes_per_task;
        match leg {
            0 | 2 => {
                let path = if leg == 0 { &a.schedule.forward_path } else { &a.schedule.return_path };
                let (u, v) = (path.0[hop], path.0[hop + 1]);
                let l = topo.link_between(u, v).unwrap();
                *own.get_mut(&(l.id, u)).unwrap() -= bytes;
                if hop + 2 < path.0.len() {
                    send(&mut pending, &mut own, now, &mut seq, f, leg, path, hop + 1, bytes);
                } else if leg == 0 {
                    pending.push((now + exec_of(f), seq, f, 1, 0, 0));
                    seq += 1;
                } else {
                    end = end.max(now);
                }
            }
            _ => {
                if a.schedule.return_path.is_empty() {
                    end = end.max(now);
                } else {
                    send(&mut pending, &mut own, now, &mut seq, f, 2, &a.schedule.return_path, 0, out_bytes);
                }
            }
        }
    }
    end
}

/// Sum over assignments of tasks x work x tier price.
pub fn plan_cost(case: &Case, plan: &RoutingPlan) -> f64 {
    let topo = case.topology();
    plan.assignments
        .iter()
        .map(|a| {
            let (_, price) = rate_and_price(&topo, a.schedule.cnode);
            a.task_count() as f64 * case.service().work_wu_per_task * price
        })
        .sum()
}
