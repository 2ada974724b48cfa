//! Discrete-event kernel: virtual clock, event queue, packet transmission,
//! execution, state dissemination and the request lifecycle.
//!
//! Events fire in `(time, seq)` order where `seq` is assigned at insertion,
//! so a scenario and its seed fully determine a run.
//!
//! Trace lines (see [`Engine::with_trace`]) are tab separated:
//!
//! ```text
//! <time in seconds, 9 decimals>\t<kind>\t<entity ids>
//! ```

pub mod exec;
pub mod link;

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::ids::{CnodeId, RequestId, RouterId, ServiceId};
use crate::model::{BillRecord, Outcome, RawRequest, RegularizedRequest, RoutingPlan};
use crate::planner::{PlanError, Planner, PlannerConfig, Scheme};
use crate::regularize::{restore, RestoreError};
use crate::scenario::{Directions, Scenario, SimConfig, ViewMode};
use crate::split::{split, MergeError, Merger, ResultFragment};
use crate::sync::{
    flood_targets, BroadcastSchedule, CncStatePacket, CnodeReport, FloodFilter, GlobalView, LocalStatus,
    Perceiver,
};
use crate::topology::{Cnode, Topology};
use crate::trading::{meter, price, ExecutedAssignment, ExecutionRecord, Ledger};

use exec::{ExecError, ExecPool};
use link::{link_transfer_time, LinkQueues};

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("invalid scenario:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
    #[error("event at t={at_s} is past the horizon of {limit_s} s")]
    HorizonExceeded { at_s: f64, limit_s: f64 },
    #[error("{from} and {to} are not adjacent")]
    NonAdjacentHop { from: RouterId, to: RouterId },
    #[error("planning {request} failed: {source}")]
    Plan { request: RequestId, source: PlanError },
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Merge(#[from] MergeError),
    #[error(transparent)]
    Restore(#[from] RestoreError),
}

/// Index of a job handed to the execution pool.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Job {
    Assignment { request: usize, assignment: usize },
    /// Backlog present at time zero.
    Preload { cnode: CnodeId, service: ServiceId, work_wu: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EventKind {
    PacketArrival { packet: usize },
    ExecutionComplete { job: Job },
    CncBroadcastTick { k: u64 },
    RequestSubmit { request: usize },
    BackgroundBurst { stream: usize },
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::PacketArrival { .. } => "packet_arrival",
            EventKind::ExecutionComplete { .. } => "execution_complete",
            EventKind::CncBroadcastTick { .. } => "cnc_broadcast_tick",
            EventKind::RequestSubmit { .. } => "request_submit",
            EventKind::BackgroundBurst { .. } => "background_burst",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimEvent {
    pub fire_time_s: f64,
    pub seq: u64,
    pub kind: EventKind,
}

impl Eq for SimEvent {}

impl PartialOrd for SimEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SimEvent {
    // Reversed: BinaryHeap pops the earliest (time, seq).
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .fire_time_s
            .total_cmp(&self.fire_time_s)
            .then(other.seq.cmp(&self.seq))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PacketClass {
    Cnc,
    Request,
    Result,
    Background,
}

#[derive(Debug, Clone)]
enum Payload {
    Cnc(Arc<CncStatePacket>),
    Request { request: usize, assignment: usize },
    Result { request: usize, fragment: ResultFragment },
    Background,
}

impl Payload {
    fn class(&self) -> PacketClass {
        match self {
            Payload::Cnc(_) => PacketClass::Cnc,
            Payload::Request { .. } => PacketClass::Request,
            Payload::Result { .. } => PacketClass::Result,
            Payload::Background => PacketClass::Background,
        }
    }
}

#[derive(Debug, Clone)]
struct Packet {
    payload: Payload,
    size_bytes: u64,
    path: Vec<RouterId>,
    // Index into `path` of the router the packet last left.
    hop: usize,
    dir: usize,
}

/// Bytes put on links, counted once per hop.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Traffic {
    pub cnc_bytes: u64,
    pub request_bytes: u64,
    pub result_bytes: u64,
    pub background_bytes: u64,
    pub packets: u64,
}

impl Traffic {
    pub fn total_bytes(&self) -> u64 {
        self.cnc_bytes + self.request_bytes + self.result_bytes + self.background_bytes
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metrics {
    pub events_processed: u64,
    pub traffic: Traffic,
    /// Origin emissions of status packets.
    pub broadcasts: u64,
    /// `(router, origin, seq)` accepted and forwarded.
    pub flood_accepted: u64,
    pub flood_duplicates: u64,
}

/// Per-request outcome with the planner's prediction next to what happened.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestRecord {
    pub id: RequestId,
    pub ingress: RouterId,
    pub submit_time_s: f64,
    pub deadline_s: f64,
    pub task_count: u32,
    pub scheme: Scheme,
    pub plan: Option<RoutingPlan>,
    pub outcome: Option<Outcome>,
    pub completed_at_s: Option<f64>,
    pub bill: Option<BillRecord>,
}

impl RequestRecord {
    pub fn predicted_response_s(&self) -> Option<f64> {
        self.plan
            .as_ref()
            .filter(|p| p.is_feasible())
            .map(|p| p.predicted_response_s)
    }

    pub fn actual_response_s(&self) -> Option<f64> {
        self.completed_at_s.map(|t| t - self.submit_time_s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub end_time_s: f64,
    pub records: Vec<RequestRecord>,
    pub bills: Vec<BillRecord>,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceLine {
    pub time_s: f64,
    pub kind: String,
    pub ids: String,
}

impl std::fmt::Display for TraceLine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.9}\t{}\t{}", self.time_s, self.kind, self.ids)
    }
}

#[derive(Debug, Clone)]
struct RequestState {
    raw: RawRequest,
    reg: RegularizedRequest,
    plan: Option<RoutingPlan>,
    merger: Option<Merger>,
    executed: Vec<ExecutedAssignment>,
    outcome: Option<Outcome>,
    completed_at_s: Option<f64>,
    bill: Option<BillRecord>,
}

#[derive(Debug, Clone)]
struct BackgroundStream {
    from: RouterId,
    to: RouterId,
    burst_bytes: u64,
    gap: Exp<f64>,
    rng: ChaCha8Rng,
}

/// Live link and Cnode state as a router observes it.
struct Live<'a> {
    topo: &'a Topology,
    links: &'a LinkQueues,
    exec: &'a ExecPool,
}

impl LocalStatus for Live<'_> {
    fn egress_queued_bytes(&self, link: crate::ids::LinkId, from: RouterId) -> u64 {
        self.topo
            .directed_index(link, from)
            .map(|d| self.links.queued(d))
            .unwrap_or(0)
    }

    fn cnode_report(&self, cnode: &Cnode, now: f64) -> CnodeReport {
        CnodeReport {
            deployments: cnode.deployments.clone(),
            backlog_wu: cnode
                .deployments
                .keys()
                .map(|&s| (s, self.exec.queue(cnode.id, s).map_or(0.0, |q| q.backlog_wu(now))))
                .collect(),
        }
    }
}

pub struct Engine {
    topo: Topology,
    config: SimConfig,
    planner_config: PlannerConfig,
    now: f64,
    next_seq: u64,
    heap: BinaryHeap<SimEvent>,
    links: LinkQueues,
    exec: ExecPool,
    views: BTreeMap<RouterId, GlobalView>,
    perceiver: Perceiver,
    flood: FloodFilter,
    broadcast: BroadcastSchedule,
    packets: Vec<Option<Packet>>,
    free_slots: Vec<usize>,
    requests: Vec<RequestState>,
    outstanding: usize,
    streams: Vec<BackgroundStream>,
    ledger: Ledger,
    metrics: Metrics,
    trace: Option<Vec<TraceLine>>,
}

impl Engine {
    /// Validates the scenario and schedules its requests, broadcasts and
    /// background load.
    pub fn new(scenario: &Scenario) -> Result<Self, EngineError> {
        scenario.validate().map_err(EngineError::Invalid)?;
        let topo = scenario.topology();
        let regularizer = scenario.regularizer();
        let requests = scenario
            .materialize_requests()
            .into_iter()
            .map(|raw| {
                let reg = regularizer
                    .regularize(&raw)
                    .map_err(|e| EngineError::Invalid(vec![e.to_string()]))?;
                Ok(RequestState {
                    raw,
                    reg,
                    plan: None,
                    merger: None,
                    executed: Vec::new(),
                    outcome: None,
                    completed_at_s: None,
                    bill: None,
                })
            })
            .collect::<Result<Vec<_>, EngineError>>()?;
        let broadcast = BroadcastSchedule::new(scenario.config.cnc_period_s)
            .map_err(|e| EngineError::Invalid(vec![e.to_string()]))?;

        let mut streams = Vec::new();
        for b in &scenario.background_load {
            let link = topo.link(b.link).expect("validated link");
            let dirs: &[(RouterId, RouterId)] = match b.directions {
                Directions::Both => &[(link.a, link.b), (link.b, link.a)],
                Directions::AToB => &[(link.a, link.b)],
                Directions::BToA => &[(link.b, link.a)],
            };
            let rate = b.utilization * link.bandwidth_bps / (8.0 * b.burst_bytes as f64);
            if rate <= 0.0 {
                continue;
            }
            for &(from, to) in dirs {
                // Stream 0 is the workload generator's.
                let mut rng = ChaCha8Rng::seed_from_u64(scenario.rng_seed);
                rng.set_stream(streams.len() as u64 + 1);
                streams.push(BackgroundStream {
                    from,
                    to,
                    burst_bytes: b.burst_bytes,
                    gap: Exp::new(rate).expect("positive rate"),
                    rng,
                });
            }
        }

        let mut engine = Self {
            links: LinkQueues::new(topo.directed_count()),
            exec: ExecPool::new(&topo),
            views: BTreeMap::new(),
            perceiver: Perceiver::new(),
            flood: FloodFilter::new(),
            broadcast,
            config: scenario.config.clone(),
            planner_config: scenario.planner_config(),
            now: 0.0,
            next_seq: 0,
            heap: BinaryHeap::new(),
            packets: Vec::new(),
            free_slots: Vec::new(),
            outstanding: requests.len(),
            requests,
            streams,
            ledger: Ledger::new(),
            metrics: Metrics::default(),
            trace: None,
            topo,
        };

        let preload: Vec<(CnodeId, ServiceId, f64)> = engine
            .topo
            .cnodes()
            .flat_map(|c| c.initial_backlog_wu.iter().map(move |(&s, &wu)| (c.id, s, wu)))
            .filter(|&(_, _, wu)| wu > 0.0)
            .collect();
        for (cnode, service, work_wu) in preload {
            let done = engine.exec.execute(0.0, cnode, service, work_wu)?;
            engine.push(done, EventKind::ExecutionComplete { job: Job::Preload { cnode, service, work_wu } });
        }

        if engine.config.view_mode == ViewMode::Distributed {
            // Every router starts with a converged picture of time zero.
            let fresh = engine.fresh_view();
            engine.views = engine.topo.routers().map(|r| (r, fresh.clone())).collect();
        }
        for i in 0..engine.requests.len() {
            let t = engine.requests[i].raw.submit_time_s;
            engine.push(t, EventKind::RequestSubmit { request: i });
        }
        if engine.active() {
            if engine.config.view_mode == ViewMode::Distributed {
                engine.push(0.0, EventKind::CncBroadcastTick { k: 0 });
            }
            for i in 0..engine.streams.len() {
                let s = &mut engine.streams[i];
                let t = s.gap.sample(&mut s.rng);
                engine.push(t, EventKind::BackgroundBurst { stream: i });
            }
        }
        Ok(engine)
    }

    /// Records a trace line per processed event.
    pub fn with_trace(mut self) -> Self {
        self.trace = Some(Vec::new());
        self
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn metrics(&self) -> &Metrics {
        &self.metrics
    }

    /// The view `router` plans with. `None` in oracle mode.
    pub fn view(&self, router: RouterId) -> Option<&GlobalView> {
        self.views.get(&router)
    }

    pub fn trace(&self) -> &[TraceLine] {
        self.trace.as_deref().unwrap_or(&[])
    }

    pub fn link_queues(&self) -> &LinkQueues {
        &self.links
    }

    pub fn exec_pool(&self) -> &ExecPool {
        &self.exec
    }

    /// A view built from live state right now.
    pub fn fresh_view(&self) -> GlobalView {
        GlobalView::fresh(&self.topo, &self.live(), self.now)
    }

    fn live(&self) -> Live<'_> {
        Live {
            topo: &self.topo,
            links: &self.links,
            exec: &self.exec,
        }
    }

    fn active(&self) -> bool {
        self.outstanding > 0 || self.now < self.config.cnc_min_horizon_s
    }

    fn push(&mut self, time: f64, kind: EventKind) {
        self.heap.push(SimEvent {
            fire_time_s: time,
            seq: self.next_seq,
            kind,
        });
        self.next_seq += 1;
    }

    fn log(&mut self, kind: &str, ids: impl FnOnce() -> String) {
        if let Some(t) = &mut self.trace {
            t.push(TraceLine {
                time_s: self.now,
                kind: kind.to_string(),
                ids: ids(),
            });
        }
    }

    /// Time of the next due event.
    pub fn peek_time(&self) -> Option<f64> {
        self.heap.peek().map(|e| e.fire_time_s)
    }

    /// Processes one event; `None` once the queue is empty.
    pub fn step(&mut self) -> Result<Option<SimEvent>, EngineError> {
        let Some(ev) = self.heap.peek().copied() else {
            return Ok(None);
        };
        if let Some(limit) = self.config.max_time_s {
            if ev.fire_time_s > limit {
                return Err(EngineError::HorizonExceeded { at_s: ev.fire_time_s, limit_s: limit });
            }
        }
        self.heap.pop();
        debug_assert!(ev.fire_time_s >= self.now, "clock went backwards");
        self.now = ev.fire_time_s;
        self.metrics.events_processed += 1;
        match ev.kind {
            EventKind::PacketArrival { packet } => self.on_arrival(packet)?,
            EventKind::ExecutionComplete { job } => self.on_exec_done(job)?,
            EventKind::CncBroadcastTick { k } => self.on_tick(k)?,
            EventKind::RequestSubmit { request } => self.on_submit(request)?,
            EventKind::BackgroundBurst { stream } => self.on_burst(stream)?,
        }
        Ok(Some(ev))
    }

    /// Runs until no events remain.
    pub fn run_to_end(&mut self) -> Result<(), EngineError> {
        while self.step()?.is_some() {}
        Ok(())
    }

    pub fn run(mut self) -> Result<SimReport, EngineError> {
        self.run_to_end()?;
        Ok(self.report())
    }

    pub fn report(&self) -> SimReport {
        SimReport {
            end_time_s: self.now,
            records: self.records(),
            bills: self.ledger.bills().to_vec(),
            metrics: self.metrics,
        }
    }

    pub fn records(&self) -> Vec<RequestRecord> {
        self.requests
            .iter()
            .map(|r| RequestRecord {
                id: r.raw.id,
                ingress: r.raw.ingress,
                submit_time_s: r.raw.submit_time_s,
                deadline_s: r.reg.deadline_s,
                task_count: r.raw.task_count,
                scheme: self.config.scheme,
                plan: r.plan.clone(),
                outcome: r.outcome,
                completed_at_s: r.completed_at_s,
                bill: r.bill.clone(),
            })
            .collect()
    }

    /// Queue and work conservation; returns the first violation.
    pub fn check_conservation(&self) -> Result<(), String> {
        for (i, q) in self.links.iter().enumerate() {
            if q.enqueued_bytes < q.dequeued_bytes || q.enqueued_bytes - q.dequeued_bytes != q.queued_bytes {
                return Err(format!("directed link {i}: {q:?}"));
            }
        }
        for (key, q) in self.exec.iter() {
            let lhs = q.admitted_wu();
            let rhs = q.completed_wu() + q.in_backlog_wu();
            if (lhs - rhs).abs() > 1e-9 * lhs.max(1.0) || q.in_backlog_wu() < -1e-9 {
                return Err(format!("{key:?}: admitted {lhs} != completed + backlog {rhs}"));
            }
        }
        Ok(())
    }

    fn send(&mut self, mut packet: Packet) -> Result<(), EngineError> {
        let (u, v) = (packet.path[packet.hop], packet.path[packet.hop + 1]);
        let link = self
            .topo
            .link_between(u, v)
            .ok_or(EngineError::NonAdjacentHop { from: u, to: v })?;
        let dir = self.topo.directed_index(link.id, u).expect("endpoint of its own link");
        let arrive = self.now + link_transfer_time(packet.size_bytes, link, self.links.queued(dir));
        self.links.enqueue(dir, packet.size_bytes);
        packet.dir = dir;

        let t = &mut self.metrics.traffic;
        t.packets += 1;
        match packet.payload.class() {
            PacketClass::Cnc => t.cnc_bytes += packet.size_bytes,
            PacketClass::Request => t.request_bytes += packet.size_bytes,
            PacketClass::Result => t.result_bytes += packet.size_bytes,
            PacketClass::Background => t.background_bytes += packet.size_bytes,
        }

        let slot = match self.free_slots.pop() {
            Some(i) => {
                self.packets[i] = Some(packet);
                i
            }
            None => {
                self.packets.push(Some(packet));
                self.packets.len() - 1
            }
        };
        self.push(arrive, EventKind::PacketArrival { packet: slot });
        Ok(())
    }

    fn on_arrival(&mut self, slot: usize) -> Result<(), EngineError> {
        let mut packet = self.packets[slot].take().expect("live packet slot");
        self.free_slots.push(slot);
        self.links.dequeue(packet.dir, packet.size_bytes);
        packet.hop += 1;
        let at = packet.path[packet.hop];
        self.log("packet_arrival", || {
            format!("{:?} {}B at {}", packet.payload.class(), packet.size_bytes, at).to_lowercase()
        });
        if packet.hop + 1 < packet.path.len() {
            return self.send(packet);
        }
        let from = packet.path[packet.hop - 1];
        match packet.payload {
            Payload::Cnc(state) => self.on_flood(at, from, state),
            Payload::Request { request, assignment } => self.admit(request, assignment),
            Payload::Result { request, fragment } => self.collect(request, fragment),
            Payload::Background => Ok(()),
        }
    }

    fn on_tick(&mut self, k: u64) -> Result<(), EngineError> {
        if !self.active() {
            return Ok(());
        }
        self.log("cnc_broadcast_tick", || format!("k{k}"));
        let routers: Vec<RouterId> = self.topo.routers().collect();
        for r in routers {
            let live = Live {
                topo: &self.topo,
                links: &self.links,
                exec: &self.exec,
            };
            let state = Arc::new(self.perceiver.perceive(&self.topo, &live, r, self.now));
            self.metrics.broadcasts += 1;
            self.flood.accept(r, r, state.seq);
            self.views.get_mut(&r).expect("router view").apply(state.clone());
            for n in flood_targets(&self.topo, r, None) {
                self.send_cnc(r, n, state.clone())?;
            }
        }
        let next = self.broadcast.tick_time(k + 1);
        self.push(next, EventKind::CncBroadcastTick { k: k + 1 });
        Ok(())
    }

    fn send_cnc(&mut self, from: RouterId, to: RouterId, state: Arc<CncStatePacket>) -> Result<(), EngineError> {
        self.send(Packet {
            payload: Payload::Cnc(state),
            size_bytes: self.config.cnc_packet_bytes,
            path: vec![from, to],
            hop: 0,
            dir: 0,
        })
    }

    fn on_flood(&mut self, at: RouterId, from: RouterId, state: Arc<CncStatePacket>) -> Result<(), EngineError> {
        if !self.flood.accept(at, state.origin, state.seq) {
            self.metrics.flood_duplicates += 1;
            return Ok(());
        }
        self.metrics.flood_accepted += 1;
        self.views.get_mut(&at).expect("router view").apply(state.clone());
        for n in flood_targets(&self.topo, at, Some(from)) {
            self.send_cnc(at, n, state.clone())?;
        }
        Ok(())
    }

    fn on_burst(&mut self, stream: usize) -> Result<(), EngineError> {
        if !self.active() {
            return Ok(());
        }
        let s = &mut self.streams[stream];
        let (from, to, bytes) = (s.from, s.to, s.burst_bytes);
        let next = self.now + s.gap.sample(&mut s.rng);
        self.log("background_burst", || format!("{from}->{to} {bytes}B"));
        self.send(Packet {
            payload: Payload::Background,
            size_bytes: bytes,
            path: vec![from, to],
            hop: 0,
            dir: 0,
        })?;
        self.push(next, EventKind::BackgroundBurst { stream });
        Ok(())
    }

    fn on_submit(&mut self, idx: usize) -> Result<(), EngineError> {
        let reg = self.requests[idx].reg.clone();
        self.log("request_submit", || format!("{} at {}", reg.id, reg.ingress));
        let planner = Planner::new(&self.topo, self.planner_config);
        let plan = match self.config.view_mode {
            ViewMode::Distributed => {
                planner.plan_with(self.config.scheme, &self.views[&reg.ingress], &reg)
            }
            ViewMode::Oracle => planner.plan_with(self.config.scheme, &self.fresh_view(), &reg),
        };
        let plan = match plan {
            Ok(p) => p,
            Err(PlanError::NoSuchService(_)) => RoutingPlan::infeasible(),
            Err(source) => return Err(EngineError::Plan { request: reg.id, source }),
        };
        if !plan.is_feasible() {
            self.requests[idx].plan = Some(plan);
            return self.finish(idx, Outcome::RejectedInfeasible);
        }

        let service = self
            .topo
            .service(reg.requirement.service())
            .expect("validated service")
            .clone();
        let packets = split(&reg, &service, &plan).expect("feasible plan splits");
        let st = &mut self.requests[idx];
        st.merger = Some(Merger::new(reg.id, reg.task_count));
        st.executed = plan
            .assignments
            .iter()
            .map(|a| ExecutedAssignment {
                cnode: a.schedule.cnode,
                tier: self.topo.cnode(a.schedule.cnode).expect("planned cnode").tier,
                executed_wu: 0.0,
            })
            .collect();
        st.plan = Some(plan);
        self.log("request_planned", || {
            let cnodes: Vec<String> = packets.iter().map(|p| p.cnode.to_string()).collect();
            format!("{} on {}", reg.id, cnodes.join(","))
        });

        for p in packets {
            if p.forward_path.is_empty() {
                self.admit(idx, p.assignment)?;
            } else {
                self.send(Packet {
                    payload: Payload::Request { request: idx, assignment: p.assignment },
                    size_bytes: p.size_bytes,
                    path: p.forward_path.0,
                    hop: 0,
                    dir: 0,
                })?;
            }
        }
        Ok(())
    }

    fn assignment_work(&self, idx: usize, assignment: usize) -> (CnodeId, ServiceId, f64) {
        let st = &self.requests[idx];
        let a = &st.plan.as_ref().expect("planned request").assignments[assignment];
        let service = st.reg.requirement.service();
        let work = a.task_count() as f64 * self.topo.service(service).expect("validated service").work_wu_per_task;
        (a.schedule.cnode, service, work)
    }

    fn admit(&mut self, idx: usize, assignment: usize) -> Result<(), EngineError> {
        let (cnode, service, work) = self.assignment_work(idx, assignment);
        let done = self.exec.execute(self.now, cnode, service, work)?;
        self.push(done, EventKind::ExecutionComplete { job: Job::Assignment { request: idx, assignment } });
        Ok(())
    }

    fn on_exec_done(&mut self, job: Job) -> Result<(), EngineError> {
        let (idx, assignment) = match job {
            Job::Preload { cnode, service, work_wu } => {
                self.exec.complete(cnode, service, work_wu);
                self.log("execution_complete", || format!("preload {cnode} {service}"));
                return Ok(());
            }
            Job::Assignment { request, assignment } => (request, assignment),
        };
        let (cnode, service, work) = self.assignment_work(idx, assignment);
        self.exec.complete(cnode, service, work);
        let id = self.requests[idx].raw.id;
        self.log("execution_complete", || format!("{id} a{assignment} on {cnode}"));

        let st = &mut self.requests[idx];
        st.executed[assignment].executed_wu += work;
        let a = &st.plan.as_ref().expect("planned request").assignments[assignment];
        let ret = a.schedule.return_path.clone();
        let fragment = ResultFragment::executed(a.tasks.clone(), self.topo.service(service).expect("validated service"));
        if ret.is_empty() {
            return self.collect(idx, fragment);
        }
        self.send(Packet {
            size_bytes: fragment.size_bytes(),
            payload: Payload::Result { request: idx, fragment },
            path: ret.0,
            hop: 0,
            dir: 0,
        })
    }

    fn collect(&mut self, idx: usize, fragment: ResultFragment) -> Result<(), EngineError> {
        let merger = self.requests[idx].merger.as_mut().expect("merger of a planned request");
        merger.add(fragment)?;
        if !merger.is_complete() {
            return Ok(());
        }
        let merged = self.requests[idx].merger.take().expect("merger").finalize(self.now)?;
        let st = &mut self.requests[idx];
        restore(merged, &st.raw)?;
        st.completed_at_s = Some(self.now);
        let outcome = if self.now - st.raw.submit_time_s <= st.reg.deadline_s {
            Outcome::Completed
        } else {
            Outcome::DeadlineMissed
        };
        self.finish(idx, outcome)
    }

    fn finish(&mut self, idx: usize, outcome: Outcome) -> Result<(), EngineError> {
        let st = &mut self.requests[idx];
        let record = ExecutionRecord {
            request: st.raw.id,
            assignments: st.executed.clone(),
        };
        let bill = price(st.raw.id, &meter(&record), self.topo.tiers(), outcome);
        st.outcome = Some(outcome);
        st.bill = Some(bill.clone());
        self.ledger.push(bill);
        self.outstanding -= 1;
        let id = st.raw.id;
        self.log("request_done", || format!("{id} {}", outcome.as_str()));
        Ok(())
    }
}
