//! Predicted timeline of a multi-assignment plan.
//!
//! Fragments of one request contend with each other on shared links, so
//! their transfer times are not independent. This replays the plan's own
//! packets through the same store-and-forward model the engine uses, on top
//! of the queue occupancy assumed by the planner.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::engine::link::link_transfer_time;
use crate::model::Path;
use crate::topology::Topology;

use super::path::LinkLoad;
use super::PlanError;

#[derive(Debug, Clone)]
pub(crate) struct Fragment<'a> {
    pub forward: &'a Path,
    pub ret: &'a Path,
    pub input_bytes: u64,
    pub output_bytes: u64,
    pub wait_s: f64,
    pub exec_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub(crate) struct FragmentTimes {
    pub arrive_s: f64,
    pub done_s: f64,
    pub end_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Leg {
    Forward,
    Return,
}

#[derive(Debug, Clone, Copy)]
enum Step {
    // Fragment reached router `hop + 1` of its current leg.
    Arrive { frag: usize, leg: Leg, hop: usize, dir: usize, bytes: u64 },
    ExecDone { frag: usize },
}

struct Ev {
    time: f64,
    seq: u64,
    step: Step,
}

impl PartialEq for Ev {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Ev {}
impl PartialOrd for Ev {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ev {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.seq.cmp(&self.seq))
    }
}

struct Replay<'a, 't> {
    topo: &'t Topology,
    load: LinkLoad<'a>,
    own: Vec<u64>,
    heap: BinaryHeap<Ev>,
    seq: u64,
}

impl Replay<'_, '_> {
    fn push(&mut self, time: f64, step: Step) {
        self.heap.push(Ev { time, seq: self.seq, step });
        self.seq += 1;
    }

    fn send(&mut self, now: f64, frag: usize, leg: Leg, path: &Path, hop: usize, bytes: u64) -> Result<(), PlanError> {
        let (u, v) = (path.routers()[hop], path.routers()[hop + 1]);
        let link = self
            .topo
            .link_between(u, v)
            .ok_or(PlanError::NonAdjacentHop { from: u, to: v })?;
        let dir = self.topo.directed_index(link.id, u).expect("endpoint of its own link");
        let queued = self.load.queued(self.topo, link.id, u) + self.own[dir];
        let t = now + link_transfer_time(bytes, link, queued);
        self.own[dir] += bytes;
        self.push(t, Step::Arrive { frag, leg, hop, dir, bytes });
        Ok(())
    }
}

/// Times relative to the request's submission (t = 0). `load` must not carry
/// own-traffic bytes; the replay tracks those itself.
pub(crate) fn replay(
    topo: &Topology,
    load: LinkLoad<'_>,
    fragments: &[Fragment<'_>],
) -> Result<Vec<FragmentTimes>, PlanError> {
    let mut r = Replay {
        topo,
        load,
        own: vec![0; topo.directed_count()],
        heap: BinaryHeap::new(),
        seq: 0,
    };
    let mut times = vec![FragmentTimes::default(); fragments.len()];

    for (i, f) in fragments.iter().enumerate() {
        if f.forward.is_empty() {
            times[i].arrive_s = 0.0;
            times[i].done_s = 0.0 + f.wait_s + f.exec_s;
            r.push(times[i].done_s, Step::ExecDone { frag: i });
        } else {
            r.send(0.0, i, Leg::Forward, f.forward, 0, f.input_bytes)?;
        }
    }

    while let Some(Ev { time, step, .. }) = r.heap.pop() {
        match step {
            Step::Arrive { frag, leg, hop, dir, bytes } => {
                r.own[dir] -= bytes;
                let f = &fragments[frag];
                let path = match leg {
                    Leg::Forward => f.forward,
                    Leg::Return => f.ret,
                };
                if hop + 2 < path.routers().len() {
                    r.send(time, frag, leg, path, hop + 1, bytes)?;
                } else if leg == Leg::Forward {
                    times[frag].arrive_s = time;
                    times[frag].done_s = time + f.wait_s + f.exec_s;
                    r.push(times[frag].done_s, Step::ExecDone { frag });
                } else {
                    times[frag].end_s = time;
                }
            }
            Step::ExecDone { frag } => {
                let f = &fragments[frag];
                if f.ret.is_empty() {
                    times[frag].end_s = time;
                } else {
                    r.send(time, frag, Leg::Return, f.ret, 0, f.output_bytes)?;
                }
            }
        }
    }
    Ok(times)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::{LinkId, RouterId};
    use crate::planner::path::QueueModel;
    use crate::sync::GlobalView;
    use crate::topology::{Link, TierTable};

    fn line3() -> Topology {
        let l = |id, a, b| Link {
            id: LinkId(id),
            a: RouterId(a),
            b: RouterId(b),
            bandwidth_bps: 1e9,
            prop_delay_s: 0.0,
        };
        Topology::new(
            (0..3).map(RouterId),
            vec![l(0, 0, 1), l(1, 1, 2)],
            vec![],
            vec![],
            TierTable::default(),
        )
    }

    #[test]
    fn shared_first_hop_serializes_fragments() {
        let topo = line3();
        let view = GlobalView::new();
        let to1 = Path(vec![RouterId(0), RouterId(1)]);
        let back1 = Path(vec![RouterId(1), RouterId(0)]);
        let to2 = Path(vec![RouterId(0), RouterId(1), RouterId(2)]);
        let back2 = Path(vec![RouterId(2), RouterId(1), RouterId(0)]);
        let frags = [
            Fragment { forward: &to1, ret: &back1, input_bytes: 125_000_000, output_bytes: 125_000_000, wait_s: 0.0, exec_s: 1.0 },
            Fragment { forward: &to2, ret: &back2, input_bytes: 125_000_000, output_bytes: 125_000_000, wait_s: 0.0, exec_s: 10.0 },
        ];
        let t = replay(&topo, LinkLoad::new(&view, QueueModel::Reported), &frags).unwrap();
        // Hand-computed: first fragment 1 s over the idle hop; the second sees
        // 125 MB ahead on 0->1 (2 s) and then an idle 1->2 (1 s).
        assert_eq!(t[0].arrive_s, 1.0);
        assert_eq!(t[0].end_s, 3.0);
        assert_eq!(t[1].arrive_s, 3.0);
        assert_eq!(t[1].done_s, 13.0);
        assert_eq!(t[1].end_s, 15.0);
    }

    #[test]
    fn colocated_fragment_needs_no_transfer() {
        let topo = line3();
        let view = GlobalView::new();
        let empty = Path::empty();
        let frags = [Fragment { forward: &empty, ret: &empty, input_bytes: 1, output_bytes: 1, wait_s: 0.5, exec_s: 2.0 }];
        let t = replay(&topo, LinkLoad::new(&view, QueueModel::Reported), &frags).unwrap();
        assert_eq!(t[0], FragmentTimes { arrive_s: 0.0, done_s: 2.5, end_s: 2.5 });
    }
}
