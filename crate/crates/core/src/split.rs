//! Request splitter and result merger.

use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::ids::{CnodeId, RequestId};
use crate::model::{Path, RegularizedRequest, RoutingPlan};
use crate::topology::ServiceDescriptor;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SplitError {
    #[error("cannot split {0}: plan is infeasible")]
    InfeasiblePlan(RequestId),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MergeError {
    #[error("fragment {new:?} overlaps already merged {existing:?}")]
    DuplicateRange { new: Range<u32>, existing: Range<u32> },
    #[error("fragment {0:?} lies outside the request's tasks")]
    OutOfRange(Range<u32>),
    #[error("fragment {range:?} carries {got} results")]
    LengthMismatch { range: Range<u32>, got: usize },
    #[error("result incomplete: task {first_missing} missing")]
    GapDetected { first_missing: u32 },
}

/// One task set on its way to the executing Cnode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSetPacket {
    pub request: RequestId,
    pub assignment: usize,
    pub tasks: Range<u32>,
    pub cnode: CnodeId,
    pub size_bytes: u64,
    pub forward_path: Path,
}

/// Opaque per-task result: only its index and size matter here.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskResult {
    pub index: u32,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultFragment {
    pub tasks: Range<u32>,
    pub results: Vec<TaskResult>,
}

impl ResultFragment {
    /// Results of executing `tasks` of a service.
    pub fn executed(tasks: Range<u32>, service: &ServiceDescriptor) -> Self {
        let results = tasks
            .clone()
            .map(|index| TaskResult {
                index,
                bytes: service.output_bytes_per_task,
            })
            .collect();
        Self { tasks, results }
    }

    pub fn size_bytes(&self) -> u64 {
        self.results.iter().map(|r| r.bytes).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergedResult {
    pub request: RequestId,
    pub completed_at_s: f64,
    pub results: Vec<TaskResult>,
}

/// Materializes a feasible plan into one packet per assignment.
pub fn split(
    request: &RegularizedRequest,
    service: &ServiceDescriptor,
    plan: &RoutingPlan,
) -> Result<Vec<TaskSetPacket>, SplitError> {
    if !plan.is_feasible() {
        return Err(SplitError::InfeasiblePlan(request.id));
    }
    Ok(plan
        .assignments
        .iter()
        .enumerate()
        .map(|(i, a)| TaskSetPacket {
            request: request.id,
            assignment: i,
            tasks: a.tasks.clone(),
            cnode: a.schedule.cnode,
            size_bytes: a.task_count() as u64 * service.input_bytes_per_task,
            forward_path: a.schedule.forward_path.clone(),
        })
        .collect())
}

/// Collects result fragments of one request in any arrival order.
#[derive(Debug, Clone)]
pub struct Merger {
    request: RequestId,
    task_count: u32,
    received: u32,
    fragments: BTreeMap<u32, ResultFragment>,
}

impl Merger {
    pub fn new(request: RequestId, task_count: u32) -> Self {
        Self {
            request,
            task_count,
            received: 0,
            fragments: BTreeMap::new(),
        }
    }

    pub fn add(&mut self, fragment: ResultFragment) -> Result<(), MergeError> {
        let r = fragment.tasks.clone();
        if r.start >= r.end || r.end > self.task_count {
            return Err(MergeError::OutOfRange(r));
        }
        if fragment.results.len() != (r.end - r.start) as usize {
            return Err(MergeError::LengthMismatch {
                range: r,
                got: fragment.results.len(),
            });
        }
        // Ranges are disjoint, so only the nearest neighbour on each side can overlap.
        let before = self.fragments.range(..r.end).next_back();
        if let Some((_, f)) = before {
            if f.tasks.end > r.start {
                return Err(MergeError::DuplicateRange {
                    new: r,
                    existing: f.tasks.clone(),
                });
            }
        }
        self.received += r.end - r.start;
        self.fragments.insert(r.start, fragment);
        Ok(())
    }

    pub fn is_complete(&self) -> bool {
        self.received == self.task_count
    }

    /// Results in original task order.
    pub fn finalize(self, completed_at_s: f64) -> Result<MergedResult, MergeError> {
        let mut next = 0;
        let mut results = Vec::with_capacity(self.task_count as usize);
        for f in self.fragments.into_values() {
            if f.tasks.start != next {
                return Err(MergeError::GapDetected { first_missing: next });
            }
            next = f.tasks.end;
            results.extend(f.results);
        }
        if next != self.task_count {
            return Err(MergeError::GapDetected { first_missing: next });
        }
        Ok(MergedResult {
            request: self.request,
            completed_at_s,
            results,
        })
    }
}
