//! Metering and pricing of executed requests.

use serde::{Deserialize, Serialize};

use crate::ids::{CnodeId, RequestId};
use crate::model::{BillRecord, Outcome};
use crate::topology::{TierKind, TierTable};

/// Work drained for one assignment of a request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExecutedAssignment {
    pub cnode: CnodeId,
    pub tier: TierKind,
    pub executed_wu: f64,
}

/// What the engine knows about a request when it reaches a terminal state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionRecord {
    pub request: RequestId,
    pub assignments: Vec<ExecutedAssignment>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeteredAssignment {
    pub cnode: CnodeId,
    pub tier: TierKind,
    pub metered_wu: f64,
}

pub fn meter(record: &ExecutionRecord) -> Vec<MeteredAssignment> {
    record
        .assignments
        .iter()
        .map(|a| MeteredAssignment {
            cnode: a.cnode,
            tier: a.tier,
            metered_wu: a.executed_wu,
        })
        .collect()
}

/// Bill for a request. Rejected requests are never charged.
pub fn price(request: RequestId, metered: &[MeteredAssignment], tiers: &TierTable, outcome: Outcome) -> BillRecord {
    if outcome == Outcome::RejectedInfeasible {
        return BillRecord {
            request,
            metered_wu: 0.0,
            cost: 0.0,
            outcome,
        };
    }
    let metered_wu = metered.iter().map(|m| m.metered_wu).sum();
    let cost = metered
        .iter()
        .map(|m| m.metered_wu * tiers.get(m.tier).price_per_wu)
        .sum();
    BillRecord {
        request,
        metered_wu,
        cost,
        outcome,
    }
}

/// Append-only list of bills in settlement order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Ledger {
    bills: Vec<BillRecord>,
}

impl Ledger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bill: BillRecord) {
        self.bills.push(bill);
    }

    pub fn bills(&self) -> &[BillRecord] {
        &self.bills
    }

    pub fn len(&self) -> usize {
        self.bills.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bills.is_empty()
    }

    pub fn total_metered_wu(&self) -> f64 {
        self.bills.iter().map(|b| b.metered_wu).sum()
    }

    pub fn into_bills(self) -> Vec<BillRecord> {
        self.bills
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exec(parts: &[(u32, TierKind, f64)]) -> ExecutionRecord {
        ExecutionRecord {
            request: RequestId(1),
            assignments: parts
                .iter()
                .map(|&(c, tier, wu)| ExecutedAssignment { cnode: CnodeId(c), tier, executed_wu: wu })
                .collect(),
        }
    }

    #[test]
    fn meter_examples() {
        let m = meter(&exec(&[(0, TierKind::Strong, 8.0)]));
        assert_eq!(m.iter().map(|a| a.metered_wu).collect::<Vec<_>>(), vec![8.0]);

        // 3/1 split at 2 wu per task.
        let m = meter(&exec(&[(0, TierKind::Weak, 3.0 * 2.0), (1, TierKind::Medium, 1.0 * 2.0)]));
        assert_eq!(m.iter().map(|a| a.metered_wu).collect::<Vec<_>>(), vec![6.0, 2.0]);

        assert!(meter(&exec(&[])).is_empty());
    }

    #[test]
    fn price_examples() {
        let tiers = TierTable::default();
        let strong = meter(&exec(&[(0, TierKind::Strong, 8.0)]));
        let bill = price(RequestId(1), &strong, &tiers, Outcome::Completed);
        assert_eq!(bill.cost, 8.0 * tiers.strong.price_per_wu);
        assert_eq!(bill.cost, 72.0);

        let bill = price(RequestId(1), &[], &tiers, Outcome::RejectedInfeasible);
        assert_eq!((bill.metered_wu, bill.cost), (0.0, 0.0));

        let split = meter(&exec(&[(0, TierKind::Weak, 6.0), (1, TierKind::Medium, 2.0)]));
        let bill = price(RequestId(1), &split, &tiers, Outcome::Completed);
        assert_eq!(bill.cost, 6.0 * tiers.weak.price_per_wu + 2.0 * tiers.medium.price_per_wu);
        assert_eq!(bill.cost, 12.0);
        assert_eq!(bill.metered_wu, 8.0);
    }

    #[test]
    fn missed_deadline_is_still_billed() {
        let m = meter(&exec(&[(0, TierKind::Medium, 4.0)]));
        let bill = price(RequestId(1), &m, &TierTable::default(), Outcome::DeadlineMissed);
        assert_eq!(bill.cost, 12.0);
    }

    #[test]
    fn ledger_is_append_only() {
        let mut l = Ledger::new();
        l.push(price(RequestId(0), &[], &TierTable::default(), Outcome::RejectedInfeasible));
        l.push(price(RequestId(1), &meter(&exec(&[(0, TierKind::Weak, 2.0)])), &TierTable::default(), Outcome::Completed));
        assert_eq!(l.len(), 2);
        assert_eq!(l.total_metered_wu(), 2.0);
        assert_eq!(l.bills()[0].request, RequestId(0));
    }
}
