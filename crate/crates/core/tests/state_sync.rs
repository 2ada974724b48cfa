use std::collections::BTreeMap;

use cncroute::ids::{LinkId, RouterId};
use cncroute::sync::{CncStatePacket, FloodFilter, GlobalView};
use proptest::prelude::*;

fn packet(origin: u32, seq: u64, queued: u64) -> CncStatePacket {
    CncStatePacket {
        origin: RouterId(origin),
        seq,
        sampled_at_s: seq as f64 * 0.1,
        link_reports: BTreeMap::from([(LinkId(origin), queued)]),
        cnode_reports: BTreeMap::new(),
    }
}

const ORDERS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

proptest! {
    // Two packets from one origin, one from another, in every order.
    #[test]
    fn view_is_independent_of_delivery_order(
        s1 in 1u64..100, ds in 1u64..100, s3 in 1u64..100,
        q in proptest::array::uniform3(0u64..1_000_000),
    ) {
        let pkts = [packet(0, s1, q[0]), packet(0, s1 + ds, q[1]), packet(1, s3, q[2])];
        let views: Vec<GlobalView> = ORDERS
            .iter()
            .map(|order| {
                let mut v = GlobalView::new();
                for &i in order {
                    v.apply(pkts[i].clone());
                }
                v
            })
            .collect();
        for v in &views[1..] {
            prop_assert_eq!(v, &views[0]);
        }
        prop_assert_eq!(views[0].entry(RouterId(0)).unwrap().seq, s1 + ds);
        prop_assert_eq!(views[0].queued_bytes(LinkId(0), RouterId(0)), q[1]);
        prop_assert_eq!(views[0].queued_bytes(LinkId(1), RouterId(1)), q[2]);
    }

    // A router forwards the newest packet of an origin at most once, and the
    // set it ends up holding does not depend on order.
    #[test]
    fn flood_filter_accepts_each_packet_at_most_once(s1 in 1u64..100, ds in 1u64..100, s3 in 1u64..100) {
        let pkts = [(0u32, s1), (0, s1 + ds), (1, s3)];
        for order in ORDERS {
            let mut f = FloodFilter::new();
            let accepted: Vec<bool> = order.iter().map(|&i| f.accept(RouterId(9), RouterId(pkts[i].0), pkts[i].1)).collect();
            for (k, &i) in order.iter().enumerate() {
                prop_assert!(!f.accept(RouterId(9), RouterId(pkts[i].0), pkts[i].1));
                // The older packet of origin 0 is accepted only if it came first.
                if i == 0 {
                    let newer_before = order[..k].contains(&1);
                    prop_assert_eq!(accepted[k], !newer_before);
                } else {
                    prop_assert!(accepted[k]);
                }
            }
        }
    }
}
