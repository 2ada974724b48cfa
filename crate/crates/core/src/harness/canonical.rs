//! The shipped reference scenario and its sweep grid.
//!
//! Eight routers: access 0 and 1, transit 2 to 5, hosting 6 and 7. Every
//! access router reaches both hosting routers over four equal-hop paths,
//! two through router 4 and two through router 5. Background bursts load
//! the 2-4 and 3-4 links toward the hosting side, so the lowest-numbered
//! min-hop route crosses the loaded links while the router 5 detours stay
//! idle. Each hosting router holds one Cnode per tier.

use crate::harness::sweep::SweepSpec;
use crate::scenario::Scenario;

pub const CANONICAL_SCENARIO_JSON: &str = include_str!("../../scenarios/canonical.json");
pub const CANONICAL_SWEEP_JSON: &str = include_str!("../../scenarios/canonical_sweep.json");

pub fn canonical_scenario() -> Scenario {
    Scenario::from_json(CANONICAL_SCENARIO_JSON).expect("canonical scenario parses")
}

pub fn canonical_sweep() -> SweepSpec {
    SweepSpec::from_json(CANONICAL_SWEEP_JSON).expect("canonical sweep parses")
}
