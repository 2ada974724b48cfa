mod common;

use cncroute::engine::Engine;
use cncroute::model::Outcome;
use cncroute::planner::Scheme;
use common::random_case;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    // Idle network, fresh view, one request: the simulated response is the
    // planner's prediction up to float accumulation.
    #[test]
    fn lone_request_completes_exactly_as_predicted(seed in any::<u64>(), baseline in any::<bool>()) {
        let case = random_case(seed, 5, 4, true);
        let mut sc = case.scenario.clone();
        sc.requests = vec![case.raw_request()];
        if baseline {
            sc.config.scheme = Scheme::ComputingFirst;
        }
        let report = Engine::new(&sc).unwrap().run().unwrap();
        let rec = &report.records[0];
        match rec.outcome.unwrap() {
            Outcome::RejectedInfeasible => {
                prop_assert_eq!(rec.bill.as_ref().unwrap().cost, 0.0);
            }
            outcome => {
                let predicted = rec.predicted_response_s().unwrap();
                let actual = rec.actual_response_s().unwrap();
                prop_assert!((predicted - actual).abs() <= 1e-9, "predicted {predicted} actual {actual}");
                prop_assert_eq!(outcome, Outcome::Completed);
            }
        }
    }
}
