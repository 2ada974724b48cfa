mod common;

use cncroute::model::Verdict;
use cncroute::planner::{Planner, PlannerConfig, Scheme};
use common::{exhaustive_single, plan_cost, random_case, replay_plan};
use proptest::prelude::*;

const SCHEMES: [Scheme; 2] = [Scheme::Cnc, Scheme::ComputingFirst];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn single_assignment_plans_match_exhaustive_search(seed in any::<u64>()) {
        let case = random_case(seed, 5, 4, false);
        let topo = case.topology();
        let view = case.view(&topo);
        let planner = Planner::new(&topo, PlannerConfig { max_split: 1, ..Default::default() });
        for scheme in SCHEMES {
            let plan = planner.plan_with(scheme, &view, &case.request).unwrap();
            match exhaustive_single(&case, scheme) {
                None => {
                    prop_assert_eq!(plan.verdict, Verdict::Infeasible);
                    prop_assert_eq!(plan.predicted_cost, 0.0);
                }
                Some(best) => {
                    prop_assert_eq!(plan.verdict, Verdict::Feasible);
                    prop_assert_eq!(plan.predicted_cost, best.cost);
                    prop_assert_eq!(plan.cnodes(), vec![best.cnode]);
                    prop_assert!((plan.predicted_response_s - best.response_s).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn split_plans_replay_to_their_prediction(seed in any::<u64>()) {
        let case = random_case(seed, 5, 4, false);
        let topo = case.topology();
        let view = case.view(&topo);
        let planner = Planner::new(&topo, PlannerConfig::default());
        for scheme in SCHEMES {
            for cand in planner.candidates(scheme, &view, &case.request).unwrap() {
                let replayed = replay_plan(&case, scheme, &cand);
                prop_assert!((cand.predicted_response_s - replayed).abs() <= 1e-9,
                    "predicted {} replayed {}", cand.predicted_response_s, replayed);
                prop_assert_eq!(cand.predicted_cost, plan_cost(&case, &cand));
                let tasks: u32 = cand.assignments.iter().map(|a| a.task_count()).sum();
                prop_assert_eq!(tasks, case.request.task_count);
            }
        }
    }

    #[test]
    fn splitting_never_loses_to_the_single_optimum(seed in any::<u64>()) {
        let case = random_case(seed, 5, 4, false);
        let topo = case.topology();
        let view = case.view(&topo);
        let planner = Planner::new(&topo, PlannerConfig::default());
        let plan = planner.plan(&view, &case.request).unwrap();
        if plan.is_feasible() {
            prop_assert!(plan.predicted_response_s <= case.request.deadline_s);
        }
        if let Some(best) = exhaustive_single(&case, Scheme::Cnc) {
            prop_assert!(plan.is_feasible());
            prop_assert!(plan.predicted_cost <= best.cost);
        }
    }
}
