use std::sync::Arc;

use crowdprice_core::cp::{accepted_set, cp_exact_oracle, cp_no_bonus, solve_cp, CpOptions};
use crowdprice_core::pp::{solve_gkp_exact, GkpInstance};
use crowdprice_core::utility::{Additive, Typo};
use crowdprice_core::{decide, UtilityFunction, WorkerProfile};
use proptest::prelude::*;

fn workers() -> impl Strategy<Value = Vec<WorkerProfile>> {
    prop::collection::vec((0.05f64..1.0, 0.1f64..1.0), 1..9).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (r, c))| WorkerProfile::new(i as u64 + 1, r, c))
            .collect()
    })
}

fn utilities() -> Vec<UtilityFunction> {
    vec![Arc::new(Additive), Arc::new(Typo::threshold(25, 1).unwrap())]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pricing_families_are_ordered(ws in workers(), frac in 0.0f64..1.0) {
        let budget = frac * ws.iter().map(|w| w.cost).sum::<f64>();
        for u in utilities() {
            let pp = solve_gkp_exact(&GkpInstance::new(ws.clone(), budget, u.clone()).unwrap()).unwrap();
            let cp = cp_exact_oracle(&ws, budget, &u).unwrap();
            let nb = cp_no_bonus(&ws, budget, &u).unwrap();
            prop_assert!(pp.utility_value + 1e-9 >= cp.utility_value);
            prop_assert!(cp.utility_value + 1e-9 >= nb.utility_value);
        }
    }

    #[test]
    fn reported_sets_reproduce(ws in workers(), frac in 0.0f64..1.0) {
        let budget = frac * ws.iter().map(|w| w.cost).sum::<f64>();
        for u in utilities() {
            let opts = CpOptions { oracle_check: true, ..CpOptions::default() };
            let (_, rep) = solve_cp(&ws, budget, &u, &opts).unwrap();
            let redo: Vec<bool> = ws.iter().map(|w| decide(w, &rep.policy)).collect();
            prop_assert_eq!(&redo, &rep.accepted);
            let (_, spent) = accepted_set(&ws, &rep.policy);
            prop_assert!(spent <= budget);
            prop_assert_eq!(spent, rep.spent);
        }
    }
}
