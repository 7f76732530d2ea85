use kwidth::algebras;
use kwidth::consistency::{enforce_kl, enforce_kl_with, is_kl_instance, Schedule, Status};
use kwidth::corpus;
use kwidth::instance::{random_instance, Instance, PartialAssignment, RandomConfig};
use kwidth::relation::Tuple;
use kwidth::solver::{
    enumerate_solutions, extends_to_solution, has_extension_property, is_sensitive, is_sensitive_by_removal,
};
use kwidth_oracles as oracle;
use proptest::prelude::*;

fn to_oracle(inst: &Instance) -> Vec<oracle::Constraint> {
    inst.constraints().map(|(scope, rel)| (scope.to_vec(), rel.iter().cloned().collect())).collect()
}

fn random(which: usize, n_vars: usize, k: usize, seed: u64, planted: bool) -> Instance {
    let alg = match which {
        0 => algebras::majority(),
        1 => algebras::binary_min(),
        2 => algebras::threshold_2_of_4(),
        _ => algebras::second_largest_of_4(),
    };
    let cfg = RandomConfig { plant_solution: planted, ..RandomConfig::default() };
    random_instance(&alg, &cfg, n_vars, k, seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn solver_matches_brute_force(which in 0usize..4, n in 2usize..=5, k in 1usize..=3, seed in any::<u64>(), planted in any::<bool>()) {
        let inst = random(which, n, k.min(n), seed, planted);
        let expected = oracle::solutions(&inst.domains(), &to_oracle(&inst));
        let mut got = enumerate_solutions(&inst, None).unwrap();
        got.sort();
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn sensitivity_routes_agree(which in 0usize..4, n in 2usize..=5, seed in any::<u64>(), planted in any::<bool>()) {
        let inst = random(which, n, 2, seed, planted);
        let a = is_sensitive(&inst).unwrap();
        let b = is_sensitive_by_removal(&inst).unwrap();
        prop_assert_eq!(a.holds, b.holds);
        prop_assert_eq!(a.holds, oracle::sensitive(&inst.domains(), &to_oracle(&inst)));
        if let Some(w) = a.witness {
            let sols = oracle::solutions(&inst.domains(), &to_oracle(&inst));
            prop_assert!(inst.constraint(&w.scope).unwrap().contains(&w.tuple));
            prop_assert!(!oracle::project(&sols, &w.scope).contains(&w.tuple));
        }
    }

    #[test]
    fn enforcement_keeps_solutions_and_is_consistent(which in 0usize..4, n in 2usize..=5, seed in any::<u64>(), planted in any::<bool>()) {
        let inst = random(which, n, 2, seed, planted);
        let sols = enumerate_solutions(&inst, None).unwrap();
        let jacobi = enforce_kl_with(&inst, 2, 3, Schedule::Jacobi).unwrap();
        let gs = enforce_kl_with(&inst, 2, 3, Schedule::GaussSeidel).unwrap();
        prop_assert_eq!(jacobi.status, gs.status);
        match jacobi.status {
            Status::Reject => prop_assert!(sols.is_empty()),
            Status::Enforced => {
                let e = jacobi.instance.as_ref().unwrap();
                prop_assert_eq!(e, gs.instance.as_ref().unwrap());
                prop_assert_eq!(jacobi.removed, gs.removed);
                prop_assert!(is_kl_instance(e, 2, 3).unwrap().holds());
                let mut after = enumerate_solutions(e, None).unwrap();
                let mut before = sols.clone();
                after.sort();
                before.sort();
                prop_assert_eq!(after, before);
                for (scope, rel) in e.constraints() {
                    if let Some(orig) = inst.constraint(scope) {
                        prop_assert!(rel.is_subset(orig));
                    }
                }
                // fixed point
                let again = enforce_kl(e, 2, 3).unwrap();
                prop_assert_eq!(again.removed, 0);
            }
        }
    }

    #[test]
    fn instance_json_round_trips(which in 0usize..4, n in 1usize..=5, k in 1usize..=3, seed in any::<u64>()) {
        let inst = random(which, n, k.min(n), seed, false);
        let json = serde_json::to_string(&inst).unwrap();
        let back: Instance = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(back, inst);
    }

    #[test]
    fn extension_matches_brute_force(which in 0usize..4, n in 2usize..=4, seed in any::<u64>()) {
        let inst = random(which, n, 2, seed, true);
        let report = has_extension_property(&inst).unwrap();
        let cs = to_oracle(&inst);
        let sols = oracle::solutions(&inst.domains(), &cs);
        // brute force: every partial assignment satisfying the constraints inside its support extends
        let mut holds = true;
        for mask in 1u32..(1 << n) {
            let support: Vec<usize> = (0..n).filter(|&v| mask >> v & 1 == 1).collect();
            let inside: Vec<oracle::Constraint> = cs
                .iter()
                .filter(|(s, _)| s.iter().all(|v| support.contains(v)))
                .map(|(s, t)| (s.iter().map(|v| support.iter().position(|u| u == v).unwrap()).collect(), t.clone()))
                .collect();
            let doms: Vec<usize> = support.iter().map(|&v| inst.domain(v)).collect();
            let extendable = oracle::project(&sols, &support);
            for p in oracle::solutions(&doms, &inside) {
                if !extendable.contains(&p) {
                    holds = false;
                }
            }
        }
        prop_assert_eq!(report.holds, holds);
        if let Some(w) = report.witness {
            let partial = PartialAssignment::from_bindings(&inst, w.iter().copied()).unwrap();
            prop_assert!(!extends_to_solution(&inst, &partial).unwrap());
        }
    }
}

/// On a k-uniform (k, k+1)-instance with n variables, sensitivity is exactly (k, n)-consistency.
#[test]
fn sensitivity_is_global_consistency_on_the_corpus() {
    let mut checked = 0;
    for (name, inst) in corpus::instances() {
        let n = inst.num_vars();
        let k = 2;
        let Ok(check) = is_kl_instance(&inst, k, k + 1) else { continue };
        if !check.holds() {
            continue;
        }
        let sens = is_sensitive(&inst).unwrap().holds;
        assert_eq!(sens, is_kl_instance(&inst, k, n).unwrap().holds(), "{name}");
        checked += 1;
    }
    assert!(checked >= 4, "only {checked} bundled instances qualified");
}

#[test]
fn small_graphs() {
    let triangle = corpus::instance("triangle").unwrap();
    assert_eq!(enforce_kl(&triangle, 2, 3).unwrap().status, Status::Reject);
    let c4 = corpus::instance("four-cycle").unwrap();
    let e = enforce_kl(&c4, 2, 3).unwrap();
    assert_eq!(e.status, Status::Enforced);
    assert_eq!(e.instance.as_ref(), Some(&corpus::instance("four-cycle-enforced").unwrap()));
    let sols: Vec<Tuple> = enumerate_solutions(&c4, None).unwrap();
    assert_eq!(sols.len(), 2);
    assert!(is_sensitive(e.instance.as_ref().unwrap()).unwrap().holds);
}
