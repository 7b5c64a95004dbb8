mod common;

use common::*;
use manna_core::fairness::{check_allocation, is_fair, wef1t_one_sided_envies, witness_holds};
use manna_core::market::{check_equilibrium, FisherMarket};
use manna_core::search::{find_allocations, is_pareto_optimal_integral, DEFAULT_CAP};
use manna_core::{Allocation, Notion};
use proptest::prelude::*;

fn instance_and_allocation() -> impl Strategy<Value = (u64, usize, usize, Vec<usize>)> {
    (any::<u64>(), 1usize..=4, 0usize..=7).prop_flat_map(|(seed, n, m)| {
        (
            Just(seed),
            Just(n),
            Just(m),
            proptest::collection::vec(0..n, m),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn checker_matches_oracle((seed, n, m, owners) in instance_and_allocation(), narrow in any::<bool>()) {
        let range = if narrow { (-2, 2) } else { (-10, 10) };
        let inst = random_instance(seed, n, m, range, (1, 5));
        let a = Allocation::from_owners(n, owners).unwrap();
        for notion in [Notion::Wef, Notion::Wef1, Notion::Wef1t] {
            let report = check_allocation(&inst, &a, notion);
            for row in &report.verdicts {
                for v in row {
                    let (i, j) = (v.envier, v.envied);
                    let expected = match notion {
                        Notion::Wef => envies(&inst, &a, i, j),
                        Notion::Wef1 => ef1_envies(&inst, &a, i, j),
                        Notion::Wef1t => ef1t_envies(&inst, &a, i, j),
                    };
                    prop_assert_eq!(v.envies, expected, "{} ({}, {})", notion, i, j);
                    prop_assert!(witness_holds(&inst, &a, v));
                    // a witness exists exactly when plain envy is rescued
                    prop_assert_eq!(v.witness.is_some(), envies(&inst, &a, i, j) && !expected);
                }
            }
            let b = bundles(&a);
            for i in 0..n {
                for j in 0..n {
                    let direct = value(&inst, i, &b[j]) / inst.weight(j);
                    prop_assert_eq!(&report.weighted_values[i][j], &direct);
                }
            }
        }
    }

    #[test]
    fn one_sided_reading_is_stronger((seed, n, m, owners) in instance_and_allocation()) {
        let inst = random_instance(seed, n, m, (-5, 5), (1, 3));
        let a = Allocation::from_owners(n, owners).unwrap();
        for i in 0..n {
            for j in 0..n {
                if ef1t_envies(&inst, &a, i, j) {
                    prop_assert!(wef1t_one_sided_envies(&inst, &a, i, j));
                }
            }
        }
    }

    #[test]
    fn equal_weights_reduce_to_unweighted((seed, n, m, owners) in instance_and_allocation(), w in 1i64..6) {
        let inst = random_instance(seed, n, m, (-10, 10), (1, 1));
        let inst = inst.with_weights(vec![q(w); n]).unwrap();
        let a = Allocation::from_owners(n, owners).unwrap();
        // unweighted EF1 written without any division
        let b = bundles(&a);
        let unweighted = (0..n).all(|i| (0..n).all(|j| {
            let own = value(&inst, i, &b[i]);
            let other = value(&inst, i, &b[j]);
            i == j || own >= other
                || b[i].iter().any(|&t| own.clone() - inst.value(i, t) >= other)
                || b[j].iter().any(|&t| own >= other.clone() - inst.value(i, t))
        }));
        prop_assert_eq!(is_fair(&inst, &a, Notion::Wef1), unweighted);
    }

    #[test]
    fn equilibrium_checker_matches_oracle(seed in any::<u64>(), n in 1usize..=3, m in 1usize..=5, owners_seed in any::<u64>(), price_seed in any::<u64>()) {
        let inst = random_instance(seed, n, m, (-2, 2), (1, 3));
        let mut s = owners_seed;
        let owners = (0..m).map(|_| { s = mix64(s); (s % n as u64) as usize }).collect();
        let a = Allocation::from_owners(n, owners).unwrap();
        // prices drawn from a small set so that equilibria actually occur
        let mut s = price_seed;
        let prices: Vec<_> = (0..m).map(|j| {
            s = mix64(s);
            let choices = [q(1), q(2), frac(1, 2), q(-1), q(-2), frac(-1, 2), q(0)];
            let kind = inst.classify_item(j);
            if kind.is_neutral() || s % 5 == 0 {
                choices[(s % 7) as usize].clone()
            } else {
                // value of the owner keeps alpha = 1 candidates around
                inst.value(a.owner(j), j).clone()
            }
        }).collect();
        let lib = check_equilibrium(&inst, &FisherMarket::integral(a.clone(), prices.clone())).is_ok();
        prop_assert_eq!(lib, is_equilibrium(&inst, &a, &prices));
    }
}

#[test]
fn search_matches_oracle_enumeration() {
    for seed in 0..60u64 {
        let n = 1 + (seed % 3) as usize;
        let m = (seed % 6) as usize;
        let inst = random_instance(seed, n, m, (-4, 4), (1, 4));
        for notion in [Notion::Wef, Notion::Wef1, Notion::Wef1t] {
            let report = find_allocations(&inst, notion, DEFAULT_CAP).unwrap();
            let oracle: Vec<Vec<usize>> = all_allocations(n, m)
                .into_iter()
                .filter(|a| match notion {
                    Notion::Wef => is_ef(&inst, a),
                    Notion::Wef1 => is_ef1(&inst, a),
                    Notion::Wef1t => is_ef1t(&inst, a),
                })
                .map(|a| a.owners().to_vec())
                .collect();
            assert_eq!(report.satisfying, oracle, "seed {seed} {notion}");
            assert_eq!(report.total, (n as u64).pow(m as u32));
        }
        for a in all_allocations(n, m).iter().take(30) {
            assert_eq!(
                is_pareto_optimal_integral(&inst, a, DEFAULT_CAP).unwrap(),
                pareto_dominator(&inst, a).is_none()
            );
        }
    }
}
