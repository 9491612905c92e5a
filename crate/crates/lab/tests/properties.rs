use std::collections::BTreeSet;

use lexjoin_lab::clique::{brute_zero_clique, WeightedCliqueInstance};
use lexjoin_lab::field::{interval_tuples, IntervalSplit, Randomization, Variant};
use lexjoin_lab::reduction::{default_rho, find_zero_clique_via_reduction};
use lexjoin_lab::setfamily::{unique_via_bit_probing, BruteForceBackend, EngineBackend, SetFamilyInstance};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn instance(parts: usize, size: usize, bound: i64, seed: u64) -> WeightedCliqueInstance {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    WeightedCliqueInstance::from_fn(vec![size; parts], |_, _, _, _| rng.gen_range(-bound..=bound)).unwrap()
}

fn pair_sum(g: &WeightedCliqueInstance, c: &[usize]) -> i128 {
    (0..c.len()).flat_map(|a| (a + 1..c.len()).map(move |b| (a, b))).map(|(a, b)| i128::from(g.weight(a, c[a], b, c[b]))).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reweighting_scales_every_clique(parts in 3usize..5, seed: u64, first in any::<bool>()) {
        let g = instance(parts, 3, 30, seed);
        let p = 1_000_003u64;
        let variant = if first { Variant::FirstAndLastPart } else { Variant::LastPart };
        let r = Randomization::sample(&g, p, variant, &mut ChaCha8Rng::seed_from_u64(seed ^ 1));
        let h = r.apply(&g);
        for c in g.cliques() {
            let lhs = pair_sum(&h, &c).rem_euclid(i128::from(p));
            let rhs = (i128::from(r.x) * pair_sum(&g, &c)).rem_euclid(i128::from(p));
            prop_assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn interval_tuples_are_exactly_the_zero_sums(p in 2u64..60, m_frac in 0.0f64..1.0, k in 1usize..4) {
        let m = 1 + ((p - 1) as f64 * m_frac) as u64;
        let split = IntervalSplit::new(p, m).unwrap();
        let emitted: BTreeSet<Vec<u64>> = interval_tuples(split, k).collect();
        // brute force over all residue tuples summing to 0 mod p
        let mut reached = BTreeSet::new();
        let total = p.pow(k as u32);
        for code in 0..total {
            let mut values = Vec::with_capacity(k + 1);
            let mut c = code;
            for _ in 0..k {
                values.push(c % p);
                c /= p;
            }
            let partial: u64 = values.iter().sum::<u64>() % p;
            values.push((p - partial) % p);
            reached.insert(values.iter().map(|&v| split.index_of(v)).collect::<Vec<_>>());
        }
        prop_assert_eq!(emitted, reached);
    }

    #[test]
    fn reduction_never_reports_a_nonzero_clique(seed: u64, bound in 1i64..20) {
        let g = instance(3, 4, bound, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let report = find_zero_clique_via_reduction(&g, &default_rho(2), &mut rng, &EngineBackend).unwrap();
        match report.clique {
            Some(c) => prop_assert_eq!(pair_sum(&g, &c), 0),
            None => prop_assert!(brute_zero_clique(&g).is_none() || report.instances > 0),
        }
    }

    #[test]
    fn bit_probing_only_returns_common_elements(
        universe in 1usize..40,
        sets in proptest::collection::vec(proptest::collection::btree_set(0usize..40, 0..10), 2..4),
    ) {
        let families: Vec<Vec<BTreeSet<usize>>> =
            sets.into_iter().map(|s| vec![s.into_iter().filter(|&e| e < universe).collect()]).collect();
        let query = vec![0; families.len()];
        let inst = SetFamilyInstance::new(universe, families, vec![query.clone()]).unwrap();
        let common = inst.intersection(&query);
        for got in [
            unique_via_bit_probing(&BruteForceBackend, &inst, &query).unwrap(),
            unique_via_bit_probing(&EngineBackend, &inst, &query).unwrap(),
        ] {
            if let Some(e) = got {
                prop_assert!(common.contains(&e));
            }
            if common.len() == 1 {
                prop_assert_eq!(got, common.iter().next().copied());
            }
        }
    }
}
