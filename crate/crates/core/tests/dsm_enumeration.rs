mod oracles;

use std::collections::BTreeSet;

use flowdse_core::dsm::{count_designs, design_by_id, find_design, sample_designs};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn enumeration_matches_subset_oracle(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let Some(dsm) = oracles::random_dsm(&mut rng) else { return Ok(()); };
        let expected = oracles::enumerate_designs(&dsm);
        let got: Vec<_> = dsm.designs().collect();
        prop_assert_eq!(got.len(), expected.len());
        prop_assert_eq!(count_designs(&dsm), expected.len() as u64);
        for (k, (d, e)) in got.iter().zip(&expected).enumerate() {
            prop_assert_eq!(d.id, k as u64);
            let pairs: Vec<(usize, usize)> = d.connections.iter().map(|c| (c.output, c.input)).collect();
            prop_assert_eq!(&pairs, e);
        }
    }

    #[test]
    fn wiring_lookup_round_trips(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let Some(dsm) = oracles::random_dsm(&mut rng) else { return Ok(()); };
        for d in dsm.designs() {
            let wiring = d.wiring(&dsm);
            prop_assert_eq!(find_design(&dsm, &wiring), Some(d.clone()));
            prop_assert_eq!(design_by_id(&dsm, d.id), Some(d.clone()));
        }
        prop_assert!(design_by_id(&dsm, count_designs(&dsm)).is_none());
    }

    #[test]
    fn samples_are_distinct_designs(seed in any::<u64>(), k in 0usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let Some(dsm) = oracles::random_dsm(&mut rng) else { return Ok(()); };
        let all: Vec<_> = dsm.designs().collect();
        let s = sample_designs(&dsm, k, seed);
        prop_assert_eq!(s.len(), k.min(all.len()));
        let ids: BTreeSet<u64> = s.iter().map(|d| d.id).collect();
        prop_assert_eq!(ids.len(), s.len());
        for d in &s {
            prop_assert_eq!(d, &all[d.id as usize]);
        }
        prop_assert_eq!(sample_designs(&dsm, k, seed), s);
    }

    #[test]
    fn restriction_keeps_base_and_shrinks(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let Some(dsm) = oracles::random_dsm(&mut rng) else { return Ok(()); };
        let Some(base) = dsm.designs().next() else { return Ok(()); };
        let free: BTreeSet<String> = dsm.modules().into_iter().take(1).map(str::to_string).collect();
        let sub = dsm.restrict(&free, &base);
        let full: BTreeSet<Vec<(usize, usize)>> = oracles::enumerate_designs(&dsm).into_iter().collect();
        let part = oracles::enumerate_designs(&sub);
        prop_assert!(part.iter().any(|d| d.iter().copied().eq(base.connections.iter().map(|c| (c.output, c.input)))));
        for d in &part {
            prop_assert!(full.contains(d));
        }
    }
}
