mod oracles;

use flowdse_core::controller::{assign, compute_strategy, ControllerParams, LaneHistogram};
use flowdse_core::Weight;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn strategy_matches_greedy_oracle(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (rates, recipes, routing, params) = oracles::random_controller_instance(&mut rng);
        let s = compute_strategy(&rates, &recipes, &routing, &params);
        let (owners, expected) = oracles::greedy_strategy(&rates, &recipes, &routing, &params);
        for (l, lane) in s.lanes.iter().enumerate() {
            for (b, want) in owners[l].iter().enumerate() {
                prop_assert_eq!(lane.owner(b).map(|a| (a.recipe, a.trim)), *want, "lane {} bin {}", l, b);
            }
        }
        for (got, want) in s.expected_per_min.iter().zip(&expected) {
            prop_assert!((got - want).abs() < 1e-9);
        }
    }

    #[test]
    fn allocations_respect_recipe_windows(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (rates, recipes, routing, params) = oracles::random_controller_instance(&mut rng);
        let s = compute_strategy(&rates, &recipes, &routing, &params);
        for (l, lane) in s.lanes.iter().enumerate() {
            let mut last_hi = Weight::ZERO;
            for a in &lane.allocations {
                let r = &recipes[a.recipe];
                prop_assert!(a.lo >= last_hi && a.lo < a.hi);
                last_hi = a.hi;
                prop_assert!(routing.lanes[l].reachable.contains(&r.destination));
                if a.trim {
                    prop_assert!(routing.lanes[l].has_trimmer);
                    prop_assert!(a.lo >= r.max_weight && a.hi <= r.max_weight + r.max_trim);
                } else {
                    prop_assert!(a.lo >= r.min_weight && a.hi <= r.max_weight);
                }
            }
        }
    }

    #[test]
    fn assignment_is_legal(seed in any::<u64>(), grams in 1u32..=60_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (rates, recipes, routing, params) = oracles::random_controller_instance(&mut rng);
        let s = compute_strategy(&rates, &recipes, &routing, &params);
        let w = Weight::from_mg(grams.min(params.max_weight.mg()));
        for lane in 0..s.lanes.len() {
            let a = assign(7, w, lane, &s, &recipes);
            let r = &recipes[a.recipe];
            let after = w.saturating_sub(a.trim);
            prop_assert!(a.trim <= r.max_trim);
            prop_assert!(r.accepts(after), "{} -> {} for {:?}", w, after, r);
            prop_assert_eq!(after + a.trim, w);
        }
    }

    #[test]
    fn raising_priority_never_hurts(seed in any::<u64>(), pick in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (rates, mut recipes, routing, params) = oracles::random_controller_instance(&mut rng);
        let main = recipes.len() - 1;
        let r = pick % main;
        let before = compute_strategy(&rates, &recipes, &routing, &params).expected_per_min[r];
        let old = recipes[r].priority.unwrap();
        for q in recipes.iter_mut().filter(|q| !q.is_default) {
            let p = q.priority.unwrap();
            if p < old {
                q.priority = Some(p + 1);
            }
        }
        recipes[r].priority = Some(1);
        let after = compute_strategy(&rates, &recipes, &routing, &params).expected_per_min[r];
        let target = recipes[r].target_per_min;
        prop_assert!(after.min(target) >= before.min(target) - 1e-9);
    }

    #[test]
    fn histogram_matches_recount(weights in prop::collection::vec(1u32..=1_000_000, 1..400), window in 1usize..50) {
        let params = ControllerParams { window_size: window, ..Default::default() };
        let mut h = LaneHistogram::new(&params);
        for (k, &mg) in weights.iter().enumerate() {
            h.record(Weight::from_mg(mg), k as f64 * 0.5).unwrap();
            let start = (k + 1).saturating_sub(window);
            let mut counts = vec![0u32; params.bin_count()];
            for &w in &weights[start..=k] {
                counts[((w / 10_000) as usize).min(99)] += 1;
            }
            prop_assert_eq!(h.counts(), counts.as_slice());
        }
        let n = weights.len().min(window);
        let total: f64 = h.rates_per_min().iter().sum();
        if n >= 2 {
            let span = (n - 1) as f64 * 0.5;
            prop_assert!((total - (n - 1) as f64 / span * 60.0).abs() < 1e-9);
        } else {
            prop_assert_eq!(total, 0.0);
        }
    }
}
