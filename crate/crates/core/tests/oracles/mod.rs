//! Brute-force reference implementations shared by the integration and
//! acceptance tests. Written from the definitions, not from the library code.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use flowdse_core::controller::ControllerParams;
use flowdse_core::dsm::{DesignSpaceMatrix, PortBounds, PortRef};
use flowdse_core::evaluate::Orientation;
use flowdse_core::plant::{LaneRouting, RoutingTable};
use flowdse_core::scenario::Recipe;
use flowdse_core::Weight;
use rand::Rng;

/// Every subset of the allowed entries that meets the port bounds and the
/// all-or-none rule, in lexicographic bit-vector order (first entry most
/// significant, absent before present).
pub fn enumerate_designs(dsm: &DesignSpaceMatrix) -> Vec<Vec<(usize, usize)>> {
    let entries = dsm.entries();
    let n = entries.len();
    assert!(n <= 20, "oracle is exponential");
    let mut out = Vec::new();
    for mask in 0u64..(1 << n) {
        let chosen: Vec<(usize, usize)> = (0..n)
            .filter(|&k| mask & (1 << (n - 1 - k)) != 0)
            .map(|k| entries[k])
            .collect();
        if is_valid(dsm, &chosen) {
            out.push(chosen);
        }
    }
    out
}

pub fn is_valid(dsm: &DesignSpaceMatrix, chosen: &[(usize, usize)]) -> bool {
    let mut out_n = vec![0u32; dsm.outputs().len()];
    let mut in_n = vec![0u32; dsm.inputs().len()];
    for &(o, i) in chosen {
        out_n[o] += 1;
        in_n[i] += 1;
    }
    let within = |n: u32, b: PortBounds| b.min <= n && n <= b.max;
    if !(0..out_n.len()).all(|o| within(out_n[o], dsm.output_bounds(o))) {
        return false;
    }
    if !(0..in_n.len()).all(|i| within(in_n[i], dsm.input_bounds(i))) {
        return false;
    }
    for m in dsm.all_or_none() {
        let mut states = Vec::new();
        for (o, p) in dsm.outputs().iter().enumerate() {
            if &p.module == m {
                states.push(out_n[o] > 0);
            }
        }
        for (i, p) in dsm.inputs().iter().enumerate() {
            if &p.module == m {
                states.push(in_n[i] > 0);
            }
        }
        if states.iter().any(|&s| s) && !states.iter().all(|&s| s) {
            return false;
        }
    }
    true
}

/// Small random matrix: up to 4 outputs, 4 inputs, 12 allowed entries,
/// modules shared between sides so all-or-none has bite. `None` when the
/// drawn bounds are infeasible.
pub fn random_dsm<R: Rng>(rng: &mut R) -> Option<DesignSpaceMatrix> {
    let n_out = rng.random_range(1..=4);
    let n_in = rng.random_range(1..=4);
    let modules = ["a", "b", "c", "d"];
    let outputs: Vec<PortRef> = (0..n_out)
        .map(|k| PortRef::output(modules[rng.random_range(0..4)], format!("out{k}")))
        .collect();
    let inputs: Vec<PortRef> = (0..n_in)
        .map(|k| PortRef::input(modules[rng.random_range(0..4)], format!("in{k}")))
        .collect();
    let mut cells: Vec<(usize, usize)> =
        (0..n_out).flat_map(|o| (0..n_in).map(move |i| (o, i))).collect();
    let keep = rng.random_range(0..=cells.len().min(12));
    for k in 0..cells.len() {
        let j = rng.random_range(k..cells.len());
        cells.swap(k, j);
    }
    cells.truncate(keep);
    let mut bounds = Vec::new();
    for p in outputs.iter().chain(inputs.iter()) {
        if rng.random_bool(0.7) {
            let min = rng.random_range(0..=2);
            let max = rng.random_range(min..=3);
            bounds.push((p.clone(), PortBounds::new(min, max)));
        }
    }
    let aon: BTreeSet<String> = outputs
        .iter()
        .chain(inputs.iter())
        .map(|p| p.module.clone())
        .filter(|_| rng.random_bool(0.4))
        .collect();
    DesignSpaceMatrix::new(outputs, inputs, cells, bounds, aon).ok()
}

/// Per lane, per bin: `(recipe index, trim)` of the owning allocation.
pub type Owners = Vec<Vec<Option<(usize, bool)>>>;

/// Step-by-step greedy allocation in grams. Each bin `[lo, hi)` is examined
/// in ascending weight order; a bin is usable for direct production when
/// `min <= lo && hi <= max`, for trimming when `max <= lo && hi <= max +
/// max_trim`. Growth stops as soon as the accumulated rate reaches the
/// target.
pub fn greedy_strategy(
    rates: &[Vec<f64>],
    recipes: &[Recipe],
    routing: &RoutingTable,
    params: &ControllerParams,
) -> (Owners, Vec<f64>) {
    let bins = rates.first().map_or(0, Vec::len);
    let w = params.bin_width.grams();
    let mut owner: Owners = vec![vec![None; bins]; rates.len()];
    let mut expected = vec![0.0; recipes.len()];
    let mut by_priority: Vec<(u32, usize)> = recipes
        .iter()
        .enumerate()
        .filter(|(_, r)| !r.is_default)
        .map(|(k, r)| (r.priority.unwrap(), k))
        .collect();
    by_priority.sort();
    for (_, r) in by_priority {
        let recipe = &recipes[r];
        let lanes: Vec<usize> = (0..rates.len())
            .filter(|&l| routing.lanes[l].reachable.contains(&recipe.destination))
            .collect();
        if lanes.is_empty() {
            continue;
        }
        let (min, max, trim) =
            (recipe.min_weight.grams(), recipe.max_weight.grams(), recipe.max_trim.grams());
        let mut got = 0.0;
        let mut direct = Vec::new();
        for b in 0..bins {
            let (lo, hi) = (b as f64 * w, (b + 1) as f64 * w);
            if got >= recipe.target_per_min {
                break;
            }
            if lo >= min - 1e-9 && hi <= max + 1e-9 {
                for &l in &lanes {
                    if owner[l][b].is_none() {
                        got += rates[l][b];
                    }
                }
                direct.push(b);
            }
        }
        let trim_lanes: Vec<usize> =
            lanes.iter().copied().filter(|&l| routing.lanes[l].has_trimmer).collect();
        let mut trimmed = Vec::new();
        if got < recipe.target_per_min && trim > 0.0 {
            for b in 0..bins {
                let (lo, hi) = (b as f64 * w, (b + 1) as f64 * w);
                if got >= recipe.target_per_min {
                    break;
                }
                if lo >= max - 1e-9 && hi <= max + trim + 1e-9 {
                    for &l in &trim_lanes {
                        if owner[l][b].is_none() {
                            got += rates[l][b];
                        }
                    }
                    trimmed.push(b);
                }
            }
        }
        expected[r] = got;
        for &l in &lanes {
            for &b in &direct {
                owner[l][b].get_or_insert((r, false));
            }
        }
        for &l in &trim_lanes {
            for &b in &trimmed {
                owner[l][b].get_or_insert((r, true));
            }
        }
    }
    (owner, expected)
}

pub fn routing_table(lanes: &[(Vec<String>, bool)]) -> RoutingTable {
    RoutingTable {
        lanes: lanes
            .iter()
            .enumerate()
            .map(|(k, (dests, trim))| LaneRouting {
                lane: k + 1,
                reachable: dests.iter().cloned().collect(),
                has_trimmer: *trim,
                paths: BTreeMap::new(),
                trim_edge: None,
            })
            .collect(),
    }
}

/// Random instance with at most 2 lanes, 6 bins of 10 g and 3 recipes plus
/// the default.
pub fn random_controller_instance<R: Rng>(
    rng: &mut R,
) -> (Vec<Vec<f64>>, Vec<Recipe>, RoutingTable, ControllerParams) {
    let bins = rng.random_range(1..=6usize);
    let params = ControllerParams {
        bin_width: Weight::from_grams(10.0),
        max_weight: Weight::from_grams(10.0 * bins as f64),
        ..Default::default()
    };
    let lanes = rng.random_range(1..=2usize);
    let rates: Vec<Vec<f64>> = (0..lanes)
        .map(|_| {
            (0..bins)
                .map(|_| if rng.random_bool(0.2) { 0.0 } else { f64::from(rng.random_range(1..=20u32)) })
                .collect()
        })
        .collect();
    let n_recipes = rng.random_range(1..=3usize);
    let mut priorities: Vec<u32> = (1..=n_recipes as u32).collect();
    for k in 0..priorities.len() {
        let j = rng.random_range(k..priorities.len());
        priorities.swap(k, j);
    }
    let top = 10 * bins as u32;
    let mut recipes: Vec<Recipe> = (0..n_recipes)
        .map(|k| {
            // Limits on a 5 g grid so some fall inside bins.
            let a = 5 * rng.random_range(0..=top / 5);
            let b = 5 * rng.random_range(0..=top / 5);
            let (lo, hi) = (a.min(b), a.max(b));
            let trim = if rng.random_bool(0.5) { 5 * rng.random_range(0..=6u32) } else { 0 };
            Recipe::new(
                &format!("r{k}"),
                &format!("recipe {k}"),
                &format!("dest{k}"),
                priorities[k],
                f64::from(rng.random_range(0..=60u32)),
                f64::from(lo),
                f64::from(hi),
                f64::from(trim),
            )
        })
        .collect();
    recipes.push(Recipe::default_for("strips"));
    let routing = routing_table(
        &(0..lanes)
            .map(|_| {
                let mut d: Vec<String> =
                    (0..n_recipes).filter(|_| rng.random_bool(0.75)).map(|k| format!("dest{k}")).collect();
                d.push("strips".to_string());
                (d, rng.random_bool(0.5))
            })
            .collect::<Vec<_>>(),
    );
    (rates, recipes, routing, params)
}

/// O(n^2) pairwise dominance.
pub fn pareto_front(points: &[Vec<f64>], orientations: &[Orientation]) -> Vec<bool> {
    let better = |a: f64, b: f64, o: Orientation| match o {
        Orientation::Max => a > b,
        Orientation::Min => a < b,
    };
    let at_least = |a: f64, b: f64, o: Orientation| match o {
        Orientation::Max => a >= b,
        Orientation::Min => a <= b,
    };
    points
        .iter()
        .map(|p| {
            !points.iter().any(|q| {
                let weak = q.iter().zip(p).zip(orientations).all(|((&x, &y), &o)| at_least(x, y, o));
                let strict = q.iter().zip(p).zip(orientations).any(|((&x, &y), &o)| better(x, y, o));
                weak && strict
            })
        })
        .collect()
}
