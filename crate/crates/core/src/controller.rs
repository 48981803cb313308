//! Production controller: sliding-window weight histograms, the
//! priority-greedy strategy calculation, and per-fillet assignment.
//!
//! Weights are bucketed into half-open bins `[k * w, (k + 1) * w)` over
//! `(0, max_weight]`; a fillet of exactly `max_weight` counts in the last bin.
//! Intervals in a strategy are unions of whole bins.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::plant::RoutingTable;
use crate::scenario::{Recipe, MAX_FILLET_WEIGHT};
use crate::units::Weight;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ControllerParams {
    /// Measurements kept per lane.
    pub window_size: usize,
    pub recompute_period_s: f64,
    pub bin_width: Weight,
    /// Upper end of the measured range; the lower end is 0 (exclusive).
    pub max_weight: Weight,
}

impl Default for ControllerParams {
    fn default() -> Self {
        ControllerParams {
            window_size: 200,
            recompute_period_s: 10.0,
            bin_width: Weight::from_mg(10_000),
            max_weight: MAX_FILLET_WEIGHT,
        }
    }
}

impl ControllerParams {
    pub fn validate(&self) -> Result<(), ControllerError> {
        if self.window_size == 0 {
            return Err(ControllerError::Params("window size must be at least 1"));
        }
        if !(self.recompute_period_s.is_finite() && self.recompute_period_s > 0.0) {
            return Err(ControllerError::Params("recompute period must be positive"));
        }
        if self.bin_width.mg() == 0 || !self.max_weight.mg().is_multiple_of(self.bin_width.mg()) {
            return Err(ControllerError::Params("bin width must divide the weight range"));
        }
        Ok(())
    }

    pub fn bin_count(&self) -> usize {
        (self.max_weight.mg() / self.bin_width.mg()) as usize
    }

    pub fn bin_of(&self, w: Weight) -> usize {
        ((w.mg() / self.bin_width.mg()) as usize).min(self.bin_count() - 1)
    }

    pub fn bin_lo(&self, bin: usize) -> Weight {
        Weight::from_mg(bin as u32 * self.bin_width.mg())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ControllerError {
    Params(&'static str),
    WeightOutOfRange(Weight),
}

impl fmt::Display for ControllerError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControllerError::Params(why) => write!(f, "invalid controller parameters: {why}"),
            ControllerError::WeightOutOfRange(w) => write!(f, "weight {w} outside (0, max]"),
        }
    }
}

/// The most recent `window_size` measurements of one lane.
#[derive(Clone, Debug)]
pub struct LaneHistogram {
    window: usize,
    bin_width: Weight,
    max_weight: Weight,
    buffer: VecDeque<(Weight, f64)>,
    counts: Vec<u32>,
}

impl LaneHistogram {
    pub fn new(params: &ControllerParams) -> Self {
        LaneHistogram {
            window: params.window_size,
            bin_width: params.bin_width,
            max_weight: params.max_weight,
            buffer: VecDeque::with_capacity(params.window_size + 1),
            counts: vec![0; params.bin_count()],
        }
    }

    fn bin_of(&self, w: Weight) -> usize {
        ((w.mg() / self.bin_width.mg()) as usize).min(self.counts.len() - 1)
    }

    /// Adds one measurement taken at `time` seconds, evicting the oldest
    /// when the window is full.
    pub fn record(&mut self, weight: Weight, time: f64) -> Result<(), ControllerError> {
        if weight == Weight::ZERO || weight > self.max_weight {
            return Err(ControllerError::WeightOutOfRange(weight));
        }
        let bin = self.bin_of(weight);
        self.counts[bin] += 1;
        self.buffer.push_back((weight, time));
        if self.buffer.len() > self.window {
            let (old, _) = self.buffer.pop_front().expect("non-empty");
            let b = self.bin_of(old);
            self.counts[b] -= 1;
        }
        Ok(())
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn weights(&self) -> impl Iterator<Item = Weight> + '_ {
        self.buffer.iter().map(|&(w, _)| w)
    }

    /// Seconds between the oldest and newest buffered measurement.
    pub fn window_span(&self) -> f64 {
        match (self.buffer.front(), self.buffer.back()) {
            (Some(&(_, a)), Some(&(_, b))) => b - a,
            _ => 0.0,
        }
    }

    /// Measured arrival rate per bin, fillets per minute. The lane rate is
    /// `(n - 1) / span`, split over bins by count.
    pub fn rates_per_min(&self) -> Vec<f64> {
        let n = self.buffer.len();
        let span = self.window_span();
        if n < 2 || span <= 0.0 {
            return vec![0.0; self.counts.len()];
        }
        let per_count = (n - 1) as f64 / span * 60.0 / n as f64;
        self.counts.iter().map(|&c| f64::from(c) * per_count).collect()
    }
}

/// A weight interval of one lane given to one recipe.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Allocation {
    /// Index into the recipe slice the strategy was computed from.
    pub recipe: usize,
    pub lo: Weight,
    pub hi: Weight,
    pub trim: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LaneStrategy {
    pub lane: usize,
    /// Sorted by `lo`, pairwise disjoint.
    pub allocations: Vec<Allocation>,
    bin_owner: Vec<Option<u16>>,
}

impl LaneStrategy {
    /// Allocation owning `bin`, if any.
    pub fn owner(&self, bin: usize) -> Option<&Allocation> {
        self.bin_owner[bin].map(|k| &self.allocations[usize::from(k)])
    }
}

/// Per-lane weight allocations. Anything unallocated goes to the default
/// recipe.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductionStrategy {
    pub lanes: Vec<LaneStrategy>,
    pub default_recipe: usize,
    /// Expected allocated throughput per recipe (fillets/min), indexed like
    /// the recipe slice.
    pub expected_per_min: Vec<f64>,
    params: ControllerParams,
}

/// Row of a strategy export: `(lane, lo, hi, recipe index, trim)`.
pub type StrategyRow = (usize, Weight, Weight, usize, bool);

impl ProductionStrategy {
    /// Strategy that sends everything to the default recipe.
    pub fn empty(lanes: &[usize], recipes: &[Recipe], params: &ControllerParams) -> Self {
        ProductionStrategy {
            lanes: lanes
                .iter()
                .map(|&lane| LaneStrategy {
                    lane,
                    allocations: Vec::new(),
                    bin_owner: vec![None; params.bin_count()],
                })
                .collect(),
            default_recipe: default_index(recipes),
            expected_per_min: vec![0.0; recipes.len()],
            params: params.clone(),
        }
    }

    pub fn params(&self) -> &ControllerParams {
        &self.params
    }

    pub fn rows(&self) -> Vec<StrategyRow> {
        self.lanes
            .iter()
            .flat_map(|l| l.allocations.iter().map(move |a| (l.lane, a.lo, a.hi, a.recipe, a.trim)))
            .collect()
    }
}

fn default_index(recipes: &[Recipe]) -> usize {
    recipes.iter().position(|r| r.is_default).unwrap_or(recipes.len())
}

fn ceil_div(a: u32, b: u32) -> u32 {
    a.div_ceil(b)
}

/// Priority-greedy strategy calculation.
///
/// `rates[k]` is the per-bin arrival rate (fillets/min) of the lane
/// `routing.lanes[k]`. Recipes are served in ascending priority number. Each
/// grows a direct interval bin by bin from its lower weight limit over the
/// lanes that can reach its destination, until the expected throughput meets
/// the target or the upper limit is hit. If still short, lanes with a trimmer
/// grow a trim interval upward from the upper limit to at most
/// `max_weight + max_trim`. Bins taken by a recipe are unavailable to later
/// recipes on the same lane.
pub fn compute_strategy(
    rates: &[Vec<f64>],
    recipes: &[Recipe],
    routing: &RoutingTable,
    params: &ControllerParams,
) -> ProductionStrategy {
    assert_eq!(rates.len(), routing.lanes.len(), "one rate histogram per lane");
    let lane_ids: Vec<usize> = routing.lanes.iter().map(|l| l.lane).collect();
    let mut strategy = ProductionStrategy::empty(&lane_ids, recipes, params);
    let bins = params.bin_count();
    let bw = params.bin_width.mg();
    let mut available = vec![vec![true; bins]; rates.len()];
    let mut owner: Vec<Vec<Option<(usize, bool)>>> = vec![vec![None; bins]; rates.len()];

    let mut order: Vec<usize> = (0..recipes.len()).filter(|&k| !recipes[k].is_default).collect();
    order.sort_by_key(|&k| (recipes[k].priority.unwrap_or(u32::MAX), k));

    for r in order {
        let recipe = &recipes[r];
        let lanes: Vec<usize> = (0..rates.len())
            .filter(|&l| routing.lanes[l].reachable.contains(&recipe.destination))
            .collect();
        if lanes.is_empty() {
            continue;
        }
        let target = recipe.target_per_min;
        let gain = |lanes: &[usize], bin: usize, available: &[Vec<bool>]| -> f64 {
            lanes.iter().filter(|&&l| available[l][bin]).map(|&l| rates[l][bin]).sum()
        };

        let direct_from = ceil_div(recipe.min_weight.mg(), bw) as usize;
        let direct_limit = ((recipe.max_weight.mg() / bw) as usize).min(bins);
        let mut expected = 0.0;
        let mut direct_to = direct_from;
        while expected < target && direct_to < direct_limit {
            expected += gain(&lanes, direct_to, &available);
            direct_to += 1;
        }

        let trim_lanes: Vec<usize> =
            lanes.iter().copied().filter(|&l| routing.lanes[l].has_trimmer).collect();
        let trim_from = ceil_div(recipe.max_weight.mg(), bw) as usize;
        let mut trim_to = trim_from;
        if expected < target && recipe.max_trim > Weight::ZERO && !trim_lanes.is_empty() {
            let trim_limit =
                (((recipe.max_weight.mg() + recipe.max_trim.mg()) / bw) as usize).min(bins);
            while expected < target && trim_to < trim_limit {
                expected += gain(&trim_lanes, trim_to, &available);
                trim_to += 1;
            }
        }
        strategy.expected_per_min[r] = expected;

        for &l in &lanes {
            for b in direct_from..direct_to {
                if available[l][b] {
                    available[l][b] = false;
                    owner[l][b] = Some((r, false));
                }
            }
        }
        for &l in &trim_lanes {
            for b in trim_from..trim_to {
                if available[l][b] {
                    available[l][b] = false;
                    owner[l][b] = Some((r, true));
                }
            }
        }
    }

    for (l, lane) in strategy.lanes.iter_mut().enumerate() {
        let mut b = 0;
        while b < bins {
            let Some((recipe, trim)) = owner[l][b] else {
                b += 1;
                continue;
            };
            let start = b;
            while b < bins && owner[l][b] == Some((recipe, trim)) {
                lane.bin_owner[b] = Some(lane.allocations.len() as u16);
                b += 1;
            }
            lane.allocations.push(Allocation {
                recipe,
                lo: params.bin_lo(start),
                hi: params.bin_lo(b),
                trim,
            });
        }
    }
    strategy
}

/// Recipe decision for one fillet.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Assignment {
    pub fillet_id: u64,
    /// Index into the recipe slice.
    pub recipe: usize,
    /// Milligrams to cut off; zero when untrimmed.
    pub trim: Weight,
}

/// Matches a weight against the lane's allocations. `lane_pos` indexes
/// `strategy.lanes`. Trim allocations cut the fillet down to the recipe's
/// upper weight limit; unmatched weights fall to the default recipe.
pub fn assign(
    fillet_id: u64,
    weight: Weight,
    lane_pos: usize,
    strategy: &ProductionStrategy,
    recipes: &[Recipe],
) -> Assignment {
    let bin = strategy.params.bin_of(weight);
    match strategy.lanes[lane_pos].owner(bin) {
        Some(a) => {
            let trim = if a.trim {
                weight.saturating_sub(recipes[a.recipe].max_weight)
            } else {
                Weight::ZERO
            };
            Assignment { fillet_id, recipe: a.recipe, trim }
        }
        None => Assignment { fillet_id, recipe: strategy.default_recipe, trim: Weight::ZERO },
    }
}

/// Whether the strategy is due for recomputation.
pub fn strategy_refresh_due(last_compute: f64, now: f64, params: &ControllerParams) -> bool {
    now - last_compute >= params.recompute_period_s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plant::LaneRouting;
    use alloc::collections::{BTreeMap, BTreeSet};
    use alloc::string::{String, ToString};

    fn g(x: f64) -> Weight {
        Weight::from_grams(x)
    }

    fn routing(lanes: &[(&[&str], bool)]) -> RoutingTable {
        RoutingTable {
            lanes: lanes
                .iter()
                .enumerate()
                .map(|(k, (dests, trim))| LaneRouting {
                    lane: k + 1,
                    reachable: dests.iter().map(|s| s.to_string()).collect::<BTreeSet<String>>(),
                    has_trimmer: *trim,
                    paths: BTreeMap::new(),
                    trim_edge: None,
                })
                .collect(),
        }
    }

    #[test]
    fn record_places_weight_in_its_bin() {
        let params = ControllerParams::default();
        let mut h = LaneHistogram::new(&params);
        h.record(g(250.0), 0.0).unwrap();
        assert_eq!(h.counts()[25], 1);
        assert_eq!(h.counts().iter().sum::<u32>(), 1);
        h.record(MAX_FILLET_WEIGHT, 1.0).unwrap();
        assert_eq!(h.counts()[99], 1);
        assert_eq!(h.record(Weight::ZERO, 2.0), Err(ControllerError::WeightOutOfRange(Weight::ZERO)));
        assert!(h.record(g(1000.001), 2.0).is_err());
    }

    #[test]
    fn window_evicts_oldest() {
        let params = ControllerParams { window_size: 3, ..Default::default() };
        let mut h = LaneHistogram::new(&params);
        for (k, w) in [100.0, 200.0, 300.0, 400.0].iter().enumerate() {
            h.record(g(*w), k as f64).unwrap();
        }
        let buffered: Vec<Weight> = h.weights().collect();
        assert_eq!(buffered, vec![g(200.0), g(300.0), g(400.0)]);
        assert_eq!(h.counts()[10], 0);
        assert_eq!(h.counts().iter().sum::<u32>(), 3);
        assert_eq!(h.window_span(), 2.0);
    }

    #[test]
    fn rates_follow_the_window_span() {
        let params = ControllerParams::default();
        let mut h = LaneHistogram::new(&params);
        assert!(h.rates_per_min().iter().all(|&r| r == 0.0));
        // 11 fillets one second apart: 10 intervals in 10 s = 60 per minute.
        for k in 0..11 {
            h.record(g(if k % 2 == 0 { 105.0 } else { 205.0 }), k as f64).unwrap();
        }
        let rates = h.rates_per_min();
        let total: f64 = rates.iter().sum();
        assert!((total - 60.0).abs() < 1e-9);
        assert!((rates[10] - 60.0 * 6.0 / 11.0).abs() < 1e-9);
    }

    #[test]
    fn crossing_bin_is_included() {
        // 5 bins of 10 g, 10 fillets/min each, target 25: bins 0-2.
        let params = ControllerParams {
            bin_width: g(10.0),
            max_weight: g(50.0),
            ..Default::default()
        };
        let recipes = vec![
            Recipe::new("r", "r", "dst", 1, 25.0, 0.0, 50.0, 0.0),
            Recipe::default_for("strips"),
        ];
        let rt = routing(&[(&["dst", "strips"], false)]);
        let s = compute_strategy(&[vec![10.0; 5]], &recipes, &rt, &params);
        assert_eq!(
            s.lanes[0].allocations,
            vec![Allocation { recipe: 0, lo: g(0.0), hi: g(30.0), trim: false }]
        );
        assert_eq!(s.expected_per_min[0], 30.0);
    }

    #[test]
    fn zero_targets_allocate_nothing() {
        let params = ControllerParams::default();
        let mut recipes = crate::scenario::summer_recipes();
        for r in &mut recipes {
            r.target_per_min = 0.0;
        }
        let dests: Vec<&str> = recipes.iter().map(|r| r.destination.as_str()).collect();
        let rt = routing(&[(&dests, true)]);
        let s = compute_strategy(&[vec![5.0; 100]], &recipes, &rt, &params);
        assert!(s.lanes[0].allocations.is_empty());
        let a = assign(0, g(180.0), 0, &s, &recipes);
        assert_eq!(a.recipe, 4);
    }

    fn batching_with_trim() -> (Vec<Recipe>, RoutingTable, Vec<Vec<f64>>) {
        let recipes = vec![
            Recipe::new("1", "Batching", "batch", 1, 20.0, 100.0, 250.0, 100.0),
            Recipe::new("2", "Schnitzel", "schnitzel", 2, 1000.0, 250.0, 400.0, 0.0),
            Recipe::default_for("strips"),
        ];
        let rt = routing(&[(&["batch", "schnitzel", "strips"], true)]);
        let mut rates = vec![0.0; 100];
        for r in rates.iter_mut().take(40).skip(10) {
            *r = 1.0;
        }
        (recipes, rt, vec![rates])
    }

    #[test]
    fn trimming_extends_batching_window() {
        let (recipes, rt, rates) = batching_with_trim();
        let s = compute_strategy(&rates, &recipes, &rt, &ControllerParams::default());
        assert_eq!(
            s.lanes[0].allocations,
            vec![
                Allocation { recipe: 0, lo: g(100.0), hi: g(250.0), trim: false },
                Allocation { recipe: 0, lo: g(250.0), hi: g(300.0), trim: true },
                Allocation { recipe: 1, lo: g(300.0), hi: g(400.0), trim: false },
            ]
        );
        let a = assign(1, g(275.0), 0, &s, &recipes);
        assert_eq!((a.recipe, a.trim), (0, g(25.0)));
        let a = assign(2, g(180.0), 0, &s, &recipes);
        assert_eq!((a.recipe, a.trim), (0, Weight::ZERO));
        let a = assign(3, g(950.0), 0, &s, &recipes);
        assert_eq!((a.recipe, a.trim), (2, Weight::ZERO));
    }

    #[test]
    fn lanes_without_route_do_not_participate() {
        let params = ControllerParams::default();
        let recipes = vec![
            Recipe::new("1", "b", "batch", 1, 1000.0, 100.0, 250.0, 100.0),
            Recipe::default_for("strips"),
        ];
        let rt = routing(&[(&["strips"], true), (&["batch", "strips"], false)]);
        let s = compute_strategy(&[vec![1.0; 100], vec![1.0; 100]], &recipes, &rt, &params);
        assert!(s.lanes[0].allocations.is_empty());
        // Lane 2 has no trimmer: direct interval only.
        assert_eq!(s.lanes[1].allocations.len(), 1);
        assert_eq!(s.expected_per_min[0], 15.0);
    }

    #[test]
    fn refresh_timing() {
        let p = ControllerParams::default();
        assert!(strategy_refresh_due(0.0, 10.0, &p));
        assert!(!strategy_refresh_due(0.0, 9.99, &p));
    }

    #[test]
    fn params_validation() {
        let bad = ControllerParams { bin_width: Weight::from_mg(7_000), ..Default::default() };
        assert!(bad.validate().is_err());
        assert!(ControllerParams { window_size: 0, ..Default::default() }.validate().is_err());
        ControllerParams::default().validate().unwrap();
    }
}
