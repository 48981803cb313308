//! Discrete-event simulation of one design under one scenario.
//!
//! Fillets enter every lane as a Poisson stream, are weighed, assigned by the
//! current production strategy, optionally trimmed and delivered along the
//! lane's routed path. Processing takes no simulated time, so the delivery
//! event fires at the arrival instant. Only deliveries at or after the
//! warm-up time are counted; generation is counted at delivery for the same
//! cut-off.

use alloc::collections::BinaryHeap;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use rand::distr::Open01;
use rand::Rng;

use crate::controller::{
    assign, compute_strategy, Assignment, ControllerError, ControllerParams, LaneHistogram,
    ProductionStrategy,
};
use crate::plant::{PlantTopology, RoutingTable};
use crate::rng::{run_seed, stream, RunRng};
use crate::scenario::{sample_fillet_weight, FlockModel, Scenario, ScenarioError};
use crate::units::Weight;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimParams {
    pub duration_s: f64,
    pub warmup_s: f64,
    pub replications: u32,
    pub global_seed: u64,
    pub controller: ControllerParams,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            duration_s: 3200.0,
            warmup_s: 200.0,
            replications: 1,
            global_seed: 0,
            controller: ControllerParams::default(),
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.warmup_s.is_finite() && self.warmup_s >= 0.0) {
            return Err(SimError::Params("warm-up must be >= 0"));
        }
        if !(self.duration_s.is_finite() && self.duration_s > self.warmup_s) {
            return Err(SimError::Params("duration must exceed the warm-up"));
        }
        if self.replications == 0 {
            return Err(SimError::Params("at least one replication is required"));
        }
        self.controller.validate().map_err(SimError::Controller)
    }

    /// Length of the measured window in minutes.
    pub fn measured_minutes(&self) -> f64 {
        (self.duration_s - self.warmup_s) / 60.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SimError {
    Params(&'static str),
    Controller(ControllerError),
    Scenario(ScenarioError),
    /// The design's lanes do not match the scenario's flock.
    LaneMismatch { design_lanes: usize, flock_lanes: usize },
    /// A recipe was assigned on a lane that cannot reach its destination.
    UnreachableDestination { lane: usize, destination: String },
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::Params(why) => write!(f, "invalid simulation parameters: {why}"),
            SimError::Controller(e) => write!(f, "{e}"),
            SimError::Scenario(e) => write!(f, "{e}"),
            SimError::LaneMismatch { design_lanes, flock_lanes } => write!(
                f,
                "design has {design_lanes} lanes but the flock model has {flock_lanes}"
            ),
            SimError::UnreachableDestination { lane, destination } => {
                write!(f, "lane {lane} cannot reach destination {destination}")
            }
        }
    }
}

/// Source of fillet weights per lane (1-based).
pub trait WeightSampler {
    fn sample(&self, lane: usize, rng: &mut RunRng) -> Weight;
}

impl WeightSampler for FlockModel {
    fn sample(&self, lane: usize, rng: &mut RunRng) -> Weight {
        sample_fillet_weight(self, lane, rng)
    }
}

/// One delivered fillet as seen by a [`SimObserver`].
#[derive(Clone, Copy, Debug)]
pub struct Delivery<'a> {
    pub time: f64,
    pub fillet: Fillet,
    pub destination: &'a str,
    /// Edge indices into the topology, assigner to destination.
    pub path: &'a [usize],
    /// Edge the trim piece left by, when trimmed.
    pub trim_edge: Option<usize>,
    pub counted: bool,
}

/// Hooks for inspecting a run. All methods default to doing nothing.
pub trait SimObserver {
    fn delivered(&mut self, _delivery: &Delivery<'_>) {}
    fn strategy(&mut self, _time: f64, _strategy: &ProductionStrategy) {}
}

impl SimObserver for () {}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RecipeOutcome {
    pub recipe_id: String,
    pub delivered: u64,
    pub throughput_per_min: f64,
    /// Capped at 100; a zero target counts as fully met.
    pub pct_of_target: f64,
}

/// Measured outcome of one run.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PerformanceRecord {
    pub design_id: u64,
    pub scenario_id: u32,
    pub replication: u32,
    /// Non-default recipes in scenario order.
    pub recipes: Vec<RecipeOutcome>,
    pub default_delivered: u64,
    pub trim_pieces: u64,
    pub trim_mass_mg: u64,
    /// Fillets entering the plant over the whole run, warm-up included.
    pub fillets_generated: u64,
    pub generated_after_warmup: u64,
    pub delivered_total: u64,
}

impl PerformanceRecord {
    /// Mean percentage of target over the non-default recipes.
    pub fn mean_pct(&self) -> f64 {
        if self.recipes.is_empty() {
            return 100.0;
        }
        self.recipes.iter().map(|r| r.pct_of_target).sum::<f64>() / self.recipes.len() as f64
    }

    pub fn recipe(&self, id: &str) -> Option<&RecipeOutcome> {
        self.recipes.iter().find(|r| r.recipe_id == id)
    }
}

/// A product moving through the plant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Fillet {
    pub fillet_id: u64,
    /// Lane index as named by the origin (1-based).
    pub lane: usize,
    /// Current weight, post-trim when trimmed.
    pub weight: Weight,
    pub original_weight: Weight,
    /// Seconds.
    pub created_at: f64,
    pub assignment: Option<Assignment>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum EventKind {
    /// Index into the topology's lanes.
    Arrival(usize),
    Recompute,
    /// Lane position and the processed fillet.
    Delivery(usize, Fillet),
}

#[derive(Clone, Copy, Debug)]
struct Event {
    time: f64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed: BinaryHeap is a max-heap and we pop the earliest event.
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then_with(|| other.seq.cmp(&self.seq))
    }
}

#[derive(Debug, Default)]
struct EventQueue {
    heap: BinaryHeap<Event>,
    seq: u64,
}

impl EventQueue {
    fn push(&mut self, time: f64, kind: EventKind) {
        self.heap.push(Event { time, seq: self.seq, kind });
        self.seq += 1;
    }

    fn pop(&mut self) -> Option<Event> {
        self.heap.pop()
    }
}

fn interarrival(rate_per_s: f64, rng: &mut RunRng) -> f64 {
    let u: f64 = rng.sample(Open01);
    -libm::log(u) / rate_per_s
}

/// Runs one replication with the scenario's flock model and no observer.
pub fn run_simulation(
    topology: &PlantTopology,
    routing: &RoutingTable,
    scenario: &Scenario,
    params: &SimParams,
    design_id: u64,
    replication: u32,
) -> Result<PerformanceRecord, SimError> {
    run_simulation_with(
        topology,
        routing,
        scenario,
        params,
        design_id,
        replication,
        &scenario.flock,
        &mut (),
    )
}

/// Runs one replication with a custom weight source and observer.
#[allow(clippy::too_many_arguments)]
pub fn run_simulation_with<S: WeightSampler + ?Sized, O: SimObserver + ?Sized>(
    topology: &PlantTopology,
    routing: &RoutingTable,
    scenario: &Scenario,
    params: &SimParams,
    design_id: u64,
    replication: u32,
    sampler: &S,
    observer: &mut O,
) -> Result<PerformanceRecord, SimError> {
    params.validate()?;
    scenario.validate().map_err(SimError::Scenario)?;
    let lanes = topology.lanes.len();
    let lanes_ok = routing.lanes.iter().all(|l| (1..=scenario.flock.lane_count).contains(&l.lane));
    if lanes != scenario.flock.lane_count || routing.lanes.len() != lanes || !lanes_ok {
        return Err(SimError::LaneMismatch {
            design_lanes: lanes,
            flock_lanes: scenario.flock.lane_count,
        });
    }
    let recipes = &scenario.recipes;
    let ctrl = &params.controller;

    // Per lane and recipe: the routed path, if any.
    let paths: Vec<Vec<Option<&[usize]>>> = routing
        .lanes
        .iter()
        .map(|lr| {
            recipes
                .iter()
                .map(|r| lr.paths.get(&r.destination).map(Vec::as_slice))
                .collect()
        })
        .collect();

    let mut rng = stream(run_seed(params.global_seed, design_id, scenario.id, replication));
    let rate_per_s = scenario.arrival_rate_per_lane / 60.0;
    let lane_ids: Vec<usize> = routing.lanes.iter().map(|l| l.lane).collect();
    let mut histograms: Vec<LaneHistogram> = (0..lanes).map(|_| LaneHistogram::new(ctrl)).collect();
    let mut strategy = ProductionStrategy::empty(&lane_ids, recipes, ctrl);

    let mut queue = EventQueue::default();
    for lane in 0..lanes {
        queue.push(interarrival(rate_per_s, &mut rng), EventKind::Arrival(lane));
    }
    queue.push(ctrl.recompute_period_s, EventKind::Recompute);
    let mut recomputes = 1u64;

    let mut delivered = alloc::vec![0u64; recipes.len()];
    let mut trim_pieces = 0u64;
    let mut trim_mass_mg = 0u64;
    let mut generated = 0u64;
    let mut generated_after_warmup = 0u64;
    let mut next_fillet = 0u64;

    while let Some(ev) = queue.pop() {
        if ev.time > params.duration_s {
            break;
        }
        match ev.kind {
            EventKind::Recompute => {
                let rates: Vec<Vec<f64>> = histograms.iter().map(|h| h.rates_per_min()).collect();
                strategy = compute_strategy(&rates, recipes, routing, ctrl);
                observer.strategy(ev.time, &strategy);
                recomputes += 1;
                queue.push(recomputes as f64 * ctrl.recompute_period_s, EventKind::Recompute);
            }
            EventKind::Arrival(lane) => {
                queue.push(ev.time + interarrival(rate_per_s, &mut rng), EventKind::Arrival(lane));
                let lane_id = lane_ids[lane];
                let weight = sampler.sample(lane_id, &mut rng);
                histograms[lane].record(weight, ev.time).map_err(SimError::Controller)?;
                let fillet_id = next_fillet;
                next_fillet += 1;
                generated += 1;
                let assignment = assign(fillet_id, weight, lane, &strategy, recipes);
                let fillet = Fillet {
                    fillet_id,
                    lane: lane_id,
                    weight: weight.saturating_sub(assignment.trim),
                    original_weight: weight,
                    created_at: ev.time,
                    assignment: Some(assignment),
                };
                queue.push(ev.time, EventKind::Delivery(lane, fillet));
            }
            EventKind::Delivery(lane, fillet) => {
                let assignment = fillet.assignment.expect("assigned before delivery");
                let recipe = &recipes[assignment.recipe];
                let Some(path) = paths[lane][assignment.recipe] else {
                    return Err(SimError::UnreachableDestination {
                        lane: fillet.lane,
                        destination: recipe.destination.clone(),
                    });
                };
                let counted = ev.time >= params.warmup_s;
                let trimmed = assignment.trim > Weight::ZERO;
                if counted {
                    generated_after_warmup += 1;
                    delivered[assignment.recipe] += 1;
                    if trimmed {
                        trim_pieces += 1;
                        trim_mass_mg += u64::from(assignment.trim.mg());
                    }
                }
                observer.delivered(&Delivery {
                    time: ev.time,
                    fillet,
                    destination: &recipe.destination,
                    path,
                    trim_edge: if trimmed { routing.lanes[lane].trim_edge } else { None },
                    counted,
                });
            }
        }
    }

    let minutes = params.measured_minutes();
    let mut outcomes = Vec::new();
    let mut default_delivered = 0;
    for (k, r) in recipes.iter().enumerate() {
        if r.is_default {
            default_delivered = delivered[k];
            continue;
        }
        let throughput = delivered[k] as f64 / minutes;
        let pct = if r.target_per_min > 0.0 {
            (100.0 * throughput / r.target_per_min).min(100.0)
        } else {
            100.0
        };
        outcomes.push(RecipeOutcome {
            recipe_id: r.id.clone(),
            delivered: delivered[k],
            throughput_per_min: throughput,
            pct_of_target: pct,
        });
    }
    Ok(PerformanceRecord {
        design_id,
        scenario_id: scenario.id,
        replication,
        recipes: outcomes,
        default_delivered,
        trim_pieces,
        trim_mass_mg,
        fillets_generated: generated,
        generated_after_warmup,
        delivered_total: delivered.iter().sum(),
    })
}

/// Runs replications `0..params.replications`.
pub fn replicate(
    topology: &PlantTopology,
    routing: &RoutingTable,
    scenario: &Scenario,
    params: &SimParams,
    design_id: u64,
) -> Result<Vec<PerformanceRecord>, SimError> {
    (0..params.replications)
        .map(|r| run_simulation(topology, routing, scenario, params, design_id, r))
        .collect()
}

/// One replication of a duration sweep.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepRow {
    pub duration_s: f64,
    pub replication: u32,
    /// Mean percentage of target over the non-default recipes.
    pub estimate: f64,
    /// `estimate` minus the mean estimate at the longest duration.
    pub error: f64,
}

/// Runs `replications` per duration (warm-up unchanged) and reports each
/// estimate against the mean at the longest duration.
pub fn duration_sweep(
    topology: &PlantTopology,
    routing: &RoutingTable,
    scenario: &Scenario,
    params: &SimParams,
    design_id: u64,
    durations: &[f64],
    replications: u32,
) -> Result<Vec<SweepRow>, SimError> {
    let mut rows = Vec::new();
    for &d in durations {
        let p = SimParams { duration_s: d, ..params.clone() };
        for r in 0..replications {
            let rec = run_simulation(topology, routing, scenario, &p, design_id, r)?;
            rows.push(SweepRow { duration_s: d, replication: r, estimate: rec.mean_pct(), error: 0.0 });
        }
    }
    let longest = durations.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let reference: Vec<f64> =
        rows.iter().filter(|r| r.duration_s == longest).map(|r| r.estimate).collect();
    let reference = reference.iter().sum::<f64>() / reference.len().max(1) as f64;
    for row in &mut rows {
        row.error = row.estimate - reference;
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn queue_pops_in_time_then_insertion_order() {
        let mut q = EventQueue::default();
        q.push(2.0, EventKind::Recompute);
        q.push(1.0, EventKind::Arrival(0));
        q.push(1.0, EventKind::Arrival(1));
        q.push(0.5, EventKind::Arrival(2));
        let order: Vec<EventKind> = core::iter::from_fn(|| q.pop().map(|e| e.kind)).collect();
        assert_eq!(
            order,
            alloc::vec![
                EventKind::Arrival(2),
                EventKind::Arrival(0),
                EventKind::Arrival(1),
                EventKind::Recompute
            ]
        );
    }

    #[test]
    fn interarrival_mean() {
        let mut rng = stream(9);
        let n = 200_000;
        let mean: f64 = (0..n).map(|_| interarrival(2.0, &mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.005);
    }

    #[test]
    fn params_validation() {
        assert!(SimParams { warmup_s: 4000.0, ..Default::default() }.validate().is_err());
        assert!(SimParams { replications: 0, ..Default::default() }.validate().is_err());
        SimParams::default().validate().unwrap();
    }
}
