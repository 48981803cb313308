//! Design scores, ROI, Pareto fronts and objective/predicate queries.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use crate::scenario::{Scenario, Season};
use crate::sim::PerformanceRecord;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RoiParams {
    /// Yearly profit per percentage point of throughput.
    pub profit_per_point: f64,
    pub years: f64,
    pub base_cost: f64,
    pub trim_module_cost: f64,
}

impl Default for RoiParams {
    fn default() -> Self {
        RoiParams {
            profit_per_point: 10_000.0,
            years: 10.0,
            base_cost: 10_000_000.0,
            trim_module_cost: 50_000.0,
        }
    }
}

impl RoiParams {
    pub fn validate(&self) -> Result<(), EvaluateError> {
        let all = [self.profit_per_point, self.years, self.base_cost, self.trim_module_cost];
        if all.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(EvaluateError::RoiParams)
        }
    }
}

/// Return on investment in percent: `(s + w) * P * Y / (B + t * M) * 100`.
pub fn roi(s: f64, w: f64, t_trim: usize, p: &RoiParams) -> f64 {
    (s + w) * p.profit_per_point * p.years / (p.base_cost + t_trim as f64 * p.trim_module_cost)
        * 100.0
}

#[derive(Clone, Debug, PartialEq)]
pub enum EvaluateError {
    MissingScenario { design_id: u64, scenario_id: u32 },
    DimensionMismatch { expected: usize, found: usize },
    RoiParams,
    UnknownObjective(String),
    BadPredicate(String),
}

impl fmt::Display for EvaluateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvaluateError::MissingScenario { design_id, scenario_id } => {
                write!(f, "design {design_id} has no records for scenario {scenario_id}")
            }
            EvaluateError::DimensionMismatch { expected, found } => {
                write!(f, "objective vector of length {found}, expected {expected}")
            }
            EvaluateError::RoiParams => write!(f, "ROI parameters must be positive"),
            EvaluateError::UnknownObjective(s) => write!(f, "unknown objective {s:?}"),
            EvaluateError::BadPredicate(s) => write!(f, "cannot parse predicate {s:?}"),
        }
    }
}

/// Replication-averaged percent of target for one recipe in one scenario.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScoreCell {
    pub scenario_id: u32,
    pub season: Season,
    pub recipe_id: String,
    pub pct: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DesignScore {
    pub design_id: u64,
    /// Mean percent of target over summer scenarios and non-default recipes.
    pub s: f64,
    pub w: f64,
    pub t_trim: usize,
    /// Lanes carrying a trimmer, ascending.
    pub trim_lanes: Vec<usize>,
    /// Scenario order, then recipe order.
    pub cells: Vec<ScoreCell>,
    pub roi: f64,
}

impl DesignScore {
    /// Mean percent of one recipe over the scenarios of a season.
    pub fn recipe_mean(&self, recipe_id: &str, season: Season) -> Option<f64> {
        mean(
            self.cells
                .iter()
                .filter(|c| c.season == season && c.recipe_id == recipe_id)
                .map(|c| c.pct),
        )
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Aggregates all records of one design. Replications are averaged per
/// scenario and recipe before the season means are taken.
pub fn score_design(
    design_id: u64,
    records: &[PerformanceRecord],
    scenarios: &[Scenario],
    trim_lanes: Vec<usize>,
    params: &RoiParams,
) -> Result<DesignScore, EvaluateError> {
    let mut cells = Vec::new();
    for sc in scenarios {
        let runs: Vec<&PerformanceRecord> =
            records.iter().filter(|r| r.scenario_id == sc.id).collect();
        if runs.is_empty() {
            return Err(EvaluateError::MissingScenario { design_id, scenario_id: sc.id });
        }
        for recipe in sc.main_recipes() {
            let pct = mean(
                runs.iter().filter_map(|r| r.recipe(&recipe.id)).map(|o| o.pct_of_target),
            )
            .ok_or(EvaluateError::MissingScenario { design_id, scenario_id: sc.id })?;
            cells.push(ScoreCell {
                scenario_id: sc.id,
                season: sc.season,
                recipe_id: recipe.id.clone(),
                pct,
            });
        }
    }
    let season_mean = |season| {
        mean(cells.iter().filter(|c: &&ScoreCell| c.season == season).map(|c| c.pct))
            .unwrap_or(0.0)
    };
    let s = season_mean(Season::Summer);
    let w = season_mean(Season::Winter);
    let t_trim = trim_lanes.len();
    Ok(DesignScore { design_id, s, w, t_trim, trim_lanes, cells, roi: roi(s, w, t_trim, params) })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    Max,
    Min,
}

impl FromStr for Orientation {
    type Err = EvaluateError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "max" => Ok(Orientation::Max),
            "min" => Ok(Orientation::Min),
            _ => Err(EvaluateError::UnknownObjective(s.to_string())),
        }
    }
}

/// Pareto labels: a point is on the front unless another point is at least
/// as good on every axis and strictly better on one. Identical points are
/// all kept.
pub fn pareto_front(
    points: &[Vec<f64>],
    orientations: &[Orientation],
) -> Result<Vec<bool>, EvaluateError> {
    let d = orientations.len();
    if let Some(p) = points.iter().find(|p| p.len() != d) {
        return Err(EvaluateError::DimensionMismatch { expected: d, found: p.len() });
    }
    let oriented: Vec<Vec<f64>> = points
        .iter()
        .map(|p| {
            p.iter()
                .zip(orientations)
                .map(|(&v, o)| if *o == Orientation::Max { v } else { -v })
                .collect()
        })
        .collect();
    // A dominating point is lexicographically greater, so after a descending
    // sort it is always seen before the points it dominates, and some
    // dominator of every dominated point is itself on the front.
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| lex_cmp(&oriented[b], &oriented[a]));
    let mut front: Vec<usize> = Vec::new();
    let mut labels = alloc::vec![false; points.len()];
    for k in order {
        let p = &oriented[k];
        if !front.iter().any(|&f| dominates(&oriented[f], p)) {
            front.push(k);
            labels[k] = true;
        }
    }
    Ok(labels)
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
}

/// `a` dominates `b`, both already oriented for maximisation.
fn dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x >= y) && a.iter().zip(b).any(|(x, y)| x > y)
}

/// Fronts over `(s, w)` computed separately within each trim count.
pub fn pareto_by_trim_count(scores: &[DesignScore]) -> Vec<bool> {
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (k, s) in scores.iter().enumerate() {
        groups.entry(s.t_trim).or_default().push(k);
    }
    let mut labels = alloc::vec![false; scores.len()];
    for members in groups.values() {
        let points: Vec<Vec<f64>> = members.iter().map(|&k| alloc::vec![scores[k].s, scores[k].w]).collect();
        let front = pareto_front(&points, &[Orientation::Max, Orientation::Max]).expect("2-d");
        for (&k, on) in members.iter().zip(front) {
            labels[k] = on;
        }
    }
    labels
}

/// Named value readable from a [`DesignScore`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Objective {
    Roi,
    S,
    W,
    TTrim,
    /// Recipe mean over one season, written `s[id]` or `w[id]`.
    Recipe(Season, String),
}

impl Objective {
    pub fn value(&self, score: &DesignScore) -> f64 {
        match self {
            Objective::Roi => score.roi,
            Objective::S => score.s,
            Objective::W => score.w,
            Objective::TTrim => score.t_trim as f64,
            Objective::Recipe(season, id) => score.recipe_mean(id, *season).unwrap_or(f64::NAN),
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Objective::Roi => f.write_str("roi"),
            Objective::S => f.write_str("s"),
            Objective::W => f.write_str("w"),
            Objective::TTrim => f.write_str("t_trim"),
            Objective::Recipe(Season::Summer, id) => write!(f, "s[{id}]"),
            Objective::Recipe(Season::Winter, id) => write!(f, "w[{id}]"),
        }
    }
}

impl FromStr for Objective {
    type Err = EvaluateError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        match t {
            "roi" => return Ok(Objective::Roi),
            "s" => return Ok(Objective::S),
            "w" => return Ok(Objective::W),
            "t_trim" => return Ok(Objective::TTrim),
            _ => {}
        }
        let season = match t.get(..2) {
            Some("s[") => Season::Summer,
            Some("w[") => Season::Winter,
            _ => return Err(EvaluateError::UnknownObjective(s.to_string())),
        };
        match t[2..].strip_suffix(']') {
            Some(id) if !id.is_empty() => Ok(Objective::Recipe(season, id.to_string())),
            _ => Err(EvaluateError::UnknownObjective(s.to_string())),
        }
    }
}

/// Parses `name:max,name:min,...`; a bare name means `max`.
pub fn parse_objectives(spec: &str) -> Result<Vec<(Objective, Orientation)>, EvaluateError> {
    spec.split(',')
        .map(|part| {
            let (name, dir) = part.split_once(':').unwrap_or((part, "max"));
            Ok((name.parse()?, dir.trim().parse()?))
        })
        .collect()
}

/// Indices of `scores`, best first. Ties go to the lower design id.
pub fn rank_by_objective(scores: &[DesignScore], objective: &Objective) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        objective
            .value(&scores[b])
            .total_cmp(&objective.value(&scores[a]))
            .then(scores[a].design_id.cmp(&scores[b].design_id))
    });
    order
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CmpOp {
    Ge,
    Gt,
    Le,
    Lt,
    Eq,
}

/// Design property used to split a population.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Predicate {
    Always,
    TrimInLane(usize),
    TTrim(CmpOp, usize),
    Not(Box<Predicate>),
}

impl Predicate {
    pub fn holds(&self, score: &DesignScore) -> bool {
        match self {
            Predicate::Always => true,
            Predicate::TrimInLane(k) => score.trim_lanes.contains(k),
            Predicate::TTrim(op, n) => {
                let t = score.t_trim;
                match op {
                    CmpOp::Ge => t >= *n,
                    CmpOp::Gt => t > *n,
                    CmpOp::Le => t <= *n,
                    CmpOp::Lt => t < *n,
                    CmpOp::Eq => t == *n,
                }
            }
            Predicate::Not(p) => !p.holds(score),
        }
    }
}

impl FromStr for Predicate {
    type Err = EvaluateError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || EvaluateError::BadPredicate(s.to_string());
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if t == "true" {
            return Ok(Predicate::Always);
        }
        if let Some(rest) = t.strip_prefix('!') {
            return Ok(Predicate::Not(Box::new(rest.parse().map_err(|_| bad())?)));
        }
        if let Some(arg) = t.strip_prefix("trim_in_lane(").and_then(|r| r.strip_suffix(')')) {
            return arg.parse().map(Predicate::TrimInLane).map_err(|_| bad());
        }
        if let Some(rest) = t.strip_prefix("t_trim") {
            let ops = [(">=", CmpOp::Ge), ("<=", CmpOp::Le), ("==", CmpOp::Eq), (">", CmpOp::Gt), ("<", CmpOp::Lt), ("=", CmpOp::Eq)];
            for (tok, op) in ops {
                if let Some(n) = rest.strip_prefix(tok) {
                    return n.parse().map(|n| Predicate::TTrim(op, n)).map_err(|_| bad());
                }
            }
        }
        Err(bad())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionRow {
    pub design_id: u64,
    pub in_subset: bool,
    /// On the front of its own subset.
    pub subset_front: bool,
    /// On the front of the whole population.
    pub union_front: bool,
}

/// Splits `scores` by `predicate` and labels fronts over `objectives`
/// (maximised) within each subset and within the union.
pub fn partition_compare(
    scores: &[DesignScore],
    predicate: &Predicate,
    objectives: &[Objective],
) -> Vec<PartitionRow> {
    let orient = alloc::vec![Orientation::Max; objectives.len()];
    let point = |s: &DesignScore| objectives.iter().map(|o| o.value(s)).collect::<Vec<f64>>();
    let inside: Vec<bool> = scores.iter().map(|s| predicate.holds(s)).collect();
    let union = pareto_front(&scores.iter().map(point).collect::<Vec<_>>(), &orient).expect("dims");
    let mut subset = alloc::vec![false; scores.len()];
    for side in [true, false] {
        let members: Vec<usize> = (0..scores.len()).filter(|&k| inside[k] == side).collect();
        let pts: Vec<Vec<f64>> = members.iter().map(|&k| point(&scores[k])).collect();
        for (&k, on) in members.iter().zip(pareto_front(&pts, &orient).expect("dims")) {
            subset[k] = on;
        }
    }
    scores
        .iter()
        .enumerate()
        .map(|(k, s)| PartitionRow {
            design_id: s.design_id,
            in_subset: inside[k],
            subset_front: subset[k],
            union_front: union[k],
        })
        .collect()
}

/// Whether every point of `b` is weakly dominated by some point of `a`
/// (both maximised).
pub fn front_covers(a: &[Vec<f64>], b: &[Vec<f64>]) -> bool {
    b.iter().all(|q| a.iter().any(|p| p.iter().zip(q).all(|(x, y)| x >= y)))
}
