//! Recipes, flock weight models and the built-in scenario catalog.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::distr::Open01;
use rand::Rng;

use crate::stats::{normal_cdf, normal_quantile};
use crate::units::Weight;

/// Largest fillet weight any recipe (and the sampler) accepts.
pub const MAX_FILLET_WEIGHT: Weight = Weight::from_mg(1_000_000);

/// Per-lane Poisson arrival rate that puts about 18,000 fillets through five
/// lanes in 3200 s.
pub const DEFAULT_ARRIVAL_RATE_PER_LANE: f64 = 67.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Season {
    Summer,
    Winter,
}

impl Season {
    pub fn as_str(self) -> &'static str {
        match self {
            Season::Summer => "summer",
            Season::Winter => "winter",
        }
    }
}

impl core::str::FromStr for Season {
    type Err = ScenarioError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "summer" => Ok(Season::Summer),
            "winter" => Ok(Season::Winter),
            _ => Err(ScenarioError::UnknownSeason(s.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ScenarioError {
    WeightWindow { recipe: String },
    DefaultCount { scenario: u32, found: usize },
    DuplicatePriority { recipe: String, priority: u32 },
    MissingPriority { recipe: String },
    BadTarget { recipe: String },
    BadFlock(&'static str),
    UnknownSeason(String),
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioError::WeightWindow { recipe } => {
                write!(f, "recipe {recipe}: min weight exceeds max weight")
            }
            ScenarioError::DefaultCount { scenario, found } => write!(
                f,
                "scenario {scenario}: expected exactly one default recipe, found {found}"
            ),
            ScenarioError::DuplicatePriority { recipe, priority } => {
                write!(f, "recipe {recipe}: priority {priority} already used")
            }
            ScenarioError::MissingPriority { recipe } => {
                write!(f, "recipe {recipe}: non-default recipes need a priority")
            }
            ScenarioError::BadTarget { recipe } => {
                write!(f, "recipe {recipe}: target throughput must be finite and >= 0")
            }
            ScenarioError::BadFlock(why) => write!(f, "invalid flock model: {why}"),
            ScenarioError::UnknownSeason(s) => write!(f, "unknown season {s:?}"),
        }
    }
}

/// Requirements of one production order.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Recipe {
    pub id: String,
    pub name: String,
    pub destination: String,
    /// 1 is served first. `None` only for the default recipe.
    pub priority: Option<u32>,
    /// Fillets per minute.
    pub target_per_min: f64,
    /// Post-trim weight window, inclusive.
    pub min_weight: Weight,
    pub max_weight: Weight,
    pub max_trim: Weight,
    pub is_default: bool,
}

impl Recipe {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        id: &str,
        name: &str,
        destination: &str,
        priority: u32,
        target_per_min: f64,
        min_g: f64,
        max_g: f64,
        max_trim_g: f64,
    ) -> Self {
        Recipe {
            id: id.to_string(),
            name: name.to_string(),
            destination: destination.to_string(),
            priority: Some(priority),
            target_per_min,
            min_weight: Weight::from_grams(min_g),
            max_weight: Weight::from_grams(max_g),
            max_trim: Weight::from_grams(max_trim_g),
            is_default: false,
        }
    }

    /// Catch-all recipe accepting every weight up to [`MAX_FILLET_WEIGHT`].
    pub fn default_for(destination: &str) -> Self {
        Recipe {
            id: "default".to_string(),
            name: "Fillet strips".to_string(),
            destination: destination.to_string(),
            priority: None,
            target_per_min: 0.0,
            min_weight: Weight::ZERO,
            max_weight: MAX_FILLET_WEIGHT,
            max_trim: Weight::ZERO,
            is_default: true,
        }
    }

    pub fn accepts(&self, weight: Weight) -> bool {
        self.min_weight <= weight && weight <= self.max_weight
    }
}

/// Normal fillet-weight distribution of one flock, split over lanes by
/// equal-probability slices.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FlockModel {
    pub mean_g: f64,
    /// Standard deviation as a fraction of the mean.
    pub std_fraction: f64,
    pub lane_count: usize,
    /// `lane_slots[lane - 1]` is the probability slice a lane receives,
    /// 0 being the lightest.
    pub lane_slots: Vec<usize>,
}

impl FlockModel {
    /// Lightest slice to lane 1, heaviest to the last lane.
    pub fn new(mean_g: f64, std_fraction: f64, lane_count: usize) -> Self {
        FlockModel {
            mean_g,
            std_fraction,
            lane_count,
            lane_slots: (0..lane_count).collect(),
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.mean_g.is_finite() && self.mean_g > 0.0) {
            return Err(ScenarioError::BadFlock("mean weight must be positive"));
        }
        if !(self.std_fraction.is_finite() && self.std_fraction > 0.0) {
            return Err(ScenarioError::BadFlock("std fraction must be positive"));
        }
        if self.lane_count == 0 {
            return Err(ScenarioError::BadFlock("lane count must be positive"));
        }
        let slots: BTreeSet<usize> = self.lane_slots.iter().copied().collect();
        if self.lane_slots.len() != self.lane_count
            || slots.len() != self.lane_count
            || slots.iter().any(|&s| s >= self.lane_count)
        {
            return Err(ScenarioError::BadFlock("lane slots must permute 0..lane_count"));
        }
        Ok(())
    }

    pub fn std_g(&self) -> f64 {
        self.std_fraction * self.mean_g
    }

    /// The `k / lane_count` quantiles (`k = 1..lane_count`) of the untruncated
    /// normal, ascending. Four cuts for five lanes.
    pub fn cuts(&self) -> Vec<f64> {
        let n = self.lane_count;
        (1..n)
            .map(|k| self.mean_g + self.std_g() * normal_quantile(k as f64 / n as f64))
            .collect()
    }

    /// Open weight interval (grams) owned by `lane` (1-based).
    pub fn lane_interval(&self, lane: usize) -> (f64, f64) {
        let slot = self.lane_slots[lane - 1];
        let cuts = self.cuts();
        let lo = if slot == 0 { f64::NEG_INFINITY } else { cuts[slot - 1] };
        let hi = if slot + 1 == self.lane_count { f64::INFINITY } else { cuts[slot] };
        (lo, hi)
    }
}

/// 20/40/60/80 % cuts for a five-lane flock; `lane_count - 1` cuts in general.
pub fn quintile_bounds(flock: &FlockModel) -> Vec<f64> {
    flock.cuts()
}

/// Draws a fillet weight for `lane` (1-based): the flock normal truncated to
/// the lane's slice and to `(0, 1000]` g, sampled by inverse CDF.
pub fn sample_fillet_weight<R: Rng + ?Sized>(flock: &FlockModel, lane: usize, rng: &mut R) -> Weight {
    let (mu, sigma) = (flock.mean_g, flock.std_g());
    let n = flock.lane_count as f64;
    let slot = flock.lane_slots[lane - 1] as f64;
    let p_zero = normal_cdf(-mu / sigma);
    let p_cap = normal_cdf((MAX_FILLET_WEIGHT.grams() - mu) / sigma);
    let p_lo = (slot / n).max(p_zero);
    let p_hi = ((slot + 1.0) / n).min(p_cap);
    let u: f64 = rng.sample(Open01);
    let x = mu + sigma * normal_quantile(p_lo + u * (p_hi - p_lo));

    // Rounding to milligrams must not push the sample onto or past a cut.
    let (lo, hi) = flock.lane_interval(lane);
    let lo_mg = if lo.is_finite() { libm::floor(lo * 1000.0) as i64 + 1 } else { 1 };
    let hi_mg = if hi.is_finite() {
        libm::ceil(hi * 1000.0) as i64 - 1
    } else {
        i64::from(MAX_FILLET_WEIGHT.mg())
    };
    let lo_mg = lo_mg.max(1);
    let hi_mg = hi_mg.min(i64::from(MAX_FILLET_WEIGHT.mg()));
    let mg = (libm::round(x * 1000.0) as i64).clamp(lo_mg, hi_mg.max(lo_mg));
    Weight::from_mg(mg as u32)
}

/// Operating conditions of one simulation: a recipe set plus a flock.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Scenario {
    pub id: u32,
    pub season: Season,
    pub recipes: Vec<Recipe>,
    pub flock: FlockModel,
    pub arrival_rate_per_lane: f64,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.flock.validate()?;
        let defaults = self.recipes.iter().filter(|r| r.is_default).count();
        if defaults != 1 {
            return Err(ScenarioError::DefaultCount { scenario: self.id, found: defaults });
        }
        let mut priorities = BTreeSet::new();
        for r in &self.recipes {
            if r.min_weight > r.max_weight {
                return Err(ScenarioError::WeightWindow { recipe: r.id.clone() });
            }
            if !(r.target_per_min.is_finite() && r.target_per_min >= 0.0) {
                return Err(ScenarioError::BadTarget { recipe: r.id.clone() });
            }
            if r.is_default {
                continue;
            }
            let Some(p) = r.priority else {
                return Err(ScenarioError::MissingPriority { recipe: r.id.clone() });
            };
            if !priorities.insert(p) {
                return Err(ScenarioError::DuplicatePriority { recipe: r.id.clone(), priority: p });
            }
        }
        if !(self.arrival_rate_per_lane.is_finite() && self.arrival_rate_per_lane > 0.0) {
            return Err(ScenarioError::BadFlock("arrival rate must be positive"));
        }
        Ok(())
    }

    pub fn default_recipe(&self) -> &Recipe {
        self.recipes.iter().find(|r| r.is_default).expect("validated scenario")
    }

    /// Non-default recipes in their declared order.
    pub fn main_recipes(&self) -> impl Iterator<Item = &Recipe> {
        self.recipes.iter().filter(|r| !r.is_default)
    }
}

pub const BATCHING_1: &str = "batchingDestination1";
pub const BATCHING_2: &str = "batchingDestination2";
pub const BURGER: &str = "burgerDestination";
pub const SCHNITZEL: &str = "schnitzelDestination";
pub const FILLET_STRIPS: &str = "filletStripsDestination";
pub const MINCED_MEAT: &str = "mincedMeatDestination";

fn recipe_set(priorities: [u32; 4], targets: [f64; 4]) -> Vec<Recipe> {
    let rows = [
        ("1", "Batching 1", BATCHING_1, 100.0, 250.0, 100.0),
        ("2", "Batching 2", BATCHING_2, 150.0, 300.0, 100.0),
        ("3", "Burger", BURGER, 200.0, 350.0, 0.0),
        ("4", "Schnitzel", SCHNITZEL, 250.0, 400.0, 0.0),
    ];
    let mut out: Vec<Recipe> = rows
        .iter()
        .zip(priorities.iter().zip(targets.iter()))
        .map(|(&(id, name, dest, lo, hi, trim), (&p, &t))| {
            Recipe::new(id, name, dest, p, t, lo, hi, trim)
        })
        .collect();
    out.push(Recipe::default_for(FILLET_STRIPS));
    out
}

pub fn summer_recipes() -> Vec<Recipe> {
    recipe_set([1, 2, 3, 4], [130.0, 130.0, 30.0, 30.0])
}

pub fn winter_recipes() -> Vec<Recipe> {
    recipe_set([3, 4, 1, 2], [100.0, 100.0, 60.0, 60.0])
}

/// The ten case-study scenarios: 1-5 summer, 6-10 winter, mean weights
/// 200/225/250/275/300 g in each season.
pub fn scenario_catalog() -> Vec<Scenario> {
    let means = [200.0, 225.0, 250.0, 275.0, 300.0];
    let mut out = Vec::with_capacity(10);
    for (season, recipes) in [(Season::Summer, summer_recipes()), (Season::Winter, winter_recipes())] {
        for &mean in &means {
            out.push(Scenario {
                id: out.len() as u32 + 1,
                season,
                recipes: recipes.clone(),
                flock: FlockModel::new(mean, 0.10, 5),
                arrival_rate_per_lane: DEFAULT_ARRIVAL_RATE_PER_LANE,
            });
        }
    }
    out
}
