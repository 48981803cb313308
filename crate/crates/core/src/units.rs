//! Exact mass arithmetic.

use core::fmt;
use core::ops::{Add, Sub};

/// A product mass held in whole milligrams.
///
/// Trimming splits one mass into two; integer storage keeps
/// `original == remainder + piece` exact.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Weight(u32);

impl Weight {
    pub const ZERO: Weight = Weight(0);

    pub const fn from_mg(mg: u32) -> Self {
        Weight(mg)
    }

    /// Rounds to the nearest milligram. Negative input saturates at zero.
    pub fn from_grams(grams: f64) -> Self {
        let mg = libm::round(grams * 1000.0);
        if mg <= 0.0 {
            Weight(0)
        } else if mg >= u32::MAX as f64 {
            Weight(u32::MAX)
        } else {
            Weight(mg as u32)
        }
    }

    pub const fn mg(self) -> u32 {
        self.0
    }

    pub fn grams(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    pub fn saturating_sub(self, rhs: Weight) -> Weight {
        Weight(self.0.saturating_sub(rhs.0))
    }
}

impl Add for Weight {
    type Output = Weight;
    fn add(self, rhs: Weight) -> Weight {
        Weight(self.0 + rhs.0)
    }
}

impl Sub for Weight {
    type Output = Weight;
    fn sub(self, rhs: Weight) -> Weight {
        Weight(self.0 - rhs.0)
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:03} g", self.0 / 1000, self.0 % 1000)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grams_round_trip() {
        assert_eq!(Weight::from_grams(228.9588).mg(), 228_959);
        assert_eq!(Weight::from_grams(-3.0), Weight::ZERO);
        assert_eq!(Weight::from_mg(250_000).grams(), 250.0);
        assert_eq!(std::format!("{}", Weight::from_mg(1_005)), "1.005 g");
    }
}
