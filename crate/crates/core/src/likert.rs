//! The 7-point Likert trust scale and its percent conversion.
//!
//! Self-reports arrive as ordinal levels 1..=7 and are interpreted on a
//! percent scale that is symmetric about the 50% midpoint (level 4,
//! "Neutral"). The exact percents are configurable; the default table is
//! evenly spaced and avoids 0 and 100 so beta log-likelihoods stay
//! finite.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of levels on the scale.
pub const LEVELS: usize = 7;

/// Default percent table: {2, 18, 34, 50, 66, 82, 98}.
pub const DEFAULT_PERCENTS: [f64; LEVELS] = [2.0, 18.0, 34.0, 50.0, 66.0, 82.0, 98.0];

/// Display labels, level 1 ("High Distrust") through 7 ("High Trust").
pub const LABELS: [&str; LEVELS] = [
    "High Distrust",
    "Moderate Distrust",
    "Slight Distrust",
    "Neutral",
    "Slight Trust",
    "Moderate Trust",
    "High Trust",
];

/// A validated level-to-percent mapping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; LEVELS]", into = "[f64; LEVELS]")]
pub struct LikertScale {
    percents: [f64; LEVELS],
}

impl Default for LikertScale {
    fn default() -> Self {
        LikertScale {
            percents: DEFAULT_PERCENTS,
        }
    }
}

impl TryFrom<[f64; LEVELS]> for LikertScale {
    type Error = Error;
    fn try_from(percents: [f64; LEVELS]) -> Result<Self> {
        LikertScale::new(percents)
    }
}

impl From<LikertScale> for [f64; LEVELS] {
    fn from(s: LikertScale) -> Self {
        s.percents
    }
}

impl LikertScale {
    /// Build a scale from seven percents.
    ///
    /// Requires values in [0, 100], strictly increasing, level 4 mapping
    /// to exactly 50, and symmetry about the midpoint.
    pub fn new(percents: [f64; LEVELS]) -> Result<Self> {
        for (i, p) in percents.iter().enumerate() {
            if !p.is_finite() || !(0.0..=100.0).contains(p) {
                return Err(Error::Config(format!(
                    "likert percent {i} out of [0,100]: {p}"
                )));
            }
        }
        for w in percents.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::Config(format!(
                    "likert percents must strictly increase, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if percents[3] != 50.0 {
            return Err(Error::Config(format!(
                "likert midpoint (level 4) must be 50, got {}",
                percents[3]
            )));
        }
        for i in 0..LEVELS {
            let mirror = percents[i] + percents[LEVELS - 1 - i];
            if (mirror - 100.0).abs() > 1e-9 {
                return Err(Error::Config(format!(
                    "likert percents must be symmetric about 50: level {} + level {} = {}",
                    i + 1,
                    LEVELS - i,
                    mirror
                )));
            }
        }
        Ok(LikertScale { percents })
    }

    /// The percent for an ordinal level in 1..=7.
    pub fn percent(&self, level: u8) -> Result<f64> {
        if !(1..=LEVELS as u8).contains(&level) {
            return Err(Error::Domain(format!(
                "likert level must be in 1..=7, got {level}"
            )));
        }
        Ok(self.percents[usize::from(level) - 1])
    }

    /// A validated report value for an ordinal level.
    pub fn level(&self, level: u8) -> Result<LikertLevel> {
        Ok(LikertLevel {
            level,
            percent: self.percent(level)?,
        })
    }

    /// The level whose percent is closest to `percent`; ties resolve to
    /// the lower level.
    pub fn nearest(&self, percent: f64) -> LikertLevel {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.percents.iter().enumerate() {
            let d = (p - percent).abs();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        LikertLevel {
            level: (best + 1) as u8,
            percent: self.percents[best],
        }
    }

    pub fn percents(&self) -> &[f64; LEVELS] {
        &self.percents
    }
}

/// One self-reported trust rating: the ordinal level and the percent it
/// maps to under the scale in force when it was recorded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LikertLevel {
    pub level: u8,
    pub percent: f64,
}

impl LikertLevel {
    /// The report on the unit interval, as trust models consume it.
    pub fn unit(&self) -> f64 {
        self.percent / 100.0
    }
}

/// Convert a level to its percent under `mapping`.
pub fn likert_to_percent(level: u8, mapping: &LikertScale) -> Result<f64> {
    mapping.percent(level)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoint_is_fifty() {
        let scale = LikertScale::default();
        assert_eq!(likert_to_percent(4, &scale).unwrap(), 50.0);
    }

    #[test]
    fn endpoints_of_default_table() {
        let scale = LikertScale::default();
        assert_eq!(scale.percent(1).unwrap(), 2.0);
        assert_eq!(scale.percent(7).unwrap(), 98.0);
    }

    #[test]
    fn out_of_range_level_is_domain_error() {
        let scale = LikertScale::default();
        assert!(matches!(scale.percent(0), Err(Error::Domain(_))));
        assert!(matches!(scale.percent(8), Err(Error::Domain(_))));
    }

    #[test]
    fn mapping_is_strictly_monotone_bijection() {
        let scale = LikertScale::default();
        let mut seen = Vec::new();
        for level in 1..=7u8 {
            let p = scale.percent(level).unwrap();
            if let Some(&prev) = seen.last() {
                assert!(p > prev, "not strictly increasing at level {level}");
            }
            seen.push(p);
        }
        assert_eq!(seen.len(), 7);
    }

    #[test]
    fn symmetry_about_midpoint_enforced() {
        // Asymmetric table rejected even though monotone with 50 midpoint.
        let bad = LikertScale::new([2.0, 18.0, 34.0, 50.0, 66.0, 82.0, 99.0]);
        assert!(matches!(bad, Err(Error::Config(_))));
        // Non-monotone rejected.
        let bad = LikertScale::new([2.0, 34.0, 18.0, 50.0, 82.0, 66.0, 98.0]);
        assert!(matches!(bad, Err(Error::Config(_))));
        // Midpoint off 50 rejected.
        let bad = LikertScale::new([2.0, 18.0, 34.0, 51.0, 66.0, 82.0, 98.0]);
        assert!(matches!(bad, Err(Error::Config(_))));
    }

    #[test]
    fn nearest_level_quantizes() {
        let scale = LikertScale::default();
        assert_eq!(scale.nearest(50.0).level, 4);
        assert_eq!(scale.nearest(0.0).level, 1);
        assert_eq!(scale.nearest(100.0).level, 7);
        assert_eq!(scale.nearest(57.9).level, 4);
        assert_eq!(scale.nearest(58.1).level, 5);
        // Exact tie resolves to the lower level.
        assert_eq!(scale.nearest(10.0).level, 1);
    }

    #[test]
    fn scale_serde_round_trip() {
        let scale = LikertScale::default();
        let s = serde_json::to_string(&scale).unwrap();
        let back: LikertScale = serde_json::from_str(&s).unwrap();
        assert_eq!(scale, back);
        // Invalid table fails at deserialization time.
        let bad = serde_json::from_str::<LikertScale>("[1,2,3,4,5,6,7]");
        assert!(bad.is_err());
    }
}
