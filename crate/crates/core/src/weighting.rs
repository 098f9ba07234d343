//! Temporal weight schedules applied to the cached first logit, and the
//! composite score used to pick between them.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// `gamma * (1 - exp(-lambda * t))`
    Increasing,
    /// `gamma * exp(-lambda * t)`
    Decreasing,
    /// `gamma`
    Constant,
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScheduleKind::Increasing => "increasing",
            ScheduleKind::Decreasing => "decreasing",
            ScheduleKind::Constant => "constant",
        })
    }
}

/// Weight `w_t` as a function of the generated-token index `t` (first token is `t = 0`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightSchedule {
    #[serde(rename = "schedule")]
    pub kind: ScheduleKind,
    pub gamma: f64,
    pub lambda: f64,
}

impl Default for WeightSchedule {
    fn default() -> Self {
        Self { kind: ScheduleKind::Increasing, gamma: 0.3, lambda: 0.05 }
    }
}

impl WeightSchedule {
    pub fn new(kind: ScheduleKind, gamma: f64, lambda: f64) -> Result<Self> {
        let s = Self { kind, gamma, lambda };
        s.validate()?;
        Ok(s)
    }

    pub fn increasing(gamma: f64, lambda: f64) -> Result<Self> {
        Self::new(ScheduleKind::Increasing, gamma, lambda)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::config("gamma", format!("must be finite and >= 0, got {}", self.gamma)));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::config("lambda", format!("must be finite and > 0, got {}", self.lambda)));
        }
        Ok(())
    }

    pub fn weight_at(&self, t: usize) -> f64 {
        let decay = (-self.lambda * t as f64).exp();
        match self.kind {
            ScheduleKind::Increasing => self.gamma * (1.0 - decay),
            ScheduleKind::Decreasing => self.gamma * decay,
            ScheduleKind::Constant => self.gamma,
        }
    }
}

/// Scale on which CHAIR and Cover are expressed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScoreScale {
    Fraction,
    Percent,
}

/// `0.5 * ((1 - chair) + cover)`, with `1` replaced by `100` on the percentage scale.
pub fn object_score(chair: f64, cover: f64, scale: ScoreScale) -> f64 {
    let full = match scale {
        ScoreScale::Fraction => 1.0,
        ScoreScale::Percent => 100.0,
    };
    0.5 * ((full - chair) + cover)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_examples() {
        for (g, l) in [(0.3, 0.05), (1.7, 0.9), (0.0, 2.0)] {
            assert_eq!(WeightSchedule::increasing(g, l).unwrap().weight_at(0), 0.0);
        }
        let c = WeightSchedule::new(ScheduleKind::Constant, 0.3, 0.05).unwrap();
        assert_eq!(c.weight_at(57), 0.3);
        let inc = WeightSchedule::increasing(0.3, 0.05).unwrap();
        // 40-digit reference: 0.3 * (1 - e^-1)
        assert!((inc.weight_at(20) - 0.189_636_167_648_567_3).abs() < 1e-12);
        let dec = WeightSchedule::new(ScheduleKind::Decreasing, 0.3, 0.05).unwrap();
        assert_eq!(dec.weight_at(0), 0.3);
        assert!((dec.weight_at(20) + inc.weight_at(20) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(WeightSchedule::increasing(-0.1, 0.05).is_err());
        assert!(WeightSchedule::increasing(0.3, 0.0).is_err());
        assert!(WeightSchedule::increasing(f64::NAN, 0.05).is_err());
    }

    #[test]
    fn object_score_examples() {
        assert!((object_score(6.1, 50.4, ScoreScale::Percent) - 72.15).abs() < 1e-9);
        assert_eq!(object_score(0.0, 100.0, ScoreScale::Percent), 100.0);
        assert_eq!(object_score(100.0, 0.0, ScoreScale::Percent), 0.0);
        assert!((object_score(0.061, 0.504, ScoreScale::Fraction) - 0.7215).abs() < 1e-12);
    }
}
