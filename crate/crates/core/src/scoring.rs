//! Duration-based procedure scoring against professional gesture durations.
//!
//! Each of the nine gestures contributes up to `100/9` points, growing
//! linearly with its estimated duration and saturating at the professional
//! duration.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const NUM_GESTURES: usize = 9;
pub const PEAK_PER_GESTURE: f64 = 100.0 / NUM_GESTURES as f64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoringError {
    #[error("trimmed average needs at least 3 values, got {0}")]
    TooFewValues(usize),
    #[error("gesture {gesture}: duration {value} is negative or not finite")]
    BadDuration { gesture: usize, value: f64 },
}

/// Target duration in seconds of gestures G1..G9.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfessionalDurations(pub [f64; NUM_GESTURES]);

impl ProfessionalDurations {
    /// Trimmed means over twelve reference demonstrations of the WHO
    /// handwashing technique.
    pub const WHO: ProfessionalDurations =
        ProfessionalDurations([4.9, 3.65, 3.65, 5.4, 4.0, 3.45, 3.45, 4.1, 4.1]);

    pub fn new(values: [f64; NUM_GESTURES]) -> Result<Self, ScoringError> {
        for (i, &v) in values.iter().enumerate() {
            if !(v.is_finite() && v > 0.0) {
                return Err(ScoringError::BadDuration {
                    gesture: i + 1,
                    value: v,
                });
            }
        }
        Ok(ProfessionalDurations(values))
    }

    pub fn get(&self, gesture: usize) -> f64 {
        self.0[gesture - 1]
    }
}

impl Default for ProfessionalDurations {
    fn default() -> Self {
        Self::WHO
    }
}

/// Mean after dropping one occurrence of the maximum and one of the minimum.
pub fn trimmed_average(values: &[f64]) -> Result<f64, ScoringError> {
    if values.len() < 3 {
        return Err(ScoringError::TooFewValues(values.len()));
    }
    let (mut imax, mut imin) = (0, 0);
    for (i, &v) in values.iter().enumerate() {
        if v > values[imax] {
            imax = i;
        }
        if v < values[imin] {
            imin = i;
        }
    }
    if imin == imax {
        // all equal
        imin = if imax == 0 { 1 } else { 0 };
    }
    let sum: f64 = values
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != imax && i != imin)
        .map(|(_, v)| v)
        .sum();
    Ok(sum / (values.len() - 2) as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub per_gesture_duration: [f64; NUM_GESTURES],
    pub per_gesture_score: [f64; NUM_GESTURES],
    pub total: f64,
}

impl ScoreReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain numeric struct serializes")
    }
}

pub fn score(
    durations: &[f64; NUM_GESTURES],
    professional: &ProfessionalDurations,
) -> Result<ScoreReport, ScoringError> {
    let mut ratio = [0.0; NUM_GESTURES];
    for (i, &d) in durations.iter().enumerate() {
        if !(d.is_finite() && d >= 0.0) {
            return Err(ScoringError::BadDuration {
                gesture: i + 1,
                value: d,
            });
        }
        ratio[i] = (d / professional.0[i]).min(1.0);
    }
    // summing ratios before scaling keeps full marks at exactly 100
    Ok(ScoreReport {
        per_gesture_duration: *durations,
        per_gesture_score: ratio.map(|r| PEAK_PER_GESTURE * r),
        total: 100.0 * ratio.iter().sum::<f64>() / NUM_GESTURES as f64,
    })
}

/// Absolute difference of totals, in points.
pub fn score_error(predicted: &ScoreReport, ground_truth: &ScoreReport) -> f64 {
    (predicted.total - ground_truth.total).abs()
}
