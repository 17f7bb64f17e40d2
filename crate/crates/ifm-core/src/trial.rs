//! Trial data model: one reach-to-grasp recording of 20 hand markers.

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{IfmError, Result};

/// The four intentions behind the grasp, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Intention {
    Pouring,
    Passing,
    Drinking,
    Placing,
}

impl Intention {
    pub const ALL: [Intention; 4] = [
        Intention::Pouring,
        Intention::Passing,
        Intention::Drinking,
        Intention::Placing,
    ];

    /// The six unordered intention pairs, in canonical order.
    pub fn pairs() -> [(Intention, Intention); 6] {
        let mut out = [(Intention::Pouring, Intention::Pouring); 6];
        let mut k = 0;
        for i in 0..4 {
            for j in (i + 1)..4 {
                out[k] = (Self::ALL[i], Self::ALL[j]);
                k += 1;
            }
        }
        out
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Intention::Pouring => "pouring",
            Intention::Passing => "passing",
            Intention::Drinking => "drinking",
            Intention::Placing => "placing",
        }
    }

    pub fn index(&self) -> usize {
        Self::ALL.iter().position(|i| i == self).unwrap()
    }

    pub fn parse(s: &str) -> Result<Intention> {
        match s.to_ascii_lowercase().as_str() {
            "pouring" => Ok(Intention::Pouring),
            "passing" => Ok(Intention::Passing),
            "drinking" => Ok(Intention::Drinking),
            "placing" => Ok(Intention::Placing),
            other => Err(IfmError::data(format!("unknown intention '{other}'"))),
        }
    }
}

impl std::fmt::Display for Intention {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Canonical marker set. Every trial must carry exactly these 20 names.
///
/// The dorsum triple (`hand_dorsum_base`, `hand_dorsum_radial`,
/// `hand_dorsum_ulnar`) defines the hand-local reference frame;
/// `index_phalanx_prox` is the radius-phalanx target of the local features.
pub const MARKER_NAMES: [&str; 20] = [
    "wrist",
    "radius_styloid",
    "ulna_styloid",
    "hand_dorsum_base",
    "hand_dorsum_radial",
    "hand_dorsum_ulnar",
    "thumb_tip",
    "thumb_ip",
    "thumb_mcp",
    "thumb_cmc",
    "index_tip",
    "index_dip",
    "index_pip",
    "index_phalanx_prox",
    "middle_tip",
    "middle_mcp",
    "ring_tip",
    "ring_mcp",
    "little_tip",
    "little_mcp",
];

pub fn marker_index(name: &str) -> Option<usize> {
    MARKER_NAMES.iter().position(|n| *n == name)
}

/// One reach-to-grasp recording: 20 marker trajectories in millimeters.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub trial_id: String,
    pub subject_id: String,
    pub intention: Intention,
    pub sample_rate_hz: f64,
    /// Indexed by `MARKER_NAMES` position; inner vec is one position per sample.
    pub markers: Vec<Vec<Point3<f64>>>,
}

impl Trial {
    /// Builds a trial and validates the invariants: all 20 markers present,
    /// equal lengths >= 2, positive sample rate, finite coordinates.
    pub fn new(
        trial_id: impl Into<String>,
        subject_id: impl Into<String>,
        intention: Intention,
        sample_rate_hz: f64,
        markers: Vec<Vec<Point3<f64>>>,
    ) -> Result<Trial> {
        let trial = Trial {
            trial_id: trial_id.into(),
            subject_id: subject_id.into(),
            intention,
            sample_rate_hz,
            markers,
        };
        trial.validate()?;
        Ok(trial)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_rate_hz > 0.0) || !self.sample_rate_hz.is_finite() {
            return Err(IfmError::data(format!(
                "trial '{}': sample_rate_hz must be positive, got {}",
                self.trial_id, self.sample_rate_hz
            )));
        }
        if self.markers.len() != MARKER_NAMES.len() {
            return Err(IfmError::data(format!(
                "trial '{}': expected {} markers, got {}",
                self.trial_id,
                MARKER_NAMES.len(),
                self.markers.len()
            )));
        }
        let len = self.markers[0].len();
        if len < 2 {
            return Err(IfmError::data(format!(
                "trial '{}': marker sequences must have length >= 2, got {len}",
                self.trial_id
            )));
        }
        for (idx, seq) in self.markers.iter().enumerate() {
            if seq.len() != len {
                return Err(IfmError::data(format!(
                    "trial '{}': marker '{}' has length {} but '{}' has {}",
                    self.trial_id,
                    MARKER_NAMES[idx],
                    seq.len(),
                    MARKER_NAMES[0],
                    len
                )));
            }
            for (t, p) in seq.iter().enumerate() {
                if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                    return Err(IfmError::data(format!(
                        "trial '{}': marker '{}' has non-finite coordinate at sample {t}",
                        self.trial_id, MARKER_NAMES[idx]
                    )));
                }
            }
        }
        Ok(())
    }

    /// Number of samples per marker.
    pub fn len(&self) -> usize {
        self.markers[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.markers.is_empty() || self.markers[0].is_empty()
    }

    /// Marker trajectory by canonical name.
    pub fn marker(&self, name: &str) -> Result<&[Point3<f64>]> {
        let idx = marker_index(name)
            .ok_or_else(|| IfmError::data(format!("unknown marker name '{name}'")))?;
        Ok(&self.markers[idx])
    }

    /// Returns a copy cropped to the half-open sample range `[start, end)`.
    pub fn cropped(&self, start: usize, end: usize) -> Trial {
        Trial {
            trial_id: self.trial_id.clone(),
            subject_id: self.subject_id.clone(),
            intention: self.intention,
            sample_rate_hz: self.sample_rate_hz,
            markers: self
                .markers
                .iter()
                .map(|seq| seq[start..end].to_vec())
                .collect(),
        }
    }

    /// Applies a rigid transform `p -> rot * p + t` to every marker sample.
    pub fn transformed(&self, rot: &nalgebra::Rotation3<f64>, t: &Vector3<f64>) -> Trial {
        Trial {
            trial_id: self.trial_id.clone(),
            subject_id: self.subject_id.clone(),
            intention: self.intention,
            sample_rate_hz: self.sample_rate_hz,
            markers: self
                .markers
                .iter()
                .map(|seq| seq.iter().map(|p| rot * p + t).collect())
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_markers(len: usize) -> Vec<Vec<Point3<f64>>> {
        MARKER_NAMES
            .iter()
            .map(|_| vec![Point3::new(0.0, 0.0, 0.0); len])
            .collect()
    }

    #[test]
    fn canonical_marker_list_has_twenty_distinct_names() {
        let mut names: Vec<&str> = MARKER_NAMES.to_vec();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), 20);
        assert!(marker_index("wrist").is_some());
        assert!(marker_index("thumb_tip").is_some());
        assert!(marker_index("index_tip").is_some());
    }

    #[test]
    fn rejects_length_mismatch() {
        let mut markers = flat_markers(5);
        markers[3].pop();
        let err = Trial::new("t", "s", Intention::Pouring, 100.0, markers).unwrap_err();
        assert!(err.to_string().contains("hand_dorsum_base"));
    }

    #[test]
    fn rejects_short_and_nonfinite() {
        assert!(Trial::new("t", "s", Intention::Pouring, 100.0, flat_markers(1)).is_err());
        let mut markers = flat_markers(4);
        markers[0][2] = Point3::new(f64::NAN, 0.0, 0.0);
        assert!(Trial::new("t", "s", Intention::Pouring, 100.0, markers).is_err());
        assert!(Trial::new("t", "s", Intention::Pouring, 0.0, flat_markers(4)).is_err());
    }

    #[test]
    fn intention_pairs_are_the_six_unordered_pairs() {
        let pairs = Intention::pairs();
        assert_eq!(pairs.len(), 6);
        assert_eq!(pairs[0], (Intention::Pouring, Intention::Passing));
        assert_eq!(pairs[5], (Intention::Drinking, Intention::Placing));
    }
}
