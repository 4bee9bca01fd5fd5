//! Domain types and the feature-file formats through which external model
//! outputs (pose keypoints, recovered 3D motion, VLM logits, human ratings)
//! enter the engine.
//!
//! Keypoints follow the COCO-WholeBody ordering: body `[0,17)`, feet
//! `[17,23)`, face `[23,91)`, left hand `[91,112)`, right hand `[112,133)`.
//! Rotations are `(w, x, y, z)` unit quaternions in a right-handed, y-up,
//! gravity-aligned world frame.

mod format;

use std::fmt;
use std::str::FromStr;

use nalgebra::UnitQuaternion;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use format::{
    format_float, parse_keypoint_stream, parse_motion_track, parse_motion_tracks, parse_ratings,
    parse_vlm_record, write_keypoint_stream, write_motion_tracks, write_ratings, write_vlm_record,
};

pub const KEYPOINTS_PER_PERSON: usize = 133;
pub const DEFAULT_JOINT_COUNT: usize = 22;

/// Maximum accepted deviation of a root quaternion's norm from 1.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PersonKeypoints {
    pub keypoints: Vec<Keypoint>,
}

impl PersonKeypoints {
    /// A person whose every keypoint sits at the origin with confidence `conf`.
    pub fn uniform(conf: f64) -> Self {
        PersonKeypoints {
            keypoints: vec![
                Keypoint {
                    x: 0.0,
                    y: 0.0,
                    confidence: conf,
                };
                KEYPOINTS_PER_PERSON
            ],
        }
    }

    pub fn confidences(&self) -> impl Iterator<Item = f64> + '_ {
        self.keypoints.iter().map(|k| k.confidence)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeypointFrame {
    pub frame_index: u64,
    pub persons: Vec<PersonKeypoints>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeypointStream {
    pub video_id: String,
    pub fps: f64,
    pub frames: Vec<KeypointFrame>,
}

impl KeypointStream {
    pub fn validate(&self) -> Result<()> {
        check_fps(self.fps)?;
        if self.frames.is_empty() {
            return Err(Error::Input(format!(
                "keypoint stream {} has no frames",
                self.video_id
            )));
        }
        let mut previous: Option<u64> = None;
        for (i, frame) in self.frames.iter().enumerate() {
            let line = i + 2;
            if let Some(prev) = previous {
                if frame.frame_index <= prev {
                    return Err(Error::Ordering {
                        line,
                        previous: prev,
                        found: frame.frame_index,
                    });
                }
            }
            previous = Some(frame.frame_index);
            for person in &frame.persons {
                if person.keypoints.len() != KEYPOINTS_PER_PERSON {
                    return Err(Error::Schema {
                        line,
                        message: format!(
                            "expected {KEYPOINTS_PER_PERSON} keypoints per person, found {}",
                            person.keypoints.len()
                        ),
                    });
                }
                for kp in &person.keypoints {
                    for (field, value) in [("x", kp.x), ("y", kp.y)] {
                        if !value.is_finite() {
                            return Err(Error::Range {
                                line,
                                field: field.into(),
                                value,
                            });
                        }
                    }
                    if !(0.0..=1.0).contains(&kp.confidence) {
                        return Err(Error::Range {
                            line,
                            field: "confidence".into(),
                            value: kp.confidence,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionFrame {
    pub root_rotation: UnitQuaternion<f64>,
    /// Axis-angle rotation (radians) of each body joint.
    pub joint_angles: Vec<[f64; 3]>,
}

/// 3D pose sequence of one person within one video.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionTrack {
    pub video_id: String,
    pub person_id: String,
    pub fps: f64,
    pub frames: Vec<MotionFrame>,
}

impl MotionTrack {
    pub fn joint_count(&self) -> usize {
        self.frames.first().map_or(0, |f| f.joint_angles.len())
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        check_fps(self.fps)?;
        if self.frames.is_empty() {
            return Err(Error::Input(format!(
                "motion track {}/{} has no frames",
                self.video_id, self.person_id
            )));
        }
        let joints = self.joint_count();
        for (i, frame) in self.frames.iter().enumerate() {
            if frame.joint_angles.len() != joints {
                return Err(Error::Schema {
                    line: i + 2,
                    message: format!(
                        "joint count changed from {joints} to {}",
                        frame.joint_angles.len()
                    ),
                });
            }
            let q = frame.root_rotation.quaternion();
            let norm = q.norm();
            if !norm.is_finite() || (norm - 1.0).abs() > UNIT_NORM_TOLERANCE {
                return Err(Error::Range {
                    line: i + 2,
                    field: "root_rotation norm".into(),
                    value: norm,
                });
            }
            for angle in frame.joint_angles.iter().flatten() {
                if !angle.is_finite() {
                    return Err(Error::Range {
                        line: i + 2,
                        field: "joint_angles".into(),
                        value: *angle,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Yes/No logit pair read from the VLM for one video.
#[derive(Debug, Clone, PartialEq)]
pub struct VlmPriorRecord {
    pub video_id: String,
    pub positive_logit: f64,
    pub negative_logit: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricName {
    Anat,
    Local,
    Global,
}

impl MetricName {
    pub const ALL: [MetricName; 3] = [MetricName::Anat, MetricName::Local, MetricName::Global];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricName::Anat => "anat",
            MetricName::Local => "local",
            MetricName::Global => "global",
        }
    }
}

impl fmt::Display for MetricName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Empirical extrema of one raw metric over a real-footage corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationBounds {
    pub metric_name: MetricName,
    pub min_real: f64,
    pub max_real: f64,
    pub corpus_id: String,
    pub sample_count: usize,
}

impl CalibrationBounds {
    pub fn validate(&self) -> Result<()> {
        let invalid = |message: String| Error::InvalidBounds {
            metric: self.metric_name,
            message,
        };
        if !self.min_real.is_finite() || !self.max_real.is_finite() {
            return Err(invalid("bounds must be finite".into()));
        }
        if self.min_real >= self.max_real {
            return Err(invalid(format!(
                "min {} is not below max {}",
                self.min_real, self.max_real
            )));
        }
        if self.sample_count == 0 {
            return Err(invalid("sample count must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "BMO_SIMPLE")]
    BmoSimple,
    #[serde(rename = "BMO_SKILL")]
    BmoSkill,
    #[serde(rename = "HOI")]
    Hoi,
    #[serde(rename = "HHI")]
    Hhi,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::BmoSimple,
        Category::BmoSkill,
        Category::Hoi,
        Category::Hhi,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::BmoSimple => "BMO_SIMPLE",
            Category::BmoSkill => "BMO_SKILL",
            Category::Hoi => "HOI",
            Category::Hhi => "HHI",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Input(format!("unknown category {s:?}")))
    }
}

/// Mean human ratings for one video on the 5-point scale.
#[derive(Debug, Clone, PartialEq)]
pub struct HumanRatingRecord {
    pub video_id: String,
    pub model_id: String,
    pub category: Category,
    /// Anatomical correctness.
    pub acs: f64,
    /// Motion smoothness.
    pub mss: f64,
}

/// Every intermediate and final score for one video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub video_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<Category>,
    pub s_prior: f64,
    pub s_anat_raw: f64,
    pub s_anat_norm: f64,
    pub q_anat: f64,
    pub s_local_raw: f64,
    pub s_local_norm: f64,
    pub s_global_raw: f64,
    pub s_global_norm: f64,
    pub s_mot: f64,
    pub q_mot: f64,
    #[serde(default)]
    pub flags: Vec<String>,
}

impl ScoreReport {
    /// Checks the unit-interval and fusion-bound invariants.
    pub fn check_invariants(&self) -> Result<()> {
        let unit = [
            ("s_prior", self.s_prior),
            ("s_anat_norm", self.s_anat_norm),
            ("q_anat", self.q_anat),
            ("s_local_norm", self.s_local_norm),
            ("s_global_norm", self.s_global_norm),
            ("s_mot", self.s_mot),
            ("q_mot", self.q_mot),
        ];
        for (name, v) in unit {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Input(format!(
                    "{}: {name} = {v} outside [0,1]",
                    self.video_id
                )));
            }
        }
        if self.q_anat > self.s_prior.min(self.s_anat_norm) {
            return Err(Error::Input(format!(
                "{}: q_anat exceeds its factors",
                self.video_id
            )));
        }
        if self.q_mot > self.s_prior.min(self.s_mot) {
            return Err(Error::Input(format!(
                "{}: q_mot exceeds its factors",
                self.video_id
            )));
        }
        Ok(())
    }
}

fn check_fps(fps: f64) -> Result<()> {
    if fps.is_finite() && fps > 0.0 {
        Ok(())
    } else {
        Err(Error::Range {
            line: 1,
            field: "fps".into(),
            value: fps,
        })
    }
}
