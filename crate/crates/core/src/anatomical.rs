//! Anatomical structure score from whole-body keypoint confidences.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{KeypointFrame, KeypointStream, PersonKeypoints, KEYPOINTS_PER_PERSON};

pub const FLAG_NO_PERSON_VISIBLE: &str = "no-person-visible";
pub const FLAG_NO_PERSON_DETECTED: &str = "no-person-detected";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BodyPart {
    Body,
    Feet,
    Face,
    LeftHand,
    RightHand,
}

impl BodyPart {
    pub const ALL: [BodyPart; 5] = [
        BodyPart::Body,
        BodyPart::Feet,
        BodyPart::Face,
        BodyPart::LeftHand,
        BodyPart::RightHand,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BodyPart::Body => "body",
            BodyPart::Feet => "feet",
            BodyPart::Face => "face",
            BodyPart::LeftHand => "left_hand",
            BodyPart::RightHand => "right_hand",
        }
    }
}

impl std::str::FromStr for BodyPart {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BodyPart::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::Input(format!("unknown body part {s:?}")))
    }
}

/// Keypoint index ranges (0-based, half-open) of each body part.
#[derive(Debug, Clone, PartialEq)]
pub struct PartGrouping {
    parts: Vec<(BodyPart, Range<usize>)>,
}

impl Default for PartGrouping {
    fn default() -> Self {
        PartGrouping {
            parts: vec![
                (BodyPart::Body, 0..17),
                (BodyPart::Feet, 17..23),
                (BodyPart::Face, 23..91),
                (BodyPart::LeftHand, 91..112),
                (BodyPart::RightHand, 112..133),
            ],
        }
    }
}

impl PartGrouping {
    /// Builds a grouping, checking that the ranges tile `[0, 133)` exactly.
    pub fn new(mut parts: Vec<(BodyPart, Range<usize>)>) -> Result<Self> {
        parts.sort_by_key(|(_, r)| r.start);
        let mut next = 0;
        for (part, range) in &parts {
            if range.start != next || range.end <= range.start {
                return Err(Error::Input(format!(
                    "part {} range {range:?} leaves a gap or overlap at {next}",
                    part.as_str()
                )));
            }
            next = range.end;
        }
        if next != KEYPOINTS_PER_PERSON {
            return Err(Error::Input(format!(
                "part ranges cover [0,{next}), expected [0,{KEYPOINTS_PER_PERSON})"
            )));
        }
        Ok(PartGrouping { parts })
    }

    pub fn parts(&self) -> &[(BodyPart, Range<usize>)] {
        &self.parts
    }

    pub fn range(&self, part: BodyPart) -> Range<usize> {
        self.parts
            .iter()
            .find(|(p, _)| *p == part)
            .map(|(_, r)| r.clone())
            .expect("grouping covers every part")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnatConfig {
    /// Visibility threshold on a part's mean keypoint confidence.
    pub tau: f64,
}

impl Default for AnatConfig {
    fn default() -> Self {
        AnatConfig { tau: 0.3 }
    }
}

impl AnatConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tau > 0.0 && self.tau < 1.0 {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "tau = {} must lie in (0,1)",
                self.tau
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnatScore {
    pub score: f64,
    pub flags: Vec<String>,
}

/// Mean confidence over the keypoints of visible parts, or `None` when no
/// part is visible. A part is visible when its mean confidence is strictly
/// above `tau`.
pub fn person_anat_score(
    person: &PersonKeypoints,
    grouping: &PartGrouping,
    cfg: &AnatConfig,
) -> Option<f64> {
    let visible = grouping.parts().iter().filter_map(|(_, range)| {
        let part = &person.keypoints[range.clone()];
        let mean = running_mean(part.iter().map(|k| k.confidence))?;
        (mean > cfg.tau).then_some(part)
    });
    running_mean(visible.flatten().map(|k| k.confidence))
}

/// Incremental mean; exact when every value is equal.
fn running_mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let mut mean = None;
    for (k, x) in values.into_iter().enumerate() {
        let m = mean.get_or_insert(x);
        *m += (x - *m) / (k + 1) as f64;
    }
    mean
}

/// Frame score `s_t`: mean person score over persons with a visible part.
/// Returns `None` when nobody is visible.
pub fn frame_anat_score(
    frame: &KeypointFrame,
    grouping: &PartGrouping,
    cfg: &AnatConfig,
) -> Option<f64> {
    running_mean(
        frame
            .persons
            .iter()
            .filter_map(|p| person_anat_score(p, grouping, cfg)),
    )
}

/// Raw anatomical score: the unweighted mean of frame scores, with frames
/// lacking any visible person contributing zero.
pub fn video_anat_score(
    stream: &KeypointStream,
    grouping: &PartGrouping,
    cfg: &AnatConfig,
) -> Result<AnatScore> {
    if stream.frames.is_empty() {
        return Err(Error::Input(format!(
            "keypoint stream {} is empty",
            stream.video_id
        )));
    }
    let mut empty_frames = 0usize;
    let frame_scores = stream.frames.iter().map(|frame| {
        frame_anat_score(frame, grouping, cfg).unwrap_or_else(|| {
            empty_frames += 1;
            0.0
        })
    });
    let score = running_mean(frame_scores).expect("stream has frames");
    let mut flags = Vec::new();
    if empty_frames == stream.frames.len() {
        flags.push(FLAG_NO_PERSON_DETECTED.to_owned());
    } else if empty_frames > 0 {
        flags.push(FLAG_NO_PERSON_VISIBLE.to_owned());
    }
    Ok(AnatScore { score, flags })
}

/// Anatomical quality: the prior modulated by the calibrated anatomical score.
pub fn q_anat(s_prior: f64, s_anat_norm: f64) -> Result<f64> {
    crate::check_unit("s_prior", s_prior)?;
    crate::check_unit("s_anat_norm", s_anat_norm)?;
    Ok(s_prior * s_anat_norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::Keypoint;
    use proptest::prelude::*;

    fn person_with(f: impl Fn(usize) -> f64) -> PersonKeypoints {
        PersonKeypoints {
            keypoints: (0..KEYPOINTS_PER_PERSON)
                .map(|i| Keypoint {
                    x: i as f64,
                    y: 2.0 * i as f64,
                    confidence: f(i),
                })
                .collect(),
        }
    }

    fn frame(index: u64, persons: Vec<PersonKeypoints>) -> KeypointFrame {
        KeypointFrame {
            frame_index: index,
            persons,
        }
    }

    fn stream(frames: Vec<KeypointFrame>) -> KeypointStream {
        KeypointStream {
            video_id: "v".into(),
            fps: 30.0,
            frames,
        }
    }

    #[test]
    fn uniform_confidence() {
        let g = PartGrouping::default();
        for c in [0.8, 0.30000000000000004, 0.7123456789, 1.0] {
            let f = frame(0, vec![PersonKeypoints::uniform(c)]);
            assert_eq!(frame_anat_score(&f, &g, &AnatConfig::default()), Some(c));
        }
    }

    #[test]
    fn invisible_parts_do_not_dilute() {
        let g = PartGrouping::default();
        let p = person_with(|i| if i < 17 { 0.9 } else { 0.1 });
        let s = frame_anat_score(&frame(0, vec![p]), &g, &AnatConfig::default()).unwrap();
        assert!((s - 0.9).abs() < 1e-15);
    }

    #[test]
    fn tie_at_tau_is_invisible() {
        let g = PartGrouping::default();
        let p = person_with(|i| if i < 17 { 0.8 } else { 0.5 });
        let cfg = AnatConfig { tau: 0.5 };
        let s = frame_anat_score(&frame(0, vec![p]), &g, &cfg).unwrap();
        assert!((s - 0.8).abs() < 1e-15);
        assert!(
            frame_anat_score(&frame(0, vec![PersonKeypoints::uniform(0.5)]), &g, &cfg).is_none()
        );
    }

    #[test]
    fn two_person_average() {
        let g = PartGrouping::default();
        let f = frame(
            0,
            vec![PersonKeypoints::uniform(0.6), PersonKeypoints::uniform(0.8)],
        );
        let s = frame_anat_score(&f, &g, &AnatConfig::default()).unwrap();
        // Independent recomputation of both per-person means.
        let oracle = (f.persons[0].confidences().sum::<f64>() / 133.0
            + f.persons[1].confidences().sum::<f64>() / 133.0)
            / 2.0;
        assert!((s - oracle).abs() < 1e-12);
        assert!((s - 0.7).abs() < 1e-12);
    }

    #[test]
    fn invisible_person_is_ignored_in_frame_mean() {
        let g = PartGrouping::default();
        let f = frame(
            0,
            vec![PersonKeypoints::uniform(0.1), PersonKeypoints::uniform(0.8)],
        );
        let s = frame_anat_score(&f, &g, &AnatConfig::default()).unwrap();
        assert!((s - 0.8).abs() < 1e-15);
    }

    #[test]
    fn video_mean_over_frames() {
        let g = PartGrouping::default();
        let st = stream(
            [0.6, 0.7, 0.8]
                .iter()
                .enumerate()
                .map(|(i, &c)| frame(i as u64, vec![PersonKeypoints::uniform(c)]))
                .collect(),
        );
        let s = video_anat_score(&st, &g, &AnatConfig::default()).unwrap();
        assert!((s.score - 0.7).abs() < 1e-12);
        assert!(s.flags.is_empty());
    }

    #[test]
    fn empty_frames_score_zero() {
        let g = PartGrouping::default();
        let all_empty = stream(vec![frame(0, vec![]), frame(1, vec![])]);
        let s = video_anat_score(&all_empty, &g, &AnatConfig::default()).unwrap();
        assert_eq!(s.score, 0.0);
        assert_eq!(s.flags, vec![FLAG_NO_PERSON_DETECTED.to_owned()]);

        let half = stream(vec![
            frame(0, vec![]),
            frame(1, vec![PersonKeypoints::uniform(0.8)]),
        ]);
        let s = video_anat_score(&half, &g, &AnatConfig::default()).unwrap();
        assert!((s.score - 0.4).abs() < 1e-15);
        assert_eq!(s.flags, vec![FLAG_NO_PERSON_VISIBLE.to_owned()]);
    }

    #[test]
    fn empty_stream_is_error() {
        let g = PartGrouping::default();
        assert!(video_anat_score(&stream(vec![]), &g, &AnatConfig::default()).is_err());
    }

    #[test]
    fn q_anat_examples() {
        assert_eq!(q_anat(1.0, 0.7).unwrap(), 0.7);
        assert_eq!(q_anat(0.5, 0.0).unwrap(), 0.0);
        assert!((q_anat(0.8, 0.75).unwrap() - 0.6).abs() < 1e-15);
        assert!(q_anat(1.1, 0.5).is_err());
        assert!(q_anat(0.5, -0.1).is_err());
    }

    #[test]
    fn grouping_validation() {
        let g = PartGrouping::default();
        assert!(PartGrouping::new(g.parts().to_vec()).is_ok());
        let mut gap = g.parts().to_vec();
        gap[1].1 = 18..23;
        assert!(PartGrouping::new(gap).is_err());
        let mut short = g.parts().to_vec();
        short[4].1 = 112..132;
        assert!(PartGrouping::new(short).is_err());
        assert_eq!(g.range(BodyPart::LeftHand), 91..112);
    }

    proptest! {
        #[test]
        fn positions_do_not_matter(confs in prop::collection::vec(0.0..=1.0f64, 133), dx in -500.0..500.0f64) {
            let g = PartGrouping::default();
            let cfg = AnatConfig::default();
            let a = PersonKeypoints { keypoints: confs.iter().map(|&c| Keypoint { x: 0.0, y: 0.0, confidence: c }).collect() };
            let mut b = a.clone();
            for (i, k) in b.keypoints.iter_mut().enumerate() {
                k.x = dx * i as f64;
                k.y = -dx;
            }
            prop_assert_eq!(person_anat_score(&a, &g, &cfg), person_anat_score(&b, &g, &cfg));
        }

        #[test]
        fn raising_confidence_within_fixed_visibility(confs in prop::collection::vec(0.0..=1.0f64, 133), idx in 0usize..133, bump in 0.0..1.0f64) {
            let g = PartGrouping::default();
            let cfg = AnatConfig::default();
            let a = PersonKeypoints { keypoints: confs.iter().map(|&c| Keypoint { x: 0.0, y: 0.0, confidence: c }).collect() };
            let mut b = a.clone();
            b.keypoints[idx].confidence = (b.keypoints[idx].confidence + bump).min(1.0);
            let visible = |p: &PersonKeypoints| -> Vec<bool> {
                g.parts().iter().map(|(_, r)| {
                    p.keypoints[r.clone()].iter().map(|k| k.confidence).sum::<f64>() / r.len() as f64 > cfg.tau
                }).collect()
            };
            prop_assume!(visible(&a) == visible(&b));
            if let (Some(sa), Some(sb)) = (person_anat_score(&a, &g, &cfg), person_anat_score(&b, &g, &cfg)) {
                prop_assert!(sb >= sa - 1e-15);
            }
        }

        #[test]
        fn frame_permutation_invariant(levels in prop::collection::vec(0.0..=1.0f64, 1..12), rot in 0usize..12) {
            let g = PartGrouping::default();
            let cfg = AnatConfig::default();
            let frames: Vec<_> = levels.iter().enumerate()
                .map(|(i, &c)| frame(i as u64, vec![PersonKeypoints::uniform(c)])).collect();
            let mut permuted = frames.clone();
            permuted.rotate_left(rot % frames.len());
            permuted.reverse();
            for (i, f) in permuted.iter_mut().enumerate() { f.frame_index = i as u64; }
            let a = video_anat_score(&stream(frames), &g, &cfg).unwrap().score;
            let b = video_anat_score(&stream(permuted), &g, &cfg).unwrap().score;
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn q_anat_bounded(p in 0.0..=1.0f64, a in 0.0..=1.0f64) {
            let q = q_anat(p, a).unwrap();
            prop_assert!(q <= p.min(a));
            prop_assert_eq!(q_anat(1.0, a).unwrap(), a);
        }
    }
}
