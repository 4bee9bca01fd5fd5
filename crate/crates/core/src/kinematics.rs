//! Motion stability from 3D joint kinematics: local jerk residuals and
//! global orientation consistency.

use nalgebra::{DMatrix, Vector3};
use serde::{Deserialize, Serialize};

use crate::calibration::CalibrationSet;
use crate::error::{Error, Result};
use crate::features::{MetricName, MotionTrack};

pub const FLAG_SHORT_SEQUENCE: &str = "short-sequence";

/// Minimum frames for a jerk sample.
pub const MIN_FRAMES_LOCAL: usize = 4;
pub const MIN_FRAMES_GLOBAL: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KinConfig {
    pub gaussian_sigma_frames: f64,
    /// Kernel half-width is `ceil(truncate * sigma)`.
    pub gaussian_truncate: f64,
    /// Jerk residual scale, rad/s³.
    pub phi_lambda_local: f64,
    pub phi_lambda_global: f64,
    pub heading_epsilon: f64,
    pub world_up: [f64; 3],
    pub forward_axis: [f64; 3],
}

impl Default for KinConfig {
    fn default() -> Self {
        KinConfig {
            gaussian_sigma_frames: 2.0,
            gaussian_truncate: 3.0,
            phi_lambda_local: 100.0,
            phi_lambda_global: 0.5,
            heading_epsilon: 1e-6,
            world_up: [0.0, 1.0, 0.0],
            forward_axis: [0.0, 0.0, 1.0],
        }
    }
}

impl KinConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gaussian_sigma_frames", self.gaussian_sigma_frames),
            ("gaussian_truncate", self.gaussian_truncate),
            ("phi_lambda_local", self.phi_lambda_local),
            ("phi_lambda_global", self.phi_lambda_global),
            ("heading_epsilon", self.heading_epsilon),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} = {v} must be positive")));
            }
        }
        let up = Vector3::from(self.world_up);
        let fwd = Vector3::from(self.forward_axis);
        for (name, v) in [("world_up", up), ("forward_axis", fwd)] {
            if (v.norm() - 1.0).abs() > 1e-9 {
                return Err(Error::Config(format!("{name} must be unit length")));
            }
        }
        if up.cross(&fwd).norm() < 1e-6 {
            return Err(Error::Config(
                "world_up and forward_axis must not be parallel".into(),
            ));
        }
        Ok(())
    }

    pub fn up(&self) -> Vector3<f64> {
        Vector3::from(self.world_up)
    }

    pub fn forward(&self) -> Vector3<f64> {
        Vector3::from(self.forward_axis)
    }

    /// Normalized Gaussian weights, centre tap at index `radius`.
    pub fn gaussian_kernel(&self) -> Vec<f64> {
        let sigma = self.gaussian_sigma_frames;
        let radius = (self.gaussian_truncate * sigma).ceil() as i64;
        let weights: Vec<f64> = (-radius..=radius)
            .map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp())
            .collect();
        let total: f64 = weights.iter().sum();
        weights.into_iter().map(|w| w / total).collect()
    }
}

/// Strictly decreasing map of a non-negative deviation into `(0, 1]`.
pub fn phi(x: f64, lambda: f64) -> f64 {
    1.0 / (1.0 + x / lambda)
}

/// Joint angles flattened to a `T x 3J` matrix (row = frame).
pub fn angle_matrix(track: &MotionTrack) -> DMatrix<f64> {
    let dims = 3 * track.joint_count();
    DMatrix::from_fn(track.len(), dims, |t, d| {
        track.frames[t].joint_angles[d / 3][d % 3]
    })
}

/// Forward third difference of the joint angles scaled by `fps³`, giving
/// angular jerk in rad/s³. The result has `T - 3` rows.
pub fn joint_jerk(track: &MotionTrack) -> Result<DMatrix<f64>> {
    let frames = track.len();
    if frames < MIN_FRAMES_LOCAL {
        return Err(Error::SequenceTooShort {
            frames,
            required: MIN_FRAMES_LOCAL,
        });
    }
    let theta = angle_matrix(track);
    let scale = track.fps.powi(3);
    Ok(DMatrix::from_fn(frames - 3, theta.ncols(), |t, d| {
        let (a0, a1, a2, a3) = (
            theta[(t, d)],
            theta[(t + 1, d)],
            theta[(t + 2, d)],
            theta[(t + 3, d)],
        );
        ((a3 - a0) - 3.0 * (a2 - a1)) * scale
    }))
}

/// Maps an arbitrary index onto `[0, len)` by half-sample symmetric
/// reflection (`d c b a | a b c d | d c b a`), repeating as needed.
fn reflect_index(i: i64, len: usize) -> usize {
    let n = len as i64;
    let m = i.rem_euclid(2 * n);
    (if m < n { m } else { 2 * n - 1 - m }) as usize
}

/// Per-column convolution with the normalized Gaussian kernel, reflect
/// padding at both ends.
pub fn gaussian_smooth(signal: &DMatrix<f64>, cfg: &KinConfig) -> DMatrix<f64> {
    let kernel = cfg.gaussian_kernel();
    let radius = (kernel.len() / 2) as i64;
    let rows = signal.nrows();
    DMatrix::from_fn(rows, signal.ncols(), |t, d| {
        kernel
            .iter()
            .enumerate()
            .map(|(k, w)| w * signal[(reflect_index(t as i64 + k as i64 - radius, rows), d)])
            .sum()
    })
}

/// Mean L2 norm of the jerk residual `jerk - G(jerk)` over jerk rows.
pub fn jerk_deviation(track: &MotionTrack, cfg: &KinConfig) -> Result<f64> {
    let jerk = joint_jerk(track)?;
    let smooth = gaussian_smooth(&jerk, cfg);
    let residual = jerk - smooth;
    let total: f64 = residual.row_iter().map(|r| r.norm()).sum();
    Ok(total / residual.nrows() as f64)
}

/// Raw local stability `phi(d)`; 1 means no high-frequency jitter.
pub fn local_stability(track: &MotionTrack, cfg: &KinConfig) -> Result<f64> {
    Ok(phi(jerk_deviation(track, cfg)?, cfg.phi_lambda_local))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Orientation {
    pub up: Vector3<f64>,
    pub heading: Vector3<f64>,
}

/// Body vertical axis and horizontal heading per frame. A heading that
/// degenerates (body axis along world-up) carries the last valid heading.
pub fn orientation_vectors(track: &MotionTrack, cfg: &KinConfig) -> Vec<Orientation> {
    let world_up = cfg.up();
    let forward = cfg.forward();
    let horizontal = |v: Vector3<f64>| v - world_up * world_up.dot(&v);
    let mut last_heading = horizontal(forward).normalize();
    track
        .frames
        .iter()
        .map(|frame| {
            let r = frame.root_rotation;
            let up = r * world_up;
            let h = horizontal(r * forward);
            let norm = h.norm();
            if norm >= cfg.heading_epsilon {
                last_heading = h / norm;
            }
            Orientation {
                up,
                heading: last_heading,
            }
        })
        .collect()
}

/// Largest adjacent-frame deviation of the up or heading vector, in `[0, 2]`.
pub fn orientation_deviation(track: &MotionTrack, cfg: &KinConfig) -> Result<f64> {
    let frames = track.len();
    if frames < MIN_FRAMES_GLOBAL {
        return Err(Error::SequenceTooShort {
            frames,
            required: MIN_FRAMES_GLOBAL,
        });
    }
    let vectors = orientation_vectors(track, cfg);
    let worst = vectors
        .windows(2)
        .map(|w| {
            let up = 1.0 - w[0].up.dot(&w[1].up);
            let head = 1.0 - w[0].heading.dot(&w[1].heading);
            up.max(head)
        })
        .fold(0.0, f64::max);
    Ok(worst.clamp(0.0, 2.0))
}

/// Raw global consistency `phi(D)`.
pub fn global_consistency(track: &MotionTrack, cfg: &KinConfig) -> Result<f64> {
    Ok(phi(
        orientation_deviation(track, cfg)?,
        cfg.phi_lambda_global,
    ))
}

/// Motion stability: product of the calibrated local and global scores.
pub fn s_mot(local_norm: f64, global_norm: f64) -> Result<f64> {
    crate::check_unit("local_norm", local_norm)?;
    crate::check_unit("global_norm", global_norm)?;
    Ok(local_norm * global_norm)
}

/// Motion quality: the prior gated by motion stability.
pub fn q_mot(s_prior: f64, s_mot: f64) -> Result<f64> {
    crate::check_unit("s_prior", s_prior)?;
    crate::check_unit("s_mot", s_mot)?;
    Ok(s_prior * s_mot)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackScore {
    pub local_raw: f64,
    pub global_raw: f64,
    pub local_norm: f64,
    pub global_norm: f64,
    pub s_mot: f64,
}

/// Motion fields of a video's score report, averaged across person tracks.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MotionScore {
    pub local_raw: f64,
    pub local_norm: f64,
    pub global_raw: f64,
    pub global_norm: f64,
    pub s_mot: f64,
    pub flags: Vec<String>,
}

pub fn score_single_track(
    track: &MotionTrack,
    cfg: &KinConfig,
    bounds: &CalibrationSet,
) -> Result<TrackScore> {
    let local_raw = local_stability(track, cfg)?;
    let global_raw = global_consistency(track, cfg)?;
    let local_norm = bounds.normalize(MetricName::Local, local_raw);
    let global_norm = bounds.normalize(MetricName::Global, global_raw);
    Ok(TrackScore {
        local_raw,
        global_raw,
        local_norm,
        global_norm,
        s_mot: s_mot(local_norm, global_norm)?,
    })
}

/// Scores every track of a video. Tracks too short to score contribute zero
/// and raise the short-sequence flag; the video value is the mean over tracks.
pub fn score_tracks(
    tracks: &[MotionTrack],
    cfg: &KinConfig,
    bounds: &CalibrationSet,
) -> Result<MotionScore> {
    if tracks.is_empty() {
        return Err(Error::Input("no motion tracks".into()));
    }
    let mut out = MotionScore::default();
    for track in tracks {
        match score_single_track(track, cfg, bounds) {
            Ok(s) => {
                out.local_raw += s.local_raw;
                out.local_norm += s.local_norm;
                out.global_raw += s.global_raw;
                out.global_norm += s.global_norm;
                out.s_mot += s.s_mot;
            }
            Err(Error::SequenceTooShort { .. }) => {
                if out.flags.is_empty() {
                    out.flags.push(FLAG_SHORT_SEQUENCE.to_owned());
                }
            }
            Err(e) => return Err(e),
        }
    }
    let n = tracks.len() as f64;
    out.local_raw /= n;
    out.local_norm /= n;
    out.global_raw /= n;
    out.global_norm /= n;
    out.s_mot /= n;
    Ok(out)
}
