//! Seeded synthetic keypoint streams and motion tracks with injectable
//! artifacts, plus benchmark and calibration corpora built from them.
//!
//! All randomness comes from `ChaCha8Rng::seed_from_u64(seed)`; derived
//! streams use `seed` mixed with a fixed per-purpose constant (see
//! [`derive_seed`]), so every value is reproducible across platforms.

use std::f64::consts::{PI, TAU};

use nalgebra::{Unit, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::anatomical::{BodyPart, PartGrouping};
use crate::error::{Error, Result};
use crate::features::{
    Category, HumanRatingRecord, Keypoint, KeypointFrame, KeypointStream, MotionFrame, MotionTrack,
    PersonKeypoints, VlmPriorRecord, KEYPOINTS_PER_PERSON,
};
use crate::pipeline::VideoFeatures;

pub const MIN_SMOOTH_FRAMES: usize = 8;

/// Rotation axis in world coordinates; need not be unit length.
pub type Axis = Vector3<f64>;

/// SplitMix64 finalizer over `seed ^ salt`; used to derive independent
/// generator seeds from one corpus seed.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut z = (seed ^ salt).wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothParams {
    /// Upper bound on the summed sinusoid amplitude per angle component (rad).
    pub amplitude: f64,
    /// Sinusoids per angle component, at most 3.
    pub components: usize,
    pub min_period_s: f64,
    pub max_period_s: f64,
    /// Root yaw rate is drawn from `[-max, max]` degrees per second.
    pub max_yaw_rate_deg: f64,
}

impl Default for SmoothParams {
    fn default() -> Self {
        SmoothParams {
            amplitude: 0.3,
            components: 3,
            min_period_s: 1.5,
            max_period_s: 4.0,
            max_yaw_rate_deg: 30.0,
        }
    }
}

impl SmoothParams {
    /// No joint motion and no root turn.
    pub fn still() -> Self {
        SmoothParams {
            amplitude: 0.0,
            max_yaw_rate_deg: 0.0,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::Input(
                "amplitude must be finite and non-negative".into(),
            ));
        }
        if self.components == 0 || self.components > 3 {
            return Err(Error::Input(
                "between 1 and 3 sinusoids per component".into(),
            ));
        }
        if self.min_period_s < 0.5 || self.max_period_s < self.min_period_s {
            return Err(Error::Input(
                "periods must satisfy 0.5 s <= min <= max".into(),
            ));
        }
        if !(self.max_yaw_rate_deg >= 0.0 && self.max_yaw_rate_deg.is_finite()) {
            return Err(Error::Input(
                "yaw rate must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Amplitude, angular frequency (rad/s) and phase of one sinusoid.
type Wave = (f64, f64, f64);

/// Smooth joint trajectories (sums of slow sinusoids around a fixed pose)
/// with a constant-rate root yaw.
pub fn gen_smooth_track(
    seed: u64,
    frames: usize,
    fps: f64,
    joints: usize,
    params: &SmoothParams,
) -> Result<MotionTrack> {
    params.validate()?;
    if frames < MIN_SMOOTH_FRAMES {
        return Err(Error::SequenceTooShort {
            frames,
            required: MIN_SMOOTH_FRAMES,
        });
    }
    if !(fps.is_finite() && fps > 0.0) || joints == 0 {
        return Err(Error::Input("fps and joint count must be positive".into()));
    }
    let mut rng = rng(seed);
    let dims = 3 * joints;
    let per_wave = params.amplitude / params.components as f64;
    let waves: Vec<(f64, Vec<Wave>)> = (0..dims)
        .map(|_| {
            let offset = rng.random_range(-0.5..0.5);
            let comps = (0..params.components)
                .map(|_| {
                    let amp = uniform(&mut rng, (0.0, per_wave));
                    let period = uniform(&mut rng, (params.min_period_s, params.max_period_s));
                    let phase = rng.random_range(0.0..TAU);
                    (amp, TAU / period, phase)
                })
                .collect();
            (offset, comps)
        })
        .collect();
    let yaw0 = rng.random_range(-PI..PI);
    let rate = uniform(
        &mut rng,
        (-params.max_yaw_rate_deg, params.max_yaw_rate_deg),
    )
    .to_radians();

    let frames = (0..frames)
        .map(|t| {
            let time = t as f64 / fps;
            let angle = |(offset, comps): &(f64, Vec<Wave>)| {
                offset
                    + comps
                        .iter()
                        .map(|(a, w, p)| a * (w * time + p).sin())
                        .sum::<f64>()
            };
            MotionFrame {
                root_rotation: UnitQuaternion::from_axis_angle(
                    &Vector3::y_axis(),
                    yaw0 + rate * time,
                ),
                joint_angles: waves
                    .chunks(3)
                    .map(|c| [angle(&c[0]), angle(&c[1]), angle(&c[2])])
                    .collect(),
            }
        })
        .collect();
    Ok(MotionTrack {
        video_id: format!("smooth-{seed}"),
        person_id: "p0".into(),
        fps,
        frames,
    })
}

/// Adds i.i.d. uniform noise in `[-amplitude, amplitude]` to every joint
/// angle component of every frame.
pub fn inject_jitter(track: &MotionTrack, amplitude: f64, seed: u64) -> MotionTrack {
    let mut out = track.clone();
    if amplitude == 0.0 {
        return out;
    }
    let mut rng = rng(seed);
    for frame in &mut out.frames {
        for v in frame.joint_angles.iter_mut().flatten() {
            *v += rng.random_range(-amplitude..=amplitude);
        }
    }
    out
}

/// Composes a world-frame rotation of `angle_deg` about `axis` onto the root
/// rotation of every frame from `frame_k` on.
pub fn inject_flip(track: &MotionTrack, frame_k: usize, angle_deg: f64, axis: Axis) -> MotionTrack {
    let mut out = track.clone();
    if angle_deg == 0.0 {
        return out;
    }
    let flip = UnitQuaternion::from_axis_angle(&Unit::new_normalize(axis), angle_deg.to_radians());
    for frame in out.frames.iter_mut().skip(frame_k) {
        frame.root_rotation = flip * frame.root_rotation;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Degrade {
    pub part: BodyPart,
    pub confidence: f64,
}

/// Keypoint stream at 30 fps whose confidences all equal `base_conf`, except
/// the keypoints of the degraded part. Positions drift slowly and are not
/// used by the scorer.
pub fn gen_keypoint_stream(
    seed: u64,
    frames: usize,
    persons: usize,
    base_conf: f64,
    degrade: Option<Degrade>,
) -> Result<KeypointStream> {
    let confs = [Some(base_conf), degrade.map(|d| d.confidence)];
    if confs.iter().flatten().any(|c| !(0.0..=1.0).contains(c)) {
        return Err(Error::Input("confidences must lie in [0,1]".into()));
    }
    if frames == 0 {
        return Err(Error::Input(
            "a keypoint stream needs at least one frame".into(),
        ));
    }
    let degraded = degrade.map(|d| (PartGrouping::default().range(d.part), d.confidence));
    let mut rng = rng(seed);
    let anchors: Vec<(f64, f64)> = (0..persons)
        .map(|_| {
            (
                rng.random_range(200.0..1080.0),
                rng.random_range(150.0..570.0),
            )
        })
        .collect();
    let offsets: Vec<(f64, f64)> = (0..KEYPOINTS_PER_PERSON)
        .map(|_| {
            (
                rng.random_range(-120.0..120.0),
                rng.random_range(-150.0..150.0),
            )
        })
        .collect();
    let frames = (0..frames)
        .map(|t| KeypointFrame {
            frame_index: t as u64,
            persons: anchors
                .iter()
                .map(|&(ax, ay)| PersonKeypoints {
                    keypoints: offsets
                        .iter()
                        .enumerate()
                        .map(|(i, &(dx, dy))| Keypoint {
                            x: ((ax + dx + t as f64 * 0.5) * 10.0).round() / 10.0,
                            y: ((ay + dy) * 10.0).round() / 10.0,
                            confidence: match &degraded {
                                Some((range, c)) if range.contains(&i) => *c,
                                _ => base_conf,
                            },
                        })
                        .collect(),
                })
                .collect(),
        })
        .collect();
    Ok(KeypointStream {
        video_id: format!("kps-{seed}"),
        fps: 30.0,
        frames,
    })
}

/// Sampling ranges describing one synthetic generator "model".
#[derive(Debug, Clone, PartialEq)]
pub struct ModelProfile {
    pub model_id: String,
    /// Range of the hidden holistic quality that drives the VLM logits.
    pub prior_quality: (f64, f64),
    /// Joint-angle jitter amplitude range (rad).
    pub jitter: (f64, f64),
    /// Keypoint confidence range.
    pub confidence: (f64, f64),
    /// Probability of a 180 degree root flip at mid-sequence.
    pub flip_probability: f64,
}

/// Default tiers, from clean to flipped and heavily jittered.
pub fn default_profiles() -> Vec<ModelProfile> {
    vec![
        ModelProfile {
            model_id: "good".into(),
            prior_quality: (0.7, 0.95),
            jitter: (0.001, 0.005),
            confidence: (0.8, 0.95),
            flip_probability: 0.0,
        },
        ModelProfile {
            model_id: "fair".into(),
            prior_quality: (0.5, 0.85),
            jitter: (0.004, 0.012),
            confidence: (0.6, 0.85),
            flip_probability: 0.0,
        },
        ModelProfile {
            model_id: "bad".into(),
            prior_quality: (0.3, 0.7),
            jitter: (0.01, 0.03),
            confidence: (0.4, 0.7),
            flip_probability: 1.0,
        },
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusConfig {
    pub frames: usize,
    pub fps: f64,
    pub joints: usize,
    /// Half-width of the uniform noise added to each rating.
    pub rating_noise: f64,
    pub params: SmoothParams,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            frames: 60,
            fps: 30.0,
            joints: crate::features::DEFAULT_JOINT_COUNT,
            rating_noise: 0.3,
            params: SmoothParams::default(),
        }
    }
}

/// Artifact levels a synthetic video was generated with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VideoTruth {
    pub prior_quality: f64,
    pub jitter: f64,
    pub confidence: f64,
    pub flipped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticVideo {
    pub video_id: String,
    pub model_id: String,
    pub category: Category,
    pub keypoints: KeypointStream,
    pub motion: Vec<MotionTrack>,
    pub prior: VlmPriorRecord,
    pub rating: HumanRatingRecord,
    pub truth: VideoTruth,
}

impl SyntheticVideo {
    /// All three modalities, as a features directory would provide them.
    pub fn features(&self) -> VideoFeatures {
        VideoFeatures {
            video_id: self.video_id.clone(),
            keypoints: Some(self.keypoints.clone()),
            motion: Some(self.motion.clone()),
            prior: Some(self.prior.clone()),
        }
    }
}

/// Hidden anatomical quality the synthetic raters respond to: keypoint
/// confidence mapped linearly from `[0.4, 0.95]` onto `[0, 1]`.
pub fn anatomy_truth(confidence: f64) -> f64 {
    ((confidence - 0.4) / 0.55).clamp(0.0, 1.0)
}

/// Hidden motion quality: log jitter mapped from `[0.002, 0.03]` rad onto
/// `[1, 0]` (perceived magnitude grows with the log of the stimulus),
/// quartered when the root flips.
pub fn motion_truth(jitter: f64, flipped: bool) -> f64 {
    let smooth = if jitter <= 0.0 {
        1.0
    } else {
        (1.0 - (jitter / 0.002).ln() / 15f64.ln()).clamp(0.0, 1.0)
    };
    if flipped {
        0.25 * smooth
    } else {
        smooth
    }
}

fn rating_value(quality: f64, noise: f64, rng: &mut ChaCha8Rng) -> f64 {
    let raw = 1.0 + 4.0 * quality + uniform(rng, (-noise, noise));
    (raw.clamp(1.0, 5.0) * 100.0).round() / 100.0
}

fn person_count(category: Category) -> usize {
    if category == Category::Hhi {
        2
    } else {
        1
    }
}

fn synth_video(
    seed: u64,
    video_id: String,
    model_id: &str,
    category: Category,
    truth: VideoTruth,
    cfg: &CorpusConfig,
) -> Result<SyntheticVideo> {
    let mut rng = rng(derive_seed(seed, 0xA11CE));
    let persons = person_count(category);

    let mut keypoints = gen_keypoint_stream(
        derive_seed(seed, 0x6B70),
        cfg.frames,
        persons,
        truth.confidence,
        None,
    )?;
    keypoints.video_id = video_id.clone();
    keypoints.fps = cfg.fps;

    let mut motion = Vec::with_capacity(persons);
    for p in 0..persons {
        let base = gen_smooth_track(
            derive_seed(seed, 0x3070 + p as u64),
            cfg.frames,
            cfg.fps,
            cfg.joints,
            &cfg.params,
        )?;
        let mut track = inject_jitter(&base, truth.jitter, derive_seed(seed, 0x7177 + p as u64));
        if truth.flipped {
            track = inject_flip(&track, cfg.frames / 2, 180.0, Vector3::z());
        }
        track.video_id = video_id.clone();
        track.person_id = format!("p{p}");
        motion.push(track);
    }

    let q = truth.prior_quality.clamp(1e-6, 1.0 - 1e-6);
    let negative_logit = rng.random_range(-1.0..1.0);
    let positive_logit = negative_logit + (q / (1.0 - q)).ln() + rng.random_range(-0.4..0.4);
    let prior = VlmPriorRecord {
        video_id: video_id.clone(),
        positive_logit,
        negative_logit,
    };

    let acs = rating_value(
        truth.prior_quality * anatomy_truth(truth.confidence),
        cfg.rating_noise,
        &mut rng,
    );
    let mss = rating_value(
        truth.prior_quality * motion_truth(truth.jitter, truth.flipped),
        cfg.rating_noise,
        &mut rng,
    );
    Ok(SyntheticVideo {
        rating: HumanRatingRecord {
            video_id: video_id.clone(),
            model_id: model_id.to_owned(),
            category,
            acs,
            mss,
        },
        video_id,
        model_id: model_id.to_owned(),
        category,
        keypoints,
        motion,
        prior,
        truth,
    })
}

/// `videos_per_model` videos for each profile, categories assigned
/// round-robin. Video ids are `{model_id}-{index:03}`.
pub fn benchmark_corpus(
    seed: u64,
    profiles: &[ModelProfile],
    videos_per_model: usize,
    cfg: &CorpusConfig,
) -> Result<Vec<SyntheticVideo>> {
    let mut out = Vec::with_capacity(profiles.len() * videos_per_model);
    for (m, profile) in profiles.iter().enumerate() {
        let mut rng = rng(derive_seed(seed, 0xB0 + m as u64));
        for i in 0..videos_per_model {
            let truth = VideoTruth {
                prior_quality: uniform(&mut rng, profile.prior_quality),
                jitter: uniform(&mut rng, profile.jitter),
                confidence: uniform(&mut rng, profile.confidence),
                flipped: rng.random_bool(profile.flip_probability.clamp(0.0, 1.0)),
            };
            let video_seed = derive_seed(seed, ((m as u64) << 32) | i as u64);
            out.push(synth_video(
                video_seed,
                format!("{}-{i:03}", profile.model_id),
                &profile.model_id,
                Category::ALL[i % Category::ALL.len()],
                truth,
                cfg,
            )?);
        }
    }
    Ok(out)
}

/// Single-model corpus whose artifact levels vary independently across the
/// whole range, used for ablation experiments.
pub fn ablation_corpus(
    seed: u64,
    videos: usize,
    cfg: &CorpusConfig,
) -> Result<Vec<SyntheticVideo>> {
    let profile = ModelProfile {
        model_id: "probe".into(),
        prior_quality: (0.15, 0.95),
        jitter: (0.002, 0.02),
        confidence: (0.45, 0.95),
        flip_probability: 0.0,
    };
    benchmark_corpus(seed, &[profile], videos, cfg)
}

/// Stand-in for real-footage calibration material: clean-but-imperfect
/// motion (estimator-level jitter, turns up to 180 deg/s) and keypoint
/// confidences spread over `[0.45, 0.95)`.
pub fn calibration_corpus(
    seed: u64,
    videos: usize,
    cfg: &CorpusConfig,
) -> Result<Vec<SyntheticVideo>> {
    let real_cfg = CorpusConfig {
        params: SmoothParams {
            max_yaw_rate_deg: 180.0,
            ..cfg.params.clone()
        },
        ..cfg.clone()
    };
    let profile = ModelProfile {
        model_id: "real".into(),
        prior_quality: (0.6, 0.95),
        jitter: (0.002, 0.02),
        confidence: (0.45, 0.95),
        flip_probability: 0.0,
    };
    let mut out = benchmark_corpus(derive_seed(seed, 0xCA1), &[profile], videos, &real_cfg)?;
    for (i, v) in out.iter_mut().enumerate() {
        // Calibration footage is single-person.
        v.category = if i % 2 == 0 {
            Category::BmoSimple
        } else {
            Category::BmoSkill
        };
        v.rating.category = v.category;
        v.keypoints
            .frames
            .iter_mut()
            .for_each(|f| f.persons.truncate(1));
        v.motion.truncate(1);
    }
    Ok(out)
}
