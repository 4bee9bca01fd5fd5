//! Directory-level workflow from feature files to calibrated score reports.
//!
//! A features directory holds, per video id, any of `<id>.kps.ndjson`,
//! `<id>.mot.ndjson` and `<id>.vlm.json`, plus an optional `manifest.csv`
//! (`video_id,model_id,category`) attaching model and category labels.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;

use crate::anatomical::{self, PartGrouping, FLAG_NO_PERSON_DETECTED};
use crate::calibration::{fit_bounds_with, CalibrationSet, PercentileRange};
use crate::config::EngineConfig;
use crate::error::{Error, Result};
use crate::features::{
    parse_keypoint_stream, parse_motion_tracks, parse_vlm_record, write_keypoint_stream,
    write_motion_tracks, write_ratings, write_vlm_record, Category, KeypointStream, MetricName,
    MotionTrack, ScoreReport, VlmPriorRecord,
};
use crate::kinematics::{self, score_tracks, MotionScore};
use crate::prior::prior_score;
use crate::synth::SyntheticVideo;

pub const KEYPOINT_SUFFIX: &str = ".kps.ndjson";
pub const MOTION_SUFFIX: &str = ".mot.ndjson";
pub const PRIOR_SUFFIX: &str = ".vlm.json";
pub const MANIFEST_FILE: &str = "manifest.csv";
pub const RATINGS_FILE: &str = "ratings.csv";

pub const FLAG_NO_PRIOR: &str = "no-prior";
pub const FLAG_NO_KEYPOINTS: &str = "no-keypoints";
pub const FLAG_NO_MOTION: &str = "no-motion";

/// Feature files found for one video id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VideoFiles {
    pub video_id: String,
    pub keypoints: Option<PathBuf>,
    pub motion: Option<PathBuf>,
    pub prior: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VideoFeatures {
    pub video_id: String,
    pub keypoints: Option<KeypointStream>,
    pub motion: Option<Vec<MotionTrack>>,
    pub prior: Option<VlmPriorRecord>,
}

/// Lists videos in `dir` sorted by id. Unrelated files are ignored.
pub fn scan_features(dir: &Path) -> Result<Vec<VideoFiles>> {
    let mut videos: BTreeMap<String, VideoFiles> = BTreeMap::new();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        for suffix in [KEYPOINT_SUFFIX, MOTION_SUFFIX, PRIOR_SUFFIX] {
            let Some(id) = name.strip_suffix(suffix).filter(|id| !id.is_empty()) else {
                continue;
            };
            let v = videos.entry(id.to_owned()).or_insert_with(|| VideoFiles {
                video_id: id.to_owned(),
                ..VideoFiles::default()
            });
            let slot = match suffix {
                KEYPOINT_SUFFIX => &mut v.keypoints,
                MOTION_SUFFIX => &mut v.motion,
                _ => &mut v.prior,
            };
            *slot = Some(path.clone());
        }
    }
    Ok(videos.into_values().collect())
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn check_id(path: &Path, expected: &str, found: &str) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::in_file(path)(Error::Input(format!(
            "video_id \"{found}\" does not match file name \"{expected}\""
        ))))
    }
}

impl VideoFiles {
    pub fn load(&self) -> Result<VideoFeatures> {
        let id = &self.video_id;
        let keypoints = match &self.keypoints {
            Some(p) => {
                let s = parse_keypoint_stream(&read(p)?).map_err(Error::in_file(p))?;
                check_id(p, id, &s.video_id)?;
                Some(s)
            }
            None => None,
        };
        let motion = match &self.motion {
            Some(p) => {
                let tracks = parse_motion_tracks(&read(p)?).map_err(Error::in_file(p))?;
                check_id(p, id, &tracks[0].video_id)?;
                Some(tracks)
            }
            None => None,
        };
        let prior = match &self.prior {
            Some(p) => {
                let r = parse_vlm_record(&read(p)?).map_err(Error::in_file(p))?;
                check_id(p, id, &r.video_id)?;
                Some(r)
            }
            None => None,
        };
        Ok(VideoFeatures {
            video_id: id.clone(),
            keypoints,
            motion,
            prior,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ManifestEntry {
    pub video_id: String,
    pub model_id: String,
    pub category: Category,
}

/// Reads `manifest.csv` from `dir` if present.
pub fn read_manifest(dir: &Path) -> Result<HashMap<String, ManifestEntry>> {
    let path = dir.join(MANIFEST_FILE);
    if !path.exists() {
        return Ok(HashMap::new());
    }
    let bytes = read(&path)?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());
    let mut out = HashMap::new();
    for row in reader.deserialize::<ManifestEntry>() {
        let e = row.map_err(|e| Error::in_file(&path)(e.into()))?;
        out.insert(e.video_id.clone(), e);
    }
    Ok(out)
}

/// Uncalibrated metrics of one video; `None` where the modality is missing
/// or unscorable.
#[derive(Debug, Clone, PartialEq)]
pub struct RawScores {
    pub video_id: String,
    pub anat: Option<f64>,
    pub local: Option<f64>,
    pub global: Option<f64>,
}

/// Raw metrics for calibration. Videos where nobody is ever visible give
/// no anatomical sample; local and global are means over scorable tracks.
pub fn raw_scores(video: &VideoFeatures, cfg: &EngineConfig) -> Result<RawScores> {
    let grouping = PartGrouping::default();
    let anat = match &video.keypoints {
        Some(s) => {
            let a = anatomical::video_anat_score(s, &grouping, &cfg.anat)?;
            (!a.flags.iter().any(|f| f == FLAG_NO_PERSON_DETECTED)).then_some(a.score)
        }
        None => None,
    };
    let mean_over =
        |f: fn(&MotionTrack, &kinematics::KinConfig) -> Result<f64>| -> Result<Option<f64>> {
            let mut vals = Vec::new();
            for t in video.motion.iter().flatten() {
                match f(t, &cfg.kin) {
                    Ok(v) => vals.push(v),
                    Err(Error::SequenceTooShort { .. }) => {}
                    Err(e) => return Err(e),
                }
            }
            Ok((!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64))
        };
    Ok(RawScores {
        video_id: video.video_id.clone(),
        anat,
        local: mean_over(kinematics::local_stability)?,
        global: mean_over(kinematics::global_consistency)?,
    })
}

/// Fits all three bounds from per-video raw metrics.
pub fn fit_calibration(
    raws: &[RawScores],
    corpus_id: &str,
    percentile: Option<PercentileRange>,
) -> Result<CalibrationSet> {
    if raws.is_empty() {
        return Err(Error::Input("calibration corpus is empty".into()));
    }
    let fit = |metric: MetricName, pick: fn(&RawScores) -> Option<f64>| {
        let values: Vec<f64> = raws.iter().filter_map(pick).collect();
        fit_bounds_with(&values, metric, corpus_id, percentile)
    };
    CalibrationSet::new(
        fit(MetricName::Anat, |r| r.anat)?,
        fit(MetricName::Local, |r| r.local)?,
        fit(MetricName::Global, |r| r.global)?,
    )
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))
}

/// Measures already-loaded videos and fits bounds.
pub fn calibrate_features(
    videos: &[VideoFeatures],
    cfg: &EngineConfig,
    corpus_id: &str,
    jobs: Option<usize>,
) -> Result<CalibrationSet> {
    let raws = pool(jobs)?.install(|| {
        videos
            .par_iter()
            .map(|v| raw_scores(v, cfg))
            .collect::<Result<Vec<_>>>()
    })?;
    fit_calibration(&raws, corpus_id, cfg.percentile_range()?)
}

/// Scores already-loaded videos in parallel, preserving input order.
pub fn score_features(
    videos: &[VideoFeatures],
    cfg: &EngineConfig,
    calibration: &CalibrationSet,
    jobs: Option<usize>,
) -> Result<Vec<ScoreReport>> {
    pool(jobs)?.install(|| {
        videos
            .par_iter()
            .map(|v| score_video(v, cfg, calibration))
            .collect()
    })
}

/// Loads and measures every video in `dir`, then fits bounds.
pub fn calibrate_dir(
    dir: &Path,
    cfg: &EngineConfig,
    corpus_id: &str,
    jobs: Option<usize>,
) -> Result<CalibrationSet> {
    let files = scan_features(dir)?;
    let raws = pool(jobs)?.install(|| {
        files
            .par_iter()
            .map(|f| raw_scores(&f.load()?, cfg))
            .collect::<Result<Vec<_>>>()
    })?;
    fit_calibration(&raws, corpus_id, cfg.percentile_range()?)
}

/// Full report for one video. Missing modalities zero their branch and add a
/// flag; a missing prior is treated as 1.
pub fn score_video(
    video: &VideoFeatures,
    cfg: &EngineConfig,
    calibration: &CalibrationSet,
) -> Result<ScoreReport> {
    let mut flags = Vec::new();
    let s_prior = match &video.prior {
        Some(r) => prior_score(r)?,
        None => {
            flags.push(FLAG_NO_PRIOR.to_owned());
            1.0
        }
    };
    let (s_anat_raw, s_anat_norm) = match &video.keypoints {
        Some(s) => {
            let a = anatomical::video_anat_score(s, &PartGrouping::default(), &cfg.anat)?;
            flags.extend(a.flags);
            (a.score, calibration.normalize(MetricName::Anat, a.score))
        }
        None => {
            flags.push(FLAG_NO_KEYPOINTS.to_owned());
            (0.0, 0.0)
        }
    };
    let motion = match &video.motion {
        Some(tracks) => score_tracks(tracks, &cfg.kin, calibration)?,
        None => {
            flags.push(FLAG_NO_MOTION.to_owned());
            MotionScore::default()
        }
    };
    flags.extend(motion.flags);
    Ok(ScoreReport {
        video_id: video.video_id.clone(),
        model_id: None,
        category: None,
        s_prior,
        s_anat_raw,
        s_anat_norm,
        q_anat: anatomical::q_anat(s_prior, s_anat_norm)?,
        s_local_raw: motion.local_raw,
        s_local_norm: motion.local_norm,
        s_global_raw: motion.global_raw,
        s_global_norm: motion.global_norm,
        s_mot: motion.s_mot,
        q_mot: kinematics::q_mot(s_prior, motion.s_mot)?,
        flags,
    })
}

/// Scores every video in `dir`, sorted by video id, attaching manifest
/// labels when a manifest is present.
pub fn score_dir(
    dir: &Path,
    cfg: &EngineConfig,
    calibration: &CalibrationSet,
    jobs: Option<usize>,
) -> Result<Vec<ScoreReport>> {
    let files = scan_features(dir)?;
    let manifest = read_manifest(dir)?;
    let mut reports = pool(jobs)?.install(|| {
        files
            .par_iter()
            .map(|f| score_video(&f.load()?, cfg, calibration))
            .collect::<Result<Vec<_>>>()
    })?;
    for r in &mut reports {
        if let Some(m) = manifest.get(&r.video_id) {
            r.model_id = Some(m.model_id.clone());
            r.category = Some(m.category);
        }
    }
    Ok(reports)
}

/// One JSON object per line.
pub fn write_reports(reports: &[ScoreReport]) -> String {
    reports
        .iter()
        .map(|r| serde_json::to_string(r).expect("report serializes") + "\n")
        .collect()
}

pub fn parse_reports(bytes: &[u8]) -> Result<Vec<ScoreReport>> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Input(e.to_string()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r: ScoreReport = serde_json::from_str(line).map_err(|source| Error::Parse {
            line: i + 1,
            source,
        })?;
        r.check_invariants().map_err(|e| Error::Schema {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(r);
    }
    Ok(out)
}

/// Writes the feature files of synthetic videos into `dir`, with a manifest
/// and, if `ratings` is set, a ratings file.
pub fn write_corpus(dir: &Path, videos: &[SyntheticVideo], ratings: bool) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: String, text: String| {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(path, e))
    };
    let mut manifest = String::from("video_id,model_id,category\n");
    for v in videos {
        write(
            format!("{}{KEYPOINT_SUFFIX}", v.video_id),
            write_keypoint_stream(&v.keypoints),
        )?;
        write(
            format!("{}{MOTION_SUFFIX}", v.video_id),
            write_motion_tracks(&v.motion),
        )?;
        write(
            format!("{}{PRIOR_SUFFIX}", v.video_id),
            write_vlm_record(&v.prior),
        )?;
        manifest.push_str(&format!("{},{},{}\n", v.video_id, v.model_id, v.category));
    }
    write(MANIFEST_FILE.into(), manifest)?;
    if ratings {
        let records: Vec<_> = videos.iter().map(|v| v.rating.clone()).collect();
        write(RATINGS_FILE.into(), write_ratings(&records)?)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{benchmark_corpus, calibration_corpus, default_profiles, CorpusConfig};

    fn small_cfg() -> CorpusConfig {
        CorpusConfig {
            frames: 24,
            ..CorpusConfig::default()
        }
    }

    #[test]
    fn scan_groups_by_id() {
        let dir = tempfile::tempdir().unwrap();
        for name in [
            "a.kps.ndjson",
            "a.mot.ndjson",
            "b.vlm.json",
            "notes.txt",
            ".kps.ndjson",
        ] {
            std::fs::write(dir.path().join(name), "").unwrap();
        }
        let v = scan_features(dir.path()).unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v[0].video_id, "a");
        assert!(v[0].keypoints.is_some() && v[0].motion.is_some() && v[0].prior.is_none());
        assert!(v[1].prior.is_some() && v[1].keypoints.is_none());
    }

    #[test]
    fn calibrate_counts_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let vids = calibration_corpus(1, 10, &small_cfg()).unwrap();
        write_corpus(dir.path(), &vids, false).unwrap();
        let cfg = EngineConfig::default();
        let a = calibrate_dir(dir.path(), &cfg, "synthetic", Some(2)).unwrap();
        for m in MetricName::ALL {
            assert_eq!(a.get(m).sample_count, 10);
        }
        let b = calibrate_dir(dir.path(), &cfg, "synthetic", Some(1)).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn single_video_corpus_is_degenerate() {
        let dir = tempfile::tempdir().unwrap();
        write_corpus(
            dir.path(),
            &calibration_corpus(1, 1, &small_cfg()).unwrap(),
            false,
        )
        .unwrap();
        let err = calibrate_dir(dir.path(), &EngineConfig::default(), "one", None).unwrap_err();
        assert_eq!(err.kind(), "degenerate-calibration");
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(calibrate_dir(dir.path(), &EngineConfig::default(), "none", None).is_err());
    }

    fn calibrated() -> CalibrationSet {
        let vids = calibration_corpus(2, 8, &small_cfg()).unwrap();
        let feats: Vec<_> = vids.iter().map(|v| v.features()).collect();
        calibrate_features(&feats, &EngineConfig::default(), "synthetic", Some(2)).unwrap()
    }

    #[test]
    fn score_with_missing_modalities() {
        let cal = calibrated();
        let cfg = EngineConfig::default();
        let v = &benchmark_corpus(3, &default_profiles()[..1], 1, &small_cfg()).unwrap()[0];
        let full = v.features();
        let r = score_video(&full, &cfg, &cal).unwrap();
        assert!(r.flags.is_empty());
        r.check_invariants().unwrap();

        let no_prior = VideoFeatures {
            prior: None,
            ..full.clone()
        };
        let r = score_video(&no_prior, &cfg, &cal).unwrap();
        assert_eq!(r.s_prior, 1.0);
        assert_eq!(r.flags, vec![FLAG_NO_PRIOR]);
        assert_eq!(r.q_mot, r.s_mot);

        let bare = VideoFeatures {
            video_id: "x".into(),
            ..VideoFeatures::default()
        };
        let r = score_video(&bare, &cfg, &cal).unwrap();
        assert_eq!(
            r.flags,
            vec![FLAG_NO_PRIOR, FLAG_NO_KEYPOINTS, FLAG_NO_MOTION]
        );
        assert_eq!((r.q_anat, r.q_mot), (0.0, 0.0));
    }

    #[test]
    fn score_dir_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let vids = benchmark_corpus(4, &default_profiles(), 2, &small_cfg()).unwrap();
        write_corpus(dir.path(), &vids, true).unwrap();
        let cal = calibrated();
        let reports = score_dir(dir.path(), &EngineConfig::default(), &cal, Some(3)).unwrap();
        assert_eq!(reports.len(), 6);
        assert!(reports.windows(2).all(|w| w[0].video_id < w[1].video_id));
        assert_eq!(reports[0].model_id.as_deref(), Some("bad"));
        let text = write_reports(&reports);
        assert_eq!(parse_reports(text.as_bytes()).unwrap(), reports);
        let again = score_dir(dir.path(), &EngineConfig::default(), &cal, Some(1)).unwrap();
        assert_eq!(write_reports(&again), text);
    }

    #[test]
    fn mismatched_ids_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let v = &calibration_corpus(5, 1, &small_cfg()).unwrap()[0];
        std::fs::write(
            dir.path().join("other.vlm.json"),
            write_vlm_record(&v.prior),
        )
        .unwrap();
        let err = scan_features(dir.path()).unwrap()[0].load().unwrap_err();
        assert_eq!(err.kind(), "input");
    }

    #[test]
    fn parse_errors_name_the_file() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("v.vlm.json"), "{not json").unwrap();
        let err = scan_features(dir.path()).unwrap()[0].load().unwrap_err();
        assert_eq!(err.kind(), "parse");
        assert!(err.to_string().contains("v.vlm.json"));
    }

    #[test]
    fn reports_reject_broken_invariants() {
        let bad = r#"{"video_id":"v","s_prior":0.5,"s_anat_raw":0.9,"s_anat_norm":0.9,"q_anat":0.8,"s_local_raw":0.5,"s_local_norm":0.5,"s_global_raw":1.0,"s_global_norm":1.0,"s_mot":0.5,"q_mot":0.25,"flags":[]}"#;
        assert_eq!(parse_reports(bad.as_bytes()).unwrap_err().kind(), "schema");
    }
}
