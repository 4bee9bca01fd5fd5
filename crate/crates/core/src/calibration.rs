//! Empirical min/max bounds of the raw metrics over real-footage corpora,
//! and clamped min-max normalization against them.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::features::{CalibrationBounds, MetricName};

/// Lower/upper percentiles used instead of exact extrema.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PercentileRange {
    pub lower: f64,
    pub upper: f64,
}

impl PercentileRange {
    /// Symmetric range, e.g. `1.0` gives the 1st and 99th percentiles.
    pub fn symmetric(p: f64) -> Result<Self> {
        if !(p > 0.0 && p < 50.0) {
            return Err(Error::Config(format!("percentile {p} must lie in (0,50)")));
        }
        Ok(PercentileRange {
            lower: p,
            upper: 100.0 - p,
        })
    }
}

/// Exact min/max of `raw_scores`.
pub fn fit_bounds(
    raw_scores: &[f64],
    metric_name: MetricName,
    corpus_id: &str,
) -> Result<CalibrationBounds> {
    fit_bounds_with(raw_scores, metric_name, corpus_id, None)
}

/// Like [`fit_bounds`], optionally using linearly interpolated percentiles.
pub fn fit_bounds_with(
    raw_scores: &[f64],
    metric_name: MetricName,
    corpus_id: &str,
    percentile: Option<PercentileRange>,
) -> Result<CalibrationBounds> {
    if raw_scores.is_empty() {
        return Err(Error::Input(format!(
            "no raw {metric_name} scores to calibrate"
        )));
    }
    if let Some(bad) = raw_scores.iter().find(|v| !v.is_finite()) {
        return Err(Error::Input(format!(
            "non-finite raw {metric_name} score {bad}"
        )));
    }
    let (min_real, max_real) = match percentile {
        None => raw_scores
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            }),
        Some(range) => {
            let mut sorted = raw_scores.to_vec();
            sorted.sort_by(f64::total_cmp);
            (
                percentile_of(&sorted, range.lower),
                percentile_of(&sorted, range.upper),
            )
        }
    };
    if min_real >= max_real {
        return Err(Error::DegenerateCalibration {
            metric: metric_name,
            count: raw_scores.len(),
            value: min_real,
        });
    }
    Ok(CalibrationBounds {
        metric_name,
        min_real,
        max_real,
        corpus_id: corpus_id.to_owned(),
        sample_count: raw_scores.len(),
    })
}

fn percentile_of(sorted: &[f64], p: f64) -> f64 {
    let pos = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// `clamp((raw - min) / (max - min), 0, 1)`.
pub fn normalize(raw: f64, bounds: &CalibrationBounds) -> f64 {
    ((raw - bounds.min_real) / (bounds.max_real - bounds.min_real)).clamp(0.0, 1.0)
}

/// Bounds for all three raw metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSet {
    anat: CalibrationBounds,
    local: CalibrationBounds,
    global: CalibrationBounds,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundsRecord {
    corpus_id: String,
    max: f64,
    min: f64,
    n: usize,
}

impl CalibrationSet {
    pub fn new(
        anat: CalibrationBounds,
        local: CalibrationBounds,
        global: CalibrationBounds,
    ) -> Result<Self> {
        for (expected, b) in [
            (MetricName::Anat, &anat),
            (MetricName::Local, &local),
            (MetricName::Global, &global),
        ] {
            if b.metric_name != expected {
                return Err(Error::InvalidBounds {
                    metric: expected,
                    message: format!("record is labelled {}", b.metric_name),
                });
            }
            b.validate()?;
        }
        Ok(CalibrationSet {
            anat,
            local,
            global,
        })
    }

    pub fn get(&self, metric: MetricName) -> &CalibrationBounds {
        match metric {
            MetricName::Anat => &self.anat,
            MetricName::Local => &self.local,
            MetricName::Global => &self.global,
        }
    }

    pub fn normalize(&self, metric: MetricName, raw: f64) -> f64 {
        normalize(raw, self.get(metric))
    }

    /// `calibration.json` text; floats use the shortest exact representation.
    pub fn to_json(&self) -> String {
        let records: BTreeMap<&str, BoundsRecord> = MetricName::ALL
            .into_iter()
            .map(|m| {
                let b = self.get(m);
                (
                    m.as_str(),
                    BoundsRecord {
                        corpus_id: b.corpus_id.clone(),
                        max: b.max_real,
                        min: b.min_real,
                        n: b.sample_count,
                    },
                )
            })
            .collect();
        let mut text = serde_json::to_string_pretty(&records).expect("bounds serialize");
        text.push('\n');
        text
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let value: Value =
            serde_json::from_slice(bytes).map_err(|source| Error::Parse { line: 1, source })?;
        let Value::Object(map) = value else {
            return Err(Error::Input(
                "calibration file must be a JSON object".into(),
            ));
        };
        let take = |metric: MetricName| -> Result<CalibrationBounds> {
            let v = map
                .get(metric.as_str())
                .cloned()
                .ok_or(Error::IncompleteCalibration(metric))?;
            let r: BoundsRecord = serde_json::from_value(v).map_err(|e| Error::InvalidBounds {
                metric,
                message: e.to_string(),
            })?;
            let b = CalibrationBounds {
                metric_name: metric,
                min_real: r.min,
                max_real: r.max,
                corpus_id: r.corpus_id,
                sample_count: r.n,
            };
            b.validate()?;
            Ok(b)
        };
        let anat = take(MetricName::Anat)?;
        let local = take(MetricName::Local)?;
        let global = take(MetricName::Global)?;
        CalibrationSet::new(anat, local, global)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&bytes)
    }
}
