use std::fmt::Write as _;

use nalgebra::{Quaternion, UnitQuaternion};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;

use super::{
    Category, HumanRatingRecord, Keypoint, KeypointFrame, KeypointStream, MotionFrame, MotionTrack,
    PersonKeypoints, VlmPriorRecord, DEFAULT_JOINT_COUNT, KEYPOINTS_PER_PERSON,
    UNIT_NORM_TOLERANCE,
};
use crate::error::{Error, Result};

/// Norm deviations at or below this are already unit at the precision of the
/// canonical float format, and are stored as written.
const RENORMALIZE_ABOVE: f64 = 1e-8;

const RATINGS_HEADER: [&str; 5] = ["video_id", "model_id", "category", "acs", "mss"];

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct KeypointHeader {
    video_id: String,
    fps: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKeypointFrame {
    frame_index: u64,
    persons: Vec<RawPerson>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPerson {
    keypoints: Vec<[f64; 3]>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MotionHeader {
    video_id: String,
    person_id: String,
    fps: f64,
    #[serde(default = "default_joints")]
    joints: usize,
}

fn default_joints() -> usize {
    DEFAULT_JOINT_COUNT
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMotionFrame {
    root_rotation: [f64; 4],
    joint_angles: Vec<[f64; 3]>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVlmRecord {
    video_id: String,
    positive_logit: f64,
    negative_logit: f64,
}

/// Non-blank lines with their 1-based line numbers.
fn lines(bytes: &[u8]) -> impl Iterator<Item = (usize, &[u8])> {
    bytes
        .split(|b| *b == b'\n')
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.iter().all(u8::is_ascii_whitespace))
}

fn json_line(line: usize, bytes: &[u8]) -> Result<Value> {
    serde_json::from_slice(bytes).map_err(|source| Error::Parse { line, source })
}

fn typed<T: DeserializeOwned>(line: usize, value: Value) -> Result<T> {
    T::deserialize(value).map_err(|e| Error::Schema {
        line,
        message: e.to_string(),
    })
}

fn is_header(value: &Value) -> bool {
    value.get("video_id").is_some()
}

fn check_fps(line: usize, fps: f64) -> Result<()> {
    if fps.is_finite() && fps > 0.0 {
        Ok(())
    } else {
        Err(Error::Range {
            line,
            field: "fps".into(),
            value: fps,
        })
    }
}

/// Parses a `*.kps.ndjson` file: one header line `{"fps", "video_id"}`
/// followed by one frame object per line.
pub fn parse_keypoint_stream(bytes: &[u8]) -> Result<KeypointStream> {
    let mut it = lines(bytes);
    let (line, first) = it
        .next()
        .ok_or_else(|| Error::Input("empty keypoint file".into()))?;
    let header_value = json_line(line, first)?;
    if !is_header(&header_value) {
        return Err(Error::Schema {
            line,
            message: "first line must be the header with video_id and fps".into(),
        });
    }
    let header: KeypointHeader = typed(line, header_value)?;
    check_fps(line, header.fps)?;

    let mut frames = Vec::new();
    let mut previous: Option<u64> = None;
    for (line, bytes) in it {
        let raw: RawKeypointFrame = typed(line, json_line(line, bytes)?)?;
        if let Some(prev) = previous {
            if raw.frame_index <= prev {
                return Err(Error::Ordering {
                    line,
                    previous: prev,
                    found: raw.frame_index,
                });
            }
        }
        previous = Some(raw.frame_index);
        let mut persons = Vec::with_capacity(raw.persons.len());
        for person in raw.persons {
            if person.keypoints.len() != KEYPOINTS_PER_PERSON {
                return Err(Error::Schema {
                    line,
                    message: format!(
                        "expected {KEYPOINTS_PER_PERSON} keypoints per person, found {}",
                        person.keypoints.len()
                    ),
                });
            }
            let mut keypoints = Vec::with_capacity(KEYPOINTS_PER_PERSON);
            for [x, y, confidence] in person.keypoints {
                if !(0.0..=1.0).contains(&confidence) {
                    return Err(Error::Range {
                        line,
                        field: "confidence".into(),
                        value: confidence,
                    });
                }
                keypoints.push(Keypoint { x, y, confidence });
            }
            persons.push(PersonKeypoints { keypoints });
        }
        frames.push(KeypointFrame {
            frame_index: raw.frame_index,
            persons,
        });
    }
    if frames.is_empty() {
        return Err(Error::Input(format!(
            "keypoint stream {} has no frames",
            header.video_id
        )));
    }
    Ok(KeypointStream {
        video_id: header.video_id,
        fps: header.fps,
        frames,
    })
}

/// Parses a `*.mot.ndjson` file holding one or more person tracks. Each track
/// starts with a header line `{"fps", "joints", "person_id", "video_id"}`.
pub fn parse_motion_tracks(bytes: &[u8]) -> Result<Vec<MotionTrack>> {
    let mut tracks: Vec<(usize, usize, MotionTrack)> = Vec::new();
    for (line, bytes) in lines(bytes) {
        let value = json_line(line, bytes)?;
        if is_header(&value) {
            let header: MotionHeader = typed(line, value)?;
            check_fps(line, header.fps)?;
            if header.joints == 0 {
                return Err(Error::Schema {
                    line,
                    message: "joints must be positive".into(),
                });
            }
            if let Some((_, _, first)) = tracks.first() {
                if first.video_id != header.video_id {
                    return Err(Error::Schema {
                        line,
                        message: format!(
                            "video_id {:?} differs from {:?}",
                            header.video_id, first.video_id
                        ),
                    });
                }
            }
            tracks.push((
                line,
                header.joints,
                MotionTrack {
                    video_id: header.video_id,
                    person_id: header.person_id,
                    fps: header.fps,
                    frames: Vec::new(),
                },
            ));
            continue;
        }
        let Some((_, joints, track)) = tracks.last_mut() else {
            return Err(Error::Schema {
                line,
                message: "frame before any track header".into(),
            });
        };
        let raw: RawMotionFrame = typed(line, value)?;
        if raw.joint_angles.len() != *joints {
            return Err(Error::Schema {
                line,
                message: format!("expected {joints} joints, found {}", raw.joint_angles.len()),
            });
        }
        let root_rotation = unit_quaternion(line, raw.root_rotation)?;
        track.frames.push(MotionFrame {
            root_rotation,
            joint_angles: raw.joint_angles,
        });
    }
    if tracks.is_empty() {
        return Err(Error::Input("motion file has no track header".into()));
    }
    tracks
        .into_iter()
        .map(|(line, _, track)| {
            if track.frames.is_empty() {
                Err(Error::Schema {
                    line,
                    message: format!("track {} has no frames", track.person_id),
                })
            } else {
                Ok(track)
            }
        })
        .collect()
}

/// Parses a motion file that must contain exactly one track.
pub fn parse_motion_track(bytes: &[u8]) -> Result<MotionTrack> {
    let mut tracks = parse_motion_tracks(bytes)?;
    if tracks.len() != 1 {
        return Err(Error::Input(format!(
            "expected a single motion track, found {}",
            tracks.len()
        )));
    }
    Ok(tracks.remove(0))
}

fn unit_quaternion(line: usize, [w, x, y, z]: [f64; 4]) -> Result<UnitQuaternion<f64>> {
    let q = Quaternion::new(w, x, y, z);
    let norm = q.norm();
    let deviation = (norm - 1.0).abs();
    if !norm.is_finite() || deviation > UNIT_NORM_TOLERANCE {
        return Err(Error::Range {
            line,
            field: "root_rotation norm".into(),
            value: norm,
        });
    }
    if deviation > RENORMALIZE_ABOVE {
        Ok(UnitQuaternion::from_quaternion(q))
    } else {
        Ok(UnitQuaternion::new_unchecked(q))
    }
}

/// Parses a `*.vlm.json` logit record.
pub fn parse_vlm_record(bytes: &[u8]) -> Result<VlmPriorRecord> {
    let value: Value =
        serde_json::from_slice(bytes).map_err(|source| Error::Parse { line: 1, source })?;
    let raw: RawVlmRecord = typed(1, value)?;
    for (field, v) in [
        ("positive_logit", raw.positive_logit),
        ("negative_logit", raw.negative_logit),
    ] {
        if !v.is_finite() {
            return Err(Error::Range {
                line: 1,
                field: field.into(),
                value: v,
            });
        }
    }
    Ok(VlmPriorRecord {
        video_id: raw.video_id,
        positive_logit: raw.positive_logit,
        negative_logit: raw.negative_logit,
    })
}

/// Parses `ratings.csv` with header `video_id,model_id,category,acs,mss`.
pub fn parse_ratings(bytes: &[u8]) -> Result<Vec<HumanRatingRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if header != RATINGS_HEADER {
        return Err(Error::Rating {
            row: 1,
            message: format!("expected header {}", RATINGS_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, row) in reader
        .deserialize::<(String, String, String, f64, f64)>()
        .enumerate()
    {
        let row_no = i + 2;
        let (video_id, model_id, category, acs, mss) = row.map_err(|e| Error::Rating {
            row: row_no,
            message: e.to_string(),
        })?;
        let category: Category = category.parse().map_err(|e: Error| Error::Rating {
            row: row_no,
            message: e.to_string(),
        })?;
        for (name, v) in [("acs", acs), ("mss", mss)] {
            if !(1.0..=5.0).contains(&v) {
                return Err(Error::Rating {
                    row: row_no,
                    message: format!("{name} = {v} outside [1,5]"),
                });
            }
        }
        out.push(HumanRatingRecord {
            video_id,
            model_id,
            category,
            acs,
            mss,
        });
    }
    Ok(out)
}

/// Canonical decimal rendering: 9 significant digits, trailing zeros trimmed.
pub fn format_float(x: f64) -> String {
    assert!(x.is_finite(), "cannot serialize non-finite value {x}");
    if x == 0.0 {
        return "0.0".to_owned();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    let digits: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    let digits = digits.trim_end_matches('0');
    let mut out = String::with_capacity(16);
    if x < 0.0 {
        out.push('-');
    }
    if (0..=20).contains(&exp) {
        let int_len = exp as usize + 1;
        if digits.len() <= int_len {
            out.push_str(digits);
            out.extend(std::iter::repeat_n('0', int_len - digits.len()));
            out.push_str(".0");
        } else {
            out.push_str(&digits[..int_len]);
            out.push('.');
            out.push_str(&digits[int_len..]);
        }
    } else if (-7..0).contains(&exp) {
        out.push_str("0.");
        out.extend(std::iter::repeat_n('0', (-exp - 1) as usize));
        out.push_str(digits);
    } else {
        out.push_str(&digits[..1]);
        out.push('.');
        out.push_str(if digits.len() > 1 { &digits[1..] } else { "0" });
        let _ = write!(out, "e{exp}");
    }
    out
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("string serialization")
}

fn push_array(out: &mut String, values: &[f64]) {
    out.push('[');
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&format_float(*v));
    }
    out.push(']');
}

/// Canonical `*.kps.ndjson` serialization (sorted keys, fixed float format).
pub fn write_keypoint_stream(stream: &KeypointStream) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{{\"fps\":{},\"video_id\":{}}}",
        format_float(stream.fps),
        json_str(&stream.video_id)
    );
    for frame in &stream.frames {
        let _ = write!(out, "{{\"frame_index\":{},\"persons\":[", frame.frame_index);
        for (p, person) in frame.persons.iter().enumerate() {
            if p > 0 {
                out.push(',');
            }
            out.push_str("{\"keypoints\":[");
            for (k, kp) in person.keypoints.iter().enumerate() {
                if k > 0 {
                    out.push(',');
                }
                push_array(&mut out, &[kp.x, kp.y, kp.confidence]);
            }
            out.push_str("]}");
        }
        out.push_str("]}\n");
    }
    out
}

/// Canonical `*.mot.ndjson` serialization; tracks are written in order.
pub fn write_motion_tracks(tracks: &[MotionTrack]) -> String {
    let mut out = String::new();
    for track in tracks {
        let _ = writeln!(
            out,
            "{{\"fps\":{},\"joints\":{},\"person_id\":{},\"video_id\":{}}}",
            format_float(track.fps),
            track.joint_count(),
            json_str(&track.person_id),
            json_str(&track.video_id)
        );
        for frame in &track.frames {
            out.push_str("{\"joint_angles\":[");
            for (j, angles) in frame.joint_angles.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                push_array(&mut out, angles);
            }
            out.push_str("],\"root_rotation\":");
            let q = frame.root_rotation.quaternion();
            push_array(&mut out, &[q.w, q.i, q.j, q.k]);
            out.push_str("}\n");
        }
    }
    out
}

pub fn write_vlm_record(record: &VlmPriorRecord) -> String {
    format!(
        "{{\"negative_logit\":{},\"positive_logit\":{},\"video_id\":{}}}\n",
        format_float(record.negative_logit),
        format_float(record.positive_logit),
        json_str(&record.video_id)
    )
}

pub fn write_ratings(records: &[HumanRatingRecord]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(RATINGS_HEADER)?;
    for r in records {
        writer.write_record([
            r.video_id.as_str(),
            r.model_id.as_str(),
            r.category.as_str(),
            &format_float(r.acs),
            &format_float(r.mss),
        ])?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::Input(format!("csv flush: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
