//! Reading episode and robot-configuration files.
//!
//! Episodes are checked by hand rather than through derived deserializers
//! so that every error names the exact offending field, e.g.
//! `frames[3].timestamp_sec: missing`.

use serde_json::{Map, Value};

use super::robot::RobotConfigState;
use super::types::{Episode, EpisodeMetadata, FrameObservation, FramePayload};
use crate::error::{Error, Result};

/// Bundled 18-second door-opening episode: an approach, a hesitation, a
/// long search for the handle from too far away, then success.
pub const WORKED_EXAMPLE: &str = include_str!("../../data/worked_example_episode.json");
/// Robot configuration the worked example starts from.
pub const WORKED_EXAMPLE_ROBOT: &str = include_str!("../../data/robot_config_default.json");
/// Frozen stub-backend output for the worked example, latencies zeroed.
pub const WORKED_EXAMPLE_GOLDEN: &str = include_str!("../../data/worked_example_golden.json");

fn err(path: &str, msg: impl std::fmt::Display) -> Error {
    Error::Input(format!("{path}: {msg}"))
}

fn object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>> {
    v.as_object().ok_or_else(|| err(path, "expected an object"))
}

fn reject_unknown(map: &Map<String, Value>, allowed: &[&str], path: &str) -> Result<()> {
    match map.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) if path.is_empty() => Err(err(k, "unknown field")),
        Some(k) => Err(err(&format!("{path}.{k}"), "unknown field")),
        None => Ok(()),
    }
}

fn required<'a>(map: &'a Map<String, Value>, key: &str, path: &str) -> Result<&'a Value> {
    match map.get(key) {
        None | Some(Value::Null) => Err(err(path, "missing")),
        Some(v) => Ok(v),
    }
}

fn text(map: &Map<String, Value>, key: &str, path: &str) -> Result<String> {
    match required(map, key, path)? {
        Value::String(s) if !s.trim().is_empty() => Ok(s.clone()),
        Value::String(_) => Err(err(path, "must not be empty")),
        _ => Err(err(path, "expected a string")),
    }
}

fn number(map: &Map<String, Value>, key: &str, path: &str) -> Result<f64> {
    required(map, key, path)?
        .as_f64()
        .filter(|x| x.is_finite())
        .ok_or_else(|| err(path, "expected a number"))
}

/// Parses and validates an episode file.
pub fn parse_episode(raw: &str) -> Result<Episode> {
    let root: Value = serde_json::from_str(raw).map_err(|e| Error::Input(format!("episode is not valid JSON: {e}")))?;
    let root = object(&root, "episode")?;
    reject_unknown(root, &["metadata", "frames", "user_feedback"], "")?;

    let meta = object(required(root, "metadata", "metadata")?, "metadata")?;
    reject_unknown(meta, &["episode_id", "sub_skill", "target_time_sec"], "metadata")?;
    let target_time_sec = number(meta, "target_time_sec", "metadata.target_time_sec")?;
    if target_time_sec <= 0.0 {
        return Err(err("metadata.target_time_sec", "must be positive"));
    }
    let metadata = EpisodeMetadata {
        episode_id: text(meta, "episode_id", "metadata.episode_id")?,
        sub_skill: text(meta, "sub_skill", "metadata.sub_skill")?,
        target_time_sec,
    };

    let frames_v = required(root, "frames", "frames")?.as_array().ok_or_else(|| err("frames", "expected a list"))?;
    if frames_v.is_empty() {
        return Err(err("frames", "needs at least one frame"));
    }
    let mut frames = Vec::with_capacity(frames_v.len());
    let mut prev: Option<f64> = None;
    for (i, fv) in frames_v.iter().enumerate() {
        let path = format!("frames[{i}]");
        let f = object(fv, &path)?;
        reject_unknown(f, &["timestamp_sec", "description", "image_path"], &path)?;
        let ts_path = format!("{path}.timestamp_sec");
        let timestamp_sec = number(f, "timestamp_sec", &ts_path)?;
        if timestamp_sec < 0.0 {
            return Err(err(&ts_path, "must be >= 0"));
        }
        if let Some(p) = prev.filter(|&p| timestamp_sec <= p) {
            return Err(err(&ts_path, format!("{timestamp_sec} does not follow the previous timestamp {p}")));
        }
        prev = Some(timestamp_sec);
        let payload = match (f.get("description"), f.get("image_path")) {
            (Some(Value::String(d)), None) => FramePayload::Description(d.clone()),
            (None, Some(Value::String(p))) if !p.trim().is_empty() => FramePayload::ImagePath(p.clone()),
            (None, Some(Value::String(_))) => return Err(err(&format!("{path}.image_path"), "must not be empty")),
            (Some(_), Some(_)) => return Err(err(&path, "give either description or image_path, not both")),
            (None, None) => return Err(err(&path, "needs a description or an image_path")),
            (Some(_), None) => return Err(err(&format!("{path}.description"), "expected a string")),
            (None, Some(_)) => return Err(err(&format!("{path}.image_path"), "expected a string")),
        };
        frames.push(FrameObservation { timestamp_sec, payload });
    }

    let user_feedback = match root.get("user_feedback") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => return Err(err("user_feedback", "expected a string")),
    };
    Ok(Episode { metadata, frames, user_feedback })
}

/// Serializes an episode in the file layout [`parse_episode`] reads.
pub fn episode_to_json(episode: &Episode) -> Value {
    let frames: Vec<Value> = episode
        .frames
        .iter()
        .map(|f| match &f.payload {
            FramePayload::Description(d) => serde_json::json!({ "timestamp_sec": f.timestamp_sec, "description": d }),
            FramePayload::ImagePath(p) => serde_json::json!({ "timestamp_sec": f.timestamp_sec, "image_path": p }),
        })
        .collect();
    let mut root = serde_json::json!({
        "metadata": episode.metadata,
        "frames": frames,
    });
    if let Some(fb) = &episode.user_feedback {
        root["user_feedback"] = Value::String(fb.clone());
    }
    root
}

/// Parses a robot configuration and checks its bounds.
pub fn parse_robot_config(raw: &str) -> Result<RobotConfigState> {
    let cfg: RobotConfigState =
        serde_json::from_str(raw).map_err(|e| Error::Input(format!("robot config: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}
