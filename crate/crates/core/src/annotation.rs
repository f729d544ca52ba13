//! Canonical annotation model and its JSON file format.
//!
//! A [`Dataset`] holds videos and annotated pedestrian tracks. Files are read
//! through [`read_dataset`], which validates every invariant and reports all
//! problems at once, and written through [`write_dataset`], which produces
//! byte-deterministic output (sorted keys, six-decimal floats, absent optional
//! fields omitted).

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json;

fn default_fps() -> u32 {
    30
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VideoMeta {
    pub video_id: String,
    pub width: u32,
    pub height: u32,
    #[serde(default = "default_fps")]
    pub fps: u32,
}

impl VideoMeta {
    /// Converts a duration in seconds to frames at this video's rate.
    pub fn seconds_to_frames(&self, seconds: f64) -> u32 {
        (seconds * self.fps as f64).round().max(0.0) as u32
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Occlusion {
    None,
    Partial,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalState {
    Forbid,
    Allow,
    None,
}

impl SignalState {
    pub const ALL: [SignalState; 3] = [SignalState::Forbid, SignalState::Allow, SignalState::None];

    pub fn as_str(self) -> &'static str {
        match self {
            SignalState::Forbid => "forbid",
            SignalState::Allow => "allow",
            SignalState::None => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossingLabel {
    Crossing,
    NonCrossing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoadType {
    OneWay,
    TwoWay,
    Unknown,
}

impl RoadType {
    pub const ALL: [RoadType; 3] = [RoadType::OneWay, RoadType::TwoWay, RoadType::Unknown];

    pub fn as_str(self) -> &'static str {
        match self {
            RoadType::OneWay => "one_way",
            RoadType::TwoWay => "two_way",
            RoadType::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

/// Pixel box `[x1, y1, x2, y2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        BBox { x1, y1, x2, y2 }
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn center_x(&self) -> f64 {
        (self.x1 + self.x2) / 2.0
    }
}

impl From<[f64; 4]> for BBox {
    fn from(v: [f64; 4]) -> Self {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        [b.x1, b.y1, b.x2, b.y2]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameObservation {
    pub frame_index: u32,
    pub bbox: BBox,
    pub occlusion: Occlusion,
    pub walking: bool,
    pub signal_state: SignalState,
    pub ego_speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PedestrianInstance {
    pub ped_id: String,
    pub video_id: String,
    pub frames: Vec<FrameObservation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intention_prob: Option<f64>,
    pub crossing_label: CrossingLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exp_start_point: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub critical_point: Option<u32>,
    pub crossing_point: u32,
    pub road_type: RoadType,
}

impl PedestrianInstance {
    pub fn first_frame(&self) -> u32 {
        self.frames.first().map_or(0, |f| f.frame_index)
    }

    pub fn last_frame(&self) -> u32 {
        self.frames.last().map_or(0, |f| f.frame_index)
    }

    /// Observation at exactly `frame`, if annotated.
    pub fn frame(&self, frame: u32) -> Option<&FrameObservation> {
        self.frames
            .binary_search_by_key(&frame, |f| f.frame_index)
            .ok()
            .map(|i| &self.frames[i])
    }

    /// Latest observation at or before `frame`.
    pub fn last_at_or_before(&self, frame: u32) -> Option<&FrameObservation> {
        let idx = self.frames.partition_point(|f| f.frame_index <= frame);
        idx.checked_sub(1).map(|i| &self.frames[i])
    }

    /// Observations whose frame index lies in `[start, end]`.
    pub fn frames_in(&self, start: u32, end: u32) -> &[FrameObservation] {
        let lo = self.frames.partition_point(|f| f.frame_index < start);
        let hi = self.frames.partition_point(|f| f.frame_index <= end);
        &self.frames[lo..hi]
    }

    /// Collects every invariant violation, prefixed with the instance id.
    /// Expects frames already sorted by index.
    pub fn violations(&self) -> Vec<String> {
        let id = &self.ped_id;
        let mut out = Vec::new();
        if self.frames.is_empty() {
            out.push(format!("{id}: frames must be non-empty"));
            return out;
        }
        for pair in self.frames.windows(2) {
            if pair[0].frame_index == pair[1].frame_index {
                out.push(format!("{id}: duplicate frame_index {}", pair[0].frame_index));
            }
        }
        for f in &self.frames {
            let b = &f.bbox;
            if ![b.x1, b.y1, b.x2, b.y2].iter().all(|v| v.is_finite()) {
                out.push(format!("{id}: frame {} has a non-finite bbox", f.frame_index));
            } else if b.x1 > b.x2 || b.y1 > b.y2 {
                out.push(format!(
                    "{id}: frame {} bbox corners out of order",
                    f.frame_index
                ));
            }
            if !(f.ego_speed.is_finite() && f.ego_speed >= 0.0) {
                out.push(format!(
                    "{id}: frame {} ego_speed {} must be non-negative",
                    f.frame_index, f.ego_speed
                ));
            }
        }
        let (first, last) = (self.first_frame(), self.last_frame());
        if let Some(p) = self.intention_prob {
            if !(0.0..=1.0).contains(&p) {
                out.push(format!("{id}: intention_prob {p} outside [0, 1]"));
            }
        }
        if let (Some(start), Some(crit)) = (self.exp_start_point, self.critical_point) {
            if start > crit {
                out.push(format!(
                    "{id}: exp_start_point {start} after critical_point {crit}"
                ));
            }
            for (name, v) in [("exp_start_point", start), ("critical_point", crit)] {
                if v < first || v > last {
                    out.push(format!("{id}: {name} {v} outside track [{first}, {last}]"));
                }
            }
        }
        if self.crossing_point < first || self.crossing_point > last {
            out.push(format!(
                "{id}: crossing_point {} outside track [{first}, {last}]",
                self.crossing_point
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dataset {
    pub name: String,
    pub split: Split,
    pub videos: Vec<VideoMeta>,
    pub instances: Vec<PedestrianInstance>,
}

impl Dataset {
    pub fn video(&self, video_id: &str) -> Option<&VideoMeta> {
        self.videos.iter().find(|v| v.video_id == video_id)
    }

    /// Map from video id to metadata, for repeated lookups.
    pub fn video_index(&self) -> HashMap<&str, &VideoMeta> {
        self.videos.iter().map(|v| (v.video_id.as_str(), v)).collect()
    }

    /// Sorts frames and checks every invariant. Schema problems take precedence
    /// over dangling video references.
    pub fn validate(mut self) -> Result<Self> {
        for inst in &mut self.instances {
            inst.frames.sort_by_key(|f| f.frame_index);
        }
        let mut problems = Vec::new();
        let mut seen_videos = HashSet::new();
        for v in &self.videos {
            if !seen_videos.insert(v.video_id.as_str()) {
                problems.push(format!("video {}: duplicate video_id", v.video_id));
            }
            if v.width == 0 || v.height == 0 || v.fps == 0 {
                problems.push(format!(
                    "video {}: width, height and fps must be positive",
                    v.video_id
                ));
            }
        }
        let mut seen_peds = HashSet::new();
        for inst in &self.instances {
            if !seen_peds.insert(inst.ped_id.as_str()) {
                problems.push(format!("{}: duplicate ped_id", inst.ped_id));
            }
            problems.extend(inst.violations());
        }
        if !problems.is_empty() {
            return Err(Error::SchemaViolation(problems));
        }
        let dangling: Vec<String> = self
            .instances
            .iter()
            .filter(|i| !seen_videos.contains(i.video_id.as_str()))
            .map(|i| format!("{} -> {}", i.ped_id, i.video_id))
            .collect();
        if !dangling.is_empty() {
            return Err(Error::DanglingVideoRef(dangling));
        }
        Ok(self)
    }
}

/// Number of annotated frames of an instance.
pub fn instance_duration(inst: &PedestrianInstance) -> usize {
    inst.frames.len()
}

/// Parses and validates a dataset from its JSON text.
pub fn parse_dataset(text: &str, origin: &Path) -> Result<Dataset> {
    let ds: Dataset = serde_json::from_str(text).map_err(|e| Error::MalformedFile {
        path: origin.to_path_buf(),
        message: e.to_string(),
    })?;
    ds.validate()
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text, path)
}

/// Canonical text of a dataset.
pub fn dataset_to_string(ds: &Dataset) -> Result<String> {
    json::to_canonical_pretty(ds)
}

pub fn write_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = dataset_to_string(ds)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
