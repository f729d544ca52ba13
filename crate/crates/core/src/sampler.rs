//! Fixed-length observation windows for the intention, action and risk tasks.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::annotation::{
    CrossingLabel, PedestrianInstance, RoadType, SignalState, VideoMeta,
};
use crate::error::{Error, Result};
use crate::risk_grid::{self, RiskGridConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Intention,
    Action,
    Risk,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::Intention, Task::Action, Task::Risk];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Intention => "intention",
            Task::Action => "action",
            Task::Risk => "risk",
        }
    }

    /// Number of classes a prediction for this task must carry.
    pub fn arity(self, n_regions: u32) -> usize {
        match self {
            Task::Intention => 3,
            Task::Action => 2,
            Task::Risk => n_regions as usize,
        }
    }

    /// Display names of the classes in confidence-vector order.
    pub fn class_names(self, n_regions: u32) -> Vec<String> {
        match self {
            Task::Intention => IntentionClass::ALL.iter().map(|c| c.to_string()).collect(),
            Task::Action => ActionClass::ALL.iter().map(|c| c.to_string()).collect(),
            Task::Risk => (1..=n_regions).map(|r| format!("R{r}")).collect(),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "intention" => Ok(Task::Intention),
            "action" => Ok(Task::Action),
            "risk" => Ok(Task::Risk),
            other => Err(Error::InvalidConfig(format!("unknown task {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IntentionClass {
    #[serde(rename = "NCI")]
    NoCrossing,
    #[serde(rename = "UI")]
    Unsure,
    #[serde(rename = "CI")]
    Crossing,
}

impl IntentionClass {
    pub const ALL: [IntentionClass; 3] = [
        IntentionClass::NoCrossing,
        IntentionClass::Unsure,
        IntentionClass::Crossing,
    ];
}

impl fmt::Display for IntentionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IntentionClass::NoCrossing => "NCI",
            IntentionClass::Unsure => "UI",
            IntentionClass::Crossing => "CI",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActionClass {
    #[serde(rename = "NC")]
    NotCrossing,
    #[serde(rename = "C")]
    Crossing,
}

impl ActionClass {
    pub const ALL: [ActionClass; 2] = [ActionClass::NotCrossing, ActionClass::Crossing];
}

impl fmt::Display for ActionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ActionClass::NotCrossing => "NC",
            ActionClass::Crossing => "C",
        })
    }
}

/// Ground truth of a sample. Serialized as the class name, or the region
/// number for the risk task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Label {
    Intention(IntentionClass),
    Action(ActionClass),
    Risk(u32),
}

impl Label {
    /// Position of this label in the task's confidence vector.
    pub fn class_index(self) -> usize {
        match self {
            Label::Intention(c) => c as usize,
            Label::Action(c) => c as usize,
            Label::Risk(region) => region.saturating_sub(1) as usize,
        }
    }

    pub fn task(self) -> Task {
        match self {
            Label::Intention(_) => Task::Intention,
            Label::Action(_) => Task::Action,
            Label::Risk(_) => Task::Risk,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Intention(c) => c.fmt(f),
            Label::Action(c) => c.fmt(f),
            Label::Risk(r) => write!(f, "R{r}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionState {
    Walking,
    Standing,
}

impl MotionState {
    pub fn as_str(self) -> &'static str {
        match self {
            MotionState::Walking => "walking",
            MotionState::Standing => "standing",
        }
    }
}

/// Scene characteristics averaged over an observation window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioContext {
    pub mean_scale: f64,
    pub state: MotionState,
    pub mean_speed: f64,
    pub signal: SignalState,
    pub road_type: RoadType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSample {
    pub sample_id: String,
    pub ped_id: String,
    pub task: Task,
    pub obs_start: u32,
    pub obs_end: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tte: Option<u32>,
    pub label: Label,
    pub context: ScenarioContext,
}

impl TaskSample {
    /// Identifier shared by all tasks' samples over the same window.
    pub fn window_key(&self) -> (&str, u32) {
        (&self.ped_id, self.obs_start)
    }
}

pub fn sample_id(ped_id: &str, obs_start: u32, task: Task) -> String {
    format!("{ped_id}#{obs_start}#{task}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub obs_len: u32,
    pub overlap_frac: f64,
    pub tte_min: u32,
    pub tte_max: u32,
    pub horizon: u32,
    pub intention_bins: [f64; 2],
    /// Keep action samples with tte above `tte_max`.
    pub keep_long_tte: bool,
    /// Draw action and risk windows from `exp_start_point` instead of the
    /// first annotated frame (instances without it fall back to the track).
    pub windows_from_exp_start: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            obs_len: 15,
            overlap_frac: 0.3,
            tte_min: 30,
            tte_max: 90,
            horizon: 90,
            intention_bins: [1.0 / 3.0, 2.0 / 3.0],
            keep_long_tte: false,
            windows_from_exp_start: false,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.obs_len < 1 {
            return bad("obs_len must be at least 1");
        }
        if !(0.0..1.0).contains(&self.overlap_frac) {
            return bad("overlap_frac must lie in [0, 1)");
        }
        if self.tte_min > self.tte_max {
            return bad("tte_min must not exceed tte_max");
        }
        if self.horizon < 1 {
            return bad("horizon must be at least 1");
        }
        let [a, b] = self.intention_bins;
        if !(0.0 < a && a < b && b < 1.0) {
            return bad("intention_bins must be strictly increasing inside (0, 1)");
        }
        Ok(())
    }

    /// Frames between consecutive window starts.
    pub fn stride(&self) -> u32 {
        // The epsilon absorbs representation error, e.g. 10 * 0.7.
        let raw = (self.obs_len as f64 * (1.0 - self.overlap_frac) + 1e-9).floor();
        (raw as u32).max(1)
    }

    pub fn intention_class(&self, prob: f64) -> IntentionClass {
        let [low, high] = self.intention_bins;
        if prob < low {
            IntentionClass::NoCrossing
        } else if prob < high {
            IntentionClass::Unsure
        } else {
            IntentionClass::Crossing
        }
    }
}

/// Start frames of every window of `obs_len` frames that fits in
/// `[track_first, track_last]`.
pub fn window_starts(track_first: u32, track_last: u32, cfg: &SamplerConfig) -> Vec<u32> {
    let len = cfg.obs_len;
    if track_last < track_first || track_last - track_first + 1 < len {
        return Vec::new();
    }
    let last_start = track_last + 1 - len;
    (track_first..=last_start).step_by(cfg.stride() as usize).collect()
}

/// Averages per-frame context over `[obs_start, obs_end]`.
pub fn aggregate_context(inst: &PedestrianInstance, obs_start: u32, obs_end: u32) -> ScenarioContext {
    let frames = inst.frames_in(obs_start, obs_end);
    let n = frames.len().max(1) as f64;
    let mean_scale = frames.iter().map(|f| f.bbox.height()).sum::<f64>() / n;
    let walking = frames.iter().filter(|f| f.walking).count() as f64 / n;
    let mean_speed = frames.iter().map(|f| f.ego_speed).sum::<f64>() / n;

    let mut votes = [0usize; 3];
    for f in frames {
        votes[f.signal_state as usize] += 1;
    }
    // SignalState::ALL is in tie precedence order.
    let mut signal = SignalState::ALL[0];
    for s in SignalState::ALL {
        if votes[s as usize] > votes[signal as usize] {
            signal = s;
        }
    }

    ScenarioContext {
        mean_scale,
        state: if walking > 0.5 {
            MotionState::Walking
        } else {
            MotionState::Standing
        },
        mean_speed,
        signal,
        road_type: inst.road_type,
    }
}

fn make_sample(
    inst: &PedestrianInstance,
    task: Task,
    start: u32,
    cfg: &SamplerConfig,
    tte: Option<u32>,
    label: Label,
) -> TaskSample {
    let end = start + cfg.obs_len - 1;
    TaskSample {
        sample_id: sample_id(&inst.ped_id, start, task),
        ped_id: inst.ped_id.clone(),
        task,
        obs_start: start,
        obs_end: end,
        tte,
        label,
        context: aggregate_context(inst, start, end),
    }
}

/// Windows within the instance's annotated frames, optionally starting at the
/// experiment start point.
fn track_windows(inst: &PedestrianInstance, cfg: &SamplerConfig) -> Vec<u32> {
    let first = match (cfg.windows_from_exp_start, inst.exp_start_point) {
        (true, Some(p)) => p.max(inst.first_frame()),
        _ => inst.first_frame(),
    };
    window_starts(first, inst.last_frame(), cfg)
}

/// Intention samples drawn from `[exp_start_point, critical_point]`.
///
/// Instances lacking an intention probability or either keypoint yield none.
pub fn sample_intention(inst: &PedestrianInstance, cfg: &SamplerConfig) -> Vec<TaskSample> {
    let (Some(prob), Some(start), Some(crit)) =
        (inst.intention_prob, inst.exp_start_point, inst.critical_point)
    else {
        return Vec::new();
    };
    let label = Label::Intention(cfg.intention_class(prob));
    window_starts(start, crit, cfg)
        .into_iter()
        .map(|s| make_sample(inst, Task::Intention, s, cfg, None, label))
        .collect()
}

/// Action samples whose time-to-event lies in `[tte_min, tte_max]`.
pub fn sample_action(inst: &PedestrianInstance, cfg: &SamplerConfig) -> Vec<TaskSample> {
    let label = Label::Action(match inst.crossing_label {
        CrossingLabel::Crossing => ActionClass::Crossing,
        CrossingLabel::NonCrossing => ActionClass::NotCrossing,
    });
    track_windows(inst, cfg)
        .into_iter()
        .filter_map(|s| {
            let end = s + cfg.obs_len - 1;
            let tte = inst.crossing_point.checked_sub(end)?;
            let in_range = tte >= cfg.tte_min && (cfg.keep_long_tte || tte <= cfg.tte_max);
            in_range.then(|| make_sample(inst, Task::Action, s, cfg, Some(tte), label))
        })
        .collect()
}

/// Action-labelled twins of the intention samples, used to compare both tasks
/// on identical windows. `tte` is the raw distance to the crossing point and
/// is not filtered.
pub fn action_twins(inst: &PedestrianInstance, cfg: &SamplerConfig) -> Vec<TaskSample> {
    let label = Label::Action(match inst.crossing_label {
        CrossingLabel::Crossing => ActionClass::Crossing,
        CrossingLabel::NonCrossing => ActionClass::NotCrossing,
    });
    sample_intention(inst, cfg)
        .into_iter()
        .map(|s| {
            let tte = inst.crossing_point.saturating_sub(s.obs_end);
            TaskSample {
                sample_id: sample_id(&s.ped_id, s.obs_start, Task::Action),
                task: Task::Action,
                tte: Some(tte),
                label,
                ..s
            }
        })
        .collect()
}

/// Risk samples labelled by the region of the box center `horizon` frames
/// after the window, or of the last box seen before then.
pub fn sample_risk(
    inst: &PedestrianInstance,
    video: &VideoMeta,
    cfg: &SamplerConfig,
    grid: &RiskGridConfig,
) -> Vec<TaskSample> {
    track_windows(inst, cfg)
        .into_iter()
        .filter_map(|s| {
            let end = s + cfg.obs_len - 1;
            let target = end.saturating_add(cfg.horizon);
            let obs = inst.last_at_or_before(target)?;
            let region = risk_grid::assign_region(obs.bbox.center_x(), video.width, grid);
            Some(make_sample(inst, Task::Risk, s, cfg, None, Label::Risk(region)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::tests::{frame, instance};
    use crate::annotation::BBox;
    use proptest::prelude::*;

    fn cfg() -> SamplerConfig {
        SamplerConfig::default()
    }

    #[test]
    fn default_stride_is_ten() {
        assert_eq!(cfg().stride(), 10);
        let c = SamplerConfig {
            obs_len: 10,
            ..cfg()
        };
        assert_eq!(c.stride(), 7);
    }

    #[test]
    fn window_start_examples() {
        assert_eq!(window_starts(0, 34, &cfg()), vec![0, 10, 20]);
        assert_eq!(window_starts(0, 14, &cfg()), vec![0]);
        assert!(window_starts(0, 13, &cfg()).is_empty());
        assert_eq!(window_starts(100, 134, &cfg()), vec![100, 110, 120]);
    }

    #[test]
    fn intention_binning() {
        let c = cfg();
        assert_eq!(c.intention_class(1.0 / 3.0), IntentionClass::Unsure);
        assert_eq!(c.intention_class(0.0), IntentionClass::NoCrossing);
        assert_eq!(c.intention_class(2.0 / 3.0), IntentionClass::Crossing);
        assert_eq!(c.intention_class(1.0), IntentionClass::Crossing);
        assert_eq!(c.intention_class(0.5), IntentionClass::Unsure);
    }

    #[test]
    fn intention_samples() {
        let inst = instance("p", 0, 34);
        let samples = sample_intention(&inst, &cfg());
        assert_eq!(samples.len(), 3);
        assert!(samples
            .iter()
            .all(|s| s.label == Label::Intention(IntentionClass::Crossing)));
        assert_eq!(samples[1].sample_id, "p#10#intention");
        assert_eq!(samples[2].obs_end, 34);
    }

    #[test]
    fn intention_uses_keypoint_subtrack() {
        let mut inst = instance("p", 0, 100);
        inst.exp_start_point = Some(40);
        inst.critical_point = Some(74);
        let starts: Vec<u32> = sample_intention(&inst, &cfg()).iter().map(|s| s.obs_start).collect();
        assert_eq!(starts, vec![40, 50, 60]);
    }

    #[test]
    fn intention_skips_missing_annotations() {
        let mut inst = instance("p", 0, 34);
        inst.intention_prob = None;
        assert!(sample_intention(&inst, &cfg()).is_empty());
        let mut inst = instance("p", 0, 34);
        inst.critical_point = None;
        assert!(sample_intention(&inst, &cfg()).is_empty());
    }

    #[test]
    fn action_tte_window() {
        let mut inst = instance("p", 0, 119);
        inst.crossing_point = 120;
        let samples = sample_action(&inst, &cfg());
        let ends: Vec<u32> = samples.iter().map(|s| s.obs_end).collect();
        let ttes: Vec<u32> = samples.iter().map(|s| s.tte.unwrap()).collect();
        assert_eq!(ends, vec![34, 44, 54, 64, 74, 84]);
        assert_eq!(ttes, vec![86, 76, 66, 56, 46, 36]);
        assert!(samples
            .iter()
            .all(|s| s.label == Label::Action(ActionClass::Crossing)));
    }

    #[test]
    fn keep_long_tte_restores_early_windows() {
        let mut inst = instance("p", 0, 119);
        inst.crossing_point = 120;
        let c = SamplerConfig {
            keep_long_tte: true,
            ..cfg()
        };
        let ends: Vec<u32> = sample_action(&inst, &c).iter().map(|s| s.obs_end).collect();
        assert_eq!(ends, vec![14, 24, 34, 44, 54, 64, 74, 84]);
    }

    #[test]
    fn action_all_too_close() {
        // One window ending at 14 with the event 29 frames later.
        let mut inst = instance("p", 0, 14);
        inst.crossing_point = 43;
        assert!(sample_action(&inst, &cfg()).is_empty());
    }

    #[test]
    fn non_crossing_labelled_nc() {
        let mut inst = instance("p", 0, 199);
        inst.crossing_label = CrossingLabel::NonCrossing;
        inst.crossing_point = 199;
        let samples = sample_action(&inst, &cfg());
        assert!(!samples.is_empty());
        assert!(samples
            .iter()
            .all(|s| s.label == Label::Action(ActionClass::NotCrossing)));
        assert!(samples.iter().all(|s| (30..=90).contains(&s.tte.unwrap())));
    }

    fn video() -> VideoMeta {
        VideoMeta {
            video_id: "v1".into(),
            width: 1920,
            height: 1080,
            fps: 30,
        }
    }

    #[test]
    fn risk_label_from_future_box() {
        let mut inst = instance("p", 0, 120);
        // Center x = 959.5 at frame 104.
        inst.frames[104].bbox = BBox::new(939.5, 400.0, 979.5, 500.0);
        let samples = sample_risk(&inst, &video(), &cfg(), &RiskGridConfig::default());
        assert_eq!(samples[0].obs_end, 14);
        assert_eq!(samples[0].label, Label::Risk(6));
    }

    #[test]
    fn risk_falls_back_to_last_box() {
        let mut inst = instance("p", 0, 60);
        inst.frames[60] = frame(60, 1500.0);
        let samples = sample_risk(&inst, &video(), &cfg(), &RiskGridConfig::default());
        // First window's target frame (104) is past the track.
        assert_eq!(samples[0].label, Label::Risk(10));
    }

    #[test]
    fn context_aggregation() {
        let mut inst = instance("p", 0, 2);
        for (f, h) in inst.frames.iter_mut().zip([100.0, 110.0, 120.0]) {
            f.bbox = BBox::new(0.0, 0.0, 10.0, h);
        }
        let ctx = aggregate_context(&inst, 0, 2);
        assert_eq!(ctx.mean_scale, 110.0);

        let mut inst = instance("p", 0, 14);
        for (i, f) in inst.frames.iter_mut().enumerate() {
            f.walking = i < 8;
            f.signal_state = if i < 7 { SignalState::Forbid } else { SignalState::None };
        }
        let ctx = aggregate_context(&inst, 0, 14);
        assert_eq!(ctx.state, MotionState::Walking);
        assert_eq!(ctx.signal, SignalState::None);
        assert_eq!(ctx.road_type, RoadType::TwoWay);

        for (i, f) in inst.frames.iter_mut().enumerate() {
            f.walking = i < 7;
            f.signal_state = match i % 3 {
                0 => SignalState::None,
                1 => SignalState::Allow,
                _ => SignalState::Forbid,
            };
        }
        let ctx = aggregate_context(&inst, 0, 14);
        assert_eq!(ctx.state, MotionState::Standing);
        assert_eq!(ctx.signal, SignalState::Forbid, "tie goes to forbid");
    }

    #[test]
    fn sampling_is_deterministic() {
        let inst = instance("p", 0, 150);
        assert_eq!(sample_action(&inst, &cfg()), sample_action(&inst, &cfg()));
    }

    #[test]
    fn labels_serialize_by_name() {
        assert_eq!(serde_json::to_string(&Label::Action(ActionClass::Crossing)).unwrap(), "\"C\"");
        assert_eq!(serde_json::to_string(&Label::Risk(7)).unwrap(), "7");
        let l: Label = serde_json::from_str("\"C\"").unwrap();
        assert_eq!(l, Label::Action(ActionClass::Crossing));
        let l: Label = serde_json::from_str("\"CI\"").unwrap();
        assert_eq!(l, Label::Intention(IntentionClass::Crossing));
        assert_eq!(l.class_index(), 2);
    }

    proptest! {
        #[test]
        fn count_formula(len in 1u32..=100, first in 0u32..500) {
            let c = cfg();
            let stride = c.stride() as i64;
            let expected = if len < c.obs_len { 0 } else { ((len - c.obs_len) as i64 / stride + 1) as usize };
            prop_assert_eq!(window_starts(first, first + len - 1, &c).len(), expected);
        }

        #[test]
        fn more_overlap_never_fewer_windows(len in 1u32..300, a in 0.0f64..0.95, b in 0.0f64..0.95) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let cl = SamplerConfig { overlap_frac: lo, ..cfg() };
            let ch = SamplerConfig { overlap_frac: hi, ..cfg() };
            prop_assert!(window_starts(0, len - 1, &ch).len() >= window_starts(0, len - 1, &cl).len());
        }

        #[test]
        fn samples_stay_in_track(first in 0u32..50, len in 1u32..200, cp_off in 0u32..200) {
            let mut inst = instance("p", first, first + len - 1);
            inst.crossing_point = first + cp_off.min(len - 1);
            inst.exp_start_point = Some(first + len / 4);
            inst.critical_point = Some(first + len / 2);
            for s in sample_action(&inst, &cfg()) {
                prop_assert!(s.obs_start >= inst.first_frame() && s.obs_end <= inst.last_frame());
                let tte = s.tte.unwrap();
                prop_assert!((30..=90).contains(&tte));
            }
            for s in sample_intention(&inst, &cfg()) {
                prop_assert!(s.obs_end <= inst.critical_point.unwrap());
                prop_assert!(s.obs_start >= inst.exp_start_point.unwrap());
            }
        }
    }
}
