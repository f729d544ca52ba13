//! Seeded synthetic datasets and prediction logs.
//!
//! Every random draw comes from a ChaCha8 stream derived from the seed: stream
//! 0 builds the dataset, streams 1..=3 the per-task predictions and stream 4
//! the action predictions on intention windows.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::annotation::{
    self, BBox, CrossingLabel, Dataset, FrameObservation, Occlusion, PedestrianInstance, RoadType,
    SignalState, Split, VideoMeta,
};
use crate::error::{Error, Result};
use crate::pipeline;
use crate::predlog::{predictions_to_string, PredictionRecord};
use crate::risk_grid::RiskGridConfig;
use crate::sampler::{SamplerConfig, Task, TaskSample};

const VIDEO_WIDTH: u32 = 1920;
const VIDEO_HEIGHT: u32 = 1080;
const INSTANCES_PER_VIDEO: usize = 50;
const AGREEMENT_STREAM: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntentionLaw {
    /// Independent of the crossing label.
    Uniform,
    /// Concentrated near 1 for crossers and near 0 otherwise.
    Bimodal,
}

impl FromStr for IntentionLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(IntentionLaw::Uniform),
            "bimodal" => Ok(IntentionLaw::Bimodal),
            _ => Err(Error::InvalidConfig(format!("unknown intention law {s:?}"))),
        }
    }
}

/// Synthetic predictor. Written `oracle`, `anti_oracle`, `noisy:<eps>` or
/// `constant:<class>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Predictor {
    /// One-hot on the ground truth.
    Oracle,
    /// Ground truth with probability `1 - eps`, otherwise a uniformly chosen
    /// wrong class; confidences are random with the chosen class on top.
    Noisy(f64),
    /// One-hot on class `c mod K`.
    Constant(usize),
    /// One-hot on `(gt + 1) mod K`.
    AntiOracle,
}

impl fmt::Display for Predictor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predictor::Oracle => f.write_str("oracle"),
            Predictor::Noisy(eps) => write!(f, "noisy:{eps}"),
            Predictor::Constant(c) => write!(f, "constant:{c}"),
            Predictor::AntiOracle => f.write_str("anti_oracle"),
        }
    }
}

impl FromStr for Predictor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("unknown predictor {s:?}"));
        match s.split_once(':') {
            None => match s {
                "oracle" => Ok(Predictor::Oracle),
                "anti_oracle" => Ok(Predictor::AntiOracle),
                _ => Err(bad()),
            },
            Some(("noisy", eps)) => eps.parse().map(Predictor::Noisy).map_err(|_| bad()),
            Some(("constant", c)) => c.parse().map(Predictor::Constant).map_err(|_| bad()),
            Some(_) => Err(bad()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_instances: usize,
    /// Inclusive track length bounds in frames.
    pub track_len_range: [u32; 2],
    /// Exactly `round(crossing_frac * n_instances)` instances cross.
    pub crossing_frac: f64,
    pub intention_prob_law: IntentionLaw,
    pub predictor: Predictor,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_instances: 200,
            track_len_range: [60, 300],
            crossing_frac: 0.28,
            intention_prob_law: IntentionLaw::Bimodal,
            predictor: Predictor::Noisy(0.3),
            seed: 7,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(0.0..=1.0).contains(&self.crossing_frac) {
            return bad(format!("crossing_frac {} outside [0, 1]", self.crossing_frac));
        }
        let [lo, hi] = self.track_len_range;
        if lo == 0 || lo > hi {
            return bad(format!("track_len_range [{lo}, {hi}] must satisfy 1 <= min <= max"));
        }
        if let Predictor::Noisy(eps) = self.predictor {
            if !(0.0..=1.0).contains(&eps) {
                return bad(format!("noise rate {eps} outside [0, 1]"));
            }
        }
        Ok(())
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

fn task_stream(task: Task) -> u64 {
    match task {
        Task::Intention => 1,
        Task::Action => 2,
        Task::Risk => 3,
    }
}

fn make_instance(rng: &mut ChaCha8Rng, i: usize, crossing: bool, spec: &SynthSpec) -> PedestrianInstance {
    let [lo, hi] = spec.track_len_range;
    let len = rng.random_range(lo..=hi);
    let first = rng.random_range(0..100u32);
    let last = first + len - 1;

    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let height0 = rng.random_range(40.0..200.0);
    let growth = rng.random_range(0.0..0.5);
    let mut x = rng.random_range(0.0..(VIDEO_WIDTH as f64 - 100.0));
    let vx = rng.random_range(0.5..4.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let signal = SignalState::ALL[rng.random_range(0..SignalState::ALL.len())];
    let road_type = RoadType::ALL[rng.random_range(0..RoadType::ALL.len())];
    let base_speed: f64 = rng.random_range(0.0..40.0);
    let mut walking = rng.random_bool(0.6);

    let mut frames = Vec::with_capacity(len as usize);
    for (k, frame_index) in (first..=last).enumerate() {
        let h = height0 + growth * k as f64;
        let w = h * 0.4;
        x = (x + vx + noise.sample(rng)).clamp(0.0, VIDEO_WIDTH as f64 - w);
        let y2 = (VIDEO_HEIGHT as f64 * 0.9 + noise.sample(rng)).min(VIDEO_HEIGHT as f64);
        if rng.random_bool(0.02) {
            walking = !walking;
        }
        frames.push(FrameObservation {
            frame_index,
            bbox: BBox::new(x, y2 - h, x + w, y2),
            occlusion: Occlusion::None,
            walking,
            signal_state: signal,
            ego_speed: (base_speed + noise.sample(rng)).max(0.0),
        });
    }

    // The event sits in the last quarter of the track (at most 30 frames from
    // its end), leaving room for observation windows before it.
    let tail = rng.random_range(0..=(len / 4).min(30));
    let crossing_point = last - tail;
    let exp_start_point = first + rng.random_range(0..=(crossing_point - first) / 3);
    let intention_prob = match spec.intention_prob_law {
        IntentionLaw::Uniform => rng.random_range(0.0..=1.0),
        IntentionLaw::Bimodal => {
            let (a, b) = if crossing { (5.0, 2.0) } else { (2.0, 5.0) };
            Beta::new(a, b).expect("positive shape").sample(rng)
        }
    };

    PedestrianInstance {
        ped_id: format!("ped{i:05}"),
        video_id: format!("video{:04}", i / INSTANCES_PER_VIDEO),
        frames,
        intention_prob: Some(intention_prob),
        crossing_label: if crossing {
            CrossingLabel::Crossing
        } else {
            CrossingLabel::NonCrossing
        },
        exp_start_point: Some(exp_start_point),
        critical_point: Some(crossing_point),
        crossing_point,
        road_type,
    }
}

/// Generates a dataset and passes it through its canonical text, so that
/// callers see exactly what a reader of the written file sees.
pub fn generate_dataset(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = spec.rng(0);
    let n_cross = (spec.crossing_frac * spec.n_instances as f64).round() as usize;
    let mut crossing: Vec<bool> = (0..spec.n_instances).map(|i| i < n_cross).collect();
    crossing.shuffle(&mut rng);

    let instances: Vec<PedestrianInstance> = crossing
        .iter()
        .enumerate()
        .map(|(i, &c)| make_instance(&mut rng, i, c, spec))
        .collect();
    let n_videos = spec.n_instances.div_ceil(INSTANCES_PER_VIDEO);
    let videos = (0..n_videos)
        .map(|v| VideoMeta {
            video_id: format!("video{v:04}"),
            width: VIDEO_WIDTH,
            height: VIDEO_HEIGHT,
            fps: 30,
        })
        .collect();
    let ds = Dataset {
        name: format!("synth-{}", spec.seed),
        split: Split::Test,
        videos,
        instances,
    }
    .validate()?;
    let text = annotation::dataset_to_string(&ds)?;
    annotation::parse_dataset(&text, Path::new("<synth>"))
}

fn one_hot(k: usize, c: usize) -> Vec<f64> {
    let mut v = vec![0.0; k];
    v[c] = 1.0;
    v
}

fn confidences(predictor: Predictor, gt: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match predictor {
        Predictor::Oracle => one_hot(k, gt),
        Predictor::AntiOracle => one_hot(k, (gt + 1) % k),
        Predictor::Constant(c) => one_hot(k, c % k),
        Predictor::Noisy(eps) => {
            let chosen = if rng.random_bool(eps) {
                (gt + rng.random_range(1..k)) % k
            } else {
                gt
            };
            let mut raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..1.0)).collect();
            let top = raw.iter().copied().fold(0.0, f64::max);
            raw[chosen] = top + rng.random_range(0.2..1.0);
            let total: f64 = raw.iter().sum();
            raw.iter().map(|v| v / total).collect()
        }
    }
}

/// Predictions of `predictor` for `samples`, in sample order.
pub fn predict(samples: &[TaskSample], predictor: Predictor, n_regions: u32, rng: &mut ChaCha8Rng) -> Vec<PredictionRecord> {
    samples
        .iter()
        .map(|s| PredictionRecord {
            sample_id: s.sample_id.clone(),
            model: format!("synth-{predictor}"),
            task: s.task,
            confidences: confidences(predictor, s.label.class_index(), s.task.arity(n_regions), rng),
        })
        .collect()
}

/// Generated dataset with predictions for every default-config sample.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub dataset: Dataset,
    /// All three tasks, intention first.
    pub predictions: Vec<PredictionRecord>,
    /// Action predictions on the intention windows.
    pub agreement_predictions: Vec<PredictionRecord>,
}

pub fn generate(spec: &SynthSpec) -> Result<SynthOutput> {
    let dataset = generate_dataset(spec)?;
    let cfg = SamplerConfig::default();
    let grid = RiskGridConfig::default();
    let mut predictions = Vec::new();
    for task in Task::ALL {
        let samples = pipeline::samples_for_task(&dataset, task, &cfg, &grid);
        let mut rng = spec.rng(task_stream(task));
        predictions.extend(predict(&samples, spec.predictor, grid.n_regions, &mut rng));
    }
    let twins = pipeline::action_twins(&dataset, &cfg);
    let agreement_predictions = predict(&twins, spec.predictor, grid.n_regions, &mut spec.rng(AGREEMENT_STREAM));
    Ok(SynthOutput {
        dataset,
        predictions,
        agreement_predictions,
    })
}

/// Paths written by [`write_outputs`].
#[derive(Debug, Clone)]
pub struct SynthPaths {
    pub dataset: PathBuf,
    pub predictions: PathBuf,
    pub agreement_predictions: PathBuf,
}

impl SynthPaths {
    pub fn in_dir(dir: &Path) -> Self {
        SynthPaths {
            dataset: dir.join("dataset.json"),
            predictions: dir.join("predictions.jsonl"),
            agreement_predictions: dir.join("agreement_predictions.jsonl"),
        }
    }
}

pub fn write_outputs(out: &SynthOutput, paths: &SynthPaths) -> Result<()> {
    annotation::write_dataset(&out.dataset, &paths.dataset)?;
    for (path, preds) in [
        (&paths.predictions, &out.predictions),
        (&paths.agreement_predictions, &out.agreement_predictions),
    ] {
        std::fs::write(path, predictions_to_string(preds)?).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}
