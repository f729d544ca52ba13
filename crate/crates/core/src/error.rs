use std::path::PathBuf;

use thiserror::Error;

use crate::sampler::Task;

/// Errors raised anywhere in the toolkit.
///
/// Variants are grouped by the exit code the CLI maps them to.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed file {path}: {message}")]
    MalformedFile { path: PathBuf, message: String },

    #[error("schema violation ({} problem(s)):\n  {}", .0.len(), .0.join("\n  "))]
    SchemaViolation(Vec<String>),

    #[error("instances reference unknown videos: {}", .0.join(", "))]
    DanglingVideoRef(Vec<String>),

    #[error("line {line}: {message}")]
    MalformedLine { line: usize, message: String },

    #[error("duplicate prediction for model {model:?}, sample {sample_id:?} (line {line})")]
    DuplicatePrediction {
        model: String,
        sample_id: String,
        line: usize,
    },

    #[error("{context}: expected {expected} confidences for task {task}, got {actual}")]
    ArityMismatch {
        context: String,
        task: Task,
        expected: usize,
        actual: usize,
    },

    #[error("{} sample(s) have no prediction: {}", .0.len(), preview(.0))]
    MissingPrediction(Vec<String>),

    #[error("{} prediction(s) have no sample: {}", .0.len(), preview(.0))]
    OrphanPrediction(Vec<String>),

    #[error("join expects predictions of a single model, found: {}", .0.join(", "))]
    MixedModels(Vec<String>),

    #[error("sample {sample_id}: task {sample_task} does not match prediction task {pred_task}")]
    TaskMismatch {
        sample_id: String,
        sample_task: Task,
        pred_task: Task,
    },

    #[error("no common samples between the intention and action rows")]
    JoinMismatch,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("tte {tte} outside [0, {max}]")]
    OutOfRangeTte { tte: u32, max: u32 },

    #[error("weighting scheme {scheme} cannot be applied to task {task}")]
    SchemeTaskMismatch { scheme: String, task: Task },

    #[error("instance {0} has samples with different ground truth")]
    InconsistentGroundTruth(String),

    #[error("instance {ped_id} has two samples starting at frame {obs_start}")]
    DuplicateSample { ped_id: String, obs_start: u32 },

    #[error("rows mix tasks {0} and {1}")]
    MixedTasks(Task, Task),

    #[error("report has no {0} section")]
    MissingSection(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn preview(ids: &[String]) -> String {
    const SHOWN: usize = 10;
    let mut out = ids.iter().take(SHOWN).cloned().collect::<Vec<_>>().join(", ");
    if ids.len() > SHOWN {
        out.push_str(&format!(", ... ({} more)", ids.len() - SHOWN));
    }
    out
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 validation, 3 join, 4 io.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::MissingPrediction(_)
            | Error::OrphanPrediction(_)
            | Error::MixedModels(_)
            | Error::TaskMismatch { .. }
            | Error::JoinMismatch => 3,
            Error::Io { .. } => 4,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
