//! Dataset-wide sampling, optionally on a dedicated thread pool.

use rayon::prelude::*;

use crate::annotation::Dataset;
use crate::error::{Error, Result};
use crate::risk_grid::RiskGridConfig;
use crate::sampler::{self, SamplerConfig, Task, TaskSample};

/// Samples every instance of `ds` for `task`, in instance order.
pub fn samples_for_task(
    ds: &Dataset,
    task: Task,
    cfg: &SamplerConfig,
    grid: &RiskGridConfig,
) -> Vec<TaskSample> {
    if task == Task::Risk {
        for v in &ds.videos {
            if !grid.covers_exactly(v.width) {
                log::warn!(
                    "video {}: width {} is not {} regions of {} px; the last region absorbs the difference",
                    v.video_id,
                    v.width,
                    grid.n_regions,
                    grid.region_width
                );
            }
        }
    }
    let videos = ds.video_index();
    ds.instances
        .par_iter()
        .map(|inst| match task {
            Task::Intention => sampler::sample_intention(inst, cfg),
            Task::Action => sampler::sample_action(inst, cfg),
            Task::Risk => {
                let video = videos[inst.video_id.as_str()];
                sampler::sample_risk(inst, video, cfg, grid)
            }
        })
        .flatten_iter()
        .collect()
}

/// Action-labelled samples on the intention windows of every instance.
pub fn action_twins(ds: &Dataset, cfg: &SamplerConfig) -> Vec<TaskSample> {
    ds.instances
        .par_iter()
        .map(|inst| sampler::action_twins(inst, cfg))
        .flatten_iter()
        .collect()
}

/// Runs `f` on a pool of `threads` workers (0 means rayon's default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}
