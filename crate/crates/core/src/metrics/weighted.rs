//! Per-sample weighting schemes.
//!
//! Action samples are weighted by a Gaussian of their normalized distance from
//! the farthest time-to-event, so early predictions count more. Risk samples
//! are weighted by the Gaussian risk weight of their ground-truth region.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::core::{base_metrics, BaseMetrics};
use crate::predlog::EvalRow;
use crate::risk_grid::{self, RiskGridConfig};
use crate::sampler::{Label, Task};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TteWeightConfig {
    pub sigma_a: f64,
    /// Reference maximum time-to-event in frames.
    pub tte_max_ref: u32,
}

impl Default for TteWeightConfig {
    fn default() -> Self {
        TteWeightConfig {
            sigma_a: 0.3,
            tte_max_ref: 90,
        }
    }
}

impl TteWeightConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_a > 0.0 && self.sigma_a.is_finite()) {
            return Err(Error::InvalidConfig("sigma_a must be positive".into()));
        }
        if self.tte_max_ref == 0 {
            return Err(Error::InvalidConfig("tte_max_ref must be positive".into()));
        }
        Ok(())
    }
}

/// Unnormalized TTE weight, `exp(-0.5 * (d / sigma)^2)` with
/// `d = (tte_max_ref - tte) / tte_max_ref`.
pub fn tte_weight_raw(tte: u32, cfg: &TteWeightConfig) -> Result<f64> {
    if tte > cfg.tte_max_ref {
        return Err(Error::OutOfRangeTte {
            tte,
            max: cfg.tte_max_ref,
        });
    }
    let max = cfg.tte_max_ref as f64;
    let d = (max - tte as f64) / max;
    Ok((-0.5 * (d / cfg.sigma_a).powi(2)).exp())
}

/// Divides each weight by the left-to-right sum.
pub fn normalize_weights(raw: &[f64]) -> Result<Vec<f64>> {
    if raw.is_empty() {
        return Err(Error::EmptyInput("no weights to normalize"));
    }
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidConfig("weights must sum to a positive value".into()));
    }
    Ok(raw.iter().map(|w| w / total).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    Tte,
    RiskRegion,
    Uniform,
}

impl WeightScheme {
    pub fn as_str(self) -> &'static str {
        match self {
            WeightScheme::Tte => "tte",
            WeightScheme::RiskRegion => "risk_region",
            WeightScheme::Uniform => "uniform",
        }
    }

    /// Natural scheme of a task, if any.
    pub fn for_task(task: Task) -> Option<WeightScheme> {
        match task {
            Task::Action => Some(WeightScheme::Tte),
            Task::Risk => Some(WeightScheme::RiskRegion),
            Task::Intention => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedSection {
    pub scheme: WeightScheme,
    pub base: BaseMetrics,
    pub weighted: BaseMetrics,
}

fn raw_weight(row: &EvalRow, scheme: WeightScheme, tte: &TteWeightConfig, grid: &RiskGridConfig) -> Result<f64> {
    match scheme {
        WeightScheme::Uniform => Ok(1.0),
        WeightScheme::Tte => {
            let t = row.sample.tte.ok_or_else(|| {
                Error::InvalidConfig(format!("sample {} has no tte", row.sample.sample_id))
            })?;
            tte_weight_raw(t, tte)
        }
        WeightScheme::RiskRegion => match row.sample.label {
            Label::Risk(region) => Ok(risk_grid::risk_weight(region, grid)),
            _ => unreachable!("checked by scheme/task match"),
        },
    }
}

/// Assigns normalized weights to `rows` and computes base and weighted
/// metrics side by side.
pub fn weighted_report(
    rows: &mut [EvalRow],
    scheme: WeightScheme,
    tte: &TteWeightConfig,
    grid: &RiskGridConfig,
) -> Result<WeightedSection> {
    let task = rows
        .first()
        .ok_or(Error::EmptyInput("no rows to weight"))?
        .sample
        .task;
    let compatible = match scheme {
        WeightScheme::Tte => task == Task::Action,
        WeightScheme::RiskRegion => task == Task::Risk,
        WeightScheme::Uniform => true,
    };
    if !compatible {
        return Err(Error::SchemeTaskMismatch {
            scheme: scheme.as_str().into(),
            task,
        });
    }

    for r in rows.iter_mut() {
        r.weight = 1.0;
    }
    let base = base_metrics(rows)?;

    let raw = rows
        .iter()
        .map(|r| raw_weight(r, scheme, tte, grid))
        .collect::<Result<Vec<_>>>()?;
    let normalized = normalize_weights(&raw)?;
    for (r, w) in rows.iter_mut().zip(&normalized) {
        r.weight = *w;
    }

    // Every metric is invariant to a common weight scale; evaluating on
    // weights rescaled to a unit maximum makes equal weights follow the
    // unweighted path exactly.
    let peak = normalized.iter().copied().fold(0.0, f64::max);
    let mut scaled: Vec<EvalRow> = rows.to_vec();
    for r in &mut scaled {
        r.weight /= peak;
    }
    let weighted = base_metrics(&scaled)?;
    Ok(WeightedSection {
        scheme,
        base,
        weighted,
    })
}
