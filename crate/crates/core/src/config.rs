//! Flat evaluation settings shared by the config file, CLI flags and the
//! configuration echo embedded in every report.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::instance::WrongLabelRule;
use crate::metrics::weighted::TteWeightConfig;
use crate::predlog::JoinPolicy;
use crate::risk_grid::RiskGridConfig;
use crate::sampler::SamplerConfig;
use crate::scenario::{Factor, ScenarioBinning};

/// Every tunable of an evaluation run. Missing keys in a config file take
/// their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub obs_len: u32,
    pub overlap_frac: f64,
    pub tte_min: u32,
    pub tte_max: u32,
    pub horizon: u32,
    pub intention_bins: [f64; 2],
    pub keep_long_tte: bool,
    pub windows_from_exp_start: bool,

    pub region_width: f64,
    pub n_regions: u32,
    pub sigma_r: f64,

    pub sigma_a: f64,
    /// Defaults to `tte_max` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tte_max_ref: Option<u32>,

    pub scale_bins: Vec<f64>,
    pub speed_bins: Vec<f64>,
    pub factors: Vec<Factor>,
    pub min_samples: usize,

    pub join: JoinPolicy,
    pub wrong_label: WrongLabelRule,
    pub per_class_delta: bool,
    pub export_weights: bool,
}

impl Default for Settings {
    fn default() -> Self {
        let s = SamplerConfig::default();
        let g = RiskGridConfig::default();
        let t = TteWeightConfig::default();
        let b = ScenarioBinning::default();
        Settings {
            obs_len: s.obs_len,
            overlap_frac: s.overlap_frac,
            tte_min: s.tte_min,
            tte_max: s.tte_max,
            horizon: s.horizon,
            intention_bins: s.intention_bins,
            keep_long_tte: s.keep_long_tte,
            windows_from_exp_start: s.windows_from_exp_start,
            region_width: g.region_width,
            n_regions: g.n_regions,
            sigma_r: g.sigma_r,
            sigma_a: t.sigma_a,
            tte_max_ref: None,
            scale_bins: b.scale_bins,
            speed_bins: b.speed_bins,
            factors: b.factors.into_iter().collect(),
            min_samples: b.min_samples,
            join: JoinPolicy::Strict,
            wrong_label: WrongLabelRule::NextClass,
            per_class_delta: false,
            export_weights: false,
        }
    }
}

impl Settings {
    /// Loads a `.json` or TOML settings file.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let malformed = |message: String| Error::MalformedFile {
            path: path.to_path_buf(),
            message,
        };
        if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| malformed(e.to_string()))
        } else {
            toml::from_str(&text).map_err(|e| malformed(e.to_string()))
        }
    }

    pub fn sampler(&self) -> SamplerConfig {
        SamplerConfig {
            obs_len: self.obs_len,
            overlap_frac: self.overlap_frac,
            tte_min: self.tte_min,
            tte_max: self.tte_max,
            horizon: self.horizon,
            intention_bins: self.intention_bins,
            keep_long_tte: self.keep_long_tte,
            windows_from_exp_start: self.windows_from_exp_start,
        }
    }

    pub fn grid(&self) -> RiskGridConfig {
        RiskGridConfig {
            region_width: self.region_width,
            n_regions: self.n_regions,
            sigma_r: self.sigma_r,
        }
    }

    pub fn tte_weights(&self) -> TteWeightConfig {
        TteWeightConfig {
            sigma_a: self.sigma_a,
            tte_max_ref: self.tte_max_ref.unwrap_or(self.tte_max),
        }
    }

    pub fn binning(&self) -> ScenarioBinning {
        ScenarioBinning {
            scale_bins: self.scale_bins.clone(),
            speed_bins: self.speed_bins.clone(),
            factors: self.factors.iter().copied().collect::<BTreeSet<_>>(),
            min_samples: self.min_samples,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sampler().validate()?;
        self.grid().validate()?;
        self.tte_weights().validate()?;
        self.binning().validate()
    }

    /// Fully resolved copy, as echoed in reports.
    pub fn resolved(&self) -> Settings {
        let mut s = self.clone();
        s.tte_max_ref = Some(self.tte_weights().tte_max_ref);
        let factors: BTreeSet<Factor> = s.factors.iter().copied().collect();
        s.factors = factors.into_iter().collect();
        s
    }
}
