//! Vertical risk regions on the image plane.
//!
//! The image is split into `n_regions` bands of `region_width` pixels, indexed
//! 1-based from the left. Risk is symmetric about the image center: the
//! distance of a region from the center band(s) is its folded risk class, and
//! a Gaussian of that distance gives the region's evaluation weight.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskGridConfig {
    pub region_width: f64,
    pub n_regions: u32,
    pub sigma_r: f64,
}

impl Default for RiskGridConfig {
    fn default() -> Self {
        RiskGridConfig {
            region_width: 160.0,
            n_regions: 12,
            sigma_r: 0.5,
        }
    }
}

impl RiskGridConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.region_width > 0.0 && self.region_width.is_finite()) {
            return Err(Error::InvalidConfig("region_width must be positive".into()));
        }
        if self.n_regions < 2 {
            return Err(Error::InvalidConfig("n_regions must be at least 2".into()));
        }
        if !(self.sigma_r > 0.0 && self.sigma_r.is_finite()) {
            return Err(Error::InvalidConfig("sigma_r must be positive".into()));
        }
        Ok(())
    }

    /// Index of the central region (`ceil(n_regions / 2)`).
    pub fn center(&self) -> u32 {
        self.n_regions.div_ceil(2)
    }

    /// Whether `image_width` is covered exactly by the grid.
    pub fn covers_exactly(&self, image_width: u32) -> bool {
        (self.region_width * self.n_regions as f64 - image_width as f64).abs() < 1e-9
    }
}

/// Region (1-based) containing a horizontal box center.
///
/// Centers left of the image land in region 1; centers at or past the right
/// edge land in the region holding the last pixel column. A band boundary
/// `k * region_width` belongs to region `k + 1`.
pub fn assign_region(center_x: f64, image_width: u32, cfg: &RiskGridConfig) -> u32 {
    let width = image_width.max(1) as f64;
    let last_band = ((width / cfg.region_width).ceil() - 1.0).max(0.0);
    let x = if center_x.is_nan() { 0.0 } else { center_x.max(0.0) };
    let band = (x / cfg.region_width).floor().min(last_band);
    (band as u32 + 1).clamp(1, cfg.n_regions)
}

/// Distance of `region` from the center region(s).
pub fn class_distance(region: u32, cfg: &RiskGridConfig) -> u32 {
    let n = cfg.n_regions;
    let m = cfg.center();
    if n % 2 == 1 || region <= m {
        region.abs_diff(m)
    } else {
        region.abs_diff(m + 1)
    }
}

/// Gaussian weight of a region; 1.0 at the center, decreasing outward.
pub fn risk_weight(region: u32, cfg: &RiskGridConfig) -> f64 {
    let d = class_distance(region, cfg) as f64;
    let scale = cfg.center() as f64 * cfg.sigma_r;
    (-0.5 * (d / scale).powi(2)).exp()
}

/// Folded risk class: 0 for the center, `center() - 1` for the edges.
pub fn fold_to_risk_class(region: u32, cfg: &RiskGridConfig) -> u32 {
    class_distance(region, cfg)
}
