//! Wind estimation, approach geometry for a fixed-wing landing against the
//! wind, touch-down selection on the hazard distance map, and collision
//! checking of the final approach and the loiter-down circle.

mod overlay;
mod plan;
mod raster_path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use overlay::render_overlay;
pub use plan::{check_candidate, plan_approach, recheck_clearance, ApproachPlan, ClearanceSample, Gate, GateFailure, PlanReport, Recheck};
pub use raster_path::{circle_cells, supercover, CellSpan};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ApproachParams {
    /// Landing airspeed, m/s.
    pub v_land: f64,
    /// Glide path angle, rad.
    pub gamma_land: f64,
    /// Maximum angle between approach and wind direction, rad.
    pub delta_beta_w: f64,
    /// Height of the approach point above the touch-down point, m.
    pub h_app: f64,
    /// Bank angle on the loiter circle, rad.
    pub phi_land: f64,
    /// Touch-down position uncertainty along the approach direction, m.
    pub delta_td: f64,
    pub g: f64,
    /// Required clearance above terrain, m.
    pub safety_margin: f64,
    /// Near touch-down the required clearance is the smaller of
    /// `safety_margin` and this fraction of the nominal path height.
    pub flare_clearance_ratio: f64,
    /// Treat cells without a valid elevation as collisions instead of
    /// counting them as unverified.
    pub unknown_is_obstacle: bool,
}

impl Default for ApproachParams {
    fn default() -> Self {
        Self {
            v_land: 13.0,
            gamma_land: 4f64.to_radians(),
            delta_beta_w: 30f64.to_radians(),
            h_app: 12.0,
            phi_land: 11f64.to_radians(),
            delta_td: 10.0,
            g: 9.81,
            safety_margin: 2.0,
            flare_clearance_ratio: 0.5,
            unknown_is_obstacle: false,
        }
    }
}

impl ApproachParams {
    pub fn validate(&self) -> Result<()> {
        let half_pi = std::f64::consts::FRAC_PI_2;
        let ok = self.gamma_land > 0.0
            && self.gamma_land < half_pi
            && self.phi_land > 0.0
            && self.phi_land < half_pi
            && self.v_land > 0.0
            && self.h_app > 0.0
            && self.g > 0.0
            && self.delta_td >= 0.0
            && self.safety_margin >= 0.0
            && (0.0..=1.0).contains(&self.flare_clearance_ratio);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput("approach parameters out of range".into()))
        }
    }
}

/// Horizontal approach distance and loiter radius for wind speed `w`.
pub fn approach_geometry(p: &ApproachParams, w: f64) -> Result<(f64, f64)> {
    let numerator = p.v_land * p.gamma_land.cos() - w * p.delta_beta_w.cos();
    if !(numerator > 0.0) {
        return Err(Error::InfeasibleWind { numerator });
    }
    let x_app = numerator / (p.v_land * p.gamma_land.sin()) * p.h_app;
    let r_loit = (p.v_land * p.gamma_land.cos() + w).powi(2) / (p.g * p.phi_land.tan());
    Ok((x_app, r_loit))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindConfig {
    /// EWMA weight of a new measurement, in (0, 1].
    pub beta: f64,
    /// Measurements farther than this from the region centre are ignored, m.
    pub association_radius: f64,
}

impl Default for WindConfig {
    fn default() -> Self {
        Self {
            beta: 0.2,
            association_radius: 150.0,
        }
    }
}

/// Smoothed horizontal wind vector near one region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindEstimate {
    pub ewma_state: [f64; 2],
    pub beta: f64,
    pub association_radius: f64,
    pub n_measurements: u32,
}

impl WindEstimate {
    pub fn new(cfg: WindConfig) -> Result<Self> {
        if !(cfg.beta > 0.0 && cfg.beta <= 1.0) || !(cfg.association_radius >= 0.0) {
            return Err(Error::InvalidInput("wind beta must be in (0, 1] and radius >= 0".into()));
        }
        Ok(Self {
            ewma_state: [0.0, 0.0],
            beta: cfg.beta,
            association_radius: cfg.association_radius,
            n_measurements: 0,
        })
    }

    /// Wind speed, m/s.
    pub fn speed(&self) -> f64 {
        self.ewma_state[0].hypot(self.ewma_state[1])
    }

    /// Unit wind direction; `None` before the first measurement or in calm air.
    pub fn direction(&self) -> Option<[f64; 2]> {
        let w = self.speed();
        (self.n_measurements > 0 && w > 1e-12).then(|| [self.ewma_state[0] / w, self.ewma_state[1] / w])
    }

    /// Folds in `measurement` taken at `position` if it lies within the
    /// association radius of `roi_center`.
    pub fn update(&self, measurement: [f64; 2], roi_center: [f64; 2], position: [f64; 2]) -> Self {
        let d = (position[0] - roi_center[0]).hypot(position[1] - roi_center[1]);
        if d > self.association_radius {
            return *self;
        }
        let mut next = *self;
        next.ewma_state = if self.n_measurements == 0 {
            measurement
        } else {
            let b = self.beta;
            [
                b * measurement[0] + (1.0 - b) * self.ewma_state[0],
                b * measurement[1] + (1.0 - b) * self.ewma_state[1],
            ]
        };
        next.n_measurements += 1;
        next
    }
}

pub fn update_wind(est: &WindEstimate, measurement: [f64; 2], roi_center: [f64; 2], position: [f64; 2]) -> WindEstimate {
    est.update(measurement, roi_center, position)
}
