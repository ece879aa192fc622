use serde::{Deserialize, Serialize};

use super::terrain::Label;
use crate::camera::CameraModel;
use crate::error::Error;

/// Axis-aligned rectangle in world metres, `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub const fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    #[inline]
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    pub fn center(&self) -> [f64; 2] {
        [0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1)]
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0).max(0.0) * (self.y1 - self.y0).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

/// Terrain features, applied in order on top of the base layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Feature {
    /// Relabels a rectangle without changing its elevation.
    Patch { label: Label, rect: Rect },
    /// Plane rising along `axis` from the rectangle's lower edge.
    Ramp {
        label: Label,
        rect: Rect,
        slope_deg: f64,
        axis: Axis,
    },
    /// Canopy raised by `canopy_height` with per-cell Gaussian height noise.
    Forest {
        rect: Rect,
        canopy_height: f64,
        roughness: f64,
    },
    /// Footprint raised `height` metres above the ground beneath it.
    Building { rect: Rect, height: f64 },
}

impl Feature {
    pub fn rect(&self) -> &Rect {
        match self {
            Feature::Patch { rect, .. }
            | Feature::Ramp { rect, .. }
            | Feature::Forest { rect, .. }
            | Feature::Building { rect, .. } => rect,
        }
    }

    pub fn label(&self) -> Label {
        match self {
            Feature::Patch { label, .. } | Feature::Ramp { label, .. } => *label,
            Feature::Forest { .. } => Label::Forest,
            Feature::Building { .. } => Label::Building,
        }
    }
}

/// Lawn-mower survey: lines parallel to x, alternating direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlightSpec {
    /// Height of the camera above `base_elevation`, metres.
    pub altitude: f64,
    pub line_spacing: f64,
    /// Ground speed, m/s.
    pub speed: f64,
    /// Frames per second.
    pub frame_rate: f64,
    /// Survey area; defaults to the terrain inset by `margin`.
    pub area: Option<Rect>,
    pub margin: f64,
    /// Gaussian noise added to logged positions, metres.
    pub position_noise_sigma: f64,
    pub max_frames: Option<usize>,
}

impl Default for FlightSpec {
    fn default() -> Self {
        Self {
            altitude: 100.0,
            line_spacing: 60.0,
            speed: 20.0,
            frame_rate: 1.0,
            area: None,
            margin: 40.0,
            position_noise_sigma: 0.0,
            max_frames: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindSpec {
    /// Air velocity (direction the air moves towards), m/s.
    pub mean: [f64; 2],
    /// Rotation rate of the true wind vector, rad/s.
    pub rotation_rate: f64,
    /// Per-measurement Gaussian noise, m/s.
    pub noise_sigma: f64,
}

impl Default for WindSpec {
    fn default() -> Self {
        Self {
            mean: [3.0, 0.0],
            rotation_rate: 0.0,
            noise_sigma: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneSpec {
    pub cols: usize,
    pub rows: usize,
    /// Metres per cell.
    pub resolution: f64,
    pub base_label: Label,
    pub base_elevation: f64,
    /// Amplitude of the smooth large-scale elevation field, metres.
    pub undulation_amplitude: f64,
    pub undulation_wavelength: f64,
    /// Single ambient lighting gain applied to every colour.
    pub ambient: f64,
    /// Scales per-cell colour jitter and label patterns; 0 gives flat colours.
    pub texture_noise: f64,
    /// Scales the per-feature colour tint.
    pub tint_variation: f64,
    pub features: Vec<Feature>,
    pub camera: CameraModel,
    pub flight: FlightSpec,
    pub wind: WindSpec,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            cols: 400,
            rows: 400,
            resolution: 0.5,
            base_label: Label::Grass,
            base_elevation: 0.0,
            undulation_amplitude: 0.0,
            undulation_wavelength: 80.0,
            ambient: 1.0,
            texture_noise: 1.0,
            tint_variation: 1.0,
            features: Vec::new(),
            camera: CameraModel::nominal(),
            flight: FlightSpec::default(),
            wind: WindSpec::default(),
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), Error> {
        if self.cols == 0 || self.rows == 0 {
            return Err(Error::InvalidInput("scene grid size must be positive".into()));
        }
        if !(self.resolution > 0.0) || !self.resolution.is_finite() {
            return Err(Error::InvalidInput(format!(
                "scene resolution must be positive, got {}",
                self.resolution
            )));
        }
        if !(self.flight.speed > 0.0 && self.flight.frame_rate > 0.0 && self.flight.line_spacing > 0.0)
        {
            return Err(Error::InvalidInput(
                "flight speed, frame rate and line spacing must be positive".into(),
            ));
        }
        self.camera.validate()
    }

    pub fn extent(&self) -> [f64; 2] {
        [
            self.cols as f64 * self.resolution,
            self.rows as f64 * self.resolution,
        ]
    }

    /// Uniform grass everywhere at elevation 0.
    pub fn flat_grass(cols: usize, rows: usize, resolution: f64) -> Self {
        Self {
            cols,
            rows,
            resolution,
            ..Self::default()
        }
    }

    /// Farmland evaluation scene: a large flat grass field, a sloped crop
    /// field, a forest, a road and a farmhouse on crop background, surveyed
    /// at 150 m.
    pub fn evaluation() -> Self {
        Self {
            cols: 960,
            rows: 720,
            resolution: 0.5,
            base_label: Label::Crop,
            features: vec![
                Feature::Patch {
                    label: Label::Grass,
                    rect: Rect::new(200.0, 130.0, 320.0, 210.0),
                },
                Feature::Ramp {
                    label: Label::Crop,
                    rect: Rect::new(350.0, 30.0, 450.0, 130.0),
                    slope_deg: 10.0,
                    axis: Axis::X,
                },
                Feature::Forest {
                    rect: Rect::new(350.0, 220.0, 470.0, 330.0),
                    canopy_height: 12.0,
                    roughness: 1.5,
                },
                Feature::Patch {
                    label: Label::Road,
                    rect: Rect::new(330.0, 0.0, 342.0, 360.0),
                },
                Feature::Building {
                    rect: Rect::new(380.0, 160.0, 395.0, 175.0),
                    height: 8.0,
                },
            ],
            flight: FlightSpec {
                altitude: 150.0,
                line_spacing: 60.0,
                speed: 25.0,
                frame_rate: 1.0,
                area: Some(Rect::new(40.0, 50.0, 440.0, 290.0)),
                ..FlightSpec::default()
            },
            wind: WindSpec {
                mean: [-3.0, 1.0],
                rotation_rate: 0.0,
                noise_sigma: 0.3,
            },
            ..Self::default()
        }
    }
}
