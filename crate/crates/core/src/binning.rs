//! Five-way discretisation of gaze direction in the image plane and along
//! the depth axis.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, DepthMap, Pixel, PixelBox};

/// Depth-plane gaze bin. Positive angles point away from the camera.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthBin {
    Forward,
    IntermediateForward,
    SamePlane,
    IntermediateBackward,
    Backward,
}

impl DepthBin {
    pub const ALL: [DepthBin; 5] = [
        DepthBin::Forward,
        DepthBin::IntermediateForward,
        DepthBin::SamePlane,
        DepthBin::IntermediateBackward,
        DepthBin::Backward,
    ];

    pub fn center_degrees(self) -> f64 {
        match self {
            DepthBin::Forward => 90.0,
            DepthBin::IntermediateForward => 45.0,
            DepthBin::SamePlane => 0.0,
            DepthBin::IntermediateBackward => -45.0,
            DepthBin::Backward => -90.0,
        }
    }

    /// Bin obtained by swapping the roles of face and target.
    pub fn mirror(self) -> DepthBin {
        match self {
            DepthBin::Forward => DepthBin::Backward,
            DepthBin::IntermediateForward => DepthBin::IntermediateBackward,
            DepthBin::SamePlane => DepthBin::SamePlane,
            DepthBin::IntermediateBackward => DepthBin::IntermediateForward,
            DepthBin::Backward => DepthBin::Forward,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DepthBin::Forward => "forward",
            DepthBin::IntermediateForward => "intermediate_forward",
            DepthBin::SamePlane => "same_plane",
            DepthBin::IntermediateBackward => "intermediate_backward",
            DepthBin::Backward => "backward",
        }
    }
}

impl fmt::Display for DepthBin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Image-plane gaze bin, angles measured in raster coordinates (y down), so
/// `Straight` at 90 degrees points down the image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageBin {
    LowerRight,
    Straight,
    LowerLeft,
    UpperLeft,
    UpperRight,
}

impl ImageBin {
    /// Ordered by ascending centre angle.
    pub const ALL: [ImageBin; 5] = [
        ImageBin::LowerRight,
        ImageBin::Straight,
        ImageBin::LowerLeft,
        ImageBin::UpperLeft,
        ImageBin::UpperRight,
    ];

    pub fn center_degrees(self) -> f64 {
        match self {
            ImageBin::LowerRight => 30.0,
            ImageBin::Straight => 90.0,
            ImageBin::LowerLeft => 150.0,
            ImageBin::UpperLeft => 220.0,
            ImageBin::UpperRight => 320.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ImageBin::LowerRight => "lower_right",
            ImageBin::Straight => "straight",
            ImageBin::LowerLeft => "lower_left",
            ImageBin::UpperLeft => "upper_left",
            ImageBin::UpperRight => "upper_right",
        }
    }
}

impl fmt::Display for ImageBin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Depth-difference thresholds separating same-plane, intermediate and
/// full forward/backward gaze.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthThresholds {
    pub gamma1: f64,
    pub gamma2: f64,
}

impl DepthThresholds {
    pub fn new(gamma1: f64, gamma2: f64) -> Result<Self> {
        if !(gamma1.is_finite() && gamma2.is_finite() && gamma1 > 0.0 && gamma2 > gamma1) {
            return Err(Error::Config(format!(
                "thresholds must satisfy 0 < gamma1 < gamma2, got {gamma1}, {gamma2}"
            )));
        }
        Ok(DepthThresholds { gamma1, gamma2 })
    }
}

impl Default for DepthThresholds {
    fn default() -> Self {
        DepthThresholds {
            gamma1: 3.0,
            gamma2: 10.0,
        }
    }
}

/// Eye and gaze-target positions in pixel coordinates `(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GazeAnnotation {
    pub eye: (f64, f64),
    pub gaze: (f64, f64),
    /// Individual annotator targets, when available.
    pub gaze_list: Option<Vec<(f64, f64)>>,
}

impl GazeAnnotation {
    pub fn new(eye: (f64, f64), gaze: (f64, f64)) -> Self {
        GazeAnnotation {
            eye,
            gaze,
            gaze_list: None,
        }
    }

    pub fn validate(&self, width: usize, height: usize) -> Result<()> {
        let inside = |(x, y): (f64, f64)| {
            x.is_finite() && y.is_finite() && x >= 0.0 && y >= 0.0 && x < width as f64 && y < height as f64
        };
        if !inside(self.eye) {
            return Err(Error::InvalidInput(format!("eye {:?} outside image", self.eye)));
        }
        if !inside(self.gaze) {
            return Err(Error::InvalidInput(format!("gaze {:?} outside image", self.gaze)));
        }
        if let Some(list) = &self.gaze_list {
            if list.is_empty() {
                return Err(Error::InvalidInput("empty gaze list".into()));
            }
            if let Some(g) = list.iter().find(|g| !inside(**g)) {
                return Err(Error::InvalidInput(format!("gaze {g:?} outside image")));
            }
        }
        Ok(())
    }

    /// Pixel holding the gaze target.
    pub fn gaze_pixel(&self) -> Pixel {
        Pixel::new(self.gaze.1.floor() as usize, self.gaze.0.floor() as usize)
    }
}

/// Classifies the signed nearness difference `d_f - d_t` of face and target.
///
/// Arguments are in nearness order: a larger value is closer to the camera,
/// as produced by inverse-depth estimators, so `d_f - d_t > gamma2` means the
/// target lies well beyond the face. Boundary equalities go to the inner
/// case (`|diff| <= gamma1` is same-plane, `gamma1 < |diff| <= gamma2` is
/// intermediate).
pub fn bin_depth_angle(d_f: f64, d_t: f64, thresholds: &DepthThresholds) -> Result<DepthBin> {
    let DepthThresholds { gamma1, gamma2 } = DepthThresholds::new(thresholds.gamma1, thresholds.gamma2)?;
    let diff = d_f - d_t;
    Ok(if diff.abs() <= gamma1 {
        DepthBin::SamePlane
    } else if diff > gamma1 && diff <= gamma2 {
        DepthBin::IntermediateForward
    } else if -diff > gamma1 && -diff <= gamma2 {
        DepthBin::IntermediateBackward
    } else if diff > gamma2 {
        DepthBin::Forward
    } else {
        DepthBin::Backward
    })
}

/// Direction from eye to gaze target in degrees, `[0, 360)`, raster convention.
pub fn image_plane_angle(eye: (f64, f64), gaze: (f64, f64)) -> Result<f64> {
    let (dx, dy) = (gaze.0 - eye.0, gaze.1 - eye.1);
    if dx == 0.0 && dy == 0.0 {
        return Err(Error::DegenerateGaze(format!("eye and gaze coincide at {eye:?}")));
    }
    let a = dy.atan2(dx).to_degrees().rem_euclid(360.0);
    Ok(if a >= 360.0 { 0.0 } else { a })
}

fn circular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

/// Nearest bin centre on the circle; ties go to the smaller centre angle.
pub fn bin_image_angle(alpha: f64) -> ImageBin {
    let mut best = ImageBin::ALL[0];
    let mut best_d = circular_distance(alpha, best.center_degrees());
    for bin in &ImageBin::ALL[1..] {
        let d = circular_distance(alpha, bin.center_degrees());
        if d < best_d {
            best = *bin;
            best_d = d;
        }
    }
    best
}

/// Knobs for [`bin_gaze`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinningParams {
    pub thresholds: DepthThresholds,
    /// Half-size of the square window averaged around the gaze pixel.
    pub target_radius: usize,
}

impl Default for BinningParams {
    fn default() -> Self {
        BinningParams {
            thresholds: DepthThresholds::default(),
            target_radius: 2,
        }
    }
}

/// Binned gaze direction together with the depths it was derived from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GazeBins {
    pub image: ImageBin,
    pub depth: DepthBin,
    pub alpha: f64,
    pub face_depth: f64,
    pub target_depth: f64,
}

/// Bins a subject's gaze from the annotation and the scene depth.
///
/// Depth maps store distance (larger is farther), so face and target are
/// passed to [`bin_depth_angle`] in swapped order to express nearness.
pub fn bin_gaze(
    annotation: &GazeAnnotation,
    depth: &DepthMap,
    head_box: PixelBox,
    params: &BinningParams,
) -> Result<GazeBins> {
    annotation.validate(depth.width(), depth.height())?;
    let alpha = image_plane_angle(annotation.eye, annotation.gaze)?;
    let d_f = geometry::face_depth(depth, head_box)?;
    let d_t = geometry::target_depth(depth, annotation.gaze_pixel(), params.target_radius)?;
    let depth_bin = bin_depth_angle(d_t, d_f, &params.thresholds)?;
    Ok(GazeBins {
        image: bin_image_angle(alpha),
        depth: depth_bin,
        alpha,
        face_depth: d_f,
        target_depth: d_t,
    })
}
