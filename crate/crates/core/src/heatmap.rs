//! Real-valued gaze heatmaps, Gaussian ground truth and the heatmap loss.

use crate::error::{Error, Result};
use crate::geometry::BinaryMask;

pub const DEFAULT_HEATMAP_SIZE: (usize, usize) = (64, 64);
pub const DEFAULT_SIGMA: f64 = 3.0;

/// `height x width` grid of finite reals, row-major.
///
/// Ground-truth maps are non-negative; raw network outputs may carry any
/// sign, which only matters when quantising to disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl Heatmap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension("heatmap must be non-empty".into()));
        }
        if values.len() != width * height {
            return Err(Error::Dimension(format!(
                "heatmap {width}x{height} needs {} values, got {}",
                width * height,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("heatmap values must be finite".into()));
        }
        Ok(Heatmap {
            width,
            height,
            values,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Heatmap {
            width,
            height,
            values: vec![0.0; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                values.push(f(row, col));
            }
        }
        Self::new(width, height, values)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn same_shape(&self, other: &Heatmap) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// `(row, col)` of the maximum; the first in row-major order on ties.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v > self.values[best] {
                best = i;
            }
        }
        (best / self.width, best % self.width)
    }

    /// Argmax mapped to normalised `(x, y)` in the unit square.
    pub fn peak_point(&self) -> (f64, f64) {
        let (row, col) = self.argmax();
        (col as f64 / self.width as f64, row as f64 / self.height as f64)
    }

    /// `1.0` where `self >= threshold`.
    pub fn binarize(&self, threshold: f64) -> BinaryMask {
        let bits = self.values.iter().map(|v| *v >= threshold).collect();
        BinaryMask::new(self.width, self.height, bits).expect("same shape")
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

impl From<&BinaryMask> for Heatmap {
    fn from(mask: &BinaryMask) -> Self {
        Heatmap {
            width: mask.width(),
            height: mask.height(),
            values: mask.bits().iter().map(|b| f64::from(u8::from(*b))).collect(),
        }
    }
}

/// Gaussian bump centred on a normalised target.
///
/// Pixel `(row, col)` sits at `(col, row)` in grid units and the target at
/// `(x * W, y * H)`, so `peak_point` of the result recovers the target on
/// grid-aligned inputs.
pub fn gaussian_heatmap(target: (f64, f64), width: usize, height: usize, sigma: f64) -> Result<Heatmap> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
    }
    if !(0.0..=1.0).contains(&target.0) || !(0.0..=1.0).contains(&target.1) {
        return Err(Error::InvalidInput(format!(
            "target {target:?} outside the unit square"
        )));
    }
    let (tx, ty) = (target.0 * width as f64, target.1 * height as f64);
    let denom = 2.0 * sigma * sigma;
    Heatmap::from_fn(width, height, |row, col| {
        let (dx, dy) = (col as f64 - tx, row as f64 - ty);
        (-(dx * dx + dy * dy) / denom).exp()
    })
}

/// Sum of squared per-pixel differences.
pub fn mse_heatmap_loss(pred: &Heatmap, target: &Heatmap) -> Result<f64> {
    if !pred.same_shape(target) {
        return Err(Error::Dimension(format!(
            "heatmaps {}x{} and {}x{}",
            pred.width, pred.height, target.width, target.height
        )));
    }
    Ok(pred
        .values
        .iter()
        .zip(&target.values)
        .map(|(a, b)| (a - b) * (a - b))
        .sum())
}

/// Loss averaged over a batch of `(prediction, target)` pairs.
pub fn mean_mse_heatmap_loss(pairs: &[(Heatmap, Heatmap)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Argument("empty batch".into()));
    }
    let losses = pairs
        .iter()
        .map(|(p, t)| mse_heatmap_loss(p, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(crate::exec::pairwise_sum(&losses) / pairs.len() as f64)
}
