//! Pinhole back-projection of depth maps into camera-frame point clouds and
//! re-projection of point sets onto image-plane masks.
//!
//! Image coordinates follow the usual raster convention: `row` grows
//! downward, `col` grows to the right. The camera frame is aligned with it
//! (x right, y down, z away from the camera). Extrinsics are the identity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pinhole intrinsics in pixel units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        let k = Intrinsics { fx, fy, cx, cy };
        if !(fx.is_finite() && fy.is_finite() && fx > 0.0 && fy > 0.0) {
            return Err(Error::Config(format!(
                "focal lengths must be positive, got fx={fx}, fy={fy}"
            )));
        }
        if !(cx.is_finite() && cy.is_finite()) {
            return Err(Error::Config("optical center must be finite".into()));
        }
        Ok(k)
    }

    /// Wide-angle prior used when no calibration is known: `f = W`, center
    /// at the middle of the frame (about 53 degrees horizontal field of view).
    pub fn default_for(width: usize, height: usize) -> Self {
        Intrinsics {
            fx: width as f64,
            fy: width as f64,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
        }
    }

    /// Checks that the optical center falls inside a `width x height` frame.
    pub fn validate_for(&self, width: usize, height: usize) -> Result<()> {
        if !(0.0..width as f64).contains(&self.cx) || !(0.0..height as f64).contains(&self.cy) {
            return Err(Error::Config(format!(
                "optical center ({}, {}) outside {width}x{height} image",
                self.cx, self.cy
            )));
        }
        Ok(())
    }

    /// Camera-frame point for a (possibly fractional) pixel position at depth `d`.
    #[inline]
    pub fn back_project(&self, row: f64, col: f64, d: f64) -> [f64; 3] {
        [(col - self.cx) * d / self.fx, (row - self.cy) * d / self.fy, d]
    }

    /// Continuous `(row, col)` image position of a camera-frame point with `z > 0`.
    #[inline]
    pub fn project(&self, p: [f64; 3]) -> (f64, f64) {
        (p[1] * self.fy / p[2] + self.cy, p[0] * self.fx / p[2] + self.cx)
    }
}

/// Integer pixel address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pixel {
    pub row: usize,
    pub col: usize,
}

impl Pixel {
    pub fn new(row: usize, col: usize) -> Self {
        Pixel { row, col }
    }
}

/// Axis-aligned pixel rectangle covering columns `x_min..x_max` and rows
/// `y_min..y_max` (max bounds exclusive).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PixelBox {
    pub x_min: usize,
    pub y_min: usize,
    pub x_max: usize,
    pub y_max: usize,
}

impl PixelBox {
    pub fn new(x_min: usize, y_min: usize, x_max: usize, y_max: usize) -> Result<Self> {
        if x_max <= x_min || y_max <= y_min {
            return Err(Error::InvalidInput(format!(
                "degenerate box ({x_min}, {y_min})-({x_max}, {y_max})"
            )));
        }
        Ok(PixelBox {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    /// Square window of half-size `radius` centred on `center`, not clipped.
    pub fn around(center: Pixel, radius: usize) -> Self {
        PixelBox {
            x_min: center.col.saturating_sub(radius),
            y_min: center.row.saturating_sub(radius),
            x_max: center.col + radius + 1,
            y_max: center.row + radius + 1,
        }
    }

    /// Fractional `(row, col)` centre of the covered pixel centres.
    pub fn center(&self) -> (f64, f64) {
        (
            (self.y_min + self.y_max - 1) as f64 / 2.0,
            (self.x_min + self.x_max - 1) as f64 / 2.0,
        )
    }

    pub fn contains(&self, p: Pixel) -> bool {
        (self.x_min..self.x_max).contains(&p.col) && (self.y_min..self.y_max).contains(&p.row)
    }

    /// Intersection with a `width x height` frame, `None` when disjoint.
    pub fn clip(&self, width: usize, height: usize) -> Option<PixelBox> {
        let b = PixelBox {
            x_min: self.x_min,
            y_min: self.y_min,
            x_max: self.x_max.min(width),
            y_max: self.y_max.min(height),
        };
        (b.x_min < b.x_max && b.y_min < b.y_max).then_some(b)
    }
}

/// Dense relative-depth raster. Zero marks an invalid sample.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Dimension("depth map must be non-empty".into()));
        }
        if values.len() != width * height {
            return Err(Error::Dimension(format!(
                "depth map {width}x{height} needs {} values, got {}",
                width * height,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "depth values must be finite and non-negative, found {v}"
            )));
        }
        Ok(DepthMap {
            width,
            height,
            values,
        })
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

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    #[inline]
    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        self.get(row, col) > 0.0
    }

    pub fn validity(&self) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.values.iter().map(|&v| v > 0.0).collect(),
        }
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub source: Pixel,
}

impl Point3 {
    #[inline]
    pub fn coords(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    pub intrinsics: Intrinsics,
    pub width: usize,
    pub height: usize,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Same frame and intrinsics, different point subset.
    pub fn with_points(&self, points: Vec<Point3>) -> PointCloud {
        PointCloud {
            points,
            intrinsics: self.intrinsics,
            width: self.width,
            height: self.height,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::Dimension(format!(
                "mask {width}x{height} needs {} bits, got {}",
                width * height,
                bits.len()
            )));
        }
        Ok(BinaryMask {
            width,
            height,
            bits,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        BinaryMask {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_box(width: usize, height: usize, b: PixelBox) -> Self {
        let mut m = Self::empty(width, height);
        if let Some(b) = b.clip(width, height) {
            for row in b.y_min..b.y_max {
                for col in b.x_min..b.x_max {
                    m.set(row, col, true);
                }
            }
        }
        m
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.bits[row * self.width + col] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    /// Set pixels in row-major order.
    pub fn iter_set(&self) -> impl Iterator<Item = Pixel> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(|(i, _)| Pixel::new(i / self.width, i % self.width))
    }

    /// True when every set bit of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.bits.iter().zip(&other.bits).all(|(a, b)| !a || *b)
    }

    /// Mean `(row, col)` of the set pixels.
    pub fn centroid(&self) -> Option<(f64, f64)> {
        let (mut n, mut sr, mut sc) = (0usize, 0.0, 0.0);
        for p in self.iter_set() {
            n += 1;
            sr += p.row as f64;
            sc += p.col as f64;
        }
        (n > 0).then(|| (sr / n as f64, sc / n as f64))
    }
}

/// Back-projects every valid pixel of `depth`, row-major. Invalid (zero)
/// pixels are skipped rather than emitted at the origin.
pub fn project_depth(depth: &DepthMap, k: &Intrinsics) -> PointCloud {
    let mut points = Vec::with_capacity(depth.values.len());
    for row in 0..depth.height {
        for col in 0..depth.width {
            let d = depth.get(row, col);
            if d > 0.0 {
                let [x, y, z] = k.back_project(row as f64, col as f64, d);
                points.push(Point3 {
                    x,
                    y,
                    z,
                    source: Pixel::new(row, col),
                });
            }
        }
    }
    PointCloud {
        points,
        intrinsics: *k,
        width: depth.width,
        height: depth.height,
    }
}

/// Rasterises points onto a `width x height` mask. Projections falling
/// outside the frame are dropped; rounding is to nearest, ties to even.
pub fn reproject_points(
    points: &[Point3],
    k: &Intrinsics,
    width: usize,
    height: usize,
) -> Result<BinaryMask> {
    let mut mask = BinaryMask::empty(width, height);
    for p in points {
        if p.z.is_nan() || p.z <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "cannot re-project point with z = {} (source {:?})",
                p.z, p.source
            )));
        }
        let (r, c) = k.project(p.coords());
        let (r, c) = (r.round_ties_even(), c.round_ties_even());
        if r >= 0.0 && c >= 0.0 && r < height as f64 && c < width as f64 {
            mask.set(r as usize, c as usize, true);
        }
    }
    Ok(mask)
}

/// Mean of the valid depths inside `region` (clipped to the image).
pub fn mean_depth(depth: &DepthMap, region: PixelBox) -> Result<f64> {
    let b = region.clip(depth.width, depth.height).ok_or_else(|| {
        Error::DegenerateRegion(format!("region {region:?} lies outside the image"))
    })?;
    let (mut n, mut sum) = (0usize, 0.0);
    for row in b.y_min..b.y_max {
        for col in b.x_min..b.x_max {
            let d = depth.get(row, col);
            if d > 0.0 {
                n += 1;
                sum += d;
            }
        }
    }
    if n == 0 {
        return Err(Error::DegenerateRegion(format!(
            "no valid depth inside {region:?}"
        )));
    }
    Ok(sum / n as f64)
}

/// Average face depth over the head box.
pub fn face_depth(depth: &DepthMap, head_box: PixelBox) -> Result<f64> {
    mean_depth(depth, head_box)
}

/// Average depth over a `(2 * radius + 1)^2` window around the gaze pixel.
pub fn target_depth(depth: &DepthMap, gaze: Pixel, radius: usize) -> Result<f64> {
    mean_depth(depth, PixelBox::around(gaze, radius))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_k() -> Intrinsics {
        Intrinsics::new(1.0, 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn optical_center_ray() {
        let k = Intrinsics::new(10.0, 10.0, 3.0, 2.0).unwrap();
        let d = DepthMap::from_fn(6, 5, |r, c| if (r, c) == (2, 3) { 5.0 } else { 0.0 }).unwrap();
        let cloud = project_depth(&d, &k);
        assert_eq!(cloud.len(), 1);
        let p = cloud.points[0];
        assert_eq!((p.x, p.y, p.z), (0.0, 0.0, 5.0));
        assert_eq!(p.source, Pixel::new(2, 3));
    }

    #[test]
    fn unit_tangent() {
        let k = Intrinsics::new(2.0, 2.0, 1.0, 1.0).unwrap();
        let d = DepthMap::from_fn(4, 3, |r, c| if (r, c) == (1, 3) { 1.0 } else { 0.0 }).unwrap();
        let p = project_depth(&d, &k).points[0];
        assert_eq!((p.x, p.y, p.z), (1.0, 0.0, 1.0));
    }

    #[test]
    fn three_by_three_constant() {
        let d = DepthMap::new(3, 3, vec![2.0; 9]).unwrap();
        let cloud = project_depth(&d, &unit_k());
        assert_eq!(cloud.len(), 9);
        // scalar evaluation of the pinhole formula per pixel
        for (i, p) in cloud.points.iter().enumerate() {
            let (row, col) = (i / 3, i % 3);
            assert_eq!(p.source, Pixel::new(row, col));
            assert_eq!(p.x, (col as f64 - 1.0) * 2.0);
            assert_eq!(p.y, (row as f64 - 1.0) * 2.0);
            assert_eq!(p.z, 2.0);
        }
        let xs: Vec<f64> = cloud.points.iter().map(|p| p.x).collect();
        assert!(xs.iter().all(|x| [-2.0, 0.0, 2.0].contains(x)));
    }

    #[test]
    fn zero_depth_skipped() {
        let d = DepthMap::new(2, 2, vec![0.0, 1.0, 0.0, 3.0]).unwrap();
        let cloud = project_depth(&d, &unit_k());
        let src: Vec<_> = cloud.points.iter().map(|p| p.source).collect();
        assert_eq!(src, vec![Pixel::new(0, 1), Pixel::new(1, 1)]);
        let none = DepthMap::new(2, 2, vec![0.0; 4]).unwrap();
        assert!(project_depth(&none, &unit_k()).is_empty());
    }

    #[test]
    fn reproject_center_and_empty() {
        let k = Intrinsics::new(7.0, 9.0, 4.0, 3.0).unwrap();
        let p = Point3 {
            x: 0.0,
            y: 0.0,
            z: 5.0,
            source: Pixel::new(0, 0),
        };
        let m = reproject_points(&[p], &k, 8, 6).unwrap();
        assert_eq!(m.iter_set().collect::<Vec<_>>(), vec![Pixel::new(3, 4)]);
        assert!(reproject_points(&[], &k, 8, 6).unwrap().is_empty());
    }

    #[test]
    fn reproject_rejects_non_positive_z() {
        let p = Point3 {
            x: 0.0,
            y: 0.0,
            z: 0.0,
            source: Pixel::new(0, 0),
        };
        assert!(matches!(
            reproject_points(&[p], &unit_k(), 3, 3),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn reproject_drops_out_of_frame() {
        let p = Point3 {
            x: 100.0,
            y: -100.0,
            z: 1.0,
            source: Pixel::new(0, 0),
        };
        assert!(reproject_points(&[p], &unit_k(), 3, 3).unwrap().is_empty());
    }

    #[test]
    fn reproject_ties_to_even() {
        // col = 0.5 * 1 / 1 + 1 = 1.5 -> 2, col = -0.5 + 1 = 0.5 -> 0
        let mk = |x| Point3 {
            x,
            y: 0.0,
            z: 1.0,
            source: Pixel::new(0, 0),
        };
        let m = reproject_points(&[mk(0.5), mk(-0.5)], &unit_k(), 4, 3).unwrap();
        assert_eq!(
            m.iter_set().collect::<Vec<_>>(),
            vec![Pixel::new(1, 0), Pixel::new(1, 2)]
        );
    }

    #[test]
    fn face_depth_means() {
        let d = DepthMap::new(2, 2, vec![4.0, 6.0, 7.0, 0.0]).unwrap();
        assert_eq!(face_depth(&d, PixelBox::new(0, 0, 2, 1).unwrap()).unwrap(), 5.0);
        assert_eq!(face_depth(&d, PixelBox::new(0, 1, 1, 2).unwrap()).unwrap(), 7.0);

        let d = DepthMap::new(4, 1, vec![1.0, 2.0, 3.0, 0.0]).unwrap();
        let manual = (1.0 + 2.0 + 3.0) / 3.0;
        assert_eq!(face_depth(&d, PixelBox::new(0, 0, 4, 1).unwrap()).unwrap(), manual);
    }

    #[test]
    fn face_depth_degenerate() {
        let d = DepthMap::new(2, 2, vec![0.0, 0.0, 0.0, 5.0]).unwrap();
        let b = PixelBox::new(0, 0, 2, 1).unwrap();
        assert!(matches!(face_depth(&d, b), Err(Error::DegenerateRegion(_))));
        let outside = PixelBox::new(5, 5, 6, 6).unwrap();
        assert!(matches!(face_depth(&d, outside), Err(Error::DegenerateRegion(_))));
    }

    #[test]
    fn target_window_is_five_by_five() {
        let d = DepthMap::from_fn(9, 9, |r, c| (r * 9 + c + 1) as f64).unwrap();
        let center = Pixel::new(4, 4);
        let mut sum = 0.0;
        for r in 2..=6 {
            for c in 2..=6 {
                sum += d.get(r, c);
            }
        }
        assert_eq!(target_depth(&d, center, 2).unwrap(), sum / 25.0);
        // clipped at the corner: 3x3 window
        let corner = target_depth(&d, Pixel::new(0, 0), 2).unwrap();
        let expect = (1.0 + 2.0 + 3.0 + 10.0 + 11.0 + 12.0 + 19.0 + 20.0 + 21.0) / 9.0;
        assert_eq!(corner, expect);
    }

    #[test]
    fn intrinsics_validation() {
        assert!(Intrinsics::new(0.0, 1.0, 0.0, 0.0).is_err());
        let k = Intrinsics::default_for(640, 480);
        assert_eq!((k.fx, k.fy, k.cx, k.cy), (640.0, 640.0, 320.0, 240.0));
        assert!(k.validate_for(640, 480).is_ok());
        assert!(k.validate_for(100, 100).is_err());
    }

    #[test]
    fn depth_map_rejects_negative() {
        assert!(DepthMap::new(1, 1, vec![-1.0]).is_err());
        assert!(DepthMap::new(2, 1, vec![1.0]).is_err());
    }
}
