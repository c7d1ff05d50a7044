//! Depth-infused saliency pseudo-labels.
//!
//! The scene depth is lifted to a point cloud, an oriented cuboid is cast
//! from the subject's face along the binned gaze direction, and the points
//! it captures are re-projected to a binary mask.

use serde::{Deserialize, Serialize};

use crate::binning::{self, BinningParams, DepthBin, GazeAnnotation, GazeBins, ImageBin};
use crate::error::{Error, Result};
use crate::geometry::{self, BinaryMask, DepthMap, Intrinsics, Point3, PointCloud, PixelBox};
use crate::heatmap::Heatmap;

pub const DEFAULT_APERTURE: f64 = 0.15;

type Vec3 = [f64; 3];

#[inline]
fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalize(a: Vec3) -> Vec3 {
    let n = dot(a, a).sqrt();
    [a[0] / n, a[1] / n, a[2] / n]
}

/// Box anchored at `origin` spanning `[0, length]` along `axis_u` and
/// symmetric half extents along `axis_v` and `axis_w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedCuboid {
    pub origin: Vec3,
    pub axis_u: Vec3,
    pub axis_v: Vec3,
    pub axis_w: Vec3,
    pub length: f64,
    pub half_width: f64,
    pub half_height: f64,
}

impl OrientedCuboid {
    pub fn new(
        origin: Vec3,
        axis_u: Vec3,
        axis_v: Vec3,
        length: f64,
        half_width: f64,
        half_height: f64,
    ) -> Result<Self> {
        if !(length > 0.0 && half_width > 0.0 && half_height > 0.0) {
            return Err(Error::InvalidInput(format!(
                "cuboid extents must be positive: {length}, {half_width}, {half_height}"
            )));
        }
        let (u, v) = (normalize(axis_u), normalize(axis_v));
        if !u.iter().chain(&v).all(|c| c.is_finite()) || dot(u, v).abs() > 1e-9 {
            return Err(Error::InvalidInput("cuboid axes must be non-zero and orthogonal".into()));
        }
        Ok(OrientedCuboid {
            origin,
            axis_u: u,
            axis_v: v,
            axis_w: cross(u, v),
            length,
            half_width,
            half_height,
        })
    }

    /// Local `(u, v, w)` coordinates of a camera-frame point.
    #[inline]
    pub fn local(&self, p: Vec3) -> Vec3 {
        let d = sub(p, self.origin);
        [dot(d, self.axis_u), dot(d, self.axis_v), dot(d, self.axis_w)]
    }

    /// Closed-box containment.
    #[inline]
    pub fn contains(&self, p: Vec3) -> bool {
        let [u, v, w] = self.local(p);
        (0.0..=self.length).contains(&u) && v.abs() <= self.half_width && w.abs() <= self.half_height
    }
}

/// Unit gaze direction in the camera frame for a pair of bins.
///
/// The image-plane angle is measured in raster coordinates, which share
/// orientation with the camera x/y axes; a positive depth angle points away
/// from the camera.
pub fn gaze_axis(img_bin: ImageBin, depth_bin: DepthBin) -> Vec3 {
    let (xy, d) = (
        img_bin.center_degrees().to_radians(),
        depth_bin.center_degrees().to_radians(),
    );
    normalize([xy.cos() * d.cos(), xy.sin() * d.cos(), d.sin()])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CuboidLength {
    /// Reach the farthest cloud point along the gaze axis.
    SceneExtent,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossSection {
    /// Half extents equal to this fraction of the face depth.
    Aperture(f64),
    Fixed { half_width: f64, half_height: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DismParams {
    pub binning: BinningParams,
    pub length: CuboidLength,
    pub cross_section: CrossSection,
    /// Clear the subject's own head box from the label.
    pub head_exclusion: bool,
}

impl Default for DismParams {
    fn default() -> Self {
        DismParams {
            binning: BinningParams::default(),
            length: CuboidLength::SceneExtent,
            cross_section: CrossSection::Aperture(DEFAULT_APERTURE),
            head_exclusion: true,
        }
    }
}

impl DismParams {
    pub fn validate(&self) -> Result<()> {
        let t = self.binning.thresholds;
        binning::DepthThresholds::new(t.gamma1, t.gamma2)?;
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if let CuboidLength::Fixed(l) = self.length {
            if !positive(l) {
                return Err(Error::Config(format!("cuboid length must be positive, got {l}")));
            }
        }
        match self.cross_section {
            CrossSection::Aperture(a) if !positive(a) => {
                Err(Error::Config(format!("aperture must be positive, got {a}")))
            }
            CrossSection::Fixed {
                half_width,
                half_height,
            } if !positive(half_width) || !positive(half_height) => Err(Error::Config(
                "cuboid half extents must be positive".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Casts the gaze cuboid from `face_point`.
///
/// With [`CuboidLength::SceneExtent`] the length is the largest forward
/// projection of any cloud point, floored at the cross-section half width
/// so the box stays non-degenerate when nothing lies ahead.
pub fn build_cuboid(
    face_point: Vec3,
    img_bin: ImageBin,
    depth_bin: DepthBin,
    params: &DismParams,
    cloud: &PointCloud,
) -> Result<OrientedCuboid> {
    if face_point[2].is_nan() || face_point[2] <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "face anchor must lie in front of the camera, z = {}",
            face_point[2]
        )));
    }
    let u = gaze_axis(img_bin, depth_bin);
    let xy = img_bin.center_degrees().to_radians();
    // in-plane normal; orthogonal to u for every depth angle
    let v = [-xy.sin(), xy.cos(), 0.0];
    let (half_width, half_height) = match params.cross_section {
        CrossSection::Aperture(a) => (a * face_point[2], a * face_point[2]),
        CrossSection::Fixed {
            half_width,
            half_height,
        } => (half_width, half_height),
    };
    let length = match params.length {
        CuboidLength::Fixed(l) => l,
        CuboidLength::SceneExtent => cloud
            .points
            .iter()
            .map(|p| dot(sub(p.coords(), face_point), u))
            .fold(half_width, f64::max),
    };
    OrientedCuboid::new(face_point, u, v, length, half_width, half_height)
}

/// Points of `cloud` inside `cuboid`, in cloud order.
pub fn filter_points(cloud: &PointCloud, cuboid: &OrientedCuboid) -> PointCloud {
    let points: Vec<Point3> = cloud
        .points
        .iter()
        .filter(|p| cuboid.contains(p.coords()))
        .copied()
        .collect();
    cloud.with_points(points)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DismWarning {
    /// The depth map has no valid pixel.
    NoValidDepth,
    /// The cuboid captured no points.
    EmptyLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DismOutput {
    pub mask: BinaryMask,
    pub bins: Option<GazeBins>,
    pub cuboid: Option<OrientedCuboid>,
    /// Number of cloud points inside the cuboid.
    pub captured: usize,
    pub warning: Option<DismWarning>,
}

/// Full pseudo-label path: bin the gaze, cast the cuboid from the face
/// anchor (head-box centre back-projected at the face depth), keep the
/// captured points and re-project them.
pub fn generate_dism(
    depth: &DepthMap,
    head_box: PixelBox,
    annotation: &GazeAnnotation,
    k: &Intrinsics,
    params: &DismParams,
) -> Result<DismOutput> {
    params.validate()?;
    let (w, h) = (depth.width(), depth.height());
    if depth.values().iter().all(|v| *v == 0.0) {
        return Ok(DismOutput {
            mask: BinaryMask::empty(w, h),
            bins: None,
            cuboid: None,
            captured: 0,
            warning: Some(DismWarning::NoValidDepth),
        });
    }
    let bins = binning::bin_gaze(annotation, depth, head_box, &params.binning)?;
    let cloud = geometry::project_depth(depth, k);
    let head = head_box
        .clip(w, h)
        .ok_or_else(|| Error::DegenerateRegion("head box outside image".into()))?;
    let (row, col) = head.center();
    let anchor = k.back_project(row, col, bins.face_depth);
    let cuboid = build_cuboid(anchor, bins.image, bins.depth, params, &cloud)?;
    let captured = filter_points(&cloud, &cuboid);
    let mut mask = geometry::reproject_points(&captured.points, k, w, h)?;
    if params.head_exclusion {
        for r in head.y_min..head.y_max {
            for c in head.x_min..head.x_max {
                mask.set(r, c, false);
            }
        }
    }
    let warning = mask.is_empty().then_some(DismWarning::EmptyLabel);
    Ok(DismOutput {
        mask,
        bins: Some(bins),
        cuboid: Some(cuboid),
        captured: captured.len(),
        warning,
    })
}

/// Soft Jaccard distance `1 - (I + eps) / (U + eps)` with
/// `I = sum(min(s, t))` and `U = sum(max(s, t))`.
///
/// On `{0, 1}` masks `min` and `max` equal `s * t` and `s + t - s * t`, so
/// this is the usual set form; on soft masks it stays zero exactly when the
/// inputs coincide.
pub fn jaccard_distance(s: &Heatmap, t: &Heatmap, eps: f64) -> Result<f64> {
    if !s.same_shape(t) {
        return Err(Error::Dimension(format!(
            "masks {}x{} and {}x{}",
            s.width(),
            s.height(),
            t.width(),
            t.height()
        )));
    }
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::Argument(format!("epsilon must be positive, got {eps}")));
    }
    let mut inter = 0.0;
    let mut union = 0.0;
    for (&a, &b) in s.values().iter().zip(t.values()) {
        if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) {
            return Err(Error::InvalidInput(format!(
                "soft mask values must lie in [0, 1], got {a}, {b}"
            )));
        }
        inter += a.min(b);
        union += a.max(b);
    }
    Ok(1.0 - (inter + eps) / (union + eps))
}

pub fn jaccard_distance_masks(s: &BinaryMask, t: &BinaryMask, eps: f64) -> Result<f64> {
    jaccard_distance(&Heatmap::from(s), &Heatmap::from(t), eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pixel;

    fn approx(a: Vec3, b: Vec3, tol: f64) -> bool {
        a.iter().zip(&b).all(|(x, y)| (x - y).abs() < tol)
    }

    fn empty_cloud() -> PointCloud {
        PointCloud {
            points: vec![],
            intrinsics: Intrinsics::default_for(8, 8),
            width: 8,
            height: 8,
        }
    }

    #[test]
    fn axis_same_plane_lower_right() {
        let u = gaze_axis(ImageBin::LowerRight, DepthBin::SamePlane);
        let s = 30f64.to_radians();
        assert!(approx(u, [s.cos(), s.sin(), 0.0], 1e-15));
        assert!(approx(u, [0.866, 0.5, 0.0], 1e-3));
    }

    #[test]
    fn axis_forward() {
        for b in ImageBin::ALL {
            assert!(approx(gaze_axis(b, DepthBin::Forward), [0.0, 0.0, 1.0], 1e-15));
            assert!(approx(gaze_axis(b, DepthBin::Backward), [0.0, 0.0, -1.0], 1e-15));
        }
    }

    #[test]
    fn axis_intermediate_backward_straight() {
        let u = gaze_axis(ImageBin::Straight, DepthBin::IntermediateBackward);
        let c = 45f64.to_radians().cos();
        assert!(approx(u, [0.0, c, -c], 1e-15));
    }

    #[test]
    fn cuboid_frame_orthonormal() {
        let params = DismParams::default();
        for ib in ImageBin::ALL {
            for db in DepthBin::ALL {
                let c = build_cuboid([0.1, 0.2, 5.0], ib, db, &params, &empty_cloud()).unwrap();
                for (a, b) in [(c.axis_u, c.axis_v), (c.axis_u, c.axis_w), (c.axis_v, c.axis_w)] {
                    assert!(dot(a, b).abs() < 1e-9);
                }
                for a in [c.axis_u, c.axis_v, c.axis_w] {
                    assert!((dot(a, a) - 1.0).abs() < 1e-9);
                }
                assert!(c.length > 0.0);
                assert!((c.half_width - 0.75).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cuboid_rejects_anchor_behind_camera() {
        let r = build_cuboid(
            [0.0, 0.0, 0.0],
            ImageBin::Straight,
            DepthBin::SamePlane,
            &DismParams::default(),
            &empty_cloud(),
        );
        assert!(r.is_err());
    }

    fn pt(x: f64, y: f64, z: f64, i: usize) -> Point3 {
        Point3 {
            x,
            y,
            z,
            source: Pixel::new(0, i),
        }
    }

    #[test]
    fn axis_aligned_containment() {
        let c = OrientedCuboid::new([0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], 10.0, 1.0, 1.0).unwrap();
        assert!(c.contains([5.0, 0.5, -0.5]));
        assert!(!c.contains([5.0, 1.5, 0.0]));
        assert!(!c.contains([-0.1, 0.0, 0.0]));
        assert!(!c.contains([10.1, 0.0, 0.0]));
        let mut cloud = empty_cloud();
        cloud.points = vec![pt(5.0, 0.5, -0.5, 0), pt(5.0, 1.5, 0.0, 1)];
        let kept = filter_points(&cloud, &c);
        assert_eq!(kept.points, vec![cloud.points[0]]);
    }

    #[test]
    fn whole_cloud_and_behind() {
        let mut cloud = empty_cloud();
        cloud.points = (0..5).map(|i| pt(i as f64, 0.0, 1.0, i)).collect();
        let all = OrientedCuboid::new([-1.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], 100.0, 1.0, 1.0).unwrap();
        assert_eq!(filter_points(&cloud, &all).points, cloud.points);
        let behind = OrientedCuboid::new([-1.0, 0.0, 1.0], [-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], 100.0, 1.0, 1.0).unwrap();
        assert!(filter_points(&cloud, &behind).is_empty());
    }

    #[test]
    fn jaccard_identities() {
        let s = Heatmap::new(2, 2, vec![0.2, 0.7, 1.0, 0.0]).unwrap();
        assert_eq!(jaccard_distance(&s, &s, 1e-6).unwrap(), 0.0);
        let z = Heatmap::zeros(3, 3);
        assert_eq!(jaccard_distance(&z, &z, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn jaccard_disjoint() {
        let a = Heatmap::from_fn(10, 10, |r, _| if r < 5 { 1.0 } else { 0.0 }).unwrap();
        let b = Heatmap::from_fn(10, 10, |r, _| if r >= 5 { 1.0 } else { 0.0 }).unwrap();
        let d = jaccard_distance(&a, &b, 1e-6).unwrap();
        let expect = 1.0 - 1e-6 / (100.0 + 1e-6);
        assert!((d - expect).abs() < 1e-15);
        assert!(d < 1.0);
    }

    #[test]
    fn jaccard_matches_product_form_on_binary() {
        let a = BinaryMask::new(3, 2, vec![true, false, true, true, false, false]).unwrap();
        let b = BinaryMask::new(3, 2, vec![true, true, false, true, false, false]).unwrap();
        let (mut i, mut u) = (0.0, 0.0);
        for (x, y) in a.bits().iter().zip(b.bits()) {
            let (x, y) = (f64::from(u8::from(*x)), f64::from(u8::from(*y)));
            i += x * y;
            u += x + y - x * y;
        }
        let eps = 1e-3;
        let expect = 1.0 - (i + eps) / (u + eps);
        assert_eq!(jaccard_distance_masks(&a, &b, eps).unwrap(), expect);
    }

    #[test]
    fn jaccard_errors() {
        let a = Heatmap::zeros(2, 2);
        assert!(matches!(
            jaccard_distance(&a, &Heatmap::zeros(2, 3), 1e-6),
            Err(Error::Dimension(_))
        ));
        let bad = Heatmap::new(2, 2, vec![1.5, 0.0, 0.0, 0.0]).unwrap();
        assert!(jaccard_distance(&a, &bad, 1e-6).is_err());
    }

    #[test]
    fn all_invalid_depth_warns() {
        let depth = DepthMap::new(8, 8, vec![0.0; 64]).unwrap();
        let out = generate_dism(
            &depth,
            PixelBox::new(0, 0, 2, 2).unwrap(),
            &GazeAnnotation::new((1.0, 1.0), (6.0, 6.0)),
            &Intrinsics::default_for(8, 8),
            &DismParams::default(),
        )
        .unwrap();
        assert!(out.mask.is_empty());
        assert_eq!(out.warning, Some(DismWarning::NoValidDepth));
    }

    #[test]
    fn flat_scene_band_contains_gaze() {
        // Face at the left edge, gaze along the lower-right bin centre.
        let (w, h) = (64, 64);
        let depth = DepthMap::new(w, h, vec![10.0; w * h]).unwrap();
        let k = Intrinsics::default_for(w, h);
        let head = PixelBox::new(4, 20, 10, 26).unwrap();
        let (row, col) = head.center();
        let a = 30f64.to_radians();
        let gaze = (col + 30.0 * a.cos(), row + 30.0 * a.sin());
        let ann = GazeAnnotation::new((col, row), gaze);
        let out = generate_dism(&depth, head, &ann, &k, &DismParams::default()).unwrap();
        assert_eq!(out.bins.unwrap().image, ImageBin::LowerRight);
        assert_eq!(out.bins.unwrap().depth, DepthBin::SamePlane);
        assert!(out.mask.get(gaze.1.floor() as usize, gaze.0.floor() as usize));
        assert!(out.mask.is_subset_of(&depth.validity()));
        let cuboid = out.cuboid.unwrap();
        // head cleared, nothing behind the face
        for p in out.mask.iter_set() {
            assert!(!head.contains(p));
            let u = cuboid.local(k.back_project(p.row as f64, p.col as f64, 10.0))[0];
            assert!(u >= 0.0);
        }
        // brute-force per-pixel containment oracle
        for r in 0..h {
            for c in 0..w {
                let p = k.back_project(r as f64, c as f64, 10.0);
                let expect = cuboid.contains(p) && !head.contains(Pixel::new(r, c));
                assert_eq!(out.mask.get(r, c), expect, "pixel ({r}, {c})");
            }
        }
    }
}
