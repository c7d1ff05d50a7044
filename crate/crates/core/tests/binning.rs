use depthgaze::binning::{
    bin_depth_angle, bin_gaze, bin_image_angle, image_plane_angle, BinningParams, DepthBin,
    DepthThresholds, GazeAnnotation, ImageBin,
};
use depthgaze::geometry::{DepthMap, PixelBox};
use depthgaze::Error;
use proptest::prelude::*;

/// Brute force: smallest circular distance, first minimum in ascending centre order.
fn nearest_centre(alpha: f64) -> ImageBin {
    let centres = [
        (30.0, ImageBin::LowerRight),
        (90.0, ImageBin::Straight),
        (150.0, ImageBin::LowerLeft),
        (220.0, ImageBin::UpperLeft),
        (320.0, ImageBin::UpperRight),
    ];
    let mut best = (f64::INFINITY, ImageBin::LowerRight);
    for (c, bin) in centres {
        let d = ((alpha - c) % 360.0 + 360.0) % 360.0;
        let d = d.min(360.0 - d);
        if d < best.0 {
            best = (d, bin);
        }
    }
    best.1
}

#[test]
fn depth_examples() {
    let t = DepthThresholds::default();
    assert_eq!(bin_depth_angle(10.0, 8.0, &t).unwrap(), DepthBin::SamePlane);
    assert_eq!(bin_depth_angle(20.0, 5.0, &t).unwrap(), DepthBin::Forward);
    assert_eq!(bin_depth_angle(5.0, 11.0, &t).unwrap(), DepthBin::IntermediateBackward);
    // boundaries go to the inner case
    assert_eq!(bin_depth_angle(13.0, 10.0, &t).unwrap(), DepthBin::SamePlane);
    assert_eq!(bin_depth_angle(20.0, 10.0, &t).unwrap(), DepthBin::IntermediateForward);
    assert_eq!(bin_depth_angle(10.0, 20.0, &t).unwrap(), DepthBin::IntermediateBackward);
}

#[test]
fn threshold_order_is_enforced() {
    assert!(matches!(DepthThresholds::new(10.0, 3.0), Err(Error::Config(_))));
    let bad = DepthThresholds { gamma1: 5.0, gamma2: 1.0 };
    assert!(bin_depth_angle(1.0, 2.0, &bad).is_err());
}

#[test]
fn depth_grid_is_total() {
    let t = DepthThresholds::default();
    let mut counts = std::collections::HashMap::new();
    for i in 0..=50 {
        for j in 0..=50 {
            let bin = bin_depth_angle(i as f64, j as f64, &t).unwrap();
            *counts.entry(bin).or_insert(0) += 1;
        }
    }
    assert_eq!(counts.values().sum::<usize>(), 51 * 51);
    assert_eq!(counts.len(), 5);
}

#[test]
fn image_angle_examples() {
    assert_eq!(image_plane_angle((100.0, 100.0), (200.0, 100.0)).unwrap(), 0.0);
    assert_eq!(image_plane_angle((5.0, 5.0), (5.0, 15.0)).unwrap(), 90.0);
    assert!((image_plane_angle((10.0, 10.0), (0.0, 0.0)).unwrap() - 225.0).abs() < 1e-12);
    assert!(matches!(
        image_plane_angle((3.0, 3.0), (3.0, 3.0)),
        Err(Error::DegenerateGaze(_))
    ));
    assert_eq!(bin_image_angle(45.0), ImageBin::LowerRight);
    assert_eq!(bin_image_angle(90.0), ImageBin::Straight);
    assert_eq!(bin_image_angle(270.0), ImageBin::UpperLeft);
}

#[test]
fn image_bins_match_oracle_for_every_degree() {
    let mut arcs = 0;
    let mut prev = bin_image_angle(359.0);
    for deg in 0..360 {
        let bin = bin_image_angle(f64::from(deg));
        assert_eq!(bin, nearest_centre(f64::from(deg)), "{deg} degrees");
        if bin != prev {
            arcs += 1;
        }
        prev = bin;
    }
    assert_eq!(arcs, 5);
}

#[test]
fn bin_gaze_composes_constituents() {
    let (w, h) = (40, 30);
    let head = PixelBox::new(25, 2, 31, 8).unwrap();
    // right of the eye, same depth
    let flat = DepthMap::new(w, h, vec![12.0; w * h]).unwrap();
    let ann = GazeAnnotation::new((28.0, 5.0), (36.0, 5.0));
    let b = bin_gaze(&ann, &flat, head, &BinningParams::default()).unwrap();
    assert_eq!((b.image, b.depth), (ImageBin::LowerRight, DepthBin::SamePlane));

    // below-left, far deeper than the face
    let two_plane = DepthMap::from_fn(w, h, |r, c| if head.contains(depthgaze::geometry::Pixel::new(r, c)) { 5.0 } else { 40.0 }).unwrap();
    let ann = GazeAnnotation::new((28.0, 5.0), (10.0, 15.0));
    let b = bin_gaze(&ann, &two_plane, head, &BinningParams::default()).unwrap();
    let alpha = image_plane_angle(ann.eye, ann.gaze).unwrap();
    assert_eq!(b.image, bin_image_angle(alpha));
    assert_eq!(b.image, ImageBin::LowerLeft);
    assert_eq!(b.depth, DepthBin::Forward);
    assert_eq!((b.face_depth, b.target_depth), (5.0, 40.0));

    let same = GazeAnnotation::new((28.0, 5.0), (28.0, 5.0));
    assert!(matches!(
        bin_gaze(&same, &flat, head, &BinningParams::default()),
        Err(Error::DegenerateGaze(_))
    ));
}

proptest! {
    #[test]
    fn depth_bins_are_antisymmetric(a in 0.0f64..60.0, b in 0.0f64..60.0, g1 in 0.1f64..5.0, extra in 0.0f64..10.0) {
        let t = DepthThresholds::new(g1, g1 + extra).unwrap();
        prop_assert_eq!(
            bin_depth_angle(a, b, &t).unwrap(),
            bin_depth_angle(b, a, &t).unwrap().mirror()
        );
    }

    #[test]
    fn reversed_gaze_turns_half_circle(
        e in (0.0f64..500.0, 0.0f64..500.0),
        g in (0.0f64..500.0, 0.0f64..500.0),
    ) {
        prop_assume!(e != g);
        let fwd = image_plane_angle(e, g).unwrap();
        let back = image_plane_angle(g, e).unwrap();
        prop_assert!((0.0..360.0).contains(&fwd));
        let diff = (fwd - back).rem_euclid(360.0);
        prop_assert!((diff - 180.0).abs() < 1e-9);
    }

    #[test]
    fn image_bins_match_oracle_everywhere(alpha in 0.0f64..360.0) {
        prop_assert_eq!(bin_image_angle(alpha), nearest_centre(alpha));
    }
}
