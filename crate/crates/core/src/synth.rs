//! Seeded synthetic scenes and annotation sets.

use rand::Rng;

use crate::binning::{GazeAnnotation, ImageBin};
use crate::dataset::AnnotationRecord;
use crate::error::Result;
use crate::geometry::{DepthMap, Intrinsics, PixelBox};
use crate::heatmap::Heatmap;
use crate::io::RgbImage;

/// A depth map with one subject whose gaze target is known.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub depth: DepthMap,
    pub head_box: PixelBox,
    pub annotation: GazeAnnotation,
    pub intrinsics: Intrinsics,
}

/// Bumpy fronto-parallel wall with a subject standing against it.
///
/// The eye sits at the head-box centre and the gaze runs exactly along the
/// centre of a random image-plane bin, so with default intrinsics the
/// target's 3D point lies on the cuboid axis up to pixel rounding and wall
/// relief. Walls are kept at least 20 units deep and relief within
/// `[-1, 1]`, so face and target stay in the same depth plane.
pub fn wall_scene<R: Rng>(rng: &mut R, width: usize, height: usize) -> Scene {
    let wall = rng.random_range(20.0..60.0);
    let relief: Vec<f64> = (0..width * height).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let depth = DepthMap::new(width, height, relief.iter().map(|r| wall + r).collect())
        .expect("positive finite depth");
    loop {
        let size = rng.random_range(3..=width.min(height) / 6 + 3);
        let x0 = rng.random_range(0..=width - size);
        let y0 = rng.random_range(0..=height - size);
        let head_box = PixelBox::new(x0, y0, x0 + size, y0 + size).expect("non-empty box");
        let (row, col) = head_box.center();
        let bin = ImageBin::ALL[rng.random_range(0..ImageBin::ALL.len())];
        let a = bin.center_degrees().to_radians();
        let reach = rng.random_range(size as f64..(width.max(height) as f64));
        // pixel centres sit at +0.5 in continuous raster coordinates
        let eye = (col + 0.5, row + 0.5);
        let gaze = (eye.0 + reach * a.cos(), eye.1 + reach * a.sin());
        let annotation = GazeAnnotation::new(eye, gaze);
        if annotation.validate(width, height).is_err() || head_box.contains(annotation.gaze_pixel()) {
            continue;
        }
        return Scene {
            depth,
            head_box,
            annotation,
            intrinsics: Intrinsics::default_for(width, height),
        };
    }
}

/// Random depth map where each pixel is invalid with probability `p_invalid`.
pub fn random_depth<R: Rng>(rng: &mut R, width: usize, height: usize, p_invalid: f64) -> DepthMap {
    let v = (0..width * height)
        .map(|_| {
            if rng.random_bool(p_invalid) {
                0.0
            } else {
                rng.random_range(0.5..100.0)
            }
        })
        .collect();
    DepthMap::new(width, height, v).expect("valid random depth")
}

/// Single-annotator record with a random head box and a uniform gaze point.
pub fn random_record<R: Rng>(rng: &mut R, name: &str, width: usize, height: usize) -> AnnotationRecord {
    let size = rng.random_range(2..=(width.min(height) / 4).max(2));
    let x0 = rng.random_range(0..=width - size);
    let y0 = rng.random_range(0..=height - size);
    let head_box = PixelBox::new(x0, y0, x0 + size, y0 + size).expect("non-empty box");
    let eye = (
        rng.random_range(x0..x0 + size) as f64,
        rng.random_range(y0..y0 + size) as f64,
    );
    let gaze = (rng.random::<f64>(), rng.random::<f64>());
    AnnotationRecord {
        image_path: name.to_owned(),
        width,
        height,
        head_box,
        eye,
        gaze_points: vec![gaze],
        in_frame: true,
        line: 0,
    }
}

/// `n` records named `img_00000.png`, `img_00001.png`, ...
pub fn random_records<R: Rng>(rng: &mut R, n: usize, width: usize, height: usize) -> Vec<AnnotationRecord> {
    (0..n)
        .map(|i| random_record(rng, &format!("img_{i:05}.png"), width, height))
        .collect()
}

/// Heatmap of independent uniform `[0, 1)` values.
pub fn uniform_heatmap<R: Rng>(rng: &mut R, width: usize, height: usize) -> Heatmap {
    let v = (0..width * height).map(|_| rng.random::<f64>()).collect();
    Heatmap::new(width, height, v).expect("finite values")
}

pub fn random_rgb<R: Rng>(rng: &mut R, width: usize, height: usize) -> RgbImage {
    let v = (0..3 * width * height).map(|_| rng.random::<f64>()).collect();
    RgbImage::new(width, height, v).expect("sample count matches")
}

/// Depth for a record: a wall with the subject's head box pulled forward.
pub fn record_depth<R: Rng>(rng: &mut R, record: &AnnotationRecord) -> Result<DepthMap> {
    let wall: f64 = rng.random_range(20.0..60.0);
    let face = wall - rng.random_range(0.0..15.0);
    let b = record.head_box;
    DepthMap::new(
        record.width,
        record.height,
        (0..record.width * record.height)
            .map(|i| {
                let (r, c) = (i / record.width, i % record.width);
                let base = if (b.y_min..b.y_max).contains(&r) && (b.x_min..b.x_max).contains(&c) {
                    face
                } else {
                    wall
                };
                // multiples of 1/256 survive 16-bit storage exactly
                (base * 256.0).round() / 256.0
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn wall_scene_is_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let s = wall_scene(&mut rng, 40, 32);
            s.annotation.validate(40, 32).unwrap();
            assert!(!s.head_box.contains(s.annotation.gaze_pixel()));
        }
    }

    #[test]
    fn seeded_generation_repeats() {
        let a = random_records(&mut ChaCha8Rng::seed_from_u64(9), 20, 64, 48);
        let b = random_records(&mut ChaCha8Rng::seed_from_u64(9), 20, 64, 48);
        assert_eq!(a, b);
    }
}
