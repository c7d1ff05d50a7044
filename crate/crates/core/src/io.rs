//! Raster I/O: depth maps, masks, heatmaps and RGB images.
//!
//! Depth maps are 16-bit single-channel PGM (`P5`) or PNG; the stored
//! integer times `depth_scale` is the depth, `0` marks invalid pixels.
//! Masks are 8-bit with `0` / `255`. Heatmaps are 16-bit PNG whose range is
//! recorded in a JSON sidecar next to the image.

use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, ImageFormat, Luma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BinaryMask, DepthMap};
use crate::heatmap::Heatmap;

const PNG_MAGIC: &[u8] = b"\x89PNG";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RasterFormat {
    Pgm,
    Png,
}

fn format_for_path(path: &Path) -> Result<RasterFormat> {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("pgm") => Ok(RasterFormat::Pgm),
        Some("png") => Ok(RasterFormat::Png),
        _ => Err(Error::format(path, "unsupported extension (expected .pgm or .png)")),
    }
}

/// Grey raster as read from disk, before interpretation.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayRaster {
    pub width: usize,
    pub height: usize,
    pub max_value: u16,
    pub samples: Vec<u16>,
}

fn parse_pgm(path: &Path, bytes: &[u8]) -> Result<GrayRaster> {
    if !bytes.starts_with(b"P5") {
        return Err(Error::format(path, "not a binary PGM (missing P5 magic)"));
    }
    let mut pos = 2;
    let mut header = [0usize; 3];
    for slot in header.iter_mut() {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|b| *b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err(Error::format(path, "truncated PGM header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *slot = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format(path, "malformed PGM header"))?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(Error::format(path, "malformed PGM header"));
    }
    pos += 1;
    let [width, height, maxval] = header;
    if width == 0 || height == 0 || maxval == 0 || maxval > 65535 {
        return Err(Error::format(path, format!("bad PGM dimensions {width}x{height} maxval {maxval}")));
    }
    let wide = maxval > 255;
    let n = width * height;
    let data = &bytes[pos..];
    let need = if wide { 2 * n } else { n };
    if data.len() < need {
        return Err(Error::format(path, format!("truncated PGM data: {} of {need} bytes", data.len())));
    }
    let samples = if wide {
        data[..need].chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
    } else {
        data[..n].iter().map(|b| u16::from(*b)).collect()
    };
    Ok(GrayRaster {
        width,
        height,
        max_value: maxval as u16,
        samples,
    })
}

fn encode_pgm(raster: &GrayRaster) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n{}\n", raster.width, raster.height, raster.max_value).into_bytes();
    if raster.max_value > 255 {
        for s in &raster.samples {
            out.extend_from_slice(&s.to_be_bytes());
        }
    } else {
        out.extend(raster.samples.iter().map(|s| *s as u8));
    }
    out
}

fn decode_png(path: &Path, bytes: &[u8]) -> Result<GrayRaster> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| Error::format(path, e.to_string()))?;
    let (width, height) = (img.width() as usize, img.height() as usize);
    let (max_value, samples) = match img {
        DynamicImage::ImageLuma16(buf) => (u16::MAX, buf.into_raw()),
        DynamicImage::ImageLuma8(buf) => (255, buf.into_raw().into_iter().map(u16::from).collect()),
        other => {
            return Err(Error::format(
                path,
                format!("expected single-channel grey PNG, found {:?}", other.color()),
            ))
        }
    };
    Ok(GrayRaster {
        width,
        height,
        max_value,
        samples,
    })
}

pub fn read_gray(path: &Path) -> Result<GrayRaster> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(PNG_MAGIC) {
        decode_png(path, &bytes)
    } else if bytes.starts_with(b"P5") {
        parse_pgm(path, &bytes)
    } else {
        Err(Error::format(path, "unsupported format (expected 16-bit PGM or PNG)"))
    }
}

pub fn write_gray(raster: &GrayRaster, path: &Path) -> Result<()> {
    match format_for_path(path)? {
        RasterFormat::Pgm => fs::write(path, encode_pgm(raster)).map_err(|e| Error::io(path, e)),
        RasterFormat::Png => {
            let (w, h) = (raster.width as u32, raster.height as u32);
            let res = if raster.max_value > 255 {
                ImageBuffer::<Luma<u16>, _>::from_raw(w, h, raster.samples.clone())
                    .expect("sample count matches")
                    .save_with_format(path, ImageFormat::Png)
            } else {
                let bytes: Vec<u8> = raster.samples.iter().map(|s| *s as u8).collect();
                ImageBuffer::<Luma<u8>, _>::from_raw(w, h, bytes)
                    .expect("sample count matches")
                    .save_with_format(path, ImageFormat::Png)
            };
            res.map_err(|e| Error::format(path, e.to_string()))
        }
    }
}

fn check_scale(scale: f64) -> Result<()> {
    if scale.is_finite() && scale > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("depth_scale must be positive, got {scale}")))
    }
}

/// Reads a depth raster; stored value `v` becomes `v * depth_scale`.
pub fn load_depth(path: &Path, depth_scale: f64) -> Result<DepthMap> {
    check_scale(depth_scale)?;
    let r = read_gray(path)?;
    DepthMap::new(
        r.width,
        r.height,
        r.samples.iter().map(|s| f64::from(*s) * depth_scale).collect(),
    )
}

/// Writes a 16-bit depth raster, quantising `d / depth_scale` to the nearest integer.
pub fn save_depth(depth: &DepthMap, path: &Path, depth_scale: f64) -> Result<()> {
    check_scale(depth_scale)?;
    let samples = depth
        .values()
        .iter()
        .map(|d| {
            let q = (d / depth_scale).round();
            if q > f64::from(u16::MAX) {
                Err(Error::InvalidInput(format!(
                    "depth {d} exceeds 16-bit range at scale {depth_scale}"
                )))
            } else {
                Ok(q as u16)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    write_gray(
        &GrayRaster {
            width: depth.width(),
            height: depth.height(),
            max_value: u16::MAX,
            samples,
        },
        path,
    )
}

pub fn save_mask(mask: &BinaryMask, path: &Path) -> Result<()> {
    write_gray(
        &GrayRaster {
            width: mask.width(),
            height: mask.height(),
            max_value: 255,
            samples: mask.bits().iter().map(|b| if *b { 255 } else { 0 }).collect(),
        },
        path,
    )
}

/// Reads an 8-bit mask; any non-zero sample is set.
pub fn load_mask(path: &Path) -> Result<BinaryMask> {
    let r = read_gray(path)?;
    BinaryMask::new(r.width, r.height, r.samples.iter().map(|s| *s != 0).collect())
}

/// Affine range of a quantised heatmap: `value = offset + q / 65535 * scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatmapSidecar {
    pub scale: f64,
    #[serde(default)]
    pub offset: f64,
}

/// `x_pred.png` -> `x_pred.json`
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Writes a 16-bit PNG plus sidecar. Non-negative maps are normalised by
/// their maximum (offset 0); maps with negative values by their range.
pub fn save_heatmap(h: &Heatmap, path: &Path) -> Result<HeatmapSidecar> {
    let offset = h.min().min(0.0);
    let scale = h.max() - offset;
    let full = f64::from(u16::MAX);
    let samples = h
        .values()
        .iter()
        .map(|v| if scale > 0.0 { ((v - offset) / scale * full).round() as u16 } else { 0 })
        .collect();
    let raster = GrayRaster {
        width: h.width(),
        height: h.height(),
        max_value: u16::MAX,
        samples,
    };
    if format_for_path(path)? != RasterFormat::Png {
        return Err(Error::format(path, "heatmaps are stored as PNG"));
    }
    write_gray(&raster, path)?;
    let sidecar = HeatmapSidecar { scale, offset };
    let side = sidecar_path(path);
    let json = serde_json::to_string_pretty(&sidecar).expect("plain struct");
    fs::write(&side, json).map_err(|e| Error::io(&side, e))?;
    Ok(sidecar)
}

/// Reads a heatmap; without a sidecar the range defaults to `[0, 1]`.
pub fn load_heatmap(path: &Path) -> Result<Heatmap> {
    let r = read_gray(path)?;
    let side = sidecar_path(path);
    let sidecar = if side.is_file() {
        let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(&side, e.to_string()))?
    } else {
        HeatmapSidecar {
            scale: 1.0,
            offset: 0.0,
        }
    };
    let full = f64::from(r.max_value);
    Heatmap::new(
        r.width,
        r.height,
        r.samples
            .iter()
            .map(|q| sidecar.offset + f64::from(*q) / full * sidecar.scale)
            .collect(),
    )
}

/// Planar RGB image with channels in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    /// `3 x H x W`, channel-major.
    pub planes: Vec<f64>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, planes: Vec<f64>) -> Result<Self> {
        if planes.len() != 3 * width * height {
            return Err(Error::Dimension(format!(
                "RGB image {width}x{height} needs {} samples, got {}",
                3 * width * height,
                planes.len()
            )));
        }
        Ok(RgbImage {
            width,
            height,
            planes,
        })
    }

    pub fn plane(&self, channel: usize) -> &[f64] {
        let n = self.width * self.height;
        &self.planes[channel * n..(channel + 1) * n]
    }
}

pub fn load_rgb(path: &Path) -> Result<RgbImage> {
    let img = image::open(path).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        e => Error::format(path, e.to_string()),
    })?;
    let rgb = img.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let mut planes = vec![0.0; 3 * w * h];
    for (i, px) in rgb.pixels().enumerate() {
        for c in 0..3 {
            planes[c * w * h + i] = f64::from(px.0[c]) / 255.0;
        }
    }
    RgbImage::new(w, h, planes)
}

pub fn save_rgb(img: &RgbImage, path: &Path) -> Result<()> {
    let n = img.width * img.height;
    let mut bytes = Vec::with_capacity(3 * n);
    for i in 0..n {
        for c in 0..3 {
            bytes.push((img.planes[c * n + i].clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    image::RgbImage::from_raw(img.width as u32, img.height as u32, bytes)
        .expect("sample count matches")
        .save(path)
        .map_err(|e| Error::format(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_depth_scaling() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.pgm");
        let mut bytes = b"P5\n# relative depth\n2 1\n65535\n".to_vec();
        bytes.extend_from_slice(&32768u16.to_be_bytes());
        bytes.extend_from_slice(&0u16.to_be_bytes());
        fs::write(&p, bytes).unwrap();
        let d = load_depth(&p, 0.001).unwrap();
        assert!((d.get(0, 0) - 32.768).abs() < 1e-12);
        assert!(!d.is_valid(0, 1));
    }

    #[test]
    fn depth_round_trip_both_formats() {
        let dir = tempfile::tempdir().unwrap();
        let d = DepthMap::from_fn(5, 3, |r, c| (r * 5 + c) as f64 * 0.37).unwrap();
        for name in ["d.pgm", "d.png"] {
            let p = dir.path().join(name);
            save_depth(&d, &p, 0.01).unwrap();
            let back = load_depth(&p, 0.01).unwrap();
            for (a, b) in d.values().iter().zip(back.values()) {
                assert!((a - b).abs() <= 0.005 + 1e-12, "{name}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn mask_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = BinaryMask::new(3, 2, vec![true, false, false, true, true, false]).unwrap();
        for name in ["m.png", "m.pgm"] {
            let p = dir.path().join(name);
            save_mask(&m, &p).unwrap();
            assert_eq!(load_mask(&p).unwrap(), m);
            let raw = read_gray(&p).unwrap();
            assert_eq!(raw.max_value, 255);
            assert!(raw.samples.iter().all(|s| *s == 0 || *s == 255));
        }
    }

    #[test]
    fn heatmap_quantisation_bound() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h_pred.png");
        let h = Heatmap::from_fn(8, 8, |r, c| 0.8 * ((r * 8 + c) as f64 / 63.0)).unwrap();
        let side = save_heatmap(&h, &p).unwrap();
        assert_eq!(side.scale, 0.8);
        assert_eq!(read_gray(&p).unwrap().samples.iter().max(), Some(&65535));
        let back = load_heatmap(&p).unwrap();
        for (a, b) in h.values().iter().zip(back.values()) {
            assert!((a - b).abs() <= 0.8 / 65535.0, "{a} vs {b}");
        }
    }

    #[test]
    fn heatmap_with_negative_values() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("n.png");
        let h = Heatmap::new(2, 2, vec![-1.0, 0.5, 2.0, 0.0]).unwrap();
        save_heatmap(&h, &p).unwrap();
        let back = load_heatmap(&p).unwrap();
        for (a, b) in h.values().iter().zip(back.values()) {
            assert!((a - b).abs() <= 3.0 / 65535.0);
        }
        assert_eq!(back.argmax(), h.argmax());
    }

    #[test]
    fn bad_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.pgm");
        fs::write(&p, b"P5\n4 4\n65535\n\x00\x01").unwrap();
        assert!(matches!(load_depth(&p, 1.0), Err(Error::Format { .. })));
        let q = dir.path().join("x.bin");
        fs::write(&q, b"hello").unwrap();
        assert!(matches!(load_depth(&q, 1.0), Err(Error::Format { .. })));
        assert!(matches!(
            load_depth(&dir.path().join("missing.png"), 1.0),
            Err(Error::Io { .. })
        ));
        let rgb = dir.path().join("c.png");
        save_rgb(&RgbImage::new(1, 1, vec![1.0, 0.0, 0.0]).unwrap(), &rgb).unwrap();
        assert!(matches!(load_depth(&rgb, 1.0), Err(Error::Format { .. })));
    }

    #[test]
    fn rgb_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("i.png");
        let img = RgbImage::new(2, 1, vec![0.0, 1.0, 1.0, 0.0, 0.2, 0.6]).unwrap();
        save_rgb(&img, &p).unwrap();
        let back = load_rgb(&p).unwrap();
        for (a, b) in img.planes.iter().zip(&back.planes) {
            assert!((a - b).abs() <= 0.5 / 255.0);
        }
    }
}
