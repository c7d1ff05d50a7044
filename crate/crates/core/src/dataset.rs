//! Annotation records and the canonical CSV schema.
//!
//! ```text
//! image_path,img_w,img_h,box_x_min,box_y_min,box_x_max,box_y_max,eye_x,eye_y,gaze_x_norm,gaze_y_norm,in_frame
//! ```
//!
//! Pixel fields are integers, gaze coordinates are normalised to the unit
//! square, `in_frame` is `0` or `1`. Rows sharing `(image_path, head box)`
//! are the same subject seen by several annotators and merge into one
//! record.

use std::collections::HashMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::binning::GazeAnnotation;
use crate::error::{Error, Result};
use crate::geometry::{BinaryMask, PixelBox};

pub const CSV_HEADER: [&str; 12] = [
    "image_path",
    "img_w",
    "img_h",
    "box_x_min",
    "box_y_min",
    "box_x_max",
    "box_y_max",
    "eye_x",
    "eye_y",
    "gaze_x_norm",
    "gaze_y_norm",
    "in_frame",
];

pub const MAX_ANNOTATORS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub image_path: String,
    pub width: usize,
    pub height: usize,
    pub head_box: PixelBox,
    /// Eye position in pixels.
    pub eye: (f64, f64),
    /// Normalised gaze targets, one per annotator.
    pub gaze_points: Vec<(f64, f64)>,
    pub in_frame: bool,
    /// Source line of the first row merged into this record.
    pub line: u64,
}

impl AnnotationRecord {
    /// Annotator-average gaze target, normalised.
    pub fn mean_gaze(&self) -> (f64, f64) {
        let n = self.gaze_points.len() as f64;
        let (sx, sy) = self
            .gaze_points
            .iter()
            .fold((0.0, 0.0), |(ax, ay), (x, y)| (ax + x, ay + y));
        (sx / n, sy / n)
    }

    pub fn eye_normalized(&self) -> (f64, f64) {
        (self.eye.0 / self.width as f64, self.eye.1 / self.height as f64)
    }

    fn to_pixels(&self, (x, y): (f64, f64)) -> (f64, f64) {
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;
        ((x * self.width as f64).clamp(0.0, max_x), (y * self.height as f64).clamp(0.0, max_y))
    }

    /// Pixel-space eye/gaze pair for binning and pseudo-labels, using the
    /// annotator average as the target.
    pub fn gaze_annotation(&self) -> GazeAnnotation {
        let list = (self.gaze_points.len() > 1)
            .then(|| self.gaze_points.iter().map(|g| self.to_pixels(*g)).collect());
        GazeAnnotation {
            eye: self.eye,
            gaze: self.to_pixels(self.mean_gaze()),
            gaze_list: list,
        }
    }

    pub fn head_mask(&self) -> BinaryMask {
        BinaryMask::from_box(self.width, self.height, self.head_box)
    }

    /// File stem of `image_path`, used to name per-record outputs.
    pub fn stem(&self) -> String {
        Path::new(&self.image_path)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| self.image_path.clone())
    }

    /// `<image-stem>_<index>_<suffix>.<ext>`
    pub fn output_name(&self, index: usize, suffix: &str, ext: &str) -> String {
        format!("{}_{index}_{suffix}.{ext}", self.stem())
    }
}

#[derive(Debug, Deserialize)]
struct Row {
    image_path: String,
    img_w: i64,
    img_h: i64,
    box_x_min: i64,
    box_y_min: i64,
    box_x_max: i64,
    box_y_max: i64,
    eye_x: i64,
    eye_y: i64,
    gaze_x_norm: f64,
    gaze_y_norm: f64,
    in_frame: u8,
}

/// A rejected row.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub line: u64,
    pub message: String,
    pub conflict: bool,
}

impl From<Diagnostic> for Error {
    fn from(d: Diagnostic) -> Self {
        if d.conflict {
            Error::MergeConflict {
                line: d.line,
                message: d.message,
            }
        } else {
            Error::Parse {
                line: d.line,
                message: d.message,
            }
        }
    }
}

fn check_row(row: &Row) -> std::result::Result<AnnotationRecord, String> {
    if row.image_path.is_empty() {
        return Err("empty image_path".into());
    }
    if row.img_w <= 0 || row.img_h <= 0 {
        return Err(format!("image size {}x{} must be positive", row.img_w, row.img_h));
    }
    let (w, h) = (row.img_w, row.img_h);
    let in_range = |v: i64, hi: i64| (0..=hi).contains(&v);
    if !(in_range(row.box_x_min, w) && in_range(row.box_x_max, w) && in_range(row.box_y_min, h) && in_range(row.box_y_max, h)) {
        return Err(format!(
            "head box ({}, {})-({}, {}) outside {w}x{h} image",
            row.box_x_min, row.box_y_min, row.box_x_max, row.box_y_max
        ));
    }
    let head_box = PixelBox::new(
        row.box_x_min as usize,
        row.box_y_min as usize,
        row.box_x_max as usize,
        row.box_y_max as usize,
    )
    .map_err(|e| e.to_string())?;
    if !(in_range(row.eye_x, w - 1) && in_range(row.eye_y, h - 1)) {
        return Err(format!("eye ({}, {}) outside {w}x{h} image", row.eye_x, row.eye_y));
    }
    let in_frame = match row.in_frame {
        0 => false,
        1 => true,
        v => return Err(format!("in_frame must be 0 or 1, got {v}")),
    };
    let (gx, gy) = (row.gaze_x_norm, row.gaze_y_norm);
    if !(gx.is_finite() && gy.is_finite()) {
        return Err("gaze coordinates must be finite".into());
    }
    if in_frame && !((0.0..=1.0).contains(&gx) && (0.0..=1.0).contains(&gy)) {
        return Err(format!("gaze ({gx}, {gy}) outside the unit square"));
    }
    Ok(AnnotationRecord {
        image_path: row.image_path.clone(),
        width: w as usize,
        height: h as usize,
        head_box,
        eye: (row.eye_x as f64, row.eye_y as f64),
        gaze_points: vec![(gx, gy)],
        in_frame,
        line: 0,
    })
}

/// Parses every row, returning merged records in first-appearance order
/// together with one diagnostic per rejected row.
pub fn parse_annotations_lenient<R: Read>(reader: R) -> (Vec<AnnotationRecord>, Vec<Diagnostic>) {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records: Vec<AnnotationRecord> = Vec::new();
    let mut diagnostics = Vec::new();
    let mut index: HashMap<(String, PixelBox), usize> = HashMap::new();

    match rdr.headers() {
        Ok(h) if h.iter().map(str::trim).eq(CSV_HEADER) => {}
        Ok(h) => {
            diagnostics.push(Diagnostic {
                line: 1,
                message: format!("unexpected header {:?}", h.iter().collect::<Vec<_>>()),
                conflict: false,
            });
            return (records, diagnostics);
        }
        Err(e) => {
            diagnostics.push(Diagnostic {
                line: 1,
                message: e.to_string(),
                conflict: false,
            });
            return (records, diagnostics);
        }
    }

    let headers = csv::StringRecord::from(CSV_HEADER.to_vec());
    let mut raw = csv::StringRecord::new();
    loop {
        let line = rdr.position().line();
        let row = match rdr.read_record(&mut raw) {
            Ok(false) => break,
            Ok(true) => {
                if raw.len() != CSV_HEADER.len() {
                    Err(format!("expected {} fields, found {}", CSV_HEADER.len(), raw.len()))
                } else {
                    raw.deserialize::<Row>(Some(&headers)).map_err(|e| e.to_string())
                }
            }
            Err(e) => Err(e.to_string()),
        };
        let line = raw.position().map_or(line, |p| p.line());
        let mut rec = match row.and_then(|r| check_row(&r)) {
            Ok(rec) => rec,
            Err(message) => {
                diagnostics.push(Diagnostic {
                    line,
                    message,
                    conflict: false,
                });
                continue;
            }
        };
        rec.line = line;
        let key = (rec.image_path.clone(), rec.head_box);
        match index.get(&key) {
            None => {
                index.insert(key, records.len());
                records.push(rec);
            }
            Some(&i) => {
                let existing = &mut records[i];
                let conflict = if (existing.width, existing.height) != (rec.width, rec.height) {
                    Some("image size differs from earlier row")
                } else if existing.eye != rec.eye {
                    Some("eye position differs from earlier row")
                } else if existing.in_frame != rec.in_frame {
                    Some("in_frame differs from earlier row")
                } else if existing.gaze_points.len() >= MAX_ANNOTATORS {
                    Some("more than 10 annotations for one subject")
                } else {
                    None
                };
                match conflict {
                    Some(msg) => diagnostics.push(Diagnostic {
                        line,
                        message: format!("{msg} (line {}, {} {:?})", existing.line, rec.image_path, rec.head_box),
                        conflict: true,
                    }),
                    None => existing.gaze_points.push(rec.gaze_points[0]),
                }
            }
        }
    }
    (records, diagnostics)
}

/// Strict parse: the first diagnostic becomes the error.
pub fn parse_annotations<R: Read>(reader: R) -> Result<Vec<AnnotationRecord>> {
    let (records, diagnostics) = parse_annotations_lenient(reader);
    match diagnostics.into_iter().next() {
        Some(d) => Err(d.into()),
        None => Ok(records),
    }
}

pub fn parse_annotations_file(path: &Path) -> Result<Vec<AnnotationRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_annotations(std::io::BufReader::new(file))
}

/// Serialises records back to the canonical schema, one row per gaze point.
pub fn write_annotations<W: std::io::Write>(writer: W, records: &[AnnotationRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let wrap = |e: csv::Error| Error::Argument(e.to_string());
    w.write_record(CSV_HEADER).map_err(wrap)?;
    for r in records {
        for (gx, gy) in &r.gaze_points {
            w.write_record([
                r.image_path.clone(),
                r.width.to_string(),
                r.height.to_string(),
                r.head_box.x_min.to_string(),
                r.head_box.y_min.to_string(),
                r.head_box.x_max.to_string(),
                r.head_box.y_max.to_string(),
                (r.eye.0 as i64).to_string(),
                (r.eye.1 as i64).to_string(),
                gx.to_string(),
                gy.to_string(),
                u8::from(r.in_frame).to_string(),
            ])
            .map_err(wrap)?;
        }
    }
    w.flush().map_err(|e| Error::Argument(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub records: Vec<AnnotationRecord>,
    pub split: Split,
}

impl DatasetManifest {
    pub fn load(annotations: &Path, split: Split) -> Result<Self> {
        let records = parse_annotations_file(annotations)?;
        let root = annotations
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default();
        Ok(DatasetManifest {
            root,
            records,
            split,
        })
    }

    pub fn image_path(&self, record: &AnnotationRecord) -> PathBuf {
        self.root.join(&record.image_path)
    }

    /// Indices of records whose image file does not exist.
    pub fn missing_images(&self) -> Vec<usize> {
        self.records
            .iter()
            .enumerate()
            .filter(|(_, r)| !self.image_path(r).is_file())
            .map(|(i, _)| i)
            .collect()
    }
}
