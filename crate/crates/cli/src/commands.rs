use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use depthgaze::dataset::{self, AnnotationRecord};
use depthgaze::dism::{self, DismWarning};
use depthgaze::fusion::{self, DismSource, MmfModel, PipelineInputs, PipelineWarning, Predictor};
use depthgaze::geometry::{self, DepthMap, Intrinsics};
use depthgaze::heatmap::Heatmap;
use depthgaze::metrics;
use depthgaze::weights::WeightBundle;
use depthgaze::{binning, io, synth, Error};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::RunConfig;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INCOMPLETE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: e.to_string(),
        }
    }
}

fn incomplete(message: String) -> Failure {
    Failure {
        code: EXIT_INCOMPLETE,
        message,
    }
}

type CmdResult = Result<u8, Failure>;

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: format!("{}: {e}", path.display()),
    }
}

fn create_dir(path: &Path) -> Result<(), Failure> {
    fs::create_dir_all(path).map_err(|e| io_err(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).expect("serialisable");
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, Failure> {
    csv::Writer::from_path(path).map_err(|e| Failure {
        code: EXIT_USAGE,
        message: format!("{}: {e}", path.display()),
    })
}

fn csv_fail(path: &Path, e: csv::Error) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: format!("{}: {e}", path.display()),
    }
}

/// Depth for every record: one shared file, or `<stem>.png|pgm` in a directory.
enum DepthSource {
    Shared(DepthMap),
    Dir(PathBuf),
}

impl DepthSource {
    fn open(path: &Path, scale: f64) -> Result<Self, Failure> {
        if path.is_dir() {
            Ok(DepthSource::Dir(path.to_path_buf()))
        } else {
            Ok(DepthSource::Shared(io::load_depth(path, scale)?))
        }
    }

    fn load(&self, record: &AnnotationRecord, scale: f64) -> depthgaze::Result<DepthMap> {
        let depth = match self {
            DepthSource::Shared(d) => d.clone(),
            DepthSource::Dir(dir) => {
                let stem = record.stem();
                let path = ["png", "pgm"]
                    .iter()
                    .map(|ext| dir.join(format!("{stem}.{ext}")))
                    .find(|p| p.is_file())
                    .ok_or_else(|| Error::Argument(format!("no depth map for {stem} in {}", dir.display())))?;
                io::load_depth(&path, scale)?
            }
        };
        if (depth.width(), depth.height()) != (record.width, record.height) {
            return Err(Error::Dimension(format!(
                "depth is {}x{}, record declares {}x{}",
                depth.width(),
                depth.height(),
                record.width,
                record.height
            )));
        }
        Ok(depth)
    }
}

fn intrinsics_for(cfg: &RunConfig, w: usize, h: usize) -> Intrinsics {
    cfg.intrinsics().unwrap_or_else(|| Intrinsics::default_for(w, h))
}

pub fn project(cfg: &RunConfig, depth_path: &Path, out: Option<&Path>) -> CmdResult {
    let depth = io::load_depth(depth_path, cfg.depth_scale)?;
    let k = intrinsics_for(cfg, depth.width(), depth.height());
    k.validate_for(depth.width(), depth.height())?;
    let cloud = geometry::project_depth(&depth, &k);
    let out = match out {
        Some(p) => p.to_path_buf(),
        None => {
            create_dir(&cfg.out_dir)?;
            let stem = depth_path.file_stem().unwrap_or_default().to_string_lossy();
            cfg.out_dir.join(format!("{stem}.xyz"))
        }
    };
    let file = fs::File::create(&out).map_err(|e| io_err(&out, e))?;
    let mut w = BufWriter::new(file);
    for p in &cloud.points {
        writeln!(w, "{} {} {}", p.x, p.y, p.z).map_err(|e| io_err(&out, e))?;
    }
    w.flush().map_err(|e| io_err(&out, e))?;
    if cloud.is_empty() {
        eprintln!("warning: {} has no valid depth, wrote an empty point file", depth_path.display());
    }
    println!("{} points -> {}", cloud.len(), out.display());
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct DismEntry {
    index: usize,
    image_path: String,
    file: Option<String>,
    image_bin: Option<binning::ImageBin>,
    depth_bin: Option<binning::DepthBin>,
    captured: usize,
    warning: Option<DismWarning>,
    error: Option<String>,
}

#[derive(Serialize)]
struct DismRun<'a> {
    config: &'a RunConfig,
    ok: usize,
    warn: usize,
    err: usize,
    records: Vec<DismEntry>,
}

pub fn dism_gen(cfg: &RunConfig, annotations: &Path, depth: &Path) -> CmdResult {
    let records = dataset::parse_annotations_file(annotations)?;
    let source = DepthSource::open(depth, cfg.depth_scale)?;
    let params = cfg.dism_params()?;
    let indexed: Vec<(usize, &AnnotationRecord)> = records.iter().enumerate().collect();
    let outputs = cfg.execution().map(&indexed, |(_, r)| {
        let d = source.load(r, cfg.depth_scale)?;
        let k = intrinsics_for(cfg, d.width(), d.height());
        dism::generate_dism(&d, r.head_box, &r.gaze_annotation(), &k, &params)
    });
    create_dir(&cfg.out_dir)?;
    let (mut ok, mut warn, mut err) = (0, 0, 0);
    let mut entries = Vec::with_capacity(records.len());
    for ((i, r), out) in indexed.into_iter().zip(outputs) {
        let mut entry = DismEntry {
            index: i,
            image_path: r.image_path.clone(),
            file: None,
            image_bin: None,
            depth_bin: None,
            captured: 0,
            warning: None,
            error: None,
        };
        match out {
            Ok(o) => {
                let name = r.output_name(i, "dism", "png");
                io::save_mask(&o.mask, &cfg.out_dir.join(&name))?;
                entry.file = Some(name);
                entry.image_bin = o.bins.map(|b| b.image);
                entry.depth_bin = o.bins.map(|b| b.depth);
                entry.captured = o.captured;
                entry.warning = o.warning;
                if o.warning.is_some() {
                    warn += 1;
                } else {
                    ok += 1;
                }
            }
            Err(e) => {
                eprintln!("record {i} ({}): {e}", r.image_path);
                entry.error = Some(e.to_string());
                err += 1;
            }
        }
        entries.push(entry);
    }
    write_json(
        &cfg.out_dir.join("dism_run.json"),
        &DismRun {
            config: cfg,
            ok,
            warn,
            err,
            records: entries,
        },
    )?;
    println!("{ok} ok, {warn} warn, {err} err");
    Ok(if err > 0 { EXIT_INCOMPLETE } else { EXIT_OK })
}

pub fn bin(cfg: &RunConfig, annotations: &Path, depth: &Path) -> CmdResult {
    let records = dataset::parse_annotations_file(annotations)?;
    let source = DepthSource::open(depth, cfg.depth_scale)?;
    let params = cfg.dism_params()?.binning;
    let results = cfg.execution().map(&records, |r| {
        let d = source.load(r, cfg.depth_scale)?;
        binning::bin_gaze(&r.gaze_annotation(), &d, r.head_box, &params)
    });
    create_dir(&cfg.out_dir)?;
    let path = cfg.out_dir.join("bins.csv");
    let mut w = csv_writer(&path)?;
    w.write_record(["index", "image_path", "theta_xy", "theta_d", "note"])
        .map_err(|e| csv_fail(&path, e))?;
    let mut failed = 0;
    for (i, (r, res)) in records.iter().zip(results).enumerate() {
        let idx = i.to_string();
        let row = match res {
            Ok(b) => [idx, r.image_path.clone(), b.image.to_string(), b.depth.to_string(), String::new()],
            Err(e) => {
                failed += 1;
                [idx, r.image_path.clone(), "error".into(), "error".into(), e.to_string()]
            }
        };
        w.write_record(&row).map_err(|e| csv_fail(&path, e))?;
    }
    w.flush().map_err(|e| io_err(&path, e))?;
    println!("{} binned, {failed} error -> {}", records.len() - failed, path.display());
    Ok(EXIT_OK)
}

pub fn eval(cfg: &RunConfig, annotations: &Path, predictions: &Path, per_record: bool) -> CmdResult {
    let records = dataset::parse_annotations_file(annotations)?;
    let paths: Vec<PathBuf> = records
        .iter()
        .enumerate()
        .map(|(i, r)| predictions.join(r.output_name(i, "pred", "png")))
        .collect();
    let loaded: Vec<depthgaze::Result<Heatmap>> = cfg.execution().map(&paths, |p| io::load_heatmap(p));
    let mut samples = Vec::with_capacity(records.len());
    let mut missing = Vec::new();
    for (i, (r, h)) in records.iter().zip(loaded).enumerate() {
        match h {
            Ok(h) => samples.push((h, r.clone())),
            Err(e) => {
                eprintln!("record {i} ({}): missing prediction: {e}", r.image_path);
                missing.push(i);
            }
        }
    }
    if samples.is_empty() {
        return Err(incomplete("no prediction could be loaded".into()));
    }
    let per = metrics::evaluate_records(&samples, &cfg.eval_config(), cfg.execution());
    let report = metrics::summarize(&per);
    create_dir(&cfg.out_dir)?;
    write_json(&cfg.out_dir.join("report.json"), &report)?;
    if per_record {
        let path = cfg.out_dir.join("metrics.csv");
        let mut w = csv_writer(&path)?;
        for m in &per {
            w.serialize(m).map_err(|e| csv_fail(&path, e))?;
        }
        w.flush().map_err(|e| io_err(&path, e))?;
    }
    println!("{}", serde_json::to_string(&report).expect("serialisable"));
    if missing.is_empty() {
        Ok(EXIT_OK)
    } else {
        Err(incomplete(format!("{} record(s) lack a prediction: {missing:?}", missing.len())))
    }
}

#[derive(Serialize)]
struct PointRow {
    index: usize,
    image_path: String,
    x: Option<f64>,
    y: Option<f64>,
    note: String,
}

pub fn pipeline(
    cfg: &RunConfig,
    annotations: &Path,
    depth: &Path,
    weights: &str,
    images: Option<&Path>,
    dism_dir: Option<&Path>,
) -> CmdResult {
    let predictor = if weights == "baseline" {
        Predictor::Baseline
    } else {
        let bundle = WeightBundle::load(Path::new(weights))?;
        Predictor::Model(Box::new(MmfModel::from_bundle(&bundle)?))
    };
    let records = dataset::parse_annotations_file(annotations)?;
    let source = DepthSource::open(depth, cfg.depth_scale)?;
    let image_root = images
        .map(Path::to_path_buf)
        .unwrap_or_else(|| annotations.parent().unwrap_or(Path::new(".")).to_path_buf());
    let params = cfg.pipeline_params()?;
    let indexed: Vec<(usize, &AnnotationRecord)> = records.iter().enumerate().collect();
    let results = cfg.execution().map(&indexed, |(i, r)| {
        let d = source.load(r, cfg.depth_scale)?;
        let ann = r.gaze_annotation();
        let mask = match dism_dir {
            Some(dir) => Some(io::load_mask(&dir.join(r.output_name(*i, "dism", "png")))?),
            None => None,
        };
        let image = match predictor {
            Predictor::Model(_) => Some(io::load_rgb(&image_root.join(&r.image_path))?),
            Predictor::Baseline => None,
        };
        let inputs = PipelineInputs {
            image: image.as_ref(),
            depth: &d,
            head_box: r.head_box,
            dism: mask.as_ref().map_or(DismSource::PseudoLabel(&ann), DismSource::Mask),
        };
        fusion::pipeline_predict(&inputs, &predictor, &params)
    });
    create_dir(&cfg.out_dir)?;
    let path = cfg.out_dir.join("points.csv");
    let mut w = csv_writer(&path)?;
    let mut failed = 0;
    for ((i, r), res) in indexed.into_iter().zip(results) {
        let row = match res {
            Ok(p) => {
                io::save_heatmap(&p.heatmap, &cfg.out_dir.join(r.output_name(i, "pred", "png")))?;
                let note = p
                    .warnings
                    .iter()
                    .map(|w| match w {
                        PipelineWarning::Dism(DismWarning::NoValidDepth) => "no_valid_depth",
                        PipelineWarning::Dism(DismWarning::EmptyLabel) => "empty_label",
                        PipelineWarning::CenterFallback => "center_fallback",
                    })
                    .collect::<Vec<_>>()
                    .join(";");
                PointRow {
                    index: i,
                    image_path: r.image_path.clone(),
                    x: Some(p.point.0),
                    y: Some(p.point.1),
                    note,
                }
            }
            Err(e) => {
                eprintln!("record {i} ({}): {e}", r.image_path);
                failed += 1;
                PointRow {
                    index: i,
                    image_path: r.image_path.clone(),
                    x: None,
                    y: None,
                    note: format!("error: {e}"),
                }
            }
        };
        w.serialize(row).map_err(|e| csv_fail(&path, e))?;
    }
    w.flush().map_err(|e| io_err(&path, e))?;
    println!("{} predicted, {failed} err", records.len() - failed);
    Ok(if failed > 0 { EXIT_INCOMPLETE } else { EXIT_OK })
}

pub fn synth(cfg: &RunConfig, count: usize, width: usize, height: usize, random_predictions: bool) -> CmdResult {
    if width < 8 || height < 8 {
        return Err(Failure {
            code: EXIT_USAGE,
            message: "synthetic images must be at least 8x8".into(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let root = &cfg.out_dir;
    for sub in ["images", "depth", "predictions"] {
        if sub != "predictions" || random_predictions {
            create_dir(&root.join(sub))?;
        }
    }
    let mut records = synth::random_records(&mut rng, count, width, height);
    let [hw, hh] = cfg.heatmap_size;
    for (i, r) in records.iter_mut().enumerate() {
        let stem = r.stem();
        r.image_path = format!("images/{stem}.png");
        let depth = synth::record_depth(&mut rng, r)?;
        io::save_depth(&depth, &root.join("depth").join(format!("{stem}.png")), cfg.depth_scale)?;
        io::save_rgb(&synth::random_rgb(&mut rng, width, height), &root.join(&r.image_path))?;
        if random_predictions {
            let h = synth::uniform_heatmap(&mut rng, hw, hh);
            io::save_heatmap(&h, &root.join("predictions").join(r.output_name(i, "pred", "png")))?;
        }
    }
    let path = root.join("annotations.csv");
    let file = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
    dataset::write_annotations(BufWriter::new(file), &records)?;
    println!("{count} records -> {}", root.display());
    Ok(EXIT_OK)
}

pub fn init_weights(cfg: &RunConfig, out: &Path) -> CmdResult {
    let model = MmfModel::random(cfg.model_dims(), cfg.seed);
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    model.to_bundle().save(out)?;
    println!("seed {} -> {}", cfg.seed, out.display());
    Ok(EXIT_OK)
}
