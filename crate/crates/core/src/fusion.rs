//! Multi-modal fusion forward pass at toy scale.
//!
//! Scene and depth features are modulated by softmax attention maps that
//! are conditioned on the face embedding and on a pooled mask (pseudo-label
//! for the scene branch, head position for the depth branch). Each
//! modulated map is concatenated with the face embedding, encoded, summed
//! and decoded to a heatmap. Backbones are replaced by pooled linear
//! extractors so the dataflow is exercised without trained weights.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::binning::GazeAnnotation;
use crate::dism::{self, DismParams, DismWarning};
use crate::error::{Error, Result};
use crate::geometry::{BinaryMask, DepthMap, Intrinsics, PixelBox};
use crate::heatmap::{gaussian_heatmap, Heatmap};
use crate::io::RgbImage;
use crate::weights::{Tensor, WeightBundle};

/// Anything sampled on a pixel grid.
pub trait Raster {
    fn raster_width(&self) -> usize;
    fn raster_height(&self) -> usize;
    fn sample(&self, row: usize, col: usize) -> f64;
}

impl Raster for BinaryMask {
    fn raster_width(&self) -> usize {
        self.width()
    }
    fn raster_height(&self) -> usize {
        self.height()
    }
    fn sample(&self, row: usize, col: usize) -> f64 {
        f64::from(u8::from(self.get(row, col)))
    }
}

impl Raster for Heatmap {
    fn raster_width(&self) -> usize {
        self.width()
    }
    fn raster_height(&self) -> usize {
        self.height()
    }
    fn sample(&self, row: usize, col: usize) -> f64 {
        self.get(row, col)
    }
}

impl Raster for DepthMap {
    fn raster_width(&self) -> usize {
        self.width()
    }
    fn raster_height(&self) -> usize {
        self.height()
    }
    fn sample(&self, row: usize, col: usize) -> f64 {
        self.get(row, col)
    }
}

/// Adaptive pooling window `[start, end)` of output cell `i` out of `n`
/// over an input axis of length `len`. Never empty, also when `n > len`.
#[inline]
fn window(i: usize, n: usize, len: usize) -> (usize, usize) {
    (i * len / n, ((i + 1) * len).div_ceil(n))
}

/// Adaptive max pooling to a `grid.0 x grid.1` (rows x cols) grid, flattened row-major.
pub fn pool_flatten<R: Raster + ?Sized>(m: &R, grid: (usize, usize)) -> Result<Vec<f64>> {
    let (h, w) = grid;
    let (height, width) = (m.raster_height(), m.raster_width());
    if h == 0 || w == 0 || height == 0 || width == 0 {
        return Err(Error::Dimension(format!(
            "cannot pool {width}x{height} raster to {w}x{h}"
        )));
    }
    let mut out = Vec::with_capacity(h * w);
    for i in 0..h {
        let (r0, r1) = window(i, h, height);
        for j in 0..w {
            let (c0, c1) = window(j, w, width);
            let mut best = f64::NEG_INFINITY;
            for r in r0..r1 {
                for c in c0..c1 {
                    best = best.max(m.sample(r, c));
                }
            }
            out.push(best);
        }
    }
    Ok(out)
}

/// Adaptive average pooling of a row-major plane.
fn avg_pool(plane: &[f64], width: usize, height: usize, grid: (usize, usize)) -> Vec<f64> {
    let (h, w) = grid;
    let mut out = Vec::with_capacity(h * w);
    for i in 0..h {
        let (r0, r1) = window(i, h, height);
        for j in 0..w {
            let (c0, c1) = window(j, w, width);
            let mut sum = 0.0;
            for r in r0..r1 {
                for c in c0..c1 {
                    sum += plane[r * width + c];
                }
            }
            out.push(sum / ((r1 - r0) * (c1 - c0)) as f64);
        }
    }
    out
}

/// `channels x height x width`, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::Dimension("feature map dims must be positive".into()));
        }
        if values.len() != channels * height * width {
            return Err(Error::Dimension(format!(
                "feature map {channels}x{height}x{width} needs {} values, got {}",
                channels * height * width,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("feature values must be finite".into()));
        }
        Ok(FeatureMap {
            channels,
            height,
            width,
            values,
        })
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.values[(c * self.height + y) * self.width + x]
    }

    /// Appends the face embedding as extra channels, repeated at every cell.
    pub fn concat_face(&self, face: &FaceEmbedding) -> FeatureMap {
        let cells = self.height * self.width;
        let mut values = self.values.clone();
        values.reserve(face.0.len() * cells);
        for f in &face.0 {
            values.extend(std::iter::repeat_n(*f, cells));
        }
        FeatureMap {
            channels: self.channels + face.0.len(),
            height: self.height,
            width: self.width,
            values,
        }
    }

    /// Spatial mean of each channel.
    pub fn average_pool(&self) -> FaceEmbedding {
        let cells = (self.height * self.width) as f64;
        FaceEmbedding(
            self.values
                .chunks_exact(self.height * self.width)
                .map(|c| c.iter().sum::<f64>() / cells)
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaceEmbedding(pub Vec<f64>);

/// Softmax weights over a `height x width` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMap {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

impl AttentionMap {
    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Affine map `y = W x + b` with `W` stored row-major as `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProjection {
    pub out_dim: usize,
    pub in_dim: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LinearProjection {
    pub fn new(out_dim: usize, in_dim: usize, weight: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if weight.len() != out_dim * in_dim || bias.len() != out_dim {
            return Err(Error::Dimension(format!(
                "projection {out_dim}x{in_dim} got {} weights and {} biases",
                weight.len(),
                bias.len()
            )));
        }
        Ok(LinearProjection {
            out_dim,
            in_dim,
            weight,
            bias,
        })
    }

    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        LinearProjection {
            out_dim,
            in_dim,
            weight: vec![0.0; out_dim * in_dim],
            bias: vec![0.0; out_dim],
        }
    }

    /// Uniform in `[-1/sqrt(in), 1/sqrt(in)]`, values exactly representable as `f32`.
    pub fn random<R: Rng>(out_dim: usize, in_dim: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (in_dim as f32).sqrt();
        let mut draw = || f64::from(rng.random_range(-bound..=bound));
        let weight = (0..out_dim * in_dim).map(|_| draw()).collect();
        let bias = (0..out_dim).map(|_| draw()).collect();
        LinearProjection {
            out_dim,
            in_dim,
            weight,
            bias,
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.in_dim {
            return Err(Error::Dimension(format!(
                "projection expects {} inputs, got {}",
                self.in_dim,
                x.len()
            )));
        }
        Ok(self
            .weight
            .chunks_exact(self.in_dim.max(1))
            .take(self.out_dim)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect())
    }

    fn to_tensors(&self, prefix: &str) -> [Tensor; 2] {
        [
            Tensor {
                name: format!("{prefix}.weight"),
                dims: vec![self.out_dim as u32, self.in_dim as u32],
                data: self.weight.iter().map(|v| *v as f32).collect(),
            },
            Tensor {
                name: format!("{prefix}.bias"),
                dims: vec![self.out_dim as u32],
                data: self.bias.iter().map(|v| *v as f32).collect(),
            },
        ]
    }

    fn from_tensors(bundle: &WeightBundle, prefix: &str) -> Result<Self> {
        let get = |suffix: &str| {
            bundle
                .get(&format!("{prefix}.{suffix}"))
                .ok_or_else(|| Error::Weights(format!("missing tensor {prefix}.{suffix}")))
        };
        let (w, b) = (get("weight")?, get("bias")?);
        if w.dims.len() != 2 || b.dims.len() != 1 || b.dims[0] != w.dims[0] {
            return Err(Error::Weights(format!(
                "{prefix}: weight dims {:?} and bias dims {:?} disagree",
                w.dims, b.dims
            )));
        }
        let to64 = |v: &[f32]| v.iter().map(|x| f64::from(*x)).collect::<Vec<_>>();
        LinearProjection::new(w.dims[0] as usize, w.dims[1] as usize, to64(&w.data), to64(&b.data))
            .map_err(|e| Error::Weights(format!("{prefix}: {e}")))
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Softmax over the logits of `proj(face ++ aux)`, shaped to `grid`.
pub fn attention_weights(
    face: &FaceEmbedding,
    aux: &[f64],
    proj: &LinearProjection,
    grid: (usize, usize),
) -> Result<AttentionMap> {
    if proj.in_dim != face.0.len() + aux.len() {
        return Err(Error::Dimension(format!(
            "attention projection takes {} inputs, face + aux give {}",
            proj.in_dim,
            face.0.len() + aux.len()
        )));
    }
    if proj.out_dim != grid.0 * grid.1 {
        return Err(Error::Dimension(format!(
            "attention projection yields {} logits for a {}x{} grid",
            proj.out_dim, grid.0, grid.1
        )));
    }
    let mut input = face.0.clone();
    input.extend_from_slice(aux);
    Ok(AttentionMap {
        height: grid.0,
        width: grid.1,
        values: softmax(&proj.apply(&input)?),
    })
}

/// Channel-broadcast elementwise product.
pub fn modulate(features: &FeatureMap, attn: &AttentionMap) -> Result<FeatureMap> {
    if (features.height, features.width) != (attn.height, attn.width) {
        return Err(Error::Dimension(format!(
            "features {}x{} vs attention {}x{}",
            features.height, features.width, attn.height, attn.width
        )));
    }
    let cells = attn.values.len();
    let values = features
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| v * attn.values[i % cells])
        .collect();
    Ok(FeatureMap {
        values,
        ..features.clone()
    })
}

/// `dec(enc_scene(scene ++ face) + enc_depth(depth ++ face))` as a heatmap
/// of `out_size = (width, height)`.
pub fn fuse(
    scene_mod: &FeatureMap,
    depth_mod: &FeatureMap,
    face: &FaceEmbedding,
    enc_scene: &LinearProjection,
    enc_depth: &LinearProjection,
    dec: &LinearProjection,
    out_size: (usize, usize),
) -> Result<Heatmap> {
    let s = enc_scene.apply(&scene_mod.concat_face(face).values)?;
    let d = enc_depth.apply(&depth_mod.concat_face(face).values)?;
    if s.len() != d.len() {
        return Err(Error::Dimension(format!(
            "encoder outputs differ in size: {} vs {}",
            s.len(),
            d.len()
        )));
    }
    let latent: Vec<f64> = s.iter().zip(&d).map(|(a, b)| a + b).collect();
    let out = dec.apply(&latent)?;
    if out.len() != out_size.0 * out_size.1 {
        return Err(Error::Dimension(format!(
            "decoder yields {} values for a {}x{} heatmap",
            out.len(),
            out_size.0,
            out_size.1
        )));
    }
    Heatmap::new(out_size.0, out_size.1, out)
}

/// Input planes on a common pixel grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneStack {
    pub width: usize,
    pub height: usize,
    pub planes: Vec<Vec<f64>>,
}

impl PlaneStack {
    pub fn new(width: usize, height: usize, planes: Vec<Vec<f64>>) -> Result<Self> {
        if planes.iter().any(|p| p.len() != width * height) {
            return Err(Error::Dimension(format!("planes must all be {width}x{height}")));
        }
        Ok(PlaneStack {
            width,
            height,
            planes,
        })
    }
}

/// Stand-in for a convolutional backbone.
pub trait FeatureExtractor: Send + Sync {
    fn extract(&self, input: &PlaneStack, grid: (usize, usize)) -> Result<FeatureMap>;
}

/// Average-pools every input plane to the feature grid, then applies a
/// per-cell linear map across input channels (a 1x1 convolution).
#[derive(Debug, Clone, PartialEq)]
pub struct PooledLinearExtractor {
    pub proj: LinearProjection,
}

impl FeatureExtractor for PooledLinearExtractor {
    fn extract(&self, input: &PlaneStack, grid: (usize, usize)) -> Result<FeatureMap> {
        if input.planes.len() != self.proj.in_dim {
            return Err(Error::Dimension(format!(
                "extractor takes {} planes, got {}",
                self.proj.in_dim,
                input.planes.len()
            )));
        }
        if grid.0 == 0 || grid.1 == 0 || input.width == 0 || input.height == 0 {
            return Err(Error::Dimension("empty input or feature grid".into()));
        }
        let pooled: Vec<Vec<f64>> = input
            .planes
            .iter()
            .map(|p| avg_pool(p, input.width, input.height, grid))
            .collect();
        let cells = grid.0 * grid.1;
        let mut values = vec![0.0; self.proj.out_dim * cells];
        for cell in 0..cells {
            let x: Vec<f64> = pooled.iter().map(|p| p[cell]).collect();
            for (c, v) in self.proj.apply(&x)?.into_iter().enumerate() {
                values[c * cells + cell] = v;
            }
        }
        FeatureMap::new(self.proj.out_dim, grid.0, grid.1, values)
    }
}

/// Toy-scale dimensions of the fusion model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    /// Scene/depth feature channels.
    pub channels: usize,
    pub face_channels: usize,
    /// Feature grid `(rows, cols)`.
    pub grid: (usize, usize),
    pub latent: usize,
    /// Output heatmap `(width, height)`.
    pub output: (usize, usize),
}

impl Default for ModelDims {
    fn default() -> Self {
        ModelDims {
            channels: 8,
            face_channels: 8,
            grid: (4, 4),
            latent: 16,
            output: (64, 64),
        }
    }
}

pub const SCENE_PLANES: usize = 4;
pub const DEPTH_PLANES: usize = 2;
pub const FACE_PLANES: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct MmfModel {
    pub dims: ModelDims,
    pub scene_extractor: PooledLinearExtractor,
    pub depth_extractor: PooledLinearExtractor,
    pub face_extractor: PooledLinearExtractor,
    /// Attention from face + pooled pseudo-label, modulates scene features.
    pub attn_scene: LinearProjection,
    /// Attention from face + pooled head mask, modulates depth features.
    pub attn_mask: LinearProjection,
    pub enc_scene: LinearProjection,
    pub enc_depth: LinearProjection,
    pub decoder: LinearProjection,
}

/// Inputs of one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct MmfInputs<'a> {
    pub image: &'a RgbImage,
    pub depth: &'a DepthMap,
    pub head_mask: &'a BinaryMask,
    pub face: &'a RgbImage,
    pub dism: &'a BinaryMask,
}

/// Every intermediate of a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct MmfTrace {
    pub scene: FeatureMap,
    pub depth: FeatureMap,
    pub face: FaceEmbedding,
    pub pooled_dism: Vec<f64>,
    pub pooled_head: Vec<f64>,
    pub attn_scene: AttentionMap,
    pub attn_mask: AttentionMap,
    pub scene_mod: FeatureMap,
    pub depth_mod: FeatureMap,
    pub heatmap: Heatmap,
}

/// Scene branch input: RGB plus head-position mask.
pub fn scene_planes(image: &RgbImage, head_mask: &BinaryMask) -> Result<PlaneStack> {
    if (image.width, image.height) != (head_mask.width(), head_mask.height()) {
        return Err(Error::Dimension(format!(
            "image {}x{} vs head mask {}x{}",
            image.width,
            image.height,
            head_mask.width(),
            head_mask.height()
        )));
    }
    let mut planes: Vec<Vec<f64>> = (0..3).map(|c| image.plane(c).to_vec()).collect();
    planes.push(head_mask.bits().iter().map(|b| f64::from(u8::from(*b))).collect());
    PlaneStack::new(image.width, image.height, planes)
}

/// Depth branch input: depth normalised by its maximum, plus pseudo-label.
pub fn depth_planes(depth: &DepthMap, dism: &BinaryMask) -> Result<PlaneStack> {
    if (depth.width(), depth.height()) != (dism.width(), dism.height()) {
        return Err(Error::Dimension(format!(
            "depth {}x{} vs mask {}x{}",
            depth.width(),
            depth.height(),
            dism.width(),
            dism.height()
        )));
    }
    let max = depth.max_value();
    let norm = if max > 0.0 { max } else { 1.0 };
    let planes = vec![
        depth.values().iter().map(|d| d / norm).collect(),
        dism.bits().iter().map(|b| f64::from(u8::from(*b))).collect(),
    ];
    PlaneStack::new(depth.width(), depth.height(), planes)
}

pub fn face_planes(face: &RgbImage) -> Result<PlaneStack> {
    PlaneStack::new(face.width, face.height, (0..3).map(|c| face.plane(c).to_vec()).collect())
}

/// Face crop of `image` inside `head_box`.
pub fn crop(image: &RgbImage, head_box: PixelBox) -> Result<RgbImage> {
    let b = head_box
        .clip(image.width, image.height)
        .ok_or_else(|| Error::DegenerateRegion("head box outside image".into()))?;
    let (w, h) = (b.x_max - b.x_min, b.y_max - b.y_min);
    let mut planes = Vec::with_capacity(3 * w * h);
    for c in 0..3 {
        let src = image.plane(c);
        for r in b.y_min..b.y_max {
            planes.extend_from_slice(&src[r * image.width + b.x_min..r * image.width + b.x_max]);
        }
    }
    RgbImage::new(w, h, planes)
}

impl MmfModel {
    /// Seeded random weights; the same seed always yields the same model.
    pub fn random(dims: ModelDims, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cells = dims.grid.0 * dims.grid.1;
        let enc_in = (dims.channels + dims.face_channels) * cells;
        MmfModel {
            dims,
            scene_extractor: PooledLinearExtractor {
                proj: LinearProjection::random(dims.channels, SCENE_PLANES, &mut rng),
            },
            depth_extractor: PooledLinearExtractor {
                proj: LinearProjection::random(dims.channels, DEPTH_PLANES, &mut rng),
            },
            face_extractor: PooledLinearExtractor {
                proj: LinearProjection::random(dims.face_channels, FACE_PLANES, &mut rng),
            },
            attn_scene: LinearProjection::random(cells, dims.face_channels + cells, &mut rng),
            attn_mask: LinearProjection::random(cells, dims.face_channels + cells, &mut rng),
            enc_scene: LinearProjection::random(dims.latent, enc_in, &mut rng),
            enc_depth: LinearProjection::random(dims.latent, enc_in, &mut rng),
            decoder: LinearProjection::random(dims.output.0 * dims.output.1, dims.latent, &mut rng),
        }
    }

    pub fn forward(&self, inputs: &MmfInputs<'_>) -> Result<MmfTrace> {
        let grid = self.dims.grid;
        let scene = self
            .scene_extractor
            .extract(&scene_planes(inputs.image, inputs.head_mask)?, grid)?;
        let depth = self
            .depth_extractor
            .extract(&depth_planes(inputs.depth, inputs.dism)?, grid)?;
        let face_map = self.face_extractor.extract(&face_planes(inputs.face)?, grid)?;
        let face = face_map.average_pool();
        let pooled_dism = pool_flatten(inputs.dism, grid)?;
        let pooled_head = pool_flatten(inputs.head_mask, grid)?;
        let attn_scene = attention_weights(&face, &pooled_dism, &self.attn_scene, grid)?;
        let attn_mask = attention_weights(&face, &pooled_head, &self.attn_mask, grid)?;
        let scene_mod = modulate(&scene, &attn_scene)?;
        let depth_mod = modulate(&depth, &attn_mask)?;
        let heatmap = fuse(
            &scene_mod,
            &depth_mod,
            &face,
            &self.enc_scene,
            &self.enc_depth,
            &self.decoder,
            self.dims.output,
        )?;
        Ok(MmfTrace {
            scene,
            depth,
            face,
            pooled_dism,
            pooled_head,
            attn_scene,
            attn_mask,
            scene_mod,
            depth_mod,
            heatmap,
        })
    }

    pub fn to_bundle(&self) -> WeightBundle {
        let mut b = WeightBundle::default();
        let (h, w) = self.dims.grid;
        let (ow, oh) = self.dims.output;
        b.push(Tensor {
            name: "meta.grid".into(),
            dims: vec![2],
            data: vec![h as f32, w as f32],
        });
        b.push(Tensor {
            name: "meta.output".into(),
            dims: vec![2],
            data: vec![ow as f32, oh as f32],
        });
        for (prefix, proj) in [
            ("scene_extractor", &self.scene_extractor.proj),
            ("depth_extractor", &self.depth_extractor.proj),
            ("face_extractor", &self.face_extractor.proj),
            ("attn_scene", &self.attn_scene),
            ("attn_mask", &self.attn_mask),
            ("enc_scene", &self.enc_scene),
            ("enc_depth", &self.enc_depth),
            ("decoder", &self.decoder),
        ] {
            for t in proj.to_tensors(prefix) {
                b.push(t);
            }
        }
        b
    }

    /// Rebuilds a model, checking every tensor against the declared shapes.
    pub fn from_bundle(bundle: &WeightBundle) -> Result<Self> {
        let pair = |name: &str| -> Result<(usize, usize)> {
            let t = bundle
                .get(name)
                .ok_or_else(|| Error::Weights(format!("missing tensor {name}")))?;
            match t.data.as_slice() {
                [a, b] if *a >= 1.0 && *b >= 1.0 && a.fract() == 0.0 && b.fract() == 0.0 => {
                    Ok((*a as usize, *b as usize))
                }
                _ => Err(Error::Weights(format!("{name} must hold two positive integers"))),
            }
        };
        let grid = pair("meta.grid")?;
        let output = pair("meta.output")?;
        let proj = |p: &str| LinearProjection::from_tensors(bundle, p);
        let scene = proj("scene_extractor")?;
        let depth = proj("depth_extractor")?;
        let face = proj("face_extractor")?;
        let dims = ModelDims {
            channels: scene.out_dim,
            face_channels: face.out_dim,
            grid,
            latent: 0,
            output,
        };
        let cells = grid.0 * grid.1;
        let enc_scene = proj("enc_scene")?;
        let dims = ModelDims {
            latent: enc_scene.out_dim,
            ..dims
        };
        let enc_in = (dims.channels + dims.face_channels) * cells;
        let model = MmfModel {
            dims,
            scene_extractor: PooledLinearExtractor { proj: scene },
            depth_extractor: PooledLinearExtractor { proj: depth },
            face_extractor: PooledLinearExtractor { proj: face },
            attn_scene: proj("attn_scene")?,
            attn_mask: proj("attn_mask")?,
            enc_scene,
            enc_depth: proj("enc_depth")?,
            decoder: proj("decoder")?,
        };
        let expect = [
            ("scene_extractor", &model.scene_extractor.proj, dims.channels, SCENE_PLANES),
            ("depth_extractor", &model.depth_extractor.proj, dims.channels, DEPTH_PLANES),
            ("face_extractor", &model.face_extractor.proj, dims.face_channels, FACE_PLANES),
            ("attn_scene", &model.attn_scene, cells, dims.face_channels + cells),
            ("attn_mask", &model.attn_mask, cells, dims.face_channels + cells),
            ("enc_scene", &model.enc_scene, dims.latent, enc_in),
            ("enc_depth", &model.enc_depth, dims.latent, enc_in),
            ("decoder", &model.decoder, output.0 * output.1, dims.latent),
        ];
        for (name, p, out_dim, in_dim) in expect {
            if (p.out_dim, p.in_dim) != (out_dim, in_dim) {
                return Err(Error::Weights(format!(
                    "{name} is {}x{}, expected {out_dim}x{in_dim}",
                    p.out_dim, p.in_dim
                )));
            }
        }
        Ok(model)
    }
}

/// Where the pseudo-label comes from.
#[derive(Debug, Clone, Copy)]
pub enum DismSource<'a> {
    /// Generate it from depth and the gaze annotation.
    PseudoLabel(&'a GazeAnnotation),
    /// Use a precomputed mask.
    Mask(&'a BinaryMask),
}

#[derive(Debug, Clone)]
pub enum Predictor {
    /// Gaussian at the pseudo-label centroid, no learned weights.
    Baseline,
    Model(Box<MmfModel>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineParams {
    pub intrinsics: Option<Intrinsics>,
    pub dism: DismParams,
    /// Heatmap `(width, height)` of the baseline predictor.
    pub heatmap_size: (usize, usize),
    pub sigma: f64,
}

impl Default for PipelineParams {
    fn default() -> Self {
        PipelineParams {
            intrinsics: None,
            dism: DismParams::default(),
            heatmap_size: crate::heatmap::DEFAULT_HEATMAP_SIZE,
            sigma: crate::heatmap::DEFAULT_SIGMA,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineWarning {
    Dism(DismWarning),
    /// Empty pseudo-label, prediction fell back to the image centre.
    CenterFallback,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub heatmap: Heatmap,
    /// Normalised `(x, y)` gaze point.
    pub point: (f64, f64),
    pub dism: BinaryMask,
    pub warnings: Vec<PipelineWarning>,
}

#[derive(Debug, Clone, Copy)]
pub struct PipelineInputs<'a> {
    pub image: Option<&'a RgbImage>,
    pub depth: &'a DepthMap,
    pub head_box: PixelBox,
    pub dism: DismSource<'a>,
}

/// Pseudo-label, then either the centroid baseline or the fusion model.
pub fn pipeline_predict(inputs: &PipelineInputs<'_>, predictor: &Predictor, params: &PipelineParams) -> Result<Prediction> {
    let (w, h) = (inputs.depth.width(), inputs.depth.height());
    let k = params.intrinsics.unwrap_or_else(|| Intrinsics::default_for(w, h));
    let mut warnings = Vec::new();
    let dism = match inputs.dism {
        DismSource::PseudoLabel(ann) => {
            let out = dism::generate_dism(inputs.depth, inputs.head_box, ann, &k, &params.dism)?;
            warnings.extend(out.warning.map(PipelineWarning::Dism));
            out.mask
        }
        DismSource::Mask(m) => {
            if (m.width(), m.height()) != (w, h) {
                return Err(Error::Dimension(format!(
                    "mask {}x{} vs depth {w}x{h}",
                    m.width(),
                    m.height()
                )));
            }
            m.clone()
        }
    };
    match predictor {
        Predictor::Baseline => {
            let point = match dism.centroid() {
                Some((row, col)) => (col / w as f64, row / h as f64),
                None => {
                    warnings.push(PipelineWarning::CenterFallback);
                    (0.5, 0.5)
                }
            };
            let (hw, hh) = params.heatmap_size;
            let heatmap = gaussian_heatmap(point, hw, hh, params.sigma)?;
            Ok(Prediction {
                heatmap,
                point,
                dism,
                warnings,
            })
        }
        Predictor::Model(model) => {
            let image = inputs
                .image
                .ok_or_else(|| Error::Argument("the fusion model needs the scene image".into()))?;
            let head_mask = BinaryMask::from_box(w, h, inputs.head_box);
            let face = crop(image, inputs.head_box)?;
            let trace = model.forward(&MmfInputs {
                image,
                depth: inputs.depth,
                head_mask: &head_mask,
                face: &face,
                dism: &dism,
            })?;
            let point = trace.heatmap.peak_point();
            Ok(Prediction {
                heatmap: trace.heatmap,
                point,
                dism,
                warnings,
            })
        }
    }
}
