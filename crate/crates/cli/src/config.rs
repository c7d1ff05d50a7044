//! Run configuration: one TOML file, command-line flags override it.

use std::path::{Path, PathBuf};

use depthgaze::binning::{BinningParams, DepthThresholds};
use depthgaze::dism::{CrossSection, CuboidLength, DismParams, DEFAULT_APERTURE};
use depthgaze::fusion::{ModelDims, PipelineParams};
use depthgaze::geometry::Intrinsics;
use depthgaze::heatmap::{DEFAULT_HEATMAP_SIZE, DEFAULT_SIGMA};
use depthgaze::metrics::EvalConfig;
use depthgaze::{Error, Execution, Result};
use serde::{Deserialize, Serialize};

/// Depth PNG/PGM sample value per unit of depth is 256.
pub const DEFAULT_DEPTH_SCALE: f64 = 1.0 / 256.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntrinsicsConfig {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Depth units per stored sample.
    pub depth_scale: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub sigma: f64,
    /// `[width, height]` of predicted and ground-truth heatmaps.
    pub heatmap_size: [usize; 2],
    /// `[rows, cols]` of the fusion feature grid.
    pub pool_target: [usize; 2],
    pub seed: u64,
    /// Not recorded in run sidecars so reruns elsewhere hash the same.
    #[serde(skip_serializing)]
    pub out_dir: PathBuf,
    pub head_exclusion: bool,
    pub aperture: f64,
    /// Fixed cuboid length; absent means reach the far end of the scene.
    pub cuboid_length: Option<f64>,
    /// Half-size of the target depth window.
    pub target_window: usize,
    /// 0 uses every core.
    #[serde(skip_serializing)]
    pub jobs: usize,
    /// Absent means `fx = fy = W`, principal point at the image centre.
    pub intrinsics: Option<IntrinsicsConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            depth_scale: DEFAULT_DEPTH_SCALE,
            gamma1: 3.0,
            gamma2: 10.0,
            sigma: DEFAULT_SIGMA,
            heatmap_size: [DEFAULT_HEATMAP_SIZE.0, DEFAULT_HEATMAP_SIZE.1],
            pool_target: [4, 4],
            seed: 0,
            out_dir: PathBuf::from("out"),
            head_exclusion: true,
            aperture: DEFAULT_APERTURE,
            cuboid_length: None,
            target_window: 2,
            jobs: 0,
            intrinsics: None,
        }
    }
}

/// Flag values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out_dir: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
    pub depth_scale: Option<f64>,
    pub sigma: Option<f64>,
    pub gamma1: Option<f64>,
    pub gamma2: Option<f64>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Loads the file (or defaults), applies flags, validates the result.
    pub fn resolve(path: Option<&Path>, o: &Overrides) -> Result<Self> {
        let mut c = match path {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        if let Some(v) = &o.out_dir {
            c.out_dir = v.clone();
        }
        c.jobs = o.jobs.unwrap_or(c.jobs);
        c.seed = o.seed.unwrap_or(c.seed);
        c.depth_scale = o.depth_scale.unwrap_or(c.depth_scale);
        c.sigma = o.sigma.unwrap_or(c.sigma);
        c.gamma1 = o.gamma1.unwrap_or(c.gamma1);
        c.gamma2 = o.gamma2.unwrap_or(c.gamma2);
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        positive("depth_scale", self.depth_scale)?;
        positive("sigma", self.sigma)?;
        if self.heatmap_size.contains(&0) || self.pool_target.contains(&0) {
            return Err(Error::Config("heatmap_size and pool_target must be positive".into()));
        }
        if self.pool_target[0] > self.heatmap_size[1] || self.pool_target[1] > self.heatmap_size[0] {
            return Err(Error::Config("pool_target cannot exceed heatmap_size".into()));
        }
        if let Some(k) = self.intrinsics {
            Intrinsics::new(k.fx, k.fy, k.cx, k.cy).map_err(|e| Error::Config(e.to_string()))?;
        }
        self.dism_params()?.validate()
    }

    pub fn thresholds(&self) -> Result<DepthThresholds> {
        DepthThresholds::new(self.gamma1, self.gamma2).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn dism_params(&self) -> Result<DismParams> {
        Ok(DismParams {
            binning: BinningParams {
                thresholds: self.thresholds()?,
                target_radius: self.target_window,
            },
            length: self.cuboid_length.map_or(CuboidLength::SceneExtent, CuboidLength::Fixed),
            cross_section: CrossSection::Aperture(self.aperture),
            head_exclusion: self.head_exclusion,
        })
    }

    pub fn intrinsics(&self) -> Option<Intrinsics> {
        self.intrinsics.map(|k| Intrinsics {
            fx: k.fx,
            fy: k.fy,
            cx: k.cx,
            cy: k.cy,
        })
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            sigma: self.sigma,
            ..EvalConfig::default()
        }
    }

    pub fn pipeline_params(&self) -> Result<PipelineParams> {
        Ok(PipelineParams {
            intrinsics: self.intrinsics(),
            dism: self.dism_params()?,
            heatmap_size: (self.heatmap_size[0], self.heatmap_size[1]),
            sigma: self.sigma,
        })
    }

    pub fn model_dims(&self) -> ModelDims {
        ModelDims {
            grid: (self.pool_target[0], self.pool_target[1]),
            output: (self.heatmap_size[0], self.heatmap_size[1]),
            ..ModelDims::default()
        }
    }

    pub fn execution(&self) -> Execution {
        Execution::with_jobs(self.jobs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn file_values_and_flag_precedence() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.toml");
        std::fs::write(
            &p,
            "gamma1 = 2.0\nsigma = 4.0\ncuboid_length = 12.5\n[intrinsics]\nfx = 50\nfy = 50\ncx = 16\ncy = 12\n",
        )
        .unwrap();
        let o = Overrides {
            sigma: Some(2.5),
            ..Overrides::default()
        };
        let c = RunConfig::resolve(Some(&p), &o).unwrap();
        assert_eq!(c.gamma1, 2.0);
        assert_eq!(c.sigma, 2.5);
        assert_eq!(c.dism_params().unwrap().length, CuboidLength::Fixed(12.5));
        assert_eq!(c.intrinsics().unwrap().cx, 16.0);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RunConfig::from_toml("unknown_key = 1").is_err());
        let o = Overrides {
            gamma1: Some(12.0),
            ..Overrides::default()
        };
        assert!(matches!(RunConfig::resolve(None, &o), Err(Error::Config(_))));
        let o = Overrides {
            sigma: Some(0.0),
            ..Overrides::default()
        };
        assert!(RunConfig::resolve(None, &o).is_err());
        assert!(RunConfig::from_toml("aperture = -1.0").unwrap().validate().is_err());
    }
}
