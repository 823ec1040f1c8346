//! Job configuration: an optional versioned JSON file whose fields are
//! overridden by command-line flags.
//!
//! Every field is optional except `schema_version`:
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "scene": "nested-character.json",
//!   "out": "out",
//!   "stem": "hero",
//!   "fine": "256x256x384",
//!   "coarse": "64x64x96",
//!   "proposal": true,
//!   "kernel": 3,
//!   "layers": [{ "name": "garment", "labels": ["cloth", "hair"] }],
//!   "cameras": { "views": 8, "elevation": 0.0, "width": 256, "height": 256, "samples": 512 },
//!   "buffers": ["color", "semantic"],
//!   "background": [0.0, 0.0, 0.0],
//!   "loss_weights": { "lambda_hole": 0.001 },
//!   "metrics": { "samples": 100000, "tau_fraction": 0.005, "granularity": 0.03125, "convention": "squared" },
//!   "resolve": { "step": 0.1, "max_iters": 500, "smooth_weight": 0.001, "nearest": "vertex" },
//!   "seed": 0
//! }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use semsurf_core::extract::LayerDef;
use semsurf_core::grid::{GridSpec, DEFAULT_FINE_RESOLUTION};
use semsurf_core::losses::{LossWeights, Nearest, ResolveParams};
use semsurf_core::metrics::{ChamferConvention, MetricsConfig};
use semsurf_core::proposal::{default_coarse_resolution, ProposalConfig, DEFAULT_KERNEL, DEFAULT_SENTINEL};
use semsurf_core::render::{Camera, DEFAULT_HALF_EXTENT, DEFAULT_SAMPLES};
use semsurf_core::{LabelRegistry, SemanticSet};

use crate::error::{CliError, CliResult};
use crate::images::BufferKind;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// Parses `NXxNYxNZ`, or a single `N` for a cube.
pub fn parse_resolution(s: &str) -> CliResult<[usize; 3]> {
    let parts: Vec<&str> = s.trim().split(['x', 'X']).collect();
    let nums: Vec<usize> = parts
        .iter()
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Config(format!("bad resolution `{s}` (expected e.g. 256x256x384)")))?;
    let res = match nums.as_slice() {
        [n] => [*n; 3],
        [x, y, z] => [*x, *y, *z],
        _ => return Err(CliError::Config(format!("bad resolution `{s}` (expected e.g. 256x256x384)"))),
    };
    if res.iter().any(|&n| n < 2) {
        return Err(CliError::Config(format!("resolution `{s}` needs at least 2 vertices per axis")));
    }
    Ok(res)
}

pub fn format_resolution(r: [usize; 3]) -> String {
    format!("{}x{}x{}", r[0], r[1], r[2])
}

/// Parses `name=label+label`.
pub fn parse_layer(s: &str) -> CliResult<LayerSpec> {
    let (name, labels) = s
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("bad layer `{s}` (expected name=label+label)")))?;
    let labels: Vec<String> = labels.split('+').map(|l| l.trim().to_string()).collect();
    if name.trim().is_empty() || labels.iter().any(String::is_empty) {
        return Err(CliError::Config(format!("bad layer `{s}` (expected name=label+label)")));
    }
    Ok(LayerSpec {
        name: name.trim().to_string(),
        labels,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub name: String,
    pub labels: Vec<String>,
}

impl LayerSpec {
    pub fn resolve(&self, registry: &LabelRegistry) -> CliResult<LayerDef> {
        let names: Vec<&str> = self.labels.iter().map(String::as_str).collect();
        let set = SemanticSet::from_names(self.name.clone(), registry, &names)
            .map_err(|e| CliError::Config(format!("layer `{}`: {e}", self.name)))?;
        Ok(LayerDef {
            name: self.name.clone(),
            set,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSpec {
    pub views: Option<usize>,
    pub azimuths: Option<Vec<f64>>,
    pub elevation: Option<f64>,
    pub width: Option<usize>,
    pub height: Option<usize>,
    pub samples: Option<usize>,
    pub half_extent: Option<f64>,
}

impl CameraSpec {
    /// Overlays `other` on `self`; fields set in `other` win.
    pub fn merged(&self, other: &CameraSpec) -> CameraSpec {
        CameraSpec {
            views: other.views.or(self.views),
            azimuths: other.azimuths.clone().or_else(|| self.azimuths.clone()),
            elevation: other.elevation.or(self.elevation),
            width: other.width.or(self.width),
            height: other.height.or(self.height),
            samples: other.samples.or(self.samples),
            half_extent: other.half_extent.or(self.half_extent),
        }
    }

    /// Cameras at explicit azimuths, or `views` equidistant ones (default 8).
    pub fn cameras(&self) -> CliResult<Vec<Camera>> {
        let width = self.width.unwrap_or(256);
        let height = self.height.unwrap_or(width);
        let elevation = self.elevation.unwrap_or(0.0);
        let azimuths: Vec<f64> = match (&self.azimuths, self.views) {
            (Some(a), _) => a.clone(),
            (None, v) => {
                let n = v.unwrap_or(8);
                (0..n).map(|i| 360.0 * i as f64 / n as f64).collect()
            }
        };
        if azimuths.is_empty() {
            return Err(CliError::Config("at least one view is required".into()));
        }
        let cams: Vec<Camera> = azimuths
            .iter()
            .map(|&az| {
                let mut c = Camera::new(az, elevation, width, height).with_samples(self.samples.unwrap_or(DEFAULT_SAMPLES));
                c.half_extent = self.half_extent.unwrap_or(DEFAULT_HALF_EXTENT);
                c
            })
            .collect();
        for c in &cams {
            c.validate().map_err(CliError::config)?;
        }
        Ok(cams)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ConventionName {
    Squared,
    Unsquared,
}

impl From<ConventionName> for ChamferConvention {
    fn from(c: ConventionName) -> Self {
        match c {
            ConventionName::Squared => ChamferConvention::Squared,
            ConventionName::Unsquared => ChamferConvention::Unsquared,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum NearestName {
    Vertex,
    Surface,
}

impl From<NearestName> for Nearest {
    fn from(n: NearestName) -> Self {
        match n {
            NearestName::Vertex => Nearest::Vertex,
            NearestName::Surface => Nearest::Surface,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSpec {
    pub samples: Option<usize>,
    pub tau_fraction: Option<f64>,
    pub granularity: Option<f64>,
    pub convention: Option<ConventionName>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolveSpec {
    pub step: Option<f64>,
    pub max_iters: Option<usize>,
    pub smooth_weight: Option<f64>,
    pub nearest: Option<NearestName>,
}

/// Partial overrides of [`LossWeights`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSpec {
    pub lambda_lpips: Option<f64>,
    pub lambda_mask: Option<f64>,
    pub lambda_sem: Option<f64>,
    pub lambda_depth: Option<f64>,
    pub lambda_normal: Option<f64>,
    pub lambda_dev: Option<f64>,
    pub lambda_hole: Option<f64>,
    pub lambda_mask_refine: Option<f64>,
    pub lambda_normal_refine: Option<f64>,
    pub lambda_col: Option<f64>,
}

impl WeightSpec {
    pub fn weights(&self) -> CliResult<LossWeights> {
        let d = LossWeights::default();
        let w = LossWeights {
            lambda_lpips: self.lambda_lpips.unwrap_or(d.lambda_lpips),
            lambda_mask: self.lambda_mask.unwrap_or(d.lambda_mask),
            lambda_sem: self.lambda_sem.unwrap_or(d.lambda_sem),
            lambda_depth: self.lambda_depth.unwrap_or(d.lambda_depth),
            lambda_normal: self.lambda_normal.unwrap_or(d.lambda_normal),
            lambda_dev: self.lambda_dev.unwrap_or(d.lambda_dev),
            lambda_hole: self.lambda_hole.unwrap_or(d.lambda_hole),
            lambda_mask_refine: self.lambda_mask_refine.unwrap_or(d.lambda_mask_refine),
            lambda_normal_refine: self.lambda_normal_refine.unwrap_or(d.lambda_normal_refine),
            lambda_col: self.lambda_col.unwrap_or(d.lambda_col),
        };
        w.validate().map_err(CliError::config)?;
        Ok(w)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub schema_version: u32,
    pub scene: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// Output file prefix; defaults to the scene name.
    pub stem: Option<String>,
    pub fine: Option<String>,
    pub coarse: Option<String>,
    pub proposal: Option<bool>,
    pub kernel: Option<usize>,
    pub layers: Option<Vec<LayerSpec>>,
    #[serde(default)]
    pub cameras: CameraSpec,
    pub buffers: Option<Vec<BufferKind>>,
    pub background: Option<[f64; 3]>,
    #[serde(default)]
    pub loss_weights: WeightSpec,
    #[serde(default)]
    pub metrics: MetricsSpec,
    #[serde(default)]
    pub resolve: ResolveSpec,
    pub seed: Option<u64>,
}

impl JobConfig {
    pub fn parse(text: &str) -> CliResult<JobConfig> {
        let c: JobConfig = serde_json::from_str(text).map_err(|e| CliError::Config(format!("config JSON: {e}")))?;
        if c.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported config schema_version {} (expected {CONFIG_SCHEMA_VERSION})",
                c.schema_version
            )));
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> CliResult<JobConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config file {}: {e}", path.display())))?;
        JobConfig::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Loads the file if given, otherwise an empty config.
    pub fn load_or_default(path: Option<&Path>) -> CliResult<JobConfig> {
        match path {
            Some(p) => JobConfig::load(p),
            None => Ok(JobConfig {
                schema_version: CONFIG_SCHEMA_VERSION,
                ..JobConfig::default()
            }),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn out_dir(&self) -> CliResult<PathBuf> {
        self.out
            .clone()
            .ok_or_else(|| CliError::Config("an output directory is required (--out)".into()))
    }

    pub fn scene_path(&self) -> CliResult<PathBuf> {
        self.scene
            .clone()
            .ok_or_else(|| CliError::Config("a scene file is required (--scene)".into()))
    }

    pub fn fine_grid(&self) -> CliResult<GridSpec> {
        let res = match &self.fine {
            Some(s) => parse_resolution(s)?,
            None => DEFAULT_FINE_RESOLUTION,
        };
        GridSpec::character(res).map_err(CliError::config)
    }

    /// Proposal settings, or `None` when disabled.
    pub fn proposal_config(&self, fine: &GridSpec) -> CliResult<Option<ProposalConfig>> {
        if self.proposal == Some(false) {
            return Ok(None);
        }
        let coarse = match &self.coarse {
            Some(s) => parse_resolution(s)?,
            None => default_coarse_resolution(fine.resolution()),
        };
        if coarse.iter().zip(fine.resolution()).any(|(c, f)| *c > f) {
            return Err(CliError::Config(format!(
                "coarse resolution {} exceeds the fine resolution {}",
                format_resolution(coarse),
                format_resolution(fine.resolution())
            )));
        }
        let kernel = self.kernel.unwrap_or(DEFAULT_KERNEL);
        if kernel % 2 == 0 {
            return Err(CliError::Config(format!("kernel must be odd, got {kernel}")));
        }
        Ok(Some(ProposalConfig {
            coarse_resolution: coarse,
            kernel,
            sentinel: DEFAULT_SENTINEL,
        }))
    }

    pub fn layer_defs(&self, registry: &LabelRegistry) -> CliResult<Vec<LayerDef>> {
        match &self.layers {
            Some(specs) => specs.iter().map(|s| s.resolve(registry)).collect(),
            None => Ok(semsurf_core::extract::default_layers(registry)),
        }
    }

    pub fn metrics_config(&self) -> MetricsConfig {
        let d = MetricsConfig::default();
        MetricsConfig {
            samples: self.metrics.samples.unwrap_or(d.samples),
            seed: self.seed(),
            tau_fraction: self.metrics.tau_fraction.unwrap_or(d.tau_fraction),
            granularity: self.metrics.granularity.unwrap_or(d.granularity),
            convention: self.metrics.convention.map(Into::into).unwrap_or(d.convention),
        }
    }

    pub fn resolve_params(&self) -> ResolveParams {
        let d = ResolveParams::default();
        ResolveParams {
            step: self.resolve.step.unwrap_or(d.step),
            max_iters: self.resolve.max_iters.unwrap_or(d.max_iters),
            smooth_weight: self.resolve.smooth_weight.unwrap_or(d.smooth_weight),
            nearest: self.resolve.nearest.map(Into::into).unwrap_or(d.nearest),
        }
    }

    pub fn buffer_kinds(&self) -> Vec<BufferKind> {
        let mut kinds = self.buffers.clone().unwrap_or_else(|| BufferKind::ALL.to_vec());
        kinds.sort();
        kinds.dedup();
        kinds
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolutions() {
        assert_eq!(parse_resolution("256x256x384").unwrap(), [256, 256, 384]);
        assert_eq!(parse_resolution("64").unwrap(), [64; 3]);
        assert!(parse_resolution("1x4x4").is_err());
        assert!(parse_resolution("4x4").is_err());
        assert!(parse_resolution("ax4x4").is_err());
    }

    #[test]
    fn layers() {
        let l = parse_layer("garment=cloth+hair").unwrap();
        assert_eq!(l.labels, vec!["cloth", "hair"]);
        assert!(parse_layer("garment").is_err());
        assert!(parse_layer("g=cloth+").is_err());
        assert!(l.resolve(&LabelRegistry::canonical()).is_ok());
        assert!(parse_layer("g=hat").unwrap().resolve(&LabelRegistry::canonical()).is_err());
    }

    #[test]
    fn defaults_and_validation() {
        let c = JobConfig::load_or_default(None).unwrap();
        assert_eq!(c.seed(), 0);
        let fine = c.fine_grid().unwrap();
        assert_eq!(fine.resolution(), [256, 256, 384]);
        let p = c.proposal_config(&fine).unwrap().unwrap();
        assert_eq!((p.coarse_resolution, p.kernel), ([64, 64, 96], 3));
        let even = JobConfig {
            kernel: Some(4),
            ..c.clone()
        };
        assert!(matches!(even.proposal_config(&fine), Err(CliError::Config(_))));
        let cams = c.cameras.cameras().unwrap();
        assert_eq!(cams.len(), 8);
        assert_eq!(cams[3].azimuth_deg, 135.0);
        assert!(JobConfig::parse(r#"{"schema_version": 2}"#).is_err());
        assert!(JobConfig::parse(r#"{"schema_version": 1, "bogus": 1}"#).is_err());
        let w = JobConfig::parse(r#"{"schema_version": 1, "loss_weights": {"lambda_hole": -1}}"#).unwrap();
        assert!(w.loss_weights.weights().is_err());
    }
}
