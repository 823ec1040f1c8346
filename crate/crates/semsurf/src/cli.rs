//! The `semsurf` command line.
//!
//! Every subcommand writes under `--out`:
//!
//! | command     | files                                                                 |
//! |-------------|-----------------------------------------------------------------------|
//! | `extract`   | `<stem>_<layer>.obj`, `<stem>_<layer>.ply`, `manifest.json`, `stats.json`, `timing.json` |
//! | `render`    | `<stem>_<layer>_v<i>_<buffer>.png`, `render.json`, `timing.json`        |
//! | `metrics`   | `metrics.json`                                                        |
//! | `gradcheck` | `gradcheck_<loss>.json`                                               |
//! | `resolve`   | `<stem>_resolved.obj`, `<stem>_resolved.ply`, `resolve.json`          |
//! | `demo`      | `nested-character.json`, `two-spheres.json`                           |
//!
//! `timing.json` is the only file holding wall-clock data; everything else is
//! byte-identical across runs and thread counts. `SEMSURF_THREADS` sets the
//! worker count. Exit status is 1 for configuration errors and 2 for
//! failures while running.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use semsurf_core::extract::{extract_character, ExtractConfig, HOLISTIC};
use semsurf_core::losses::{check_collision_loss, check_hole_loss, max_penetration, resolve_collisions, GradCheckReport};
use semsurf_core::metrics::{evaluate_layers, ChamferConvention, LayerReport};
use semsurf_core::proposal::ProposalStats;
use semsurf_core::render::{render_buffers, RenderMode};
use semsurf_core::{LabelRegistry, LayeredCharacter, SemanticSet};

use crate::config::{format_resolution, parse_layer, CameraSpec, ConventionName, JobConfig, NearestName};
use crate::error::{CliError, CliResult};
use crate::images::{write_buffers, BufferKind};
use crate::mesh_io::{export_character, read_mesh, read_obj, write_mesh_pair};
use crate::scene::{load_scene, nested_character, scene_json, two_spheres};
use crate::toys::{collision_pair, penetrating_spheres, random_grid_values};

/// Environment variable overriding the worker thread count.
pub const THREADS_ENV: &str = "SEMSURF_THREADS";
pub const STATS_SCHEMA_VERSION: u32 = 1;
/// Default pass threshold of `gradcheck`.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Parser)]
#[command(name = "semsurf", version, about = "Layered surfaces from semantic implicit fields")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Extract one mesh per layer plus the holistic mesh.
    Extract(ExtractArgs),
    /// Render color, alpha, semantic, depth and normal images per layer and view.
    Render(RenderArgs),
    /// Compare two extracted characters layer by layer.
    Metrics(MetricsArgs),
    /// Check analytic loss gradients against central differences.
    Gradcheck(GradcheckArgs),
    /// Push an outer mesh out of an inner one.
    Resolve(ResolveArgs),
    /// Write the shipped demo scenes.
    Demo(DemoArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// JSON job configuration; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed for every random stream.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SceneArgs {
    /// Scene JSON file.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// Output file prefix (default: scene name).
    #[arg(long)]
    pub stem: Option<String>,
    /// Extra layer as `name=label+label`; replaces the per-label defaults.
    #[arg(long = "layer", value_name = "NAME=LABELS")]
    pub layers: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub scene: SceneArgs,
    /// Fine grid resolution, e.g. 256x256x384.
    #[arg(long, visible_alias = "fine-res")]
    pub fine: Option<String>,
    /// Coarse proposal resolution (default: fine / 4).
    #[arg(long, visible_alias = "coarse-res")]
    pub coarse: Option<String>,
    /// Dilation kernel size (odd).
    #[arg(long)]
    pub kernel: Option<usize>,
    /// Evaluate every fine vertex.
    #[arg(long)]
    pub no_proposal: bool,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub scene: SceneArgs,
    /// Number of equidistant azimuths starting at 0.
    #[arg(long)]
    pub views: Option<usize>,
    /// Explicit azimuth in degrees; repeatable, overrides --views.
    #[arg(long = "azimuth")]
    pub azimuths: Vec<f64>,
    #[arg(long)]
    pub elevation: Option<f64>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    /// Samples per ray.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Half height of the orthographic view.
    #[arg(long)]
    pub half_extent: Option<f64>,
    /// Buffers to write; repeatable (default: all).
    #[arg(long = "buffer", value_enum)]
    pub buffers: Vec<BufferKind>,
    /// Background color as `r,g,b` in [0, 1].
    #[arg(long, value_delimiter = ',', num_args = 3)]
    pub background: Option<Vec<f64>>,
    /// Render only the holistic layer.
    #[arg(long)]
    pub holistic_only: bool,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Directory written by `extract` for the prediction.
    #[arg(long)]
    pub pred: PathBuf,
    /// Directory written by `extract` for the reference.
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// Surface samples per mesh.
    #[arg(long)]
    pub samples: Option<usize>,
    /// F-score threshold as a fraction of the union bounding-box diagonal.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Voxel size as a fraction of the largest union extent.
    #[arg(long)]
    pub granularity: Option<f64>,
    #[arg(long, value_enum)]
    pub convention: Option<ConventionName>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum LossName {
    Hole,
    Collision,
    All,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, value_enum, default_value = "all")]
    pub loss: LossName,
    /// Central-difference step.
    #[arg(long, default_value_t = 1e-5)]
    pub eps: f64,
    /// Hole-loss lattice size per axis.
    #[arg(long, default_value_t = 4)]
    pub res: usize,
    /// Outer vertices of the collision toy.
    #[arg(long, default_value_t = 50)]
    pub vertices: usize,
    /// Largest acceptable relative error.
    #[arg(long, default_value_t = GRADCHECK_TOLERANCE)]
    pub tolerance: f64,
}

#[derive(Debug, Args)]
pub struct ResolveArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Outer mesh (.obj or .ply).
    #[arg(long, required_unless_present = "demo")]
    pub outer: Option<PathBuf>,
    /// Inner mesh (.obj or .ply).
    #[arg(long, required_unless_present = "demo")]
    pub inner: Option<PathBuf>,
    /// Use the concentric penetrating sphere pair.
    #[arg(long, conflicts_with_all = ["outer", "inner"])]
    pub demo: bool,
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    #[arg(long)]
    pub smooth_weight: Option<f64>,
    #[arg(long, value_enum)]
    pub nearest: Option<NearestName>,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses arguments, runs the command and maps errors to exit codes.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match configure_threads().and_then(|_| run(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("semsurf: {e}");
            e.exit_code()
        }
    }
}

fn configure_threads() -> CliResult<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
    // A second call in the same process keeps the existing pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Extract(a) => cmd_extract(&extract_config(&a)?),
        Command::Render(a) => {
            let holistic_only = a.holistic_only;
            cmd_render(&render_config(&a)?, holistic_only)
        }
        Command::Metrics(a) => {
            let cfg = metrics_config(&a)?;
            cmd_metrics(&cfg, &a.pred, &a.reference)
        }
        Command::Gradcheck(a) => {
            let cfg = base_config(&a.common)?;
            cmd_gradcheck(&cfg, &a)
        }
        Command::Resolve(a) => cmd_resolve(&resolve_config(&a)?, &a),
        Command::Demo(a) => cmd_demo(&a.out),
    }
}

fn base_config(c: &CommonArgs) -> CliResult<JobConfig> {
    let mut cfg = JobConfig::load_or_default(c.config.as_deref())?;
    if c.out.is_some() {
        cfg.out = c.out.clone();
    }
    if c.seed.is_some() {
        cfg.seed = c.seed;
    }
    Ok(cfg)
}

fn apply_scene_args(cfg: &mut JobConfig, s: &SceneArgs) -> CliResult<()> {
    if s.scene.is_some() {
        cfg.scene = s.scene.clone();
    }
    if s.stem.is_some() {
        cfg.stem = s.stem.clone();
    }
    if !s.layers.is_empty() {
        cfg.layers = Some(s.layers.iter().map(|l| parse_layer(l)).collect::<CliResult<_>>()?);
    }
    Ok(())
}

pub fn extract_config(a: &ExtractArgs) -> CliResult<JobConfig> {
    let mut cfg = base_config(&a.common)?;
    apply_scene_args(&mut cfg, &a.scene)?;
    if a.fine.is_some() {
        cfg.fine = a.fine.clone();
    }
    if a.coarse.is_some() {
        cfg.coarse = a.coarse.clone();
    }
    if a.kernel.is_some() {
        cfg.kernel = a.kernel;
    }
    if a.no_proposal {
        cfg.proposal = Some(false);
    }
    Ok(cfg)
}

pub fn render_config(a: &RenderArgs) -> CliResult<JobConfig> {
    let mut cfg = base_config(&a.common)?;
    apply_scene_args(&mut cfg, &a.scene)?;
    let flags = CameraSpec {
        views: a.views,
        azimuths: (!a.azimuths.is_empty()).then(|| a.azimuths.clone()),
        elevation: a.elevation,
        width: a.width,
        height: a.height,
        samples: a.samples,
        half_extent: a.half_extent,
    };
    cfg.cameras = cfg.cameras.merged(&flags);
    if !a.buffers.is_empty() {
        cfg.buffers = Some(a.buffers.clone());
    }
    if let Some(bg) = &a.background {
        cfg.background = Some([bg[0], bg[1], bg[2]]);
    }
    Ok(cfg)
}

pub fn metrics_config(a: &MetricsArgs) -> CliResult<JobConfig> {
    let mut cfg = base_config(&a.common)?;
    if a.samples.is_some() {
        cfg.metrics.samples = a.samples;
    }
    if a.tau.is_some() {
        cfg.metrics.tau_fraction = a.tau;
    }
    if a.granularity.is_some() {
        cfg.metrics.granularity = a.granularity;
    }
    if a.convention.is_some() {
        cfg.metrics.convention = a.convention;
    }
    Ok(cfg)
}

pub fn resolve_config(a: &ResolveArgs) -> CliResult<JobConfig> {
    let mut cfg = base_config(&a.common)?;
    if a.step.is_some() {
        cfg.resolve.step = a.step;
    }
    if a.max_iters.is_some() {
        cfg.resolve.max_iters = a.max_iters;
    }
    if a.smooth_weight.is_some() {
        cfg.resolve.smooth_weight = a.smooth_weight;
    }
    if a.nearest.is_some() {
        cfg.resolve.nearest = a.nearest;
    }
    Ok(cfg)
}

fn create_out(cfg: &JobConfig) -> CliResult<PathBuf> {
    let out = cfg.out_dir()?;
    std::fs::create_dir_all(&out).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", out.display())))?;
    Ok(out)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(CliError::runtime)?;
    s.push('\n');
    std::fs::write(path, s).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct Timing<'a> {
    command: &'a str,
    wall_seconds: f64,
    threads: usize,
}

fn write_timing(out: &Path, command: &str, start: Instant) -> CliResult<()> {
    write_json(
        &out.join("timing.json"),
        &Timing {
            command,
            wall_seconds: start.elapsed().as_secs_f64(),
            threads: rayon::current_num_threads(),
        },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct GridInfo {
    pub resolution: String,
    pub min: [f64; 3],
    pub max: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct ManifestLayer {
    pub name: String,
    pub labels: Vec<String>,
    pub obj: String,
    pub ply: String,
    pub vertices: usize,
    pub triangles: usize,
}

/// Index of an extracted character, read back by `metrics`.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub scene: String,
    pub labels: Vec<String>,
    pub fine: GridInfo,
    pub coarse: Option<String>,
    pub layers: Vec<ManifestLayer>,
}

#[derive(Serialize)]
struct StatsRow {
    coarse_evaluations: usize,
    fine_evaluations: usize,
    dense_evaluations: usize,
    total_evaluations: usize,
    reduction_ratio: f64,
}

impl From<&ProposalStats> for StatsRow {
    fn from(s: &ProposalStats) -> Self {
        StatsRow {
            coarse_evaluations: s.coarse_evaluations,
            fine_evaluations: s.fine_evaluations,
            dense_evaluations: s.dense_evaluations,
            total_evaluations: s.total_evaluations(),
            reduction_ratio: s.reduction_ratio(),
        }
    }
}

#[derive(Serialize)]
struct LayerStats {
    name: String,
    vertices: usize,
    triangles: usize,
    #[serde(flatten)]
    evaluations: StatsRow,
}

#[derive(Serialize)]
struct ProposalInfo {
    coarse: String,
    kernel: usize,
    sentinel: f64,
}

#[derive(Serialize)]
struct ExtractStats {
    schema_version: u32,
    scene: String,
    fine: String,
    proposal: Option<ProposalInfo>,
    layers: Vec<LayerStats>,
    total: StatsRow,
}

fn set_labels(set: &SemanticSet, registry: &LabelRegistry) -> Vec<String> {
    set.members()
        .filter_map(|l| registry.name(l).map(str::to_string))
        .collect()
}

pub fn cmd_extract(cfg: &JobConfig) -> CliResult<()> {
    let start = Instant::now();
    let scene = load_scene(&cfg.scene_path()?)?;
    let fine = cfg.fine_grid()?;
    let proposal = cfg.proposal_config(&fine)?;
    let layers = cfg.layer_defs(scene.labels())?;
    if layers.iter().any(|l| l.name == HOLISTIC) {
        return Err(CliError::Config(format!("layer name `{HOLISTIC}` is reserved")));
    }
    cfg.loss_weights.weights()?;
    let out = create_out(cfg)?;
    let stem = cfg.stem.clone().unwrap_or_else(|| scene.name().to_string());
    let (character, report) = extract_character(&scene, &layers, &ExtractConfig { fine, proposal })?;
    export_character(&character, &out, &stem)?;

    let registry = scene.labels();
    let manifest = Manifest {
        schema_version: STATS_SCHEMA_VERSION,
        scene: scene.name().to_string(),
        labels: registry.names().to_vec(),
        fine: GridInfo {
            resolution: format_resolution(fine.resolution()),
            min: fine.min().to_array(),
            max: fine.max().to_array(),
        },
        coarse: proposal.map(|p| format_resolution(p.coarse_resolution)),
        layers: character
            .layers()
            .iter()
            .map(|l| ManifestLayer {
                name: l.name.clone(),
                labels: set_labels(&l.selector, registry),
                obj: format!("{stem}_{}.obj", l.name),
                ply: format!("{stem}_{}.ply", l.name),
                vertices: l.mesh.vertex_count(),
                triangles: l.mesh.triangle_count(),
            })
            .collect(),
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    let stats = ExtractStats {
        schema_version: STATS_SCHEMA_VERSION,
        scene: scene.name().to_string(),
        fine: format_resolution(fine.resolution()),
        proposal: proposal.map(|p| ProposalInfo {
            coarse: format_resolution(p.coarse_resolution),
            kernel: p.kernel,
            sentinel: p.sentinel,
        }),
        layers: character
            .layers()
            .iter()
            .zip(&report.layers)
            .map(|(l, (_, s))| LayerStats {
                name: l.name.clone(),
                vertices: l.mesh.vertex_count(),
                triangles: l.mesh.triangle_count(),
                evaluations: s.into(),
            })
            .collect(),
        total: (&report.total()).into(),
    };
    write_json(&out.join("stats.json"), &stats)?;
    write_timing(&out, "extract", start)?;
    let t = report.total();
    println!(
        "extracted {} layers of `{}` into {} ({} field evaluations, {:.2}x fewer than dense)",
        character.len(),
        scene.name(),
        out.display(),
        t.total_evaluations(),
        t.reduction_ratio()
    );
    Ok(())
}

/// Reads a character written by `extract` from its manifest.
pub fn read_character(dir: &Path) -> CliResult<LayeredCharacter> {
    let path = dir.join("manifest.json");
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let m: Manifest =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let registry = LabelRegistry::new(m.labels.iter().map(String::as_str))
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let res = crate::config::parse_resolution(&m.fine.resolution)?;
    let grid = semsurf_core::GridSpec::new(
        res,
        semsurf_core::Vec3::from_array(m.fine.min),
        semsurf_core::Vec3::from_array(m.fine.max),
    )
    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let coarse = m.coarse.as_deref().map(crate::config::parse_resolution).transpose()?;
    let mut character = LayeredCharacter::new(m.scene.clone(), grid, coarse);
    for l in &m.layers {
        let names: Vec<&str> = l.labels.iter().map(String::as_str).collect();
        let set = SemanticSet::from_names(l.name.clone(), &registry, &names)
            .map_err(|e| CliError::Config(format!("{}: layer `{}`: {e}", path.display(), l.name)))?;
        let mesh = read_obj(&dir.join(&l.obj))?;
        character
            .push(l.name.clone(), set, mesh)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    }
    Ok(character)
}

#[derive(Serialize)]
struct CameraInfo {
    view: String,
    azimuth_deg: f64,
    elevation_deg: f64,
    width: usize,
    height: usize,
    samples: usize,
    half_extent: f64,
}

#[derive(Serialize)]
struct RenderManifest {
    schema_version: u32,
    scene: String,
    background: [f64; 3],
    layers: Vec<String>,
    buffers: Vec<BufferKind>,
    cameras: Vec<CameraInfo>,
    files: Vec<String>,
}

pub fn cmd_render(cfg: &JobConfig, holistic_only: bool) -> CliResult<()> {
    let start = Instant::now();
    let scene = load_scene(&cfg.scene_path()?)?;
    let cameras = cfg.cameras.cameras()?;
    let kinds = cfg.buffer_kinds();
    let background = cfg.background.unwrap_or([0.0; 3]);
    if background.iter().any(|c| !(0.0..=1.0).contains(c)) {
        return Err(CliError::Config("background channels must lie in [0, 1]".into()));
    }
    let mut modes: Vec<(String, RenderMode)> = Vec::new();
    if !holistic_only {
        for d in cfg.layer_defs(scene.labels())? {
            modes.push((d.name.clone(), RenderMode::Set(d.set)));
        }
    }
    modes.push((HOLISTIC.to_string(), RenderMode::Holistic));
    let out = create_out(cfg)?;
    let stem = cfg.stem.clone().unwrap_or_else(|| scene.name().to_string());
    let mut files = Vec::new();
    for (name, mode) in &modes {
        for (i, cam) in cameras.iter().enumerate() {
            let b = render_buffers(cam, &scene, mode)?;
            let written = write_buffers(&b, cam, &kinds, background, &out, &format!("{stem}_{name}"), &format!("v{i}"))?;
            files.extend(written.iter().filter_map(|p| p.file_name()).map(|f| f.to_string_lossy().into_owned()));
        }
    }
    let manifest = RenderManifest {
        schema_version: STATS_SCHEMA_VERSION,
        scene: scene.name().to_string(),
        background,
        layers: modes.iter().map(|(n, _)| n.clone()).collect(),
        buffers: kinds,
        cameras: cameras
            .iter()
            .enumerate()
            .map(|(i, c)| CameraInfo {
                view: format!("v{i}"),
                azimuth_deg: c.azimuth_deg,
                elevation_deg: c.elevation_deg,
                width: c.width,
                height: c.height,
                samples: c.samples,
                half_extent: c.half_extent,
            })
            .collect(),
        files,
    };
    write_json(&out.join("render.json"), &manifest)?;
    write_timing(&out, "render", start)?;
    println!("rendered {} images into {}", manifest.files.len(), out.display());
    Ok(())
}

#[derive(Serialize)]
struct MetricsRow {
    layer: String,
    chamfer: f64,
    voxel_iou: f64,
    fscore: f64,
}

#[derive(Serialize)]
struct MetricsFile {
    schema_version: u32,
    samples: usize,
    seed: u64,
    tau_fraction: f64,
    granularity: f64,
    convention: &'static str,
    rows: Vec<MetricsRow>,
}

fn metrics_file(r: &LayerReport) -> MetricsFile {
    MetricsFile {
        schema_version: STATS_SCHEMA_VERSION,
        samples: r.samples,
        seed: r.seed,
        tau_fraction: r.tau_fraction,
        granularity: r.granularity,
        convention: match r.convention {
            ChamferConvention::Squared => "squared",
            ChamferConvention::Unsquared => "unsquared",
        },
        rows: r
            .rows
            .iter()
            .map(|row| MetricsRow {
                layer: row.layer.clone(),
                chamfer: row.chamfer,
                voxel_iou: row.voxel_iou,
                fscore: row.fscore,
            })
            .collect(),
    }
}

pub fn cmd_metrics(cfg: &JobConfig, pred: &Path, reference: &Path) -> CliResult<()> {
    let mc = cfg.metrics_config();
    let pred = read_character(pred)?;
    let reference = read_character(reference)?;
    let out = create_out(cfg)?;
    let report = evaluate_layers(&pred, &reference, &mc)?;
    write_json(&out.join("metrics.json"), &metrics_file(&report))?;
    println!("{:<12} {:>14} {:>10} {:>10}", "layer", "chamfer", "voxel_iou", "fscore");
    for r in &report.rows {
        println!("{:<12} {:>14.6e} {:>10.6} {:>10.6}", r.layer, r.chamfer, r.voxel_iou, r.fscore);
    }
    Ok(())
}

#[derive(Serialize)]
struct GradcheckFile {
    loss_name: &'static str,
    max_rel_err: f64,
    excluded_coords: Vec<usize>,
    checked: usize,
    worst_coord: Option<usize>,
    eps: f64,
    seed: u64,
    tolerance: f64,
    passed: bool,
}

pub fn cmd_gradcheck(cfg: &JobConfig, a: &GradcheckArgs) -> CliResult<()> {
    if !(a.eps > 0.0 && a.eps.is_finite()) {
        return Err(CliError::Config("--eps must be positive".into()));
    }
    if a.res < 2 || a.vertices == 0 {
        return Err(CliError::Config("--res must be at least 2 and --vertices at least 1".into()));
    }
    let seed = cfg.seed();
    let out = create_out(cfg)?;
    let mut runs: Vec<(&'static str, GradCheckReport)> = Vec::new();
    if matches!(a.loss, LossName::Hole | LossName::All) {
        let values = random_grid_values(a.res, seed);
        runs.push(("hole_loss", check_hole_loss([a.res; 3], &values, a.eps)?));
    }
    if matches!(a.loss, LossName::Collision | LossName::All) {
        let (outer, inner) = collision_pair(a.vertices, seed);
        let mode = cfg.resolve_params().nearest;
        runs.push(("collision_loss", check_collision_loss(&outer, &inner, mode, a.eps)?));
    }
    let mut failed = Vec::new();
    for (name, r) in runs {
        let passed = r.max_rel_err < a.tolerance && r.checked > 0;
        println!(
            "{name}: max_rel_err {:.3e} over {} coordinates ({} excluded) {}",
            r.max_rel_err,
            r.checked,
            r.excluded.len(),
            if passed { "ok" } else { "FAILED" }
        );
        if !passed {
            failed.push(name);
        }
        write_json(
            &out.join(format!("gradcheck_{name}.json")),
            &GradcheckFile {
                loss_name: name,
                max_rel_err: r.max_rel_err,
                excluded_coords: r.excluded,
                checked: r.checked,
                worst_coord: r.worst,
                eps: a.eps,
                seed,
                tolerance: a.tolerance,
                passed,
            },
        )?;
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Runtime(format!("gradient check failed for {}", failed.join(", "))))
    }
}

#[derive(Serialize)]
struct ResolveFile {
    iterations: usize,
    accepted: usize,
    initial_loss: f64,
    final_loss: f64,
    initial_penetration: f64,
    final_penetration: f64,
    loss_trace: Vec<f64>,
}

pub fn cmd_resolve(cfg: &JobConfig, a: &ResolveArgs) -> CliResult<()> {
    let params = cfg.resolve_params();
    let (outer, inner, stem) = if a.demo {
        let (o, i) = penetrating_spheres();
        (o, i, "demo".to_string())
    } else {
        let op = a.outer.as_deref().ok_or_else(|| CliError::Config("--outer is required".into()))?;
        let ip = a.inner.as_deref().ok_or_else(|| CliError::Config("--inner is required".into()))?;
        let stem = op
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "outer".into());
        (read_mesh(op)?, read_mesh(ip)?, stem)
    };
    if !(params.step > 0.0 && params.step.is_finite()) || !(params.smooth_weight >= 0.0) {
        return Err(CliError::Config("resolve step must be positive and smooth weight non-negative".into()));
    }
    let out = create_out(cfg)?;
    let initial_penetration = max_penetration(&outer, &inner, params.nearest)?;
    let outcome = resolve_collisions(&outer, &inner, &params)?;
    let final_penetration = max_penetration(&outcome.mesh, &inner, params.nearest)?;
    write_mesh_pair(&outcome.mesh, &out, &format!("{stem}_resolved"))?;
    write_json(
        &out.join("resolve.json"),
        &ResolveFile {
            iterations: outcome.iterations,
            accepted: outcome.accepted,
            initial_loss: outcome.loss_trace[0],
            final_loss: outcome.final_loss(),
            initial_penetration,
            final_penetration,
            loss_trace: outcome.loss_trace.clone(),
        },
    )?;
    println!(
        "resolved in {} steps ({} accepted): penetration {:.3e} -> {:.3e}",
        outcome.iterations, outcome.accepted, initial_penetration, final_penetration
    );
    Ok(())
}

pub fn cmd_demo(out: &Path) -> CliResult<()> {
    std::fs::create_dir_all(out).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", out.display())))?;
    for scene in [nested_character(), two_spheres()] {
        let path = out.join(format!("{}.json", scene.name()));
        std::fs::write(&path, scene_json(&scene)).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
        println!("{}", path.display());
    }
    Ok(())
}
