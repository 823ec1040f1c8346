//! JSON scene files and the two shipped demo scenes.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "name": "two-spheres",
//!   "labels": ["body", "cloth"],
//!   "beta_sem": 0.05,
//!   "beta_den": 0.02,
//!   "sigma_max": 50.0,
//!   "primitives": [
//!     {
//!       "shape": { "type": "sphere", "radius": 0.3 },
//!       "center": [-0.18, 0.0, 0.0],
//!       "rotation": [1.0, 0.0, 0.0, 0.0],
//!       "shell": null,
//!       "label": "body",
//!       "color": [0.96, 0.8, 0.69]
//!     }
//!   ]
//! }
//! ```
//!
//! Shapes: `sphere {radius}`, `box {half_extents: [x, y, z]}`,
//! `capsule {radius, half_length}` (along local z), `torus {major_radius,
//! minor_radius}` (in the local xy plane). `rotation` is an optional unit
//! quaternion `[w, x, y, z]`; `shell` optionally hollows the shape into a
//! wall of that half-thickness around its surface. Temperatures default to
//! 0.05 / 0.02 and the peak density to 50 when omitted.

use std::path::Path;

use serde::{Deserialize, Serialize};

use semsurf_core::field::{DEFAULT_BETA_DEN, DEFAULT_BETA_SEM, DEFAULT_SIGMA_MAX};
use semsurf_core::math::Rotation;
use semsurf_core::{ImplicitScene, LabelRegistry, Primitive, Shape, Vec3};

use crate::error::{CliError, CliResult};

pub const SCENE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShapeSpec {
    Sphere { radius: f64 },
    Box { half_extents: [f64; 3] },
    Capsule { radius: f64, half_length: f64 },
    Torus { major_radius: f64, minor_radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrimitiveSpec {
    pub shape: ShapeSpec,
    pub center: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation: Option<[f64; 4]>,
    #[serde(default)]
    pub shell: Option<f64>,
    pub label: String,
    pub color: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFile {
    pub schema_version: u32,
    pub name: String,
    pub labels: Vec<String>,
    #[serde(default = "default_beta_sem")]
    pub beta_sem: f64,
    #[serde(default = "default_beta_den")]
    pub beta_den: f64,
    #[serde(default = "default_sigma_max")]
    pub sigma_max: f64,
    pub primitives: Vec<PrimitiveSpec>,
}

fn default_beta_sem() -> f64 {
    DEFAULT_BETA_SEM
}

fn default_beta_den() -> f64 {
    DEFAULT_BETA_DEN
}

fn default_sigma_max() -> f64 {
    DEFAULT_SIGMA_MAX
}

impl SceneFile {
    pub fn to_scene(&self) -> CliResult<ImplicitScene> {
        if self.schema_version != SCENE_SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported scene schema_version {} (expected {SCENE_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let labels = LabelRegistry::new(self.labels.iter().map(String::as_str)).map_err(CliError::config)?;
        let mut prims = Vec::with_capacity(self.primitives.len());
        for (i, p) in self.primitives.iter().enumerate() {
            let label = labels
                .get(&p.label)
                .ok_or_else(|| CliError::Config(format!("primitive {i}: unknown label `{}`", p.label)))?;
            let shape = match p.shape {
                ShapeSpec::Sphere { radius } => Shape::Sphere { radius },
                ShapeSpec::Box { half_extents } => Shape::Box {
                    half_extents: Vec3::from_array(half_extents),
                },
                ShapeSpec::Capsule { radius, half_length } => Shape::Capsule { radius, half_length },
                ShapeSpec::Torus {
                    major_radius,
                    minor_radius,
                } => Shape::Torus {
                    major_radius,
                    minor_radius,
                },
            };
            let mut prim = Primitive::new(shape, Vec3::from_array(p.center), label, p.color);
            if let Some([w, x, y, z]) = p.rotation {
                let r = Rotation::from_quaternion(w, x, y, z)
                    .ok_or_else(|| CliError::Config(format!("primitive {i}: rotation quaternion is zero or not finite")))?;
                prim = prim.with_rotation(r);
            }
            if let Some(t) = p.shell {
                prim = prim.with_shell(t);
            }
            prims.push(prim);
        }
        ImplicitScene::new(self.name.clone(), labels, prims, self.beta_sem, self.beta_den, self.sigma_max)
            .map_err(CliError::config)
    }

    pub fn from_scene(scene: &ImplicitScene) -> SceneFile {
        let labels = scene.labels();
        SceneFile {
            schema_version: SCENE_SCHEMA_VERSION,
            name: scene.name().to_string(),
            labels: labels.names().to_vec(),
            beta_sem: scene.beta_sem(),
            beta_den: scene.beta_den(),
            sigma_max: scene.sigma_max(),
            primitives: scene
                .primitives()
                .iter()
                .map(|p| PrimitiveSpec {
                    shape: match p.shape {
                        Shape::Sphere { radius } => ShapeSpec::Sphere { radius },
                        Shape::Box { half_extents } => ShapeSpec::Box {
                            half_extents: half_extents.to_array(),
                        },
                        Shape::Capsule { radius, half_length } => ShapeSpec::Capsule { radius, half_length },
                        Shape::Torus {
                            major_radius,
                            minor_radius,
                        } => ShapeSpec::Torus {
                            major_radius,
                            minor_radius,
                        },
                    },
                    center: p.center.to_array(),
                    rotation: (!p.rotation.is_identity()).then(|| p.rotation.quaternion()),
                    shell: p.shell,
                    label: labels.name(p.label).unwrap_or_default().to_string(),
                    color: p.color,
                })
                .collect(),
        }
    }
}

pub fn parse_scene(text: &str) -> CliResult<ImplicitScene> {
    let file: SceneFile = serde_json::from_str(text).map_err(|e| CliError::Config(format!("scene JSON: {e}")))?;
    file.to_scene()
}

pub fn load_scene(path: &Path) -> CliResult<ImplicitScene> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read scene file {}: {e}", path.display())))?;
    parse_scene(&text).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn scene_json(scene: &ImplicitScene) -> String {
    let mut s = serde_json::to_string_pretty(&SceneFile::from_scene(scene)).expect("scene serializes");
    s.push('\n');
    s
}

pub const SKIN: [f64; 3] = [0.96, 0.8, 0.69];
pub const CLOTH: [f64; 3] = [0.2, 0.35, 0.8];
pub const HAIR: [f64; 3] = [0.35, 0.2, 0.1];

/// Body sphere inside a closed cloth shell, with a hair sphere above.
///
/// body: sphere of radius 0.30 at the origin; cloth: sphere shell with walls
/// at radii 0.34 and 0.40; hair: sphere of radius 0.14 centered at
/// `z = 0.56`. The semantic temperature is 0.02 so the thin shell reads as
/// cloth throughout its thickness.
pub fn nested_character() -> ImplicitScene {
    let labels = LabelRegistry::canonical();
    let l = |n: &str| labels.get(n).expect("canonical label");
    let prims = vec![
        Primitive::new(Shape::Sphere { radius: 0.30 }, Vec3::ZERO, l("body"), SKIN),
        Primitive::new(Shape::Sphere { radius: 0.37 }, Vec3::ZERO, l("cloth"), CLOTH).with_shell(0.03),
        Primitive::new(Shape::Sphere { radius: 0.14 }, Vec3::new(0.0, 0.0, 0.56), l("hair"), HAIR),
    ];
    ImplicitScene::new("nested-character", labels, prims, 0.02, DEFAULT_BETA_DEN, DEFAULT_SIGMA_MAX)
        .expect("demo scene is valid")
}

/// Two overlapping spheres of radius 0.30 at `x = -0.18` (body) and
/// `x = +0.18` (cloth), with the default temperatures.
pub fn two_spheres() -> ImplicitScene {
    let labels = LabelRegistry::new(["body", "cloth"]).expect("labels");
    let l = |n: &str| labels.get(n).expect("label");
    let prims = vec![
        Primitive::new(Shape::Sphere { radius: 0.30 }, Vec3::new(-0.18, 0.0, 0.0), l("body"), SKIN),
        Primitive::new(Shape::Sphere { radius: 0.30 }, Vec3::new(0.18, 0.0, 0.0), l("cloth"), CLOTH),
    ];
    ImplicitScene::with_defaults("two-spheres", labels, prims).expect("demo scene is valid")
}

pub fn demo_scenes() -> Vec<ImplicitScene> {
    vec![nested_character(), two_spheres()]
}
