//! 8-bit PNG encodings of render buffers, named `<stem>_<view>_<buffer>.png`.
//!
//! | buffer     | format | encoding                                             |
//! |------------|--------|------------------------------------------------------|
//! | `color`    | RGB8   | color over the background                            |
//! | `alpha`    | L8     | opacity                                              |
//! | `semantic` | L8     | argmax label id, 255 for background                  |
//! | `depth`    | L8     | `(depth - near) / (far - near)`, 255 where empty     |
//! | `normal`   | RGB8   | `(n + 1) / 2`, black where alpha < 0.5               |

use std::path::{Path, PathBuf};

use image::{ColorType, ImageFormat};
use serde::{Deserialize, Serialize};

use semsurf_core::render::{Camera, RenderBuffers};

use crate::error::{CliError, CliResult};
use crate::mesh_io::quantize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BufferKind {
    Color,
    Alpha,
    Semantic,
    Depth,
    Normal,
}

impl BufferKind {
    pub const ALL: [BufferKind; 5] = [
        BufferKind::Color,
        BufferKind::Alpha,
        BufferKind::Semantic,
        BufferKind::Depth,
        BufferKind::Normal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BufferKind::Color => "color",
            BufferKind::Alpha => "alpha",
            BufferKind::Semantic => "semantic",
            BufferKind::Depth => "depth",
            BufferKind::Normal => "normal",
        }
    }
}

/// Raw 8-bit pixels and channel count of one buffer.
pub fn encode(b: &RenderBuffers, camera: &Camera, kind: BufferKind, background: [f64; 3]) -> (Vec<u8>, usize) {
    match kind {
        BufferKind::Color => (b.color_over(background).iter().flat_map(|c| c.map(quantize)).collect(), 3),
        BufferKind::Alpha => (b.alpha.iter().map(|&a| quantize(a)).collect(), 1),
        BufferKind::Semantic => (b.argmax.clone(), 1),
        BufferKind::Depth => {
            let span = camera.far - camera.near;
            (b.depth.iter().map(|&d| quantize((d - camera.near) / span)).collect(), 1)
        }
        BufferKind::Normal => (
            b.normal
                .iter()
                .flat_map(|n| {
                    if n.norm_squared() == 0.0 {
                        [0; 3]
                    } else {
                        n.to_array().map(|v| quantize((v + 1.0) / 2.0))
                    }
                })
                .collect(),
            3,
        ),
    }
}

pub fn write_png(path: &Path, pixels: &[u8], width: usize, height: usize, channels: usize) -> CliResult<()> {
    let color = if channels == 3 { ColorType::Rgb8 } else { ColorType::L8 };
    image::save_buffer_with_format(path, pixels, width as u32, height as u32, color, ImageFormat::Png)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

/// Writes the requested buffers of one view.
pub fn write_buffers(
    b: &RenderBuffers,
    camera: &Camera,
    kinds: &[BufferKind],
    background: [f64; 3],
    dir: &Path,
    stem: &str,
    view: &str,
) -> CliResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    for &k in kinds {
        let path = dir.join(format!("{stem}_{view}_{}.png", k.name()));
        let (px, ch) = encode(b, camera, k, background);
        write_png(&path, &px, b.width, b.height, ch)?;
        out.push(path);
    }
    Ok(out)
}

/// Decoded 8-bit image: width, height, channels and pixels.
pub fn read_png(path: &Path) -> CliResult<(usize, usize, usize, Vec<u8>)> {
    let img = image::open(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        image::DynamicImage::ImageLuma8(g) => Ok((w, h, 1, g.into_raw())),
        other => Ok((w, h, 3, other.into_rgb8().into_raw())),
    }
}
