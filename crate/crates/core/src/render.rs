//! Orthographic volume rendering of holistic, single-semantic and
//! semantic-set images.
//!
//! View convention: azimuth 0 and elevation 0 look along `-y` with `+z` up.
//! Positive azimuth turns the camera about `+z`; positive elevation raises it.
//! Rays start on the plane through the origin orthogonal to the view direction
//! and are sampled at `t_i = near + (i + 1/2) * delta`, `delta = (far - near) / N`.
//!
//! Buffers are row-major with the top row first.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::field::{Field, SemProbs, SemanticLabel, MAX_LABELS};
use crate::math::{cos, exp, sin, Vec3};
use crate::par;
use crate::semantics::SemanticSet;

pub const DEFAULT_SAMPLES: usize = 512;
pub const DEFAULT_HALF_EXTENT: f64 = 0.8;
/// Guard in the expected-depth denominator.
pub const DEPTH_EPS: f64 = 1e-8;
/// Argmax value for pixels where nothing was accumulated.
pub const BACKGROUND_LABEL: u8 = u8::MAX;
/// Step used for central-difference normals.
pub const NORMAL_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    /// Half the vertical extent of the view window.
    pub half_extent: f64,
    pub width: usize,
    pub height: usize,
    pub near: f64,
    pub far: f64,
    pub samples: usize,
}

impl Camera {
    pub fn new(azimuth_deg: f64, elevation_deg: f64, width: usize, height: usize) -> Self {
        Camera {
            azimuth_deg,
            elevation_deg,
            half_extent: DEFAULT_HALF_EXTENT,
            width,
            height,
            near: -1.0,
            far: 1.0,
            samples: DEFAULT_SAMPLES,
        }
    }

    pub fn with_samples(mut self, n: usize) -> Self {
        self.samples = n;
        self
    }

    /// `count` azimuths evenly spaced from 0 at the given elevation.
    pub fn turntable(count: usize, elevation_deg: f64, width: usize, height: usize) -> Vec<Camera> {
        (0..count)
            .map(|i| Camera::new(360.0 * i as f64 / count as f64, elevation_deg, width, height))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("image size must be at least 1x1"));
        }
        if self.samples < 2 {
            return Err(Error::invalid("need at least 2 samples per ray"));
        }
        if !(self.near.is_finite() && self.far.is_finite() && self.near < self.far) {
            return Err(Error::invalid("camera needs finite near < far"));
        }
        if !(self.half_extent.is_finite() && self.half_extent > 0.0) {
            return Err(Error::invalid("camera half extent must be positive"));
        }
        if !(self.azimuth_deg.is_finite() && self.elevation_deg.is_finite() && self.elevation_deg.abs() < 90.0) {
            return Err(Error::invalid("camera elevation must lie strictly between -90 and 90 degrees"));
        }
        Ok(())
    }

    /// Unit view direction.
    pub fn direction(&self) -> Vec3 {
        let (az, el) = (self.azimuth_deg.to_radians(), self.elevation_deg.to_radians());
        -(Vec3::new(sin(az), cos(az), 0.0) * cos(el) + Vec3::Z * sin(el))
    }

    /// Screen right and up vectors.
    pub fn basis(&self) -> (Vec3, Vec3) {
        let d = self.direction();
        let right = d.cross(Vec3::Z).normalized();
        (right, right.cross(d))
    }

    pub fn delta(&self) -> f64 {
        (self.far - self.near) / self.samples as f64
    }

    /// Ray through the center of pixel `(px, py)`.
    pub fn ray(&self, px: usize, py: usize) -> Ray {
        let (right, up) = self.basis();
        let aspect = self.width as f64 / self.height as f64;
        let u = ((px as f64 + 0.5) / self.width as f64 * 2.0 - 1.0) * self.half_extent * aspect;
        let v = (1.0 - (py as f64 + 0.5) / self.height as f64 * 2.0) * self.half_extent;
        Ray {
            origin: right * u + up * v,
            direction: self.direction(),
            near: self.near,
            far: self.far,
            samples: self.samples,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
    pub near: f64,
    pub far: f64,
    pub samples: usize,
}

impl Ray {
    pub fn delta(&self) -> f64 {
        (self.far - self.near) / self.samples as f64
    }

    /// Ray parameter of sample `i`.
    #[inline]
    pub fn t(&self, i: usize) -> f64 {
        self.near + (i as f64 + 0.5) * self.delta()
    }

    #[inline]
    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

/// One ray per pixel, row-major from the top-left corner.
pub fn generate_rays(camera: &Camera) -> Result<Vec<Ray>> {
    camera.validate()?;
    let mut rays = Vec::with_capacity(camera.width * camera.height);
    for py in 0..camera.height {
        for px in 0..camera.width {
            rays.push(camera.ray(px, py));
        }
    }
    Ok(rays)
}

/// Holistic compositing: `C = sum T_i a_i c_i`, `T_i = prod_{j<i} (1 - a_j)`,
/// `a_i = 1 - exp(-sigma_i delta)`. Returns `(color, alpha)`.
pub fn render_pixel<F: Field + ?Sized>(ray: &Ray, field: &F) -> ([f64; 3], f64) {
    let delta = ray.delta();
    let mut t = 1.0;
    let mut c = [0.0; 3];
    for i in 0..ray.samples {
        let s = field.eval(ray.at(ray.t(i)));
        let a = 1.0 - exp(-s.density * delta);
        let w = t * a;
        for ch in 0..3 {
            c[ch] += w * s.color[ch];
        }
        t *= 1.0 - a;
    }
    (c, 1.0 - t)
}

/// Output of the weighted compositor.
#[derive(Debug, Clone, PartialEq)]
pub struct Composite {
    pub color: [f64; 3],
    /// Accumulated semantic vector.
    pub semantic: SemProbs,
    pub alpha: f64,
    /// Sum of the compositing weights times the ray parameter.
    pub depth_moment: f64,
}

/// Compositing where sample `i` is visible with probability `m_i`:
/// `C = sum T_i m_i a_i c_i`, `S = sum T_i m_i a_i p_i`,
/// `T_i = prod_{j<i} (1 - a_j m_j)`.
fn composite<F: Field + ?Sized>(ray: &Ray, field: &F, mass: impl Fn(&[f64]) -> f64) -> Composite {
    let delta = ray.delta();
    let k = field.label_count();
    let mut sem = SemProbs::new();
    for _ in 0..k {
        sem.push(0.0);
    }
    let mut t = 1.0;
    let mut c = [0.0; 3];
    let mut depth = 0.0;
    for i in 0..ray.samples {
        let ti = ray.t(i);
        let s = field.eval(ray.at(ti));
        let a = 1.0 - exp(-s.density * delta);
        let am = a * mass(&s.sem_probs);
        let w = t * am;
        for ch in 0..3 {
            c[ch] += w * s.color[ch];
        }
        for (acc, p) in sem.iter_mut().zip(&s.sem_probs) {
            *acc += w * p;
        }
        depth += w * ti;
        t *= 1.0 - am;
    }
    Composite {
        color: c,
        semantic: sem,
        alpha: 1.0 - t,
        depth_moment: depth,
    }
}

fn check_label<F: Field + ?Sized>(field: &F, s: SemanticLabel) -> Result<()> {
    if s.id() >= field.label_count() {
        return Err(Error::invalid(alloc::format!("label {} is outside the registry", s.id())));
    }
    Ok(())
}

fn check_set<F: Field + ?Sized>(field: &F, set: &SemanticSet) -> Result<()> {
    if set.is_empty() || set.members().any(|m| m.id() >= field.label_count()) {
        return Err(Error::invalid(alloc::format!("set `{}` does not fit the registry", set.name())));
    }
    Ok(())
}

/// Rendering under one semantic: each sample is weighted by `p_s`.
pub fn render_pixel_semantic<F: Field + ?Sized>(ray: &Ray, field: &F, s: SemanticLabel) -> Result<([f64; 3], f64)> {
    check_label(field, s)?;
    let id = s.id();
    let c = composite(ray, field, |p| p[id]);
    Ok((c.color, c.alpha))
}

/// Rendering under a semantic set: each sample is weighted by the summed
/// member probability. Also returns the accumulated semantic vector.
pub fn render_pixel_set<F: Field + ?Sized>(ray: &Ray, field: &F, set: &SemanticSet) -> Result<([f64; 3], SemProbs, f64)> {
    check_set(field, set)?;
    let c = composite(ray, field, |p| set.mass(p));
    Ok((c.color, c.semantic, c.alpha))
}

#[derive(Debug, Clone, PartialEq)]
pub enum RenderMode {
    Holistic,
    Single(SemanticLabel),
    Set(SemanticSet),
}

/// Per-pixel images, row-major, top row first.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderBuffers {
    pub width: usize,
    pub height: usize,
    pub labels: usize,
    /// Premultiplied by alpha (composited over black).
    pub color: Vec<[f64; 3]>,
    pub alpha: Vec<f64>,
    /// `labels` accumulated values per pixel.
    pub semantic: Vec<f64>,
    /// Index of the largest accumulated value, or `BACKGROUND_LABEL`.
    pub argmax: Vec<u8>,
    /// Expected termination depth along the ray; `far` where alpha is 0.
    pub depth: Vec<f64>,
    /// Unit normals; zero where alpha < 0.5.
    pub normal: Vec<Vec3>,
}

impl RenderBuffers {
    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn semantic_at(&self, pixel: usize) -> &[f64] {
        &self.semantic[pixel * self.labels..(pixel + 1) * self.labels]
    }

    /// Color composited over a background.
    pub fn color_over(&self, background: [f64; 3]) -> Vec<[f64; 3]> {
        self.color
            .iter()
            .zip(&self.alpha)
            .map(|(c, &a)| [0, 1, 2].map(|ch| (c[ch] + (1.0 - a) * background[ch]).clamp(0.0, 1.0)))
            .collect()
    }
}

struct Pixel {
    color: [f64; 3],
    alpha: f64,
    semantic: SemProbs,
    depth: f64,
    normal: Vec3,
}

/// Renders every buffer for one camera and mode.
pub fn render_buffers<F: Field + ?Sized>(camera: &Camera, field: &F, mode: &RenderMode) -> Result<RenderBuffers> {
    camera.validate()?;
    let k = field.label_count();
    if k == 0 || k > MAX_LABELS {
        return Err(Error::invalid("field label count outside the supported range"));
    }
    match mode {
        RenderMode::Holistic => {}
        RenderMode::Single(s) => check_label(field, *s)?,
        RenderMode::Set(set) => check_set(field, set)?,
    }
    let n = camera.width * camera.height;
    let pixels: Vec<Pixel> = par::map_blocks(n, camera.width.max(1), |range, out| {
        for idx in range {
            let ray = camera.ray(idx % camera.width, idx / camera.width);
            let c = match mode {
                RenderMode::Holistic => composite(&ray, field, |_| 1.0),
                RenderMode::Single(s) => {
                    let id = s.id();
                    composite(&ray, field, |p| p[id])
                }
                RenderMode::Set(set) => composite(&ray, field, |p| set.mass(p)),
            };
            let depth = if c.alpha > 0.0 {
                c.depth_moment / c.alpha.max(DEPTH_EPS)
            } else {
                camera.far
            };
            let normal = if c.alpha >= 0.5 {
                field.sdf_gradient(ray.at(depth), NORMAL_STEP).normalized()
            } else {
                Vec3::ZERO
            };
            out.push(Pixel {
                color: c.color,
                alpha: c.alpha,
                semantic: c.semantic,
                depth,
                normal,
            });
        }
    });
    let mut b = RenderBuffers {
        width: camera.width,
        height: camera.height,
        labels: k,
        color: Vec::with_capacity(n),
        alpha: Vec::with_capacity(n),
        semantic: Vec::with_capacity(n * k),
        argmax: Vec::with_capacity(n),
        depth: Vec::with_capacity(n),
        normal: Vec::with_capacity(n),
    };
    for p in pixels {
        b.color.push(p.color.map(|v| v.clamp(0.0, 1.0)));
        b.alpha.push(p.alpha.clamp(0.0, 1.0));
        b.argmax.push(argmax(&p.semantic));
        b.semantic.extend_from_slice(&p.semantic);
        b.depth.push(p.depth);
        b.normal.push(p.normal);
    }
    Ok(b)
}

/// Lowest index among the largest entries; background when all are zero.
fn argmax(v: &[f64]) -> u8 {
    let mut best = BACKGROUND_LABEL;
    let mut top = 0.0;
    for (i, &x) in v.iter().enumerate() {
        if x > top {
            top = x;
            best = i as u8;
        }
    }
    best
}
