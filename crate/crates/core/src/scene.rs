//! Procedural RGB-D scenes and the propagation-distance bound.
//!
//! Flat shapes are placed on a uniform grid with per-object jitter, scale,
//! in-plane rotation, depth and texture, then composited with a z-buffer
//! (nearest depth wins). Everything is a pure function of the seed.

use std::f64::consts::PI;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::OpticalConfig;
use crate::error::{CghError, Result};
use crate::field::{Grid, ScalarField};
use crate::frame::RgbdFrame;

/// Largest alias-free angular-spectrum distance,
/// `N·Δx·sqrt(4·(Δx/λ)² − 1)`, with `N` the larger hologram side.
pub fn compute_z_max(config: &OpticalConfig, channel: usize) -> Result<f64> {
    let lambda = config.wavelength(channel)?;
    let pitch = config.pixel_pitch;
    let radicand = 4.0 * (pitch / lambda).powi(2) - 1.0;
    if !(radicand > 0.0) {
        return Err(CghError::Config(format!(
            "pixel pitch {pitch:e} m must exceed half the wavelength {lambda:e} m"
        )));
    }
    let n = config.width.max(config.height) as f64;
    Ok(n * pitch * radicand.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeKind {
    Rectangle,
    Ellipse,
    TexturedPatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneParams {
    pub grid_rows: usize,
    pub grid_cols: usize,
    pub n_objects: usize,
    /// Object size as a fraction of the hologram width.
    pub scale_range: (f64, f64),
    /// Object depth interval `(lo, hi]` in meters; `None` means
    /// `(0, depth_range]`.
    pub z_range: Option<(f64, f64)>,
    pub palette: Vec<ShapeKind>,
    pub seed: u64,
}

impl Default for SceneParams {
    fn default() -> Self {
        SceneParams {
            grid_rows: 3,
            grid_cols: 3,
            n_objects: 6,
            scale_range: (0.20, 0.30),
            z_range: None,
            palette: vec![ShapeKind::Rectangle, ShapeKind::Ellipse, ShapeKind::TexturedPatch],
            seed: 0,
        }
    }
}

impl SceneParams {
    pub fn validate(&self, config: &OpticalConfig) -> Result<()> {
        if self.grid_rows == 0 || self.grid_cols == 0 {
            return Err(CghError::Params("placement grid must have at least one cell".into()));
        }
        if self.n_objects > self.grid_rows * self.grid_cols {
            return Err(CghError::Params(format!(
                "{} objects do not fit in a {}x{} grid",
                self.n_objects, self.grid_rows, self.grid_cols
            )));
        }
        let (lo, hi) = self.scale_range;
        if !(lo > 0.0 && lo <= hi && hi < 1.0) {
            return Err(CghError::Params(format!("scale range ({lo}, {hi}) must lie in (0, 1)")));
        }
        let (zlo, zhi) = self.depth_interval(config);
        if !(zlo >= 0.0 && zlo <= zhi && zhi <= config.depth_range) {
            return Err(CghError::Params(format!(
                "depth interval ({zlo}, {zhi}] must lie within [0, {}]",
                config.depth_range
            )));
        }
        if self.palette.is_empty() {
            return Err(CghError::Params("shape palette is empty".into()));
        }
        Ok(())
    }

    pub fn depth_interval(&self, config: &OpticalConfig) -> (f64, f64) {
        self.z_range.unwrap_or((0.0, config.depth_range))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Texture {
    Flat(Vec<f64>),
    /// Linear blend from `from` to `to` along the object's local x axis.
    Gradient { from: Vec<f64>, to: Vec<f64> },
    /// Product of sinusoids with periods in pixels.
    Pattern { low: Vec<f64>, high: Vec<f64>, period_u: f64, period_v: f64 },
}

/// One object after sampling, in pixel coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacedObject {
    pub shape: ShapeKind,
    pub center: (f64, f64),
    pub half_extent: (f64, f64),
    /// Radians, in-plane.
    pub rotation: f64,
    /// Meters from the hologram plane.
    pub depth: f64,
    pub texture: Texture,
}

impl PlacedObject {
    fn local(&self, x: f64, y: f64) -> (f64, f64) {
        let (s, c) = self.rotation.sin_cos();
        let dx = x - self.center.0;
        let dy = y - self.center.1;
        (dx * c + dy * s, -dx * s + dy * c)
    }

    pub fn covers(&self, x: f64, y: f64) -> bool {
        let (u, v) = self.local(x, y);
        let (a, b) = self.half_extent;
        match self.shape {
            ShapeKind::Rectangle | ShapeKind::TexturedPatch => u.abs() <= a && v.abs() <= b,
            ShapeKind::Ellipse => (u / a).powi(2) + (v / b).powi(2) <= 1.0,
        }
    }

    pub fn color(&self, x: f64, y: f64, channel: usize) -> f64 {
        let (u, v) = self.local(x, y);
        match &self.texture {
            Texture::Flat(c) => c[channel],
            Texture::Gradient { from, to } => {
                let t = ((u / self.half_extent.0) * 0.5 + 0.5).clamp(0.0, 1.0);
                from[channel] + (to[channel] - from[channel]) * t
            }
            Texture::Pattern { low, high, period_u, period_v } => {
                let s = 0.5 + 0.5 * (2.0 * PI * u / period_u).sin() * (2.0 * PI * v / period_v).cos();
                low[channel] + (high[channel] - low[channel]) * s
            }
        }
    }

    fn bounding_box(&self, width: usize, height: usize) -> (usize, usize, usize, usize) {
        let r = self.half_extent.0.hypot(self.half_extent.1);
        let x0 = (self.center.0 - r).floor().max(0.0) as usize;
        let y0 = (self.center.1 - r).floor().max(0.0) as usize;
        let x1 = ((self.center.0 + r).ceil().max(0.0) as usize).min(width);
        let y1 = ((self.center.1 + r).ceil().max(0.0) as usize).min(height);
        (x0, y0, x1, y1)
    }
}

pub const TEXTURE_FLOOR: f64 = 0.2;
pub const TEXTURE_CEIL: f64 = 1.0;

/// Samples object placements for a scene.
pub fn plan_scene(params: &SceneParams, config: &OpticalConfig) -> Result<Vec<PlacedObject>> {
    params.validate(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let width = config.width as f64;
    let height = config.height as f64;
    let cell_w = width / params.grid_cols as f64;
    let cell_h = height / params.grid_rows as f64;
    let (zlo, zhi) = params.depth_interval(config);
    let channels = config.channels();

    let cells = sample(&mut rng, params.grid_rows * params.grid_cols, params.n_objects);
    let mut objects = Vec::with_capacity(params.n_objects);
    for cell in cells.iter() {
        let row = cell / params.grid_cols;
        let col = cell % params.grid_cols;
        let cx = (col as f64 + 0.5) * cell_w + rng.gen_range(-0.25..=0.25) * cell_w;
        let cy = (row as f64 + 0.5) * cell_h + rng.gen_range(-0.25..=0.25) * cell_h;
        let size = rng.gen_range(params.scale_range.0..=params.scale_range.1) * width;
        let aspect = rng.gen_range(0.6..=1.0);
        let shape = params.palette[rng.gen_range(0..params.palette.len())];
        let rotation = rng.gen_range(-2.0 * PI..2.0 * PI);
        let depth = if zhi > zlo {
            zhi - (zhi - zlo) * rng.gen::<f64>()
        } else {
            zhi
        };
        let color = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..channels).map(|_| rng.gen_range(TEXTURE_FLOOR..=TEXTURE_CEIL)).collect()
        };
        let texture = match shape {
            ShapeKind::TexturedPatch => Texture::Pattern {
                low: color(&mut rng),
                high: color(&mut rng),
                period_u: rng.gen_range(4.0..16.0),
                period_v: rng.gen_range(4.0..16.0),
            },
            _ if rng.gen_bool(0.5) => Texture::Flat(color(&mut rng)),
            _ => Texture::Gradient {
                from: color(&mut rng),
                to: color(&mut rng),
            },
        };
        objects.push(PlacedObject {
            shape,
            center: (cx, cy),
            half_extent: (size / 2.0, size * aspect / 2.0),
            rotation,
            depth,
            texture,
        });
    }
    Ok(objects)
}

/// Rasterizes placed objects with a z-buffer; the smallest depth wins and
/// ties keep the earlier object.
pub fn render_objects(objects: &[PlacedObject], config: &OpticalConfig) -> Result<RgbdFrame> {
    let (w, h) = (config.width, config.height);
    let channels = config.channels();
    let mut zbuf = vec![f64::INFINITY; w * h];
    let mut owner: Vec<Option<usize>> = vec![None; w * h];
    for (k, obj) in objects.iter().enumerate() {
        if !(obj.depth >= 0.0 && obj.depth <= config.depth_range) {
            return Err(CghError::Scene(format!("object depth {} outside [0, depth_range]", obj.depth)));
        }
        let (x0, y0, x1, y1) = obj.bounding_box(w, h);
        for y in y0..y1 {
            for x in x0..x1 {
                if obj.covers(x as f64 + 0.5, y as f64 + 0.5) && obj.depth < zbuf[y * w + x] {
                    zbuf[y * w + x] = obj.depth;
                    owner[y * w + x] = Some(k);
                }
            }
        }
    }
    let intensity = (0..channels)
        .map(|c| {
            Grid::from_fn(w, h, |x, y| match owner[y * w + x] {
                Some(k) => objects[k].color(x as f64 + 0.5, y as f64 + 0.5, c).clamp(0.0, 1.0),
                None => 0.0,
            })
        })
        .collect::<Result<Vec<ScalarField>>>()?;
    let depth = Grid::from_fn(w, h, |x, y| match owner[y * w + x] {
        Some(_) => (zbuf[y * w + x] / config.depth_range).clamp(0.0, 1.0),
        None => 1.0,
    })?;
    let validity = Grid::from_fn(w, h, |x, y| owner[y * w + x].is_some())?;
    RgbdFrame::new(intensity, depth, validity, config.clone())
}

pub fn synthesize_scene(params: &SceneParams, config: &OpticalConfig) -> Result<RgbdFrame> {
    render_objects(&plan_scene(params, config)?, config)
}

/// Independent per-scene seed derived from a batch seed (SplitMix64).
pub fn scene_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
