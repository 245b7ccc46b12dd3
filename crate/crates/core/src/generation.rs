//! Layer-based hologram generators.
//!
//! All three methods sweep the scene from the farthest layer toward the
//! hologram plane, propagating the running wavefront by `−Δz` between layers:
//!
//! * **SM** stamps `I ∘ M_{i,1}` and keeps propagated light only outside the
//!   backward (one-sided) silhouette of the current layer.
//! * **ADV** stamps over two-layer bands `M_{i,2}` and keeps propagated light
//!   outside the same band.
//! * **AP** refines a hologram: it propagates to the farthest layer and, layer
//!   by layer, replaces the amplitude inside `M_{i,1}` by the image while
//!   keeping the propagated phase.
//!
//! The running field is cropped back to the hologram window after every
//! step, so light diffracted outside the aperture is discarded.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{LayerPhaseMode, OpticalConfig};
use crate::error::{CghError, Result};
use crate::field::{arg, complement, BinaryMask, ComplexField, Grid, ScalarField};
use crate::frame::RgbdFrame;
use crate::layering::{build_layer_grid, LayerAssignment, LayerGrid};
use crate::propagation::{PropagationOptions, Propagator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "SM", alias = "sm")]
    Sm,
    #[serde(rename = "ADV", alias = "adv")]
    Adv,
    #[serde(rename = "AP", alias = "ap")]
    Ap,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Sm, Method::Adv, Method::Ap];

    pub fn tag(&self) -> &'static str {
        match self {
            Method::Sm => "SM",
            Method::Adv => "ADV",
            Method::Ap => "AP",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for Method {
    type Err = CghError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sm" | "sm-lbm" => Ok(Method::Sm),
            "adv" | "adv-lbm" => Ok(Method::Adv),
            "ap" | "ap-lbm" => Ok(Method::Ap),
            other => Err(CghError::Config(format!("unknown method `{other}` (expected sm, adv or ap)"))),
        }
    }
}

/// Per-layer phase factor applied when an image band is stamped.
pub fn layer_phase(grid: &LayerGrid, i: usize, config: &OpticalConfig, channel: usize) -> Result<Complex64> {
    if i >= grid.n_layers {
        return Err(CghError::Index(format!("layer {i} out of range (n = {})", grid.n_layers)));
    }
    let z = grid.z_of(i);
    Ok(match config.layer_phase_mode {
        LayerPhaseMode::Zero => Complex64::new(1.0, 0.0),
        LayerPhaseMode::LiteralZ => Complex64::from_polar(1.0, -z),
        LayerPhaseMode::WavenumberScaled => {
            let lambda = config.wavelength(channel)?;
            Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI / lambda * z)
        }
    })
}

/// What a generator did at one layer, handed to step observers.
pub struct StepTrace<'a> {
    pub layer: usize,
    /// The incoming field after propagation to this layer (absent for the
    /// farthest layer of SM/ADV, which starts from the image alone).
    pub propagated: Option<&'a ComplexField>,
    /// Mask whose pixels take the image term.
    pub image_mask: &'a BinaryMask,
    /// Mask whose pixels keep the propagated term.
    pub keep_mask: &'a BinaryMask,
    pub result: &'a ComplexField,
}

/// Layer geometry of a frame, computed once per generation run.
#[derive(Debug, Clone)]
pub struct LayerPlan {
    pub assignment: LayerAssignment,
}

impl LayerPlan {
    pub fn new(frame: &RgbdFrame) -> Result<Self> {
        Self::with_layers(frame, frame.config.n_layers)
    }

    pub fn with_layers(frame: &RgbdFrame, n_layers: usize) -> Result<Self> {
        let depth = frame.physical_depth();
        let mut cfg = frame.config.clone();
        cfg.n_layers = n_layers;
        let grid = build_layer_grid(&depth, &frame.validity, &cfg)?;
        Ok(LayerPlan {
            assignment: LayerAssignment::new(&depth, &frame.validity, grid)?,
        })
    }

    pub fn grid(&self) -> &LayerGrid {
        self.assignment.grid()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSettings {
    pub propagation: PropagationOptions,
    /// Number of far-to-near amplitude projection sweeps.
    pub ap_sweeps: usize,
}

impl Default for GeneratorSettings {
    fn default() -> Self {
        GeneratorSettings {
            propagation: PropagationOptions::default(),
            ap_sweeps: 1,
        }
    }
}

/// Provenance attached to generated samples. No wall-clock time is recorded
/// unless `SOURCE_DATE_EPOCH` supplies one, so reruns stay byte-identical.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Provenance {
    pub seed: Option<u64>,
    pub source: Option<String>,
    pub timestamp: Option<u64>,
    pub generator_version: String,
}

impl Provenance {
    pub fn new(seed: Option<u64>, source: Option<String>) -> Self {
        Provenance {
            seed,
            source,
            timestamp: std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|v| v.parse().ok()),
            generator_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

/// Per-channel holograms at the hologram plane.
#[derive(Debug, Clone, PartialEq)]
pub struct HologramSample {
    pub channels: Vec<ComplexField>,
    pub method: Method,
    pub config: OpticalConfig,
    pub n_layers: usize,
    pub provenance: Provenance,
}

/// Generators bound to one propagation setup.
#[derive(Debug)]
pub struct Engine {
    propagator: Propagator,
    settings: GeneratorSettings,
}

impl Default for Engine {
    fn default() -> Self {
        Engine::new(GeneratorSettings::default())
    }
}

type Observer<'o> = Option<&'o mut dyn FnMut(&StepTrace<'_>)>;

impl Engine {
    pub fn new(settings: GeneratorSettings) -> Self {
        Engine {
            propagator: Propagator::new(settings.propagation),
            settings,
        }
    }

    pub fn propagator(&self) -> &Propagator {
        &self.propagator
    }

    pub fn settings(&self) -> &GeneratorSettings {
        &self.settings
    }

    pub fn generate_smlbm(&self, frame: &RgbdFrame, channel: usize) -> Result<ComplexField> {
        self.generate_smlbm_traced(frame, channel, None)
    }

    pub fn generate_smlbm_traced(&self, frame: &RgbdFrame, channel: usize, observer: Observer<'_>) -> Result<ComplexField> {
        let plan = LayerPlan::new(frame)?;
        self.layer_sweep(frame, channel, &plan, 1, true, observer)
    }

    pub fn generate_advlbm(&self, frame: &RgbdFrame, channel: usize) -> Result<ComplexField> {
        self.generate_advlbm_traced(frame, channel, None)
    }

    pub fn generate_advlbm_traced(&self, frame: &RgbdFrame, channel: usize, observer: Observer<'_>) -> Result<ComplexField> {
        let plan = LayerPlan::new(frame)?;
        if plan.grid().n_layers < 2 {
            return self.layer_sweep(frame, channel, &plan, 1, true, observer);
        }
        self.layer_sweep(frame, channel, &plan, 2, false, observer)
    }

    /// Shared far-to-near sweep. `silhouette` selects the SM rule (keep
    /// propagated light outside the one-sided backward mask); otherwise
    /// propagated light is kept outside the `k`-band mask.
    fn layer_sweep(
        &self,
        frame: &RgbdFrame,
        channel: usize,
        plan: &LayerPlan,
        k: usize,
        silhouette: bool,
        mut observer: Observer<'_>,
    ) -> Result<ComplexField> {
        frame.validate()?;
        let cfg = &frame.config;
        let image = frame.intensity(channel)?;
        let grid = *plan.grid();
        let assign = &plan.assignment;

        let mask0 = assign.band_mask(0, k)?;
        let mut field = stamp(image, &mask0, layer_phase(&grid, 0, cfg, channel)?, None, None, grid.z_of(0))?;
        if let Some(obs) = observer.as_mut() {
            let keep = complement(&mask0);
            obs(&StepTrace {
                layer: 0,
                propagated: None,
                image_mask: &mask0,
                keep_mask: &keep,
                result: &field,
            });
        }
        for i in 0..grid.n_layers - 1 {
            let next = i + 1;
            let propagated = self.propagator.propagate(&field, -grid.delta_z, cfg, channel)?;
            let (image_mask, keep_mask) = if silhouette {
                (assign.band_mask(next, 1)?, complement(&assign.one_sided_mask(next, 1)?))
            } else {
                let m = assign.band_mask(next, k)?;
                let keep = complement(&m);
                (m, keep)
            };
            field = stamp(
                image,
                &image_mask,
                layer_phase(&grid, next, cfg, channel)?,
                Some(&propagated),
                Some(&keep_mask),
                grid.z_of(next),
            )?;
            if let Some(obs) = observer.as_mut() {
                obs(&StepTrace {
                    layer: next,
                    propagated: Some(&propagated),
                    image_mask: &image_mask,
                    keep_mask: &keep_mask,
                    result: &field,
                });
            }
        }
        self.to_hologram_plane(field, &grid, cfg, channel)
    }

    fn to_hologram_plane(&self, field: ComplexField, grid: &LayerGrid, cfg: &OpticalConfig, channel: usize) -> Result<ComplexField> {
        let last = grid.z_of(grid.n_layers - 1);
        let out = if last > 0.0 {
            self.propagator.propagate(&field, -last, cfg, channel)?
        } else {
            field
        };
        Ok(out.with_plane_z(0.0))
    }

    pub fn amplitude_projection_refine(&self, hologram: &ComplexField, frame: &RgbdFrame, channel: usize) -> Result<ComplexField> {
        self.amplitude_projection_refine_traced(hologram, frame, channel, None)
    }

    pub fn amplitude_projection_refine_traced(
        &self,
        hologram: &ComplexField,
        frame: &RgbdFrame,
        channel: usize,
        mut observer: Observer<'_>,
    ) -> Result<ComplexField> {
        if hologram.plane_z() != 0.0 {
            return Err(CghError::State(format!(
                "amplitude projection expects a hologram at z = 0, got z = {}",
                hologram.plane_z()
            )));
        }
        frame.validate()?;
        let plan = LayerPlan::new(frame)?;
        let mut current = hologram.clone();
        for _ in 0..self.settings.ap_sweeps.max(1) {
            current = self.projection_sweep(&current, frame, channel, &plan, observer.as_deref_mut())?;
        }
        Ok(current)
    }

    fn projection_sweep<'o>(
        &self,
        hologram: &ComplexField,
        frame: &RgbdFrame,
        channel: usize,
        plan: &LayerPlan,
        mut observer: Option<&mut (dyn FnMut(&StepTrace<'_>) + 'o)>,
    ) -> Result<ComplexField> {
        let cfg = &frame.config;
        let image = frame.intensity(channel)?;
        let grid = *plan.grid();
        let mut field = hologram.clone();
        for i in 0..grid.n_layers {
            let distance = if i == 0 { grid.z_of(0) } else { -grid.delta_z };
            let propagated = self
                .propagator
                .propagate(&field, distance, cfg, channel)?
                .with_plane_z(grid.z_of(i));
            let mask = plan.assignment.band_mask(i, 1)?;
            field = project_amplitude(&propagated, image, &mask)?;
            if let Some(obs) = observer.as_mut() {
                let keep = complement(&mask);
                obs(&StepTrace {
                    layer: i,
                    propagated: Some(&propagated),
                    image_mask: &mask,
                    keep_mask: &keep,
                    result: &field,
                });
            }
        }
        self.to_hologram_plane(field, &grid, cfg, channel)
    }

    pub fn generate_aplbm(&self, frame: &RgbdFrame, channel: usize) -> Result<ComplexField> {
        let adv = self.generate_advlbm(frame, channel)?;
        self.amplitude_projection_refine(&adv, frame, channel)
    }

    pub fn generate(&self, frame: &RgbdFrame, channel: usize, method: Method) -> Result<ComplexField> {
        match method {
            Method::Sm => self.generate_smlbm(frame, channel),
            Method::Adv => self.generate_advlbm(frame, channel),
            Method::Ap => self.generate_aplbm(frame, channel),
        }
    }

    /// Runs `method` on every color channel, in parallel.
    pub fn generate_color(&self, frame: &RgbdFrame, method: Method, provenance: Provenance) -> Result<HologramSample> {
        let holograms = (0..frame.channels())
            .into_par_iter()
            .map(|c| self.generate(frame, c, method))
            .collect::<Result<Vec<_>>>()?;
        Ok(HologramSample {
            channels: holograms,
            method,
            config: frame.config.clone(),
            n_layers: LayerPlan::new(frame)?.grid().n_layers,
            provenance,
        })
    }
}

/// `I ∘ image_mask · phase + propagated ∘ keep_mask`, placed at `plane_z`.
fn stamp(
    image: &ScalarField,
    image_mask: &BinaryMask,
    phase: Complex64,
    propagated: Option<&ComplexField>,
    keep_mask: Option<&BinaryMask>,
    plane_z: f64,
) -> Result<ComplexField> {
    image.ensure_same_shape(image_mask, "image/mask")?;
    let zero = Complex64::new(0.0, 0.0);
    let n = image.len();
    let mut data = Vec::with_capacity(n);
    for p in 0..n {
        let a = if image_mask.data()[p] { phase * image.data()[p] } else { zero };
        let b = match (propagated, keep_mask) {
            (Some(f), Some(m)) if m.data()[p] => f.data()[p],
            _ => zero,
        };
        data.push(a + b);
    }
    ComplexField::new(Grid::from_vec(image.width(), image.height(), data)?, plane_z)
}

/// Replaces the amplitude of `field` by `image` inside `mask`, keeping the
/// phase; pixels outside the mask pass through unchanged.
pub fn project_amplitude(field: &ComplexField, image: &ScalarField, mask: &BinaryMask) -> Result<ComplexField> {
    image.ensure_same_shape(mask, "image/mask")?;
    if field.shape() != image.shape() {
        return Err(CghError::Dimension("field/image shape mismatch".into()));
    }
    let data = field
        .data()
        .iter()
        .zip(image.data())
        .zip(mask.data())
        .map(|((&f, &i), &m)| if m { Complex64::from_polar(i, arg(f)) } else { f })
        .collect();
    ComplexField::from_vec(field.width(), field.height(), data, field.plane_z())
}
