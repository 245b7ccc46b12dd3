use std::path::{Path, PathBuf};

use layercgh::{GeneratorSettings, LayerPhaseMode, Method, OpticalConfig, PaddingMode, SceneParams};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Optional overrides of the optical setup; unset fields keep the defaults
/// for the chosen resolution.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpticalOverrides {
    pub resolution: Option<usize>,
    pub width: Option<usize>,
    pub height: Option<usize>,
    pub pixel_pitch: Option<f64>,
    pub wavelengths: Option<Vec<f64>>,
    /// Meters.
    pub depth_range: Option<f64>,
    pub n_layers: Option<usize>,
    pub layer_phase_mode: Option<LayerPhaseMode>,
    pub allow_beyond_zmax: Option<bool>,
}

impl OpticalOverrides {
    fn merge(&mut self, other: &OpticalOverrides) {
        macro_rules! take {
            ($($f:ident),*) => {$(if other.$f.is_some() { self.$f = other.$f.clone(); })*};
        }
        take!(resolution, width, height, pixel_pitch, wavelengths, depth_range, n_layers, layer_phase_mode, allow_beyond_zmax);
    }

    pub fn resolve(&self) -> OpticalConfig {
        let n = self.resolution.unwrap_or(layercgh::config::DEFAULT_RESOLUTION);
        let mut c = OpticalConfig::for_resolution(n);
        if let Some(w) = self.width {
            c.width = w;
        }
        if let Some(h) = self.height {
            c.height = h;
        }
        if self.depth_range.is_none() && (self.width.is_some() || self.height.is_some()) {
            c.depth_range = layercgh::config::tabulated_depth_range(c.width.max(c.height));
        }
        if let Some(p) = self.pixel_pitch {
            c.pixel_pitch = p;
        }
        if let Some(w) = &self.wavelengths {
            c.wavelengths = w.clone();
        }
        if let Some(d) = self.depth_range {
            c.depth_range = d;
        }
        if let Some(n) = self.n_layers {
            c.n_layers = n;
        }
        if let Some(m) = self.layer_phase_mode {
            c.layer_phase_mode = m;
        }
        if let Some(a) = self.allow_beyond_zmax {
            c.allow_beyond_zmax = a;
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    DepthRange,
    NLayers,
    Padding,
}

impl std::str::FromStr for SweepAxis {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "depth_range" => Ok(SweepAxis::DepthRange),
            "n_layers" => Ok(SweepAxis::NLayers),
            "padding" => Ok(SweepAxis::Padding),
            other => Err(CliError::Config(format!("unknown sweep axis `{other}` (depth_range, n_layers, padding)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSettings {
    pub axis: Option<SweepAxis>,
    /// Layer counts, depth ranges in millimeters, or padding modes.
    pub values: Vec<String>,
}

impl Default for SweepSettings {
    fn default() -> Self {
        SweepSettings { axis: None, values: Vec::new() }
    }
}

/// Everything a run needs, loaded from TOML and then patched by flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub n_scenes: usize,
    pub method: Method,
    pub output_dir: PathBuf,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
    pub optical: OpticalOverrides,
    pub scene: SceneParams,
    pub generator: GeneratorSettings,
    pub sweep: SweepSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            n_scenes: 20,
            method: Method::Ap,
            output_dir: PathBuf::from("out"),
            threads: 0,
            optical: OpticalOverrides::default(),
            scene: SceneParams::default(),
            generator: GeneratorSettings::default(),
            sweep: SweepSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn apply(&mut self, flags: &CommonFlags) {
        self.optical.merge(&flags.optical_overrides());
        if let Some(s) = flags.seed {
            self.seed = s;
        }
        if let Some(t) = flags.threads {
            self.threads = t;
        }
        if let Some(d) = &flags.out {
            self.output_dir = d.clone();
        }
        if let Some(p) = &flags.padding {
            self.generator.propagation.padding = *p;
        }
        if let Some(r) = flags.ringing_correction {
            self.generator.propagation.ringing_correction = r;
        }
        if let Some(s) = flags.ap_sweeps {
            self.generator.ap_sweeps = s;
        }
    }

    pub fn optical(&self) -> OpticalConfig {
        self.optical.resolve()
    }

    /// Checks everything up front so that no work starts on a bad config.
    pub fn validate(&self) -> Result<OpticalConfig, CliError> {
        let cfg = self.optical();
        cfg.validate()?;
        self.scene.validate(&cfg)?;
        if self.generator.ap_sweeps == 0 {
            return Err(CliError::Config("ap_sweeps must be at least 1".into()));
        }
        Ok(cfg)
    }
}

/// Flags shared by every subcommand that override the config file.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct CommonFlags {
    /// TOML run configuration.
    #[arg(long, short = 'c', global = true)]
    pub config: Option<PathBuf>,
    /// Output / working directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Base seed; scene i uses a seed derived from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Square hologram size in pixels.
    #[arg(long, global = true)]
    pub resolution: Option<usize>,
    /// Pixel pitch in micrometers.
    #[arg(long, global = true)]
    pub pitch_um: Option<f64>,
    /// Comma-separated wavelengths in nanometers.
    #[arg(long, global = true, value_delimiter = ',')]
    pub wavelengths_nm: Option<Vec<f64>>,
    /// Depth range in millimeters.
    #[arg(long, global = true)]
    pub depth_range_mm: Option<f64>,
    /// Number of depth layers.
    #[arg(long, global = true)]
    pub layers: Option<usize>,
    /// Per-layer phase factor: wavenumber_scaled, literal_z or zero.
    #[arg(long, global = true)]
    pub layer_phase: Option<LayerPhaseMode>,
    /// Accept depth ranges beyond the alias-free propagation bound.
    #[arg(long, global = true)]
    pub allow_beyond_zmax: bool,
    /// zero or edge.
    #[arg(long, global = true)]
    pub padding: Option<PaddingMode>,
    /// Divide out the propagated response of a uniform field.
    #[arg(long, global = true)]
    pub ringing_correction: Option<bool>,
    /// Far-to-near projection passes for AP.
    #[arg(long, global = true)]
    pub ap_sweeps: Option<usize>,
}

impl CommonFlags {
    fn optical_overrides(&self) -> OpticalOverrides {
        OpticalOverrides {
            resolution: self.resolution,
            width: None,
            height: None,
            pixel_pitch: self.pitch_um.map(|p| p * 1e-6),
            wavelengths: self.wavelengths_nm.as_ref().map(|w| w.iter().map(|l| l * 1e-9).collect()),
            depth_range: self.depth_range_mm.map(|d| d * 1e-3),
            n_layers: self.layers,
            layer_phase_mode: self.layer_phase,
            allow_beyond_zmax: self.allow_beyond_zmax.then_some(true),
        }
    }
}
