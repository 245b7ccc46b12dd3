use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CghError, Result};
use crate::scene::compute_z_max;

pub const DEFAULT_PIXEL_PITCH: f64 = 3.6e-6;
pub const DEFAULT_WAVELENGTHS: [f64; 3] = [638e-9, 532e-9, 450e-9];
pub const DEFAULT_RESOLUTION: usize = 512;
pub const DEFAULT_LAYERS: usize = 32;

/// Depth extent of the hologram volume for a 512-pixel-wide hologram.
/// Other resolutions scale linearly with the pixel count.
pub const DEPTH_RANGE_512: f64 = 20.3336e-3;

/// How the per-layer phase factor `exp(-i·z_i)` is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LayerPhaseMode {
    /// Unit phase on every layer.
    Zero,
    /// `exp(-i·z)` with `z` in meters.
    LiteralZ,
    /// `exp(-i·(2π/λ)·z)`.
    #[default]
    WavenumberScaled,
}

impl std::str::FromStr for LayerPhaseMode {
    type Err = CghError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(LayerPhaseMode::Zero),
            "literal_z" => Ok(LayerPhaseMode::LiteralZ),
            "wavenumber_scaled" => Ok(LayerPhaseMode::WavenumberScaled),
            other => Err(CghError::Config(format!("unknown layer phase mode `{other}`"))),
        }
    }
}

/// Optical setup shared by every stage of the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpticalConfig {
    pub width: usize,
    pub height: usize,
    /// Meters.
    pub pixel_pitch: f64,
    /// Meters, one per color channel.
    pub wavelengths: Vec<f64>,
    /// Meters.
    pub depth_range: f64,
    pub n_layers: usize,
    #[serde(default)]
    pub layer_phase_mode: LayerPhaseMode,
    /// Permit a depth range beyond the alias-free propagation bound.
    #[serde(default)]
    pub allow_beyond_zmax: bool,
}

impl Default for OpticalConfig {
    fn default() -> Self {
        Self::for_resolution(DEFAULT_RESOLUTION)
    }
}

impl OpticalConfig {
    /// Square hologram with the tabulated depth range for `n` pixels.
    pub fn for_resolution(n: usize) -> Self {
        OpticalConfig {
            width: n,
            height: n,
            pixel_pitch: DEFAULT_PIXEL_PITCH,
            wavelengths: DEFAULT_WAVELENGTHS.to_vec(),
            depth_range: tabulated_depth_range(n),
            n_layers: DEFAULT_LAYERS,
            layer_phase_mode: LayerPhaseMode::default(),
            allow_beyond_zmax: false,
        }
    }

    pub fn channels(&self) -> usize {
        self.wavelengths.len()
    }

    pub fn wavelength(&self, channel: usize) -> Result<f64> {
        self.wavelengths.get(channel).copied().ok_or_else(|| {
            CghError::Index(format!(
                "channel {channel} out of range ({} channels)",
                self.wavelengths.len()
            ))
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(CghError::Config("resolution must be positive".into()));
        }
        if !(self.pixel_pitch > 0.0 && self.pixel_pitch.is_finite()) {
            return Err(CghError::Config(format!("pixel pitch must be > 0, got {}", self.pixel_pitch)));
        }
        if self.wavelengths.is_empty() {
            return Err(CghError::Config("at least one wavelength is required".into()));
        }
        if let Some(l) = self.wavelengths.iter().find(|&&l| !(l > 0.0 && l.is_finite())) {
            return Err(CghError::Config(format!("wavelength must be > 0, got {l}")));
        }
        if !(self.depth_range > 0.0 && self.depth_range.is_finite()) {
            return Err(CghError::Config(format!("depth range must be > 0, got {}", self.depth_range)));
        }
        if self.n_layers == 0 {
            return Err(CghError::Config("n_layers must be at least 1".into()));
        }
        if !self.allow_beyond_zmax {
            let limit = self.shortest_z_max()?;
            if self.depth_range > limit {
                return Err(CghError::Config(format!(
                    "depth range {:.4} mm exceeds the propagation bound {:.4} mm \
                     (set allow_beyond_zmax to override)",
                    self.depth_range * 1e3,
                    limit * 1e3
                )));
            }
        }
        Ok(())
    }

    /// The tightest `z_max` over all channels.
    pub fn shortest_z_max(&self) -> Result<f64> {
        let mut best = f64::INFINITY;
        for ch in 0..self.channels() {
            best = best.min(compute_z_max(self, ch)?);
        }
        Ok(best)
    }

    /// Stable content hash used to tie artifacts to the configuration that
    /// produced them.
    pub fn config_hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

/// Depth range of the reference dataset volume for an `n`-pixel hologram
/// (10.1668 mm at 256, doubling with each resolution step).
pub fn tabulated_depth_range(n: usize) -> f64 {
    DEPTH_RANGE_512 * n as f64 / DEFAULT_RESOLUTION as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_dataset_setup() {
        let c = OpticalConfig::default();
        assert_eq!(c.pixel_pitch, 3.6e-6);
        assert_eq!(c.wavelengths, vec![638e-9, 532e-9, 450e-9]);
        assert!((c.depth_range - 20.3336e-3).abs() < 1e-12);
        c.validate().unwrap();
    }

    #[test]
    fn tabulated_ranges() {
        for (n, mm) in [(256, 10.1668), (512, 20.3336), (1024, 40.6672), (2048, 81.3344)] {
            assert!((tabulated_depth_range(n) * 1e3 - mm).abs() < 1e-9, "{n}");
        }
    }

    #[test]
    fn validation_errors() {
        let mut c = OpticalConfig::for_resolution(256);
        c.depth_range = 0.05;
        assert!(matches!(c.validate(), Err(CghError::Config(_))));
        c.allow_beyond_zmax = true;
        c.validate().unwrap();
        c.wavelengths[1] = 0.0;
        assert!(c.validate().is_err());
        let mut d = OpticalConfig::default();
        d.n_layers = 0;
        assert!(d.validate().is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = OpticalConfig::default();
        let mut b = a.clone();
        assert_eq!(a.config_hash(), b.config_hash());
        b.n_layers = 33;
        assert_ne!(a.config_hash(), b.config_hash());
    }
}
