//! Double-phase amplitude coding of complex holograms.
//!
//! A complex value `A·e^{iφ}` with `A ≤ 1` is the mean of the two unit
//! phasors `e^{i(φ ± acos A)}`. The encoder writes `φ + acos A` on pixels
//! with even `x + y` and `φ − acos A` on odd ones, so every 2×2 cell holds
//! both phasors twice.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::OpticalConfig;
use crate::error::{CghError, Result};
use crate::field::{arg, wrap_phase, ComplexField, Grid, ScalarField};

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseOnlyHologram {
    /// Radians in (−π, π].
    pub phase: ScalarField,
    /// Peak modulus divided out before encoding.
    pub normalization: f64,
    /// Degrees; 0 when no carrier was added.
    pub carrier_angle: f64,
}

impl PhaseOnlyHologram {
    pub fn new(phase: ScalarField, normalization: f64, carrier_angle: f64) -> Result<Self> {
        if !(normalization.is_finite() && normalization > 0.0) {
            return Err(CghError::Domain(format!("normalization must be finite and > 0, got {normalization}")));
        }
        if let Some(v) = phase.data().iter().find(|v| !(**v > -PI && **v <= PI)) {
            return Err(CghError::Domain(format!("phase {v} outside (-pi, pi]")));
        }
        Ok(PhaseOnlyHologram {
            phase,
            normalization,
            carrier_angle,
        })
    }
}

pub fn dpac_encode(field: &ComplexField) -> Result<PhaseOnlyHologram> {
    encode_with_phase_offset(field, None, 0.0)
}

fn encode_with_phase_offset(field: &ComplexField, offset: Option<&ScalarField>, angle: f64) -> Result<PhaseOnlyHologram> {
    let peak = field.max_modulus();
    if peak == 0.0 {
        return Err(CghError::Domain("cannot encode an all-zero field".into()));
    }
    let w = field.width();
    let data = field
        .data()
        .iter()
        .enumerate()
        .map(|(p, &c)| {
            let a = (c.norm() / peak).min(1.0);
            let mut phi = arg(c);
            if let Some(o) = offset {
                phi += o.data()[p];
            }
            let delta = a.acos();
            let (x, y) = (p % w, p / w);
            wrap_phase(if (x + y) % 2 == 0 { phi + delta } else { phi - delta })
        })
        .collect();
    PhaseOnlyHologram::new(Grid::from_vec(w, field.height(), data)?, peak, angle)
}

/// Averages the unit phasors of each 2×2 cell (cells start at even
/// coordinates; edge cells of odd-sized maps are partial) and restores the
/// normalization. The result has full resolution with each cell's value
/// repeated.
pub fn dpac_decode(ph: &PhaseOnlyHologram) -> Result<ComplexField> {
    let (w, h) = ph.phase.shape();
    let mut out = vec![Complex64::new(0.0, 0.0); w * h];
    for cy in (0..h).step_by(2) {
        for cx in (0..w).step_by(2) {
            let ys = cy..(cy + 2).min(h);
            let xs = cx..(cx + 2).min(w);
            let mut sum = Complex64::new(0.0, 0.0);
            let mut n = 0.0;
            for y in ys.clone() {
                for x in xs.clone() {
                    sum += Complex64::from_polar(1.0, *ph.phase.get(x, y));
                    n += 1.0;
                }
            }
            let v = sum / n * ph.normalization;
            for y in ys.clone() {
                for x in xs.clone() {
                    out[y * w + x] = v;
                }
            }
        }
    }
    ComplexField::from_vec(w, h, out, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TiltAxis {
    #[default]
    Horizontal,
    Vertical,
}

impl std::str::FromStr for TiltAxis {
    type Err = CghError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "horizontal" | "x" => Ok(TiltAxis::Horizontal),
            "vertical" | "y" => Ok(TiltAxis::Vertical),
            other => Err(CghError::Config(format!("unknown tilt axis `{other}`"))),
        }
    }
}

/// Steepest carrier tilt (degrees) the pixel pitch can sample at `channel`.
pub fn max_carrier_angle(config: &OpticalConfig, channel: usize) -> Result<f64> {
    let lambda = config.wavelength(channel)?;
    let s = lambda / (2.0 * config.pixel_pitch);
    if s >= 1.0 {
        return Ok(90.0);
    }
    Ok(s.asin().to_degrees())
}

/// Wrapped linear phase of a plane wave tilted by `angle_deg` along `axis`.
pub fn off_axis_ramp(config: &OpticalConfig, channel: usize, angle_deg: f64, axis: TiltAxis) -> Result<ScalarField> {
    let limit = max_carrier_angle(config, channel)?;
    if !(angle_deg.abs() < limit) {
        return Err(CghError::Config(format!(
            "carrier angle {angle_deg} deg exceeds the sampling limit {limit:.4} deg"
        )));
    }
    let lambda = config.wavelength(channel)?;
    let step = 2.0 * PI * angle_deg.to_radians().sin() / lambda * config.pixel_pitch;
    Grid::from_fn(config.width, config.height, |x, y| {
        let n = match axis {
            TiltAxis::Horizontal => x,
            TiltAxis::Vertical => y,
        };
        wrap_phase(step * n as f64)
    })
}

/// Adds the carrier ramp to the hologram phase, then encodes.
pub fn dpac_encode_off_axis(
    field: &ComplexField,
    config: &OpticalConfig,
    channel: usize,
    angle_deg: f64,
    axis: TiltAxis,
) -> Result<PhaseOnlyHologram> {
    let ramp = off_axis_ramp(config, channel, angle_deg, axis)?;
    if ramp.shape() != field.shape() {
        return Err(CghError::Dimension("field shape does not match the configuration".into()));
    }
    encode_with_phase_offset(field, Some(&ramp), angle_deg)
}

/// 16-bit code for a phase in (−π, π]: `round((φ + π) / 2π · 65535)`.
pub fn phase_to_u16(phase: f64) -> u16 {
    (((phase + PI) / (2.0 * PI)) * 65535.0).round().clamp(0.0, 65535.0) as u16
}

pub fn u16_to_phase(code: u16) -> f64 {
    code as f64 / 65535.0 * 2.0 * PI - PI
}

/// Writes the phase map as a 16-bit grayscale PNG.
pub fn write_phase_png(path: &Path, phase: &ScalarField) -> Result<()> {
    let mut bytes = Vec::with_capacity(phase.len() * 2);
    for &p in phase.data() {
        bytes.extend_from_slice(&phase_to_u16(p).to_be_bytes());
    }
    let mut buf = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut buf, phase.width() as u32, phase.height() as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Sixteen);
        let mut writer = enc
            .write_header()
            .map_err(|e| CghError::format(path, e.to_string()))?;
        writer
            .write_image_data(&bytes)
            .map_err(|e| CghError::format(path, e.to_string()))?;
    }
    crate::storage::write_atomic(path, &buf)
}

/// Reads a 16-bit grayscale PNG written by [`write_phase_png`].
pub fn read_phase_png(path: &Path) -> Result<ScalarField> {
    let file = std::fs::File::open(path).map_err(|e| CghError::io(path, e))?;
    let decoder = png::Decoder::new(std::io::BufReader::new(file));
    let mut reader = decoder.read_info().map_err(|e| CghError::format(path, e.to_string()))?;
    let info = reader.info();
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Sixteen {
        return Err(CghError::format(path, "expected a 16-bit grayscale PNG"));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let mut buf = vec![0; reader.output_buffer_size().unwrap_or(w * h * 2)];
    let frame = reader.next_frame(&mut buf).map_err(|e| CghError::format(path, e.to_string()))?;
    let bytes = &buf[..frame.buffer_size()];
    let data = bytes
        .chunks_exact(2)
        .map(|b| u16_to_phase(u16::from_be_bytes([b[0], b[1]])))
        .collect();
    Grid::from_vec(w, h, data)
}
