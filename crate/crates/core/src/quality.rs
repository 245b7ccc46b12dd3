//! Reconstruction and image-quality metrics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::OpticalConfig;
use crate::error::{CghError, Result};
use crate::field::{amplitude_of, ComplexField, Grid, ScalarField};
use crate::frame::RgbdFrame;
use crate::generation::{HologramSample, LayerPlan, Method};
use crate::propagation::Propagator;

/// Propagates a hologram (at z = 0) to distance `z`.
pub fn reconstruct_at(
    propagator: &Propagator,
    hologram: &ComplexField,
    z: f64,
    config: &OpticalConfig,
    channel: usize,
) -> Result<ComplexField> {
    if hologram.plane_z() != 0.0 {
        return Err(CghError::State(format!("hologram must sit at z = 0, got {}", hologram.plane_z())));
    }
    propagator.propagate(hologram, z, config, channel)
}

/// Reconstructed amplitudes at every layer distance of `plan`.
pub fn focal_stack(
    propagator: &Propagator,
    hologram: &ComplexField,
    plan: &LayerPlan,
    config: &OpticalConfig,
    channel: usize,
) -> Result<Vec<ScalarField>> {
    let grid = *plan.grid();
    (0..grid.n_layers)
        .into_par_iter()
        .map(|i| reconstruct_at(propagator, hologram, grid.z_of(i), config, channel).map(|f| amplitude_of(&f)))
        .collect()
}

/// All-in-focus image: each pixel takes the reconstructed amplitude at the
/// layer its depth falls in. Pixels outside every band (invalid depth) are 0.
pub fn focal_image_projection(
    propagator: &Propagator,
    hologram: &ComplexField,
    frame: &RgbdFrame,
    plan: &LayerPlan,
    channel: usize,
) -> Result<ScalarField> {
    let grid = *plan.grid();
    let cfg = &frame.config;
    let slices = (0..grid.n_layers)
        .into_par_iter()
        .filter(|&i| !plan.assignment.band_is_empty(i, 1))
        .map(|i| -> Result<(usize, ScalarField)> {
            let amp = amplitude_of(&reconstruct_at(propagator, hologram, grid.z_of(i), cfg, channel)?);
            Ok((i, amp))
        })
        .collect::<Result<Vec<_>>>()?;
    let (w, h) = hologram.shape();
    let mut out = ScalarField::zeros(w, h)?;
    for (i, amp) in slices {
        let mask = plan.assignment.band_mask(i, 1)?;
        for ((o, &a), &m) in out.data_mut().iter_mut().zip(amp.data()).zip(mask.data()) {
            if m {
                *o += a;
            }
        }
    }
    Ok(out)
}

fn check_pair(a: &ScalarField, b: &ScalarField) -> Result<()> {
    a.ensure_same_shape(b, "metric inputs")?;
    if a.is_empty() {
        return Err(CghError::Dimension("metric inputs are empty".into()));
    }
    Ok(())
}

/// Peak signal-to-noise ratio in dB for a peak value of 1. Identical images
/// give `f64::INFINITY`.
pub fn psnr(reference: &ScalarField, test: &ScalarField) -> Result<f64> {
    check_pair(reference, test)?;
    let mse = reference
        .data()
        .iter()
        .zip(test.data())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / reference.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-10.0 * mse.log10())
}

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn gaussian_taps() -> [f64; SSIM_WINDOW] {
    let r = (SSIM_WINDOW / 2) as f64;
    let mut taps = [0.0; SSIM_WINDOW];
    for (i, t) in taps.iter_mut().enumerate() {
        let x = i as f64 - r;
        *t = (-0.5 * x * x / (SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= s);
    taps
}

/// Separable Gaussian filter evaluated only where the window fits.
fn filter_valid(data: &[f64], w: usize, h: usize, taps: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        let line = &data[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = taps.iter().zip(&line[x..x + SSIM_WINDOW]).map(|(t, v)| t * v).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = taps.iter().enumerate().map(|(k, t)| t * rows[(y + k) * ow + x]).sum();
        }
    }
    out
}

/// Structural similarity with an 11×11 Gaussian window (σ = 1.5), data range
/// 1 and population statistics, averaged over all fully contained windows.
pub fn ssim(reference: &ScalarField, test: &ScalarField) -> Result<f64> {
    check_pair(reference, test)?;
    let (w, h) = reference.shape();
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(CghError::Dimension(format!("SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels")));
    }
    let taps = gaussian_taps();
    let x = reference.data();
    let y = test.data();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    let mx = filter_valid(x, w, h, &taps);
    let my = filter_valid(y, w, h, &taps);
    let mxx = filter_valid(&xx, w, h, &taps);
    let myy = filter_valid(&yy, w, h, &taps);
    let mxy = filter_valid(&xy, w, h, &taps);
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let total: f64 = (0..mx.len())
        .map(|i| {
            let vx = mxx[i] - mx[i] * mx[i];
            let vy = myy[i] - my[i] * my[i];
            let cxy = mxy[i] - mx[i] * my[i];
            ((2.0 * mx[i] * my[i] + c1) * (2.0 * cxy + c2))
                / ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / mx.len() as f64)
}

/// Metrics of one channel of one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub sample_id: String,
    pub method: Method,
    pub channel: usize,
    pub psnr: f64,
    pub ssim: f64,
}

/// Scores every channel of `sample` by comparing its focal image projection
/// with the frame intensity. The projection uses the frame's layer count.
pub fn evaluate_sample(
    propagator: &Propagator,
    sample: &HologramSample,
    frame: &RgbdFrame,
    sample_id: &str,
) -> Result<Vec<MetricsRecord>> {
    evaluate_sample_with(propagator, sample, frame, &LayerPlan::new(frame)?, sample_id)
}

/// Like [`evaluate_sample`] with an explicit projection plan, e.g. one built
/// by [`LayerPlan::with_layers`] to decouple evaluation from generation.
pub fn evaluate_sample_with(
    propagator: &Propagator,
    sample: &HologramSample,
    frame: &RgbdFrame,
    plan: &LayerPlan,
    sample_id: &str,
) -> Result<Vec<MetricsRecord>> {
    if sample.channels.len() != frame.channels() {
        return Err(CghError::Dimension(format!(
            "sample has {} channels, frame has {}",
            sample.channels.len(),
            frame.channels()
        )));
    }
    sample
        .channels
        .iter()
        .enumerate()
        .map(|(c, holo)| {
            let fip = focal_image_projection(propagator, holo, frame, plan, c)?;
            let target = frame.intensity(c)?;
            Ok(MetricsRecord {
                sample_id: sample_id.to_string(),
                method: sample.method,
                channel: c,
                psnr: psnr(target, &fip)?,
                ssim: ssim(target, &fip)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub min: f64,
    pub avg: f64,
    pub max: f64,
    pub count: usize,
}

impl Summary {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Summary> {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut sum = 0.0;
        let mut count = 0;
        for v in values {
            min = min.min(v);
            max = max.max(v);
            sum += v;
            count += 1;
        }
        (count > 0).then(|| Summary {
            min,
            avg: sum / count as f64,
            max,
            count,
        })
    }
}

/// Mean PSNR over the channels of one sample; the per-sample figure used
/// when comparing methods.
pub fn mean_psnr(records: &[MetricsRecord]) -> Option<f64> {
    Summary::of(records.iter().map(|r| r.psnr)).map(|s| s.avg)
}

/// Convenience for a grayscale image as a [`Grid`].
pub fn image_from_fn(width: usize, height: usize, f: impl FnMut(usize, usize) -> f64) -> Result<ScalarField> {
    Grid::from_fn(width, height, f)
}
