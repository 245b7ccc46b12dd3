//! Angular spectrum propagation between parallel planes.
//!
//! A field is padded (2× per axis), transformed, multiplied by the transfer
//! function
//!
//! ```text
//! H(fx, fy; z) = exp(i·2π·z·sqrt(1/λ² − fx² − fy²))
//! ```
//!
//! and transformed back before cropping to the original window. Evanescent
//! frequencies are zeroed. With `band_limited` set, frequencies beyond the
//! local-frequency bound `1 / (λ·sqrt((2·Δf·z)² + 1))` are also zeroed, per
//! axis.
//!
//! Positive `z` points from the hologram plane toward the scene.

use std::collections::{HashMap, VecDeque};
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, RwLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::OpticalConfig;
use crate::error::{CghError, Result};
use crate::fft::{fftshift, ifftshift, Fft2};
use crate::field::{ComplexField, Grid};
use crate::scene::compute_z_max;

pub const PADDING_FACTOR: usize = 2;

/// Denominators below this modulus are left undivided by ringing correction.
pub const RINGING_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PaddingMode {
    #[default]
    Zero,
    /// Replicate border pixels outward.
    Edge,
}

impl std::str::FromStr for PaddingMode {
    type Err = CghError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(PaddingMode::Zero),
            "edge" | "replicate" => Ok(PaddingMode::Edge),
            other => Err(CghError::Config(format!("unknown padding mode `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagationOptions {
    pub padding: PaddingMode,
    pub band_limited: bool,
    pub ringing_correction: bool,
    pub fft_shift: bool,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        PropagationOptions {
            padding: PaddingMode::Zero,
            band_limited: true,
            ringing_correction: false,
            fft_shift: true,
        }
    }
}

/// Spectral filter for one (shape, wavelength, distance) triple, stored in
/// centered (shifted) frequency order: index `j` along an axis of length `W`
/// holds frequency `(j − W/2) / (W·Δx)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferFunction {
    pub width: usize,
    pub height: usize,
    pub z: f64,
    pub wavelength: f64,
    pub data: Vec<Complex64>,
}

impl TransferFunction {
    pub fn get(&self, fx_index: usize, fy_index: usize) -> Complex64 {
        self.data[fy_index * self.width + fx_index]
    }

    /// Value for a bin in natural FFT order.
    fn natural(&self, x: usize, y: usize) -> Complex64 {
        let jx = (x + self.width / 2) % self.width;
        let jy = (y + self.height / 2) % self.height;
        self.data[jy * self.width + jx]
    }

    fn byte_size(&self) -> usize {
        self.data.len() * std::mem::size_of::<Complex64>()
    }
}

pub fn make_transfer_function(
    config: &OpticalConfig,
    channel: usize,
    padded_shape: (usize, usize),
    z: f64,
    options: &PropagationOptions,
) -> Result<TransferFunction> {
    let wavelength = config.wavelength(channel)?;
    if !(wavelength > 0.0 && wavelength.is_finite()) {
        return Err(CghError::Config(format!("wavelength must be > 0, got {wavelength}")));
    }
    if !(config.pixel_pitch > 0.0) {
        return Err(CghError::Config(format!("pixel pitch must be > 0, got {}", config.pixel_pitch)));
    }
    let (w, h) = padded_shape;
    if w == 0 || h == 0 || w % 2 != 0 || h % 2 != 0 {
        return Err(CghError::Dimension(format!("padded shape must be even and non-empty, got {w}x{h}")));
    }
    if !z.is_finite() {
        return Err(CghError::Domain(format!("propagation distance must be finite, got {z}")));
    }
    if let Ok(limit) = compute_z_max(config, channel) {
        if z.abs() > limit * (1.0 + 1e-12) {
            log::warn!(
                "|z| = {:.4} mm exceeds z_max = {:.4} mm for channel {channel}; expect aliasing",
                z.abs() * 1e3,
                limit * 1e3
            );
        }
    }

    let pitch = config.pixel_pitch;
    let dfx = 1.0 / (w as f64 * pitch);
    let dfy = 1.0 / (h as f64 * pitch);
    let inv_l2 = 1.0 / (wavelength * wavelength);
    let fx_limit = 1.0 / (wavelength * ((2.0 * dfx * z).powi(2) + 1.0).sqrt());
    let fy_limit = 1.0 / (wavelength * ((2.0 * dfy * z).powi(2) + 1.0).sqrt());

    let mut data = Vec::with_capacity(w * h);
    for jy in 0..h {
        let fy = (jy as f64 - (h / 2) as f64) * dfy;
        for jx in 0..w {
            let fx = (jx as f64 - (w / 2) as f64) * dfx;
            let radicand = inv_l2 - fx * fx - fy * fy;
            let outside_band = options.band_limited && (fx.abs() > fx_limit || fy.abs() > fy_limit);
            if radicand < 0.0 || outside_band {
                data.push(Complex64::new(0.0, 0.0));
            } else {
                data.push(Complex64::from_polar(1.0, 2.0 * PI * z * radicand.sqrt()));
            }
        }
    }
    Ok(TransferFunction {
        width: w,
        height: h,
        z,
        wavelength,
        data,
    })
}

/// Pads `field` to `width × height`, centered. Offsets are `(W − w) / 2`.
pub fn pad_to(field: &ComplexField, width: usize, height: usize, mode: PaddingMode) -> Result<ComplexField> {
    let (w, h) = field.shape();
    if width < w || height < h {
        return Err(CghError::Dimension(format!("cannot pad {w}x{h} down to {width}x{height}")));
    }
    let ox = (width - w) / 2;
    let oy = (height - h) / 2;
    let src = field.data();
    let grid = match mode {
        PaddingMode::Zero => Grid::from_fn(width, height, |x, y| {
            if x >= ox && x < ox + w && y >= oy && y < oy + h {
                src[(y - oy) * w + (x - ox)]
            } else {
                Complex64::new(0.0, 0.0)
            }
        })?,
        PaddingMode::Edge => Grid::from_fn(width, height, |x, y| {
            let sx = x.saturating_sub(ox).min(w - 1);
            let sy = y.saturating_sub(oy).min(h - 1);
            src[sy * w + sx]
        })?,
    };
    Ok(ComplexField::from_grid_unchecked(grid, field.plane_z()))
}

/// Extracts the centered `width × height` window placed by [`pad_to`].
pub fn crop_to(field: &ComplexField, width: usize, height: usize) -> Result<ComplexField> {
    let (pw, ph) = field.shape();
    if width > pw || height > ph {
        return Err(CghError::Dimension(format!("cannot crop {pw}x{ph} to {width}x{height}")));
    }
    let ox = (pw - width) / 2;
    let oy = (ph - height) / 2;
    let src = field.data();
    let grid = Grid::from_fn(width, height, |x, y| src[(y + oy) * pw + (x + ox)])?;
    Ok(ComplexField::from_grid_unchecked(grid, field.plane_z()))
}

pub fn padded_shape(width: usize, height: usize) -> (usize, usize) {
    (width * PADDING_FACTOR, height * PADDING_FACTOR)
}

pub fn apply_padding(field: &ComplexField, options: &PropagationOptions) -> Result<ComplexField> {
    let (pw, ph) = padded_shape(field.width(), field.height());
    pad_to(field, pw, ph, options.padding)
}

pub fn crop_padding(padded: &ComplexField, width: usize, height: usize) -> Result<ComplexField> {
    crop_to(padded, width, height)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct KernelKey {
    width: usize,
    height: usize,
    wavelength: u64,
    pitch: u64,
    z: u64,
    band_limited: bool,
}

impl KernelKey {
    fn new(config: &OpticalConfig, wavelength: f64, shape: (usize, usize), z: f64, band_limited: bool) -> Self {
        KernelKey {
            width: shape.0,
            height: shape.1,
            wavelength: wavelength.to_bits(),
            pitch: config.pixel_pitch.to_bits(),
            z: z.to_bits(),
            band_limited,
        }
    }
}

/// Byte-bounded, insertion-ordered cache shared between threads.
struct BoundedCache<V> {
    inner: RwLock<HashMap<KernelKey, Arc<V>>>,
    order: Mutex<VecDeque<(KernelKey, usize)>>,
    budget: usize,
}

impl<V> BoundedCache<V> {
    fn new(budget: usize) -> Self {
        BoundedCache {
            inner: RwLock::new(HashMap::new()),
            order: Mutex::new(VecDeque::new()),
            budget,
        }
    }

    fn get(&self, key: &KernelKey) -> Option<Arc<V>> {
        self.inner.read().expect("cache lock").get(key).cloned()
    }

    fn insert(&self, key: KernelKey, value: Arc<V>, bytes: usize) -> Arc<V> {
        let mut map = self.inner.write().expect("cache lock");
        if let Some(existing) = map.get(&key) {
            return existing.clone();
        }
        let mut order = self.order.lock().expect("cache order lock");
        let mut used: usize = order.iter().map(|(_, b)| b).sum();
        while used + bytes > self.budget {
            match order.pop_front() {
                Some((old, b)) => {
                    map.remove(&old);
                    used -= b;
                }
                None => break,
            }
        }
        map.insert(key, value.clone());
        order.push_back((key, bytes));
        value
    }

    fn len(&self) -> usize {
        self.inner.read().expect("cache lock").len()
    }
}

/// Default memory budget for cached transfer functions.
pub const DEFAULT_CACHE_BYTES: usize = 512 << 20;

/// Propagation engine: fixed options plus caches for FFT plans, transfer
/// functions and ringing-correction reference fields. Safe to share across
/// threads.
pub struct Propagator {
    options: PropagationOptions,
    plans: RwLock<HashMap<(usize, usize), Arc<Fft2>>>,
    kernels: BoundedCache<TransferFunction>,
    white: BoundedCache<ComplexField>,
}

impl std::fmt::Debug for Propagator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Propagator")
            .field("options", &self.options)
            .field("cached_kernels", &self.kernels.len())
            .finish()
    }
}

impl Default for Propagator {
    fn default() -> Self {
        Self::new(PropagationOptions::default())
    }
}

impl Propagator {
    pub fn new(options: PropagationOptions) -> Self {
        Self::with_cache_budget(options, DEFAULT_CACHE_BYTES)
    }

    pub fn with_cache_budget(options: PropagationOptions, bytes: usize) -> Self {
        Propagator {
            options,
            plans: RwLock::new(HashMap::new()),
            kernels: BoundedCache::new(bytes),
            white: BoundedCache::new(bytes / 4),
        }
    }

    pub fn options(&self) -> &PropagationOptions {
        &self.options
    }

    pub fn cached_kernels(&self) -> usize {
        self.kernels.len()
    }

    fn plan(&self, width: usize, height: usize) -> Arc<Fft2> {
        if let Some(p) = self.plans.read().expect("plan lock").get(&(width, height)) {
            return p.clone();
        }
        let plan = Arc::new(Fft2::new(width, height));
        self.plans
            .write()
            .expect("plan lock")
            .entry((width, height))
            .or_insert(plan)
            .clone()
    }

    pub fn transfer_function(
        &self,
        config: &OpticalConfig,
        channel: usize,
        shape: (usize, usize),
        z: f64,
    ) -> Result<Arc<TransferFunction>> {
        let wavelength = config.wavelength(channel)?;
        let key = KernelKey::new(config, wavelength, shape, z, self.options.band_limited);
        if let Some(tf) = self.kernels.get(&key) {
            return Ok(tf);
        }
        let tf = make_transfer_function(config, channel, shape, z, &self.options)?;
        let bytes = tf.byte_size();
        Ok(self.kernels.insert(key, Arc::new(tf), bytes))
    }

    /// Propagates by `z` (positive toward the scene) without padding or
    /// cropping: the field is filtered on its own (even-sized) grid.
    pub fn propagate_padded(
        &self,
        padded: &ComplexField,
        z: f64,
        config: &OpticalConfig,
        channel: usize,
    ) -> Result<ComplexField> {
        let (w, h) = padded.shape();
        let tf = self.transfer_function(config, channel, (w, h), z)?;
        let plan = self.plan(w, h);
        let mut buf = padded.data().to_vec();
        plan.forward(&mut buf);
        if self.options.fft_shift {
            fftshift(&mut buf, w, h);
            for (v, t) in buf.iter_mut().zip(&tf.data) {
                *v *= t;
            }
            ifftshift(&mut buf, w, h);
        } else {
            for y in 0..h {
                for x in 0..w {
                    buf[y * w + x] *= tf.natural(x, y);
                }
            }
        }
        plan.inverse(&mut buf);
        ComplexField::new(Grid::from_vec(w, h, buf)?, padded.plane_z() + z)
    }

    fn propagate_raw(
        &self,
        field: &ComplexField,
        z: f64,
        config: &OpticalConfig,
        channel: usize,
    ) -> Result<ComplexField> {
        let (w, h) = field.shape();
        let padded = apply_padding(field, &self.options)?;
        let out = self.propagate_padded(&padded, z, config, channel)?;
        crop_padding(&out, w, h)
    }

    /// Propagation of a uniform unit field, used as the ringing reference.
    fn white_response(&self, config: &OpticalConfig, channel: usize, z: f64) -> Result<Arc<ComplexField>> {
        let wavelength = config.wavelength(channel)?;
        let key = KernelKey::new(config, wavelength, (config.width, config.height), z, self.options.band_limited);
        if let Some(w) = self.white.get(&key) {
            return Ok(w);
        }
        let ones = ComplexField::ones(config.width, config.height, 0.0)?;
        let resp = self.propagate_raw(&ones, z, config, channel)?;
        let bytes = resp.data().len() * std::mem::size_of::<Complex64>();
        Ok(self.white.insert(key, Arc::new(resp), bytes))
    }

    pub fn propagate(
        &self,
        field: &ComplexField,
        z: f64,
        config: &OpticalConfig,
        channel: usize,
    ) -> Result<ComplexField> {
        if field.shape() != (config.width, config.height) {
            return Err(CghError::Dimension(format!(
                "field is {}x{} but the configuration is {}x{}",
                field.width(),
                field.height(),
                config.width,
                config.height
            )));
        }
        let out = self.propagate_raw(field, z, config, channel)?;
        if !self.options.ringing_correction {
            return Ok(out);
        }
        let white = self.white_response(config, channel, z)?;
        let data = out
            .data()
            .iter()
            .zip(white.data())
            .map(|(&num, &den)| if den.norm() < RINGING_EPSILON { num } else { num / den })
            .collect();
        ComplexField::from_vec(out.width(), out.height(), data, out.plane_z())
    }
}

/// One-off propagation with fresh caches. Pipelines should hold a
/// [`Propagator`] instead so kernels are reused.
pub fn propagate(
    field: &ComplexField,
    z: f64,
    config: &OpticalConfig,
    channel: usize,
    options: &PropagationOptions,
) -> Result<ComplexField> {
    Propagator::new(*options).propagate(field, z, config, channel)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn small_config(n: usize) -> OpticalConfig {
        let mut cfg = OpticalConfig::for_resolution(n);
        cfg.allow_beyond_zmax = true;
        cfg
    }

    #[test]
    fn zero_padding_counts_and_centering() {
        let f = ComplexField::from_vec(2, 2, vec![c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0), c(4.0, 0.0)], 0.0).unwrap();
        let p = apply_padding(&f, &PropagationOptions::default()).unwrap();
        assert_eq!(p.shape(), (4, 4));
        assert_eq!(p.data().iter().filter(|v| v.norm() == 0.0).count(), 12);
        assert_eq!(p.get(1, 1), c(1.0, 0.0));
        assert_eq!(p.get(2, 2), c(4.0, 0.0));
    }

    #[test]
    fn edge_padding_replicates_by_hand() {
        let (a, b) = (c(1.0, 2.0), c(-3.0, 0.5));
        let f = ComplexField::from_vec(2, 1, vec![a, b], 0.0).unwrap();
        let p = pad_to(&f, 4, 1, PaddingMode::Edge).unwrap();
        assert_eq!(p.data(), &[a, a, b, b]);
    }

    #[test]
    fn crop_inverts_pad_for_both_modes() {
        let f = ComplexField::from_vec(3, 2, (0..6).map(|i| c(i as f64, -(i as f64))).collect(), 1.0).unwrap();
        for mode in [PaddingMode::Zero, PaddingMode::Edge] {
            let opts = PropagationOptions { padding: mode, ..Default::default() };
            let p = apply_padding(&f, &opts).unwrap();
            assert_eq!(crop_padding(&p, 3, 2).unwrap(), f);
        }
    }

    #[test]
    fn transfer_function_identity_and_conjugate_pair() {
        let cfg = small_config(8);
        let opts = PropagationOptions { band_limited: false, ..Default::default() };
        let h0 = make_transfer_function(&cfg, 0, (16, 16), 0.0, &opts).unwrap();
        assert!(h0.data.iter().all(|v| *v == c(1.0, 0.0)));
        let z = 1.7e-3;
        let hp = make_transfer_function(&cfg, 0, (16, 16), z, &opts).unwrap();
        let hm = make_transfer_function(&cfg, 0, (16, 16), -z, &opts).unwrap();
        for (a, b) in hp.data.iter().zip(&hm.data) {
            assert_eq!(a.conj(), *b);
            assert!((a * b - c(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn transfer_function_dc_value() {
        let cfg = small_config(8);
        let lambda = cfg.wavelengths[1];
        for z in [lambda, 3.3e-4] {
            let h = make_transfer_function(&cfg, 1, (16, 16), z, &PropagationOptions::default()).unwrap();
            let dc = h.get(8, 8);
            let expect = Complex64::from_polar(1.0, 2.0 * PI * z / lambda);
            assert!((dc - expect).norm() < 1e-9, "{dc} vs {expect}");
        }
        let h = make_transfer_function(&cfg, 1, (16, 16), lambda, &PropagationOptions::default()).unwrap();
        assert!((h.get(8, 8) - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn band_limit_is_binary_and_evanescent_zeroed() {
        // pitch below λ/2 puts the grid edge in the evanescent region
        let mut cfg = small_config(16);
        cfg.pixel_pitch = 0.25e-6;
        let h = make_transfer_function(&cfg, 0, (32, 32), 0.0, &PropagationOptions::default()).unwrap();
        assert!(h.get(0, 0).norm() == 0.0);
        let far = make_transfer_function(&small_config(16), 0, (32, 32), 0.5, &PropagationOptions::default()).unwrap();
        let zeros = far.data.iter().filter(|v| v.norm() == 0.0).count();
        assert!(zeros > 0);
        assert!(far.data.iter().all(|v| v.norm() == 0.0 || (v.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn rejects_odd_shapes_and_bad_wavelength() {
        let mut cfg = small_config(8);
        let opts = PropagationOptions::default();
        assert!(matches!(make_transfer_function(&cfg, 0, (15, 16), 0.0, &opts), Err(CghError::Dimension(_))));
        cfg.wavelengths[0] = -1.0;
        assert!(matches!(make_transfer_function(&cfg, 0, (16, 16), 0.0, &opts), Err(CghError::Config(_))));
    }

    #[test]
    fn propagate_updates_plane_and_checks_shape() {
        let cfg = small_config(8);
        let f = ComplexField::ones(8, 8, 1e-3).unwrap();
        let p = Propagator::default();
        let out = p.propagate(&f, -2.5e-4, &cfg, 0).unwrap();
        assert!((out.plane_z() - 0.75e-3).abs() < 1e-18);
        let g = ComplexField::ones(4, 8, 0.0).unwrap();
        assert!(matches!(p.propagate(&g, 1e-3, &cfg, 0), Err(CghError::Dimension(_))));
    }

    #[test]
    fn ringing_correction_flattens_uniform_field() {
        let cfg = small_config(16);
        let p = Propagator::new(PropagationOptions { ringing_correction: true, ..Default::default() });
        let out = p.propagate(&ComplexField::ones(16, 16, 0.0).unwrap(), 2e-3, &cfg, 0).unwrap();
        assert!(out.data().iter().all(|v| *v == c(1.0, 0.0)));
    }

    #[test]
    fn shifted_and_natural_layouts_agree() {
        let cfg = small_config(16);
        let f = ComplexField::from_vec(16, 16, (0..256).map(|i| c((i as f64).sin(), (i as f64 * 0.3).cos())).collect(), 0.0).unwrap();
        let a = Propagator::new(PropagationOptions::default()).propagate(&f, 1e-3, &cfg, 2).unwrap();
        let b = Propagator::new(PropagationOptions { fft_shift: false, ..Default::default() })
            .propagate(&f, 1e-3, &cfg, 2)
            .unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).norm() < 1e-14);
        }
    }

    #[test]
    fn kernel_cache_respects_budget() {
        let cfg = small_config(8);
        let bytes = 16 * 16 * 16;
        let p = Propagator::with_cache_budget(PropagationOptions::default(), 2 * bytes);
        for k in 0..5 {
            p.transfer_function(&cfg, 0, (16, 16), k as f64 * 1e-4).unwrap();
        }
        assert_eq!(p.cached_kernels(), 2);
    }
}
