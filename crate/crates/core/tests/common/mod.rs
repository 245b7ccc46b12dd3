#![allow(dead_code)]

use std::f64::consts::PI;

use layercgh::{ComplexField, Grid, OpticalConfig, RgbdFrame, ScalarField};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_field(w: usize, h: usize, seed: u64) -> ComplexField {
    let mut r = rng(seed);
    let data = (0..w * h)
        .map(|_| Complex64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)))
        .collect();
    ComplexField::from_vec(w, h, data, 0.0).unwrap()
}

/// Sum of a few low spatial frequencies (up to `kmax` cycles per window)
/// under a centered Gaussian envelope, scaled to peak modulus 1.
pub fn smooth_field(n: usize, kmax: f64, sigma: f64, seed: u64) -> ComplexField {
    let mut r = rng(seed);
    let terms: Vec<(f64, f64, Complex64)> = (0..40)
        .map(|_| {
            (
                r.gen_range(-kmax..kmax),
                r.gen_range(-kmax..kmax),
                Complex64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)),
            )
        })
        .collect();
    let c = n as f64 / 2.0;
    let data: Vec<Complex64> = (0..n * n)
        .map(|p| {
            let (x, y) = ((p % n) as f64, (p / n) as f64);
            let env = (-((x - c).powi(2) + (y - c).powi(2)) / (2.0 * sigma * sigma)).exp();
            let s: Complex64 = terms
                .iter()
                .map(|(u, v, a)| a * Complex64::from_polar(1.0, 2.0 * PI * (u * x + v * y) / n as f64))
                .sum();
            s * env
        })
        .collect();
    let f = ComplexField::from_vec(n, n, data, 0.0).unwrap();
    let peak = f.max_modulus();
    f.scaled(Complex64::new(1.0 / peak, 0.0)).unwrap()
}

pub fn complex_psnr(reference: &ComplexField, test: &ComplexField) -> f64 {
    let peak = reference.max_modulus();
    let mse: f64 = reference
        .data()
        .iter()
        .zip(test.data())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        / reference.data().len() as f64;
    10.0 * (peak * peak / mse).log10()
}

pub fn max_abs_diff(a: &ComplexField, b: &ComplexField) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Brute-force angular spectrum propagation: centered 2x zero padding,
/// direct O(N^4) DFTs and the band-limited transfer function written out
/// from its definition.
pub fn naive_asm(field: &ComplexField, z: f64, config: &OpticalConfig, channel: usize) -> ComplexField {
    let (w, h) = field.shape();
    let (pw, ph) = (2 * w, 2 * h);
    let (ox, oy) = (w / 2, h / 2);
    let mut padded = vec![Complex64::new(0.0, 0.0); pw * ph];
    for y in 0..h {
        for x in 0..w {
            padded[(y + oy) * pw + x + ox] = field.get(x, y);
        }
    }
    let lambda = config.wavelengths[channel];
    let dx = config.pixel_pitch;
    let freq = |k: usize, n: usize| {
        let s = if k < n / 2 { k as f64 } else { k as f64 - n as f64 };
        s / (n as f64 * dx)
    };
    let limit = |n: usize| {
        let df = 1.0 / (n as f64 * dx);
        1.0 / (lambda * ((2.0 * df * z).powi(2) + 1.0).sqrt())
    };
    let (lx, ly) = (limit(pw), limit(ph));
    let mut spectrum = vec![Complex64::new(0.0, 0.0); pw * ph];
    for v in 0..ph {
        for u in 0..pw {
            let mut acc = Complex64::new(0.0, 0.0);
            for y in 0..ph {
                for x in 0..pw {
                    let ang = -2.0 * PI * ((u * x) as f64 / pw as f64 + (v * y) as f64 / ph as f64);
                    acc += padded[y * pw + x] * Complex64::from_polar(1.0, ang);
                }
            }
            let (fx, fy) = (freq(u, pw), freq(v, ph));
            let rad = 1.0 / (lambda * lambda) - fx * fx - fy * fy;
            let tf = if rad < 0.0 || fx.abs() > lx || fy.abs() > ly {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::from_polar(1.0, 2.0 * PI * z * rad.sqrt())
            };
            spectrum[v * pw + u] = acc * tf;
        }
    }
    let mut out = vec![Complex64::new(0.0, 0.0); w * h];
    for y in 0..h {
        for x in 0..w {
            let (px, py) = (x + ox, y + oy);
            let mut acc = Complex64::new(0.0, 0.0);
            for v in 0..ph {
                for u in 0..pw {
                    let ang = 2.0 * PI * ((u * px) as f64 / pw as f64 + (v * py) as f64 / ph as f64);
                    acc += spectrum[v * pw + u] * Complex64::from_polar(1.0, ang);
                }
            }
            out[y * w + x] = acc / (pw * ph) as f64;
        }
    }
    ComplexField::from_vec(w, h, out, field.plane_z() + z).unwrap()
}

/// Single-channel frame whose valid pixels all sit at depth `z`.
pub fn flat_frame(config: &OpticalConfig, z: f64, image: ScalarField, validity: Grid<bool>) -> RgbdFrame {
    let depth = Grid::from_fn(config.width, config.height, |x, y| {
        if *validity.get(x, y) {
            z / config.depth_range
        } else {
            1.0
        }
    })
    .unwrap();
    let intensity = (0..config.channels()).map(|_| image.clone()).collect();
    RgbdFrame::new(intensity, depth, validity, config.clone()).unwrap()
}

/// Smooth texture in [0.2, 1] on a centered disc covering most of the grid.
pub fn disc_scene(n: usize) -> (ScalarField, Grid<bool>) {
    let c = n as f64 / 2.0;
    let r = n as f64 * 0.3;
    let valid = Grid::from_fn(n, n, |x, y| ((x as f64 + 0.5 - c).powi(2) + (y as f64 + 0.5 - c).powi(2)).sqrt() <= r).unwrap();
    let img = Grid::from_fn(n, n, |x, y| {
        if *valid.get(x, y) {
            0.6 + 0.4 * (2.0 * PI * x as f64 / n as f64 * 3.0).sin() * (2.0 * PI * y as f64 / n as f64 * 2.0).cos()
        } else {
            0.0
        }
    })
    .unwrap();
    (img.map(|v| v.clamp(0.0, 1.0)), valid)
}
