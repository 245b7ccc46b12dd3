//! Two-dimensional complex FFT on row-major buffers, built from `rustfft`
//! row transforms plus a transpose for the column pass.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub struct Fft2 {
    width: usize,
    height: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(width: usize, height: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            width,
            height,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    /// Unnormalized forward transform, in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.row_fwd, &self.col_fwd);
    }

    /// Inverse transform normalized by `1 / (width·height)`, in place.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.row_inv, &self.col_inv);
        let norm = 1.0 / (self.width * self.height) as f64;
        for v in data.iter_mut() {
            *v *= norm;
        }
    }

    fn run(&self, data: &mut [Complex64], row: &Arc<dyn Fft<f64>>, col: &Arc<dyn Fft<f64>>) {
        assert_eq!(data.len(), self.width * self.height, "buffer does not match plan");
        let mut scratch = vec![Complex64::new(0.0, 0.0); row.get_inplace_scratch_len().max(col.get_inplace_scratch_len())];
        row.process_with_scratch(data, &mut scratch);
        let mut transposed = vec![Complex64::new(0.0, 0.0); data.len()];
        transpose(data, &mut transposed, self.width, self.height);
        col.process_with_scratch(&mut transposed, &mut scratch);
        transpose(&transposed, data, self.height, self.width);
    }
}

/// `src` is `height` rows of `width`; `dst` receives `width` rows of `height`.
fn transpose(src: &[Complex64], dst: &mut [Complex64], width: usize, height: usize) {
    const BLOCK: usize = 16;
    for yb in (0..height).step_by(BLOCK) {
        for xb in (0..width).step_by(BLOCK) {
            for y in yb..(yb + BLOCK).min(height) {
                for x in xb..(xb + BLOCK).min(width) {
                    dst[x * height + y] = src[y * width + x];
                }
            }
        }
    }
}

/// Moves the zero-frequency bin to the center (`numpy.fft.fftshift`).
pub fn fftshift(data: &mut [Complex64], width: usize, height: usize) {
    roll(data, width, height, width / 2, height / 2);
}

/// Inverse of [`fftshift`].
pub fn ifftshift(data: &mut [Complex64], width: usize, height: usize) {
    roll(data, width, height, width - width / 2, height - height / 2);
}

fn roll(data: &mut [Complex64], width: usize, height: usize, dx: usize, dy: usize) {
    let src = data.to_vec();
    for y in 0..height {
        let ny = (y + dy) % height;
        for x in 0..width {
            data[ny * width + (x + dx) % width] = src[y * width + x];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dft(data: &[Complex64], w: usize, h: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); w * h];
        for v in 0..h {
            for u in 0..w {
                let mut acc = Complex64::new(0.0, 0.0);
                for y in 0..h {
                    for x in 0..w {
                        let a = -2.0 * std::f64::consts::PI * ((u * x) as f64 / w as f64 + (v * y) as f64 / h as f64);
                        acc += data[y * w + x] * Complex64::from_polar(1.0, a);
                    }
                }
                out[v * w + u] = acc;
            }
        }
        out
    }

    #[test]
    fn matches_naive_dft_on_rectangular_grid() {
        let (w, h) = (6, 4);
        let data: Vec<_> = (0..w * h).map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 1.3).cos())).collect();
        let mut fast = data.clone();
        Fft2::new(w, h).forward(&mut fast);
        for (a, b) in fast.iter().zip(naive_dft(&data, w, h)) {
            assert!((a - b).norm() < 1e-12);
        }
        Fft2::new(w, h).inverse(&mut fast);
        for (a, b) in fast.iter().zip(&data) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn shift_round_trip_and_center() {
        let (w, h) = (4, 2);
        let mut d: Vec<_> = (0..8).map(|i| Complex64::new(i as f64, 0.0)).collect();
        let orig = d.clone();
        fftshift(&mut d, w, h);
        // DC (index 0) lands at (w/2, h/2)
        assert_eq!(d[(h / 2) * w + w / 2], orig[0]);
        ifftshift(&mut d, w, h);
        assert_eq!(d, orig);
    }
}
