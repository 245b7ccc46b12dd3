//! Complex wavefields, real-valued images and binary masks.
//!
//! All grids are stored row-major (`data[y * width + x]`). Values are kept in
//! double precision; file interchange narrows to `f32` in [`crate::storage`].

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{CghError, Result};

/// A `width × height` row-major grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

/// Real-valued image: intensity, depth, amplitude or phase.
pub type ScalarField = Grid<f64>;

/// Per-pixel occupancy.
pub type BinaryMask = Grid<bool>;

impl<T: Clone> Grid<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Result<Self> {
        check_shape(width, height)?;
        Ok(Grid {
            width,
            height,
            data: vec![value; width * height],
        })
    }
}

impl<T> Grid<T> {
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        check_shape(width, height)?;
        if data.len() != width * height {
            return Err(CghError::Dimension(format!(
                "expected {} values for a {width}x{height} grid, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Grid {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        check_shape(width, height)?;
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Ok(Grid {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: T) {
        self.data[y * self.width + x] = value;
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn ensure_same_shape<U>(&self, other: &Grid<U>, what: &str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(CghError::Dimension(format!(
                "{what}: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }
}

impl ScalarField {
    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::filled(width, height, 0.0)
    }

    pub fn max_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, factor: f64) -> Self {
        self.map(|v| v * factor)
    }
}

impl BinaryMask {
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn any(&self) -> bool {
        self.data.iter().any(|&b| b)
    }

    pub fn or(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.ensure_same_shape(other, "mask union")?;
        Ok(Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a || b).collect(),
        })
    }

    pub fn and(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.ensure_same_shape(other, "mask intersection")?;
        Ok(Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| a && b).collect(),
        })
    }
}

fn check_shape(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(CghError::Dimension(format!(
            "grid dimensions must be positive, got {width}x{height}"
        )));
    }
    Ok(())
}

/// A monochromatic wavefront sampled on one plane.
///
/// `plane_z` is the signed distance of the plane from the hologram plane,
/// positive toward the scene.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    values: Grid<Complex64>,
    plane_z: f64,
}

impl ComplexField {
    pub fn new(values: Grid<Complex64>, plane_z: f64) -> Result<Self> {
        if let Some(bad) = values.data.iter().position(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(CghError::Domain(format!(
                "non-finite complex value at index {bad}"
            )));
        }
        Ok(ComplexField { values, plane_z })
    }

    /// Constructor for internal callers that already guarantee finiteness.
    pub(crate) fn from_grid_unchecked(values: Grid<Complex64>, plane_z: f64) -> Self {
        debug_assert!(values.data.iter().all(|c| c.re.is_finite() && c.im.is_finite()));
        ComplexField { values, plane_z }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<Complex64>, plane_z: f64) -> Result<Self> {
        Self::new(Grid::from_vec(width, height, data)?, plane_z)
    }

    pub fn zeros(width: usize, height: usize, plane_z: f64) -> Result<Self> {
        Ok(ComplexField {
            values: Grid::filled(width, height, Complex64::new(0.0, 0.0))?,
            plane_z,
        })
    }

    pub fn ones(width: usize, height: usize, plane_z: f64) -> Result<Self> {
        Ok(ComplexField {
            values: Grid::filled(width, height, Complex64::new(1.0, 0.0))?,
            plane_z,
        })
    }

    /// Promotes a real image to a complex field with zero phase.
    pub fn from_real(image: &ScalarField, plane_z: f64) -> Result<Self> {
        Self::new(image.map(|&v| Complex64::new(v, 0.0)), plane_z)
    }

    pub fn width(&self) -> usize {
        self.values.width
    }

    pub fn height(&self) -> usize {
        self.values.height
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.shape()
    }

    pub fn plane_z(&self) -> f64 {
        self.plane_z
    }

    pub fn with_plane_z(mut self, plane_z: f64) -> Self {
        self.plane_z = plane_z;
        self
    }

    pub fn data(&self) -> &[Complex64] {
        &self.values.data
    }

    pub fn grid(&self) -> &Grid<Complex64> {
        &self.values
    }

    pub fn into_grid(self) -> Grid<Complex64> {
        self.values
    }

    pub fn get(&self, x: usize, y: usize) -> Complex64 {
        *self.values.get(x, y)
    }

    pub fn scaled(&self, factor: Complex64) -> Result<Self> {
        Self::new(self.values.map(|&c| c * factor), self.plane_z)
    }

    /// Elementwise sum; planes must agree.
    pub fn add(&self, other: &ComplexField) -> Result<Self> {
        self.values.ensure_same_shape(&other.values, "field sum")?;
        let data = self
            .values
            .data
            .iter()
            .zip(&other.values.data)
            .map(|(a, b)| a + b)
            .collect();
        Self::from_vec(self.width(), self.height(), data, self.plane_z)
    }

    pub fn energy(&self) -> f64 {
        self.values.data.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn max_modulus(&self) -> f64 {
        self.values.data.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

/// Keeps `field` where `mask` is set and zeroes it elsewhere.
pub fn hadamard(field: &ComplexField, mask: &BinaryMask) -> Result<ComplexField> {
    field.values.ensure_same_shape(mask, "hadamard")?;
    let zero = Complex64::new(0.0, 0.0);
    let data = field
        .values
        .data
        .iter()
        .zip(mask.data())
        .map(|(&c, &m)| if m { c } else { zero })
        .collect();
    Ok(ComplexField::from_grid_unchecked(
        Grid::from_vec(field.width(), field.height(), data)?,
        field.plane_z,
    ))
}

pub fn complement(mask: &BinaryMask) -> BinaryMask {
    mask.map(|&m| !m)
}

pub fn amplitude_of(field: &ComplexField) -> ScalarField {
    field.values.map(|c| c.norm())
}

/// Argument in `(-π, π]`, with `arg(0) = 0`.
pub fn phase_of(field: &ComplexField) -> ScalarField {
    field.values.map(|&c| arg(c))
}

/// Argument of a single value, normalized to `(-π, π]` with `arg(0) = 0`.
pub fn arg(c: Complex64) -> f64 {
    if c.re == 0.0 && c.im == 0.0 {
        return 0.0;
    }
    let a = c.im.atan2(c.re);
    // atan2(-0.0, x<0) returns -π
    if a <= -PI {
        PI
    } else {
        a
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_phase(angle: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let mut a = angle.rem_euclid(two_pi);
    if a > PI {
        a -= two_pi;
    }
    if a <= -PI {
        a += two_pi;
    }
    a
}

pub fn from_amplitude_phase(amp: &ScalarField, phase: &ScalarField) -> Result<ComplexField> {
    amp.ensure_same_shape(phase, "amplitude/phase")?;
    if let Some(i) = amp.data().iter().position(|&a| a < 0.0 || !a.is_finite()) {
        return Err(CghError::Domain(format!(
            "amplitude must be finite and non-negative (index {i}: {})",
            amp.data()[i]
        )));
    }
    let data = amp
        .data()
        .iter()
        .zip(phase.data())
        .map(|(&a, &p)| Complex64::from_polar(a, p))
        .collect();
    ComplexField::from_vec(amp.width(), amp.height(), data, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn mask(w: usize, h: usize, bits: &[u8]) -> BinaryMask {
        Grid::from_vec(w, h, bits.iter().map(|&b| b == 1).collect()).unwrap()
    }

    #[test]
    fn hadamard_selects_by_hand() {
        let f = ComplexField::from_vec(2, 2, vec![c(1.0, 1.0), c(2.0, 0.0), c(3.0, 0.0), c(0.0, 4.0)], 0.5).unwrap();
        let out = hadamard(&f, &mask(2, 2, &[1, 0, 0, 1])).unwrap();
        assert_eq!(out.data(), &[c(1.0, 1.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 4.0)]);
        assert_eq!(out.plane_z(), 0.5);
    }

    #[test]
    fn hadamard_identity_and_annihilator() {
        let f = ComplexField::from_vec(3, 1, vec![c(1.0, -2.0), c(0.5, 0.5), c(-3.0, 0.0)], 0.0).unwrap();
        let ones = Grid::filled(3, 1, true).unwrap();
        let zeros = Grid::filled(3, 1, false).unwrap();
        assert_eq!(hadamard(&f, &ones).unwrap(), f);
        assert!(hadamard(&f, &zeros).unwrap().data().iter().all(|v| *v == c(0.0, 0.0)));
    }

    #[test]
    fn hadamard_rejects_shape_mismatch() {
        let f = ComplexField::zeros(2, 2, 0.0).unwrap();
        let m = Grid::filled(2, 3, true).unwrap();
        assert!(matches!(hadamard(&f, &m), Err(CghError::Dimension(_))));
    }

    #[test]
    fn complement_by_hand() {
        assert_eq!(complement(&mask(2, 2, &[1, 0, 0, 1])), mask(2, 2, &[0, 1, 1, 0]));
        assert_eq!(complement(&mask(2, 1, &[1, 1])), mask(2, 1, &[0, 0]));
    }

    #[test]
    fn amplitude_and_phase_values() {
        let f = ComplexField::from_vec(4, 1, vec![c(3.0, 4.0), c(0.0, 1.0), c(2.5, 0.0), c(0.0, 0.0)], 0.0).unwrap();
        let a = amplitude_of(&f);
        assert_eq!(a.data(), &[5.0, 1.0, 2.5, 0.0]);
        let p = phase_of(&f);
        assert!((p.data()[1] - PI / 2.0).abs() < 1e-15);
        assert_eq!(p.data()[2], 0.0);
        assert_eq!(p.data()[3], 0.0);
    }

    #[test]
    fn unit_phasors_have_unit_amplitude() {
        let f = ComplexField::from_vec(8, 1, (0..8).map(|k| Complex64::from_polar(1.0, k as f64 * 0.7)).collect(), 0.0).unwrap();
        assert!(amplitude_of(&f).data().iter().all(|a| (a - 1.0).abs() < 1e-15));
    }

    #[test]
    fn negative_zero_imaginary_maps_to_pi() {
        assert_eq!(arg(c(-1.0, -0.0)), PI);
        assert_eq!(arg(c(-0.0, 0.0)), 0.0);
    }

    #[test]
    fn from_amplitude_phase_cases() {
        let one = ScalarField::filled(2, 2, 1.0).unwrap();
        let zero = ScalarField::zeros(2, 2).unwrap();
        let f = from_amplitude_phase(&one, &zero).unwrap();
        assert!(f.data().iter().all(|v| *v == c(1.0, 0.0)));

        let amp = ScalarField::filled(1, 1, 2.0).unwrap();
        let ph = ScalarField::filled(1, 1, PI).unwrap();
        let g = from_amplitude_phase(&amp, &ph).unwrap();
        assert!((g.data()[0] - c(-2.0, 0.0)).norm() < 1e-15);

        let neg = ScalarField::filled(1, 1, -1.0).unwrap();
        assert!(matches!(from_amplitude_phase(&neg, &ph), Err(CghError::Domain(_))));
    }

    #[test]
    fn rejects_non_finite_and_empty() {
        assert!(ComplexField::from_vec(1, 1, vec![c(f64::NAN, 0.0)], 0.0).is_err());
        assert!(ScalarField::zeros(0, 3).is_err());
        assert!(Grid::from_vec(2, 2, vec![1.0; 3]).is_err());
    }

    fn field_strategy() -> impl Strategy<Value = ComplexField> {
        (1usize..6, 1usize..6).prop_flat_map(|(w, h)| {
            prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), w * h).prop_map(move |v| {
                ComplexField::from_vec(w, h, v.into_iter().map(|(a, b)| c(a, b)).collect(), 0.0).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn masking_splits_field_exactly(f in field_strategy(), seed in any::<u64>()) {
            let m = Grid::from_fn(f.width(), f.height(), |x, y| (seed >> ((x + 3 * y) % 64)) & 1 == 1).unwrap();
            let kept = hadamard(&f, &m).unwrap();
            prop_assert_eq!(hadamard(&kept, &m).unwrap(), kept.clone());
            let rest = hadamard(&f, &complement(&m)).unwrap();
            prop_assert_eq!(kept.add(&rest).unwrap(), f);
            prop_assert_eq!(complement(&complement(&m)), m);
        }

        #[test]
        fn polar_round_trip(f in field_strategy()) {
            prop_assume!(f.data().iter().all(|v| v.norm() > 1e-3));
            let back = from_amplitude_phase(&amplitude_of(&f), &phase_of(&f)).unwrap();
            for (a, b) in back.data().iter().zip(f.data()) {
                prop_assert!((a - b).norm() <= 1e-12 * b.norm());
            }
        }

        #[test]
        fn phase_commutes_with_global_rotation(f in field_strategy(), alpha in -6.0f64..6.0) {
            let rotated = f.scaled(Complex64::from_polar(1.0, alpha)).unwrap();
            let p0 = phase_of(&f);
            let p1 = phase_of(&rotated);
            let a0 = amplitude_of(&f);
            let a1 = amplitude_of(&rotated);
            for i in 0..f.data().len() {
                if f.data()[i].norm() < 1e-9 { continue; }
                let d = wrap_phase(p1.data()[i] - wrap_phase(p0.data()[i] + alpha));
                prop_assert!(d.abs() < 1e-9);
                prop_assert!((a1.data()[i] - a0.data()[i]).abs() < 1e-12 * (1.0 + a0.data()[i]));
            }
        }

        #[test]
        fn phases_stay_in_half_open_interval(f in field_strategy()) {
            prop_assert!(phase_of(&f).data().iter().all(|&p| p > -PI && p <= PI));
        }
    }
}
