mod common;

use std::f64::consts::PI;

use common::*;
use layercgh::encoding::{dpac_encode_off_axis, max_carrier_angle, phase_to_u16, read_phase_png, u16_to_phase, write_phase_png};
use layercgh::field::{amplitude_of, wrap_phase};
use layercgh::{dpac_decode, dpac_encode, off_axis_ramp, psnr, CghError, ComplexField, Grid, OpticalConfig, TiltAxis};
use num_complex::Complex64;
use rand::Rng;

fn constant(a: f64, phi: f64) -> ComplexField {
    ComplexField::from_vec(4, 4, vec![Complex64::from_polar(a, phi); 16], 0.0).unwrap()
}

fn close(a: f64, b: f64) -> bool {
    wrap_phase(a - b).abs() < 1e-12
}

#[test]
fn analytic_amplitudes() {
    // with a reference pixel at amplitude 1 the normalization stays 1
    for (a, phi, delta) in [(1.0, 0.7, 0.0), (0.5, 0.7, PI / 3.0), (0.0, 0.0, PI / 2.0)] {
        let mut data = vec![Complex64::from_polar(a, phi); 16];
        data[15] = Complex64::from_polar(1.0, phi);
        let f = ComplexField::from_vec(4, 4, data, 0.0).unwrap();
        let ph = dpac_encode(&f).unwrap();
        assert_eq!(ph.normalization, 1.0);
        for y in 0..2 {
            for x in 0..4 {
                let expect = if (x + y) % 2 == 0 { phi + delta } else { phi - delta };
                assert!(close(*ph.phase.get(x, y), expect), "A={a} at ({x},{y})");
            }
        }
        let back = dpac_decode(&ph).unwrap();
        for y in 0..2 {
            for x in 0..4 {
                assert!((back.get(x, y) - Complex64::from_polar(a, phi)).norm() < 1e-12, "A={a}");
            }
        }
    }
}

#[test]
fn phases_stay_in_half_open_interval() {
    let f = random_field(17, 9, 1);
    let ph = dpac_encode(&f).unwrap();
    assert!(ph.phase.data().iter().all(|p| *p > -PI && *p <= PI));
    assert_eq!(ph.phase.shape(), (17, 9));
    assert_eq!(dpac_decode(&ph).unwrap().shape(), (17, 9));
}

#[test]
fn cellwise_constant_fields_decode_exactly() {
    let mut r = rng(8);
    let cells: Vec<Complex64> = (0..16)
        .map(|_| Complex64::from_polar(r.gen_range(0.01..1.0), r.gen_range(-PI..PI)))
        .collect();
    let f = ComplexField::from_vec(8, 8, (0..64).map(|p| cells[(p / 8 / 2) * 4 + (p % 8) / 2]).collect(), 0.0).unwrap();
    let back = dpac_decode(&dpac_encode(&f).unwrap()).unwrap();
    let err = max_abs_diff(&f, &back);
    assert!(err < 1e-9, "{err:e}");
}

#[test]
fn smooth_fields_survive_the_round_trip() {
    for seed in 0..5 {
        let f = smooth_field(128, 2.0, 40.0, seed);
        let back = dpac_decode(&dpac_encode(&f).unwrap()).unwrap();
        let p = psnr(&amplitude_of(&f), &amplitude_of(&back)).unwrap();
        assert!(p >= 30.0, "seed {seed}: {p:.2} dB");
    }
}

#[test]
fn encoding_is_scale_covariant() {
    let f = random_field(12, 12, 4);
    let a = dpac_encode(&f).unwrap();
    let b = dpac_encode(&f.scaled(Complex64::new(3.5, 0.0)).unwrap()).unwrap();
    assert!((b.normalization / a.normalization - 3.5).abs() < 1e-12);
    for (x, y) in a.phase.data().iter().zip(b.phase.data()) {
        assert!(close(*x, *y));
    }
}

#[test]
fn zero_field_cannot_be_encoded() {
    assert!(matches!(dpac_encode(&constant(0.0, 0.0)), Err(CghError::Domain(_))));
}

#[test]
fn carrier_ramp_follows_the_grating_equation() {
    let cfg = OpticalConfig::for_resolution(64);
    let ramp = off_axis_ramp(&cfg, 0, 1.1, TiltAxis::Horizontal).unwrap();
    let step = 2.0 * PI * 1.1f64.to_radians().sin() / cfg.wavelengths[0] * cfg.pixel_pitch;
    for (x, y) in [(0, 0), (5, 3), (63, 63)] {
        assert!(close(*ramp.get(x, y), step * x as f64));
    }
    let vert = off_axis_ramp(&cfg, 0, 1.1, TiltAxis::Vertical).unwrap();
    assert!(close(*vert.get(7, 9), step * 9.0));
    let limit = max_carrier_angle(&cfg, 0).unwrap();
    assert!(matches!(off_axis_ramp(&cfg, 0, limit + 0.1, TiltAxis::Horizontal), Err(CghError::Config(_))));
}

#[test]
fn carrier_is_added_before_encoding() {
    let cfg = OpticalConfig::for_resolution(16);
    let f = random_field(16, 16, 2);
    let ramp = off_axis_ramp(&cfg, 1, 1.1, TiltAxis::Horizontal).unwrap();
    let tilted: Vec<Complex64> = f.data().iter().zip(ramp.data()).map(|(c, r)| c * Complex64::from_polar(1.0, *r)).collect();
    let expect = dpac_encode(&ComplexField::from_vec(16, 16, tilted, 0.0).unwrap()).unwrap();
    let got = dpac_encode_off_axis(&f, &cfg, 1, 1.1, TiltAxis::Horizontal).unwrap();
    assert_eq!(got.carrier_angle, 1.1);
    for (a, b) in expect.phase.data().iter().zip(got.phase.data()) {
        assert!(close(*a, *b));
    }
}

#[test]
fn png_codes_round_trip() {
    assert_eq!(phase_to_u16(-PI), 0);
    assert_eq!(phase_to_u16(PI), 65535);
    for code in [0u16, 1, 32767, 65535] {
        assert_eq!(phase_to_u16(u16_to_phase(code)), code);
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("phase.png");
    let mut r = rng(0);
    let phase = Grid::from_fn(9, 5, |_, _| u16_to_phase(r.gen())).unwrap();
    write_phase_png(&path, &phase).unwrap();
    assert_eq!(read_phase_png(&path).unwrap(), phase);
}
