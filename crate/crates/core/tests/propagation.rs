mod common;

use common::*;
use layercgh::fft::Fft2;
use layercgh::{ComplexField, OpticalConfig, PropagationOptions, Propagator};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

#[test]
fn fft_pipeline_matches_brute_force_dft() {
    let cfg = OpticalConfig::for_resolution(8);
    let prop = Propagator::default();
    let f = random_field(8, 8, 11);
    for z in [0.5e-3, 2e-3, -1e-3] {
        for ch in 0..cfg.channels() {
            let fast = prop.propagate(&f, z, &cfg, ch).unwrap();
            let slow = naive_asm(&f, z, &cfg, ch);
            let err = max_abs_diff(&fast, &slow);
            assert!(err <= 1e-9, "z = {z}, channel {ch}: max error {err:e}");
        }
    }
}

#[test]
fn zero_distance_is_identity_without_band_limit() {
    let cfg = OpticalConfig::for_resolution(32);
    let prop = Propagator::new(PropagationOptions {
        band_limited: false,
        ..Default::default()
    });
    let f = random_field(32, 32, 3);
    let out = prop.propagate(&f, 0.0, &cfg, 1).unwrap();
    let rel = max_abs_diff(&f, &out) / f.max_modulus();
    assert!(rel < 1e-10, "{rel:e}");
}

#[test]
fn round_trip_keeps_sixty_db() {
    let cfg = OpticalConfig::for_resolution(128);
    let prop = Propagator::default();
    let f = smooth_field(128, 6.0, 12.0, 5);
    for z in [1e-3, 5e-3, 10e-3] {
        for ch in 0..3 {
            let there = prop.propagate(&f, z, &cfg, ch).unwrap();
            let back = prop.propagate(&there, -z, &cfg, ch).unwrap();
            let p = complex_psnr(&f, &back);
            assert!(p >= 60.0, "z = {z}, channel {ch}: {p:.2} dB");
        }
    }
}

#[test]
fn steps_compose() {
    let cfg = OpticalConfig::for_resolution(128);
    let prop = Propagator::default();
    let f = smooth_field(128, 6.0, 12.0, 8);
    let mut r = rng(2);
    for _ in 0..4 {
        let z1 = r.gen_range(0.0..5e-3);
        let z2 = r.gen_range(0.0..5e-3);
        let two = prop
            .propagate(&prop.propagate(&f, z1, &cfg, 0).unwrap(), z2, &cfg, 0)
            .unwrap();
        let one = prop.propagate(&f, z1 + z2, &cfg, 0).unwrap();
        let p = complex_psnr(&one, &two);
        assert!(p >= 50.0, "z1 = {z1}, z2 = {z2}: {p:.2} dB");
    }
}

#[test]
fn propagation_is_linear() {
    let cfg = OpticalConfig::for_resolution(32);
    let prop = Propagator::default();
    let f = random_field(32, 32, 1);
    let g = random_field(32, 32, 2);
    let (a, b) = (Complex64::new(0.7, -1.3), Complex64::new(-2.0, 0.25));
    let lhs = prop
        .propagate(&f.scaled(a).unwrap().add(&g.scaled(b).unwrap()).unwrap(), 3e-3, &cfg, 2)
        .unwrap();
    let rhs = prop
        .propagate(&f, 3e-3, &cfg, 2)
        .unwrap()
        .scaled(a)
        .unwrap()
        .add(&prop.propagate(&g, 3e-3, &cfg, 2).unwrap().scaled(b).unwrap())
        .unwrap();
    let rel = max_abs_diff(&lhs, &rhs) / rhs.max_modulus();
    assert!(rel < 1e-10, "{rel:e}");
}

#[test]
fn band_limited_input_keeps_its_energy() {
    // 32x32 hologram, so the padded grid is 64x64
    let cfg = OpticalConfig::for_resolution(32);
    let n = 64;
    let mut r = rng(9);
    let mut spectrum = vec![Complex64::new(0.0, 0.0); n * n];
    for v in 0..n {
        for u in 0..n {
            let su = if u < n / 2 { u as i64 } else { u as i64 - n as i64 };
            let sv = if v < n / 2 { v as i64 } else { v as i64 - n as i64 };
            if su.abs() <= 5 && sv.abs() <= 5 {
                spectrum[v * n + u] = Complex64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
            }
        }
    }
    Fft2::new(n, n).inverse(&mut spectrum);
    let f = ComplexField::from_vec(n, n, spectrum, 0.0).unwrap();
    let prop = Propagator::default();
    for z in [1e-3, 5e-3, -4e-3] {
        let out = prop.propagate_padded(&f, z, &cfg, 0).unwrap();
        let rel = (out.energy() - f.energy()).abs() / f.energy();
        assert!(rel < 1e-6, "z = {z}: relative energy change {rel:e}");
    }
}

#[test]
fn concurrent_calls_agree_with_serial() {
    let cfg = OpticalConfig::for_resolution(32);
    let prop = Propagator::default();
    let fields: Vec<_> = (0..8).map(|s| random_field(32, 32, 100 + s)).collect();
    let serial: Vec<_> = fields
        .iter()
        .enumerate()
        .map(|(i, f)| prop.propagate(f, (i % 3) as f64 * 1e-3 + 1e-3, &cfg, i % 3).unwrap())
        .collect();
    let fresh = Propagator::default();
    let parallel: Vec<_> = fields
        .par_iter()
        .enumerate()
        .map(|(i, f)| fresh.propagate(f, (i % 3) as f64 * 1e-3 + 1e-3, &cfg, i % 3).unwrap())
        .collect();
    assert_eq!(serial, parallel);
}

#[test]
fn dimension_mismatch_is_rejected() {
    let cfg = OpticalConfig::for_resolution(16);
    let f = random_field(8, 8, 0);
    assert!(matches!(
        Propagator::default().propagate(&f, 1e-3, &cfg, 0),
        Err(layercgh::CghError::Dimension(_))
    ));
}
