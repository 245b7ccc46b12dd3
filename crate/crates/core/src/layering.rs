//! Depth discretization and per-layer masks.
//!
//! Layer 0 is the farthest plane, at `max(D)`; layer `i` sits at
//! `max(D) − i·Δz` with `Δz = max(D) / n`. The band of layer `i` is the
//! half-open depth interval `(max(D) − (i+1)·Δz, max(D) − i·Δz]`, widened on
//! the last layer so that depth 0 is included.

use serde::{Deserialize, Serialize};

use crate::config::OpticalConfig;
use crate::error::{CghError, Result};
use crate::field::{BinaryMask, Grid, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerGrid {
    pub n_layers: usize,
    /// Meters.
    pub delta_z: f64,
    /// Meters.
    pub max_depth: f64,
}

impl LayerGrid {
    pub fn new(max_depth: f64, n_layers: usize) -> Result<Self> {
        if n_layers == 0 {
            return Err(CghError::Config("n_layers must be at least 1".into()));
        }
        if !(max_depth > 0.0 && max_depth.is_finite()) {
            return Err(CghError::Domain(format!("max depth must be > 0, got {max_depth}")));
        }
        Ok(LayerGrid {
            n_layers,
            delta_z: max_depth / n_layers as f64,
            max_depth,
        })
    }

    /// Distance of layer `i` from the hologram plane.
    pub fn z_of(&self, i: usize) -> f64 {
        self.boundary(i)
    }

    /// `max(D) − b·Δz`; band `i` spans `(boundary(i+1), boundary(i)]`.
    pub fn boundary(&self, b: usize) -> f64 {
        self.max_depth - b as f64 * self.delta_z
    }

    fn check(&self, i: usize, k: usize) -> Result<()> {
        if i >= self.n_layers {
            return Err(CghError::Index(format!("layer {i} out of range (n = {})", self.n_layers)));
        }
        if k == 0 {
            return Err(CghError::Index("mask width k must be at least 1".into()));
        }
        Ok(())
    }
}

/// Builds the layer grid for a depth map in meters.
///
/// A scene whose valid pixels all sit on the hologram plane collapses to a
/// single layer at `z = 0` with nominal spacing `depth_range / n_layers`.
pub fn build_layer_grid(depth: &ScalarField, validity: &BinaryMask, config: &OpticalConfig) -> Result<LayerGrid> {
    depth.ensure_same_shape(validity, "depth/validity")?;
    if config.n_layers == 0 {
        return Err(CghError::Config("n_layers must be at least 1".into()));
    }
    let max_depth = depth
        .data()
        .iter()
        .zip(validity.data())
        .filter(|(_, &v)| v)
        .map(|(&d, _)| d)
        .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.max(d))))
        .ok_or_else(|| CghError::Scene("validity mask is empty".into()))?;
    if !(max_depth >= 0.0 && max_depth.is_finite()) {
        return Err(CghError::Scene(format!("depth values must be finite and >= 0, max is {max_depth}")));
    }
    if max_depth == 0.0 {
        return Ok(LayerGrid {
            n_layers: 1,
            delta_z: config.depth_range / config.n_layers as f64,
            max_depth: 0.0,
        });
    }
    LayerGrid::new(max_depth, config.n_layers)
}

/// `M_{i,k}`: valid pixels with `boundary(i) ≥ D > boundary(i+k)`.
pub fn band_mask(depth: &ScalarField, validity: &BinaryMask, grid: &LayerGrid, i: usize, k: usize) -> Result<BinaryMask> {
    grid.check(i, k)?;
    depth.ensure_same_shape(validity, "depth/validity")?;
    let upper = grid.boundary(i);
    let open_below = i + k >= grid.n_layers;
    let lower = grid.boundary(i + k);
    let data = depth
        .data()
        .iter()
        .zip(validity.data())
        .map(|(&d, &v)| v && (i == 0 || d <= upper) && (open_below || d > lower))
        .collect();
    Grid::from_vec(depth.width(), depth.height(), data)
}

/// Backward-only mask: valid pixels with `D > boundary(i+k)`.
pub fn one_sided_mask(depth: &ScalarField, validity: &BinaryMask, grid: &LayerGrid, i: usize, k: usize) -> Result<BinaryMask> {
    grid.check(i, k)?;
    depth.ensure_same_shape(validity, "depth/validity")?;
    let open_below = i + k >= grid.n_layers;
    let lower = grid.boundary(i + k);
    let data = depth
        .data()
        .iter()
        .zip(validity.data())
        .map(|(&d, &v)| v && (open_below || d > lower))
        .collect();
    Grid::from_vec(depth.width(), depth.height(), data)
}

/// Per-pixel layer index, precomputed once so that masks for thousands of
/// layers can be produced without rescanning depth comparisons.
#[derive(Debug, Clone)]
pub struct LayerAssignment {
    grid: LayerGrid,
    index: Grid<Option<usize>>,
    occupancy: Vec<usize>,
}

impl LayerAssignment {
    pub fn new(depth: &ScalarField, validity: &BinaryMask, grid: LayerGrid) -> Result<Self> {
        depth.ensure_same_shape(validity, "depth/validity")?;
        let n = grid.n_layers;
        let mut occupancy = vec![0; n];
        let data: Vec<Option<usize>> = depth
            .data()
            .iter()
            .zip(validity.data())
            .map(|(&d, &v)| {
                if !v {
                    return None;
                }
                let idx = layer_of(&grid, d);
                occupancy[idx] += 1;
                Some(idx)
            })
            .collect();
        Ok(LayerAssignment {
            grid,
            index: Grid::from_vec(depth.width(), depth.height(), data)?,
            occupancy,
        })
    }

    pub fn grid(&self) -> &LayerGrid {
        &self.grid
    }

    pub fn layer_at(&self, x: usize, y: usize) -> Option<usize> {
        *self.index.get(x, y)
    }

    /// Number of valid pixels in band `i` (k = 1).
    pub fn occupancy(&self, i: usize) -> usize {
        self.occupancy.get(i).copied().unwrap_or(0)
    }

    pub fn band_mask(&self, i: usize, k: usize) -> Result<BinaryMask> {
        self.grid.check(i, k)?;
        let last = i + k - 1;
        Ok(self.index.map(|l| matches!(*l, Some(l) if l >= i && l <= last)))
    }

    pub fn one_sided_mask(&self, i: usize, k: usize) -> Result<BinaryMask> {
        self.grid.check(i, k)?;
        let last = i + k - 1;
        Ok(self.index.map(|l| matches!(*l, Some(l) if l <= last)))
    }

    /// Whether `band_mask(i, k)` has any set pixel.
    pub fn band_is_empty(&self, i: usize, k: usize) -> bool {
        let end = (i + k).min(self.grid.n_layers);
        (i..end).all(|j| self.occupancy[j] == 0)
    }
}

/// Index of the band containing depth `d`, using the same boundary
/// comparisons as [`band_mask`].
fn layer_of(grid: &LayerGrid, d: f64) -> usize {
    let n = grid.n_layers;
    if grid.max_depth == 0.0 || n == 1 {
        return 0;
    }
    let guess = ((grid.max_depth - d) / grid.delta_z).floor();
    let mut i = if guess.is_finite() && guess > 0.0 { (guess as usize).min(n - 1) } else { 0 };
    // nudge until boundary(i+1) < d <= boundary(i), with the end bands open
    loop {
        if i > 0 && d > grid.boundary(i) {
            i -= 1;
        } else if i + 1 < n && d <= grid.boundary(i + 1) {
            i += 1;
        } else {
            return i;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(n_layers: usize) -> OpticalConfig {
        let mut c = OpticalConfig::for_resolution(2);
        c.n_layers = n_layers;
        c
    }

    fn mm(v: &[f64], w: usize, h: usize) -> ScalarField {
        Grid::from_vec(w, h, v.iter().map(|x| x * 1e-3).collect()).unwrap()
    }

    fn all_valid(w: usize, h: usize) -> BinaryMask {
        Grid::filled(w, h, true).unwrap()
    }

    fn bits(m: &BinaryMask) -> Vec<u8> {
        m.data().iter().map(|&b| b as u8).collect()
    }

    #[test]
    fn grid_for_constant_depth() {
        let d = mm(&[7.0; 4], 2, 2);
        let g = build_layer_grid(&d, &all_valid(2, 2), &cfg(1)).unwrap();
        assert_eq!(g.n_layers, 1);
        assert!((g.z_of(0) - 7e-3).abs() < 1e-15);
    }

    #[test]
    fn grid_spacing_at_dataset_scale() {
        let d = mm(&[0.0, 20.3336], 2, 1);
        let g = build_layer_grid(&d, &all_valid(2, 1), &cfg(10_000)).unwrap();
        assert!((g.delta_z - 2.03336e-6).abs() < 1e-15);
    }

    #[test]
    fn grid_two_layers_by_hand() {
        let d = mm(&[0.0, 5.0, 10.0], 3, 1);
        let g = build_layer_grid(&d, &all_valid(3, 1), &cfg(2)).unwrap();
        assert!((g.delta_z - 5e-3).abs() < 1e-15);
        assert!((g.z_of(0) - 10e-3).abs() < 1e-15);
        assert!((g.z_of(1) - 5e-3).abs() < 1e-15);
    }

    #[test]
    fn flat_scene_on_hologram_plane_collapses() {
        let d = mm(&[0.0; 4], 2, 2);
        let g = build_layer_grid(&d, &all_valid(2, 2), &cfg(8)).unwrap();
        assert_eq!(g.n_layers, 1);
        assert_eq!(g.z_of(0), 0.0);
        assert!(g.delta_z > 0.0);
    }

    #[test]
    fn empty_validity_is_scene_error() {
        let d = mm(&[1.0; 4], 2, 2);
        let none = Grid::filled(2, 2, false).unwrap();
        assert!(matches!(build_layer_grid(&d, &none, &cfg(4)), Err(CghError::Scene(_))));
    }

    #[test]
    fn band_masks_by_hand() {
        let d = mm(&[0.0, 5.0, 10.0, 10.0], 2, 2);
        let v = all_valid(2, 2);
        let g = build_layer_grid(&d, &v, &cfg(2)).unwrap();
        assert_eq!(bits(&band_mask(&d, &v, &g, 0, 1).unwrap()), vec![0, 0, 1, 1]);
        assert_eq!(bits(&band_mask(&d, &v, &g, 1, 1).unwrap()), vec![1, 1, 0, 0]);
        assert_eq!(bits(&band_mask(&d, &v, &g, 0, 2).unwrap()), vec![1, 1, 1, 1]);
        assert_eq!(bits(&one_sided_mask(&d, &v, &g, 1, 1).unwrap()), vec![1, 1, 1, 1]);
        assert_eq!(band_mask(&d, &v, &g, 0, 1).unwrap(), one_sided_mask(&d, &v, &g, 0, 1).unwrap());
    }

    #[test]
    fn invalid_pixels_never_set() {
        let d = mm(&[3.0, 5.0, 10.0, 10.0], 2, 2);
        let v = Grid::from_vec(2, 2, vec![true, false, true, true]).unwrap();
        let g = build_layer_grid(&d, &v, &cfg(2)).unwrap();
        let full = band_mask(&d, &v, &g, 0, 2).unwrap();
        assert_eq!(full, v);
        assert_eq!(one_sided_mask(&d, &v, &g, 1, 1).unwrap(), v);
    }

    #[test]
    fn index_errors() {
        let d = mm(&[1.0, 2.0], 2, 1);
        let v = all_valid(2, 1);
        let g = build_layer_grid(&d, &v, &cfg(2)).unwrap();
        assert!(matches!(band_mask(&d, &v, &g, 2, 1), Err(CghError::Index(_))));
        assert!(matches!(one_sided_mask(&d, &v, &g, 0, 0), Err(CghError::Index(_))));
    }

    fn depth_strategy() -> impl Strategy<Value = (ScalarField, BinaryMask, usize)> {
        (2usize..7, 2usize..7, 1usize..12).prop_flat_map(|(w, h, n)| {
            (
                prop::collection::vec(prop_oneof![0.0f64..10.0, Just(0.0), Just(10.0), Just(2.5)], w * h),
                prop::collection::vec(prop::bool::weighted(0.8), w * h),
            )
                .prop_map(move |(d, mut v)| {
                    v[0] = true;
                    (
                        Grid::from_vec(w, h, d.iter().map(|x| x * 1e-3).collect()).unwrap(),
                        Grid::from_vec(w, h, v).unwrap(),
                        n,
                    )
                })
        })
    }

    proptest! {
        #[test]
        fn k1_bands_partition_validity((d, v, n) in depth_strategy()) {
            let g = build_layer_grid(&d, &v, &cfg(n)).unwrap();
            let mut hits = vec![0usize; d.len()];
            for i in 0..g.n_layers {
                for (p, &b) in band_mask(&d, &v, &g, i, 1).unwrap().data().iter().enumerate() {
                    hits[p] += b as usize;
                }
            }
            for (p, &valid) in v.data().iter().enumerate() {
                prop_assert_eq!(hits[p], valid as usize);
            }
        }

        #[test]
        fn wide_bands_are_unions_and_assignment_agrees((d, v, n) in depth_strategy(), k in 1usize..4) {
            let g = build_layer_grid(&d, &v, &cfg(n)).unwrap();
            let fast = LayerAssignment::new(&d, &v, g).unwrap();
            for i in 0..g.n_layers {
                let wide = band_mask(&d, &v, &g, i, k).unwrap();
                let mut union = Grid::filled(d.width(), d.height(), false).unwrap();
                for j in i..(i + k).min(g.n_layers) {
                    union = union.or(&band_mask(&d, &v, &g, j, 1).unwrap()).unwrap();
                }
                prop_assert_eq!(&wide, &union);
                prop_assert_eq!(&wide, &fast.band_mask(i, k).unwrap());
                prop_assert_eq!(one_sided_mask(&d, &v, &g, i, k).unwrap(), fast.one_sided_mask(i, k).unwrap());
                prop_assert_eq!(fast.band_is_empty(i, k), !wide.any());
            }
            prop_assert_eq!(band_mask(&d, &v, &g, 0, g.n_layers).unwrap(), v.clone());
        }

        #[test]
        fn backward_masks_grow_toward_hologram((d, v, n) in depth_strategy(), k in 1usize..3) {
            let g = build_layer_grid(&d, &v, &cfg(n)).unwrap();
            for i in 1..g.n_layers {
                let prev = one_sided_mask(&d, &v, &g, i - 1, k).unwrap();
                let cur = one_sided_mask(&d, &v, &g, i, k).unwrap();
                prop_assert!(prev.data().iter().zip(cur.data()).all(|(&a, &b)| !a || b));
            }
            prop_assert_eq!(one_sided_mask(&d, &v, &g, g.n_layers - 1, 1).unwrap(), v.clone());
        }
    }
}
