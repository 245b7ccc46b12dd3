//! Layer-based computer-generated holography.
//!
//! The crate turns RGB-D frames into complex holograms with three layer-based
//! generators, scores them through focal image projection, and encodes them
//! for phase-only displays. Propagation uses a band-limited angular spectrum
//! method on a padded grid.
//!
//! ```no_run
//! use layercgh::{synthesize_scene, Engine, Method, OpticalConfig, Provenance, SceneParams};
//!
//! let config = OpticalConfig::for_resolution(128);
//! let frame = synthesize_scene(&SceneParams { seed: 1, ..Default::default() }, &config)?;
//! let sample = Engine::default().generate_color(&frame, Method::Ap, Provenance::new(Some(1), None))?;
//! # Ok::<(), layercgh::CghError>(())
//! ```

pub mod config;
pub mod encoding;
pub mod error;
pub mod fft;
pub mod field;
pub mod frame;
pub mod generation;
pub mod layering;
pub mod propagation;
pub mod quality;
pub mod scene;
pub mod storage;

pub use config::{LayerPhaseMode, OpticalConfig};
pub use encoding::{dpac_decode, dpac_encode, off_axis_ramp, PhaseOnlyHologram, TiltAxis};
pub use error::{CghError, ErrorCategory, Result};
pub use field::{BinaryMask, ComplexField, Grid, ScalarField};
pub use frame::RgbdFrame;
pub use generation::{Engine, GeneratorSettings, HologramSample, LayerPlan, Method, Provenance};
pub use layering::{LayerAssignment, LayerGrid};
pub use propagation::{PaddingMode, PropagationOptions, Propagator};
pub use quality::{focal_image_projection, psnr, ssim, MetricsRecord};
pub use scene::{compute_z_max, synthesize_scene, SceneParams};
