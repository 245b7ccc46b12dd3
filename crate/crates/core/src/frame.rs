use crate::config::OpticalConfig;
use crate::error::{CghError, Result};
use crate::field::{BinaryMask, ScalarField};

/// Co-registered color intensities and depth for one scene.
///
/// Depth is normalized: 0 is the hologram plane and 1 is `depth_range`.
/// Pixels without an object have intensity 0, depth 1, and are cleared in
/// `validity`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbdFrame {
    pub intensity: Vec<ScalarField>,
    pub depth: ScalarField,
    pub validity: BinaryMask,
    pub config: OpticalConfig,
}

impl RgbdFrame {
    pub fn new(intensity: Vec<ScalarField>, depth: ScalarField, validity: BinaryMask, config: OpticalConfig) -> Result<Self> {
        let frame = RgbdFrame {
            intensity,
            depth,
            validity,
            config,
        };
        frame.validate()?;
        Ok(frame)
    }

    pub fn validate(&self) -> Result<()> {
        let shape = (self.config.width, self.config.height);
        if self.depth.shape() != shape || self.validity.shape() != shape {
            return Err(CghError::Dimension(format!(
                "depth/validity must be {}x{}",
                shape.0, shape.1
            )));
        }
        if self.intensity.len() != self.config.channels() {
            return Err(CghError::Dimension(format!(
                "{} intensity channels for {} wavelengths",
                self.intensity.len(),
                self.config.channels()
            )));
        }
        for (c, img) in self.intensity.iter().enumerate() {
            if img.shape() != shape {
                return Err(CghError::Dimension(format!("intensity channel {c} has the wrong shape")));
            }
            if let Some(v) = img.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(CghError::Domain(format!("intensity channel {c} value {v} outside [0, 1]")));
            }
        }
        if let Some(v) = self.depth.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(CghError::Domain(format!("normalized depth {v} outside [0, 1]")));
        }
        Ok(())
    }

    pub fn channels(&self) -> usize {
        self.intensity.len()
    }

    pub fn width(&self) -> usize {
        self.depth.width()
    }

    pub fn height(&self) -> usize {
        self.depth.height()
    }

    /// Depth in meters from the hologram plane.
    pub fn physical_depth(&self) -> ScalarField {
        self.depth.scaled(self.config.depth_range)
    }

    pub fn intensity(&self, channel: usize) -> Result<&ScalarField> {
        self.intensity
            .get(channel)
            .ok_or_else(|| CghError::Index(format!("channel {channel} out of range")))
    }

    /// Same scene with a different optical setup (e.g. layer count).
    pub fn with_config(&self, config: OpticalConfig) -> Result<Self> {
        RgbdFrame::new(self.intensity.clone(), self.depth.clone(), self.validity.clone(), config)
    }
}
