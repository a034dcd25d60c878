//! Camera model: polarization handling, gain, additive Gaussian read noise,
//! and bit-depth quantization.

use ndarray::Array2;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::optics::DetectorSpec;
use crate::propagation::ComplexField;
use crate::rng::SeedSpec;

/// RNG lane used for camera noise, distinct from the source-plane lanes.
pub const NOISE_LANE: u64 = 2;

#[derive(Debug, Error, PartialEq)]
pub enum SensorError {
    #[error("fields have different shapes: {0:?} vs {1:?}")]
    ShapeMismatch((usize, usize), (usize, usize)),
    #[error("UnpolarizedSum requires a second field")]
    MissingSecondField,
    #[error("noise offset {offset} must be below the gray-level ceiling {max}")]
    OffsetOutOfRange { offset: f64, max: u16 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolarizationMode {
    /// Ideal polarizer in front of the camera: one speckle field.
    SinglePol,
    /// No polarizer, fully depolarized: sum of two independent speckle
    /// intensities.
    UnpolarizedSum,
}

/// Additive camera noise: Gaussian read noise plus a constant offset, both
/// in gray levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub read_noise_sigma: f64,
    pub offset: f64,
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self {
            read_noise_sigma: 0.0,
            offset: 0.0,
        }
    }

    pub fn new(read_noise_sigma: f64, offset: f64) -> Self {
        assert!(read_noise_sigma >= 0.0 && offset >= 0.0);
        Self {
            read_noise_sigma,
            offset,
        }
    }
}

/// One quantized camera frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub pixels: Array2<u16>,
    pub exposure_index: u64,
    pub saturation_flag: bool,
    /// Fraction of pixels clipped at either end of the gray range.
    pub clipped_fraction: f64,
}

impl Frame {
    /// True when more than 0.1% of the pixels clipped; callers should warn.
    pub fn saturation_warning(&self) -> bool {
        self.clipped_fraction > 1e-3
    }
}

/// Detected intensity for the chosen polarization mode. `UnpolarizedSum`
/// adds the intensities of two independent field realizations.
pub fn polarized_intensity(
    field_a: &ComplexField,
    field_b: Option<&ComplexField>,
    mode: PolarizationMode,
) -> Result<Array2<f64>, SensorError> {
    match mode {
        PolarizationMode::SinglePol => Ok(field_a.grid.mapv(|v| v.norm_sqr())),
        PolarizationMode::UnpolarizedSum => {
            let b = field_b.ok_or(SensorError::MissingSecondField)?;
            if field_a.grid.dim() != b.grid.dim() {
                return Err(SensorError::ShapeMismatch(field_a.grid.dim(), b.grid.dim()));
            }
            Ok(&field_a.grid.mapv(|v| v.norm_sqr()) + &b.grid.mapv(|v| v.norm_sqr()))
        }
    }
}

/// Quantizes an intensity map into a camera frame:
/// pixels = clip(round(gain * I + offset + eta), 0, 2^bits - 1) with
/// eta ~ Normal(0, sigma^2) i.i.d., deterministic given the seed.
pub fn capture(
    intensity: &Array2<f64>,
    det: &DetectorSpec,
    noise: &NoiseModel,
    seed: SeedSpec,
) -> Result<Frame, SensorError> {
    let max = det.max_gray();
    if noise.offset >= max as f64 {
        return Err(SensorError::OffsetOutOfRange {
            offset: noise.offset,
            max,
        });
    }
    let mut rng = seed.stream(NOISE_LANE);
    let normal = Normal::new(0.0, noise.read_noise_sigma.max(f64::MIN_POSITIVE)).unwrap();
    let mut clipped = 0usize;
    let pixels = intensity.mapv(|i| {
        let eta = if noise.read_noise_sigma > 0.0 {
            normal.sample(&mut rng)
        } else {
            0.0
        };
        let g = (det.gain * i + noise.offset + eta).round();
        if g <= 0.0 {
            if g < 0.0 {
                clipped += 1;
            }
            0u16
        } else if g >= max as f64 {
            if g > max as f64 {
                clipped += 1;
            }
            max
        } else {
            g as u16
        }
    });
    let clipped_fraction = clipped as f64 / pixels.len() as f64;
    Ok(Frame {
        pixels,
        exposure_index: seed.frame_index,
        saturation_flag: clipped > 0,
        clipped_fraction,
    })
}
