//! End-to-end simulation: source support, per-frame random phases,
//! far-field propagation, polarization handling and camera capture,
//! assembled into a FrameStack.

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::optics::DetectorSpec;
use crate::propagation::{far_field, PropagationError};
use crate::rng::SeedSpec;
use crate::sensor::{capture, polarized_intensity, PolarizationMode, SensorError};
use crate::source::{build_support, randomize_phases, randomize_phases_lanes, SourceError, SourcePlane};
use crate::stack::{FrameStack, StackError, StackMeta};

/// RNG lane base for the second polarization component; lanes 0..=1 are the
/// first component's apertures, lane 2 the camera noise.
pub const SECOND_POL_LANE_BASE: u64 = 4;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error(transparent)]
    Propagation(#[from] PropagationError),
    #[error(transparent)]
    Sensor(#[from] SensorError),
    #[error(transparent)]
    Stack(#[from] StackError),
}

/// Mean far-field intensity of a random phasor sum of `n_active` unit
/// subsources: uniform across the detector, n_active (p^2/(lambda z))^2.
pub fn mean_far_field_intensity(plane: &SourcePlane, wavelength: f64, z: f64) -> f64 {
    let scale = plane.pitch * plane.pitch / (wavelength * z);
    plane.subsource_count_active as f64 * scale * scale
}

/// Camera gain that maps the analytic mean intensity onto the target mean
/// gray level.
pub fn gain_for_target_gray(cfg: &RunConfig, plane: &SourcePlane) -> f64 {
    let mut mean = mean_far_field_intensity(plane, cfg.wavelength, cfg.distance_z);
    if cfg.polarization == PolarizationMode::UnpolarizedSum {
        mean *= 2.0;
    }
    (cfg.target_mean_gray - cfg.noise_offset).max(1.0) / mean
}

fn detector_with_gain(cfg: &RunConfig, plane: &SourcePlane) -> Result<DetectorSpec, PipelineError> {
    let mut det = cfg.detector()?;
    det.gain = gain_for_target_gray(cfg, plane);
    Ok(det)
}

/// Runs the full simulation: one speckle frame per seed, captured through
/// the camera model. Deterministic given the config.
pub fn simulate_stack(cfg: &RunConfig) -> Result<FrameStack, PipelineError> {
    cfg.validate()?;
    let fiber = cfg.fiber()?;
    let geometry = cfg.geometry();
    let plane = build_support(&geometry, &fiber)?;
    let det = detector_with_gain(cfg, &plane)?;
    let noise = cfg.noise();

    let frames = (0..cfg.frames as u64)
        .into_par_iter()
        .map(|f| {
            let seed = SeedSpec::new(cfg.master_seed, f);
            let field_a = far_field(&randomize_phases(&plane, seed), cfg.wavelength, &det, cfg.pad_factor)?;
            let field_b = match cfg.polarization {
                PolarizationMode::SinglePol => None,
                PolarizationMode::UnpolarizedSum => Some(far_field(
                    &randomize_phases_lanes(&plane, seed, SECOND_POL_LANE_BASE),
                    cfg.wavelength,
                    &det,
                    cfg.pad_factor,
                )?),
            };
            let intensity = polarized_intensity(&field_a, field_b.as_ref(), cfg.polarization)?;
            Ok(capture(&intensity, &det, &noise, seed)?)
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;

    let meta = StackMeta {
        fiber,
        geometry,
        detector: det,
        noise,
        polarization: cfg.polarization,
        master_seed: cfg.master_seed,
        // fixed timestamp: identical configs must produce byte-identical files
        created_utc: 0,
        frame_interval_s: None,
        exposure_s: None,
    };
    Ok(FrameStack::new(frames, meta)?)
}

/// Simulates raw detector fields (no camera), for Siegert-relation checks.
/// Returns one complex field grid per frame.
pub fn simulate_fields(cfg: &RunConfig, frames: usize) -> Result<Vec<Array2<Complex64>>, PipelineError> {
    cfg.validate()?;
    let fiber = cfg.fiber()?;
    let plane = build_support(&cfg.geometry(), &fiber)?;
    let det = cfg.detector()?;
    (0..frames as u64)
        .into_par_iter()
        .map(|f| {
            let seed = SeedSpec::new(cfg.master_seed, f);
            let field = far_field(&randomize_phases(&plane, seed), cfg.wavelength, &det, cfg.pad_factor)?;
            Ok(field.grid)
        })
        .collect()
}

/// Noiseless continuous intensity samples (every pixel of every frame),
/// for photon-statistics tests that bypass quantization.
pub fn simulate_intensities(cfg: &RunConfig, frames: usize) -> Result<Vec<Array2<f64>>, PipelineError> {
    cfg.validate()?;
    let fiber = cfg.fiber()?;
    let plane = build_support(&cfg.geometry(), &fiber)?;
    let det = cfg.detector()?;
    (0..frames as u64)
        .into_par_iter()
        .map(|f| {
            let seed = SeedSpec::new(cfg.master_seed, f);
            let field_a = far_field(&randomize_phases(&plane, seed), cfg.wavelength, &det, cfg.pad_factor)?;
            let field_b = match cfg.polarization {
                PolarizationMode::SinglePol => None,
                PolarizationMode::UnpolarizedSum => Some(far_field(
                    &randomize_phases_lanes(&plane, seed, SECOND_POL_LANE_BASE),
                    cfg.wavelength,
                    &det,
                    cfg.pad_factor,
                )?),
            };
            Ok(polarized_intensity(&field_a, field_b.as_ref(), cfg.polarization)?)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stack::encode_stack;
    use crate::stats::normalized_variance;

    fn small_config() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.width_px = 64;
        cfg.height_px = 64;
        cfg.frames = 4;
        cfg.pad_factor = 2;
        cfg
    }

    #[test]
    fn simulation_is_deterministic() {
        let cfg = small_config();
        let a = simulate_stack(&cfg).unwrap();
        let b = simulate_stack(&cfg).unwrap();
        assert_eq!(encode_stack(&a), encode_stack(&b));

        let mut other = cfg.clone();
        other.master_seed = 2;
        let c = simulate_stack(&other).unwrap();
        assert_ne!(encode_stack(&a), encode_stack(&c));
    }

    #[test]
    fn frames_differ_across_the_ensemble() {
        let stack = simulate_stack(&small_config()).unwrap();
        assert_ne!(stack.frames[0].pixels, stack.frames[1].pixels);
    }

    #[test]
    fn mean_gray_close_to_target() {
        let mut cfg = small_config();
        cfg.frames = 16;
        let stack = simulate_stack(&cfg).unwrap();
        let n: usize = stack.frames.iter().map(|f| f.pixels.len()).sum();
        let sum: f64 = stack
            .frames
            .iter()
            .flat_map(|f| f.pixels.iter())
            .map(|&p| p as f64)
            .sum();
        let mean = sum / n as f64;
        // quantization and sampling noise allow a broad window
        assert!((mean - 25.0).abs() < 3.0, "mean gray {mean}");
    }

    #[test]
    fn polarization_modes_have_expected_contrast() {
        let mut cfg = small_config();
        cfg.frames = 12;
        let single: Vec<f64> = simulate_intensities(&cfg, cfg.frames)
            .unwrap()
            .iter()
            .flat_map(|a| a.iter().copied())
            .collect();
        cfg.polarization = PolarizationMode::UnpolarizedSum;
        let unpol: Vec<f64> = simulate_intensities(&cfg, cfg.frames)
            .unwrap()
            .iter()
            .flat_map(|a| a.iter().copied())
            .collect();
        let v1 = normalized_variance(&single);
        let v2 = normalized_variance(&unpol);
        assert!((v1 - 1.0).abs() < 0.1, "single-pol variance {v1}");
        assert!((v2 - 0.5).abs() < 0.1, "unpolarized variance {v2}");
        // the unpolarized sum doubles the mean intensity
        let m1: f64 = single.iter().sum::<f64>() / single.len() as f64;
        let m2: f64 = unpol.iter().sum::<f64>() / unpol.len() as f64;
        assert!((m2 / m1 - 2.0).abs() < 0.1);
    }

    #[test]
    fn field_ensemble_matches_stack_geometry() {
        let cfg = small_config();
        let fields = simulate_fields(&cfg, 3).unwrap();
        assert_eq!(fields.len(), 3);
        assert_eq!(fields[0].dim(), (64, 64));
        assert_ne!(fields[0], fields[1]);
    }
}
