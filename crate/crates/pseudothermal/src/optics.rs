//! Closed-form fiber optics quantities: acceptance angle, fringe spacing,
//! subsource and mode counts, plus the physical parameter types shared by
//! the rest of the crate.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OpticsError {
    #[error("numerical aperture must lie in (0, 1), got {0}")]
    BadNumericalAperture(f64),
    #[error("core radius must be positive, got {0}")]
    BadCoreRadius(f64),
    #[error("wavelength must be positive, got {0}")]
    BadWavelength(f64),
    #[error("refractive indices must satisfy n1 > n2 >= 1, got ({0}, {1})")]
    BadIndices(f64, f64),
    #[error("NA = {na} inconsistent with sqrt(n1^2 - n2^2) = {derived}")]
    InconsistentAperture { na: f64, derived: f64 },
    #[error("invalid detector parameter: {0}")]
    BadDetector(String),
}

/// Physical parameters of a step-index multimode fiber used as a
/// pseudothermal source. All lengths in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberSpec {
    core_radius: f64,
    numerical_aperture: f64,
    wavelength: f64,
    indices: Option<(f64, f64)>,
}

impl FiberSpec {
    pub fn new(core_radius: f64, numerical_aperture: f64, wavelength: f64) -> Result<Self, OpticsError> {
        if !(core_radius > 0.0) {
            return Err(OpticsError::BadCoreRadius(core_radius));
        }
        if !(numerical_aperture > 0.0 && numerical_aperture < 1.0) {
            return Err(OpticsError::BadNumericalAperture(numerical_aperture));
        }
        if !(wavelength > 0.0) {
            return Err(OpticsError::BadWavelength(wavelength));
        }
        Ok(Self {
            core_radius,
            numerical_aperture,
            wavelength,
            indices: None,
        })
    }

    /// Builds a spec from core/cladding refractive indices, deriving the
    /// numerical aperture as sqrt(n1^2 - n2^2).
    pub fn from_indices(core_radius: f64, n1: f64, n2: f64, wavelength: f64) -> Result<Self, OpticsError> {
        if !(n1 > n2 && n2 >= 1.0) {
            return Err(OpticsError::BadIndices(n1, n2));
        }
        let na = (n1 * n1 - n2 * n2).sqrt();
        let mut spec = Self::new(core_radius, na, wavelength)?;
        spec.indices = Some((n1, n2));
        Ok(spec)
    }

    /// As `new`, but additionally records the index pair and checks it
    /// against the supplied NA. The measured NA wins; the indices must agree
    /// within 1e-12 relative.
    pub fn with_indices(
        core_radius: f64,
        numerical_aperture: f64,
        n1: f64,
        n2: f64,
        wavelength: f64,
    ) -> Result<Self, OpticsError> {
        if !(n1 > n2 && n2 >= 1.0) {
            return Err(OpticsError::BadIndices(n1, n2));
        }
        let derived = (n1 * n1 - n2 * n2).sqrt();
        if (derived - numerical_aperture).abs() > 1e-12 * numerical_aperture.abs() {
            return Err(OpticsError::InconsistentAperture {
                na: numerical_aperture,
                derived,
            });
        }
        let mut spec = Self::new(core_radius, numerical_aperture, wavelength)?;
        spec.indices = Some((n1, n2));
        Ok(spec)
    }

    pub fn core_radius(&self) -> f64 {
        self.core_radius
    }

    pub fn numerical_aperture(&self) -> f64 {
        self.numerical_aperture
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn indices(&self) -> Option<(f64, f64)> {
        self.indices
    }
}

/// Camera geometry and response parameters. Lengths in meters, noise and
/// offset in gray levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorSpec {
    pub distance_z: f64,
    pub pixel_pitch: f64,
    pub width_px: usize,
    pub height_px: usize,
    pub bit_depth: u8,
    pub read_noise_sigma: f64,
    pub gain: f64,
}

impl DetectorSpec {
    pub fn new(distance_z: f64, pixel_pitch: f64, width_px: usize, height_px: usize) -> Result<Self, OpticsError> {
        let spec = Self {
            distance_z,
            pixel_pitch,
            width_px,
            height_px,
            bit_depth: 8,
            read_noise_sigma: 0.0,
            gain: 1.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), OpticsError> {
        if !(self.distance_z > 0.0) {
            return Err(OpticsError::BadDetector(format!(
                "distance_z must be positive, got {}",
                self.distance_z
            )));
        }
        if !(self.pixel_pitch > 0.0) {
            return Err(OpticsError::BadDetector(format!(
                "pixel_pitch must be positive, got {}",
                self.pixel_pitch
            )));
        }
        if self.width_px < 2 || self.height_px < 2 {
            return Err(OpticsError::BadDetector(format!(
                "detector must be at least 2x2 pixels, got {}x{}",
                self.width_px, self.height_px
            )));
        }
        if self.bit_depth == 0 || self.bit_depth > 16 {
            return Err(OpticsError::BadDetector(format!(
                "bit depth must be in 1..=16, got {}",
                self.bit_depth
            )));
        }
        if !(self.read_noise_sigma >= 0.0) {
            return Err(OpticsError::BadDetector("read_noise_sigma must be >= 0".into()));
        }
        if !(self.gain > 0.0) {
            return Err(OpticsError::BadDetector("gain must be positive".into()));
        }
        Ok(())
    }

    pub fn max_gray(&self) -> u16 {
        ((1u32 << self.bit_depth) - 1) as u16
    }
}

/// Maximal half-angle under which light couples into or exits the fiber,
/// arcsin(NA).
pub fn acceptance_angle(spec: &FiberSpec) -> f64 {
    spec.numerical_aperture.asin()
}

/// Fringe spacing of the two critical-angle rays at the fiber outlet,
/// (lambda/2) / NA. This is the smallest subsource size and the default
/// source-plane lattice pitch.
pub fn fringe_spacing(spec: &FiberSpec) -> f64 {
    0.5 * spec.wavelength / spec.numerical_aperture
}

/// Estimated number of subsources of a given mode at the fiber outlet,
/// (2R NA / lambda)^2. Returned as a real number; this is an
/// order-of-magnitude estimate, not a lattice size.
pub fn subsource_count(spec: &FiberSpec) -> f64 {
    let r = 2.0 * spec.core_radius * spec.numerical_aperture / spec.wavelength;
    r * r
}

/// Approximate total number of guided modes, 2 (pi R NA / lambda)^2.
pub fn mode_count(spec: &FiberSpec) -> f64 {
    let r = std::f64::consts::PI * spec.core_radius * spec.numerical_aperture / spec.wavelength;
    2.0 * r * r
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn paper_fiber() -> FiberSpec {
        // 200 um core diameter, NA 0.39, HeNe 633 nm
        FiberSpec::new(100e-6, 0.39, 633e-9).unwrap()
    }

    #[test]
    fn acceptance_angle_values() {
        let spec = paper_fiber();
        assert_relative_eq!(acceptance_angle(&spec), 0.39f64.asin(), max_relative = 1e-15);
        assert_relative_eq!(acceptance_angle(&spec), 0.4006316, max_relative = 1e-6);

        // tiny NA limit: arcsin(x) -> x
        let spec = FiberSpec::new(1e-4, 1e-9, 633e-9).unwrap();
        assert_relative_eq!(acceptance_angle(&spec), 1e-9, max_relative = 1e-9);

        // n1^2 - n2^2 = 0.25 gives arcsin(0.5) = pi/6
        let n2 = 1.4f64;
        let n1 = (n2 * n2 + 0.25).sqrt();
        let spec = FiberSpec::from_indices(1e-4, n1, n2, 633e-9).unwrap();
        assert_relative_eq!(acceptance_angle(&spec), PI / 6.0, max_relative = 1e-12);
    }

    #[test]
    fn fringe_spacing_values() {
        let spec = paper_fiber();
        assert_relative_eq!(fringe_spacing(&spec), 0.8115e-6, max_relative = 1e-3);
        assert_relative_eq!(fringe_spacing(&spec), 633e-9 / 2.0 / 0.39, max_relative = 1e-15);

        let spec = FiberSpec::new(1e-4, 0.999_999_999, 1e-6).unwrap();
        assert_relative_eq!(fringe_spacing(&spec), 0.5e-6, max_relative = 1e-8);

        let spec = FiberSpec::new(1e-4, 0.5, 500e-9).unwrap();
        assert_relative_eq!(fringe_spacing(&spec), 0.5e-6, max_relative = 1e-15);
    }

    #[test]
    fn subsource_count_values() {
        let spec = paper_fiber();
        assert_relative_eq!(subsource_count(&spec), 1.52e4, max_relative = 1e-2);
        assert_relative_eq!(
            subsource_count(&spec),
            (200e-6_f64 * 0.39 / 633e-9).powi(2),
            max_relative = 1e-14
        );

        // 2R * NA = lambda gives exactly one subsource
        let spec = FiberSpec::new(1e-6, 0.5, 1e-6).unwrap();
        assert_relative_eq!(subsource_count(&spec), 1.0, max_relative = 1e-14);

        // doubling R quadruples the count
        let a = FiberSpec::new(50e-6, 0.39, 633e-9).unwrap();
        let b = FiberSpec::new(100e-6, 0.39, 633e-9).unwrap();
        assert_relative_eq!(subsource_count(&b), 4.0 * subsource_count(&a), max_relative = 1e-12);
    }

    #[test]
    fn mode_count_values() {
        let spec = paper_fiber();
        assert_relative_eq!(
            mode_count(&spec),
            2.0 * (PI * 100e-6 * 0.39 / 633e-9).powi(2),
            max_relative = 1e-14
        );
        assert_relative_eq!(mode_count(&spec), 7.50e4, max_relative = 2e-3);

        let tiny = FiberSpec::new(1e-12, 0.39, 633e-9).unwrap();
        assert!(mode_count(&tiny) < 1e-8);
    }

    #[test]
    fn indices_consistency() {
        // NA wins, consistent pair accepted
        let n1 = 1.5f64;
        let n2 = (n1 * n1 - 0.39f64 * 0.39).sqrt();
        let spec = FiberSpec::with_indices(100e-6, 0.39, n1, n2, 633e-9).unwrap();
        assert_eq!(spec.numerical_aperture(), 0.39);

        // inconsistent pair rejected
        let err = FiberSpec::with_indices(100e-6, 0.5, n1, n2, 633e-9).unwrap_err();
        assert!(matches!(err, OpticsError::InconsistentAperture { .. }));
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(FiberSpec::new(0.0, 0.39, 633e-9).is_err());
        assert!(FiberSpec::new(1e-4, 0.0, 633e-9).is_err());
        assert!(FiberSpec::new(1e-4, 1.0, 633e-9).is_err());
        assert!(FiberSpec::new(1e-4, 0.39, 0.0).is_err());
        assert!(FiberSpec::from_indices(1e-4, 1.2, 1.3, 633e-9).is_err());
        assert!(DetectorSpec::new(0.2, 5e-6, 1, 4).is_err());
        assert!(DetectorSpec::new(-1.0, 5e-6, 4, 4).is_err());
    }

    proptest! {
        #[test]
        fn mode_to_subsource_ratio_is_pi_sq_over_two(
            r in 1e-6f64..1e-3,
            na in 0.01f64..0.99,
            lam in 200e-9f64..2e-6,
        ) {
            let spec = FiberSpec::new(r, na, lam).unwrap();
            let ratio = mode_count(&spec) / subsource_count(&spec);
            prop_assert!((ratio - PI * PI / 2.0).abs() < 1e-12 * ratio);
        }

        #[test]
        fn fringe_spacing_monotone(
            na1 in 0.01f64..0.5, dna in 0.01f64..0.4,
            lam in 200e-9f64..1e-6, dlam in 1e-9f64..1e-6,
        ) {
            let a = FiberSpec::new(1e-4, na1, lam).unwrap();
            let b = FiberSpec::new(1e-4, na1 + dna, lam).unwrap();
            let c = FiberSpec::new(1e-4, na1, lam + dlam).unwrap();
            prop_assert!(fringe_spacing(&b) < fringe_spacing(&a));
            prop_assert!(fringe_spacing(&c) > fringe_spacing(&a));
        }

        #[test]
        fn acceptance_angle_increasing(na in 0.01f64..0.5, dna in 0.01f64..0.49) {
            let a = FiberSpec::new(1e-4, na, 633e-9).unwrap();
            let b = FiberSpec::new(1e-4, na + dna, 633e-9).unwrap();
            prop_assert!(acceptance_angle(&b) > acceptance_angle(&a));
        }
    }
}
