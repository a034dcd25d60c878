//! Flat key=value run configuration. Lengths must carry an explicit unit
//! suffix (nm, um, mm, cm, m); bare numbers for length keys are parse
//! errors, never silently meters. Unknown keys are rejected with line
//! diagnostics.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use crate::optics::{DetectorSpec, FiberSpec, OpticsError};
use crate::sensor::{NoiseModel, PolarizationMode};
use crate::source::{SourceGeometry, SourceKind};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: cannot parse `{text}` (expected key = value)")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: key `{key}`: {reason}")]
    BadValue {
        line: usize,
        key: String,
        reason: String,
    },
    #[error("length value `{value}` for `{key}` needs a unit suffix (nm, um, mm, cm, m)")]
    MissingUnit { key: String, value: String },
    #[error("missing required key `{key}`: {reason}")]
    MissingKey { key: String, reason: String },
    #[error("invalid physics parameters: {0}")]
    Optics(#[from] OpticsError),
    #[error("config I/O: {0}")]
    Io(#[from] std::io::Error),
}

/// Everything a simulation run needs, with paper-geometry defaults
/// (2R = 200 um, NA = 0.39, lambda = 633 nm, z = 20 cm).
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub core_radius: f64,
    pub numerical_aperture: f64,
    pub wavelength: f64,

    pub source_kind: SourceKind,
    /// Center-to-center distance for two sources.
    pub source_separation: f64,
    /// Lattice pitch override; None means the fiber fringe spacing.
    pub lattice_pitch: Option<f64>,

    pub distance_z: f64,
    pub pixel_pitch: f64,
    pub width_px: usize,
    pub height_px: usize,
    pub bit_depth: u8,

    pub noise_sigma: f64,
    pub noise_offset: f64,

    /// Mean gray level the gain is tuned to produce.
    pub target_mean_gray: f64,
    pub polarization: PolarizationMode,

    pub frames: usize,
    pub master_seed: u64,
    /// FFT zero-padding factor for the far-field sampling.
    pub pad_factor: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            core_radius: 100e-6,
            numerical_aperture: 0.39,
            wavelength: 633e-9,
            source_kind: SourceKind::OneSource,
            source_separation: 1e-3,
            lattice_pitch: None,
            distance_z: 0.2,
            pixel_pitch: 30e-6,
            width_px: 256,
            height_px: 256,
            bit_depth: 8,
            noise_sigma: 0.0,
            noise_offset: 0.0,
            target_mean_gray: 25.0,
            polarization: PolarizationMode::SinglePol,
            frames: 200,
            master_seed: 1,
            pad_factor: 4,
        }
    }
}

/// Parses a length with a mandatory unit suffix.
fn parse_length(key: &str, value: &str) -> Result<f64, ConfigError> {
    let v = value.trim();
    // divide by the exactly representable power of ten so that e.g.
    // "50 um" parses to the same double as the literal 50e-6
    let (number, divisor) = if let Some(n) = v.strip_suffix("nm") {
        (n, 1e9)
    } else if let Some(n) = v.strip_suffix("um") {
        (n, 1e6)
    } else if let Some(n) = v.strip_suffix("mm") {
        (n, 1e3)
    } else if let Some(n) = v.strip_suffix("cm") {
        (n, 1e2)
    } else if let Some(n) = v.strip_suffix('m') {
        (n, 1.0)
    } else {
        return Err(ConfigError::MissingUnit {
            key: key.into(),
            value: v.into(),
        });
    };
    number
        .trim()
        .parse::<f64>()
        .map(|x| x / divisor)
        .map_err(|_| ConfigError::MissingUnit {
            key: key.into(),
            value: v.into(),
        })
}

fn format_length(meters: f64) -> String {
    let a = meters.abs();
    if a == 0.0 {
        "0 m".into()
    } else if a < 1e-6 {
        format!("{} nm", meters * 1e9)
    } else if a < 1e-3 {
        format!("{} um", meters * 1e6)
    } else if a < 1e-2 {
        format!("{} mm", meters * 1e3)
    } else {
        format!("{} m", meters)
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut seen: BTreeMap<String, usize> = BTreeMap::new();
        let mut cfg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let stripped = raw.split('#').next().unwrap().trim();
            if stripped.is_empty() {
                continue;
            }
            let (key, value) = stripped.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                text: stripped.into(),
            })?;
            let key = key.trim();
            let value = value.trim();
            if value.is_empty() {
                return Err(ConfigError::Syntax {
                    line,
                    text: stripped.into(),
                });
            }
            if seen.insert(key.to_string(), line).is_some() {
                return Err(ConfigError::DuplicateKey { line, key: key.into() });
            }
            let bad = |reason: String| ConfigError::BadValue {
                line,
                key: key.into(),
                reason,
            };
            let length = |v: &str| parse_length(key, v);
            match key {
                "fiber.core_radius" => cfg.core_radius = length(value)?,
                "fiber.numerical_aperture" => {
                    cfg.numerical_aperture = value.parse().map_err(|e| bad(format!("{e}")))?
                }
                "fiber.wavelength" => cfg.wavelength = length(value)?,
                "source.kind" => {
                    cfg.source_kind = match value {
                        "one" => SourceKind::OneSource,
                        "two" => SourceKind::TwoSources,
                        other => return Err(bad(format!("expected `one` or `two`, got `{other}`"))),
                    }
                }
                "source.separation" => cfg.source_separation = length(value)?,
                "source.lattice_pitch" => cfg.lattice_pitch = Some(length(value)?),
                "detector.distance_z" => cfg.distance_z = length(value)?,
                "detector.pixel_pitch" => cfg.pixel_pitch = length(value)?,
                "detector.width_px" => cfg.width_px = value.parse().map_err(|e| bad(format!("{e}")))?,
                "detector.height_px" => cfg.height_px = value.parse().map_err(|e| bad(format!("{e}")))?,
                "detector.bit_depth" => cfg.bit_depth = value.parse().map_err(|e| bad(format!("{e}")))?,
                "noise.sigma" => cfg.noise_sigma = value.parse().map_err(|e| bad(format!("{e}")))?,
                "noise.offset" => cfg.noise_offset = value.parse().map_err(|e| bad(format!("{e}")))?,
                "capture.target_mean_gray" => {
                    cfg.target_mean_gray = value.parse().map_err(|e| bad(format!("{e}")))?
                }
                "capture.polarization" => {
                    cfg.polarization = match value {
                        "single" => PolarizationMode::SinglePol,
                        "unpolarized" => PolarizationMode::UnpolarizedSum,
                        other => {
                            return Err(bad(format!("expected `single` or `unpolarized`, got `{other}`")))
                        }
                    }
                }
                "run.frames" => cfg.frames = value.parse().map_err(|e| bad(format!("{e}")))?,
                "run.master_seed" => cfg.master_seed = value.parse().map_err(|e| bad(format!("{e}")))?,
                "run.pad_factor" => cfg.pad_factor = value.parse().map_err(|e| bad(format!("{e}")))?,
                other => {
                    return Err(ConfigError::UnknownKey {
                        line,
                        key: other.into(),
                    })
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.fiber()?;
        self.detector()?;
        if self.source_kind == SourceKind::TwoSources && !(self.source_separation > 0.0) {
            return Err(ConfigError::MissingKey {
                key: "source.separation".into(),
                reason: "two sources need a positive separation".into(),
            });
        }
        if !(self.target_mean_gray > 0.0) {
            return Err(ConfigError::MissingKey {
                key: "capture.target_mean_gray".into(),
                reason: "target mean gray must be positive".into(),
            });
        }
        if self.frames == 0 {
            return Err(ConfigError::MissingKey {
                key: "run.frames".into(),
                reason: "at least one frame".into(),
            });
        }
        if self.pad_factor == 0 {
            return Err(ConfigError::MissingKey {
                key: "run.pad_factor".into(),
                reason: "pad factor must be at least 1".into(),
            });
        }
        if self.noise_sigma < 0.0 || self.noise_offset < 0.0 {
            return Err(ConfigError::MissingKey {
                key: "noise.sigma".into(),
                reason: "noise sigma and offset must be non-negative".into(),
            });
        }
        Ok(())
    }

    pub fn fiber(&self) -> Result<FiberSpec, ConfigError> {
        Ok(FiberSpec::new(self.core_radius, self.numerical_aperture, self.wavelength)?)
    }

    pub fn geometry(&self) -> SourceGeometry {
        let mut geom = match self.source_kind {
            SourceKind::OneSource => SourceGeometry::one_source(self.core_radius),
            SourceKind::TwoSources => SourceGeometry::two_sources(self.core_radius, self.source_separation),
        };
        if let Some(p) = self.lattice_pitch {
            geom = geom.with_pitch(p);
        }
        geom
    }

    /// Detector with unit gain; the pipeline rescales the gain to hit the
    /// target mean gray.
    pub fn detector(&self) -> Result<DetectorSpec, ConfigError> {
        let mut det = DetectorSpec::new(self.distance_z, self.pixel_pitch, self.width_px, self.height_px)?;
        det.bit_depth = self.bit_depth;
        det.read_noise_sigma = self.noise_sigma;
        det.validate()?;
        Ok(det)
    }

    pub fn noise(&self) -> NoiseModel {
        NoiseModel::new(self.noise_sigma, self.noise_offset)
    }

    /// Serializes back to the key=value syntax `parse` accepts.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let kind = match self.source_kind {
            SourceKind::OneSource => "one",
            SourceKind::TwoSources => "two",
        };
        let pol = match self.polarization {
            PolarizationMode::SinglePol => "single",
            PolarizationMode::UnpolarizedSum => "unpolarized",
        };
        out.push_str(&format!("fiber.core_radius = {}\n", format_length(self.core_radius)));
        out.push_str(&format!("fiber.numerical_aperture = {}\n", self.numerical_aperture));
        out.push_str(&format!("fiber.wavelength = {}\n", format_length(self.wavelength)));
        out.push_str(&format!("source.kind = {kind}\n"));
        out.push_str(&format!("source.separation = {}\n", format_length(self.source_separation)));
        if let Some(p) = self.lattice_pitch {
            out.push_str(&format!("source.lattice_pitch = {}\n", format_length(p)));
        }
        out.push_str(&format!("detector.distance_z = {}\n", format_length(self.distance_z)));
        out.push_str(&format!("detector.pixel_pitch = {}\n", format_length(self.pixel_pitch)));
        out.push_str(&format!("detector.width_px = {}\n", self.width_px));
        out.push_str(&format!("detector.height_px = {}\n", self.height_px));
        out.push_str(&format!("detector.bit_depth = {}\n", self.bit_depth));
        out.push_str(&format!("noise.sigma = {}\n", self.noise_sigma));
        out.push_str(&format!("noise.offset = {}\n", self.noise_offset));
        out.push_str(&format!("capture.target_mean_gray = {}\n", self.target_mean_gray));
        out.push_str(&format!("capture.polarization = {pol}\n"));
        out.push_str(&format!("run.frames = {}\n", self.frames));
        out.push_str(&format!("run.master_seed = {}\n", self.master_seed));
        out.push_str(&format!("run.pad_factor = {}\n", self.pad_factor));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_paper_geometry() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.core_radius, 100e-6);
        assert_eq!(cfg.numerical_aperture, 0.39);
        assert_eq!(cfg.wavelength, 633e-9);
        assert_eq!(cfg.distance_z, 0.2);
        cfg.validate().unwrap();
    }

    #[test]
    fn parses_lengths_with_units() {
        let cfg = RunConfig::parse(
            "fiber.core_radius = 50 um\n\
             fiber.wavelength = 532 nm\n\
             detector.distance_z = 30 cm\n\
             detector.pixel_pitch = 5.2 um\n\
             source.separation = 1.5 mm\n\
             source.kind = two\n",
        )
        .unwrap();
        assert_eq!(cfg.core_radius, 50e-6);
        assert_eq!(cfg.wavelength, 532e-9);
        assert!((cfg.distance_z - 0.3).abs() < 1e-15);
        assert!((cfg.pixel_pitch - 5.2e-6).abs() < 1e-18);
        assert_eq!(cfg.source_separation, 1.5e-3);
        assert_eq!(cfg.source_kind, SourceKind::TwoSources);
    }

    #[test]
    fn bare_length_number_is_an_error() {
        let err = RunConfig::parse("fiber.core_radius = 0.0001\n").unwrap_err();
        assert!(matches!(err, ConfigError::MissingUnit { .. }), "{err}");
    }

    #[test]
    fn unknown_key_reported_with_line() {
        let err = RunConfig::parse("\n# comment\nrun.frames = 10\nbogus.key = 1\n").unwrap_err();
        match err {
            ConfigError::UnknownKey { line, key } => {
                assert_eq!(line, 4);
                assert_eq!(key, "bogus.key");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn syntax_and_duplicate_errors() {
        assert!(matches!(
            RunConfig::parse("run.frames\n"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            RunConfig::parse("run.frames = 5\nrun.frames = 6\n"),
            Err(ConfigError::DuplicateKey { line: 2, .. })
        ));
        assert!(matches!(
            RunConfig::parse("run.frames =\n"),
            Err(ConfigError::Syntax { .. })
        ));
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let cfg = RunConfig::parse("# full line comment\n\nrun.frames = 7 # trailing\n").unwrap();
        assert_eq!(cfg.frames, 7);
    }

    #[test]
    fn round_trips_through_text() {
        let mut cfg = RunConfig::default();
        cfg.source_kind = SourceKind::TwoSources;
        cfg.noise_sigma = 2.0;
        cfg.noise_offset = 5.0;
        cfg.polarization = PolarizationMode::UnpolarizedSum;
        cfg.frames = 123;
        cfg.master_seed = 42;
        let reparsed = RunConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(cfg, reparsed);
    }

    #[test]
    fn invalid_physics_rejected() {
        assert!(RunConfig::parse("fiber.numerical_aperture = 1.5\n").is_err());
        assert!(RunConfig::parse("run.frames = 0\n").is_err());
        assert!(RunConfig::parse("run.pad_factor = 0\n").is_err());
        assert!(RunConfig::parse("noise.sigma = -1\n").is_err());
    }

    #[test]
    fn derived_specs_consistent() {
        let cfg = RunConfig::default();
        let fiber = cfg.fiber().unwrap();
        assert_eq!(fiber.core_radius(), cfg.core_radius);
        let det = cfg.detector().unwrap();
        assert_eq!(det.max_gray(), 255);
        let geom = cfg.geometry();
        assert_eq!(geom.aperture_radius, cfg.core_radius);
    }
}
