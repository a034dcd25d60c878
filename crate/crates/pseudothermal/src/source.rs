//! Source-plane synthesis: unit-amplitude subsources on a square lattice
//! clipped to one disk aperture or two displaced disk apertures, each site
//! carrying an independent uniform random phase per frame.

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

use crate::optics::{fringe_spacing, FiberSpec};
pub use crate::rng::SeedSpec;

#[derive(Debug, Error, PartialEq)]
pub enum SourceError {
    #[error("lattice too coarse: {sites_per_diameter} sites per aperture diameter, need at least {min}")]
    LatticeTooCoarse { sites_per_diameter: usize, min: usize },
    #[error("invalid source geometry: {0}")]
    BadGeometry(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceKind {
    OneSource,
    TwoSources,
}

/// Aperture layout of the source plane. For `TwoSources` the disks are
/// centered at x = -d/2 and x = +d/2 and must be disjoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceGeometry {
    pub kind: SourceKind,
    pub aperture_radius: f64,
    /// Center-to-center separation; only meaningful for `TwoSources`.
    pub separation: f64,
    /// Lattice pitch override; `None` uses the fiber fringe spacing.
    pub lattice_pitch: Option<f64>,
    /// Minimum lattice sites across an aperture diameter before
    /// `build_support` refuses. The default of 10 keeps the synthesis in
    /// the many-subsource regime; lower it only for degenerate test setups.
    pub min_sites_per_diameter: usize,
}

impl SourceGeometry {
    pub fn one_source(aperture_radius: f64) -> Self {
        Self {
            kind: SourceKind::OneSource,
            aperture_radius,
            separation: 0.0,
            lattice_pitch: None,
            min_sites_per_diameter: 10,
        }
    }

    pub fn two_sources(aperture_radius: f64, separation: f64) -> Self {
        Self {
            kind: SourceKind::TwoSources,
            aperture_radius,
            separation,
            lattice_pitch: None,
            min_sites_per_diameter: 10,
        }
    }

    pub fn with_pitch(mut self, pitch: f64) -> Self {
        self.lattice_pitch = Some(pitch);
        self
    }

    pub fn validate(&self) -> Result<(), SourceError> {
        if !(self.aperture_radius > 0.0) {
            return Err(SourceError::BadGeometry(format!(
                "aperture radius must be positive, got {}",
                self.aperture_radius
            )));
        }
        if let Some(p) = self.lattice_pitch {
            if !(p > 0.0) {
                return Err(SourceError::BadGeometry(format!("lattice pitch must be positive, got {p}")));
            }
        }
        if self.kind == SourceKind::TwoSources && self.separation <= 2.0 * self.aperture_radius {
            return Err(SourceError::BadGeometry(format!(
                "two-source separation {} must exceed the aperture diameter {}",
                self.separation,
                2.0 * self.aperture_radius
            )));
        }
        Ok(())
    }

    /// Lattice pitch actually used: the explicit override, or the fiber
    /// fringe spacing.
    pub fn effective_pitch(&self, fiber: &FiberSpec) -> f64 {
        self.lattice_pitch.unwrap_or_else(|| fringe_spacing(fiber))
    }
}

/// Discretized source plane: a complex amplitude per lattice site, zero off
/// the aperture support and unit modulus on it. Coordinates are centered on
/// the grid midpoint; rows are y, columns x.
#[derive(Debug, Clone, PartialEq)]
pub struct SourcePlane {
    pub grid: Array2<Complex64>,
    pub pitch: f64,
    pub support: Array2<bool>,
    /// Which aperture each active site belongs to (0 or 1); 0 elsewhere.
    aperture_id: Array2<u8>,
    pub subsource_count_active: usize,
    /// Radius of a single aperture; the Fraunhofer regime is judged per
    /// aperture, not on the composite two-source extent.
    pub aperture_radius: f64,
    n_apertures: usize,
}

impl SourcePlane {
    pub fn shape(&self) -> (usize, usize) {
        self.grid.dim()
    }

    /// Physical x coordinate of column `col` relative to the grid center.
    pub fn x_coord(&self, col: usize) -> f64 {
        (col as f64 - (self.grid.ncols() as f64 - 1.0) / 2.0) * self.pitch
    }

    /// Physical y coordinate of row `row` relative to the grid center.
    pub fn y_coord(&self, row: usize) -> f64 {
        (row as f64 - (self.grid.nrows() as f64 - 1.0) / 2.0) * self.pitch
    }

    /// Half-extent of the support along x, used for far-field regime checks.
    pub fn support_half_extent(&self) -> f64 {
        let mut max_r: f64 = 0.0;
        for ((i, j), &on) in self.support.indexed_iter() {
            if on {
                let x = self.x_coord(j);
                let y = self.y_coord(i);
                max_r = max_r.max((x * x + y * y).sqrt());
            }
        }
        max_r
    }
}

/// Lays out the aperture support with unit amplitudes and zero phases.
///
/// Sites sit on a square lattice centered on each aperture center; a site is
/// active when it falls strictly inside the disk. Aperture centers are
/// snapped to the lattice so each disk mask is point-symmetric about its
/// center.
pub fn build_support(geom: &SourceGeometry, fiber: &FiberSpec) -> Result<SourcePlane, SourceError> {
    geom.validate()?;
    let pitch = geom.effective_pitch(fiber);
    let a = geom.aperture_radius;
    let sites_per_diameter = (2.0 * a / pitch).floor() as usize;
    if sites_per_diameter < geom.min_sites_per_diameter {
        return Err(SourceError::LatticeTooCoarse {
            sites_per_diameter,
            min: geom.min_sites_per_diameter,
        });
    }

    // half-width of one aperture in lattice steps
    let ha = (a / pitch).ceil() as i64;
    let (half_cols, center_offset) = match geom.kind {
        SourceKind::OneSource => (ha, 0i64),
        SourceKind::TwoSources => {
            let c = (0.5 * geom.separation / pitch).round() as i64;
            (c + ha, c)
        }
    };
    let nrows = (2 * ha + 1) as usize;
    let ncols = (2 * half_cols + 1) as usize;
    let mut support = Array2::from_elem((nrows, ncols), false);
    let mut aperture_id = Array2::zeros((nrows, ncols));
    let mut grid = Array2::from_elem((nrows, ncols), Complex64::new(0.0, 0.0));
    let mut active = 0usize;

    let a_sq = a * a;
    for i in 0..nrows {
        let y = (i as i64 - ha) as f64 * pitch;
        for j in 0..ncols {
            let x = (j as i64 - half_cols) as f64 * pitch;
            let (dx, id) = match geom.kind {
                SourceKind::OneSource => (x, 0u8),
                SourceKind::TwoSources => {
                    // nearest of the two snapped centers
                    let left = x + center_offset as f64 * pitch;
                    let right = x - center_offset as f64 * pitch;
                    if left.abs() <= right.abs() {
                        (left, 0u8)
                    } else {
                        (right, 1u8)
                    }
                }
            };
            if dx * dx + y * y < a_sq {
                support[(i, j)] = true;
                aperture_id[(i, j)] = id;
                grid[(i, j)] = Complex64::new(1.0, 0.0);
                active += 1;
            }
        }
    }

    Ok(SourcePlane {
        grid,
        pitch,
        support,
        aperture_id,
        subsource_count_active: active,
        aperture_radius: a,
        n_apertures: match geom.kind {
            SourceKind::OneSource => 1,
            SourceKind::TwoSources => 2,
        },
    })
}

/// Assigns every active site an i.i.d. phase uniform on [0, 2pi),
/// deterministically from the seed. Each aperture draws from its own
/// stream, so two-source frames model two independent sources.
pub fn randomize_phases(plane: &SourcePlane, seed: SeedSpec) -> SourcePlane {
    randomize_phases_lanes(plane, seed, 0)
}

/// As `randomize_phases`, but drawing from RNG lanes starting at
/// `lane_base`. Distinct bases give statistically independent realizations
/// of the same frame, used for the second polarization component.
pub fn randomize_phases_lanes(plane: &SourcePlane, seed: SeedSpec, lane_base: u64) -> SourcePlane {
    let mut out = plane.clone();
    for aperture in 0..plane.n_apertures {
        let mut rng = seed.stream(lane_base + aperture as u64);
        for ((i, j), &on) in plane.support.indexed_iter() {
            if on && plane.aperture_id[(i, j)] == aperture as u8 {
                let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                let amp = plane.grid[(i, j)].norm();
                out.grid[(i, j)] = Complex64::from_polar(amp, phase);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::FiberSpec;

    fn fiber() -> FiberSpec {
        FiberSpec::new(100e-6, 0.39, 633e-9).unwrap()
    }

    /// Independent brute-force count of lattice points strictly inside a
    /// disk of radius `a` centered on a lattice site.
    fn disk_lattice_count(a: f64, pitch: f64) -> usize {
        let n = (a / pitch).ceil() as i64 + 2;
        let mut count = 0;
        for i in -n..=n {
            for j in -n..=n {
                let x = i as f64 * pitch;
                let y = j as f64 * pitch;
                if x * x + y * y < a * a {
                    count += 1;
                }
            }
        }
        count
    }

    #[test]
    fn one_source_count_matches_disk_area() {
        let geom = SourceGeometry::one_source(100e-6).with_pitch(0.81e-6);
        let plane = build_support(&geom, &fiber()).unwrap();
        let expected = disk_lattice_count(100e-6, 0.81e-6);
        assert_eq!(plane.subsource_count_active, expected);
        // pi (a/pitch)^2 within 2%
        let area = std::f64::consts::PI * (100e-6f64 / 0.81e-6).powi(2);
        assert!((plane.subsource_count_active as f64 - area).abs() < 0.02 * area);
        assert!((area - 4.8e4).abs() < 0.01 * area);
    }

    #[test]
    fn degenerate_disk_keeps_center_only() {
        let pitch = 1e-6;
        let mut geom = SourceGeometry::one_source(pitch).with_pitch(pitch);
        geom.min_sites_per_diameter = 1;
        let plane = build_support(&geom, &fiber()).unwrap();
        assert_eq!(plane.shape(), (3, 3));
        assert_eq!(plane.subsource_count_active, 1);
        assert!(plane.support[(1, 1)]);
    }

    #[test]
    fn coarse_lattice_rejected() {
        let geom = SourceGeometry::one_source(4e-6).with_pitch(1e-6);
        let err = build_support(&geom, &fiber()).unwrap_err();
        assert!(matches!(err, SourceError::LatticeTooCoarse { .. }));
    }

    #[test]
    fn two_sources_are_disjoint_and_separated() {
        let geom = SourceGeometry::two_sources(100e-6, 1e-3).with_pitch(0.81e-6);
        let plane = build_support(&geom, &fiber()).unwrap();
        // centroids of the two masks sit 1 mm apart along x
        let (mut sx, mut n0) = (0.0, 0usize);
        let (mut sx1, mut n1) = (0.0, 0usize);
        for ((i, j), &on) in plane.support.indexed_iter() {
            if on {
                if plane.aperture_id[(i, j)] == 0 {
                    sx += plane.x_coord(j);
                    n0 += 1;
                } else {
                    sx1 += plane.x_coord(j);
                    n1 += 1;
                }
            }
        }
        assert_eq!(n0, n1);
        let d = sx1 / n1 as f64 - sx / n0 as f64;
        assert!((d - 1e-3).abs() < 1e-6, "centroid separation {d}");
        // no site belongs to both disks: total equals two single disks
        assert_eq!(plane.subsource_count_active, 2 * disk_lattice_count(100e-6, 0.81e-6));
    }

    #[test]
    fn mask_point_symmetric() {
        let geom = SourceGeometry::one_source(20e-6).with_pitch(0.9e-6);
        let plane = build_support(&geom, &fiber()).unwrap();
        let (nr, nc) = plane.shape();
        for ((i, j), &on) in plane.support.indexed_iter() {
            assert_eq!(on, plane.support[(nr - 1 - i, nc - 1 - j)]);
        }
    }

    #[test]
    fn overlapping_two_sources_rejected() {
        let geom = SourceGeometry::two_sources(100e-6, 150e-6);
        assert!(build_support(&geom, &fiber()).is_err());
    }

    #[test]
    fn phases_deterministic_and_amplitude_preserving() {
        let geom = SourceGeometry::one_source(20e-6).with_pitch(0.81e-6);
        let plane = build_support(&geom, &fiber()).unwrap();
        let a = randomize_phases(&plane, SeedSpec::new(1, 0));
        let b = randomize_phases(&plane, SeedSpec::new(1, 0));
        assert_eq!(a, b);
        for ((i, j), &on) in plane.support.indexed_iter() {
            if on {
                assert!((a.grid[(i, j)].norm() - 1.0).abs() < 1e-14);
            } else {
                assert_eq!(a.grid[(i, j)], Complex64::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn phases_decorrelated_across_frames() {
        let geom = SourceGeometry::one_source(100e-6).with_pitch(0.81e-6);
        let plane = build_support(&geom, &fiber()).unwrap();
        let a = randomize_phases(&plane, SeedSpec::new(7, 0));
        let b = randomize_phases(&plane, SeedSpec::new(7, 1));
        let n = plane.subsource_count_active as f64;
        // sample correlation of the phasors between the two frames
        let mut acc = Complex64::new(0.0, 0.0);
        for ((i, j), &on) in plane.support.indexed_iter() {
            if on {
                acc += a.grid[(i, j)] * b.grid[(i, j)].conj();
            }
        }
        assert!((acc / n).norm() < 3.0 / n.sqrt());
    }

    #[test]
    fn circular_mean_of_phases_small() {
        let geom = SourceGeometry::one_source(100e-6).with_pitch(0.81e-6);
        let plane = build_support(&geom, &fiber()).unwrap();
        assert!(plane.subsource_count_active >= 10_000);
        let a = randomize_phases(&plane, SeedSpec::new(3, 5));
        let n = plane.subsource_count_active as f64;
        let sum: Complex64 = a.grid.iter().sum();
        assert!((sum / n).norm() < 3.0 / n.sqrt());
    }
}
