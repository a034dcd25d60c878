//! Fraunhofer far-field propagation of the source plane to the detector
//! plane. The detector field is the Fourier transform of the source field
//! evaluated at spatial frequencies x/(lambda z); quadratic Fresnel phase
//! factors are dropped since only |field| statistics and normalized
//! correlations are consumed downstream.

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::czt::Czt1d;
use crate::optics::DetectorSpec;
use crate::source::SourcePlane;

#[derive(Debug, Error, PartialEq)]
pub enum PropagationError {
    #[error("Fresnel regime: z = {z} m is below the far-field bound 10 a^2 / lambda = {required} m")]
    FresnelRegime { z: f64, required: f64 },
    #[error("detector window {requested} m exceeds the unambiguous field of view {max} m")]
    FovTooSmall { requested: f64, max: f64 },
    #[error("nearest-bin sampling requested but detector pitch is not a multiple of the FFT bin pitch (ratio {ratio})")]
    IncommensuratePitch { ratio: f64 },
    #[error("fields have different shapes")]
    ShapeMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Plane {
    Source,
    Detector,
}

/// 2D complex amplitude grid with its physical pixel pitch. Coordinates are
/// centered: element (i, j) sits at ((i - nrows/2) pitch, (j - ncols/2) pitch).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub grid: Array2<Complex64>,
    pub pitch: f64,
    pub plane: Plane,
    pub wavelength: f64,
    pub z: Option<f64>,
}

impl ComplexField {
    pub fn x_coord(&self, col: usize) -> f64 {
        (col as f64 - (self.grid.ncols() / 2) as f64) * self.pitch
    }

    pub fn y_coord(&self, row: usize) -> f64 {
        (row as f64 - (self.grid.nrows() / 2) as f64) * self.pitch
    }
}

/// How detector samples are taken from the continuous far-field spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingMethod {
    /// Nearest-bin when the detector pitch is commensurate with the padded
    /// FFT bin pitch, band-limited interpolation otherwise.
    Auto,
    NearestBin,
    BandLimited,
}

/// Propagates a source plane to the detector plane.
///
/// The output grid has `det.height_px` x `det.width_px` samples at
/// `det.pixel_pitch`, amplitude-scaled by src_pitch^2 / (lambda z) so that
/// energy is conserved when the detector window tiles the whole transform.
pub fn far_field(
    src: &SourcePlane,
    wavelength: f64,
    det: &DetectorSpec,
    pad_factor: usize,
) -> Result<ComplexField, PropagationError> {
    far_field_with(src, wavelength, det, pad_factor, SamplingMethod::Auto)
}

pub fn far_field_with(
    src: &SourcePlane,
    wavelength: f64,
    det: &DetectorSpec,
    pad_factor: usize,
    method: SamplingMethod,
) -> Result<ComplexField, PropagationError> {
    assert!(pad_factor >= 1);
    let z = det.distance_z;
    // per-aperture Fraunhofer condition: the inter-source quadratic phase
    // only rotates gamma_c, it does not change |gamma_c| or the statistics
    let a = src.aperture_radius.min(src.support_half_extent().max(f64::MIN_POSITIVE));
    let required = 10.0 * a * a / wavelength;
    if z < required {
        return Err(PropagationError::FresnelRegime { z, required });
    }
    let max_fov = wavelength * z / src.pitch;
    let fov_x = det.width_px as f64 * det.pixel_pitch;
    let fov_y = det.height_px as f64 * det.pixel_pitch;
    if fov_x > max_fov * (1.0 + 1e-9) || fov_y > max_fov * (1.0 + 1e-9) {
        return Err(PropagationError::FovTooSmall {
            requested: fov_x.max(fov_y),
            max: max_fov,
        });
    }

    let (nr, nc) = src.grid.dim();
    let n_fft = (pad_factor * nr.max(nc)).next_power_of_two();
    let fft_pitch = wavelength * z / (n_fft as f64 * src.pitch);
    let ratio = det.pixel_pitch / fft_pitch;

    let commensurate = {
        let r_int = ratio.round();
        let step_ok = (ratio - r_int).abs() < 1e-9 * ratio.max(1.0) && r_int >= 1.0;
        // all centered sample bins must stay within [-n_fft/2, n_fft/2 - 1]
        let half = (n_fft / 2) as f64;
        let neg_x = (det.width_px / 2) as f64 * r_int;
        let neg_y = (det.height_px / 2) as f64 * r_int;
        let pos_x = (det.width_px - 1 - det.width_px / 2) as f64 * r_int;
        let pos_y = (det.height_px - 1 - det.height_px / 2) as f64 * r_int;
        step_ok && neg_x <= half && neg_y <= half && pos_x <= half - 1.0 && pos_y <= half - 1.0
    };

    let use_fft = match method {
        SamplingMethod::Auto => commensurate,
        SamplingMethod::NearestBin => {
            if !commensurate {
                return Err(PropagationError::IncommensuratePitch { ratio });
            }
            true
        }
        SamplingMethod::BandLimited => false,
    };

    let scale = src.pitch * src.pitch / (wavelength * z);
    let grid = if use_fft {
        sample_fft(src, det, n_fft, ratio.round() as i64, scale)
    } else {
        sample_czt(src, det, wavelength, scale)
    };

    Ok(ComplexField {
        grid,
        pitch: det.pixel_pitch,
        plane: Plane::Detector,
        wavelength,
        z: Some(z),
    })
}

fn sample_fft(src: &SourcePlane, det: &DetectorSpec, n_fft: usize, ratio: i64, scale: f64) -> Array2<Complex64> {
    let (nr, nc) = src.grid.dim();
    let mut padded = Array2::from_elem((n_fft, n_fft), Complex64::new(0.0, 0.0));
    padded.slice_mut(ndarray::s![..nr, ..nc]).assign(&src.grid);
    fft2_in_place(&mut padded);

    // the source grid was embedded with its center at (nr/2, nc/2), so a
    // centered-coordinate spectrum needs a linear phase correction
    let cy = (nr / 2) as f64;
    let cx = (nc / 2) as f64;
    let n = n_fft as i64;
    let mut out = Array2::from_elem((det.height_px, det.width_px), Complex64::new(0.0, 0.0));
    for i in 0..det.height_px {
        let ky = (i as i64 - (det.height_px / 2) as i64) * ratio;
        for j in 0..det.width_px {
            let kx = (j as i64 - (det.width_px / 2) as i64) * ratio;
            let v = padded[(ky.rem_euclid(n) as usize, kx.rem_euclid(n) as usize)];
            let phase = std::f64::consts::TAU * (ky as f64 * cy + kx as f64 * cx) / n_fft as f64;
            out[(i, j)] = v * Complex64::from_polar(scale, phase);
        }
    }
    out
}

fn sample_czt(src: &SourcePlane, det: &DetectorSpec, wavelength: f64, scale: f64) -> Array2<Complex64> {
    let (nr, nc) = src.grid.dim();
    let z = det.distance_z;
    let theta = std::f64::consts::TAU * src.pitch * det.pixel_pitch / (wavelength * z);

    // transform along x (rows), then along y (columns)
    let czt_x = Czt1d::new(nc, det.width_px, theta, -((nc / 2) as f64), -((det.width_px / 2) as f64));
    let mut mid = Array2::from_elem((nr, det.width_px), Complex64::new(0.0, 0.0));
    let mut row_out = vec![Complex64::new(0.0, 0.0); det.width_px];
    let mut row_in = vec![Complex64::new(0.0, 0.0); nc];
    for i in 0..nr {
        for (b, v) in row_in.iter_mut().zip(src.grid.row(i)) {
            *b = *v;
        }
        czt_x.process(&row_in, &mut row_out);
        for (j, v) in row_out.iter().enumerate() {
            mid[(i, j)] = *v;
        }
    }

    let czt_y = Czt1d::new(nr, det.height_px, theta, -((nr / 2) as f64), -((det.height_px / 2) as f64));
    let mut out = Array2::from_elem((det.height_px, det.width_px), Complex64::new(0.0, 0.0));
    let mut col_in = vec![Complex64::new(0.0, 0.0); nr];
    let mut col_out = vec![Complex64::new(0.0, 0.0); det.height_px];
    for j in 0..det.width_px {
        for (b, v) in col_in.iter_mut().zip(mid.column(j)) {
            *b = *v;
        }
        czt_y.process(&col_in, &mut col_out);
        for (i, v) in col_out.iter().enumerate() {
            out[(i, j)] = v * scale;
        }
    }
    out
}

fn fft2_in_place(grid: &mut Array2<Complex64>) {
    let (nr, nc) = grid.dim();
    let mut planner = FftPlanner::new();
    let fft_row = planner.plan_fft_forward(nc);
    for mut row in grid.rows_mut() {
        let slice = row.as_slice_mut().expect("row-major layout");
        fft_row.process(slice);
    }
    let fft_col = planner.plan_fft_forward(nr);
    let mut scratch = vec![Complex64::new(0.0, 0.0); nr];
    for j in 0..nc {
        for (i, s) in scratch.iter_mut().enumerate() {
            *s = grid[(i, j)];
        }
        fft_col.process(&mut scratch);
        for (i, s) in scratch.iter().enumerate() {
            grid[(i, j)] = *s;
        }
    }
}

/// Elementwise squared modulus of a field.
pub fn intensity(field: &ComplexField) -> Array2<f64> {
    field.grid.mapv(|v| v.norm_sqr())
}
