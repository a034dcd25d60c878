//! Spatial second-order intensity correlations: the g2(x0, xi) estimator
//! over rows and frames, the Airy coherence model and its one- and
//! two-source g2 forms, the Siegert-relation check, and model fitting with
//! the free parameters a, d, offset and visibility.

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::fitting::{levenberg_marquardt, FitError, FitOptions};
use crate::stack::FrameStack;

/// Minimum ensemble size for the Siegert check.
pub const MIN_SIEGERT_FRAMES: usize = 2000;

/// First zero of the Bessel function J1.
pub const BESSEL_J1_FIRST_ZERO: f64 = 3.831705970207512;

#[derive(Debug, Error)]
pub enum CorrelationError {
    #[error("need at least {need} frames, got {got}")]
    InsufficientFrames { got: usize, need: usize },
    #[error("pixel lane at offset {offset} has zero mean intensity")]
    ZeroMeanLane { offset: usize },
    #[error("x0 = {x0} with max offset {max_offset} exceeds row length {width}")]
    OffsetOutOfRange {
        x0: usize,
        max_offset: usize,
        width: usize,
    },
    #[error("curve span {span:.4e} m too short: {reason}")]
    InsufficientSpan { span: f64, reason: String },
    #[error("g2 fit diverged: {0}")]
    FitDiverged(#[from] FitError),
    #[error("bad correlation input: {0}")]
    BadInput(String),
}

/// One-dimensional g2 curve along a detector row.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationCurve {
    /// Physical separations x_i - x_0 in meters, strictly increasing from 0.
    pub separations: Vec<f64>,
    pub g2_values: Vec<f64>,
    /// Jackknife-over-frames standard errors.
    pub standard_errors: Vec<f64>,
    pub x0_position: usize,
    pub frames_used: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum G2Model {
    OneTLS,
    TwoTLS,
}

/// Geometry the fit needs to translate separations into the Bessel and
/// fringe arguments.
#[derive(Debug, Clone, Copy)]
pub struct G2FitContext {
    pub wavelength: f64,
    pub distance_z: f64,
}

/// Optional starting values for the fit.
#[derive(Debug, Clone, Copy, Default)]
pub struct G2Hints {
    pub aperture_radius_a: Option<f64>,
    pub separation_d: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct G2FitResult {
    pub model: G2Model,
    /// Fitted source size parameter `a` in the chi = pi a dr / (lambda z)
    /// convention of the g2 models. The Van Cittert-Zernike argument of a
    /// disk of radius R is 2 pi R dr / (lambda z), so for simulated disk
    /// sources this fitted `a` equals the source diameter 2R.
    pub aperture_radius_a: f64,
    /// Fitted source separation; None for OneTLS.
    pub separation_d: Option<f64>,
    pub offset_c: f64,
    pub modulation_v: f64,
    /// V / (2C + V); 1/3 for ideal C = V = 1.
    pub visibility: f64,
    pub chi2_per_dof: f64,
    /// 1-sigma uncertainties in the same order as the fit parameters:
    /// (a, C, V) for OneTLS, (a, d, C, V) for TwoTLS.
    pub param_sigmas: Vec<f64>,
}

/// Complex degree of coherence of a uniformly illuminated disk (Van
/// Cittert-Zernike): 2 J1(chi)/chi with chi = pi a delta_r / (lambda z).
pub fn gamma_airy(delta_r: f64, a: f64, wavelength: f64, z: f64) -> f64 {
    assert!(a > 0.0 && wavelength > 0.0 && z > 0.0 && delta_r >= 0.0);
    let chi = std::f64::consts::PI * a * delta_r / (wavelength * z);
    if chi < 1e-6 {
        // series limit: 2 J1(x)/x = 1 - x^2/8 + O(x^4)
        return 1.0 - chi * chi / 8.0;
    }
    2.0 * libm::j1(chi) / chi
}

/// Eq.-style one-source model: C + V |2 J1(chi)/chi|^2.
pub fn g2_model_1tls(delta_r: f64, a: f64, wavelength: f64, z: f64, offset_c: f64, modulation_v: f64) -> f64 {
    let g = gamma_airy(delta_r, a, wavelength, z);
    offset_c + modulation_v * g * g
}

/// Two-source model: C + V |cos(pi d delta_r / (lambda z)) * 2 J1(chi)/chi|^2.
pub fn g2_model_2tls(
    delta_r: f64,
    a: f64,
    d: f64,
    wavelength: f64,
    z: f64,
    offset_c: f64,
    modulation_v: f64,
) -> f64 {
    assert!(d > 0.0);
    let g = gamma_airy(delta_r, a, wavelength, z);
    let c = (std::f64::consts::PI * d * delta_r / (wavelength * z)).cos();
    offset_c + modulation_v * (c * g).powi(2)
}

struct FrameSums {
    /// sum over rows of I(x0) I(x0 + i)
    cross: Vec<f64>,
    /// sum over rows of I(x0)
    ref_sum: f64,
    /// sum over rows of I(x0 + i)
    lane_sums: Vec<f64>,
}

fn frame_sums(pixels: &Array2<f64>, x0: usize, max_offset: usize) -> FrameSums {
    let n = max_offset + 1;
    let mut cross = vec![0.0; n];
    let mut lane_sums = vec![0.0; n];
    let mut ref_sum = 0.0;
    for row in pixels.rows() {
        let i0 = row[x0];
        ref_sum += i0;
        for k in 0..n {
            let ik = row[x0 + k];
            cross[k] += i0 * ik;
            lane_sums[k] += ik;
        }
    }
    FrameSums {
        cross,
        ref_sum,
        lane_sums,
    }
}

fn g2_from_sums(per_frame: &[FrameSums], rows: usize, x0: usize) -> Result<CorrelationCurve, CorrelationError> {
    let n = per_frame[0].cross.len();
    let frames = per_frame.len();
    let total = (rows * frames) as f64;

    let mut s_cross = vec![0.0; n];
    let mut s_lane = vec![0.0; n];
    let mut s_ref = 0.0;
    for f in per_frame {
        s_ref += f.ref_sum;
        for k in 0..n {
            s_cross[k] += f.cross[k];
            s_lane[k] += f.lane_sums[k];
        }
    }
    if s_ref == 0.0 {
        return Err(CorrelationError::ZeroMeanLane { offset: 0 });
    }
    if let Some(k) = s_lane.iter().position(|&v| v == 0.0) {
        return Err(CorrelationError::ZeroMeanLane { offset: k });
    }

    let mut g2 = vec![0.0; n];
    let mut se = vec![0.0; n];
    let leave_out = total - rows as f64;
    for k in 0..n {
        g2[k] = total * s_cross[k] / (s_ref * s_lane[k]);
        // jackknife over frames
        let mut jk = Vec::with_capacity(frames);
        for f in per_frame {
            let num = leave_out * (s_cross[k] - f.cross[k]);
            let den = (s_ref - f.ref_sum) * (s_lane[k] - f.lane_sums[k]);
            if den > 0.0 {
                jk.push(num / den);
            }
        }
        let m = jk.len() as f64;
        if m > 1.0 {
            let mean = jk.iter().sum::<f64>() / m;
            let var = jk.iter().map(|v| (v - mean).powi(2)).sum::<f64>() * (m - 1.0) / m;
            se[k] = var.sqrt().max(f64::MIN_POSITIVE);
        }
    }

    Ok(CorrelationCurve {
        separations: Vec::new(),
        g2_values: g2,
        standard_errors: se,
        x0_position: x0,
        frames_used: frames,
    })
}

/// The paper's estimator g2(x0, xi) = <I(x0)I(xi)> / (<I(x0)><I(xi)>),
/// sample-averaged over all rows of all frames, for xi = x0 .. x0 + max_offset.
pub fn estimate_g2(stack: &FrameStack, x0: usize, max_offset: usize) -> Result<CorrelationCurve, CorrelationError> {
    let frames = stack.frame_count();
    if frames < 2 {
        return Err(CorrelationError::InsufficientFrames { got: frames, need: 2 });
    }
    let width = stack.width();
    if x0 + max_offset >= width {
        return Err(CorrelationError::OffsetOutOfRange { x0, max_offset, width });
    }
    let rows = stack.height();
    let per_frame: Vec<FrameSums> = stack
        .frames
        .par_iter()
        .map(|f| frame_sums(&f.pixels.mapv(|p| p as f64), x0, max_offset))
        .collect();
    let mut curve = g2_from_sums(&per_frame, rows, x0)?;
    let pitch = stack.meta.detector.pixel_pitch;
    curve.separations = (0..=max_offset).map(|k| k as f64 * pitch).collect();
    Ok(curve)
}

/// Same estimator over raw intensity maps (no camera), for ensembles that
/// never pass through a FrameStack.
pub fn estimate_g2_intensities(
    intensities: &[Array2<f64>],
    pixel_pitch: f64,
    x0: usize,
    max_offset: usize,
) -> Result<CorrelationCurve, CorrelationError> {
    let frames = intensities.len();
    if frames < 2 {
        return Err(CorrelationError::InsufficientFrames { got: frames, need: 2 });
    }
    let width = intensities[0].ncols();
    if x0 + max_offset >= width {
        return Err(CorrelationError::OffsetOutOfRange { x0, max_offset, width });
    }
    let rows = intensities[0].nrows();
    let per_frame: Vec<FrameSums> = intensities
        .par_iter()
        .map(|i| frame_sums(i, x0, max_offset))
        .collect();
    let mut curve = g2_from_sums(&per_frame, rows, x0)?;
    curve.separations = (0..=max_offset).map(|k| k as f64 * pixel_pitch).collect();
    Ok(curve)
}

/// Verifies the Siegert relation g2 = 1 + |gamma_c|^2 on an ensemble of
/// detector fields: returns the maximum absolute deviation over offsets.
/// Both sides are estimated empirically, gamma_c from field products and g2
/// from intensities, averaged over rows and realizations.
pub fn siegert_check(
    fields: &[Array2<Complex64>],
    x0: usize,
    max_offset: usize,
) -> Result<f64, CorrelationError> {
    if fields.len() < MIN_SIEGERT_FRAMES {
        return Err(CorrelationError::InsufficientFrames {
            got: fields.len(),
            need: MIN_SIEGERT_FRAMES,
        });
    }
    let width = fields[0].ncols();
    if x0 + max_offset >= width {
        return Err(CorrelationError::OffsetOutOfRange { x0, max_offset, width });
    }
    let n = max_offset + 1;

    let (corr, i_ref, i_lane, cross) = fields
        .par_iter()
        .fold(
            || (vec![Complex64::new(0.0, 0.0); n], 0.0f64, vec![0.0f64; n], vec![0.0f64; n]),
            |(mut corr, mut i_ref, mut i_lane, mut cross), field| {
                for row in field.rows() {
                    let e0 = row[x0];
                    let i0 = e0.norm_sqr();
                    i_ref += i0;
                    for k in 0..n {
                        let ek = row[x0 + k];
                        corr[k] += e0.conj() * ek;
                        let ik = ek.norm_sqr();
                        i_lane[k] += ik;
                        cross[k] += i0 * ik;
                    }
                }
                (corr, i_ref, i_lane, cross)
            },
        )
        .reduce(
            || (vec![Complex64::new(0.0, 0.0); n], 0.0f64, vec![0.0f64; n], vec![0.0f64; n]),
            |(mut ca, ra, mut la, mut xa), (cb, rb, lb, xb)| {
                for k in 0..n {
                    ca[k] += cb[k];
                    la[k] += lb[k];
                    xa[k] += xb[k];
                }
                (ca, ra + rb, la, xa)
            },
        );

    if i_ref == 0.0 {
        return Err(CorrelationError::ZeroMeanLane { offset: 0 });
    }
    let mut max_dev: f64 = 0.0;
    let samples = (fields.len() * fields[0].nrows()) as f64;
    for k in 0..n {
        if i_lane[k] == 0.0 {
            return Err(CorrelationError::ZeroMeanLane { offset: k });
        }
        let gamma = corr[k] / (i_ref * i_lane[k]).sqrt();
        let g2 = samples * cross[k] / (i_ref * i_lane[k]);
        max_dev = max_dev.max((g2 - 1.0 - gamma.norm_sqr()).abs());
    }
    Ok(max_dev)
}

fn model_shape(sep: f64, a: f64, d: Option<f64>, ctx: &G2FitContext) -> f64 {
    let g = gamma_airy(sep, a, ctx.wavelength, ctx.distance_z);
    match d {
        None => g * g,
        Some(d) => {
            let c = (std::f64::consts::PI * d * sep / (ctx.wavelength * ctx.distance_z)).cos();
            (c * g).powi(2)
        }
    }
}

/// Weighted linear solve of g2 = C + V * shape for fixed geometry; returns
/// (C, V, chi2).
fn solve_offset_modulation(curve: &CorrelationCurve, shape: &[f64]) -> (f64, f64, f64) {
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((&y, &s), &se) in curve.g2_values.iter().zip(shape).zip(&curve.standard_errors) {
        let w = 1.0 / (se * se).max(1e-300);
        sw += w;
        sx += w * s;
        sy += w * y;
        sxx += w * s * s;
        sxy += w * s * y;
    }
    let det = sw * sxx - sx * sx;
    if det.abs() < 1e-300 {
        return (sy / sw, 0.0, f64::INFINITY);
    }
    let c = (sxx * sy - sx * sxy) / det;
    let v = (sw * sxy - sx * sy) / det;
    let chi2: f64 = curve
        .g2_values
        .iter()
        .zip(shape)
        .zip(&curve.standard_errors)
        .map(|((&y, &s), &se)| ((c + v * s - y) / se.max(1e-150)).powi(2))
        .sum();
    (c, v, chi2)
}

/// Initial aperture radius from the first empirical envelope zero: the
/// separation where the curve first settles onto its large-separation
/// baseline.
fn initial_a_from_envelope(curve: &CorrelationCurve, ctx: &G2FitContext) -> Result<f64, CorrelationError> {
    let n = curve.g2_values.len();
    let tail = &curve.g2_values[n - (n / 10).max(2)..];
    let baseline = tail.iter().sum::<f64>() / tail.len() as f64;
    let peak = curve.g2_values[0];
    let threshold = baseline + 0.05 * (peak - baseline).max(1e-9);
    let zero_idx = curve
        .g2_values
        .iter()
        .position(|&v| v <= threshold)
        .ok_or_else(|| CorrelationError::InsufficientSpan {
            span: *curve.separations.last().unwrap(),
            reason: "no envelope zero inside the measured range".into(),
        })?;
    if zero_idx == 0 {
        return Err(CorrelationError::BadInput("curve has no modulation at zero separation".into()));
    }
    // a still-decaying truncated curve crosses its own tail average near the
    // end; a genuine envelope zero sits well inside the span
    if zero_idx * 10 > n * 9 {
        return Err(CorrelationError::InsufficientSpan {
            span: *curve.separations.last().unwrap(),
            reason: "envelope has not settled onto a baseline within the measured range".into(),
        });
    }
    let dr = curve.separations[zero_idx];
    Ok(BESSEL_J1_FIRST_ZERO * ctx.wavelength * ctx.distance_z / (std::f64::consts::PI * dr))
}

/// Initial source separation from the dominant fringe frequency of the
/// mean-removed curve.
fn initial_d_from_fringes(curve: &CorrelationCurve, ctx: &G2FitContext) -> Result<f64, CorrelationError> {
    let n = curve.g2_values.len();
    let mean = curve.g2_values.iter().sum::<f64>() / n as f64;
    let step = curve.separations[1] - curve.separations[0];
    let mut best = (0usize, 0.0f64);
    // k < 4 is the slowly varying Airy envelope; genuine fringes must
    // complete several cycles over the span
    for k in 4..n / 2 {
        let (mut re, mut im) = (0.0, 0.0);
        for (j, &y) in curve.g2_values.iter().enumerate() {
            let ph = -2.0 * std::f64::consts::PI * (j * k) as f64 / n as f64;
            re += (y - mean) * ph.cos();
            im += (y - mean) * ph.sin();
        }
        let p = re * re + im * im;
        if p > best.1 {
            best = (k, p);
        }
    }
    if best.0 == 0 {
        return Err(CorrelationError::BadInput("no fringe frequency found in curve".into()));
    }
    // g2 oscillates at d / (lambda z) cycles per meter of separation
    let freq = best.0 as f64 / (n as f64 * step);
    Ok(freq * ctx.wavelength * ctx.distance_z)
}

/// Fits the one- or two-source g2 model to an estimated curve by weighted
/// least squares over {a, (d,) C, V}.
pub fn fit_g2(
    curve: &CorrelationCurve,
    model: G2Model,
    ctx: &G2FitContext,
    hints: &G2Hints,
) -> Result<G2FitResult, CorrelationError> {
    let n = curve.g2_values.len();
    if n < 8 || curve.separations.len() != n || curve.standard_errors.len() != n {
        return Err(CorrelationError::BadInput("curve too short or inconsistent".into()));
    }
    if !(ctx.wavelength > 0.0 && ctx.distance_z > 0.0) {
        return Err(CorrelationError::BadInput("wavelength and distance must be positive".into()));
    }
    let span = *curve.separations.last().unwrap();

    let a0 = match (hints.aperture_radius_a, model) {
        (Some(a), _) => a,
        (None, G2Model::OneTLS) => initial_a_from_envelope(curve, ctx)?,
        // fringes hide the envelope zero; seed from the radius whose Airy
        // zero sits at the far end of the span and let the grid search roam
        (None, G2Model::TwoTLS) => {
            BESSEL_J1_FIRST_ZERO * ctx.wavelength * ctx.distance_z / (std::f64::consts::PI * span)
        }
    };
    let d0 = match model {
        G2Model::OneTLS => {
            // the first envelope zero must be inside the measured span
            let first_zero = BESSEL_J1_FIRST_ZERO * ctx.wavelength * ctx.distance_z / (std::f64::consts::PI * a0);
            if span < first_zero {
                return Err(CorrelationError::InsufficientSpan {
                    span,
                    reason: format!("first envelope zero expected at {first_zero:.4e} m"),
                });
            }
            None
        }
        G2Model::TwoTLS => {
            let d = match hints.separation_d {
                Some(d) => d,
                None => initial_d_from_fringes(curve, ctx)?,
            };
            let fringe = ctx.wavelength * ctx.distance_z / d;
            if span < 3.0 * fringe {
                return Err(CorrelationError::InsufficientSpan {
                    span,
                    reason: format!("need at least 3 fringes of period {fringe:.4e} m"),
                });
            }
            Some(d)
        }
    };

    // coarse grid over the nonlinear parameters with (C, V) solved linearly
    let mut best = (a0, d0, f64::INFINITY);
    let a_grid: Vec<f64> = match model {
        G2Model::OneTLS => (0..25).map(|i| a0 * 0.4 * (7.5f64).powf(i as f64 / 24.0)).collect(),
        // wider sweep: the two-source envelope zero may lie beyond the span
        G2Model::TwoTLS => (0..41).map(|i| a0 * 0.05 * (60.0f64).powf(i as f64 / 40.0)).collect(),
    };
    let d_grid: Vec<Option<f64>> = match d0 {
        None => vec![None],
        Some(d) => (0..21).map(|i| Some(d * (0.85 + 0.015 * i as f64))).collect(),
    };
    let mut shape = vec![0.0; n];
    for &a in &a_grid {
        for &d in &d_grid {
            for (k, &sep) in curve.separations.iter().enumerate() {
                shape[k] = model_shape(sep, a, d, ctx);
            }
            let (_, _, chi2) = solve_offset_modulation(curve, &shape);
            if chi2 < best.2 {
                best = (a, d, chi2);
            }
        }
    }
    let (a_init, d_init, _) = best;
    for (k, &sep) in curve.separations.iter().enumerate() {
        shape[k] = model_shape(sep, a_init, d_init, ctx);
    }
    let (c_init, v_init, _) = solve_offset_modulation(curve, &shape);

    let mut p0 = vec![a_init, c_init.max(1e-3), v_init.max(1e-3)];
    if let Some(d) = d_init {
        p0.insert(1, d);
    }
    let two_tls = d_init.is_some();
    let seps = curve.separations.clone();
    let ys = curve.g2_values.clone();
    let ws: Vec<f64> = curve.standard_errors.iter().map(|&s| 1.0 / s.max(1e-150)).collect();
    let ctx_copy = *ctx;
    let report = levenberg_marquardt(
        |p, r| {
            let a = p[0].abs();
            let (d, c, v) = if two_tls {
                (Some(p[1].abs()), p[2], p[3])
            } else {
                (None, p[1], p[2])
            };
            for (i, ((&sep, &y), &w)) in seps.iter().zip(&ys).zip(&ws).enumerate() {
                r[i] = (c + v * model_shape(sep, a, d, &ctx_copy) - y) * w;
            }
        },
        &p0,
        n,
        &FitOptions::default(),
    )?;

    let a = report.params[0].abs();
    let (d, c, v) = if two_tls {
        (Some(report.params[1].abs()), report.params[2], report.params[3])
    } else {
        (None, report.params[1], report.params[2])
    };
    if !(c > 0.0) {
        return Err(CorrelationError::BadInput(format!("fitted offset C = {c} is not positive")));
    }
    let v = v.max(0.0);
    let sigmas = (0..report.params.len()).map(|i| report.sigma(i)).collect();

    Ok(G2FitResult {
        model,
        aperture_radius_a: a,
        separation_d: d,
        offset_c: c,
        modulation_v: v,
        visibility: v / (2.0 * c + v),
        chi2_per_dof: report.chi2_per_dof(),
        param_sigmas: sigmas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    const CTX: G2FitContext = G2FitContext {
        wavelength: 633e-9,
        distance_z: 0.2,
    };

    /// J1 by its power series, independent of libm.
    fn j1_series(x: f64) -> f64 {
        let mut term = x / 2.0;
        let mut sum = term;
        for k in 1..40 {
            term *= -(x * x / 4.0) / (k as f64 * (k + 1) as f64);
            sum += term;
        }
        sum
    }

    #[test]
    fn gamma_airy_unity_at_zero_and_continuous() {
        assert_eq!(gamma_airy(0.0, 1e-4, 633e-9, 0.2), 1.0);
        // series branch joins the Bessel branch smoothly
        let a = 1e-4;
        let chi_to_dr = |chi: f64| chi * CTX.wavelength * CTX.distance_z / (std::f64::consts::PI * a);
        let below = gamma_airy(chi_to_dr(0.99e-6), a, CTX.wavelength, CTX.distance_z);
        let above = gamma_airy(chi_to_dr(1.01e-6), a, CTX.wavelength, CTX.distance_z);
        assert!((below - above).abs() < 1e-12);
    }

    #[test]
    fn gamma_airy_matches_bessel_series() {
        let a = 1e-4;
        let chi = BESSEL_J1_FIRST_ZERO / 2.0;
        let dr = chi * CTX.wavelength * CTX.distance_z / (std::f64::consts::PI * a);
        let expected = 2.0 * j1_series(chi) / chi;
        let got = gamma_airy(dr, a, CTX.wavelength, CTX.distance_z);
        assert!((got - expected).abs() < 1e-10, "{got} vs {expected}");
    }

    #[test]
    fn first_zero_location_by_bracketing() {
        // bracketing bisection root of the J1 series on [3, 4.5]
        let (mut lo, mut hi) = (3.0f64, 4.5f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if j1_series(lo) * j1_series(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let root = 0.5 * (lo + hi);
        assert!((root - BESSEL_J1_FIRST_ZERO).abs() < 1e-12);
        // a = 100 um, lambda = 633 nm, z = 0.2 m puts the zero near 1.544 mm
        let a = 100e-6;
        let dr_zero = root * CTX.wavelength * CTX.distance_z / (std::f64::consts::PI * a);
        assert!((dr_zero - 1.544e-3).abs() < 1e-6, "dr_zero {dr_zero}");
        let g = gamma_airy(dr_zero, a, CTX.wavelength, CTX.distance_z);
        assert!(g.abs() < 1e-12);
    }

    #[test]
    fn g2_model_values() {
        let a = 100e-6;
        // one source, ideal C = V = 1: 2 at zero separation
        assert_eq!(g2_model_1tls(0.0, a, CTX.wavelength, CTX.distance_z, 1.0, 1.0), 2.0);
        // envelope decays to C at large separation
        let far = g2_model_1tls(0.1, a, CTX.wavelength, CTX.distance_z, 1.0, 1.0);
        assert!((far - 1.0).abs() < 1e-4);
        // two sources at zero separation: C + V
        assert_eq!(g2_model_2tls(0.0, a, 1e-3, CTX.wavelength, CTX.distance_z, 1.1, 0.9), 2.0);
        // cosine zero at half the fringe period: exactly C
        let d = 1e-3;
        let half_fringe = CTX.wavelength * CTX.distance_z / (2.0 * d);
        let at_min = g2_model_2tls(half_fringe, a, d, CTX.wavelength, CTX.distance_z, 1.0, 1.0);
        assert!((at_min - 1.0).abs() < 1e-12);
        // fringe period is 126.6 um for d = 1 mm
        assert!((2.0 * half_fringe - 126.6e-6).abs() < 0.1e-6);
        // d -> 0 recovers the one-source model
        for &dr in &[0.0, 1e-4, 5e-4, 2e-3] {
            let one = g2_model_1tls(dr, a, CTX.wavelength, CTX.distance_z, 1.0, 1.0);
            let two = g2_model_2tls(dr, a, 1e-12, CTX.wavelength, CTX.distance_z, 1.0, 1.0);
            assert!((one - two).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_frames_give_unity_g2() {
        let frames: Vec<Array2<f64>> = (0..10).map(|_| Array2::from_elem((4, 32), 3.0)).collect();
        let curve = estimate_g2_intensities(&frames, 30e-6, 2, 16).unwrap();
        for &v in &curve.g2_values {
            assert!((v - 1.0).abs() < 1e-12);
        }
        assert_eq!(curve.separations[1], 30e-6);
        assert_eq!(curve.frames_used, 10);
    }

    #[test]
    fn fully_correlated_exponential_frames_give_two() {
        // frames constant in space, exponential across the ensemble:
        // g2 = <A^2>/<A>^2 = 2 at every offset
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let frames: Vec<Array2<f64>> = (0..4000)
            .map(|_| {
                let amp: f64 = -rng.gen_range(0.0f64..1.0).max(1e-300).ln();
                Array2::from_elem((1, 16), amp)
            })
            .collect();
        let curve = estimate_g2_intensities(&frames, 30e-6, 0, 8).unwrap();
        for (k, &v) in curve.g2_values.iter().enumerate() {
            assert!((v - 2.0).abs() < 5.0 * curve.standard_errors[k], "offset {k}: {v}");
            assert!(curve.standard_errors[k] > 0.0 && curve.standard_errors[k] < 0.2);
        }
    }

    #[test]
    fn estimator_is_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let frames: Vec<Array2<f64>> = (0..50)
            .map(|_| Array2::from_shape_fn((3, 24), |_| rng.gen_range(0.5..2.0)))
            .collect();
        let scaled: Vec<Array2<f64>> = frames.iter().map(|f| f * 7.0).collect();
        let a = estimate_g2_intensities(&frames, 30e-6, 1, 10).unwrap();
        let b = estimate_g2_intensities(&scaled, 30e-6, 1, 10).unwrap();
        for (x, y) in a.g2_values.iter().zip(&b.g2_values) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn estimator_input_validation() {
        let one = vec![Array2::from_elem((2, 8), 1.0)];
        assert!(matches!(
            estimate_g2_intensities(&one, 30e-6, 0, 4),
            Err(CorrelationError::InsufficientFrames { .. })
        ));
        let two = vec![Array2::from_elem((2, 8), 1.0); 2];
        assert!(matches!(
            estimate_g2_intensities(&two, 30e-6, 4, 4),
            Err(CorrelationError::OffsetOutOfRange { .. })
        ));
        let dark = vec![Array2::from_elem((2, 8), 0.0); 4];
        assert!(matches!(
            estimate_g2_intensities(&dark, 30e-6, 0, 4),
            Err(CorrelationError::ZeroMeanLane { .. })
        ));
    }

    #[test]
    fn siegert_deviation_one_for_deterministic_fields() {
        let field = Array2::from_elem((1, 16), Complex64::new(1.0, 0.5));
        let fields = vec![field; MIN_SIEGERT_FRAMES];
        let dev = siegert_check(&fields, 2, 8).unwrap();
        assert!((dev - 1.0).abs() < 1e-12, "dev {dev}");
    }

    #[test]
    fn siegert_holds_for_iid_gaussian_fields() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let normal = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).unwrap();
        let fields: Vec<Array2<Complex64>> = (0..4000)
            .map(|_| {
                Array2::from_shape_fn((1, 24), |_| {
                    Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng))
                })
            })
            .collect();
        let dev = siegert_check(&fields, 4, 12).unwrap();
        assert!(dev < 0.08, "dev {dev}");
    }

    #[test]
    fn siegert_requires_large_ensemble() {
        let fields = vec![Array2::from_elem((1, 8), Complex64::new(1.0, 0.0)); 100];
        assert!(matches!(
            siegert_check(&fields, 0, 4),
            Err(CorrelationError::InsufficientFrames { .. })
        ));
    }

    fn synthetic_curve(model: G2Model, a: f64, d: f64, c: f64, v: f64, seed: u64) -> CorrelationCurve {
        let (n, step) = match model {
            G2Model::OneTLS => (201, 10e-6),
            G2Model::TwoTLS => (251, 2e-6),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let separations: Vec<f64> = (0..n).map(|k| k as f64 * step).collect();
        let g2_values = separations
            .iter()
            .map(|&dr| {
                let m = match model {
                    G2Model::OneTLS => g2_model_1tls(dr, a, CTX.wavelength, CTX.distance_z, c, v),
                    G2Model::TwoTLS => g2_model_2tls(dr, a, d, CTX.wavelength, CTX.distance_z, c, v),
                };
                m + noise.sample(&mut rng)
            })
            .collect();
        CorrelationCurve {
            separations,
            g2_values,
            standard_errors: vec![0.01; n],
            x0_position: 0,
            frames_used: 1000,
        }
    }

    #[test]
    fn fit_recovers_one_source_parameters() {
        let (a, c, v) = (100e-6, 1.02, 0.95);
        let curve = synthetic_curve(G2Model::OneTLS, a, 0.0, c, v, 31);
        let fit = fit_g2(&curve, G2Model::OneTLS, &CTX, &G2Hints::default()).unwrap();
        assert!((fit.aperture_radius_a - a).abs() < 3.0 * fit.param_sigmas[0].max(1e-6), "a {}", fit.aperture_radius_a);
        assert!((fit.offset_c - c).abs() < 3.0 * fit.param_sigmas[1].max(1e-3));
        assert!((fit.modulation_v - v).abs() < 3.0 * fit.param_sigmas[2].max(1e-3));
        assert!((fit.visibility - v / (2.0 * c + v)).abs() < 0.02);
        assert!(fit.chi2_per_dof > 0.5 && fit.chi2_per_dof < 2.0, "chi2/dof {}", fit.chi2_per_dof);
        assert!(fit.separation_d.is_none());
    }

    #[test]
    fn fit_recovers_two_source_parameters() {
        let (a, d, c, v) = (100e-6, 1e-3, 1.0, 1.0);
        let curve = synthetic_curve(G2Model::TwoTLS, a, d, c, v, 32);
        let fit = fit_g2(&curve, G2Model::TwoTLS, &CTX, &G2Hints::default()).unwrap();
        let fitted_d = fit.separation_d.unwrap();
        assert!((fitted_d - d).abs() / d < 0.03, "d {fitted_d}");
        assert!((fit.aperture_radius_a - a).abs() / a < 0.10, "a {}", fit.aperture_radius_a);
        assert!((fit.visibility - 1.0 / 3.0).abs() < 0.02, "vis {}", fit.visibility);
        assert!(fit.chi2_per_dof > 0.5 && fit.chi2_per_dof < 2.0);
    }

    #[test]
    fn fit_rejects_short_span() {
        // one-source curve truncated well before the first envelope zero
        let a = 100e-6;
        let separations: Vec<f64> = (0..40).map(|k| k as f64 * 10e-6).collect();
        let g2_values: Vec<f64> = separations
            .iter()
            .map(|&dr| g2_model_1tls(dr, a, CTX.wavelength, CTX.distance_z, 1.0, 1.0))
            .collect();
        let curve = CorrelationCurve {
            separations,
            g2_values,
            standard_errors: vec![0.01; 40],
            x0_position: 0,
            frames_used: 100,
        };
        assert!(matches!(
            fit_g2(&curve, G2Model::OneTLS, &CTX, &G2Hints::default()),
            Err(CorrelationError::InsufficientSpan { .. })
        ));
    }
}
