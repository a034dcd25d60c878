//! Photon statistics: intensity histograms, the exponential (Boltzmann)
//! intensity law, the camera-noise-convolved histogram model, and the
//! model fit that recovers the underlying exponential.

use thiserror::Error;

use crate::fitting::{levenberg_marquardt, FitError, FitOptions};
use crate::sensor::NoiseModel;
use crate::stack::FrameStack;

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("mean intensity must be positive, got {0}")]
    NonpositiveMean(f64),
    #[error("stack contains no frames")]
    EmptyStack,
    #[error("histogram spans {span:.1} gray levels but the fit needs at least {needed:.1} (5x the mean)")]
    InsufficientSpan { span: f64, needed: f64 },
    #[error("noisy-exponential fit diverged: {0}")]
    FitDiverged(#[from] FitError),
}

/// Normalized histogram with explicit bin edges (`edges.len() == counts.len() + 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityHistogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub total_samples: u64,
    /// counts / (total * bin width); integrates to 1.
    pub density: Vec<f64>,
}

impl IntensityHistogram {
    fn from_counts(bin_edges: Vec<f64>, counts: Vec<u64>) -> Self {
        let total: u64 = counts.iter().sum();
        let density = counts
            .iter()
            .zip(bin_edges.windows(2))
            .map(|(&c, w)| c as f64 / (total as f64 * (w[1] - w[0])))
            .collect();
        Self {
            bin_edges,
            counts,
            total_samples: total,
            density,
        }
    }

    /// One bin per integer gray level, bin k covering [k-0.5, k+0.5).
    pub fn from_gray_values<I: IntoIterator<Item = u16>>(values: I, max_gray: u16) -> Self {
        let n_bins = max_gray as usize + 1;
        let mut counts = vec![0u64; n_bins];
        for v in values {
            counts[(v.min(max_gray)) as usize] += 1;
        }
        let bin_edges = (0..=n_bins).map(|k| k as f64 - 0.5).collect();
        Self::from_counts(bin_edges, counts)
    }

    /// Freedman-Diaconis binning for continuous samples.
    pub fn from_continuous(samples: &[f64]) -> Self {
        assert!(!samples.is_empty());
        let mut sorted = samples.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = sorted.len();
        let q = |f: f64| sorted[((n - 1) as f64 * f) as usize];
        let iqr = q(0.75) - q(0.25);
        let lo = sorted[0];
        let hi = sorted[n - 1];
        let width = if iqr > 0.0 {
            2.0 * iqr / (n as f64).cbrt()
        } else {
            (hi - lo).max(1.0) / 50.0
        };
        let n_bins = (((hi - lo) / width).ceil() as usize).clamp(1, 100_000);
        let width = (hi - lo) / n_bins as f64;
        let mut counts = vec![0u64; n_bins];
        for &v in samples {
            let k = (((v - lo) / width) as usize).min(n_bins - 1);
            counts[k] += 1;
        }
        let bin_edges = (0..=n_bins).map(|k| lo + k as f64 * width).collect();
        Self::from_counts(bin_edges, counts)
    }

    pub fn bin_centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Sample mean implied by the binned data.
    pub fn mean(&self) -> f64 {
        let centers = self.bin_centers();
        let s: f64 = centers.iter().zip(&self.counts).map(|(c, &n)| c * n as f64).sum();
        s / self.total_samples as f64
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        let centers = self.bin_centers();
        let s: f64 = centers.iter().zip(&self.counts).map(|(c, &n)| (c - m).powi(2) * n as f64).sum();
        s / self.total_samples as f64
    }

    /// Center of the most populated bin.
    pub fn mode(&self) -> f64 {
        let k = self
            .counts
            .iter()
            .enumerate()
            .max_by_key(|(_, &c)| c)
            .map(|(k, _)| k)
            .unwrap();
        self.bin_centers()[k]
    }
}

/// Exponential intensity law p(I) = (1/mean) exp(-I/mean).
pub fn boltzmann_density(intensity: f64, mean: f64) -> Result<f64, StatsError> {
    if !(mean > 0.0) {
        return Err(StatsError::NonpositiveMean(mean));
    }
    if intensity < 0.0 {
        return Ok(0.0);
    }
    Ok((-intensity / mean).exp() / mean)
}

/// Pooled gray-level histogram of every pixel of every frame, one bin per
/// gray level.
pub fn histogram(stack: &FrameStack) -> Result<IntensityHistogram, StatsError> {
    if stack.frames.is_empty() {
        return Err(StatsError::EmptyStack);
    }
    let max = stack.meta.detector.max_gray();
    Ok(IntensityHistogram::from_gray_values(
        stack.frames.iter().flat_map(|f| f.pixels.iter().copied()),
        max,
    ))
}

/// Density of an exponential (mean `m`) convolved with a Gaussian
/// (sigma, centered at `offset`) -- the model for the measured gray-level
/// histogram of thermal light plus camera read noise.
pub fn noisy_exponential_density(g: f64, m: f64, sigma: f64, offset: f64) -> f64 {
    let t = g - offset;
    if sigma < 1e-12 {
        return if t >= 0.0 { (-t / m).exp() / m } else { 0.0 };
    }
    let u = sigma * sigma / (2.0 * m * m) - t / m;
    let v = (sigma / m - t / sigma) / std::f64::consts::SQRT_2;
    if v > 8.0 {
        // asymptotic erfc to avoid exp(u) overflow for t far below the offset
        let w = u - v * v;
        return 0.5 / m * w.exp() / (v * std::f64::consts::PI.sqrt()) * (1.0 - 0.5 / (v * v));
    }
    0.5 / m * u.exp() * libm::erfc(v)
}

/// CDF matching `noisy_exponential_density`.
pub fn noisy_exponential_cdf(g: f64, m: f64, sigma: f64, offset: f64) -> f64 {
    let t = g - offset;
    if sigma < 1e-12 {
        return if t >= 0.0 { 1.0 - (-t / m).exp() } else { 0.0 };
    }
    let phi = 0.5 * libm::erfc(-t / sigma / std::f64::consts::SQRT_2);
    (phi - m * noisy_exponential_density(g, m, sigma, offset)).clamp(0.0, 1.0)
}

/// Result of the forward-model fit of a noisy-exponential histogram.
#[derive(Debug, Clone)]
pub struct StatsFitResult {
    /// Fitted exponential mean, in the histogram's intensity (gray) units.
    pub mean_intensity: f64,
    pub noise_sigma: f64,
    pub noise_offset: f64,
    pub chi2_per_dof: f64,
    pub ks_distance: f64,
    /// 1-sigma uncertainties of (mean, sigma, offset).
    pub param_sigmas: [f64; 3],
    /// Fitted model density tabulated at the histogram bin centers.
    pub model_density: Vec<(f64, f64)>,
    /// The implied pure exponential ("deconvolved" curve), tabulated at
    /// offset-corrected bin centers.
    pub deconvolved_density: Vec<(f64, f64)>,
    /// Counts excluded from the fit because they sat at the gray-range ends.
    pub clipped_low: u64,
    pub clipped_high: u64,
}

/// Weighted least-squares fit of the exponential-convolved-with-Gaussian
/// model to a measured histogram. The first and last bins are excluded as
/// potentially clipped.
pub fn fit_noisy_exponential(
    h: &IntensityHistogram,
    noise_prior: Option<&NoiseModel>,
) -> Result<StatsFitResult, StatsError> {
    let centers = h.bin_centers();
    let n_bins = centers.len();
    if n_bins < 8 {
        return Err(StatsError::InsufficientSpan {
            span: n_bins as f64,
            needed: 8.0,
        });
    }
    let sample_mean = h.mean();
    let span = h.bin_edges[n_bins] - h.bin_edges[0];
    let sigma0 = noise_prior.map(|n| n.read_noise_sigma.max(0.1)).unwrap_or(1.0);
    let offset0 = noise_prior.map(|n| n.offset).unwrap_or(0.0);
    let m0 = (h.variance() - sigma0 * sigma0).max(sample_mean * sample_mean / 4.0).sqrt();
    let needed = 5.0 * m0;
    if span < needed {
        return Err(StatsError::InsufficientSpan { span, needed });
    }

    // skip the clipped end bins; weight by Poisson counting error
    let fit_range = 1..n_bins - 1;
    let total = h.total_samples as f64;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut ws = Vec::new();
    for k in fit_range {
        let width = h.bin_edges[k + 1] - h.bin_edges[k];
        let sigma_density = (h.counts[k].max(1) as f64).sqrt() / (total * width);
        xs.push(centers[k]);
        ys.push(h.density[k]);
        ws.push(1.0 / sigma_density);
    }

    let p0 = [m0, sigma0, offset0];
    let report = levenberg_marquardt(
        |p, r| {
            let (m, s, x0) = (p[0].abs().max(1e-9), p[1].abs(), p[2]);
            for (i, ((x, y), w)) in xs.iter().zip(&ys).zip(&ws).enumerate() {
                r[i] = (noisy_exponential_density(*x, m, s, x0) - y) * w;
            }
        },
        &p0,
        xs.len(),
        &FitOptions::default(),
    )?;

    let mean_intensity = report.params[0].abs();
    let noise_sigma = report.params[1].abs();
    let noise_offset = report.params[2];
    if !(mean_intensity > 0.0) {
        return Err(StatsError::NonpositiveMean(mean_intensity));
    }

    // KS distance between the empirical and fitted model CDFs over the
    // fitted range
    let mut ks: f64 = 0.0;
    let mut cum = 0u64;
    for k in 0..n_bins {
        cum += h.counts[k];
        let emp = cum as f64 / total;
        let model = noisy_exponential_cdf(h.bin_edges[k + 1], mean_intensity, noise_sigma, noise_offset);
        ks = ks.max((emp - model).abs());
    }

    let model_density = centers
        .iter()
        .map(|&c| (c, noisy_exponential_density(c, mean_intensity, noise_sigma, noise_offset)))
        .collect();
    let deconvolved_density = centers
        .iter()
        .filter(|&&c| c >= noise_offset)
        .map(|&c| {
            let i = c - noise_offset;
            (c, (-i / mean_intensity).exp() / mean_intensity)
        })
        .collect();

    Ok(StatsFitResult {
        mean_intensity,
        noise_sigma,
        noise_offset,
        chi2_per_dof: report.chi2_per_dof(),
        ks_distance: ks,
        param_sigmas: [report.sigma(0), report.sigma(1), report.sigma(2)],
        model_density,
        deconvolved_density,
        clipped_low: h.counts[0],
        clipped_high: h.counts[n_bins - 1],
    })
}

/// Kolmogorov-Smirnov distance between a sample and the exponential with
/// the given mean.
pub fn ks_exponential(samples: &[f64], mean: f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut ks: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = 1.0 - (-x / mean).exp();
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        ks = ks.max((f - lo).abs()).max((f - hi).abs());
    }
    ks
}

/// Normalized intensity variance <dI^2> / <I>^2; 1 for single-polarization
/// thermal light, 1/2 for an unpolarized sum of two speckle fields.
pub fn normalized_variance(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean: f64 = samples.iter().sum::<f64>() / n;
    let var: f64 = samples.iter().map(|&v| (v - mean).powi(2)).sum::<f64>() / n;
    var / (mean * mean)
}
