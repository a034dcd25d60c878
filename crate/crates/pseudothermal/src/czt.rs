//! Chirp-z (Bluestein) evaluation of the DTFT of a finite sequence at an
//! arbitrary uniform frequency comb. This is the band-limited interpolation
//! backend of the far-field propagator: it evaluates exactly the same sums a
//! zero-padded FFT would, but at any output pitch and count.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Evaluates X[k] = sum_n x[n] exp(-i theta (k + k0)(n + n0)) for
/// k = 0..m-1, n = 0..n_in-1, with real-valued index offsets k0, n0.
pub struct Czt1d {
    n_in: usize,
    m_out: usize,
    fft_len: usize,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
    pre_chirp: Vec<Complex64>,
    post_chirp: Vec<Complex64>,
    kernel_fft: Vec<Complex64>,
}

impl Czt1d {
    pub fn new(n_in: usize, m_out: usize, theta: f64, n0: f64, k0: f64) -> Self {
        assert!(n_in > 0 && m_out > 0);
        let fft_len = (n_in + m_out - 1).next_power_of_two();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(fft_len);
        let ifft = planner.plan_fft_inverse(fft_len);

        let half = 0.5 * theta;
        let pre_chirp: Vec<Complex64> = (0..n_in)
            .map(|n| {
                let t = n as f64 + n0;
                Complex64::from_polar(1.0, -half * t * t)
            })
            .collect();
        let post_chirp: Vec<Complex64> = (0..m_out)
            .map(|k| {
                let t = k as f64 + k0;
                Complex64::from_polar(1.0, -half * t * t)
            })
            .collect();

        // linear-convolution kernel b[j] = exp(+i theta/2 (j + d)^2) for
        // lags j = k - n in -(n_in-1)..=(m_out-1), d = k0 - n0
        let d = k0 - n0;
        let mut kernel = vec![Complex64::new(0.0, 0.0); fft_len];
        for j in -(n_in as i64 - 1)..=(m_out as i64 - 1) {
            let t = j as f64 + d;
            let v = Complex64::from_polar(1.0, half * t * t);
            let idx = j.rem_euclid(fft_len as i64) as usize;
            kernel[idx] = v;
        }
        fft.process(&mut kernel);

        Self {
            n_in,
            m_out,
            fft_len,
            fft,
            ifft,
            pre_chirp,
            post_chirp,
            kernel_fft: kernel,
        }
    }

    pub fn process(&self, input: &[Complex64], output: &mut [Complex64]) {
        assert_eq!(input.len(), self.n_in);
        assert_eq!(output.len(), self.m_out);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.fft_len];
        for (b, (x, c)) in buf.iter_mut().zip(input.iter().zip(&self.pre_chirp)) {
            *b = x * c;
        }
        self.fft.process(&mut buf);
        for (b, k) in buf.iter_mut().zip(&self.kernel_fft) {
            *b *= k;
        }
        self.ifft.process(&mut buf);
        let scale = 1.0 / self.fft_len as f64;
        for (out, (b, c)) in output.iter_mut().zip(buf.iter().zip(&self.post_chirp)) {
            *out = b * c * scale;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct O(N M) evaluation of the same sums.
    fn direct(input: &[Complex64], m: usize, theta: f64, n0: f64, k0: f64) -> Vec<Complex64> {
        (0..m)
            .map(|k| {
                input
                    .iter()
                    .enumerate()
                    .map(|(n, x)| {
                        x * Complex64::from_polar(1.0, -theta * (k as f64 + k0) * (n as f64 + n0))
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn matches_direct_evaluation() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for &(n, m) in &[(7usize, 13usize), (32, 5), (17, 17), (1, 4)] {
            let input: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let theta = rng.gen_range(0.01..0.5);
            let n0 = -((n as f64 - 1.0) / 2.0);
            let k0 = -((m as f64 - 1.0) / 2.0);
            let czt = Czt1d::new(n, m, theta, n0, k0);
            let mut out = vec![Complex64::new(0.0, 0.0); m];
            czt.process(&input, &mut out);
            let want = direct(&input, m, theta, n0, k0);
            for (a, b) in out.iter().zip(&want) {
                assert!((a - b).norm() < 1e-9 * (1.0 + b.norm()), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn reduces_to_dft_for_matching_grid() {
        // theta = 2 pi / N with zero offsets is the plain DFT
        let n = 8;
        let input: Vec<Complex64> = (0..n).map(|i| Complex64::new(i as f64, 0.0)).collect();
        let czt = Czt1d::new(n, n, std::f64::consts::TAU / n as f64, 0.0, 0.0);
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        czt.process(&input, &mut out);

        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(n);
        let mut buf = input.clone();
        fft.process(&mut buf);
        for (a, b) in out.iter().zip(&buf) {
            assert!((a - b).norm() < 1e-10);
        }
    }
}
