//! Small dense Levenberg-Marquardt solver for the handful of low-dimensional
//! weighted least-squares fits in this crate (noisy-exponential histograms,
//! g2 correlation models). Jacobians are taken by forward differences.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("fit diverged after {iterations} iterations (chi2 = {chi2:.6e}, initial guess {initial:?})")]
    Diverged {
        iterations: usize,
        chi2: f64,
        initial: Vec<f64>,
    },
    #[error("bad fit input: {0}")]
    BadInput(String),
}

pub struct FitOptions {
    pub max_iterations: usize,
    /// Relative chi-square decrease below which the fit counts as converged.
    pub ftol: f64,
    pub initial_damping: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            ftol: 1e-10,
            initial_damping: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub params: Vec<f64>,
    /// Covariance matrix (row-major), scaled by chi2/dof.
    pub covariance: Vec<f64>,
    pub chi2: f64,
    pub dof: usize,
    pub iterations: usize,
}

impl FitReport {
    pub fn chi2_per_dof(&self) -> f64 {
        if self.dof > 0 {
            self.chi2 / self.dof as f64
        } else {
            f64::NAN
        }
    }

    /// 1-sigma uncertainty of parameter `i`.
    pub fn sigma(&self, i: usize) -> f64 {
        let n = self.params.len();
        self.covariance[i * n + i].max(0.0).sqrt()
    }
}

/// Minimizes sum of squared residuals over `p`, starting from `p0`.
/// `residuals` writes one (already weighted) residual per data point.
pub fn levenberg_marquardt<F>(residuals: F, p0: &[f64], n_res: usize, opts: &FitOptions) -> Result<FitReport, FitError>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n_par = p0.len();
    if n_res <= n_par {
        return Err(FitError::BadInput(format!(
            "{n_res} residuals cannot constrain {n_par} parameters"
        )));
    }
    let mut p = p0.to_vec();
    let mut r = vec![0.0; n_res];
    residuals(&p, &mut r);
    let mut chi2 = dot(&r, &r);
    if !chi2.is_finite() {
        return Err(FitError::BadInput("residuals not finite at initial guess".into()));
    }

    let mut damping = opts.initial_damping;
    let mut jac = vec![0.0; n_res * n_par];
    let mut r_step = vec![0.0; n_res];
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..opts.max_iterations {
        iterations += 1;
        // forward-difference Jacobian
        for j in 0..n_par {
            let h = 1e-7 * p[j].abs() + 1e-10;
            let mut p_step = p.clone();
            p_step[j] += h;
            residuals(&p_step, &mut r_step);
            for i in 0..n_res {
                jac[i * n_par + j] = (r_step[i] - r[i]) / h;
            }
        }
        // normal equations: (JtJ + damping diag(JtJ)) delta = -Jt r
        let mut jtj = vec![0.0; n_par * n_par];
        let mut jtr = vec![0.0; n_par];
        for i in 0..n_res {
            for a in 0..n_par {
                jtr[a] += jac[i * n_par + a] * r[i];
                for b in 0..n_par {
                    jtj[a * n_par + b] += jac[i * n_par + a] * jac[i * n_par + b];
                }
            }
        }

        let mut improved = false;
        for _ in 0..12 {
            let mut lhs = jtj.clone();
            for a in 0..n_par {
                lhs[a * n_par + a] += damping * jtj[a * n_par + a].max(1e-300);
            }
            let rhs: Vec<f64> = jtr.iter().map(|v| -v).collect();
            let delta = match solve(&lhs, &rhs, n_par) {
                Some(d) => d,
                None => {
                    damping *= 10.0;
                    continue;
                }
            };
            let p_new: Vec<f64> = p.iter().zip(&delta).map(|(a, d)| a + d).collect();
            residuals(&p_new, &mut r_step);
            let chi2_new = dot(&r_step, &r_step);
            if chi2_new.is_finite() && chi2_new < chi2 {
                let rel_drop = (chi2 - chi2_new) / chi2.max(1e-300);
                p = p_new;
                r.copy_from_slice(&r_step);
                chi2 = chi2_new;
                damping = (damping * 0.3).max(1e-12);
                improved = true;
                if rel_drop < opts.ftol {
                    converged = true;
                }
                break;
            }
            damping *= 10.0;
        }
        if !improved {
            // no downhill step at any damping: either converged or stuck
            converged = true;
        }
        if converged {
            break;
        }
    }

    if !converged {
        return Err(FitError::Diverged {
            iterations,
            chi2,
            initial: p0.to_vec(),
        });
    }

    // covariance from the undamped normal matrix
    let mut jtj = vec![0.0; n_par * n_par];
    for j in 0..n_par {
        let h = 1e-7 * p[j].abs() + 1e-10;
        let mut p_step = p.clone();
        p_step[j] += h;
        residuals(&p_step, &mut r_step);
        for i in 0..n_res {
            jac[i * n_par + j] = (r_step[i] - r[i]) / h;
        }
    }
    for i in 0..n_res {
        for a in 0..n_par {
            for b in 0..n_par {
                jtj[a * n_par + b] += jac[i * n_par + a] * jac[i * n_par + b];
            }
        }
    }
    let dof = n_res - n_par;
    let scale = if dof > 0 { chi2 / dof as f64 } else { 1.0 };
    let covariance = invert(&jtj, n_par)
        .map(|inv| inv.iter().map(|v| v * scale).collect())
        .unwrap_or_else(|| vec![f64::NAN; n_par * n_par]);

    Ok(FitReport {
        params: p,
        covariance,
        chi2,
        dof,
        iterations,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gaussian elimination with partial pivoting; None when singular.
fn solve(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            m[i * n + col].abs().partial_cmp(&m[j * n + col].abs()).unwrap()
        })?;
        if m[pivot * n + col].abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                m.swap(col * n + k, pivot * n + k);
            }
            x.swap(col, pivot);
        }
        for row in (col + 1)..n {
            let f = m[row * n + col] / m[col * n + col];
            for k in col..n {
                m[row * n + k] -= f * m[col * n + k];
            }
            x[row] -= f * x[col];
        }
    }
    for col in (0..n).rev() {
        let mut s = x[col];
        for k in (col + 1)..n {
            s -= m[col * n + k] * x[k];
        }
        x[col] = s / m[col * n + col];
    }
    Some(x)
}

fn invert(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut out = vec![0.0; n * n];
    for col in 0..n {
        let mut e = vec![0.0; n];
        e[col] = 1.0;
        let x = solve(a, &e, n)?;
        for row in 0..n {
            out[row * n + col] = x[row];
        }
    }
    Some(out)
}
