//! Levenberg–Marquardt least squares with a forward-difference Jacobian.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct LmOptions {
    pub max_iter: usize,
    /// Converged when every parameter moves by less than this, relative.
    pub step_tol: f64,
    pub initial_lambda: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            step_tol: 1e-8,
            initial_lambda: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmResult {
    pub params: Vec<f64>,
    /// Sum of squared residuals at `params`.
    pub chi2: f64,
    /// (JᵀJ)⁺ at the solution.
    pub covariance: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// JᵀJ was numerically rank deficient.
    pub singular: bool,
}

/// Minimizes Σ r_i(p)² where `residuals` returns already-weighted residuals.
/// `scales` sets the typical magnitude of each parameter for differencing.
pub fn least_squares<F>(residuals: F, p0: &[f64], scales: &[f64], opts: &LmOptions) -> LmResult
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = p0.len();
    let mut p = p0.to_vec();
    let mut r = DVector::from_vec(residuals(&p));
    let mut chi2 = r.norm_squared();
    let mut lambda = opts.initial_lambda;
    let mut converged = false;
    let mut iterations = 0;

    let mut jac = jacobian(&residuals, &p, &r, scales);
    while iterations < opts.max_iter {
        iterations += 1;
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &r;
        let mut accepted = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
            }
            let Some(delta) = a.clone().cholesky().map(|ch| ch.solve(&(-&jtr))) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
            let r_trial = DVector::from_vec(residuals(&trial));
            let chi2_trial = r_trial.norm_squared();
            if chi2_trial.is_finite() && chi2_trial <= chi2 {
                let small = delta
                    .iter()
                    .zip(&p)
                    .zip(scales)
                    .all(|((d, v), s)| d.abs() <= opts.step_tol * v.abs().max(*s));
                p = trial;
                r = r_trial;
                chi2 = chi2_trial;
                lambda = (lambda * 0.3).max(1e-12);
                accepted = true;
                if small {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // No downhill step at any damping: already at a minimum.
            converged = true;
        }
        if converged {
            break;
        }
        jac = jacobian(&residuals, &p, &r, scales);
    }

    let jac = jacobian(&residuals, &p, &r, scales);
    let (covariance, singular) = pseudo_inverse(&(jac.transpose() * &jac));
    LmResult {
        params: p,
        chi2,
        covariance,
        iterations,
        converged,
        singular,
    }
}

fn jacobian<F>(residuals: &F, p: &[f64], r: &DVector<f64>, scales: &[f64]) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let m = r.len();
    let n = p.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut q = p.to_vec();
    for j in 0..n {
        let h = 1e-7 * p[j].abs().max(scales[j]);
        q[j] = p[j] + h;
        let rp = residuals(&q);
        q[j] = p[j] - h;
        let rm = residuals(&q);
        q[j] = p[j];
        for i in 0..m {
            jac[(i, j)] = (rp[i] - rm[i]) / (2.0 * h);
        }
    }
    jac
}

/// Symmetric pseudo-inverse; flags a condition number above 1e12.
pub fn pseudo_inverse(a: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let eig = a.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let cutoff = max * 1e-12;
    let mut singular = max <= 0.0;
    let inv_vals = eig.eigenvalues.map(|l| {
        if l > cutoff && l > 0.0 {
            1.0 / l
        } else {
            singular = true;
            0.0
        }
    });
    let inv = &eig.eigenvectors * DMatrix::from_diagonal(&inv_vals) * eig.eigenvectors.transpose();
    (inv, singular)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_fit() {
        let t: Vec<f64> = (0..50).map(|i| i as f64 * 0.2).collect();
        let y: Vec<f64> = t.iter().map(|t| 2.5 * (-t / 3.0).exp() + 0.1).collect();
        let res = |p: &[f64]| -> Vec<f64> {
            t.iter().zip(&y).map(|(t, y)| p[0] * (-t / p[1]).exp() + p[2] - y).collect()
        };
        let fit = least_squares(res, &[1.0, 1.0, 0.0], &[1.0, 1.0, 0.1], &LmOptions::default());
        assert!(fit.converged && !fit.singular);
        assert!((fit.params[0] - 2.5).abs() < 1e-6);
        assert!((fit.params[1] - 3.0).abs() < 1e-6);
        assert!((fit.params[2] - 0.1).abs() < 1e-6);
    }

    #[test]
    fn flags_redundant_parameters() {
        let res = |p: &[f64]| -> Vec<f64> { (0..10).map(|i| p[0] + p[1] - i as f64).collect() };
        let fit = least_squares(res, &[0.0, 0.0], &[1.0, 1.0], &LmOptions::default());
        assert!(fit.singular);
        assert!((fit.params[0] + fit.params[1] - 4.5).abs() < 1e-6);
    }
}
