use nalgebra::SymmetricEigen;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::dataset::QptDataset;
use super::inversion::{expectations_to_chi, predicted_outputs};
use crate::error::{Error, Result};
use crate::optim::{minimize, NelderMeadOptions};
use crate::spin::{pauli::paulis, ChiMatrix, Mat2, Mat4, C64};

pub const LAMBDA_TP: f64 = 1e4;
pub const DEFAULT_RESTARTS: usize = 8;
const N_PARAMS: usize = 16;
/// Spread of the perturbed restart points around the first start.
const RESTART_SPREAD: f64 = 0.15;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MleOptions {
    pub restarts: usize,
    pub seed: u64,
    pub lambda_tp: f64,
    /// σ of an expectation value when the dataset has no counts.
    pub fallback_sigma: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            restarts: DEFAULT_RESTARTS,
            seed: 0,
            lambda_tp: LAMBDA_TP,
            fallback_sigma: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MleResult {
    /// χ_phys: positive semidefinite and trace preserving.
    pub chi: ChiMatrix,
    /// Weighted cost of `chi`.
    pub cost: f64,
    /// Cost at the positive projection of χ_meas, the first start point.
    pub start_cost: f64,
    pub restarts_converged: usize,
    pub evaluations: usize,
}

/// χ = T†T / Tr(T†T) for lower-triangular T: four real diagonal entries
/// followed by the real and imaginary parts of the six entries below it.
pub fn chi_from_params(x: &[f64]) -> Mat4 {
    let mut t = Mat4::zeros();
    for i in 0..4 {
        t[(i, i)] = C64::new(x[i], 0.0);
    }
    let mut k = 4;
    for i in 1..4 {
        for j in 0..i {
            t[(i, j)] = C64::new(x[k], x[k + 1]);
            k += 2;
        }
    }
    let m = t.adjoint() * t;
    let tr = m.trace().re;
    if tr > 0.0 {
        m / C64::new(tr, 0.0)
    } else {
        m
    }
}

/// Inverse of [`chi_from_params`] for a positive semidefinite χ, using a
/// Cholesky factorization of the index-reversed matrix that tolerates zero
/// pivots.
pub fn params_from_chi(chi: &Mat4) -> [f64; N_PARAMS] {
    // Jχ J = L L†  ⇒  χ = T†T with T = J L† J lower triangular.
    let rev = Mat4::from_fn(|i, j| chi[(3 - i, 3 - j)]);
    let mut l = Mat4::zeros();
    for j in 0..4 {
        let mut d = rev[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if d <= 1e-14 {
            continue;
        }
        let ljj = d.sqrt();
        l[(j, j)] = C64::new(ljj, 0.0);
        for i in j + 1..4 {
            let mut s = rev[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / ljj;
        }
    }
    let ld = l.adjoint();
    let t = Mat4::from_fn(|i, j| ld[(3 - i, 3 - j)]);
    let mut x = [0.0; N_PARAMS];
    for i in 0..4 {
        x[i] = t[(i, i)].re;
    }
    let mut k = 4;
    for i in 1..4 {
        for j in 0..i {
            x[k] = t[(i, j)].re;
            x[k + 1] = t[(i, j)].im;
            k += 2;
        }
    }
    x
}

/// Closest positive semidefinite matrix in Frobenius norm, rescaled to unit
/// trace.
pub fn psd_projection(chi: &ChiMatrix) -> ChiMatrix {
    let eig = SymmetricEigen::new(*chi.matrix());
    let vals = eig.eigenvalues.map(|l| C64::new(l.max(0.0), 0.0));
    let m = eig.eigenvectors * Mat4::from_diagonal(&vals) * eig.eigenvectors.adjoint();
    let tr = m.trace().re;
    let m = if tr > 0.0 { m / C64::new(tr, 0.0) } else { *ChiMatrix::depolarizing().matrix() };
    ChiMatrix::hermitian_part(m)
}

/// E'(ρ) = E(S^{-1/2} ρ S^{-1/2}) with S = Σ χ_mn P_n P_m: the nearest exactly
/// trace-preserving map with the same Kraus span. Keeps positivity.
pub fn enforce_trace_preservation(chi: &ChiMatrix) -> Option<ChiMatrix> {
    let s = chi.tp_operator();
    let s = (s + s.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(s);
    if eig.eigenvalues.iter().any(|l| !(*l > 1e-12)) {
        return None;
    }
    let inv_sqrt = eig.eigenvectors
        * Mat2::from_diagonal(&eig.eigenvalues.map(|l| C64::new(1.0 / l.sqrt(), 0.0)))
        * eig.eigenvectors.adjoint();
    let ce = SymmetricEigen::new(*chi.matrix());
    let p = paulis();
    let kraus: Vec<Mat2> = (0..4)
        .filter(|&i| ce.eigenvalues[i] > 0.0)
        .map(|i| {
            let w = ce.eigenvalues[i].sqrt();
            let mut k = Mat2::zeros();
            for m in 0..4 {
                k += p[m] * ce.eigenvectors[(m, i)] * C64::new(w, 0.0);
            }
            k * inv_sqrt
        })
        .collect();
    Some(ChiMatrix::from_kraus(&kraus))
}

struct Objective {
    meas: [[f64; 3]; 4],
    inv_var: [[f64; 3]; 4],
    lambda_tp: f64,
}

impl Objective {
    fn new(dataset: &QptDataset, opts: &MleOptions) -> Self {
        let sig = dataset.sigmas();
        let mut inv_var = [[0.0; 3]; 4];
        for i in 0..4 {
            for j in 0..3 {
                let s = sig[i][j].unwrap_or(opts.fallback_sigma).max(1e-9);
                inv_var[i][j] = 1.0 / (s * s);
            }
        }
        Self {
            meas: dataset.outputs(),
            inv_var,
            lambda_tp: opts.lambda_tp,
        }
    }

    /// Σ (p − p_meas)²/(2σ_p²) written with expectations (σ_e = 2σ_p, so
    /// the 1/4 factors cancel), plus the trace-preservation penalty.
    fn cost(&self, chi: &ChiMatrix) -> f64 {
        let pred = predicted_outputs(&chi.ptm());
        let mut c = 0.0;
        for i in 0..4 {
            for j in 0..3 {
                let d = pred[i][j] - self.meas[i][j];
                c += 0.5 * d * d * self.inv_var[i][j];
            }
        }
        let defect = chi.tp_operator() - Mat2::identity();
        c + self.lambda_tp * defect.norm_squared()
    }
}

/// Weighted cost of `chi` against `dataset`, as minimized by [`mle_project`].
pub fn mle_cost(chi: &ChiMatrix, dataset: &QptDataset, opts: &MleOptions) -> f64 {
    Objective::new(dataset, opts).cost(chi)
}

/// Maximum-likelihood projection of the linear-inversion estimate onto
/// physical processes.
pub fn mle_project(dataset: &QptDataset, opts: &MleOptions) -> Result<MleResult> {
    let chi_meas = expectations_to_chi(dataset)?;
    let obj = Objective::new(dataset, opts);
    let f = |x: &[f64]| obj.cost(&ChiMatrix::hermitian_part(chi_from_params(x)));

    let start = psd_projection(&chi_meas);
    let x0 = params_from_chi(start.matrix());
    let start_cost = obj.cost(&start);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let noise = Normal::new(0.0, RESTART_SPREAD).expect("positive spread");
    let nm = NelderMeadOptions::default();
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut converged = 0;
    let mut evaluations = 0;
    for r in 0..opts.restarts.max(1) {
        let xs: Vec<f64> = if r == 0 {
            x0.to_vec()
        } else {
            x0.iter().map(|v| v + noise.sample(&mut rng)).collect()
        };
        let res = minimize(f, &xs, &nm);
        evaluations += res.evals;
        if res.converged {
            converged += 1;
        }
        if res.value.is_finite() && best.as_ref().is_none_or(|(_, v)| res.value < *v) {
            best = Some((res.x, res.value));
        }
    }
    let (x, raw_cost) = best.ok_or_else(|| Error::Mle {
        reason: "no restart produced a finite cost".into(),
        best: Box::new(start),
        best_cost: start_cost,
    })?;
    let candidate = ChiMatrix::hermitian_part(chi_from_params(&x));
    if converged == 0 {
        return Err(Error::Mle {
            reason: format!("none of {} restarts converged", opts.restarts.max(1)),
            best: Box::new(candidate),
            best_cost: raw_cost,
        });
    }
    let chi = enforce_trace_preservation(&candidate).ok_or_else(|| Error::Mle {
        reason: "optimum is too far from trace preserving to correct".into(),
        best: Box::new(candidate),
        best_cost: raw_cost,
    })?;
    if !chi.is_physical() {
        return Err(Error::Mle {
            reason: format!(
                "projected process is unphysical (min eigenvalue {:.3e}, TP defect {:.3e})",
                chi.min_eigenvalue(),
                chi.tp_defect()
            ),
            best: Box::new(chi),
            best_cost: raw_cost,
        });
    }
    Ok(MleResult {
        cost: obj.cost(&chi),
        chi,
        start_cost,
        restarts_converged: converged,
        evaluations,
    })
}
