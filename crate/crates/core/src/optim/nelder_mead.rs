//! Derivative-free simplex minimization with adaptive coefficients and
//! restart-on-stagnation.

#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    pub max_evals: usize,
    /// Converged when the spread of simplex values falls below this.
    pub f_tol: f64,
    /// Also require the simplex diameter to shrink below this.
    pub x_tol: f64,
    /// Initial simplex edge length relative to each coordinate (absolute
    /// when the coordinate is zero).
    pub initial_step: f64,
    /// Restart a fresh simplex at the best point after convergence, until a
    /// restart no longer improves the value by more than `f_tol`.
    pub max_restarts: usize,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_evals: 200_000,
            f_tol: 1e-10,
            x_tol: 1e-9,
            initial_step: 0.1,
            max_restarts: 6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
    pub restarts: usize,
}

/// Minimizes `f` starting from `x0`.
pub fn minimize<F>(f: F, x0: &[f64], opts: &NelderMeadOptions) -> NelderMeadResult
where
    F: Fn(&[f64]) -> f64,
{
    let evals = std::cell::Cell::new(0usize);
    let mut eval = |x: &[f64]| {
        evals.set(evals.get() + 1);
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut best_x = x0.to_vec();
    let mut best_f = eval(x0);
    let mut step = opts.initial_step;
    let mut converged = false;
    let mut restarts = 0;

    loop {
        let budget = opts.max_evals.saturating_sub(evals.get());
        if budget == 0 {
            break;
        }
        let (x, fx, ok) = run_simplex(&mut eval, &best_x, best_f, step, opts, budget);
        let improved = best_f - fx;
        if fx < best_f {
            best_x = x;
            best_f = fx;
        }
        converged = ok;
        if !ok || restarts >= opts.max_restarts || improved <= opts.f_tol {
            break;
        }
        restarts += 1;
        step = (step * 0.5).max(1e-4);
    }

    NelderMeadResult {
        x: best_x,
        value: best_f,
        evals: evals.get(),
        converged,
        restarts,
    }
}

fn run_simplex<E>(
    eval: &mut E,
    x0: &[f64],
    f0: f64,
    step: f64,
    opts: &NelderMeadOptions,
    budget: usize,
) -> (Vec<f64>, f64, bool)
where
    E: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let nf = n as f64;
    // Gao & Han coefficients keep the simplex from collapsing in higher dimensions.
    let alpha = 1.0;
    let gamma = 1.0 + 2.0 / nf;
    let rho = 0.75 - 1.0 / (2.0 * nf);
    let sigma = 1.0 - 1.0 / nf;

    let mut used = 0usize;
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f0));
    for i in 0..n {
        let mut x = x0.to_vec();
        let h = if x[i] != 0.0 { step * x[i].abs().max(0.05) } else { step };
        x[i] += h;
        let fx = eval(&x);
        used += 1;
        simplex.push((x, fx));
    }

    let mut centroid = vec![0.0; n];
    let mut trial = vec![0.0; n];
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[n].1 - simplex[0].1;
        let diameter = simplex[1..]
            .iter()
            .map(|(x, _)| {
                x.iter()
                    .zip(&simplex[0].0)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if spread.abs() <= opts.f_tol && diameter <= opts.x_tol.max(opts.f_tol) {
            let best = simplex.swap_remove(0);
            return (best.0, best.1, true);
        }
        if spread.abs() <= opts.f_tol * 1e-3 {
            // Flat region: values stopped changing even though the simplex is wide.
            let best = simplex.swap_remove(0);
            return (best.0, best.1, true);
        }
        if used >= budget {
            let best = simplex.swap_remove(0);
            return (best.0, best.1, false);
        }

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / nf;
            }
        }
        let worst = simplex[n].0.clone();
        let f_worst = simplex[n].1;
        let f_second = simplex[n - 1].1;
        let f_best = simplex[0].1;

        let point = |coef: f64, out: &mut Vec<f64>| {
            for i in 0..n {
                out[i] = centroid[i] + coef * (worst[i] - centroid[i]);
            }
        };

        point(-alpha, &mut trial);
        let f_r = eval(&trial);
        used += 1;
        if f_r < f_best {
            let reflected = trial.clone();
            point(-alpha * gamma, &mut trial);
            let f_e = eval(&trial);
            used += 1;
            simplex[n] = if f_e < f_r {
                (trial.clone(), f_e)
            } else {
                (reflected, f_r)
            };
            continue;
        }
        if f_r < f_second {
            simplex[n] = (trial.clone(), f_r);
            continue;
        }
        let (coef, bound) = if f_r < f_worst {
            (-alpha * rho, f_r)
        } else {
            (rho, f_worst)
        };
        point(coef, &mut trial);
        let f_c = eval(&trial);
        used += 1;
        if f_c < bound {
            simplex[n] = (trial.clone(), f_c);
            continue;
        }
        let best = simplex[0].0.clone();
        for (x, fx) in simplex.iter_mut().skip(1) {
            for i in 0..n {
                x[i] = best[i] + sigma * (x[i] - best[i]);
            }
            *fx = eval(x);
            used += 1;
        }
    }
}
