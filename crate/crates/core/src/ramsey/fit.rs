use std::f64::consts::{PI, TAU};
use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::fringe::FringeSeries;
use crate::error::{Error, Result};
use crate::optim::{least_squares, minimize, LmOptions, NelderMeadOptions};

/// Parameter order used by the covariance matrix.
pub const PARAM_NAMES: [&str; 6] = ["amplitude", "tau_star_ns", "t0_ns", "f_ghz", "phi0_rad", "turnon_width_ns"];
pub const MIN_POINTS: usize = 40;
const SIGMA_FLOOR: f64 = 1e-6;

/// Fringe model: 0.5 + (A/2)·T(t)·exp(−max(t−t0,0)/τ)·cos(2πft + φ0)
/// with the smooth turn-on T(t) = (1 + erf((t−t0)/w))/2.
pub fn fringe_model(p: &[f64; 6], t: f64) -> f64 {
    let [a, tau, t0, f, phi0, w] = *p;
    let turn_on = 0.5 * (1.0 + libm::erf((t - t0) / w.abs().max(1e-6)));
    let decay = (-(t - t0).max(0.0) / tau.abs().max(1e-6)).exp();
    0.5 + 0.5 * a * turn_on * decay * (TAU * f * t + phi0).cos()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitGuess {
    pub amplitude: f64,
    pub tau_star: f64,
    pub t0: f64,
    pub f: f64,
    pub phi0: f64,
    pub turnon_width: f64,
}

impl FitGuess {
    fn to_array(self) -> [f64; 6] {
        [self.amplitude, self.tau_star, self.t0, self.f, self.phi0, self.turnon_width]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    LevenbergMarquardt,
    NelderMead,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RamseyFit {
    pub amplitude: f64,
    pub tau_star: f64,
    pub t0: f64,
    pub f_fit: f64,
    pub phi0: f64,
    pub turnon_width: f64,
    /// One-sigma errors in `PARAM_NAMES` order.
    pub errors: [f64; 6],
    pub covariance: Vec<Vec<f64>>,
    pub reduced_chi2: f64,
    /// Unweighted RMS of data minus model.
    pub residual_rms: f64,
    pub converged: bool,
    /// The normal matrix was rank deficient (e.g. no visible oscillation).
    pub degenerate: bool,
    pub method: FitMethod,
}

impl RamseyFit {
    pub fn params(&self) -> [f64; 6] {
        [self.amplitude, self.tau_star, self.t0, self.f_fit, self.phi0, self.turnon_width]
    }

    pub fn model(&self, t: f64) -> f64 {
        fringe_model(&self.params(), t)
    }

    /// Oscillation amplitude of the decaying envelope extrapolated to `t`.
    pub fn amplitude_at(&self, t: f64) -> f64 {
        self.amplitude * (-(t - self.t0) / self.tau_star).exp()
    }

    /// Delta-method error of [`amplitude_at`](Self::amplitude_at).
    pub fn amplitude_at_sigma(&self, t: f64) -> f64 {
        let a = self.amplitude_at(t);
        // d/dA, d/dτ, d/dt0
        let g = [a / self.amplitude, a * (t - self.t0) / (self.tau_star * self.tau_star), a / self.tau_star];
        let idx = [0, 1, 2];
        let mut var = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                var += g[i] * g[j] * self.covariance[idx[i]][idx[j]];
            }
        }
        var.max(0.0).sqrt()
    }

    /// Joint significance, in σ, of a cos/sin component at `f_fit` left in the
    /// normalized residuals. Values above 2 mean the model misses structure
    /// at the fringe frequency.
    pub fn residual_significance(&self, data: &FringeSeries) -> f64 {
        let (mut cc, mut ss, mut cs, mut rc, mut rs) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for p in &data.points {
            let r = (p.p0 - self.model(p.t_es_ns)) / p.sigma_p0;
            let (sn, c) = (TAU * self.f_fit * p.t_es_ns).sin_cos();
            cc += c * c;
            ss += sn * sn;
            cs += c * sn;
            rc += r * c;
            rs += r * sn;
        }
        let det = cc * ss - cs * cs;
        ((ss * rc * rc - 2.0 * cs * rc * rs + cc * rs * rs) / det).max(0.0).sqrt()
    }

    pub fn report(&self) -> FitReport {
        let (fidelity, fidelity_sigma) = fidelity_from_amplitude(self);
        FitReport {
            parameter_names: PARAM_NAMES.iter().map(|s| s.to_string()).collect(),
            amplitude_at_excitation: self.amplitude_at(0.0),
            amplitude_at_excitation_sigma: self.amplitude_at_sigma(0.0),
            fidelity_at_excitation: (1.0 + self.amplitude_at(0.0)) / 2.0,
            fidelity_at_excitation_sigma: self.amplitude_at_sigma(0.0) / 2.0,
            residual_rms: self.residual_rms,
            amplitude: self.amplitude,
            amplitude_sigma: self.errors[0],
            tau_star_ns: self.tau_star,
            tau_star_sigma_ns: self.errors[1],
            t0_ns: self.t0,
            t0_sigma_ns: self.errors[2],
            f_ghz: self.f_fit,
            f_sigma_ghz: self.errors[3],
            phi0_rad: self.phi0,
            phi0_sigma_rad: self.errors[4],
            turnon_width_ns: self.turnon_width,
            turnon_width_sigma_ns: self.errors[5],
            reduced_chi2: self.reduced_chi2,
            fidelity,
            fidelity_sigma,
            converged: self.converged,
            degenerate: self.degenerate,
            method: self.method,
            covariance: self.covariance.clone(),
        }
    }

    /// Data and model side by side, for plotting.
    pub fn write_overlay_csv<W: Write>(&self, data: &FringeSeries, mut w: W) -> Result<()> {
        writeln!(w, "t_es_ns,p0,sigma_p0,model")?;
        for p in &data.points {
            writeln!(w, "{},{},{},{}", p.t_es_ns, p.p0, p.sigma_p0, self.model(p.t_es_ns))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// Order of the covariance rows and columns.
    pub parameter_names: Vec<String>,
    pub amplitude: f64,
    pub amplitude_sigma: f64,
    pub tau_star_ns: f64,
    pub tau_star_sigma_ns: f64,
    pub t0_ns: f64,
    pub t0_sigma_ns: f64,
    pub f_ghz: f64,
    pub f_sigma_ghz: f64,
    pub phi0_rad: f64,
    pub phi0_sigma_rad: f64,
    pub turnon_width_ns: f64,
    pub turnon_width_sigma_ns: f64,
    pub reduced_chi2: f64,
    pub residual_rms: f64,
    /// Envelope amplitude extrapolated to t_es = 0.
    pub amplitude_at_excitation: f64,
    pub amplitude_at_excitation_sigma: f64,
    /// (1 + A)/2 with the amplitude at t_es = 0.
    pub fidelity_at_excitation: f64,
    pub fidelity_at_excitation_sigma: f64,
    /// (1 + A)/2 with the fitted amplitude at t0.
    pub fidelity: f64,
    pub fidelity_sigma: f64,
    pub converged: bool,
    pub degenerate: bool,
    pub method: FitMethod,
    pub covariance: Vec<Vec<f64>>,
}

/// F = (1 + A)/2 for a pure phase-damping process of coherence A.
pub fn fidelity_from_amplitude(fit: &RamseyFit) -> (f64, f64) {
    ((1.0 + fit.amplitude) / 2.0, fit.errors[0] / 2.0)
}

fn wrap_phase(phi: f64) -> f64 {
    let w = phi.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

fn median_spacing(t: &[f64]) -> f64 {
    let mut d: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
    d.sort_by(f64::total_cmp);
    d[d.len() / 2]
}

/// Lomb-style power of `y` at frequency `f`.
fn power(t: &[f64], y: &[f64], f: f64) -> f64 {
    let (mut c, mut s) = (0.0, 0.0);
    for (ti, yi) in t.iter().zip(y) {
        let ph = TAU * f * ti;
        c += yi * ph.cos();
        s += yi * ph.sin();
    }
    c * c + s * s
}

/// Heuristic starting point: periodogram peak for f, envelope onset for t0,
/// log-envelope slope for τ and a quadrature projection for φ0.
pub fn initial_guess(data: &FringeSeries) -> FitGuess {
    let t = data.times();
    let y: Vec<f64> = data.points.iter().map(|p| p.p0 - 0.5).collect();
    let n = t.len();
    let span = (t[n - 1] - t[0]).max(1e-9);
    let nyquist = 0.5 / median_spacing(&t).max(1e-9);

    let df = 0.05 / span;
    let mut best = (0.0, 0.0);
    let mut f = df;
    while f < nyquist {
        let pw = power(&t, &y, f);
        if pw > best.1 {
            best = (f, pw);
        }
        f += df;
    }
    // golden-section refinement around the coarse peak
    let (mut lo, mut hi) = ((best.0 - df).max(1e-6), best.0 + df);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..60 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if power(&t, &y, a) > power(&t, &y, b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    let f = 0.5 * (lo + hi);

    // envelope: RMS over roughly one period, scaled to a sine amplitude
    let half = (0.5 / f).max(median_spacing(&t));
    let env: Vec<f64> = t
        .iter()
        .map(|&tc| {
            let (s, k) = t
                .iter()
                .zip(&y)
                .filter(|(ti, _)| (**ti - tc).abs() <= half)
                .fold((0.0, 0usize), |(s, k), (_, yi)| (s + yi * yi, k + 1));
            2.0 * (2.0 * s / k.max(1) as f64).sqrt()
        })
        .collect();
    let (i_peak, &env_peak) = env
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap_or((0, &0.0));
    let t0 = (0..=i_peak)
        .find(|&i| env[i] >= 0.5 * env_peak)
        .map(|i| t[i])
        .unwrap_or(t[0]);

    let tail: Vec<(f64, f64)> = (i_peak..n)
        .filter(|&i| env[i] > 0.05 * env_peak && env[i] > 0.0)
        .map(|i| (t[i], env[i].ln()))
        .collect();
    let tau = if tail.len() >= 3 {
        let m = tail.len() as f64;
        let (sx, sy) = tail.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
        let (mx, my) = (sx / m, sy / m);
        let (sxy, sxx) = tail
            .iter()
            .fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mx) * (y - my), b + (x - mx) * (x - mx)));
        let slope = sxy / sxx.max(1e-300);
        if slope < 0.0 {
            (-1.0 / slope).clamp(0.3, 200.0)
        } else {
            span
        }
    } else {
        span
    };
    let amplitude = (env_peak * ((t[i_peak] - t0).max(0.0) / tau).exp()).clamp(1e-3, 1.0);

    let (mut c, mut s) = (0.0, 0.0);
    for ((ti, yi), ei) in t.iter().zip(&y).zip(&env) {
        if *ti >= t0 {
            let ph = TAU * f * ti;
            c += yi * ei * ph.cos();
            s += yi * ei * ph.sin();
        }
    }
    FitGuess {
        amplitude,
        tau_star: tau,
        t0,
        f,
        phi0: (-s).atan2(c),
        turnon_width: (2.0 * median_spacing(&t)).max(0.2),
    }
}

/// Weighted least-squares fit of the fringe model.
pub fn fit_fringe(data: &FringeSeries, guess: Option<FitGuess>) -> Result<RamseyFit> {
    data.validate()?;
    if data.len() < MIN_POINTS {
        return Err(Error::Fit(format!(
            "need at least {MIN_POINTS} fringe points, got {}",
            data.len()
        )));
    }
    let t = data.times();
    let y: Vec<f64> = data.points.iter().map(|p| p.p0).collect();
    let w: Vec<f64> = data.points.iter().map(|p| 1.0 / p.sigma_p0.max(SIGMA_FLOOR)).collect();
    let residuals = |p: &[f64]| -> Vec<f64> {
        let arr: [f64; 6] = p.try_into().expect("six parameters");
        t.iter()
            .zip(&y)
            .zip(&w)
            .map(|((ti, yi), wi)| (fringe_model(&arr, *ti) - yi) * wi)
            .collect()
    };
    let chi2 = |p: &[f64]| -> f64 {
        let r = residuals(p);
        if r.iter().all(|v| v.is_finite()) {
            r.iter().map(|v| v * v).sum()
        } else {
            f64::INFINITY
        }
    };
    let g = guess.unwrap_or_else(|| initial_guess(data)).to_array();
    let scales = [0.01, 0.1, 0.01, 1e-3, 0.01, 0.01];

    let lm = least_squares(&residuals, &g, &scales, &LmOptions::default());
    let lm_ok = lm.converged && lm.chi2.is_finite() && lm.params.iter().all(|v| v.is_finite());
    let (mut params, method, converged) = if lm_ok {
        (lm.params.clone(), FitMethod::LevenbergMarquardt, true)
    } else {
        log::warn!("Levenberg-Marquardt did not converge, falling back to Nelder-Mead");
        let start = if lm.chi2.is_finite() && lm.chi2 < chi2(&g) { &lm.params } else { &g[..] };
        let nm = minimize(chi2, start, &NelderMeadOptions::default());
        if !nm.value.is_finite() {
            return Err(Error::Fit("fringe fit diverged".into()));
        }
        (nm.x, FitMethod::NelderMead, nm.converged)
    };
    if !converged {
        return Err(Error::Fit("fringe fit did not converge".into()));
    }

    params[1] = params[1].abs();
    params[5] = params[5].abs();
    if params[0] < 0.0 {
        params[0] = -params[0];
        params[4] += PI;
    }
    params[4] = wrap_phase(params[4]);

    // covariance at the final point (unscaled: the sigmas are taken as known)
    let at_end = least_squares(&residuals, &params, &scales, &LmOptions { max_iter: 0, ..Default::default() });
    let cov: &DMatrix<f64> = &at_end.covariance;
    let singular = at_end.singular;
    let dof = (data.len() - 6) as f64;
    let errors: [f64; 6] = std::array::from_fn(|i| cov[(i, i)].max(0.0).sqrt());
    let covariance = (0..6).map(|i| (0..6).map(|j| cov[(i, j)]).collect()).collect();

    let residual_rms = (t
        .iter()
        .zip(&y)
        .map(|(ti, yi)| {
            let arr: [f64; 6] = params.as_slice().try_into().expect("six parameters");
            (fringe_model(&arr, *ti) - yi).powi(2)
        })
        .sum::<f64>()
        / t.len() as f64)
        .sqrt();
    let span = t[t.len() - 1] - t[0];
    if span < 2.0 * params[1] {
        log::warn!("fringe spans {span:.2} ns, less than two fitted decay constants");
    }
    Ok(RamseyFit {
        amplitude: params[0],
        tau_star: params[1],
        t0: params[2],
        f_fit: params[3],
        phi0: params[4],
        turnon_width: params[5],
        errors,
        covariance,
        reduced_chi2: at_end.chi2 / dof,
        residual_rms,
        converged,
        degenerate: singular || params[0] < 3.0 * errors[0].max(1e-12),
        method,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ramsey::FringePoint;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    const TRUTH: [f64; 6] = [0.89, 6.0, 1.35, 2.14, 0.4, 0.3];

    fn synthetic(truth: &[f64; 6], sigma: f64, seed: u64) -> FringeSeries {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, sigma).unwrap();
        let points = (0..300)
            .map(|i| {
                let t = -3.0 + 0.06 * i as f64;
                FringePoint {
                    t_es_ns: t,
                    p0: fringe_model(truth, t) + noise.sample(&mut rng),
                    sigma_p0: sigma,
                }
            })
            .collect();
        FringeSeries::new(points).unwrap()
    }

    #[test]
    fn round_trip_recovers_parameters() {
        let fit = fit_fringe(&synthetic(&TRUTH, 0.01, 7), None).unwrap();
        assert!(fit.converged && !fit.degenerate);
        for (i, (got, want)) in fit.params().iter().zip(TRUTH).enumerate() {
            let diff = if i == 4 { wrap_phase(got - want) } else { got - want };
            assert!(diff.abs() <= 3.0 * fit.errors[i], "{}: {got} vs {want} ± {}", PARAM_NAMES[i], fit.errors[i]);
        }
        assert!((fit.reduced_chi2 - 1.0).abs() < 0.3);
    }

    #[test]
    fn flat_data_gives_insignificant_amplitude() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let points = (0..200)
            .map(|i| FringePoint {
                t_es_ns: -3.0 + 0.08 * i as f64,
                p0: 0.5 + noise.sample(&mut rng),
                sigma_p0: 0.01,
            })
            .collect();
        match fit_fringe(&FringeSeries::new(points).unwrap(), None) {
            Ok(fit) => assert!(fit.degenerate || fit.amplitude <= 2.0 * fit.errors[0], "{fit:?}"),
            Err(Error::Fit(_)) => {}
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn amplitude_estimator_is_unbiased() {
        let n = 200;
        let mut sum = 0.0;
        let mut sigma = 0.0;
        for seed in 0..n {
            let fit = fit_fringe(&synthetic(&TRUTH, 0.01, 1000 + seed), None).unwrap();
            sum += fit.amplitude;
            sigma += fit.errors[0];
        }
        let (mean, sigma) = (sum / n as f64, sigma / n as f64);
        assert!((mean - TRUTH[0]).abs() <= sigma / 3.0, "mean {mean} sigma {sigma}");
    }

    #[test]
    fn too_few_points_rejected() {
        let s = synthetic(&TRUTH, 0.01, 1);
        let short = FringeSeries::new(s.points[..30].to_vec()).unwrap();
        assert!(matches!(fit_fringe(&short, None), Err(Error::Fit(_))));
    }

    #[test]
    fn amplitude_fidelity_examples() {
        let mut fit = fit_fringe(&synthetic(&TRUTH, 0.01, 2), None).unwrap();
        for (a, f) in [(0.89, 0.945), (1.0, 1.0), (0.0, 0.5)] {
            fit.amplitude = a;
            assert!((fidelity_from_amplitude(&fit).0 - f).abs() < 1e-12);
        }
        assert_eq!(fidelity_from_amplitude(&fit).1, fit.errors[0] / 2.0);
    }

    #[test]
    fn report_serializes_named_fields() {
        let fit = fit_fringe(&synthetic(&TRUTH, 0.01, 4), None).unwrap();
        let json = serde_json::to_value(fit.report()).unwrap();
        for key in ["tau_star_ns", "amplitude_sigma", "reduced_chi2", "covariance", "t0_ns"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }
}
