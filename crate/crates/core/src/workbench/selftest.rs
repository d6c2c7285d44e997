//! Runtime invariant suites for every module.
//!
//! Checks are tolerance based, so a different seed draws different random
//! inputs but should give the same pass/fail pattern.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::commands::{cmd_qpt, cmd_ramsey, CURVE_JSON, FIT_JSON, FRINGE_CSV};
use super::config::{Grid, RunConfig};
use crate::dynamics::{
    evolve, CountModel, EvolveOptions, PhysicsModel, PulseConfig, PulseEvent, PulseLibrary, RotationAxis, Timeline,
    CONVERGENCE_TOL, DEFAULT_DT_NS,
};
use crate::error::{Error, Result};
use crate::qpt::{
    expectations_to_chi, mle_project, simulate_dataset, simulate_p0, synthetic_dataset, ChiReport, FidelityCurve,
    MleOptions, QptDataset, SimulationOptions,
};
use crate::ramsey::{
    fidelity_from_amplitude, fit_fringe, fringe_model, simulate_fringe, FringeOptions, FringePoint, FringeSeries,
};
use crate::spin::pauli::{max_abs_diff, rotation};
use crate::spin::random::{random_bloch, random_channel, random_hermitian_chi};
use crate::spin::{
    apply_channel, chi_ideal, density_from_bloch, optimize_phi, process_fidelity, ChiMatrix, DensityMatrix, C64,
};

/// Tomography delays used by the simulation-backed checks.
pub const SELFTEST_QPT_GRID: [f64; 4] = [0.6, 1.6, 2.6, 3.6];

#[derive(Debug, Clone)]
pub struct SelftestOptions {
    pub seed: u64,
    pub dt_ns: f64,
}

impl Default for SelftestOptions {
    fn default() -> Self {
        Self {
            seed: 1,
            dt_ns: DEFAULT_DT_NS,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub module: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct SelftestReport {
    pub checks: Vec<CheckResult>,
}

impl SelftestReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn pattern(&self) -> Vec<(&'static str, bool)> {
        self.checks.iter().map(|c| (c.name, c.passed)).collect()
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<15} {:<28} {:<6} {:>8}  detail", "module", "check", "result", "time_s");
        for c in &self.checks {
            let _ = writeln!(
                s,
                "{:<15} {:<28} {:<6} {:>8.2}  {}",
                c.module,
                c.name,
                if c.passed { "PASS" } else { "FAIL" },
                c.seconds,
                c.detail
            );
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        let _ = writeln!(s, "{} checks, {} failed", self.checks.len(), failed);
        s
    }
}

type Outcome = std::result::Result<String, String>;
type CheckFn = fn(&Ctx) -> Outcome;

/// Every check: (module, name, function).
pub const CHECKS: [(&str, &str, CheckFn); 19] = [
    ("spin-core", "channel_linearity", channel_linearity),
    ("spin-core", "chi_ideal_rotation", chi_ideal_rotation),
    ("spin-core", "optimize_phi_vs_grid", optimize_phi_vs_grid),
    ("spin-core", "z_conjugation_invariance", z_conjugation_invariance),
    ("pulse-dynamics", "dt_halving_convergence", dt_halving_convergence),
    ("pulse-dynamics", "detuning_inertness", detuning_inertness),
    ("pulse-dynamics", "free_precession_phase", free_precession_phase),
    ("pulse-dynamics", "transverse_decay", transverse_decay),
    ("pulse-dynamics", "trace_hermiticity", trace_hermiticity),
    ("ramsey-analysis", "amplitude_unbiased", amplitude_unbiased),
    ("ramsey-analysis", "residual_structure", residual_structure),
    ("ramsey-analysis", "fidelity_monotone_in_eta", fidelity_monotone_in_eta),
    ("qpt-engine", "inversion_exactness", inversion_exactness),
    ("qpt-engine", "mle_physicality_fuzz", mle_physicality_fuzz),
    ("qpt-engine", "mle_consistency", mle_consistency),
    ("qpt-engine", "phase_tracks_precession", phase_tracks_precession),
    ("qpt-engine", "fidelity_monotone_in_t_es", fidelity_monotone_in_t_es),
    ("cli-workbench", "deterministic_outputs", deterministic_outputs),
    ("cli-workbench", "outputs_validate", outputs_validate),
];

/// Shared state: the calibrated pulses and lazily computed simulations that
/// several checks look at.
pub struct Ctx {
    pub opts: SelftestOptions,
    model: PhysicsModel,
    pulses: std::result::Result<PulseLibrary, String>,
    qpt_sim: OnceLock<std::result::Result<Vec<(f64, f64, f64)>, String>>,
    outputs: OnceLock<std::result::Result<Vec<PathBuf>, String>>,
    scratch: PathBuf,
}

impl Ctx {
    pub fn new(opts: SelftestOptions) -> Self {
        let model = PhysicsModel::default();
        let pulses = PulseLibrary::calibrate(&model, &PulseConfig::default(), opts.dt_ns).map_err(|e| e.to_string());
        Self {
            opts,
            model,
            pulses,
            qpt_sim: OnceLock::new(),
            outputs: OnceLock::new(),
            scratch: scratch_root(),
        }
    }

    fn rng(&self, salt: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.opts.seed);
        rng.set_stream(salt);
        rng
    }

    fn pulses(&self) -> std::result::Result<&PulseLibrary, String> {
        self.pulses.as_ref().map_err(|e| format!("pulse calibration: {e}"))
    }

    /// (t_es, φ*, F) of noiseless simulated tomography on [`SELFTEST_QPT_GRID`].
    fn qpt_simulation(&self) -> std::result::Result<&[(f64, f64, f64)], String> {
        self.qpt_sim
            .get_or_init(|| {
                let pulses = self.pulses()?;
                let sim = SimulationOptions {
                    dt_ns: self.opts.dt_ns,
                    ..Default::default()
                };
                SELFTEST_QPT_GRID
                    .iter()
                    .map(|&t| {
                        let ds = simulate_dataset::<ChaCha8Rng>(t, &self.model, pulses, &sim, None)?;
                        let best = optimize_phi(&mle_project(&ds, &MleOptions::default())?.chi);
                        Ok((t, best.phi_deg(), best.fidelity))
                    })
                    .collect::<Result<Vec<_>>>()
                    .map_err(|e: Error| e.to_string())
            })
            .as_ref()
            .map(|v| v.as_slice())
            .map_err(|e| e.clone())
    }

    /// Files from one run of each command, written under a scratch directory.
    fn outputs(&self) -> std::result::Result<&[PathBuf], String> {
        self.outputs
            .get_or_init(|| {
                run_small(&self.opts, &self.scratch.join("a")).map_err(|e| e.to_string())
            })
            .as_ref()
            .map(|v| v.as_slice())
            .map_err(|e| e.clone())
    }
}

fn scratch_root() -> PathBuf {
    static RUNS: AtomicUsize = AtomicUsize::new(0);
    let run = RUNS.fetch_add(1, Ordering::Relaxed);
    std::env::temp_dir().join(format!("nvqpt-selftest-{}-{run}", std::process::id()))
}

fn small_config(opts: &SelftestOptions, dir: &std::path::Path) -> RunConfig {
    RunConfig {
        ramsey_grid: Grid::Range {
            start_ns: -3.0,
            stop_ns: 12.0,
            step_ns: 0.1,
        },
        qpt_grid: Grid::List(vec![1.6, 2.6]),
        seed: opts.seed,
        dt_ns: opts.dt_ns,
        out_dir: dir.to_path_buf(),
        ..Default::default()
    }
}

fn run_small(opts: &SelftestOptions, dir: &std::path::Path) -> Result<Vec<PathBuf>> {
    let cfg = small_config(opts, dir);
    let mut files = cmd_ramsey(&cfg)?.files;
    files.extend(cmd_qpt(&cfg)?.files);
    Ok(files)
}

/// Runs every check in [`CHECKS`].
pub fn run_selftest(opts: &SelftestOptions) -> SelftestReport {
    run_selected(opts, |_| true)
}

/// Runs the checks whose name passes `filter`.
pub fn run_selected(opts: &SelftestOptions, filter: impl Fn(&str) -> bool) -> SelftestReport {
    let ctx = Ctx::new(opts.clone());
    let checks = CHECKS
        .iter()
        .filter(|(_, name, _)| filter(name))
        .map(|&(module, name, f)| {
            let start = Instant::now();
            let outcome = f(&ctx);
            let seconds = start.elapsed().as_secs_f64();
            log::info!("selftest {name}: {outcome:?}");
            let (passed, detail) = match outcome {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            CheckResult {
                module,
                name,
                passed,
                detail,
                seconds,
            }
        })
        .collect();
    let _ = std::fs::remove_dir_all(&ctx.scratch);
    SelftestReport { checks }
}

fn within(value: f64, limit: f64, what: &str) -> Outcome {
    let msg = format!("{what} {value:.3e} (limit {limit:.1e})");
    if value <= limit {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn wrap_deg(d: f64) -> f64 {
    (d + 180.0).rem_euclid(360.0) - 180.0
}

fn err_string(e: Error) -> String {
    e.to_string()
}

// spin-core

fn channel_linearity(ctx: &Ctx) -> Outcome {
    let mut rng = ctx.rng(1);
    let mut worst: f64 = 0.0;
    for i in 0..200 {
        let (chi, _) = random_channel(&mut rng, 1 + i % 4);
        let r1 = density_from_bloch(random_bloch(&mut rng)).map_err(err_string)?;
        let r2 = density_from_bloch(random_bloch(&mut rng)).map_err(err_string)?;
        let a: f64 = rng.random_range(0.0..=1.0);
        let (wa, wb) = (C64::new(a, 0.0), C64::new(1.0 - a, 0.0));
        let mix = DensityMatrix::new(r1.matrix() * wa + r2.matrix() * wb).map_err(err_string)?;
        let lhs = apply_channel(&chi, &mix);
        let rhs = apply_channel(&chi, &r1).matrix() * wa + apply_channel(&chi, &r2).matrix() * wb;
        worst = worst.max(max_abs_diff(lhs.matrix(), &rhs));
    }
    within(worst, 1e-12, "max deviation")
}

fn chi_ideal_rotation(ctx: &Ctx) -> Outcome {
    let mut rng = ctx.rng(2);
    let mut worst: f64 = 0.0;
    for k in 0..36 {
        let phi = (10.0 * k as f64).to_radians();
        let chi = chi_ideal(phi);
        let (s, c) = phi.sin_cos();
        for _ in 0..4 {
            let b = random_bloch(&mut rng);
            let out = apply_channel(&chi, &density_from_bloch(b).map_err(err_string)?).bloch();
            let expect = [c * b.x - s * b.y, s * b.x + c * b.y, b.z];
            let got = out.as_array();
            for i in 0..3 {
                worst = worst.max((got[i] - expect[i]).abs());
            }
        }
    }
    within(worst, 1e-10, "max Bloch deviation")
}

fn optimize_phi_vs_grid(ctx: &Ctx) -> Outcome {
    let mut rng = ctx.rng(3);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let chi = random_hermitian_chi(&mut rng);
        let opt = optimize_phi(&chi);
        let (best_k, _) = (0..36_000)
            .map(|k| (k, process_fidelity(&chi, &chi_ideal((k as f64 * 0.01).to_radians()))))
            .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        worst = worst.max(wrap_deg(best_k as f64 * 0.01 - opt.phi_deg()).abs());
    }
    within(worst, 0.02, "max angle gap (deg)")
}

fn z_conjugation_invariance(ctx: &Ctx) -> Outcome {
    let mut rng = ctx.rng(4);
    let mut worst: f64 = 0.0;
    for t in 0..50 {
        let (a, ka) = random_channel(&mut rng, 1 + t % 4);
        let (b, kb) = random_channel(&mut rng, 1 + (t + 1) % 4);
        let v = rotation([0.0, 0.0, 1.0], rng.random_range(-3.2..3.2));
        let conj = |ks: &[crate::spin::Mat2]| -> ChiMatrix {
            let moved: Vec<_> = ks.iter().map(|k| v * k * v.adjoint()).collect();
            ChiMatrix::from_kraus(&moved)
        };
        worst = worst.max((process_fidelity(&a, &b) - process_fidelity(&conj(&ka), &conj(&kb))).abs());
    }
    within(worst, 1e-10, "max F change")
}

// pulse-dynamics

fn dt_halving_convergence(ctx: &Ctx) -> Outcome {
    let pulses = ctx.pulses()?;
    let dt = ctx.opts.dt_ns;
    let grid = [-3.0, 0.6, 1.35, 2.0, 3.6, 10.0];
    let fringe = |dt_ns: f64| -> Result<Vec<f64>> {
        let opts = FringeOptions {
            dt_ns,
            ..Default::default()
        };
        Ok(simulate_fringe(&grid, &ctx.model, pulses, &opts)?.points.iter().map(|p| p.p0).collect())
    };
    let qpt = |dt_ns: f64| -> Result<Vec<f64>> {
        let sim = SimulationOptions {
            dt_ns,
            ..Default::default()
        };
        let mut out = Vec::new();
        for t in [0.6, 3.6] {
            out.extend(simulate_p0(t, &ctx.model, pulses, &sim)?.into_iter().map(|c| c.2));
        }
        Ok(out)
    };
    let coarse: Vec<f64> = fringe(dt).and_then(|a| Ok([a, qpt(dt)?].concat())).map_err(err_string)?;
    let fine: Vec<f64> = fringe(dt / 2.0)
        .and_then(|a| Ok([a, qpt(dt / 2.0)?].concat()))
        .map_err(err_string)?;
    let delta = coarse.iter().zip(&fine).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    within(delta, CONVERGENCE_TOL, &format!("max |dp0| at dt = {} ps:", dt * 1e3))
}

fn detuning_inertness(ctx: &Ctx) -> Outcome {
    let pulses = ctx.pulses()?;
    let tl = Timeline::new(vec![pulses.es_half_pi.at(0.0, RotationAxis::Y), PulseEvent::excitation(2.0)])
        .map_err(err_string)?;
    let out = evolve(&DensityMatrix::ground(), &tl, &ctx.model, &EvolveOptions::with_dt(ctx.opts.dt_ns))
        .map_err(err_string)?;
    within((1.0 - out.p0).abs(), 0.03, "|dp0|")
}

fn free_evolution(ctx: &Ctx, t: f64) -> std::result::Result<crate::spin::BlochVector, String> {
    let start = density_from_bloch(crate::spin::BlochVector::PLUS_X).map_err(err_string)?;
    let tl = Timeline::new(vec![PulseEvent::excitation(0.0)])
        .map_err(err_string)?
        .with_span(0.0, t);
    let out = evolve(&start, &tl, &ctx.model, &EvolveOptions::with_dt(ctx.opts.dt_ns)).map_err(err_string)?;
    Ok(out.rho_final.bloch())
}

fn free_precession_phase(ctx: &Ctx) -> Outcome {
    let mut rng = ctx.rng(6);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let t: f64 = rng.random_range(0.1..8.0);
        let b = free_evolution(ctx, t)?;
        let expect = 360.0 * ctx.model.f_es * t;
        worst = worst.max(wrap_deg(b.azimuth().to_degrees() - expect).abs());
    }
    within(worst, 0.1, "max phase error (deg)")
}

fn transverse_decay(ctx: &Ctx) -> Outcome {
    let mut rng = ctx.rng(7);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let t: f64 = rng.random_range(0.1..12.0);
        let b = free_evolution(ctx, t)?;
        let expect = (-t / ctx.model.tau_star()).exp();
        worst = worst.max((b.transverse() / expect - 1.0).abs());
    }
    within(worst, 1e-4, "max relative error")
}

fn trace_hermiticity(ctx: &Ctx) -> Outcome {
    let pulses = ctx.pulses()?;
    let mut rng = ctx.rng(8);
    let tl = Timeline::new(vec![
        pulses.gs_half_pi.at(-20.0, RotationAxis::X),
        PulseEvent::excitation(0.0),
        pulses.es_half_pi.at(3.0, RotationAxis::Y),
    ])
    .map_err(err_string)?
    .with_span(-20.0, 20.0);
    let mut worst: f64 = 0.0;
    for _ in 0..3 {
        let rho = density_from_bloch(random_bloch(&mut rng)).map_err(err_string)?;
        let prop = crate::dynamics::Propagator::new(&ctx.model, &tl, ctx.opts.dt_ns).map_err(err_string)?;
        let mut state = crate::dynamics::SpinState::new(&rho, tl.t_start);
        prop.finish(&mut state, tl.t_end, None);
        let m = state.rho;
        let tr = m[(0, 0)] + m[(1, 1)];
        worst = worst
            .max((tr.re - 1.0).abs())
            .max(tr.im.abs())
            .max((m[(0, 1)] - m[(1, 0)].conj()).norm())
            .max(m[(0, 0)].im.abs())
            .max(m[(1, 1)].im.abs());
    }
    within(worst, 1e-8, "max trace/Hermiticity defect")
}

// ramsey-analysis

fn amplitude_unbiased(ctx: &Ctx) -> Outcome {
    let truth = [0.89, 6.0, 1.35, 2.14, 0.4, 0.3];
    let sigma = 0.01;
    let noise = Normal::new(0.0, sigma).expect("positive σ");
    let mut rng = ctx.rng(10);
    let (mut sum, mut err) = (0.0, 0.0);
    let n = 200;
    for _ in 0..n {
        let points = (0..300)
            .map(|i| {
                let t = -3.0 + 0.06 * i as f64;
                FringePoint {
                    t_es_ns: t,
                    p0: fringe_model(&truth, t) + noise.sample(&mut rng),
                    sigma_p0: sigma,
                }
            })
            .collect();
        let fit = fit_fringe(&FringeSeries::new(points).map_err(err_string)?, None).map_err(err_string)?;
        sum += fit.amplitude;
        err += fit.errors[0];
    }
    let (bias, sigma_a) = (sum / n as f64 - truth[0], err / n as f64);
    within(bias.abs(), sigma_a / 3.0, "|mean(A) - A|")
}

fn ramsey_grid(from: f64, to: f64, step: f64) -> Vec<f64> {
    let n = ((to - from) / step).round() as usize;
    (0..=n).map(|i| from + step * i as f64).collect()
}

fn residual_structure(ctx: &Ctx) -> Outcome {
    let pulses = ctx.pulses()?;
    let opts = FringeOptions {
        dt_ns: ctx.opts.dt_ns,
        noise_seed: Some(ctx.opts.seed),
        ..Default::default()
    };
    let data = simulate_fringe(&ramsey_grid(-5.0, 25.0, 0.05), &ctx.model, pulses, &opts).map_err(err_string)?;
    let fit = fit_fringe(&data, None).map_err(err_string)?;
    within(fit.residual_significance(&data), 2.0, "fringe-frequency residual (sigma)")
}

fn fidelity_monotone_in_eta(ctx: &Ctx) -> Outcome {
    let grid = ramsey_grid(-5.0, 15.0, 0.05);
    let mut f = Vec::new();
    for eta in [0.5, 0.7, 0.9, 1.0] {
        let model = ctx.model.clone().with_eta(eta);
        let pulses = ctx.pulses()?;
        let opts = FringeOptions {
            dt_ns: ctx.opts.dt_ns,
            ..Default::default()
        };
        let data = simulate_fringe(&grid, &model, pulses, &opts).map_err(err_string)?;
        f.push(fidelity_from_amplitude(&fit_fringe(&data, None).map_err(err_string)?).0);
    }
    let msg = format!("F = {:?}", f.iter().map(|x| (x * 1e4).round() / 1e4).collect::<Vec<_>>());
    if f.windows(2).all(|w| w[1] > w[0]) {
        Ok(msg)
    } else {
        Err(msg)
    }
}

// qpt-engine

fn inversion_exactness(ctx: &Ctx) -> Outcome {
    let mut rng = ctx.rng(13);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let (chi, _) = random_channel(&mut rng, 1 + i % 4);
        let ds = synthetic_dataset::<ChaCha8Rng>(&chi, 1.0, &CountModel::default(), None).map_err(err_string)?;
        worst = worst.max(expectations_to_chi(&ds).map_err(err_string)?.max_abs_diff(&chi));
    }
    within(worst, 1e-8, "max element error")
}

fn mle_physicality_fuzz(ctx: &Ctx) -> Outcome {
    let mut rng = ctx.rng(14);
    let n = 1000;
    for i in 0..n {
        let (chi, _) = random_channel(&mut rng, 1 + i % 4);
        let counts = CountModel::default().scaled(10f64.powi(-((i % 4) as i32)));
        let ds = synthetic_dataset(&chi, 1.0, &counts, Some(&mut rng)).map_err(err_string)?;
        let fit = mle_project(
            &ds,
            &MleOptions {
                seed: ctx.opts.seed.wrapping_add(i as u64),
                ..Default::default()
            },
        )
        .map_err(|e| format!("dataset {i}: {e}"))?;
        if !fit.chi.is_physical() {
            return Err(format!(
                "dataset {i}: min eigenvalue {:.2e}, TP defect {:.2e}",
                fit.chi.min_eigenvalue(),
                fit.chi.tp_defect()
            ));
        }
    }
    Ok(format!("{n} datasets physical"))
}

fn mle_consistency(ctx: &Ctx) -> Outcome {
    let truth = chi_ideal(94.6f64.to_radians());
    let mut medians = Vec::new();
    for (k, n_lo) in [5e2, 5e3, 5e4].into_iter().enumerate() {
        let mut rng = ctx.rng(15 + k as u64);
        let counts = CountModel { n_hi: 2.0 * n_lo, n_lo };
        let mut errs = Vec::new();
        for s in 0..50 {
            let ds = synthetic_dataset(&truth, 1.0, &counts, Some(&mut rng)).map_err(err_string)?;
            let fit = mle_project(
                &ds,
                &MleOptions {
                    seed: ctx.opts.seed.wrapping_add(s),
                    ..Default::default()
                },
            )
            .map_err(err_string)?;
            errs.push(fit.chi.frobenius_distance(&truth));
        }
        errs.sort_by(f64::total_cmp);
        medians.push(errs[errs.len() / 2]);
    }
    let msg = format!("median distance at n_hi 1e3/1e4/1e5: {medians:.4?}");
    if medians.windows(2).all(|w| w[1] < w[0]) {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn phase_tracks_precession(ctx: &Ctx) -> Outcome {
    let sim = ctx.qpt_simulation()?;
    let rate = 360.0 * ctx.model.f_es;
    let offsets: Vec<f64> = sim.iter().map(|&(t, phi, _)| phi - rate * t).collect();
    let worst = offsets
        .iter()
        .map(|o| wrap_deg(o - offsets[0]).abs())
        .fold(0.0, f64::max);
    within(worst, 2.0, "max offset spread (deg)")
}

fn fidelity_monotone_in_t_es(ctx: &Ctx) -> Outcome {
    let sim = ctx.qpt_simulation()?;
    let f: Vec<f64> = sim.iter().map(|p| p.2).collect();
    let msg = format!("F = {:?}", f.iter().map(|x| (x * 1e4).round() / 1e4).collect::<Vec<_>>());
    if f.windows(2).all(|w| w[1] <= w[0]) {
        Ok(msg)
    } else {
        Err(msg)
    }
}

// cli-workbench

fn deterministic_outputs(ctx: &Ctx) -> Outcome {
    let first = ctx.outputs()?;
    let second = run_small(&ctx.opts, &ctx.scratch.join("b")).map_err(err_string);
    let result = second.and_then(|second| {
        if first.len() != second.len() {
            return Err(format!("{} vs {} files", first.len(), second.len()));
        }
        for (a, b) in first.iter().zip(&second) {
            let (x, y) = (std::fs::read(a).map_err(|e| e.to_string())?, std::fs::read(b).map_err(|e| e.to_string())?);
            if x != y {
                return Err(format!("{} differs", a.file_name().unwrap_or_default().to_string_lossy()));
            }
        }
        Ok(format!("{} files byte-identical", first.len()))
    });
    result
}

fn outputs_validate(ctx: &Ctx) -> Outcome {
    let files = ctx.outputs()?;
    let read = |p: &PathBuf| std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()));
    let mut checked = 0;
    for p in files {
        let name = p.file_name().unwrap_or_default().to_string_lossy().to_string();
        let text = read(p)?;
        let bad = |e: Error| format!("{name}: {e}");
        if name == FRINGE_CSV {
            FringeSeries::read_csv(text.as_bytes()).map_err(bad)?;
        } else if name == FIT_JSON {
            let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| bad(e.into()))?;
            for key in ["tau_star_ns", "f_ghz", "covariance", "reduced_chi2", "parameter_names"] {
                if v.get(key).is_none() {
                    return Err(format!("{name}: missing {key}"));
                }
            }
        } else if name.ends_with("_dataset.json") {
            QptDataset::from_json_str(&text).map_err(bad)?;
        } else if name.ends_with("_chi.json") {
            let r: ChiReport = serde_json::from_str(&text).map_err(|e| bad(e.into()))?;
            let chi = ChiMatrix::from_json(&r.chi).map_err(bad)?;
            if !chi.is_physical() {
                return Err(format!("{name}: χ_phys not physical"));
            }
        } else if name == CURVE_JSON {
            let c: FidelityCurve = serde_json::from_str(&text).map_err(|e| bad(e.into()))?;
            if c.points.is_empty() {
                return Err(format!("{name}: no points"));
            }
        } else {
            continue;
        }
        checked += 1;
    }
    Ok(format!("{checked} files parsed and validated"))
}
