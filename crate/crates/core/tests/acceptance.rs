//! Acceptance criteria 1-8. Runs without the libtest harness so every
//! criterion prints its own PASS/FAIL line; exits nonzero if any fails.

use std::time::Instant;

use nvqpt::dynamics::{CountModel, PhysicsModel, PulseConfig, PulseLibrary, DEFAULT_DT_NS};
use nvqpt::qpt::{
    analyze_dataset, expectations_to_chi, mle_project, monte_carlo_errors, simulate_dataset, synthetic_dataset,
    CurvePoint, FidelityCurve, MleOptions, SimulationOptions,
};
use nvqpt::ramsey::{fit_fringe, simulate_fringe, FringeOptions};
use nvqpt::spin::{chi_ideal, optimize_phi, random::random_channel, ChiMatrix, C64};
use nvqpt::workbench::{cmd_qpt, run_selftest, RunConfig, SelftestOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

// Pinned tolerances.
const LARMOR_DEG_PER_NS: f64 = 360.0 * 2.14;
const LARMOR_REL_TOL: f64 = 0.01;
const LARMOR_MAX_S: f64 = 10.0;
const TAU_STAR_NS: f64 = 6.0;
const TAU_REL_TOL: f64 = 0.15;
const F_ES_GHZ: f64 = 2.14;
const F_REL_TOL: f64 = 0.005;
const BASELINE_TOL: f64 = 0.02;
const RAMSEY_MAX_S: f64 = 120.0;
const AMP_TARGET: f64 = 0.90;
const AMP_TOL: f64 = 0.03;
const AMP_F_TARGET: f64 = 0.95;
const AMP_F_TOL: f64 = 0.015;
const INVERSION_TOL: f64 = 1e-8;
const INVERSION_MAX_S: f64 = 5.0;
const MLE_PHI_DEG: f64 = 94.6;
const MLE_K: f64 = 0.74;
const MLE_F_TARGET: f64 = 0.87;
const MLE_F_TOL: f64 = 0.02;
const MLE_PHI_TOL_DEG: f64 = 3.0;
const MLE_MAX_S: f64 = 120.0;
const SCALING_TOL: f64 = 0.2;
const SIGMA_PHI_TARGET_DEG: f64 = 5.0;
const SIGMA_PHI_TOL_DEG: f64 = 1.0;
const F0_IDEAL_MIN: f64 = 0.99;
const F0_ETA_TARGET: f64 = 0.95;
const F0_ETA_TOL: f64 = 0.01;
const CURVE_MAX_S: f64 = 600.0;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: String) -> Verdict {
    Verdict { passed, detail }
}

fn library(model: &PhysicsModel) -> PulseLibrary {
    PulseLibrary::calibrate(model, &PulseConfig::default(), DEFAULT_DT_NS).expect("calibration")
}

fn grid(from: f64, to: f64, step: f64) -> Vec<f64> {
    let n = ((to - from) / step).round() as usize;
    (0..=n).map(|i| from + step * i as f64).collect()
}

/// Z rotation by `phi` followed by transverse shrinkage by `k`.
fn damped_rotation(phi: f64, k: f64) -> ChiMatrix {
    let (c, s) = ((phi / 2.0).cos(), (phi / 2.0).sin());
    let w = (1.0 + k) / 2.0;
    let mut m = *chi_ideal(phi).matrix();
    m[(0, 0)] = C64::new(w * c * c + (1.0 - w) * s * s, 0.0);
    m[(3, 3)] = C64::new(w * s * s + (1.0 - w) * c * c, 0.0);
    m[(0, 3)] = C64::new(0.0, (2.0 * w - 1.0) * c * s);
    m[(3, 0)] = m[(0, 3)].conj();
    ChiMatrix::new(m).expect("hermitian")
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn c1_larmor() -> Verdict {
    let start = Instant::now();
    let model = PhysicsModel::default();
    let lib = library(&model);
    let sim = SimulationOptions::default();
    let points: Vec<CurvePoint> = grid(1.6, 2.6, 0.1)
        .into_iter()
        .map(|t| {
            let ds = simulate_dataset::<ChaCha8Rng>(t, &model, &lib, &sim, None).unwrap();
            let best = optimize_phi(&mle_project(&ds, &MleOptions::default()).unwrap().chi);
            CurvePoint {
                t_es_ns: t,
                fidelity: best.fidelity,
                sigma_f: f64::NAN,
                phi_deg: best.phi_deg(),
                sigma_phi_deg: f64::NAN,
                phi_unwrapped_deg: best.phi_deg(),
            }
        })
        .collect();
    // Unguided unwrapping: 0.1 ns steps advance φ by far less than 180°.
    let curve = FidelityCurve::from_points(points, None).unwrap();
    let slope = curve.phi_slope_deg_per_ns.unwrap();
    let secs = start.elapsed().as_secs_f64();
    let rel = (slope / LARMOR_DEG_PER_NS - 1.0).abs();
    verdict(
        rel <= LARMOR_REL_TOL && secs < LARMOR_MAX_S,
        format!("slope {slope:.2} deg/ns vs {LARMOR_DEG_PER_NS:.1} (rel {rel:.2e}, tol {LARMOR_REL_TOL}); {secs:.1} s (limit {LARMOR_MAX_S} s)"),
    )
}

fn c2_ramsey() -> Verdict {
    let start = Instant::now();
    let model = PhysicsModel::default();
    let lib = library(&model);
    let opts = FringeOptions {
        noise_seed: Some(1),
        ..Default::default()
    };
    let data = simulate_fringe(&grid(-5.0, 15.0, 0.05), &model, &lib, &opts).unwrap();
    let fit = fit_fringe(&data, None).unwrap();
    let exact = simulate_fringe(&[-5.0, -4.0, -3.0, -2.0], &model, &lib, &FringeOptions::default()).unwrap();
    let baseline = exact.points.iter().map(|p| (p.p0 - 0.5).abs()).fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    let tau_rel = (fit.tau_star / TAU_STAR_NS - 1.0).abs();
    let f_rel = (fit.f_fit / F_ES_GHZ - 1.0).abs();
    verdict(
        tau_rel <= TAU_REL_TOL && f_rel <= F_REL_TOL && baseline <= BASELINE_TOL && secs < RAMSEY_MAX_S,
        format!(
            "tau* {:.3} ns (rel {tau_rel:.3}, tol {TAU_REL_TOL}); f {:.5} GHz (rel {f_rel:.2e}, tol {F_REL_TOL}); \
             max |p0-0.5| before excitation {baseline:.4} (tol {BASELINE_TOL}); {secs:.1} s",
            fit.tau_star, fit.f_fit
        ),
    )
}

fn c3_amplitude() -> Verdict {
    let model = PhysicsModel::default().with_eta(0.9);
    let lib = library(&model);
    let opts = FringeOptions {
        noise_seed: Some(1),
        ..Default::default()
    };
    let data = simulate_fringe(&grid(-5.0, 15.0, 0.05), &model, &lib, &opts).unwrap();
    let fit = fit_fringe(&data, None).unwrap();
    // Extrapolated to the excitation instant, t_es = 0 on the simulation clock.
    let a = fit.amplitude_at(0.0);
    let f = (1.0 + a) / 2.0;
    verdict(
        (a - AMP_TARGET).abs() <= AMP_TOL && (f - AMP_F_TARGET).abs() <= AMP_F_TOL,
        format!(
            "A(t_es=0) {a:.4} ± {:.4} (target {AMP_TARGET} ± {AMP_TOL}); F {f:.4} (target {AMP_F_TARGET} ± {AMP_F_TOL}); fitted A at t0 {:.4}",
            fit.amplitude_at_sigma(0.0),
            fit.amplitude
        ),
    )
}

fn c4_inversion() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let (chi, _) = random_channel(&mut rng, 1 + i % 4);
        let ds = synthetic_dataset::<ChaCha8Rng>(&chi, 1.0, &CountModel::default(), None).unwrap();
        worst = worst.max(expectations_to_chi(&ds).unwrap().max_abs_diff(&chi));
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst <= INVERSION_TOL && secs < INVERSION_MAX_S,
        format!("max error {worst:.2e} (tol {INVERSION_TOL:.0e}); {secs:.2} s (limit {INVERSION_MAX_S} s)"),
    )
}

fn c5_mle() -> Verdict {
    let start = Instant::now();
    let truth = damped_rotation(MLE_PHI_DEG.to_radians(), MLE_K);
    let counts = CountModel::default();
    let (mut fs, mut phis) = (Vec::new(), Vec::new());
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ds = synthetic_dataset(&truth, 0.59, &counts, Some(&mut rng)).unwrap();
        let fit = mle_project(&ds, &MleOptions { seed, ..Default::default() }).unwrap();
        let best = optimize_phi(&fit.chi);
        fs.push(best.fidelity);
        phis.push(best.phi_deg());
    }
    let (f, phi) = (median(fs), median(phis));
    let secs = start.elapsed().as_secs_f64();
    verdict(
        (f - MLE_F_TARGET).abs() <= MLE_F_TOL && (phi - MLE_PHI_DEG).abs() <= MLE_PHI_TOL_DEG && secs < MLE_MAX_S,
        format!(
            "median F {f:.4} (target {MLE_F_TARGET} ± {MLE_F_TOL}); median phi {phi:.2} deg (target {MLE_PHI_DEG} ± {MLE_PHI_TOL_DEG}); {secs:.1} s"
        ),
    )
}

fn c6_scaling() -> Verdict {
    let truth = damped_rotation(MLE_PHI_DEG.to_radians(), MLE_K);
    let sigma_phi = |counts: CountModel| {
        let ds = synthetic_dataset::<ChaCha8Rng>(&truth, 0.59, &counts, None).unwrap();
        monte_carlo_errors(&ds, 200, 6, &MleOptions::default()).unwrap().sigma_phi_deg
    };
    let base = CountModel { n_hi: 2e3, n_lo: 1e3 };
    let s1 = sigma_phi(base);
    let s4 = sigma_phi(base.scaled(4.0));
    let ratio = s4 / s1;
    // σ ∝ N^{-1/2}: pick the counts that should give 5° and confirm.
    let scale = (s1 / SIGMA_PHI_TARGET_DEG).powi(2);
    let target_counts = base.scaled(scale);
    let s5 = sigma_phi(target_counts);
    verdict(
        (ratio - 0.5).abs() <= 0.5 * SCALING_TOL && (s5 - SIGMA_PHI_TARGET_DEG).abs() <= SIGMA_PHI_TOL_DEG,
        format!(
            "sigma_phi {s1:.3} -> {s4:.3} deg for 4x counts (ratio {ratio:.3}, target 0.5 ± {:.2}); \
             n_hi {:.0} gives {s5:.2} deg (target {SIGMA_PHI_TARGET_DEG} ± {SIGMA_PHI_TOL_DEG})",
            0.5 * SCALING_TOL,
            target_counts.n_hi
        ),
    )
}

fn c7_extrapolation() -> Verdict {
    let start = Instant::now();
    let run = |eta: f64| {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig {
            out_dir: dir.path().to_path_buf(),
            svg: false,
            ..Default::default()
        };
        cfg.model.eta = eta;
        let out = cmd_qpt(&cfg).unwrap();
        (out.curve.intercept.unwrap(), out.curve.intercept_sigma.unwrap_or(f64::NAN))
    };
    let (f1, s1) = run(1.0);
    let (f9, s9) = run(0.9);
    let secs = start.elapsed().as_secs_f64();
    verdict(
        f1 >= F0_IDEAL_MIN && (f9 - F0_ETA_TARGET).abs() <= F0_ETA_TOL && secs < CURVE_MAX_S,
        format!(
            "eta=1: F0 {f1:.4} ± {s1:.4} (need >= {F0_IDEAL_MIN}); eta=0.9: F0 {f9:.4} ± {s9:.4} (target {F0_ETA_TARGET} ± {F0_ETA_TOL}); {secs:.0} s"
        ),
    )
}

fn c8_selftest() -> Verdict {
    let report = run_selftest(&SelftestOptions::default());
    print!("{}", report.table());
    let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    verdict(
        failed.is_empty(),
        format!("{} checks, failed: {:?}", report.checks.len(), failed),
    )
}

fn main() {
    // `cargo test -- --list` and similar harness flags have nothing to list here.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let criteria: [(&str, fn() -> Verdict); 8] = [
        ("larmor law", c1_larmor),
        ("ramsey regime", c2_ramsey),
        ("amplitude fidelity", c3_amplitude),
        ("qpt inversion exactness", c4_inversion),
        ("mle behavior", c5_mle),
        ("shot-noise scaling", c6_scaling),
        ("extrapolation", c7_extrapolation),
        ("property suites", c8_selftest),
    ];
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let v = f();
        println!(
            "criterion {} {:<24} {}  {}",
            i + 1,
            name,
            if v.passed { "PASS" } else { "FAIL" },
            v.detail
        );
        if !v.passed {
            failures += 1;
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
