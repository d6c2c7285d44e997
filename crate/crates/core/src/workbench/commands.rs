use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::RunConfig;
use super::svg::{Chart, Series, Style};
use crate::dynamics::{PulseLibrary, RotationAxis};
use crate::error::{Error, Result};
use crate::qpt::{
    analyze_dataset, dataset_from_p0, simulate_p0, FidelityCurve, MleOptions, QptAnalysis, QptDataset,
    SimulationOptions,
};
use crate::ramsey::{fit_fringe, simulate_fringe, FitReport, FringeOptions, FringeSeries, RamseyFit};

pub const FRINGE_CSV: &str = "ramsey_fringe.csv";
pub const FIT_JSON: &str = "ramsey_fit.json";
pub const OVERLAY_CSV: &str = "ramsey_overlay.csv";
pub const RAMSEY_SVG: &str = "ramsey.svg";
pub const CURVE_JSON: &str = "fidelity_curve.json";
pub const CURVE_CSV: &str = "fidelity_curve.csv";
pub const FIDELITY_SVG: &str = "qpt_fidelity.svg";
pub const PHASE_SVG: &str = "qpt_phase.svg";
/// Spacing of the per-delay analysis seeds.
const SEED_STRIDE: u64 = 1_000_003;

/// Fit report as written to disk: the fit plus the run that produced it.
#[derive(Debug, Clone, Serialize)]
pub struct RamseyRunReport {
    pub seed: u64,
    pub noise: bool,
    pub eta: f64,
    pub points: usize,
    #[serde(flatten)]
    pub fit: FitReport,
}

#[derive(Debug, Clone)]
pub struct RamseyOutputs {
    pub fringe: FringeSeries,
    pub fit: RamseyFit,
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct QptOutputs {
    pub datasets: Vec<QptDataset>,
    pub analyses: Vec<QptAnalysis>,
    pub curve: FidelityCurve,
    pub files: Vec<PathBuf>,
}

fn write_file(dir: &Path, name: &str, bytes: &[u8], files: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| Error::Io(e).context(format!("writing {}", path.display())))?;
    files.push(path);
    Ok(())
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s.into_bytes())
}

fn prepare(cfg: &RunConfig) -> Result<PulseLibrary> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| Error::Io(e).context(format!("creating {}", cfg.out_dir.display())))?;
    PulseLibrary::calibrate(&cfg.model, &cfg.pulses, cfg.dt_ns).map_err(|e| e.context("pulse calibration"))
}

/// Simulates and fits the Ramsey fringe, writing the fringe, fit report and
/// overlay (plus an SVG chart when enabled).
pub fn cmd_ramsey(cfg: &RunConfig) -> Result<RamseyOutputs> {
    let grid = cfg.ramsey_points()?;
    let pulses = prepare(cfg)?;
    let opts = FringeOptions {
        dt_ns: cfg.dt_ns,
        counts: cfg.counts,
        noise_seed: cfg.noise.then_some(cfg.seed),
        readout_axis: RotationAxis::Y,
        check_convergence: false,
    };
    let fringe = simulate_fringe(&grid, &cfg.model, &pulses, &opts).map_err(|e| e.context("ramsey simulation"))?;
    let fit = fit_fringe(&fringe, None).map_err(|e| e.context("ramsey fit"))?;

    let dir = &cfg.out_dir;
    let mut files = Vec::new();
    let mut buf = Vec::new();
    fringe.write_csv(&mut buf)?;
    write_file(dir, FRINGE_CSV, &buf, &mut files)?;
    let report = RamseyRunReport {
        seed: cfg.seed,
        noise: cfg.noise,
        eta: cfg.model.eta,
        points: fringe.len(),
        fit: fit.report(),
    };
    write_file(dir, FIT_JSON, &json_bytes(&report)?, &mut files)?;
    buf.clear();
    fit.write_overlay_csv(&fringe, &mut buf)?;
    write_file(dir, OVERLAY_CSV, &buf, &mut files)?;
    if cfg.svg {
        let t0 = grid[0];
        let t1 = grid[grid.len() - 1];
        let n = 2000;
        let model_line = (0..=n)
            .map(|i| {
                let t = t0 + (t1 - t0) * i as f64 / n as f64;
                (t, fit.model(t), 0.0)
            })
            .collect();
        let chart = Chart {
            title: format!("Ramsey fringe (tau* = {:.2} ns, f = {:.4} GHz)", fit.tau_star, fit.f_fit),
            x_label: "t_ES (ns)".into(),
            y_label: "P0".into(),
            series: vec![
                Series {
                    name: "simulated".into(),
                    style: Style::Markers,
                    points: fringe.points.iter().map(|p| (p.t_es_ns, p.p0, p.sigma_p0)).collect(),
                },
                Series {
                    name: "fit".into(),
                    style: Style::Line,
                    points: model_line,
                },
            ],
        };
        write_file(dir, RAMSEY_SVG, chart.render().as_bytes(), &mut files)?;
    }
    Ok(RamseyOutputs { fringe, fit, files })
}

/// Simulates the tomography protocol at every delay of the grid, projects and
/// analyzes each dataset, and writes the per-delay files and the F(t_es) curve.
pub fn cmd_qpt(cfg: &RunConfig) -> Result<QptOutputs> {
    let grid = cfg.qpt_points()?;
    let pulses = prepare(cfg)?;
    let sim = SimulationOptions {
        dt_ns: cfg.dt_ns,
        counts: cfg.counts,
        ..Default::default()
    };
    let mle = MleOptions::default();
    let mc = (cfg.mc_replicas > 0).then_some(cfg.mc_replicas);

    let pool = cfg.pool()?;
    let results: Vec<(QptDataset, QptAnalysis)> = pool.install(|| {
        grid.par_iter()
            .enumerate()
            .map(|(i, &t)| -> Result<_> {
                let stage = |what: &str| format!("qpt {what} at t_es = {t} ns");
                let p0 = simulate_p0(t, &cfg.model, &pulses, &sim).map_err(|e| e.context(stage("simulation")))?;
                let ds = if cfg.noise {
                    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                    rng.set_stream(i as u64 + 1);
                    dataset_from_p0(t, &p0, &cfg.counts, Some(&mut rng))
                } else {
                    dataset_from_p0::<ChaCha8Rng>(t, &p0, &cfg.counts, None)
                }
                .map_err(|e| e.context(stage("dataset")))?;
                let seed = cfg.seed.wrapping_add(SEED_STRIDE * i as u64);
                let analysis = analyze_dataset(&ds, &mle, mc, seed).map_err(|e| e.context(stage("analysis")))?;
                Ok((ds, analysis))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let (datasets, analyses): (Vec<_>, Vec<_>) = results.into_iter().unzip();

    let curve = if analyses.len() == 1 {
        FidelityCurve::single(FidelityCurve::points_from_analyses(&analyses)[0])
    } else {
        FidelityCurve::from_analyses(&analyses, Some(360.0 * cfg.model.f_es)).map_err(|e| e.context("fidelity curve"))?
    };

    let dir = &cfg.out_dir;
    let mut files = Vec::new();
    for (i, (ds, a)) in datasets.iter().zip(&analyses).enumerate() {
        let stem = format!("qpt_{i:02}_t{:.3}ns", ds.t_es_ns);
        let mut text = ds.to_json_string()?;
        text.push('\n');
        write_file(dir, &format!("{stem}_dataset.json"), text.as_bytes(), &mut files)?;
        write_file(dir, &format!("{stem}_chi.json"), &json_bytes(&a.report())?, &mut files)?;
    }
    write_file(dir, CURVE_JSON, &json_bytes(&curve)?, &mut files)?;
    let mut buf = Vec::new();
    curve.write_csv(&mut buf)?;
    write_file(dir, CURVE_CSV, &buf, &mut files)?;
    if cfg.svg {
        let mut fid = vec![Series {
            name: "F (MLE)".into(),
            style: Style::Markers,
            points: curve.points.iter().map(|p| (p.t_es_ns, p.fidelity, p.sigma_f)).collect(),
        }];
        if let (Some(b), Some(m)) = (curve.intercept, curve.slope_per_ns) {
            let t1 = curve.points.iter().map(|p| p.t_es_ns).fold(0.0, f64::max);
            fid.push(Series {
                name: "linear guide".into(),
                style: Style::Line,
                points: vec![(0.0, b, 0.0), (t1, b + m * t1, 0.0)],
            });
        }
        let chart = Chart {
            title: "Process fidelity".into(),
            x_label: "t_ES (ns)".into(),
            y_label: "F".into(),
            series: fid,
        };
        write_file(dir, FIDELITY_SVG, chart.render().as_bytes(), &mut files)?;
        let chart = Chart {
            title: "Phase angle".into(),
            x_label: "t_ES (ns)".into(),
            y_label: "phi (deg, unwrapped)".into(),
            series: vec![Series {
                name: "phi*".into(),
                style: Style::Markers,
                points: curve
                    .points
                    .iter()
                    .map(|p| (p.t_es_ns, p.phi_unwrapped_deg, p.sigma_phi_deg))
                    .collect(),
            }],
        };
        write_file(dir, PHASE_SVG, chart.render().as_bytes(), &mut files)?;
    }
    Ok(QptOutputs {
        datasets,
        analyses,
        curve,
        files,
    })
}
