use serde::{Deserialize, Serialize};

use super::dataset::QptDataset;
use super::inversion::expectations_to_chi;
use super::mle::{mle_project, MleOptions};
use super::montecarlo::{monte_carlo_errors, McErrors};
use crate::error::{Error, Result};
use crate::spin::{optimize_phi, ChiJson, ChiMatrix, PhiOptimum};

/// Label written next to every extrapolated intercept.
pub const EXTRAPOLATION_NOTE: &str = "heuristic: error-weighted straight line through F(t_es), a guide to the eye";

/// Everything derived from one dataset.
#[derive(Debug, Clone)]
pub struct QptAnalysis {
    pub t_es_ns: f64,
    pub chi_meas: ChiMatrix,
    pub chi_phys: ChiMatrix,
    pub optimum: PhiOptimum,
    pub mle_cost: f64,
    pub errors: Option<McErrors>,
    pub seed: u64,
}

/// χ_phys in the process-matrix schema plus the fidelity analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiReport {
    pub t_es_ns: f64,
    #[serde(flatten)]
    pub chi: ChiJson,
    pub phi_star_deg: f64,
    #[serde(rename = "F")]
    pub fidelity: f64,
    #[serde(rename = "sigma_F")]
    pub sigma_f: Option<f64>,
    pub sigma_phi_deg: Option<f64>,
    pub seed: u64,
}

impl QptAnalysis {
    pub fn report(&self) -> ChiReport {
        ChiReport {
            t_es_ns: self.t_es_ns,
            chi: self.chi_phys.to_json(),
            phi_star_deg: self.optimum.phi_deg(),
            fidelity: self.optimum.fidelity,
            sigma_f: self.errors.map(|e| e.sigma_f),
            sigma_phi_deg: self.errors.map(|e| e.sigma_phi_deg),
            seed: self.seed,
        }
    }
}

/// Inversion, projection and φ optimization for one dataset, with optional
/// Monte-Carlo error bars.
pub fn analyze_dataset(
    dataset: &QptDataset,
    mle: &MleOptions,
    mc_replicas: Option<usize>,
    seed: u64,
) -> Result<QptAnalysis> {
    let chi_meas = expectations_to_chi(dataset)?;
    let fit = mle_project(dataset, &MleOptions { seed, ..mle.clone() })?;
    let optimum = optimize_phi(&fit.chi);
    let errors = mc_replicas
        .map(|n| monte_carlo_errors(dataset, n, seed, mle))
        .transpose()?;
    Ok(QptAnalysis {
        t_es_ns: dataset.t_es_ns,
        chi_meas,
        chi_phys: fit.chi,
        optimum,
        mle_cost: fit.cost,
        errors,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub t_es_ns: f64,
    #[serde(rename = "F")]
    pub fidelity: f64,
    /// NaN (null in JSON) without Monte-Carlo errors.
    #[serde(rename = "sigma_F", deserialize_with = "nan_if_null")]
    pub sigma_f: f64,
    pub phi_deg: f64,
    #[serde(deserialize_with = "nan_if_null")]
    pub sigma_phi_deg: f64,
    pub phi_unwrapped_deg: f64,
}

fn nan_if_null<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityCurve {
    pub points: Vec<CurvePoint>,
    /// F extrapolated to t_es = 0; `None` with fewer than two delays.
    pub intercept: Option<f64>,
    pub intercept_sigma: Option<f64>,
    pub slope_per_ns: Option<f64>,
    pub phi_slope_deg_per_ns: Option<f64>,
    /// Whether the line was weighted by 1/σ_F².
    pub weighted: bool,
    pub extrapolation: String,
}

impl FidelityCurve {
    pub const CSV_HEADER: &'static str = "t_es_ns,F,sigma_F,phi_deg,sigma_phi_deg";

    /// Fits the line and unwraps φ. With `phase_rate_deg_per_ns`, each step
    /// picks the 2π branch closest to the predicted precession; otherwise the
    /// branch closest to the previous point.
    pub fn from_points(mut raw: Vec<CurvePoint>, phase_rate_deg_per_ns: Option<f64>) -> Result<Self> {
        raw.sort_by(|a, b| a.t_es_ns.total_cmp(&b.t_es_ns));
        if raw.len() < 2 {
            return Err(Error::InvalidDataset(format!(
                "extrapolation needs at least 2 delays, got {}",
                raw.len()
            )));
        }
        if raw.windows(2).any(|w| w[1].t_es_ns <= w[0].t_es_ns) {
            return Err(Error::InvalidDataset("delays must be distinct".into()));
        }
        raw[0].phi_unwrapped_deg = raw[0].phi_deg;
        for i in 1..raw.len() {
            let dt = raw[i].t_es_ns - raw[i - 1].t_es_ns;
            let target = raw[i - 1].phi_unwrapped_deg + phase_rate_deg_per_ns.unwrap_or(0.0) * dt;
            let k = ((target - raw[i].phi_deg) / 360.0).round();
            raw[i].phi_unwrapped_deg = raw[i].phi_deg + 360.0 * k;
        }

        let weighted = raw.iter().all(|p| p.sigma_f.is_finite() && p.sigma_f > 0.0);
        let t: Vec<f64> = raw.iter().map(|p| p.t_es_ns).collect();
        let f: Vec<f64> = raw.iter().map(|p| p.fidelity).collect();
        let w: Vec<f64> = if weighted {
            raw.iter().map(|p| 1.0 / (p.sigma_f * p.sigma_f)).collect()
        } else {
            vec![1.0; raw.len()]
        };
        let line = line_fit(&t, &f, &w);
        let intercept_sigma = if weighted {
            Some(line.intercept_var.sqrt())
        } else if raw.len() > 2 {
            Some((line.rss / (raw.len() - 2) as f64 * line.intercept_var).sqrt())
        } else {
            None
        };
        let phi: Vec<f64> = raw.iter().map(|p| p.phi_unwrapped_deg).collect();
        let phi_line = line_fit(&t, &phi, &vec![1.0; raw.len()]);
        Ok(Self {
            points: raw,
            intercept: Some(line.intercept),
            intercept_sigma,
            slope_per_ns: Some(line.slope),
            phi_slope_deg_per_ns: Some(phi_line.slope),
            weighted,
            extrapolation: EXTRAPOLATION_NOTE.into(),
        })
    }

    /// A lone delay: the point is reported, nothing is extrapolated.
    pub fn single(mut point: CurvePoint) -> Self {
        log::warn!("only one delay at {} ns; no extrapolation", point.t_es_ns);
        point.phi_unwrapped_deg = point.phi_deg;
        Self {
            points: vec![point],
            intercept: None,
            intercept_sigma: None,
            slope_per_ns: None,
            phi_slope_deg_per_ns: None,
            weighted: false,
            extrapolation: EXTRAPOLATION_NOTE.into(),
        }
    }

    pub fn points_from_analyses(analyses: &[QptAnalysis]) -> Vec<CurvePoint> {
        analyses
            .iter()
            .map(|a| CurvePoint {
                t_es_ns: a.t_es_ns,
                fidelity: a.optimum.fidelity,
                sigma_f: a.errors.map_or(f64::NAN, |e| e.sigma_f),
                phi_deg: a.optimum.phi_deg(),
                sigma_phi_deg: a.errors.map_or(f64::NAN, |e| e.sigma_phi_deg),
                phi_unwrapped_deg: a.optimum.phi_deg(),
            })
            .collect()
    }

    pub fn from_analyses(analyses: &[QptAnalysis], phase_rate_deg_per_ns: Option<f64>) -> Result<Self> {
        Self::from_points(Self::points_from_analyses(analyses), phase_rate_deg_per_ns)
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", Self::CSV_HEADER)?;
        for p in &self.points {
            writeln!(
                w,
                "{},{},{},{},{}",
                p.t_es_ns, p.fidelity, p.sigma_f, p.phi_unwrapped_deg, p.sigma_phi_deg
            )?;
        }
        Ok(())
    }
}

struct Line {
    intercept: f64,
    slope: f64,
    /// Variance of the intercept for weights equal to 1/σ².
    intercept_var: f64,
    rss: f64,
}

fn line_fit(x: &[f64], y: &[f64], w: &[f64]) -> Line {
    let (mut s, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((x, y), w) in x.iter().zip(y).zip(w) {
        s += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    let d = s * sxx - sx * sx;
    let intercept = (sxx * sy - sx * sxy) / d;
    let slope = (s * sxy - sx * sy) / d;
    let rss = x
        .iter()
        .zip(y)
        .zip(w)
        .map(|((x, y), w)| w * (y - intercept - slope * x).powi(2))
        .sum();
    Line {
        intercept,
        slope,
        intercept_var: sxx / d,
        rss,
    }
}

#[derive(Debug, Clone, Default)]
pub struct CurveOptions {
    pub mle: MleOptions,
    /// Monte-Carlo replicas for the error bars; `None` skips them and fits an
    /// unweighted line.
    pub mc_replicas: Option<usize>,
    pub seed: u64,
    pub phase_rate_deg_per_ns: Option<f64>,
}

/// F and φ at every delay and the extrapolation of F to t_es = 0.
pub fn fidelity_curve(datasets: &[QptDataset], opts: &CurveOptions) -> Result<FidelityCurve> {
    if datasets.len() < 2 {
        return Err(Error::InvalidDataset(format!(
            "extrapolation needs at least 2 datasets, got {}",
            datasets.len()
        )));
    }
    let analyses = datasets
        .iter()
        .enumerate()
        .map(|(i, d)| analyze_dataset(d, &opts.mle, opts.mc_replicas, opts.seed.wrapping_add(1_000_003 * i as u64)))
        .collect::<Result<Vec<_>>>()?;
    FidelityCurve::from_analyses(&analyses, opts.phase_rate_deg_per_ns)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(t: f64, f: f64, s: f64, phi: f64) -> CurvePoint {
        CurvePoint {
            t_es_ns: t,
            fidelity: f,
            sigma_f: s,
            phi_deg: phi,
            sigma_phi_deg: 1.0,
            phi_unwrapped_deg: phi,
        }
    }

    #[test]
    fn exact_line_and_guided_unwrap() {
        let rate = 770.4;
        let pts: Vec<CurvePoint> = [0.6, 0.9, 1.2, 1.5]
            .iter()
            .map(|&t| {
                let phi = (10.0 + rate * t + 180.0f64).rem_euclid(360.0) - 180.0;
                point(t, 0.98 - 0.02 * t, 0.01, phi)
            })
            .collect();
        let c = FidelityCurve::from_points(pts, Some(rate)).unwrap();
        assert!((c.intercept.unwrap() - 0.98).abs() < 1e-12);
        assert!((c.slope_per_ns.unwrap() + 0.02).abs() < 1e-12);
        assert!((c.phi_slope_deg_per_ns.unwrap() - rate).abs() < 1e-9);
        // σ_b² = Σt² / (n Σt² − (Σt)²) · σ² for equal weights
        let t = [0.6f64, 0.9, 1.2, 1.5];
        let (s1, s2): (f64, f64) = (t.iter().sum(), t.iter().map(|x| x * x).sum());
        let expect = (s2 / (4.0 * s2 - s1 * s1)).sqrt() * 0.01;
        assert!((c.intercept_sigma.unwrap() - expect).abs() < 1e-12);
        assert!(c.weighted && c.extrapolation.contains("heuristic"));
    }

    #[test]
    fn needs_two_distinct_points() {
        assert!(FidelityCurve::from_points(vec![point(1.0, 0.9, 0.01, 0.0)], None).is_err());
        let dup = vec![point(1.0, 0.9, 0.01, 0.0), point(1.0, 0.8, 0.01, 0.0)];
        assert!(FidelityCurve::from_points(dup, None).is_err());
    }
}
