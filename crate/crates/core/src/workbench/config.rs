use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::{CountModel, PhysicsModel, PulseConfig, DEFAULT_DT_NS};
use crate::error::{Error, Result};

/// Environment variable overriding the integrator step, in picoseconds.
pub const DT_ENV: &str = "NVQPT_DT_PS";

/// A delay grid: an explicit list or an inclusive range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Range { start_ns: f64, stop_ns: f64, step_ns: f64 },
}

impl Grid {
    pub fn points(&self) -> Result<Vec<f64>> {
        match self {
            Grid::List(v) => Ok(v.clone()),
            Grid::Range { start_ns, stop_ns, step_ns } => {
                if !(*step_ns > 0.0) || !start_ns.is_finite() || !stop_ns.is_finite() {
                    return Err(Error::Config(format!("bad grid range {start_ns}..{stop_ns} step {step_ns}")));
                }
                if stop_ns < start_ns {
                    return Ok(Vec::new());
                }
                // Index-based so the endpoints do not drift with accumulated rounding.
                let n = ((stop_ns - start_ns) / step_ns + 1e-9).floor() as usize;
                Ok((0..=n).map(|i| start_ns + step_ns * i as f64).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: PhysicsModel,
    pub pulses: PulseConfig,
    pub ramsey_grid: Grid,
    pub qpt_grid: Grid,
    pub counts: CountModel,
    /// Monte-Carlo replicas per tomography delay; 0 skips the error bars.
    pub mc_replicas: usize,
    /// Poisson noise on the simulated counts.
    pub noise: bool,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Size of the worker pool for independent delays and replicas.
    pub workers: usize,
    pub dt_ns: f64,
    /// Also write SVG charts.
    pub svg: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: PhysicsModel::default(),
            pulses: PulseConfig::default(),
            ramsey_grid: Grid::Range {
                start_ns: -5.0,
                stop_ns: 15.0,
                step_ns: 0.05,
            },
            qpt_grid: Grid::List(vec![0.6, 1.6, 2.6, 3.6]),
            counts: CountModel::default(),
            mc_replicas: 100,
            noise: true,
            seed: 1,
            out_dir: PathBuf::from("out"),
            workers: 1,
            dt_ns: DEFAULT_DT_NS,
            svg: true,
        }
    }
}

impl RunConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text).map_err(|e| e.context(format!("config {}", path.display())))
    }

    /// Applies [`DT_ENV`] if it is set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Some(dt) = dt_from_env()? {
            self.dt_ns = dt;
        }
        Ok(())
    }

    pub fn ramsey_points(&self) -> Result<Vec<f64>> {
        let pts = self.ramsey_grid.points()?;
        if pts.is_empty() {
            return Err(Error::Config("ramsey_grid is empty".into()));
        }
        Ok(pts)
    }

    pub fn qpt_points(&self) -> Result<Vec<f64>> {
        let pts = self.qpt_grid.points()?;
        if pts.is_empty() {
            return Err(Error::Config("qpt_grid is empty".into()));
        }
        let mut sorted = pts.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("qpt_grid has repeated delays".into()));
        }
        Ok(pts)
    }

    /// Checks everything that does not need a simulation.
    pub fn validate(&self) -> Result<()> {
        self.model.validate().map_err(|e| Error::Config(e.to_string()))?;
        if !(self.dt_ns > 0.0) || self.dt_ns > 0.1 {
            return Err(Error::Config(format!("dt_ns must be in (0, 0.1], got {}", self.dt_ns)));
        }
        if !(self.counts.n_lo > 0.0) || !(self.counts.n_hi > self.counts.n_lo) {
            return Err(Error::Config("counts need n_hi > n_lo > 0".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if self.mc_replicas != 0 && self.mc_replicas < crate::qpt::MIN_REPLICAS {
            return Err(Error::Config(format!(
                "mc_replicas must be 0 or at least {}",
                crate::qpt::MIN_REPLICAS
            )));
        }
        Ok(())
    }

    pub fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))
    }
}

/// Integrator step from [`DT_ENV`], converted to ns.
pub fn dt_from_env() -> Result<Option<f64>> {
    match std::env::var(DT_ENV) {
        Ok(v) => {
            let ps: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{DT_ENV}={v} is not a number")))?;
            if !(ps > 0.0) {
                return Err(Error::Config(format!("{DT_ENV} must be positive")));
            }
            Ok(Some(ps * 1e-3))
        }
        Err(_) => Ok(None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_grid_hits_endpoints() {
        let g = Grid::Range {
            start_ns: -5.0,
            stop_ns: 15.0,
            step_ns: 0.05,
        };
        let p = g.points().unwrap();
        assert_eq!(p.len(), 401);
        assert_eq!(p[0], -5.0);
        assert!((p[400] - 15.0).abs() < 1e-12);
    }

    #[test]
    fn parses_partial_config_and_rejects_unknown_keys() {
        let cfg = RunConfig::from_json_str(r#"{"qpt_grid": [1.6], "model": {"f_gs_ghz": 0.65, "f_es_ghz": 2.14,
            "dephasing_rate_per_ns": 0.08333333333333334, "emission_rate_per_ns": 0.08333333333333333,
            "decay_rate_0_per_ns": 0.08333333333333333, "decay_rate_m1_per_ns": 0.08333333333333333,
            "eta": 0.9, "b_field_gauss": 1276.0}}"#)
        .unwrap();
        assert_eq!(cfg.qpt_points().unwrap(), vec![1.6]);
        assert_eq!(cfg.model.eta, 0.9);
        let err = RunConfig::from_json_str(r#"{"sed": 3}"#).unwrap_err();
        assert!(err.is_usage());
    }

    #[test]
    fn empty_grids_are_usage_errors() {
        let cfg = RunConfig {
            ramsey_grid: Grid::List(vec![]),
            qpt_grid: Grid::Range {
                start_ns: 2.0,
                stop_ns: 1.0,
                step_ns: 0.1,
            },
            ..Default::default()
        };
        assert!(cfg.ramsey_points().unwrap_err().is_usage());
        assert!(cfg.qpt_points().unwrap_err().is_usage());
    }
}
