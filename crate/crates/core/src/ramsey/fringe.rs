use std::io::{BufRead, BufReader, Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    readout_weighted, CountModel, PhysicsModel, Propagator, PulseEvent, PulseLibrary, RotationAxis, SpinState,
    Timeline, CONVERGENCE_TOL, DEFAULT_DT_NS,
};
use crate::error::{Error, Result};
use crate::spin::DensityMatrix;

pub const FRINGE_HEADER: &str = "t_es_ns,p0,sigma_p0";
/// Allowed range of readout-pulse delays around the excitation, in ns.
pub const GRID_RANGE_NS: (f64, f64) = (-5.0, 25.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringePoint {
    pub t_es_ns: f64,
    pub p0: f64,
    pub sigma_p0: f64,
}

/// Normalized fluorescence against readout-pulse delay.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FringeSeries {
    pub points: Vec<FringePoint>,
}

impl FringeSeries {
    pub fn new(points: Vec<FringePoint>) -> Result<Self> {
        let s = Self { points };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.windows(2).any(|w| !(w[1].t_es_ns > w[0].t_es_ns)) {
            return Err(Error::InvalidDataset("fringe delays must be strictly increasing".into()));
        }
        for p in &self.points {
            if !(-0.2..=1.2).contains(&p.p0) || !(p.sigma_p0 >= 0.0) {
                return Err(Error::InvalidDataset(format!(
                    "fringe point at {} ns has p0 {} / sigma {}",
                    p.t_es_ns, p.p0, p.sigma_p0
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t_es_ns).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{FRINGE_HEADER}")?;
        for p in &self.points {
            writeln!(w, "{},{},{}", p.t_es_ns, p.p0, p.sigma_p0)?;
        }
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut lines = BufReader::new(r).lines();
        let header = lines.next().transpose()?.unwrap_or_default();
        if header.trim() != FRINGE_HEADER {
            return Err(Error::InvalidDataset(format!("unexpected fringe header {header:?}")));
        }
        let mut points = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::InvalidDataset(format!("line {}: {e}", i + 2)))?;
            if vals.len() != 3 {
                return Err(Error::InvalidDataset(format!("line {}: expected 3 columns", i + 2)));
            }
            points.push(FringePoint {
                t_es_ns: vals[0],
                p0: vals[1],
                sigma_p0: vals[2],
            });
        }
        Self::new(points)
    }
}

#[derive(Debug, Clone)]
pub struct FringeOptions {
    pub dt_ns: f64,
    pub counts: CountModel,
    /// Seed for Poisson noise on the photon counts; `None` keeps exact p0.
    pub noise_seed: Option<u64>,
    /// Axis of the readout π/2 pulse.
    pub readout_axis: RotationAxis,
    /// Repeat at dt/2 and reject if any p0 moves by more than the tolerance.
    pub check_convergence: bool,
}

impl Default for FringeOptions {
    fn default() -> Self {
        Self {
            dt_ns: DEFAULT_DT_NS,
            counts: CountModel::default(),
            noise_seed: None,
            readout_axis: RotationAxis::Y,
            check_convergence: false,
        }
    }
}

/// π/2_GS(Y) at the configured ground-state time, excitation at 0 and a
/// π/2_ES readout pulse centered at `t_es`.
pub fn ramsey_timeline(t_es: f64, pulses: &PulseLibrary, readout_axis: RotationAxis) -> Result<Timeline> {
    Timeline::new(vec![
        pulses.gs_half_pi.at(pulses.config.ramsey_gs_center_ns, RotationAxis::Y),
        PulseEvent::excitation(0.0),
        pulses.es_half_pi.at(t_es, readout_axis),
    ])
}

fn exact_fringe(grid: &[f64], model: &PhysicsModel, pulses: &PulseLibrary, opts: &FringeOptions, dt: f64) -> Result<Vec<f64>> {
    let base = Timeline::new(vec![
        pulses.gs_half_pi.at(pulses.config.ramsey_gs_center_ns, RotationAxis::Y),
        PulseEvent::excitation(0.0),
    ])?;
    let prefix = Propagator::new(model, &base, dt)?;
    let mut shared = SpinState::new(&DensityMatrix::ground(), base.t_start);
    let mut out = Vec::with_capacity(grid.len());
    for &t_es in grid {
        let tl = ramsey_timeline(t_es, pulses, opts.readout_axis)?;
        let prop = Propagator::new(model, &tl, dt)?;
        // Everything before the readout pulse is common to all delays. Stop a
        // node early so no step of the prefix samples the pulse edge.
        let start = pulses.es_half_pi.at(t_es, opts.readout_axis).window().0;
        let node = prefix.node(prefix.node_index_before(start) - 2);
        if node > shared.t {
            prefix.advance(&mut shared, node, None);
        }
        let mut state = shared;
        prop.finish(&mut state, tl.t_end, None);
        let es_time = tl.t_end - tl.excitation_time();
        out.push(readout_weighted(&state.density(), model, es_time));
    }
    Ok(out)
}

/// Lab-frame Ramsey fringe: p0 for each readout delay in `grid`.
pub fn simulate_fringe(
    grid: &[f64],
    model: &PhysicsModel,
    pulses: &PulseLibrary,
    opts: &FringeOptions,
) -> Result<FringeSeries> {
    if grid.is_empty() {
        return Err(Error::Config("Ramsey grid is empty".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config("Ramsey grid must be strictly increasing".into()));
    }
    if grid.iter().any(|t| *t < GRID_RANGE_NS.0 || *t > GRID_RANGE_NS.1) {
        return Err(Error::Config(format!(
            "Ramsey delays must lie within [{}, {}] ns",
            GRID_RANGE_NS.0, GRID_RANGE_NS.1
        )));
    }
    let p0 = exact_fringe(grid, model, pulses, opts, opts.dt_ns)?;
    if opts.check_convergence {
        let fine = exact_fringe(grid, model, pulses, opts, 0.5 * opts.dt_ns)?;
        let delta = p0.iter().zip(&fine).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if delta > CONVERGENCE_TOL {
            return Err(Error::Convergence {
                delta,
                limit: CONVERGENCE_TOL,
            });
        }
    }
    let mut rng = opts.noise_seed.map(ChaCha8Rng::seed_from_u64);
    let points = grid
        .iter()
        .zip(p0)
        .map(|(&t, p)| {
            let measured = match rng.as_mut() {
                Some(rng) => opts.counts.draw(p, rng).normalized_p0(),
                None => p,
            };
            FringePoint {
                t_es_ns: t,
                p0: measured,
                sigma_p0: opts.counts.p0_sigma(p),
            }
        })
        .collect();
    FringeSeries::new(points)
}
