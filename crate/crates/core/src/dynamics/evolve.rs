use std::f64::consts::{PI, TAU};

use serde::Serialize;

use super::integrator::rk4_step;
use super::model::{Manifold, PhysicsModel};
use super::pulse::{PulseEvent, Timeline};
use crate::error::{Error, Result};
use crate::spin::pauli::c;
use crate::spin::{BlochVector, DensityMatrix, Mat2};

/// Default integrator step: 1 ps.
pub const DEFAULT_DT_NS: f64 = 1e-3;
/// Largest change in p0 tolerated when the step is halved.
pub const CONVERGENCE_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct EvolveOptions {
    pub dt_ns: f64,
    /// Re-run at dt/2 and reject the result if p0 moves by more than
    /// [`CONVERGENCE_TOL`].
    pub check_convergence: bool,
    /// Record a trajectory sample every this many steps.
    pub trajectory_stride: Option<usize>,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            dt_ns: DEFAULT_DT_NS,
            check_convergence: false,
            trajectory_stride: None,
        }
    }
}

impl EvolveOptions {
    pub fn with_dt(dt_ns: f64) -> Self {
        Self {
            dt_ns,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub t_ns: f64,
    pub bloch: BlochVector,
    pub manifold: Manifold,
}

#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub rho_final: DensityMatrix,
    /// ⟨0|ρ_final|0⟩.
    pub p0: f64,
    pub trajectory: Option<Vec<TrajectoryPoint>>,
}

/// The spin at a point of the timeline.
#[derive(Debug, Clone, Copy)]
pub struct SpinState {
    pub rho: Mat2,
    pub t: f64,
    pub manifold: Manifold,
}

impl SpinState {
    pub fn new(rho: &DensityMatrix, t: f64) -> Self {
        Self {
            rho: *rho.matrix(),
            t,
            manifold: Manifold::Ground,
        }
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix::from_raw(self.rho)
    }
}

/// Lab-frame propagator for one timeline.
///
/// Steps lie on a grid anchored at the excitation instant, so restarting from
/// a saved [`SpinState`] at a grid node reproduces a straight run exactly.
pub struct Propagator<'a> {
    model: &'a PhysicsModel,
    pulses: Vec<PulseEvent>,
    t_x: f64,
    dt: f64,
}

impl<'a> Propagator<'a> {
    pub fn new(model: &'a PhysicsModel, timeline: &Timeline, dt_ns: f64) -> Result<Self> {
        if !(dt_ns.is_finite() && dt_ns > 0.0) {
            return Err(Error::InvalidTimeline(format!("time step must be > 0, got {dt_ns}")));
        }
        model.validate()?;
        timeline.validate(model)?;
        Ok(Self {
            model,
            pulses: timeline.microwave().copied().collect(),
            t_x: timeline.excitation_time(),
            dt: dt_ns,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Time of the `k`-th grid node.
    pub fn node(&self, k: i64) -> f64 {
        self.t_x + k as f64 * self.dt
    }

    /// Index of the last grid node at or before `t`.
    pub fn node_index_before(&self, t: f64) -> i64 {
        ((t - self.t_x) / self.dt + 1e-9).floor() as i64
    }

    /// dρ/dt = −i[H, ρ] + D(ρ) with
    /// H = π f_L σz + 2π Σ Ω(t) cos(2π f_c t + φ_c) σx.
    #[inline]
    fn rhs(&self, manifold: Manifold, t: f64, rho: &Mat2) -> Mat2 {
        let hz = PI * self.model.larmor(manifold);
        let hx = TAU * self.pulses.iter().map(|p| p.drive(t)).sum::<f64>();
        let (a, b, cc, d) = (rho[(0, 0)], rho[(0, 1)], rho[(1, 0)], rho[(1, 1)]);
        // [H, ρ] for H = [[hz, hx], [hx, -hz]].
        let c00 = (cc - b) * hx;
        let c01 = b * (2.0 * hz) + (d - a) * hx;
        let c10 = (a - d) * hx - cc * (2.0 * hz);
        let c11 = (b - cc) * hx;
        let mi = c(0.0, -1.0);
        let mut out = Mat2::new(mi * c00, mi * c01, mi * c10, mi * c11);
        if manifold == Manifold::Excited {
            // Lindblad σz at rate (Γ+γ)/2 damps coherences at Γ+γ.
            let k = self.model.transverse_rate();
            out[(0, 1)] -= b * k;
            out[(1, 0)] -= cc * k;
        }
        out
    }

    /// Integrates `state` forward to `t_to`, applying the excitation map when
    /// the excitation instant is crossed.
    pub fn advance(
        &self,
        state: &mut SpinState,
        t_to: f64,
        mut trajectory: Option<(&mut Vec<TrajectoryPoint>, usize)>,
    ) {
        let mut steps = 0usize;
        if let Some((traj, _)) = trajectory.as_mut() {
            traj.push(sample(state));
        }
        loop {
            if state.manifold == Manifold::Ground && state.t >= self.t_x && t_to > state.t {
                self.cross_excitation(state);
            }
            if state.t >= t_to {
                break;
            }
            let seg_end = match state.manifold {
                Manifold::Ground => t_to.min(self.t_x),
                Manifold::Excited => t_to,
            };
            let next_node = self.node(self.node_index_before(state.t) + 1);
            let t_next = next_node.min(seg_end);
            let h = t_next - state.t;
            let manifold = state.manifold;
            let f = |t: f64, r: &Mat2| self.rhs(manifold, t, r);
            state.rho = rk4_step(&f, state.t, &state.rho, h);
            state.t = t_next;
            steps += 1;
            if let Some((traj, stride)) = trajectory.as_mut() {
                if steps % *stride == 0 {
                    traj.push(sample(state));
                }
            }
            if state.manifold == Manifold::Ground && state.t >= self.t_x && state.t >= t_to {
                break;
            }
        }
    }

    fn cross_excitation(&self, state: &mut SpinState) {
        state.rho = *excite(&state.density(), self.model).matrix();
        state.manifold = Manifold::Excited;
    }

    /// Runs to `t_end`; the spin is in the excited manifold afterwards when
    /// `t_end` is at or past the excitation.
    pub fn finish(&self, state: &mut SpinState, t_end: f64, trajectory: Option<(&mut Vec<TrajectoryPoint>, usize)>) {
        self.advance(state, t_end, trajectory);
        if state.manifold == Manifold::Ground && state.t >= self.t_x {
            self.cross_excitation(state);
        }
    }
}

fn sample(state: &SpinState) -> TrajectoryPoint {
    TrajectoryPoint {
        t_ns: state.t,
        bloch: state.density().bloch(),
        manifold: state.manifold,
    }
}

fn run_once(
    rho: &DensityMatrix,
    timeline: &Timeline,
    model: &PhysicsModel,
    dt: f64,
    stride: Option<usize>,
) -> Result<(DensityMatrix, Option<Vec<TrajectoryPoint>>)> {
    let prop = Propagator::new(model, timeline, dt)?;
    let mut state = SpinState::new(rho, timeline.t_start);
    let mut traj = stride.map(|_| Vec::new());
    let sink = traj.as_mut().zip(stride.map(|s| s.max(1)));
    prop.finish(&mut state, timeline.t_end, sink);
    Ok((state.density(), traj))
}

/// Integrates the lab-frame master equation over the timeline.
pub fn evolve(
    rho: &DensityMatrix,
    timeline: &Timeline,
    model: &PhysicsModel,
    opts: &EvolveOptions,
) -> Result<SimOutcome> {
    let (rho_final, trajectory) = run_once(rho, timeline, model, opts.dt_ns, opts.trajectory_stride)?;
    let p0 = rho_final.p0();
    if opts.check_convergence {
        let (fine, _) = run_once(rho, timeline, model, 0.5 * opts.dt_ns, None)?;
        let delta = (fine.p0() - p0).abs();
        if !(delta <= CONVERGENCE_TOL) {
            return Err(Error::Convergence {
                delta,
                limit: CONVERGENCE_TOL,
            });
        }
    }
    Ok(SimOutcome {
        rho_final,
        p0,
        trajectory,
    })
}

/// Instantaneous orbital excitation: keeps the longitudinal Bloch component
/// and scales the transverse one by η.
pub fn excite(rho_gs: &DensityMatrix, model: &PhysicsModel) -> DensityMatrix {
    let mut m = *rho_gs.matrix();
    m[(0, 1)] *= model.eta;
    m[(1, 0)] *= model.eta;
    DensityMatrix::from_raw(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::pulse::{PulseTemplate, RotationAxis};
    use crate::spin::density_from_bloch;

    fn free_timeline(t_end: f64) -> Timeline {
        Timeline::new(vec![PulseEvent::excitation(0.0)])
            .unwrap()
            .with_span(0.0, t_end)
    }

    #[test]
    fn ground_state_is_stationary() {
        let model = PhysicsModel::default();
        let tl = Timeline::new(vec![PulseEvent::excitation(0.0)]).unwrap().with_span(-7.3, 11.0);
        let out = evolve(&DensityMatrix::ground(), &tl, &model, &EvolveOptions::default()).unwrap();
        assert!((out.p0 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn excite_scales_transverse_component() {
        let rho = density_from_bloch(BlochVector::new(1.0, 0.0, 0.5f64.min(0.0))).unwrap();
        let ideal = excite(&rho, &PhysicsModel::default());
        assert_eq!(ideal, rho);

        let erase = excite(&rho, &PhysicsModel::default().with_eta(0.0));
        assert!(erase.bloch().norm() < 1e-15);

        let tilted = density_from_bloch(BlochVector::new(0.8, 0.0, 0.5)).unwrap();
        let out = excite(&tilted, &PhysicsModel::default().with_eta(0.9)).bloch();
        assert!(out.distance(&BlochVector::new(0.72, 0.0, 0.5)) < 1e-15);
    }

    #[test]
    fn free_precession_and_decay_in_es() {
        let model = PhysicsModel::default();
        let start = density_from_bloch(BlochVector::PLUS_X).unwrap();
        for t in [0.37, 1.0, 4.2] {
            let out = evolve(&start, &free_timeline(t), &model, &EvolveOptions::default()).unwrap();
            let b = out.rho_final.bloch();
            let expected_phase = (TAU * model.f_es * t + PI).rem_euclid(TAU) - PI;
            let mut diff = (b.azimuth() - expected_phase).abs();
            diff = diff.min(TAU - diff);
            assert!(diff.to_degrees() < 0.1, "t={t}: phase off by {}°", diff.to_degrees());
            let decay = (-t / 6.0).exp();
            assert!((b.transverse() / decay - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn trajectory_records_both_manifolds() {
        let model = PhysicsModel::default();
        let tl = Timeline::new(vec![PulseEvent::excitation(0.0)]).unwrap().with_span(-1.0, 1.0);
        let opts = EvolveOptions {
            trajectory_stride: Some(100),
            ..Default::default()
        };
        let out = evolve(&density_from_bloch(BlochVector::PLUS_X).unwrap(), &tl, &model, &opts).unwrap();
        let traj = out.trajectory.unwrap();
        assert_eq!(traj.first().unwrap().manifold, Manifold::Ground);
        assert_eq!(traj.last().unwrap().manifold, Manifold::Excited);
        assert!(traj.len() >= 20);
    }

    fn readout_pulse(model: &PhysicsModel) -> PulseTemplate {
        PulseTemplate {
            target: Manifold::Excited,
            sigma: 0.5,
            truncation: 3.0,
            carrier: model.f_es,
            rabi_peak: 0.2,
            target_angle: PI / 2.0,
        }
    }

    #[test]
    fn step_size_convergence() {
        let model = PhysicsModel::default();
        let tl = Timeline::new(vec![PulseEvent::excitation(0.0), readout_pulse(&model).at(15.0, RotationAxis::Y)]).unwrap();
        let rho = density_from_bloch(BlochVector::PLUS_X).unwrap();
        let fine = EvolveOptions {
            check_convergence: true,
            ..Default::default()
        };
        evolve(&rho, &tl, &model, &fine).unwrap();
        let coarse = EvolveOptions {
            dt_ns: 0.01,
            ..fine
        };
        let err = evolve(&rho, &tl, &model, &coarse);
        assert!(matches!(err, Err(Error::Convergence { .. })), "{err:?}");
    }

    #[test]
    fn restart_from_node_matches_straight_run() {
        let model = PhysicsModel::default();
        let tl = Timeline::new(vec![PulseEvent::excitation(0.0), readout_pulse(&model).at(2.0, RotationAxis::Y)])
            .unwrap()
            .with_span(-3.0, 3.5);
        let rho = density_from_bloch(BlochVector::PLUS_X).unwrap();
        let prop = Propagator::new(&model, &tl, 1e-3).unwrap();
        let mut straight = SpinState::new(&rho, tl.t_start);
        prop.finish(&mut straight, tl.t_end, None);

        let mut split = SpinState::new(&rho, tl.t_start);
        let k = prop.node_index_before(0.4321);
        prop.advance(&mut split, prop.node(k), None);
        prop.finish(&mut split, tl.t_end, None);
        assert_eq!(straight.rho, split.rho);
    }

    #[test]
    fn rejects_bad_step() {
        let model = PhysicsModel::default();
        let opts = EvolveOptions::with_dt(0.0);
        assert!(evolve(&DensityMatrix::ground(), &free_timeline(1.0), &model, &opts).is_err());
    }
}
