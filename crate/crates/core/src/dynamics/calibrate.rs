use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use super::evolve::DEFAULT_DT_NS;
use super::integrator::rk4_step;
use super::model::{Manifold, PhysicsModel};
use super::pulse::{gaussian_area, PulseTemplate};
use crate::error::{Error, Result};
use crate::spin::pauli::c;
use crate::spin::Mat2;

/// Largest Rabi amplitude the calibration will consider, in GHz.
pub const MAX_RABI_GHZ: f64 = 1.0;

#[derive(Debug, Clone)]
pub struct CalibrationOptions {
    pub truncation: f64,
    pub dt_ns: f64,
    /// Stop once the rotation angle is within this many radians of target.
    pub tolerance: f64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            truncation: 3.0,
            dt_ns: DEFAULT_DT_NS,
            tolerance: 1e-7,
        }
    }
}

/// Rotation angle in [0, 4π) produced by a Gaussian pulse centered at t = 0
/// with an X-axis carrier phase, read off the SU(2) propagator in the frame
/// rotating at the carrier. The Larmor frequency is that of the manifold
/// closest to the carrier.
pub fn pulse_rotation_angle(
    rabi_peak: f64,
    sigma: f64,
    truncation: f64,
    carrier: f64,
    larmor: f64,
    dt_ns: f64,
) -> f64 {
    let half = truncation * sigma;
    let n = ((2.0 * half) / dt_ns).ceil().max(1.0) as usize;
    let h = 2.0 * half / n as f64;
    let hz = PI * larmor;
    let f = |t: f64, u: &Mat2| {
        let x = t / sigma;
        let env = if x.abs() > truncation { 0.0 } else { rabi_peak * (-0.5 * x * x).exp() };
        let hx = TAU * env * (TAU * carrier * t).cos();
        // -i H U for H = [[hz, hx], [hx, -hz]].
        let mi = c(0.0, -1.0);
        Mat2::new(
            mi * (u[(0, 0)] * hz + u[(1, 0)] * hx),
            mi * (u[(0, 1)] * hz + u[(1, 1)] * hx),
            mi * (u[(0, 0)] * hx - u[(1, 0)] * hz),
            mi * (u[(0, 1)] * hx - u[(1, 1)] * hz),
        )
    };
    let mut u = Mat2::identity();
    for i in 0..n {
        u = rk4_step(&f, -half + i as f64 * h, &u, h);
    }
    // Into the frame rotating at the carrier: R(t_end)† U R(t_start).
    let w = TAU * carrier;
    let phase_end = c(0.0, 0.5 * w * half).exp();
    let phase_start = c(0.0, 0.5 * w * half).exp();
    let r_end = Mat2::new(phase_end, c(0.0, 0.0), c(0.0, 0.0), phase_end.conj());
    let r_start = Mat2::new(phase_start, c(0.0, 0.0), c(0.0, 0.0), phase_start.conj());
    let rot = r_end * u * r_start;
    // rot = a·I − i(b·σ); the axis stays near +X so the sign of b_x tracks θ/2 past π.
    let a = 0.5 * (rot[(0, 0)] + rot[(1, 1)]).re;
    let bx = -0.5 * (rot[(0, 1)] + rot[(1, 0)]).im;
    let mut half_angle = bx.atan2(a);
    if half_angle < -1e-9 {
        half_angle += TAU;
    }
    2.0 * half_angle.max(0.0)
}

/// Peak Rabi frequency (GHz) that rotates |0⟩ by `target_angle` with a
/// resonant Gaussian pulse of width `sigma` (ns).
pub fn calibrate_pulse(target_angle: f64, sigma: f64, carrier: f64, model: &PhysicsModel) -> Result<f64> {
    calibrate_pulse_with(target_angle, sigma, carrier, model, &CalibrationOptions::default())
}

pub fn calibrate_pulse_with(
    target_angle: f64,
    sigma: f64,
    carrier: f64,
    model: &PhysicsModel,
    opts: &CalibrationOptions,
) -> Result<f64> {
    if target_angle == 0.0 {
        return Ok(0.0);
    }
    if !(target_angle > 0.0 && target_angle <= 2.0 * TAU) {
        return Err(Error::Calibration(format!(
            "target angle {target_angle} rad outside (0, 4π]"
        )));
    }
    if !(sigma > 0.0 && carrier > 0.0) {
        return Err(Error::Calibration(format!(
            "sigma ({sigma} ns) and carrier ({carrier} GHz) must be positive"
        )));
    }
    let larmor = model.larmor(model.resonant_manifold(carrier));
    let angle = |rabi: f64| pulse_rotation_angle(rabi, sigma, opts.truncation, carrier, larmor, opts.dt_ns);

    // Area theorem gives the starting bracket.
    let guess = target_angle / (TAU * gaussian_area(1.0, sigma, opts.truncation));
    let (mut lo, mut f_lo) = (0.0, -target_angle);
    let mut hi = (1.2 * guess).min(MAX_RABI_GHZ);
    let mut f_hi = angle(hi) - target_angle;
    while f_hi < 0.0 {
        if hi >= MAX_RABI_GHZ {
            return Err(Error::Calibration(format!(
                "rotation {target_angle} rad unreachable below {MAX_RABI_GHZ} GHz at sigma {sigma} ns"
            )));
        }
        lo = hi;
        f_lo = f_hi;
        hi = (hi * 1.5).min(MAX_RABI_GHZ);
        f_hi = angle(hi) - target_angle;
    }

    // Illinois regula falsi.
    let mut side = 0i8;
    for _ in 0..100 {
        let x = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        let fx = angle(x) - target_angle;
        if fx.abs() <= opts.tolerance || (hi - lo) <= 1e-15 * hi {
            return Ok(x);
        }
        if fx > 0.0 {
            hi = x;
            f_hi = fx;
            if side == 1 {
                f_lo *= 0.5;
            }
            side = 1;
        } else {
            lo = x;
            f_lo = fx;
            if side == -1 {
                f_hi *= 0.5;
            }
            side = -1;
        }
    }
    Err(Error::Calibration(format!(
        "no convergence for {target_angle} rad at sigma {sigma} ns"
    )))
}

/// Pulse widths and timing shared by the Ramsey and tomography sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PulseConfig {
    pub sigma_gs_ns: f64,
    pub sigma_es_ns: f64,
    pub truncation_sigmas: f64,
    /// Center of the Ramsey π/2 pulse in the ground state.
    pub ramsey_gs_center_ns: f64,
    /// Tomography preparation pulses end this long before the excitation.
    pub prep_gap_ns: f64,
}

impl Default for PulseConfig {
    fn default() -> Self {
        Self {
            sigma_gs_ns: 4.0,
            sigma_es_ns: 0.5,
            truncation_sigmas: 3.0,
            ramsey_gs_center_ns: -20.0,
            prep_gap_ns: 20.0,
        }
    }
}

/// Calibrated pulse templates for one physics model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseLibrary {
    pub config: PulseConfig,
    pub gs_half_pi: PulseTemplate,
    pub gs_three_pi: PulseTemplate,
    pub es_half_pi: PulseTemplate,
}

impl PulseLibrary {
    pub fn calibrate(model: &PhysicsModel, config: &PulseConfig, dt_ns: f64) -> Result<Self> {
        let opts = CalibrationOptions {
            truncation: config.truncation_sigmas,
            dt_ns,
            ..Default::default()
        };
        let make = |target: Manifold, angle: f64, sigma: f64| -> Result<PulseTemplate> {
            let carrier = model.larmor(target);
            let rabi_peak = calibrate_pulse_with(angle, sigma, carrier, model, &opts)?;
            Ok(PulseTemplate {
                target,
                sigma,
                truncation: config.truncation_sigmas,
                carrier,
                rabi_peak,
                target_angle: angle,
            })
        };
        Ok(Self {
            config: config.clone(),
            gs_half_pi: make(Manifold::Ground, FRAC_PI_2, config.sigma_gs_ns)?,
            gs_three_pi: make(Manifold::Ground, 3.0 * PI, config.sigma_gs_ns)?,
            es_half_pi: make(Manifold::Excited, FRAC_PI_2, config.sigma_es_ns)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::evolve::{evolve, EvolveOptions};
    use crate::dynamics::pulse::{PulseEvent, RotationAxis, Timeline};
    use crate::spin::DensityMatrix;

    #[test]
    fn zero_target_needs_no_drive() {
        let model = PhysicsModel::default();
        assert_eq!(calibrate_pulse(0.0, 0.5, 2.14, &model).unwrap(), 0.0);
    }

    #[test]
    fn rejects_out_of_range_targets() {
        let model = PhysicsModel::default();
        assert!(calibrate_pulse(-0.1, 0.5, 2.14, &model).is_err());
        assert!(calibrate_pulse(5.0 * PI, 0.5, 2.14, &model).is_err());
        assert!(calibrate_pulse(PI, 0.0, 2.14, &model).is_err());
        // A 4π rotation inside 60 ps would need far more than 1 GHz of drive.
        assert!(matches!(
            calibrate_pulse_with(4.0 * PI - 0.01, 0.01, 2.14, &model, &CalibrationOptions::default()),
            Err(Error::Calibration(_))
        ));
    }

    #[test]
    fn half_pi_es_pulse_closes_the_loop() {
        let model = PhysicsModel::default();
        let rabi = calibrate_pulse(FRAC_PI_2, 0.5, model.f_es, &model).unwrap();
        let angle = pulse_rotation_angle(rabi, 0.5, 3.0, model.f_es, model.f_es, DEFAULT_DT_NS);
        assert!((angle.to_degrees() - 90.0).abs() < 0.2);

        // Re-simulate on the full propagator: |0⟩ lands on the equator.
        let tpl = PulseTemplate {
            target: Manifold::Excited,
            sigma: 0.5,
            truncation: 3.0,
            carrier: model.f_es,
            rabi_peak: rabi,
            target_angle: FRAC_PI_2,
        };
        let tl = Timeline::new(vec![PulseEvent::excitation(-2.0), tpl.at(0.0, RotationAxis::Y)]).unwrap();
        let ideal = PhysicsModel {
            dephasing_rate: 0.0,
            emission_rate: 0.0,
            ..model
        };
        let out = evolve(&DensityMatrix::ground(), &tl, &ideal, &EvolveOptions::default()).unwrap();
        let b = out.rho_final.bloch();
        let polar = b.z.clamp(-1.0, 1.0).acos().to_degrees();
        assert!((polar - 90.0).abs() < 0.2, "polar angle {polar}");
    }

    #[test]
    fn slow_pulse_obeys_area_theorem() {
        let model = PhysicsModel::default();
        let sigma = 20.0;
        let rabi = calibrate_pulse(FRAC_PI_2, sigma, model.f_gs, &model).unwrap();
        let area = TAU * gaussian_area(rabi, sigma, 3.0);
        assert!((area / FRAC_PI_2 - 1.0).abs() < 0.01, "area {area}");
    }

    #[test]
    fn three_pi_pulse_tracks_past_two_pi() {
        let model = PhysicsModel::default();
        let rabi = calibrate_pulse(3.0 * PI, 4.0, model.f_gs, &model).unwrap();
        let angle = pulse_rotation_angle(rabi, 4.0, 3.0, model.f_gs, model.f_gs, DEFAULT_DT_NS);
        assert!((angle - 3.0 * PI).abs() < 1e-5);
        let half = calibrate_pulse(FRAC_PI_2, 4.0, model.f_gs, &model).unwrap();
        assert!(rabi > 5.0 * half && rabi < 7.0 * half);
    }
}
