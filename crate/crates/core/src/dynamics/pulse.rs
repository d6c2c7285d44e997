use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use super::model::{Manifold, PhysicsModel};
use crate::error::{Error, Result};

const CARRIER_MATCH_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseKind {
    Microwave,
    OpticalExcitation,
}

/// Rotation axis of a resonant pulse, as seen in the lab frame at the pulse center.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RotationAxis {
    #[serde(rename = "X")]
    X,
    #[serde(rename = "Y")]
    Y,
    #[serde(rename = "-X")]
    MinusX,
    #[serde(rename = "-Y")]
    MinusY,
}

impl RotationAxis {
    pub fn phase(&self) -> f64 {
        match self {
            RotationAxis::X => 0.0,
            RotationAxis::Y => FRAC_PI_2,
            RotationAxis::MinusX => PI,
            RotationAxis::MinusY => 3.0 * FRAC_PI_2,
        }
    }
}

/// A calibrated pulse shape that can be placed anywhere on the timeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseTemplate {
    pub target: Manifold,
    #[serde(rename = "sigma_ns")]
    pub sigma: f64,
    #[serde(rename = "truncation_sigmas")]
    pub truncation: f64,
    #[serde(rename = "carrier_ghz")]
    pub carrier: f64,
    #[serde(rename = "rabi_peak_ghz")]
    pub rabi_peak: f64,
    #[serde(rename = "target_angle_rad")]
    pub target_angle: f64,
}

impl PulseTemplate {
    pub fn half_width(&self) -> f64 {
        self.truncation * self.sigma
    }

    pub fn at(&self, center_ns: f64, axis: RotationAxis) -> PulseEvent {
        PulseEvent::microwave(self, center_ns, axis)
    }
}

/// A Gaussian microwave pulse or the instantaneous optical excitation.
///
/// The carrier phase refers to t = 0 of the global clock. Pulses built with
/// [`PulseEvent::microwave`] replay the same waveform relative to their
/// center, so a delayed copy keeps its rotation axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseEvent {
    pub kind: PulseKind,
    pub target: Manifold,
    #[serde(rename = "center_ns")]
    pub center: f64,
    #[serde(rename = "sigma_ns")]
    pub sigma: f64,
    #[serde(rename = "truncation_sigmas")]
    pub truncation: f64,
    #[serde(rename = "carrier_ghz")]
    pub carrier: f64,
    #[serde(rename = "carrier_phase_rad")]
    pub carrier_phase: f64,
    #[serde(rename = "rabi_peak_ghz")]
    pub rabi_peak: f64,
    #[serde(rename = "target_angle_rad")]
    pub target_angle: f64,
}

impl PulseEvent {
    pub fn excitation(at_ns: f64) -> Self {
        Self {
            kind: PulseKind::OpticalExcitation,
            target: Manifold::Excited,
            center: at_ns,
            sigma: 0.0,
            truncation: 0.0,
            carrier: 0.0,
            carrier_phase: 0.0,
            rabi_peak: 0.0,
            target_angle: 0.0,
        }
    }

    pub fn microwave(template: &PulseTemplate, center_ns: f64, axis: RotationAxis) -> Self {
        let carrier_phase = (axis.phase() - TAU * template.carrier * center_ns).rem_euclid(TAU);
        Self {
            kind: PulseKind::Microwave,
            target: template.target,
            center: center_ns,
            sigma: template.sigma,
            truncation: template.truncation,
            carrier: template.carrier,
            carrier_phase,
            rabi_peak: template.rabi_peak,
            target_angle: template.target_angle,
        }
    }

    pub fn is_microwave(&self) -> bool {
        self.kind == PulseKind::Microwave
    }

    /// Lab-frame azimuth of the rotation axis at the pulse center.
    pub fn axis_phase(&self) -> f64 {
        (self.carrier_phase + TAU * self.carrier * self.center).rem_euclid(TAU)
    }

    /// Support of the truncated envelope; a point for the excitation.
    pub fn window(&self) -> (f64, f64) {
        let h = self.truncation * self.sigma;
        (self.center - h, self.center + h)
    }

    /// Instantaneous Rabi frequency in GHz.
    #[inline]
    pub fn envelope(&self, t: f64) -> f64 {
        let x = (t - self.center) / self.sigma;
        if x.abs() > self.truncation {
            0.0
        } else {
            self.rabi_peak * (-0.5 * x * x).exp()
        }
    }

    /// Drive amplitude Ω(t)·cos(2π f_c t + φ_c) in GHz.
    #[inline]
    pub fn drive(&self, t: f64) -> f64 {
        let env = self.envelope(t);
        if env == 0.0 {
            0.0
        } else {
            env * (TAU * self.carrier * t + self.carrier_phase).cos()
        }
    }

    /// ∫Ω(t) dt over the truncated envelope, in cycles.
    pub fn area(&self) -> f64 {
        gaussian_area(self.rabi_peak, self.sigma, self.truncation)
    }
}

/// Area of a truncated Gaussian with unit-free peak `peak`.
pub fn gaussian_area(peak: f64, sigma: f64, truncation: f64) -> f64 {
    peak * sigma * (TAU).sqrt() * libm::erf(truncation / std::f64::consts::SQRT_2)
}

/// Ordered pulse events sharing one clock, with exactly one excitation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timeline {
    pub events: Vec<PulseEvent>,
    #[serde(rename = "t_start_ns")]
    pub t_start: f64,
    #[serde(rename = "t_end_ns")]
    pub t_end: f64,
}

impl Timeline {
    /// Sorts events by center time and spans them.
    pub fn new(mut events: Vec<PulseEvent>) -> Result<Self> {
        events.sort_by(|a, b| a.center.total_cmp(&b.center));
        let exc: Vec<_> = events.iter().filter(|e| !e.is_microwave()).collect();
        if exc.len() != 1 {
            return Err(Error::InvalidTimeline(format!(
                "expected exactly one optical excitation, found {}",
                exc.len()
            )));
        }
        let t_x = exc[0].center;
        let mut t_start = t_x;
        let mut t_end = t_x;
        for e in events.iter().filter(|e| e.is_microwave()) {
            let (a, b) = e.window();
            t_start = t_start.min(a);
            t_end = t_end.max(b);
        }
        Ok(Self {
            events,
            t_start,
            t_end,
        })
    }

    /// Widens the integration span to at least `[start, end]`.
    pub fn with_span(mut self, start: f64, end: f64) -> Self {
        self.t_start = self.t_start.min(start);
        self.t_end = self.t_end.max(end);
        self
    }

    pub fn excitation_time(&self) -> f64 {
        self.events
            .iter()
            .find(|e| !e.is_microwave())
            .map(|e| e.center)
            .expect("timeline holds one excitation")
    }

    pub fn microwave(&self) -> impl Iterator<Item = &PulseEvent> {
        self.events.iter().filter(|e| e.is_microwave())
    }

    /// Checks ordering, pulse shapes and that each pulse's carrier matches the
    /// manifold it addresses. Ground-state pulses must finish before the
    /// excitation; excited-state pulses may start early (control runs).
    pub fn validate(&self, model: &PhysicsModel) -> Result<()> {
        if self.events.windows(2).any(|w| w[0].center > w[1].center) {
            return Err(Error::InvalidTimeline("events are not sorted by center".into()));
        }
        let n_exc = self.events.iter().filter(|e| !e.is_microwave()).count();
        if n_exc != 1 {
            return Err(Error::InvalidTimeline(format!(
                "expected exactly one optical excitation, found {n_exc}"
            )));
        }
        if !(self.t_start.is_finite() && self.t_end.is_finite() && self.t_start <= self.t_end) {
            return Err(Error::InvalidTimeline(format!(
                "bad span [{}, {}]",
                self.t_start, self.t_end
            )));
        }
        let t_x = self.excitation_time();
        for e in self.microwave() {
            if !(e.sigma > 0.0 && e.truncation > 0.0) {
                return Err(Error::InvalidTimeline(format!(
                    "pulse at {} ns needs sigma > 0 and truncation > 0",
                    e.center
                )));
            }
            if !(e.rabi_peak.is_finite() && e.rabi_peak >= 0.0) {
                return Err(Error::InvalidTimeline(format!(
                    "pulse at {} ns has invalid Rabi amplitude {}",
                    e.center, e.rabi_peak
                )));
            }
            let expected = model.larmor(e.target);
            if (e.carrier - expected).abs() > CARRIER_MATCH_TOL * expected.max(1.0) {
                return Err(Error::InvalidTimeline(format!(
                    "{} pulse at {} ns uses carrier {} GHz, expected {} GHz",
                    e.target.label(),
                    e.center,
                    e.carrier,
                    expected
                )));
            }
            if e.target == Manifold::Ground && e.window().1 > t_x {
                return Err(Error::InvalidTimeline(format!(
                    "GS pulse at {} ns extends past the excitation at {} ns",
                    e.center, t_x
                )));
            }
        }
        Ok(())
    }
}
