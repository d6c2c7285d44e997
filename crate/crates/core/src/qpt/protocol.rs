use rand::Rng;

use super::dataset::{MeasAxis, Prep, QptDataset, QptEntry};
use crate::dynamics::{
    evolve, readout_weighted, CountModel, EvolveOptions, PhysicsModel, PulseEvent, PulseLibrary, RotationAxis,
    Timeline, DEFAULT_DT_NS,
};
use crate::error::{Error, Result};
use crate::spin::{apply_channel, density_from_bloch, ChiMatrix, DensityMatrix};

/// One cell of the 4 × 3 protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolStep {
    pub prep: Prep,
    pub axis: MeasAxis,
    pub timeline: Timeline,
}

/// Readout-pulse placement rules.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ProtocolOptions {
    /// Permit readout pulses centered before the excitation (control runs).
    pub allow_pre_excitation: bool,
}

/// Preparation pulse ending `prep_gap_ns` before the excitation at 0.
fn prep_pulse(prep: Prep, pulses: &PulseLibrary) -> Option<PulseEvent> {
    let (template, axis) = match prep {
        Prep::PlusZ => return None,
        Prep::X => (&pulses.gs_half_pi, RotationAxis::Y),
        Prep::Y => (&pulses.gs_half_pi, RotationAxis::MinusX),
        Prep::MinusZ => (&pulses.gs_three_pi, RotationAxis::MinusX),
    };
    Some(template.at(-pulses.config.prep_gap_ns - template.half_width(), axis))
}

fn readout_pulse(axis: MeasAxis, pulses: &PulseLibrary, t_es: f64) -> Option<PulseEvent> {
    match axis {
        MeasAxis::X => Some(pulses.es_half_pi.at(t_es, RotationAxis::Y)),
        MeasAxis::Y => Some(pulses.es_half_pi.at(t_es, RotationAxis::MinusX)),
        MeasAxis::Z => None,
    }
}

/// The twelve timelines for a readout delay `t_es`. Every cell is read out at
/// the same instant, the end of the readout-pulse window.
pub fn build_protocol(t_es: f64, pulses: &PulseLibrary, opts: ProtocolOptions) -> Result<Vec<ProtocolStep>> {
    if !t_es.is_finite() {
        return Err(Error::InvalidTimeline("t_es must be finite".into()));
    }
    if t_es < 0.0 && !opts.allow_pre_excitation {
        return Err(Error::InvalidTimeline(format!(
            "readout pulse at {t_es} ns precedes the excitation; flag it as a control run"
        )));
    }
    let es = &pulses.es_half_pi;
    if t_es.abs() < es.sigma {
        return Err(Error::InvalidTimeline(format!(
            "readout pulse at {t_es} ns overlaps the excitation within one sigma ({} ns)",
            es.sigma
        )));
    }
    let t_read = t_es + es.half_width();
    let mut steps = Vec::with_capacity(12);
    for prep in Prep::ALL {
        for axis in MeasAxis::ALL {
            let mut events = vec![PulseEvent::excitation(0.0)];
            events.extend(prep_pulse(prep, pulses));
            events.extend(readout_pulse(axis, pulses, t_es));
            let timeline = Timeline::new(events)?.with_span(0.0, t_read.max(0.0));
            steps.push(ProtocolStep { prep, axis, timeline });
        }
    }
    Ok(steps)
}

/// How simulated datasets turn p0 into recorded counts.
#[derive(Debug, Clone)]
pub struct SimulationOptions {
    pub dt_ns: f64,
    pub counts: CountModel,
    pub protocol: ProtocolOptions,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self {
            dt_ns: DEFAULT_DT_NS,
            counts: CountModel::default(),
            protocol: ProtocolOptions::default(),
        }
    }
}

/// Exact p0 for every protocol cell, in `build_protocol` order.
pub fn simulate_p0(t_es: f64, model: &PhysicsModel, pulses: &PulseLibrary, opts: &SimulationOptions) -> Result<Vec<(Prep, MeasAxis, f64)>> {
    let evolve_opts = EvolveOptions::with_dt(opts.dt_ns);
    build_protocol(t_es, pulses, opts.protocol)?
        .into_iter()
        .map(|step| {
            let out = evolve(&DensityMatrix::ground(), &step.timeline, model, &evolve_opts)?;
            let elapsed = step.timeline.t_end - step.timeline.excitation_time();
            Ok((step.prep, step.axis, readout_weighted(&out.rho_final, model, elapsed)))
        })
        .collect()
}

/// Assembles a dataset from exact p0 values. Without an RNG the expectations
/// are exact and the counts are their rounded means; with one, counts are
/// Poisson draws and the expectations follow from them.
pub fn dataset_from_p0<R: Rng + ?Sized>(
    t_es: f64,
    p0: &[(Prep, MeasAxis, f64)],
    counts: &CountModel,
    rng: Option<&mut R>,
) -> Result<QptDataset> {
    let entries = match rng {
        Some(rng) => p0
            .iter()
            .map(|&(prep, axis, p)| QptEntry::from_counts(prep, axis, counts.draw(p, rng)))
            .collect(),
        None => p0
            .iter()
            .map(|&(prep, axis, p)| {
                let c = counts.expected(p);
                QptEntry {
                    prep,
                    axis,
                    expectation: axis.readout_sign() * (2.0 * p - 1.0),
                    counts_signal: c.signal,
                    counts_ref_hi: c.ref_hi,
                    counts_ref_lo: c.ref_lo,
                }
            })
            .collect(),
    };
    QptDataset::new(t_es, entries)
}

/// Full pulse-level simulation of the protocol at one readout delay.
pub fn simulate_dataset<R: Rng + ?Sized>(
    t_es: f64,
    model: &PhysicsModel,
    pulses: &PulseLibrary,
    opts: &SimulationOptions,
    rng: Option<&mut R>,
) -> Result<QptDataset> {
    let p0 = simulate_p0(t_es, model, pulses, opts)?;
    dataset_from_p0(t_es, &p0, &opts.counts, rng)
}

/// p0 the protocol would record for an ideal-pulse process χ.
pub fn channel_p0(chi: &ChiMatrix) -> Result<Vec<(Prep, MeasAxis, f64)>> {
    let mut out = Vec::with_capacity(12);
    for prep in Prep::ALL {
        let rho = apply_channel(chi, &density_from_bloch(prep.bloch())?);
        let b = rho.bloch().as_array();
        for axis in MeasAxis::ALL {
            out.push((prep, axis, 0.5 * (1.0 + axis.readout_sign() * b[axis.index()])));
        }
    }
    Ok(out)
}

/// Dataset for a known process with ideal preparation and readout.
pub fn synthetic_dataset<R: Rng + ?Sized>(
    chi: &ChiMatrix,
    t_es: f64,
    counts: &CountModel,
    rng: Option<&mut R>,
) -> Result<QptDataset> {
    dataset_from_p0(t_es, &channel_p0(chi)?, counts, rng)
}
