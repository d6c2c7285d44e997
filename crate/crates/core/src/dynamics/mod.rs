//! Lab-frame pulse-level simulation of the spin across the excitation event.

mod calibrate;
mod evolve;
pub mod integrator;
pub mod io;
mod model;
mod pulse;
mod readout;

pub use calibrate::{calibrate_pulse, calibrate_pulse_with, pulse_rotation_angle, CalibrationOptions, PulseConfig, PulseLibrary};
pub use evolve::{
    evolve, excite, EvolveOptions, Propagator, SimOutcome, SpinState, TrajectoryPoint, CONVERGENCE_TOL, DEFAULT_DT_NS,
};
pub use model::{Manifold, PhysicsModel};
pub use pulse::{gaussian_area, PulseEvent, PulseKind, PulseTemplate, RotationAxis, Timeline};
pub use readout::{readout, readout_weighted, CountModel, PhotonCounts};
