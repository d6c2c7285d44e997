//! Ramsey interferometry across the optical excitation: fringe simulation
//! and the decaying-oscillation fit.

mod fit;
mod fringe;

pub use fit::{
    fidelity_from_amplitude, fit_fringe, fringe_model, initial_guess, FitGuess, FitMethod, FitReport, RamseyFit,
    MIN_POINTS, PARAM_NAMES,
};
pub use fringe::{ramsey_timeline, simulate_fringe, FringeOptions, FringePoint, FringeSeries, FRINGE_HEADER, GRID_RANGE_NS};
