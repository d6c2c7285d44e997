//! Qubit states, Pauli-basis process matrices and process fidelity.

mod chi;
mod fidelity;
pub mod pauli;
pub mod random;
mod state;

pub use chi::{apply_channel, chi_ideal, ChiJson, ChiMatrix, Mat4, HERMITIAN_TOL, PSD_TOL, TP_TOL};
pub use fidelity::{optimize_phi, process_fidelity, PhiOptimum};
pub use pauli::{Mat2, C64};
pub use state::{density_from_bloch, BlochVector, DensityMatrix, STATE_TOL};
