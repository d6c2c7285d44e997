//! Small dense optimizers shared by the fitting and tomography code.

pub mod levenberg_marquardt;
pub mod nelder_mead;

pub use levenberg_marquardt::{least_squares, LmOptions, LmResult};
pub use nelder_mead::{minimize, NelderMeadOptions, NelderMeadResult};
