//! Single-qubit process tomography across the optical excitation: the
//! 12-measurement protocol, linear inversion, maximum-likelihood projection,
//! shot-noise errors and the extrapolation of F(t_es).

mod curve;
mod dataset;
mod inversion;
mod mle;
mod montecarlo;
mod protocol;

pub use curve::{
    analyze_dataset, fidelity_curve, ChiReport, CurveOptions, CurvePoint, FidelityCurve, QptAnalysis,
    EXTRAPOLATION_NOTE,
};
pub use dataset::{MeasAxis, Prep, QptDataset, QptEntry, EXPECTATION_SLACK};
pub use inversion::{expectations_to_chi, predicted_outputs, ptm_from_outputs};
pub use mle::{
    chi_from_params, enforce_trace_preservation, mle_cost, mle_project, params_from_chi, psd_projection, MleOptions,
    MleResult, DEFAULT_RESTARTS, LAMBDA_TP,
};
pub use montecarlo::{monte_carlo_errors, McErrors, MAX_FAILURE_FRACTION, MIN_REPLICAS};
pub use protocol::{
    build_protocol, channel_p0, dataset_from_p0, simulate_dataset, simulate_p0, synthetic_dataset, ProtocolOptions,
    ProtocolStep, SimulationOptions,
};
