//! Analyses built on top of expected rewards: price sweeps, crossovers,
//! cascade error decomposition and price-of-error estimation.

pub mod crossover;
pub mod decomposition;
pub mod grid;
pub mod poe;

pub use crossover::{
    critical_price_of_error, crossover, scan_crossover, sign_changes, CrossoverReport, CrossoverScan,
    RewardLine, SignChange,
};
pub use decomposition::{
    cascade_error_reduction, cer_vs_threshold_curve, decompose_cascade_error, flag_covariance,
    CascadeDecomposition, CerPoint,
};
pub use grid::{
    log_spaced, sensitivity_grid, CandidateScore, GridCell, GridReport, GridTuning, ScenarioGrid,
};
pub use poe::{estimate_price_of_error, PriceOfErrorInputs};
