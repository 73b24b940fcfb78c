//! Economic evaluation of LLM systems.
//!
//! Per-query evaluation logs are scored under a scenario of dollar prices
//! for cost, latency, errors, abstentions and custom metrics. On top of
//! that sit cascade threshold tuning, price-sensitivity grids, crossover
//! prices, cascade error decomposition and Pareto frontiers.
//!
//! Numeric code is generic over [`scalar::Scalar`]; the types default to
//! `f64`, and `num_rational::Ratio<i128>` gives exact arithmetic.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod pareto;
pub mod records;
pub mod reward;
pub mod scalar;
pub mod synth;
pub mod system;
pub mod tuning;
pub mod units;
pub mod verify;

pub use error::{Error, ErrorKind, Result};
pub use records::{EvaluationLog, ModelRunRecord};
pub use reward::{expected_reward, EconomicScenario, RewardSummary};
pub use system::{Candidate, CandidateSystem, QueryOutcome};
