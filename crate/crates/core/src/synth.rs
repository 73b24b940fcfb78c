//! Seeded synthetic evaluation logs.
//!
//! For every (query, model) pair, in query-major order, exactly four draws
//! are taken from one ChaCha8 stream: error, confidence noise, cost and
//! latency. The draw count never depends on parameter values, so changing
//! one profile does not reshuffle the others' randomness.
//!
//! Cost and latency are log-normal with the requested mean and standard
//! deviation (`σ² = ln(1 + s²/m²)`, `μ = ln m − σ²/2`); a zero spread gives
//! the mean exactly. Confidence mixes an oracle signal (1 when correct, 0
//! when wrong) with an independent uniform draw, weighted by
//! `confidence_quality`.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::records::{EvaluationLog, ModelRunRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelProfile {
    pub model_id: String,
    pub error_rate: f64,
    /// Dollars per query.
    pub cost_mean: f64,
    #[serde(default)]
    pub cost_spread: f64,
    /// Seconds per query.
    pub latency_mean: f64,
    #[serde(default)]
    pub latency_spread: f64,
    /// 0: confidence independent of correctness; 1: perfectly separating.
    pub confidence_quality: f64,
}

impl ModelProfile {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidProfile(format!("`{}`: {what}", self.model_id)));
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if self.model_id.is_empty() {
            return Err(Error::InvalidProfile("empty model_id".into()));
        }
        if !unit(self.error_rate) {
            return bad("error_rate must lie in [0, 1]");
        }
        if !unit(self.confidence_quality) {
            return bad("confidence_quality must lie in [0, 1]");
        }
        for (name, v) in [
            ("cost_mean", self.cost_mean),
            ("cost_spread", self.cost_spread),
            ("latency_mean", self.latency_mean),
            ("latency_spread", self.latency_spread),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(&format!("{name} must be finite and non-negative"));
            }
        }
        Ok(())
    }
}

/// Positive draw with the given mean and standard deviation from a standard
/// normal `z`.
fn log_normal(mean: f64, spread: f64, z: f64) -> f64 {
    if mean == 0.0 || spread == 0.0 {
        return mean;
    }
    let sigma2 = (1.0 + (spread / mean).powi(2)).ln();
    let mu = mean.ln() - sigma2 / 2.0;
    (mu + sigma2.sqrt() * z).exp()
}

/// Dense log of `n_queries` queries (`q00000`, `q00001`, …) answered by
/// every profile. Identical inputs give a bit-identical log.
pub fn generate(profiles: &[ModelProfile], n_queries: usize, seed: u64) -> Result<EvaluationLog> {
    if n_queries == 0 {
        return Err(Error::InvalidProfile("n_queries must be at least 1".into()));
    }
    if profiles.is_empty() {
        return Err(Error::InvalidProfile("no model profiles".into()));
    }
    let mut ids = BTreeSet::new();
    for p in profiles {
        p.validate()?;
        if !ids.insert(p.model_id.as_str()) {
            return Err(Error::InvalidProfile(format!("duplicate model_id `{}`", p.model_id)));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(n_queries * profiles.len());
    for q in 0..n_queries {
        let query_id = format!("q{q:05}");
        for p in profiles {
            let u_error: f64 = rng.gen();
            let u_conf: f64 = rng.gen();
            let z_cost: f64 = rng.sample(StandardNormal);
            let z_latency: f64 = rng.sample(StandardNormal);
            let is_error = u_error < p.error_rate;
            let oracle = if is_error { 0.0 } else { 1.0 };
            let confidence = p.confidence_quality * oracle + (1.0 - p.confidence_quality) * u_conf;
            records.push(
                ModelRunRecord::new(
                    &query_id,
                    &p.model_id,
                    is_error,
                    log_normal(p.cost_mean, p.cost_spread, z_cost),
                    log_normal(p.latency_mean, p.latency_spread, z_latency),
                )
                .with_confidence(confidence.clamp(0.0, 1.0)),
            );
        }
    }
    EvaluationLog::from_records(records)
}
