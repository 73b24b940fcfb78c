//! Randomized self-checks of the identities the analyses rely on:
//! the cascade error decomposition, reward maximizers lying on the Pareto
//! frontier, and dominance implying a reward gap.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{decompose_cascade_error, log_spaced};
use crate::error::Result;
use crate::pareto::{verify_lambda_to_pareto, verify_reward_dominance_implication, ObjectivePoint};
use crate::synth::{generate, ModelProfile};
use crate::system::realize_cascade;
use crate::tuning::ThresholdGrid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckConfig {
    pub seed: u64,
    pub instances: usize,
    /// Queries per synthetic cascade log.
    pub n_queries: usize,
}

impl CheckConfig {
    pub fn new(seed: u64, instances: usize) -> Self {
        Self {
            seed,
            instances,
            n_queries: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionCheck {
    pub cascades_checked: usize,
    pub thresholds_checked: usize,
    pub violations: usize,
    pub max_abs_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierCheck {
    pub instances: usize,
    pub lambda_samples: usize,
    pub violations: usize,
    /// Share of frontier points selected by at least one price vector.
    pub mean_coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceCheck {
    pub instances: usize,
    pub dominating_pairs: usize,
    pub witnessed: usize,
    pub unsupported: usize,
    pub inconsistencies: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub config: CheckConfig,
    pub cascade_decomposition: DecompositionCheck,
    pub reward_maximizers_on_frontier: FrontierCheck,
    pub dominance_implies_reward_gap: DominanceCheck,
}

impl CheckReport {
    pub fn violations(&self) -> usize {
        self.cascade_decomposition.violations
            + self.reward_maximizers_on_frontier.violations
            + self.dominance_implies_reward_gap.inconsistencies
    }
}

fn random_profile(rng: &mut impl Rng, id: &str) -> ModelProfile {
    ModelProfile {
        model_id: id.into(),
        error_rate: rng.gen_range(0.0..0.6),
        cost_mean: rng.gen_range(0.0001..0.05),
        cost_spread: rng.gen_range(0.0..0.01),
        latency_mean: rng.gen_range(0.1..10.0),
        latency_spread: rng.gen_range(0.0..2.0),
        confidence_quality: rng.gen_range(0.0..=1.0),
    }
}

fn random_points(rng: &mut impl Rng, n: usize, d: usize, prefix: &str) -> Vec<ObjectivePoint> {
    (0..n)
        .map(|i| {
            let values = (0..d).map(|_| rng.gen_range(0.0..1.0)).collect();
            ObjectivePoint::new(format!("{prefix}{i}"), values)
        })
        .collect()
}

/// Log-uniform price vector in [1e-4, 1e4]^d.
fn random_lambda(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| 10f64.powf(rng.gen_range(-4.0..4.0))).collect()
}

pub fn check_decomposition(config: &CheckConfig) -> Result<DecompositionCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let chain = vec!["small".to_string(), "big".to_string()];
    let mut report = DecompositionCheck {
        cascades_checked: 0,
        thresholds_checked: 0,
        violations: 0,
        max_abs_gap: 0.0,
    };
    for _ in 0..config.instances {
        let profiles = [random_profile(&mut rng, "small"), random_profile(&mut rng, "big")];
        let log = generate(&profiles, config.n_queries, rng.gen())?;
        let grid = ThresholdGrid::full_resolution(&log, &chain)?;
        for &t in &grid.stage_grids()[0] {
            let outcomes = realize_cascade(&log, &chain, &[t])?;
            let d = decompose_cascade_error(&outcomes, &log, "small", "big")?;
            let gap = (d.observed_error - d.reconstructed_error).abs();
            report.max_abs_gap = report.max_abs_gap.max(gap);
            report.violations += usize::from(gap > 1e-12);
            report.thresholds_checked += 1;
        }
        report.cascades_checked += 1;
    }
    Ok(report)
}

pub fn check_frontier(config: &CheckConfig) -> Result<FrontierCheck> {
    const SAMPLES: usize = 50;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_0001);
    let mut report = FrontierCheck {
        instances: config.instances,
        lambda_samples: SAMPLES,
        violations: 0,
        mean_coverage: 0.0,
    };
    let mut coverage = 0.0;
    for _ in 0..config.instances {
        let n = rng.gen_range(1..=20);
        let points = random_points(&mut rng, n, 3, "c");
        let lambdas: Vec<Vec<f64>> = (0..SAMPLES).map(|_| random_lambda(&mut rng, 2)).collect();
        let r = verify_lambda_to_pareto(&points, &lambdas)?;
        report.violations += r.violations.len();
        coverage += r.reached.len() as f64 / (r.reached.len() + r.unreached.len()) as f64;
    }
    if config.instances > 0 {
        report.mean_coverage = coverage / config.instances as f64;
    }
    Ok(report)
}

pub fn check_dominance(config: &CheckConfig) -> Result<DominanceCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_0002);
    let lambdas: Vec<Vec<f64>> = log_spaced(1e-4, 1e4, 100)?.into_iter().map(|l| vec![l]).collect();
    let mut report = DominanceCheck {
        instances: config.instances,
        dominating_pairs: 0,
        witnessed: 0,
        unsupported: 0,
        inconsistencies: 0,
    };
    for _ in 0..config.instances {
        let n1 = rng.gen_range(1..=10);
        let n2 = rng.gen_range(1..=10);
        let first = random_points(&mut rng, n1, 2, "a");
        let second = random_points(&mut rng, n2, 2, "b");
        let r = verify_reward_dominance_implication(&first, &second, &lambdas)?;
        report.dominating_pairs += r.pairs.len();
        report.witnessed += r.witnessed;
        report.unsupported += r.unsupported;
        report.inconsistencies += r.inconsistencies;
    }
    Ok(report)
}

pub fn run_checks(config: &CheckConfig) -> Result<CheckReport> {
    Ok(CheckReport {
        config: *config,
        cascade_decomposition: check_decomposition(config)?,
        reward_maximizers_on_frontier: check_frontier(config)?,
        dominance_implies_reward_gap: check_dominance(config)?,
    })
}
