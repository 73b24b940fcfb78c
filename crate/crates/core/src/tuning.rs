//! Cascade threshold tuning by exhaustive search over a confidence grid.
//!
//! Expected reward is a step function of the thresholds, so the search
//! simply evaluates every grid combination on the training log and keeps
//! the best. Exact ties go to the lower deferral rate, then to the
//! lexicographically smaller threshold vector.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::records::{split, EvaluationLog, SplitSpec};
use crate::reward::{expected_reward, per_query_reward, EconomicScenario, RewardSummary};
use crate::scalar::Scalar;
use crate::system::{answering_stage, cascade_outcome, resolve_cascade, CandidateSystem};

/// Upper bound on the number of threshold combinations `tune` will visit.
pub const MAX_GRID_COMBINATIONS: u128 = 1_000_000;

/// Nearest-rank (inclusive) empirical quantiles at `0, step, 2·step, …, 1`,
/// plus the "always answer" threshold 0 and, when every confidence is below
/// 1, the "always defer" threshold 1. Sorted and deduplicated.
///
/// The nearest-rank quantile at level `p` of `n` sorted values is the value
/// at 1-based rank `max(1, ceil(p·n))`.
pub fn quantile_grid<T: Scalar>(confidences: &[T], step: f64) -> Result<Vec<T>> {
    if confidences.is_empty() {
        return Err(Error::InvalidGrid("no confidences to take quantiles of".into()));
    }
    if !(step > 0.0 && step <= 0.5) {
        return Err(Error::InvalidGrid(format!("quantile step must lie in (0, 0.5], got {step}")));
    }
    let mut sorted = confidences.to_vec();
    if sorted.iter().any(|c| !c.is_finite_value()) {
        return Err(Error::NonFinite("confidences".into()));
    }
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = sorted.len();

    let mut ranks = Vec::new();
    let inverse = 1.0 / step;
    if (inverse - inverse.round()).abs() < 1e-9 {
        // step = 1/m: integer rank arithmetic, no rounding drift
        let m = inverse.round() as usize;
        ranks.extend((0..=m).map(|k| (k * n).div_ceil(m)));
    } else {
        let mut k = 0usize;
        while k as f64 * step <= 1.0 {
            ranks.push((k as f64 * step * n as f64 - 1e-9).ceil().max(0.0) as usize);
            k += 1;
        }
        ranks.push(n);
    }

    let mut grid: Vec<T> = ranks.into_iter().map(|r| sorted[r.max(1) - 1]).collect();
    grid.push(T::zero());
    if sorted[n - 1] < T::one() {
        grid.push(T::one());
    }
    sort_dedup(&mut grid);
    Ok(grid)
}

fn sort_dedup<T: Scalar>(values: &mut Vec<T>) {
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    values.dedup();
}

/// Candidate thresholds for each non-final cascade stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdGrid<T = f64> {
    stage_grids: Vec<Vec<T>>,
}

impl<T: Scalar> ThresholdGrid<T> {
    /// Accepts explicit per-stage grids; each must be non-empty, strictly
    /// ascending and within [0, 1].
    pub fn new(stage_grids: Vec<Vec<T>>) -> Result<Self> {
        if stage_grids.is_empty() {
            return Err(Error::InvalidGrid("no stages".into()));
        }
        for (stage, g) in stage_grids.iter().enumerate() {
            if g.is_empty() {
                return Err(Error::InvalidGrid(format!("stage {stage} grid is empty")));
            }
            for &t in g {
                if !t.is_finite_value() || t < T::zero() || t > T::one() {
                    return Err(Error::InvalidThreshold {
                        stage,
                        value: t.to_f64_lossy(),
                    });
                }
            }
            if g.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidGrid(format!(
                    "stage {stage} grid must be strictly ascending"
                )));
            }
        }
        Ok(Self { stage_grids })
    }

    /// Quantile grid of each non-final stage model's confidences on `log`.
    pub fn quantiles(log: &EvaluationLog<T>, chain: &[String], step: f64) -> Result<Self> {
        Self::per_stage(log, chain, |c| quantile_grid(c, step))
    }

    /// Every distinct observed confidence plus the two sentinels: reaches
    /// every deferral set a threshold can induce.
    pub fn full_resolution(log: &EvaluationLog<T>, chain: &[String]) -> Result<Self> {
        Self::per_stage(log, chain, |c| {
            let mut grid = c.to_vec();
            grid.push(T::zero());
            if c.iter().all(|&v| v < T::one()) {
                grid.push(T::one());
            }
            sort_dedup(&mut grid);
            Ok(grid)
        })
    }

    fn per_stage(
        log: &EvaluationLog<T>,
        chain: &[String],
        build: impl Fn(&[T]) -> Result<Vec<T>>,
    ) -> Result<Self> {
        let zeros = vec![T::zero(); chain.len().saturating_sub(1)];
        let positions = resolve_cascade(log, chain, &zeros)?;
        let grids = positions[..positions.len() - 1]
            .iter()
            .map(|&m| {
                let confs: Vec<T> = (0..log.n_queries())
                    .map(|q| log.record(q, m).confidence.expect("checked by resolve"))
                    .collect();
                build(&confs)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(grids)
    }

    pub fn stage_grids(&self) -> &[Vec<T>] {
        &self.stage_grids
    }

    /// Number of threshold combinations.
    pub fn size(&self) -> u128 {
        self.stage_grids.iter().map(|g| g.len() as u128).product()
    }

    /// All combinations in lexicographic order.
    pub fn combinations(&self) -> impl Iterator<Item = Vec<T>> + '_ {
        let mut odometer = vec![0usize; self.stage_grids.len()];
        let mut done = false;
        std::iter::from_fn(move || {
            if done {
                return None;
            }
            let current = odometer
                .iter()
                .zip(&self.stage_grids)
                .map(|(&i, g)| g[i])
                .collect();
            done = true;
            for stage in (0..odometer.len()).rev() {
                odometer[stage] += 1;
                if odometer[stage] < self.stage_grids[stage].len() {
                    done = false;
                    break;
                }
                odometer[stage] = 0;
            }
            Some(current)
        })
    }
}

/// Result of tuning a cascade's thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct TunedCascade<T = f64> {
    pub cascade: CandidateSystem<T>,
    pub train_reward: T,
    /// Filled in once the frozen thresholds are scored on held-out data.
    pub test_reward: Option<T>,
    /// Fraction of training queries the first model deferred.
    pub deferral_rate: T,
}

impl<T: Scalar> TunedCascade<T> {
    pub fn thresholds(&self) -> &[T] {
        match &self.cascade {
            CandidateSystem::Cascade { thresholds, .. } => thresholds,
            _ => unreachable!("tuned systems are cascades"),
        }
    }
}

/// Evaluates every grid combination on `train_log` and returns the
/// reward-maximizing thresholds.
pub fn tune<T: Scalar>(
    train_log: &EvaluationLog<T>,
    chain: &[String],
    grid: &ThresholdGrid<T>,
    scenario: &EconomicScenario<T>,
) -> Result<TunedCascade<T>> {
    if grid.stage_grids().len() + 1 != chain.len() {
        return Err(Error::InvalidGrid(format!(
            "grid has {} stages but the chain has {} models",
            grid.stage_grids().len(),
            chain.len()
        )));
    }
    let size = grid.size();
    if size > MAX_GRID_COMBINATIONS {
        return Err(Error::GridTooLarge {
            size,
            limit: MAX_GRID_COMBINATIONS,
        });
    }
    scenario.validate()?;
    let first: Vec<T> = grid.stage_grids().iter().map(|g| g[0]).collect();
    let positions = resolve_cascade(train_log, chain, &first)?;

    // A query's outcome depends only on which stage answers it, so score
    // each (query, stage) pair once and reuse it for every combination.
    let n = train_log.n_queries();
    if n == 0 {
        return Err(Error::EmptyOutcomes);
    }
    let mut stage_rewards = Vec::with_capacity(n);
    for q in 0..n {
        let row = (0..positions.len())
            .map(|s| per_query_reward(&cascade_outcome(train_log, &positions[..=s], q), scenario))
            .collect::<Result<Vec<T>>>()?;
        stage_rewards.push(row);
    }
    let count = T::from_count(n);

    let mut best: Option<(T, T, Vec<T>)> = None;
    for thresholds in grid.combinations() {
        let mut sum = T::zero();
        let mut deferred = 0usize;
        for (q, row) in stage_rewards.iter().enumerate() {
            let stage = answering_stage(train_log, &positions, &thresholds, q);
            sum = sum + row[stage];
            deferred += usize::from(stage > 0);
        }
        let reward = sum / count;
        let deferral = T::from_count(deferred) / count;
        let better = match &best {
            None => true,
            Some((r, d, _)) => reward > *r || (reward == *r && deferral < *d),
        };
        if better {
            best = Some((reward, deferral, thresholds));
        }
    }
    let (train_reward, deferral_rate, thresholds) = best.ok_or(Error::EmptyOutcomes)?;
    Ok(TunedCascade {
        cascade: CandidateSystem::Cascade {
            chain: chain.to_vec(),
            thresholds,
        },
        train_reward,
        test_reward: None,
        deferral_rate,
    })
}

/// Scores frozen thresholds on held-out queries.
pub fn evaluate_tuned<T: Scalar>(
    test_log: &EvaluationLog<T>,
    tuned: &TunedCascade<T>,
    scenario: &EconomicScenario<T>,
) -> Result<RewardSummary<T>> {
    let outcomes = tuned.cascade.realize(test_log)?;
    expected_reward(&outcomes, scenario)
}

/// Splits `log`, tunes on the train side with a quantile grid of the given
/// step, and scores the result on the test side.
pub fn tune_on_split<T: Scalar>(
    log: &EvaluationLog<T>,
    split_spec: SplitSpec,
    chain: &[String],
    step: f64,
    scenario: &EconomicScenario<T>,
) -> Result<TunedCascade<T>> {
    let (train, test) = split(log, split_spec)?;
    let grid = ThresholdGrid::quantiles(&train, chain, step)?;
    let mut tuned = tune(&train, chain, &grid, scenario)?;
    tuned.test_reward = Some(evaluate_tuned(&test, &tuned, scenario)?.mean_reward);
    Ok(tuned)
}
