//! Critical price of error between two systems.
//!
//! With thresholds fixed, a system's expected reward is affine in the price
//! of error: `R(λ_E) = -K - λ_E·e`, where `K` collects every other dollar
//! term. Two such lines cross at most once.

use serde::{Deserialize, Serialize};

use super::grid::{GridTuning, Scorer};
use crate::error::{Error, Result};
use crate::records::EvaluationLog;
use crate::reward::{expected_reward, EconomicScenario};
use crate::scalar::{rate, Scalar};
use crate::system::Candidate;

/// A fixed system reduced to its reward line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardLine<T = f64> {
    pub id: String,
    /// Expected dollars per query excluding errors, `-R(0)`.
    pub base_cost: T,
    pub error_rate: T,
}

impl<T: Scalar> RewardLine<T> {
    /// `scenario.price_of_error` is ignored; every other price enters the
    /// base cost.
    pub fn of(candidate: &Candidate<T>, log: &EvaluationLog<T>, scenario: &EconomicScenario<T>) -> Result<Self> {
        let outcomes = candidate.system.realize(log)?;
        let at_zero = scenario.clone().with_error(T::zero());
        Ok(Self {
            id: candidate.id.clone(),
            base_cost: -expected_reward(&outcomes, &at_zero)?.mean_reward,
            error_rate: rate(outcomes.iter().map(|o| o.is_error)).ok_or(Error::EmptyOutcomes)?,
        })
    }

    pub fn reward(&self, price_of_error: T) -> T {
        -self.base_cost - price_of_error * self.error_rate
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossoverReport<T = f64> {
    /// The system with the lower base cost, which wins at `λ_E = 0`.
    pub lower_cost: RewardLine<T>,
    pub other: RewardLine<T>,
    /// Price of error above which `other` wins; `None` when the lower-cost
    /// system is also at least as accurate.
    pub critical: Option<T>,
}

/// Closed-form crossover of two reward lines.
///
/// The lower-cost line is `A` (on equal cost, the less accurate one). The
/// crossover is `(K_B − K_A) / (e_A − e_B)`, or `None` if `e_A ≤ e_B`.
pub fn crossover<T: Scalar>(x: &RewardLine<T>, y: &RewardLine<T>) -> Result<CrossoverReport<T>> {
    for line in [x, y] {
        if !line.base_cost.is_finite_value() || !line.error_rate.is_finite_value() {
            return Err(Error::NonFinite(format!("reward line of `{}`", line.id)));
        }
    }
    if x.base_cost == y.base_cost && x.error_rate == y.error_rate {
        return Err(Error::IndistinguishableSystems(x.id.clone(), y.id.clone()));
    }
    let x_first = x.base_cost < y.base_cost || (x.base_cost == y.base_cost && x.error_rate > y.error_rate);
    let (a, b) = if x_first { (x, y) } else { (y, x) };
    let critical = (a.error_rate > b.error_rate)
        .then(|| (b.base_cost - a.base_cost) / (a.error_rate - b.error_rate));
    Ok(CrossoverReport {
        lower_cost: a.clone(),
        other: b.clone(),
        critical,
    })
}

/// Crossover of two fixed systems on `log`, with the remaining prices (in
/// particular the price of latency) taken from `scenario`.
pub fn critical_price_of_error<T: Scalar>(
    a: &Candidate<T>,
    b: &Candidate<T>,
    log: &EvaluationLog<T>,
    scenario: &EconomicScenario<T>,
) -> Result<CrossoverReport<T>> {
    crossover(&RewardLine::of(a, log, scenario)?, &RewardLine::of(b, log, scenario)?)
}

/// Grid interval `[lo, hi]` across which the winner changes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignChange<T = f64> {
    pub lo: T,
    pub hi: T,
}

/// Intervals between consecutive grid points where `diffs` changes strict
/// sign. Points with a zero difference are skipped, so a touch without a
/// crossing is not reported.
pub fn sign_changes<T: Scalar>(prices: &[T], diffs: &[T]) -> Result<Vec<SignChange<T>>> {
    if prices.len() != diffs.len() {
        return Err(Error::LengthMismatch {
            left: prices.len(),
            right: diffs.len(),
        });
    }
    let mut changes = Vec::new();
    let mut last: Option<(T, bool)> = None;
    for (&p, &d) in prices.iter().zip(diffs) {
        if d == T::zero() {
            continue;
        }
        let positive = d > T::zero();
        if let Some((lo, was_positive)) = last {
            if positive != was_positive {
                changes.push(SignChange { lo, hi: p });
            }
        }
        last = Some((p, positive));
    }
    Ok(changes)
}

/// Scan of the reward difference `R_a − R_b` over a price-of-error grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossoverScan<T = f64> {
    pub a: String,
    pub b: String,
    pub error_prices: Vec<T>,
    pub reward_difference: Vec<T>,
    pub sign_changes: Vec<SignChange<T>>,
    /// The first sign change, if any.
    pub critical: Option<SignChange<T>>,
}

/// Reward difference over `error_prices`, re-tuning cascades at every point
/// when `tuning` is given. With re-tuning the difference is only piecewise
/// affine and may change sign more than once; every change is reported.
pub fn scan_crossover<T: Scalar>(
    a: &Candidate<T>,
    b: &Candidate<T>,
    log: &EvaluationLog<T>,
    error_prices: &[T],
    scenario: &EconomicScenario<T>,
    tuning: Option<&GridTuning>,
) -> Result<CrossoverScan<T>> {
    if error_prices.is_empty() {
        return Err(Error::InvalidGrid("empty price-of-error grid".into()));
    }
    let pair = [a.clone(), b.clone()];
    let scorer = Scorer::new(&pair, log, tuning)?;
    let reward_difference = error_prices
        .iter()
        .map(|&p| {
            let s = scorer.scores(&scenario.clone().with_error(p))?;
            Ok(s[0].reward - s[1].reward)
        })
        .collect::<Result<Vec<_>>>()?;
    let changes = sign_changes(error_prices, &reward_difference)?;
    Ok(CrossoverScan {
        a: a.id.clone(),
        b: b.id.clone(),
        error_prices: error_prices.to_vec(),
        reward_difference,
        critical: changes.first().copied(),
        sign_changes: changes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::grid::log_spaced;
    use crate::records::ModelRunRecord;
    use crate::system::CandidateSystem;
    use proptest::prelude::*;

    fn line(id: &str, base_cost: f64, error_rate: f64) -> RewardLine {
        RewardLine {
            id: id.into(),
            base_cost,
            error_rate,
        }
    }

    #[test]
    fn closed_form_example() {
        let r = crossover(&line("b", 0.05, 0.1), &line("a", 0.001, 0.5)).unwrap();
        assert_eq!(r.lower_cost.id, "a");
        assert!((r.critical.unwrap() - 0.1225).abs() < 1e-15);
    }

    #[test]
    fn no_crossover_when_cheaper_is_as_accurate() {
        let r = crossover(&line("a", 0.001, 0.2), &line("b", 0.05, 0.2)).unwrap();
        assert_eq!(r.critical, None);
        let r = crossover(&line("a", 0.001, 0.1), &line("b", 0.05, 0.2)).unwrap();
        assert_eq!(r.critical, None);
    }

    #[test]
    fn identical_systems_are_an_error() {
        assert!(matches!(
            crossover(&line("a", 0.1, 0.2), &line("b", 0.1, 0.2)),
            Err(Error::IndistinguishableSystems(_, _))
        ));
    }

    #[test]
    fn equal_cost_crosses_at_zero() {
        let r = crossover(&line("a", 0.1, 0.1), &line("b", 0.1, 0.3)).unwrap();
        assert_eq!(r.lower_cost.id, "b");
        assert_eq!(r.critical, Some(0.0));
    }

    #[test]
    fn latency_enters_the_base_cost() {
        let mut records = Vec::new();
        for i in 0..4 {
            let q = format!("q{i}");
            records.push(ModelRunRecord::new(&q, "fast", i < 2, 0.01, 1.0));
            records.push(ModelRunRecord::new(&q, "slow", false, 0.01, 3.0));
        }
        let log = EvaluationLog::from_records(records).unwrap();
        let a = Candidate::new("fast", CandidateSystem::standalone("fast"));
        let b = Candidate::new("slow", CandidateSystem::standalone("slow"));
        let scenario: EconomicScenario = EconomicScenario::zero().with_latency(0.01).with_error(123.0);
        let r = critical_price_of_error(&a, &b, &log, &scenario).unwrap();
        assert_eq!(r.lower_cost.id, "fast");
        // (0.04 − 0.02) / 0.5
        assert!((r.critical.unwrap() - 0.04).abs() < 1e-15);

        let prices = log_spaced(1e-4, 1e4, 100).unwrap();
        let scan = scan_crossover(&a, &b, &log, &prices, &scenario, None).unwrap();
        assert_eq!(scan.sign_changes.len(), 1);
        let c = scan.critical.unwrap();
        assert!(c.lo <= 0.04 && 0.04 <= c.hi);
    }

    #[test]
    fn sign_change_bookkeeping() {
        let p = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(
            sign_changes(&p, &[1.0, 0.0, -1.0, -2.0, 3.0]).unwrap(),
            vec![SignChange { lo: 1.0, hi: 3.0 }, SignChange { lo: 4.0, hi: 5.0 }]
        );
        assert!(sign_changes(&p, &[1.0, 0.0, 1.0, 1.0, 1.0]).unwrap().is_empty());
        assert!(sign_changes(&p, &[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn closed_form_agrees_with_scan(
            ka in 0.0f64..1.0, kb in 0.0f64..1.0, ea in 0.0f64..1.0, eb in 0.0f64..1.0,
        ) {
            prop_assume!(ka != kb || ea != eb);
            let (a, b) = (line("a", ka, ea), line("b", kb, eb));
            let r = crossover(&a, &b).unwrap();
            let prices = log_spaced(1e-4, 1e4, 100).unwrap();
            let diffs: Vec<f64> = prices.iter().map(|&p| a.reward(p) - b.reward(p)).collect();
            let changes = sign_changes(&prices, &diffs).unwrap();
            prop_assert!(changes.len() <= 1);
            prop_assert_eq!(r.critical.is_none(), r.lower_cost.error_rate <= r.other.error_rate);
            if let Some(c) = changes.first() {
                let star: f64 = r.critical.unwrap();
                prop_assert!(c.lo <= star * (1.0 + 1e-12) && star <= c.hi * (1.0 + 1e-12));
            }
        }
    }
}
