//! Per-query and expected rewards under an economic scenario.
//!
//! The reward of an outcome is the negated dollar total of its cost and
//! every priced metric:
//!
//! ```text
//! r = -(C + λ_L·L + λ_E·1[error] + λ_A·1[abstain] + Σ λ_μ·μ + Σ λ_χ·1[χ])
//! ```
//!
//! Metrics an outcome reports but the scenario does not price contribute
//! nothing. A priced metric that an outcome lacks is an error, since it
//! almost always means the scenario was written for a different log.

use std::collections::BTreeMap;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::system::QueryOutcome;

/// Prices that turn each performance metric into dollars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de>"))]
pub struct EconomicScenario<T = f64> {
    /// Dollars per error.
    pub price_of_error: T,
    /// Dollars per second of latency.
    pub price_of_latency: T,
    /// Dollars per abstention.
    pub price_of_abstention: T,
    /// Dollars per unit of each named numeric metric.
    #[serde(default)]
    pub numeric_prices: BTreeMap<String, T>,
    /// Dollars per occurrence of each named binary event.
    #[serde(default)]
    pub binary_prices: BTreeMap<String, T>,
}

impl<T: Scalar> EconomicScenario<T> {
    /// Scenario in which only inference cost matters.
    pub fn zero() -> Self {
        Self {
            price_of_error: T::zero(),
            price_of_latency: T::zero(),
            price_of_abstention: T::zero(),
            numeric_prices: BTreeMap::new(),
            binary_prices: BTreeMap::new(),
        }
    }

    pub fn with_error(mut self, price: T) -> Self {
        self.price_of_error = price;
        self
    }

    pub fn with_latency(mut self, price_per_second: T) -> Self {
        self.price_of_latency = price_per_second;
        self
    }

    pub fn with_abstention(mut self, price: T) -> Self {
        self.price_of_abstention = price;
        self
    }

    pub fn with_numeric_price(mut self, metric: impl Into<String>, price: T) -> Self {
        self.numeric_prices.insert(metric.into(), price);
        self
    }

    pub fn with_binary_price(mut self, event: impl Into<String>, price: T) -> Self {
        self.binary_prices.insert(event.into(), price);
        self
    }

    /// Every price multiplied by `k`.
    pub fn scaled(&self, k: T) -> Self {
        Self {
            price_of_error: self.price_of_error * k,
            price_of_latency: self.price_of_latency * k,
            price_of_abstention: self.price_of_abstention * k,
            numeric_prices: self.numeric_prices.iter().map(|(n, &p)| (n.clone(), p * k)).collect(),
            binary_prices: self.binary_prices.iter().map(|(n, &p)| (n.clone(), p * k)).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("price_of_error", self.price_of_error),
            ("price_of_latency", self.price_of_latency),
            ("price_of_abstention", self.price_of_abstention),
        ];
        let extra = self
            .numeric_prices
            .iter()
            .chain(&self.binary_prices)
            .map(|(n, &p)| (n.as_str(), p));
        for (name, price) in named.into_iter().chain(extra) {
            if !price.is_finite_value() || price < T::zero() {
                return Err(Error::InvalidScenario(format!(
                    "`{name}` must be finite and non-negative, got {price:?}"
                )));
            }
        }
        Ok(())
    }
}

/// Dollar amounts making up one outcome's negated reward, in fixed order.
struct Terms<T> {
    cost: T,
    latency: T,
    error: T,
    abstention: T,
    numeric: Vec<T>,
    binary: Vec<T>,
}

impl<T: Scalar> Terms<T> {
    fn of(outcome: &QueryOutcome<T>, scenario: &EconomicScenario<T>) -> Result<Self> {
        let indicator = |b: bool| if b { T::one() } else { T::zero() };
        let numeric = scenario
            .numeric_prices
            .iter()
            .map(|(name, &price)| {
                outcome
                    .numeric_metrics
                    .get(name)
                    .map(|&v| price * v)
                    .ok_or_else(|| Error::PricedMetricMissing(name.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        let binary = scenario
            .binary_prices
            .iter()
            .map(|(name, &price)| {
                outcome
                    .binary_events
                    .get(name)
                    .map(|&b| price * indicator(b))
                    .ok_or_else(|| Error::PricedMetricMissing(name.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            cost: outcome.cost_usd,
            latency: scenario.price_of_latency * outcome.latency_sec,
            error: scenario.price_of_error * indicator(outcome.is_error),
            abstention: scenario.price_of_abstention * indicator(outcome.abstained),
            numeric,
            binary,
        })
    }

    fn total(&self) -> T {
        let base = self.cost + self.latency + self.error + self.abstention;
        self.numeric.iter().chain(&self.binary).fold(base, |acc, &v| acc + v)
    }
}

pub fn per_query_reward<T: Scalar>(
    outcome: &QueryOutcome<T>,
    scenario: &EconomicScenario<T>,
) -> Result<T> {
    scenario.validate()?;
    if !outcome.cost_usd.is_finite_value() || !outcome.latency_sec.is_finite_value() {
        return Err(Error::NonFinite(format!("outcome for query `{}`", outcome.query_id)));
    }
    Ok(-Terms::of(outcome, scenario)?.total())
}

/// Mean reward over a set of outcomes with its dollar breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardSummary<T = f64> {
    pub mean_reward: T,
    /// Mean dollars per query attributed to `cost`, `latency_cost`,
    /// `error_cost`, `abstention_cost`, `metric.<name>` and `event.<name>`.
    pub components: BTreeMap<String, T>,
    pub n_queries: usize,
}

pub fn expected_reward<T: Scalar>(
    outcomes: &[QueryOutcome<T>],
    scenario: &EconomicScenario<T>,
) -> Result<RewardSummary<T>> {
    if outcomes.is_empty() {
        return Err(Error::EmptyOutcomes);
    }
    scenario.validate()?;
    let mut reward_sum = T::zero();
    let mut sums = Terms {
        cost: T::zero(),
        latency: T::zero(),
        error: T::zero(),
        abstention: T::zero(),
        numeric: vec![T::zero(); scenario.numeric_prices.len()],
        binary: vec![T::zero(); scenario.binary_prices.len()],
    };
    for outcome in outcomes {
        let t = Terms::of(outcome, scenario)?;
        reward_sum = reward_sum - t.total();
        sums.cost = sums.cost + t.cost;
        sums.latency = sums.latency + t.latency;
        sums.error = sums.error + t.error;
        sums.abstention = sums.abstention + t.abstention;
        for (acc, v) in sums.numeric.iter_mut().zip(t.numeric) {
            *acc = *acc + v;
        }
        for (acc, v) in sums.binary.iter_mut().zip(t.binary) {
            *acc = *acc + v;
        }
    }
    let n = T::from_count(outcomes.len());
    let mut components = BTreeMap::from([
        ("cost".to_string(), sums.cost / n),
        ("latency_cost".to_string(), sums.latency / n),
        ("error_cost".to_string(), sums.error / n),
        ("abstention_cost".to_string(), sums.abstention / n),
    ]);
    for (name, v) in scenario.numeric_prices.keys().zip(sums.numeric) {
        components.insert(format!("metric.{name}"), v / n);
    }
    for (name, v) in scenario.binary_prices.keys().zip(sums.binary) {
        components.insert(format!("event.{name}"), v / n);
    }
    Ok(RewardSummary {
        mean_reward: reward_sum / n,
        components,
        n_queries: outcomes.len(),
    })
}

/// Finite weighted sample of scenarios. Weights are normalized on
/// construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDistribution<T = f64> {
    samples: Vec<(EconomicScenario<T>, T)>,
}

impl<T: Scalar> ScenarioDistribution<T> {
    pub fn new(samples: Vec<(EconomicScenario<T>, T)>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidScenario("distribution has no samples".into()));
        }
        let mut total = T::zero();
        for (scenario, w) in &samples {
            scenario.validate()?;
            if !w.is_finite_value() || *w < T::zero() {
                return Err(Error::InvalidScenario(format!("invalid weight {w:?}")));
            }
            total = total + *w;
        }
        if total <= T::zero() {
            return Err(Error::InvalidScenario("weights sum to zero".into()));
        }
        Ok(Self {
            samples: samples.into_iter().map(|(s, w)| (s, w / total)).collect(),
        })
    }

    pub fn single(scenario: EconomicScenario<T>) -> Result<Self> {
        Self::new(vec![(scenario, T::one())])
    }

    pub fn samples(&self) -> &[(EconomicScenario<T>, T)] {
        &self.samples
    }
}

/// Which system is scored under each sampled scenario.
#[derive(Debug, Clone, Copy)]
pub enum Selection<'a, T> {
    /// One system, whatever the scenario.
    Fixed(&'a [QueryOutcome<T>]),
    /// The best of several configurations, chosen per scenario.
    Optimal(&'a [Vec<QueryOutcome<T>>]),
}

/// `Σ_k w_k · R(λ_k)`, with `R` either the fixed system's reward or the
/// per-scenario maximum over candidate configurations.
pub fn expected_reward_stochastic<T: Scalar>(
    selection: Selection<'_, T>,
    dist: &ScenarioDistribution<T>,
) -> Result<T> {
    let mut total = T::zero();
    for (scenario, weight) in dist.samples() {
        let r = match selection {
            Selection::Fixed(outcomes) => expected_reward(outcomes, scenario)?.mean_reward,
            Selection::Optimal(candidates) => {
                let mut best: Option<T> = None;
                for outcomes in candidates {
                    let r = expected_reward(outcomes, scenario)?.mean_reward;
                    if best.is_none_or(|b| r > b) {
                        best = Some(r);
                    }
                }
                best.ok_or(Error::EmptyOutcomes)?
            }
        };
        total = total + *weight * r;
    }
    Ok(total)
}

/// `-ln(-reward)`, the log-scale used when plotting rewards against the
/// price of error.
pub fn transform_for_plot<T: Scalar + Float>(reward: T) -> Result<T> {
    if reward >= T::zero() || Float::is_nan(reward) {
        return Err(Error::UndefinedTransform(reward.to_f64_lossy()));
    }
    Ok(-(-reward).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Rational64;
    use proptest::prelude::*;

    fn outcome(cost: f64, latency: f64, error: bool, abstained: bool) -> QueryOutcome {
        QueryOutcome {
            query_id: "q".into(),
            answering_index: Some(1),
            answering_model: Some("m".into()),
            cost_usd: cost,
            latency_sec: latency,
            is_error: error,
            abstained,
            deferred: false,
            numeric_metrics: BTreeMap::new(),
            binary_events: BTreeMap::new(),
        }
    }

    #[test]
    fn per_query_examples() {
        let s = EconomicScenario::zero();
        assert_eq!(per_query_reward(&outcome(0.0, 0.0, false, false), &s).unwrap(), 0.0);
        let s = EconomicScenario::zero().with_latency(0.1).with_error(1.0);
        let r = per_query_reward(&outcome(0.01, 2.0, true, false), &s).unwrap();
        assert!((r - -1.21).abs() < 1e-12);
        let s = EconomicScenario::zero().with_abstention(0.5);
        let r = per_query_reward(&outcome(0.02, 0.0, false, true), &s).unwrap();
        assert!((r - -0.52).abs() < 1e-12);
    }

    #[test]
    fn exact_substitution_with_rationals() {
        let r = |n, d| Rational64::new(n, d);
        let o = QueryOutcome {
            query_id: "q".into(),
            answering_index: Some(1),
            answering_model: None,
            cost_usd: r(1, 100),
            latency_sec: r(2, 1),
            is_error: true,
            abstained: false,
            deferred: false,
            numeric_metrics: BTreeMap::new(),
            binary_events: BTreeMap::new(),
        };
        let s = EconomicScenario::zero().with_latency(r(1, 10)).with_error(r(1, 1));
        assert_eq!(per_query_reward(&o, &s).unwrap(), r(-121, 100));
    }

    #[test]
    fn metric_pricing_policy() {
        let mut o = outcome(0.0, 0.0, false, false);
        o.numeric_metrics.insert("tokens".into(), 100.0);
        o.numeric_metrics.insert("unpriced".into(), 1e9);
        o.binary_events.insert("pii".into(), true);
        let s = EconomicScenario::zero()
            .with_numeric_price("tokens", 0.001)
            .with_binary_price("pii", 2.0);
        assert!((per_query_reward(&o, &s).unwrap() - -2.1).abs() < 1e-12);
        let s = s.with_numeric_price("missing", 1.0);
        assert_eq!(
            per_query_reward(&o, &s).unwrap_err(),
            Error::PricedMetricMissing("missing".into())
        );
    }

    #[test]
    fn negative_price_rejected() {
        let s = EconomicScenario::zero().with_error(-1.0);
        assert!(matches!(
            per_query_reward(&outcome(0.0, 0.0, false, false), &s),
            Err(Error::InvalidScenario(_))
        ));
    }

    #[test]
    fn expected_reward_examples() {
        let s = EconomicScenario::zero().with_error(1.0);
        let one = [outcome(0.5, 0.0, true, false)];
        assert_eq!(
            expected_reward(&one, &s).unwrap().mean_reward,
            per_query_reward(&one[0], &s).unwrap()
        );
        let two = [outcome(1.0, 0.0, false, false), outcome(2.0, 0.0, true, false)];
        let summary = expected_reward(&two, &s).unwrap();
        assert_eq!(summary.mean_reward, -2.0);
        assert_eq!(summary.components["cost"], 1.5);
        assert_eq!(summary.components["error_cost"], 0.5);
        assert_eq!(summary.n_queries, 2);
        assert_eq!(expected_reward::<f64>(&[], &s).unwrap_err(), Error::EmptyOutcomes);
    }

    #[test]
    fn stochastic_examples() {
        let outs = vec![outcome(1.0, 0.0, false, false)];
        let base = EconomicScenario::zero();
        let single = ScenarioDistribution::single(base.clone()).unwrap();
        assert_eq!(
            expected_reward_stochastic(Selection::Fixed(&outs), &single).unwrap(),
            expected_reward(&outs, &base).unwrap().mean_reward
        );
        let errs = vec![outcome(0.0, 0.0, true, false)];
        let dist = ScenarioDistribution::new(vec![
            (base.clone().with_error(1.0), 1.0),
            (base.clone().with_error(3.0), 1.0),
        ])
        .unwrap();
        assert_eq!(expected_reward_stochastic(Selection::Fixed(&errs), &dist).unwrap(), -2.0);
        assert!(ScenarioDistribution::<f64>::new(vec![]).is_err());
        assert!(ScenarioDistribution::new(vec![(base.clone(), -1.0)]).is_err());
        assert!(ScenarioDistribution::new(vec![(base, 0.0)]).is_err());
    }

    #[test]
    fn optimal_selection_beats_each_fixed_candidate() {
        // cheap-but-wrong vs pricey-but-right: rewards cross as λ_E grows
        let cheap = vec![outcome(0.001, 0.0, true, false)];
        let pricey = vec![outcome(0.5, 0.0, false, false)];
        let dist = ScenarioDistribution::new(
            [0.01, 0.1, 1.0, 10.0]
                .iter()
                .map(|&e| (EconomicScenario::zero().with_error(e), 1.0))
                .collect(),
        )
        .unwrap();
        let fixed_a = expected_reward_stochastic(Selection::Fixed(&cheap), &dist).unwrap();
        let fixed_b = expected_reward_stochastic(Selection::Fixed(&pricey), &dist).unwrap();
        let both = [cheap, pricey];
        let optimal = expected_reward_stochastic(Selection::Optimal(&both), &dist).unwrap();
        assert!(optimal >= fixed_a.max(fixed_b));
        // by hand: mean of -min(0.001 + e, 0.5) over e
        let oracle = -(0.011 + 0.101 + 0.5 + 0.5) / 4.0;
        assert!((optimal - oracle).abs() < 1e-15);
    }

    #[test]
    fn plot_transform() {
        assert_eq!(transform_for_plot(-1.0).unwrap(), 0.0);
        assert!((transform_for_plot(-std::f64::consts::E).unwrap() - -1.0).abs() < 1e-15);
        assert!((transform_for_plot(-0.01).unwrap() - 4.605170185988091).abs() < 1e-12);
        assert!(transform_for_plot(0.0).is_err());
        assert!(transform_for_plot(0.5f32).is_err());
    }

    fn arb_outcome() -> impl Strategy<Value = QueryOutcome> {
        (0.0f64..1.0, 0.0f64..20.0, any::<bool>(), any::<bool>())
            .prop_map(|(c, l, e, a)| outcome(c, l, e, a))
    }

    fn arb_scenario() -> impl Strategy<Value = EconomicScenario> {
        (0.0f64..100.0, 0.0f64..1.0, 0.0f64..10.0).prop_map(|(e, l, a)| {
            EconomicScenario::zero().with_error(e).with_latency(l).with_abstention(a)
        })
    }

    proptest! {
        #[test]
        fn mean_matches_sum_over_count(outs in prop::collection::vec(arb_outcome(), 100), s in arb_scenario()) {
            let summary = expected_reward(&outs, &s).unwrap();
            let mut sum = 0.0;
            for o in &outs {
                sum += -(o.cost_usd
                    + s.price_of_latency * o.latency_sec
                    + if o.is_error { s.price_of_error } else { 0.0 }
                    + if o.abstained { s.price_of_abstention } else { 0.0 });
            }
            prop_assert!((summary.mean_reward - sum / 100.0).abs() <= 1e-12);
            let parts: f64 = summary.components.values().sum();
            prop_assert!((summary.mean_reward + parts).abs() <= 1e-12);
            prop_assert!(summary.components.values().all(|&v| v >= 0.0));
        }

        #[test]
        fn reward_non_increasing_in_prices(
            outs in prop::collection::vec(arb_outcome(), 1..30),
            s in arb_scenario(),
            bump in (0.0f64..10.0, 0.0f64..1.0, 0.0f64..10.0),
        ) {
            let higher = s.clone()
                .with_error(s.price_of_error + bump.0)
                .with_latency(s.price_of_latency + bump.1)
                .with_abstention(s.price_of_abstention + bump.2);
            let lo = expected_reward(&outs, &s).unwrap().mean_reward;
            let hi = expected_reward(&outs, &higher).unwrap().mean_reward;
            prop_assert!(hi <= lo);
        }

        #[test]
        fn slope_in_error_price_is_minus_error_rate(
            outs in prop::collection::vec(arb_outcome(), 1..50),
            s in arb_scenario(),
        ) {
            let h = 1.0;
            let r0 = expected_reward(&outs, &s).unwrap().mean_reward;
            let r1 = expected_reward(&outs, &s.clone().with_error(s.price_of_error + h)).unwrap().mean_reward;
            let error_rate = outs.iter().filter(|o| o.is_error).count() as f64 / outs.len() as f64;
            prop_assert!(((r1 - r0) / h + error_rate).abs() <= 1e-12);
        }

        #[test]
        fn scaling_prices_and_costs_scales_rewards(
            outs in prop::collection::vec(arb_outcome(), 1..30),
            s in arb_scenario(),
            k in 0.1f64..100.0,
        ) {
            let scaled: Vec<QueryOutcome> = outs
                .iter()
                .map(|o| QueryOutcome { cost_usd: o.cost_usd * k, ..o.clone() })
                .collect();
            let r = expected_reward(&outs, &s).unwrap().mean_reward;
            let rk = expected_reward(&scaled, &s.scaled(k)).unwrap().mean_reward;
            prop_assert!((rk - k * r).abs() <= 1e-12 * (k * r).abs().max(1.0));
        }
    }
}
