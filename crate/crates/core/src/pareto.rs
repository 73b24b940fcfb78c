//! Pareto dominance over minimized objectives, frontier extraction, and
//! finite-instance checks relating reward maximization to the frontier.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{mean, rate, Scalar};
use crate::system::QueryOutcome;

/// A labelled vector of objectives, all to be minimized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectivePoint<T = f64> {
    pub label: String,
    pub values: Vec<T>,
}

impl<T: Scalar> ObjectivePoint<T> {
    pub fn new(label: impl Into<String>, values: Vec<T>) -> Self {
        Self {
            label: label.into(),
            values,
        }
    }

    /// Weighted dollar total with weight 1 on the first objective and
    /// `lambda[i]` on objective `i + 1`. Reward is its negation.
    pub fn scalarized(&self, lambda: &[T]) -> Result<T> {
        check_dim(self.values.len() - 1, lambda.len())?;
        Ok(self.values[1..]
            .iter()
            .zip(lambda)
            .fold(self.values[0], |acc, (&v, &l)| acc + l * v))
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// `a ≤ b` everywhere and `a < b` somewhere.
pub fn dominates<T: Scalar>(a: &ObjectivePoint<T>, b: &ObjectivePoint<T>) -> Result<bool> {
    check_dim(a.values.len(), b.values.len())?;
    Ok(dominates_unchecked(&a.values, &b.values))
}

fn dominates_unchecked<T: Scalar>(a: &[T], b: &[T]) -> bool {
    let mut strict = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        strict |= x < y;
    }
    strict
}

fn validate_points<T: Scalar>(points: &[ObjectivePoint<T>]) -> Result<usize> {
    let first = points.first().ok_or(Error::EmptyOutcomes)?;
    let d = first.values.len();
    if d == 0 {
        return Err(Error::DimensionMismatch { expected: 1, found: 0 });
    }
    for p in points {
        check_dim(d, p.values.len())?;
        if p.values.iter().any(|v| !v.is_finite_value()) {
            return Err(Error::NonFinite(format!("objectives of `{}`", p.label)));
        }
    }
    Ok(d)
}

fn lex_cmp<T: Scalar>(a: &[T], b: &[T]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.partial_cmp(y).expect("finite"))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Indices of non-dominated points, ascending. Duplicates of a frontier
/// point are all kept.
///
/// A dominating point always precedes the point it dominates in
/// lexicographic order, so after sorting each point only needs checking
/// against the frontier found so far.
pub fn frontier_indices<T: Scalar>(points: &[ObjectivePoint<T>]) -> Result<Vec<usize>> {
    validate_points(points)?;
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| lex_cmp(&points[i].values, &points[j].values).then(i.cmp(&j)));
    let mut frontier: Vec<usize> = Vec::new();
    for i in order {
        if !frontier
            .iter()
            .any(|&f| dominates_unchecked(&points[f].values, &points[i].values))
        {
            frontier.push(i);
        }
    }
    frontier.sort_unstable();
    Ok(frontier)
}

/// Non-dominated points in input order.
pub fn pareto_frontier<T: Scalar>(points: &[ObjectivePoint<T>]) -> Result<Vec<ObjectivePoint<T>>> {
    Ok(frontier_indices(points)?
        .into_iter()
        .map(|i| points[i].clone())
        .collect())
}

/// Objective names matching [`objective_point`], given the metric and event
/// names of the outcomes.
pub fn objective_names(outcomes: &[QueryOutcome<impl Scalar>]) -> Vec<String> {
    let mut names: Vec<String> = ["cost", "latency", "error_rate", "abstention_rate"]
        .map(String::from)
        .to_vec();
    if let Some(o) = outcomes.first() {
        names.extend(o.numeric_metrics.keys().map(|k| format!("metric.{k}")));
        names.extend(o.binary_events.keys().map(|k| format!("event.{k}")));
    }
    names
}

/// Mean cost, mean latency, error rate, abstention rate, then the mean of
/// each numeric metric and the rate of each binary event, by name.
pub fn objective_point<T: Scalar>(label: impl Into<String>, outcomes: &[QueryOutcome<T>]) -> Result<ObjectivePoint<T>> {
    let first = outcomes.first().ok_or(Error::EmptyOutcomes)?;
    let mut values = vec![
        mean(outcomes.iter().map(|o| o.cost_usd)).expect("non-empty"),
        mean(outcomes.iter().map(|o| o.latency_sec)).expect("non-empty"),
        rate(outcomes.iter().map(|o| o.is_error)).expect("non-empty"),
        rate(outcomes.iter().map(|o| o.abstained)).expect("non-empty"),
    ];
    for name in first.numeric_metrics.keys() {
        let vals = outcomes
            .iter()
            .map(|o| o.numeric_metrics.get(name).copied().ok_or_else(|| Error::PricedMetricMissing(name.clone())))
            .collect::<Result<Vec<T>>>()?;
        values.push(mean(vals).expect("non-empty"));
    }
    for name in first.binary_events.keys() {
        let flags = outcomes
            .iter()
            .map(|o| o.binary_events.get(name).copied().ok_or_else(|| Error::PricedMetricMissing(name.clone())))
            .collect::<Result<Vec<bool>>>()?;
        values.push(rate(flags).expect("non-empty"));
    }
    Ok(ObjectivePoint::new(label, values))
}

/// CSV with one row per point: label, objectives, frontier flag.
pub fn write_frontier_csv<T: Scalar, W: Write>(
    points: &[ObjectivePoint<T>],
    names: &[String],
    out: W,
) -> Result<()> {
    let d = validate_points(points)?;
    check_dim(d, names.len())?;
    let on_frontier: BTreeSet<usize> = frontier_indices(points)?.into_iter().collect();
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    let mut header = vec!["label".to_string()];
    header.extend(names.iter().cloned());
    header.push("on_frontier".into());
    w.write_record(&header).map_err(io)?;
    for (i, p) in points.iter().enumerate() {
        let mut row = vec![p.label.clone()];
        row.extend(p.values.iter().map(|&v| format!("{}", v.to_f64_lossy())));
        row.push(on_frontier.contains(&i).to_string());
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

fn check_lambdas<T: Scalar>(lambdas: &[Vec<T>], dim: usize) -> Result<()> {
    for (sample, l) in lambdas.iter().enumerate() {
        check_dim(dim, l.len())?;
        if let Some(index) = l.iter().position(|&v| !v.is_finite_value() || v <= T::zero()) {
            return Err(Error::NonPositiveLambda { sample, index });
        }
    }
    Ok(())
}

/// Reward argmax under `lambda`. Ties go to the lexicographically smallest
/// objective vector, then the lowest index; this keeps a dominated point
/// from winning a tie that rounding created.
fn argmax<T: Scalar>(points: &[ObjectivePoint<T>], lambda: &[T]) -> Result<usize> {
    let mut best = 0;
    let mut best_total = points[0].scalarized(lambda)?;
    for (i, p) in points.iter().enumerate().skip(1) {
        let total = p.scalarized(lambda)?;
        if total < best_total
            || (total == best_total && lex_cmp(&p.values, &points[best].values) == Ordering::Less)
        {
            best = i;
            best_total = total;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontierViolation {
    pub sample: usize,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaFrontierReport {
    pub n_samples: usize,
    /// Reward maximizers that are dominated; always empty unless the
    /// implementation is broken.
    pub violations: Vec<FrontierViolation>,
    /// Frontier labels that maximized reward for some sample.
    pub reached: Vec<String>,
    /// Frontier labels no sample selected, typically points off the convex
    /// hull of the frontier.
    pub unreached: Vec<String>,
}

/// For each strictly positive price vector, checks that the reward
/// maximizer lies on the frontier, and records which frontier points were
/// reached at all.
pub fn verify_lambda_to_pareto<T: Scalar>(
    points: &[ObjectivePoint<T>],
    lambdas: &[Vec<T>],
) -> Result<LambdaFrontierReport> {
    let d = validate_points(points)?;
    check_lambdas(lambdas, d - 1)?;
    let frontier: BTreeSet<usize> = frontier_indices(points)?.into_iter().collect();
    let mut violations = Vec::new();
    let mut hit = BTreeSet::new();
    for (sample, lambda) in lambdas.iter().enumerate() {
        let w = argmax(points, lambda)?;
        if frontier.contains(&w) {
            hit.insert(w);
        } else {
            violations.push(FrontierViolation {
                sample,
                label: points[w].label.clone(),
            });
        }
    }
    let labels = |pred: &dyn Fn(&usize) -> bool| {
        let mut v: Vec<String> = frontier.iter().filter(|i| pred(i)).map(|&i| points[i].label.clone()).collect();
        v.sort();
        v
    };
    Ok(LambdaFrontierReport {
        n_samples: lambdas.len(),
        violations,
        reached: labels(&|i| hit.contains(i)),
        unreached: labels(&|i| !hit.contains(i)),
    })
}

/// A frontier point of the second family dominating one of the first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominatingPair<T = f64> {
    pub better: String,
    pub worse: String,
    /// First grid price vector under which `better` earns strictly more.
    pub witness: Option<Vec<T>>,
    /// Whether `worse` maximizes its own family's reward at some grid
    /// price; when it never does, no price connects it to the comparison.
    pub worse_supported: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport<T = f64> {
    pub pairs: Vec<DominatingPair<T>>,
    pub witnessed: usize,
    /// Pairs whose dominated point is never its family's reward maximizer.
    pub unsupported: usize,
    /// Dominating pairs with no witnessing price on the grid.
    pub inconsistencies: usize,
    pub warnings: Vec<String>,
}

/// Whenever a frontier point of `second` dominates a frontier point of
/// `first`, looks for a grid price vector under which the dominating point
/// earns strictly more. Pairs without one are counted as inconsistencies
/// and reported as grid-resolution warnings.
pub fn verify_reward_dominance_implication<T: Scalar>(
    first: &[ObjectivePoint<T>],
    second: &[ObjectivePoint<T>],
    lambdas: &[Vec<T>],
) -> Result<DominanceReport<T>> {
    let d = validate_points(first)?;
    check_dim(d, validate_points(second)?)?;
    check_lambdas(lambdas, d - 1)?;
    let supported: BTreeSet<usize> = lambdas
        .iter()
        .map(|l| argmax(first, l))
        .collect::<Result<_>>()?;
    let f1 = frontier_indices(first)?;
    let f2 = frontier_indices(second)?;
    let mut report = DominanceReport {
        pairs: Vec::new(),
        witnessed: 0,
        unsupported: 0,
        inconsistencies: 0,
        warnings: Vec::new(),
    };
    for &j in &f2 {
        for &i in &f1 {
            let (better, worse) = (&second[j], &first[i]);
            if !dominates_unchecked(&better.values, &worse.values) {
                continue;
            }
            let mut witness = None;
            for l in lambdas {
                if better.scalarized(l)? < worse.scalarized(l)? {
                    witness = Some(l.clone());
                    break;
                }
            }
            let worse_supported = supported.contains(&i);
            if witness.is_some() {
                report.witnessed += 1;
            } else {
                report.inconsistencies += 1;
                report.warnings.push(format!(
                    "`{}` dominates `{}` but earns no more at any grid price; refine the grid",
                    better.label, worse.label
                ));
            }
            if !worse_supported {
                report.unsupported += 1;
            }
            report.pairs.push(DominatingPair {
                better: better.label.clone(),
                worse: worse.label.clone(),
                witness,
                worse_supported,
            });
        }
    }
    Ok(report)
}
