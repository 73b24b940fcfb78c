//! Candidate systems and their realization on a log.
//!
//! A system is turned into one [`QueryOutcome`] per logged query, in log
//! order. Realization is a pure function of the log and the system's
//! parameters; no model is ever invoked.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::records::{EvaluationLog, ModelRunRecord};
use crate::scalar::Scalar;

/// Literal used in router assignments for "answer nothing".
pub const ABSTAIN: &str = "ABSTAIN";

/// Realized action of a system on a single query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de>"))]
pub struct QueryOutcome<T = f64> {
    pub query_id: String,
    /// 1-based index of the answering model (position in the cascade chain,
    /// or in the log's model list for routers); `None` on abstention.
    pub answering_index: Option<usize>,
    pub answering_model: Option<String>,
    pub cost_usd: T,
    pub latency_sec: T,
    pub is_error: bool,
    pub abstained: bool,
    /// The first model passed the query on.
    pub deferred: bool,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub numeric_metrics: BTreeMap<String, T>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub binary_events: BTreeMap<String, bool>,
}

impl<T: Scalar> QueryOutcome<T> {
    fn answered_by(record: &ModelRunRecord<T>, index: usize) -> Self {
        Self {
            query_id: record.query_id.clone(),
            answering_index: Some(index),
            answering_model: Some(record.model_id.clone()),
            cost_usd: record.cost_usd,
            latency_sec: record.latency_sec,
            is_error: record.is_error,
            abstained: record.abstained,
            deferred: false,
            numeric_metrics: record.numeric_metrics.clone(),
            binary_events: record.binary_events.clone(),
        }
    }
}

/// Router destination for one query.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum RouteTarget {
    Model(String),
    Abstain,
}

impl From<String> for RouteTarget {
    fn from(s: String) -> Self {
        if s == ABSTAIN {
            RouteTarget::Abstain
        } else {
            RouteTarget::Model(s)
        }
    }
}

impl From<RouteTarget> for String {
    fn from(t: RouteTarget) -> Self {
        match t {
            RouteTarget::Model(m) => m,
            RouteTarget::Abstain => ABSTAIN.to_string(),
        }
    }
}

fn zero<T: Scalar>() -> T {
    T::zero()
}

/// A system whose per-query behaviour can be replayed from a log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar + Deserialize<'de>"))]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CandidateSystem<T = f64> {
    Standalone {
        model_id: String,
    },
    /// `thresholds[i]` gates stage `i`; the final model always answers.
    Cascade {
        chain: Vec<String>,
        thresholds: Vec<T>,
    },
    Router {
        assignment: BTreeMap<String, RouteTarget>,
        #[serde(default = "zero")]
        overhead_cost: T,
        #[serde(default = "zero")]
        overhead_latency: T,
    },
}

impl<T: Scalar> CandidateSystem<T> {
    pub fn standalone(model_id: impl Into<String>) -> Self {
        CandidateSystem::Standalone {
            model_id: model_id.into(),
        }
    }

    pub fn cascade<S: Into<String>>(chain: impl IntoIterator<Item = S>, thresholds: Vec<T>) -> Self {
        CandidateSystem::Cascade {
            chain: chain.into_iter().map(Into::into).collect(),
            thresholds,
        }
    }

    pub fn realize(&self, log: &EvaluationLog<T>) -> Result<Vec<QueryOutcome<T>>> {
        match self {
            CandidateSystem::Standalone { model_id } => realize_standalone(log, model_id),
            CandidateSystem::Cascade { chain, thresholds } => {
                realize_cascade(log, chain, thresholds)
            }
            CandidateSystem::Router {
                assignment,
                overhead_cost,
                overhead_latency,
            } => realize_router(log, assignment, *overhead_cost, *overhead_latency),
        }
    }

    /// Drops router assignments for queries absent from `log`, so a router
    /// defined on a full log can be replayed on one side of a split.
    pub fn restricted_to(&self, log: &EvaluationLog<T>) -> Self {
        match self {
            CandidateSystem::Router {
                assignment,
                overhead_cost,
                overhead_latency,
            } => CandidateSystem::Router {
                assignment: assignment
                    .iter()
                    .filter(|(q, _)| log.query_position(q).is_ok())
                    .map(|(q, t)| (q.clone(), t.clone()))
                    .collect(),
                overhead_cost: *overhead_cost,
                overhead_latency: *overhead_latency,
            },
            other => other.clone(),
        }
    }
}

/// A candidate system with a report label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct Candidate<T = f64> {
    pub id: String,
    #[serde(flatten)]
    pub system: CandidateSystem<T>,
}

impl<T: Scalar> Candidate<T> {
    pub fn new(id: impl Into<String>, system: CandidateSystem<T>) -> Self {
        Self {
            id: id.into(),
            system,
        }
    }
}

pub fn realize_standalone<T: Scalar>(
    log: &EvaluationLog<T>,
    model_id: &str,
) -> Result<Vec<QueryOutcome<T>>> {
    let m = log.model_position(model_id)?;
    Ok((0..log.n_queries())
        .map(|q| QueryOutcome::answered_by(log.record(q, m), 1))
        .collect())
}

/// Validates a cascade definition against a log and resolves model
/// positions.
pub(crate) fn resolve_cascade<T: Scalar>(
    log: &EvaluationLog<T>,
    chain: &[String],
    thresholds: &[T],
) -> Result<Vec<usize>> {
    if chain.len() < 2 {
        return Err(Error::InvalidCascade(format!(
            "chain needs at least 2 models, got {}",
            chain.len()
        )));
    }
    let distinct: BTreeSet<&String> = chain.iter().collect();
    if distinct.len() != chain.len() {
        return Err(Error::InvalidCascade("chain models must be distinct".into()));
    }
    if thresholds.len() != chain.len() - 1 {
        return Err(Error::InvalidCascade(format!(
            "{} models need {} thresholds, got {}",
            chain.len(),
            chain.len() - 1,
            thresholds.len()
        )));
    }
    for (stage, &t) in thresholds.iter().enumerate() {
        if !t.is_finite_value() || t < T::zero() || t > T::one() {
            return Err(Error::InvalidThreshold {
                stage,
                value: t.to_f64_lossy(),
            });
        }
    }
    let positions = chain
        .iter()
        .map(|m| log.model_position(m))
        .collect::<Result<Vec<_>>>()?;
    for &m in &positions[..positions.len() - 1] {
        for q in 0..log.n_queries() {
            let r = log.record(q, m);
            if r.confidence.is_none() {
                return Err(Error::MissingConfidence {
                    model_id: r.model_id.clone(),
                    query_id: r.query_id.clone(),
                });
            }
        }
    }
    Ok(positions)
}

/// Stage that answers query `q`: the first stage whose confidence reaches
/// its threshold, else the last. Confidence equal to the threshold answers.
pub(crate) fn answering_stage<T: Scalar>(
    log: &EvaluationLog<T>,
    positions: &[usize],
    thresholds: &[T],
    q: usize,
) -> usize {
    thresholds
        .iter()
        .zip(positions)
        .position(|(&t, &m)| log.record(q, m).confidence.expect("checked by resolve") >= t)
        .unwrap_or(positions.len() - 1)
}

pub fn realize_cascade<T: Scalar>(
    log: &EvaluationLog<T>,
    chain: &[String],
    thresholds: &[T],
) -> Result<Vec<QueryOutcome<T>>> {
    let positions = resolve_cascade(log, chain, thresholds)?;
    Ok((0..log.n_queries())
        .map(|q| {
            let stage = answering_stage(log, &positions, thresholds, q);
            cascade_outcome(log, &positions[..=stage], q)
        })
        .collect())
}

/// Outcome when `traversed` models see the query and the last one answers.
/// Cost, latency and numeric metrics accumulate over every traversed model;
/// a binary event fires if any traversed model raised it.
pub(crate) fn cascade_outcome<T: Scalar>(
    log: &EvaluationLog<T>,
    traversed: &[usize],
    q: usize,
) -> QueryOutcome<T> {
    let answering = log.record(q, *traversed.last().expect("non-empty chain prefix"));
    let mut outcome = QueryOutcome::answered_by(answering, traversed.len());
    outcome.deferred = traversed.len() > 1;
    if traversed.len() > 1 {
        outcome.cost_usd = T::zero();
        outcome.latency_sec = T::zero();
        outcome.numeric_metrics.clear();
        outcome.binary_events.clear();
        for &m in traversed {
            let r = log.record(q, m);
            outcome.cost_usd = outcome.cost_usd + r.cost_usd;
            outcome.latency_sec = outcome.latency_sec + r.latency_sec;
            for (name, &v) in &r.numeric_metrics {
                let slot = outcome.numeric_metrics.entry(name.clone()).or_insert_with(T::zero);
                *slot = *slot + v;
            }
            for (name, &fired) in &r.binary_events {
                *outcome.binary_events.entry(name.clone()).or_insert(false) |= fired;
            }
        }
    }
    outcome
}

pub fn realize_router<T: Scalar>(
    log: &EvaluationLog<T>,
    assignment: &BTreeMap<String, RouteTarget>,
    overhead_cost: T,
    overhead_latency: T,
) -> Result<Vec<QueryOutcome<T>>> {
    for (name, v) in [("overhead_cost", overhead_cost), ("overhead_latency", overhead_latency)] {
        if !v.is_finite_value() || v < T::zero() {
            return Err(Error::InvalidRouter(format!("{name} must be non-negative")));
        }
    }
    for (query, target) in assignment {
        log.query_position(query)?;
        if let RouteTarget::Model(m) = target {
            log.model_position(m)?;
        }
    }
    let metric_names = log.metric_names();
    let event_names = log.event_names();
    log.query_ids()
        .iter()
        .enumerate()
        .map(|(q, query_id)| {
            let target = assignment.get(query_id).ok_or_else(|| {
                Error::InvalidRouter(format!("assignment does not cover query `{query_id}`"))
            })?;
            Ok(match target {
                RouteTarget::Model(m) => {
                    let pos = log.model_position(m)?;
                    let mut o = QueryOutcome::answered_by(log.record(q, pos), pos + 1);
                    o.cost_usd = overhead_cost + o.cost_usd;
                    o.latency_sec = overhead_latency + o.latency_sec;
                    o
                }
                // Abstaining reports every logged metric as zero so priced
                // metrics stay well defined.
                RouteTarget::Abstain => QueryOutcome {
                    query_id: query_id.clone(),
                    answering_index: None,
                    answering_model: None,
                    cost_usd: overhead_cost,
                    latency_sec: overhead_latency,
                    is_error: false,
                    abstained: true,
                    deferred: false,
                    numeric_metrics: metric_names.iter().map(|n| (n.clone(), T::zero())).collect(),
                    binary_events: event_names.iter().map(|n| (n.clone(), false)).collect(),
                },
            })
        })
        .collect()
}
