//! Per-query observations and the dense log that holds them.
//!
//! A log is a dense (query × model) matrix of [`ModelRunRecord`]s. Query
//! order is the order of first appearance in the input and is preserved by
//! every operation downstream, which is what makes reports reproducible.

mod io;
mod pricing;
mod split;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use io::{ingest_log, ingest_log_with, write_csv, write_jsonl, LogFormat};
pub use pricing::{bundled_pricing, cost_from_tokens, TokenPricing};
pub use split::{split, SplitSpec};

/// One (model, query) observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de>"))]
pub struct ModelRunRecord<T = f64> {
    pub query_id: String,
    pub model_id: String,
    pub is_error: bool,
    /// Independent of `is_error`; both are priced separately.
    #[serde(default)]
    pub abstained: bool,
    pub cost_usd: T,
    pub latency_sec: T,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<T>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub numeric_metrics: BTreeMap<String, T>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub binary_events: BTreeMap<String, bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens_in: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens_out: Option<u64>,
}

impl<T: Scalar> ModelRunRecord<T> {
    /// Minimal record with no confidence, metrics or token counts.
    pub fn new(
        query_id: impl Into<String>,
        model_id: impl Into<String>,
        is_error: bool,
        cost_usd: T,
        latency_sec: T,
    ) -> Self {
        Self {
            query_id: query_id.into(),
            model_id: model_id.into(),
            is_error,
            abstained: false,
            cost_usd,
            latency_sec,
            confidence: None,
            numeric_metrics: BTreeMap::new(),
            binary_events: BTreeMap::new(),
            tokens_in: None,
            tokens_out: None,
        }
    }

    pub fn with_confidence(mut self, confidence: T) -> Self {
        self.confidence = Some(confidence);
        self
    }

    /// Checks the field invariants, returning the offending field name and
    /// a reason on failure.
    pub fn check(&self) -> std::result::Result<(), (&'static str, String)> {
        if self.query_id.is_empty() {
            return Err(("query_id", "must not be empty".into()));
        }
        if self.model_id.is_empty() {
            return Err(("model_id", "must not be empty".into()));
        }
        non_negative("cost_usd", self.cost_usd)?;
        non_negative("latency_sec", self.latency_sec)?;
        if let Some(c) = self.confidence {
            if !c.is_finite_value() || c < T::zero() || c > T::one() {
                return Err(("confidence", format!("must lie in [0, 1], got {c:?}")));
            }
        }
        for (name, v) in &self.numeric_metrics {
            if !v.is_finite_value() {
                return Err(("numeric_metrics", format!("metric `{name}` is not finite")));
            }
        }
        Ok(())
    }
}

fn non_negative<T: Scalar>(
    field: &'static str,
    v: T,
) -> std::result::Result<(), (&'static str, String)> {
    if !v.is_finite_value() {
        return Err((field, format!("must be finite, got {v:?}")));
    }
    if v < T::zero() {
        return Err((field, format!("must be non-negative, got {v:?}")));
    }
    Ok(())
}

/// How [`EvaluationLog`] construction treats missing (model, query) pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Completeness {
    /// Any missing pair is an error.
    #[default]
    Strict,
    /// Missing pairs are reported and the affected queries dropped for all
    /// models.
    Permissive,
}

/// A (model_id, query_id) pair absent from the input.
pub type MissingPair = (String, String);

/// Dense, validated matrix of observations.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationLog<T = f64> {
    /// Query-major: record of query `q`, model `m` lives at `q * n_models + m`.
    records: Vec<ModelRunRecord<T>>,
    model_ids: Vec<String>,
    query_ids: Vec<String>,
    model_index: HashMap<String, usize>,
    query_index: HashMap<String, usize>,
}

impl<T: Scalar> EvaluationLog<T> {
    /// Builds a strictly dense log; record positions double as line numbers
    /// in error messages.
    pub fn from_records(records: Vec<ModelRunRecord<T>>) -> Result<Self> {
        Self::from_records_with(records, Completeness::Strict).map(|(log, _)| log)
    }

    pub fn from_records_with(
        records: Vec<ModelRunRecord<T>>,
        completeness: Completeness,
    ) -> Result<(Self, Vec<MissingPair>)> {
        let numbered = records.into_iter().enumerate().map(|(i, r)| (i + 1, r)).collect();
        Self::assemble(numbered, completeness)
    }

    pub(crate) fn assemble(
        records: Vec<(usize, ModelRunRecord<T>)>,
        completeness: Completeness,
    ) -> Result<(Self, Vec<MissingPair>)> {
        if records.is_empty() {
            return Err(Error::EmptyLog);
        }
        let mut model_ids: Vec<String> = Vec::new();
        let mut query_ids: Vec<String> = Vec::new();
        let mut model_index: HashMap<String, usize> = HashMap::new();
        let mut query_index: HashMap<String, usize> = HashMap::new();
        let mut cells: HashMap<(usize, usize), ModelRunRecord<T>> = HashMap::new();

        for (line, record) in records {
            if let Err((field, reason)) = record.check() {
                return Err(Error::InvalidField {
                    line,
                    field: field.to_string(),
                    reason,
                });
            }
            let m = *model_index.entry(record.model_id.clone()).or_insert_with(|| {
                model_ids.push(record.model_id.clone());
                model_ids.len() - 1
            });
            let q = *query_index.entry(record.query_id.clone()).or_insert_with(|| {
                query_ids.push(record.query_id.clone());
                query_ids.len() - 1
            });
            if cells.contains_key(&(q, m)) {
                return Err(Error::DuplicatePair {
                    line,
                    model_id: record.model_id,
                    query_id: record.query_id,
                });
            }
            cells.insert((q, m), record);
        }

        let mut missing = Vec::new();
        let mut keep = Vec::with_capacity(query_ids.len());
        for (q, qid) in query_ids.iter().enumerate() {
            let mut complete = true;
            for (m, mid) in model_ids.iter().enumerate() {
                if !cells.contains_key(&(q, m)) {
                    missing.push((mid.clone(), qid.clone()));
                    complete = false;
                }
            }
            if complete {
                keep.push(q);
            }
        }
        if !missing.is_empty() && completeness == Completeness::Strict {
            return Err(Error::NonDense { missing });
        }

        let n_models = model_ids.len();
        let mut dense = Vec::with_capacity(keep.len() * n_models);
        for &q in &keep {
            for m in 0..n_models {
                dense.push(cells.remove(&(q, m)).expect("complete query"));
            }
        }
        let query_ids: Vec<String> = keep.iter().map(|&q| query_ids[q].clone()).collect();
        let query_index = index_of(&query_ids);
        Ok((
            Self {
                records: dense,
                model_ids,
                query_ids,
                model_index,
                query_index,
            },
            missing,
        ))
    }

    pub fn records(&self) -> &[ModelRunRecord<T>] {
        &self.records
    }

    pub fn into_records(self) -> Vec<ModelRunRecord<T>> {
        self.records
    }

    pub fn model_ids(&self) -> &[String] {
        &self.model_ids
    }

    pub fn query_ids(&self) -> &[String] {
        &self.query_ids
    }

    pub fn n_models(&self) -> usize {
        self.model_ids.len()
    }

    pub fn n_queries(&self) -> usize {
        self.query_ids.len()
    }

    pub fn model_position(&self, model_id: &str) -> Result<usize> {
        self.model_index
            .get(model_id)
            .copied()
            .ok_or_else(|| Error::UnknownModel(model_id.to_string()))
    }

    pub fn query_position(&self, query_id: &str) -> Result<usize> {
        self.query_index
            .get(query_id)
            .copied()
            .ok_or_else(|| Error::UnknownQuery(query_id.to_string()))
    }

    /// Record at (query position, model position).
    pub fn record(&self, query: usize, model: usize) -> &ModelRunRecord<T> {
        &self.records[query * self.model_ids.len() + model]
    }

    /// A model's records in query order.
    pub fn model_records(&self, model_id: &str) -> Result<Vec<&ModelRunRecord<T>>> {
        let m = self.model_position(model_id)?;
        Ok((0..self.n_queries()).map(|q| self.record(q, m)).collect())
    }

    /// Names of every numeric metric reported by any record.
    pub fn metric_names(&self) -> BTreeSet<String> {
        self.records
            .iter()
            .flat_map(|r| r.numeric_metrics.keys().cloned())
            .collect()
    }

    /// Names of every binary event reported by any record.
    pub fn event_names(&self) -> BTreeSet<String> {
        self.records
            .iter()
            .flat_map(|r| r.binary_events.keys().cloned())
            .collect()
    }

    /// Sub-log with the given query positions, kept in their original order.
    pub(crate) fn select_queries(&self, positions: &[usize]) -> Self {
        let mut sorted = positions.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let n_models = self.n_models();
        let mut records = Vec::with_capacity(sorted.len() * n_models);
        for &q in &sorted {
            records.extend_from_slice(&self.records[q * n_models..(q + 1) * n_models]);
        }
        let query_ids: Vec<String> = sorted.iter().map(|&q| self.query_ids[q].clone()).collect();
        Self {
            records,
            query_index: index_of(&query_ids),
            query_ids,
            model_ids: self.model_ids.clone(),
            model_index: self.model_index.clone(),
        }
    }

    /// Applies `f` to every record, keeping the matrix layout.
    pub fn map_records<U: Scalar>(
        &self,
        mut f: impl FnMut(&ModelRunRecord<T>) -> ModelRunRecord<U>,
    ) -> Result<EvaluationLog<U>> {
        let records = self.records.iter().map(&mut f).collect::<Vec<_>>();
        for (i, (old, new)) in self.records.iter().zip(&records).enumerate() {
            if old.model_id != new.model_id || old.query_id != new.query_id {
                return Err(Error::InvalidField {
                    line: i + 1,
                    field: "model_id/query_id".into(),
                    reason: "map_records must not change identifiers".into(),
                });
            }
            if let Err((field, reason)) = new.check() {
                return Err(Error::InvalidField {
                    line: i + 1,
                    field: field.into(),
                    reason,
                });
            }
        }
        Ok(EvaluationLog {
            records,
            model_ids: self.model_ids.clone(),
            query_ids: self.query_ids.clone(),
            model_index: self.model_index.clone(),
            query_index: self.query_index.clone(),
        })
    }

    /// Converts every value into another scalar type.
    pub fn cast<U: Scalar>(&self) -> Result<EvaluationLog<U>> {
        let conv = |v: T, what: &str| {
            v.to_f64()
                .and_then(U::from_f64)
                .ok_or_else(|| Error::NonFinite(what.to_string()))
        };
        let records = self
            .records
            .iter()
            .map(|r| {
                Ok(ModelRunRecord {
                    query_id: r.query_id.clone(),
                    model_id: r.model_id.clone(),
                    is_error: r.is_error,
                    abstained: r.abstained,
                    cost_usd: conv(r.cost_usd, "cost_usd")?,
                    latency_sec: conv(r.latency_sec, "latency_sec")?,
                    confidence: r.confidence.map(|c| conv(c, "confidence")).transpose()?,
                    numeric_metrics: r
                        .numeric_metrics
                        .iter()
                        .map(|(k, v)| Ok((k.clone(), conv(*v, k)?)))
                        .collect::<Result<_>>()?,
                    binary_events: r.binary_events.clone(),
                    tokens_in: r.tokens_in,
                    tokens_out: r.tokens_out,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(EvaluationLog {
            records,
            model_ids: self.model_ids.clone(),
            query_ids: self.query_ids.clone(),
            model_index: self.model_index.clone(),
            query_index: self.query_index.clone(),
        })
    }
}

fn index_of(ids: &[String]) -> HashMap<String, usize> {
    ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(q: &str, m: &str, err: bool, cost: f64) -> ModelRunRecord {
        ModelRunRecord::new(q, m, err, cost, 1.0)
    }

    #[test]
    fn dense_log_preserves_first_appearance_order() {
        let log = EvaluationLog::from_records(vec![
            rec("q2", "b", false, 0.1),
            rec("q2", "a", true, 0.2),
            rec("q1", "a", false, 0.3),
            rec("q1", "b", false, 0.4),
        ])
        .unwrap();
        assert_eq!(log.query_ids(), ["q2", "q1"]);
        assert_eq!(log.model_ids(), ["b", "a"]);
        assert_eq!(log.record(1, 1).cost_usd, 0.3);
        let a: Vec<f64> = log.model_records("a").unwrap().iter().map(|r| r.cost_usd).collect();
        assert_eq!(a, [0.2, 0.3]);
    }

    #[test]
    fn duplicate_pair_is_rejected() {
        let err = EvaluationLog::from_records(vec![rec("q", "a", false, 0.0), rec("q", "a", true, 0.0)])
            .unwrap_err();
        assert!(matches!(err, Error::DuplicatePair { line: 2, .. }));
    }

    #[test]
    fn permissive_drops_incomplete_queries() {
        let records = vec![
            rec("q1", "a", false, 0.0),
            rec("q1", "b", false, 0.0),
            rec("q2", "a", false, 0.0),
            rec("q3", "a", false, 0.0),
            rec("q3", "b", false, 0.0),
        ];
        let err = EvaluationLog::from_records(records.clone()).unwrap_err();
        assert_eq!(
            err,
            Error::NonDense {
                missing: vec![("b".into(), "q2".into())]
            }
        );
        let (log, missing) =
            EvaluationLog::from_records_with(records, Completeness::Permissive).unwrap();
        assert_eq!(missing, vec![("b".to_string(), "q2".to_string())]);
        assert_eq!(log.query_ids(), ["q1", "q3"]);
        assert_eq!(log.records().len(), 4);
    }

    #[test]
    fn invalid_values_name_the_field() {
        let mut bad = rec("q", "a", false, 0.0);
        bad.confidence = Some(1.5);
        let err = EvaluationLog::from_records(vec![bad]).unwrap_err();
        assert!(matches!(err, Error::InvalidField { ref field, .. } if field == "confidence"));
        assert_eq!(
            EvaluationLog::<f64>::from_records(vec![]).unwrap_err(),
            Error::EmptyLog
        );
    }

    #[test]
    fn cast_to_f32_keeps_layout() {
        let log = EvaluationLog::from_records(vec![rec("q", "a", true, 0.5)]).unwrap();
        let cast: EvaluationLog<f32> = log.cast().unwrap();
        assert_eq!(cast.record(0, 0).cost_usd, 0.5f32);
        assert!(cast.record(0, 0).is_error);
    }
}
