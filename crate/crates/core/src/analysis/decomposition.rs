//! Error decomposition of a two-model cascade and the cascade error
//! reduction (CER) statistic.
//!
//! For a cascade `small -> big` with deferral indicator `D`,
//!
//! ```text
//! e_cascade = (1 - p_d)·e_small + p_d·e_big + Cov(D, err_big) - Cov(D, err_small)
//! ```
//!
//! holds exactly for empirical means when covariances use the same `1/n`
//! divisor as the means. `Cov(D, err_small)` alone is the CER.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::records::EvaluationLog;
use crate::scalar::{rate, Scalar};
use crate::system::{realize_cascade, QueryOutcome};

/// Population covariance of two indicator sequences, from exact counts:
/// `(n·#(a∧b) − #a·#b) / n²`.
pub fn flag_covariance<T: Scalar>(a: &[bool], b: &[bool]) -> Result<T> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::EmptyOutcomes);
    }
    let n = a.len();
    let both = a.iter().zip(b).filter(|(&x, &y)| x && y).count();
    let count_a = a.iter().filter(|&&x| x).count();
    let count_b = b.iter().filter(|&&x| x).count();
    let n_t = T::from_count(n);
    let numerator = T::from_count(n * both) - T::from_count(count_a) * T::from_count(count_b);
    Ok(numerator / (n_t * n_t))
}

/// `Cov(D, err_small)`; always within [-1/4, 1/4].
pub fn cascade_error_reduction<T: Scalar>(deferred: &[bool], small_errors: &[bool]) -> Result<T> {
    if deferred.len() != small_errors.len() {
        return Err(Error::LengthMismatch {
            left: deferred.len(),
            right: small_errors.len(),
        });
    }
    if deferred.len() < 2 {
        return Err(Error::TooFewObservations {
            required: 2,
            got: deferred.len(),
        });
    }
    flag_covariance(deferred, small_errors)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeDecomposition<T = f64> {
    pub p_d: T,
    pub e_small: T,
    pub e_big: T,
    pub cov_defer_small: T,
    pub cov_defer_big: T,
    pub reconstructed_error: T,
    pub observed_error: T,
}

/// Decomposes the realized error rate of a two-model cascade.
///
/// `outcomes` must come from the cascade `small -> big` on `log`; the log
/// supplies each model's error on queries the model did not answer.
pub fn decompose_cascade_error<T: Scalar>(
    outcomes: &[QueryOutcome<T>],
    log: &EvaluationLog<T>,
    small: &str,
    big: &str,
) -> Result<CascadeDecomposition<T>> {
    if outcomes.is_empty() {
        return Err(Error::EmptyOutcomes);
    }
    let small_pos = log.model_position(small)?;
    let big_pos = log.model_position(big)?;
    let mut deferred = Vec::with_capacity(outcomes.len());
    let mut err_small = Vec::with_capacity(outcomes.len());
    let mut err_big = Vec::with_capacity(outcomes.len());
    for o in outcomes {
        let q = log.query_position(&o.query_id)?;
        let expected = if o.deferred { big } else { small };
        if o.answering_model.as_deref() != Some(expected) {
            return Err(Error::InvalidCascade(format!(
                "query `{}` answered by {:?}, expected `{expected}` for a {small} -> {big} cascade",
                o.query_id, o.answering_model
            )));
        }
        deferred.push(o.deferred);
        err_small.push(log.record(q, small_pos).is_error);
        err_big.push(log.record(q, big_pos).is_error);
    }
    let p_d: T = rate(deferred.iter().copied()).expect("non-empty");
    let e_small: T = rate(err_small.iter().copied()).expect("non-empty");
    let e_big: T = rate(err_big.iter().copied()).expect("non-empty");
    let cov_defer_small = flag_covariance(&deferred, &err_small)?;
    let cov_defer_big = flag_covariance(&deferred, &err_big)?;
    let reconstructed_error =
        (T::one() - p_d) * e_small + p_d * e_big + cov_defer_big - cov_defer_small;
    let observed_error = rate(outcomes.iter().map(|o| o.is_error)).expect("non-empty");
    Ok(CascadeDecomposition {
        p_d,
        e_small,
        e_big,
        cov_defer_small,
        cov_defer_big,
        reconstructed_error,
        observed_error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CerPoint<T = f64> {
    pub threshold: T,
    pub deferral_rate: T,
    pub cer: T,
}

/// Deferral rate and CER of the cascade `chain[0] -> chain[1]` at each
/// threshold of `grid`.
pub fn cer_vs_threshold_curve<T: Scalar>(
    log: &EvaluationLog<T>,
    chain: &[String],
    grid: &[T],
) -> Result<Vec<CerPoint<T>>> {
    if chain.len() != 2 {
        return Err(Error::InvalidCascade(format!(
            "CER needs a two-model chain, got {} models",
            chain.len()
        )));
    }
    let small_errors: Vec<bool> = log.model_records(&chain[0])?.iter().map(|r| r.is_error).collect();
    grid.iter()
        .map(|&threshold| {
            let outcomes = realize_cascade(log, chain, &[threshold])?;
            let deferred: Vec<bool> = outcomes.iter().map(|o| o.deferred).collect();
            Ok(CerPoint {
                threshold,
                deferral_rate: rate(deferred.iter().copied()).ok_or(Error::EmptyOutcomes)?,
                cer: cascade_error_reduction(&deferred, &small_errors)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::ModelRunRecord;
    use num_rational::Rational64;
    use proptest::prelude::*;

    const D: [bool; 4] = [false, false, true, true];
    const E_SMALL: [bool; 4] = [false, true, false, true];

    /// small defers q2, q3 (confidence below 0.5); big never errs.
    fn four_query_log() -> EvaluationLog {
        let confs = [0.9, 0.8, 0.3, 0.1];
        let mut records = Vec::new();
        for i in 0..4 {
            let q = format!("q{i}");
            records.push(ModelRunRecord::new(&q, "s", E_SMALL[i], 0.1, 1.0).with_confidence(confs[i]));
            records.push(ModelRunRecord::new(&q, "b", false, 1.0, 2.0));
        }
        EvaluationLog::from_records(records).unwrap()
    }

    fn chain() -> Vec<String> {
        vec!["s".into(), "b".into()]
    }

    #[test]
    fn cer_examples() {
        let same = [false, true, false, true];
        assert_eq!(cascade_error_reduction::<f64>(&same, &same).unwrap(), 0.25);
        assert_eq!(cascade_error_reduction::<f64>(&D, &E_SMALL).unwrap(), 0.0);
        assert_eq!(cascade_error_reduction::<f64>(&[true; 4], &E_SMALL).unwrap(), 0.0);
        assert!(matches!(
            cascade_error_reduction::<f64>(&D, &E_SMALL[..3]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            cascade_error_reduction::<f64>(&[true], &[true]),
            Err(Error::TooFewObservations { .. })
        ));
    }

    #[test]
    fn four_query_decomposition() {
        let log = four_query_log();
        let outcomes = realize_cascade(&log, &chain(), &[0.5]).unwrap();
        let d = decompose_cascade_error(&outcomes, &log, "s", "b").unwrap();
        assert_eq!(d.p_d, 0.5);
        assert_eq!(d.e_small, 0.5);
        assert_eq!(d.e_big, 0.0);
        assert_eq!(d.cov_defer_small, 0.0);
        assert_eq!(d.cov_defer_big, 0.0);
        assert_eq!(d.reconstructed_error, 0.25);
        assert_eq!(d.observed_error, 0.25);
    }

    #[test]
    fn degenerate_deferral() {
        let log = four_query_log();
        let never = realize_cascade(&log, &chain(), &[0.0]).unwrap();
        let d = decompose_cascade_error(&never, &log, "s", "b").unwrap();
        assert_eq!(d.reconstructed_error, d.e_small);
        let always = realize_cascade(&log, &chain(), &[1.0]).unwrap();
        let d = decompose_cascade_error(&always, &log, "s", "b").unwrap();
        assert_eq!(d.reconstructed_error, d.e_big);
    }

    #[test]
    fn mismatched_outcomes_are_rejected() {
        let log = four_query_log();
        let outcomes = realize_cascade(&log, &chain(), &[0.5]).unwrap();
        assert!(matches!(
            decompose_cascade_error(&outcomes, &log, "b", "s"),
            Err(Error::InvalidCascade(_))
        ));
        assert!(matches!(
            decompose_cascade_error(&outcomes, &log, "s", "x"),
            Err(Error::UnknownModel(_))
        ));
    }

    #[test]
    fn curve_on_the_fixture() {
        let log = four_query_log();
        let curve = cer_vs_threshold_curve(&log, &chain(), &[0.0, 0.5, 0.85, 1.0]).unwrap();
        assert_eq!((curve[0].deferral_rate, curve[0].cer), (0.0, 0.0));
        assert_eq!((curve[1].deferral_rate, curve[1].cer), (0.5, 0.0));
        // defers q1, q2, q3: E[D·e] = 2/4, p_d·e = 3/4·1/2
        assert_eq!((curve[2].deferral_rate, curve[2].cer), (0.75, 0.125));
        assert_eq!((curve[3].deferral_rate, curve[3].cer), (1.0, 0.0));
    }

    proptest! {
        #[test]
        fn cer_bounded_and_zero_for_constant_flags(
            flags in prop::collection::vec((any::<bool>(), any::<bool>()), 2..200),
        ) {
            let (d, e): (Vec<bool>, Vec<bool>) = flags.into_iter().unzip();
            let c: f64 = cascade_error_reduction(&d, &e).unwrap();
            prop_assert!((-0.25..=0.25).contains(&c));
            let constant = vec![d[0]; d.len()];
            prop_assert_eq!(cascade_error_reduction::<f64>(&constant, &e).unwrap(), 0.0);
        }

        #[test]
        fn decomposition_is_exact_in_rationals(
            rows in prop::collection::vec((0.0f64..=1.0, any::<bool>(), any::<bool>()), 1..60),
            t in 0.0f64..=1.0,
        ) {
            let mut records = Vec::new();
            for (i, &(c, es, eb)) in rows.iter().enumerate() {
                let q = format!("q{i}");
                records.push(ModelRunRecord::new(&q, "s", es, 0.0, 0.0).with_confidence(c));
                records.push(ModelRunRecord::new(&q, "b", eb, 0.0, 0.0));
            }
            let log = EvaluationLog::from_records(records).unwrap();
            let exact: EvaluationLog<Rational64> = log
                .map_records(|r| ModelRunRecord {
                    query_id: r.query_id.clone(),
                    model_id: r.model_id.clone(),
                    is_error: r.is_error,
                    abstained: false,
                    cost_usd: Rational64::from_integer(0),
                    latency_sec: Rational64::from_integer(0),
                    confidence: r.confidence.map(|c| Rational64::new((c * 1000.0) as i64, 1000)),
                    numeric_metrics: Default::default(),
                    binary_events: Default::default(),
                    tokens_in: None,
                    tokens_out: None,
                })
                .unwrap();
            let threshold = Rational64::new((t * 1000.0) as i64, 1000);
            let outcomes = realize_cascade(&exact, &chain(), &[threshold]).unwrap();
            let d = decompose_cascade_error(&outcomes, &exact, "s", "b").unwrap();
            prop_assert_eq!(d.observed_error, d.reconstructed_error);
        }
    }
}
