use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvaluationLog;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Seeded query-level train/test split.
///
/// The train side receives `floor(train_fraction * n)` queries (with a 1e-9
/// guard against representation error, so 0.29 of 100 is 29, not 28). Every
/// model's record for a query lands on the same side, and both sides keep
/// the original query order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, seed: u64) -> Self {
        Self {
            train_fraction,
            seed,
        }
    }

    pub fn train_size(&self, n: usize) -> usize {
        ((self.train_fraction * n as f64) + 1e-9).floor() as usize
    }
}

pub fn split<T: Scalar>(
    log: &EvaluationLog<T>,
    spec: SplitSpec,
) -> Result<(EvaluationLog<T>, EvaluationLog<T>)> {
    let f = spec.train_fraction;
    if !(f > 0.0 && f < 1.0) {
        return Err(Error::InvalidSplit(format!(
            "train_fraction must lie in (0, 1), got {f}"
        )));
    }
    let n = log.n_queries();
    if n == 0 {
        return Err(Error::EmptyLog);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let (train, test) = order.split_at(spec.train_size(n));
    Ok((log.select_queries(train), log.select_queries(test)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::ModelRunRecord;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn log_with(n: usize) -> EvaluationLog {
        let records = (0..n)
            .flat_map(|q| {
                ["a", "b"].map(|m| ModelRunRecord::new(format!("q{q}"), m, q % 3 == 0, 0.01, 1.0))
            })
            .collect();
        EvaluationLog::from_records(records).unwrap()
    }

    #[test]
    fn half_of_500_is_250() {
        let (train, test) = split(&log_with(500), SplitSpec::new(0.5, 1)).unwrap();
        assert_eq!((train.n_queries(), test.n_queries()), (250, 250));
    }

    #[test]
    fn three_queries_floor_rule() {
        let log = log_with(3);
        let (train, test) = split(&log, SplitSpec::new(0.5, 9)).unwrap();
        assert_eq!((train.n_queries(), test.n_queries()), (1, 2));
        let again = split(&log, SplitSpec::new(0.5, 9)).unwrap();
        assert_eq!(again.0, train);
        assert_eq!(SplitSpec::new(0.29, 0).train_size(100), 29);
    }

    #[test]
    fn rejects_bad_fraction() {
        for f in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(matches!(
                split(&log_with(4), SplitSpec::new(f, 0)),
                Err(Error::InvalidSplit(_))
            ));
        }
    }

    proptest! {
        #[test]
        fn split_is_a_deterministic_partition(n in 1usize..60, f in 0.01f64..0.99, seed: u64) {
            let log = log_with(n);
            let (train, test) = split(&log, SplitSpec::new(f, seed)).unwrap();
            let (train2, test2) = split(&log, SplitSpec::new(f, seed)).unwrap();
            prop_assert_eq!(&train, &train2);
            prop_assert_eq!(&test, &test2);
            let a: BTreeSet<_> = train.query_ids().iter().collect();
            let b: BTreeSet<_> = test.query_ids().iter().collect();
            prop_assert!(a.is_disjoint(&b));
            prop_assert_eq!(a.len() + b.len(), n);
            prop_assert_eq!(train.records().len(), 2 * train.n_queries());
            // original relative order survives
            let pos: Vec<usize> = train.query_ids().iter().map(|q| log.query_position(q).unwrap()).collect();
            prop_assert!(pos.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
