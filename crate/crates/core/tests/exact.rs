//! The same pipeline run in exact rational arithmetic, where identities
//! hold with equality rather than up to rounding.

use econeval::analysis::{critical_price_of_error, decompose_cascade_error};
use econeval::system::realize_cascade;
use econeval::tuning::{tune, ThresholdGrid};
use econeval::{expected_reward, Candidate, CandidateSystem, EconomicScenario, EvaluationLog, ModelRunRecord};
use num_rational::Ratio;

type Q = Ratio<i128>;

fn q(n: i128, d: i128) -> Q {
    Q::new(n, d)
}

fn log() -> EvaluationLog<Q> {
    // (small error, small confidence, big error)
    let rows = [
        (false, q(9, 10), false),
        (true, q(3, 10), false),
        (true, q(7, 10), true),
        (false, q(1, 5), false),
        (true, q(1, 10), false),
        (false, q(1, 2), true),
        (false, q(4, 5), false),
    ];
    let mut records = Vec::new();
    for (i, &(small_err, conf, big_err)) in rows.iter().enumerate() {
        let id = format!("q{i}");
        records.push(ModelRunRecord::new(&id, "small", small_err, q(1, 1000), q(1, 2)).with_confidence(conf));
        records.push(ModelRunRecord::new(&id, "big", big_err, q(3, 100), q(4, 1)).with_confidence(q(1, 1)));
    }
    EvaluationLog::from_records(records).unwrap()
}

fn chain() -> Vec<String> {
    vec!["small".into(), "big".into()]
}

#[test]
fn decomposition_is_exact_at_every_threshold() {
    let log = log();
    let grid = ThresholdGrid::full_resolution(&log, &chain()).unwrap();
    for &t in &grid.stage_grids()[0] {
        let outcomes = realize_cascade(&log, &chain(), &[t]).unwrap();
        let d = decompose_cascade_error(&outcomes, &log, "small", "big").unwrap();
        assert_eq!(d.observed_error, d.reconstructed_error, "threshold {t}");
    }
}

#[test]
fn rewards_tie_exactly_at_the_critical_price() {
    let log = log();
    let small = Candidate::new("small", CandidateSystem::standalone("small"));
    let big = Candidate::new("big", CandidateSystem::standalone("big"));
    let base = EconomicScenario::<Q>::zero();
    let report = critical_price_of_error(&small, &big, &log, &base).unwrap();
    let price = report.critical.expect("big is more accurate");
    // (0.03 - 0.001) / (3/7 - 2/7)
    assert_eq!(price, q(203, 1000));

    let at = base.with_error(price);
    let reward = |c: &Candidate<Q>| expected_reward(&c.system.realize(&log).unwrap(), &at).unwrap().mean_reward;
    assert_eq!(reward(&small), reward(&big));
}

#[test]
fn tuned_reward_matches_brute_force_exactly() {
    let log = log();
    let scenario = EconomicScenario::<Q>::zero().with_error(q(1, 10));
    let grid = ThresholdGrid::full_resolution(&log, &chain()).unwrap();
    let tuned = tune(&log, &chain(), &grid, &scenario).unwrap();
    let best = grid.stage_grids()[0]
        .iter()
        .map(|&t| {
            let outcomes = realize_cascade(&log, &chain(), &[t]).unwrap();
            expected_reward(&outcomes, &scenario).unwrap().mean_reward
        })
        .max()
        .unwrap();
    assert_eq!(tuned.train_reward, best);
}
