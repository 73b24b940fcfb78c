//! Sweeps over (price of error, price of latency) and the winning system
//! in each cell.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::records::{split, EvaluationLog, SplitSpec};
use crate::reward::{expected_reward, EconomicScenario};
use crate::scalar::Scalar;
use crate::system::{Candidate, CandidateSystem, QueryOutcome};
use crate::tuning::{tune, ThresholdGrid};

/// `per_decade` log-spaced values from `lo` to `hi` inclusive.
pub fn log_spaced(lo: f64, hi: f64, per_decade: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) || per_decade == 0 {
        return Err(Error::InvalidGrid(format!(
            "log-spaced grid needs 0 < lo <= hi and a positive density, got {lo}..{hi} at {per_decade}/decade"
        )));
    }
    let (a, b) = (lo.log10(), hi.log10());
    let steps = ((b - a) * per_decade as f64 - 1e-9).ceil().max(0.0) as usize;
    Ok((0..=steps)
        .map(|k| {
            if k == steps {
                hi
            } else {
                10f64.powf(a + k as f64 / per_decade as f64)
            }
        })
        .collect())
}

/// Price axes of a sensitivity sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioGrid<T = f64> {
    /// Dollars per error, ascending.
    pub error_prices: Vec<T>,
    /// Dollars per second, ascending.
    pub latency_prices: Vec<T>,
}

impl<T: Scalar> ScenarioGrid<T> {
    pub fn new(error_prices: Vec<T>, latency_prices: Vec<T>) -> Result<Self> {
        for (name, axis) in [("error", &error_prices), ("latency", &latency_prices)] {
            if axis.is_empty() {
                return Err(Error::InvalidGrid(format!("{name} price axis is empty")));
            }
            if axis.iter().any(|p| !p.is_finite_value() || *p < T::zero()) {
                return Err(Error::InvalidGrid(format!(
                    "{name} prices must be finite and non-negative"
                )));
            }
            if axis.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidGrid(format!(
                    "{name} prices must be strictly ascending"
                )));
            }
        }
        Ok(Self {
            error_prices,
            latency_prices,
        })
    }

    /// $0.0001 to $10,000 per error at four points per decade; latency at 0
    /// and one point per decade from $0.01 to $10 per minute.
    pub fn standard() -> Self {
        let to_t = |v: f64| T::from_f64(v).expect("grid value representable");
        let error = log_spaced(1e-4, 1e4, 4).expect("valid constants");
        let mut latency = vec![0.0];
        latency.extend(log_spaced(0.01, 10.0, 1).expect("valid constants").iter().map(|p| p / 60.0));
        Self {
            error_prices: error.into_iter().map(to_t).collect(),
            latency_prices: latency.into_iter().map(to_t).collect(),
        }
    }

    pub fn scaled(&self, k: T) -> Self {
        Self {
            error_prices: self.error_prices.iter().map(|&p| p * k).collect(),
            latency_prices: self.latency_prices.iter().map(|&p| p * k).collect(),
        }
    }
}

/// Per-cell cascade re-tuning: tune on the train side of `split` with a
/// quantile grid of `step`, score everything on the test side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridTuning {
    pub split: SplitSpec,
    pub step: f64,
}

/// One candidate's showing in one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore<T = f64> {
    pub id: String,
    pub reward: T,
    pub mean_cost: T,
    /// Thresholds in force, for cascades.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<Vec<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell<T = f64> {
    pub error_price: T,
    pub latency_price: T,
    pub winner: String,
    pub reward: T,
    /// Winner's reward minus the runner-up's; absent with one candidate.
    pub runner_up_gap: Option<T>,
    /// In candidate order.
    pub scores: Vec<CandidateScore<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport<T = f64> {
    pub error_prices: Vec<T>,
    pub latency_prices: Vec<T>,
    /// Row-major: error price outer, latency price inner.
    pub cells: Vec<GridCell<T>>,
}

impl<T: Scalar> GridReport<T> {
    pub fn cell(&self, error_index: usize, latency_index: usize) -> &GridCell<T> {
        &self.cells[error_index * self.latency_prices.len() + latency_index]
    }

    /// Winner ids, one row per error price.
    pub fn winners(&self) -> Vec<Vec<&str>> {
        self.cells
            .chunks(self.latency_prices.len())
            .map(|row| row.iter().map(|c| c.winner.as_str()).collect())
            .collect()
    }

    /// Rows are error prices, columns latency prices, cells winner ids.
    pub fn write_winners_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["error_price".to_string()];
        header.extend(self.latency_prices.iter().map(|&p| format!("latency_price={}", fmt_num(p))));
        w.write_record(&header).map_err(csv_error)?;
        for (i, row) in self.winners().iter().enumerate() {
            let mut record = vec![fmt_num(self.error_prices[i])];
            record.extend(row.iter().map(|s| s.to_string()));
            w.write_record(&record).map_err(csv_error)?;
        }
        w.flush().map_err(|e| Error::Io(e.to_string()))
    }

    /// One row per (cell, candidate).
    pub fn write_long_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "error_price",
            "latency_price",
            "candidate",
            "reward",
            "mean_cost",
            "thresholds",
            "is_winner",
        ])
        .map_err(csv_error)?;
        for cell in &self.cells {
            for s in &cell.scores {
                let thresholds = s
                    .thresholds
                    .as_ref()
                    .map(|t| t.iter().map(|&v| fmt_num(v)).collect::<Vec<_>>().join(";"))
                    .unwrap_or_default();
                w.write_record([
                    fmt_num(cell.error_price),
                    fmt_num(cell.latency_price),
                    s.id.clone(),
                    fmt_num(s.reward),
                    fmt_num(s.mean_cost),
                    thresholds,
                    (s.id == cell.winner).to_string(),
                ])
                .map_err(csv_error)?;
            }
        }
        w.flush().map_err(|e| Error::Io(e.to_string()))
    }
}

pub(crate) fn fmt_num<T: Scalar>(v: T) -> String {
    format!("{}", v.to_f64_lossy())
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Scores candidates under arbitrary scenarios, either replaying fixed
/// systems on the whole log or re-tuning cascades per scenario on a train
/// split and replaying on the test split.
pub(crate) struct Scorer<'a, T> {
    candidates: &'a [Candidate<T>],
    mode: Mode<T>,
}

enum Mode<T> {
    Fixed(Vec<Vec<QueryOutcome<T>>>),
    Tuned {
        train: EvaluationLog<T>,
        test: EvaluationLog<T>,
        /// Test outcomes for non-cascades, threshold grids for cascades.
        prepared: Vec<Prepared<T>>,
    },
}

enum Prepared<T> {
    Fixed(Vec<QueryOutcome<T>>),
    Cascade(Vec<String>, ThresholdGrid<T>),
}

impl<'a, T: Scalar> Scorer<'a, T> {
    pub(crate) fn new(
        candidates: &'a [Candidate<T>],
        log: &EvaluationLog<T>,
        tuning: Option<&GridTuning>,
    ) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::InvalidScenario("no candidate systems".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for c in candidates {
            if !seen.insert(c.id.as_str()) {
                return Err(Error::InvalidScenario(format!("duplicate candidate id `{}`", c.id)));
            }
        }
        let mode = match tuning {
            None => Mode::Fixed(
                candidates
                    .iter()
                    .map(|c| c.system.realize(log))
                    .collect::<Result<_>>()?,
            ),
            Some(t) => {
                let (train, test) = split(log, t.split)?;
                let prepared = candidates
                    .iter()
                    .map(|c| match &c.system {
                        CandidateSystem::Cascade { chain, .. } => Ok(Prepared::Cascade(
                            chain.clone(),
                            ThresholdGrid::quantiles(&train, chain, t.step)?,
                        )),
                        other => Ok(Prepared::Fixed(other.restricted_to(&test).realize(&test)?)),
                    })
                    .collect::<Result<_>>()?;
                Mode::Tuned {
                    train,
                    test,
                    prepared,
                }
            }
        };
        Ok(Self { candidates, mode })
    }

    pub(crate) fn scores(&self, scenario: &EconomicScenario<T>) -> Result<Vec<CandidateScore<T>>> {
        let score = |id: &str, outcomes: &[QueryOutcome<T>], thresholds: Option<Vec<T>>| {
            let summary = expected_reward(outcomes, scenario)?;
            Ok(CandidateScore {
                id: id.to_string(),
                reward: summary.mean_reward,
                mean_cost: summary.components["cost"],
                thresholds,
            })
        };
        match &self.mode {
            Mode::Fixed(all) => self
                .candidates
                .iter()
                .zip(all)
                .map(|(c, outcomes)| {
                    let thresholds = match &c.system {
                        CandidateSystem::Cascade { thresholds, .. } => Some(thresholds.clone()),
                        _ => None,
                    };
                    score(&c.id, outcomes, thresholds)
                })
                .collect(),
            Mode::Tuned {
                train,
                test,
                prepared,
            } => self
                .candidates
                .iter()
                .zip(prepared)
                .map(|(c, p)| match p {
                    Prepared::Fixed(outcomes) => score(&c.id, outcomes, None),
                    Prepared::Cascade(chain, grid) => {
                        let tuned = tune(train, chain, grid, scenario)?;
                        let outcomes = tuned.cascade.realize(test)?;
                        score(&c.id, &outcomes, Some(tuned.thresholds().to_vec()))
                    }
                })
                .collect(),
        }
    }
}

/// Best score: highest reward, then lowest mean cost, then smallest id.
pub(crate) fn winner_index<T: Scalar>(scores: &[CandidateScore<T>]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        let b = &scores[best];
        let better = s.reward > b.reward
            || (s.reward == b.reward
                && (s.mean_cost < b.mean_cost || (s.mean_cost == b.mean_cost && s.id < b.id)));
        if better {
            best = i;
        }
    }
    best
}

/// Expected reward of every candidate in every cell of `grid`, with the
/// remaining prices taken from `base`.
pub fn sensitivity_grid<T: Scalar>(
    candidates: &[Candidate<T>],
    log: &EvaluationLog<T>,
    grid: &ScenarioGrid<T>,
    base: &EconomicScenario<T>,
    tuning: Option<&GridTuning>,
) -> Result<GridReport<T>> {
    let grid = ScenarioGrid::new(grid.error_prices.clone(), grid.latency_prices.clone())?;
    base.validate()?;
    let scorer = Scorer::new(candidates, log, tuning)?;
    let mut cells = Vec::with_capacity(grid.error_prices.len() * grid.latency_prices.len());
    for &error_price in &grid.error_prices {
        for &latency_price in &grid.latency_prices {
            let scenario = base.clone().with_error(error_price).with_latency(latency_price);
            let scores = scorer.scores(&scenario)?;
            let w = winner_index(&scores);
            let runner_up = scores
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != w)
                .map(|(_, s)| s.reward)
                .fold(None, |acc: Option<T>, r| Some(acc.map_or(r, |a| if r > a { r } else { a })));
            cells.push(GridCell {
                error_price,
                latency_price,
                winner: scores[w].id.clone(),
                reward: scores[w].reward,
                runner_up_gap: runner_up.map(|r| scores[w].reward - r),
                scores,
            });
        }
    }
    Ok(GridReport {
        error_prices: grid.error_prices,
        latency_prices: grid.latency_prices,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::ModelRunRecord;

    /// `cheap` errs on half the queries at $0.001; `pricey` errs on a tenth
    /// at $0.05.
    fn two_model_log() -> EvaluationLog {
        let mut records = Vec::new();
        for i in 0..10 {
            let q = format!("q{i}");
            records.push(ModelRunRecord::new(&q, "cheap", i % 2 == 0, 0.001, 1.0).with_confidence(0.1 * i as f64));
            records.push(ModelRunRecord::new(&q, "pricey", i == 0, 0.05, 4.0));
        }
        EvaluationLog::from_records(records).unwrap()
    }

    fn standalones() -> Vec<Candidate> {
        vec![
            Candidate::new("cheap", CandidateSystem::standalone("cheap")),
            Candidate::new("pricey", CandidateSystem::standalone("pricey")),
        ]
    }

    #[test]
    fn log_spacing() {
        let g = log_spaced(1e-4, 1e4, 4).unwrap();
        assert_eq!(g.len(), 33);
        assert_eq!(g[0], 1e-4);
        assert_eq!(*g.last().unwrap(), 1e4);
        assert!((g[4] - 1e-3).abs() < 1e-15);
        assert_eq!(log_spaced(2.0, 2.0, 3).unwrap(), vec![2.0]);
        assert!(log_spaced(0.0, 1.0, 3).is_err());
        let s: ScenarioGrid = ScenarioGrid::standard();
        assert_eq!(s.latency_prices.len(), 5);
        assert_eq!(s.latency_prices[0], 0.0);
        assert!((s.latency_prices[4] - 10.0 / 60.0).abs() < 1e-15);
    }

    #[test]
    fn singleton_wins_everywhere() {
        let log = two_model_log();
        let only = &standalones()[..1];
        let report = sensitivity_grid(only, &log, &ScenarioGrid::standard(), &EconomicScenario::zero(), None).unwrap();
        assert!(report.cells.iter().all(|c| c.winner == "cheap" && c.runner_up_gap.is_none()));
    }

    #[test]
    fn winner_switches_once_at_the_crossover() {
        let log = two_model_log();
        let grid = ScenarioGrid::new(log_spaced(1e-4, 1e4, 100).unwrap(), vec![0.0]).unwrap();
        let report = sensitivity_grid(&standalones(), &log, &grid, &EconomicScenario::zero(), None).unwrap();
        let winners: Vec<&str> = report.cells.iter().map(|c| c.winner.as_str()).collect();
        let switch = winners.windows(2).position(|w| w[0] != w[1]).unwrap();
        assert!(winners[..=switch].iter().all(|&w| w == "cheap"));
        assert!(winners[switch + 1..].iter().all(|&w| w == "pricey"));
        // closed form: .049 / .4
        assert!(grid.error_prices[switch] <= 0.1225 && 0.1225 <= grid.error_prices[switch + 1]);
    }

    #[test]
    fn tie_breaks_on_cost_then_id() {
        let s = |id: &str, reward: f64, mean_cost: f64| CandidateScore {
            id: id.into(),
            reward,
            mean_cost,
            thresholds: None,
        };
        assert_eq!(winner_index(&[s("b", -1.0, 0.5), s("a", -1.0, 0.7)]), 0);
        assert_eq!(winner_index(&[s("b", -1.0, 0.5), s("a", -1.0, 0.5)]), 1);
        assert_eq!(winner_index(&[s("b", -2.0, 0.1), s("a", -1.0, 0.9)]), 1);
    }

    #[test]
    fn scaling_leaves_winners_unchanged() {
        let log = two_model_log();
        let grid = ScenarioGrid::standard();
        let report = sensitivity_grid(&standalones(), &log, &grid, &EconomicScenario::zero(), None).unwrap();
        let scaled_log = log
            .map_records(|r| {
                let mut r = r.clone();
                r.cost_usd *= 10.0;
                r
            })
            .unwrap();
        let scaled = sensitivity_grid(&standalones(), &scaled_log, &grid.scaled(10.0), &EconomicScenario::zero(), None)
            .unwrap();
        assert_eq!(report.winners(), scaled.winners());
    }

    #[test]
    fn tuned_cascades_report_thresholds() {
        let log = two_model_log();
        let mut candidates = standalones();
        candidates.push(Candidate::new("cascade", CandidateSystem::cascade(["cheap", "pricey"], vec![0.5])));
        let tuning = GridTuning {
            split: SplitSpec::new(0.5, 3),
            step: 0.25,
        };
        let grid = ScenarioGrid::new(vec![0.0, 1.0], vec![0.0]).unwrap();
        let report = sensitivity_grid(&candidates, &log, &grid, &EconomicScenario::zero(), Some(&tuning)).unwrap();
        // cost only: never defer
        assert_eq!(report.cell(0, 0).scores[2].thresholds, Some(vec![0.0]));
        assert!(report.cells.iter().all(|c| c.scores[2].thresholds.is_some()));
        assert!(report.cells.iter().all(|c| c.scores.iter().all(|s| s.reward <= 0.0)));
    }

    #[test]
    fn csv_outputs() {
        let log = two_model_log();
        let grid = ScenarioGrid::new(vec![0.01, 1.0], vec![0.0, 0.5]).unwrap();
        let report = sensitivity_grid(&standalones(), &log, &grid, &EconomicScenario::zero(), None).unwrap();
        let mut wide = Vec::new();
        report.write_winners_csv(&mut wide).unwrap();
        assert_eq!(
            String::from_utf8(wide).unwrap(),
            "error_price,latency_price=0,latency_price=0.5\n0.01,cheap,cheap\n1,pricey,cheap\n"
        );
        let mut long = Vec::new();
        report.write_long_csv(&mut long).unwrap();
        assert_eq!(String::from_utf8(long).unwrap().lines().count(), 1 + 2 * 2 * 2);
    }

    #[test]
    fn invalid_inputs() {
        let log = two_model_log();
        assert!(ScenarioGrid::new(vec![1.0, 0.5], vec![0.0]).is_err());
        assert!(ScenarioGrid::<f64>::new(vec![], vec![0.0]).is_err());
        let dup = vec![standalones()[0].clone(), standalones()[0].clone()];
        let grid = ScenarioGrid::new(vec![1.0], vec![0.0]).unwrap();
        assert!(sensitivity_grid(&dup, &log, &grid, &EconomicScenario::zero(), None).is_err());
        let ghost = vec![Candidate::new("x", CandidateSystem::standalone("ghost"))];
        assert!(matches!(
            sensitivity_grid(&ghost, &log, &grid, &EconomicScenario::zero(), None),
            Err(Error::UnknownModel(_))
        ));
    }
}
