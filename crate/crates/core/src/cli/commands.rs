use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{
    CerArgs, CliError, Command, CrossoverArgs, DecomposeArgs, EvaluateArgs, GridArgs, LogArgs, Outputs,
    ParetoArgs, PoeArgs, Provenance, SplitArgs, SynthArgs, TuneArgs, VerifyArgs,
};
use crate::analysis::{
    cer_vs_threshold_curve, critical_price_of_error, decompose_cascade_error, estimate_price_of_error,
    log_spaced, scan_crossover, sensitivity_grid, CrossoverReport, GridTuning, PriceOfErrorInputs,
    ScenarioGrid,
};
use crate::error::{Error, ErrorKind};
use crate::pareto::{
    frontier_indices, objective_names, objective_point, verify_lambda_to_pareto, write_frontier_csv,
    ObjectivePoint,
};
use crate::records::{ingest_log, split, write_jsonl, EvaluationLog, LogFormat, SplitSpec};
use crate::reward::{expected_reward, EconomicScenario};
use crate::scalar::rate;
use crate::synth::{generate, ModelProfile};
use crate::system::{realize_cascade, Candidate, CandidateSystem};
use crate::tuning::{evaluate_tuned, tune, ThresholdGrid};
use crate::units::{parse_latency_price, parse_price, parse_scenario};
use crate::verify::{run_checks, CheckConfig};

type CliResult<T> = Result<T, CliError>;

pub(super) fn execute(command: &Command) -> CliResult<Outputs> {
    match command {
        Command::Evaluate(a) => evaluate(a),
        Command::TuneCascade(a) => tune_cascade(a),
        Command::Grid(a) => grid(a),
        Command::Crossover(a) => crossover(a),
        Command::Cer(a) => cer(a),
        Command::Decompose(a) => decompose(a),
        Command::Pareto(a) => pareto(a),
        Command::EstimatePoe(a) => estimate_poe(a),
        Command::Synth(a) => synth(a),
        Command::VerifyTheorems(a) => verify_theorems(a),
    }
}

fn single(name: &str, bytes: Vec<u8>) -> Outputs {
    Outputs {
        reports: vec![(name.to_string(), bytes)],
        failure: None,
    }
}

fn read_file(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))
}

fn load_log(prov: &mut Provenance, args: &LogArgs) -> CliResult<EvaluationLog> {
    let bytes = read_file(&args.log)?;
    prov.input("log", &bytes);
    let format = args.format.unwrap_or_else(|| {
        match args.log.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => LogFormat::Csv,
            _ => LogFormat::Jsonl,
        }
    });
    Ok(ingest_log(bytes.as_slice(), format)?)
}

fn load_json<T: serde::de::DeserializeOwned>(prov: &mut Provenance, name: &str, path: &Path) -> CliResult<T> {
    let bytes = read_file(path)?;
    prov.input(name, &bytes);
    serde_json::from_slice(&bytes).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

fn load_scenario(prov: &mut Provenance, path: Option<&Path>) -> CliResult<EconomicScenario> {
    let Some(path) = path else {
        return Ok(EconomicScenario::zero());
    };
    let bytes = read_file(path)?;
    prov.input("scenario", &bytes);
    let text = String::from_utf8(bytes).map_err(|_| CliError::config(format!("{}: not UTF-8", path.display())))?;
    Ok(parse_scenario(&text)?)
}

fn load_candidates(prov: &mut Provenance, path: &Path) -> CliResult<Vec<Candidate>> {
    let candidates: Vec<Candidate> = load_json(prov, "candidates", path)?;
    if candidates.is_empty() {
        return Err(CliError::config(format!("{}: no candidates", path.display())));
    }
    Ok(candidates)
}

fn split_spec(s: &SplitArgs) -> SplitSpec {
    SplitSpec::new(s.train_fraction, s.seed)
}

#[derive(Serialize)]
struct CandidateEvaluation {
    id: String,
    mean_reward: f64,
    components: BTreeMap<String, f64>,
    mean_cost: f64,
    mean_latency: f64,
    error_rate: f64,
    abstention_rate: f64,
    deferral_rate: f64,
}

fn evaluate(args: &EvaluateArgs) -> CliResult<Outputs> {
    let mut prov = Provenance::new("evaluate", args);
    let log = load_log(&mut prov, &args.log)?;
    let candidates = load_candidates(&mut prov, &args.candidates)?;
    let scenario = load_scenario(&mut prov, Some(&args.scenario))?;
    let mut rows = Vec::new();
    for c in &candidates {
        let outcomes = c.system.realize(&log)?;
        let summary = expected_reward(&outcomes, &scenario)?;
        let objectives = objective_point(&c.id, &outcomes)?.values;
        rows.push(CandidateEvaluation {
            id: c.id.clone(),
            mean_reward: summary.mean_reward,
            components: summary.components,
            mean_cost: objectives[0],
            mean_latency: objectives[1],
            error_rate: objectives[2],
            abstention_rate: objectives[3],
            deferral_rate: rate(outcomes.iter().map(|o| o.deferred)).unwrap_or(0.0),
        });
    }
    let body = serde_json::json!({
        "n_queries": log.n_queries(),
        "scenario": scenario,
        "candidates": rows,
    });
    Ok(single("evaluate.json", prov.json_report(&body)?))
}

fn tune_cascade(args: &TuneArgs) -> CliResult<Outputs> {
    let mut prov = Provenance::new("tune-cascade", args);
    let log = load_log(&mut prov, &args.log)?;
    let scenario = load_scenario(&mut prov, Some(&args.scenario))?;
    let (train, test) = split(&log, split_spec(&args.split))?;
    let grid = if args.full_resolution {
        ThresholdGrid::full_resolution(&train, &args.chain)?
    } else {
        ThresholdGrid::quantiles(&train, &args.chain, args.split.step)?
    };
    let mut tuned = tune(&train, &args.chain, &grid, &scenario)?;
    let test_summary = evaluate_tuned(&test, &tuned, &scenario)?;
    tuned.test_reward = Some(test_summary.mean_reward);
    let body = serde_json::json!({
        "chain": args.chain,
        "thresholds": tuned.thresholds(),
        "train_queries": train.n_queries(),
        "test_queries": test.n_queries(),
        "train_reward": tuned.train_reward,
        "train_deferral_rate": tuned.deferral_rate,
        "test_reward": test_summary.mean_reward,
        "test_components": test_summary.components,
        "grid_sizes": grid.stage_grids().iter().map(Vec::len).collect::<Vec<_>>(),
        "multi_stage": args.chain.len() > 2,
    });
    Ok(single("tune.json", prov.json_report(&body)?))
}

fn parse_list(values: &[String], parse: fn(&str) -> crate::Result<f64>) -> CliResult<Vec<f64>> {
    values.iter().map(|v| parse(v).map_err(CliError::from)).collect()
}

fn tuning(enabled: bool, s: &SplitArgs) -> Option<GridTuning> {
    enabled.then(|| GridTuning {
        split: split_spec(s),
        step: s.step,
    })
}

fn grid(args: &GridArgs) -> CliResult<Outputs> {
    let mut prov = Provenance::new("grid", args);
    let log = load_log(&mut prov, &args.log)?;
    let candidates = load_candidates(&mut prov, &args.candidates)?;
    let base = load_scenario(&mut prov, args.scenario.as_deref())?;
    let standard = ScenarioGrid::standard();
    let error_prices = match &args.error_prices {
        Some(v) => parse_list(v, parse_price)?,
        None => log_spaced(1e-4, 1e4, args.per_decade)?,
    };
    let latency_prices = match &args.latency_prices {
        Some(v) => parse_list(v, parse_latency_price)?,
        None => standard.latency_prices,
    };
    let axes = ScenarioGrid::new(error_prices, latency_prices)?;
    let report = sensitivity_grid(&candidates, &log, &axes, &base, tuning(args.tune, &args.split).as_ref())?;
    let mut wide = Vec::new();
    report.write_winners_csv(&mut wide)?;
    let mut long = Vec::new();
    report.write_long_csv(&mut long)?;
    Ok(Outputs {
        reports: vec![
            ("grid_winners.csv".into(), prov.csv_report(wide)),
            ("grid_long.csv".into(), prov.csv_report(long)),
        ],
        failure: None,
    })
}

fn find<'a>(candidates: &'a [Candidate], id: &str) -> CliResult<&'a Candidate> {
    candidates
        .iter()
        .find(|c| c.id == id)
        .ok_or_else(|| CliError::config(format!("no candidate with id `{id}`")))
}

fn crossover(args: &CrossoverArgs) -> CliResult<Outputs> {
    let mut prov = Provenance::new("crossover", args);
    let log = load_log(&mut prov, &args.log)?;
    let candidates = load_candidates(&mut prov, &args.candidates)?;
    let mut scenario = load_scenario(&mut prov, args.scenario.as_deref())?;
    if let Some(p) = &args.latency_price {
        scenario.price_of_latency = parse_latency_price(p)?;
    }
    let (a, b) = (find(&candidates, &args.a)?, find(&candidates, &args.b)?);
    let retuned = args.tune
        && [a, b]
            .iter()
            .any(|c| matches!(c.system, CandidateSystem::Cascade { .. }));
    let closed_form: Option<CrossoverReport> = if retuned {
        None
    } else {
        Some(critical_price_of_error(a, b, &log, &scenario)?)
    };
    let prices = log_spaced(1e-4, 1e4, args.per_decade)?;
    let scan = scan_crossover(a, b, &log, &prices, &scenario, tuning(args.tune, &args.split).as_ref())?;
    let body = serde_json::json!({
        "price_of_latency": scenario.price_of_latency,
        "closed_form": closed_form,
        "scan": scan,
    });
    Ok(single("crossover.json", prov.json_report(&body)?))
}

fn two_model_chain(chain: &[String]) -> CliResult<(&str, &str)> {
    match chain {
        [small, big] => Ok((small, big)),
        _ => Err(Error::InvalidCascade(format!("expected two models, got {}", chain.len())).into()),
    }
}

fn cer(args: &CerArgs) -> CliResult<Outputs> {
    let mut prov = Provenance::new("cer", args);
    let log = load_log(&mut prov, &args.log)?;
    two_model_chain(&args.chain)?;
    let thresholds = match &args.thresholds {
        Some(t) => t.clone(),
        None => ThresholdGrid::quantiles(&log, &args.chain, args.step)?.stage_grids()[0].clone(),
    };
    let points = cer_vs_threshold_curve(&log, &args.chain, &thresholds)?;
    let body = serde_json::json!({ "chain": args.chain, "points": points });
    Ok(single("cer.json", prov.json_report(&body)?))
}

fn decompose(args: &DecomposeArgs) -> CliResult<Outputs> {
    let mut prov = Provenance::new("decompose", args);
    let log = load_log(&mut prov, &args.log)?;
    let (small, big) = two_model_chain(&args.chain)?;
    let outcomes = realize_cascade(&log, &args.chain, &[args.threshold])?;
    let d = decompose_cascade_error(&outcomes, &log, small, big)?;
    let body = serde_json::json!({
        "chain": args.chain,
        "threshold": args.threshold,
        "decomposition": d,
        "abs_gap": (d.observed_error - d.reconstructed_error).abs(),
    });
    Ok(single("decompose.json", prov.json_report(&body)?))
}

fn pareto(args: &ParetoArgs) -> CliResult<Outputs> {
    let mut prov = Provenance::new("pareto", args);
    let log = load_log(&mut prov, &args.log)?;
    let candidates = load_candidates(&mut prov, &args.candidates)?;
    let mut names: Option<Vec<String>> = None;
    let mut points = Vec::new();
    for c in &candidates {
        let outcomes = c.system.realize(&log)?;
        let these = objective_names(&outcomes);
        match &names {
            None => names = Some(these),
            Some(n) if *n != these => {
                return Err(CliError::config(format!("candidate `{}` reports different metrics", c.id)))
            }
            Some(_) => {}
        }
        points.push(objective_point(&c.id, &outcomes)?);
    }
    let all_names = names.expect("at least one candidate");
    let (names, points) = match &args.objectives {
        None => (all_names, points),
        Some(wanted) => {
            let idx = wanted
                .iter()
                .map(|w| {
                    all_names
                        .iter()
                        .position(|n| n == w)
                        .ok_or_else(|| CliError::config(format!("unknown objective `{w}`; available: {}", all_names.join(","))))
                })
                .collect::<CliResult<Vec<_>>>()?;
            let pts = points
                .into_iter()
                .map(|p| ObjectivePoint::new(p.label, idx.iter().map(|&i| p.values[i]).collect()))
                .collect();
            (wanted.clone(), pts)
        }
    };
    let mut csv = Vec::new();
    write_frontier_csv(&points, &names, &mut csv)?;

    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let lambdas: Vec<Vec<f64>> = (0..args.lambda_samples)
        .map(|_| (1..names.len()).map(|_| 10f64.powf(rng.gen_range(-4.0..4.0))).collect())
        .collect();
    let frontier: Vec<String> = frontier_indices(&points)?.into_iter().map(|i| points[i].label.clone()).collect();
    let mut reports = vec![("pareto.csv".to_string(), prov.csv_report(csv))];
    let mut failure = None;
    if names.len() > 1 && !lambdas.is_empty() {
        let check = verify_lambda_to_pareto(&points, &lambdas)?;
        if !check.violations.is_empty() {
            failure = Some(CliError {
                kind: ErrorKind::Computation,
                message: format!("{} reward maximizers off the frontier", check.violations.len()),
            });
        }
        let body = serde_json::json!({ "objectives": names, "frontier": frontier, "lambda_check": check });
        reports.push(("pareto_check.json".into(), prov.json_report(&body)?));
    }
    Ok(Outputs { reports, failure })
}

fn estimate_poe(args: &PoeArgs) -> CliResult<Outputs> {
    let prov = Provenance::new("estimate-poe", args);
    let inputs = PriceOfErrorInputs {
        mean_cost_given_event: args.mean_cost,
        p_error_given_event: args.p_error_given_event,
        p_event: args.p_event,
        p_error: args.p_error,
    };
    let value = estimate_price_of_error(&inputs)?;
    let body = serde_json::json!({ "inputs": inputs, "price_of_error": value });
    Ok(single("poe.json", prov.json_report(&body)?))
}

fn synth(args: &SynthArgs) -> CliResult<Outputs> {
    let mut prov = Provenance::new("synth", args);
    let profiles: Vec<ModelProfile> = load_json(&mut prov, "profiles", &args.profiles)?;
    let log = generate(&profiles, args.n_queries, args.seed)?;
    let mut jsonl = Vec::new();
    write_jsonl(&log, &mut jsonl)?;
    let manifest = serde_json::json!({
        "models": log.model_ids(),
        "n_queries": log.n_queries(),
        "seed": args.seed,
        "log_file": "synth_log.jsonl",
    });
    Ok(Outputs {
        reports: vec![
            ("synth_log.jsonl".into(), jsonl),
            ("synth_manifest.json".into(), prov.json_report(&manifest)?),
        ],
        failure: None,
    })
}

fn verify_theorems(args: &VerifyArgs) -> CliResult<Outputs> {
    let prov = Provenance::new("verify-theorems", args);
    let mut config = CheckConfig::new(args.seed, args.instances);
    config.n_queries = args.n_queries;
    let report = run_checks(&config)?;
    let violations = report.violations();
    let body = serde_json::json!({ "violations": violations, "checks": report });
    let failure = (violations > 0).then(|| CliError {
        kind: ErrorKind::Computation,
        message: format!("{violations} violations; see verify.json"),
    });
    Ok(Outputs {
        reports: vec![("verify.json".into(), prov.json_report(&body)?)],
        failure,
    })
}
