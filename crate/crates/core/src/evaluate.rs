//! Batch N-1 evaluation: simulate, detect and localize every non-islanding
//! single-line outage, then summarize by whether the tripped line was
//! monitored.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::DatasetError;
use crate::detector::{detect_with, DetectError, DetectorParams};
use crate::exec::Execution;
use crate::grid::{dc_power_flow, BranchId, GridError, NetworkModel};
use crate::locator::{
    baseline_locate_freq_with, error_to_truth, locate_with, LocateError, PowerChangeWindows,
};
use crate::scenario::{
    simulate_scenario, FreqTemplate, NoiseConfig, ScenarioConfig, ScenarioError,
};

#[derive(Debug, Error)]
pub enum EvaluateError {
    #[error("no monitored branch at coverage {0}")]
    NoMonitoredBranch(f64),
    #[error("invalid evaluation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Locate(#[from] LocateError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluationConfig {
    /// Fraction of branches carrying a PMU channel.
    pub coverage: f64,
    /// Noise seeds per outage.
    pub seeds: usize,
    pub base_seed: u64,
    /// Keep tripped lines out of the monitored set.
    pub exclude_outaged: bool,
    pub noise: NoiseConfig,
    pub freq_signature: FreqTemplate,
    /// Seconds.
    pub duration: f64,
    /// Seconds.
    pub event_time: f64,
    pub reporting_rate: f64,
    pub detector: DetectorParams,
    pub windows: PowerChangeWindows,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            coverage: 1.0,
            seeds: 1,
            base_seed: 0,
            exclude_outaged: false,
            noise: NoiseConfig::default(),
            freq_signature: FreqTemplate::default(),
            duration: 30.0,
            event_time: 10.0,
            reporting_rate: 25.0,
            detector: DetectorParams::default(),
            windows: PowerChangeWindows::default(),
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseSpec {
    pub id: usize,
    pub outage: BranchId,
    pub seed: u64,
}

/// Every non-islanding outage crossed with `seeds` consecutive seeds.
pub fn n_minus_1_cases(net: &NetworkModel, seeds: usize, base_seed: u64) -> Vec<CaseSpec> {
    net.non_islanding_outages()
        .into_iter()
        .flat_map(|outage| (0..seeds as u64).map(move |s| (outage, base_seed + s)))
        .enumerate()
        .map(|(id, (outage, seed))| CaseSpec { id, outage, seed })
        .collect()
}

/// Branches carrying a channel: a seeded shuffle, first `round(coverage * n)`.
pub fn monitored_set(
    net: &NetworkModel,
    coverage: f64,
    seed: u64,
    exclude: &[BranchId],
) -> Result<Vec<BranchId>, EvaluateError> {
    if !(0.0..=1.0).contains(&coverage) {
        return Err(EvaluateError::InvalidConfig(format!(
            "coverage {coverage} outside [0, 1]"
        )));
    }
    let mut ids: Vec<BranchId> = net.branches().iter().map(|b| b.id).collect();
    let count = (coverage * ids.len() as f64).round() as usize;
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut chosen: Vec<BranchId> = ids
        .into_iter()
        .filter(|id| !exclude.contains(id))
        .take(count)
        .collect();
    if chosen.is_empty() {
        return Err(EvaluateError::NoMonitoredBranch(coverage));
    }
    chosen.sort_unstable();
    Ok(chosen)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRow {
    pub case: String,
    pub outaged_branch: BranchId,
    pub voltage_label: String,
    pub monitored: bool,
    pub detected: bool,
    pub event_time_error_s: Option<f64>,
    pub identified_correctly: bool,
    pub estimated_branch: Option<BranchId>,
    pub error_miles: Option<f64>,
    pub baseline_error_miles: Option<f64>,
    pub pre_flow_mw: f64,
    pub noise_floor_mw: Option<f64>,
    pub low_confidence: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub cases: usize,
    pub detected: usize,
    pub identified: usize,
    pub detection_rate: f64,
    pub identification_rate: f64,
    pub max_error_miles: f64,
    pub mean_error_miles: f64,
    pub baseline_max_error_miles: f64,
    pub baseline_mean_error_miles: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSummary {
    pub monitored: GroupSummary,
    pub unmonitored: GroupSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub monitored_branches: Vec<BranchId>,
    pub rows: Vec<EvaluationRow>,
    pub summary: EvaluationSummary,
}

fn voltage_label(net: &NetworkModel, id: BranchId) -> String {
    match net.branch(id).ok().and_then(|b| b.voltage_kv) {
        Some(kv) => format!("{kv} kV"),
        None => String::new(),
    }
}

fn run_case(
    net: &NetworkModel,
    monitored: &[BranchId],
    case: &CaseSpec,
    cfg: &EvaluationConfig,
) -> Result<EvaluationRow, EvaluateError> {
    let pre_flow = dc_power_flow(net)?
        .get(case.outage)
        .ok_or(GridError::MissingFlow(case.outage))?;
    let scenario = ScenarioConfig {
        event_time: cfg.event_time,
        duration: cfg.duration,
        reporting_rate: cfg.reporting_rate,
        noise: NoiseConfig {
            rng_seed: case.seed,
            ..cfg.noise.clone()
        },
        freq_signature: cfg.freq_signature.clone(),
        monitored: Some(monitored.to_vec()),
        ..ScenarioConfig::new("", case.outage)
    };
    let data = simulate_scenario(net, &scenario)?;
    let truth_ms = scenario.start_epoch_ms + (cfg.event_time * 1000.0).round() as i64;

    let mut row = EvaluationRow {
        case: format!("case{:04}-L{}-s{}", case.id, case.outage, case.seed),
        outaged_branch: case.outage,
        voltage_label: voltage_label(net, case.outage),
        monitored: monitored.contains(&case.outage),
        detected: false,
        event_time_error_s: None,
        identified_correctly: false,
        estimated_branch: None,
        error_miles: None,
        baseline_error_miles: None,
        pre_flow_mw: pre_flow,
        noise_floor_mw: None,
        low_confidence: false,
    };
    let events = detect_with(&data, &cfg.detector, Execution::Sequential)?;
    let Some(event) = events
        .iter()
        .min_by_key(|e| (e.event_time_ms - truth_ms).abs())
    else {
        return Ok(row);
    };
    row.detected = true;
    row.event_time_error_s = Some((event.event_time_ms - truth_ms) as f64 / 1000.0);

    let found = locate_with(&data, net, event, &cfg.windows, Execution::Sequential)?;
    let baseline =
        baseline_locate_freq_with(&data, net, event, &cfg.windows, Execution::Sequential)?;
    row.identified_correctly = found.estimated_branch == case.outage;
    row.estimated_branch = Some(found.estimated_branch);
    row.error_miles = Some(error_to_truth(&found, net, case.outage)?);
    row.baseline_error_miles = Some(error_to_truth(&baseline, net, case.outage)?);
    row.noise_floor_mw = Some(found.noise_floor);
    row.low_confidence = found.low_confidence;
    Ok(row)
}

fn summarize(rows: &[&EvaluationRow]) -> GroupSummary {
    let cases = rows.len();
    let detected = rows.iter().filter(|r| r.detected).count();
    let identified = rows.iter().filter(|r| r.identified_correctly).count();
    let rate = |k: usize| {
        if cases == 0 {
            0.0
        } else {
            k as f64 / cases as f64
        }
    };
    let stats = |pick: fn(&EvaluationRow) -> Option<f64>| {
        let v: Vec<f64> = rows.iter().filter_map(|r| pick(r)).collect();
        if v.is_empty() {
            (0.0, 0.0)
        } else {
            let max = v.iter().copied().fold(0.0, f64::max);
            (max, v.iter().sum::<f64>() / v.len() as f64)
        }
    };
    let (max_error_miles, mean_error_miles) = stats(|r| r.error_miles);
    let (baseline_max_error_miles, baseline_mean_error_miles) = stats(|r| r.baseline_error_miles);
    GroupSummary {
        cases,
        detected,
        identified,
        detection_rate: rate(detected),
        identification_rate: rate(identified),
        max_error_miles,
        mean_error_miles,
        baseline_max_error_miles,
        baseline_mean_error_miles,
    }
}

pub fn summarize_rows(rows: &[EvaluationRow]) -> EvaluationSummary {
    let (m, u): (Vec<&EvaluationRow>, Vec<&EvaluationRow>) = rows.iter().partition(|r| r.monitored);
    EvaluationSummary {
        monitored: summarize(&m),
        unmonitored: summarize(&u),
    }
}

/// Run explicit cases. Rows come back in case order whatever the schedule.
pub fn evaluate_cases(
    net: &NetworkModel,
    cases: &[CaseSpec],
    cfg: &EvaluationConfig,
) -> Result<Evaluation, EvaluateError> {
    cfg.detector.validate()?;
    cfg.windows.validate()?;
    if cfg.seeds == 0 {
        return Err(EvaluateError::InvalidConfig(
            "seeds must be at least 1".into(),
        ));
    }
    let exclude: Vec<BranchId> = if cfg.exclude_outaged {
        cases.iter().map(|c| c.outage).collect()
    } else {
        Vec::new()
    };
    let monitored = monitored_set(net, cfg.coverage, cfg.base_seed, &exclude)?;
    let results = cfg
        .execution
        .map(cases, |case| run_case(net, &monitored, case, cfg));
    let mut rows = Vec::with_capacity(results.len());
    for r in results {
        rows.push(r?);
    }
    let summary = summarize_rows(&rows);
    Ok(Evaluation {
        monitored_branches: monitored,
        rows,
        summary,
    })
}

/// N-1 sweep over every non-islanding outage with `cfg.seeds` seeds each.
pub fn evaluate(net: &NetworkModel, cfg: &EvaluationConfig) -> Result<Evaluation, EvaluateError> {
    let cases = n_minus_1_cases(net, cfg.seeds, cfg.base_seed);
    evaluate_cases(net, &cases, cfg)
}

pub fn write_rows_csv<W: Write>(rows: &[EvaluationRow], out: W) -> Result<(), DatasetError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)
            .map_err(|e| DatasetError::Schema(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn zero_coverage_has_no_monitored_branch() {
        let net = fixtures::k4();
        let cfg = EvaluationConfig {
            coverage: 0.0,
            ..EvaluationConfig::default()
        };
        assert!(matches!(
            evaluate(&net, &cfg),
            Err(EvaluateError::NoMonitoredBranch(_))
        ));
    }

    #[test]
    fn monitored_set_is_seeded() {
        let net = fixtures::ne39();
        let a = monitored_set(&net, 0.5, 3, &[]).unwrap();
        assert_eq!(a.len(), 23);
        assert_eq!(a, monitored_set(&net, 0.5, 3, &[]).unwrap());
        let b = monitored_set(&net, 0.5, 3, &[1, 2, 3]).unwrap();
        assert!(b.iter().all(|id| ![1, 2, 3].contains(id)));
    }

    #[test]
    fn k4_full_coverage_is_exact() {
        let net = fixtures::k4();
        let eval = evaluate(&net, &EvaluationConfig::default()).unwrap();
        assert_eq!(eval.rows.len(), 6);
        for row in &eval.rows {
            assert!(row.detected, "{}", row.case);
            if row.pre_flow_mw.abs() > 3.0 * row.noise_floor_mw.unwrap() {
                assert!(row.identified_correctly, "{}", row.case);
                assert_eq!(row.error_miles, Some(0.0));
            }
        }
        assert_eq!(eval.summary.unmonitored.cases, 0);
    }

    #[test]
    fn rows_ordered_and_schedule_independent() {
        let net = fixtures::ring8();
        let mut cfg = EvaluationConfig {
            seeds: 2,
            coverage: 0.5,
            ..EvaluationConfig::default()
        };
        let par = evaluate(&net, &cfg).unwrap();
        cfg.execution = Execution::Sequential;
        let seq = evaluate(&net, &cfg).unwrap();
        assert_eq!(par, seq);
        let names: Vec<_> = par.rows.iter().map(|r| r.case.clone()).collect();
        let mut sorted = names.clone();
        sorted.sort();
        assert_eq!(names, sorted);
        let mut buf = Vec::new();
        write_rows_csv(&par.rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("case,outaged_branch,voltage_label,monitored,detected"));
        assert_eq!(text.lines().count(), par.rows.len() + 1);
    }
}
