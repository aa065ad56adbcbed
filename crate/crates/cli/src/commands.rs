use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use outage_core::dataset::PmuDataset;
use outage_core::detector::{detect, DetectionEvent, EventReport};
use outage_core::evaluate::{evaluate, write_rows_csv, EvaluationConfig};
use outage_core::export::localization_geojson;
use outage_core::fixtures;
use outage_core::grid::{BranchId, DcSolver, NetworkModel, Transaction};
use outage_core::locator::{
    baseline_locate_freq, error_to_truth, locate, LocalizationResult, Method,
};
use outage_core::scenario::{simulate_scenario, NoiseConfig, ScenarioConfig};
use outage_core::Execution;
use serde::Serialize;

use crate::error::CliError;
use crate::{Command, MethodArg};

type Result<T> = std::result::Result<T, CliError>;

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate {
            config,
            network,
            seed,
            out,
        } => {
            let mut cfg = ScenarioConfig::load(&config)?;
            if let Some(net) = network {
                cfg.network = net;
            }
            if let Some(seed) = seed {
                cfg.noise.rng_seed = seed;
            }
            let base = config.parent().unwrap_or(Path::new("."));
            let net = cfg.load_network(base)?;
            let data = simulate_scenario(&net, &cfg)?;
            emit(out.as_deref(), data.to_csv_string()?.as_bytes())
        }
        Command::Detect {
            data,
            detector,
            out,
        } => {
            let params = detector.params();
            let dataset = read_dataset(&data)?;
            let reports: Vec<EventReport> = detect(&dataset, &params)?
                .into_iter()
                .map(|event| EventReport {
                    event,
                    params_echo: params.clone(),
                })
                .collect();
            emit(out.as_deref(), &to_json(&reports)?)
        }
        Command::Locate {
            data,
            network,
            event,
            method,
            truth,
            detector,
            windows,
            out,
        } => {
            let net = load_network(&network)?;
            let mut dataset = read_dataset(&data)?;
            dataset.attach_sites(&net)?;
            let event = match event {
                Some(path) => read_event(&path)?,
                None => detect(&dataset, &detector.params())?
                    .into_iter()
                    .next()
                    .ok_or_else(|| CliError::Data("no event detected in the dataset".into()))?,
            };
            let windows = windows.windows();
            let mut reports = Vec::new();
            if method != MethodArg::Baseline {
                reports.push(locate(&dataset, &net, &event, &windows)?);
            }
            if method != MethodArg::PowerChange {
                reports.push(baseline_locate_freq(&dataset, &net, &event, &windows)?);
            }
            if let Some(actual) = truth {
                for r in &mut reports {
                    r.error_miles = Some(error_to_truth(r, &net, actual)?);
                }
            }
            emit(out.as_deref(), &to_json(&reports)?)
        }
        Command::Factors {
            network,
            outage,
            transaction,
            out,
        } => {
            let net = load_network(&network)?;
            let table = match (outage, transaction) {
                (Some(m), _) => lodf_table(&net, m)?,
                (None, Some(pair)) => ptdf_table(&net, pair[0], pair[1])?,
                (None, None) => {
                    return Err(CliError::Usage("need --outage or --transaction".into()))
                }
            };
            emit(out.as_deref(), table.as_bytes())
        }
        Command::Evaluate {
            network,
            coverage,
            seeds,
            seed,
            exclude_outaged,
            sigma_hz,
            sigma_mw,
            spike_probability,
            sequential,
            detector,
            windows,
            out,
            summary,
        } => {
            let net = load_network(&network)?;
            let cfg = EvaluationConfig {
                coverage,
                seeds,
                base_seed: seed,
                exclude_outaged,
                noise: NoiseConfig {
                    gaussian_sigma_hz: sigma_hz,
                    gaussian_sigma_mw: sigma_mw,
                    spike_probability,
                    ..NoiseConfig::default()
                },
                detector: detector.params(),
                windows: windows.windows(),
                execution: if sequential {
                    Execution::Sequential
                } else {
                    Execution::Parallel
                },
                ..EvaluationConfig::default()
            };
            cfg.noise
                .validate()
                .map_err(|e| CliError::Usage(e.to_string()))?;
            let result = evaluate(&net, &cfg)?;
            let mut rows = Vec::new();
            write_rows_csv(&result.rows, &mut rows)?;
            emit(out.as_deref(), &rows)?;
            let text = to_json(&result.summary)?;
            match summary {
                Some(path) => write_file(&path, &text),
                None => {
                    eprint!("{}", String::from_utf8_lossy(&text));
                    Ok(())
                }
            }
        }
        Command::ExportMap {
            localization,
            network,
            out,
        } => {
            let net = load_network(&network)?;
            let report = read_localization(&localization)?;
            let geo = localization_geojson(&report, &net)?;
            emit(out.as_deref(), &to_json(&geo)?)
        }
    }
}

fn load_network(arg: &str) -> Result<NetworkModel> {
    match arg.strip_prefix("fixture:") {
        Some(name) => fixtures::by_name(name).ok_or_else(|| {
            CliError::Usage(format!(
                "unknown fixture {name:?}; known: {}",
                fixtures::NAMES.join(", ")
            ))
        }),
        None => Ok(NetworkModel::load(arg)?),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn read_dataset(path: &Path) -> Result<PmuDataset> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    PmuDataset::read_csv(std::io::BufReader::new(file))
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// First element of a JSON array, or the value itself.
fn first_of<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let text = read_text(path)?;
    let parse =
        |e: serde_json::Error| CliError::Data(format!("{}: {what} JSON: {e}", path.display()));
    let value: serde_json::Value = serde_json::from_str(&text).map_err(parse)?;
    let value = match value {
        serde_json::Value::Array(items) => items
            .into_iter()
            .next()
            .ok_or_else(|| CliError::Data(format!("{}: empty {what} list", path.display())))?,
        other => other,
    };
    serde_json::from_value(value).map_err(parse)
}

fn read_event(path: &Path) -> Result<DetectionEvent> {
    first_of(path, "event")
}

fn read_localization(path: &Path) -> Result<LocalizationResult> {
    let text = read_text(path)?;
    let parse = |e: serde_json::Error| {
        CliError::Data(format!("{}: localization JSON: {e}", path.display()))
    };
    if let Ok(list) = serde_json::from_str::<Vec<LocalizationResult>>(&text) {
        return list
            .iter()
            .find(|r| r.method == Method::PowerChange)
            .or(list.first())
            .cloned()
            .ok_or_else(|| CliError::Data(format!("{}: empty localization list", path.display())));
    }
    serde_json::from_str(&text).map_err(parse)
}

fn lodf_table(net: &NetworkModel, outage: BranchId) -> Result<String> {
    let solver = DcSolver::new(net)?;
    let pre = solver.base_flows()?;
    let zeta = solver.lodf(outage)?;
    let delta = solver.predicted_flow_change(&pre, outage)?;
    let mut out = String::from("branch_id,from_bus,to_bus,lodf,pre_flow_mw,delta_p_mw\n");
    for br in net.in_service() {
        let z = if br.id == outage {
            -1.0
        } else {
            zeta.get(br.id).unwrap_or(0.0)
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            br.id,
            br.from_bus,
            br.to_bus,
            z,
            pre.get(br.id).unwrap_or(0.0),
            delta[&br.id]
        );
    }
    Ok(out)
}

fn ptdf_table(net: &NetworkModel, from: u32, to: u32) -> Result<String> {
    let phi = DcSolver::new(net)?.ptdf(&Transaction::new(from, to, 1.0))?;
    let mut out = String::from("branch_id,from_bus,to_bus,ptdf\n");
    for br in net.in_service() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            br.id,
            br.from_bus,
            br.to_bus,
            phi.get(br.id).unwrap_or(0.0)
        );
    }
    Ok(out)
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut text = serde_json::to_vec_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
    text.push(b'\n');
    Ok(text)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => write_file(path, bytes),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::io(Path::new("<stdout>"), e))
        }
    }
}
