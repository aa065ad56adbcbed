//! Transmission-line outage detection and localization from synchrophasor
//! streams.
//!
//! A DC power-flow model ([`grid`]) with PTDF/LODF distribution factors
//! drives a scenario simulator ([`scenario`]) that writes synthetic PMU
//! data. The detector ([`detector`]) flags events from de-trended frequency;
//! the locator ([`locator`]) ranks pre/post active-power changes to name the
//! outaged line. [`evaluate`] runs whole N-1 sweeps.
//!
//! Batch work runs on rayon when the `parallel` feature is on (the default);
//! [`exec::Execution::Sequential`] forces a single thread either way.

pub mod dataset;
pub mod detector;
pub mod evaluate;
pub mod exec;
pub mod export;
pub mod filters;
pub mod fixtures;
pub mod geo;
pub mod grid;
pub mod locator;
pub mod scenario;

pub use dataset::{Channel, PmuDataset};
pub use detector::{detect, DetectionEvent, DetectorParams};
pub use exec::Execution;
pub use grid::{BranchId, BusId, NetworkModel};
pub use locator::{baseline_locate_freq, locate, LocalizationResult, PowerChangeWindows};
pub use scenario::{simulate_scenario, ScenarioConfig};
