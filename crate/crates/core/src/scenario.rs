//! Synthetic PMU streams for a single line-outage scenario.
//!
//! Each monitored branch gets one PMU at its from-terminal. Its power
//! channel sits on the pre-outage DC flow, then moves to the post-outage
//! flow along a first-order transition that settles exactly after five time
//! constants. Every channel sees the same system-wide frequency excursion
//! plus its own noise.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Channel, PmuDataset, PmuSite};
use crate::fixtures;
use crate::grid::{apply_outage, dc_power_flow, BranchId, GridError, NetworkModel};

/// Transition length in time constants; after it the post-outage flow is exact.
const SETTLE_TAUS: f64 = 5.0;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("no monitored branch to place a PMU on")]
    NoMonitoredBranch,
    #[error("invalid scenario: {0}")]
    InvalidConfig(String),
    #[error("scenario file {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("scenario JSON: {0}")]
    Parse(String),
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::InvalidConfig(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    pub gaussian_sigma_hz: f64,
    pub gaussian_sigma_mw: f64,
    pub spike_probability: f64,
    pub spike_amplitude_hz: f64,
    pub rng_seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            gaussian_sigma_hz: 0.001,
            gaussian_sigma_mw: 0.5,
            spike_probability: 0.005,
            spike_amplitude_hz: 0.05,
            rng_seed: 0,
        }
    }
}

impl NoiseConfig {
    pub fn none() -> Self {
        Self {
            gaussian_sigma_hz: 0.0,
            gaussian_sigma_mw: 0.0,
            spike_probability: 0.0,
            spike_amplitude_hz: 0.0,
            rng_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !nonneg(self.gaussian_sigma_hz) || !nonneg(self.gaussian_sigma_mw) {
            return Err(invalid("noise sigmas must be finite and >= 0"));
        }
        if !(0.0..1.0).contains(&self.spike_probability) {
            return Err(invalid("spike_probability must lie in [0, 1)"));
        }
        if !self.spike_amplitude_hz.is_finite() {
            return Err(invalid("spike_amplitude_hz must be finite"));
        }
        Ok(())
    }
}

/// Frequency excursion after the trip:
/// `A * (exp(-t/decay) - exp(-t/rise)) * cos(2*pi*t/swing_period)`,
/// with `A` chosen so the largest magnitude equals `peak_deviation_hz`.
/// Without a swing period the cosine factor is dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FreqTemplate {
    pub peak_deviation_hz: f64,
    pub rise_tau_s: f64,
    pub decay_tau_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub swing_period_s: Option<f64>,
}

impl Default for FreqTemplate {
    fn default() -> Self {
        Self {
            peak_deviation_hz: 0.01,
            rise_tau_s: 0.1,
            decay_tau_s: 0.75,
            swing_period_s: Some(1.0),
        }
    }
}

impl FreqTemplate {
    /// Plain two-exponential pulse without the swing factor.
    pub fn pulse(peak_deviation_hz: f64, rise_tau_s: f64, decay_tau_s: f64) -> Self {
        Self {
            peak_deviation_hz,
            rise_tau_s,
            decay_tau_s,
            swing_period_s: None,
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !self.peak_deviation_hz.is_finite() {
            return Err(invalid("peak_deviation_hz must be finite"));
        }
        if !(self.rise_tau_s.is_finite() && self.rise_tau_s > 0.0) {
            return Err(invalid("rise_tau_s must be positive"));
        }
        if !(self.decay_tau_s.is_finite() && self.decay_tau_s > self.rise_tau_s) {
            return Err(invalid("decay_tau_s must exceed rise_tau_s"));
        }
        if let Some(p) = self.swing_period_s {
            if !(p.is_finite() && p > 0.0) {
                return Err(invalid("swing_period_s must be positive"));
            }
        }
        Ok(())
    }

    fn shape(&self, t: f64) -> f64 {
        let pulse = (-t / self.decay_tau_s).exp() - (-t / self.rise_tau_s).exp();
        match self.swing_period_s {
            Some(p) => pulse * (std::f64::consts::TAU * t / p).cos(),
            None => pulse,
        }
    }

    /// Time of the pulse maximum, `ln(d/r) * d*r / (d - r)`.
    pub fn pulse_peak_time(&self) -> f64 {
        let (r, d) = (self.rise_tau_s, self.decay_tau_s);
        (d / r).ln() * d * r / (d - r)
    }

    /// Largest `|shape(t)|` over `t >= 0`.
    fn shape_peak(&self) -> f64 {
        if self.swing_period_s.is_none() {
            return self.shape(self.pulse_peak_time());
        }
        // dense scan, then golden-section refinement around the best sample
        let horizon = 12.0 * self.decay_tau_s;
        let step = self
            .rise_tau_s
            .min(self.swing_period_s.unwrap_or(f64::INFINITY))
            / 200.0;
        let steps = (horizon / step).ceil() as usize;
        let mut best = (0.0, 0.0);
        for k in 0..=steps {
            let t = k as f64 * step;
            let v = self.shape(t).abs();
            if v > best.1 {
                best = (t, v);
            }
        }
        let (mut a, mut b) = ((best.0 - step).max(0.0), best.0 + step);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..100 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if self.shape(c).abs() > self.shape(d).abs() {
                b = d;
            } else {
                a = c;
            }
        }
        self.shape(0.5 * (a + b)).abs().max(best.1)
    }

    /// Precompute the amplitude for repeated evaluation.
    pub fn compile(&self) -> CompiledTemplate {
        let peak = self.shape_peak();
        let amplitude = if peak > 0.0 {
            self.peak_deviation_hz / peak
        } else {
            0.0
        };
        CompiledTemplate {
            template: self.clone(),
            amplitude,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompiledTemplate {
    template: FreqTemplate,
    amplitude: f64,
}

impl CompiledTemplate {
    pub fn eval(&self, t_since_event: f64) -> f64 {
        if t_since_event < 0.0 || self.amplitude == 0.0 {
            return 0.0;
        }
        self.amplitude * self.template.shape(t_since_event)
    }
}

/// Frequency deviation (Hz) `t_since_event` seconds after the trip; zero
/// before it.
pub fn frequency_template(tpl: &FreqTemplate, t_since_event: f64) -> f64 {
    tpl.compile().eval(t_since_event)
}

/// Gaussian noise plus random spikes of `spike_amplitude` with random sign.
pub fn add_noise<R: Rng>(
    series: &mut [f64],
    sigma: f64,
    spike_probability: f64,
    spike_amplitude: f64,
    rng: &mut R,
) {
    for x in series.iter_mut() {
        let n: f64 = rng.sample(StandardNormal);
        *x += sigma * n;
        if spike_probability > 0.0 && rng.random::<f64>() < spike_probability {
            *x += if rng.random::<bool>() {
                spike_amplitude
            } else {
                -spike_amplitude
            };
        }
    }
}

/// Frequency-style noise (Hz sigma, spikes) on a copy of `series`, seeded
/// from `noise.rng_seed`.
pub fn inject_noise(series: &[f64], noise: &NoiseConfig) -> Vec<f64> {
    let mut out = series.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(noise.rng_seed);
    add_noise(
        &mut out,
        noise.gaussian_sigma_hz,
        noise.spike_probability,
        noise.spike_amplitude_hz,
        &mut rng,
    );
    out
}

fn default_rate() -> f64 {
    25.0
}
fn default_start() -> i64 {
    // 2019-07-01T00:00:00Z
    1_561_939_200_000
}
fn default_nominal() -> f64 {
    60.0
}
fn default_tau() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Network JSON path (relative to the config file) or `fixture:<name>`.
    pub network: String,
    pub outaged_branch: BranchId,
    /// Seconds from stream start.
    pub event_time: f64,
    /// Seconds.
    pub duration: f64,
    #[serde(default = "default_rate")]
    pub reporting_rate: f64,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub freq_signature: FreqTemplate,
    #[serde(default = "default_start")]
    pub start_epoch_ms: i64,
    #[serde(default = "default_nominal")]
    pub nominal_hz: f64,
    #[serde(default = "default_tau")]
    pub transition_tau_s: f64,
    /// Overrides the network's monitored flags when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monitored: Option<Vec<BranchId>>,
}

impl ScenarioConfig {
    pub fn new(network: impl Into<String>, outaged_branch: BranchId) -> Self {
        Self {
            network: network.into(),
            outaged_branch,
            event_time: 10.0,
            duration: 60.0,
            reporting_rate: default_rate(),
            noise: NoiseConfig::default(),
            freq_signature: FreqTemplate::default(),
            start_epoch_ms: default_start(),
            nominal_hz: default_nominal(),
            transition_tau_s: default_tau(),
            monitored: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        serde_json::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    /// Resolve the `network` reference; relative paths are taken from `base_dir`.
    pub fn load_network(&self, base_dir: &Path) -> Result<NetworkModel, ScenarioError> {
        if let Some(name) = self.network.strip_prefix("fixture:") {
            return fixtures::by_name(name)
                .ok_or_else(|| invalid(format!("unknown fixture {name:?}")));
        }
        let path = base_dir.join(&self.network);
        Ok(NetworkModel::load(path)?)
    }

    pub fn sample_count(&self) -> usize {
        (self.duration * self.reporting_rate).round() as usize
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.reporting_rate.is_finite() && self.reporting_rate > 0.0) {
            return Err(invalid("reporting_rate must be positive"));
        }
        if !(self.event_time > 0.0 && self.event_time < self.duration && self.duration.is_finite())
        {
            return Err(invalid("need 0 < event_time < duration"));
        }
        if self.sample_count() < 2 {
            return Err(invalid("scenario shorter than two samples"));
        }
        if !(self.transition_tau_s.is_finite() && self.transition_tau_s >= 0.0) {
            return Err(invalid("transition_tau_s must be >= 0"));
        }
        if !self.nominal_hz.is_finite() {
            return Err(invalid("nominal_hz must be finite"));
        }
        self.noise.validate()?;
        self.freq_signature.validate()
    }
}

/// Share of the pre-to-post flow change completed `dt` seconds after the trip.
fn transition(dt: f64, tau: f64) -> f64 {
    if dt <= 0.0 {
        0.0
    } else if tau == 0.0 || dt >= SETTLE_TAUS * tau {
        1.0
    } else {
        (1.0 - (-dt / tau).exp()) / (1.0 - (-SETTLE_TAUS).exp())
    }
}

pub fn simulate_scenario(
    net: &NetworkModel,
    cfg: &ScenarioConfig,
) -> Result<PmuDataset, ScenarioError> {
    cfg.validate()?;
    let net = match &cfg.monitored {
        Some(list) => net.with_monitored(|b| list.contains(&b.id)),
        None => net.clone(),
    };
    let pre = dc_power_flow(&net)?;
    let post_net = apply_outage(&net, cfg.outaged_branch)?;
    let post = dc_power_flow(&post_net)?;

    let n = cfg.sample_count();
    let period_ms = 1000.0 / cfg.reporting_rate;
    let timestamps: Vec<i64> = (0..n)
        .map(|k| cfg.start_epoch_ms + (k as f64 * period_ms).round() as i64)
        .collect();
    let times: Vec<f64> = (0..n).map(|k| k as f64 / cfg.reporting_rate).collect();

    let template = cfg.freq_signature.compile();
    let clean_freq: Vec<f64> = times
        .iter()
        .map(|&t| cfg.nominal_hz + template.eval(t - cfg.event_time))
        .collect();
    let shares: Vec<f64> = times
        .iter()
        .map(|&t| transition(t - cfg.event_time, cfg.transition_tau_s))
        .collect();

    let monitored: Vec<_> = net.monitored().collect();
    if monitored.is_empty() {
        return Err(ScenarioError::NoMonitoredBranch);
    }
    let mut channels = Vec::with_capacity(monitored.len());
    for (k, br) in monitored.into_iter().enumerate() {
        let id = k as u32 + 1;
        let before = pre.get(br.id).ok_or(GridError::MissingFlow(br.id))?;
        let after = post.get(br.id).unwrap_or(0.0);
        let mut power: Vec<f64> = shares
            .iter()
            .map(|&s| {
                if s == 0.0 {
                    before
                } else if s == 1.0 {
                    after
                } else {
                    before + (after - before) * s
                }
            })
            .collect();
        let mut frequency = clean_freq.clone();

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.noise.rng_seed);
        rng.set_stream(2 * u64::from(id));
        add_noise(
            &mut frequency,
            cfg.noise.gaussian_sigma_hz,
            cfg.noise.spike_probability,
            cfg.noise.spike_amplitude_hz,
            &mut rng,
        );
        rng.set_stream(2 * u64::from(id) + 1);
        add_noise(&mut power, cfg.noise.gaussian_sigma_mw, 0.0, 0.0, &mut rng);

        let bus = net.bus(br.from_bus)?;
        channels.push(Channel {
            id,
            branch_id: br.id,
            site: Some(PmuSite {
                bus_id: bus.id,
                lat: bus.lat,
                lon: bus.lon,
            }),
            frequency,
            power,
        });
    }

    Ok(PmuDataset {
        reporting_rate: cfg.reporting_rate,
        timestamps,
        channels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::predicted_flow_change;

    fn quiet(outage: BranchId) -> ScenarioConfig {
        let mut cfg = ScenarioConfig::new("fixture:k4", outage);
        cfg.noise = NoiseConfig::none();
        cfg
    }

    #[test]
    fn template_zero_before_event_and_late() {
        let tpl = FreqTemplate::default();
        assert_eq!(frequency_template(&tpl, -0.5), 0.0);
        assert!(frequency_template(&tpl, 200.0).abs() < 1e-15);
        let pulse = FreqTemplate::pulse(0.01, 0.5, 5.0);
        assert_eq!(frequency_template(&pulse, -1e-9), 0.0);
        assert!(frequency_template(&pulse, 1e3).abs() < 1e-15);
    }

    #[test]
    fn pulse_peak_matches_closed_form() {
        let tpl = FreqTemplate::pulse(0.01, 0.5, 5.0);
        let compiled = tpl.compile();
        let t_star = (10f64).ln() * 2.5 / 4.5;
        assert!((tpl.pulse_peak_time() - t_star).abs() < 1e-12);
        let dense = (0..200_000)
            .map(|k| compiled.eval(k as f64 * 1e-4))
            .fold(f64::MIN, f64::max);
        assert!((dense - 0.01).abs() < 1e-9, "{dense}");
        assert!((compiled.eval(t_star) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn swing_peak_magnitude_normalized() {
        let tpl = FreqTemplate::default();
        let compiled = tpl.compile();
        let dense = (0..100_000)
            .map(|k| compiled.eval(k as f64 * 1e-4).abs())
            .fold(0.0, f64::max);
        assert!((dense - 0.01).abs() < 1e-9, "{dense}");
    }

    #[test]
    fn noise_identity_when_disabled() {
        let x: Vec<f64> = (0..100).map(|i| 60.0 + i as f64 * 1e-4).collect();
        assert_eq!(inject_noise(&x, &NoiseConfig::none()), x);
    }

    #[test]
    fn gaussian_noise_std() {
        let noise = NoiseConfig {
            gaussian_sigma_hz: 0.001,
            spike_probability: 0.0,
            rng_seed: 11,
            ..NoiseConfig::none()
        };
        let y = inject_noise(&vec![0.0; 100_000], &noise);
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (y.len() - 1) as f64;
        assert!((var.sqrt() - 0.001).abs() <= 0.05 * 0.001, "{}", var.sqrt());
    }

    #[test]
    fn spike_count_binomial() {
        let noise = NoiseConfig {
            spike_probability: 0.005,
            spike_amplitude_hz: 0.05,
            rng_seed: 5,
            ..NoiseConfig::none()
        };
        let y = inject_noise(&vec![60.0; 10_000], &noise);
        let spikes = y.iter().filter(|v| (*v - 60.0).abs() > 0.025).count();
        assert!((25..=75).contains(&spikes), "{spikes}");
    }

    #[test]
    fn k4_scenario_shape() {
        let net = fixtures::k4();
        let ds = simulate_scenario(&net, &quiet(12)).unwrap();
        assert_eq!(ds.channels.len(), 6);
        assert_eq!(ds.len(), 1500);
        assert!(ds.timestamps.windows(2).all(|w| w[1] - w[0] == 40));
        let l13 = ds.channels.iter().find(|c| c.branch_id == 13).unwrap();
        let step = l13.power[1499] - l13.power[0];
        assert!((step - 25.0).abs() < 1e-9);
        assert_eq!(l13.site.unwrap().bus_id, 1);
    }

    #[test]
    fn degenerate_template_gives_flat_frequency() {
        let net = fixtures::k4();
        let mut cfg = quiet(12);
        cfg.freq_signature.peak_deviation_hz = 0.0;
        let ds = simulate_scenario(&net, &cfg).unwrap();
        assert!(ds
            .channels
            .iter()
            .all(|c| c.frequency.iter().all(|&f| f == 60.0)));
    }

    #[test]
    fn pre_and_post_samples_exact() {
        let net = fixtures::k4();
        let cfg = quiet(12);
        let ds = simulate_scenario(&net, &cfg).unwrap();
        let pre = dc_power_flow(&net).unwrap();
        let post = dc_power_flow(&apply_outage(&net, 12).unwrap()).unwrap();
        let dp = predicted_flow_change(&net, 12).unwrap();
        let event = (cfg.event_time * cfg.reporting_rate) as usize;
        let settled = event + (SETTLE_TAUS * cfg.transition_tau_s * cfg.reporting_rate) as usize;
        for ch in &ds.channels {
            let p0 = pre.get(ch.branch_id).unwrap();
            let p1 = post.get(ch.branch_id).unwrap_or(0.0);
            assert!(ch.power[..=event].iter().all(|&p| p == p0));
            assert!(ch.power[settled..].iter().all(|&p| p == p1));
            assert!((p1 - p0 - dp[&ch.branch_id]).abs() <= 1e-9);
        }
    }

    #[test]
    fn same_seed_same_dataset() {
        let net = fixtures::ne39();
        let mut cfg = ScenarioConfig::new("fixture:ne39", 3);
        cfg.noise.rng_seed = 77;
        let a = simulate_scenario(&net, &cfg).unwrap();
        let b = simulate_scenario(&net, &cfg).unwrap();
        assert_eq!(a, b);
        cfg.noise.rng_seed = 78;
        assert_ne!(a, simulate_scenario(&net, &cfg).unwrap());
    }

    #[test]
    fn scenario_errors() {
        let net = fixtures::k4();
        let mut cfg = quiet(12);
        cfg.event_time = 70.0;
        assert!(matches!(
            simulate_scenario(&net, &cfg),
            Err(ScenarioError::InvalidConfig(_))
        ));
        let mut cfg = quiet(12);
        cfg.monitored = Some(vec![]);
        assert!(matches!(
            simulate_scenario(&net, &cfg),
            Err(ScenarioError::NoMonitoredBranch)
        ));
        assert!(matches!(
            simulate_scenario(&fixtures::two_bus(), &quiet(1)),
            Err(ScenarioError::Grid(GridError::IslandingOutage(1)))
        ));
    }

    #[test]
    fn config_json_defaults() {
        let cfg = ScenarioConfig::from_json(
            r#"{"network": "fixture:k4", "outaged_branch": 12, "event_time": 10, "duration": 60}"#,
        )
        .unwrap();
        assert_eq!(cfg.reporting_rate, 25.0);
        assert_eq!(cfg.noise, NoiseConfig::default());
        assert!(ScenarioConfig::from_json("{not json").is_err());
    }
}
