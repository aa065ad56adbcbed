//! Outage localization by ranking active-power changes, plus the
//! max-frequency-change baseline.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Channel, ChannelId, PmuDataset};
use crate::detector::DetectionEvent;
use crate::exec::Execution;
use crate::filters::{moving_median, FilterError};
use crate::geo::{geo_error, GeoError, LatLon};
use crate::grid::{BranchId, BusId, GridError, NetworkModel};

/// Below this magnitude a top change is treated as no change at all.
pub const ABSOLUTE_FLOOR: f64 = 1e-6;
/// Top change must exceed this multiple of the noise floor.
pub const CONFIDENCE_FACTOR: f64 = 3.0;
const MAD_TO_SIGMA: f64 = 1.4826;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LocateError {
    #[error("windows need samples {start}..{end} but the series has {len}")]
    WindowOutOfRange { start: i64, end: i64, len: usize },
    #[error("event time {0} ms is after the last sample")]
    EventOutOfRange(i64),
    #[error("dataset has no channels")]
    NoChannels,
    #[error("no channel {0}")]
    UnknownChannel(ChannelId),
    #[error("invalid windows: {0}")]
    InvalidWindows(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Filter(#[from] FilterError),
}

/// Sample counts around the event index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PowerChangeWindows {
    pub pre_length: usize,
    pub pre_gap: usize,
    pub post_gap: usize,
    pub post_length: usize,
    pub median_window: usize,
}

impl Default for PowerChangeWindows {
    fn default() -> Self {
        Self {
            pre_length: 50,
            pre_gap: 10,
            post_gap: 25,
            post_length: 50,
            median_window: 7,
        }
    }
}

impl PowerChangeWindows {
    pub fn validate(&self) -> Result<(), LocateError> {
        if self.pre_length == 0 || self.pre_gap == 0 || self.post_gap == 0 || self.post_length == 0
        {
            return Err(LocateError::InvalidWindows(
                "all window sizes must be >= 1".into(),
            ));
        }
        if self.median_window.is_multiple_of(2) {
            return Err(FilterError::EvenWindow(self.median_window).into());
        }
        Ok(())
    }

    /// `(pre, post)` sample ranges for an event at sample `at` in a series of `len`.
    pub fn ranges(
        &self,
        at: usize,
        len: usize,
    ) -> Result<(std::ops::Range<usize>, std::ops::Range<usize>), LocateError> {
        let start = at as i64 - (self.pre_gap + self.pre_length) as i64;
        let end = (at + self.post_gap + self.post_length) as i64;
        if start < 0 || end > len as i64 {
            return Err(LocateError::WindowOutOfRange { start, end, len });
        }
        let pre = start as usize..at - self.pre_gap;
        let post = at + self.post_gap..end as usize;
        Ok((pre, post))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    PowerChange,
    MaxFreqBaseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedChange {
    pub branch_id: BranchId,
    pub channel_id: ChannelId,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub delta_p_mw: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub delta_f_hz: Option<f64>,
}

impl RankedChange {
    pub fn delta(&self) -> f64 {
        self.delta_p_mw.or(self.delta_f_hz).unwrap_or(0.0)
    }

    pub fn magnitude(&self) -> f64 {
        self.delta().abs()
    }
}

/// Localization result and its JSON report layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationResult {
    pub method: Method,
    pub event_time_ms: i64,
    pub estimated_branch: BranchId,
    pub estimated_channel: ChannelId,
    /// Both terminals for the power-change method; the PMU site for the baseline.
    pub terminals: Vec<LatLon>,
    pub ranked: Vec<RankedChange>,
    pub low_confidence: bool,
    pub noise_floor: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error_miles: Option<f64>,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Robust sigma estimate from the median absolute deviation.
fn robust_sigma(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    let m = median(&mut v);
    let mut dev: Vec<f64> = values.iter().map(|x| (x - m).abs()).collect();
    MAD_TO_SIGMA * median(&mut dev)
}

fn event_index(dataset: &PmuDataset, event_time_ms: i64) -> Result<usize, LocateError> {
    dataset
        .index_at_or_after(event_time_ms)
        .ok_or(LocateError::EventOutOfRange(event_time_ms))
}

struct Change {
    delta: f64,
    sigma: f64,
}

fn series_change(
    series: &[f64],
    at: usize,
    windows: &PowerChangeWindows,
) -> Result<Change, LocateError> {
    windows.validate()?;
    let (pre, post) = windows.ranges(at, series.len())?;
    // Filter only the slab the windows read, padded by the half window so
    // every read sample sees a full centered window where the series allows.
    let h = windows.median_window / 2;
    let lo = pre.start.saturating_sub(h);
    let hi = (post.end + h).min(series.len());
    let filtered = moving_median(&series[lo..hi], windows.median_window)?;
    let mut before = filtered[pre.start - lo..pre.end - lo].to_vec();
    let mut after = filtered[post.start - lo..post.end - lo].to_vec();
    Ok(Change {
        delta: median(&mut after) - median(&mut before),
        sigma: robust_sigma(&series[pre]),
    })
}

/// Signed change in median-filtered active power across the event, MW.
pub fn power_change(
    dataset: &PmuDataset,
    channel: ChannelId,
    event_time_ms: i64,
    windows: &PowerChangeWindows,
) -> Result<f64, LocateError> {
    let ch = dataset
        .channel(channel)
        .ok_or(LocateError::UnknownChannel(channel))?;
    let at = event_index(dataset, event_time_ms)?;
    Ok(series_change(&ch.power, at, windows)?.delta)
}

/// `(channel, branch, signed change)` rows, largest magnitude first.
type Ranking = Vec<(ChannelId, BranchId, f64)>;

fn rank(
    dataset: &PmuDataset,
    event_time_ms: i64,
    windows: &PowerChangeWindows,
    exec: Execution,
    pick: fn(&Channel) -> &[f64],
) -> Result<(Ranking, f64), LocateError> {
    if dataset.channels.is_empty() {
        return Err(LocateError::NoChannels);
    }
    let at = event_index(dataset, event_time_ms)?;
    let changes = exec.map(&dataset.channels, |ch| series_change(pick(ch), at, windows));
    let mut rows = Vec::with_capacity(changes.len());
    let mut sigmas = Vec::with_capacity(changes.len());
    for (ch, c) in dataset.channels.iter().zip(changes) {
        let c = c?;
        rows.push((ch.id, ch.branch_id, c.delta));
        sigmas.push(c.sigma);
    }
    rows.sort_by(|a, b| {
        b.2.abs()
            .total_cmp(&a.2.abs())
            .then(a.1.cmp(&b.1))
            .then(a.0.cmp(&b.0))
    });
    Ok((rows, median(&mut sigmas)))
}

fn low_confidence(top: f64, floor: f64) -> bool {
    top < ABSOLUTE_FLOOR || top < CONFIDENCE_FACTOR * floor
}

pub fn locate(
    dataset: &PmuDataset,
    net: &NetworkModel,
    event: &DetectionEvent,
    windows: &PowerChangeWindows,
) -> Result<LocalizationResult, LocateError> {
    locate_with(dataset, net, event, windows, Execution::default())
}

pub fn locate_with(
    dataset: &PmuDataset,
    net: &NetworkModel,
    event: &DetectionEvent,
    windows: &PowerChangeWindows,
    exec: Execution,
) -> Result<LocalizationResult, LocateError> {
    let (rows, floor) = rank(dataset, event.event_time_ms, windows, exec, |c| &c.power)?;
    let (channel, branch, top) = rows[0];
    let [a, b] = net.terminals(branch)?;
    Ok(LocalizationResult {
        method: Method::PowerChange,
        event_time_ms: event.event_time_ms,
        estimated_branch: branch,
        estimated_channel: channel,
        terminals: vec![a, b],
        ranked: rows
            .into_iter()
            .map(|(channel_id, branch_id, d)| RankedChange {
                branch_id,
                channel_id,
                delta_p_mw: Some(d),
                delta_f_hz: None,
            })
            .collect(),
        low_confidence: low_confidence(top.abs(), floor),
        noise_floor: floor,
        error_miles: None,
    })
}

/// Picks the channel with the largest frequency change and reports its PMU site.
pub fn baseline_locate_freq(
    dataset: &PmuDataset,
    net: &NetworkModel,
    event: &DetectionEvent,
    windows: &PowerChangeWindows,
) -> Result<LocalizationResult, LocateError> {
    baseline_locate_freq_with(dataset, net, event, windows, Execution::default())
}

pub fn baseline_locate_freq_with(
    dataset: &PmuDataset,
    net: &NetworkModel,
    event: &DetectionEvent,
    windows: &PowerChangeWindows,
    exec: Execution,
) -> Result<LocalizationResult, LocateError> {
    let (rows, floor) = rank(dataset, event.event_time_ms, windows, exec, |c| {
        &c.frequency
    })?;
    let (channel, branch, top) = rows[0];
    let site = match dataset.channel(channel).and_then(|c| c.site.as_ref()) {
        Some(s) => [s.lat, s.lon],
        None => net.terminals(branch)?[0],
    };
    Ok(LocalizationResult {
        method: Method::MaxFreqBaseline,
        event_time_ms: event.event_time_ms,
        estimated_branch: branch,
        estimated_channel: channel,
        terminals: vec![site],
        ranked: rows
            .into_iter()
            .map(|(channel_id, branch_id, d)| RankedChange {
                branch_id,
                channel_id,
                delta_p_mw: None,
                delta_f_hz: Some(d),
            })
            .collect(),
        low_confidence: low_confidence(top.abs(), floor),
        noise_floor: floor,
        error_miles: None,
    })
}

/// Distance from the estimate to the actual outaged line. A power-change
/// estimate naming the right branch scores zero.
pub fn error_to_truth(
    result: &LocalizationResult,
    net: &NetworkModel,
    actual: BranchId,
) -> Result<f64, LocateError> {
    if result.method == Method::PowerChange && result.estimated_branch == actual {
        return Ok(0.0);
    }
    Ok(geo_error(&result.terminals, &net.terminals(actual)?)?)
}

/// Sum of |ΔP| over the ranked branches incident to each bus. Diagnostic only.
pub fn bus_aggregate(
    result: &LocalizationResult,
    net: &NetworkModel,
) -> Result<BTreeMap<BusId, f64>, LocateError> {
    let mut out = BTreeMap::new();
    for r in &result.ranked {
        let br = net.branch(r.branch_id)?;
        for bus in [br.from_bus, br.to_bus] {
            *out.entry(bus).or_insert(0.0) += r.magnitude();
        }
    }
    Ok(out)
}
