//! Frequency-based outage detection.
//!
//! Per channel: median filter, moving-mean trend, de-trended deviation. A
//! sample triggers when its deviation reaches the first threshold and a
//! confirming deviation of at least the second threshold follows within the
//! detection window. Confirmed samples closer than one detection window to
//! the first sample of a group fold into that group. Channel triggers are
//! then clustered in time across channels into events.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{ChannelId, PmuDataset};
use crate::exec::Execution;
use crate::filters::{deviation, FilterError, FilterParams};
use crate::grid::BranchId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectError {
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error("series of {len} samples is not longer than the mean window {window}")]
    SeriesTooShort { len: usize, window: usize },
    #[error("{series} samples but {timestamps} timestamps")]
    LengthMismatch { series: usize, timestamps: usize },
    #[error("dataset has no channels")]
    EmptyDataset,
    #[error("invalid detector parameters: {0}")]
    InvalidParams(String),
}

/// What counts as the confirming second peak.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SecondPeakRule {
    /// Opposite sign to the first peak (swing then rebound).
    #[default]
    OppositeSign,
    SameSign,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorParams {
    pub filter: FilterParams,
    /// Samples after a first peak in which the second peak must appear.
    pub detection_window: usize,
    /// Hz.
    pub first_threshold: f64,
    /// Hz.
    pub second_threshold: f64,
    /// Seconds.
    pub cluster_window: f64,
    pub min_channels: usize,
    pub second_peak: SecondPeakRule,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            filter: FilterParams::default(),
            detection_window: 20,
            first_threshold: 0.0045,
            second_threshold: 0.0025,
            cluster_window: 1.0,
            min_channels: 1,
            second_peak: SecondPeakRule::OppositeSign,
        }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<(), DetectError> {
        self.filter.validate()?;
        if !(self.second_threshold > 0.0 && self.first_threshold > self.second_threshold) {
            return Err(DetectError::InvalidParams(
                "need first_threshold > second_threshold > 0".into(),
            ));
        }
        if self.detection_window < 2 {
            return Err(DetectError::InvalidParams(
                "detection_window must be at least 2".into(),
            ));
        }
        if !(self.cluster_window.is_finite() && self.cluster_window >= 0.0) {
            return Err(DetectError::InvalidParams(
                "cluster_window must be >= 0".into(),
            ));
        }
        if self.min_channels == 0 {
            return Err(DetectError::InvalidParams(
                "min_channels must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trigger {
    pub sample_index: usize,
    pub time_ms: i64,
    /// De-trended deviation at the trigger sample, Hz.
    pub first_peak_hz: f64,
    /// Largest confirming deviation inside the detection window, Hz.
    pub second_peak_hz: f64,
    /// Largest-magnitude deviation among the merged trigger samples, Hz.
    pub peak_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelPeak {
    pub channel_id: ChannelId,
    pub peak_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub event_time_ms: i64,
    pub channels: Vec<ChannelPeak>,
    pub first_peak_hz: f64,
    pub second_peak_hz: f64,
}

/// Event report as written by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventReport {
    #[serde(flatten)]
    pub event: DetectionEvent,
    pub params_echo: DetectorParams,
}

/// Trigger search on an already de-trended deviation series.
pub fn triggers_from_deviation(
    dev: &[f64],
    timestamps: &[i64],
    params: &DetectorParams,
) -> Vec<Trigger> {
    let n = dev.len();
    let w = params.detection_window;
    let mut out: Vec<Trigger> = Vec::new();
    for i in 0..n {
        let d = dev[i];
        if d.abs() < params.first_threshold {
            continue;
        }
        let end = (i + w).min(n.saturating_sub(1));
        let confirm = dev[i + 1..=end.max(i)]
            .iter()
            .filter(|&&x| {
                let sign_ok = match params.second_peak {
                    SecondPeakRule::OppositeSign => x * d < 0.0,
                    SecondPeakRule::SameSign => x * d > 0.0,
                };
                sign_ok && x.abs() >= params.second_threshold
            })
            .fold(None::<f64>, |best, &x| match best {
                Some(b) if b.abs() >= x.abs() => Some(b),
                _ => Some(x),
            });
        let Some(second) = confirm else { continue };

        match out.last_mut() {
            Some(group) if i <= group.sample_index + w => {
                if d.abs() > group.peak_hz.abs() {
                    group.peak_hz = d;
                }
            }
            _ => out.push(Trigger {
                sample_index: i,
                time_ms: timestamps[i],
                first_peak_hz: d,
                second_peak_hz: second,
                peak_hz: d,
            }),
        }
    }
    out
}

pub fn detect_channel(
    frequency: &[f64],
    timestamps: &[i64],
    params: &DetectorParams,
) -> Result<Vec<Trigger>, DetectError> {
    params.validate()?;
    if frequency.len() != timestamps.len() {
        return Err(DetectError::LengthMismatch {
            series: frequency.len(),
            timestamps: timestamps.len(),
        });
    }
    if frequency.len() <= params.filter.mean_window {
        return Err(DetectError::SeriesTooShort {
            len: frequency.len(),
            window: params.filter.mean_window,
        });
    }
    let dev = deviation(frequency, &params.filter)?;
    Ok(triggers_from_deviation(&dev, timestamps, params))
}

pub fn detect(
    dataset: &PmuDataset,
    params: &DetectorParams,
) -> Result<Vec<DetectionEvent>, DetectError> {
    detect_with(dataset, params, Execution::default())
}

pub fn detect_with(
    dataset: &PmuDataset,
    params: &DetectorParams,
    exec: Execution,
) -> Result<Vec<DetectionEvent>, DetectError> {
    params.validate()?;
    if dataset.channels.is_empty() {
        return Err(DetectError::EmptyDataset);
    }
    let per_channel = exec.map(&dataset.channels, |ch| {
        detect_channel(&ch.frequency, &dataset.timestamps, params)
            .map(|ts| (ch.id, ch.branch_id, ts))
    });
    let mut all: Vec<(ChannelId, BranchId, Trigger)> = Vec::new();
    for res in per_channel {
        let (id, branch, triggers) = res?;
        all.extend(triggers.into_iter().map(|t| (id, branch, t)));
    }
    all.sort_by_key(|(id, _, t)| (t.time_ms, *id));

    let cluster_ms = (params.cluster_window * 1000.0).round() as i64;
    let mut events = Vec::new();
    let mut start = 0;
    while start < all.len() {
        let anchor = all[start].2.time_ms;
        let mut end = start;
        while end < all.len() && all[end].2.time_ms <= anchor + cluster_ms {
            end += 1;
        }
        let members = &all[start..end];
        let mut channels: Vec<ChannelPeak> = Vec::new();
        for (id, _, t) in members {
            match channels.iter_mut().find(|c| c.channel_id == *id) {
                Some(c) if t.peak_hz.abs() > c.peak_hz.abs() => c.peak_hz = t.peak_hz,
                Some(_) => {}
                None => channels.push(ChannelPeak {
                    channel_id: *id,
                    peak_hz: t.peak_hz,
                }),
            }
        }
        if channels.len() >= params.min_channels {
            channels.sort_by_key(|c| c.channel_id);
            let first = &members[0].2;
            events.push(DetectionEvent {
                event_time_ms: anchor,
                channels,
                first_peak_hz: first.first_peak_hz,
                second_peak_hz: first.second_peak_hz,
            });
        }
        start = end;
    }
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stamps(n: usize) -> Vec<i64> {
        (0..n as i64).map(|k| 40 * k).collect()
    }

    #[test]
    fn dual_peak_triggers_once() {
        let mut dev = vec![0.0; 200];
        dev[100] = 0.005;
        dev[110] = -0.003;
        let t = triggers_from_deviation(&dev, &stamps(200), &DetectorParams::default());
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].sample_index, 100);
        assert_eq!(t[0].second_peak_hz, -0.003);
    }

    #[test]
    fn unconfirmed_peak_ignored() {
        let mut dev = vec![0.0; 200];
        dev[100] = 0.005;
        dev[121] = -0.003; // outside the 20-sample window
        dev[105] = 0.004; // same sign
        let p = DetectorParams::default();
        assert!(triggers_from_deviation(&dev, &stamps(200), &p).is_empty());
        let same = DetectorParams {
            second_peak: SecondPeakRule::SameSign,
            ..p
        };
        assert_eq!(triggers_from_deviation(&dev, &stamps(200), &same).len(), 1);
    }

    #[test]
    fn constant_offset_never_triggers() {
        let f = vec![60.01; 1000];
        assert!(
            detect_channel(&f, &stamps(1000), &DetectorParams::default())
                .unwrap()
                .is_empty()
        );
    }

    #[test]
    fn short_series_rejected() {
        let err = detect_channel(&[60.0; 31], &stamps(31), &DetectorParams::default()).unwrap_err();
        assert_eq!(
            err,
            DetectError::SeriesTooShort {
                len: 31,
                window: 31
            }
        );
        let err = detect_channel(&[60.0; 40], &stamps(39), &DetectorParams::default()).unwrap_err();
        assert!(matches!(err, DetectError::LengthMismatch { .. }));
    }

    #[test]
    fn params_validated() {
        let bad = DetectorParams {
            first_threshold: 0.001,
            ..DetectorParams::default()
        };
        assert!(matches!(bad.validate(), Err(DetectError::InvalidParams(_))));
        let even = DetectorParams {
            filter: FilterParams {
                median_window: 6,
                mean_window: 31,
            },
            ..DetectorParams::default()
        };
        assert_eq!(
            even.validate(),
            Err(DetectError::Filter(FilterError::EvenWindow(6)))
        );
    }

    #[test]
    fn empty_dataset() {
        let ds = PmuDataset {
            reporting_rate: 25.0,
            timestamps: stamps(100),
            channels: vec![],
        };
        assert_eq!(
            detect(&ds, &DetectorParams::default()).unwrap_err(),
            DetectError::EmptyDataset
        );
    }

    fn sparse_dev() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(
            prop_oneof![
                4 => Just(0.0),
                1 => -0.012..0.012f64,
            ],
            50..400,
        )
    }

    proptest! {
        #[test]
        fn higher_first_threshold_never_adds_triggers(dev in sparse_dev(), bump in 0.0..0.006f64) {
            let ts = stamps(dev.len());
            let lo = DetectorParams::default();
            let hi = DetectorParams { first_threshold: lo.first_threshold + bump, ..lo.clone() };
            let a = triggers_from_deviation(&dev, &ts, &lo).len();
            let b = triggers_from_deviation(&dev, &ts, &hi).len();
            prop_assert!(b <= a, "{} > {}", b, a);
        }

        #[test]
        fn shift_equivariance(
            noise in prop::collection::vec(-0.0004..0.0004f64, 300),
            k in 0usize..200,
            at in 120usize..180,
        ) {
            // flat lead-in, an event swing in the middle, flat tail
            let mut f: Vec<f64> = vec![60.0; 100];
            f.extend(noise.iter().enumerate().map(|(i, e)| {
                let t = i as f64 - (at - 100) as f64;
                let swing = if t >= 0.0 { 0.012 * (-t / 10.0).exp() * (t / 4.0).sin() } else { 0.0 };
                60.0 + e + swing
            }));
            f.extend(vec![60.0; 100]);
            let mut g = vec![60.0; k];
            g.extend(&f);
            let p = DetectorParams::default();
            let a = detect_channel(&f, &stamps(f.len()), &p).unwrap();
            let b = detect_channel(&g, &stamps(g.len()), &p).unwrap();
            prop_assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(&b) {
                prop_assert_eq!(x.sample_index + k, y.sample_index);
                prop_assert_eq!(x.time_ms + 40 * k as i64, y.time_ms);
            }
        }
    }
}
