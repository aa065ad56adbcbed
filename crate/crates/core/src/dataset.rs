//! Synchrophasor datasets and their CSV wire format.
//!
//! ```text
//! timestamp_ms,channel_id,branch_id,frequency_hz,active_power_mw
//! 1561939200000,1,12,60,50
//! ```
//!
//! One row per channel per reporting instant, sorted by timestamp and then
//! channel id. Floats are written in shortest round-trip form, so a dataset
//! survives a write/read cycle bit for bit.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{BranchId, BusId, GridError, NetworkModel};

pub const CSV_HEADER: [&str; 5] = [
    "timestamp_ms",
    "channel_id",
    "branch_id",
    "frequency_hz",
    "active_power_mw",
];

pub type ChannelId = u32;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("CSV line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("dataset schema: {0}")]
    Schema(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// PMU location: the monitored branch's from-terminal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PmuSite {
    pub bus_id: BusId,
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub id: ChannelId,
    pub branch_id: BranchId,
    pub site: Option<PmuSite>,
    /// Hz.
    pub frequency: Vec<f64>,
    /// MW, positive from the branch's from-bus to its to-bus.
    pub power: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PmuDataset {
    pub reporting_rate: f64,
    /// Epoch milliseconds, strictly increasing.
    pub timestamps: Vec<i64>,
    /// Sorted by channel id.
    pub channels: Vec<Channel>,
}

#[derive(Debug, Deserialize)]
struct Row {
    timestamp_ms: i64,
    channel_id: ChannelId,
    branch_id: BranchId,
    frequency_hz: f64,
    active_power_mw: f64,
}

fn csv_error(e: csv::Error) -> DatasetError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => DatasetError::Io(io),
        kind => DatasetError::Csv {
            line,
            message: match kind {
                csv::ErrorKind::UnequalLengths {
                    expected_len, len, ..
                } => format!("expected {expected_len} fields, found {len}"),
                csv::ErrorKind::Deserialize { err, .. } => err.to_string(),
                other => format!("{other:?}"),
            },
        },
    }
}

impl PmuDataset {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn channel(&self, id: ChannelId) -> Option<&Channel> {
        self.channels.iter().find(|c| c.id == id)
    }

    /// Nominal sample spacing in milliseconds.
    pub fn period_ms(&self) -> f64 {
        1000.0 / self.reporting_rate
    }

    /// Index of the first sample at or after `time_ms`.
    pub fn index_at_or_after(&self, time_ms: i64) -> Option<usize> {
        let i = self.timestamps.partition_point(|&t| t < time_ms);
        (i < self.timestamps.len()).then_some(i)
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        if !(self.reporting_rate.is_finite() && self.reporting_rate > 0.0) {
            return Err(DatasetError::Schema(format!(
                "reporting rate {} must be positive",
                self.reporting_rate
            )));
        }
        if self.timestamps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(DatasetError::Schema(
                "timestamps not strictly increasing".into(),
            ));
        }
        let n = self.timestamps.len();
        for pair in self.channels.windows(2) {
            if pair[1].id <= pair[0].id {
                return Err(DatasetError::Schema(
                    "channels not sorted by unique id".into(),
                ));
            }
        }
        for ch in &self.channels {
            if ch.frequency.len() != n || ch.power.len() != n {
                return Err(DatasetError::Schema(format!(
                    "channel {} has {}/{} samples, expected {n}",
                    ch.id,
                    ch.frequency.len(),
                    ch.power.len()
                )));
            }
        }
        Ok(())
    }

    /// Fill PMU sites from the network (from-terminal of each channel's branch).
    pub fn attach_sites(&mut self, net: &NetworkModel) -> Result<(), DatasetError> {
        for ch in &mut self.channels {
            let br = net.branch(ch.branch_id)?;
            let bus = net.bus(br.from_bus)?;
            ch.site = Some(PmuSite {
                bus_id: bus.id,
                lat: bus.lat,
                lon: bus.lon,
            });
        }
        Ok(())
    }

    /// Append a later recording from the same channel set.
    pub fn append(&mut self, other: &PmuDataset) -> Result<(), DatasetError> {
        let same_channels = self.channels.len() == other.channels.len()
            && self
                .channels
                .iter()
                .zip(&other.channels)
                .all(|(a, b)| a.id == b.id && a.branch_id == b.branch_id);
        if !same_channels || self.reporting_rate != other.reporting_rate {
            return Err(DatasetError::Schema(
                "appended dataset has a different channel layout".into(),
            ));
        }
        if let (Some(&last), Some(&first)) = (self.timestamps.last(), other.timestamps.first()) {
            if first <= last {
                return Err(DatasetError::Schema(
                    "appended dataset does not start after this one".into(),
                ));
            }
        }
        self.timestamps.extend_from_slice(&other.timestamps);
        for (a, b) in self.channels.iter_mut().zip(&other.channels) {
            a.frequency.extend_from_slice(&b.frequency);
            a.power.extend_from_slice(&b.power);
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), DatasetError> {
        self.validate()?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER).map_err(csv_error)?;
        for (k, ts) in self.timestamps.iter().enumerate() {
            for ch in &self.channels {
                w.write_record([
                    ts.to_string(),
                    ch.id.to_string(),
                    ch.branch_id.to_string(),
                    ch.frequency[k].to_string(),
                    ch.power[k].to_string(),
                ])
                .map_err(csv_error)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String, DatasetError> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("CSV output is UTF-8"))
    }

    /// Parse the CSV wire format. The reporting rate is inferred from the
    /// timestamp span; PMU sites are left empty (see [`Self::attach_sites`]).
    pub fn read_csv<R: Read>(input: R) -> Result<PmuDataset, DatasetError> {
        let mut rdr = csv::Reader::from_reader(input);
        let headers = rdr.headers().map_err(csv_error)?.clone();
        if headers.iter().ne(CSV_HEADER.iter().copied()) {
            return Err(DatasetError::Schema(format!(
                "expected header {}, found {}",
                CSV_HEADER.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }

        let mut timestamps: Vec<i64> = Vec::new();
        let mut layout: Vec<(ChannelId, BranchId)> = Vec::new();
        let mut series: BTreeMap<ChannelId, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        let mut slot = 0usize;
        for result in rdr.deserialize::<Row>() {
            let row = result.map_err(csv_error)?;
            let new_instant = timestamps.last() != Some(&row.timestamp_ms);
            if new_instant {
                if let Some(&prev) = timestamps.last() {
                    if row.timestamp_ms <= prev {
                        return Err(DatasetError::Schema(format!(
                            "timestamp {} out of order",
                            row.timestamp_ms
                        )));
                    }
                    if slot != layout.len() {
                        return Err(DatasetError::Schema(format!(
                            "timestamp {prev} has {slot} of {} channels",
                            layout.len()
                        )));
                    }
                }
                timestamps.push(row.timestamp_ms);
                slot = 0;
            }
            if timestamps.len() == 1 {
                if layout.last().is_some_and(|&(id, _)| id >= row.channel_id) {
                    return Err(DatasetError::Schema(format!(
                        "channel {} out of order",
                        row.channel_id
                    )));
                }
                layout.push((row.channel_id, row.branch_id));
            } else if layout.get(slot) != Some(&(row.channel_id, row.branch_id)) {
                return Err(DatasetError::Schema(format!(
                    "timestamp {}: unexpected channel {} (branch {})",
                    row.timestamp_ms, row.channel_id, row.branch_id
                )));
            }
            let entry = series.entry(row.channel_id).or_default();
            entry.0.push(row.frequency_hz);
            entry.1.push(row.active_power_mw);
            slot += 1;
        }
        if timestamps.len() < 2 {
            return Err(DatasetError::Schema(
                "need at least two reporting instants".into(),
            ));
        }
        if slot != layout.len() {
            return Err(DatasetError::Schema(format!(
                "last timestamp has {slot} of {} channels (truncated?)",
                layout.len()
            )));
        }

        let span = (timestamps[timestamps.len() - 1] - timestamps[0]) as f64;
        let reporting_rate = 1000.0 * (timestamps.len() - 1) as f64 / span;
        let channels = layout
            .into_iter()
            .map(|(id, branch_id)| {
                let (frequency, power) = series.remove(&id).unwrap_or_default();
                Channel {
                    id,
                    branch_id,
                    site: None,
                    frequency,
                    power,
                }
            })
            .collect();
        let ds = PmuDataset {
            reporting_rate,
            timestamps,
            channels,
        };
        ds.validate()?;
        Ok(ds)
    }
}
