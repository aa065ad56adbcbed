//! Centered moving-median and moving-mean filters.
//!
//! Both filters use a window centered on each sample. Near the ends the
//! window shrinks symmetrically (sample `i` of `n` uses half-width
//! `min(h, i, n - 1 - i)`), so no padding values are invented and the output
//! of a reversed series is the reversed output.
//!
//! [`StreamingFilter`] produces bit-identical output one sample at a time;
//! each output is released as soon as its window is complete, i.e. with a
//! delay of half a window.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FilterError {
    #[error("window {0} must be odd")]
    EvenWindow(usize),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterParams {
    pub median_window: usize,
    pub mean_window: usize,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self {
            median_window: 7,
            mean_window: 31,
        }
    }
}

impl FilterParams {
    pub fn validate(&self) -> Result<(), FilterError> {
        check_window(self.median_window)?;
        check_window(self.mean_window)
    }
}

fn check_window(window: usize) -> Result<(), FilterError> {
    if window % 2 == 1 {
        Ok(())
    } else {
        Err(FilterError::EvenWindow(window))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kernel {
    Median,
    Mean,
}

/// Median of an odd-length window.
fn median_of(window: &[f64], scratch: &mut Vec<f64>) -> f64 {
    scratch.clear();
    scratch.extend_from_slice(window);
    scratch.sort_unstable_by(f64::total_cmp);
    scratch[scratch.len() / 2]
}

/// Mean of an odd-length window, accumulated as symmetric pairs of
/// deviations from the center sample. Pair sums commute exactly, so the
/// result does not depend on the window's direction, and a constant window
/// returns the constant unchanged.
fn centered_mean(window: &[f64]) -> f64 {
    let half = window.len() / 2;
    let center = window[half];
    let mut acc = 0.0;
    for d in 1..=half {
        acc += (window[half - d] - center) + (window[half + d] - center);
    }
    center + acc / window.len() as f64
}

fn sorted_insert(sorted: &mut Vec<f64>, x: f64) {
    let pos = sorted.partition_point(|v| v.total_cmp(&x).is_lt());
    sorted.insert(pos, x);
}

fn sorted_remove(sorted: &mut Vec<f64>, x: f64) {
    let pos = sorted.partition_point(|v| v.total_cmp(&x).is_lt());
    debug_assert!(pos < sorted.len() && sorted[pos].total_cmp(&x).is_eq());
    sorted.remove(pos);
}

pub fn moving_median(series: &[f64], window: usize) -> Result<Vec<f64>, FilterError> {
    check_window(window)?;
    let n = series.len();
    let h = window / 2;
    let mut out = Vec::with_capacity(n);
    let mut scratch = Vec::with_capacity(window);
    let mut sorted: Vec<f64> = Vec::with_capacity(window);
    for i in 0..n {
        let k = h.min(i).min(n - 1 - i);
        if k < h {
            out.push(median_of(&series[i - k..=i + k], &mut scratch));
            continue;
        }
        if sorted.is_empty() {
            sorted.extend_from_slice(&series[i - h..=i + h]);
            sorted.sort_unstable_by(f64::total_cmp);
        } else {
            sorted_remove(&mut sorted, series[i - h - 1]);
            sorted_insert(&mut sorted, series[i + h]);
        }
        out.push(sorted[h]);
    }
    Ok(out)
}

pub fn moving_mean(series: &[f64], window: usize) -> Result<Vec<f64>, FilterError> {
    check_window(window)?;
    let n = series.len();
    let h = window / 2;
    Ok((0..n)
        .map(|i| {
            let k = h.min(i).min(n - 1 - i);
            centered_mean(&series[i - k..=i + k])
        })
        .collect())
}

pub fn detrend(filtered: &[f64], trend: &[f64]) -> Result<Vec<f64>, FilterError> {
    if filtered.len() != trend.len() {
        return Err(FilterError::LengthMismatch {
            left: filtered.len(),
            right: trend.len(),
        });
    }
    Ok(filtered.iter().zip(trend).map(|(f, t)| f - t).collect())
}

/// Median filter, moving-mean trend of the filtered signal, and their
/// difference.
pub fn deviation(series: &[f64], params: &FilterParams) -> Result<Vec<f64>, FilterError> {
    params.validate()?;
    let filtered = moving_median(series, params.median_window)?;
    let trend = moving_mean(&filtered, params.mean_window)?;
    detrend(&filtered, &trend)
}

/// Incremental form of [`moving_median`] / [`moving_mean`].
#[derive(Debug, Clone)]
pub struct StreamingFilter {
    kernel: Kernel,
    window: usize,
    half: usize,
    buf: VecDeque<f64>,
    sorted: Vec<f64>,
    scratch: Vec<f64>,
    received: usize,
    emitted: usize,
}

impl StreamingFilter {
    pub fn new(kernel: Kernel, window: usize) -> Result<Self, FilterError> {
        check_window(window)?;
        Ok(Self {
            kernel,
            window,
            half: window / 2,
            buf: VecDeque::with_capacity(window + 1),
            sorted: Vec::with_capacity(window + 1),
            scratch: Vec::with_capacity(window),
            received: 0,
            emitted: 0,
        })
    }

    pub fn median(window: usize) -> Result<Self, FilterError> {
        Self::new(Kernel::Median, window)
    }

    pub fn mean(window: usize) -> Result<Self, FilterError> {
        Self::new(Kernel::Mean, window)
    }

    /// Feed one sample; returns the next output once its window is complete.
    pub fn push(&mut self, x: f64) -> Option<f64> {
        self.buf.push_back(x);
        if self.kernel == Kernel::Median {
            sorted_insert(&mut self.sorted, x);
        }
        if self.buf.len() > self.window {
            let old = self.buf.pop_front().expect("non-empty buffer");
            if self.kernel == Kernel::Median {
                sorted_remove(&mut self.sorted, old);
            }
        }
        let j = self.received;
        self.received += 1;

        // Sample j completes the window of output j/2 (growing edge) or of
        // output j - h (full window).
        if j < 2 * self.half {
            if !j.is_multiple_of(2) {
                return None;
            }
            self.emitted += 1;
            let y = self.apply_range(0, self.buf.len());
            return Some(y);
        }
        self.emitted += 1;
        Some(match self.kernel {
            Kernel::Median => self.sorted[self.half],
            Kernel::Mean => centered_mean(self.buf.make_contiguous()),
        })
    }

    /// Flush the outputs whose windows were truncated by the end of input.
    pub fn finish(mut self) -> Vec<f64> {
        let n = self.received;
        let first = n - self.buf.len();
        let mut out = Vec::with_capacity(n - self.emitted);
        for i in self.emitted..n {
            let k = self.half.min(i).min(n - 1 - i);
            out.push(self.apply_range(i - k - first, i + k + 1 - first));
        }
        out
    }

    fn apply_range(&mut self, start: usize, end: usize) -> f64 {
        let slice = &self.buf.make_contiguous()[start..end];
        match self.kernel {
            Kernel::Median => median_of(slice, &mut self.scratch),
            Kernel::Mean => centered_mean(slice),
        }
    }
}
