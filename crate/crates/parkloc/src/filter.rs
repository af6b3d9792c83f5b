//! Streaming anomaly rejection for recognized parking numbers.
//!
//! A bounded FIFO holds the most recently accepted numeric values. Parking
//! numbers change linearly along an aisle, so a candidate far outside the
//! box-plot acceptance window `[median - 1.5*IQR, median + 1.5*IQR]` of the
//! queue is a misrecognition and is dropped. While the queue is still
//! filling (warm-up) every candidate is accepted.

use std::collections::VecDeque;
use thiserror::Error;

/// Default queue capacity: 30 values, one nominal second of video.
pub const DEFAULT_CAPACITY: usize = 30;

/// Default number of consecutive rejections after which the caller should
/// reset the queue (~3 s at 30 fps).
pub const DEFAULT_RESET_AFTER_REJECTIONS: u32 = 90;

/// Longest digit string `extract_number` accepts.
const MAX_DIGITS: usize = 18;

#[derive(Debug, Error, PartialEq)]
pub enum FilterError {
    #[error("digit string longer than {MAX_DIGITS} digits")]
    Overflow,
    #[error("empty input")]
    EmptyInput,
}

/// Outcome of offering one value to the filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Accepted,
    Rejected,
}

/// Quartiles and the derived acceptance window of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxplotBounds {
    pub lower_quartile: f64,
    pub median: f64,
    pub upper_quartile: f64,
    pub iqr: f64,
    pub lo: f64,
    pub hi: f64,
}

impl BoxplotBounds {
    pub fn contains(&self, value: i64) -> bool {
        let v = value as f64;
        self.lo <= v && v <= self.hi
    }
}

/// Quantile at fraction `f` of an ascending-sorted slice, by linear
/// interpolation at rank `f * (n - 1)`.
fn quantile_sorted(sorted: &[i64], f: f64) -> f64 {
    let rank = f * (sorted.len() - 1) as f64;
    let lower = rank.floor() as usize;
    let upper = rank.ceil() as usize;
    if lower == upper {
        sorted[lower] as f64
    } else {
        let w = rank - lower as f64;
        sorted[lower] as f64 * (1.0 - w) + sorted[upper] as f64 * w
    }
}

/// Computes quartiles and the acceptance window over a non-empty sample.
pub fn boxplot_bounds(values: &[i64]) -> Result<BoxplotBounds, FilterError> {
    if values.is_empty() {
        return Err(FilterError::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    let lower_quartile = quantile_sorted(&sorted, 0.25);
    let median = quantile_sorted(&sorted, 0.5);
    let upper_quartile = quantile_sorted(&sorted, 0.75);
    let iqr = upper_quartile - lower_quartile;
    Ok(BoxplotBounds {
        lower_quartile,
        median,
        upper_quartile,
        iqr,
        lo: median - 1.5 * iqr,
        hi: median + 1.5 * iqr,
    })
}

/// Concatenates all decimal digit runs of `text` and parses the result as a
/// base-10 integer. Returns `None` when the text has no digits; digit
/// strings longer than 18 characters are malformed input.
pub fn extract_number(text: &str) -> Result<Option<i64>, FilterError> {
    let digits: String = text.chars().filter(|c| c.is_ascii_digit()).collect();
    if digits.is_empty() {
        return Ok(None);
    }
    if digits.len() > MAX_DIGITS {
        return Err(FilterError::Overflow);
    }
    Ok(Some(digits.parse::<i64>().expect("<=18 digits fits i64")))
}

/// Bounded FIFO of recently accepted parking-number values.
#[derive(Debug, Clone)]
pub struct FilterState {
    queue: VecDeque<i64>,
    capacity: usize,
}

impl FilterState {
    /// `capacity` must be positive; 0 is clamped to 1.
    pub fn new(capacity: usize) -> Self {
        Self {
            queue: VecDeque::new(),
            capacity: capacity.max(1),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }

    /// True until the queue first reaches capacity after construction or
    /// reset.
    pub fn is_warming_up(&self) -> bool {
        self.queue.len() < self.capacity
    }

    pub fn values(&self) -> impl Iterator<Item = i64> + '_ {
        self.queue.iter().copied()
    }

    /// Offers one value. During warm-up everything is accepted and pushed.
    /// At capacity the value is tested against the current window; accepted
    /// values evict the oldest entry, rejected values leave the state
    /// untouched.
    pub fn filter_step(&mut self, value: i64) -> Decision {
        if self.is_warming_up() {
            self.queue.push_back(value);
            return Decision::Accepted;
        }
        let sample: Vec<i64> = self.queue.iter().copied().collect();
        let bounds = boxplot_bounds(&sample).expect("queue is non-empty at capacity");
        if bounds.contains(value) {
            self.queue.pop_front();
            self.queue.push_back(value);
            Decision::Accepted
        } else {
            Decision::Rejected
        }
    }

    /// Empties the queue and re-enters warm-up.
    pub fn reset(&mut self) {
        self.queue.clear();
    }
}

impl Default for FilterState {
    fn default() -> Self {
        Self::new(DEFAULT_CAPACITY)
    }
}
