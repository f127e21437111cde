//! Distributed trust evaluation: two-sided Grubbs' outlier test on beacon
//! windows, trust-score buffers segmented by association, and local CF
//! classification.
//!
//! Every raw trust score is 0 (the freshly inserted beacon is an outlier) or
//! 1 (it is not). Scores live in a per parent-child FIFO buffer tagged by
//! whether they were collected during the current tree association or an
//! earlier one; the estimated average trust score blends the two segment
//! averages with the `historyWeight` parameter. A node whose estimate drops
//! below the trust threshold is locally and permanently blacklisted by the
//! observing parent.

use alloc::collections::VecDeque;
use core::fmt;

use crate::sensing::BeaconWindow;

/// 95% confidence two-sided t-score reference values, indexed by sample count.
pub const TSCORE_TABLE: [(u32, f64); 18] = [
    (1, 12.706),
    (2, 4.303),
    (3, 3.182),
    (4, 2.776),
    (5, 2.571),
    (6, 2.447),
    (7, 2.365),
    (8, 2.306),
    (9, 2.262),
    (10, 2.228),
    (15, 2.131),
    (20, 2.086),
    (25, 2.060),
    (30, 2.042),
    (40, 2.021),
    (60, 2.000),
    (120, 1.980),
    (5000, 1.960),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrustError {
    /// Sample count below the smallest tabulated value.
    SampleCountTooSmall,
    /// The Grubbs test needs at least 3 samples.
    WindowTooSmall,
    /// The inserted datum cannot be scored against an empty window.
    EmptyWindow,
}

impl fmt::Display for TrustError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrustError::SampleCountTooSmall => write!(f, "sample count must be at least 1"),
            TrustError::WindowTooSmall => write!(f, "Grubbs threshold needs n >= 3"),
            TrustError::EmptyWindow => write!(f, "cannot score against an empty window"),
        }
    }
}

impl core::error::Error for TrustError {}

/// t-score for a given sample count: exact table value where listed, linear
/// interpolation between bracketing rows otherwise, and 1.960 from 5000 on.
pub fn t_score(n: usize) -> Result<f64, TrustError> {
    if n < 1 {
        return Err(TrustError::SampleCountTooSmall);
    }
    let n = n as u32;
    let last = TSCORE_TABLE[TSCORE_TABLE.len() - 1];
    if n >= last.0 {
        return Ok(last.1);
    }
    for window in TSCORE_TABLE.windows(2) {
        let (n0, t0) = window[0];
        let (n1, t1) = window[1];
        if n == n0 {
            return Ok(t0);
        }
        if n < n1 {
            let frac = (n - n0) as f64 / (n1 - n0) as f64;
            return Ok(t0 + frac * (t1 - t0));
        }
    }
    unreachable!()
}

/// Grubbs' test threshold for a window of `n` samples:
/// `G = ((n - 1) / sqrt(n)) * sqrt(t^2 / (n - 2 + t^2))` with `t = t_score(n)`.
///
/// The test is indexed by the window size itself, matching the trust model's
/// definition. For `n = 2` the statistic can never exceed the threshold, so
/// callers gate on `n >= 3`.
pub fn grubbs_threshold(n: usize) -> Result<f64, TrustError> {
    if n < 3 {
        return Err(TrustError::WindowTooSmall);
    }
    let t = t_score(n)?;
    let nf = n as f64;
    Ok((nf - 1.0) / libm::sqrt(nf) * libm::sqrt(t * t / (nf - 2.0 + t * t)))
}

/// Score the most recently appended beacon: 0 if it is an outlier of its
/// window under the two-sided Grubbs' test, 1 otherwise.
///
/// The inserted datum is an outlier iff it equals the window minimum or
/// maximum and the corresponding studentized deviation exceeds the Grubbs
/// threshold. Windows with fewer than 3 samples or (near-)zero standard
/// deviation always score 1; the standard deviation uses the n-1 divisor.
pub fn raw_trust_score(window: &BeaconWindow, inserted: f64) -> Result<u8, TrustError> {
    let n = window.len();
    if n == 0 {
        return Err(TrustError::EmptyWindow);
    }
    if n < 3 {
        return Ok(1);
    }
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for v in window.values() {
        min = min.min(v);
        max = max.max(v);
        sum += v;
    }
    let mean = sum / n as f64;
    let ss: f64 = window.values().map(|v| (v - mean) * (v - mean)).sum();
    let sd = libm::sqrt(ss / (n as f64 - 1.0));
    if sd < 1e-9 {
        return Ok(1);
    }
    let g = grubbs_threshold(n)?;
    let outlier = (inserted == min && (mean - min).abs() / sd > g)
        || (inserted == max && (mean - max).abs() / sd > g);
    Ok(if outlier { 0 } else { 1 })
}

/// Which tree association a trust score was collected under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Association {
    Previous,
    Current,
}

/// FIFO of 0/1 raw trust scores tagged by association.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrustScoreBuffer {
    entries: VecDeque<(u8, Association)>,
    capacity: usize,
}

impl TrustScoreBuffer {
    pub fn new(capacity: usize) -> Self {
        TrustScoreBuffer {
            entries: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn entries(&self) -> impl Iterator<Item = (u8, Association)> + '_ {
        self.entries.iter().copied()
    }

    /// Append a raw score tagged `Current`, evicting the oldest entry first
    /// when full.
    pub fn append(&mut self, score: u8) {
        debug_assert!(score <= 1);
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back((score, Association::Current));
    }

    /// Retag every `Current` score as `Previous`. Invoked when a new DG-tree
    /// delimits a fresh association.
    pub fn roll_association(&mut self) {
        for entry in &mut self.entries {
            entry.1 = Association::Previous;
        }
    }

    fn segment_average(&self, which: Association) -> Option<f64> {
        let mut count = 0usize;
        let mut sum = 0usize;
        for (score, tag) in self.entries() {
            if tag == which {
                count += 1;
                sum += score as usize;
            }
        }
        (count > 0).then(|| sum as f64 / count as f64)
    }
}

/// Mirror of [`TrustScoreBuffer::append`] as a free function.
pub fn append_trust_score(buffer: &mut TrustScoreBuffer, score: u8) {
    buffer.append(score);
}

/// Mirror of [`TrustScoreBuffer::roll_association`] as a free function.
pub fn roll_association(buffer: &mut TrustScoreBuffer) {
    buffer.roll_association();
}

/// Estimated average trust score.
///
/// Undefined until the buffer holds at least half its capacity (ceiling for
/// odd capacities). Otherwise
/// `historyWeight * avg(previous) + (1 - historyWeight) * avg(current)`;
/// when one segment is empty the other segment's plain average is returned.
pub fn est_avg_trust(buffer: &TrustScoreBuffer, history_weight: f64) -> Option<f64> {
    if buffer.len() < buffer.capacity().div_ceil(2) {
        return None;
    }
    let prev = buffer.segment_average(Association::Previous);
    let curr = buffer.segment_average(Association::Current);
    match (prev, curr) {
        (Some(p), Some(c)) => Some(history_weight * p + (1.0 - history_weight) * c),
        (Some(p), None) => Some(p),
        (None, Some(c)) => Some(c),
        (None, None) => None,
    }
}

/// Latched local CF classification of one subject by one observer.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TrustAssessment {
    pub est_avg_trust: Option<f64>,
    pub is_cf_locally: bool,
    pub detection_round: Option<u32>,
}

/// Update an assessment with a freshly computed estimate.
///
/// Returns `true` when this call newly flags the subject. The flag latches:
/// once a subject is classified CF it stays CF for the observer.
pub fn check_cf_status(
    assessment: &mut TrustAssessment,
    est: f64,
    threshold: f64,
    round: u32,
) -> bool {
    assessment.est_avg_trust = Some(est);
    if !assessment.is_cf_locally && est < threshold {
        assessment.is_cf_locally = true;
        assessment.detection_round = Some(round);
        return true;
    }
    false
}

/// Everything one observer tracks about one subject.
#[derive(Debug, Clone)]
pub struct NeighborTrustState {
    pub window: BeaconWindow,
    pub buffer: TrustScoreBuffer,
    pub assessment: TrustAssessment,
}

impl NeighborTrustState {
    pub fn new(max_bw_size: usize, max_tsb_size: usize) -> Self {
        NeighborTrustState {
            window: BeaconWindow::new(max_bw_size),
            buffer: TrustScoreBuffer::new(max_tsb_size),
            assessment: TrustAssessment::default(),
        }
    }
}
