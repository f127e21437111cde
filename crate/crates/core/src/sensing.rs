//! Per-round data generation, CF-node activation and beacon windows.
//!
//! A normal node senses `mean +/- stdd * x` with `x ~ U[0,1]` and a random
//! sign, i.e. uniform over `[mean - stdd, mean + stdd]`. A compromised or
//! faulty (CF) node draws uniformly from the much wider `[0, 5 * mean]`.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use rand::Rng;
use rand_core::RngCore;

/// Parameters of the sensed-data model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataGenParams {
    pub mean_data: f64,
    pub stdd_data: f64,
    /// CF nodes draw from `[0, cf_multiplier * mean_data]`.
    pub cf_multiplier: f64,
}

impl Default for DataGenParams {
    fn default() -> Self {
        DataGenParams {
            mean_data: 80.0,
            stdd_data: 20.0,
            cf_multiplier: 5.0,
        }
    }
}

/// Draw one sensed value for a node.
pub fn generate_datum(cf: bool, params: &DataGenParams, rng: &mut impl RngCore) -> f64 {
    if cf {
        rng.gen_range(0.0..=params.cf_multiplier * params.mean_data)
    } else {
        let x: f64 = rng.gen_range(0.0..=1.0);
        let sign = if rng.gen_range(0..2u32) == 0 { 1.0 } else { -1.0 };
        params.mean_data + sign * params.stdd_data * x
    }
}

/// Which nodes have turned compromised or faulty, and when.
#[derive(Debug, Clone)]
pub struct CFState {
    cf_flags: Vec<bool>,
    cf_onset_round: Vec<Option<u32>>,
    /// A node that never becomes CF regardless of draws (the sink).
    exempt: Option<usize>,
    pub max_cf_nodes: usize,
    pub cf_prob: f64,
    /// First round at which the enable routine runs.
    pub start_round: u32,
}

impl CFState {
    pub fn new(num_nodes: usize, max_cf_nodes: usize, cf_prob: f64, start_round: u32) -> Self {
        CFState {
            cf_flags: alloc::vec![false; num_nodes],
            cf_onset_round: alloc::vec![None; num_nodes],
            exempt: None,
            max_cf_nodes,
            cf_prob,
            start_round,
        }
    }

    /// Exclude one node (the trusted sink) from ever becoming CF.
    pub fn with_exempt(mut self, node: usize) -> Self {
        self.exempt = Some(node);
        self
    }

    pub fn is_cf(&self, node: usize) -> bool {
        self.cf_flags[node]
    }

    pub fn onset_round(&self, node: usize) -> Option<u32> {
        self.cf_onset_round[node]
    }

    pub fn count(&self) -> usize {
        self.cf_flags.iter().filter(|&&f| f).count()
    }

    pub fn cf_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.cf_flags
            .iter()
            .enumerate()
            .filter_map(|(i, &f)| f.then_some(i))
    }
}

/// Run the per-round CF enable routine.
///
/// Before `start_round`, or once the cap is reached, this is a no-op. Each
/// not-yet-CF node draws a number in `[0, 1]` and flips when it is `<=
/// cf_prob`, in ascending node-id order; if the flips of one round would
/// overshoot the cap, only the lowest-id flips up to the cap are accepted.
pub fn cf_enable(round: u32, state: &mut CFState, rng: &mut impl RngCore) {
    if round < state.start_round || state.count() >= state.max_cf_nodes {
        return;
    }
    let mut flips = Vec::new();
    for node in 0..state.cf_flags.len() {
        if state.cf_flags[node] || state.exempt == Some(node) {
            continue;
        }
        let u: f64 = rng.gen_range(0.0..=1.0);
        if u <= state.cf_prob {
            flips.push(node);
        }
    }
    let room = state.max_cf_nodes - state.count();
    for &node in flips.iter().take(room) {
        state.cf_flags[node] = true;
        state.cf_onset_round[node] = Some(round);
    }
}

/// FIFO of a neighbor's recent raw sensed values.
#[derive(Debug, Clone, PartialEq)]
pub struct BeaconWindow {
    data: VecDeque<f64>,
    capacity: usize,
}

impl BeaconWindow {
    pub fn new(capacity: usize) -> Self {
        BeaconWindow {
            data: VecDeque::with_capacity(capacity),
            capacity,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.data.iter().copied()
    }

    /// Append a beacon value, purging the earliest recorded one first when
    /// the window is full.
    pub fn record(&mut self, value: f64) {
        if self.data.len() == self.capacity {
            self.data.pop_front();
        }
        self.data.push_back(value);
    }
}

/// Alias matching the operation naming used elsewhere.
pub fn record_beacon(window: &mut BeaconWindow, value: f64) {
    window.record(value);
}
