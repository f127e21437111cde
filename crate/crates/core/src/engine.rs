//! The per-round simulation loop.
//!
//! Each round, in order: refresh positions from the mobility trace, run the
//! CF enable routine, check the DG-tree (rebuilding it -- with key
//! management and association rolls -- when an edge broke or none exists),
//! let every node sense and beacon, score each parent's children with the
//! Grubbs trust test, and aggregate up the tree with per-observer
//! blacklists. Rounds whose connectivity graph is disconnected produce no
//! aggregate and retry the tree next round.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::aggregation::{aggregate_tree, sink_average, AggregatePacket};
use crate::config::{ConfigError, ScenarioConfig, TreeType};
use crate::keyproto::{
    run_key_establishment_for_tree, BsDirectory, Channel, Key, KeyCache, KeyedStreamCipher,
    MessageLogEntry,
};
use crate::mobility::{MobilityTrace, Point};
use crate::sensing::{cf_enable, generate_datum, CFState, DataGenParams};
use crate::topology::{build_graph, let_tree, mst_tree, root_tree, tree_alive, DGTree};
use crate::trust::{check_cf_status, est_avg_trust, raw_trust_score, NeighborTrustState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineError {
    Config(ConfigError),
    /// The trace does not cover the configured node count or horizon.
    TraceMismatch,
}

impl core::fmt::Display for EngineError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            EngineError::Config(e) => write!(f, "invalid configuration: {e}"),
            EngineError::TraceMismatch => write!(f, "mobility trace does not match the scenario"),
        }
    }
}

impl core::error::Error for EngineError {}

impl From<ConfigError> for EngineError {
    fn from(e: ConfigError) -> Self {
        EngineError::Config(e)
    }
}

/// Metrics of one finished profile run.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileMetrics {
    /// Median over detected CF nodes of (first flag round - onset round);
    /// `None` when no CF node was detected.
    pub median_detect_rounds: Option<f64>,
    /// Mean of the per-round sink averages over all aggregation rounds.
    pub avg_sink_value: Option<f64>,
    /// Distinct non-CF nodes some observer flagged.
    pub false_positives: u32,
    /// Pairwise keys newly established (equals distinct key pairs: a pair is
    /// only ever established once, then refreshed).
    pub keys_established: u32,
    pub keys_refreshed: u32,
    pub key_failures: u32,
    /// Rounds with a disconnected graph and therefore no aggregation.
    pub rounds_without_tree: u32,
    pub tree_rebuilds: u32,
    pub detected_cf: u32,
    pub undetected_cf: u32,
}

/// Full mutable state of one profile run.
pub struct World {
    config: ScenarioConfig,
    trace: MobilityTrace,
    rng: ChaCha8Rng,
    cipher: KeyedStreamCipher,
    positions: Vec<Point>,
    velocities: Vec<(f64, f64)>,
    cf: CFState,
    tree: Option<DGTree>,
    /// Per observer, per subject trust state; entries appear on first beacon.
    neighbor_state: Vec<BTreeMap<usize, NeighborTrustState>>,
    caches: Vec<KeyCache>,
    bs: BsDirectory,
    channel: Channel,
    round: u32,
    sink_value_sum: f64,
    sink_rounds: u32,
    rounds_without_tree: u32,
    tree_rebuilds: u32,
    keys_established: u32,
    keys_refreshed: u32,
    key_failures: u32,
    keys_after_first_tree: Option<u32>,
    /// CF subject -> detection delta in rounds.
    detections: BTreeMap<usize, u32>,
    false_positive_subjects: BTreeSet<usize>,
    last_packet: Option<AggregatePacket>,
}

impl World {
    /// Build a world from a config and a mobility trace. The sink's
    /// trajectory is pinned to the configured sink position.
    pub fn new(
        config: ScenarioConfig,
        mut trace: MobilityTrace,
        record_protocol_trace: bool,
    ) -> Result<Self, EngineError> {
        config.validate()?;
        if trace.num_nodes() != config.num_nodes {
            return Err(EngineError::TraceMismatch);
        }
        let last_query = (config.num_rounds().saturating_sub(1)) as f64 * config.round_duration();
        if trace.horizon() + 1e-9 < last_query {
            return Err(EngineError::TraceMismatch);
        }
        trace.pin_node(ScenarioConfig::SINK, Point::new(config.sink_x, config.sink_y));

        let mut rng = ChaCha8Rng::seed_from_u64(
            trace
                .seed()
                .wrapping_mul(0xA076_1D64_78BD_642F)
                .wrapping_add(config.seed),
        );
        let n = config.num_nodes;
        let mut bs_keys = Vec::with_capacity(n);
        for _ in 0..n {
            let mut k = [0u8; 16];
            rng.fill_bytes(&mut k);
            bs_keys.push(Key(k));
        }
        let caches = bs_keys.iter().map(|&k| KeyCache::new(k)).collect();
        let cf = CFState::new(n, config.max_cf_nodes, config.cf_prob, config.cf_start_round)
            .with_exempt(ScenarioConfig::SINK);

        Ok(World {
            positions: alloc::vec![Point::new(0.0, 0.0); n],
            velocities: alloc::vec![(0.0, 0.0); n],
            cf,
            tree: None,
            neighbor_state: alloc::vec![BTreeMap::new(); n],
            caches,
            bs: BsDirectory::new(ScenarioConfig::SINK, bs_keys),
            channel: Channel::new(record_protocol_trace),
            round: 0,
            sink_value_sum: 0.0,
            sink_rounds: 0,
            rounds_without_tree: 0,
            tree_rebuilds: 0,
            keys_established: 0,
            keys_refreshed: 0,
            key_failures: 0,
            keys_after_first_tree: None,
            detections: BTreeMap::new(),
            false_positive_subjects: BTreeSet::new(),
            last_packet: None,
            config,
            trace,
            rng,
            cipher: KeyedStreamCipher,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn tree(&self) -> Option<&DGTree> {
        self.tree.as_ref()
    }

    pub fn is_cf(&self, node: usize) -> bool {
        self.cf.is_cf(node)
    }

    /// The sink packet of the most recent aggregation round.
    pub fn last_packet(&self) -> Option<AggregatePacket> {
        self.last_packet
    }

    pub fn protocol_trace(&self) -> Option<&[MessageLogEntry]> {
        self.channel.trace()
    }

    pub fn tree_rebuilds(&self) -> u32 {
        self.tree_rebuilds
    }

    /// Unordered node pairs whose caches both hold a pairwise key.
    pub fn distinct_key_pairs(&self) -> u32 {
        let mut count = 0;
        for (a, cache) in self.caches.iter().enumerate() {
            for b in cache.peers() {
                if b > a && self.caches[b].pairwise_key(a).is_some() {
                    count += 1;
                }
            }
        }
        count
    }

    /// Distinct key pairs right after the first tree's key management ran.
    pub fn keys_after_first_tree(&self) -> Option<u32> {
        self.keys_after_first_tree
    }

    fn blacklisted(&self, observer: usize, subject: usize) -> bool {
        self.neighbor_state[observer]
            .get(&subject)
            .is_some_and(|s| s.assessment.is_cf_locally)
    }

    /// Steps 1-3: positions, CF enabling, tree maintenance. Returns `false`
    /// when the graph is disconnected and the round ends without aggregation.
    fn begin_round(&mut self) -> bool {
        let t = self.round as f64 * self.config.round_duration();
        for node in 0..self.config.num_nodes {
            self.positions[node] = self
                .trace
                .position_at(node, t)
                .expect("round time within horizon");
            self.velocities[node] = self
                .trace
                .velocity_at(node, t)
                .expect("round time within horizon");
        }

        cf_enable(self.round, &mut self.cf, &mut self.rng);

        let alive = self
            .tree
            .as_ref()
            .is_some_and(|tree| tree_alive(tree, &self.positions, self.config.trans_range));
        if !alive {
            let graph = build_graph(&self.positions, self.config.trans_range, &self.velocities);
            let spanning = match self.config.tree_type {
                TreeType::Mst => mst_tree(&graph),
                TreeType::Let => let_tree(&graph),
            };
            let Some(spanning) = spanning else {
                self.tree = None;
                self.rounds_without_tree += 1;
                self.round += 1;
                return false;
            };
            let tree = root_tree(&spanning, ScenarioConfig::SINK, self.round);

            // A new DG-tree delimits the associations of every pair.
            for map in &mut self.neighbor_state {
                for state in map.values_mut() {
                    state.buffer.roll_association();
                }
            }

            self.channel.set_round(self.round);
            let report = run_key_establishment_for_tree(
                &tree,
                &mut self.caches,
                &self.bs,
                &self.cipher,
                &mut self.rng,
                &mut self.channel,
            );
            self.keys_established += report.established;
            self.keys_refreshed += report.refreshed;
            self.key_failures += report.failures;
            if self.keys_after_first_tree.is_none() {
                self.keys_after_first_tree = Some(self.distinct_key_pairs());
            }
            self.tree_rebuilds += 1;
            self.tree = Some(tree);
        }
        true
    }

    /// Draw every node's beacon value for this round, in ascending id order.
    fn sense_all(&mut self) -> Vec<f64> {
        let params = DataGenParams {
            mean_data: self.config.mean_data,
            stdd_data: self.config.stdd_data,
            ..DataGenParams::default()
        };
        (0..self.config.num_nodes)
            .map(|node| generate_datum(self.cf.is_cf(node), &params, &mut self.rng))
            .collect()
    }

    /// Steps 4-6: beacon recording, trust evaluation, aggregation.
    fn finish_round(&mut self, data: &[f64]) {
        debug_assert_eq!(data.len(), self.config.num_nodes);
        let n = self.config.num_nodes;
        let range = self.config.trans_range;

        // Every node in range hears the beacon; observers that already
        // blacklisted the subject drop it.
        for observer in 0..n {
            for subject in 0..n {
                if observer == subject {
                    continue;
                }
                if self.positions[observer].distance(&self.positions[subject]) > range {
                    continue;
                }
                if self.blacklisted(observer, subject) {
                    continue;
                }
                self.neighbor_state[observer]
                    .entry(subject)
                    .or_insert_with(|| {
                        NeighborTrustState::new(self.config.max_bw_size, self.config.max_tsb_size)
                    })
                    .window
                    .record(data[subject]);
            }
        }

        if self.config.trust_enabled {
            self.evaluate_trust(data);
        }

        let tree = self.tree.as_ref().expect("live tree in aggregation step");
        let neighbor_state = &self.neighbor_state;
        let trust_enabled = self.config.trust_enabled;
        let packet = aggregate_tree(tree, data, |parent, child| {
            trust_enabled
                && neighbor_state[parent]
                    .get(&child)
                    .is_some_and(|s| s.assessment.is_cf_locally)
        });
        self.sink_value_sum += sink_average(&packet);
        self.sink_rounds += 1;
        self.last_packet = Some(packet);
        self.round += 1;
    }

    /// Step 5: each parent scores each non-blacklisted child's freshest
    /// beacon and updates the child's assessment.
    fn evaluate_trust(&mut self, data: &[f64]) {
        let tree = self.tree.as_ref().expect("live tree in trust step");
        let mut flagged = Vec::new();
        for parent in 0..self.config.num_nodes {
            for &child in &tree.children[parent] {
                let Some(state) = self.neighbor_state[parent].get_mut(&child) else {
                    continue;
                };
                if state.assessment.is_cf_locally {
                    continue;
                }
                let score = raw_trust_score(&state.window, data[child])
                    .expect("window holds this round's beacon");
                state.buffer.append(score);
                if let Some(est) = est_avg_trust(&state.buffer, self.config.history_weight) {
                    if check_cf_status(
                        &mut state.assessment,
                        est,
                        self.config.trust_threshold,
                        self.round,
                    ) {
                        flagged.push(child);
                    }
                }
            }
        }
        for subject in flagged {
            if self.cf.is_cf(subject) {
                if !self.detections.contains_key(&subject) {
                    let onset = self.cf.onset_round(subject).expect("CF node has onset");
                    self.detections.insert(subject, self.round - onset);
                }
            } else {
                self.false_positive_subjects.insert(subject);
            }
        }
    }

    /// Advance the world by one round.
    pub fn run_round(&mut self) {
        if !self.begin_round() {
            return;
        }
        let data = self.sense_all();
        self.finish_round(&data);
    }

    /// Advance one round with caller-scripted beacon values instead of drawn
    /// ones. Per-node CF state and tree maintenance behave exactly as in
    /// [`World::run_round`].
    pub fn run_round_scripted(&mut self, data: &[f64]) {
        if !self.begin_round() {
            return;
        }
        self.finish_round(data);
    }

    /// Run all remaining rounds of the profile.
    pub fn run_to_end(&mut self) {
        while self.round < self.config.num_rounds() {
            self.run_round();
        }
    }

    pub fn metrics(&self) -> ProfileMetrics {
        let mut deltas: Vec<u32> = self.detections.values().copied().collect();
        deltas.sort_unstable();
        let median = match deltas.len() {
            0 => None,
            len if len % 2 == 1 => Some(deltas[len / 2] as f64),
            len => Some((deltas[len / 2 - 1] as f64 + deltas[len / 2] as f64) / 2.0),
        };
        ProfileMetrics {
            median_detect_rounds: median,
            avg_sink_value: (self.sink_rounds > 0)
                .then(|| self.sink_value_sum / self.sink_rounds as f64),
            false_positives: self.false_positive_subjects.len() as u32,
            keys_established: self.keys_established,
            keys_refreshed: self.keys_refreshed,
            key_failures: self.key_failures,
            rounds_without_tree: self.rounds_without_tree,
            tree_rebuilds: self.tree_rebuilds,
            detected_cf: self.detections.len() as u32,
            undetected_cf: (self.cf.count() - self.detections.len()) as u32,
        }
    }
}

/// Run one full profile: `horizon * rounds_per_second` rounds.
pub fn run_profile(
    config: &ScenarioConfig,
    trace: MobilityTrace,
) -> Result<ProfileMetrics, EngineError> {
    let mut world = World::new(config.clone(), trace, false)?;
    world.run_to_end();
    Ok(world.metrics())
}
