//! Scenario configuration: one experiment cell plus the fixed world
//! parameters.

use core::fmt;

/// Which spanning tree the data-gathering tree is derived from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TreeType {
    /// Minimum total Euclidean distance.
    Mst,
    /// Maximum total link expiration time.
    Let,
}

impl TreeType {
    pub fn as_str(&self) -> &'static str {
        match self {
            TreeType::Mst => "MST",
            TreeType::Let => "LET",
        }
    }
}

impl fmt::Display for TreeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for TreeType {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "MST" | "mst" => Ok(TreeType::Mst),
            "LET" | "let" => Ok(TreeType::Let),
            _ => Err(ConfigError::InvalidValue),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfigError {
    /// A field violates its range constraint.
    InvalidValue,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "configuration value out of range")
    }
}

impl core::error::Error for ConfigError {}

/// One experiment cell: the swept trust/tree parameters plus the fixed
/// deployment parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub tree_type: TreeType,
    pub num_nodes: usize,
    pub area_width: f64,
    pub area_height: f64,
    /// The sink sits still at this position and roots every DG-tree.
    pub sink_x: f64,
    pub sink_y: f64,
    pub trans_range: f64,
    pub vmax: f64,
    /// Simulated seconds per mobility profile.
    pub horizon: f64,
    pub rounds_per_second: u32,
    pub mean_data: f64,
    pub stdd_data: f64,
    pub max_bw_size: usize,
    pub max_tsb_size: usize,
    pub trust_threshold: f64,
    pub history_weight: f64,
    pub max_cf_nodes: usize,
    pub cf_prob: f64,
    pub cf_start_round: u32,
    /// Ablation switch: with trust off, no scoring runs and nothing is
    /// filtered during aggregation.
    pub trust_enabled: bool,
    /// Base seed; per-profile seeds are derived from it.
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            tree_type: TreeType::Mst,
            num_nodes: 100,
            area_width: 100.0,
            area_height: 100.0,
            sink_x: 100.0,
            sink_y: 100.0,
            trans_range: 25.0,
            vmax: 3.0,
            horizon: 1000.0,
            rounds_per_second: 4,
            mean_data: 80.0,
            stdd_data: 20.0,
            max_bw_size: 10,
            max_tsb_size: 30,
            trust_threshold: 0.7,
            history_weight: 0.7,
            max_cf_nodes: 20,
            cf_prob: 0.005,
            cf_start_round: 10,
            trust_enabled: true,
            seed: 1,
        }
    }
}

impl ScenarioConfig {
    /// The sink's node id. It is pinned at `(sink_x, sink_y)`, roots every
    /// tree, and never becomes CF.
    pub const SINK: usize = 0;

    pub fn num_rounds(&self) -> u32 {
        (self.horizon * self.rounds_per_second as f64) as u32
    }

    pub fn round_duration(&self) -> f64 {
        1.0 / self.rounds_per_second as f64
    }

    /// Mobility seed for one profile. Profiles are statistically independent
    /// but reproducible cell by cell.
    pub fn profile_seed(&self, profile: usize) -> u64 {
        self.seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(profile as u64)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let ok = self.num_nodes >= 1
            && self.area_width > 0.0
            && self.area_height > 0.0
            && (0.0..=self.area_width).contains(&self.sink_x)
            && (0.0..=self.area_height).contains(&self.sink_y)
            && self.trans_range > 0.0
            && self.vmax >= 0.0
            && self.horizon > 0.0
            && self.rounds_per_second >= 1
            && self.mean_data > 0.0
            && self.stdd_data >= 0.0
            && self.max_bw_size >= 1
            && self.max_tsb_size >= 1
            && self.trust_threshold > 0.0
            && self.trust_threshold <= 1.0
            && (0.0..=1.0).contains(&self.history_weight)
            && (0.0..=1.0).contains(&self.cf_prob)
            && self.max_cf_nodes <= self.num_nodes;
        if ok {
            Ok(())
        } else {
            Err(ConfigError::InvalidValue)
        }
    }
}
