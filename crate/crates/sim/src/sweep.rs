//! Parameter sweeps: cell grids, per-cell profile runs, averaged metrics.
//!
//! A cell is one full scenario configuration; a sweep crosses the swept
//! parameter lists and averages each cell's metrics over its mobility
//! profiles. Runs share nothing, so cells and profiles execute in parallel;
//! results keep grid order regardless of scheduling.

use rayon::prelude::*;
use sda_core::engine::{run_profile, EngineError, ProfileMetrics};
use sda_core::mobility::{generate_trace, MobilityError, MobilityTrace};
use sda_core::{ScenarioConfig, TreeType};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("trace generation failed: {0}")]
    Mobility(#[from] MobilityError),
    #[error("profile run failed: {0}")]
    Engine(#[from] EngineError),
    #[error("sweep grid is empty")]
    EmptyGrid,
}

/// The swept parameter lists. Every combination becomes one cell.
#[derive(Debug, Clone)]
pub struct SweepGrid {
    pub tree_types: Vec<TreeType>,
    pub vmaxes: Vec<f64>,
    pub trans_ranges: Vec<f64>,
    pub bw_sizes: Vec<usize>,
    pub tsb_sizes: Vec<usize>,
    pub trust_thresholds: Vec<f64>,
    pub history_weights: Vec<f64>,
    pub max_cf_counts: Vec<usize>,
}

impl SweepGrid {
    /// Small default grid: the headline tree-stability comparison at the
    /// usual operating point.
    pub fn desk() -> Self {
        SweepGrid {
            tree_types: vec![TreeType::Mst, TreeType::Let],
            vmaxes: vec![3.0, 10.0],
            trans_ranges: vec![25.0],
            bw_sizes: vec![10],
            tsb_sizes: vec![30],
            trust_thresholds: vec![0.7],
            history_weights: vec![0.7],
            max_cf_counts: vec![20],
        }
    }

    /// The full published parameter study: 720 combinations per tree type
    /// (2 BW x 3 TSB x 3 thresholds x 5 history weights x 2 ranges x
    /// 2 velocities x 2 CF counts).
    pub fn paper(tree_types: Vec<TreeType>) -> Self {
        SweepGrid {
            tree_types,
            vmaxes: vec![3.0, 10.0],
            trans_ranges: vec![25.0, 35.0],
            bw_sizes: vec![10, 50],
            tsb_sizes: vec![10, 30, 50],
            trust_thresholds: vec![0.5, 0.7, 0.9],
            history_weights: vec![0.3, 0.5, 0.7, 0.9, 1.0],
            max_cf_counts: vec![20, 40],
        }
    }

    /// Expand into per-cell configs, nested in CSV column order.
    pub fn cells(&self, base: &ScenarioConfig) -> Vec<ScenarioConfig> {
        let mut cells = Vec::new();
        for &tree_type in &self.tree_types {
            for &vmax in &self.vmaxes {
                for &trans_range in &self.trans_ranges {
                    for &max_bw_size in &self.bw_sizes {
                        for &max_tsb_size in &self.tsb_sizes {
                            for &trust_threshold in &self.trust_thresholds {
                                for &history_weight in &self.history_weights {
                                    for &max_cf_nodes in &self.max_cf_counts {
                                        cells.push(ScenarioConfig {
                                            tree_type,
                                            vmax,
                                            trans_range,
                                            max_bw_size,
                                            max_tsb_size,
                                            trust_threshold,
                                            history_weight,
                                            max_cf_nodes,
                                            ..base.clone()
                                        });
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        cells
    }
}

/// One cell's metrics averaged over its profiles.
#[derive(Debug, Clone, PartialEq)]
pub struct CellMetrics {
    /// Mean over the profiles whose runs detected at least one CF node;
    /// `None` when no profile did.
    pub median_detect_rounds: Option<f64>,
    pub avg_sink_value: Option<f64>,
    pub false_positives: f64,
    pub keys_established: f64,
    pub rounds_without_tree: f64,
    pub detected_cf: f64,
    pub undetected_cf: f64,
}

/// One sweep output row: the cell and its averaged metrics.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub config: ScenarioConfig,
    pub num_profiles: usize,
    pub metrics: CellMetrics,
}

/// Generate the mobility trace for one profile of a cell.
pub fn profile_trace(config: &ScenarioConfig, profile: usize) -> Result<MobilityTrace, MobilityError> {
    generate_trace(
        config.profile_seed(profile),
        config.num_nodes,
        (config.area_width, config.area_height),
        config.vmax,
        config.horizon,
    )
}

fn average(values: impl Iterator<Item = f64>) -> Option<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for v in values {
        sum += v;
        count += 1;
    }
    (count > 0).then(|| sum / count as f64)
}

/// Average per-profile metrics into a cell row.
pub fn summarize_profiles(profiles: &[ProfileMetrics]) -> CellMetrics {
    CellMetrics {
        median_detect_rounds: average(
            profiles.iter().filter_map(|p| p.median_detect_rounds),
        ),
        avg_sink_value: average(profiles.iter().filter_map(|p| p.avg_sink_value)),
        false_positives: average(profiles.iter().map(|p| p.false_positives as f64))
            .unwrap_or(0.0),
        keys_established: average(profiles.iter().map(|p| p.keys_established as f64))
            .unwrap_or(0.0),
        rounds_without_tree: average(profiles.iter().map(|p| p.rounds_without_tree as f64))
            .unwrap_or(0.0),
        detected_cf: average(profiles.iter().map(|p| p.detected_cf as f64)).unwrap_or(0.0),
        undetected_cf: average(profiles.iter().map(|p| p.undetected_cf as f64)).unwrap_or(0.0),
    }
}

/// Run one cell over `num_profiles` freshly generated profiles.
pub fn run_cell(config: &ScenarioConfig, num_profiles: usize) -> Result<CellMetrics, SweepError> {
    let profiles: Vec<ProfileMetrics> = (0..num_profiles)
        .into_par_iter()
        .map(|p| -> Result<ProfileMetrics, SweepError> {
            let trace = profile_trace(config, p)?;
            Ok(run_profile(config, trace)?)
        })
        .collect::<Result<_, _>>()?;
    Ok(summarize_profiles(&profiles))
}

/// Run a whole grid. Cell x profile runs execute in parallel; the returned
/// rows follow grid order.
pub fn run_sweep(cells: &[ScenarioConfig], num_profiles: usize) -> Result<Vec<SweepRow>, SweepError> {
    if cells.is_empty() {
        return Err(SweepError::EmptyGrid);
    }
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..num_profiles).map(move |p| (c, p)))
        .collect();
    let results: Vec<(usize, ProfileMetrics)> = jobs
        .into_par_iter()
        .map(|(c, p)| -> Result<(usize, ProfileMetrics), SweepError> {
            let config = &cells[c];
            let trace = profile_trace(config, p)?;
            Ok((c, run_profile(config, trace)?))
        })
        .collect::<Result<_, _>>()?;

    let mut per_cell: Vec<Vec<ProfileMetrics>> = vec![Vec::new(); cells.len()];
    for (c, metrics) in results {
        per_cell[c].push(metrics);
    }
    Ok(cells
        .iter()
        .zip(per_cell)
        .map(|(config, profiles)| SweepRow {
            config: config.clone(),
            num_profiles,
            metrics: summarize_profiles(&profiles),
        })
        .collect())
}
