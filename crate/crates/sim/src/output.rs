//! Result CSV, plot-data files and the protocol trace dump.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sda_core::keyproto::MessageLogEntry;
use thiserror::Error;

use crate::sweep::SweepRow;

pub const CSV_HEADER: &str = "tree_type,vmax,trans_range,bw_size,tsb_size,trust_threshold,history_weight,max_cf_nodes,seed_base,num_profiles,median_detect_rounds,avg_sink_value,false_positives,keys_established,rounds_without_tree";

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {0}: malformed results row")]
    Malformed(usize),
    #[error("missing or wrong CSV header")]
    BadHeader,
}

/// One parsed (or to-be-written) results row.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub tree_type: String,
    pub vmax: f64,
    pub trans_range: f64,
    pub bw_size: u64,
    pub tsb_size: u64,
    pub trust_threshold: f64,
    pub history_weight: f64,
    pub max_cf_nodes: u64,
    pub seed_base: u64,
    pub num_profiles: u64,
    pub median_detect_rounds: Option<f64>,
    pub avg_sink_value: Option<f64>,
    pub false_positives: f64,
    pub keys_established: f64,
    pub rounds_without_tree: f64,
}

impl From<&SweepRow> for ResultRow {
    fn from(row: &SweepRow) -> Self {
        ResultRow {
            tree_type: row.config.tree_type.as_str().to_string(),
            vmax: row.config.vmax,
            trans_range: row.config.trans_range,
            bw_size: row.config.max_bw_size as u64,
            tsb_size: row.config.max_tsb_size as u64,
            trust_threshold: row.config.trust_threshold,
            history_weight: row.config.history_weight,
            max_cf_nodes: row.config.max_cf_nodes as u64,
            seed_base: row.config.seed,
            num_profiles: row.num_profiles as u64,
            median_detect_rounds: row.metrics.median_detect_rounds,
            avg_sink_value: row.metrics.avg_sink_value,
            false_positives: row.metrics.false_positives,
            keys_established: row.metrics.keys_established,
            rounds_without_tree: row.metrics.rounds_without_tree,
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Render the results table; the exact bytes are the determinism contract.
pub fn render_csv(rows: &[ResultRow]) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.tree_type,
            r.vmax,
            r.trans_range,
            r.bw_size,
            r.tsb_size,
            r.trust_threshold,
            r.history_weight,
            r.max_cf_nodes,
            r.seed_base,
            r.num_profiles,
            opt(r.median_detect_rounds),
            opt(r.avg_sink_value),
            r.false_positives,
            r.keys_established,
            r.rounds_without_tree,
        );
    }
    out
}

pub fn parse_csv(text: &str) -> Result<Vec<ResultRow>, OutputError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == CSV_HEADER => {}
        _ => return Err(OutputError::BadHeader),
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 15 {
            return Err(OutputError::Malformed(lineno));
        }
        let num =
            |s: &str| -> Result<f64, OutputError> { s.parse().map_err(|_| OutputError::Malformed(lineno)) };
        let int =
            |s: &str| -> Result<u64, OutputError> { s.parse().map_err(|_| OutputError::Malformed(lineno)) };
        let opt_num = |s: &str| -> Result<Option<f64>, OutputError> {
            if s.is_empty() {
                Ok(None)
            } else {
                num(s).map(Some)
            }
        };
        rows.push(ResultRow {
            tree_type: f[0].to_string(),
            vmax: num(f[1])?,
            trans_range: num(f[2])?,
            bw_size: int(f[3])?,
            tsb_size: int(f[4])?,
            trust_threshold: num(f[5])?,
            history_weight: num(f[6])?,
            max_cf_nodes: int(f[7])?,
            seed_base: int(f[8])?,
            num_profiles: int(f[9])?,
            median_detect_rounds: opt_num(f[10])?,
            avg_sink_value: opt_num(f[11])?,
            false_positives: num(f[12])?,
            keys_established: num(f[13])?,
            rounds_without_tree: num(f[14])?,
        });
    }
    Ok(rows)
}

/// The two plotted metrics, in figure order.
pub const PLOT_METRICS: [&str; 2] = ["median_detect_rounds", "avg_sink_value"];

pub fn plot_file_name(metric: &str, vmax: f64, bw_size: u64) -> String {
    format!("plot_{metric}_vmax{vmax}_bw{bw_size}.csv")
}

const PLOT_HEADER: &str =
    "tree_type,trans_range,tsb_size,trust_threshold,history_weight,max_cf_nodes,value";

/// Group rows by (vmax, bw_size) per metric, mirroring the figure layout.
/// Returns `(file name, file content)` pairs in deterministic order.
pub fn plot_groups(rows: &[ResultRow]) -> Vec<(String, String)> {
    let mut keys: Vec<(u64, u64)> = rows
        .iter()
        .map(|r| (r.vmax.to_bits(), r.bw_size))
        .collect();
    keys.sort_unstable();
    keys.dedup();

    let mut files = Vec::new();
    for metric in PLOT_METRICS {
        for &(vmax_bits, bw) in &keys {
            let vmax = f64::from_bits(vmax_bits);
            let mut content = String::new();
            content.push_str(PLOT_HEADER);
            content.push('\n');
            for r in rows
                .iter()
                .filter(|r| r.vmax.to_bits() == vmax_bits && r.bw_size == bw)
            {
                let value = match metric {
                    "median_detect_rounds" => opt(r.median_detect_rounds),
                    _ => opt(r.avg_sink_value),
                };
                let _ = writeln!(
                    content,
                    "{},{},{},{},{},{},{}",
                    r.tree_type,
                    r.trans_range,
                    r.tsb_size,
                    r.trust_threshold,
                    r.history_weight,
                    r.max_cf_nodes,
                    value,
                );
            }
            files.push((plot_file_name(metric, vmax, bw), content));
        }
    }
    files
}

/// Write `results.csv` plus the plot-data files into `out_dir`. Returns the
/// paths written.
pub fn emit_results(rows: &[ResultRow], out_dir: &Path) -> Result<Vec<PathBuf>, OutputError> {
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    let csv_path = out_dir.join("results.csv");
    std::fs::write(&csv_path, render_csv(rows))?;
    written.push(csv_path);

    for (name, content) in plot_groups(rows) {
        let path = out_dir.join(name);
        std::fs::write(&path, content)?;
        written.push(path);
    }
    Ok(written)
}

/// Render the key-protocol message log, one line per message.
pub fn render_protocol_trace(entries: &[MessageLogEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        let _ = writeln!(
            out,
            "{} {} {} {} {}",
            e.round,
            e.kind.name(),
            e.sender,
            e.receiver,
            hex::encode(&e.payload)
        );
    }
    out
}
