//! Command-line driver: trace generation, single runs, parameter sweeps and
//! plot-data emission.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use sda_core::engine::World;
use sda_core::mobility::{MobilityTrace, Point};
use sda_core::{ScenarioConfig, TreeType};
use sda_sim::output::{emit_results, render_protocol_trace, ResultRow};
use sda_sim::sweep::{profile_trace, run_sweep, SweepGrid, SweepRow};
use sda_sim::{configfile, output, tracefile};

#[derive(Parser)]
#[command(
    name = "sda-sim",
    about = "Secure data aggregation simulator for mobile sensor networks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate random-waypoint mobility trace files.
    GenTraces {
        #[command(flatten)]
        config: ConfigArgs,
        /// Number of mobility profiles to generate.
        #[arg(long, default_value_t = 10)]
        profiles: usize,
        /// Output directory for trace files.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one scenario cell over one or more mobility profiles.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value_t = 1)]
        profiles: usize,
        /// Load trace files from this directory instead of generating them.
        #[arg(long)]
        trace_dir: Option<PathBuf>,
        /// Write results.csv and plot data here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Record the key-protocol message log (requires --out).
        #[arg(long)]
        trace_dump: bool,
    },
    /// Run a parameter sweep and emit the results table and plot data.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value_t = 10)]
        profiles: usize,
        /// Run the full published 720-combination grid instead of the small
        /// default grid.
        #[arg(long)]
        paper_grid: bool,
        /// Tree types the grid crosses: mst, let or both. Defaults to both
        /// for the default grid and mst for --paper-grid.
        #[arg(long)]
        trees: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Regenerate plot-data files from an existing results.csv.
    EmitPlots {
        /// Path to a results.csv produced by `run` or `sweep`.
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Scenario flags; each one overrides the config file and the defaults.
#[derive(Args)]
struct ConfigArgs {
    /// Plain `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Spanning tree flavor: mst or let.
    #[arg(long, value_parser = ["mst", "let"])]
    tree: Option<String>,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    area_width: Option<f64>,
    #[arg(long)]
    area_height: Option<f64>,
    #[arg(long)]
    sink_x: Option<f64>,
    #[arg(long)]
    sink_y: Option<f64>,
    /// Transmission range in meters.
    #[arg(long)]
    range: Option<f64>,
    #[arg(long)]
    vmax: Option<f64>,
    /// Simulated seconds per profile.
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    rounds_per_second: Option<u32>,
    #[arg(long)]
    mean_data: Option<f64>,
    #[arg(long)]
    stdd_data: Option<f64>,
    /// Beacon window capacity.
    #[arg(long)]
    bw_size: Option<usize>,
    /// Trust score buffer capacity.
    #[arg(long)]
    tsb_size: Option<usize>,
    #[arg(long)]
    trust_threshold: Option<f64>,
    #[arg(long)]
    history_weight: Option<f64>,
    #[arg(long)]
    max_cf_nodes: Option<usize>,
    #[arg(long)]
    cf_prob: Option<f64>,
    #[arg(long)]
    cf_start_round: Option<u32>,
    /// Trust evaluation switch; `off` disables scoring and filtering.
    #[arg(long, value_parser = ["on", "off"])]
    trust: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ScenarioConfig> {
        let mut config = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config file {}", path.display()))?;
                configfile::parse_config(&text, ScenarioConfig::default())
                    .with_context(|| format!("parsing config file {}", path.display()))?
            }
            None => ScenarioConfig::default(),
        };
        if let Some(tree) = &self.tree {
            config.tree_type = tree.parse().expect("clap validated the value");
        }
        if let Some(v) = self.nodes {
            config.num_nodes = v;
        }
        if let Some(v) = self.area_width {
            config.area_width = v;
        }
        if let Some(v) = self.area_height {
            config.area_height = v;
        }
        if let Some(v) = self.sink_x {
            config.sink_x = v;
        }
        if let Some(v) = self.sink_y {
            config.sink_y = v;
        }
        if let Some(v) = self.range {
            config.trans_range = v;
        }
        if let Some(v) = self.vmax {
            config.vmax = v;
        }
        if let Some(v) = self.horizon {
            config.horizon = v;
        }
        if let Some(v) = self.rounds_per_second {
            config.rounds_per_second = v;
        }
        if let Some(v) = self.mean_data {
            config.mean_data = v;
        }
        if let Some(v) = self.stdd_data {
            config.stdd_data = v;
        }
        if let Some(v) = self.bw_size {
            config.max_bw_size = v;
        }
        if let Some(v) = self.tsb_size {
            config.max_tsb_size = v;
        }
        if let Some(v) = self.trust_threshold {
            config.trust_threshold = v;
        }
        if let Some(v) = self.history_weight {
            config.history_weight = v;
        }
        if let Some(v) = self.max_cf_nodes {
            config.max_cf_nodes = v;
        }
        if let Some(v) = self.cf_prob {
            config.cf_prob = v;
        }
        if let Some(v) = self.cf_start_round {
            config.cf_start_round = v;
        }
        if let Some(v) = &self.trust {
            config.trust_enabled = v == "on";
        }
        if let Some(v) = self.seed {
            config.seed = v;
        }
        config.validate().context("configuration out of range")?;
        Ok(config)
    }
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::GenTraces {
            config,
            profiles,
            out,
        } => gen_traces(&config.resolve()?, profiles, &out),
        Command::Run {
            config,
            profiles,
            trace_dir,
            out,
            trace_dump,
        } => run(
            &config.resolve()?,
            profiles,
            trace_dir.as_deref(),
            out.as_deref(),
            trace_dump,
        ),
        Command::Sweep {
            config,
            profiles,
            paper_grid,
            trees,
            out,
        } => sweep(&config.resolve()?, profiles, paper_grid, trees, &out),
        Command::EmitPlots { csv, out } => emit_plots(&csv, &out),
    }
}

fn gen_traces(config: &ScenarioConfig, profiles: usize, out: &Path) -> Result<()> {
    std::fs::create_dir_all(out)?;
    for p in 0..profiles {
        let mut trace = profile_trace(config, p)?;
        // The engine pins the sink; write the file it will actually see.
        trace.pin_node(ScenarioConfig::SINK, Point::new(config.sink_x, config.sink_y));
        let path = out.join(tracefile::trace_file_name(p));
        tracefile::write_trace_file(&trace, &path)?;
    }
    println!(
        "wrote {profiles} trace files ({} nodes, vmax {}, horizon {} s) to {}",
        config.num_nodes,
        config.vmax,
        config.horizon,
        out.display()
    );
    Ok(())
}

fn load_or_generate_trace(
    config: &ScenarioConfig,
    trace_dir: Option<&Path>,
    profile: usize,
) -> Result<MobilityTrace> {
    match trace_dir {
        Some(dir) => {
            let path = dir.join(tracefile::trace_file_name(profile));
            Ok(tracefile::read_trace_file(&path)
                .with_context(|| format!("loading {}", path.display()))?)
        }
        None => Ok(profile_trace(config, profile)?),
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "-".into())
}

fn run(
    config: &ScenarioConfig,
    profiles: usize,
    trace_dir: Option<&Path>,
    out: Option<&Path>,
    trace_dump: bool,
) -> Result<()> {
    if trace_dump && out.is_none() {
        bail!("--trace-dump needs --out to know where to write the log");
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
    }

    let mut per_profile = Vec::with_capacity(profiles);
    for p in 0..profiles {
        let trace = load_or_generate_trace(config, trace_dir, p)?;
        let mut world = World::new(config.clone(), trace, trace_dump)?;
        world.run_to_end();
        if let (true, Some(dir)) = (trace_dump, out) {
            let log = world.protocol_trace().unwrap_or(&[]);
            let path = dir.join(format!("proto_trace_{p:03}.txt"));
            std::fs::write(&path, render_protocol_trace(log))?;
        }
        let metrics = world.metrics();
        println!(
            "profile {p}: median_detect_rounds={} avg_sink_value={} false_positives={} \
             keys_established={} rounds_without_tree={} detected_cf={} undetected_cf={} \
             tree_rebuilds={}",
            fmt_opt(metrics.median_detect_rounds),
            fmt_opt(metrics.avg_sink_value),
            metrics.false_positives,
            metrics.keys_established,
            metrics.rounds_without_tree,
            metrics.detected_cf,
            metrics.undetected_cf,
            metrics.tree_rebuilds,
        );
        per_profile.push(metrics);
    }

    let row = SweepRow {
        config: config.clone(),
        num_profiles: profiles,
        metrics: sda_sim::sweep::summarize_profiles(&per_profile),
    };
    println!(
        "cell summary: median_detect_rounds={} avg_sink_value={} false_positives={} \
         keys_established={} rounds_without_tree={}",
        fmt_opt(row.metrics.median_detect_rounds),
        fmt_opt(row.metrics.avg_sink_value),
        row.metrics.false_positives,
        row.metrics.keys_established,
        row.metrics.rounds_without_tree,
    );

    if let Some(dir) = out {
        let written = emit_results(&[ResultRow::from(&row)], dir)?;
        println!("wrote {} files to {}", written.len(), dir.display());
    }
    Ok(())
}

fn sweep(
    config: &ScenarioConfig,
    profiles: usize,
    paper_grid: bool,
    trees: Option<String>,
    out: &Path,
) -> Result<()> {
    let trees = trees.unwrap_or_else(|| if paper_grid { "mst" } else { "both" }.to_string());
    let tree_types = match trees.as_str() {
        "mst" => vec![TreeType::Mst],
        "let" => vec![TreeType::Let],
        "both" => vec![TreeType::Mst, TreeType::Let],
        other => bail!("--trees must be mst, let or both (got `{other}`)"),
    };
    let grid = if paper_grid {
        SweepGrid::paper(tree_types)
    } else {
        SweepGrid {
            tree_types,
            ..SweepGrid::desk()
        }
    };
    let cells = grid.cells(config);
    eprintln!(
        "sweeping {} cells x {profiles} profiles ({} runs)",
        cells.len(),
        cells.len() * profiles
    );
    let rows = run_sweep(&cells, profiles)?;
    let result_rows: Vec<ResultRow> = rows.iter().map(ResultRow::from).collect();
    let written = emit_results(&result_rows, out)?;
    println!(
        "wrote {} rows and {} files to {}",
        rows.len(),
        written.len(),
        out.display()
    );
    Ok(())
}

fn emit_plots(csv: &Path, out: &Path) -> Result<()> {
    let text =
        std::fs::read_to_string(csv).with_context(|| format!("reading {}", csv.display()))?;
    let rows = output::parse_csv(&text)?;
    std::fs::create_dir_all(out)?;
    let mut count = 0;
    for (name, content) in output::plot_groups(&rows) {
        std::fs::write(out.join(&name), content)?;
        count += 1;
    }
    println!("wrote {count} plot-data files to {}", out.display());
    Ok(())
}
