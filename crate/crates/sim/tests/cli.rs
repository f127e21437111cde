//! End-to-end checks of the command-line interface and its file formats.

use std::path::Path;
use std::process::Command;

fn sda_sim() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sda-sim"))
}

/// Small scenario flags shared by the CLI tests to keep runs quick.
fn small_scenario(cmd: &mut Command) -> &mut Command {
    cmd.args([
        "--nodes",
        "20",
        "--horizon",
        "15",
        "--range",
        "45",
        "--max-cf-nodes",
        "5",
        "--cf-prob",
        "0.05",
        "--seed",
        "7",
    ])
}

#[test]
fn gen_traces_writes_loadable_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = sda_sim()
        .args(["gen-traces", "--profiles", "3", "--out"])
        .arg(dir.path())
        .args([
            "--nodes",
            "10",
            "--horizon",
            "30",
            "--vmax",
            "5",
            "--max-cf-nodes",
            "0",
            "--seed",
            "9",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    for p in 0..3 {
        let path = dir.path().join(format!("trace_{p:03}.txt"));
        let trace = sda_sim::tracefile::read_trace_file(&path).unwrap();
        assert_eq!(trace.num_nodes(), 10);
        assert_eq!(trace.horizon(), 30.0);
        // The sink is pinned for the engine.
        assert_eq!(trace.legs_of(0).len(), 1);
        assert_eq!(trace.legs_of(0)[0].speed, 0.0);
    }
}

#[test]
fn run_consumes_generated_traces_and_writes_results() {
    let traces = tempfile::tempdir().unwrap();
    let out_dir = tempfile::tempdir().unwrap();

    let gen = small_scenario(sda_sim().args(["gen-traces", "--profiles", "2", "--out"]).arg(traces.path()))
        .output()
        .unwrap();
    assert!(gen.status.success());

    let run = small_scenario(
        sda_sim()
            .args(["run", "--profiles", "2", "--trace-dump", "--trace-dir"])
            .arg(traces.path())
            .arg("--out")
            .arg(out_dir.path()),
    )
    .output()
    .unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(stdout.contains("profile 0:"));
    assert!(stdout.contains("cell summary:"));

    // results.csv exists, parses, and has our pinned header.
    let csv = std::fs::read_to_string(out_dir.path().join("results.csv")).unwrap();
    assert!(csv.starts_with(sda_sim::output::CSV_HEADER));
    let rows = sda_sim::output::parse_csv(&csv).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].num_profiles, 2);

    // Protocol trace dump: `round kind sender receiver payload_hex` lines.
    let proto = std::fs::read_to_string(out_dir.path().join("proto_trace_000.txt")).unwrap();
    let first = proto.lines().next().unwrap();
    let fields: Vec<&str> = first.split_whitespace().collect();
    assert_eq!(fields.len(), 5);
    assert_eq!(fields[1], "da-notification");
    assert!(hex::decode(fields[4]).is_ok());
}

#[test]
fn sweep_emits_csv_and_plot_files_deterministically() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let run = |dir: &Path| {
        let out = small_scenario(
            sda_sim()
                .args(["sweep", "--profiles", "2", "--trees", "both", "--out"])
                .arg(dir),
        )
        .output()
        .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    };
    run(a.path());
    run(b.path());

    let csv_a = std::fs::read(a.path().join("results.csv")).unwrap();
    let csv_b = std::fs::read(b.path().join("results.csv")).unwrap();
    assert!(!csv_a.is_empty());
    assert_eq!(csv_a, csv_b, "same seed must give identical bytes");

    // Desk grid has 4 cells; two tree types appear in the rows.
    let rows = sda_sim::output::parse_csv(std::str::from_utf8(&csv_a).unwrap()).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().any(|r| r.tree_type == "MST"));
    assert!(rows.iter().any(|r| r.tree_type == "LET"));

    // Plot-data files exist for each (metric, vmax, bw) group.
    assert!(a.path().join("plot_median_detect_rounds_vmax3_bw10.csv").exists());
    assert!(a.path().join("plot_avg_sink_value_vmax10_bw10.csv").exists());
}

#[test]
fn emit_plots_regenerates_groups_from_csv() {
    let sweep_dir = tempfile::tempdir().unwrap();
    let plots_dir = tempfile::tempdir().unwrap();
    let out = small_scenario(
        sda_sim()
            .args(["sweep", "--profiles", "1", "--trees", "mst", "--out"])
            .arg(sweep_dir.path()),
    )
    .output()
    .unwrap();
    assert!(out.status.success());

    let emit = sda_sim()
        .arg("emit-plots")
        .arg("--csv")
        .arg(sweep_dir.path().join("results.csv"))
        .arg("--out")
        .arg(plots_dir.path())
        .output()
        .unwrap();
    assert!(emit.status.success(), "{}", String::from_utf8_lossy(&emit.stderr));

    let original = std::fs::read(sweep_dir.path().join("plot_avg_sink_value_vmax3_bw10.csv")).unwrap();
    let regenerated = std::fs::read(plots_dir.path().join("plot_avg_sink_value_vmax3_bw10.csv")).unwrap();
    assert_eq!(original, regenerated);
}

#[test]
fn config_file_is_honored_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("cell.conf");
    std::fs::write(
        &config_path,
        "# tiny cell\nnum_nodes = 15\nhorizon = 10\ntrans_range = 50\nvmax = 4\nmax_cf_nodes = 0\nseed = 5\n",
    )
    .unwrap();

    let out = sda_sim()
        .args(["run", "--config"])
        .arg(&config_path)
        .args(["--vmax", "2"]) // flag overrides the file
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let bad = std::fs::write(dir.path().join("bad.conf"), "velocity = 3\n");
    bad.unwrap();
    let out = sda_sim()
        .args(["run", "--config"])
        .arg(dir.path().join("bad.conf"))
        .output()
        .unwrap();
    assert!(!out.status.success(), "unknown keys must be rejected");
    assert!(String::from_utf8_lossy(&out.stderr).contains("velocity"));
}

#[test]
fn trust_off_flag_is_accepted() {
    let out = sda_sim()
        .args([
            "run", "--nodes", "15", "--horizon", "10", "--range", "50", "--trust", "off",
            "--max-cf-nodes", "5", "--cf-prob", "0.1", "--seed", "3",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("detected_cf=0"), "trust off must not detect: {stdout}");
}
