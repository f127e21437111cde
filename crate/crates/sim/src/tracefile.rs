//! Line-oriented mobility trace files.
//!
//! Header line: `num_nodes horizon vmax seed`. Then one leg per line:
//! `node_id start_time x0 y0 x1 y1 speed`. Floats use Rust's shortest
//! round-trip formatting, so a written trace reloads bit-identically.

use std::io::{BufRead, Write};
use std::path::Path;

use sda_core::mobility::{Leg, MobilityTrace, Point};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TraceFileError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {0}: malformed trace line")]
    Malformed(usize),
    #[error("missing header line")]
    MissingHeader,
    #[error("line {0}: legs must be grouped by ascending node id")]
    OutOfOrder(usize),
    #[error("trace body does not match header node count")]
    NodeCountMismatch,
}

pub fn write_trace(trace: &MobilityTrace, mut out: impl Write) -> Result<(), TraceFileError> {
    writeln!(
        out,
        "{} {} {} {}",
        trace.num_nodes(),
        trace.horizon(),
        trace.vmax(),
        trace.seed()
    )?;
    for node in 0..trace.num_nodes() {
        for leg in trace.legs_of(node) {
            writeln!(
                out,
                "{} {} {} {} {} {} {}",
                node,
                leg.start_time,
                leg.start.x,
                leg.start.y,
                leg.target.x,
                leg.target.y,
                leg.speed
            )?;
        }
    }
    Ok(())
}

pub fn write_trace_file(trace: &MobilityTrace, path: &Path) -> Result<(), TraceFileError> {
    let file = std::fs::File::create(path)?;
    let mut writer = std::io::BufWriter::new(file);
    write_trace(trace, &mut writer)?;
    writer.flush()?;
    Ok(())
}

pub fn read_trace(input: impl BufRead) -> Result<MobilityTrace, TraceFileError> {
    let mut lines = input.lines().enumerate();
    let (_, header) = lines.next().ok_or(TraceFileError::MissingHeader)?;
    let header = header?;
    let mut parts = header.split_whitespace();
    let mut next = |lineno: usize| -> Result<&str, TraceFileError> {
        parts.next().ok_or(TraceFileError::Malformed(lineno))
    };
    let num_nodes: usize = next(1)?.parse().map_err(|_| TraceFileError::Malformed(1))?;
    let horizon: f64 = next(1)?.parse().map_err(|_| TraceFileError::Malformed(1))?;
    let vmax: f64 = next(1)?.parse().map_err(|_| TraceFileError::Malformed(1))?;
    let seed: u64 = next(1)?.parse().map_err(|_| TraceFileError::Malformed(1))?;

    let mut legs: Vec<Vec<Leg>> = vec![Vec::new(); num_nodes];
    let mut last_node = 0usize;
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 7 {
            return Err(TraceFileError::Malformed(lineno));
        }
        let parse_f = |s: &str| s.parse::<f64>().map_err(|_| TraceFileError::Malformed(lineno));
        let node: usize = fields[0]
            .parse()
            .map_err(|_| TraceFileError::Malformed(lineno))?;
        if node >= num_nodes {
            return Err(TraceFileError::NodeCountMismatch);
        }
        if node < last_node {
            return Err(TraceFileError::OutOfOrder(lineno));
        }
        last_node = node;
        legs[node].push(Leg {
            start_time: parse_f(fields[1])?,
            start: Point::new(parse_f(fields[2])?, parse_f(fields[3])?),
            target: Point::new(parse_f(fields[4])?, parse_f(fields[5])?),
            speed: parse_f(fields[6])?,
        });
    }
    if legs.iter().any(|l| l.is_empty()) {
        return Err(TraceFileError::NodeCountMismatch);
    }
    Ok(MobilityTrace::from_parts(legs, horizon, vmax, seed))
}

pub fn read_trace_file(path: &Path) -> Result<MobilityTrace, TraceFileError> {
    let file = std::fs::File::open(path)?;
    read_trace(std::io::BufReader::new(file))
}

/// Conventional file name for one profile's trace.
pub fn trace_file_name(profile: usize) -> String {
    format!("trace_{profile:03}.txt")
}

#[cfg(test)]
mod tests {
    use super::*;
    use sda_core::mobility::generate_trace;

    #[test]
    fn round_trip_is_bit_identical() {
        let trace = generate_trace(99, 12, (100.0, 100.0), 7.5, 500.0).unwrap();
        let mut buf = Vec::new();
        write_trace(&trace, &mut buf).unwrap();
        let loaded = read_trace(std::io::Cursor::new(&buf)).unwrap();
        assert_eq!(trace, loaded);

        // Writing the loaded trace again reproduces the same bytes.
        let mut buf2 = Vec::new();
        write_trace(&loaded, &mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn rejects_malformed_lines() {
        let text = "2 10 3 1\n0 0 1 2 3 4\n";
        let err = read_trace(std::io::Cursor::new(text)).unwrap_err();
        assert!(matches!(err, TraceFileError::Malformed(2)));

        let text = "2 10 3 1\n0 0 1 2 3 4 1\n";
        let err = read_trace(std::io::Cursor::new(text)).unwrap_err();
        assert!(matches!(err, TraceFileError::NodeCountMismatch));
    }
}
