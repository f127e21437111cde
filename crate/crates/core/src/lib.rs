//! Secure data aggregation for mobile wireless sensor networks.
//!
//! The crate is organized around a deterministic discrete-round simulation:
//!
//! - [`mobility`] — random-waypoint traces and position/velocity queries
//! - [`topology`] — connectivity graphs, MST/LET spanning trees, rooted
//!   data-gathering trees
//! - [`sensing`] — per-round data generation, compromised/faulty (CF) node
//!   activation, beacon windows
//! - [`trust`] — two-sided Grubbs outlier scoring, trust-score buffers and
//!   local CF classification
//! - [`aggregation`] — bottom-up sum aggregation with per-observer filtering
//! - [`keyproto`] — sink-mediated pairwise key establishment and refresh
//! - [`engine`] — the round loop tying everything together
//!
//! Everything here is `no_std + alloc`; all randomness flows through caller
//! supplied [`rand_core::RngCore`] instances, so identical seeds produce
//! bit-identical runs. IO, file formats and the CLI live in the companion
//! `sda-sim` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod aggregation;
pub mod config;
pub mod engine;
pub mod keyproto;
pub mod mobility;
pub mod sensing;
pub mod topology;
pub mod trust;

pub use config::{ScenarioConfig, TreeType};
pub use engine::{ProfileMetrics, World};
pub use mobility::{MobilityTrace, Point};
pub use topology::DGTree;

/// Node identifier: an index into the per-node state tables.
///
/// The wire protocol encodes ids as 16-bit big-endian integers, so networks
/// are limited to 65536 nodes.
pub type NodeId = usize;
