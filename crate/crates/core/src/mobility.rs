//! Random Waypoint mobility traces.
//!
//! Traces are generated up front for the whole simulation horizon and then
//! queried per round. Each node performs a sequence of legs: pick a uniform
//! random target in the area, pick a uniform random speed in `(0, vmax]`,
//! travel in a straight line, repeat. There is no pause time between legs.

use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand_core::{RngCore, SeedableRng};

/// A position inside the deployment area, in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    /// Euclidean distance to another point.
    pub fn distance(&self, other: &Point) -> f64 {
        libm::hypot(self.x - other.x, self.y - other.y)
    }
}

/// One straight-line movement segment of a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Leg {
    pub start: Point,
    pub target: Point,
    /// Speed in m/s. Zero only for the single stationary leg emitted when
    /// `vmax == 0` or for pinned nodes.
    pub speed: f64,
    /// Simulation time at which this leg begins, in seconds.
    pub start_time: f64,
}

impl Leg {
    fn length(&self) -> f64 {
        self.start.distance(&self.target)
    }

    fn duration(&self) -> f64 {
        if self.speed > 0.0 {
            self.length() / self.speed
        } else {
            f64::INFINITY
        }
    }

    /// Velocity vector while on this leg.
    fn velocity(&self) -> (f64, f64) {
        let len = self.length();
        if self.speed <= 0.0 || len <= 0.0 {
            return (0.0, 0.0);
        }
        (
            self.speed * (self.target.x - self.start.x) / len,
            self.speed * (self.target.y - self.start.y) / len,
        )
    }

    /// Position after `dt` seconds on this leg; clamps to the leg endpoints.
    fn position_after(&self, dt: f64) -> Point {
        let dur = self.duration();
        if !(dur > 0.0) || dur.is_infinite() {
            return self.start;
        }
        let frac = (dt / dur).clamp(0.0, 1.0);
        let lerp = |a: f64, b: f64| {
            let v = a + (b - a) * frac;
            // Guard against the interpolation rounding a hair outside the
            // segment's bounding interval.
            v.clamp(a.min(b), a.max(b))
        };
        Point::new(
            lerp(self.start.x, self.target.x),
            lerp(self.start.y, self.target.y),
        )
    }
}

/// Piecewise-linear waypoint trajectories for every node over `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MobilityTrace {
    legs: Vec<Vec<Leg>>,
    horizon: f64,
    vmax: f64,
    seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MobilityError {
    /// Area dimensions must be strictly positive.
    InvalidArea,
    /// `num_nodes >= 1`, `vmax >= 0`, `horizon > 0`.
    InvalidParams,
    /// Query time outside `[0, horizon]`.
    TimeOutOfRange,
    /// Node id not present in the trace.
    UnknownNode,
}

impl fmt::Display for MobilityError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MobilityError::InvalidArea => write!(f, "area dimensions must be positive"),
            MobilityError::InvalidParams => write!(f, "invalid mobility parameters"),
            MobilityError::TimeOutOfRange => write!(f, "query time outside simulation horizon"),
            MobilityError::UnknownNode => write!(f, "unknown node id"),
        }
    }
}

impl core::error::Error for MobilityError {}

/// Generate a Random Waypoint trace for `num_nodes` nodes.
///
/// Initial positions are i.i.d. uniform over the area; each leg's target is
/// uniform over the area and its speed uniform over `(0, vmax]`. Zero speed
/// is excluded so a leg always terminates; with `vmax == 0` every node gets
/// a single stationary leg spanning the whole horizon.
pub fn generate_trace(
    seed: u64,
    num_nodes: usize,
    area: (f64, f64),
    vmax: f64,
    horizon: f64,
) -> Result<MobilityTrace, MobilityError> {
    let (width, height) = area;
    if !(width > 0.0) || !(height > 0.0) {
        return Err(MobilityError::InvalidArea);
    }
    if num_nodes == 0 || !(vmax >= 0.0) || !(horizon > 0.0) {
        return Err(MobilityError::InvalidParams);
    }

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut legs = Vec::with_capacity(num_nodes);
    for _ in 0..num_nodes {
        legs.push(generate_node_legs(&mut rng, width, height, vmax, horizon));
    }
    Ok(MobilityTrace {
        legs,
        horizon,
        vmax,
        seed,
    })
}

fn generate_node_legs(
    rng: &mut impl RngCore,
    width: f64,
    height: f64,
    vmax: f64,
    horizon: f64,
) -> Vec<Leg> {
    let start = Point::new(rng.gen_range(0.0..width), rng.gen_range(0.0..height));
    if vmax <= 0.0 {
        return alloc::vec![Leg {
            start,
            target: start,
            speed: 0.0,
            start_time: 0.0,
        }];
    }

    let mut legs = Vec::new();
    let mut pos = start;
    let mut t = 0.0;
    while t < horizon {
        let target = Point::new(rng.gen_range(0.0..width), rng.gen_range(0.0..height));
        let dist = pos.distance(&target);
        if dist < 1e-12 {
            continue; // degenerate target, resample
        }
        // Uniform over (0, vmax]: 1 - U[0,1) never yields zero.
        let speed = vmax * (1.0 - rng.gen_range(0.0..1.0));
        legs.push(Leg {
            start: pos,
            target,
            speed,
            start_time: t,
        });
        t += dist / speed;
        pos = target;
    }
    legs
}

impl MobilityTrace {
    /// Rebuild a trace from its parts (used by the trace file loader).
    pub fn from_parts(legs: Vec<Vec<Leg>>, horizon: f64, vmax: f64, seed: u64) -> Self {
        MobilityTrace {
            legs,
            horizon,
            vmax,
            seed,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.legs.len()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn vmax(&self) -> f64 {
        self.vmax
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn legs_of(&self, node: usize) -> &[Leg] {
        &self.legs[node]
    }

    /// Replace a node's trajectory with a single stationary leg at `at`.
    ///
    /// The engine pins the sink this way: the sink is a fixed base station
    /// while all other nodes move.
    pub fn pin_node(&mut self, node: usize, at: Point) {
        self.legs[node] = alloc::vec![Leg {
            start: at,
            target: at,
            speed: 0.0,
            start_time: 0.0,
        }];
    }

    fn leg_at(&self, node: usize, t: f64) -> Result<&Leg, MobilityError> {
        let legs = self.legs.get(node).ok_or(MobilityError::UnknownNode)?;
        if !(0.0..=self.horizon).contains(&t) {
            return Err(MobilityError::TimeOutOfRange);
        }
        // Last leg whose start_time <= t.
        let idx = legs.partition_point(|l| l.start_time <= t);
        Ok(&legs[idx.saturating_sub(1)])
    }

    /// Position of `node` at time `t`, by linear interpolation along the
    /// active leg.
    pub fn position_at(&self, node: usize, t: f64) -> Result<Point, MobilityError> {
        let leg = self.leg_at(node, t)?;
        Ok(leg.position_after(t - leg.start_time))
    }

    /// Instantaneous velocity vector of `node` at time `t`.
    ///
    /// At an exact waypoint boundary this is the velocity of the leg that
    /// starts there, which is what link-lifetime prediction wants.
    pub fn velocity_at(&self, node: usize, t: f64) -> Result<(f64, f64), MobilityError> {
        Ok(self.leg_at(node, t)?.velocity())
    }
}
