//! Matching bus trips to concurrently running taxi trips.
//!
//! A taxi trip can serve a bus trip when it passes a start candidate of the
//! bus trip close to the bus start time, later passes an end candidate
//! before the bus arrives, and covers that segment faster than the bus. The
//! potential matches form a bipartite graph weighted by the time saved;
//! [`max_weight_matching`] picks the one-to-one assignment with the largest
//! total saving.

mod assign;
mod candidates;
mod io;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bus_synth::{BusStop, BusTripRecord, HOUR_S};
use crate::geo_network::{ClusterId, RoadNetwork};
use crate::map_match::TaxiTrajectory;

pub use assign::{brute_force_assignment, max_weight_matching, tau_to_micros, BRUTE_FORCE_MAX_SIDE};
pub use candidates::{enumerate_candidates, NodeEvent, NodeEventIndex};
pub use io::{read_assignment, read_candidates, write_assignment, write_candidates, AssignmentRow};

/// Stops farther than this outside the network bounding box are not served.
pub const COVERAGE_MARGIN_M: f64 = 1_000.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatchError {
    #[error("invalid match configuration: {0}")]
    InvalidConfig(String),
    #[error("brute force limited to {max} trips per side, got {buses} buses and {taxis} taxis")]
    TooLarge { buses: usize, taxis: usize, max: usize },
    #[error("duplicate candidate for bus {bus_id} and taxi {taxi_id}")]
    DuplicateCandidate { bus_id: String, taxi_id: String },
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: u64, message: String },
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for MatchError {
    fn from(e: std::io::Error) -> Self {
        MatchError::Io(e.to_string())
    }
}

/// Hours of the day over which statistics are reported, relative to the
/// local midnight `day_start`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServiceWindow {
    pub day_start: f64,
    pub start_hour: u32,
    pub end_hour: u32,
}

impl Default for ServiceWindow {
    fn default() -> Self {
        ServiceWindow { day_start: 0.0, start_hour: 6, end_hour: 23 }
    }
}

impl ServiceWindow {
    /// Hour bucket of `t`; may be negative or beyond 23 for other days.
    pub fn hour_of(&self, t: f64) -> i64 {
        ((t - self.day_start) / HOUR_S).floor() as i64
    }

    pub fn contains(&self, t: f64) -> bool {
        let h = self.hour_of(t);
        h >= self.start_hour as i64 && h < self.end_hour as i64
    }

    pub fn hours(&self) -> std::ops::Range<u32> {
        self.start_hour..self.end_hour
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchConfig {
    /// Spatial buffer around bus stops, meters.
    pub d_m: f64,
    /// Time buffer around the bus start, seconds.
    pub t_b_s: f64,
    pub window: ServiceWindow,
}

impl MatchConfig {
    pub fn new(d_m: f64, t_b_s: f64, window: ServiceWindow) -> Result<Self, MatchError> {
        if !(d_m.is_finite() && d_m >= 0.0) {
            return Err(MatchError::InvalidConfig(format!("d must be >= 0, got {d_m}")));
        }
        if !(t_b_s.is_finite() && t_b_s > 0.0) {
            return Err(MatchError::InvalidConfig(format!("t_B must be > 0, got {t_b_s}")));
        }
        if window.start_hour >= window.end_hour || window.end_hour > 24 {
            return Err(MatchError::InvalidConfig(format!(
                "service window {}..{} is empty or exceeds a day",
                window.start_hour, window.end_hour
            )));
        }
        Ok(MatchConfig { d_m, t_b_s, window })
    }
}

/// Bus trip with start and end candidate clusters, both sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct BusTripResolved {
    pub trip_id: String,
    pub start_nodes: Vec<ClusterId>,
    pub end_nodes: Vec<ClusterId>,
    pub t_start: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RejectReason {
    #[error("unknown stop {0}")]
    UnknownStop(String),
    #[error("stop {0} outside network coverage")]
    OutsideCoverage(String),
    #[error("start and end candidate sets overlap")]
    Degenerate,
}

/// Candidate sets for one bus trip: the clusters within `d` of each stop
/// plus the nearest cluster, so `d = 0` keeps only the nearest one and the
/// sets grow with `d`.
pub fn resolve_bus_trip(
    net: &RoadNetwork,
    trip: &BusTripRecord,
    stops: &HashMap<String, BusStop>,
    d: f64,
) -> Result<BusTripResolved, RejectReason> {
    let coverage = net.bbox().padded(COVERAGE_MARGIN_M);
    let candidates = |stop_id: &str| -> Result<Vec<ClusterId>, RejectReason> {
        let stop = stops.get(stop_id).ok_or_else(|| RejectReason::UnknownStop(stop_id.to_string()))?;
        if !coverage.contains(stop.pos) {
            return Err(RejectReason::OutsideCoverage(stop_id.to_string()));
        }
        let mut nodes = net.radius_query(stop.pos, d).expect("validated radius and coordinate");
        let nearest = net.nearest_node(stop.pos).expect("network is never empty");
        if let Err(at) = nodes.binary_search(&nearest) {
            nodes.insert(at, nearest);
        }
        Ok(nodes)
    };
    let start_nodes = candidates(&trip.origin_stop)?;
    let end_nodes = candidates(&trip.dest_stop)?;
    let overlap = start_nodes.iter().any(|n| end_nodes.binary_search(n).is_ok());
    if overlap {
        return Err(RejectReason::Degenerate);
    }
    Ok(BusTripResolved {
        trip_id: trip.trip_id.clone(),
        start_nodes,
        end_nodes,
        t_start: trip.t_start,
        t_end: trip.t_end,
    })
}

/// Best feasible segment of one taxi trip for one bus trip. `k` and `l` are
/// 1-based positions in the taxi trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchCandidate {
    pub bus_id: String,
    pub taxi_id: String,
    pub k: usize,
    pub l: usize,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub bus_id: String,
    pub taxi_id: String,
    pub tau: f64,
}

/// One-to-one pairs sorted by bus id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Assignment {
    pub pairs: Vec<MatchedPair>,
    pub total_tau: f64,
}

impl Assignment {
    pub fn from_pairs(mut pairs: Vec<MatchedPair>) -> Self {
        pairs.sort_by(|a, b| a.bus_id.cmp(&b.bus_id).then_with(|| a.taxi_id.cmp(&b.taxi_id)));
        let total_tau = pairs.iter().map(|p| p.tau).sum();
        Assignment { pairs, total_tau }
    }

    /// Total saving in microseconds, the quantity the solvers maximize.
    pub fn total_tau_micros(&self) -> i64 {
        self.pairs.iter().map(|p| tau_to_micros(p.tau)).sum()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Everything computed for one day and one (d, t_B) setting.
#[derive(Debug, Clone, Default)]
pub struct DayResult {
    pub resolved: usize,
    pub rejected: Vec<(String, RejectReason)>,
    /// Sorted by (bus id, taxi id).
    pub candidates: Vec<MatchCandidate>,
    pub assignment: Assignment,
}

impl DayResult {
    /// Number of candidate taxis per bus trip, for trips with at least one.
    pub fn candidate_counts(&self) -> Vec<(&str, usize)> {
        let mut out: Vec<(&str, usize)> = Vec::new();
        for c in &self.candidates {
            match out.last_mut() {
                Some((id, n)) if *id == c.bus_id => *n += 1,
                _ => out.push((&c.bus_id, 1)),
            }
        }
        out
    }
}

/// Resolves all bus trips, enumerates candidates against all trajectories
/// and solves a single assignment for the day.
pub fn run_day(
    net: &RoadNetwork,
    trajectories: &[TaxiTrajectory],
    bus_trips: &[BusTripRecord],
    stops: &[BusStop],
    cfg: &MatchConfig,
) -> DayResult {
    use rayon::prelude::*;

    let stop_map: HashMap<String, BusStop> = stops.iter().map(|s| (s.stop_id.clone(), s.clone())).collect();
    let index = NodeEventIndex::build(trajectories);
    let resolved: Vec<Result<BusTripResolved, (String, RejectReason)>> = bus_trips
        .par_iter()
        .map(|t| resolve_bus_trip(net, t, &stop_map, cfg.d_m).map_err(|r| (t.trip_id.clone(), r)))
        .collect();
    let mut rejected = Vec::new();
    let mut ok = Vec::new();
    for r in resolved {
        match r {
            Ok(b) => ok.push(b),
            Err(e) => rejected.push(e),
        }
    }
    rejected.sort_by(|a, b| a.0.cmp(&b.0));
    let mut candidates: Vec<MatchCandidate> = ok
        .par_iter()
        .flat_map_iter(|b| enumerate_candidates(&index, trajectories, b, cfg))
        .collect();
    candidates.sort_by(|a, b| a.bus_id.cmp(&b.bus_id).then_with(|| a.taxi_id.cmp(&b.taxi_id)));
    let assignment = max_weight_matching(&candidates).expect("one candidate per pair by construction");
    DayResult { resolved: ok.len(), rejected, candidates, assignment }
}
