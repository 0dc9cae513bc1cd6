//! Map matching of taxi GPS traces onto road network clusters.
//!
//! A trace becomes a [`TaxiTrajectory`]: the dense node sequence of a
//! network walk with an estimated passing time at every node.

mod io;
mod matcher;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo_network::{ClusterId, LatLon};

pub use io::{read_gps_traces, read_trajectories, write_rejects, write_trajectories};
pub use matcher::{interpolate_timestamps, match_trace, match_traces, MatchOutcome, MatcherConfig};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MapMatchError {
    #[error("trace needs at least 2 fixes, got {0}")]
    TooFewFixes(usize),
    #[error("timestamps must strictly increase (fix {0})")]
    NonIncreasingTime(usize),
    #[error("fix {index} has invalid coordinate {lat},{lon}")]
    InvalidFix { index: usize, lat: f64, lon: f64 },
    #[error("fix {0} has no candidate node within snapping distance")]
    NoCandidate(usize),
    #[error("no network path reaches fix {0}")]
    NoPath(usize),
    #[error("trace collapses onto a single node")]
    SingleNode,
    #[error("invalid anchors: {0}")]
    InvalidAnchors(String),
    #[error("invalid trajectory {trip_id}: {reason}")]
    InvalidTrajectory { trip_id: String, reason: String },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for MapMatchError {
    fn from(e: std::io::Error) -> Self {
        MapMatchError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpsFix {
    pub pos: LatLon,
    /// Seconds since epoch.
    pub t: f64,
}

/// Time-ordered GPS fixes of one taxi trip.
#[derive(Debug, Clone, PartialEq)]
pub struct GpsTrace {
    trip_id: String,
    fixes: Vec<GpsFix>,
}

impl GpsTrace {
    pub fn new(trip_id: impl Into<String>, fixes: Vec<GpsFix>) -> Result<Self, MapMatchError> {
        if fixes.len() < 2 {
            return Err(MapMatchError::TooFewFixes(fixes.len()));
        }
        for (i, f) in fixes.iter().enumerate() {
            if !f.pos.is_valid() || !f.t.is_finite() {
                return Err(MapMatchError::InvalidFix { index: i, lat: f.pos.lat, lon: f.pos.lon });
            }
            if i > 0 && !(f.t > fixes[i - 1].t) {
                return Err(MapMatchError::NonIncreasingTime(i));
            }
        }
        Ok(GpsTrace { trip_id: trip_id.into(), fixes })
    }

    pub fn trip_id(&self) -> &str {
        &self.trip_id
    }

    pub fn fixes(&self) -> &[GpsFix] {
        &self.fixes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub node: ClusterId,
    pub t: f64,
}

/// Ordered `(node, time)` tuples of one taxi trip. Times never decrease,
/// consecutive nodes differ and there are at least two points.
#[derive(Debug, Clone, PartialEq)]
pub struct TaxiTrajectory {
    trip_id: String,
    points: Vec<TrajectoryPoint>,
}

impl TaxiTrajectory {
    pub fn new(trip_id: impl Into<String>, points: Vec<TrajectoryPoint>) -> Result<Self, MapMatchError> {
        let trip_id = trip_id.into();
        let invalid = |reason: String| MapMatchError::InvalidTrajectory { trip_id: trip_id.clone(), reason };
        if points.len() < 2 {
            return Err(invalid(format!("needs at least 2 nodes, got {}", points.len())));
        }
        for (j, w) in points.windows(2).enumerate() {
            if w[0].node == w[1].node {
                return Err(invalid(format!("node {} repeats at positions {j} and {}", w[0].node, j + 1)));
            }
            if !(w[1].t >= w[0].t) {
                return Err(invalid(format!("time decreases at position {}", j + 1)));
            }
        }
        if points.iter().any(|p| !p.t.is_finite()) {
            return Err(invalid("non-finite timestamp".into()));
        }
        Ok(TaxiTrajectory { trip_id, points })
    }

    pub fn trip_id(&self) -> &str {
        &self.trip_id
    }

    pub fn points(&self) -> &[TrajectoryPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn nodes(&self) -> impl Iterator<Item = ClusterId> + '_ {
        self.points.iter().map(|p| p.node)
    }
}
