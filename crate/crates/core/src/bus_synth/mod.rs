//! Individual bus trips from aggregate hourly origin/destination counts.
//!
//! Daily counts are Poisson draws around the monthly average, departures per
//! stop-hour follow an empirical passengers-to-departures relation, and every
//! passenger boards a uniformly chosen departure of their stop-hour.

mod generate;
mod io;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geo_network::LatLon;

pub use generate::{
    expected_departures, generate_departure_times, generate_trips, sample_daily_counts, DepartureModel,
    DurationModel, HOUR_S,
};
pub use io::{read_demand, read_duration_table, read_stops, read_trips, write_trips};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BusSynthError {
    #[error("boarding count must be non-negative and finite, got {0}")]
    InvalidCount(f64),
    #[error("hour {0} outside 0..23")]
    InvalidHour(u32),
    #[error("month must contain at least one day of each type")]
    InvalidMonthDays,
    #[error("unknown stops: {}", .0.join(", "))]
    UnknownStops(Vec<String>),
    #[error("duplicate stop id {0}")]
    DuplicateStop(String),
    #[error("no duration for {} origin/destination pairs, first {}->{}", .0.len(), .0[0].0, .0[0].1)]
    MissingDuration(Vec<(String, String)>),
    #[error("invalid duration model: {0}")]
    InvalidDurationModel(String),
    #[error("invalid bus trip {trip_id}: {reason}")]
    InvalidTrip { trip_id: String, reason: String },
    #[error("unknown day type `{0}` (expected weekday or weekend)")]
    UnknownDayType(String),
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: u64, message: String },
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for BusSynthError {
    fn from(e: std::io::Error) -> Self {
        BusSynthError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DayType {
    Weekday,
    Weekend,
}

impl DayType {
    pub fn as_str(self) -> &'static str {
        match self {
            DayType::Weekday => "weekday",
            DayType::Weekend => "weekend",
        }
    }
}

impl fmt::Display for DayType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DayType {
    type Err = BusSynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "weekday" => Ok(DayType::Weekday),
            "weekend" => Ok(DayType::Weekend),
            other => Err(BusSynthError::UnknownDayType(other.to_string())),
        }
    }
}

/// Number of days of each type in the month the counts cover.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonthDays {
    pub weekdays: u32,
    pub weekend_days: u32,
}

impl Default for MonthDays {
    fn default() -> Self {
        MonthDays { weekdays: 22, weekend_days: 9 }
    }
}

impl MonthDays {
    pub fn of(&self, day: DayType) -> u32 {
        match day {
            DayType::Weekday => self.weekdays,
            DayType::Weekend => self.weekend_days,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandRecord {
    pub origin_stop: String,
    pub dest_stop: String,
    pub hour: u32,
    pub day_type: DayType,
    pub monthly_count: u64,
}

/// Monthly trip counts per (origin, destination, hour, day type).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AggregateBusDemand {
    records: Vec<DemandRecord>,
    days: MonthDays,
}

impl AggregateBusDemand {
    pub fn new(records: Vec<DemandRecord>, days: MonthDays) -> Result<Self, BusSynthError> {
        if let Some(r) = records.iter().find(|r| r.hour > 23) {
            return Err(BusSynthError::InvalidHour(r.hour));
        }
        if days.weekdays == 0 || days.weekend_days == 0 {
            return Err(BusSynthError::InvalidMonthDays);
        }
        Ok(AggregateBusDemand { records, days })
    }

    pub fn records(&self) -> &[DemandRecord] {
        &self.records
    }

    pub fn days(&self) -> MonthDays {
        self.days
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusStop {
    pub stop_id: String,
    pub pos: LatLon,
}

/// One passenger trip. Times are seconds on the same clock as the taxi
/// traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusTripRecord {
    pub trip_id: String,
    pub origin_stop: String,
    pub dest_stop: String,
    pub t_start: f64,
    pub t_end: f64,
}

impl BusTripRecord {
    pub fn new(
        trip_id: impl Into<String>,
        origin_stop: impl Into<String>,
        dest_stop: impl Into<String>,
        t_start: f64,
        t_end: f64,
    ) -> Result<Self, BusSynthError> {
        let trip = BusTripRecord {
            trip_id: trip_id.into(),
            origin_stop: origin_stop.into(),
            dest_stop: dest_stop.into(),
            t_start,
            t_end,
        };
        trip.validate()?;
        Ok(trip)
    }

    pub fn validate(&self) -> Result<(), BusSynthError> {
        if !self.t_start.is_finite() || !self.t_end.is_finite() || !(self.t_end > self.t_start) {
            return Err(BusSynthError::InvalidTrip {
                trip_id: self.trip_id.clone(),
                reason: format!("t_end {} must exceed t_start {}", self.t_end, self.t_start),
            });
        }
        Ok(())
    }

    pub fn duration_s(&self) -> f64 {
        self.t_end - self.t_start
    }
}

/// Seed for an independent random stream keyed by `parts`.
pub fn derive_seed(seed: u64, parts: &[&str]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    h.finalize().into()
}
