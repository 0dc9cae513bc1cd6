use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{AggregateBusDemand, BusStop, BusSynthError, BusTripRecord, DayType, DemandRecord, MonthDays};
use crate::geo_network::LatLon;

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r)
}

fn parse_error(name: &str, e: csv::Error) -> BusSynthError {
    BusSynthError::Parse {
        path: name.to_string(),
        line: e.position().map(|p| p.line()).unwrap_or(0),
        message: e.to_string(),
    }
}

fn row_error(name: &str, row: usize, message: String) -> BusSynthError {
    BusSynthError::Parse { path: name.to_string(), line: row as u64 + 2, message }
}

#[derive(Deserialize)]
struct DemandRow {
    origin_stop: String,
    dest_stop: String,
    hour: u32,
    day_type: String,
    monthly_count: u64,
}

/// Reads `origin_stop,dest_stop,hour,day_type,monthly_count`.
pub fn read_demand<R: Read>(r: R, name: &str, days: MonthDays) -> Result<AggregateBusDemand, BusSynthError> {
    let mut records = Vec::new();
    for (i, row) in reader(r).deserialize::<DemandRow>().enumerate() {
        let row = row.map_err(|e| parse_error(name, e))?;
        let day_type: DayType = row.day_type.parse().map_err(|e: BusSynthError| row_error(name, i, e.to_string()))?;
        if row.hour > 23 {
            return Err(row_error(name, i, format!("hour {} outside 0..23", row.hour)));
        }
        records.push(DemandRecord {
            origin_stop: row.origin_stop,
            dest_stop: row.dest_stop,
            hour: row.hour,
            day_type,
            monthly_count: row.monthly_count,
        });
    }
    AggregateBusDemand::new(records, days)
}

#[derive(Deserialize)]
struct StopRow {
    stop_id: String,
    lat: f64,
    lon: f64,
}

/// Reads `stop_id,lat,lon`.
pub fn read_stops<R: Read>(r: R, name: &str) -> Result<Vec<BusStop>, BusSynthError> {
    let mut seen = HashSet::new();
    let mut stops = Vec::new();
    for (i, row) in reader(r).deserialize::<StopRow>().enumerate() {
        let row = row.map_err(|e| parse_error(name, e))?;
        let pos = LatLon::new(row.lat, row.lon).map_err(|e| row_error(name, i, e.to_string()))?;
        if !seen.insert(row.stop_id.clone()) {
            return Err(BusSynthError::DuplicateStop(row.stop_id));
        }
        stops.push(BusStop { stop_id: row.stop_id, pos });
    }
    Ok(stops)
}

#[derive(Deserialize)]
struct DurationRow {
    origin_stop: String,
    dest_stop: String,
    duration_s: f64,
}

/// Reads a fixed duration table `origin_stop,dest_stop,duration_s`.
pub fn read_duration_table<R: Read>(r: R, name: &str) -> Result<HashMap<(String, String), f64>, BusSynthError> {
    let mut table = HashMap::new();
    for (i, row) in reader(r).deserialize::<DurationRow>().enumerate() {
        let row = row.map_err(|e| parse_error(name, e))?;
        if !(row.duration_s.is_finite() && row.duration_s > 0.0) {
            return Err(row_error(name, i, format!("duration {} is not positive", row.duration_s)));
        }
        table.insert((row.origin_stop, row.dest_stop), row.duration_s);
    }
    Ok(table)
}

#[derive(Serialize, Deserialize)]
struct TripRow {
    trip_id: String,
    origin_stop: String,
    dest_stop: String,
    t_start: f64,
    t_end: f64,
}

/// Reads `trip_id,origin_stop,dest_stop,t_start,t_end`, validating every
/// record. Trip ids must be unique.
pub fn read_trips<R: Read>(r: R, name: &str) -> Result<Vec<BusTripRecord>, BusSynthError> {
    let mut seen = HashSet::new();
    let mut trips = Vec::new();
    for (i, row) in reader(r).deserialize::<TripRow>().enumerate() {
        let row = row.map_err(|e| parse_error(name, e))?;
        if !seen.insert(row.trip_id.clone()) {
            return Err(row_error(name, i, format!("duplicate trip id {}", row.trip_id)));
        }
        let trip = BusTripRecord::new(row.trip_id, row.origin_stop, row.dest_stop, row.t_start, row.t_end)
            .map_err(|e| row_error(name, i, e.to_string()))?;
        trips.push(trip);
    }
    Ok(trips)
}

pub fn write_trips<W: Write>(w: W, trips: &[BusTripRecord]) -> Result<(), BusSynthError> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    let io = |e: csv::Error| BusSynthError::Io(e.to_string());
    wtr.write_record(["trip_id", "origin_stop", "dest_stop", "t_start", "t_end"]).map_err(io)?;
    for t in trips {
        wtr.serialize(TripRow {
            trip_id: t.trip_id.clone(),
            origin_stop: t.origin_stop.clone(),
            dest_stop: t.dest_stop.clone(),
            t_start: t.t_start,
            t_end: t.t_end,
        })
        .map_err(io)?;
    }
    wtr.flush()?;
    Ok(())
}
