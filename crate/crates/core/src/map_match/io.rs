use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{GpsFix, GpsTrace, MapMatchError, TaxiTrajectory, TrajectoryPoint};
use crate::geo_network::{ClusterId, LatLon};

#[derive(Deserialize)]
struct TraceRow {
    trip_id: String,
    lat: f64,
    lon: f64,
    timestamp: f64,
}

#[derive(Serialize, Deserialize)]
struct TrajectoryRow {
    trip_id: String,
    seq: usize,
    node_id: u32,
    timestamp: f64,
}

fn parse_error(name: &str, e: csv::Error) -> MapMatchError {
    MapMatchError::Parse {
        path: name.to_string(),
        line: e.position().map(|p| p.line()).unwrap_or(0),
        message: e.to_string(),
    }
}

fn csv_reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r)
}

/// Reads `trip_id,lat,lon,timestamp` rows, grouping them by trip in file
/// order. Invalid traces are returned separately with the reason.
pub fn read_gps_traces<R: Read>(
    r: R,
    name: &str,
) -> Result<(Vec<GpsTrace>, Vec<(String, MapMatchError)>), MapMatchError> {
    let mut order: Vec<String> = Vec::new();
    let mut fixes: HashMap<String, Vec<GpsFix>> = HashMap::new();
    for row in csv_reader(r).deserialize::<TraceRow>() {
        let row = row.map_err(|e| parse_error(name, e))?;
        let fix = GpsFix { pos: LatLon { lat: row.lat, lon: row.lon }, t: row.timestamp };
        match fixes.get_mut(&row.trip_id) {
            Some(v) => v.push(fix),
            None => {
                order.push(row.trip_id.clone());
                fixes.insert(row.trip_id, vec![fix]);
            }
        }
    }
    let mut traces = Vec::new();
    let mut rejected = Vec::new();
    for id in order {
        let f = fixes.remove(&id).unwrap();
        match GpsTrace::new(id.clone(), f) {
            Ok(t) => traces.push(t),
            Err(e) => rejected.push((id, e)),
        }
    }
    Ok((traces, rejected))
}

/// Writes `trip_id,seq,node_id,timestamp` with 0-based `seq`.
pub fn write_trajectories<W: Write>(w: W, trajectories: &[TaxiTrajectory]) -> Result<(), MapMatchError> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wtr.write_record(["trip_id", "seq", "node_id", "timestamp"])
        .map_err(|e| MapMatchError::Io(e.to_string()))?;
    for traj in trajectories {
        for (seq, p) in traj.points().iter().enumerate() {
            wtr.serialize(TrajectoryRow {
                trip_id: traj.trip_id().to_string(),
                seq,
                node_id: p.node.0,
                timestamp: p.t,
            })
            .map_err(|e| MapMatchError::Io(e.to_string()))?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Reads a trajectory CSV, validating every trajectory. Rows of a trip may
/// appear in any order but `seq` must cover `0..n` exactly. Trajectories come
/// back sorted by trip id.
pub fn read_trajectories<R: Read>(r: R, name: &str) -> Result<Vec<TaxiTrajectory>, MapMatchError> {
    let mut by_trip: HashMap<String, Vec<(usize, TrajectoryPoint)>> = HashMap::new();
    for row in csv_reader(r).deserialize::<TrajectoryRow>() {
        let row = row.map_err(|e| parse_error(name, e))?;
        by_trip
            .entry(row.trip_id)
            .or_default()
            .push((row.seq, TrajectoryPoint { node: ClusterId(row.node_id), t: row.timestamp }));
    }
    let mut out = Vec::with_capacity(by_trip.len());
    for (trip_id, mut rows) in by_trip {
        rows.sort_by_key(|(seq, _)| *seq);
        if rows.iter().enumerate().any(|(i, (seq, _))| *seq != i) {
            return Err(MapMatchError::InvalidTrajectory {
                trip_id,
                reason: "seq values must be 0..n without gaps or repeats".into(),
            });
        }
        out.push(TaxiTrajectory::new(trip_id, rows.into_iter().map(|(_, p)| p).collect())?);
    }
    out.sort_by(|a, b| a.trip_id().cmp(b.trip_id()));
    Ok(out)
}

/// Writes `trip_id,reason` for rejected trips.
pub fn write_rejects<W: Write>(w: W, rejected: &[(String, MapMatchError)]) -> Result<(), MapMatchError> {
    let mut wtr = csv::Writer::from_writer(w);
    let io = |e: csv::Error| MapMatchError::Io(e.to_string());
    wtr.write_record(["trip_id", "reason"]).map_err(io)?;
    for (id, reason) in rejected {
        wtr.write_record([id.as_str(), reason.to_string().as_str()]).map_err(io)?;
    }
    wtr.flush()?;
    Ok(())
}
