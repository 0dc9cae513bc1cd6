use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{Assignment, MatchCandidate, MatchError};

fn io_err(e: csv::Error) -> MatchError {
    MatchError::Io(e.to_string())
}

fn parse_error(name: &str, e: csv::Error) -> MatchError {
    MatchError::Parse {
        path: name.to_string(),
        line: e.position().map(|p| p.line()).unwrap_or(0),
        message: e.to_string(),
    }
}

fn writer<W: Write>(w: W, header: &[&str]) -> Result<csv::Writer<W>, MatchError> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wtr.write_record(header).map_err(io_err)?;
    Ok(wtr)
}

#[derive(Serialize, Deserialize)]
struct CandidateRow {
    bus_id: String,
    taxi_id: String,
    k: usize,
    l: usize,
    tau_s: f64,
}

/// Writes `bus_id,taxi_id,k,l,tau_s`.
pub fn write_candidates<W: Write>(w: W, candidates: &[MatchCandidate]) -> Result<(), MatchError> {
    let mut wtr = writer(w, &["bus_id", "taxi_id", "k", "l", "tau_s"])?;
    for c in candidates {
        wtr.serialize(CandidateRow {
            bus_id: c.bus_id.clone(),
            taxi_id: c.taxi_id.clone(),
            k: c.k,
            l: c.l,
            tau_s: c.tau,
        })
        .map_err(io_err)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_candidates<R: Read>(r: R, name: &str) -> Result<Vec<MatchCandidate>, MatchError> {
    csv::Reader::from_reader(r)
        .deserialize::<CandidateRow>()
        .map(|row| {
            row.map(|c| MatchCandidate { bus_id: c.bus_id, taxi_id: c.taxi_id, k: c.k, l: c.l, tau: c.tau_s })
                .map_err(|e| parse_error(name, e))
        })
        .collect()
}

/// One line of the assignment file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentRow {
    pub bus_id: String,
    pub taxi_id: String,
    pub tau_s: f64,
    pub bus_start_hour: i64,
}

/// Writes `bus_id,taxi_id,tau_s,bus_start_hour`; `hour_of` maps a bus id to
/// the hour bucket of its start time.
pub fn write_assignment<W: Write>(
    w: W,
    assignment: &Assignment,
    hour_of: impl Fn(&str) -> i64,
) -> Result<(), MatchError> {
    let mut wtr = writer(w, &["bus_id", "taxi_id", "tau_s", "bus_start_hour"])?;
    for p in &assignment.pairs {
        wtr.serialize(AssignmentRow {
            bus_id: p.bus_id.clone(),
            taxi_id: p.taxi_id.clone(),
            tau_s: p.tau,
            bus_start_hour: hour_of(&p.bus_id),
        })
        .map_err(io_err)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_assignment<R: Read>(r: R, name: &str) -> Result<Vec<AssignmentRow>, MatchError> {
    csv::Reader::from_reader(r)
        .deserialize::<AssignmentRow>()
        .map(|row| row.map_err(|e| parse_error(name, e)))
        .collect()
}
