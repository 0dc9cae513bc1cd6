//! Hourly shareability statistics, the sweep CSV and SVG charts.

mod svg;

use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bus_synth::BusTripRecord;
use crate::match_engine::{MatchedPair, ServiceWindow};

pub use svg::{render_plot, Metric, PlotLayout};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReportError {
    #[error("assignment references unknown bus trip {0}")]
    UnknownBus(String),
    #[error("sweep has no cell for day {day}, d = {d_m} m, t_B = {tb_s} s")]
    MissingCell { day: String, d_m: f64, tb_s: f64 },
    #[error("sweep cell day {day}, d = {d_m} m, t_B = {tb_s} s appears twice")]
    DuplicateCell { day: String, d_m: f64, tb_s: f64 },
    #[error("unknown metric `{0}` (expected pct or avgtime)")]
    UnknownMetric(String),
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: u64, message: String },
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for ReportError {
    fn from(e: std::io::Error) -> Self {
        ReportError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HourlyStats {
    pub hour: u32,
    pub n_bus: usize,
    pub n_matched: usize,
    pub pct_matched: f64,
    /// Mean saving in minutes rounded to 2 decimals; `None` without matches.
    pub mean_tau_min: Option<f64>,
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Buckets bus trips and matches by the hour the bus trip starts, for every
/// hour of the service window. Trips starting outside the window are left out.
pub fn hourly_stats(
    pairs: &[MatchedPair],
    bus_trips: &[BusTripRecord],
    window: &ServiceWindow,
) -> Result<Vec<HourlyStats>, ReportError> {
    let start: HashMap<&str, f64> = bus_trips.iter().map(|t| (t.trip_id.as_str(), t.t_start)).collect();
    let hours: Vec<u32> = window.hours().collect();
    let slot = |t: f64| -> Option<usize> {
        window.contains(t).then(|| (window.hour_of(t) - window.start_hour as i64) as usize)
    };
    let mut n_bus = vec![0usize; hours.len()];
    let mut n_matched = vec![0usize; hours.len()];
    let mut tau_sum = vec![0f64; hours.len()];
    for t in bus_trips {
        if let Some(i) = slot(t.t_start) {
            n_bus[i] += 1;
        }
    }
    for p in pairs {
        let t = *start.get(p.bus_id.as_str()).ok_or_else(|| ReportError::UnknownBus(p.bus_id.clone()))?;
        if let Some(i) = slot(t) {
            n_matched[i] += 1;
            tau_sum[i] += p.tau;
        }
    }
    Ok(hours
        .iter()
        .enumerate()
        .map(|(i, &hour)| HourlyStats {
            hour,
            n_bus: n_bus[i],
            n_matched: n_matched[i],
            pct_matched: if n_bus[i] == 0 { 0.0 } else { 100.0 * n_matched[i] as f64 / n_bus[i] as f64 },
            mean_tau_min: (n_matched[i] > 0).then(|| round2(tau_sum[i] / n_matched[i] as f64 / 60.0)),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub day: String,
    pub d_m: f64,
    pub tb_s: f64,
    pub stats: Vec<HourlyStats>,
}

/// Hourly statistics for every (day, d, t_B) combination, sorted in that
/// order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepResult {
    cells: Vec<SweepCell>,
}

fn cell_order(a: &SweepCell, b: &SweepCell) -> std::cmp::Ordering {
    a.day.cmp(&b.day).then(a.d_m.total_cmp(&b.d_m)).then(a.tb_s.total_cmp(&b.tb_s))
}

impl SweepResult {
    /// Validates that the cells cover the full grid of their days, spatial
    /// buffers and time buffers exactly once.
    pub fn new(mut cells: Vec<SweepCell>) -> Result<Self, ReportError> {
        cells.sort_by(cell_order);
        for w in cells.windows(2) {
            if cell_order(&w[0], &w[1]).is_eq() {
                let c = &w[0];
                return Err(ReportError::DuplicateCell { day: c.day.clone(), d_m: c.d_m, tb_s: c.tb_s });
            }
        }
        let sweep = SweepResult { cells };
        for day in sweep.days() {
            for &d_m in &sweep.d_values() {
                for &tb_s in &sweep.tb_values() {
                    sweep.cell(&day, d_m, tb_s)?;
                }
            }
        }
        Ok(sweep)
    }

    pub fn cells(&self) -> &[SweepCell] {
        &self.cells
    }

    pub fn days(&self) -> Vec<String> {
        let mut v: Vec<String> = self.cells.iter().map(|c| c.day.clone()).collect();
        v.dedup();
        v
    }

    fn sorted_unique(mut v: Vec<f64>) -> Vec<f64> {
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    pub fn d_values(&self) -> Vec<f64> {
        Self::sorted_unique(self.cells.iter().map(|c| c.d_m).collect())
    }

    pub fn tb_values(&self) -> Vec<f64> {
        Self::sorted_unique(self.cells.iter().map(|c| c.tb_s).collect())
    }

    pub fn cell(&self, day: &str, d_m: f64, tb_s: f64) -> Result<&SweepCell, ReportError> {
        self.cells
            .iter()
            .find(|c| c.day == day && c.d_m == d_m && c.tb_s == tb_s)
            .ok_or_else(|| ReportError::MissingCell { day: day.to_string(), d_m, tb_s })
    }
}

pub const STATS_HEADER: [&str; 8] = ["day", "d_m", "tb_s", "hour", "n_bus", "n_matched", "pct_matched", "mean_tau_min"];

/// Writes the stats CSV ordered by (day, d, t_B, hour). An undefined mean is
/// an empty field.
pub fn write_csv<W: Write>(results: &SweepResult, w: W) -> Result<(), ReportError> {
    let mut wtr = csv::Writer::from_writer(w);
    let io = |e: csv::Error| ReportError::Io(e.to_string());
    wtr.write_record(STATS_HEADER).map_err(io)?;
    for c in results.cells() {
        for s in &c.stats {
            wtr.write_record([
                c.day.clone(),
                c.d_m.to_string(),
                c.tb_s.to_string(),
                s.hour.to_string(),
                s.n_bus.to_string(),
                s.n_matched.to_string(),
                s.pct_matched.to_string(),
                s.mean_tau_min.map(|m| format!("{m:.2}")).unwrap_or_default(),
            ])
            .map_err(io)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct StatsRow {
    day: String,
    d_m: f64,
    tb_s: f64,
    hour: u32,
    n_bus: usize,
    n_matched: usize,
    pct_matched: f64,
    mean_tau_min: Option<f64>,
}

pub fn read_csv<R: Read>(r: R, name: &str) -> Result<SweepResult, ReportError> {
    let mut cells: Vec<SweepCell> = Vec::new();
    for row in csv::Reader::from_reader(r).deserialize::<StatsRow>() {
        let row = row.map_err(|e| ReportError::Parse {
            path: name.to_string(),
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let stats = HourlyStats {
            hour: row.hour,
            n_bus: row.n_bus,
            n_matched: row.n_matched,
            pct_matched: row.pct_matched,
            mean_tau_min: row.mean_tau_min,
        };
        match cells.last_mut() {
            Some(c) if c.day == row.day && c.d_m == row.d_m && c.tb_s == row.tb_s => c.stats.push(stats),
            _ => cells.push(SweepCell { day: row.day, d_m: row.d_m, tb_s: row.tb_s, stats: vec![stats] }),
        }
    }
    SweepResult::new(cells)
}
