//! Desk-scale synthetic city: road network, taxi GPS traces, bus stops and
//! aggregate bus demand for one weekday.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Result;
use busshare_core::geo_network::{haversine_m, ClusterId, LatLon};
use busshare_core::synthetic::GridCity;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use crate::artifacts::write_atomic;

pub const CONFIG_FILE: &str = "busshare.toml";
/// 2023-11-15 00:00 UTC, a Wednesday.
pub const FIXTURE_DAY_START: f64 = 1_700_006_400.0;

#[derive(Debug, Clone, PartialEq)]
pub struct FixtureOptions {
    pub seed: u64,
    pub rows: u32,
    pub cols: u32,
    pub spacing_m: f64,
    pub near_duplicates: usize,
    pub island_nodes: usize,
    pub taxi_trips: usize,
    /// Share of taxi trips that start and end near a busy bus stop pair.
    pub taxi_stop_bias: f64,
    pub gps_interval_s: f64,
    pub gps_noise_m: f64,
    pub stops: usize,
    pub od_pairs: usize,
    pub min_od_m: f64,
    pub weekday_trips: f64,
    pub weekend_trips: f64,
    pub bus_speed_mps: f64,
    pub bus_dwell_s: f64,
}

impl Default for FixtureOptions {
    fn default() -> Self {
        FixtureOptions {
            seed: 20231115,
            rows: 20,
            cols: 20,
            spacing_m: 150.0,
            near_duplicates: 30,
            island_nodes: 6,
            taxi_trips: 1000,
            taxi_stop_bias: 0.9,
            gps_interval_s: 15.0,
            gps_noise_m: 5.0,
            stops: 40,
            od_pairs: 250,
            min_od_m: 600.0,
            weekday_trips: 2000.0,
            weekend_trips: 1200.0,
            bus_speed_mps: 4.0,
            bus_dwell_s: 120.0,
        }
    }
}

/// Relative demand by hour of day: morning and evening peaks, nothing
/// between midnight and 05:00.
fn hour_weight(h: u32) -> f64 {
    if h < 5 {
        return 0.0;
    }
    let h = h as f64;
    1.0 + 3.0 * (-(h - 8.0).powi(2) / 2.0).exp() + 3.0 * (-(h - 18.0).powi(2) / 2.0).exp()
}

fn pick_weighted<R: Rng>(rng: &mut R, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random_range(0.0..total);
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

struct Stop {
    id: String,
    north: f64,
    east: f64,
    pos: LatLon,
}

struct City {
    grid: GridCity,
    opts: FixtureOptions,
}

impl City {
    fn node_id(&self, id: ClusterId) -> String {
        let (r, c) = self.grid.row_col(id);
        format!("g{r:02}{c:02}")
    }

    fn nearest_node(&self, north: f64, east: f64) -> ClusterId {
        let clamp = |v: f64, n: u32| (v / self.opts.spacing_m).round().clamp(0.0, (n - 1) as f64) as u32;
        self.grid.node(clamp(north, self.grid.rows), clamp(east, self.grid.cols))
    }

    /// A node at most `hops` grid steps from `id`.
    fn nearby<R: Rng>(&self, rng: &mut R, id: ClusterId, hops: i64) -> ClusterId {
        let (r, c) = self.grid.row_col(id);
        let dr = rng.random_range(-hops..=hops);
        let dc = rng.random_range(-(hops - dr.abs())..=(hops - dr.abs()));
        let r = (r as i64 + dr).clamp(0, self.grid.rows as i64 - 1) as u32;
        let c = (c as i64 + dc).clamp(0, self.grid.cols as i64 - 1) as u32;
        self.grid.node(r, c)
    }
}

/// Writes the fixture files and a config into `dir`; returns the config path.
pub fn write_fixture(dir: &Path, opts: &FixtureOptions) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let city = City { grid: GridCity::new(opts.rows, opts.cols, opts.spacing_m, LatLon { lat: 1.30, lon: 103.80 }), opts: opts.clone() };
    let g = &city.grid;
    let n_grid = opts.rows * opts.cols;

    // network: grid, near-duplicate twins, a detached island
    let mut nodes: Vec<(String, LatLon)> =
        (0..n_grid).map(|i| (city.node_id(ClusterId(i)), g.position(ClusterId(i)))).collect();
    let mut edges: Vec<(String, String)> =
        g.edges().into_iter().map(|(a, b)| (city.node_id(a), city.node_id(b))).collect();
    for k in 0..opts.near_duplicates {
        let twin = ClusterId(rng.random_range(0..n_grid));
        let (r, c) = g.row_col(twin);
        let (dist, angle) = (rng.random_range(3.0..8.0), rng.random_range(0.0..std::f64::consts::TAU));
        let pos = g.offset(r as f64 * opts.spacing_m + dist * angle.sin(), c as f64 * opts.spacing_m + dist * angle.cos());
        let id = format!("d{k:02}");
        edges.push((city.node_id(twin), id.clone()));
        nodes.push((id, pos));
    }
    let island_east = opts.cols as f64 * opts.spacing_m + 600.0;
    for k in 0..opts.island_nodes {
        nodes.push((format!("i{k}"), g.offset(k as f64 * opts.spacing_m, island_east)));
        if k > 0 {
            edges.push((format!("i{}", k - 1), format!("i{k}")));
        }
    }
    let blacklist: Vec<(String, String)> = [(5, 5), (10, 12), (14, 3)]
        .iter()
        .map(|&(r, c)| (city.node_id(g.node(r, c)), city.node_id(g.node(r, c + 1))))
        .collect();

    // stops along streets, offset to the kerb
    let extent = |n: u32| (n - 1) as f64 * opts.spacing_m;
    let stops: Vec<Stop> = (0..opts.stops)
        .map(|i| {
            let along = rng.random_range(0.0..extent(opts.cols));
            let street = rng.random_range(0..opts.rows) as f64 * opts.spacing_m + 10.0;
            let (north, east) = if rng.random_bool(0.5) { (street, along) } else { (along, street) };
            let (north, east) = (north.min(extent(opts.rows)), east.min(extent(opts.cols)));
            Stop { id: format!("S{:02}", i + 1), north, east, pos: g.offset(north, east) }
        })
        .collect();

    // busy origin-destination pairs
    let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
    while pairs.len() < opts.od_pairs {
        let (a, b) = (rng.random_range(0..stops.len()), rng.random_range(0..stops.len()));
        if a == b || haversine_m(stops[a].pos, stops[b].pos) < opts.min_od_m || pairs.iter().any(|p| p.0 == a && p.1 == b) {
            continue;
        }
        let w: f64 = Exp1.sample(&mut rng);
        pairs.push((a, b, w));
    }
    let pair_total: f64 = pairs.iter().map(|p| p.2).sum();
    let hour_total: f64 = (0..24).map(hour_weight).sum();
    let mut demand = Vec::new();
    for &(a, b, w) in &pairs {
        for h in 0..24 {
            for (day_type, daily, days) in [("weekday", opts.weekday_trips, 22.0), ("weekend", opts.weekend_trips, 9.0)] {
                let monthly = (days * daily * w / pair_total * hour_weight(h) / hour_total).round() as u64;
                if monthly > 0 {
                    demand.push((stops[a].id.clone(), stops[b].id.clone(), h, day_type, monthly));
                }
            }
        }
    }
    let durations: Vec<(String, String, f64)> = pairs
        .iter()
        .map(|&(a, b, _)| {
            let manhattan = (stops[a].north - stops[b].north).abs() + (stops[a].east - stops[b].east).abs();
            (stops[a].id.clone(), stops[b].id.clone(), (opts.bus_dwell_s + manhattan / opts.bus_speed_mps).round())
        })
        .collect();

    // taxi traces
    let pair_weights: Vec<f64> = pairs.iter().map(|p| p.2).collect();
    let hour_weights: Vec<f64> = (0..24).map(hour_weight).collect();
    let mut fixes: Vec<(String, LatLon, f64)> = Vec::new();
    for i in 0..opts.taxi_trips {
        let (from, to) = loop {
            let (from, to) = if rng.random_bool(opts.taxi_stop_bias) {
                let (a, b, _) = pairs[pick_weighted(&mut rng, &pair_weights)];
                let near = |s: &Stop| city.nearest_node(s.north, s.east);
                (city.nearby(&mut rng, near(&stops[a]), 1), city.nearby(&mut rng, near(&stops[b]), 1))
            } else {
                (ClusterId(rng.random_range(0..n_grid)), ClusterId(rng.random_range(0..n_grid)))
            };
            let ((r0, c0), (r1, c1)) = (g.row_col(from), g.row_col(to));
            if r0.abs_diff(r1) + c0.abs_diff(c1) >= 4 {
                break (from, to);
            }
        };
        let path = g.staircase(&mut rng, from, to);
        let hour = pick_weighted(&mut rng, &hour_weights) as f64;
        let t0 = (FIXTURE_DAY_START + hour * 3600.0 + rng.random_range(0.0..3600.0)).round();
        let speed: f64 = rng.random_range(6.0..9.0);
        let length = (path.len() - 1) as f64 * opts.spacing_m;
        let id = format!("taxi-{i:04}");
        let end = length / speed;
        let mut t = 0.0f64;
        loop {
            let s = if t >= end { length } else { t * speed };
            let seg = ((s / opts.spacing_m) as usize).min(path.len() - 2);
            let frac = s / opts.spacing_m - seg as f64;
            let (a, b) = (g.row_col(path[seg]), g.row_col(path[seg + 1]));
            let north = (a.0 as f64 + frac * (b.0 as f64 - a.0 as f64)) * opts.spacing_m;
            let east = (a.1 as f64 + frac * (b.1 as f64 - a.1 as f64)) * opts.spacing_m;
            let pos = g.jitter(g.offset(north, east), opts.gps_noise_m, &mut rng);
            fixes.push((id.clone(), pos, t0 + t.round()));
            if t >= end {
                break;
            }
            t += rng.random_range(0.8..1.2) * opts.gps_interval_s;
            if t > end - 2.0 {
                t = end;
            }
        }
    }
    // traces the matcher must reject
    fixes.push(("taxi-bad-1".into(), g.position(ClusterId(0)), FIXTURE_DAY_START + 30_000.0));
    for k in 0..3 {
        fixes.push(("taxi-bad-2".into(), g.offset(-5_000.0, k as f64 * 100.0), FIXTURE_DAY_START + 30_000.0 + 15.0 * k as f64));
    }

    let csv_out = |name: &str, header: &[&str], rows: &mut dyn Iterator<Item = Vec<String>>| -> Result<()> {
        write_atomic(&dir.join(name), |w| {
            let mut wtr = csv::Writer::from_writer(w);
            wtr.write_record(header)?;
            for r in rows {
                wtr.write_record(&r)?;
            }
            wtr.flush()?;
            Ok(())
        })
    };
    csv_out(
        "nodes.csv",
        &["node_id", "lat", "lon"],
        &mut nodes.iter().map(|(id, p)| vec![id.clone(), p.lat.to_string(), p.lon.to_string()]),
    )?;
    csv_out("edges.csv", &["from_id", "to_id"], &mut edges.iter().map(|(a, b)| vec![a.clone(), b.clone()]))?;
    csv_out("blacklist.csv", &["from_id", "to_id"], &mut blacklist.iter().map(|(a, b)| vec![a.clone(), b.clone()]))?;
    csv_out(
        "stops.csv",
        &["stop_id", "lat", "lon"],
        &mut stops.iter().map(|s| vec![s.id.clone(), s.pos.lat.to_string(), s.pos.lon.to_string()]),
    )?;
    csv_out(
        "demand.csv",
        &["origin_stop", "dest_stop", "hour", "day_type", "monthly_count"],
        &mut demand.iter().map(|(o, d, h, t, n)| vec![o.clone(), d.clone(), h.to_string(), t.to_string(), n.to_string()]),
    )?;
    csv_out(
        "durations.csv",
        &["origin_stop", "dest_stop", "duration_s"],
        &mut durations.iter().map(|(o, d, s)| vec![o.clone(), d.clone(), s.to_string()]),
    )?;
    csv_out(
        "taxi_gps.csv",
        &["trip_id", "lat", "lon", "timestamp"],
        &mut fixes.iter().map(|(id, p, t)| vec![id.clone(), p.lat.to_string(), p.lon.to_string(), t.to_string()]),
    )?;

    let config = format!(
        "# Synthetic desk-scale city, seed {seed}\n\
         network_nodes = \"nodes.csv\"\n\
         network_edges = \"edges.csv\"\n\
         network_blacklist = \"blacklist.csv\"\n\
         taxi_traces = \"taxi_gps.csv\"\n\
         bus_demand = \"demand.csv\"\n\
         bus_stops = \"stops.csv\"\n\
         bus_durations = \"durations.csv\"\n\
         output_dir = \"out\"\n\
         \n\
         cluster_radius_m = 20\n\
         sweep_d_m = [0, 100, 200]\n\
         sweep_tb_s = [60, 300]\n\
         rng_seed = {seed}\n\
         \n\
         day_type = \"weekday\"\n\
         day_label = \"wednesday\"\n\
         day_start = {day_start}\n",
        seed = opts.seed,
        day_start = FIXTURE_DAY_START,
    );
    let path = dir.join(CONFIG_FILE);
    write_atomic(&path, |w| Ok(w.write_all(config.as_bytes())?))?;
    Ok(path)
}
