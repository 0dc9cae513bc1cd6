//! The five pipeline stages and their on-disk artifacts.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use busshare_core::bus_synth::{self, BusStop, BusTripRecord, DurationModel};
use busshare_core::geo_network::{self, RoadNetwork};
use busshare_core::map_match::{self, TaxiTrajectory};
use busshare_core::match_engine::{self, MatchConfig, MatchedPair};
use busshare_core::report::{self, Metric, SweepCell, SweepResult};
use serde_json::json;

use crate::artifacts::{sha256_bytes, sha256_file, write_atomic};
use crate::config::PipelineConfig;
use crate::manifest::{checksum_inputs, RunManifest, StageRecord, Status};

pub const NETWORK_FILE: &str = "network.json";
pub const TRAJECTORIES_FILE: &str = "trajectories.csv";
pub const MAP_MATCH_REJECTS_FILE: &str = "map_match_rejects.csv";
pub const BUS_TRIPS_FILE: &str = "bus_trips.csv";
pub const STATS_FILE: &str = "report/stats.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    NetworkPrepare,
    MapMatch,
    BusSynth,
    Match,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::NetworkPrepare, Stage::MapMatch, Stage::BusSynth, Stage::Match, Stage::Report];

    /// Subcommand name.
    pub fn name(self) -> &'static str {
        match self {
            Stage::NetworkPrepare => "network-prepare",
            Stage::MapMatch => "map-match",
            Stage::BusSynth => "bus-synth",
            Stage::Match => "match",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A failure attributed to the stage it happened in.
#[derive(Debug)]
pub struct StageError {
    pub stage: Stage,
    pub source: anyhow::Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {:#}", self.stage, self.source)
    }
}

impl std::error::Error for StageError {}

#[derive(Debug, Clone, PartialEq)]
pub struct StageReport {
    pub stage: Stage,
    /// Inputs and parameters were unchanged, so nothing was recomputed.
    pub skipped: bool,
    pub summary: Vec<String>,
}

/// Number formatting used in artifact names: `0`, `100`, `12.5`.
pub fn tag(v: f64) -> String {
    format!("{v}")
}

pub fn candidates_file(d_m: f64, tb_s: f64) -> String {
    format!("match/candidates_d{}_tb{}.csv", tag(d_m), tag(tb_s))
}

pub fn assignment_file(d_m: f64, tb_s: f64) -> String {
    format!("match/assignment_d{}_tb{}.csv", tag(d_m), tag(tb_s))
}

pub fn plot_file(metric: Metric, day: &str, tb_s: f64) -> String {
    format!("report/{}_{day}_tb{}.svg", metric.as_str(), tag(tb_s))
}

struct StageOutput {
    files: Vec<String>,
    summary: Vec<String>,
}

pub struct Pipeline {
    cfg: PipelineConfig,
    force: bool,
    manifest: RunManifest,
}

impl Pipeline {
    /// Validates the config and opens (or starts) the run manifest.
    pub fn new(cfg: PipelineConfig, force: bool) -> Result<Self> {
        cfg.validate()?;
        std::fs::create_dir_all(&cfg.output_dir)
            .with_context(|| format!("creating output directory {}", cfg.output_dir.display()))?;
        let mut manifest = RunManifest::load_or_new(&cfg.output_dir, cfg.hash());
        manifest.status = Status::Running;
        manifest.save(&cfg.output_dir)?;
        Ok(Pipeline { cfg, force, manifest })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn manifest(&self) -> &RunManifest {
        &self.manifest
    }

    fn out(&self, rel: &str) -> PathBuf {
        self.cfg.output_dir.join(rel)
    }

    /// Path of an upstream artifact, or an error naming the stage that
    /// produces it.
    fn upstream(&self, rel: &str, producer: Stage) -> Result<PathBuf> {
        let p = self.out(rel);
        if p.is_file() {
            Ok(p)
        } else {
            Err(anyhow!("missing artifact {}; run `busshare {producer}` first", p.display()))
        }
    }

    fn plan(&self, stage: Stage) -> Result<(Vec<PathBuf>, serde_json::Value)> {
        let c = &self.cfg;
        let opt = |p: &Option<PathBuf>| p.iter().cloned().collect::<Vec<_>>();
        let (inputs, params) = match stage {
            Stage::NetworkPrepare => (
                [opt(&c.network_nodes), opt(&c.network_edges), opt(&c.network_blacklist)].concat(),
                json!({ "cluster_radius_m": c.cluster_radius_m, "bbox": c.bbox }),
            ),
            Stage::MapMatch => (
                [
                    vec![self.upstream(NETWORK_FILE, Stage::NetworkPrepare)?],
                    opt(&c.taxi_traces),
                    opt(&c.taxi_trajectories),
                ]
                .concat(),
                json!({
                    "candidates": c.matcher_candidates,
                    "max_snap_m": c.matcher_max_snap_m,
                    "emission_weight": c.matcher_emission_weight,
                    "transition_weight": c.matcher_transition_weight,
                    "collapse_backtracks": c.matcher_collapse_backtracks,
                    "pre_matched": c.taxi_trajectories.is_some(),
                }),
            ),
            Stage::BusSynth => (
                [opt(&c.bus_demand), opt(&c.bus_trips), opt(&c.bus_stops), opt(&c.bus_durations)].concat(),
                json!({
                    "rng_seed": c.rng_seed,
                    "day_type": c.day_type,
                    "day_start": c.day_start,
                    "month_days": [c.month_weekdays, c.month_weekend_days],
                    "duration": [c.duration_mean_s, c.duration_sigma],
                    "departures": [c.departure_alpha, c.departure_n_star, c.departure_b0],
                    "given_trips": c.bus_trips.is_some(),
                }),
            ),
            Stage::Match => (
                [
                    vec![
                        self.upstream(NETWORK_FILE, Stage::NetworkPrepare)?,
                        self.upstream(TRAJECTORIES_FILE, Stage::MapMatch)?,
                        self.upstream(BUS_TRIPS_FILE, Stage::BusSynth)?,
                    ],
                    opt(&c.bus_stops),
                ]
                .concat(),
                json!({ "sweep": c.sweep(), "window": c.window() }),
            ),
            Stage::Report => {
                let mut inputs = vec![self.upstream(BUS_TRIPS_FILE, Stage::BusSynth)?];
                for (d, tb) in c.sweep() {
                    inputs.push(self.upstream(&assignment_file(d, tb), Stage::Match)?);
                }
                (inputs, json!({ "sweep": c.sweep(), "window": c.window(), "day_label": c.day_label }))
            }
        };
        Ok((inputs, params))
    }

    /// Runs one stage unless its recorded inputs, parameters and outputs
    /// are all unchanged and `force` is off.
    pub fn run(&mut self, stage: Stage) -> Result<StageReport, StageError> {
        let err = |source: anyhow::Error| StageError { stage, source };
        let (inputs, params) = self.plan(stage).map_err(err)?;
        let inputs = checksum_inputs(inputs.iter().map(PathBuf::as_path)).map_err(err)?;
        let params_hash = sha256_bytes(params.to_string().as_bytes());
        let dir = self.cfg.output_dir.clone();
        if !self.force && self.manifest.is_fresh(stage.name(), &params_hash, &inputs, &dir) {
            log::info!("{stage}: up to date");
            return Ok(StageReport { stage, skipped: true, summary: vec!["up to date".to_string()] });
        }

        let mut record = StageRecord {
            status: Status::Running,
            params_hash,
            inputs,
            outputs: BTreeMap::new(),
            elapsed_ms: 0,
        };
        self.manifest.stages.insert(stage.name().to_string(), record.clone());
        self.manifest.save(&dir).map_err(err)?;

        let started = Instant::now();
        let result = match stage {
            Stage::NetworkPrepare => self.network_prepare(),
            Stage::MapMatch => self.map_match(),
            Stage::BusSynth => self.bus_synth(),
            Stage::Match => self.match_sweep(),
            Stage::Report => self.report(),
        };
        record.elapsed_ms = started.elapsed().as_millis() as u64;
        let output = match result.and_then(|o| {
            for f in &o.files {
                record.outputs.insert(f.clone(), sha256_file(&dir.join(f))?);
            }
            Ok(o)
        }) {
            Ok(o) => {
                record.status = Status::Complete;
                o
            }
            Err(e) => {
                record.status = Status::Failed;
                self.manifest.status = Status::Failed;
                self.manifest.stages.insert(stage.name().to_string(), record);
                let _ = self.manifest.save(&dir);
                return Err(err(e));
            }
        };
        self.manifest.stages.insert(stage.name().to_string(), record);
        self.manifest.save(&dir).map_err(err)?;
        for line in &output.summary {
            log::info!("{stage}: {line}");
        }
        Ok(StageReport { stage, skipped: false, summary: output.summary })
    }

    /// All stages in order, then marks the manifest complete.
    pub fn run_all(&mut self) -> Result<Vec<StageReport>, StageError> {
        let mut reports = Vec::new();
        for stage in Stage::ALL {
            reports.push(self.run(stage)?);
        }
        Ok(reports)
    }

    /// Marks the run complete in the manifest.
    pub fn finish(&mut self) -> Result<()> {
        self.manifest.status = Status::Complete;
        self.manifest.save(&self.cfg.output_dir)
    }

    fn network_prepare(&self) -> Result<StageOutput> {
        let c = &self.cfg;
        let nodes = c.network_nodes.as_deref().expect("validated");
        let edges = c.network_edges.as_deref().expect("validated");
        let (mut raw, stats) = geo_network::load_network(nodes, edges, c.bbox())?;
        let mut summary = vec![format!("input: {} nodes and {} edges", raw.nodes().len(), raw.edges().len())];
        if stats.nodes_outside_bbox > 0 {
            summary.push(format!("outside bbox: {} nodes dropped", stats.nodes_outside_bbox));
        }
        if let Some(bl) = &c.network_blacklist {
            let list = geo_network::load_blacklist(bl)?;
            let removed = raw.remove_edges(&list);
            summary.push(format!("blacklist: {removed} edges removed"));
        }
        let clustered = geo_network::cluster_fof(&raw, c.cluster_radius_m)?;
        summary.push(format!(
            "clustered at {} m: {} nodes and {} edges",
            c.cluster_radius_m,
            clustered.len(),
            clustered.edges().len()
        ));
        let net = geo_network::largest_component(&clustered)?;
        summary.push(format!("largest component: {} nodes and {} edges", net.len(), net.edges().len()));
        write_atomic(&self.out(NETWORK_FILE), |w| Ok(geo_network::write_road_network(&net, w)?))?;
        Ok(StageOutput { files: vec![NETWORK_FILE.to_string()], summary })
    }

    fn map_match(&self) -> Result<StageOutput> {
        let c = &self.cfg;
        let net = load_network_artifact(&self.out(NETWORK_FILE))?;
        let (trajectories, rejected) = if let Some(path) = &c.taxi_traces {
            let (traces, mut rejected) = map_match::read_gps_traces(open(path)?, &path.display().to_string())?;
            let outcome = map_match::match_traces(&net, &traces, &c.matcher());
            rejected.extend(outcome.rejected);
            rejected.sort_by(|a, b| a.0.cmp(&b.0));
            (outcome.trajectories, rejected)
        } else {
            let path = c.taxi_trajectories.as_ref().expect("validated");
            let mut t = map_match::read_trajectories(open(path)?, &path.display().to_string())?;
            if let Some(bad) = t.iter().find(|t| t.nodes().any(|n| n.index() >= net.len())) {
                return Err(anyhow!("trajectory {} references a node outside the network", bad.trip_id()));
            }
            t.sort_by(|a, b| a.trip_id().cmp(b.trip_id()));
            (t, Vec::new())
        };
        write_atomic(&self.out(TRAJECTORIES_FILE), |w| Ok(map_match::write_trajectories(w, &trajectories)?))?;
        write_atomic(&self.out(MAP_MATCH_REJECTS_FILE), |w| Ok(map_match::write_rejects(w, &rejected)?))?;
        let points: usize = trajectories.iter().map(TaxiTrajectory::len).sum();
        Ok(StageOutput {
            files: vec![TRAJECTORIES_FILE.to_string(), MAP_MATCH_REJECTS_FILE.to_string()],
            summary: vec![format!(
                "{} trajectories ({points} node visits), {} rejected",
                trajectories.len(),
                rejected.len()
            )],
        })
    }

    fn bus_synth(&self) -> Result<StageOutput> {
        let c = &self.cfg;
        let trips = if let Some(path) = &c.bus_trips {
            bus_synth::read_trips(open(path)?, &path.display().to_string())?
        } else {
            let path = c.bus_demand.as_ref().expect("validated");
            let demand = bus_synth::read_demand(open(path)?, &path.display().to_string(), c.month_days())?;
            let stops = read_stops(c)?;
            let durations = match &c.bus_durations {
                Some(p) => DurationModel::Fixed(bus_synth::read_duration_table(open(p)?, &p.display().to_string())?),
                None => DurationModel::LogNormal { mean_s: c.duration_mean_s, sigma: c.duration_sigma },
            };
            bus_synth::generate_trips(
                &demand,
                &stops,
                &durations,
                &c.departure_model(),
                c.day_type,
                c.day_start,
                c.rng_seed,
            )?
        };
        write_atomic(&self.out(BUS_TRIPS_FILE), |w| Ok(bus_synth::write_trips(w, &trips)?))?;
        Ok(StageOutput {
            files: vec![BUS_TRIPS_FILE.to_string()],
            summary: vec![format!("{} bus trips ({} {})", trips.len(), c.day_label, c.day_type)],
        })
    }

    fn match_sweep(&self) -> Result<StageOutput> {
        let c = &self.cfg;
        let net = load_network_artifact(&self.out(NETWORK_FILE))?;
        let trajectories = read_trajectories_artifact(&self.out(TRAJECTORIES_FILE))?;
        let trips = read_trips_artifact(&self.out(BUS_TRIPS_FILE))?;
        let stops = read_stops(c)?;
        let window = c.window();
        let start_hour: HashMap<&str, i64> =
            trips.iter().map(|t| (t.trip_id.as_str(), window.hour_of(t.t_start))).collect();

        let mut files = Vec::new();
        let mut summary = Vec::new();
        for (d, tb) in c.sweep() {
            let cfg = MatchConfig::new(d, tb, window)?;
            let day = match_engine::run_day(&net, &trajectories, &trips, &stops, &cfg);
            let cand = candidates_file(d, tb);
            let assign = assignment_file(d, tb);
            write_atomic(&self.out(&cand), |w| Ok(match_engine::write_candidates(w, &day.candidates)?))?;
            write_atomic(&self.out(&assign), |w| {
                Ok(match_engine::write_assignment(w, &day.assignment, |id| start_hour[id])?)
            })?;
            summary.push(format!(
                "d={} m, t_B={} s: {} resolved, {} rejected, {} candidates, {} matched",
                tag(d),
                tag(tb),
                day.resolved,
                day.rejected.len(),
                day.candidates.len(),
                day.assignment.len()
            ));
            files.push(cand);
            files.push(assign);
        }
        Ok(StageOutput { files, summary })
    }

    fn report(&self) -> Result<StageOutput> {
        let c = &self.cfg;
        let trips = read_trips_artifact(&self.out(BUS_TRIPS_FILE))?;
        let window = c.window();
        let mut cells = Vec::new();
        for (d, tb) in c.sweep() {
            let path = self.out(&assignment_file(d, tb));
            let rows = match_engine::read_assignment(open(&path)?, &path.display().to_string())?;
            let pairs: Vec<MatchedPair> = rows
                .into_iter()
                .map(|r| MatchedPair { bus_id: r.bus_id, taxi_id: r.taxi_id, tau: r.tau_s })
                .collect();
            let stats = report::hourly_stats(&pairs, &trips, &window)
                .with_context(|| format!("aggregating {}", path.display()))?;
            cells.push(SweepCell { day: c.day_label.clone(), d_m: d, tb_s: tb, stats });
        }
        let results = SweepResult::new(cells)?;
        write_atomic(&self.out(STATS_FILE), |w| Ok(report::write_csv(&results, w)?))?;
        let mut files = vec![STATS_FILE.to_string()];
        for tb in results.tb_values() {
            for metric in [Metric::Pct, Metric::AvgTime] {
                let svg = report::render_plot(&results, &c.day_label, tb, metric)?;
                let rel = plot_file(metric, &c.day_label, tb);
                write_atomic(&self.out(&rel), |w| Ok(std::io::Write::write_all(w, svg.as_bytes())?))?;
                files.push(rel);
            }
        }
        let summary = results
            .cells()
            .iter()
            .map(|cell| {
                let n_bus: usize = cell.stats.iter().map(|s| s.n_bus).sum();
                let n_matched: usize = cell.stats.iter().map(|s| s.n_matched).sum();
                let pct = if n_bus == 0 { 0.0 } else { 100.0 * n_matched as f64 / n_bus as f64 };
                format!(
                    "d={} m, t_B={} s: {n_matched}/{n_bus} in-window bus trips matched ({pct:.1}%)",
                    tag(cell.d_m),
                    tag(cell.tb_s)
                )
            })
            .collect();
        Ok(StageOutput { files, summary })
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

fn read_stops(c: &PipelineConfig) -> Result<Vec<BusStop>> {
    let path = c.bus_stops.as_ref().expect("validated");
    Ok(bus_synth::read_stops(open(path)?, &path.display().to_string())?)
}

pub fn load_network_artifact(path: &Path) -> Result<RoadNetwork> {
    geo_network::read_road_network(open(path)?).with_context(|| format!("reading {}", path.display()))
}

pub fn read_trajectories_artifact(path: &Path) -> Result<Vec<TaxiTrajectory>> {
    Ok(map_match::read_trajectories(open(path)?, &path.display().to_string())?)
}

pub fn read_trips_artifact(path: &Path) -> Result<Vec<BusTripRecord>> {
    Ok(bus_synth::read_trips(open(path)?, &path.display().to_string())?)
}
