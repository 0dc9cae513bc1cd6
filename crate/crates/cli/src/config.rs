//! Flat TOML pipeline configuration with `BUSSHARE_<KEY>` overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use busshare_core::bus_synth::{DayType, DepartureModel, DurationModel, MonthDays};
use busshare_core::geo_network::{BBox, DEFAULT_CLUSTER_RADIUS_M};
use busshare_core::map_match::MatcherConfig;
use busshare_core::match_engine::ServiceWindow;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const ENV_PREFIX: &str = "BUSSHARE_";

const OPTIONAL_KEYS: [&str; 11] = [
    "network_nodes",
    "network_edges",
    "network_blacklist",
    "taxi_traces",
    "taxi_trajectories",
    "bus_demand",
    "bus_trips",
    "bus_stops",
    "bus_durations",
    "output_dir",
    "bbox",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub network_nodes: Option<PathBuf>,
    pub network_edges: Option<PathBuf>,
    pub network_blacklist: Option<PathBuf>,
    /// `[min_lat, min_lon, max_lat, max_lon]`.
    pub bbox: Option<[f64; 4]>,
    pub taxi_traces: Option<PathBuf>,
    pub taxi_trajectories: Option<PathBuf>,
    pub bus_demand: Option<PathBuf>,
    pub bus_trips: Option<PathBuf>,
    pub bus_stops: Option<PathBuf>,
    pub bus_durations: Option<PathBuf>,
    pub output_dir: PathBuf,

    pub cluster_radius_m: f64,
    pub sweep_d_m: Vec<f64>,
    pub sweep_tb_s: Vec<f64>,
    pub rng_seed: u64,

    /// Demand day type used for the simulated day.
    pub day_type: DayType,
    /// Name of the simulated day in reports.
    pub day_label: String,
    /// Unix time of the simulated day's local midnight.
    pub day_start: f64,
    pub month_weekdays: u32,
    pub month_weekend_days: u32,
    pub service_start_hour: u32,
    pub service_end_hour: u32,

    pub duration_mean_s: f64,
    pub duration_sigma: f64,
    pub departure_alpha: f64,
    pub departure_n_star: f64,
    pub departure_b0: f64,

    pub matcher_candidates: usize,
    pub matcher_max_snap_m: f64,
    pub matcher_emission_weight: f64,
    pub matcher_transition_weight: f64,
    pub matcher_collapse_backtracks: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let days = MonthDays::default();
        let window = ServiceWindow::default();
        let departures = DepartureModel::default();
        let matcher = MatcherConfig::default();
        let DurationModel::LogNormal { mean_s, sigma } = DurationModel::default() else {
            unreachable!("default duration model is lognormal")
        };
        PipelineConfig {
            network_nodes: None,
            network_edges: None,
            network_blacklist: None,
            bbox: None,
            taxi_traces: None,
            taxi_trajectories: None,
            bus_demand: None,
            bus_trips: None,
            bus_stops: None,
            bus_durations: None,
            output_dir: PathBuf::from("out"),
            cluster_radius_m: DEFAULT_CLUSTER_RADIUS_M,
            sweep_d_m: vec![0.0, 100.0, 200.0],
            sweep_tb_s: vec![60.0, 300.0],
            rng_seed: 0,
            day_type: DayType::Weekday,
            day_label: "weekday".to_string(),
            day_start: 0.0,
            month_weekdays: days.weekdays,
            month_weekend_days: days.weekend_days,
            service_start_hour: window.start_hour,
            service_end_hour: window.end_hour,
            duration_mean_s: mean_s,
            duration_sigma: sigma,
            departure_alpha: departures.alpha,
            departure_n_star: departures.n_star,
            departure_b0: departures.b0,
            matcher_candidates: matcher.candidates,
            matcher_max_snap_m: matcher.max_snap_m,
            matcher_emission_weight: matcher.emission_weight,
            matcher_transition_weight: matcher.transition_weight,
            matcher_collapse_backtracks: matcher.collapse_backtracks,
        }
    }
}

/// Parses an override value as TOML, falling back to a bare string.
fn env_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

impl PipelineConfig {
    /// Reads `path`, applies overrides from `env`, and resolves relative
    /// paths against the config file's directory.
    pub fn load(path: &Path, env: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let base = std::fs::canonicalize(path)?.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base, env).with_context(|| format!("config {}", path.display()))
    }

    pub fn parse(text: &str, base: &Path, env: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        let mut table: toml::Table = text.parse()?;
        let known = toml::Table::try_from(PipelineConfig::default())?;
        for (k, v) in env {
            let Some(key) = k.strip_prefix(ENV_PREFIX) else { continue };
            let key = key.to_ascii_lowercase();
            if known.contains_key(&key) || OPTIONAL_KEYS.contains(&key.as_str()) {
                log::debug!("override {key} from {k}");
                table.insert(key, env_value(&v));
            }
        }
        let mut cfg: PipelineConfig = table.try_into()?;
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [
            &mut self.network_nodes,
            &mut self.network_edges,
            &mut self.network_blacklist,
            &mut self.taxi_traces,
            &mut self.taxi_trajectories,
            &mut self.bus_demand,
            &mut self.bus_trips,
            &mut self.bus_stops,
            &mut self.bus_durations,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        fix(&mut self.output_dir);
    }

    pub fn validate(&self) -> Result<()> {
        let required = [
            ("network_nodes", &self.network_nodes),
            ("network_edges", &self.network_edges),
            ("bus_stops", &self.bus_stops),
        ];
        for (key, p) in required {
            ensure!(p.is_some(), "`{key}` is required");
        }
        match (&self.taxi_traces, &self.taxi_trajectories) {
            (Some(_), None) | (None, Some(_)) => {}
            _ => bail!("exactly one of `taxi_traces` and `taxi_trajectories` must be set"),
        }
        match (&self.bus_demand, &self.bus_trips) {
            (Some(_), None) | (None, Some(_)) => {}
            _ => bail!("exactly one of `bus_demand` and `bus_trips` must be set"),
        }
        for p in self.input_files() {
            ensure!(p.is_file(), "input file {} does not exist", p.display());
        }

        ensure!(
            self.cluster_radius_m.is_finite() && self.cluster_radius_m > 0.0,
            "`cluster_radius_m` must be positive"
        );
        ensure!(!self.sweep_d_m.is_empty(), "`sweep_d_m` is empty");
        ensure!(!self.sweep_tb_s.is_empty(), "`sweep_tb_s` is empty");
        for &d in &self.sweep_d_m {
            ensure!(d.is_finite() && d >= 0.0, "`sweep_d_m` value {d} must be >= 0");
        }
        for &t in &self.sweep_tb_s {
            ensure!(t.is_finite() && t > 0.0, "`sweep_tb_s` value {t} must be > 0");
        }
        ensure!(!has_duplicates(&self.sweep_d_m), "`sweep_d_m` has duplicate values");
        ensure!(!has_duplicates(&self.sweep_tb_s), "`sweep_tb_s` has duplicate values");
        if let Some(b) = self.bbox {
            ensure!(b[0] <= b[2] && b[1] <= b[3], "`bbox` must be [min_lat, min_lon, max_lat, max_lon]");
        }

        ensure!(
            !self.day_label.is_empty() && self.day_label.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_'),
            "`day_label` must be non-empty and use only letters, digits, `-` or `_`"
        );
        ensure!(self.day_start.is_finite(), "`day_start` must be finite");
        ensure!(self.month_weekdays > 0 && self.month_weekend_days > 0, "month day counts must be positive");
        ensure!(
            self.service_start_hour < self.service_end_hour && self.service_end_hour <= 24,
            "service window {}..{} is invalid",
            self.service_start_hour,
            self.service_end_hour
        );
        ensure!(
            self.duration_mean_s.is_finite() && self.duration_mean_s > 0.0,
            "`duration_mean_s` must be positive"
        );
        ensure!(
            self.duration_sigma.is_finite() && self.duration_sigma >= 0.0,
            "`duration_sigma` must be >= 0"
        );
        ensure!(
            self.departure_alpha > 0.0 && self.departure_n_star > 0.0 && self.departure_b0 > 0.0,
            "departure model parameters must be positive"
        );
        ensure!(self.matcher_candidates > 0, "`matcher_candidates` must be positive");
        ensure!(self.matcher_max_snap_m > 0.0, "`matcher_max_snap_m` must be positive");
        ensure!(
            self.matcher_emission_weight >= 0.0 && self.matcher_transition_weight >= 0.0,
            "matcher weights must be >= 0"
        );
        Ok(())
    }

    /// Every input file named by the config.
    pub fn input_files(&self) -> Vec<&Path> {
        [
            &self.network_nodes,
            &self.network_edges,
            &self.network_blacklist,
            &self.taxi_traces,
            &self.taxi_trajectories,
            &self.bus_demand,
            &self.bus_trips,
            &self.bus_stops,
            &self.bus_durations,
        ]
        .into_iter()
        .flatten()
        .map(PathBuf::as_path)
        .collect()
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }

    pub fn bbox(&self) -> Option<BBox> {
        self.bbox.map(|[min_lat, min_lon, max_lat, max_lon]| BBox { min_lat, min_lon, max_lat, max_lon })
    }

    pub fn month_days(&self) -> MonthDays {
        MonthDays { weekdays: self.month_weekdays, weekend_days: self.month_weekend_days }
    }

    pub fn window(&self) -> ServiceWindow {
        ServiceWindow { day_start: self.day_start, start_hour: self.service_start_hour, end_hour: self.service_end_hour }
    }

    pub fn departure_model(&self) -> DepartureModel {
        DepartureModel { alpha: self.departure_alpha, n_star: self.departure_n_star, b0: self.departure_b0 }
    }

    pub fn matcher(&self) -> MatcherConfig {
        MatcherConfig {
            candidates: self.matcher_candidates,
            max_snap_m: self.matcher_max_snap_m,
            emission_weight: self.matcher_emission_weight,
            transition_weight: self.matcher_transition_weight,
            collapse_backtracks: self.matcher_collapse_backtracks,
        }
    }

    /// Sweep cells in `(d, t_B)` order.
    pub fn sweep(&self) -> Vec<(f64, f64)> {
        let mut d = self.sweep_d_m.clone();
        let mut tb = self.sweep_tb_s.clone();
        d.sort_by(f64::total_cmp);
        tb.sort_by(f64::total_cmp);
        d.iter().flat_map(|&d| tb.iter().map(move |&t| (d, t))).collect()
    }
}

fn has_duplicates(v: &[f64]) -> bool {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s.windows(2).any(|w| w[0] == w[1])
}
