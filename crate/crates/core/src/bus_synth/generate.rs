use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, LogNormal, Poisson};
use rayon::prelude::*;

use super::{derive_seed, AggregateBusDemand, BusStop, BusSynthError, BusTripRecord, DayType};

pub const HOUR_S: f64 = 3600.0;

/// Passengers-to-departures relation: `N^alpha` below `n_star`, linear with
/// slope `1 / b0` above it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepartureModel {
    pub alpha: f64,
    pub n_star: f64,
    pub b0: f64,
}

impl Default for DepartureModel {
    fn default() -> Self {
        DepartureModel { alpha: 0.7, n_star: 200.0, b0: 40.0 }
    }
}

impl DepartureModel {
    pub fn b_star(&self) -> f64 {
        self.n_star.powf(self.alpha)
    }
}

/// Expected departures in one stop-hour with `n` boarding passengers.
pub fn expected_departures(n: f64, model: &DepartureModel) -> Result<f64, BusSynthError> {
    if !n.is_finite() || n < 0.0 {
        return Err(BusSynthError::InvalidCount(n));
    }
    Ok(if n < model.n_star {
        n.powf(model.alpha)
    } else {
        model.b_star() + (n - model.n_star) / model.b0
    })
}

/// Poisson draw with rate `monthly_count / days` for every (origin, dest,
/// hour) cell of `day`. Records with the same key are summed first. Each
/// cell has its own random stream, so the result does not depend on record
/// order or thread count.
pub fn sample_daily_counts(
    demand: &AggregateBusDemand,
    day: DayType,
    seed: u64,
) -> BTreeMap<(String, String, u32), u64> {
    let days = demand.days().of(day) as f64;
    let mut monthly: BTreeMap<(String, String, u32), u64> = BTreeMap::new();
    for r in demand.records().iter().filter(|r| r.day_type == day) {
        *monthly.entry((r.origin_stop.clone(), r.dest_stop.clone(), r.hour)).or_default() += r.monthly_count;
    }
    monthly
        .into_par_iter()
        .map(|(key, m)| {
            let mut rng = ChaCha8Rng::from_seed(derive_seed(
                seed,
                &["count", day.as_str(), &key.0, &key.1, &key.2.to_string()],
            ));
            let count = poisson(m as f64 / days, &mut rng);
            (key, count)
        })
        .collect()
}

fn poisson<R: Rng>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive finite mean").sample(rng) as u64
}

/// Poisson draw conditioned on being positive, by rejection.
fn positive_poisson<R: Rng>(mean: f64, rng: &mut R) -> u64 {
    let dist = Poisson::new(mean.max(f64::MIN_POSITIVE)).expect("positive finite mean");
    loop {
        let k = dist.sample(rng) as u64;
        if k > 0 {
            return k;
        }
    }
}

/// `n` sorted departure times in `[hour_start, hour_start + 3600)`.
///
/// `n + 1` exponential gaps are scaled to sum to one hour; departures sit at
/// the cumulative sums of the first `n` gaps.
pub fn generate_departure_times<R: Rng>(n: usize, hour_start: f64, rng: &mut R) -> Vec<f64> {
    let gaps: Vec<f64> = (0..=n).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = gaps.iter().sum();
    let end = hour_start + HOUR_S;
    let mut cum = 0.0;
    gaps[..n]
        .iter()
        .map(|g| {
            cum += g;
            let t = hour_start + HOUR_S * (cum / total);
            if t < end {
                t
            } else {
                end.next_down()
            }
        })
        .collect()
}

/// Bus trip durations in seconds.
#[derive(Debug, Clone, PartialEq)]
pub enum DurationModel {
    /// Fixed duration per (origin, destination).
    Fixed(HashMap<(String, String), f64>),
    /// Lognormal with the given mean and log-space standard deviation.
    LogNormal { mean_s: f64, sigma: f64 },
}

impl Default for DurationModel {
    fn default() -> Self {
        DurationModel::LogNormal { mean_s: 600.0, sigma: 0.5 }
    }
}

impl DurationModel {
    fn validate(&self) -> Result<(), BusSynthError> {
        let bad = |m: String| Err(BusSynthError::InvalidDurationModel(m));
        match self {
            DurationModel::Fixed(table) => {
                if let Some(((o, d), v)) = table.iter().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
                    return bad(format!("duration {v} for {o}->{d} is not positive"));
                }
            }
            DurationModel::LogNormal { mean_s, sigma } => {
                if !(mean_s.is_finite() && *mean_s > 0.0) {
                    return bad(format!("mean {mean_s} is not positive"));
                }
                if !(sigma.is_finite() && *sigma >= 0.0) {
                    return bad(format!("sigma {sigma} is negative"));
                }
            }
        }
        Ok(())
    }

    fn sampler(&self) -> Option<LogNormal<f64>> {
        match self {
            DurationModel::LogNormal { mean_s, sigma } => {
                Some(LogNormal::new(mean_s.ln() - sigma * sigma / 2.0, *sigma).expect("validated"))
            }
            DurationModel::Fixed(_) => None,
        }
    }
}

/// Generates one day of individual trips.
///
/// Trip times are `day_start + hour * 3600 + offset`. Output is sorted by
/// start time and numbered `bus-000000`, `bus-000001`, ... in that order.
pub fn generate_trips(
    demand: &AggregateBusDemand,
    stops: &[BusStop],
    durations: &DurationModel,
    departures: &DepartureModel,
    day: DayType,
    day_start: f64,
    seed: u64,
) -> Result<Vec<BusTripRecord>, BusSynthError> {
    durations.validate()?;
    let known: HashSet<&str> = stops.iter().map(|s| s.stop_id.as_str()).collect();
    let unknown: BTreeSet<&str> = demand
        .records()
        .iter()
        .flat_map(|r| [r.origin_stop.as_str(), r.dest_stop.as_str()])
        .filter(|s| !known.contains(s))
        .collect();
    if !unknown.is_empty() {
        return Err(BusSynthError::UnknownStops(unknown.into_iter().map(String::from).collect()));
    }
    if let DurationModel::Fixed(table) = durations {
        let missing: BTreeSet<(String, String)> = demand
            .records()
            .iter()
            .filter(|r| r.day_type == day && r.monthly_count > 0)
            .map(|r| (r.origin_stop.clone(), r.dest_stop.clone()))
            .filter(|k| !table.contains_key(k))
            .collect();
        if !missing.is_empty() {
            return Err(BusSynthError::MissingDuration(missing.into_iter().collect()));
        }
    }

    // (origin, hour) -> [(dest, passengers)], dests in sorted order
    let mut cells: BTreeMap<(String, u32), Vec<(String, u64)>> = BTreeMap::new();
    for ((o, d, h), n) in sample_daily_counts(demand, day, seed) {
        if n > 0 {
            cells.entry((o, h)).or_default().push((d, n));
        }
    }

    let lognormal = durations.sampler();
    let mut trips: Vec<BusTripRecord> = cells
        .into_par_iter()
        .map(|((origin, hour), dests)| {
            let mut rng =
                ChaCha8Rng::from_seed(derive_seed(seed, &["departures", day.as_str(), &origin, &hour.to_string()]));
            let boarding: u64 = dests.iter().map(|(_, n)| n).sum();
            let b = expected_departures(boarding as f64, departures).expect("count is non-negative");
            let n_dep = positive_poisson(b, &mut rng) as usize;
            let times = generate_departure_times(n_dep, day_start + hour as f64 * HOUR_S, &mut rng);
            let mut out = Vec::with_capacity(boarding as usize);
            for (dest, n) in dests {
                for _ in 0..n {
                    let t_start = times[rng.random_range(0..n_dep)];
                    let dur = match (durations, &lognormal) {
                        (DurationModel::Fixed(table), _) => table[&(origin.clone(), dest.clone())],
                        (_, Some(ln)) => ln.sample(&mut rng),
                        _ => unreachable!(),
                    };
                    out.push(BusTripRecord {
                        trip_id: String::new(),
                        origin_stop: origin.clone(),
                        dest_stop: dest.clone(),
                        t_start,
                        t_end: t_start + dur,
                    });
                }
            }
            out
        })
        .flatten()
        .collect();

    trips.sort_by(|a, b| {
        a.t_start
            .total_cmp(&b.t_start)
            .then_with(|| a.origin_stop.cmp(&b.origin_stop))
            .then_with(|| a.dest_stop.cmp(&b.dest_stop))
            .then_with(|| a.t_end.total_cmp(&b.t_end))
    });
    for (i, t) in trips.iter_mut().enumerate() {
        t.trip_id = format!("bus-{i:06}");
    }
    Ok(trips)
}
