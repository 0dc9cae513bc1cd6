use rayon::prelude::*;

use super::{GpsTrace, MapMatchError, TaxiTrajectory, TrajectoryPoint};
use crate::geo_network::{haversine_m, ClusterId, LatLon, RoadNetwork, EARTH_RADIUS_M};

#[derive(Debug, Clone, PartialEq)]
pub struct MatcherConfig {
    /// Candidate clusters considered per fix.
    pub candidates: usize,
    /// Fixes farther than this from every cluster reject the trip.
    pub max_snap_m: f64,
    /// Cost per meter between a fix and its snapped cluster.
    pub emission_weight: f64,
    /// Cost per meter of disagreement between the network hop length
    /// (hops times mean edge length) and the straight-line fix distance.
    pub transition_weight: f64,
    /// Remove `a, b, a` detours from the joined walk.
    pub collapse_backtracks: bool,
}

impl Default for MatcherConfig {
    fn default() -> Self {
        MatcherConfig {
            candidates: 4,
            max_snap_m: 200.0,
            emission_weight: 1.0,
            transition_weight: 0.3,
            collapse_backtracks: true,
        }
    }
}

/// Result of matching a batch: accepted trajectories and rejected trips,
/// both sorted by trip id.
#[derive(Debug, Clone, Default)]
pub struct MatchOutcome {
    pub trajectories: Vec<TaxiTrajectory>,
    pub rejected: Vec<(String, MapMatchError)>,
}

/// Matches one trace onto the network.
///
/// Every fix is snapped to one of its nearest clusters. The snapping
/// sequence minimizing emission plus transition cost is found by dynamic
/// programming; consecutive snaps are joined by unweighted shortest paths
/// and node times are interpolated along the resulting walk.
pub fn match_trace(
    net: &RoadNetwork,
    trace: &GpsTrace,
    cfg: &MatcherConfig,
) -> Result<TaxiTrajectory, MapMatchError> {
    let fixes = trace.fixes();
    let layers: Vec<Vec<(ClusterId, f64)>> = fixes
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let c = net.nearest_within(f.pos, cfg.candidates.max(1), cfg.max_snap_m);
            if c.is_empty() {
                Err(MapMatchError::NoCandidate(i))
            } else {
                Ok(c)
            }
        })
        .collect::<Result<_, _>>()?;

    let edge_m = net.mean_edge_m();
    let mut cost: Vec<f64> = layers[0].iter().map(|(_, d)| cfg.emission_weight * d).collect();
    let mut back: Vec<Vec<usize>> = Vec::with_capacity(fixes.len());
    back.push(vec![0; layers[0].len()]);
    for i in 1..fixes.len() {
        let straight = haversine_m(fixes[i - 1].pos, fixes[i].pos);
        let targets: Vec<ClusterId> = layers[i].iter().map(|(c, _)| *c).collect();
        let mut next = vec![f64::INFINITY; targets.len()];
        let mut ptr = vec![usize::MAX; targets.len()];
        for (a, &(from, _)) in layers[i - 1].iter().enumerate() {
            if !cost[a].is_finite() {
                continue;
            }
            let hops = net.hop_distances(from, &targets);
            for (b, h) in hops.iter().enumerate() {
                let Some(h) = h else { continue };
                let penalty = cfg.transition_weight * (*h as f64 * edge_m - straight).abs();
                let c = cost[a] + penalty + cfg.emission_weight * layers[i][b].1;
                // strict `<` keeps the lowest-ranked predecessor on ties
                if c < next[b] {
                    next[b] = c;
                    ptr[b] = a;
                }
            }
        }
        if next.iter().all(|c| !c.is_finite()) {
            return Err(MapMatchError::NoPath(i));
        }
        cost = next;
        back.push(ptr);
    }

    let mut best = 0;
    for (b, c) in cost.iter().enumerate() {
        if *c < cost[best] {
            best = b;
        }
    }
    let mut chosen = vec![ClusterId(0); fixes.len()];
    for i in (0..fixes.len()).rev() {
        chosen[i] = layers[i][best].0;
        best = back[i][best];
    }

    let mut path = vec![chosen[0]];
    let mut anchors = vec![(0usize, fixes[0].t)];
    for i in 1..fixes.len() {
        let last = *path.last().unwrap();
        if chosen[i] != last {
            let (a, b) = (fixes[i - 1].pos, fixes[i].pos);
            let leg = net
                .shortest_path_by(last, chosen[i], |c| segment_distance_m(net.centroid(c), a, b))
                .ok_or(MapMatchError::NoPath(i))?;
            path.extend_from_slice(&leg[1..]);
        }
        anchors.push((path.len() - 1, fixes[i].t));
    }
    if cfg.collapse_backtracks {
        collapse_backtracks(&mut path, &mut anchors);
    }
    if path.len() < 2 {
        return Err(MapMatchError::SingleNode);
    }
    interpolate_timestamps(net, trace.trip_id(), &path, &anchors)
}

/// Repeatedly replaces `a, b, a` by `a`. Anchors on the removed nodes move
/// to the kept `a`.
fn collapse_backtracks(path: &mut Vec<ClusterId>, anchors: &mut [(usize, f64)]) {
    let mut i = 0;
    while i + 2 < path.len() {
        if path[i] != path[i + 2] {
            i += 1;
            continue;
        }
        path.drain(i + 1..i + 3);
        for a in anchors.iter_mut() {
            if a.0 > i + 2 {
                a.0 -= 2;
            } else if a.0 > i {
                a.0 = i;
            }
        }
        i = i.saturating_sub(1);
    }
}

/// Distance from `p` to segment `ab` in a local equirectangular plane.
fn segment_distance_m(p: LatLon, a: LatLon, b: LatLon) -> f64 {
    let k = EARTH_RADIUS_M.to_radians();
    let cos = a.lat.to_radians().cos();
    let xy = |q: LatLon| ((q.lon - a.lon) * k * cos, (q.lat - a.lat) * k);
    let (px, py) = xy(p);
    let (bx, by) = xy(b);
    let len2 = bx * bx + by * by;
    let t = if len2 > 0.0 { ((px * bx + py * by) / len2).clamp(0.0, 1.0) } else { 0.0 };
    ((px - t * bx).powi(2) + (py - t * by).powi(2)).sqrt()
}

/// Assigns a time to every node of `path` from anchor `(path_index, t)`
/// pairs listed in fix order.
///
/// Anchored nodes take their first anchor time, except the final node which
/// takes the last one, so the trajectory spans the whole trace. Nodes between
/// two anchors are placed linearly in cumulative centroid distance; when that
/// distance is zero the time gap is split evenly by position.
pub fn interpolate_timestamps(
    net: &RoadNetwork,
    trip_id: &str,
    path: &[ClusterId],
    anchors: &[(usize, f64)],
) -> Result<TaxiTrajectory, MapMatchError> {
    let bad = |m: &str| MapMatchError::InvalidAnchors(m.to_string());
    let (first, last) = match (anchors.first(), anchors.last()) {
        (Some(f), Some(l)) => (*f, *l),
        _ => return Err(bad("no anchors")),
    };
    if path.is_empty() || first.0 != 0 || last.0 != path.len() - 1 {
        return Err(bad("path endpoints must be anchored"));
    }
    for w in anchors.windows(2) {
        if w[1].0 < w[0].0 || w[1].1 < w[0].1 {
            return Err(bad("anchors must be non-decreasing in position and time"));
        }
    }

    // first and last anchor time per anchored position
    let mut spans: Vec<(usize, f64, f64)> = Vec::new();
    for &(p, t) in anchors {
        match spans.last_mut() {
            Some(s) if s.0 == p => s.2 = t,
            _ => spans.push((p, t, t)),
        }
    }

    let mut times = vec![0.0; path.len()];
    for w in spans.windows(2) {
        let (p, _, t_from) = w[0];
        let (q, t_to, _) = w[1];
        let mut cum = Vec::with_capacity(q - p + 1);
        cum.push(0.0);
        for j in p + 1..=q {
            let step = haversine_m(net.centroid(path[j - 1]), net.centroid(path[j]));
            cum.push(cum.last().unwrap() + step);
        }
        let total = cum[q - p];
        for j in p + 1..q {
            let frac = if total > 0.0 {
                cum[j - p] / total
            } else {
                (j - p) as f64 / (q - p) as f64
            };
            times[j] = t_from + (t_to - t_from) * frac;
        }
    }
    for &(p, t_first, _) in &spans {
        times[p] = t_first;
    }
    *times.last_mut().unwrap() = last.1;

    let points = path
        .iter()
        .zip(times)
        .map(|(&node, t)| TrajectoryPoint { node, t })
        .collect();
    TaxiTrajectory::new(trip_id, points)
}

/// Matches traces in parallel. Output order depends only on trip ids.
pub fn match_traces(net: &RoadNetwork, traces: &[GpsTrace], cfg: &MatcherConfig) -> MatchOutcome {
    let results: Vec<(String, Result<TaxiTrajectory, MapMatchError>)> = traces
        .par_iter()
        .map(|t| (t.trip_id().to_string(), match_trace(net, t, cfg)))
        .collect();
    let mut out = MatchOutcome::default();
    for (id, r) in results {
        match r {
            Ok(traj) => out.trajectories.push(traj),
            Err(e) => {
                log::debug!("trip {id} rejected: {e}");
                out.rejected.push((id, e));
            }
        }
    }
    out.trajectories.sort_by(|a, b| a.trip_id().cmp(b.trip_id()));
    out.rejected.sort_by(|a, b| a.0.cmp(&b.0));
    out
}
