use std::collections::HashMap;
use std::f64::consts::PI;

use super::{haversine_m, LatLon, EARTH_RADIUS_M};

/// Default grid cell edge length for centroid indexes.
pub const DEFAULT_CELL_M: f64 = 250.0;

// Slack applied to the analytic cell-range bounds so rounding in the
// trigonometry never excludes a point the exact filter would accept.
const BOUND_SLACK: f64 = 1.0 + 1e-9;

/// Uniform lat/lon grid over a fixed point set.
///
/// Cells are roughly `cell_m` square at the data's mid latitude. Every query
/// filters candidates with [`haversine_m`], so results are identical to a
/// linear scan; the grid only bounds which points get tested. Networks
/// straddling the antimeridian are not supported.
#[derive(Debug, Clone)]
pub struct GridIndex {
    points: Vec<LatLon>,
    lat_step: f64,
    lon_step: f64,
    cells: HashMap<(i64, i64), Vec<u32>>,
}

impl GridIndex {
    pub fn build(points: Vec<LatLon>, cell_m: f64) -> Self {
        let lat_step = (cell_m / EARTH_RADIUS_M).to_degrees();
        let mid_lat = if points.is_empty() {
            0.0
        } else {
            let (lo, hi) = points
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.lat), hi.max(p.lat)));
            (lo + hi) / 2.0
        };
        let lon_step = lat_step / mid_lat.to_radians().cos().max(0.01);
        let mut cells: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            let key = (
                (p.lat / lat_step).floor() as i64,
                (p.lon / lon_step).floor() as i64,
            );
            cells.entry(key).or_default().push(i as u32);
        }
        GridIndex {
            points,
            lat_step,
            lon_step,
            cells,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: u32) -> LatLon {
        self.points[i as usize]
    }

    /// Indices of all points with `haversine_m(q, p) <= d`, ascending.
    pub fn within(&self, q: LatLon, d: f64) -> Vec<u32> {
        let mut out = Vec::new();
        self.visit_candidates(q, d, |i| {
            if haversine_m(q, self.points[i as usize]) <= d {
                out.push(i);
            }
        });
        out.sort_unstable();
        out
    }

    /// Closest point and its distance; ties resolve to the smallest index.
    pub fn nearest(&self, q: LatLon) -> Option<(u32, f64)> {
        if self.points.is_empty() {
            return None;
        }
        // Any hit within radius r contains the global nearest, so grow r
        // until the exact range query is non-empty.
        let mut r = self.lat_step.to_radians() * EARTH_RADIUS_M;
        loop {
            let hits = self.within(q, r);
            if !hits.is_empty() {
                return hits
                    .into_iter()
                    .map(|i| (i, haversine_m(q, self.points[i as usize])))
                    .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            }
            r *= 2.0;
            if r > PI * EARTH_RADIUS_M {
                r = f64::INFINITY;
            }
        }
    }

    fn visit_candidates(&self, q: LatLon, d: f64, mut f: impl FnMut(u32)) {
        let theta = d / EARTH_RADIUS_M;
        if !d.is_finite() || theta >= PI {
            self.cells.values().flatten().for_each(|&i| f(i));
            return;
        }
        let dlat = theta.to_degrees() * BOUND_SLACK + 1e-12;
        let lat_lo = q.lat - dlat;
        let lat_hi = q.lat + dlat;
        // cos(phi1) cos(phi2) sin^2(dlon/2) <= sin^2(theta/2) for any point in range
        let cos_min = if lat_lo <= -90.0 || lat_hi >= 90.0 {
            0.0
        } else {
            lat_lo.abs().max(lat_hi.abs()).to_radians().cos()
        };
        let ratio = (theta / 2.0).sin() / cos_min;
        let dlon = if cos_min <= 0.0 || ratio >= 1.0 {
            360.0
        } else {
            (2.0 * ratio.asin()).to_degrees() * BOUND_SLACK + 1e-12
        };

        let y0 = (lat_lo / self.lat_step).floor() as i64;
        let y1 = (lat_hi / self.lat_step).floor() as i64;
        let (x0, x1) = if dlon >= 180.0 {
            ((-180.0 / self.lon_step).floor() as i64, (180.0 / self.lon_step).floor() as i64)
        } else {
            (
                ((q.lon - dlon) / self.lon_step).floor() as i64,
                ((q.lon + dlon) / self.lon_step).floor() as i64,
            )
        };
        let span = (y1 - y0 + 1).saturating_mul(x1 - x0 + 1);
        if span as usize > self.cells.len() {
            for (&(y, x), members) in &self.cells {
                if (y0..=y1).contains(&y) && (x0..=x1).contains(&x) {
                    members.iter().for_each(|&i| f(i));
                }
            }
            return;
        }
        for y in y0..=y1 {
            for x in x0..=x1 {
                if let Some(members) = self.cells.get(&(y, x)) {
                    members.iter().for_each(|&i| f(i));
                }
            }
        }
    }
}
