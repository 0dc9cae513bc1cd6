//! Synthetic grid cities for tests and fixtures.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::geo_network::{ClusterId, ClusterNode, LatLon, RoadNetwork, EARTH_RADIUS_M};

/// A rectangular street grid anchored at its south-west corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCity {
    pub rows: u32,
    pub cols: u32,
    pub spacing_m: f64,
    pub origin: LatLon,
}

impl GridCity {
    pub fn new(rows: u32, cols: u32, spacing_m: f64, origin: LatLon) -> Self {
        GridCity { rows, cols, spacing_m, origin }
    }

    pub fn node(&self, row: u32, col: u32) -> ClusterId {
        ClusterId(row * self.cols + col)
    }

    pub fn row_col(&self, id: ClusterId) -> (u32, u32) {
        (id.0 / self.cols, id.0 % self.cols)
    }

    /// Point `north_m`, `east_m` away from the origin on a local plane.
    pub fn offset(&self, north_m: f64, east_m: f64) -> LatLon {
        let cos = self.origin.lat.to_radians().cos();
        LatLon {
            lat: self.origin.lat + (north_m / EARTH_RADIUS_M).to_degrees(),
            lon: self.origin.lon + (east_m / (EARTH_RADIUS_M * cos)).to_degrees(),
        }
    }

    pub fn position(&self, id: ClusterId) -> LatLon {
        let (r, c) = self.row_col(id);
        self.offset(r as f64 * self.spacing_m, c as f64 * self.spacing_m)
    }

    /// Grid edges as `(a, b)` with `a < b`.
    pub fn edges(&self) -> Vec<(ClusterId, ClusterId)> {
        let mut edges = Vec::new();
        for r in 0..self.rows {
            for c in 0..self.cols {
                if c + 1 < self.cols {
                    edges.push((self.node(r, c), self.node(r, c + 1)));
                }
                if r + 1 < self.rows {
                    edges.push((self.node(r, c), self.node(r + 1, c)));
                }
            }
        }
        edges
    }

    /// One cluster per intersection, cluster id `row * cols + col`.
    pub fn road_network(&self, cluster_radius_m: f64) -> RoadNetwork {
        let clusters = (0..self.rows * self.cols)
            .map(|i| ClusterNode {
                cluster_id: ClusterId(i),
                centroid: self.position(ClusterId(i)),
                member_ids: vec![i.to_string()],
            })
            .collect();
        RoadNetwork::from_parts(clusters, self.edges(), cluster_radius_m)
            .expect("grid ids are dense")
    }

    /// Random monotone staircase between two intersections at least
    /// `min_hops` apart.
    pub fn random_staircase<R: Rng>(&self, rng: &mut R, min_hops: u32) -> Vec<ClusterId> {
        assert!(min_hops <= self.rows + self.cols - 2, "grid too small for {min_hops} hops");
        loop {
            let (r0, c0) = (rng.random_range(0..self.rows) as i64, rng.random_range(0..self.cols) as i64);
            let (r1, c1) = (rng.random_range(0..self.rows) as i64, rng.random_range(0..self.cols) as i64);
            if (r1 - r0).abs() + (c1 - c0).abs() < min_hops as i64 {
                continue;
            }
            return self.staircase(rng, self.node(r0 as u32, c0 as u32), self.node(r1 as u32, c1 as u32));
        }
    }

    /// Random monotone staircase from `from` to `to`, both included.
    pub fn staircase<R: Rng>(&self, rng: &mut R, from: ClusterId, to: ClusterId) -> Vec<ClusterId> {
        let ((r0, c0), (r1, c1)) = (self.row_col(from), self.row_col(to));
        let (mut r, mut c) = (r0 as i64, c0 as i64);
        let (r1, c1) = (r1 as i64, c1 as i64);
        let mut path = vec![from];
        while (r, c) != (r1, c1) {
            let move_row = if r == r1 {
                false
            } else if c == c1 {
                true
            } else {
                rng.random_bool(0.5)
            };
            if move_row {
                r += (r1 - r).signum();
            } else {
                c += (c1 - c).signum();
            }
            path.push(self.node(r as u32, c as u32));
        }
        path
    }

    /// `p` displaced by independent zero-mean Gaussian noise of `sigma_m`
    /// along north and east.
    pub fn jitter<R: Rng>(&self, p: LatLon, sigma_m: f64, rng: &mut R) -> LatLon {
        if sigma_m <= 0.0 {
            return p;
        }
        let noise = Normal::new(0.0, sigma_m).expect("finite sigma");
        let (dn, de) = (noise.sample(rng), noise.sample(rng));
        let cos = p.lat.to_radians().cos();
        LatLon {
            lat: p.lat + (dn / EARTH_RADIUS_M).to_degrees(),
            lon: p.lon + (de / (EARTH_RADIUS_M * cos)).to_degrees(),
        }
    }
}
