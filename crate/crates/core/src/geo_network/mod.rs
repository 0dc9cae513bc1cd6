//! Road network ingestion, friend-of-friend clustering and spatial queries.
//!
//! A [`RawNetwork`] is loaded from node/edge CSV files, collapsed into
//! clusters of nodes that lie within a threshold distance of one another
//! ([`cluster_fof`]), and reduced to its largest connected component
//! ([`largest_component`]). The resulting [`RoadNetwork`] is immutable and
//! answers radius and nearest-node queries through a uniform grid index.

mod cluster;
mod index;
mod load;
mod persist;

use std::collections::hash_map::Entry;
use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cluster::{cluster_fof, largest_component, DEFAULT_CLUSTER_RADIUS_M};
pub use index::{GridIndex, DEFAULT_CELL_M};
pub use load::{load_blacklist, load_network, read_network, LoadStats};
pub use persist::{read_road_network, write_road_network, NETWORK_FORMAT, NETWORK_FORMAT_VERSION};

/// Mean Earth radius used by every distance computation in the crate.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("coordinate out of range: lat={lat}, lon={lon}")]
    InvalidCoordinate { lat: f64, lon: f64 },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),
    #[error("edge references unknown node `{0}`")]
    UnknownNode(String),
    #[error("network has no nodes")]
    Empty,
    #[error("clustering threshold must be positive, got {0}")]
    InvalidThreshold(f64),
    #[error("query radius must be non-negative, got {0}")]
    InvalidRadius(f64),
    #[error("unsupported network artifact: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A WGS84 position in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeoError> {
        let p = LatLon { lat, lon };
        if p.is_valid() {
            Ok(p)
        } else {
            Err(GeoError::InvalidCoordinate { lat, lon })
        }
    }

    pub fn is_valid(&self) -> bool {
        self.lat.is_finite()
            && self.lon.is_finite()
            && (-90.0..=90.0).contains(&self.lat)
            && (-180.0..=180.0).contains(&self.lon)
    }
}

impl fmt::Display for LatLon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.lat, self.lon)
    }
}

/// Great-circle distance in meters. Both points are assumed valid; use
/// [`checked_haversine_m`] for untrusted input.
pub fn haversine_m(a: LatLon, b: LatLon) -> f64 {
    let phi1 = a.lat.to_radians();
    let phi2 = b.lat.to_radians();
    let dphi = (b.lat - a.lat).to_radians();
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

pub fn checked_haversine_m(a: LatLon, b: LatLon) -> Result<f64, GeoError> {
    for p in [a, b] {
        if !p.is_valid() {
            return Err(GeoError::InvalidCoordinate { lat: p.lat, lon: p.lon });
        }
    }
    Ok(haversine_m(a, b))
}

/// Inclusive latitude/longitude rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub min_lat: f64,
    pub min_lon: f64,
    pub max_lat: f64,
    pub max_lon: f64,
}

impl BBox {
    pub fn contains(&self, p: LatLon) -> bool {
        (self.min_lat..=self.max_lat).contains(&p.lat) && (self.min_lon..=self.max_lon).contains(&p.lon)
    }

    /// Smallest box holding all points, or `None` for an empty iterator.
    pub fn enclosing(points: impl IntoIterator<Item = LatLon>) -> Option<BBox> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut b = BBox {
            min_lat: first.lat,
            min_lon: first.lon,
            max_lat: first.lat,
            max_lon: first.lon,
        };
        for p in it {
            b.min_lat = b.min_lat.min(p.lat);
            b.max_lat = b.max_lat.max(p.lat);
            b.min_lon = b.min_lon.min(p.lon);
            b.max_lon = b.max_lon.max(p.lon);
        }
        Some(b)
    }

    /// Grows the box by `margin_m` meters on every side.
    pub fn padded(&self, margin_m: f64) -> BBox {
        let dlat = (margin_m / EARTH_RADIUS_M).to_degrees();
        let max_abs_lat = self.min_lat.abs().max(self.max_lat.abs()).min(89.0);
        let dlon = dlat / max_abs_lat.to_radians().cos();
        BBox {
            min_lat: (self.min_lat - dlat).max(-90.0),
            min_lon: (self.min_lon - dlon).max(-180.0),
            max_lat: (self.max_lat + dlat).min(90.0),
            max_lon: (self.max_lon + dlon).min(180.0),
        }
    }
}

/// Dense index of a cluster inside a [`RoadNetwork`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClusterId(pub u32);

impl ClusterId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ClusterId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawNode {
    pub id: String,
    pub pos: LatLon,
}

/// Unclustered road graph. Edges are undirected, stored as sorted
/// `(lo, hi)` pairs of node indices with no duplicates or self-loops.
#[derive(Debug, Clone, Default)]
pub struct RawNetwork {
    nodes: Vec<RawNode>,
    edges: Vec<(u32, u32)>,
}

impl RawNetwork {
    /// Builds a network from in-memory nodes and id-pair edges.
    ///
    /// Edges naming unknown nodes are an error here; the CSV loader drops
    /// them instead and reports a count.
    pub fn new(nodes: Vec<RawNode>, edges: &[(String, String)]) -> Result<Self, GeoError> {
        let mut net = RawNetwork { nodes, edges: Vec::new() };
        let lookup = net.id_lookup()?;
        let mut pairs = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            let ia = *lookup.get(a.as_str()).ok_or_else(|| GeoError::UnknownNode(a.clone()))?;
            let ib = *lookup.get(b.as_str()).ok_or_else(|| GeoError::UnknownNode(b.clone()))?;
            pairs.push((ia, ib));
        }
        net.set_edges(pairs);
        Ok(net)
    }

    pub(crate) fn from_indexed(nodes: Vec<RawNode>, edges: Vec<(u32, u32)>) -> Self {
        let mut net = RawNetwork { nodes, edges: Vec::new() };
        net.set_edges(edges);
        net
    }

    fn set_edges(&mut self, pairs: Vec<(u32, u32)>) -> usize {
        let before = pairs.len();
        let mut edges: Vec<(u32, u32)> = pairs
            .into_iter()
            .filter(|(a, b)| a != b)
            .map(|(a, b)| if a < b { (a, b) } else { (b, a) })
            .collect();
        edges.sort_unstable();
        edges.dedup();
        self.edges = edges;
        before - self.edges.len()
    }

    pub(crate) fn id_lookup(&self) -> Result<HashMap<&str, u32>, GeoError> {
        let mut map = HashMap::with_capacity(self.nodes.len());
        for (i, n) in self.nodes.iter().enumerate() {
            if map.insert(n.id.as_str(), i as u32).is_some() {
                return Err(GeoError::DuplicateNode(n.id.clone()));
            }
            if !n.pos.is_valid() {
                return Err(GeoError::InvalidCoordinate { lat: n.pos.lat, lon: n.pos.lon });
            }
        }
        Ok(map)
    }

    pub fn nodes(&self) -> &[RawNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    /// Removes the listed undirected edges (matched by node id, either
    /// orientation). Returns how many edges were removed.
    pub fn remove_edges(&mut self, blacklist: &[(String, String)]) -> usize {
        let lookup: HashMap<&str, u32> =
            self.nodes.iter().enumerate().map(|(i, n)| (n.id.as_str(), i as u32)).collect();
        let banned: HashSet<(u32, u32)> = blacklist
            .iter()
            .filter_map(|(a, b)| {
                let (a, b) = (*lookup.get(a.as_str())?, *lookup.get(b.as_str())?);
                Some(if a < b { (a, b) } else { (b, a) })
            })
            .collect();
        let before = self.edges.len();
        self.edges.retain(|e| !banned.contains(e));
        before - self.edges.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterNode {
    pub cluster_id: ClusterId,
    pub centroid: LatLon,
    pub member_ids: Vec<String>,
}

/// Clustered road graph with a spatial index over cluster centroids.
///
/// After [`largest_component`] the graph is connected. A built network is
/// never mutated, so shared references can be queried from many threads.
#[derive(Debug, Clone)]
pub struct RoadNetwork {
    clusters: Vec<ClusterNode>,
    edges: Vec<(ClusterId, ClusterId)>,
    offsets: Vec<u32>,
    adjacency: Vec<ClusterId>,
    index: GridIndex,
    cluster_radius_m: f64,
    mean_edge_m: f64,
}

impl RoadNetwork {
    /// Assembles a network from clusters (whose ids must be `0..n` in order)
    /// and undirected cluster edges. Edges are normalized and deduplicated.
    pub fn from_parts(
        clusters: Vec<ClusterNode>,
        edges: Vec<(ClusterId, ClusterId)>,
        cluster_radius_m: f64,
    ) -> Result<Self, GeoError> {
        if clusters.is_empty() {
            return Err(GeoError::Empty);
        }
        for (i, c) in clusters.iter().enumerate() {
            if c.cluster_id.index() != i {
                return Err(GeoError::Format(format!(
                    "cluster ids must be dense and ordered; position {i} holds {}",
                    c.cluster_id
                )));
            }
            if !c.centroid.is_valid() {
                return Err(GeoError::InvalidCoordinate { lat: c.centroid.lat, lon: c.centroid.lon });
            }
        }
        let n = clusters.len() as u32;
        let mut edges: Vec<(ClusterId, ClusterId)> = edges
            .into_iter()
            .filter(|(a, b)| a != b)
            .map(|(a, b)| if a < b { (a, b) } else { (b, a) })
            .collect();
        if let Some((a, b)) = edges.iter().find(|(a, b)| a.0 >= n || b.0 >= n) {
            return Err(GeoError::Format(format!("edge ({a}, {b}) out of range")));
        }
        edges.sort_unstable();
        edges.dedup();

        let mut degree = vec![0u32; clusters.len()];
        for (a, b) in &edges {
            degree[a.index()] += 1;
            degree[b.index()] += 1;
        }
        let mut offsets = Vec::with_capacity(clusters.len() + 1);
        offsets.push(0u32);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets.clone();
        let mut adjacency = vec![ClusterId(0); *offsets.last().unwrap() as usize];
        for (a, b) in &edges {
            adjacency[fill[a.index()] as usize] = *b;
            fill[a.index()] += 1;
            adjacency[fill[b.index()] as usize] = *a;
            fill[b.index()] += 1;
        }
        for i in 0..clusters.len() {
            adjacency[offsets[i] as usize..offsets[i + 1] as usize].sort_unstable();
        }

        let mean_edge_m = if edges.is_empty() {
            0.0
        } else {
            edges
                .iter()
                .map(|(a, b)| haversine_m(clusters[a.index()].centroid, clusters[b.index()].centroid))
                .sum::<f64>()
                / edges.len() as f64
        };
        let index = GridIndex::build(clusters.iter().map(|c| c.centroid).collect(), DEFAULT_CELL_M);
        Ok(RoadNetwork {
            clusters,
            edges,
            offsets,
            adjacency,
            index,
            cluster_radius_m,
            mean_edge_m,
        })
    }

    pub fn clusters(&self) -> &[ClusterNode] {
        &self.clusters
    }

    pub fn cluster(&self, id: ClusterId) -> &ClusterNode {
        &self.clusters[id.index()]
    }

    pub fn centroid(&self, id: ClusterId) -> LatLon {
        self.clusters[id.index()].centroid
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn edges(&self) -> &[(ClusterId, ClusterId)] {
        &self.edges
    }

    /// Sorted neighbors of a cluster.
    pub fn neighbors(&self, id: ClusterId) -> &[ClusterId] {
        let i = id.index();
        &self.adjacency[self.offsets[i] as usize..self.offsets[i + 1] as usize]
    }

    pub fn are_adjacent(&self, a: ClusterId, b: ClusterId) -> bool {
        self.neighbors(a).binary_search(&b).is_ok()
    }

    pub fn cluster_radius_m(&self) -> f64 {
        self.cluster_radius_m
    }

    /// Mean centroid-to-centroid length over all edges.
    pub fn mean_edge_m(&self) -> f64 {
        self.mean_edge_m
    }

    pub fn bbox(&self) -> BBox {
        BBox::enclosing(self.clusters.iter().map(|c| c.centroid)).expect("network is never empty")
    }

    pub fn index(&self) -> &GridIndex {
        &self.index
    }

    /// Clusters whose centroid lies within `d` meters of `point`, in
    /// ascending id order. `d == 0` yields exactly the nearest cluster.
    pub fn radius_query(&self, point: LatLon, d: f64) -> Result<Vec<ClusterId>, GeoError> {
        if !(d >= 0.0) || !d.is_finite() {
            return Err(GeoError::InvalidRadius(d));
        }
        if !point.is_valid() {
            return Err(GeoError::InvalidCoordinate { lat: point.lat, lon: point.lon });
        }
        if d == 0.0 {
            return Ok(vec![self.nearest_node(point)?]);
        }
        Ok(self.index.within(point, d).into_iter().map(ClusterId).collect())
    }

    /// Closest cluster by centroid distance; ties go to the smaller id.
    pub fn nearest_node(&self, point: LatLon) -> Result<ClusterId, GeoError> {
        if !point.is_valid() {
            return Err(GeoError::InvalidCoordinate { lat: point.lat, lon: point.lon });
        }
        self.index.nearest(point).map(|(i, _)| ClusterId(i)).ok_or(GeoError::Empty)
    }

    /// Up to `k` clusters within `max_d` meters, sorted by (distance, id).
    pub fn nearest_within(&self, point: LatLon, k: usize, max_d: f64) -> Vec<(ClusterId, f64)> {
        let mut hits: Vec<(ClusterId, f64)> = self
            .index
            .within(point, max_d)
            .into_iter()
            .map(|i| (ClusterId(i), haversine_m(point, self.clusters[i as usize].centroid)))
            .collect();
        hits.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        hits.truncate(k);
        hits
    }

    /// Connected components as lists of cluster ids, each sorted, ordered
    /// by their smallest member.
    pub fn components(&self) -> Vec<Vec<ClusterId>> {
        let mut seen = vec![false; self.len()];
        let mut out = Vec::new();
        for start in 0..self.len() {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut comp = vec![ClusterId(start as u32)];
            let mut head = 0;
            while head < comp.len() {
                let c = comp[head];
                head += 1;
                for &nb in self.neighbors(c) {
                    if !seen[nb.index()] {
                        seen[nb.index()] = true;
                        comp.push(nb);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() == 1
    }

    /// Unweighted shortest path from `from` to `to`, both endpoints
    /// included. Ties between equal-length paths go to smaller ids.
    pub fn shortest_path(&self, from: ClusterId, to: ClusterId) -> Option<Vec<ClusterId>> {
        self.shortest_path_by(from, to, |_| 0.0)
    }

    /// Among all minimum-hop paths from `from` to `to`, returns the one with
    /// the smallest summed `node_cost` over its intermediate nodes. Remaining
    /// ties resolve to the smaller predecessor id at each step.
    pub fn shortest_path_by(
        &self,
        from: ClusterId,
        to: ClusterId,
        node_cost: impl Fn(ClusterId) -> f64,
    ) -> Option<Vec<ClusterId>> {
        if from == to {
            return Some(vec![from]);
        }
        let mut depth: HashMap<ClusterId, usize> = HashMap::from([(from, 0)]);
        let mut layers: Vec<Vec<ClusterId>> = vec![vec![from]];
        while !depth.contains_key(&to) {
            let frontier = layers.last().unwrap();
            if frontier.is_empty() {
                return None;
            }
            let d = layers.len();
            let mut next = Vec::new();
            for &c in frontier {
                for &nb in self.neighbors(c) {
                    if let Entry::Vacant(e) = depth.entry(nb) {
                        e.insert(d);
                        next.push(nb);
                    }
                }
            }
            layers.push(next);
        }

        // prune every layer to nodes lying on some shortest path
        let last = layers.len() - 1;
        let mut on_path: Vec<HashSet<ClusterId>> = vec![HashSet::new(); layers.len()];
        on_path[last].insert(to);
        for k in (0..last).rev() {
            let (lower, upper) = on_path.split_at_mut(k + 1);
            for &u in &layers[k] {
                if self.neighbors(u).iter().any(|v| upper[0].contains(v)) {
                    lower[k].insert(u);
                }
            }
        }

        let mut best: HashMap<ClusterId, (f64, ClusterId)> = HashMap::from([(from, (0.0, from))]);
        for k in 1..=last {
            let mut layer: Vec<ClusterId> = on_path[k].iter().copied().collect();
            layer.sort_unstable();
            for v in layer {
                let own = if k < last { node_cost(v) } else { 0.0 };
                let mut pick: Option<(f64, ClusterId)> = None;
                for &u in self.neighbors(v) {
                    if !on_path[k - 1].contains(&u) {
                        continue;
                    }
                    let c = best[&u].0 + own;
                    if pick.is_none_or(|(pc, _)| c < pc) {
                        pick = Some((c, u));
                    }
                }
                best.insert(v, pick.expect("pruned node has a predecessor"));
            }
        }
        let mut path = vec![to];
        let mut cur = to;
        while cur != from {
            cur = best[&cur].1;
            path.push(cur);
        }
        path.reverse();
        Some(path)
    }

    /// Hop distances from `from` to each target (`None` if unreachable).
    /// Search stops once every target is settled.
    pub fn hop_distances(&self, from: ClusterId, targets: &[ClusterId]) -> Vec<Option<u32>> {
        let mut remaining: HashSet<ClusterId> = targets.iter().copied().collect();
        let mut dist: HashMap<ClusterId, u32> = HashMap::new();
        dist.insert(from, 0);
        remaining.remove(&from);
        let mut queue = VecDeque::from([from]);
        while let Some(c) = queue.pop_front() {
            if remaining.is_empty() {
                break;
            }
            let dc = dist[&c];
            for &nb in self.neighbors(c) {
                if let Entry::Vacant(e) = dist.entry(nb) {
                    e.insert(dc + 1);
                    remaining.remove(&nb);
                    queue.push_back(nb);
                }
            }
        }
        targets.iter().map(|t| dist.get(t).copied()).collect()
    }
}
