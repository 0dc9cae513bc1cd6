use std::collections::HashMap;

use super::{ClusterId, ClusterNode, GeoError, GridIndex, LatLon, RawNetwork, RoadNetwork};

pub const DEFAULT_CLUSTER_RADIUS_M: f64 = 20.0;

struct DisjointSet {
    parent: Vec<u32>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet { parent: (0..n as u32).collect(), rank: vec![0; n] }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra as usize].cmp(&self.rank[rb as usize]) {
            std::cmp::Ordering::Less => self.parent[ra as usize] = rb,
            std::cmp::Ordering::Greater => self.parent[rb as usize] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb as usize] = ra;
                self.rank[ra as usize] += 1;
            }
        }
    }
}

/// Friend-of-friend clustering: clusters are the connected components of
/// the graph joining every node pair at most `threshold_m` apart.
///
/// Cluster ids are assigned in order of each cluster's smallest member id,
/// so the partition and its numbering do not depend on input order. Road
/// edges inside a cluster vanish; the rest are projected onto cluster ids.
/// The result is not reduced to one component; see [`largest_component`].
pub fn cluster_fof(raw: &RawNetwork, threshold_m: f64) -> Result<RoadNetwork, GeoError> {
    if !(threshold_m > 0.0) || !threshold_m.is_finite() {
        return Err(GeoError::InvalidThreshold(threshold_m));
    }
    let nodes = raw.nodes();
    if nodes.is_empty() {
        return Err(GeoError::Empty);
    }
    let index = GridIndex::build(nodes.iter().map(|n| n.pos).collect(), threshold_m);
    let mut dsu = DisjointSet::new(nodes.len());
    for (i, n) in nodes.iter().enumerate() {
        for j in index.within(n.pos, threshold_m) {
            if j as usize > i {
                dsu.union(i as u32, j);
            }
        }
    }

    let mut groups: HashMap<u32, Vec<u32>> = HashMap::new();
    for i in 0..nodes.len() as u32 {
        groups.entry(dsu.find(i)).or_default().push(i);
    }
    let mut groups: Vec<Vec<u32>> = groups.into_values().collect();
    for g in &mut groups {
        g.sort_by(|&a, &b| nodes[a as usize].id.cmp(&nodes[b as usize].id));
    }
    groups.sort_by(|a, b| nodes[a[0] as usize].id.cmp(&nodes[b[0] as usize].id));

    let mut cluster_of = vec![ClusterId(0); nodes.len()];
    let clusters = groups
        .iter()
        .enumerate()
        .map(|(ci, members)| {
            let mut lat = 0.0;
            let mut lon = 0.0;
            for &m in members {
                cluster_of[m as usize] = ClusterId(ci as u32);
                lat += nodes[m as usize].pos.lat;
                lon += nodes[m as usize].pos.lon;
            }
            let n = members.len() as f64;
            ClusterNode {
                cluster_id: ClusterId(ci as u32),
                centroid: LatLon { lat: lat / n, lon: lon / n },
                member_ids: members.iter().map(|&m| nodes[m as usize].id.clone()).collect(),
            }
        })
        .collect();
    let edges = raw
        .edges()
        .iter()
        .map(|&(a, b)| (cluster_of[a as usize], cluster_of[b as usize]))
        .filter(|(a, b)| a != b)
        .collect();
    RoadNetwork::from_parts(clusters, edges, threshold_m)
}

/// Keeps only the largest connected component, re-numbering clusters
/// densely in their original relative order. Equal-sized components are
/// resolved in favor of the one containing the smallest cluster id.
pub fn largest_component(net: &RoadNetwork) -> Result<RoadNetwork, GeoError> {
    if net.is_empty() {
        return Err(GeoError::Empty);
    }
    let components = net.components();
    // components are ordered by smallest member; max_by_key keeps the last
    // maximum, so scan in reverse to prefer the earliest
    let keep = components
        .iter()
        .rev()
        .max_by_key(|c| c.len())
        .expect("at least one component");
    let mut remap = vec![None; net.len()];
    for (new, old) in keep.iter().enumerate() {
        remap[old.index()] = Some(ClusterId(new as u32));
    }
    let clusters = keep
        .iter()
        .enumerate()
        .map(|(new, old)| {
            let mut c = net.cluster(*old).clone();
            c.cluster_id = ClusterId(new as u32);
            c
        })
        .collect();
    let edges = net
        .edges()
        .iter()
        .filter_map(|(a, b)| Some((remap[a.index()]?, remap[b.index()]?)))
        .collect();
    RoadNetwork::from_parts(clusters, edges, net.cluster_radius_m())
}
