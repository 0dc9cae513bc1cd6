use super::{BusTripResolved, MatchCandidate, MatchConfig};
use crate::geo_network::ClusterId;
use crate::map_match::TaxiTrajectory;

/// Passage of a taxi trajectory through a cluster.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeEvent {
    /// Index into the trajectory slice the index was built from.
    pub taxi: u32,
    /// 0-based position within that trajectory.
    pub pos: u32,
    pub t: f64,
}

/// Per-cluster passages sorted by (time, taxi, position).
#[derive(Debug, Clone, Default)]
pub struct NodeEventIndex {
    events: Vec<Vec<NodeEvent>>,
}

impl NodeEventIndex {
    pub fn build(trajectories: &[TaxiTrajectory]) -> Self {
        let n = trajectories
            .iter()
            .flat_map(|t| t.nodes())
            .map(|c| c.index() + 1)
            .max()
            .unwrap_or(0);
        let mut events = vec![Vec::new(); n];
        for (taxi, traj) in trajectories.iter().enumerate() {
            for (pos, p) in traj.points().iter().enumerate() {
                events[p.node.index()].push(NodeEvent { taxi: taxi as u32, pos: pos as u32, t: p.t });
            }
        }
        for list in &mut events {
            list.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.taxi.cmp(&b.taxi)).then(a.pos.cmp(&b.pos)));
        }
        NodeEventIndex { events }
    }

    pub fn events(&self, node: ClusterId) -> &[NodeEvent] {
        self.events.get(node.index()).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Events at `node` with `lo < t < hi`.
    pub fn window(&self, node: ClusterId, lo: f64, hi: f64) -> &[NodeEvent] {
        let list = self.events(node);
        let a = list.partition_point(|e| e.t <= lo);
        let b = list.partition_point(|e| e.t < hi);
        &list[a..b.max(a)]
    }

    pub fn len(&self) -> usize {
        self.events.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One candidate per taxi trajectory admitting a feasible `(k, l)`, with the
/// pair maximizing the time saved (ties: smallest `k`, then smallest `l`).
/// Output is sorted by taxi id.
pub fn enumerate_candidates(
    index: &NodeEventIndex,
    trajectories: &[TaxiTrajectory],
    bus: &BusTripResolved,
    cfg: &MatchConfig,
) -> Vec<MatchCandidate> {
    let bus_duration = bus.t_end - bus.t_start;
    let mut starts: Vec<(u32, u32)> = bus
        .start_nodes
        .iter()
        .flat_map(|&n| index.window(n, bus.t_start - cfg.t_b_s, bus.t_start + cfg.t_b_s))
        .map(|e| (e.taxi, e.pos))
        .collect();
    starts.sort_unstable();
    starts.dedup();

    let mut out: Vec<MatchCandidate> = Vec::new();
    let mut i = 0;
    while i < starts.len() {
        let taxi = starts[i].0;
        let points = trajectories[taxi as usize].points();
        let mut best: Option<(f64, usize, usize)> = None;
        while i < starts.len() && starts[i].0 == taxi {
            let k = starts[i].1 as usize;
            i += 1;
            let t_k = points[k].t;
            // earliest later end node gives the shortest taxi segment for this k
            for (l, p) in points.iter().enumerate().skip(k + 1) {
                if !(p.t < bus.t_end) || !(bus_duration - (p.t - t_k) > 0.0) {
                    break;
                }
                if bus.end_nodes.binary_search(&p.node).is_ok() {
                    let tau = bus_duration - (p.t - t_k);
                    if best.is_none_or(|(b, _, _)| tau > b) {
                        best = Some((tau, k, l));
                    }
                    break;
                }
            }
        }
        if let Some((tau, k, l)) = best {
            out.push(MatchCandidate {
                bus_id: bus.trip_id.clone(),
                taxi_id: trajectories[taxi as usize].trip_id().to_string(),
                k: k + 1,
                l: l + 1,
                tau,
            });
        }
    }
    out.sort_by(|a, b| a.taxi_id.cmp(&b.taxi_id));
    out
}
