use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet};

use super::{Assignment, MatchCandidate, MatchError, MatchedPair};

/// Largest side the exhaustive oracle accepts.
pub const BRUTE_FORCE_MAX_SIDE: usize = 12;

/// Savings are compared as integer microseconds so optimality is exact.
pub fn tau_to_micros(tau: f64) -> i64 {
    (tau * 1e6).round() as i64
}

struct Graph {
    buses: Vec<String>,
    taxis: Vec<String>,
    /// (bus, taxi, weight, candidate index)
    edges: Vec<(usize, usize, i64, usize)>,
}

fn graph(candidates: &[MatchCandidate]) -> Result<Graph, MatchError> {
    let mut buses: Vec<String> = candidates.iter().map(|c| c.bus_id.clone()).collect();
    let mut taxis: Vec<String> = candidates.iter().map(|c| c.taxi_id.clone()).collect();
    buses.sort();
    buses.dedup();
    taxis.sort();
    taxis.dedup();
    let bi: HashMap<&str, usize> = buses.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let ti: HashMap<&str, usize> = taxis.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut seen = HashSet::new();
    let mut edges = Vec::with_capacity(candidates.len());
    for (ci, c) in candidates.iter().enumerate() {
        let (b, t) = (bi[c.bus_id.as_str()], ti[c.taxi_id.as_str()]);
        if !seen.insert((b, t)) {
            return Err(MatchError::DuplicateCandidate { bus_id: c.bus_id.clone(), taxi_id: c.taxi_id.clone() });
        }
        let w = tau_to_micros(c.tau);
        if w > 0 {
            edges.push((b, t, w, ci));
        }
    }
    edges.sort_unstable_by_key(|&(b, t, _, _)| (b, t));
    Ok(Graph { buses, taxis, edges })
}

fn pairs_of(candidates: &[MatchCandidate], chosen: impl IntoIterator<Item = usize>) -> Assignment {
    Assignment::from_pairs(
        chosen
            .into_iter()
            .map(|ci| {
                let c = &candidates[ci];
                MatchedPair { bus_id: c.bus_id.clone(), taxi_id: c.taxi_id.clone(), tau: c.tau }
            })
            .collect(),
    )
}

/// Maximum total-saving one-to-one assignment.
///
/// Successive shortest augmenting paths with Dijkstra and node potentials
/// on each connected component of the candidate graph. Edge costs are
/// `W - w` with `W` the largest weight, so they start non-negative and an
/// augmenting path improves the matching exactly when its cost is below `W`.
/// Candidates with a saving under half a microsecond are never selected.
pub fn max_weight_matching(candidates: &[MatchCandidate]) -> Result<Assignment, MatchError> {
    let g = graph(candidates)?;
    let nb = g.buses.len();
    let nt = g.taxis.len();

    // components over buses 0..nb and taxis nb..nb+nt
    let mut parent: Vec<usize> = (0..nb + nt).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for &(b, t, _, _) in &g.edges {
        let (x, y) = (find(&mut parent, b), find(&mut parent, nb + t));
        if x != y {
            parent[x.max(y)] = x.min(y);
        }
    }
    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for (ei, &(b, _, _, _)) in g.edges.iter().enumerate() {
        groups.entry(find(&mut parent, b)).or_default().push(ei);
    }
    let mut roots: Vec<usize> = groups.keys().copied().collect();
    roots.sort_unstable();

    let mut chosen = Vec::new();
    for root in roots {
        let comp: Vec<(usize, usize, i64, usize)> = groups[&root].iter().map(|&ei| g.edges[ei]).collect();
        chosen.extend(solve_component(&comp));
    }
    Ok(pairs_of(candidates, chosen))
}

struct Arc {
    to: usize,
    cap: i32,
    cost: i64,
    rev: usize,
    cand: usize,
}

fn add_arc(adj: &mut [Vec<Arc>], from: usize, to: usize, cost: i64, cand: usize) {
    let (rf, rt) = (adj[to].len(), adj[from].len());
    adj[from].push(Arc { to, cap: 1, cost, rev: rf, cand });
    adj[to].push(Arc { to: from, cap: 0, cost: -cost, rev: rt, cand });
}

/// Candidate indices of the optimal matching on one component.
fn solve_component(edges: &[(usize, usize, i64, usize)]) -> Vec<usize> {
    let mut bus_ids: Vec<usize> = edges.iter().map(|e| e.0).collect();
    let mut taxi_ids: Vec<usize> = edges.iter().map(|e| e.1).collect();
    bus_ids.sort_unstable();
    bus_ids.dedup();
    taxi_ids.sort_unstable();
    taxi_ids.dedup();
    let nb = bus_ids.len();
    let (src, sink) = (0, 1 + nb + taxi_ids.len());
    let n = sink + 1;
    let w_max = edges.iter().map(|e| e.2).max().unwrap_or(0);
    let mut adj: Vec<Vec<Arc>> = (0..n).map(|_| Vec::new()).collect();
    for i in 0..nb {
        add_arc(&mut adj, src, 1 + i, 0, usize::MAX);
    }
    for &(b, t, w, ci) in edges {
        let u = 1 + bus_ids.binary_search(&b).unwrap();
        let v = 1 + nb + taxi_ids.binary_search(&t).unwrap();
        add_arc(&mut adj, u, v, w_max - w, ci);
    }
    for j in 0..taxi_ids.len() {
        add_arc(&mut adj, 1 + nb + j, sink, 0, usize::MAX);
    }

    let mut pot = vec![0i64; n];
    let mut dist = vec![i64::MAX; n];
    let mut prev: Vec<(usize, usize)> = vec![(usize::MAX, usize::MAX); n];
    let mut done = vec![false; n];
    loop {
        dist.fill(i64::MAX);
        done.fill(false);
        dist[src] = 0;
        let mut heap = BinaryHeap::new();
        heap.push(Reverse((0i64, src)));
        while let Some(Reverse((d, u))) = heap.pop() {
            if done[u] {
                continue;
            }
            done[u] = true;
            if u == sink {
                break;
            }
            for (ai, a) in adj[u].iter().enumerate() {
                if a.cap == 0 {
                    continue;
                }
                let nd = d + a.cost + pot[u] - pot[a.to];
                if nd < dist[a.to] {
                    dist[a.to] = nd;
                    prev[a.to] = (u, ai);
                    heap.push(Reverse((nd, a.to)));
                }
            }
        }
        if !done[sink] {
            break;
        }
        // true path cost = reduced distance corrected by the potentials
        let path_cost = dist[sink] - pot[src] + pot[sink];
        if path_cost >= w_max {
            break;
        }
        for v in 0..n {
            if done[v] {
                pot[v] += dist[v] - dist[sink];
            }
        }
        let mut v = sink;
        while v != src {
            let (u, ai) = prev[v];
            adj[u][ai].cap -= 1;
            let rev = adj[u][ai].rev;
            adj[v][rev].cap += 1;
            v = u;
        }
    }

    let mut out = Vec::new();
    for u in 1..=nb {
        for a in &adj[u] {
            if a.cand != usize::MAX && a.to > nb && a.cap == 0 {
                out.push(a.cand);
            }
        }
    }
    out
}

/// Exact optimum by dynamic programming over subsets of taxis. Refuses
/// instances with more than [`BRUTE_FORCE_MAX_SIDE`] trips on either side.
pub fn brute_force_assignment(candidates: &[MatchCandidate]) -> Result<Assignment, MatchError> {
    let g = graph(candidates)?;
    let (nb, nt) = (g.buses.len(), g.taxis.len());
    if nb > BRUTE_FORCE_MAX_SIDE || nt > BRUTE_FORCE_MAX_SIDE {
        return Err(MatchError::TooLarge { buses: nb, taxis: nt, max: BRUTE_FORCE_MAX_SIDE });
    }
    let mut by_bus: Vec<Vec<(usize, i64, usize)>> = vec![Vec::new(); nb];
    for &(b, t, w, ci) in &g.edges {
        by_bus[b].push((t, w, ci));
    }
    let masks = 1usize << nt;
    // best[i][m]: max weight using buses i.. with taxis in m already taken
    let mut best = vec![vec![0i64; masks]; nb + 1];
    for i in (0..nb).rev() {
        for m in 0..masks {
            let mut v = best[i + 1][m];
            for &(t, w, _) in &by_bus[i] {
                if m & (1 << t) == 0 {
                    v = v.max(w + best[i + 1][m | (1 << t)]);
                }
            }
            best[i][m] = v;
        }
    }
    let mut chosen = Vec::new();
    let mut m = 0usize;
    for i in 0..nb {
        if best[i][m] == best[i + 1][m] {
            continue;
        }
        let &(t, _, ci) = by_bus[i]
            .iter()
            .find(|&&(t, w, _)| m & (1 << t) == 0 && w + best[i + 1][m | (1 << t)] == best[i][m])
            .expect("dp value is attained");
        chosen.push(ci);
        m |= 1 << t;
    }
    Ok(pairs_of(candidates, chosen))
}
