use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use serde::Deserialize;

use super::{BBox, GeoError, LatLon, RawNetwork, RawNode};

#[derive(Debug, Deserialize)]
struct NodeRow {
    node_id: String,
    lat: f64,
    lon: f64,
}

#[derive(Debug, Deserialize)]
struct EdgeRow {
    from_id: String,
    to_id: String,
}

/// Counters describing what the loader kept and discarded.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadStats {
    pub nodes_read: usize,
    pub edges_read: usize,
    pub nodes_outside_bbox: usize,
    pub edges_outside_bbox: usize,
    pub edges_unknown_node: usize,
    pub edges_duplicate_or_loop: usize,
}

pub(crate) fn csv_error(path: &str, err: csv::Error) -> GeoError {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    let message = err.to_string();
    match err.into_kind() {
        csv::ErrorKind::Io(e) => GeoError::Io(e),
        _ => GeoError::Parse {
            path: path.to_string(),
            line,
            message,
        },
    }
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r)
}

fn open(path: &Path) -> Result<std::fs::File, GeoError> {
    std::fs::File::open(path).map_err(|e| {
        GeoError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}

/// Loads nodes and edges CSVs, applying an optional bounding box.
///
/// Nodes outside the box are dropped with their incident edges. Edges that
/// name a node absent from the nodes file are dropped and counted.
pub fn load_network(
    nodes_file: &Path,
    edges_file: &Path,
    bbox: Option<BBox>,
) -> Result<(RawNetwork, LoadStats), GeoError> {
    read_network(
        open(nodes_file)?,
        &nodes_file.display().to_string(),
        open(edges_file)?,
        &edges_file.display().to_string(),
        bbox,
    )
}

/// Reader-based variant of [`load_network`]; the names are used in
/// diagnostics only.
pub fn read_network<R1: Read, R2: Read>(
    nodes: R1,
    nodes_name: &str,
    edges: R2,
    edges_name: &str,
    bbox: Option<BBox>,
) -> Result<(RawNetwork, LoadStats), GeoError> {
    let mut stats = LoadStats::default();
    let mut kept = Vec::new();
    let mut index: HashMap<String, Option<u32>> = HashMap::new();

    let mut rdr = reader(nodes);
    for (row_no, row) in rdr.deserialize::<NodeRow>().enumerate() {
        let row = row.map_err(|e| csv_error(nodes_name, e))?;
        stats.nodes_read += 1;
        let pos = LatLon::new(row.lat, row.lon).map_err(|e| GeoError::Parse {
            path: nodes_name.to_string(),
            line: row_no as u64 + 2,
            message: e.to_string(),
        })?;
        if index.contains_key(&row.node_id) {
            return Err(GeoError::DuplicateNode(row.node_id));
        }
        if bbox.is_some_and(|b| !b.contains(pos)) {
            stats.nodes_outside_bbox += 1;
            index.insert(row.node_id, None);
            continue;
        }
        index.insert(row.node_id.clone(), Some(kept.len() as u32));
        kept.push(RawNode { id: row.node_id, pos });
    }

    let mut pairs = Vec::new();
    let mut rdr = reader(edges);
    for row in rdr.deserialize::<EdgeRow>() {
        let row = row.map_err(|e| csv_error(edges_name, e))?;
        stats.edges_read += 1;
        match (index.get(&row.from_id), index.get(&row.to_id)) {
            (Some(Some(a)), Some(Some(b))) => pairs.push((*a, *b)),
            (Some(_), Some(_)) => stats.edges_outside_bbox += 1,
            _ => stats.edges_unknown_node += 1,
        }
    }
    if stats.edges_unknown_node > 0 {
        log::warn!(
            "{edges_name}: dropped {} edges referencing unknown nodes",
            stats.edges_unknown_node
        );
    }
    let n_pairs = pairs.len();
    let net = RawNetwork::from_indexed(kept, pairs);
    stats.edges_duplicate_or_loop = n_pairs - net.edges().len();
    Ok((net, stats))
}

/// Reads an undirected edge blacklist (`from_id,to_id`).
pub fn load_blacklist(path: &Path) -> Result<Vec<(String, String)>, GeoError> {
    let name = path.display().to_string();
    let mut rdr = reader(open(path)?);
    rdr.deserialize::<EdgeRow>()
        .map(|r| r.map(|e| (e.from_id, e.to_id)).map_err(|e| csv_error(&name, e)))
        .collect()
}
