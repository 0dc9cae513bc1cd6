use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{ClusterId, ClusterNode, GeoError, RoadNetwork};

pub const NETWORK_FORMAT: &str = "busshare-road-network";
pub const NETWORK_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Bundle {
    format: String,
    version: u32,
    cluster_radius_m: f64,
    clusters: Vec<ClusterNode>,
    edges: Vec<(ClusterId, ClusterId)>,
}

/// Serializes a network as a versioned JSON document. The spatial index is
/// rebuilt on read.
pub fn write_road_network<W: Write>(net: &RoadNetwork, mut w: W) -> Result<(), GeoError> {
    let bundle = Bundle {
        format: NETWORK_FORMAT.to_string(),
        version: NETWORK_FORMAT_VERSION,
        cluster_radius_m: net.cluster_radius_m(),
        clusters: net.clusters().to_vec(),
        edges: net.edges().to_vec(),
    };
    serde_json::to_writer(&mut w, &bundle).map_err(|e| GeoError::Format(e.to_string()))?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn read_road_network<R: Read>(r: R) -> Result<RoadNetwork, GeoError> {
    let bundle: Bundle = serde_json::from_reader(r).map_err(|e| GeoError::Format(e.to_string()))?;
    if bundle.format != NETWORK_FORMAT {
        return Err(GeoError::Format(format!("expected format `{NETWORK_FORMAT}`, found `{}`", bundle.format)));
    }
    if bundle.version != NETWORK_FORMAT_VERSION {
        return Err(GeoError::Format(format!(
            "unsupported version {} (this build reads {NETWORK_FORMAT_VERSION})",
            bundle.version
        )));
    }
    RoadNetwork::from_parts(bundle.clusters, bundle.edges, bundle.cluster_radius_m)
}

#[cfg(test)]
mod tests {
    use super::super::LatLon;
    use super::*;

    fn sample() -> RoadNetwork {
        let clusters = (0..3)
            .map(|i| ClusterNode {
                cluster_id: ClusterId(i),
                centroid: LatLon { lat: 1.3 + 0.001 * i as f64 / 3.0, lon: 103.8 + 0.1 / 7.0 },
                member_ids: vec![format!("a{i}"), format!("b{i}")],
            })
            .collect();
        RoadNetwork::from_parts(clusters, vec![(ClusterId(0), ClusterId(1)), (ClusterId(2), ClusterId(1))], 20.0).unwrap()
    }

    #[test]
    fn round_trip_is_lossless() {
        let net = sample();
        let mut buf = Vec::new();
        write_road_network(&net, &mut buf).unwrap();
        let back = read_road_network(buf.as_slice()).unwrap();
        assert_eq!(back.clusters(), net.clusters());
        assert_eq!(back.edges(), net.edges());
        assert_eq!(back.cluster_radius_m(), 20.0);
    }

    #[test]
    fn rejects_other_versions() {
        let net = sample();
        let mut buf = Vec::new();
        write_road_network(&net, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap().replace("\"version\":1", "\"version\":9");
        assert!(matches!(read_road_network(text.as_bytes()), Err(GeoError::Format(_))));
        assert!(read_road_network(&b"{\"format\":\"nope\"}"[..]).is_err());
    }
}
