#![allow(dead_code)]

//! Shared generators for the oracle test suites. Everything is seeded,
//! so failures reproduce.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use walkgrid_core::geom::PolygonGeometry;
use walkgrid_core::grid::{CellId, GridSpec, Point};
use walkgrid_core::io::{NodeRecord, RawEdge};
use walkgrid_core::raster::{RasterLayer, DEFAULT_NODATA};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_raster(grid: &GridSpec, rng: &mut ChaCha8Rng, nodata_fraction: f64, lo: f64, hi: f64) -> RasterLayer {
    let values: Vec<f64> = (0..grid.n_cells())
        .map(|_| {
            if rng.gen_bool(nodata_fraction) {
                DEFAULT_NODATA
            } else {
                rng.gen_range(lo..hi)
            }
        })
        .collect();
    RasterLayer::from_values(grid.clone(), values, DEFAULT_NODATA).unwrap()
}

/// Star-shaped polygon around a center: always simple, arbitrary concavity.
pub fn random_star_polygon(rng: &mut ChaCha8Rng, id: &str, cx: f64, cy: f64, r_min: f64, r_max: f64) -> PolygonGeometry {
    let n = rng.gen_range(5..14usize);
    let mut ring: Vec<Point> = (0..n)
        .map(|i| {
            let angle = i as f64 / n as f64 * std::f64::consts::TAU;
            let r = rng.gen_range(r_min..r_max);
            Point::new(cx + r * angle.cos(), cy + r * angle.sin())
        })
        .collect();
    ring.push(ring[0]);
    let mut props = std::collections::BTreeMap::new();
    props.insert("id".to_string(), id.to_string());
    PolygonGeometry::new(ring, Vec::new(), props).unwrap()
}

/// Random connected-ish network with straight chord geometry inside
/// `[0, extent] x [0, extent]`.
pub fn random_network(
    rng: &mut ChaCha8Rng,
    n_nodes: usize,
    extent: f64,
    extra_edges: usize,
) -> (Vec<NodeRecord>, Vec<RawEdge>) {
    let nodes: Vec<NodeRecord> = (0..n_nodes)
        .map(|i| NodeRecord {
            id: i as i64,
            location: Point::new(rng.gen_range(0.0..extent), rng.gen_range(0.0..extent)),
        })
        .collect();
    let mut edges = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut row = 0usize;
    let mut push_edge = |edges: &mut Vec<RawEdge>, seen: &mut std::collections::HashSet<(usize, usize)>, u: usize, v: usize| {
        if !seen.insert((u.min(v), u.max(v))) {
            return; // keep the edge set duplicate-free for recount oracles
        }
        let a = nodes[u].location;
        let b = nodes[v].location;
        let length = a.distance(&b);
        if length == 0.0 {
            return;
        }
        row += 1;
        edges.push(RawEdge {
            u: u as i64,
            v: v as i64,
            polyline: vec![a, b],
            length,
            had_geometry: true,
            row,
        });
    };
    // Spanning chain keeps most nodes reachable, then random chords.
    for i in 1..n_nodes {
        let j = rng.gen_range(0..i);
        push_edge(&mut edges, &mut seen, i, j);
    }
    for _ in 0..extra_edges {
        let u = rng.gen_range(0..n_nodes);
        let v = rng.gen_range(0..n_nodes);
        if u != v {
            push_edge(&mut edges, &mut seen, u, v);
        }
    }
    (nodes, edges)
}

pub fn all_cells(grid: &GridSpec) -> Vec<CellId> {
    (0..grid.n_cells()).map(|i| grid.from_linear(i)).collect()
}
