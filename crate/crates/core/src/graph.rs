//! Pedestrian street network: undirected graph construction, per-cell
//! intersection counts, walkable-length clipping and time-budgeted
//! network isochrones.

use std::collections::hash_map::Entry;
use std::collections::{BinaryHeap, HashMap};

use rayon::prelude::*;

use crate::components::{ComponentField, ComponentKind};
use crate::error::{Error, Result};
use crate::grid::{CellId, GridSpec, Point};
use crate::io::{NodeRecord, RawEdge};
use crate::raster::{RasterLayer, DEFAULT_NODATA};

/// Polyline endpoints must coincide with their node coordinates within
/// this straight-line tolerance (meters).
const ENDPOINT_TOL_M: f64 = 1e-6;
/// Relative tolerance between an edge's stored length and its polyline
/// length, for geometry-backed edges.
const LENGTH_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct GraphEdge {
    pub a: u32,
    pub b: u32,
    pub polyline: Vec<Point>,
    pub length: f64,
}

/// Undirected walking network. Immutable after construction; safe to share
/// across threads.
#[derive(Debug, Clone)]
pub struct PedestrianGraph {
    node_ids: Vec<i64>,
    node_points: Vec<Point>,
    edges: Vec<GraphEdge>,
    /// Incident edge indices per node; a self-loop appears twice, so
    /// `adjacency[n].len()` is the node degree.
    adjacency: Vec<Vec<u32>>,
}

impl PedestrianGraph {
    pub fn n_nodes(&self) -> usize {
        self.node_points.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn node_point(&self, n: u32) -> Point {
        self.node_points[n as usize]
    }

    pub fn node_id(&self, n: u32) -> i64 {
        self.node_ids[n as usize]
    }

    pub fn edges(&self) -> &[GraphEdge] {
        &self.edges
    }

    pub fn degree(&self, n: u32) -> usize {
        self.adjacency[n as usize].len()
    }

    pub fn incident_edges(&self, n: u32) -> &[u32] {
        &self.adjacency[n as usize]
    }

    pub fn total_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).sum()
    }
}

fn polyline_len(polyline: &[Point]) -> f64 {
    polyline.windows(2).map(|w| w[0].distance(&w[1])).sum()
}

fn coord_bits(polyline: &[Point]) -> Vec<(u64, u64)> {
    polyline.iter().map(|p| (p.x.to_bits(), p.y.to_bits())).collect()
}

/// Build the undirected graph from node records and raw edges.
///
/// Polylines must start/end at their endpoint node coordinates within
/// 1e-6 m (either orientation; reversed polylines are flipped). Exact
/// duplicates (same endpoints, identical geometry) are dropped, as are
/// zero-length edges.
pub fn build_graph(nodes: &[NodeRecord], edges: &[RawEdge]) -> Result<PedestrianGraph> {
    let mut index_of: HashMap<i64, u32> = HashMap::with_capacity(nodes.len());
    let mut node_ids = Vec::with_capacity(nodes.len());
    let mut node_points = Vec::with_capacity(nodes.len());
    for n in nodes {
        if !n.location.is_finite() {
            return Err(Error::InvalidGraph(format!("node {} has non-finite coordinates", n.id)));
        }
        match index_of.entry(n.id) {
            Entry::Occupied(_) => {
                return Err(Error::InvalidGraph(format!("duplicate node id {}", n.id)));
            }
            Entry::Vacant(slot) => {
                slot.insert(node_ids.len() as u32);
            }
        }
        node_ids.push(n.id);
        node_points.push(n.location);
    }

    let mut kept: Vec<GraphEdge> = Vec::with_capacity(edges.len());
    let mut seen: HashMap<(u32, u32, Vec<(u64, u64)>), ()> = HashMap::new();
    for e in edges {
        let edge_name = || format!("edge {}-{} (row {})", e.u, e.v, e.row);
        let a = *index_of
            .get(&e.u)
            .ok_or_else(|| Error::InvalidGraph(format!("{} references unknown node {}", edge_name(), e.u)))?;
        let b = *index_of
            .get(&e.v)
            .ok_or_else(|| Error::InvalidGraph(format!("{} references unknown node {}", edge_name(), e.v)))?;

        if e.polyline.len() < 2 {
            return Err(Error::InvalidGraph(format!("{} has fewer than 2 polyline vertices", edge_name())));
        }
        let pa = node_points[a as usize];
        let pb = node_points[b as usize];
        let first = e.polyline[0];
        let last = *e.polyline.last().unwrap();
        let forward = first.distance(&pa) <= ENDPOINT_TOL_M && last.distance(&pb) <= ENDPOINT_TOL_M;
        let reversed = first.distance(&pb) <= ENDPOINT_TOL_M && last.distance(&pa) <= ENDPOINT_TOL_M;
        let polyline: Vec<Point> = if forward {
            e.polyline.clone()
        } else if reversed {
            e.polyline.iter().rev().copied().collect()
        } else {
            return Err(Error::InvalidGraph(format!(
                "{} polyline does not meet its endpoints within {ENDPOINT_TOL_M} m \
                 (ends at ({:.3}, {:.3})..({:.3}, {:.3}))",
                edge_name(),
                first.x,
                first.y,
                last.x,
                last.y
            )));
        };

        let geom_len = polyline_len(&polyline);
        if e.had_geometry {
            let scale = geom_len.max(e.length).max(1.0);
            if (e.length - geom_len).abs() > LENGTH_REL_TOL * scale {
                return Err(Error::InvalidGraph(format!(
                    "{} length {} disagrees with polyline length {}",
                    edge_name(),
                    e.length,
                    geom_len
                )));
            }
        }
        if !e.length.is_finite() || e.length < 0.0 {
            return Err(Error::InvalidGraph(format!("{} has invalid length {}", edge_name(), e.length)));
        }
        if e.length == 0.0 {
            continue; // zero-length edges dropped
        }

        // Canonical orientation for duplicate detection.
        let (ca, cb, canon) = if a < b {
            (a, b, polyline.clone())
        } else if a > b {
            (b, a, polyline.iter().rev().copied().collect())
        } else {
            let fwd = coord_bits(&polyline);
            let rev: Vec<_> = fwd.iter().rev().copied().collect();
            if fwd <= rev {
                (a, b, polyline.clone())
            } else {
                (a, b, polyline.iter().rev().copied().collect())
            }
        };
        if seen.insert((ca, cb, coord_bits(&canon)), ()).is_some() {
            continue; // exact duplicate
        }

        kept.push(GraphEdge {
            a,
            b,
            polyline,
            length: e.length,
        });
    }

    let mut adjacency = vec![Vec::new(); node_points.len()];
    for (i, e) in kept.iter().enumerate() {
        adjacency[e.a as usize].push(i as u32);
        adjacency[e.b as usize].push(i as u32);
        // a == b lands twice via the two pushes above, counting the
        // self-loop twice toward degree, as intended.
    }

    Ok(PedestrianGraph {
        node_ids,
        node_points,
        edges: kept,
        adjacency,
    })
}

/// Per-cell count of nodes where three or more streets meet (undirected
/// degree >= 3; self-loops count twice).
pub fn count_intersections(g: &PedestrianGraph, grid: &GridSpec) -> Result<ComponentField> {
    let mut layer = RasterLayer::filled(grid.clone(), 0.0, DEFAULT_NODATA);
    for n in 0..g.n_nodes() as u32 {
        if g.degree(n) >= 3 {
            if let Some(cell) = grid.cell_of_point(g.node_point(n)) {
                layer.set(cell, layer.raw(cell) + 1.0);
            }
        }
    }
    ComponentField::new(ComponentKind::Si, layer)
}

/// Total walkable street length per cell. Polylines are split at cell
/// boundaries and each fragment accrues to the cell containing its
/// midpoint, which lands boundary-collinear fragments on their half-open
/// side. Fragment lengths are scaled by `edge.length / polyline_length`
/// so edges with declared lengths conserve them.
pub fn clip_walk_length(g: &PedestrianGraph, grid: &GridSpec) -> Result<ComponentField> {
    let mut layer = RasterLayer::filled(grid.clone(), 0.0, DEFAULT_NODATA);
    let mut ts: Vec<f64> = Vec::new();
    for edge in &g.edges {
        let geom_len = polyline_len(&edge.polyline);
        if geom_len == 0.0 {
            continue;
        }
        let scale = edge.length / geom_len;
        for seg in edge.polyline.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let seg_len = a.distance(&b);
            if seg_len == 0.0 {
                continue;
            }
            ts.clear();
            ts.push(0.0);
            ts.push(1.0);
            axis_crossings(a.x, b.x, grid.origin_x, grid.cell_size, &mut ts);
            axis_crossings(a.y, b.y, grid.origin_y, grid.cell_size, &mut ts);
            ts.sort_by(|p, q| p.total_cmp(q));
            let mut prev = ts[0];
            for &t in &ts[1..] {
                if t - prev < 1e-12 {
                    continue;
                }
                let tm = 0.5 * (prev + t);
                let mid = Point::new(a.x + tm * (b.x - a.x), a.y + tm * (b.y - a.y));
                if let Some(cell) = grid.cell_of_point(mid) {
                    let frag = seg_len * (t - prev) * scale;
                    layer.set(cell, layer.raw(cell) + frag);
                }
                prev = t;
            }
        }
    }
    ComponentField::new(ComponentKind::Swl, layer)
}

/// Parameters `t` in (0,1) where the segment from coordinate `a` to `b`
/// crosses a grid line of pitch `s`.
fn axis_crossings(a: f64, b: f64, origin: f64, s: f64, ts: &mut Vec<f64>) {
    if a == b {
        return;
    }
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let i_lo = ((lo - origin) / s).floor() as i64 + 1;
    let i_hi = ((hi - origin) / s).ceil() as i64 - 1;
    for i in i_lo..=i_hi {
        let x = origin + i as f64 * s;
        if x > lo && x < hi {
            ts.push((x - a) / (b - a));
        }
    }
}

/// Walk-time budget, speed and centroid snap radius for isochrones.
#[derive(Debug, Clone, PartialEq)]
pub struct IsochroneParams {
    pub budget_s: f64,
    pub speed_m_s: f64,
    pub snap_radius_m: f64,
}

impl Default for IsochroneParams {
    fn default() -> Self {
        IsochroneParams {
            budget_s: 900.0,
            speed_m_s: 5.1 * 1000.0 / 3600.0,
            snap_radius_m: 100.0,
        }
    }
}

impl IsochroneParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.budget_s > 0.0) || !self.budget_s.is_finite() {
            return Err(Error::Config(format!("isochrone budget must be > 0, got {}", self.budget_s)));
        }
        if !(self.speed_m_s > 0.0) || !self.speed_m_s.is_finite() {
            return Err(Error::Config(format!("walking speed must be > 0, got {}", self.speed_m_s)));
        }
        if !(self.snap_radius_m >= 0.0) || !self.snap_radius_m.is_finite() {
            return Err(Error::Config(format!("snap radius must be >= 0, got {}", self.snap_radius_m)));
        }
        Ok(())
    }

    /// Maximum on-network distance: budget x speed (1275 m at defaults).
    pub fn max_distance_m(&self) -> f64 {
        self.budget_s * self.speed_m_s
    }
}

/// Reached cells of one origin, with total network distances (origin snap
/// + shortest path + target snap). The origin itself is always present at
/// distance 0.
#[derive(Debug, Clone, PartialEq)]
pub struct IsochroneResult {
    pub origin: CellId,
    reached: Vec<(CellId, f64)>,
}

impl IsochroneResult {
    fn origin_only(origin: CellId) -> Self {
        IsochroneResult {
            origin,
            reached: vec![(origin, 0.0)],
        }
    }

    /// Assemble a result from explicit `(cell, distance)` pairs. The
    /// origin is inserted (or overwritten) at distance 0; other
    /// distances must be finite and non-negative.
    pub fn from_parts(origin: CellId, mut reached: Vec<(CellId, f64)>) -> Result<Self> {
        for (c, d) in &reached {
            if !d.is_finite() || *d < 0.0 {
                return Err(Error::InvalidField(format!(
                    "isochrone distance {d} at row {} col {} invalid",
                    c.row, c.col
                )));
            }
        }
        reached.retain(|(c, _)| *c != origin);
        reached.push((origin, 0.0));
        reached.sort_by(|a, b| a.0.cmp(&b.0));
        for w in reached.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidField(format!(
                    "duplicate cell (row {}, col {}) in isochrone",
                    w[0].0.row, w[0].0.col
                )));
            }
        }
        Ok(IsochroneResult { origin, reached })
    }

    pub fn len(&self) -> usize {
        self.reached.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reached.is_empty()
    }

    /// `(cell, distance)` pairs ordered by (row, col).
    pub fn iter(&self) -> impl Iterator<Item = (CellId, f64)> + '_ {
        self.reached.iter().copied()
    }

    pub fn distance(&self, cell: CellId) -> Option<f64> {
        self.reached
            .binary_search_by(|(c, _)| c.cmp(&cell))
            .ok()
            .map(|i| self.reached[i].1)
    }
}

/// One isochrone per grid cell, indexed by linear cell index.
#[derive(Debug, Clone)]
pub struct Isochrones {
    grid: GridSpec,
    per_cell: Vec<IsochroneResult>,
}

impl Isochrones {
    /// Assemble from per-cell results in linear cell order.
    pub fn from_results(grid: GridSpec, per_cell: Vec<IsochroneResult>) -> Result<Self> {
        if per_cell.len() != grid.n_cells() {
            return Err(Error::InvalidField(format!(
                "{} isochrones for {} cells",
                per_cell.len(),
                grid.n_cells()
            )));
        }
        for (i, iso) in per_cell.iter().enumerate() {
            if grid.linear(iso.origin) != i {
                return Err(Error::InvalidField(format!(
                    "isochrone at slot {i} has origin (row {}, col {})",
                    iso.origin.row, iso.origin.col
                )));
            }
        }
        Ok(Isochrones { grid, per_cell })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn for_cell(&self, c: CellId) -> &IsochroneResult {
        &self.per_cell[self.grid.linear(c)]
    }

    pub fn iter(&self) -> impl Iterator<Item = &IsochroneResult> {
        self.per_cell.iter()
    }
}

/// Spatial bucket index over graph nodes for nearest-node snapping.
struct NodeLocator {
    buckets: HashMap<(i64, i64), Vec<u32>>,
    bucket_size: f64,
}

impl NodeLocator {
    fn new(points: &[Point], bucket_size: f64) -> Self {
        let mut buckets: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            let key = (
                (p.x / bucket_size).floor() as i64,
                (p.y / bucket_size).floor() as i64,
            );
            buckets.entry(key).or_default().push(i as u32);
        }
        NodeLocator { buckets, bucket_size }
    }

    /// Nearest node within `radius` of `p`; ties broken toward the lower
    /// node index. Returns `(node, distance)`.
    fn nearest_within(&self, points: &[Point], p: Point, radius: f64) -> Option<(u32, f64)> {
        let b = self.bucket_size;
        let kx0 = ((p.x - radius) / b).floor() as i64;
        let kx1 = ((p.x + radius) / b).floor() as i64;
        let ky0 = ((p.y - radius) / b).floor() as i64;
        let ky1 = ((p.y + radius) / b).floor() as i64;
        let mut best: Option<(f64, u32)> = None;
        for kx in kx0..=kx1 {
            for ky in ky0..=ky1 {
                if let Some(nodes) = self.buckets.get(&(kx, ky)) {
                    for &n in nodes {
                        let d = points[n as usize].distance(&p);
                        if d <= radius {
                            let cand = (d, n);
                            if best.map_or(true, |cur| cand < cur) {
                                best = Some(cand);
                            }
                        }
                    }
                }
            }
        }
        best.map(|(d, n)| (n, d))
    }
}

/// Precomputed snapping tables shared by all per-origin searches.
pub struct IsochroneEngine<'g> {
    graph: &'g PedestrianGraph,
    grid: GridSpec,
    params: IsochroneParams,
    /// Nearest node and snap distance per cell (linear index).
    cell_snaps: Vec<Option<(u32, f64)>>,
    /// Inverse of `cell_snaps`: cells snapped to each node.
    node_cells: Vec<Vec<(u32, f64)>>,
}

struct SearchScratch {
    dist: HashMap<u32, f64>,
    heap: BinaryHeap<HeapEntry>,
}

impl SearchScratch {
    fn new() -> Self {
        SearchScratch {
            dist: HashMap::new(),
            heap: BinaryHeap::new(),
        }
    }
}

/// Min-heap entry ordered by distance, then node for determinism.
#[derive(PartialEq)]
struct HeapEntry {
    dist: f64,
    node: u32,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl<'g> IsochroneEngine<'g> {
    pub fn new(graph: &'g PedestrianGraph, grid: &GridSpec, params: IsochroneParams) -> Result<Self> {
        params.validate()?;
        let bucket = if params.snap_radius_m > 0.0 {
            params.snap_radius_m
        } else {
            grid.cell_size
        };
        let locator = NodeLocator::new(&graph.node_points, bucket);
        let n_cells = grid.n_cells();
        let cell_snaps: Vec<Option<(u32, f64)>> = (0..n_cells)
            .into_par_iter()
            .map(|i| {
                let centroid = grid.centroid(grid.from_linear(i));
                locator.nearest_within(&graph.node_points, centroid, params.snap_radius_m)
            })
            .collect();
        let mut node_cells = vec![Vec::new(); graph.n_nodes()];
        for (i, snap) in cell_snaps.iter().enumerate() {
            if let Some((node, d)) = snap {
                node_cells[*node as usize].push((i as u32, *d));
            }
        }
        Ok(IsochroneEngine {
            graph,
            grid: grid.clone(),
            params,
            cell_snaps,
            node_cells,
        })
    }

    pub fn isochrone(&self, origin: CellId) -> IsochroneResult {
        let mut scratch = SearchScratch::new();
        self.isochrone_with(origin, &mut scratch)
    }

    fn isochrone_with(&self, origin: CellId, scratch: &mut SearchScratch) -> IsochroneResult {
        let max_dist = self.params.max_distance_m();
        let origin_linear = self.grid.linear(origin);
        let Some((origin_node, snap_o)) = self.cell_snaps[origin_linear] else {
            return IsochroneResult::origin_only(origin);
        };
        if snap_o > max_dist {
            return IsochroneResult::origin_only(origin);
        }
        let budget_left = max_dist - snap_o;

        let dist = &mut scratch.dist;
        let heap = &mut scratch.heap;
        dist.clear();
        heap.clear();
        dist.insert(origin_node, 0.0);
        heap.push(HeapEntry {
            dist: 0.0,
            node: origin_node,
        });

        let mut reached: Vec<(CellId, f64)> = Vec::new();
        while let Some(HeapEntry { dist: d, node: u }) = heap.pop() {
            if d > dist[&u] {
                continue; // stale entry
            }
            for (cell_linear, snap_c) in &self.node_cells[u as usize] {
                let total = snap_o + d + snap_c;
                if total <= max_dist && *cell_linear as usize != origin_linear {
                    reached.push((self.grid.from_linear(*cell_linear as usize), total));
                }
            }
            for &ei in self.graph.incident_edges(u) {
                let e = &self.graph.edges[ei as usize];
                let v = if e.a == u { e.b } else { e.a };
                let nd = d + e.length;
                if nd > budget_left {
                    continue;
                }
                let better = dist.get(&v).map_or(true, |&cur| nd < cur);
                if better {
                    dist.insert(v, nd);
                    heap.push(HeapEntry { dist: nd, node: v });
                }
            }
        }

        reached.push((origin, 0.0));
        reached.sort_by(|a, b| a.0.cmp(&b.0));
        IsochroneResult { origin, reached }
    }

    /// Isochrones for every grid cell, computed in parallel. The output is
    /// independent of thread count.
    pub fn all_isochrones(&self) -> Isochrones {
        let per_cell: Vec<IsochroneResult> = (0..self.grid.n_cells())
            .into_par_iter()
            .map_init(SearchScratch::new, |scratch, i| {
                self.isochrone_with(self.grid.from_linear(i), scratch)
            })
            .collect();
        Isochrones {
            grid: self.grid.clone(),
            per_cell,
        }
    }
}

/// Single-origin convenience wrapper (builds the snap tables each call;
/// use [`IsochroneEngine`] for batches).
pub fn isochrone(
    g: &PedestrianGraph,
    origin_cell: CellId,
    grid: &GridSpec,
    params: &IsochroneParams,
) -> Result<IsochroneResult> {
    Ok(IsochroneEngine::new(g, grid, params.clone())?.isochrone(origin_cell))
}

/// Walkable catchment area per cell: reached-cell count x cell area.
pub fn iso_area_field(grid: &GridSpec, isochrones: &Isochrones) -> Result<ComponentField> {
    let cell_area = grid.cell_size * grid.cell_size;
    let mut layer = RasterLayer::filled(grid.clone(), 0.0, DEFAULT_NODATA);
    for iso in isochrones.iter() {
        layer.set(iso.origin, iso.len() as f64 * cell_area);
    }
    ComponentField::new(ComponentKind::Iso, layer)
}
