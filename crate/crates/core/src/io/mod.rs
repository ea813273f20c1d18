//! File formats: ASCII-grid rasters, CSV tables, GeoJSON polygons and
//! deterministic decile-map images.

mod ascii_grid;
mod geojson;
mod render;
mod tables;

pub use ascii_grid::{read_ascii_grid, write_ascii_grid};
pub use geojson::read_polygons_geojson;
pub use render::{render_decile_map, DECILE_PALETTE, NODATA_RGB};
pub use tables::{read_edges_csv, read_nodes_csv, read_points_csv, NodeRecord, PointRecord, RawEdge};

/// 17 significant digits: enough to reproduce any f64 bit pattern on parse.
pub fn fmt_g17(v: f64) -> String {
    format!("{v:.16e}")
}
