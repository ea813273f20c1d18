//! Deterministic synthetic-city fixture: a radial city with a dense
//! street core, parks, a hill, transit stops and population decay.
//! Every file is a pure function of the fixture parameters, so repeated
//! generation is byte-identical.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use walkgrid_core::error::{Error, Result};
use walkgrid_core::geom::PolygonGeometry;
use walkgrid_core::grid::{GridSpec, Point};
use walkgrid_core::io::write_ascii_grid;
use walkgrid_core::raster::{RasterLayer, DEFAULT_NODATA};

#[derive(Debug, Clone)]
pub struct FixtureSpec {
    pub rows: u32,
    pub cols: u32,
    /// NDVI pixels per cell edge (e.g. 4 -> 25 m pixels).
    pub ndvi_factor: u32,
    /// DEM pixels per cell edge.
    pub dem_factor: u32,
    /// Street-grid line spacing in the core / mid ring / outskirts.
    pub core_spacing_m: f64,
    pub mid_spacing_m: f64,
    pub outer_spacing_m: f64,
}

impl FixtureSpec {
    /// The bundled 200 x 200 cell synthetic city (20 km x 20 km).
    pub fn city_200() -> Self {
        FixtureSpec {
            rows: 200,
            cols: 200,
            ndvi_factor: 4,
            dem_factor: 2,
            core_spacing_m: 100.0,
            mid_spacing_m: 300.0,
            outer_spacing_m: 800.0,
        }
    }

    /// Scale fixture: 10^6 cells with a ~50k-edge network. Rasters stay
    /// at cell resolution to keep file sizes workable.
    pub fn city_1000() -> Self {
        FixtureSpec {
            rows: 1000,
            cols: 1000,
            ndvi_factor: 1,
            dem_factor: 1,
            core_spacing_m: 180.0,
            mid_spacing_m: 550.0,
            outer_spacing_m: 1600.0,
        }
    }

    fn grid(&self) -> GridSpec {
        GridSpec::new(0.0, 0.0, 100.0, self.rows, self.cols).expect("fixture grid")
    }
}

fn hash2(a: u64, b: u64) -> u64 {
    let mut x = a
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(b.wrapping_mul(0xD1B5_4A32_D192_ED03));
    x ^= x >> 30;
    x = x.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^= x >> 31;
    x
}

/// Uniform in [0, 1).
fn unit(a: u64, b: u64) -> f64 {
    (hash2(a, b) >> 11) as f64 / (1u64 << 53) as f64
}

struct CityShape {
    w: f64,
    h: f64,
    cx: f64,
    cy: f64,
    r_min: f64,
    r_city: f64,
}

impl CityShape {
    fn of(spec: &FixtureSpec) -> Self {
        let w = spec.cols as f64 * 100.0;
        let h = spec.rows as f64 * 100.0;
        let r_min = w.min(h) / 2.0;
        CityShape {
            w,
            h,
            cx: w / 2.0,
            cy: h / 2.0,
            r_min,
            r_city: 0.92 * r_min,
        }
    }

    /// Distance from the city center, normalized by the half-extent.
    fn rel_dist(&self, x: f64, y: f64) -> f64 {
        ((x - self.cx).powi(2) + (y - self.cy).powi(2)).sqrt() / self.r_min
    }
}

/// Street-grid line coordinates along one axis: dense near the center,
/// sparse outside.
fn axis_positions(center: f64, hi: f64, shape: &CityShape, spec: &FixtureSpec) -> Vec<f64> {
    let r1 = 0.18 * shape.r_min;
    let r2 = 0.50 * shape.r_min;
    let step_at = |d: f64| {
        if d < r1 {
            spec.core_spacing_m
        } else if d < r2 {
            spec.mid_spacing_m
        } else {
            spec.outer_spacing_m
        }
    };
    let mut positions = vec![center];
    let mut p = center;
    loop {
        p += step_at(p - center);
        if p > hi - 50.0 {
            break;
        }
        positions.push(p);
    }
    let mut p = center;
    loop {
        p -= step_at(center - p);
        if p < 50.0 {
            break;
        }
        positions.push(p);
    }
    positions.sort_by(|a, b| a.total_cmp(b));
    positions
}

struct Network {
    nodes: Vec<(i64, Point)>,
    edges: Vec<(i64, i64, Point, Point)>,
}

fn build_network(spec: &FixtureSpec, shape: &CityShape) -> Network {
    let xs = axis_positions(shape.cx, shape.w, shape, spec);
    let ys = axis_positions(shape.cy, shape.h, shape, spec);

    // Node at each in-city crossing, with a small deterministic jitter.
    let mut node_at = vec![vec![None; xs.len()]; ys.len()];
    let mut nodes = Vec::new();
    for (j, &y) in ys.iter().enumerate() {
        for (i, &x) in xs.iter().enumerate() {
            let d = ((x - shape.cx).powi(2) + (y - shape.cy).powi(2)).sqrt();
            if d > shape.r_city {
                continue;
            }
            let jx = (unit(i as u64, j as u64 * 2 + 1) - 0.5) * 24.0;
            let jy = (unit(i as u64 * 2 + 1, j as u64) - 0.5) * 24.0;
            let id = nodes.len() as i64;
            node_at[j][i] = Some(id);
            nodes.push((id, Point::new(x + jx, y + jy)));
        }
    }

    let mut edges = Vec::new();
    for (j, row) in node_at.iter().enumerate() {
        for (i, slot) in row.iter().enumerate() {
            let Some(a) = *slot else { continue };
            if i + 1 < row.len() {
                if let Some(b) = row[i + 1] {
                    edges.push((a, b, nodes[a as usize].1, nodes[b as usize].1));
                }
            }
            if j + 1 < node_at.len() {
                if let Some(b) = node_at[j + 1][i] {
                    edges.push((a, b, nodes[a as usize].1, nodes[b as usize].1));
                }
            }
        }
    }
    Network { nodes, edges }
}

fn parks(shape: &CityShape) -> Vec<PolygonGeometry> {
    let s = shape.r_min;
    let rect = |id: &str, x0: f64, y0: f64, x1: f64, y1: f64| PolygonGeometry::rectangle(id, x0, y0, x1, y1);
    let mut central = rect(
        "park_central",
        shape.cx - 0.06 * s,
        shape.cy + 0.10 * s,
        shape.cx + 0.10 * s,
        shape.cy + 0.22 * s,
    );
    // Courtyard hole in the central park.
    central.holes.push(vec![
        Point::new(shape.cx - 0.01 * s, shape.cy + 0.14 * s),
        Point::new(shape.cx + 0.03 * s, shape.cy + 0.14 * s),
        Point::new(shape.cx + 0.03 * s, shape.cy + 0.18 * s),
        Point::new(shape.cx - 0.01 * s, shape.cy + 0.18 * s),
        Point::new(shape.cx - 0.01 * s, shape.cy + 0.14 * s),
    ]);
    vec![
        central,
        rect(
            "park_west",
            shape.cx - 0.45 * s,
            shape.cy - 0.15 * s,
            shape.cx - 0.25 * s,
            shape.cy + 0.05 * s,
        ),
        rect(
            "park_south",
            shape.cx + 0.05 * s,
            shape.cy - 0.40 * s,
            shape.cx + 0.30 * s,
            shape.cy - 0.28 * s,
        ),
        rect(
            "forest_east",
            shape.cx + 0.55 * s,
            shape.cy - 0.30 * s,
            shape.cx + 0.85 * s,
            shape.cy + 0.30 * s,
        ),
    ]
}

fn corine_code(shape: &CityShape, park_list: &[PolygonGeometry], x: f64, y: f64, i: u64, j: u64) -> f64 {
    if unit(i.wrapping_add(77), j.wrapping_add(991)) < 0.0005 {
        return DEFAULT_NODATA;
    }
    let p = Point::new(x, y);
    if park_list.iter().any(|poly| poly.contains(p)) {
        return 141.0;
    }
    let d = shape.rel_dist(x, y);
    // Sports grounds: two small patches near the inner ring.
    let sports_a = (x - (shape.cx + 0.20 * shape.r_min)).abs() < 300.0 && (y - shape.cy).abs() < 300.0;
    let sports_b = (x - shape.cx).abs() < 250.0 && (y - (shape.cy - 0.22 * shape.r_min)).abs() < 250.0;
    if sports_a || sports_b {
        return 142.0;
    }
    if d < 0.12 {
        return 111.0;
    }
    if d < 0.26 {
        return 112.0;
    }
    if d < 0.34 {
        // Industrial/commercial ring with some texture.
        return [121.0, 122.0, 123.0, 124.0][(hash2(i, j) % 4) as usize];
    }
    // River running north-south on the east side.
    if (x - (shape.cx + 0.42 * shape.r_min)).abs() < 150.0 {
        return 511.0;
    }
    if d < 0.75 {
        if unit(i, j.wrapping_add(3)) < 0.25 {
            return 311.0;
        }
        return 211.0;
    }
    if unit(i, j.wrapping_add(5)) < 0.55 {
        return 311.0;
    }
    [211.0, 231.0, 243.0, 324.0][(hash2(i.wrapping_add(13), j) % 4) as usize]
}

fn population(shape: &CityShape, x: f64, y: f64, i: u64, j: u64) -> f64 {
    let d = shape.rel_dist(x, y);
    let base = 620.0 * (-(d * 2.1) * (d * 2.1)).exp();
    let noise = unit(i.wrapping_add(31), j.wrapping_add(17));
    let p = (base * (0.6 + 0.8 * noise)).floor();
    if p < 1.0 && d > 0.85 {
        0.0
    } else {
        p
    }
}

fn urbanization_class(pop: f64) -> f64 {
    match pop {
        p if p >= 400.0 => 7.0,
        p if p >= 250.0 => 6.0,
        p if p >= 150.0 => 5.0,
        p if p >= 60.0 => 4.0,
        p if p >= 20.0 => 3.0,
        p if p >= 5.0 => 2.0,
        _ => 1.0,
    }
}

fn ndvi_pixel(shape: &CityShape, park_list: &[PolygonGeometry], x: f64, y: f64, i: u64, j: u64) -> f64 {
    if unit(i.wrapping_add(513), j.wrapping_add(2049)) < 0.001 {
        return DEFAULT_NODATA;
    }
    let d = shape.rel_dist(x, y).min(1.4);
    let mut v = 0.05 + 0.45 * d + 0.12 * (x / 270.0).sin() * (y / 330.0).cos();
    if park_list.iter().any(|poly| poly.contains(Point::new(x, y))) {
        v += 0.30;
    }
    v.clamp(-1.0, 1.0)
}

fn dem_elevation(shape: &CityShape, x: f64, y: f64) -> f64 {
    let hx = shape.cx + 0.40 * shape.r_min;
    let hy = shape.cy + 0.45 * shape.r_min;
    let sigma = 0.28 * shape.r_min;
    let hill = 85.0 * (-((x - hx).powi(2) + (y - hy).powi(2)) / (2.0 * sigma * sigma)).exp();
    hill + 0.004 * x + 6.0 * (x / 900.0).sin() * (y / 1100.0).sin()
}

fn raster_from_fn(grid: &GridSpec, f: impl Fn(f64, f64, u64, u64) -> f64 + Sync) -> RasterLayer {
    let values: Vec<f64> = (0..grid.n_cells())
        .into_par_iter()
        .map(|idx| {
            let c = grid.from_linear(idx);
            let p = grid.centroid(c);
            f(p.x, p.y, c.col as u64, c.row as u64)
        })
        .collect();
    RasterLayer::from_values(grid.clone(), values, DEFAULT_NODATA).expect("fixture raster")
}

fn fine_grid(spec: &FixtureSpec, factor: u32) -> GridSpec {
    GridSpec::new(
        0.0,
        0.0,
        100.0 / factor as f64,
        spec.rows * factor,
        spec.cols * factor,
    )
    .expect("fine grid")
}

fn json_ring(ring: &[Point]) -> String {
    let coords: Vec<String> = ring.iter().map(|p| format!("[{},{}]", p.x, p.y)).collect();
    format!("[{}]", coords.join(","))
}

fn polygon_feature(id: &str, rings: &[String]) -> String {
    format!(
        r#"{{"type":"Feature","properties":{{"id":"{id}"}},"geometry":{{"type":"Polygon","coordinates":[{}]}}}}"#,
        rings.join(",")
    )
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Generate all input files plus a ready-to-run config; returns the
/// config path.
pub fn generate(spec: &FixtureSpec, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let shape = CityShape::of(spec);
    let grid = spec.grid();

    // Street network.
    let network = build_network(spec, &shape);
    let mut nodes_csv = String::from("id,x,y\n");
    for (id, p) in &network.nodes {
        writeln!(nodes_csv, "{id},{},{}", p.x, p.y).unwrap();
    }
    write_file(&dir.join("nodes.csv"), &nodes_csv)?;
    let mut edges_csv = String::from("u,v,geometry\n");
    for (u, v, a, b) in &network.edges {
        writeln!(edges_csv, "{u},{v},\"LINESTRING({} {}, {} {})\"", a.x, a.y, b.x, b.y).unwrap();
    }
    write_file(&dir.join("edges.csv"), &edges_csv)?;

    // Transit stops at a deterministic subset of nodes.
    let categories = ["bus", "tram", "metro", "rail"];
    let mut stops_csv = String::from("x,y,category\n");
    for (id, p) in &network.nodes {
        let h = hash2(*id as u64, 0xFEED);
        if h % 9 == 0 {
            writeln!(stops_csv, "{},{},{}", p.x, p.y, categories[(h / 9 % 4) as usize]).unwrap();
        }
    }
    write_file(&dir.join("stops.csv"), &stops_csv)?;

    // Green polygons.
    let park_list = parks(&shape);
    let features: Vec<String> = park_list
        .iter()
        .map(|poly| {
            let mut rings = vec![json_ring(&poly.outer_ring)];
            rings.extend(poly.holes.iter().map(|h| json_ring(h)));
            polygon_feature(poly.id(), &rings)
        })
        .collect();
    write_file(
        &dir.join("green.geojson"),
        &format!(r#"{{"type":"FeatureCollection","features":[{}]}}"#, features.join(",")),
    )?;

    // Admin units: quadrants plus a two-part central district.
    let (w, h) = (shape.w, shape.h);
    let quad = |id: &str, x0: f64, y0: f64, x1: f64, y1: f64| {
        let ring = vec![
            Point::new(x0, y0),
            Point::new(x1, y0),
            Point::new(x1, y1),
            Point::new(x0, y1),
            Point::new(x0, y0),
        ];
        polygon_feature(id, &[json_ring(&ring)])
    };
    let center_part = |x0: f64, x1: f64| {
        json_ring(&[
            Point::new(x0, shape.cy - 0.2 * shape.r_min),
            Point::new(x1, shape.cy - 0.2 * shape.r_min),
            Point::new(x1, shape.cy + 0.2 * shape.r_min),
            Point::new(x0, shape.cy + 0.2 * shape.r_min),
            Point::new(x0, shape.cy - 0.2 * shape.r_min),
        ])
    };
    let central = format!(
        r#"{{"type":"Feature","properties":{{"id":"CENTER"}},"geometry":{{"type":"MultiPolygon","coordinates":[[{}],[{}]]}}}}"#,
        center_part(shape.cx - 0.3 * shape.r_min, shape.cx - 0.02 * shape.r_min),
        center_part(shape.cx + 0.02 * shape.r_min, shape.cx + 0.3 * shape.r_min),
    );
    let admin = format!(
        r#"{{"type":"FeatureCollection","features":[{},{},{},{},{}]}}"#,
        quad("SW", 0.0, 0.0, shape.cx, shape.cy),
        quad("SE", shape.cx, 0.0, w, shape.cy),
        quad("NW", 0.0, shape.cy, shape.cx, h),
        quad("NE", shape.cx, shape.cy, w, h),
        central,
    );
    write_file(&dir.join("admin.geojson"), &admin)?;

    // Rasters.
    let corine = raster_from_fn(&grid, |x, y, i, j| corine_code(&shape, &park_list, x, y, i, j));
    write_ascii_grid(&corine, dir.join("corine.asc"))?;
    let pop = raster_from_fn(&grid, |x, y, i, j| population(&shape, x, y, i, j));
    write_ascii_grid(&pop, dir.join("pop.asc"))?;
    let urb = raster_from_fn(&grid, |x, y, i, j| urbanization_class(population(&shape, x, y, i, j)));
    write_ascii_grid(&urb, dir.join("urb.asc"))?;
    let ndvi = raster_from_fn(&fine_grid(spec, spec.ndvi_factor), |x, y, i, j| {
        ndvi_pixel(&shape, &park_list, x, y, i, j)
    });
    write_ascii_grid(&ndvi, dir.join("ndvi.asc"))?;
    let dem = raster_from_fn(&fine_grid(spec, spec.dem_factor), |x, y, _, _| {
        dem_elevation(&shape, x, y)
    });
    write_ascii_grid(&dem, dir.join("dem.asc"))?;

    // Config.
    let config = format!(
        "# synthetic city fixture ({} x {} cells)\n\
         input.nodes = nodes.csv\n\
         input.edges = edges.csv\n\
         input.ndvi = ndvi.asc\n\
         input.dem = dem.asc\n\
         input.corine = corine.asc\n\
         input.pop = pop.asc\n\
         input.urbanization = urb.asc\n\
         input.green_polygons = green.geojson\n\
         input.transit_stops = stops.csv\n\
         input.admin_polygons = admin.geojson\n\
         grid.origin_x = 0\n\
         grid.origin_y = 0\n\
         grid.cell_size = 100\n\
         grid.rows = {}\n\
         grid.cols = {}\n\
         output.dir = out\n",
        spec.rows, spec.cols, spec.rows, spec.cols
    );
    let config_path = dir.join("walkgrid.cfg");
    write_file(&config_path, &config)?;
    Ok(config_path)
}
