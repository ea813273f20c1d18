//! Raw per-cell component fields: vegetation, green-space fraction,
//! slope, transit stops, land-use mix and the per-capita transform.
//! Street-derived fields (SWL, SI) and the catchment area (ISO) are
//! produced by the network module with the same `ComponentField` carrier.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::PolygonGeometry;
use crate::grid::{CellId, GridSpec, Point};
use crate::io::PointRecord;
use crate::raster::{alignment_factor, same_grid, RasterLayer, DEFAULT_NODATA};

pub const MAX_LUM: f64 = 1.6094379124341003; // ln 5

/// The eight walkability components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ComponentKind {
    Swl,
    Si,
    Gs,
    Ndvi,
    Slope,
    Pt,
    Lum,
    Iso,
}

impl ComponentKind {
    pub const ALL: [ComponentKind; 8] = [
        ComponentKind::Swl,
        ComponentKind::Si,
        ComponentKind::Gs,
        ComponentKind::Ndvi,
        ComponentKind::Slope,
        ComponentKind::Pt,
        ComponentKind::Lum,
        ComponentKind::Iso,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ComponentKind::Swl => "SWL",
            ComponentKind::Si => "SI",
            ComponentKind::Gs => "GS",
            ComponentKind::Ndvi => "NDVI",
            ComponentKind::Slope => "SLOPE",
            ComponentKind::Pt => "PT",
            ComponentKind::Lum => "LUM",
            ComponentKind::Iso => "ISO",
        }
    }

    pub fn file_stem(&self) -> &'static str {
        match self {
            ComponentKind::Swl => "swl",
            ComponentKind::Si => "si",
            ComponentKind::Gs => "gs",
            ComponentKind::Ndvi => "ndvi",
            ComponentKind::Slope => "slope",
            ComponentKind::Pt => "pt",
            ComponentKind::Lum => "lum",
            ComponentKind::Iso => "iso",
        }
    }

    pub fn from_name(name: &str) -> Option<ComponentKind> {
        ComponentKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(name))
    }
}

impl std::fmt::Display for ComponentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A raw component raster. Construction checks each kind's value range;
/// the integer constraint on SI/PT counts is waived for per-capita
/// variants, which are ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentField {
    kind: ComponentKind,
    raster: RasterLayer,
    per_capita: bool,
}

impl ComponentField {
    pub fn new(kind: ComponentKind, raster: RasterLayer) -> Result<Self> {
        Self::new_flagged(kind, raster, false)
    }

    pub fn new_flagged(kind: ComponentKind, raster: RasterLayer, per_capita: bool) -> Result<Self> {
        let field = ComponentField {
            kind,
            raster,
            per_capita,
        };
        field.validate()?;
        Ok(field)
    }

    pub fn kind(&self) -> ComponentKind {
        self.kind
    }

    pub fn raster(&self) -> &RasterLayer {
        &self.raster
    }

    pub fn into_raster(self) -> RasterLayer {
        self.raster
    }

    pub fn grid(&self) -> &GridSpec {
        self.raster.grid()
    }

    pub fn is_per_capita(&self) -> bool {
        self.per_capita
    }

    fn validate(&self) -> Result<()> {
        let check = |ok: bool, c: CellId, v: f64, what: &str| -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidField(format!(
                    "{} value {v} at row {} col {} violates {what}",
                    self.kind, c.row, c.col
                )))
            }
        };
        for (c, v) in self.raster.iter_cells() {
            let Some(v) = v else { continue };
            match self.kind {
                ComponentKind::Swl | ComponentKind::Slope | ComponentKind::Iso => {
                    check(v >= 0.0, c, v, ">= 0")?;
                }
                ComponentKind::Si | ComponentKind::Pt => {
                    check(v >= 0.0, c, v, ">= 0")?;
                    if !self.per_capita {
                        check(v.fract() == 0.0, c, v, "integer count")?;
                    }
                }
                ComponentKind::Gs => check((0.0..=1.0).contains(&v), c, v, "[0, 1]")?,
                ComponentKind::Ndvi => check((-1.0..=1.0).contains(&v), c, v, "[-1, 1]")?,
                ComponentKind::Lum => check((0.0..=MAX_LUM + 1e-12).contains(&v), c, v, "[0, ln 5]")?,
            }
        }
        Ok(())
    }
}

/// CORINE codes remapped to the five walkability land-use classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LandUseClass {
    UrbanFabric,
    IndustrialCommercialTransport,
    GreenUrban,
    SportsLeisure,
    AgriculturalNatural,
    Unclassified,
}

impl LandUseClass {
    /// 1..=5 for the named classes, `None` for unclassified.
    pub fn class_number(&self) -> Option<u8> {
        match self {
            LandUseClass::UrbanFabric => Some(1),
            LandUseClass::IndustrialCommercialTransport => Some(2),
            LandUseClass::GreenUrban => Some(3),
            LandUseClass::SportsLeisure => Some(4),
            LandUseClass::AgriculturalNatural => Some(5),
            LandUseClass::Unclassified => None,
        }
    }
}

pub fn remap_corine(code: i64) -> LandUseClass {
    match code {
        111 | 112 => LandUseClass::UrbanFabric,
        121..=124 => LandUseClass::IndustrialCommercialTransport,
        141 => LandUseClass::GreenUrban,
        142 => LandUseClass::SportsLeisure,
        211..=244 | 311..=324 | 333 | 511 | 512 => LandUseClass::AgriculturalNatural,
        _ => LandUseClass::Unclassified,
    }
}

/// Block mean of a finer raster under `grid`; nodata pixels are skipped
/// and an all-nodata block stays nodata.
fn block_mean(fine: &RasterLayer, grid: &GridSpec) -> Result<RasterLayer> {
    let factor = alignment_factor(fine.grid(), grid)?;
    let values: Vec<f64> = (0..grid.n_cells())
        .into_par_iter()
        .map(|i| {
            let c = grid.from_linear(i);
            let mut sum = 0.0;
            let mut count = 0usize;
            for dr in 0..factor {
                for dc in 0..factor {
                    let pixel = CellId::new(
                        c.row * factor as u32 + dr as u32,
                        c.col * factor as u32 + dc as u32,
                    );
                    if let Some(v) = fine.value(pixel) {
                        sum += v;
                        count += 1;
                    }
                }
            }
            if count == 0 {
                DEFAULT_NODATA
            } else {
                sum / count as f64
            }
        })
        .collect();
    RasterLayer::from_values(grid.clone(), values, DEFAULT_NODATA)
}

/// Mean vegetation index per cell from a finer-resolution raster.
pub fn ndvi_field(fine: &RasterLayer, grid: &GridSpec) -> Result<ComponentField> {
    ComponentField::new(ComponentKind::Ndvi, block_mean(fine, grid)?)
}

/// Fraction of each cell covered by the union of green polygons,
/// estimated on a centered `supersample x supersample` point lattice.
pub fn green_fraction_field(
    green_polys: &[PolygonGeometry],
    grid: &GridSpec,
    supersample: usize,
) -> Result<ComponentField> {
    if supersample == 0 {
        return Err(Error::Config("gs.supersample must be >= 1".into()));
    }
    for p in green_polys {
        p.validate()?;
    }
    let boxes: Vec<(Point, Point)> = green_polys.iter().map(|p| p.bounding_box()).collect();
    let s = grid.cell_size;
    let step = s / supersample as f64;
    let n_samples = (supersample * supersample) as f64;

    let values: Vec<f64> = (0..grid.n_cells())
        .into_par_iter()
        .map(|i| {
            let c = grid.from_linear(i);
            let x0 = grid.origin_x + c.col as f64 * s;
            let y0 = grid.origin_y + c.row as f64 * s;
            // Polygons whose bbox misses the cell can't cover any sample.
            let candidates: Vec<usize> = boxes
                .iter()
                .enumerate()
                .filter(|(_, (lo, hi))| lo.x < x0 + s && hi.x > x0 && lo.y < y0 + s && hi.y > y0)
                .map(|(j, _)| j)
                .collect();
            if candidates.is_empty() {
                return 0.0;
            }
            let mut covered = 0usize;
            for si in 0..supersample {
                let x = x0 + (si as f64 + 0.5) * step;
                for sj in 0..supersample {
                    let y = y0 + (sj as f64 + 0.5) * step;
                    let p = Point::new(x, y);
                    if candidates.iter().any(|&j| green_polys[j].contains(p)) {
                        covered += 1;
                    }
                }
            }
            covered as f64 / n_samples
        })
        .collect();
    ComponentField::new(
        ComponentKind::Gs,
        RasterLayer::from_values(grid.clone(), values, DEFAULT_NODATA)?,
    )
}

/// Per-pixel slope in degrees by the Horn 3x3 stencil. Border pixels use
/// edge replication; nodata neighbors fall back to the center elevation
/// and nodata centers stay nodata.
fn horn_slope_degrees(dem: &RasterLayer) -> RasterLayer {
    let g = dem.grid();
    let (n_rows, n_cols) = (g.n_rows as i64, g.n_cols as i64);
    let d = g.cell_size;
    let values: Vec<f64> = (0..g.n_cells())
        .into_par_iter()
        .map(|i| {
            let c = g.from_linear(i);
            let Some(center) = dem.value(c) else {
                return DEFAULT_NODATA;
            };
            let z = |dr: i64, dc: i64| -> f64 {
                let r = (c.row as i64 + dr).clamp(0, n_rows - 1);
                let cc = (c.col as i64 + dc).clamp(0, n_cols - 1);
                dem.value(CellId::new(r as u32, cc as u32)).unwrap_or(center)
            };
            // Row +1 is north of the center under the south-origin layout.
            let (nw, n, ne) = (z(1, -1), z(1, 0), z(1, 1));
            let (w, e) = (z(0, -1), z(0, 1));
            let (sw, s, se) = (z(-1, -1), z(-1, 0), z(-1, 1));
            let dzdx = ((ne + 2.0 * e + se) - (nw + 2.0 * w + sw)) / (8.0 * d);
            let dzdy = ((nw + 2.0 * n + ne) - (sw + 2.0 * s + se)) / (8.0 * d);
            dzdx.hypot(dzdy).atan().to_degrees()
        })
        .collect();
    RasterLayer::from_values(g.clone(), values, DEFAULT_NODATA).expect("slope values are finite")
}

/// Mean Horn slope (degrees) of the DEM pixels under each cell.
pub fn slope_field(dem: &RasterLayer, grid: &GridSpec) -> Result<ComponentField> {
    alignment_factor(dem.grid(), grid)?;
    let pixel_slopes = horn_slope_degrees(dem);
    ComponentField::new(ComponentKind::Slope, block_mean(&pixel_slopes, grid)?)
}

/// Count of transit stops per cell; out-of-extent stops are ignored and
/// records are not deduplicated across categories.
pub fn pt_field(stops: &[PointRecord], grid: &GridSpec) -> Result<ComponentField> {
    let mut layer = RasterLayer::filled(grid.clone(), 0.0, DEFAULT_NODATA);
    for stop in stops {
        if let Some(cell) = grid.cell_of_point(stop.location) {
            layer.set(cell, layer.raw(cell) + 1.0);
        }
    }
    ComponentField::new(ComponentKind::Pt, layer)
}

/// Land-use-mix entropy per cell: Shannon entropy (natural log) of the
/// remapped class proportions in the `(2r+1)^2` window clipped at grid
/// borders. Unclassified codes and nodata are excluded; an all-excluded
/// window is nodata.
pub fn lum_field(corine: &RasterLayer, grid: &GridSpec, window_radius: usize) -> Result<ComponentField> {
    if !same_grid(corine.grid(), grid) {
        return Err(Error::Misaligned("land-cover raster must be at grid resolution".into()));
    }
    let r = window_radius as i64;
    let (n_rows, n_cols) = (grid.n_rows as i64, grid.n_cols as i64);
    let values: Vec<f64> = (0..grid.n_cells())
        .into_par_iter()
        .map(|i| {
            let c = grid.from_linear(i);
            let mut counts = [0usize; 5];
            let row0 = (c.row as i64 - r).max(0);
            let row1 = (c.row as i64 + r).min(n_rows - 1);
            let col0 = (c.col as i64 - r).max(0);
            let col1 = (c.col as i64 + r).min(n_cols - 1);
            for row in row0..=row1 {
                for col in col0..=col1 {
                    let Some(v) = corine.value(CellId::new(row as u32, col as u32)) else {
                        continue;
                    };
                    let code = v.round();
                    if (v - code).abs() > 1e-6 {
                        continue; // not a land-cover code
                    }
                    if let Some(class) = remap_corine(code as i64).class_number() {
                        counts[(class - 1) as usize] += 1;
                    }
                }
            }
            let total: usize = counts.iter().sum();
            if total == 0 {
                return DEFAULT_NODATA;
            }
            let mut acc = 0.0;
            for &n in &counts {
                if n > 0 {
                    let q = n as f64 / total as f64;
                    acc += q * q.ln();
                }
            }
            let h = -acc;
            if h == 0.0 {
                0.0 // normalize -0.0
            } else {
                h.min(MAX_LUM)
            }
        })
        .collect();
    ComponentField::new(
        ComponentKind::Lum,
        RasterLayer::from_values(grid.clone(), values, DEFAULT_NODATA)?,
    )
}

/// Per-capita transform: value / max(population, 1). Applies to SWL, SI,
/// GS and PT only; nodata propagates from either input.
pub fn per_capita(field: &ComponentField, pop: &RasterLayer) -> Result<ComponentField> {
    match field.kind() {
        ComponentKind::Swl | ComponentKind::Si | ComponentKind::Gs | ComponentKind::Pt => {}
        other => {
            return Err(Error::UnsupportedKind {
                kind: other.name(),
                operation: "per_capita",
            });
        }
    }
    if !same_grid(field.grid(), pop.grid()) {
        return Err(Error::Misaligned("population raster must match the component grid".into()));
    }
    let grid = field.grid().clone();
    let mut layer = RasterLayer::nodata_filled(grid.clone(), DEFAULT_NODATA);
    for (c, v) in field.raster().iter_cells() {
        let (Some(v), Some(p)) = (v, pop.value(c)) else {
            continue;
        };
        layer.set(c, v / p.max(1.0));
    }
    ComponentField::new_flagged(field.kind(), layer, true)
}
