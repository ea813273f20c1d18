//! Index construction: Gaussian distance-decay smoothing over isochrone
//! cells, z-score standardization, weighted composition and decile
//! binning.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::components::{ComponentField, ComponentKind};
use crate::error::{Error, Result};
use crate::graph::Isochrones;
use crate::grid::{CellId, GridSpec};
use crate::raster::{same_grid, RasterLayer, DEFAULT_NODATA};

/// Spread of the Gaussian decay kernel. The default of 637.5 m is half
/// the default 1275 m maximum network distance, putting weight ~0.135 at
/// the catchment edge.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayParams {
    pub sigma_m: f64,
}

impl Default for DecayParams {
    fn default() -> Self {
        DecayParams { sigma_m: 637.5 }
    }
}

impl DecayParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_m > 0.0) || !self.sigma_m.is_finite() {
            return Err(Error::Config(format!("decay sigma must be > 0, got {}", self.sigma_m)));
        }
        Ok(())
    }
}

/// `exp(-d^2 / (2 sigma^2))`: 1 at distance 0, strictly decreasing.
pub fn gaussian_weight(d: f64, params: &DecayParams) -> f64 {
    debug_assert!(d >= 0.0);
    let s = params.sigma_m;
    (-d * d / (2.0 * s * s)).exp()
}

/// A component after isochrone-weighted averaging.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedField {
    kind: ComponentKind,
    raster: RasterLayer,
}

impl SmoothedField {
    pub fn from_raster(kind: ComponentKind, raster: RasterLayer) -> Self {
        SmoothedField { kind, raster }
    }

    pub fn kind(&self) -> ComponentKind {
        self.kind
    }

    pub fn raster(&self) -> &RasterLayer {
        &self.raster
    }

    pub fn grid(&self) -> &GridSpec {
        self.raster.grid()
    }
}

/// Weighted average of the raw component over each cell's isochrone;
/// weights are Gaussian in the recorded network distance. Nodata raw
/// cells drop out of both sums; a cell whose whole isochrone is nodata
/// stays nodata.
pub fn smooth_component(
    raw: &ComponentField,
    isochrones: &Isochrones,
    params: &DecayParams,
) -> Result<SmoothedField> {
    params.validate()?;
    let grid = raw.grid();
    if !same_grid(grid, isochrones.grid()) {
        return Err(Error::Misaligned("isochrones were computed on a different grid".into()));
    }
    let raster = raw.raster();
    let values: Vec<f64> = (0..grid.n_cells())
        .into_par_iter()
        .map(|i| {
            let cell = grid.from_linear(i);
            let iso = isochrones.for_cell(cell);
            let mut num = 0.0;
            let mut den = 0.0;
            for (k, dist) in iso.iter() {
                if let Some(v) = raster.value(k) {
                    let w = gaussian_weight(dist, params);
                    num += w * v;
                    den += w;
                }
            }
            if den > 0.0 {
                num / den
            } else {
                DEFAULT_NODATA
            }
        })
        .collect();
    Ok(SmoothedField {
        kind: raw.kind(),
        raster: RasterLayer::from_values(grid.clone(), values, DEFAULT_NODATA)?,
    })
}

/// Standardization statistics of one component (population std).
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub kind: ComponentKind,
    pub mean: f64,
    pub std: f64,
}

/// Cells over which standardization statistics are computed.
#[derive(Debug, Clone)]
pub struct CellMask {
    grid: GridSpec,
    include: Vec<bool>,
}

impl CellMask {
    /// Cells where `layer` carries a value greater than zero.
    pub fn from_raster(layer: &RasterLayer) -> Self {
        let include = (0..layer.grid().n_cells())
            .map(|i| layer.value_at_linear(i).map_or(false, |v| v > 0.0))
            .collect();
        CellMask {
            grid: layer.grid().clone(),
            include,
        }
    }

    pub fn from_cells(grid: GridSpec, cells: &[CellId]) -> Self {
        let mut include = vec![false; grid.n_cells()];
        for c in cells {
            include[grid.linear(*c)] = true;
        }
        CellMask { grid, include }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn contains_linear(&self, idx: usize) -> bool {
        self.include[idx]
    }
}

/// A standardized component: population mean 0 and std 1 over its data
/// cells. Cells outside the standardization domain are nodata.
#[derive(Debug, Clone, PartialEq)]
pub struct ZScoreField {
    kind: ComponentKind,
    raster: RasterLayer,
}

impl ZScoreField {
    pub fn from_raster(kind: ComponentKind, raster: RasterLayer) -> Self {
        ZScoreField { kind, raster }
    }

    pub fn kind(&self) -> ComponentKind {
        self.kind
    }

    pub fn raster(&self) -> &RasterLayer {
        &self.raster
    }

    pub fn grid(&self) -> &GridSpec {
        self.raster.grid()
    }
}

/// Z-score standardization over the domain (whole grid by default).
/// Errors on fewer than 2 usable cells or a constant field.
pub fn zscore(field: &SmoothedField, domain: Option<&CellMask>) -> Result<(ZScoreField, NormStats)> {
    let grid = field.grid();
    if let Some(mask) = domain {
        if !same_grid(mask.grid(), grid) {
            return Err(Error::Misaligned("zscore domain mask is on a different grid".into()));
        }
    }
    let raster = field.raster();
    let in_domain = |i: usize| domain.map_or(true, |m| m.contains_linear(i));

    let mut count = 0usize;
    let mut sum = 0.0;
    for i in 0..grid.n_cells() {
        if in_domain(i) {
            if let Some(v) = raster.value_at_linear(i) {
                sum += v;
                count += 1;
            }
        }
    }
    if count < 2 {
        return Err(Error::InsufficientData(format!(
            "zscore of {} needs >= 2 data cells in the domain, found {count}",
            field.kind()
        )));
    }
    let mean = sum / count as f64;
    let mut ss = 0.0;
    for i in 0..grid.n_cells() {
        if in_domain(i) {
            if let Some(v) = raster.value_at_linear(i) {
                let d = v - mean;
                ss += d * d;
            }
        }
    }
    let std = (ss / count as f64).sqrt();
    let stats = NormStats {
        kind: field.kind(),
        mean,
        std,
    };
    if std == 0.0 {
        return Err(Error::Degenerate(format!(
            "component {} is constant over the domain (std = 0)",
            field.kind()
        )));
    }

    let values: Vec<f64> = (0..grid.n_cells())
        .map(|i| {
            if in_domain(i) {
                match raster.value_at_linear(i) {
                    Some(v) => (v - mean) / std,
                    None => DEFAULT_NODATA,
                }
            } else {
                DEFAULT_NODATA
            }
        })
        .collect();
    Ok((
        ZScoreField {
            kind: field.kind(),
            raster: RasterLayer::from_values(grid.clone(), values, DEFAULT_NODATA)?,
        },
        stats,
    ))
}

/// Per-component index weights. All eight kinds must be present and the
/// slope weight must be non-positive.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexWeights {
    weights: BTreeMap<ComponentKind, f64>,
}

impl Default for IndexWeights {
    fn default() -> Self {
        let weights = BTreeMap::from([
            (ComponentKind::Swl, 0.5),
            (ComponentKind::Si, 0.5),
            (ComponentKind::Gs, 0.5),
            (ComponentKind::Ndvi, 0.5),
            (ComponentKind::Slope, -1.0),
            (ComponentKind::Pt, 1.0),
            (ComponentKind::Lum, 1.0),
            (ComponentKind::Iso, 1.0),
        ]);
        IndexWeights { weights }
    }
}

impl IndexWeights {
    pub fn from_map(weights: BTreeMap<ComponentKind, f64>) -> Result<Self> {
        let w = IndexWeights { weights };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        for kind in ComponentKind::ALL {
            let v = self
                .weights
                .get(&kind)
                .ok_or_else(|| Error::Config(format!("index weight for {kind} is missing")))?;
            if !v.is_finite() {
                return Err(Error::Config(format!("index weight for {kind} is not finite")));
            }
        }
        if *self.weights.get(&ComponentKind::Slope).unwrap() > 0.0 {
            return Err(Error::Config("slope weight must be <= 0".into()));
        }
        Ok(())
    }

    pub fn get(&self, kind: ComponentKind) -> f64 {
        self.weights[&kind]
    }

    pub fn set(&mut self, kind: ComponentKind, value: f64) {
        self.weights.insert(kind, value);
    }

    pub fn total(&self) -> f64 {
        ComponentKind::ALL.iter().map(|k| self.weights[k]).sum()
    }
}

/// The composite walkability index.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexField {
    raster: RasterLayer,
}

impl IndexField {
    pub fn from_raster(raster: RasterLayer) -> Self {
        IndexField { raster }
    }

    pub fn raster(&self) -> &RasterLayer {
        &self.raster
    }

    pub fn grid(&self) -> &GridSpec {
        self.raster.grid()
    }

    pub fn value(&self, c: CellId) -> Option<f64> {
        self.raster.value(c)
    }
}

/// Cellwise weighted sum of the eight z-fields. A cell is nodata as soon
/// as any constituent is nodata.
pub fn compose_index(z: &BTreeMap<ComponentKind, ZScoreField>, weights: &IndexWeights) -> Result<IndexField> {
    weights.validate()?;
    let mut fields = Vec::with_capacity(8);
    for kind in ComponentKind::ALL {
        let f = z
            .get(&kind)
            .ok_or_else(|| Error::Config(format!("z-score field for {kind} is missing")))?;
        fields.push((weights.get(kind), f));
    }
    let grid = fields[0].1.grid().clone();
    for (_, f) in &fields {
        if !same_grid(f.grid(), &grid) {
            return Err(Error::Misaligned(format!("z-score field {} is on a different grid", f.kind())));
        }
    }
    let values: Vec<f64> = (0..grid.n_cells())
        .map(|i| {
            let mut acc = 0.0;
            for (w, f) in &fields {
                match f.raster().value_at_linear(i) {
                    Some(v) => acc += w * v,
                    None => return DEFAULT_NODATA,
                }
            }
            acc
        })
        .collect();
    Ok(IndexField {
        raster: RasterLayer::from_values(grid, values, DEFAULT_NODATA)?,
    })
}

/// Decile labels 1..=10, or nodata.
#[derive(Debug, Clone, PartialEq)]
pub struct DecileField {
    raster: RasterLayer,
}

impl DecileField {
    /// Wrap a raster of labels, checking every value is an integer in
    /// 1..=10 or nodata.
    pub fn from_raster(raster: RasterLayer) -> Result<Self> {
        for (c, v) in raster.iter_cells() {
            if let Some(v) = v {
                if v.fract() != 0.0 || !(1.0..=10.0).contains(&v) {
                    return Err(Error::InvalidField(format!(
                        "decile label {v} at row {} col {} outside 1..=10",
                        c.row, c.col
                    )));
                }
            }
        }
        Ok(DecileField { raster })
    }

    pub fn raster(&self) -> &RasterLayer {
        &self.raster
    }

    pub fn grid(&self) -> &GridSpec {
        self.raster.grid()
    }

    pub fn label(&self, c: CellId) -> Option<u8> {
        self.raster.value(c).map(|v| v as u8)
    }
}

/// Nearest-rank decile binning. Cells sort by (value, row, col); the cell
/// at 1-based sorted position `p` of `M` gets label
/// `min(10, (p-1)*10/M + 1)`. Ties may straddle decile boundaries.
pub fn deciles(index: &IndexField) -> Result<DecileField> {
    let grid = index.grid();
    let mut order: Vec<(f64, usize)> = Vec::new();
    for i in 0..grid.n_cells() {
        if let Some(v) = index.raster().value_at_linear(i) {
            order.push((v, i));
        }
    }
    let m = order.len();
    if m < 10 {
        return Err(Error::InsufficientData(format!(
            "decile binning needs >= 10 data cells, found {m}"
        )));
    }
    // Linear index order is (row, col) order, giving the stable tie rule.
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    let mut layer = RasterLayer::nodata_filled(grid.clone(), DEFAULT_NODATA);
    for (p0, (_, i)) in order.into_iter().enumerate() {
        let label = (p0 * 10 / m + 1).min(10);
        layer.set(grid.from_linear(i), label as f64);
    }
    Ok(DecileField { raster: layer })
}
