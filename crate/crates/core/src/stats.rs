//! Spatial statistics over index and component fields:
//! population-weighted polygon aggregation, urbanization stratification,
//! correlation matrices, population CDFs and global spatial
//! autocorrelation. Missing results are always `None`, never a sentinel.

use std::collections::{BTreeMap, HashMap};

use crate::components::ComponentKind;
use crate::error::{Error, Result};
use crate::geom::PolygonGeometry;
use crate::grid::{CellId, Contiguity, GridSpec};
use crate::raster::{same_grid, RasterLayer};
use crate::smooth::{DecileField, IndexField, SmoothedField};

/// Degree-of-urbanization settlement classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum UrbanizationClass {
    VeryLowDensityRural,
    LowDensityRural,
    RuralCluster,
    SuburbanPeriUrban,
    SemiDenseUrbanCluster,
    DenseUrbanCluster,
    UrbanCenter,
}

impl UrbanizationClass {
    pub const ALL: [UrbanizationClass; 7] = [
        UrbanizationClass::VeryLowDensityRural,
        UrbanizationClass::LowDensityRural,
        UrbanizationClass::RuralCluster,
        UrbanizationClass::SuburbanPeriUrban,
        UrbanizationClass::SemiDenseUrbanCluster,
        UrbanizationClass::DenseUrbanCluster,
        UrbanizationClass::UrbanCenter,
    ];

    pub fn from_code(code: u8) -> Option<UrbanizationClass> {
        match code {
            1 => Some(UrbanizationClass::VeryLowDensityRural),
            2 => Some(UrbanizationClass::LowDensityRural),
            3 => Some(UrbanizationClass::RuralCluster),
            4 => Some(UrbanizationClass::SuburbanPeriUrban),
            5 => Some(UrbanizationClass::SemiDenseUrbanCluster),
            6 => Some(UrbanizationClass::DenseUrbanCluster),
            7 => Some(UrbanizationClass::UrbanCenter),
            _ => None,
        }
    }

    pub fn code(&self) -> u8 {
        match self {
            UrbanizationClass::VeryLowDensityRural => 1,
            UrbanizationClass::LowDensityRural => 2,
            UrbanizationClass::RuralCluster => 3,
            UrbanizationClass::SuburbanPeriUrban => 4,
            UrbanizationClass::SemiDenseUrbanCluster => 5,
            UrbanizationClass::DenseUrbanCluster => 6,
            UrbanizationClass::UrbanCenter => 7,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            UrbanizationClass::VeryLowDensityRural => "very low density rural",
            UrbanizationClass::LowDensityRural => "low density rural",
            UrbanizationClass::RuralCluster => "rural cluster",
            UrbanizationClass::SuburbanPeriUrban => "suburban or peri-urban",
            UrbanizationClass::SemiDenseUrbanCluster => "semi-dense urban cluster",
            UrbanizationClass::DenseUrbanCluster => "dense urban cluster",
            UrbanizationClass::UrbanCenter => "urban center",
        }
    }
}

/// Population-weighted mean of `values` over `cells`. Cells missing
/// either the value or the population drop out; `None` when nothing
/// usable remains or the usable population sums to zero.
pub fn pop_weighted_mean(values: &RasterLayer, pop: &RasterLayer, cells: &[CellId]) -> Option<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut usable = 0usize;
    for &c in cells {
        let (Some(v), Some(p)) = (values.value(c), pop.value(c)) else {
            continue;
        };
        num += v * p;
        den += p;
        usable += 1;
    }
    if usable == 0 || den == 0.0 {
        None
    } else {
        Some(num / den)
    }
}

/// Population-weighted summary of one aggregation unit.
#[derive(Debug, Clone)]
pub struct AggregateRecord {
    pub unit_id: String,
    pub component_means: BTreeMap<ComponentKind, Option<f64>>,
    pub index_pw_mean: Option<f64>,
    pub population: f64,
    pub cell_count: usize,
}

/// Aggregate smoothed components and the index over admin polygons.
/// Polygon parts sharing an id are merged before cell selection. Units
/// whose polygons contain no cell centroid are returned in the skipped
/// list instead of the records.
pub fn aggregate_polygons(
    fields: &[SmoothedField],
    index: &IndexField,
    pop: &RasterLayer,
    polygons: &[PolygonGeometry],
    grid: &GridSpec,
) -> Result<(Vec<AggregateRecord>, Vec<String>)> {
    for f in fields {
        if !same_grid(f.grid(), grid) {
            return Err(Error::Misaligned(format!("smoothed {} is on a different grid", f.kind())));
        }
    }
    if !same_grid(index.grid(), grid) || !same_grid(pop.grid(), grid) {
        return Err(Error::Misaligned("index/population raster must match the grid".into()));
    }

    // Merge multi-part units by id, preserving first-appearance order of ids.
    let mut unit_cells: Vec<(String, Vec<CellId>)> = Vec::new();
    let mut by_id: HashMap<String, usize> = HashMap::new();
    for poly in polygons {
        let id = poly.id().to_string();
        let cells = grid.cells_in_polygon(poly)?;
        let slot = *by_id.entry(id.clone()).or_insert_with(|| {
            unit_cells.push((id, Vec::new()));
            unit_cells.len() - 1
        });
        unit_cells[slot].1.extend(cells);
    }

    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for (unit_id, mut cells) in unit_cells {
        cells.sort();
        cells.dedup();
        if cells.is_empty() {
            skipped.push(unit_id);
            continue;
        }
        let mut component_means = BTreeMap::new();
        for f in fields {
            component_means.insert(f.kind(), pop_weighted_mean(f.raster(), pop, &cells));
        }
        let index_pw_mean = pop_weighted_mean(index.raster(), pop, &cells);
        let population: f64 = cells.iter().filter_map(|&c| pop.value(c)).sum();
        records.push(AggregateRecord {
            unit_id,
            component_means,
            index_pw_mean,
            population,
            cell_count: cells.len(),
        });
    }
    records.sort_by(|a, b| a.unit_id.cmp(&b.unit_id));
    Ok((records, skipped))
}

/// Per-class stratification summary.
#[derive(Debug, Clone)]
pub struct StratumSummary {
    pub class: UrbanizationClass,
    pub pw_mean: Option<f64>,
    /// Share of the total classified population (0 for empty classes).
    pub pop_share: f64,
    /// Population mass per decile label 1..=10.
    pub decile_pop: [f64; 10],
}

/// Partition cells by urbanization class and summarize the field within
/// each class. Urbanization codes outside 1..=7 are a data error.
pub fn stratify_by_urbanization(
    field: &IndexField,
    deciles: &DecileField,
    pop: &RasterLayer,
    urb: &RasterLayer,
) -> Result<Vec<StratumSummary>> {
    let grid = field.grid();
    if !same_grid(deciles.grid(), grid) || !same_grid(pop.grid(), grid) || !same_grid(urb.grid(), grid) {
        return Err(Error::Misaligned("stratification rasters must share the grid".into()));
    }

    let mut class_cells: [Vec<CellId>; 7] = Default::default();
    for (c, v) in urb.iter_cells() {
        let Some(v) = v else { continue };
        let code = v.round();
        if (v - code).abs() > 1e-9 || !(1.0..=7.0).contains(&code) {
            return Err(Error::InvalidField(format!(
                "urbanization code {v} at row {} col {} outside 1..=7",
                c.row, c.col
            )));
        }
        class_cells[(code as usize) - 1].push(c);
    }

    let total_pop: f64 = class_cells
        .iter()
        .flatten()
        .filter_map(|&c| pop.value(c))
        .sum();

    let mut out = Vec::with_capacity(7);
    for (i, class) in UrbanizationClass::ALL.into_iter().enumerate() {
        let cells = &class_cells[i];
        let pw_mean = pop_weighted_mean(field.raster(), pop, cells);
        let class_pop: f64 = cells.iter().filter_map(|&c| pop.value(c)).sum();
        let pop_share = if total_pop > 0.0 { class_pop / total_pop } else { 0.0 };
        let mut decile_pop = [0.0; 10];
        for &c in cells {
            if let (Some(d), Some(p)) = (deciles.label(c), pop.value(c)) {
                decile_pop[(d - 1) as usize] += p;
            }
        }
        out.push(StratumSummary {
            class,
            pw_mean,
            pop_share,
            decile_pop,
        });
    }
    Ok(out)
}

/// Pairwise Pearson correlations between unit-level variables.
#[derive(Debug, Clone)]
pub struct CorrMatrix {
    pub names: Vec<String>,
    /// Symmetric; `None` marks a flagged-missing entry.
    pub values: Vec<Vec<Option<f64>>>,
}

/// Correlation matrix over aggregate records: the eight component means
/// plus the index (named `INDEX`). Missing entries are pairwise-deleted;
/// a variable constant over its pairings yields missing cells.
pub fn corr_matrix(records: &[AggregateRecord]) -> Result<CorrMatrix> {
    if records.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "correlation matrix needs >= 3 records, found {}",
            records.len()
        )));
    }
    let mut names: Vec<String> = ComponentKind::ALL.iter().map(|k| k.name().to_string()).collect();
    names.push("INDEX".to_string());

    let column = |record: &AggregateRecord, var: usize| -> Option<f64> {
        if var < 8 {
            *record.component_means.get(&ComponentKind::ALL[var]).unwrap_or(&None)
        } else {
            record.index_pw_mean
        }
    };

    let n_vars = names.len();
    let mut values = vec![vec![None; n_vars]; n_vars];
    for a in 0..n_vars {
        for b in a..n_vars {
            let pairs: Vec<(f64, f64)> = records
                .iter()
                .filter_map(|r| match (column(r, a), column(r, b)) {
                    (Some(x), Some(y)) => Some((x, y)),
                    _ => None,
                })
                .collect();
            let r = pearson(&pairs);
            if a == b {
                // Exactly 1 on the diagonal unless the variable is
                // constant or empty, which stays flagged-missing.
                values[a][a] = r.map(|_| 1.0);
            } else {
                values[a][b] = r;
                values[b][a] = r;
            }
        }
    }
    Ok(CorrMatrix { names, values })
}

fn pearson(pairs: &[(f64, f64)]) -> Option<f64> {
    let n = pairs.len();
    if n < 2 {
        return None;
    }
    let mean_x = pairs.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let mean_y = pairs.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for &(x, y) in pairs {
        let dx = x - mean_x;
        let dy = y - mean_y;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Population-weighted cumulative distribution of `values` over `cells`:
/// `(value, cumulative population share)` sorted by value, equal values
/// merged, final share exactly 1. `None` when the usable population is
/// zero.
pub fn pop_weighted_cdf(values: &RasterLayer, pop: &RasterLayer, cells: &[CellId]) -> Option<Vec<(f64, f64)>> {
    let mut samples: Vec<(f64, f64)> = cells
        .iter()
        .filter_map(|&c| match (values.value(c), pop.value(c)) {
            (Some(v), Some(p)) => Some((v, p)),
            _ => None,
        })
        .collect();
    let total: f64 = samples.iter().map(|s| s.1).sum();
    if samples.is_empty() || total == 0.0 {
        return None;
    }
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut curve: Vec<(f64, f64)> = Vec::new();
    let mut running = 0.0;
    for (v, p) in samples {
        running += p;
        match curve.last_mut() {
            Some(last) if last.0 == v => last.1 = running / total,
            _ => curve.push((v, running / total)),
        }
    }
    if let Some(last) = curve.last_mut() {
        last.1 = 1.0; // guard the terminal share against rounding
    }
    Some(curve)
}

/// Percent of population living in cells below the decile threshold.
/// `None` when the usable population is zero.
pub fn pct_below_decile(
    deciles: &DecileField,
    pop: &RasterLayer,
    cells: &[CellId],
    threshold: u8,
) -> Result<Option<f64>> {
    if !(1..=10).contains(&threshold) {
        return Err(Error::Config(format!("decile threshold {threshold} outside 1..=10")));
    }
    let mut below = 0.0;
    let mut total = 0.0;
    for &c in cells {
        let (Some(d), Some(p)) = (deciles.label(c), pop.value(c)) else {
            continue;
        };
        total += p;
        if d < threshold {
            below += p;
        }
    }
    if total == 0.0 {
        Ok(None)
    } else {
        Ok(Some(100.0 * below / total))
    }
}

/// Binary symmetric contiguity weights over a cell subset.
#[derive(Debug, Clone)]
pub struct SpatialWeights {
    cells: Vec<CellId>,
    neighbors: Vec<Vec<u32>>,
    total_weight: f64,
}

impl SpatialWeights {
    pub fn cells(&self) -> &[CellId] {
        &self.cells
    }

    pub fn neighbors_of(&self, i: usize) -> &[u32] {
        &self.neighbors[i]
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }
}

/// Contiguity among the provided cells only; neighbors outside the set
/// are ignored and isolated member cells keep empty lists. Errors when
/// no adjacent pair exists at all.
pub fn build_spatial_weights(cells: &[CellId], grid: &GridSpec, scheme: Contiguity) -> Result<SpatialWeights> {
    if cells.is_empty() {
        return Err(Error::InsufficientData("spatial weights need at least one cell".into()));
    }
    let mut members: Vec<CellId> = cells.to_vec();
    members.sort();
    members.dedup();
    for &c in &members {
        if !grid.contains(c) {
            return Err(Error::InvalidGrid(format!("cell ({}, {}) outside the grid", c.row, c.col)));
        }
    }
    let index_of: HashMap<CellId, u32> = members
        .iter()
        .enumerate()
        .map(|(i, &c)| (c, i as u32))
        .collect();
    let mut neighbors = vec![Vec::new(); members.len()];
    let mut total = 0usize;
    for (i, &c) in members.iter().enumerate() {
        let mut adj: Vec<u32> = grid
            .neighbors(c, scheme)
            .into_iter()
            .filter_map(|n| index_of.get(&n).copied())
            .collect();
        adj.sort_unstable();
        total += adj.len();
        neighbors[i] = adj;
    }
    if total == 0 {
        return Err(Error::Degenerate("spatial weights sum to zero (no adjacent pairs)".into()));
    }
    Ok(SpatialWeights {
        cells: members,
        neighbors,
        total_weight: total as f64,
    })
}

/// Global spatial autocorrelation result.
#[derive(Debug, Clone, PartialEq)]
pub struct MoranResult {
    pub i: f64,
    /// Cells that carried data and entered the statistic.
    pub n: usize,
    /// Total weight after dropping nodata cells.
    pub w: f64,
}

/// Global Moran's I of the field under the given weights. Nodata cells
/// are dropped together with their links and W is recomputed.
pub fn morans_i(field: &IndexField, weights: &SpatialWeights) -> Result<MoranResult> {
    let values: Vec<Option<f64>> = weights.cells().iter().map(|&c| field.value(c)).collect();
    let kept: Vec<usize> = (0..values.len()).filter(|&i| values[i].is_some()).collect();
    let n = kept.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "Moran's I needs >= 2 data cells, found {n}"
        )));
    }
    let kept_pos: HashMap<usize, usize> = kept.iter().enumerate().map(|(new, &old)| (old, new)).collect();

    let xs: Vec<f64> = kept.iter().map(|&i| values[i].unwrap()).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;

    let mut w_total = 0.0;
    let mut num = 0.0;
    for (new_i, &old_i) in kept.iter().enumerate() {
        let dx_i = xs[new_i] - mean;
        for &j in weights.neighbors_of(old_i) {
            if let Some(&new_j) = kept_pos.get(&(j as usize)) {
                w_total += 1.0;
                num += dx_i * (xs[new_j] - mean);
            }
        }
    }
    if w_total == 0.0 {
        return Err(Error::Degenerate("all weighted links dropped with nodata cells".into()));
    }
    let den: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    if den == 0.0 {
        return Err(Error::Degenerate("Moran's I of a constant field".into()));
    }
    Ok(MoranResult {
        i: (n as f64 / w_total) * num / den,
        n,
        w: w_total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::DEFAULT_NODATA;
    use approx::assert_relative_eq;

    fn grid(rows: u32, cols: u32) -> GridSpec {
        GridSpec::new(0.0, 0.0, 100.0, rows, cols).unwrap()
    }

    fn layer(g: &GridSpec, values: Vec<f64>) -> RasterLayer {
        RasterLayer::from_values(g.clone(), values, DEFAULT_NODATA).unwrap()
    }

    fn all_cells(g: &GridSpec) -> Vec<CellId> {
        (0..g.n_cells()).map(|i| g.from_linear(i)).collect()
    }

    #[test]
    fn pw_mean_hand_case() {
        let g = grid(1, 2);
        let values = layer(&g, vec![2.0, 4.0]);
        let pop = layer(&g, vec![1.0, 3.0]);
        assert_eq!(pop_weighted_mean(&values, &pop, &all_cells(&g)), Some(3.5));
    }

    #[test]
    fn pw_mean_equal_population_is_arithmetic_mean() {
        let g = grid(1, 4);
        let values = layer(&g, vec![1.0, 2.0, 3.0, 6.0]);
        let pop = layer(&g, vec![7.0; 4]);
        assert_eq!(pop_weighted_mean(&values, &pop, &all_cells(&g)), Some(3.0));
    }

    #[test]
    fn pw_mean_population_scale_invariant() {
        let g = grid(1, 3);
        let values = layer(&g, vec![1.5, -2.0, 4.0]);
        let p1 = layer(&g, vec![2.0, 5.0, 3.0]);
        let p2 = layer(&g, vec![4.0, 10.0, 6.0]);
        let cells = all_cells(&g);
        assert_eq!(
            pop_weighted_mean(&values, &p1, &cells),
            pop_weighted_mean(&values, &p2, &cells)
        );
    }

    #[test]
    fn pw_mean_missing_is_distinct_from_zero() {
        let g = grid(1, 2);
        let values = layer(&g, vec![1.0, 2.0]);
        let zero_pop = layer(&g, vec![0.0, 0.0]);
        assert_eq!(pop_weighted_mean(&values, &zero_pop, &all_cells(&g)), None);
        let nodata_vals = layer(&g, vec![DEFAULT_NODATA, DEFAULT_NODATA]);
        let pop = layer(&g, vec![5.0, 5.0]);
        assert_eq!(pop_weighted_mean(&nodata_vals, &pop, &all_cells(&g)), None);
        assert_eq!(pop_weighted_mean(&values, &pop, &[]), None);
    }

    #[test]
    fn cdf_hand_case() {
        let g = grid(1, 2);
        let values = layer(&g, vec![1.0, 2.0]);
        let pop = layer(&g, vec![30.0, 70.0]);
        let curve = pop_weighted_cdf(&values, &pop, &all_cells(&g)).unwrap();
        assert_eq!(curve, vec![(1.0, 0.3), (2.0, 1.0)]);
    }

    #[test]
    fn cdf_monotone_ends_at_one() {
        let g = grid(2, 5);
        let values = layer(&g, (0..10).map(|i| ((i * 7) % 5) as f64).collect());
        let pop = layer(&g, (0..10).map(|i| (i + 1) as f64).collect());
        let curve = pop_weighted_cdf(&values, &pop, &all_cells(&g)).unwrap();
        for w in curve.windows(2) {
            assert!(w[0].0 < w[1].0);
            assert!(w[0].1 <= w[1].1);
        }
        assert_eq!(curve.last().unwrap().1, 1.0);
    }

    #[test]
    fn cdf_zero_population_missing() {
        let g = grid(1, 2);
        let values = layer(&g, vec![1.0, 2.0]);
        let pop = layer(&g, vec![0.0, 0.0]);
        assert_eq!(pop_weighted_cdf(&values, &pop, &all_cells(&g)), None);
    }

    fn decile_of(values: Vec<f64>, g: &GridSpec) -> DecileField {
        DecileField::from_raster(layer(g, values)).unwrap()
    }

    #[test]
    fn pct_below_decile_cases() {
        let g = grid(1, 10);
        let labels: Vec<f64> = (1..=10).map(|d| d as f64).collect();
        let d = decile_of(labels, &g);
        let uniform = layer(&g, vec![5.0; 10]);
        assert_eq!(pct_below_decile(&d, &uniform, &all_cells(&g), 6).unwrap(), Some(50.0));

        let all_top = decile_of(vec![10.0; 10], &g);
        assert_eq!(pct_below_decile(&all_top, &uniform, &all_cells(&g), 6).unwrap(), Some(0.0));

        let all_bottom = decile_of(vec![1.0; 10], &g);
        assert_eq!(pct_below_decile(&all_bottom, &uniform, &all_cells(&g), 6).unwrap(), Some(100.0));

        assert!(pct_below_decile(&d, &uniform, &all_cells(&g), 0).is_err());
        assert!(pct_below_decile(&d, &uniform, &all_cells(&g), 11).is_err());
    }

    #[test]
    fn weights_2x2_rook_and_queen() {
        let g = grid(2, 2);
        let cells = all_cells(&g);
        let rook = build_spatial_weights(&cells, &g, Contiguity::Rook).unwrap();
        assert_eq!(rook.total_weight(), 8.0);
        for i in 0..4 {
            assert_eq!(rook.neighbors_of(i).len(), 2);
        }
        let queen = build_spatial_weights(&cells, &g, Contiguity::Queen).unwrap();
        assert_eq!(queen.total_weight(), 12.0);
        for i in 0..4 {
            assert_eq!(queen.neighbors_of(i).len(), 3);
        }
    }

    #[test]
    fn weights_disconnected_pair_degenerate() {
        let g = grid(10, 10);
        let cells = vec![CellId::new(0, 0), CellId::new(9, 9)];
        assert!(matches!(
            build_spatial_weights(&cells, &g, Contiguity::Queen),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn weights_isolated_cells_retained_when_pairs_exist() {
        let g = grid(10, 10);
        let cells = vec![CellId::new(0, 0), CellId::new(0, 1), CellId::new(9, 9)];
        let w = build_spatial_weights(&cells, &g, Contiguity::Rook).unwrap();
        assert_eq!(w.cells().len(), 3);
        assert_eq!(w.total_weight(), 2.0);
        assert!(w.neighbors_of(2).is_empty());
    }

    #[test]
    fn moran_checkerboard_is_minus_one() {
        let g = grid(2, 2);
        // Row 0: 1, 0 / row 1: 0, 1.
        let field = IndexField::from_raster(layer(&g, vec![1.0, 0.0, 0.0, 1.0]));
        let weights = build_spatial_weights(&all_cells(&g), &g, Contiguity::Rook).unwrap();
        let result = morans_i(&field, &weights).unwrap();
        assert_relative_eq!(result.i, -1.0, epsilon = 1e-12);
        assert_eq!(result.n, 4);
        assert_eq!(result.w, 8.0);
    }

    #[test]
    fn moran_constant_field_degenerate() {
        let g = grid(2, 2);
        let field = IndexField::from_raster(layer(&g, vec![3.0; 4]));
        let weights = build_spatial_weights(&all_cells(&g), &g, Contiguity::Rook).unwrap();
        assert!(matches!(morans_i(&field, &weights), Err(Error::Degenerate(_))));
    }

    #[test]
    fn moran_drops_nodata_and_recomputes_w() {
        let g = grid(1, 4);
        let field = IndexField::from_raster(layer(&g, vec![1.0, DEFAULT_NODATA, 2.0, 5.0]));
        let weights = build_spatial_weights(&all_cells(&g), &g, Contiguity::Rook).unwrap();
        let result = morans_i(&field, &weights).unwrap();
        // Cells 2 and 3 stay linked; cell 0 becomes isolated.
        assert_eq!(result.n, 3);
        assert_eq!(result.w, 2.0);
    }

    #[test]
    fn moran_affine_invariance() {
        let g = grid(4, 4);
        let vals: Vec<f64> = (0..16).map(|i| ((i * 13) % 7) as f64).collect();
        let scaled: Vec<f64> = vals.iter().map(|v| -2.5 * v + 40.0).collect();
        let weights = build_spatial_weights(&all_cells(&g), &g, Contiguity::Queen).unwrap();
        let i1 = morans_i(&IndexField::from_raster(layer(&g, vals)), &weights).unwrap();
        let i2 = morans_i(&IndexField::from_raster(layer(&g, scaled)), &weights).unwrap();
        assert_relative_eq!(i1.i, i2.i, epsilon = 1e-9);
    }

    fn record(unit_id: &str, x: f64) -> AggregateRecord {
        let mut component_means = BTreeMap::new();
        for k in ComponentKind::ALL {
            component_means.insert(k, Some(x * (1.0 + k as u8 as f64)));
        }
        AggregateRecord {
            unit_id: unit_id.to_string(),
            component_means,
            index_pw_mean: Some(2.0 * x + 3.0),
            population: 10.0,
            cell_count: 4,
        }
    }

    #[test]
    fn corr_perfect_linear_relation() {
        let records: Vec<AggregateRecord> = [("a", 1.0), ("b", 2.0), ("c", 5.0), ("d", -1.0)]
            .into_iter()
            .map(|(id, x)| record(id, x))
            .collect();
        let m = corr_matrix(&records).unwrap();
        assert_eq!(m.names.len(), 9);
        // INDEX = 2 * SWL + 3 across records.
        let idx = 8;
        assert_relative_eq!(m.values[0][idx].unwrap(), 1.0, epsilon = 1e-12);
        for a in 0..9 {
            assert_eq!(m.values[a][a], Some(1.0));
            for b in 0..9 {
                assert_eq!(m.values[a][b], m.values[b][a]);
                if let Some(r) = m.values[a][b] {
                    assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&r));
                }
            }
        }
    }

    #[test]
    fn corr_constant_variable_flagged_missing() {
        let mut records: Vec<AggregateRecord> = [("a", 1.0), ("b", 2.0), ("c", 5.0)]
            .into_iter()
            .map(|(id, x)| record(id, x))
            .collect();
        for r in &mut records {
            r.index_pw_mean = Some(9.0);
        }
        let m = corr_matrix(&records).unwrap();
        let idx = 8;
        for a in 0..9 {
            assert_eq!(m.values[a][idx], None);
            assert_eq!(m.values[idx][a], None);
        }
    }

    #[test]
    fn corr_needs_three_records() {
        let records = vec![record("a", 1.0), record("b", 2.0)];
        assert!(matches!(corr_matrix(&records), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn stratify_single_class_matches_global() {
        let g = grid(2, 2);
        let index = IndexField::from_raster(layer(&g, vec![1.0, 2.0, 3.0, 4.0]));
        let deciles = decile_of(vec![1.0, 4.0, 7.0, 10.0], &g);
        let pop = layer(&g, vec![1.0, 1.0, 1.0, 1.0]);
        let urb = layer(&g, vec![7.0; 4]);
        let strata = stratify_by_urbanization(&index, &deciles, &pop, &urb).unwrap();
        let urban = &strata[6];
        assert_eq!(urban.pw_mean, Some(2.5));
        assert_eq!(urban.pop_share, 1.0);
        assert_eq!(urban.decile_pop[0], 1.0);
        for s in &strata[..6] {
            assert_eq!(s.pw_mean, None);
            assert_eq!(s.pop_share, 0.0);
        }
    }

    #[test]
    fn stratify_shares_sum_to_one() {
        let g = grid(2, 3);
        let index = IndexField::from_raster(layer(&g, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        let deciles = decile_of(vec![1.0, 2.0, 3.0, 8.0, 9.0, 10.0], &g);
        let pop = layer(&g, vec![5.0, 10.0, 15.0, 20.0, 25.0, 30.0]);
        let urb = layer(&g, vec![1.0, 1.0, 3.0, 4.0, 7.0, 7.0]);
        let strata = stratify_by_urbanization(&index, &deciles, &pop, &urb).unwrap();
        let total: f64 = strata.iter().map(|s| s.pop_share).sum();
        assert_relative_eq!(total, 1.0, epsilon = 1e-12);
        // Two classes with disjoint index ranges order accordingly.
        assert!(strata[0].pw_mean.unwrap() < strata[6].pw_mean.unwrap());
    }

    #[test]
    fn stratify_rejects_bad_code() {
        let g = grid(1, 2);
        let index = IndexField::from_raster(layer(&g, vec![1.0, 2.0]));
        let deciles = decile_of(vec![1.0, 10.0], &g);
        let pop = layer(&g, vec![1.0, 1.0]);
        let urb = layer(&g, vec![8.0, 1.0]);
        assert!(stratify_by_urbanization(&index, &deciles, &pop, &urb).is_err());
    }
}
