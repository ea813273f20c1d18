//! Dense per-cell raster storage with an explicit nodata sentinel.

use crate::error::{Error, Result};
use crate::grid::{CellId, GridSpec};

pub const DEFAULT_NODATA: f64 = -9999.0;

/// A dense 2-D layer of real values on a [`GridSpec`]. Values are stored
/// row-major with row 0 at the south edge. Nodata is matched by exact bit
/// equality to the sentinel; every non-sentinel value must be finite.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterLayer {
    grid: GridSpec,
    values: Vec<f64>,
    nodata: f64,
}

impl RasterLayer {
    pub fn filled(grid: GridSpec, fill: f64, nodata: f64) -> Self {
        let n = grid.n_cells();
        RasterLayer {
            grid,
            values: vec![fill; n],
            nodata,
        }
    }

    pub fn nodata_filled(grid: GridSpec, nodata: f64) -> Self {
        Self::filled(grid, nodata, nodata)
    }

    /// Build from row-major values (row 0 = south). Rejects non-finite
    /// entries that are not the sentinel.
    pub fn from_values(grid: GridSpec, values: Vec<f64>, nodata: f64) -> Result<Self> {
        if values.len() != grid.n_cells() {
            return Err(Error::InvalidField(format!(
                "value count {} != {} rows x {} cols",
                values.len(),
                grid.n_rows,
                grid.n_cols
            )));
        }
        for (i, v) in values.iter().enumerate() {
            if v.to_bits() != nodata.to_bits() && !v.is_finite() {
                let c = grid.from_linear(i);
                return Err(Error::InvalidField(format!(
                    "non-finite value {v} at row {} col {}",
                    c.row, c.col
                )));
            }
        }
        Ok(RasterLayer { grid, values, nodata })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn nodata(&self) -> f64 {
        self.nodata
    }

    pub fn raw(&self, c: CellId) -> f64 {
        self.values[self.grid.linear(c)]
    }

    pub fn is_nodata(&self, c: CellId) -> bool {
        self.raw(c).to_bits() == self.nodata.to_bits()
    }

    /// The value at `c`, or `None` for nodata.
    pub fn value(&self, c: CellId) -> Option<f64> {
        let v = self.raw(c);
        if v.to_bits() == self.nodata.to_bits() {
            None
        } else {
            Some(v)
        }
    }

    pub fn value_at_linear(&self, idx: usize) -> Option<f64> {
        let v = self.values[idx];
        if v.to_bits() == self.nodata.to_bits() {
            None
        } else {
            Some(v)
        }
    }

    pub fn set(&mut self, c: CellId, v: f64) {
        let idx = self.grid.linear(c);
        self.values[idx] = v;
    }

    pub fn set_nodata_at(&mut self, c: CellId) {
        let idx = self.grid.linear(c);
        self.values[idx] = self.nodata;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Iterate `(CellId, Option<value>)` in row-major order.
    pub fn iter_cells(&self) -> impl Iterator<Item = (CellId, Option<f64>)> + '_ {
        self.values.iter().enumerate().map(move |(i, &v)| {
            let c = self.grid.from_linear(i);
            let val = if v.to_bits() == self.nodata.to_bits() { None } else { Some(v) };
            (c, val)
        })
    }

    pub fn count_data_cells(&self) -> usize {
        self.values
            .iter()
            .filter(|v| v.to_bits() != self.nodata.to_bits())
            .count()
    }
}

/// Exact-enough grid identity for layers that must share a lattice.
pub fn same_grid(a: &GridSpec, b: &GridSpec) -> bool {
    a.n_rows == b.n_rows
        && a.n_cols == b.n_cols
        && (a.origin_x - b.origin_x).abs() <= 1e-6
        && (a.origin_y - b.origin_y).abs() <= 1e-6
        && (a.cell_size - b.cell_size).abs() <= 1e-9 * a.cell_size
}

/// Integer refinement factor of a fine raster under a coarse grid: same
/// origin, coarse cell size an exact multiple of the fine one, fine
/// dimensions exactly `factor` times the coarse ones.
pub fn alignment_factor(fine: &GridSpec, coarse: &GridSpec) -> Result<usize> {
    let misaligned = |msg: String| Err(Error::Misaligned(msg));
    if (fine.origin_x - coarse.origin_x).abs() > 1e-6 || (fine.origin_y - coarse.origin_y).abs() > 1e-6 {
        return misaligned(format!(
            "origins differ: fine ({}, {}) vs coarse ({}, {})",
            fine.origin_x, fine.origin_y, coarse.origin_x, coarse.origin_y
        ));
    }
    let ratio = coarse.cell_size / fine.cell_size;
    let factor = ratio.round();
    if factor < 1.0 || (ratio - factor).abs() > 1e-9 * ratio {
        return misaligned(format!(
            "fine cell size {} does not divide coarse cell size {}",
            fine.cell_size, coarse.cell_size
        ));
    }
    let factor = factor as usize;
    if fine.n_rows as usize != coarse.n_rows as usize * factor
        || fine.n_cols as usize != coarse.n_cols as usize * factor
    {
        return misaligned(format!(
            "fine extent {}x{} != coarse {}x{} at factor {factor}",
            fine.n_rows, fine.n_cols, coarse.n_rows, coarse.n_cols
        ));
    }
    Ok(factor)
}
