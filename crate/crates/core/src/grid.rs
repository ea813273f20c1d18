//! The regular neighborhood lattice: cell addressing, geometry and
//! contiguity. Row 0 is the southernmost row, col 0 the westernmost
//! column; cells are half-open squares `[x0, x0+s) x [y0, y0+s)`.

use crate::error::{Error, Result};
use crate::geom::PolygonGeometry;

/// A planar point (easting/northing, meters).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Cell address: 0-based row from the south edge, 0-based col from the west.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellId {
    pub row: u32,
    pub col: u32,
}

impl CellId {
    pub fn new(row: u32, col: u32) -> Self {
        CellId { row, col }
    }
}

/// Contiguity scheme on the lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Contiguity {
    /// 4 edge-adjacent neighbors.
    Rook,
    /// 8 edge- or corner-adjacent neighbors.
    Queen,
}

/// Extent and resolution of the cell lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub origin_x: f64,
    pub origin_y: f64,
    pub cell_size: f64,
    pub n_rows: u32,
    pub n_cols: u32,
}

impl GridSpec {
    pub fn new(origin_x: f64, origin_y: f64, cell_size: f64, n_rows: u32, n_cols: u32) -> Result<Self> {
        if !origin_x.is_finite() || !origin_y.is_finite() {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        if !(cell_size > 0.0) || !cell_size.is_finite() {
            return Err(Error::InvalidGrid(format!("cell_size must be > 0, got {cell_size}")));
        }
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::InvalidGrid("n_rows and n_cols must be >= 1".into()));
        }
        // Total cell count must be addressable as usize.
        (n_rows as usize)
            .checked_mul(n_cols as usize)
            .ok_or_else(|| Error::InvalidGrid(format!("{n_rows} x {n_cols} cells overflow usize")))?;
        Ok(GridSpec {
            origin_x,
            origin_y,
            cell_size,
            n_rows,
            n_cols,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.n_rows as usize * self.n_cols as usize
    }

    pub fn contains(&self, c: CellId) -> bool {
        c.row < self.n_rows && c.col < self.n_cols
    }

    /// Row-major linear index (row 0 = south).
    pub fn linear(&self, c: CellId) -> usize {
        debug_assert!(self.contains(c));
        c.row as usize * self.n_cols as usize + c.col as usize
    }

    pub fn from_linear(&self, idx: usize) -> CellId {
        debug_assert!(idx < self.n_cells());
        CellId {
            row: (idx / self.n_cols as usize) as u32,
            col: (idx % self.n_cols as usize) as u32,
        }
    }

    /// Cell containing `p` under the half-open rule, or `None` when `p`
    /// falls outside the extent (points on the east/north outer boundary
    /// are outside).
    pub fn cell_of_point(&self, p: Point) -> Option<CellId> {
        if !p.is_finite() {
            return None;
        }
        let fx = (p.x - self.origin_x) / self.cell_size;
        let fy = (p.y - self.origin_y) / self.cell_size;
        if fx < 0.0 || fy < 0.0 {
            return None;
        }
        let col = fx.floor() as u64;
        let row = fy.floor() as u64;
        if row >= self.n_rows as u64 || col >= self.n_cols as u64 {
            return None;
        }
        Some(CellId {
            row: row as u32,
            col: col as u32,
        })
    }

    pub fn centroid(&self, c: CellId) -> Point {
        Point {
            x: self.origin_x + (c.col as f64 + 0.5) * self.cell_size,
            y: self.origin_y + (c.row as f64 + 0.5) * self.cell_size,
        }
    }

    /// Lattice neighbors of `c`, clipped at the grid boundary.
    pub fn neighbors(&self, c: CellId, scheme: Contiguity) -> Vec<CellId> {
        const ROOK: [(i64, i64); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];
        const DIAG: [(i64, i64); 4] = [(-1, -1), (-1, 1), (1, -1), (1, 1)];
        let mut out = Vec::with_capacity(8);
        let mut push = |dr: i64, dc: i64| {
            let r = c.row as i64 + dr;
            let cc = c.col as i64 + dc;
            if r >= 0 && cc >= 0 && (r as u64) < self.n_rows as u64 && (cc as u64) < self.n_cols as u64 {
                out.push(CellId {
                    row: r as u32,
                    col: cc as u32,
                });
            }
        };
        for (dr, dc) in ROOK {
            push(dr, dc);
        }
        if scheme == Contiguity::Queen {
            for (dr, dc) in DIAG {
                push(dr, dc);
            }
        }
        out
    }

    /// Cells whose centroid lies inside `poly` (even-odd rule, holes
    /// excluded). Candidate cells are pruned by the polygon bounding box.
    pub fn cells_in_polygon(&self, poly: &PolygonGeometry) -> Result<Vec<CellId>> {
        poly.validate()?;
        let (min, max) = poly.bounding_box();
        let lo_col = ((min.x - self.origin_x) / self.cell_size - 1.0).floor().max(0.0) as u64;
        let lo_row = ((min.y - self.origin_y) / self.cell_size - 1.0).floor().max(0.0) as u64;
        let hi_col = (((max.x - self.origin_x) / self.cell_size) + 1.0).ceil().min(self.n_cols as f64) as u64;
        let hi_row = (((max.y - self.origin_y) / self.cell_size) + 1.0).ceil().min(self.n_rows as f64) as u64;
        let mut cells = Vec::new();
        for row in lo_row..hi_row {
            for col in lo_col..hi_col {
                let c = CellId {
                    row: row as u32,
                    col: col as u32,
                };
                if poly.contains(self.centroid(c)) {
                    cells.push(c);
                }
            }
        }
        Ok(cells)
    }
}
