//! Deterministic decile-map rendering to binary PPM (P6), one pixel per
//! cell, north row first.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::CellId;
use crate::smooth::DecileField;

/// Decile 1..10 colors, a red -> yellow -> green ramp (low walkability is
/// red). Values follow the 10-class RdYlGn scheme.
pub const DECILE_PALETTE: [(u8, u8, u8); 10] = [
    (165, 0, 38),
    (215, 48, 39),
    (244, 109, 67),
    (253, 174, 97),
    (254, 224, 139),
    (217, 239, 139),
    (166, 217, 106),
    (102, 189, 99),
    (26, 152, 80),
    (0, 104, 55),
];

pub const NODATA_RGB: (u8, u8, u8) = (255, 255, 255);

pub fn render_decile_map(deciles: &DecileField, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let g = deciles.grid();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(format!("P6\n{} {}\n255\n", g.n_cols, g.n_rows).as_bytes())
        .map_err(|e| Error::io(path, e))?;
    let mut row_buf = Vec::with_capacity(g.n_cols as usize * 3);
    for file_row in 0..g.n_rows {
        let mem_row = g.n_rows - 1 - file_row;
        row_buf.clear();
        for col in 0..g.n_cols {
            let (r, gch, b) = match deciles.label(CellId::new(mem_row, col)) {
                Some(d) => DECILE_PALETTE[(d - 1) as usize],
                None => NODATA_RGB,
            };
            row_buf.extend_from_slice(&[r, gch, b]);
        }
        w.write_all(&row_buf).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::raster::RasterLayer;

    fn decile_field(values: Vec<f64>, rows: u32, cols: u32) -> DecileField {
        let g = GridSpec::new(0.0, 0.0, 100.0, rows, cols).unwrap();
        DecileField::from_raster(RasterLayer::from_values(g, values, -9999.0).unwrap()).unwrap()
    }

    #[test]
    fn single_cell_top_decile() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.ppm");
        render_decile_map(&decile_field(vec![10.0], 1, 1), &p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[..9], b"P6\n1 1\n25");
        let (r, g, b) = DECILE_PALETTE[9];
        assert_eq!(&bytes[bytes.len() - 3..], &[r, g, b]);
    }

    #[test]
    fn all_nodata_is_white() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.ppm");
        render_decile_map(&decile_field(vec![-9999.0; 4], 2, 2), &p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        let header_len = "P6\n2 2\n255\n".len();
        assert!(bytes[header_len..].iter().all(|&v| v == 255));
        assert_eq!(bytes.len(), header_len + 12);
    }

    #[test]
    fn render_is_byte_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let field = decile_field(vec![1.0, 5.0, -9999.0, 10.0], 2, 2);
        let p1 = dir.path().join("a.ppm");
        let p2 = dir.path().join("b.ppm");
        render_decile_map(&field, &p1).unwrap();
        render_decile_map(&field, &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn north_row_is_first() {
        let dir = tempfile::tempdir().unwrap();
        // Row 1 (north) = decile 10, row 0 (south) = decile 1.
        let field = decile_field(vec![1.0, 1.0, 10.0, 10.0], 2, 2);
        let p = dir.path().join("d.ppm");
        render_decile_map(&field, &p).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        let header_len = "P6\n2 2\n255\n".len();
        let first_pixel = (bytes[header_len], bytes[header_len + 1], bytes[header_len + 2]);
        assert_eq!(first_pixel, DECILE_PALETTE[9]);
    }
}
