//! ESRI-style ASCII grid reader/writer.
//!
//! Header lines `ncols`, `nrows`, `xllcorner`, `yllcorner`, `cellsize`,
//! `NODATA_value` in that order, then `nrows` data lines north row first.
//! In-memory rows run south to north, so rows are flipped on read/write.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::io::fmt_g17;
use crate::raster::RasterLayer;

const HEADER_KEYS: [&str; 6] = ["ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "NODATA_value"];

pub fn read_ascii_grid(path: impl AsRef<Path>) -> Result<RasterLayer> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);

    fn next_line(
        reader: &mut BufReader<File>,
        line_no: &mut usize,
        buf: &mut String,
        path: &Path,
    ) -> Result<bool> {
        buf.clear();
        let n = reader.read_line(buf).map_err(|e| Error::io(path, e))?;
        *line_no += 1;
        Ok(n > 0)
    }

    let mut line_no = 0usize;
    let mut buf = String::new();
    let mut header = [0f64; 6];
    for (i, key) in HEADER_KEYS.iter().enumerate() {
        if !next_line(&mut reader, &mut line_no, &mut buf, path)? {
            return Err(Error::parse(path, line_no, format!("missing header line `{key}`")));
        }
        let mut tokens = buf.split_whitespace();
        let found = tokens
            .next()
            .ok_or_else(|| Error::parse(path, line_no, format!("empty line, expected `{key}`")))?;
        if !found.eq_ignore_ascii_case(key) {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected header `{key}`, found `{found}`"),
            ));
        }
        let value = tokens
            .next()
            .ok_or_else(|| Error::parse(path, line_no, format!("header `{key}` has no value")))?;
        header[i] = value
            .parse::<f64>()
            .map_err(|_| Error::parse(path, line_no, format!("header `{key}`: bad number `{value}`")))?;
        if tokens.next().is_some() {
            return Err(Error::parse(path, line_no, format!("header `{key}`: trailing tokens")));
        }
    }

    let [ncols_f, nrows_f, xll, yll, cellsize, nodata] = header;
    let as_count = |v: f64, key: &str| -> Result<u32> {
        if v.fract() != 0.0 || v < 0.0 || v > u32::MAX as f64 {
            return Err(Error::parse(path, line_no, format!("header `{key}`: not a valid count: {v}")));
        }
        Ok(v as u32)
    };
    let n_cols = as_count(ncols_f, "ncols")?;
    let n_rows = as_count(nrows_f, "nrows")?;
    let grid = GridSpec::new(xll, yll, cellsize, n_rows, n_cols)
        .map_err(|e| Error::parse(path, line_no, e.to_string()))?;

    let mut values = vec![nodata; grid.n_cells()];
    for file_row in 0..n_rows {
        if !next_line(&mut reader, &mut line_no, &mut buf, path)? {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected {n_rows} data rows, file ended after {file_row}"),
            ));
        }
        // File rows are north first; memory row 0 is the south edge.
        let mem_row = (n_rows - 1 - file_row) as usize;
        let base = mem_row * n_cols as usize;
        let mut count = 0usize;
        for token in buf.split_whitespace() {
            if count >= n_cols as usize {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!("row has more than {n_cols} values"),
                ));
            }
            let v = token
                .parse::<f64>()
                .map_err(|_| Error::parse(path, line_no, format!("bad numeric token `{token}`")))?;
            if v.to_bits() != nodata.to_bits() && !v.is_finite() {
                return Err(Error::parse(path, line_no, format!("non-finite value `{token}`")));
            }
            values[base + count] = v;
            count += 1;
        }
        if count != n_cols as usize {
            return Err(Error::parse(
                path,
                line_no,
                format!("row has {count} values, expected {n_cols}"),
            ));
        }
    }

    RasterLayer::from_values(grid, values, nodata)
}

pub fn write_ascii_grid(layer: &RasterLayer, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let g = layer.grid();
    let mut emit = |s: String| -> Result<()> { w.write_all(s.as_bytes()).map_err(|e| Error::io(path, e)) };

    emit(format!("ncols {}\n", g.n_cols))?;
    emit(format!("nrows {}\n", g.n_rows))?;
    emit(format!("xllcorner {}\n", fmt_g17(g.origin_x)))?;
    emit(format!("yllcorner {}\n", fmt_g17(g.origin_y)))?;
    emit(format!("cellsize {}\n", fmt_g17(g.cell_size)))?;
    emit(format!("NODATA_value {}\n", fmt_g17(layer.nodata())))?;

    let values = layer.values();
    let n_cols = g.n_cols as usize;
    let mut line = String::new();
    for file_row in 0..g.n_rows as usize {
        let mem_row = g.n_rows as usize - 1 - file_row;
        let base = mem_row * n_cols;
        line.clear();
        for (i, v) in values[base..base + n_cols].iter().enumerate() {
            if i > 0 {
                line.push(' ');
            }
            line.push_str(&fmt_g17(*v));
        }
        line.push('\n');
        emit(std::mem::take(&mut line))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::CellId;

    fn write_tmp(dir: &tempfile::TempDir, name: &str, content: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, content).unwrap();
        p
    }

    const SMALL: &str = "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 100\nNODATA_value -9999\n1 2\n3 4\n";

    #[test]
    fn file_rows_are_north_first() {
        let dir = tempfile::tempdir().unwrap();
        let layer = read_ascii_grid(write_tmp(&dir, "a.asc", SMALL)).unwrap();
        // File top row "1 2" is the north row => memory row 1.
        assert_eq!(layer.value(CellId::new(1, 0)), Some(1.0));
        assert_eq!(layer.value(CellId::new(1, 1)), Some(2.0));
        assert_eq!(layer.value(CellId::new(0, 0)), Some(3.0));
        assert_eq!(layer.value(CellId::new(0, 1)), Some(4.0));
    }

    #[test]
    fn nodata_token_becomes_sentinel() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(
            &dir,
            "a.asc",
            "ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 100\nNODATA_value -9999\n-9999 7\n",
        );
        let layer = read_ascii_grid(p).unwrap();
        assert!(layer.is_nodata(CellId::new(0, 0)));
        assert_eq!(layer.value(CellId::new(0, 1)), Some(7.0));
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let layer = read_ascii_grid(write_tmp(&dir, "a.asc", SMALL)).unwrap();
        let out = dir.path().join("b.asc");
        write_ascii_grid(&layer, &out).unwrap();
        let back = read_ascii_grid(&out).unwrap();
        assert_eq!(layer, back);
    }

    #[test]
    fn malformed_header_names_line() {
        let dir = tempfile::tempdir().unwrap();
        match read_ascii_grid(write_tmp(&dir, "a.asc", "ncols 2\nnrows 2\nxllcorner 0\n")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_header_key_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(
            &dir,
            "a.asc",
            "ncols 2\nnrows 2\nyllcorner 0\nxllcorner 0\ncellsize 100\nNODATA_value -9999\n1 2\n3 4\n",
        );
        match read_ascii_grid(p) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("xllcorner"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn row_length_mismatch_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(
            &dir,
            "a.asc",
            "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 100\nNODATA_value -9999\n1 2 3\n3 4\n",
        );
        match read_ascii_grid(p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 7),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn non_numeric_token_names_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(
            &dir,
            "a.asc",
            "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 100\nNODATA_value -9999\n1 2\n3 oops\n",
        );
        match read_ascii_grid(p) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 8);
                assert!(message.contains("oops"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn zero_rows_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(
            &dir,
            "a.asc",
            "ncols 2\nnrows 0\nxllcorner 0\nyllcorner 0\ncellsize 100\nNODATA_value -9999\n",
        );
        assert!(read_ascii_grid(p).is_err());
    }

    #[test]
    fn writer_output_is_g17() {
        let dir = tempfile::tempdir().unwrap();
        let g = GridSpec::new(0.0, 0.0, 100.0, 1, 1).unwrap();
        let layer = RasterLayer::from_values(g, vec![0.5], -9999.0).unwrap();
        let out = dir.path().join("g17.asc");
        write_ascii_grid(&layer, &out).unwrap();
        let text = std::fs::read_to_string(&out).unwrap();
        assert!(text.contains("5.0000000000000000e-1"), "{text}");
        let back = read_ascii_grid(&out).unwrap();
        assert_eq!(back.value(CellId::new(0, 0)), Some(0.5));
    }
}
