//! CSV tables: transit stop points, network nodes and network edges.
//!
//! Row numbers in errors are 1-based over data rows (the header is row 0).

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Point;

/// A categorized point feature (e.g. one transit stop).
#[derive(Debug, Clone, PartialEq)]
pub struct PointRecord {
    pub location: Point,
    pub category: String,
}

/// One street-network node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeRecord {
    pub id: i64,
    pub location: Point,
}

/// One raw street-network edge. `polyline` is the parsed WKT geometry, or
/// the straight chord between the endpoint nodes when the file carries no
/// geometry column. `length` follows the file's `length` column when
/// present and the polyline length otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct RawEdge {
    pub u: i64,
    pub v: i64,
    pub polyline: Vec<Point>,
    pub length: f64,
    pub had_geometry: bool,
    /// 1-based data row in the source file, for diagnostics.
    pub row: usize,
}

impl RawEdge {
    pub fn is_self_loop(&self) -> bool {
        self.u == self.v
    }
}

pub fn polyline_length(polyline: &[Point]) -> f64 {
    polyline.windows(2).map(|w| w[0].distance(&w[1])).sum()
}

fn open_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => {
                Error::io(path, std::io::Error::new(std::io::ErrorKind::Other, e.to_string()))
            }
            _ => Error::parse(path, 0, e.to_string()),
        })
}

fn check_header(path: &Path, reader: &mut csv::Reader<std::fs::File>, allowed: &[&[&str]]) -> Result<usize> {
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(path, 0, format!("missing header: {e}")))?;
    let got: Vec<String> = headers.iter().map(|h| h.trim().to_ascii_lowercase()).collect();
    for (i, candidate) in allowed.iter().enumerate() {
        if got.len() == candidate.len() && got.iter().zip(candidate.iter()).all(|(g, c)| g == c) {
            return Ok(i);
        }
    }
    let expected = allowed
        .iter()
        .map(|c| c.join(","))
        .collect::<Vec<_>>()
        .join("` or `");
    Err(Error::parse(
        path,
        0,
        format!("bad header `{}`, expected `{expected}`", got.join(",")),
    ))
}

fn parse_f64(path: &Path, row: usize, field: &str, value: &str) -> Result<f64> {
    let v = value
        .parse::<f64>()
        .map_err(|_| Error::parse(path, row, format!("field `{field}`: bad number `{value}`")))?;
    if !v.is_finite() {
        return Err(Error::parse(path, row, format!("field `{field}`: non-finite `{value}`")));
    }
    Ok(v)
}

fn parse_i64(path: &Path, row: usize, field: &str, value: &str) -> Result<i64> {
    value
        .parse::<i64>()
        .map_err(|_| Error::parse(path, row, format!("field `{field}`: bad integer `{value}`")))
}

/// Read `x,y,category` point records.
pub fn read_points_csv(path: impl AsRef<Path>) -> Result<Vec<PointRecord>> {
    let path = path.as_ref();
    let mut reader = open_reader(path)?;
    check_header(path, &mut reader, &[&["x", "y", "category"]])?;
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::parse(path, row, e.to_string()))?;
        if record.len() != 3 {
            return Err(Error::parse(path, row, format!("expected 3 fields, got {}", record.len())));
        }
        let x = parse_f64(path, row, "x", &record[0])?;
        let y = parse_f64(path, row, "y", &record[1])?;
        let category = record[2].to_string();
        if category.is_empty() {
            return Err(Error::parse(path, row, "empty category".to_string()));
        }
        out.push(PointRecord {
            location: Point::new(x, y),
            category,
        });
    }
    Ok(out)
}

/// Read `id,x,y` node records. Duplicate ids are rejected.
pub fn read_nodes_csv(path: impl AsRef<Path>) -> Result<Vec<NodeRecord>> {
    let path = path.as_ref();
    let mut reader = open_reader(path)?;
    check_header(path, &mut reader, &[&["id", "x", "y"]])?;
    let mut out = Vec::new();
    let mut seen: HashMap<i64, usize> = HashMap::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::parse(path, row, e.to_string()))?;
        if record.len() != 3 {
            return Err(Error::parse(path, row, format!("expected 3 fields, got {}", record.len())));
        }
        let id = parse_i64(path, row, "id", &record[0])?;
        let x = parse_f64(path, row, "x", &record[1])?;
        let y = parse_f64(path, row, "y", &record[2])?;
        if let Some(prev) = seen.insert(id, row) {
            return Err(Error::parse(path, row, format!("duplicate node id {id} (first at row {prev})")));
        }
        out.push(NodeRecord {
            id,
            location: Point::new(x, y),
        });
    }
    Ok(out)
}

/// Read network edges. Accepted headers: `u,v,geometry` (WKT LINESTRING),
/// `u,v,length`, or bare `u,v`. The latter two resolve their polylines as
/// straight chords from `nodes`, so `nodes` is required for them and any
/// reference to an unknown node id is an error.
pub fn read_edges_csv(path: impl AsRef<Path>, nodes: Option<&[NodeRecord]>) -> Result<Vec<RawEdge>> {
    let path = path.as_ref();
    let mut reader = open_reader(path)?;
    let variant = check_header(
        path,
        &mut reader,
        &[&["u", "v", "geometry"], &["u", "v", "length"], &["u", "v"]],
    )?;
    let node_map: Option<HashMap<i64, Point>> =
        nodes.map(|ns| ns.iter().map(|n| (n.id, n.location)).collect());

    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::parse(path, row, e.to_string()))?;
        let expected_fields = if variant == 2 { 2 } else { 3 };
        if record.len() != expected_fields {
            return Err(Error::parse(
                path,
                row,
                format!("expected {expected_fields} fields, got {}", record.len()),
            ));
        }
        let u = parse_i64(path, row, "u", &record[0])?;
        let v = parse_i64(path, row, "v", &record[1])?;

        let chord = |map: &HashMap<i64, Point>| -> Result<Vec<Point>> {
            let pu = *map
                .get(&u)
                .ok_or_else(|| Error::parse(path, row, format!("edge references unknown node {u}")))?;
            let pv = *map
                .get(&v)
                .ok_or_else(|| Error::parse(path, row, format!("edge references unknown node {v}")))?;
            Ok(vec![pu, pv])
        };
        let need_nodes = || -> Result<&HashMap<i64, Point>> {
            node_map
                .as_ref()
                .ok_or_else(|| Error::parse(path, row, "edge file has no geometry column and no nodes table was supplied".to_string()))
        };

        let edge = match variant {
            0 => {
                let polyline = parse_wkt_linestring(path, row, &record[2])?;
                let length = polyline_length(&polyline);
                RawEdge {
                    u,
                    v,
                    polyline,
                    length,
                    had_geometry: true,
                    row,
                }
            }
            1 => {
                let length = parse_f64(path, row, "length", &record[2])?;
                if length < 0.0 {
                    return Err(Error::parse(path, row, format!("negative edge length {length}")));
                }
                RawEdge {
                    u,
                    v,
                    polyline: chord(need_nodes()?)?,
                    length,
                    had_geometry: false,
                    row,
                }
            }
            _ => {
                let polyline = chord(need_nodes()?)?;
                let length = polyline_length(&polyline);
                RawEdge {
                    u,
                    v,
                    polyline,
                    length,
                    had_geometry: false,
                    row,
                }
            }
        };
        out.push(edge);
    }
    Ok(out)
}

/// Parse `LINESTRING(x y, x y, ...)`.
fn parse_wkt_linestring(path: &Path, row: usize, wkt: &str) -> Result<Vec<Point>> {
    let bad = |msg: String| Error::parse(path, row, format!("WKT `{wkt}`: {msg}"));
    let s = wkt.trim();
    let upper = s.to_ascii_uppercase();
    let rest = upper
        .strip_prefix("LINESTRING")
        .ok_or_else(|| bad("expected LINESTRING".into()))?;
    let inner_start = rest.find('(').ok_or_else(|| bad("missing `(`".into()))?;
    if !rest[..inner_start].trim().is_empty() {
        return Err(bad("unexpected tokens before `(`".into()));
    }
    let open = s.len() - rest.len() + inner_start;
    let close = s.rfind(')').ok_or_else(|| bad("missing `)`".into()))?;
    if close < open || !s[close + 1..].trim().is_empty() {
        return Err(bad("unexpected tokens after `)`".into()));
    }
    let body = &s[open + 1..close];
    let mut points = Vec::new();
    for pair in body.split(',') {
        let mut it = pair.split_whitespace();
        let x = it
            .next()
            .ok_or_else(|| bad("empty coordinate pair".into()))?
            .parse::<f64>()
            .map_err(|_| bad(format!("bad x in `{pair}`")))?;
        let y = it
            .next()
            .ok_or_else(|| bad(format!("missing y in `{pair}`")))?
            .parse::<f64>()
            .map_err(|_| bad(format!("bad y in `{pair}`")))?;
        if it.next().is_some() {
            return Err(bad(format!("too many coordinates in `{pair}`")));
        }
        if !x.is_finite() || !y.is_finite() {
            return Err(bad(format!("non-finite coordinate in `{pair}`")));
        }
        points.push(Point::new(x, y));
    }
    if points.len() < 2 {
        return Err(bad(format!("{} points, need at least 2", points.len())));
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(dir: &tempfile::TempDir, name: &str, content: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, content).unwrap();
        p
    }

    #[test]
    fn points_basic() {
        let dir = tempfile::tempdir().unwrap();
        let recs = read_points_csv(tmp(&dir, "p.csv", "x,y,category\n10,20,bus\n")).unwrap();
        assert_eq!(
            recs,
            vec![PointRecord {
                location: Point::new(10.0, 20.0),
                category: "bus".into()
            }]
        );
    }

    #[test]
    fn points_empty_data_section() {
        let dir = tempfile::tempdir().unwrap();
        assert!(read_points_csv(tmp(&dir, "p.csv", "x,y,category\n")).unwrap().is_empty());
    }

    #[test]
    fn points_bad_coordinate_names_row() {
        let dir = tempfile::tempdir().unwrap();
        let err = read_points_csv(tmp(&dir, "p.csv", "x,y,category\n10,oops,bus\n")).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn points_missing_header_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(read_points_csv(tmp(&dir, "p.csv", "lon,lat,kind\n1,2,bus\n")).is_err());
    }

    #[test]
    fn edges_wkt_length() {
        let dir = tempfile::tempdir().unwrap();
        let edges = read_edges_csv(
            tmp(&dir, "e.csv", "u,v,geometry\n1,2,\"LINESTRING(0 0, 3 4)\"\n"),
            None,
        )
        .unwrap();
        assert_eq!(edges.len(), 1);
        assert_eq!(edges[0].length, 5.0);
        assert_eq!(edges[0].polyline, vec![Point::new(0.0, 0.0), Point::new(3.0, 4.0)]);
    }

    #[test]
    fn edges_self_loop_retained_and_flagged() {
        let dir = tempfile::tempdir().unwrap();
        let edges = read_edges_csv(
            tmp(&dir, "e.csv", "u,v,geometry\n1,1,\"LINESTRING(0 0, 0 0)\"\n"),
            None,
        )
        .unwrap();
        assert_eq!(edges.len(), 1);
        assert!(edges[0].is_self_loop());
        assert_eq!(edges[0].length, 0.0);
    }

    #[test]
    fn edges_unknown_node_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let nodes = vec![NodeRecord {
            id: 1,
            location: Point::new(0.0, 0.0),
        }];
        let err = read_edges_csv(tmp(&dir, "e.csv", "u,v\n1,2\n"), Some(&nodes)).unwrap_err();
        match err {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 1);
                assert!(message.contains("unknown node 2"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn edges_length_variant_uses_declared_length() {
        let dir = tempfile::tempdir().unwrap();
        let nodes = vec![
            NodeRecord {
                id: 1,
                location: Point::new(0.0, 0.0),
            },
            NodeRecord {
                id: 2,
                location: Point::new(100.0, 0.0),
            },
        ];
        let edges = read_edges_csv(tmp(&dir, "e.csv", "u,v,length\n1,2,140\n"), Some(&nodes)).unwrap();
        assert_eq!(edges[0].length, 140.0);
        assert!(!edges[0].had_geometry);
        assert_eq!(edges[0].polyline.len(), 2);
    }

    #[test]
    fn edges_bad_wkt_rejected() {
        let dir = tempfile::tempdir().unwrap();
        for wkt in ["POINT(1 2)", "LINESTRING(1 2", "LINESTRING(1)", "LINESTRING()"] {
            let p = tmp(&dir, "e.csv", &format!("u,v,geometry\n1,2,\"{wkt}\"\n"));
            assert!(read_edges_csv(p, None).is_err(), "{wkt} should fail");
        }
    }

    #[test]
    fn nodes_duplicate_id_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let err = read_nodes_csv(tmp(&dir, "n.csv", "id,x,y\n1,0,0\n1,5,5\n")).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }
}
