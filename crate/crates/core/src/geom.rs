//! Planar polygon geometry with even-odd containment.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::grid::Point;

/// A single polygon: one outer ring plus optional holes. Rings are stored
/// explicitly closed (first vertex repeated at the end). Properties carry
/// at least an `id`; MultiPolygon parts share the same id.
#[derive(Debug, Clone)]
pub struct PolygonGeometry {
    pub outer_ring: Vec<Point>,
    pub holes: Vec<Vec<Point>>,
    pub properties: BTreeMap<String, String>,
}

impl PolygonGeometry {
    pub fn new(
        outer_ring: Vec<Point>,
        holes: Vec<Vec<Point>>,
        properties: BTreeMap<String, String>,
    ) -> Result<Self> {
        let poly = PolygonGeometry {
            outer_ring,
            holes,
            properties,
        };
        poly.validate()?;
        Ok(poly)
    }

    /// Axis-aligned rectangle helper (fixtures and tests).
    pub fn rectangle(id: &str, x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        let ring = vec![
            Point::new(x0, y0),
            Point::new(x1, y0),
            Point::new(x1, y1),
            Point::new(x0, y1),
            Point::new(x0, y0),
        ];
        let mut properties = BTreeMap::new();
        properties.insert("id".to_string(), id.to_string());
        PolygonGeometry {
            outer_ring: ring,
            holes: Vec::new(),
            properties,
        }
    }

    pub fn id(&self) -> &str {
        self.properties.get("id").map(String::as_str).unwrap_or("")
    }

    pub fn validate(&self) -> Result<()> {
        let ctx = format!("polygon id={}", self.id());
        validate_ring(&self.outer_ring, &ctx)?;
        for hole in &self.holes {
            validate_ring(hole, &ctx)?;
        }
        if !self.properties.contains_key("id") {
            return Err(Error::InvalidGeometry {
                context: "polygon".into(),
                message: "missing required `id` property".into(),
            });
        }
        Ok(())
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        let mut min = Point::new(f64::INFINITY, f64::INFINITY);
        let mut max = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.outer_ring {
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
        }
        (min, max)
    }

    /// Even-odd containment over all rings, so holes flip parity and are
    /// excluded. Points exactly on an edge resolve arbitrarily but
    /// deterministically.
    pub fn contains(&self, p: Point) -> bool {
        let mut inside = ring_crossings_odd(&self.outer_ring, p);
        for hole in &self.holes {
            if ring_crossings_odd(hole, p) {
                inside = !inside;
            }
        }
        inside
    }
}

fn validate_ring(ring: &[Point], ctx: &str) -> Result<()> {
    let err = |message: String| Error::InvalidGeometry {
        context: ctx.to_string(),
        message,
    };
    if ring.len() < 4 {
        return Err(err(format!("ring has {} vertices, need a closed ring of >= 3 distinct", ring.len())));
    }
    if ring.first() != ring.last() {
        return Err(err("ring is not explicitly closed (first != last vertex)".into()));
    }
    for p in ring {
        if !p.is_finite() {
            return Err(err("ring has non-finite vertex".into()));
        }
    }
    let mut distinct: Vec<Point> = Vec::new();
    for p in &ring[..ring.len() - 1] {
        if !distinct.iter().any(|q| q == p) {
            distinct.push(*p);
        }
    }
    if distinct.len() < 3 {
        return Err(err(format!("ring has only {} distinct vertices", distinct.len())));
    }
    Ok(())
}

/// Odd number of ray crossings from `p` toward +x.
fn ring_crossings_odd(ring: &[Point], p: Point) -> bool {
    let mut odd = false;
    for w in ring.windows(2) {
        let (a, b) = (w[0], w[1]);
        if (a.y > p.y) != (b.y > p.y) {
            let t = (p.y - a.y) / (b.y - a.y);
            let x_cross = a.x + t * (b.x - a.x);
            if p.x < x_cross {
                odd = !odd;
            }
        }
    }
    odd
}
