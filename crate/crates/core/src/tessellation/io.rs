//! Tessellation JSON: `{"window": [outer, holes...], "segments": [[[x, y], [x, y]], ...], "metadata": {...}}`.

use serde::{Deserialize, Serialize};

use super::TTess;
use crate::error::TessError;
use crate::geometry::{geometric_tolerance, Point, Polygon, Segment};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TessFile {
    /// Outer ring first, then holes; each ring a list of `[x, y]` pairs.
    pub window: Vec<Vec<[f64; 2]>>,
    /// Internal segments as polylines; interior points must be collinear.
    pub segments: Vec<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<serde_json::Value>,
}

fn pt(c: [f64; 2]) -> Point {
    Point::new(c[0], c[1])
}

fn arr(p: Point) -> [f64; 2] {
    [p.x, p.y]
}

impl TessFile {
    pub fn from_tess(t: &TTess, metadata: Option<serde_json::Value>) -> Self {
        TessFile {
            window: t.window().rings().map(|r| r.iter().map(|&p| arr(p)).collect()).collect(),
            segments: t.internal_segments().map(|(_, s)| vec![arr(s.a), arr(s.b)]).collect(),
            metadata,
        }
    }

    pub fn window_polygon(&self) -> Result<Polygon, TessError> {
        let mut rings = self.window.iter().map(|r| r.iter().map(|&c| pt(c)).collect::<Vec<_>>());
        let outer = rings.next().ok_or_else(|| TessError::Format("window has no rings".into()))?;
        Ok(Polygon::new(outer, rings.collect())?)
    }

    pub fn to_tess(&self) -> Result<TTess, TessError> {
        let window = self.window_polygon()?;
        let eps = geometric_tolerance(window.diameter());
        let mut segs = Vec::with_capacity(self.segments.len());
        for (i, line) in self.segments.iter().enumerate() {
            if line.len() < 2 {
                return Err(TessError::Format(format!("segment {i} has fewer than two points")));
            }
            let s = Segment::new(pt(line[0]), pt(line[line.len() - 1]));
            if line.iter().any(|&c| s.line().signed_distance(pt(c)).abs() > eps.max(1e-12)) {
                return Err(TessError::Format(format!("segment {i} is not straight")));
            }
            segs.push(s);
        }
        TTess::from_segments(window, &segs)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tessellation files serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, TessError> {
        serde_json::from_str(text).map_err(|e| TessError::Format(e.to_string()))
    }
}

impl TTess {
    pub fn to_json(&self, metadata: Option<serde_json::Value>) -> String {
        TessFile::from_tess(self, metadata).to_json()
    }

    pub fn from_json(text: &str) -> Result<TTess, TessError> {
        TessFile::from_json(text)?.to_tess()
    }
}
