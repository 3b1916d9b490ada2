use std::fmt;

use super::{Face, SegmentId, TTess, VertexKind};
use crate::geometry::Point;

/// A broken T-tessellation rule together with the element that breaks it.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Internal vertex whose degree is not 3 (1: I-vertex, 2: L-vertex, 4+: X-vertex).
    VertexDegree { vertex: usize, point: Point, degree: usize },
    /// Internal degree-3 vertex without a pair of collinear edges.
    NoStraightPair { vertex: usize, point: Point },
    /// Two distinct internal segments share a supporting line.
    AlignedSegments { first: SegmentId, second: SegmentId },
    /// Edge with the same face on both sides.
    DanglingEdge { edge: usize },
    /// Cell areas do not add up to the window area.
    AreaMismatch { cells: f64, window: f64 },
}

impl Violation {
    /// Short rule label.
    pub fn rule(&self) -> &'static str {
        match self {
            Violation::VertexDegree { .. } | Violation::NoStraightPair { .. } => "condition 1",
            Violation::AlignedSegments { .. } => "condition 2",
            Violation::DanglingEdge { .. } => "edge separation",
            Violation::AreaMismatch { .. } => "area partition",
        }
    }

    pub fn is_x_vertex(&self) -> bool {
        matches!(self, Violation::VertexDegree { degree, .. } if *degree >= 4)
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::VertexDegree { vertex, point, degree } => write!(
                f,
                "{}: internal vertex {} at ({}, {}) has {} incident edges instead of 3",
                self.rule(),
                vertex,
                point.x,
                point.y,
                degree
            ),
            Violation::NoStraightPair { vertex, point } => write!(
                f,
                "{}: internal vertex {} at ({}, {}) has no pair of collinear edges",
                self.rule(),
                vertex,
                point.x,
                point.y
            ),
            Violation::AlignedSegments { first, second } => {
                write!(f, "{}: segments {} and {} are aligned", self.rule(), first.0, second.0)
            }
            Violation::DanglingEdge { edge } => {
                write!(f, "{}: edge {} has the same face on both sides", self.rule(), edge)
            }
            Violation::AreaMismatch { cells, window } => {
                write!(f, "{}: cells cover {} but the window has area {}", self.rule(), cells, window)
            }
        }
    }
}

pub(super) fn validate(t: &TTess) -> Vec<Violation> {
    let mut out = Vec::new();
    let verts = t.vertices();
    let edges = t.edges();
    for (vi, v) in verts.iter().enumerate() {
        if v.kind != VertexKind::Internal {
            continue;
        }
        if v.degree() != 3 {
            out.push(Violation::VertexDegree { vertex: vi, point: v.point, degree: v.degree() });
            continue;
        }
        let dirs: Vec<(Point, f64)> = v
            .edges
            .iter()
            .map(|&e| {
                let d = verts[edges[e].other(vi)].point - v.point;
                let len = d.norm();
                (d * (1.0 / len), len)
            })
            .collect();
        let straight = (0..3).any(|i| {
            let j = (i + 1) % 3;
            let (u1, l1) = dirs[i];
            let (u2, l2) = dirs[j];
            let tol = (2.0 * t.eps() / l1.min(l2)).max(1e-9);
            u1.dot(u2) < 0.0 && u1.cross(u2).abs() <= tol
        });
        if !straight {
            out.push(Violation::NoStraightPair { vertex: vi, point: v.point });
        }
    }

    let segs: Vec<_> = t.internal_segments().collect();
    for i in 0..segs.len() {
        for j in (i + 1)..segs.len() {
            if aligned(&segs[i].1.line(), segs[j].1, t.eps()) && aligned(&segs[j].1.line(), segs[i].1, t.eps()) {
                out.push(Violation::AlignedSegments { first: segs[i].0, second: segs[j].0 });
            }
        }
    }

    for (ei, e) in edges.iter().enumerate() {
        if e.faces[0] == e.faces[1] && e.faces[0] != Face::Exterior {
            out.push(Violation::DanglingEdge { edge: ei });
        }
    }

    let cells: f64 = t.cells().iter().map(|c| c.area).sum();
    let window = t.window().area();
    if (cells - window).abs() > 1e-8 * window {
        out.push(Violation::AreaMismatch { cells, window });
    }
    out
}

/// Both endpoints of `s` lie on `l` within `eps`.
pub(crate) fn aligned(l: &crate::geometry::Line, s: &crate::geometry::Segment, eps: f64) -> bool {
    l.signed_distance(s.a).abs() <= eps && l.signed_distance(s.b).abs() <= eps
}
