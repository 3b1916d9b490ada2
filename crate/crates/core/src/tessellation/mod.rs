//! T-tessellations of a polygonal window.
//!
//! A [`TTess`] owns the window and the geometry of its internal segments;
//! vertices, edges, maximal segments and cells are derived from them by a
//! planar arrangement pass whenever a new state is produced. Internal
//! segments carry stable [`SegmentId`]s that survive updates, so moves can be
//! logged and replayed. Vertex, edge and cell indices are positions in the
//! derived topology of one state and are only meaningful for that state.

mod build;
mod enumerate;
mod io;
mod update;
mod validate;

use std::collections::BTreeMap;

use rustc_hash::FxHashMap as HashMap;

use serde::{Deserialize, Serialize};

use crate::error::TessError;
use crate::geometry::{geometric_tolerance, Line, Point, Polygon, Segment};

pub use enumerate::{canonical_key, enumerate_supported, CanonicalKey, MAX_ENUMERATION_LINES};
pub use io::TessFile;
pub use update::{split_chord, LocalUpdate, SegEnd, UpdatePlan};
pub use validate::Violation;

/// Stable handle of an internal segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SegmentId(pub u64);

/// Origin of a derived segment: an internal segment or a side of a window ring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SegRef {
    Internal(SegmentId),
    Boundary(usize),
}

impl SegRef {
    pub fn internal(self) -> Option<SegmentId> {
        match self {
            SegRef::Internal(id) => Some(id),
            SegRef::Boundary(_) => None,
        }
    }

    pub fn is_boundary(self) -> bool {
        matches!(self, SegRef::Boundary(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Face {
    Cell(usize),
    Exterior,
}

impl Face {
    pub fn cell(self) -> Option<usize> {
        match self {
            Face::Cell(c) => Some(c),
            Face::Exterior => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VertexKind {
    Border,
    Internal,
}

#[derive(Debug, Clone)]
pub struct Vertex {
    pub point: Point,
    /// Incident edges sorted counter-clockwise by direction.
    pub edges: Vec<usize>,
    pub kind: VertexKind,
}

impl Vertex {
    pub fn degree(&self) -> usize {
        self.edges.len()
    }
}

#[derive(Debug, Clone)]
pub struct Edge {
    pub ends: [usize; 2],
    /// Index into [`TTess::segments`].
    pub segment: usize,
    /// Faces to the left and to the right of `ends[0] -> ends[1]`.
    pub faces: [Face; 2],
}

impl Edge {
    pub fn other(&self, v: usize) -> usize {
        if self.ends[0] == v {
            self.ends[1]
        } else {
            self.ends[0]
        }
    }
}

/// How a segment end terminates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EndKind {
    /// On the window boundary.
    Border,
    /// In the interior of another segment (index into [`TTess::segments`]).
    Blocked(usize),
    /// Anywhere else; never occurs in a valid T-tessellation.
    Free,
}

#[derive(Debug, Clone)]
pub struct Seg {
    pub source: SegRef,
    pub geom: Segment,
    pub line: Line,
    /// Vertices ordered from `geom.a` to `geom.b`.
    pub vertices: Vec<usize>,
    pub edges: Vec<usize>,
    /// Termination of the `a` and `b` ends.
    pub ends: [EndKind; 2],
}

impl Seg {
    pub fn is_internal(&self) -> bool {
        !self.source.is_boundary()
    }
}

/// Half-edge: `forward` walks `ends[0] -> ends[1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HalfEdge {
    pub edge: usize,
    pub forward: bool,
}

#[derive(Debug, Clone)]
pub struct Cell {
    /// Outer boundary, counter-clockwise; `ring[i]` is the origin of `boundary[i]`.
    pub boundary: Vec<HalfEdge>,
    pub ring: Vec<Point>,
    pub ring_vertices: Vec<usize>,
    /// Inner boundary components (holes of the window or dangling pieces).
    pub holes: Vec<Vec<HalfEdge>>,
    pub area: f64,
    pub perimeter: f64,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Topology {
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
    pub segs: Vec<Seg>,
    pub cells: Vec<Cell>,
    pub seg_index: HashMap<SegmentId, usize>,
}

#[derive(Debug, Clone)]
pub struct TTess {
    window: Polygon,
    eps: f64,
    internal: BTreeMap<SegmentId, Segment>,
    next_id: u64,
    topo: Topology,
}

impl TTess {
    /// The tessellation with a single cell, the window itself.
    pub fn window_only(window: Polygon) -> Result<Self, TessError> {
        TTess::from_segments(window, &[])
    }

    /// Planar arrangement of the window and the given segments. The result
    /// may contain I, L or X vertices; use [`TTess::validate`] to check it.
    pub fn from_segments(window: Polygon, segments: &[Segment]) -> Result<Self, TessError> {
        let window = Polygon::new(window.outer, window.holes)?;
        let eps = geometric_tolerance(window.diameter());
        let mut internal = BTreeMap::new();
        for (i, s) in segments.iter().enumerate() {
            let s = Segment::checked(s.a, s.b, eps)?;
            internal.insert(SegmentId(i as u64), s);
        }
        let next_id = segments.len() as u64;
        TTess::assemble(window, eps, internal, next_id)
    }

    pub(crate) fn assemble(
        window: Polygon,
        eps: f64,
        internal: BTreeMap<SegmentId, Segment>,
        next_id: u64,
    ) -> Result<Self, TessError> {
        let topo = build::build(&window, eps, &internal)?;
        Ok(TTess { window, eps, internal, next_id, topo })
    }

    pub fn window(&self) -> &Polygon {
        &self.window
    }

    /// Geometric tolerance of this tessellation.
    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.topo.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.topo.edges
    }

    /// All derived segments, window sides included.
    pub fn segments(&self) -> &[Seg] {
        &self.topo.segs
    }

    pub fn cells(&self) -> &[Cell] {
        &self.topo.cells
    }

    pub fn n_cells(&self) -> usize {
        self.topo.cells.len()
    }

    pub fn n_internal_segments(&self) -> usize {
        self.internal.len()
    }

    /// Internal segment geometries keyed by their stable ids.
    pub fn internal_segments(&self) -> impl Iterator<Item = (SegmentId, &Segment)> {
        self.internal.iter().map(|(k, v)| (*k, v))
    }

    pub fn internal_geometry(&self, id: SegmentId) -> Option<&Segment> {
        self.internal.get(&id)
    }

    /// Derived segment of an internal id.
    pub fn segment(&self, id: SegmentId) -> Option<&Seg> {
        self.topo.seg_index.get(&id).map(|&i| &self.topo.segs[i])
    }

    pub fn segment_index(&self, id: SegmentId) -> Option<usize> {
        self.topo.seg_index.get(&id).copied()
    }

    pub(crate) fn next_id(&self) -> u64 {
        self.next_id
    }

    pub(crate) fn internal_map(&self) -> &BTreeMap<SegmentId, Segment> {
        &self.internal
    }

    /// Segment the half-edge lies on.
    pub fn half_edge_segment(&self, h: HalfEdge) -> &Seg {
        &self.topo.segs[self.topo.edges[h.edge].segment]
    }

    pub fn half_edge_points(&self, h: HalfEdge) -> (Point, Point) {
        let e = &self.topo.edges[h.edge];
        let (a, b) = (self.topo.vertices[e.ends[0]].point, self.topo.vertices[e.ends[1]].point);
        if h.forward {
            (a, b)
        } else {
            (b, a)
        }
    }

    /// Total length of the internal segments.
    pub fn internal_length(&self) -> f64 {
        self.internal.values().map(|s| s.length()).sum()
    }

    /// Every edge as a geometric segment (window sides included).
    pub fn edge_segments(&self) -> Vec<Segment> {
        self.topo
            .edges
            .iter()
            .map(|e| Segment::new(self.topo.vertices[e.ends[0]].point, self.topo.vertices[e.ends[1]].point))
            .collect()
    }

    /// Cell whose interior contains `p`, if any.
    pub fn locate(&self, p: Point) -> Option<usize> {
        self.topo
            .cells
            .iter()
            .enumerate()
            .filter(|(_, c)| crate::geometry::point_in_ring(p, &c.ring))
            .min_by(|a, b| a.1.area.total_cmp(&b.1.area))
            .map(|(i, _)| i)
    }

    /// Internal segments with exactly one edge (the merge targets).
    pub fn non_blocking_segments(&self) -> Vec<SegmentId> {
        self.internal.keys().filter(|id| self.segment(**id).is_some_and(|s| s.edges.len() == 1)).copied().collect()
    }

    /// Ends at which a flip can be proposed: both ends of every internal
    /// segment with at least two edges.
    pub fn flippable_ends(&self) -> Vec<(SegmentId, SegEnd)> {
        let mut out = Vec::new();
        for id in self.internal.keys() {
            if self.segment(*id).is_some_and(|s| s.edges.len() >= 2) {
                out.push((*id, SegEnd::A));
                out.push((*id, SegEnd::B));
            }
        }
        out
    }

    /// Rule violations; empty iff this is a T-tessellation of its window.
    pub fn validate(&self) -> Vec<Violation> {
        validate::validate(self)
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    /// Applies a transformation to the window and all segments.
    pub fn map(&self, f: impl Fn(Point) -> Point) -> Result<TTess, TessError> {
        let window = self.window.map(&f);
        let window = Polygon::new(window.outer, window.holes)?;
        let eps = geometric_tolerance(window.diameter());
        let internal = self.internal.iter().map(|(k, s)| (*k, Segment::new(f(s.a), f(s.b)))).collect();
        TTess::assemble(window, eps, internal, self.next_id)
    }
}

impl PartialEq for TTess {
    /// Same window and same internal segment ids with identical geometry.
    fn eq(&self, other: &Self) -> bool {
        self.window == other.window && self.internal == other.internal
    }
}

#[cfg(test)]
pub(crate) mod tests_support;
