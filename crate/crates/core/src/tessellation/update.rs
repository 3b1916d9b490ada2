//! Split, merge and flip.
//!
//! Each update is first turned into an [`UpdatePlan`] that lists the cells it
//! removes and the rings of the cells it creates. Statistics deltas and the
//! sampler's proposal bookkeeping are read off the plan; the new state is
//! produced only when the plan is applied.

use super::validate::aligned;
use super::{EndKind, Face, HalfEdge, SegmentId, TTess};
use crate::error::TessError;
use crate::geometry::{orient, point_in_ring, ray_segment_intersection, Line, Point, Segment};

/// New vertices must keep at least this many tolerances away from existing ones.
const CLEARANCE: f64 = 16.0;
/// How far (in tolerances) a caller-supplied chord endpoint may sit from the cell boundary.
const ON_BOUNDARY: f64 = 1e4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SegEnd {
    A,
    B,
}

impl SegEnd {
    fn slot(self) -> usize {
        match self {
            SegEnd::A => 0,
            SegEnd::B => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LocalUpdate {
    Split { cell: usize, chord: Segment },
    Merge { segment: SegmentId },
    Flip { segment: SegmentId, end: SegEnd },
}

#[derive(Debug, Clone)]
pub struct UpdatePlan {
    pub update: LocalUpdate,
    pub removed_cells: Vec<usize>,
    pub added_rings: Vec<Vec<Point>>,
    /// Change in the number of internal segments.
    pub segment_delta: i64,
    /// Change in the edge count of internal segments that survive the update.
    pub edge_count_changes: Vec<(SegmentId, i64)>,
    pub created: Option<SegmentId>,
    pub removed: Option<(SegmentId, Segment)>,
    /// For a flip, the extended segment and the end that moved.
    pub extended: Option<(SegmentId, SegEnd)>,
    changes: Vec<(SegmentId, Option<Segment>)>,
    next_id: u64,
}

/// Chord cut by `line` in a convex cell.
pub fn split_chord(t: &TTess, cell: usize, line: &Line) -> Result<Segment, TessError> {
    let c = t.cells().get(cell).ok_or(TessError::UnknownCell(cell))?;
    let ring = &c.ring;
    let n = ring.len();
    let clear = CLEARANCE * t.eps();
    let sd: Vec<f64> = ring.iter().map(|&p| line.signed_distance(p)).collect();
    if sd.iter().any(|d| d.abs() <= clear) {
        return Err(TessError::NearVertex);
    }
    let mut hits = Vec::with_capacity(2);
    for i in 0..n {
        let j = (i + 1) % n;
        if (sd[i] > 0.0) != (sd[j] > 0.0) {
            let s = sd[i] / (sd[i] - sd[j]);
            hits.push(ring[i].lerp(ring[j], s));
        }
    }
    match hits.len() {
        0 => Err(TessError::ChordMiss("line misses the cell")),
        2 => {
            let (p, q) = (hits[0], hits[1]);
            if line.project(p) <= line.project(q) {
                Ok(Segment::new(p, q))
            } else {
                Ok(Segment::new(q, p))
            }
        }
        _ => Err(TessError::ChordMiss("cell is not convex along the line")),
    }
}

fn line_hit(l: &Line, a: Point, b: Point) -> Point {
    let (da, db) = (l.signed_distance(a), l.signed_distance(b));
    if (da - db).abs() < f64::MIN_POSITIVE {
        return a.lerp(b, 0.5);
    }
    a.lerp(b, da / (da - db))
}

/// Cyclic slice `ring[from..=to]`.
fn cyclic(ring: &[Point], from: usize, to: usize) -> Vec<Point> {
    let n = ring.len();
    let mut out = Vec::new();
    let mut i = from % n;
    loop {
        out.push(ring[i]);
        if i == to % n {
            break;
        }
        i = (i + 1) % n;
    }
    out
}

/// Union of two rings sharing the edge `x–y`.
fn merge_rings(r1: &[Point], r2: &[Point], x: Point, y: Point) -> Option<Vec<Point>> {
    let find = |r: &[Point], p: Point, q: Point| {
        let n = r.len();
        (0..n).find(|&k| r[k] == p && r[(k + 1) % n] == q)
    };
    let (k, a, b) = match find(r1, x, y) {
        Some(k) => (k, x, y),
        None => (find(r1, y, x)?, y, x),
    };
    let m = find(r2, b, a)?;
    let (n1, n2) = (r1.len(), r2.len());
    let mut out: Vec<Point> = (0..n1).map(|i| r1[(k + 1 + i) % n1]).collect();
    out.extend((0..n2 - 2).map(|i| r2[(m + 2 + i) % n2]));
    Some(out)
}

/// Drops the listed points where the ring runs straight through them.
fn drop_straight(mut ring: Vec<Point>, pts: &[Point], eps: f64) -> Vec<Point> {
    for p in pts {
        let n = ring.len();
        if n <= 3 {
            break;
        }
        if let Some(k) = ring.iter().position(|q| q == p) {
            let (a, b) = (ring[(k + n - 1) % n], ring[(k + 1) % n]);
            if orient(a, *p, b).abs() <= eps * a.dist(b) {
                ring.remove(k);
            }
        }
    }
    ring
}

impl TTess {
    pub fn plan(&self, u: &LocalUpdate) -> Result<UpdatePlan, TessError> {
        match u {
            LocalUpdate::Split { cell, chord } => self.plan_split(*cell, chord),
            LocalUpdate::Merge { segment } => self.plan_merge(*segment),
            LocalUpdate::Flip { segment, end } => self.plan_flip(*segment, *end),
        }
    }

    pub fn apply(&self, u: &LocalUpdate) -> Result<TTess, TessError> {
        let plan = self.plan(u)?;
        self.apply_plan(&plan)
    }

    pub fn apply_split(&self, cell: usize, chord: Segment) -> Result<TTess, TessError> {
        self.apply(&LocalUpdate::Split { cell, chord })
    }

    pub fn apply_merge(&self, segment: SegmentId) -> Result<TTess, TessError> {
        self.apply(&LocalUpdate::Merge { segment })
    }

    pub fn apply_flip(&self, segment: SegmentId, end: SegEnd) -> Result<TTess, TessError> {
        self.apply(&LocalUpdate::Flip { segment, end })
    }

    pub fn apply_plan(&self, plan: &UpdatePlan) -> Result<TTess, TessError> {
        let mut internal = self.internal_map().clone();
        for (id, g) in &plan.changes {
            match g {
                Some(s) => {
                    internal.insert(*id, *s);
                }
                None => {
                    internal.remove(id);
                }
            }
        }
        TTess::assemble(self.window().clone(), self.eps(), internal, plan.next_id)
    }

    /// The update that undoes `plan` when applied to `next`, the state it produced.
    pub fn inverse(&self, plan: &UpdatePlan, next: &TTess) -> Result<LocalUpdate, TessError> {
        match &plan.update {
            LocalUpdate::Split { .. } => {
                Ok(LocalUpdate::Merge { segment: plan.created.expect("split creates a segment") })
            }
            LocalUpdate::Merge { .. } => {
                let (_, geom) = plan.removed.expect("merge removes a segment");
                let cell = next.locate(geom.midpoint()).ok_or(TessError::ChordMiss("merged cell not found"))?;
                Ok(LocalUpdate::Split { cell, chord: geom })
            }
            LocalUpdate::Flip { .. } => {
                let (segment, end) = plan.extended.expect("flip extends a segment");
                Ok(LocalUpdate::Flip { segment, end })
            }
        }
    }

    fn plan_split(&self, cell: usize, chord: &Segment) -> Result<UpdatePlan, TessError> {
        let c = self.cells().get(cell).ok_or(TessError::UnknownCell(cell))?;
        let ring = &c.ring;
        let n = ring.len();
        let eps = self.eps();
        let line = chord.line();
        let nearest = |p: Point| {
            (0..n)
                .map(|i| (Segment::new(ring[i], ring[(i + 1) % n]).distance_to_point(p), i))
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .expect("cells have at least three corners")
        };
        let (da, i) = nearest(chord.a);
        let (db, j) = nearest(chord.b);
        if da > ON_BOUNDARY * eps || db > ON_BOUNDARY * eps {
            return Err(TessError::ChordMiss("chord endpoints are not on the cell boundary"));
        }
        if i == j {
            return Err(TessError::ChordMiss("chord endpoints lie on the same side"));
        }
        let p = line_hit(&line, ring[i], ring[(i + 1) % n]);
        let q = line_hit(&line, ring[j], ring[(j + 1) % n]);
        let clear = CLEARANCE * eps;
        if ring.iter().any(|r| r.dist(p) <= clear || r.dist(q) <= clear) {
            return Err(TessError::NearVertex);
        }
        let chord_exact = Segment::new(p, q);
        if !point_in_ring(chord_exact.midpoint(), ring) {
            return Err(TessError::ChordMiss("chord runs outside the cell"));
        }
        for k in 0..n {
            if k == i || k == j {
                continue;
            }
            let side = Segment::new(ring[k], ring[(k + 1) % n]);
            let (s1, s2) = (orient(p, q, side.a), orient(p, q, side.b));
            let (s3, s4) = (orient(side.a, side.b, p), orient(side.a, side.b, q));
            if s1 * s2 < 0.0 && s3 * s4 < 0.0 {
                return Err(TessError::ChordMiss("chord runs outside the cell"));
            }
        }
        if self.internal_segments().any(|(_, s)| aligned(&line, s, eps)) {
            return Err(TessError::Aligned);
        }

        let c1 = {
            let mut r = vec![p];
            r.extend(cyclic(ring, i + 1, j));
            r.push(q);
            r
        };
        let c2 = {
            let mut r = vec![q];
            r.extend(cyclic(ring, j + 1, i));
            r.push(p);
            r
        };
        let mut counts = Vec::new();
        for k in [i, j] {
            if let Some(id) = self.half_edge_segment(c.boundary[k]).source.internal() {
                counts.push((id, 1));
            }
        }
        let id = SegmentId(self.next_id());
        Ok(UpdatePlan {
            update: LocalUpdate::Split { cell, chord: *chord },
            removed_cells: vec![cell],
            added_rings: vec![c1, c2],
            segment_delta: 1,
            edge_count_changes: counts,
            created: Some(id),
            removed: None,
            extended: None,
            changes: vec![(id, Some(chord_exact))],
            next_id: self.next_id() + 1,
        })
    }

    fn plan_merge(&self, id: SegmentId) -> Result<UpdatePlan, TessError> {
        let seg = self.segment(id).ok_or(TessError::UnknownSegment(id.0))?;
        if seg.edges.len() != 1 {
            return Err(TessError::NotMergeable(id.0));
        }
        let e = &self.edges()[seg.edges[0]];
        let (l, r) = match (e.faces[0], e.faces[1]) {
            (Face::Cell(l), Face::Cell(r)) if l != r => (l, r),
            _ => return Err(TessError::NotMergeable(id.0)),
        };
        let (a, b) = (self.vertices()[e.ends[0]].point, self.vertices()[e.ends[1]].point);
        let merged = merge_rings(&self.cells()[l].ring, &self.cells()[r].ring, a, b)
            .ok_or(TessError::Invalid("cells do not share the merged edge".into()))?;
        let merged = drop_straight(merged, &[a, b], self.eps());
        let mut counts = Vec::new();
        for k in seg.ends {
            if let EndKind::Blocked(b) = k {
                if let Some(bid) = self.segments()[b].source.internal() {
                    counts.push((bid, -1));
                }
            }
        }
        Ok(UpdatePlan {
            update: LocalUpdate::Merge { segment: id },
            removed_cells: vec![l, r],
            added_rings: vec![merged],
            segment_delta: -1,
            edge_count_changes: counts,
            created: None,
            removed: Some((id, *self.internal_geometry(id).expect("segment exists"))),
            extended: None,
            changes: vec![(id, None)],
            next_id: self.next_id(),
        })
    }

    fn plan_flip(&self, id: SegmentId, end: SegEnd) -> Result<UpdatePlan, TessError> {
        let seg = self.segment(id).ok_or(TessError::UnknownSegment(id.0))?;
        let m = seg.edges.len();
        if m < 2 {
            return Err(TessError::NotFlippable(id.0, "segment has a single edge"));
        }
        let end_kind = seg.ends[end.slot()];
        if end_kind == EndKind::Free {
            return Err(TessError::NotFlippable(id.0, "end is free"));
        }
        let nv = seg.vertices.len();
        let (vk, vk1, ek) = match end {
            SegEnd::A => (seg.vertices[0], seg.vertices[1], seg.edges[0]),
            SegEnd::B => (seg.vertices[nv - 1], seg.vertices[nv - 2], seg.edges[m - 1]),
        };
        let verts = self.vertices();
        let (pk, pk1) = (verts[vk].point, verts[vk1].point);
        let seg_idx = self.segment_index(id).expect("segment exists");
        let third: Vec<usize> =
            verts[vk1].edges.iter().copied().filter(|&e| self.edges()[e].segment != seg_idx).collect();
        if third.len() != 1 {
            return Err(TessError::NotFlippable(id.0, "neighbouring vertex is not a T-junction"));
        }
        let sp_idx = self.edges()[third[0]].segment;
        let sp = &self.segments()[sp_idx];
        let sp_id = sp.source.internal().ok_or(TessError::NotFlippable(id.0, "abutting segment is a window side"))?;
        let sp_slot = if sp.vertices[0] == vk1 {
            SegEnd::A
        } else if sp.vertices[sp.vertices.len() - 1] == vk1 {
            SegEnd::B
        } else {
            return Err(TessError::NotFlippable(id.0, "abutting segment does not end at the junction"));
        };
        let sp_geom = *self.internal_geometry(sp_id).expect("segment exists");
        let far = if sp_slot == SegEnd::A { sp_geom.b } else { sp_geom.a };
        let dir = (pk1 - far).normalized();

        let e = &self.edges()[ek];
        let forward = e.ends[0] == vk1;
        let (left, right) = if forward { (e.faces[0], e.faces[1]) } else { (e.faces[1], e.faces[0]) };
        let sp_on_left = orient(pk1, pk, far) > 0.0;
        let (uf, df) = if sp_on_left { (right, left) } else { (left, right) };
        let (u, d) = match (uf, df) {
            (Face::Cell(u), Face::Cell(d)) if u != d => (u, d),
            _ => return Err(TessError::NotFlippable(id.0, "terminal edge does not separate two cells")),
        };
        let ucell = &self.cells()[u];
        let ring = &ucell.ring;
        let n = ring.len();
        let ia = ucell
            .ring_vertices
            .iter()
            .position(|&v| v == vk1)
            .ok_or(TessError::Invalid("junction missing from cell ring".into()))?;
        let mut best: Option<(f64, usize, f64)> = None;
        for k in 0..n {
            let (va, vb) = (ucell.ring_vertices[k], ucell.ring_vertices[(k + 1) % n]);
            if va == vk1 || vb == vk1 {
                continue;
            }
            let side = Segment::new(ring[k], ring[(k + 1) % n]);
            if let Some((t, s)) = ray_segment_intersection(pk1, dir, &side, self.eps()) {
                if best.is_none_or(|(bt, _, _)| t < bt) {
                    best = Some((t, k, s));
                }
            }
        }
        let (_, b, s) = best.ok_or(TessError::NotFlippable(id.0, "extension does not reach the cell boundary"))?;
        let w = ring[b].lerp(ring[(b + 1) % n], s);
        let clear = CLEARANCE * self.eps();
        if ring.iter().any(|r| r.dist(w) <= clear) {
            return Err(TessError::NearVertex);
        }

        let x = {
            let mut r = vec![pk1];
            r.extend(cyclic(ring, ia + 1, b));
            r.push(w);
            r
        };
        let y = {
            let mut r = vec![w];
            r.extend(cyclic(ring, b + 1, ia));
            r
        };
        let (rb, ra) = if ring[(ia + 1) % n] == pk { (x, y) } else { (y, x) };
        let merged = merge_rings(&self.cells()[d].ring, &rb, pk1, pk)
            .ok_or(TessError::Invalid("cells do not share the flipped edge".into()))?;
        let merged = drop_straight(merged, &[pk], self.eps());

        let mut counts: Vec<(SegmentId, i64)> = vec![(id, -1), (sp_id, 1)];
        if let EndKind::Blocked(t) = end_kind {
            if let Some(tid) = self.segments()[t].source.internal() {
                counts.push((tid, -1));
            }
        }
        let hit: HalfEdge = ucell.boundary[b];
        if let Some(hid) = self.half_edge_segment(hit).source.internal() {
            counts.push((hid, 1));
        }

        let mut new_s = *self.internal_geometry(id).expect("segment exists");
        match end {
            SegEnd::A => new_s.a = pk1,
            SegEnd::B => new_s.b = pk1,
        }
        let mut new_sp = sp_geom;
        match sp_slot {
            SegEnd::A => new_sp.a = w,
            SegEnd::B => new_sp.b = w,
        }
        Ok(UpdatePlan {
            update: LocalUpdate::Flip { segment: id, end },
            removed_cells: vec![u, d],
            added_rings: vec![ra, merged],
            segment_delta: 0,
            edge_count_changes: counts,
            created: None,
            removed: None,
            extended: Some((sp_id, sp_slot)),
            changes: vec![(id, Some(new_s)), (sp_id, Some(new_sp))],
            next_id: self.next_id(),
        })
    }
}
