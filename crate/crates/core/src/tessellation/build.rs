//! Planar arrangement of window sides and internal segments.

use std::collections::BTreeMap;

use rustc_hash::FxHashMap as HashMap;

use super::{Cell, Edge, EndKind, Face, HalfEdge, Seg, SegRef, SegmentId, Topology, Vertex, VertexKind};
use crate::error::TessError;
use crate::geometry::{point_in_ring, ring_signed_area, Point, Polygon, Segment};

struct Source {
    geom: Segment,
    sref: SegRef,
}

/// Greedy vertex snapping on a hash grid: a new point within `eps` of an
/// existing vertex reuses it.
struct Snapper {
    eps: f64,
    cell: f64,
    grid: HashMap<(i64, i64), Vec<usize>>,
    points: Vec<Point>,
}

impl Snapper {
    fn new(eps: f64) -> Self {
        Snapper { eps, cell: 2.0 * eps, grid: HashMap::default(), points: Vec::new() }
    }

    fn key(&self, p: Point) -> (i64, i64) {
        ((p.x / self.cell).floor() as i64, (p.y / self.cell).floor() as i64)
    }

    fn insert(&mut self, p: Point) -> usize {
        let (kx, ky) = self.key(p);
        let mut best: Option<(f64, usize)> = None;
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(ids) = self.grid.get(&(kx + dx, ky + dy)) {
                    for &i in ids {
                        let d = self.points[i].dist(p);
                        if d <= self.eps && best.is_none_or(|(bd, _)| d < bd) {
                            best = Some((d, i));
                        }
                    }
                }
            }
        }
        if let Some((_, i)) = best {
            return i;
        }
        let id = self.points.len();
        self.points.push(p);
        self.grid.entry((kx, ky)).or_default().push(id);
        id
    }
}

fn bbox_overlap(a: &Segment, b: &Segment, m: f64) -> bool {
    a.a.x.min(a.b.x) <= b.a.x.max(b.b.x) + m
        && b.a.x.min(b.b.x) <= a.a.x.max(a.b.x) + m
        && a.a.y.min(a.b.y) <= b.a.y.max(b.b.y) + m
        && b.a.y.min(b.b.y) <= a.a.y.max(a.b.y) + m
}

pub(crate) fn build(
    window: &Polygon,
    eps: f64,
    internal: &BTreeMap<SegmentId, Segment>,
) -> Result<Topology, TessError> {
    let mut sources: Vec<Source> = Vec::new();
    for ring in window.rings() {
        let n = ring.len();
        for i in 0..n {
            let k = sources.len();
            sources.push(Source { geom: Segment::new(ring[i], ring[(i + 1) % n]), sref: SegRef::Boundary(k) });
        }
    }
    for (id, s) in internal {
        sources.push(Source { geom: *s, sref: SegRef::Internal(*id) });
    }

    let mut snap = Snapper::new(eps);
    let mut marks: Vec<Vec<usize>> = (0..sources.len()).map(|_| Vec::with_capacity(8)).collect();
    let mut end_vertices: Vec<[usize; 2]> = Vec::with_capacity(sources.len());
    for (i, s) in sources.iter().enumerate() {
        let va = snap.insert(s.geom.a);
        let vb = snap.insert(s.geom.b);
        if va == vb {
            return Err(TessError::Geometry(crate::error::GeometryError::DegenerateSegment));
        }
        marks[i].push(va);
        marks[i].push(vb);
        end_vertices.push([va, vb]);
    }

    for i in 0..sources.len() {
        for j in (i + 1)..sources.len() {
            let (si, sj) = (&sources[i].geom, &sources[j].geom);
            if !bbox_overlap(si, sj, eps) {
                continue;
            }
            let mut touched = false;
            for (k, &p) in [sj.a, sj.b].iter().enumerate() {
                if si.distance_to_point(p) <= eps {
                    marks[i].push(end_vertices[j][k]);
                    touched = true;
                }
            }
            for (k, &p) in [si.a, si.b].iter().enumerate() {
                if sj.distance_to_point(p) <= eps {
                    marks[j].push(end_vertices[i][k]);
                    touched = true;
                }
            }
            let (di, dj) = (si.vector(), sj.vector());
            let denom = di.cross(dj);
            if denom.abs() <= 1e-14 * di.norm() * dj.norm() {
                continue;
            }
            let w = sj.a - si.a;
            let t = w.cross(dj) / denom;
            let u = w.cross(di) / denom;
            let (ti, tj) = (eps / di.norm(), eps / dj.norm());
            if t < -ti || t > 1.0 + ti || u < -tj || u > 1.0 + tj {
                continue;
            }
            let x = si.point_at(t);
            // Contacts at endpoints were recorded above; a crossing that
            // coincides with one of them snaps to the same vertex anyway.
            if touched && [si.a, si.b, sj.a, sj.b].iter().any(|p| p.dist(x) <= eps) {
                continue;
            }
            let v = snap.insert(x);
            marks[i].push(v);
            marks[j].push(v);
        }
    }

    let points = snap.points;
    let n_v = points.len();

    // Edges along every source, deduplicated by vertex pair; window sides
    // take precedence over internal segments lying on them.
    let mut edges: Vec<Edge> = Vec::with_capacity(2 * n_v);
    let mut edge_key: HashMap<(usize, usize), usize> = HashMap::with_capacity_and_hasher(2 * n_v, Default::default());
    let mut seg_vertices: Vec<Vec<usize>> = Vec::with_capacity(sources.len());
    for (si, s) in sources.iter().enumerate() {
        let mut ms: Vec<(f64, usize)> = marks[si].iter().map(|&v| (s.geom.param_of(points[v]), v)).collect();
        ms.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut verts: Vec<usize> = Vec::with_capacity(ms.len());
        for (_, v) in ms {
            if !verts.contains(&v) {
                verts.push(v);
            }
        }
        for w in verts.windows(2) {
            let (u, v) = (w[0], w[1]);
            let key = (u.min(v), u.max(v));
            match edge_key.get(&key) {
                Some(&e) => {
                    if s.sref.is_boundary() && !sources[edges[e].segment].sref.is_boundary() {
                        edges[e].ends = [u, v];
                        edges[e].segment = si;
                    }
                }
                None => {
                    edge_key.insert(key, edges.len());
                    edges.push(Edge { ends: [u, v], segment: si, faces: [Face::Exterior; 2] });
                }
            }
        }
        seg_vertices.push(verts);
    }

    for e in &edges {
        if sources[e.segment].sref.is_boundary() {
            continue;
        }
        let m = points[e.ends[0]].lerp(points[e.ends[1]], 0.5);
        if !window.contains(m) && window.distance_to_boundary(m) > eps {
            return Err(TessError::OutsideWindow);
        }
    }

    // Outgoing half-edges around each vertex, counter-clockwise.
    let mut around: Vec<Vec<(f64, usize)>> = (0..n_v).map(|_| Vec::with_capacity(4)).collect();
    for (ei, e) in edges.iter().enumerate() {
        let (a, b) = (points[e.ends[0]], points[e.ends[1]]);
        let d = b - a;
        around[e.ends[0]].push((d.y.atan2(d.x), 2 * ei));
        around[e.ends[1]].push(((-d.y).atan2(-d.x), 2 * ei + 1));
    }
    let mut pos = vec![0usize; 2 * edges.len()];
    for list in around.iter_mut() {
        list.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (k, &(_, h)) in list.iter().enumerate() {
            pos[h] = k;
        }
    }
    let origin = |h: usize| -> usize {
        let e = &edges[h / 2];
        if h % 2 == 0 {
            e.ends[0]
        } else {
            e.ends[1]
        }
    };
    let next = |h: usize| -> usize {
        let twin = h ^ 1;
        let v = origin(twin);
        let list = &around[v];
        let k = (pos[twin] + list.len() - 1) % list.len();
        list[k].1
    };

    let n_h = 2 * edges.len();
    let mut cycle_of = vec![usize::MAX; n_h];
    let mut cycles: Vec<Vec<usize>> = Vec::new();
    for h0 in 0..n_h {
        if cycle_of[h0] != usize::MAX {
            continue;
        }
        let cid = cycles.len();
        let mut cyc = Vec::new();
        let mut h = h0;
        loop {
            cycle_of[h] = cid;
            cyc.push(h);
            h = next(h);
            if h == h0 {
                break;
            }
            if cyc.len() > n_h {
                return Err(TessError::Invalid("face traversal did not close".into()));
            }
        }
        cycles.push(cyc);
    }

    let cycle_ring = |c: &Vec<usize>| -> Vec<Point> { c.iter().map(|&h| points[origin(h)]).collect() };
    let area_floor = eps * eps;
    enum Kind {
        Cell(usize),
        Exterior,
        Inner,
    }
    let mut kinds: Vec<Kind> = Vec::with_capacity(cycles.len());
    let mut cells: Vec<Cell> = Vec::new();
    let mut cell_cycle: Vec<usize> = Vec::new();
    for (ci, c) in cycles.iter().enumerate() {
        let exterior = c.iter().any(|&h| h % 2 == 1 && sources[edges[h / 2].segment].sref.is_boundary());
        let ring = cycle_ring(c);
        let a = ring_signed_area(&ring);
        if exterior {
            kinds.push(Kind::Exterior);
        } else if a > area_floor {
            kinds.push(Kind::Cell(cells.len()));
            cell_cycle.push(ci);
            let boundary: Vec<HalfEdge> = c.iter().map(|&h| HalfEdge { edge: h / 2, forward: h % 2 == 0 }).collect();
            let ring_vertices: Vec<usize> = c.iter().map(|&h| origin(h)).collect();
            cells.push(Cell { boundary, ring, ring_vertices, holes: Vec::new(), area: a, perimeter: 0.0 });
        } else {
            kinds.push(Kind::Inner);
        }
    }

    let mut face_of_cycle: Vec<Face> = vec![Face::Exterior; cycles.len()];
    for (ci, k) in kinds.iter().enumerate() {
        match k {
            Kind::Cell(c) => face_of_cycle[ci] = Face::Cell(*c),
            Kind::Exterior => face_of_cycle[ci] = Face::Exterior,
            Kind::Inner => {
                let p = points[origin(cycles[ci][0])];
                let host = cells
                    .iter()
                    .enumerate()
                    .filter(|(_, cell)| point_in_ring(p, &cell.ring))
                    .min_by(|a, b| a.1.area.total_cmp(&b.1.area))
                    .map(|(i, _)| i);
                if let Some(c) = host {
                    face_of_cycle[ci] = Face::Cell(c);
                    let hole: Vec<HalfEdge> =
                        cycles[ci].iter().map(|&h| HalfEdge { edge: h / 2, forward: h % 2 == 0 }).collect();
                    cells[c].area += ring_signed_area(&cycle_ring(&cycles[ci]));
                    cells[c].holes.push(hole);
                }
            }
        }
    }

    for (ei, e) in edges.iter_mut().enumerate() {
        e.faces = [face_of_cycle[cycle_of[2 * ei]], face_of_cycle[cycle_of[2 * ei + 1]]];
    }
    let he_len = |h: &HalfEdge| points[edges[h.edge].ends[0]].dist(points[edges[h.edge].ends[1]]);
    for c in cells.iter_mut() {
        c.perimeter =
            c.boundary.iter().map(he_len).sum::<f64>() + c.holes.iter().flat_map(|h| h.iter()).map(he_len).sum::<f64>();
    }

    let vertices: Vec<Vertex> = (0..n_v)
        .map(|v| {
            let es: Vec<usize> = around[v].iter().map(|&(_, h)| h / 2).collect();
            let border = es.iter().any(|&e| sources[edges[e].segment].sref.is_boundary());
            Vertex { point: points[v], edges: es, kind: if border { VertexKind::Border } else { VertexKind::Internal } }
        })
        .collect();

    let mut segs: Vec<Seg> = Vec::with_capacity(sources.len());
    let mut seg_index = HashMap::default();
    for (si, s) in sources.iter().enumerate() {
        let verts = &seg_vertices[si];
        let seg_edges: Vec<usize> =
            verts.windows(2).filter_map(|w| edge_key.get(&(w[0].min(w[1]), w[0].max(w[1]))).copied()).collect();
        if let SegRef::Internal(id) = s.sref {
            seg_index.insert(id, si);
        }
        segs.push(Seg {
            source: s.sref,
            geom: s.geom,
            line: s.geom.line(),
            vertices: verts.clone(),
            edges: seg_edges,
            ends: [EndKind::Free; 2],
        });
    }

    // A segment end is blocked by the segment that has the end vertex in
    // the interior of its vertex run.
    let mut interior_of: Vec<Vec<usize>> = vec![Vec::new(); n_v];
    for (si, s) in segs.iter().enumerate() {
        if s.vertices.len() > 2 {
            for &v in &s.vertices[1..s.vertices.len() - 1] {
                interior_of[v].push(si);
            }
        }
    }
    for si in 0..segs.len() {
        let vs = &segs[si].vertices;
        let ends = [vs[0], vs[vs.len() - 1]];
        let mut kinds = [EndKind::Free; 2];
        for (k, &v) in ends.iter().enumerate() {
            kinds[k] = if vertices[v].kind == VertexKind::Border {
                EndKind::Border
            } else if let Some(&b) = interior_of[v].iter().find(|&&b| b != si) {
                EndKind::Blocked(b)
            } else {
                EndKind::Free
            };
        }
        segs[si].ends = kinds;
    }

    Ok(Topology { vertices, edges, segs, cells, seg_index })
}
