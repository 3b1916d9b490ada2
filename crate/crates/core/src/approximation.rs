//! Approximation of a polygonal landscape by a T-tessellation: cluster the
//! polygon sides, replace each cluster by a representative segment, then
//! repair the arrangement until every internal vertex is a T.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::ApproxError;
use crate::geometry::{
    convex_hull_area, geometric_tolerance, min_segment_distance, ray_segment_intersection, total_least_squares_line,
    Point, Polygon, Segment,
};
use crate::tessellation::{TTess, VertexKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Landscape {
    pub domain: Polygon,
    pub fields: Vec<Polygon>,
}

impl Landscape {
    pub fn new(domain: Polygon, fields: Vec<Polygon>) -> Result<Self, ApproxError> {
        let domain = Polygon::new(domain.outer, domain.holes)?;
        let fields = fields.into_iter().map(|f| Polygon::new(f.outer, f.holes)).collect::<Result<Vec<_>, _>>()?;
        let l = Landscape { domain, fields };
        l.check()?;
        Ok(l)
    }

    /// Fields must lie in the domain; overlaps are detected through the
    /// total field area.
    fn check(&self) -> Result<(), ApproxError> {
        let tol = 1e-6 * self.domain.diameter();
        for (i, f) in self.fields.iter().enumerate() {
            for r in f.rings() {
                for &p in r {
                    if !self.domain.contains(p) && self.domain.distance_to_boundary(p) > tol {
                        return Err(ApproxError::Landscape(format!("field {i} has a vertex outside the domain")));
                    }
                }
            }
        }
        let total: f64 = self.fields.iter().map(|f| f.area()).sum();
        if total > self.domain.area() * (1.0 + 1e-6) {
            return Err(ApproxError::Landscape("fields overlap: their total area exceeds the domain area".into()));
        }
        Ok(())
    }

    /// GeoJSON FeatureCollection of Polygons (or MultiPolygons); exactly one
    /// feature has the property `"role": "domain"`.
    pub fn from_geojson(text: &str) -> Result<Self, ApproxError> {
        let v: Value = serde_json::from_str(text).map_err(|e| ApproxError::Parse(e.to_string()))?;
        let features = v
            .get("features")
            .and_then(Value::as_array)
            .ok_or_else(|| ApproxError::Parse("expected a FeatureCollection with a `features` array".into()))?;
        let mut domain = None;
        let mut fields = Vec::new();
        for (i, f) in features.iter().enumerate() {
            let geom = f.get("geometry").ok_or_else(|| ApproxError::Parse(format!("feature {i} has no geometry")))?;
            let polys = geojson_polygons(geom).map_err(|e| ApproxError::Parse(format!("feature {i}: {e}")))?;
            let is_domain = f.get("properties").and_then(|p| p.get("role")).and_then(Value::as_str) == Some("domain");
            if is_domain {
                if domain.is_some() {
                    return Err(ApproxError::Landscape("more than one feature has role \"domain\"".into()));
                }
                if polys.len() != 1 {
                    return Err(ApproxError::Landscape("the domain must be a single polygon".into()));
                }
                domain = polys.into_iter().next();
            } else {
                fields.extend(polys);
            }
        }
        let domain = domain.ok_or_else(|| {
            ApproxError::Landscape("missing domain: no feature has property role = \"domain\"".into())
        })?;
        let domain = Polygon::new(domain.0, domain.1)?;
        let fields = fields.into_iter().map(|(o, h)| Polygon::new(o, h)).collect::<Result<Vec<_>, _>>()?;
        Landscape::new(domain, fields)
    }

    pub fn to_geojson(&self) -> String {
        let ring = |r: &Vec<Point>| -> Value {
            let mut pts: Vec<Value> = r.iter().map(|p| serde_json::json!([p.x, p.y])).collect();
            pts.push(serde_json::json!([r[0].x, r[0].y]));
            Value::Array(pts)
        };
        let poly = |p: &Polygon| -> Value { Value::Array(p.rings().map(ring).collect()) };
        let mut features = vec![serde_json::json!({
            "type": "Feature",
            "properties": {"role": "domain"},
            "geometry": {"type": "Polygon", "coordinates": poly(&self.domain)},
        })];
        for f in &self.fields {
            features.push(serde_json::json!({
                "type": "Feature",
                "properties": {},
                "geometry": {"type": "Polygon", "coordinates": poly(f)},
            }));
        }
        serde_json::to_string_pretty(&serde_json::json!({"type": "FeatureCollection", "features": features})).unwrap()
    }

    /// Every cell of `t` as a field.
    pub fn from_tessellation(t: &TTess) -> Self {
        Landscape {
            domain: t.window().clone(),
            fields: t.cells().iter().map(|c| Polygon { outer: c.ring.clone(), holes: Vec::new() }).collect(),
        }
    }
}

type RawPolygon = (Vec<Point>, Vec<Vec<Point>>);

fn geojson_polygons(geom: &Value) -> Result<Vec<RawPolygon>, String> {
    let kind = geom.get("type").and_then(Value::as_str).ok_or("geometry without type")?;
    let coords = geom.get("coordinates").ok_or("geometry without coordinates")?;
    match kind {
        "Polygon" => Ok(vec![geojson_polygon(coords)?]),
        "MultiPolygon" => coords.as_array().ok_or("bad MultiPolygon")?.iter().map(geojson_polygon).collect(),
        other => Err(format!("unsupported geometry type {other}")),
    }
}

fn geojson_polygon(v: &Value) -> Result<RawPolygon, String> {
    let rings = v.as_array().ok_or("polygon coordinates must be an array of rings")?;
    let mut parsed = Vec::with_capacity(rings.len());
    for r in rings {
        let pts = r.as_array().ok_or("ring must be an array of positions")?;
        let mut ring = Vec::with_capacity(pts.len());
        for p in pts {
            let xy = p.as_array().ok_or("position must be an array")?;
            let x = xy.first().and_then(Value::as_f64).ok_or("bad x coordinate")?;
            let y = xy.get(1).and_then(Value::as_f64).ok_or("bad y coordinate")?;
            ring.push(Point::new(x, y));
        }
        parsed.push(ring);
    }
    let mut it = parsed.into_iter();
    let outer = it.next().ok_or("polygon without rings")?;
    Ok((outer, it.collect()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApproxConfig {
    /// Dendrogram cut: clusters merge while their dissimilarity is below it.
    #[serde(default = "default_cut")]
    pub cut_threshold: f64,
    /// Shift of a broken segment end when removing a crossing; defaults to
    /// 10⁻³ × the domain diameter.
    #[serde(default)]
    pub x_shift: Option<f64>,
    #[serde(default = "default_repairs")]
    pub max_repair_iterations: usize,
}

fn default_cut() -> f64 {
    0.2
}
fn default_repairs() -> usize {
    1_000_000
}

impl Default for ApproxConfig {
    fn default() -> Self {
        ApproxConfig { cut_threshold: default_cut(), x_shift: None, max_repair_iterations: default_repairs() }
    }
}

impl ApproxConfig {
    fn validate(&self) -> Result<(), ApproxError> {
        if !(self.cut_threshold > 0.0 && self.cut_threshold.is_finite()) {
            return Err(ApproxError::Config("cut threshold must be positive".into()));
        }
        if let Some(e) = self.x_shift {
            if !(e > 0.0 && e.is_finite()) {
                return Err(ApproxError::Config("x shift must be positive".into()));
            }
        }
        Ok(())
    }
}

/// `A(hull(c1, c2)) / (l1 l2) + 2 d_min(c1, c2) / (l1 + l2)`.
pub fn side_dissimilarity(c1: &Segment, c2: &Segment) -> f64 {
    let (l1, l2) = (c1.length(), c2.length());
    convex_hull_area(c1, c2) / (l1 * l2) + 2.0 * min_segment_distance(c1, c2) / (l1 + l2)
}

fn bbox_distance(a: &Segment, b: &Segment) -> f64 {
    let gap = |a0: f64, a1: f64, b0: f64, b1: f64| (a0.min(a1) - b0.max(b1)).max(b0.min(b1) - a0.max(a1)).max(0.0);
    gap(a.a.x, a.b.x, b.a.x, b.b.x).hypot(gap(a.a.y, a.b.y, b.a.y, b.b.y))
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, i: usize) -> usize {
        let mut r = i;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut i = i;
        while self.0[i] != r {
            let n = self.0[i];
            self.0[i] = r;
            i = n;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        if a != b {
            self.0[a.max(b)] = a.min(b);
        }
    }
}

/// Single-linkage clustering cut at `delta`: two groups merge when their
/// smallest pairwise dissimilarity is below `delta`. Groups are lists of
/// side indices, sorted, ordered by their smallest member.
pub fn single_linkage_clusters(sides: &[Segment], delta: f64) -> Vec<Vec<usize>> {
    let n = sides.len();
    let mut uf = UnionFind((0..n).collect());
    for i in 0..n {
        for j in (i + 1)..n {
            // d ≥ 2 d_min / (l1 + l2) ≥ 2 d_bbox / (l1 + l2).
            let lsum = sides[i].length() + sides[j].length();
            if 2.0 * bbox_distance(&sides[i], &sides[j]) >= delta * lsum {
                continue;
            }
            if side_dissimilarity(&sides[i], &sides[j]) < delta {
                uf.union(i, j);
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = uf.find(i);
        if slot[r] == usize::MAX {
            slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[slot[r]].push(i);
    }
    groups
}

/// Smallest segment on the total-least-squares line of the member
/// endpoints that covers all their projections.
pub fn representative_segment(members: &[Segment]) -> Result<Segment, ApproxError> {
    let pts: Vec<Point> = members.iter().flat_map(|s| [s.a, s.b]).collect();
    let line = total_least_squares_line(&pts)?;
    let (lo, hi) = pts
        .iter()
        .map(|&p| line.project(p))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), c| (lo.min(c), hi.max(c)));
    Ok(Segment::new(line.point_at(lo), line.point_at(hi)))
}

/// Pieces of `s` inside `window`.
pub fn clip_to_window(s: &Segment, window: &Polygon) -> Vec<Segment> {
    let mut ts = vec![0.0, 1.0];
    let v = s.vector();
    for side in window.sides() {
        let w = side.vector();
        let denom = v.cross(w);
        if denom.abs() < 1e-300 {
            continue;
        }
        let d = side.a - s.a;
        let t = d.cross(w) / denom;
        let u = d.cross(v) / denom;
        if t > 0.0 && t < 1.0 && (-1e-12..=1.0 + 1e-12).contains(&u) {
            ts.push(t);
        }
    }
    ts.sort_by(f64::total_cmp);
    let mut out: Vec<Segment> = Vec::new();
    for w in ts.windows(2) {
        if w[1] - w[0] <= 0.0 {
            continue;
        }
        if window.contains(s.point_at(0.5 * (w[0] + w[1]))) {
            let piece = Segment::new(s.point_at(w[0]), s.point_at(w[1]));
            match out.last_mut() {
                Some(last) if last.b == piece.a => last.b = piece.b,
                _ => out.push(piece),
            }
        }
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RepairCounts {
    pub i_vertices: usize,
    pub l_vertices: usize,
    pub x_vertices: usize,
    pub merged_collinear: usize,
}

/// Per-cell summaries: area, perimeter, vertex count.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ShapeSummary {
    pub areas: Vec<f64>,
    pub perimeters: Vec<f64>,
    pub vertex_counts: Vec<usize>,
}

impl ShapeSummary {
    pub fn of_polygons<'a>(ps: impl IntoIterator<Item = &'a Polygon>) -> Self {
        let mut s = ShapeSummary::default();
        for p in ps {
            s.areas.push(p.area());
            s.perimeters.push(p.perimeter());
            s.vertex_counts.push(p.rings().map(|r| r.len()).sum());
        }
        s
    }

    pub fn of_tessellation(t: &TTess) -> Self {
        let mut s = ShapeSummary::default();
        for c in t.cells() {
            s.areas.push(c.area);
            s.perimeters.push(c.perimeter);
            s.vertex_counts.push(c.ring.len());
        }
        s
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ApproxReport {
    pub sides: usize,
    pub dropped_slivers: usize,
    pub clusters: usize,
    /// Clusters containing a domain side; they stand for the window
    /// boundary and yield no segment.
    pub boundary_clusters: usize,
    pub representatives: usize,
    pub repairs: RepairCounts,
    pub input: ShapeSummary,
    pub output: ShapeSummary,
}

pub fn approximate(l: &Landscape, cfg: &ApproxConfig) -> Result<TTess, ApproxError> {
    approximate_with_report(l, cfg).map(|r| r.0)
}

pub fn approximate_with_report(l: &Landscape, cfg: &ApproxConfig) -> Result<(TTess, ApproxReport), ApproxError> {
    cfg.validate()?;
    let window = &l.domain;
    let eps = geometric_tolerance(window.diameter());
    let mut report = ApproxReport { input: ShapeSummary::of_polygons(&l.fields), ..Default::default() };
    // Domain sides take part in the clustering so that field sides along
    // the boundary fall into boundary clusters.
    let domain_sides = window.sides();
    let mut sides = domain_sides.clone();
    for f in &l.fields {
        for s in f.sides() {
            if s.length() > eps {
                sides.push(s);
            } else {
                report.dropped_slivers += 1;
            }
        }
    }
    report.sides = sides.len() - domain_sides.len();
    let clusters = single_linkage_clusters(&sides, cfg.cut_threshold);
    report.clusters = clusters.len();
    let mut reps = Vec::new();
    for c in &clusters {
        if c[0] < domain_sides.len() {
            report.boundary_clusters += 1;
            continue;
        }
        let members: Vec<Segment> = c.iter().map(|&i| sides[i]).collect();
        let rep = representative_segment(&members)?;
        reps.extend(clip_to_window(&rep, window).into_iter().filter(|p| p.length() > 16.0 * eps));
    }
    report.representatives = reps.len();
    let t = TTess::from_segments(window.clone(), &reps)?;
    let x_shift = cfg.x_shift.unwrap_or(1e-3 * window.diameter());
    let (t, counts) = repair(&t, x_shift, cfg.max_repair_iterations)?;
    report.repairs = counts;
    report.output = ShapeSummary::of_tessellation(&t);
    Ok((t, report))
}

/// Runs the I, L and X repairs until the arrangement is a T-tessellation.
pub fn repair(t: &TTess, x_shift: f64, max_iterations: usize) -> Result<(TTess, RepairCounts), ApproxError> {
    let mut r = Repairer::new(t, max_iterations)?;
    r.merge_collinear()?;
    for _ in 0..8 {
        r.remove_i()?;
        r.remove_l()?;
        r.merge_collinear()?;
        r.remove_x(x_shift)?;
        if r.t.is_valid() {
            return Ok((r.t, r.counts));
        }
    }
    let v = r.t.validate();
    Err(ApproxError::Unrepaired(v.first().map(|v| v.to_string()).unwrap_or_default()))
}

/// Removes every I-vertex, greedily by smallest length variation.
pub fn remove_i_vertices(t: &TTess, max_iterations: usize) -> Result<(TTess, usize), ApproxError> {
    let mut r = Repairer::new(t, max_iterations)?;
    r.remove_i()?;
    Ok((r.t, r.counts.i_vertices))
}

/// Removes every L-vertex by lengthening one of its two edges.
pub fn remove_l_vertices(t: &TTess, max_iterations: usize) -> Result<(TTess, usize), ApproxError> {
    let mut r = Repairer::new(t, max_iterations)?;
    r.remove_l()?;
    Ok((r.t, r.counts.l_vertices))
}

/// Replaces every crossing by two T-vertices `x_shift` apart.
pub fn remove_x_vertices(t: &TTess, x_shift: f64, max_iterations: usize) -> Result<(TTess, usize), ApproxError> {
    let mut r = Repairer::new(t, max_iterations)?;
    r.remove_x(x_shift)?;
    Ok((r.t, r.counts.x_vertices))
}

/// How a segment meets an internal vertex.
#[derive(Debug, Clone, Copy)]
struct Incidence {
    seg: usize,
    /// `Some(true)` for the `a` end, `Some(false)` for `b`, `None` when the
    /// segment passes through.
    end: Option<bool>,
}

struct Repairer {
    t: TTess,
    segs: Vec<Segment>,
    counts: RepairCounts,
    budget: usize,
}

enum Fix {
    Replace(usize, Segment),
    Remove(usize),
}

impl Repairer {
    fn new(t: &TTess, budget: usize) -> Result<Self, ApproxError> {
        let segs: Vec<Segment> = t.internal_segments().map(|(_, s)| *s).collect();
        let t = TTess::from_segments(t.window().clone(), &segs)?;
        Ok(Repairer { t, segs, counts: RepairCounts::default(), budget })
    }

    fn eps(&self) -> f64 {
        self.t.eps()
    }

    fn rebuild(&mut self) -> Result<(), ApproxError> {
        if self.budget == 0 {
            return Err(ApproxError::RepairLimit(self.budget));
        }
        self.budget -= 1;
        self.t = TTess::from_segments(self.t.window().clone(), &self.segs)?;
        // Internal segment order follows SegmentId, which follows `segs`.
        self.segs = self.t.internal_segments().map(|(_, s)| *s).collect();
        Ok(())
    }

    fn apply(&mut self, fixes: Vec<Fix>) -> Result<(), ApproxError> {
        let mut removed = Vec::new();
        for f in fixes {
            match f {
                Fix::Replace(i, s) => self.segs[i] = s,
                Fix::Remove(i) => removed.push(i),
            }
        }
        removed.sort_unstable();
        for i in removed.into_iter().rev() {
            self.segs.remove(i);
        }
        self.rebuild()
    }

    /// Index into `segs` of topology segment `k`, if internal.
    fn seg_of(&self, k: usize) -> Option<usize> {
        // After a rebuild the ids are 0..n in `segs` order.
        self.t.segments()[k].source.internal().map(|id| id.0 as usize)
    }

    fn incidences(&self, v: usize) -> Vec<Incidence> {
        let mut out: Vec<Incidence> = Vec::new();
        for &e in &self.t.vertices()[v].edges {
            let k = self.t.edges()[e].segment;
            let Some(i) = self.seg_of(k) else { continue };
            if out.iter().any(|x| x.seg == i) {
                continue;
            }
            let verts = &self.t.segments()[k].vertices;
            let end = if verts.first() == Some(&v) {
                Some(true)
            } else if verts.last() == Some(&v) {
                Some(false)
            } else {
                None
            };
            out.push(Incidence { seg: i, end });
        }
        out
    }

    fn internal_vertices_of_degree(&self, pred: impl Fn(usize) -> bool) -> Vec<usize> {
        self.t
            .vertices()
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VertexKind::Internal && pred(v.degree()))
            .map(|(i, _)| i)
            .collect()
    }

    /// First hit of the ray from `p` along `dir`, ignoring segments in `skip`.
    fn ray_hit(&self, p: Point, dir: Point, skip: &[usize]) -> Option<(f64, Point)> {
        let dir = dir.normalized();
        let tmin = 0.0;
        let mut best: Option<f64> = None;
        let others = self.segs.iter().enumerate().filter(|(i, _)| !skip.contains(i)).map(|(_, s)| *s);
        for s in others.chain(self.t.window().sides()) {
            if let Some((t, _)) = ray_segment_intersection(p, dir, &s, tmin) {
                if best.is_none_or(|b| t < b) {
                    best = Some(t);
                }
            }
        }
        best.map(|t| (t, p + dir * t))
    }

    /// Extension of segment `i` past its end (`a` when `at_a`) at vertex
    /// `v` to the next edge: (added length, new segment).
    fn extension(&self, v: usize, i: usize, at_a: bool) -> Option<(f64, Segment)> {
        let s = self.segs[i];
        let (from, to) = if at_a { (s.b, s.a) } else { (s.a, s.b) };
        let skip: Vec<usize> = self.incidences(v).iter().map(|x| x.seg).collect();
        let (g, hit) = self.ray_hit(to, to - from, &skip)?;
        Some((g, if at_a { Segment::new(hit, s.b) } else { Segment::new(s.a, hit) }))
    }

    fn remove_i(&mut self) -> Result<(), ApproxError> {
        loop {
            let mut best: Option<(f64, usize, Vec<Fix>)> = None;
            for v in self.internal_vertices_of_degree(|d| d == 1) {
                let inc = self.incidences(v);
                let Some(Incidence { seg: i, end: Some(at_a) }) = inc.first().copied() else { continue };
                let e = self.t.vertices()[v].edges[0];
                let k = self.t.edges()[e].segment;
                let verts = &self.t.segments()[k].vertices;
                let edge_len = self.t.vertices()[self.t.edges()[e].other(v)].point.dist(self.t.vertices()[v].point);
                let removal = if verts.len() <= 2 {
                    Fix::Remove(i)
                } else {
                    let nb = self.t.vertices()[self.t.edges()[e].other(v)].point;
                    let s = self.segs[i];
                    Fix::Replace(i, if at_a { Segment::new(nb, s.b) } else { Segment::new(s.a, nb) })
                };
                let mut option = (edge_len, removal);
                if let Some((g, ext)) = self.extension(v, i, at_a) {
                    if g < option.0 {
                        option = (g, Fix::Replace(i, ext));
                    }
                }
                if best.as_ref().is_none_or(|b| option.0 < b.0) {
                    best = Some((option.0, v, vec![option.1]));
                }
            }
            let Some((_, _, fix)) = best else { return Ok(()) };
            self.counts.i_vertices += 1;
            self.apply(fix)?;
        }
    }

    /// Also handles degree-3 vertices where three segment ends meet.
    fn remove_l(&mut self) -> Result<(), ApproxError> {
        loop {
            let mut best: Option<(f64, Vec<Fix>)> = None;
            for v in self.internal_vertices_of_degree(|d| d == 2 || d == 3) {
                let inc = self.incidences(v);
                if inc.iter().any(|x| x.end.is_none()) || inc.len() != self.t.vertices()[v].degree() {
                    continue;
                }
                for x in &inc {
                    if let Some((g, ext)) = self.extension(v, x.seg, x.end.unwrap()) {
                        if best.as_ref().is_none_or(|b| g < b.0) {
                            best = Some((g, vec![Fix::Replace(x.seg, ext)]));
                        }
                    }
                }
            }
            let Some((_, fix)) = best else { return Ok(()) };
            self.counts.l_vertices += 1;
            self.apply(fix)?;
        }
    }

    /// Fuses aligned segments that touch or overlap.
    fn merge_collinear(&mut self) -> Result<(), ApproxError> {
        let eps = self.eps();
        loop {
            let mut found = None;
            'outer: for i in 0..self.segs.len() {
                for j in (i + 1)..self.segs.len() {
                    let (a, b) = (self.segs[i], self.segs[j]);
                    let l = a.line();
                    let aligned =
                        l.signed_distance(b.a).abs() <= 16.0 * eps && l.signed_distance(b.b).abs() <= 16.0 * eps;
                    if !aligned {
                        continue;
                    }
                    let (a0, a1) = (l.project(a.a).min(l.project(a.b)), l.project(a.a).max(l.project(a.b)));
                    let (b0, b1) = (l.project(b.a).min(l.project(b.b)), l.project(b.a).max(l.project(b.b)));
                    if b0 <= a1 + 16.0 * eps && a0 <= b1 + 16.0 * eps {
                        let pts = [a.a, a.b, b.a, b.b];
                        let lo = pts.iter().min_by(|p, q| l.project(**p).total_cmp(&l.project(**q))).unwrap();
                        let hi = pts.iter().max_by(|p, q| l.project(**p).total_cmp(&l.project(**q))).unwrap();
                        found = Some((i, j, Segment::new(*lo, *hi)));
                        break 'outer;
                    }
                }
            }
            let Some((i, j, s)) = found else { return Ok(()) };
            self.counts.merged_collinear += 1;
            self.apply(vec![Fix::Replace(i, s), Fix::Remove(j)])?;
        }
    }

    fn remove_x(&mut self, x_shift: f64) -> Result<(), ApproxError> {
        loop {
            let Some(v) = self.internal_vertices_of_degree(|d| d >= 4).into_iter().next() else { return Ok(()) };
            let inc = self.incidences(v);
            let p = self.t.vertices()[v].point;
            let through: Vec<usize> = inc.iter().filter(|x| x.end.is_none()).map(|x| x.seg).collect();
            let ends: Vec<(usize, bool)> = inc.iter().filter_map(|x| x.end.map(|e| (x.seg, e))).collect();
            if through.len() >= 2 {
                // Break one crossing segment into two halves at the vertex.
                let i = through[1];
                let s = self.segs[i];
                self.segs.push(Segment::new(p, s.b));
                self.apply(vec![Fix::Replace(i, Segment::new(s.a, p))])?;
                continue;
            }
            if through.is_empty() {
                let best = ends
                    .iter()
                    .filter_map(|&(i, at_a)| self.extension(v, i, at_a).map(|e| (e.0, i, e.1)))
                    .min_by(|a, b| a.0.total_cmp(&b.0));
                let Some((_, i, ext)) = best else {
                    return Err(ApproxError::Unrepaired("isolated star vertex".into()));
                };
                self.apply(vec![Fix::Replace(i, ext)])?;
                continue;
            }
            let host = self.segs[through[0]];
            let fixes = self.shift_end(v, host, &ends, x_shift)?;
            self.apply(fixes)?;
        }
    }

    /// Moves one segment end at `v` along `host` by a shift that avoids
    /// other vertices of the host, halving the shift on collisions.
    fn shift_end(
        &mut self,
        v: usize,
        host: Segment,
        ends: &[(usize, bool)],
        x_shift: f64,
    ) -> Result<Vec<Fix>, ApproxError> {
        let p = self.t.vertices()[v].point;
        let line = host.line();
        let tv = line.project(p);
        let (h0, h1) = (line.project(host.a).min(line.project(host.b)), line.project(host.a).max(line.project(host.b)));
        let host_vertices: Vec<f64> = self
            .t
            .vertices()
            .iter()
            .enumerate()
            .filter(|(i, q)| *i != v && host.distance_to_point(q.point) <= 16.0 * self.eps())
            .map(|(_, q)| line.project(q.point))
            .collect();
        let mut shift = x_shift;
        loop {
            for dir in [1.0, -1.0] {
                let target = tv + dir * shift;
                let lo = tv.min(target) - 2.0 * shift.min(x_shift) * 1e-3;
                let hi = tv.max(target) + 2.0 * shift.min(x_shift) * 1e-3;
                let clear = target > h0 && target < h1 && host_vertices.iter().all(|&c| c < lo || c > hi);
                if !clear {
                    continue;
                }
                // Move the end whose segment carries the fewest other vertices.
                let &(i, at_a) = ends.iter().min_by_key(|(i, _)| self.vertex_count_on(*i)).expect("at least two ends");
                let q = line.point_at(target);
                let old = self.segs[i];
                let new = if at_a { Segment::new(q, old.b) } else { Segment::new(old.a, q) };
                let mut fixes = self.reattach(i, &old, &new);
                fixes.push(Fix::Replace(i, new));
                self.counts.x_vertices += 1;
                return Ok(fixes);
            }
            shift *= 0.5;
            if self.budget == 0 || shift < 4.0 * self.eps() {
                return Err(ApproxError::RepairLimit(self.budget));
            }
            self.budget -= 1;
        }
    }

    fn vertex_count_on(&self, i: usize) -> usize {
        let s = self.segs[i];
        self.t.vertices().iter().filter(|q| s.distance_to_point(q.point) <= 16.0 * self.eps()).count()
    }

    /// Segments ending in the interior of `old` are moved onto `new`.
    fn reattach(&self, i: usize, old: &Segment, new: &Segment) -> Vec<Fix> {
        let tol = 16.0 * self.eps();
        let nl = new.line();
        let onto = |p: Point, far: Point| -> Point {
            let d = p - far;
            let denom = d.dot(nl.normal());
            if denom.abs() < 1e-300 {
                return p;
            }
            far + d * ((nl.offset - far.dot(nl.normal())) / denom)
        };
        let attached = |p: Point| old.distance_to_point(p) <= tol && p.dist(old.a) > tol && p.dist(old.b) > tol;
        let mut fixes = Vec::new();
        for (j, s) in self.segs.iter().enumerate() {
            if j == i {
                continue;
            }
            let (ma, mb) = (attached(s.a), attached(s.b));
            if ma || mb {
                let a = if ma { onto(s.a, s.b) } else { s.a };
                let b = if mb { onto(s.b, s.a) } else { s.b };
                fixes.push(Fix::Replace(j, Segment::new(a, b)));
            }
        }
        fixes
    }
}

/// Benchmark landscapes.
pub mod benchmarks {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::Landscape;
    use crate::geometry::{Point, Polygon, Segment};
    use crate::tessellation::TTess;

    /// `k × k` grid of fields on the unit square whose lattice points are
    /// moved uniformly by up to `jitter` times the cell size (boundary
    /// points only along the boundary). Shared boundaries appear in both
    /// neighbouring fields.
    pub fn jittered_grid(k: usize, jitter: f64, seed: u64) -> Landscape {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = 1.0 / k as f64;
        let mut lattice = vec![vec![Point::default(); k + 1]; k + 1];
        for (i, col) in lattice.iter_mut().enumerate() {
            for (j, p) in col.iter_mut().enumerate() {
                let mut dx = rng.gen_range(-jitter..=jitter) * h;
                let mut dy = rng.gen_range(-jitter..=jitter) * h;
                if i == 0 || i == k {
                    dx = 0.0;
                }
                if j == 0 || j == k {
                    dy = 0.0;
                }
                if (i == 0 || i == k) && (j == 0 || j == k) {
                    dx = 0.0;
                    dy = 0.0;
                }
                *p = Point::new(i as f64 * h + dx, j as f64 * h + dy);
            }
        }
        let mut fields = Vec::with_capacity(k * k);
        for i in 0..k {
            for j in 0..k {
                let ring = vec![lattice[i][j], lattice[i + 1][j], lattice[i + 1][j + 1], lattice[i][j + 1]];
                fields.push(Polygon::simple(ring).expect("non-degenerate cell"));
            }
        }
        Landscape { domain: Polygon::unit_square(), fields }
    }

    /// Sixteen-cell brick wall: three full-width courses, each row cut by
    /// three staggered joints.
    pub fn brick_tessellation() -> TTess {
        let joints = [[0.2, 0.45, 0.7], [0.3, 0.55, 0.8], [0.15, 0.4, 0.65], [0.25, 0.5, 0.75]];
        let mut segs = Vec::new();
        for y in [0.25, 0.5, 0.75] {
            segs.push(Segment::new(Point::new(0.0, y), Point::new(1.0, y)));
        }
        for (r, row) in joints.iter().enumerate() {
            let (y0, y1) = (0.25 * r as f64, 0.25 * (r + 1) as f64);
            for &x in row {
                segs.push(Segment::new(Point::new(x, y0), Point::new(x, y1)));
            }
        }
        TTess::from_segments(Polygon::unit_square(), &segs).expect("brick wall")
    }

    /// The brick wall drawn as polygons, every internal boundary twice.
    pub fn brick_landscape() -> Landscape {
        Landscape::from_tessellation(&brick_tessellation())
    }
}

#[cfg(test)]
mod tests {
    use super::benchmarks::*;
    use super::*;
    use crate::geometry::convex_hull;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn seg(ax: f64, ay: f64, bx: f64, by: f64) -> Segment {
        Segment::new(Point::new(ax, ay), Point::new(bx, by))
    }

    fn shoelace(pts: &[Point]) -> f64 {
        let n = pts.len();
        (0..n).map(|i| pts[i].x * pts[(i + 1) % n].y - pts[(i + 1) % n].x * pts[i].y).sum::<f64>().abs() / 2.0
    }

    /// Agglomerates the closest pair of groups while it is below `delta`.
    pub(crate) fn naive_single_linkage(sides: &[Segment], delta: f64) -> Vec<Vec<usize>> {
        let mut groups: Vec<Vec<usize>> = (0..sides.len()).map(|i| vec![i]).collect();
        loop {
            let mut best = (f64::INFINITY, 0, 0);
            for a in 0..groups.len() {
                for b in (a + 1)..groups.len() {
                    for &i in &groups[a] {
                        for &j in &groups[b] {
                            let d = side_dissimilarity(&sides[i], &sides[j]);
                            if d < best.0 {
                                best = (d, a, b);
                            }
                        }
                    }
                }
            }
            if best.0.is_nan() || best.0 >= delta {
                break;
            }
            let moved = groups.remove(best.2);
            groups[best.1].extend(moved);
        }
        for g in &mut groups {
            g.sort_unstable();
        }
        groups.sort();
        groups
    }

    pub(crate) fn random_sides(rng: &mut ChaCha8Rng, n: usize) -> Vec<Segment> {
        (0..n)
            .map(|_| {
                let a = Point::new(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
                let ang: f64 = rng.gen_range(0.0..std::f64::consts::PI);
                let len = rng.gen_range(0.05..0.3);
                Segment::new(a, a + Point::new(ang.cos(), ang.sin()) * len)
            })
            .collect()
    }

    #[test]
    fn dissimilarity_examples() {
        assert_eq!(side_dissimilarity(&seg(0., 0., 1., 0.), &seg(1., 0., 2., 0.)), 0.0);
        for h in [0.05, 0.3, 2.0] {
            let d = side_dissimilarity(&seg(0., 0., 1., 0.), &seg(0., h, 1., h));
            assert!((d - 2.0 * h).abs() < 1e-14);
        }
        let (a, b) = (seg(0., 0., 2., 0.), seg(3., -0.5, 3., 1.0));
        let hull = shoelace(&convex_hull(&[a.a, a.b, b.a, b.b]));
        let oracle = hull / (2.0 * 1.5) + 2.0 * 1.0 / 3.5;
        assert!((side_dissimilarity(&a, &b) - oracle).abs() < 1e-14);
        assert!(side_dissimilarity(&a, &b) > 0.0);
    }

    #[test]
    fn clustering_examples() {
        let collinear = [seg(0., 0., 1., 0.), seg(1., 0., 2., 0.), seg(2., 0., 2.5, 0.)];
        for delta in [1e-6, 0.2, 3.0] {
            assert_eq!(single_linkage_clusters(&collinear, delta), vec![vec![0, 1, 2]]);
        }
        let apart = [seg(0., 0., 1., 0.), seg(5., 5., 5., 6.)];
        assert_eq!(single_linkage_clusters(&apart, 0.2), vec![vec![0], vec![1]]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let sides = random_sides(&mut rng, 20);
            for delta in [0.2, 0.5, 1.0] {
                assert_eq!(single_linkage_clusters(&sides, delta), naive_single_linkage(&sides, delta));
            }
        }
    }

    #[test]
    fn representative_examples() {
        let r = representative_segment(&[seg(0., 0., 1., 0.), seg(2., 0., 3., 0.)]).unwrap();
        let (lo, hi) = if r.a.x < r.b.x { (r.a, r.b) } else { (r.b, r.a) };
        assert!(lo.dist(Point::new(0., 0.)) < 1e-12 && hi.dist(Point::new(3., 0.)) < 1e-12);
        let r = representative_segment(&[seg(0., 0.1, 1., 0.1), seg(0., -0.1, 1., -0.1)]).unwrap();
        assert!(r.a.y.abs() < 1e-12 && r.b.y.abs() < 1e-12);
        assert!((r.length() - 1.0).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let noisy: Vec<Segment> = (0..6)
            .map(|i| {
                let x = i as f64 * 0.2;
                seg(x, rng.gen_range(-0.01..0.01), x + 0.2, rng.gen_range(-0.01..0.01))
            })
            .collect();
        let r = representative_segment(&noisy).unwrap();
        let l = r.line();
        let (lo, hi) = (l.project(r.a).min(l.project(r.b)), l.project(r.a).max(l.project(r.b)));
        for s in &noisy {
            for p in [s.a, s.b] {
                let c = l.project(p);
                assert!(c >= lo - 1e-12 && c <= hi + 1e-12);
            }
        }
        assert!(representative_segment(&[seg(1., 1., 1., 1.)]).is_err());
    }

    #[test]
    fn i_vertex_examples() {
        let w = Polygon::unit_square();
        let t = TTess::from_segments(w.clone(), &[seg(0.4, 0.5, 0.5, 0.5)]).unwrap();
        let (r, n) = remove_i_vertices(&t, 100).unwrap();
        assert_eq!(r.n_internal_segments(), 0);
        assert_eq!(n, 1);
        let wide = Polygon::rectangle(0.0, 0.0, 3.0, 1.0);
        let t = TTess::from_segments(wide, &[seg(0., 0.5, 2., 0.5), seg(2.1, 0., 2.1, 1.)]).unwrap();
        let (r, _) = remove_i_vertices(&t, 100).unwrap();
        let chord = r.internal_segments().map(|(_, s)| *s).find(|s| (s.a.y - 0.5).abs() < 1e-12).unwrap();
        assert!((chord.length() - 2.1).abs() < 1e-9);
        assert!(r.is_valid());
    }

    #[test]
    fn random_arrangements_lose_i_and_l_vertices() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let sides = random_sides(&mut rng, 15);
            let segs: Vec<Segment> = sides.iter().flat_map(|s| clip_to_window(s, &Polygon::unit_square())).collect();
            let t = TTess::from_segments(Polygon::unit_square(), &segs).unwrap();
            let (t, _) = remove_i_vertices(&t, 10_000).unwrap();
            let (t, _) = remove_l_vertices(&t, 10_000).unwrap();
            for v in t.validate() {
                assert!(v.is_x_vertex(), "{v}");
            }
            let (t, _) = repair(&t, 1e-3, 10_000).unwrap();
            assert!(t.is_valid(), "{:?}", t.validate());
        }
    }

    #[test]
    fn x_vertex_examples() {
        let w = Polygon::unit_square();
        let t = TTess::from_segments(w.clone(), &[seg(0.5, 0., 0.5, 1.), seg(0., 0.4, 1., 0.4)]).unwrap();
        let (r, n) = remove_x_vertices(&t, 1e-3, 100).unwrap();
        assert_eq!(n, 1);
        assert!(r.is_valid());
        assert_eq!(r.n_cells(), 4);
        assert_eq!(r.n_internal_segments(), 3);
        let none = TTess::from_segments(w.clone(), &[seg(0.5, 0., 0.5, 1.)]).unwrap();
        let (same, n) = remove_x_vertices(&none, 1e-3, 100).unwrap();
        assert_eq!(n, 0);
        assert_eq!(same.internal_segments().map(|(_, s)| *s).collect::<Vec<_>>(), vec![seg(0.5, 0., 0.5, 1.)]);
        let mut grid = Vec::new();
        for x in [0.25, 0.5, 0.75] {
            grid.push(seg(x, 0., x, 1.));
            grid.push(seg(0., x, 1., x));
        }
        let t = TTess::from_segments(w, &grid).unwrap();
        let (r, n) = remove_x_vertices(&t, 1e-3, 1000).unwrap();
        assert_eq!(n, 9);
        assert!(r.is_valid(), "{:?}", r.validate());
        assert_eq!(r.n_cells(), 16);
    }

    fn hausdorff(a: &Segment, b: &Segment) -> f64 {
        [a.a, a.b]
            .iter()
            .map(|p| b.distance_to_point(*p))
            .chain([b.a, b.b].iter().map(|p| a.distance_to_point(*p)))
            .fold(0.0, f64::max)
    }

    #[test]
    fn approximation_of_tessellations_is_identity() {
        let split = TTess::from_segments(Polygon::unit_square(), &[seg(0.5, 0., 0.5, 1.)]).unwrap();
        for t in [split, brick_tessellation()] {
            let out = approximate(&Landscape::from_tessellation(&t), &ApproxConfig::default()).unwrap();
            assert!(out.is_valid());
            assert_eq!(out.n_cells(), t.n_cells());
            let eps = t.eps();
            for (_, s) in t.internal_segments() {
                assert!(out.internal_segments().any(|(_, o)| hausdorff(s, o) <= eps), "{s:?}");
            }
            assert_eq!(out.n_internal_segments(), t.n_internal_segments());
            assert!((out.cells().iter().map(|c| c.area).sum::<f64>() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn jittered_grid_recovers_sixteen_cells() {
        for seed in 0..20 {
            let l = jittered_grid(4, 0.01, seed);
            let (t, rep) = approximate_with_report(&l, &ApproxConfig::default()).unwrap();
            assert!(t.is_valid(), "{:?}", t.validate());
            assert_eq!(t.n_cells(), 16);
            assert_eq!(rep.clusters - rep.boundary_clusters, 6);
            let rel = |a: f64, b: f64| (a - b).abs() / b;
            assert!(rel(median(&rep.output.areas), median(&rep.input.areas)) < 0.1);
            assert!(rel(median(&rep.output.perimeters), median(&rep.input.perimeters)) < 0.1);
        }
    }

    #[test]
    fn shared_boundaries_yield_one_representative_each() {
        let (t, rep) = approximate_with_report(&brick_landscape(), &ApproxConfig::default()).unwrap();
        assert_eq!(rep.representatives, 15);
        assert_eq!(t.n_cells(), 16);
    }

    #[test]
    fn geojson_round_trip_and_errors() {
        let l = jittered_grid(3, 0.01, 1);
        let back = Landscape::from_geojson(&l.to_geojson()).unwrap();
        assert_eq!(back.fields.len(), 9);
        let no_domain = r#"{"type":"FeatureCollection","features":[{"type":"Feature","properties":{},"geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,0]]]}}]}"#;
        match Landscape::from_geojson(no_domain) {
            Err(ApproxError::Landscape(m)) => assert!(m.contains("domain")),
            other => panic!("{other:?}"),
        }
        assert!(matches!(Landscape::from_geojson("{"), Err(ApproxError::Parse(_))));
    }
}
