//! Planar primitives shared by every other module: points, segments, lines,
//! polygons, convex hulls, minimum-area enclosing rectangles and orthogonal
//! regression lines.
//!
//! All predicates are tolerance based. The tolerance is a length and is
//! normally derived from the window through [`geometric_tolerance`].

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::GeometryError;

/// Relative factor applied to the window diameter to obtain the geometric
/// tolerance used by alignment and coincidence predicates.
pub const RELATIVE_TOLERANCE: f64 = 1e-9;

/// Geometric tolerance for a window of the given diameter.
pub fn geometric_tolerance(diameter: f64) -> f64 {
    RELATIVE_TOLERANCE * diameter.max(f64::MIN_POSITIVE)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3-D cross product.
    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn dist(self, o: Point) -> f64 {
        (self - o).norm()
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Point {
        Point::new(-self.y, self.x)
    }

    pub fn normalized(self) -> Point {
        let n = self.norm();
        Point::new(self.x / n, self.y / n)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn lerp(self, o: Point, t: f64) -> Point {
        self + (o - self) * t
    }

    pub fn rotate(self, angle: f64) -> Point {
        let (s, c) = angle.sin_cos();
        Point::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

/// Orientation of `c` relative to the directed line `a -> b`
/// (twice the signed triangle area).
pub fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b - a).cross(c - a)
}

/// A straight line segment between two distinct points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Point,
    pub b: Point,
}

impl Segment {
    pub const fn new(a: Point, b: Point) -> Self {
        Segment { a, b }
    }

    /// Builds a segment and rejects degenerate ones.
    pub fn checked(a: Point, b: Point, eps: f64) -> Result<Self, GeometryError> {
        if !a.is_finite() || !b.is_finite() {
            return Err(GeometryError::NonFinite);
        }
        if a.dist(b) <= eps {
            return Err(GeometryError::DegenerateSegment);
        }
        Ok(Segment { a, b })
    }

    pub fn length(&self) -> f64 {
        self.a.dist(self.b)
    }

    pub fn vector(&self) -> Point {
        self.b - self.a
    }

    pub fn direction(&self) -> Point {
        self.vector().normalized()
    }

    pub fn midpoint(&self) -> Point {
        self.a.lerp(self.b, 0.5)
    }

    pub fn point_at(&self, t: f64) -> Point {
        self.a.lerp(self.b, t)
    }

    pub fn reversed(&self) -> Segment {
        Segment::new(self.b, self.a)
    }

    /// Parameter of the orthogonal projection of `p` on the supporting line,
    /// with `0` at `a` and `1` at `b`.
    pub fn param_of(&self, p: Point) -> f64 {
        let v = self.vector();
        (p - self.a).dot(v) / v.norm_sq()
    }

    pub fn closest_point(&self, p: Point) -> Point {
        self.point_at(self.param_of(p).clamp(0.0, 1.0))
    }

    pub fn distance_to_point(&self, p: Point) -> f64 {
        self.closest_point(p).dist(p)
    }

    pub fn line(&self) -> Line {
        Line::through(self.a, self.b)
    }

    pub fn translate(&self, d: Point) -> Segment {
        Segment::new(self.a + d, self.b + d)
    }

    pub fn rotate(&self, angle: f64) -> Segment {
        Segment::new(self.a.rotate(angle), self.b.rotate(angle))
    }
}

/// True when the closed segments share at least one point.
pub fn segments_intersect(s1: &Segment, s2: &Segment) -> bool {
    let d1 = orient(s2.a, s2.b, s1.a);
    let d2 = orient(s2.a, s2.b, s1.b);
    let d3 = orient(s1.a, s1.b, s2.a);
    let d4 = orient(s1.a, s1.b, s2.b);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    let on = |p: Point, s: &Segment, d: f64| {
        d == 0.0
            && p.x >= s.a.x.min(s.b.x)
            && p.x <= s.a.x.max(s.b.x)
            && p.y >= s.a.y.min(s.b.y)
            && p.y <= s.a.y.max(s.b.y)
    };
    on(s1.a, s2, d1) || on(s1.b, s2, d2) || on(s2.a, s1, d3) || on(s2.b, s1, d4)
}

/// Smallest Euclidean distance between two segments; zero when they touch.
pub fn min_segment_distance(s1: &Segment, s2: &Segment) -> f64 {
    if segments_intersect(s1, s2) {
        return 0.0;
    }
    s1.distance_to_point(s2.a)
        .min(s1.distance_to_point(s2.b))
        .min(s2.distance_to_point(s1.a))
        .min(s2.distance_to_point(s1.b))
}

/// Area of the convex hull of the four endpoints of two segments.
pub fn convex_hull_area(s1: &Segment, s2: &Segment) -> f64 {
    let hull = convex_hull(&[s1.a, s1.b, s2.a, s2.b]);
    ring_signed_area(&hull).abs()
}

/// Convex hull by the monotone chain, counter-clockwise, collinear points
/// dropped. Fewer than three points are returned as-is (deduplicated).
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|p, q| p.x.total_cmp(&q.x).then(p.y.total_cmp(&q.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<Point> = Vec::with_capacity(pts.len());
    for &p in &pts {
        while lower.len() >= 2 && orient(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point> = Vec::with_capacity(pts.len());
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && orient(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// An infinite line `{x : x·n = offset}` with unit normal
/// `n = (-sin angle, cos angle)`; the direction is `(cos angle, sin angle)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub angle: f64,
    pub offset: f64,
}

impl Line {
    /// Normalizes the angle into `[0, π)`, flipping the offset sign when needed.
    pub fn new(angle: f64, offset: f64) -> Self {
        let mut a = angle.rem_euclid(2.0 * PI);
        let mut o = offset;
        if a >= PI {
            a -= PI;
            o = -o;
        }
        if a >= PI {
            a = 0.0;
        }
        Line { angle: a, offset: o }
    }

    pub fn through(a: Point, b: Point) -> Self {
        let d = b - a;
        let angle = d.y.atan2(d.x);
        let n = Point::new(-angle.sin(), angle.cos());
        Line::new(angle, a.dot(n))
    }

    pub fn direction(&self) -> Point {
        Point::new(self.angle.cos(), self.angle.sin())
    }

    pub fn normal(&self) -> Point {
        Point::new(-self.angle.sin(), self.angle.cos())
    }

    pub fn signed_distance(&self, p: Point) -> f64 {
        p.dot(self.normal()) - self.offset
    }

    /// 1-D coordinate of the orthogonal projection of `p` along the line.
    pub fn project(&self, p: Point) -> f64 {
        p.dot(self.direction())
    }

    pub fn point_at(&self, coord: f64) -> Point {
        self.direction() * coord + self.normal() * self.offset
    }

    pub fn foot(&self, p: Point) -> Point {
        self.point_at(self.project(p))
    }

    /// Equality of both fields within tolerance, accounting for the
    /// `angle ≈ 0` / `angle ≈ π` wrap where the offset changes sign.
    pub fn aligned(&self, other: &Line, eps_angle: f64, eps_offset: f64) -> bool {
        let da = (self.angle - other.angle).abs();
        if da <= eps_angle {
            return (self.offset - other.offset).abs() <= eps_offset;
        }
        if (PI - da).abs() <= eps_angle {
            return (self.offset + other.offset).abs() <= eps_offset;
        }
        false
    }
}

/// Polygon with a counter-clockwise outer ring and clockwise holes.
/// Rings are open (the first point is not repeated).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub outer: Vec<Point>,
    #[serde(default)]
    pub holes: Vec<Vec<Point>>,
}

impl Polygon {
    /// Builds a polygon and orients its rings.
    pub fn new(outer: Vec<Point>, holes: Vec<Vec<Point>>) -> Result<Self, GeometryError> {
        let mut outer = clean_ring(outer);
        if outer.len() < 3 {
            return Err(GeometryError::InvalidRing("outer ring has fewer than 3 points".into()));
        }
        if outer.iter().any(|p| !p.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        if ring_signed_area(&outer) < 0.0 {
            outer.reverse();
        }
        if ring_signed_area(&outer) <= 0.0 {
            return Err(GeometryError::DegeneratePolygon);
        }
        let mut hs = Vec::with_capacity(holes.len());
        for h in holes {
            let mut h = clean_ring(h);
            if h.len() < 3 {
                return Err(GeometryError::InvalidRing("hole has fewer than 3 points".into()));
            }
            if ring_signed_area(&h) > 0.0 {
                h.reverse();
            }
            hs.push(h);
        }
        Ok(Polygon { outer, holes: hs })
    }

    pub fn simple(outer: Vec<Point>) -> Result<Self, GeometryError> {
        Polygon::new(outer, Vec::new())
    }

    /// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Polygon {
            outer: vec![Point::new(x0, y0), Point::new(x1, y0), Point::new(x1, y1), Point::new(x0, y1)],
            holes: Vec::new(),
        }
    }

    pub fn unit_square() -> Self {
        Polygon::rectangle(0.0, 0.0, 1.0, 1.0)
    }

    pub fn rings(&self) -> impl Iterator<Item = &Vec<Point>> {
        std::iter::once(&self.outer).chain(self.holes.iter())
    }

    /// Closed sides of every ring.
    pub fn sides(&self) -> Vec<Segment> {
        self.rings().flat_map(|r| ring_sides(r)).collect()
    }

    pub fn area(&self) -> f64 {
        polygon_area(self)
    }

    pub fn perimeter(&self) -> f64 {
        polygon_perimeter(self)
    }

    pub fn bbox(&self) -> (Point, Point) {
        bbox(&self.outer)
    }

    pub fn diameter(&self) -> f64 {
        let (lo, hi) = self.bbox();
        lo.dist(hi)
    }

    /// Even-odd containment over all rings (boundary points are unspecified).
    pub fn contains(&self, p: Point) -> bool {
        point_in_ring(p, &self.outer) && !self.holes.iter().any(|h| point_in_ring(p, h))
    }

    pub fn distance_to_boundary(&self, p: Point) -> f64 {
        self.rings().flat_map(|r| ring_sides(r)).map(|s| s.distance_to_point(p)).fold(f64::INFINITY, f64::min)
    }

    pub fn is_convex(&self) -> bool {
        self.holes.is_empty() && ring_is_convex(&self.outer)
    }

    pub fn map(&self, f: impl Fn(Point) -> Point) -> Polygon {
        Polygon {
            outer: self.outer.iter().map(|&p| f(p)).collect(),
            holes: self.holes.iter().map(|h| h.iter().map(|&p| f(p)).collect()).collect(),
        }
    }
}

fn clean_ring(mut ring: Vec<Point>) -> Vec<Point> {
    if ring.len() > 1 && ring.first() == ring.last() {
        ring.pop();
    }
    ring.dedup();
    ring
}

pub fn ring_sides(ring: &[Point]) -> impl Iterator<Item = Segment> + '_ {
    let n = ring.len();
    (0..n).map(move |i| Segment::new(ring[i], ring[(i + 1) % n]))
}

/// Shoelace signed area; positive for counter-clockwise rings.
pub fn ring_signed_area(ring: &[Point]) -> f64 {
    let n = ring.len();
    if n < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..n {
        s += ring[i].cross(ring[(i + 1) % n]);
    }
    0.5 * s
}

pub fn ring_perimeter(ring: &[Point]) -> f64 {
    ring_sides(ring).map(|s| s.length()).sum()
}

pub fn ring_centroid(ring: &[Point]) -> Point {
    let n = ring.len();
    let a = ring_signed_area(ring);
    if a.abs() < f64::MIN_POSITIVE {
        let s = ring.iter().fold(Point::default(), |acc, &p| acc + p);
        return s * (1.0 / n as f64);
    }
    let (mut cx, mut cy) = (0.0, 0.0);
    for i in 0..n {
        let p = ring[i];
        let q = ring[(i + 1) % n];
        let c = p.cross(q);
        cx += (p.x + q.x) * c;
        cy += (p.y + q.y) * c;
    }
    Point::new(cx / (6.0 * a), cy / (6.0 * a))
}

pub fn ring_is_convex(ring: &[Point]) -> bool {
    let n = ring.len();
    let sign = ring_signed_area(ring).signum();
    (0..n).all(|i| orient(ring[i], ring[(i + 1) % n], ring[(i + 2) % n]) * sign >= -1e-15)
}

/// Crossing-number point-in-ring test.
pub fn point_in_ring(p: Point, ring: &[Point]) -> bool {
    let n = ring.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (ring[i], ring[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

pub fn bbox(points: &[Point]) -> (Point, Point) {
    let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        lo.x = lo.x.min(p.x);
        lo.y = lo.y.min(p.y);
        hi.x = hi.x.max(p.x);
        hi.y = hi.y.max(p.y);
    }
    (lo, hi)
}

/// Area of the polygon with holes subtracted.
pub fn polygon_area(p: &Polygon) -> f64 {
    ring_signed_area(&p.outer).abs() - p.holes.iter().map(|h| ring_signed_area(h).abs()).sum::<f64>()
}

/// Perimeter of the outer ring plus all holes.
pub fn polygon_perimeter(p: &Polygon) -> f64 {
    p.rings().map(|r| ring_perimeter(r)).sum()
}

/// Oriented rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingRect {
    pub center: Point,
    /// Direction of the long side, in `[0, π)`.
    pub angle: f64,
    pub length: f64,
    pub width: f64,
}

impl BoundingRect {
    pub fn area(&self) -> f64 {
        self.length * self.width
    }

    /// Length-to-width ratio, `≥ 1`.
    pub fn ratio(&self) -> f64 {
        self.length / self.width
    }
}

/// Minimum-area enclosing rectangle of the polygon's outer ring.
pub fn min_enclosing_rectangle(p: &Polygon) -> Result<BoundingRect, GeometryError> {
    min_enclosing_rectangle_of_points(&p.outer)
}

/// Minimum-area enclosing rectangle of a point set. One side of the optimum
/// is collinear with a convex hull edge, so only hull edge directions are
/// examined.
pub fn min_enclosing_rectangle_of_points(points: &[Point]) -> Result<BoundingRect, GeometryError> {
    let hull = convex_hull(points);
    if hull.len() < 3 || ring_signed_area(&hull) <= 0.0 {
        return Err(GeometryError::DegeneratePolygon);
    }
    let mut cands: Vec<BoundingRect> = Vec::with_capacity(hull.len());
    let n = hull.len();
    for i in 0..n {
        let e = hull[(i + 1) % n] - hull[i];
        let len = e.norm();
        if len == 0.0 {
            continue;
        }
        let u = e * (1.0 / len);
        let v = u.perp();
        let (mut umin, mut umax, mut vmin, mut vmax) =
            (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &q in &hull {
            let a = q.dot(u);
            let b = q.dot(v);
            umin = umin.min(a);
            umax = umax.max(a);
            vmin = vmin.min(b);
            vmax = vmax.max(b);
        }
        let (eu, ev) = (umax - umin, vmax - vmin);
        let center = u * (0.5 * (umin + umax)) + v * (0.5 * (vmin + vmax));
        let (length, width, dir) = if eu >= ev { (eu, ev, u) } else { (ev, eu, v) };
        let angle = Line::new(dir.y.atan2(dir.x), 0.0).angle;
        cands.push(BoundingRect { center, angle, length, width });
    }
    // The optimum need not be unique (a right triangle admits two); among
    // near-optimal rectangles take the least elongated so the ratio is a
    // similarity invariant.
    let amin = cands.iter().map(BoundingRect::area).fold(f64::INFINITY, f64::min);
    cands
        .into_iter()
        .filter(|r| r.area() <= amin * (1.0 + 1e-9))
        .min_by(|a, b| a.ratio().total_cmp(&b.ratio()))
        .ok_or(GeometryError::DegeneratePolygon)
}

/// Line minimizing the sum of squared orthogonal distances (principal axis
/// of the point scatter).
pub fn total_least_squares_line(points: &[Point]) -> Result<Line, GeometryError> {
    if points.len() < 2 {
        return Err(GeometryError::CoincidentPoints);
    }
    let n = points.len() as f64;
    let c = points.iter().fold(Point::default(), |acc, &p| acc + p) * (1.0 / n);
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in points {
        let d = *p - c;
        sxx += d.x * d.x;
        syy += d.y * d.y;
        sxy += d.x * d.y;
    }
    let scale = points.iter().map(|p| p.x.abs().max(p.y.abs())).fold(0.0, f64::max).max(1.0);
    if sxx + syy <= (1e-14 * scale).powi(2) * n {
        return Err(GeometryError::CoincidentPoints);
    }
    let angle = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let l = Line::new(angle, 0.0);
    Ok(Line::new(l.angle, c.dot(l.normal())))
}

/// Signed coordinate of the projection of `p` along `l`.
pub fn project_onto_line(p: Point, l: &Line) -> f64 {
    l.project(p)
}

/// Intersection parameter of the ray `origin + t·dir` (t > `t_min`) with a
/// segment, if any.
pub fn ray_segment_intersection(origin: Point, dir: Point, s: &Segment, t_min: f64) -> Option<(f64, f64)> {
    let v = s.vector();
    let denom = dir.cross(v);
    if denom.abs() < 1e-300 {
        return None;
    }
    let w = s.a - origin;
    let t = w.cross(v) / denom;
    let u = w.cross(dir) / denom;
    if t > t_min && (0.0..=1.0).contains(&u) {
        Some((t, u))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(ax: f64, ay: f64, bx: f64, by: f64) -> Segment {
        Segment::new(Point::new(ax, ay), Point::new(bx, by))
    }

    fn shoelace(pts: &[(f64, f64)]) -> f64 {
        let n = pts.len();
        let mut s = 0.0;
        for i in 0..n {
            let (x0, y0) = pts[i];
            let (x1, y1) = pts[(i + 1) % n];
            s += x0 * y1 - x1 * y0;
        }
        (0.5 * s).abs()
    }

    #[test]
    fn hull_area_examples() {
        assert_eq!(convex_hull_area(&seg(0., 0., 1., 0.), &seg(2., 0., 3., 0.)), 0.0);
        assert!((convex_hull_area(&seg(0., 0., 1., 0.), &seg(0., 1., 1., 1.)) - 1.0).abs() < 1e-15);
        // Hull of (0,0),(1,0),(.5,-.5),(.5,.5) ordered by hand: a diamond.
        let oracle = shoelace(&[(0.0, 0.0), (0.5, -0.5), (1.0, 0.0), (0.5, 0.5)]);
        let got = convex_hull_area(&seg(0., 0., 1., 0.), &seg(0.5, -0.5, 0.5, 0.5));
        assert!((got - oracle).abs() < 1e-15);
        assert!((got - 0.5).abs() < 1e-15);
    }

    #[test]
    fn segment_distance_examples() {
        assert_eq!(min_segment_distance(&seg(0., 0., 1., 0.), &seg(1., 0., 2., 0.)), 0.0);
        assert!((min_segment_distance(&seg(0., 0., 1., 0.), &seg(0., 2., 1., 2.)) - 2.0).abs() < 1e-15);
        // Brute-force minimization over a parameter grid on both segments.
        let s1 = seg(0., 0., 1., 0.);
        let s2 = seg(3., 1., 3., 2.);
        let mut best = f64::INFINITY;
        let k = 2000;
        for i in 0..=k {
            for j in 0..=k {
                let d = s1.point_at(i as f64 / k as f64).dist(s2.point_at(j as f64 / k as f64));
                best = best.min(d);
            }
        }
        let got = min_segment_distance(&s1, &s2);
        assert!((got - best).abs() < 1e-9);
        assert!((got - 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn enclosing_rectangle_examples() {
        let r = min_enclosing_rectangle(&Polygon::unit_square()).unwrap();
        assert!((r.length - 1.0).abs() < 1e-12 && (r.width - 1.0).abs() < 1e-12);
        let r = min_enclosing_rectangle(&Polygon::rectangle(0., 0., 4., 1.)).unwrap();
        assert!((r.ratio() - 4.0).abs() < 1e-12);

        // Dense rotation sweep oracle.
        let tri = Polygon::simple(vec![Point::new(0., 0.), Point::new(2., 0.), Point::new(0., 1.)]).unwrap();
        let mut best = (f64::INFINITY, 0.0, 0.0);
        let steps = (PI / 1e-4) as usize;
        for k in 0..steps {
            let a = k as f64 * 1e-4;
            let (u, v) = (Point::new(a.cos(), a.sin()), Point::new(-a.sin(), a.cos()));
            let pu: Vec<f64> = tri.outer.iter().map(|p| p.dot(u)).collect();
            let pv: Vec<f64> = tri.outer.iter().map(|p| p.dot(v)).collect();
            let eu =
                pu.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - pu.iter().cloned().fold(f64::INFINITY, f64::min);
            let ev =
                pv.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - pv.iter().cloned().fold(f64::INFINITY, f64::min);
            if eu * ev < best.0 {
                best = (eu * ev, eu.max(ev), eu.min(ev));
            }
        }
        let r = min_enclosing_rectangle(&tri).unwrap();
        assert!(r.area() <= best.0 + 1e-12);
        assert!((r.area() - best.0).abs() < 1e-6);
        assert!((r.length - best.1).abs() < 1e-3 && (r.width - best.2).abs() < 1e-3);
    }

    #[test]
    fn right_triangle_tie_takes_least_elongated() {
        // Leg-aligned box 3 x 1 (ratio 3) ties in area with the
        // hypotenuse-aligned box sqrt(10) x 3/sqrt(10) (ratio 10/3).
        let tri = [Point::new(0.0, 0.0), Point::new(3.0, 0.0), Point::new(0.0, 1.0)];
        for k in [1.0, 0.3, 7.0] {
            let pts: Vec<Point> = tri.iter().map(|&p| p * k).collect();
            let r = min_enclosing_rectangle_of_points(&pts).unwrap();
            assert!((r.ratio() - 3.0).abs() < 1e-9, "{}", r.ratio());
        }
    }

    #[test]
    fn enclosing_rectangle_rejects_degenerate() {
        let flat = Polygon { outer: vec![Point::new(0., 0.), Point::new(1., 0.), Point::new(2., 0.)], holes: vec![] };
        assert!(min_enclosing_rectangle(&flat).is_err());
    }

    #[test]
    fn tls_examples() {
        let pts: Vec<Point> = (0..5).map(|i| Point::new(i as f64, 0.0)).collect();
        let l = total_least_squares_line(&pts).unwrap();
        assert!(l.angle.abs() < 1e-15 && l.offset.abs() < 1e-15);

        let h = 0.3;
        let pts = [Point::new(0., h), Point::new(0., -h), Point::new(1., h), Point::new(1., -h)];
        let l = total_least_squares_line(&pts).unwrap();
        assert!(l.angle.abs() < 1e-12 && l.offset.abs() < 1e-12);

        // Dense angle search minimizing orthogonal residuals.
        let pts = [
            Point::new(0.0, 0.1),
            Point::new(1.0, 0.9),
            Point::new(2.0, 2.2),
            Point::new(3.0, 2.8),
            Point::new(4.0, 4.1),
        ];
        let c = pts.iter().fold(Point::default(), |a, &p| a + p) * 0.2;
        let mut best = (f64::INFINITY, 0.0);
        for k in 0..200_000 {
            let a = k as f64 * PI / 200_000.0;
            let n = Point::new(-a.sin(), a.cos());
            let r: f64 = pts.iter().map(|p| (*p - c).dot(n).powi(2)).sum();
            if r < best.0 {
                best = (r, a);
            }
        }
        let l = total_least_squares_line(&pts).unwrap();
        assert!((l.angle - best.1).abs() < 1e-4);
        assert!(total_least_squares_line(&[Point::new(1., 1.), Point::new(1., 1.)]).is_err());
    }

    #[test]
    fn projection_examples() {
        let x_axis = Line::new(0.0, 0.0);
        assert_eq!(project_onto_line(Point::new(3., 5.), &x_axis), 3.0);
        let l = Line::through(Point::new(1., 2.), Point::new(4., -1.));
        let p = Point::new(2.5, 0.5);
        assert!(l.foot(p).dist(p) < 1e-12);
        let q = Point::new(-3.0, 7.0);
        let resid = q - l.foot(q);
        assert!(resid.dot(l.direction()).abs() < 1e-12);
    }

    #[test]
    fn polygon_area_examples() {
        let sq = Polygon::unit_square();
        assert_eq!(polygon_area(&sq), 1.0);
        assert_eq!(polygon_perimeter(&sq), 4.0);
        let holed = Polygon::new(
            sq.outer.clone(),
            vec![vec![Point::new(0.25, 0.25), Point::new(0.75, 0.25), Point::new(0.75, 0.75), Point::new(0.25, 0.75)]],
        )
        .unwrap();
        assert!((polygon_area(&holed) - 0.75).abs() < 1e-15);
        assert!((polygon_perimeter(&holed) - 6.0).abs() < 1e-15);

        let hex = [(0.0, 0.0), (2.0, -0.5), (3.5, 0.7), (3.0, 2.5), (1.2, 3.1), (-0.4, 1.6)];
        let poly = Polygon::simple(hex.iter().map(|&(x, y)| Point::new(x, y)).collect()).unwrap();
        assert!((polygon_area(&poly) - shoelace(&hex)).abs() < 1e-12);
    }

    #[test]
    fn line_normalization_and_alignment() {
        let a = Line::new(PI + 0.25, 1.0);
        assert!((a.angle - 0.25).abs() < 1e-15 && a.offset == -1.0);
        let b = Line::new(1e-13, 0.5);
        let c = Line::new(PI - 1e-13, -0.5);
        assert!(b.aligned(&c, 1e-9, 1e-9));
        assert!(!b.aligned(&Line::new(0.0, 0.6), 1e-9, 1e-9));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn pt() -> impl Strategy<Value = Point> {
            (-5.0..5.0f64, -5.0..5.0f64).prop_map(|(x, y)| Point::new(x, y))
        }

        proptest! {
            #[test]
            fn hull_area_symmetric_and_rigid(a in pt(), b in pt(), c in pt(), d in pt(),
                                             ang in 0.0..std::f64::consts::TAU, tx in -3.0..3.0f64, ty in -3.0..3.0f64) {
                let s1 = Segment::new(a, b);
                let s2 = Segment::new(c, d);
                let h = convex_hull_area(&s1, &s2);
                prop_assert!(h >= 0.0);
                prop_assert!((h - convex_hull_area(&s2, &s1)).abs() <= 1e-9 * (1.0 + h));
                let m = |s: &Segment| s.rotate(ang).translate(Point::new(tx, ty));
                let hm = convex_hull_area(&m(&s1), &m(&s2));
                prop_assert!((h - hm).abs() <= 1e-9 * (1.0 + h));
            }

            #[test]
            fn distance_symmetric(a in pt(), b in pt(), c in pt(), d in pt()) {
                let s1 = Segment::new(a, b);
                let s2 = Segment::new(c, d);
                let d12 = min_segment_distance(&s1, &s2);
                prop_assert!((d12 - min_segment_distance(&s2, &s1)).abs() < 1e-12);
                prop_assert_eq!(d12 == 0.0, segments_intersect(&s1, &s2));
            }

            #[test]
            fn rectangle_beats_axis_box(pts in proptest::collection::vec(pt(), 3..12)) {
                if let Ok(r) = min_enclosing_rectangle_of_points(&pts) {
                    let (lo, hi) = bbox(&pts);
                    prop_assert!(r.area() <= (hi.x - lo.x) * (hi.y - lo.y) * (1.0 + 1e-12) + 1e-12);
                    prop_assert!(r.ratio() >= 1.0);
                }
            }

            #[test]
            fn tls_commutes_with_rotation(pts in proptest::collection::vec(pt(), 3..10), ang in 0.0..std::f64::consts::TAU) {
                let l = total_least_squares_line(&pts);
                let rotated: Vec<Point> = pts.iter().map(|p| p.rotate(ang)).collect();
                let lr = total_least_squares_line(&rotated);
                if let (Ok(l), Ok(lr)) = (l, lr) {
                    // Skip nearly isotropic scatters where the principal axis is ill-posed.
                    let c = pts.iter().fold(Point::default(), |a, &p| a + p) * (1.0 / pts.len() as f64);
                    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
                    for p in &pts { let d = *p - c; sxx += d.x*d.x; syy += d.y*d.y; sxy += d.x*d.y; }
                    let gap = ((sxx - syy).powi(2) + 4.0 * sxy * sxy).sqrt();
                    prop_assume!(gap > 1e-3 * (sxx + syy));
                    let expected = Line::new(l.angle + ang, 0.0).angle;
                    let diff = (lr.angle - expected).abs();
                    prop_assert!(diff.min(PI - diff) < 1e-8);
                }
            }
        }
    }
}
