//! Exhaustive listing of the T-tessellations supported by a small line set.

use super::TTess;
use crate::error::TessError;
use crate::geometry::{Line, Point, Polygon, Segment};

/// Guard against combinatorial explosion.
pub const MAX_ENUMERATION_LINES: usize = 6;

/// Order-independent fingerprint of a tessellation's internal segments.
pub type CanonicalKey = Vec<[i64; 4]>;

/// Segment endpoints quantized at `1e-7` of the window diameter, each
/// segment with its endpoints sorted, the list sorted.
pub fn canonical_key(t: &TTess) -> CanonicalKey {
    let q = 1e-7 * t.window().diameter();
    let r = |v: f64| (v / q).round() as i64;
    let mut key: Vec<[i64; 4]> = t
        .internal_segments()
        .map(|(_, s)| {
            let (a, b) = ((r(s.a.x), r(s.a.y)), (r(s.b.x), r(s.b.y)));
            let (a, b) = if a <= b { (a, b) } else { (b, a) };
            [a.0, a.1, b.0, b.1]
        })
        .collect();
    key.sort_unstable();
    key
}

/// Chord of a line through a convex window.
fn window_chord(window: &Polygon, line: &Line) -> Option<(f64, f64)> {
    let ring = &window.outer;
    let n = ring.len();
    let sd: Vec<f64> = ring.iter().map(|&p| line.signed_distance(p)).collect();
    let mut ts = Vec::new();
    for i in 0..n {
        let j = (i + 1) % n;
        if (sd[i] > 0.0) != (sd[j] > 0.0) {
            let p = ring[i].lerp(ring[j], sd[i] / (sd[i] - sd[j]));
            ts.push(line.project(p));
        }
    }
    if ts.len() < 2 {
        return None;
    }
    let lo = ts.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Some((lo, hi))
}

#[derive(Clone, Copy, PartialEq)]
enum At {
    Outside,
    End,
    Inside,
}

struct LineInfo {
    /// Breakpoint coordinates along the line, chord ends included.
    breaks: Vec<f64>,
    /// For each other line, the index of the crossing in `breaks`.
    crossing: Vec<Option<usize>>,
}

fn status(run: Option<(usize, usize)>, k: usize) -> At {
    match run {
        None => At::Outside,
        Some((i, j)) => {
            if k == i || k == j {
                At::End
            } else if k > i && k < j {
                At::Inside
            } else {
                At::Outside
            }
        }
    }
}

/// Pairwise compatibility of runs on two lines at their crossing.
fn compatible(a: At, b: At) -> bool {
    !matches!((a, b), (At::Inside, At::Inside) | (At::End, At::End) | (At::End, At::Outside) | (At::Outside, At::End))
}

/// All T-tessellations of a convex window whose internal segments lie on
/// the given lines, the empty tessellation included. Segments are
/// contiguous runs of the elementary pieces cut on each line by the other
/// lines; runs that would create I, L or X vertices are pruned and every
/// survivor is checked with the validator.
pub fn enumerate_supported(window: &Polygon, lines: &[Line]) -> Result<Vec<TTess>, TessError> {
    if lines.len() > MAX_ENUMERATION_LINES {
        return Err(TessError::TooManyLines(lines.len(), MAX_ENUMERATION_LINES));
    }
    if !window.is_convex() {
        return Err(TessError::NonConvexWindow);
    }
    let eps = crate::geometry::geometric_tolerance(window.diameter());
    let n = lines.len();
    for i in 0..n {
        for j in (i + 1)..n {
            if lines[i].aligned(&lines[j], eps / window.diameter(), eps) {
                return Err(TessError::Invalid(format!("lines {i} and {j} are aligned")));
            }
        }
    }
    let mut chords = Vec::with_capacity(n);
    for (i, l) in lines.iter().enumerate() {
        chords.push(window_chord(window, l).ok_or(TessError::Invalid(format!("line {i} misses the window")))?);
    }

    let mut infos: Vec<LineInfo> = Vec::with_capacity(n);
    for i in 0..n {
        let (lo, hi) = chords[i];
        let mut pts: Vec<(f64, Option<usize>)> = vec![(lo, None), (hi, None)];
        for j in 0..n {
            if j == i {
                continue;
            }
            if let Some(x) = intersect(&lines[i], &lines[j]) {
                let t = lines[i].project(x);
                let tj = lines[j].project(x);
                let (lo_j, hi_j) = chords[j];
                if t > lo + eps && t < hi - eps && tj > lo_j + eps && tj < hi_j - eps {
                    pts.push((t, Some(j)));
                }
            }
        }
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut crossing = vec![None; n];
        for (k, (_, j)) in pts.iter().enumerate() {
            if let Some(j) = j {
                crossing[*j] = Some(k);
            }
        }
        infos.push(LineInfo { breaks: pts.iter().map(|p| p.0).collect(), crossing });
    }

    let options: Vec<Vec<Option<(usize, usize)>>> = infos
        .iter()
        .map(|info| {
            let m = info.breaks.len();
            let mut o = vec![None];
            for a in 0..m {
                for b in (a + 1)..m {
                    o.push(Some((a, b)));
                }
            }
            o
        })
        .collect();

    let mut chosen: Vec<Option<(usize, usize)>> = Vec::with_capacity(n);
    let mut configs = Vec::new();
    search(&infos, &options, &mut chosen, &mut configs);

    let mut out = Vec::with_capacity(configs.len());
    for cfg in configs {
        let segs: Vec<Segment> = cfg
            .iter()
            .enumerate()
            .filter_map(|(i, r)| {
                r.map(|(a, b)| {
                    Segment::new(lines[i].point_at(infos[i].breaks[a]), lines[i].point_at(infos[i].breaks[b]))
                })
            })
            .collect();
        let t = TTess::from_segments(window.clone(), &segs)?;
        if t.is_valid() {
            out.push(t);
        }
    }
    Ok(out)
}

fn search(
    infos: &[LineInfo],
    options: &[Vec<Option<(usize, usize)>>],
    chosen: &mut Vec<Option<(usize, usize)>>,
    out: &mut Vec<Vec<Option<(usize, usize)>>>,
) {
    let k = chosen.len();
    if k == infos.len() {
        out.push(chosen.clone());
        return;
    }
    for opt in &options[k] {
        let ok = (0..k).all(|j| match (infos[k].crossing[j], infos[j].crossing[k]) {
            (Some(ck), Some(cj)) => compatible(status(*opt, ck), status(chosen[j], cj)),
            _ => true,
        });
        if ok {
            chosen.push(*opt);
            search(infos, options, chosen, out);
            chosen.pop();
        }
    }
}

fn intersect(l1: &Line, l2: &Line) -> Option<Point> {
    let (n1, n2) = (l1.normal(), l2.normal());
    let det = n1.cross(n2);
    if det.abs() < 1e-14 {
        return None;
    }
    let x = (l1.offset * n2.y - l2.offset * n1.y) / det;
    let y = (n1.x * l2.offset - n2.x * l1.offset) / det;
    Some(Point::new(x, y))
}
