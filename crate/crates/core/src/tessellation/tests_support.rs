//! Random valid states for tests across modules.

use super::*;
use crate::geometry::{Line, Point, Polygon};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// Random walk over valid states using every move kind.
pub fn random_tess(seed: u64, moves: usize) -> TTess {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = TTess::window_only(Polygon::unit_square()).unwrap();
    for _ in 0..moves {
        let kind = rng.gen_range(0..10);
        let next = if kind < 6 || t.n_internal_segments() == 0 {
            let c = rng.gen_range(0..t.n_cells());
            let line = Line::new(rng.gen_range(0.0..PI), 0.0);
            let (lo, hi) = projection_band(&t.cells()[c].ring, &line);
            let line = Line::new(line.angle, rng.gen_range(lo..hi));
            split_chord(&t, c, &line).and_then(|ch| t.apply_split(c, ch))
        } else if kind < 8 {
            let nb = t.non_blocking_segments();
            if nb.is_empty() {
                continue;
            }
            t.apply_merge(nb[rng.gen_range(0..nb.len())])
        } else {
            let fl = t.flippable_ends();
            if fl.is_empty() {
                continue;
            }
            let (s, e) = fl[rng.gen_range(0..fl.len())];
            t.apply_flip(s, e)
        };
        if let Ok(n) = next {
            t = n;
        }
    }
    t
}

pub fn projection_band(ring: &[Point], line: &Line) -> (f64, f64) {
    let n = line.normal();
    let v: Vec<f64> = ring.iter().map(|q| q.dot(n)).collect();
    (v.iter().cloned().fold(f64::INFINITY, f64::min), v.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
}

/// Every merge and flip of `t` plus one split chosen from `pick`.
pub fn candidate_updates(t: &TTess, pick: usize) -> Vec<LocalUpdate> {
    let mut out: Vec<LocalUpdate> =
        t.non_blocking_segments().into_iter().map(|segment| LocalUpdate::Merge { segment }).collect();
    out.extend(t.flippable_ends().into_iter().map(|(segment, end)| LocalUpdate::Flip { segment, end }));
    let c = pick % t.n_cells();
    let line = Line::new((pick as f64) * 0.377 % PI, 0.0);
    let (lo, hi) = projection_band(&t.cells()[c].ring, &line);
    let line = Line::new(line.angle, lo + (hi - lo) * ((pick as f64 * 0.618) % 1.0));
    if let Ok(chord) = split_chord(t, c, &line) {
        out.push(LocalUpdate::Split { cell: c, chord });
    }
    out
}
