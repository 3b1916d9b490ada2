//! Empty-space function with border correction and the global MAD
//! envelope test.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GofError, SamplerError};
use crate::geometry::{Point, Polygon, Segment};
use crate::model::GibbsModel;
use crate::sampler::{run_parallel, ChainConfig};
use crate::tessellation::TTess;

/// Uniform bucket index over segments for nearest-distance queries.
pub struct EdgeIndex {
    segments: Vec<Segment>,
    origin: Point,
    size: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<u32>>,
}

impl EdgeIndex {
    pub fn new(segments: Vec<Segment>) -> Self {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for s in &segments {
            for p in [s.a, s.b] {
                lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
                hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
            }
        }
        let span = (hi.x - lo.x).max(hi.y - lo.y).max(f64::MIN_POSITIVE);
        // About one bucket per segment, at most 256 per side.
        let per_side = ((segments.len() as f64).sqrt().ceil() as usize).clamp(1, 256);
        let size = span / per_side as f64;
        let nx = (((hi.x - lo.x) / size).floor() as usize + 1).min(per_side + 1);
        let ny = (((hi.y - lo.y) / size).floor() as usize + 1).min(per_side + 1);
        let mut index =
            EdgeIndex { segments: Vec::new(), origin: lo, size, nx, ny, buckets: vec![Vec::new(); nx * ny] };
        for (k, s) in segments.iter().enumerate() {
            let (i0, j0) = index.bucket_of(Point::new(s.a.x.min(s.b.x), s.a.y.min(s.b.y)));
            let (i1, j1) = index.bucket_of(Point::new(s.a.x.max(s.b.x), s.a.y.max(s.b.y)));
            for j in j0..=j1 {
                for i in i0..=i1 {
                    index.buckets[j * nx + i].push(k as u32);
                }
            }
        }
        index.segments = segments;
        index
    }

    pub fn of_tessellation(t: &TTess) -> Self {
        EdgeIndex::new(t.edge_segments())
    }

    fn bucket_of(&self, p: Point) -> (usize, usize) {
        let i = ((p.x - self.origin.x) / self.size).floor().max(0.0) as usize;
        let j = ((p.y - self.origin.y) / self.size).floor().max(0.0) as usize;
        (i.min(self.nx - 1), j.min(self.ny - 1))
    }

    /// Distance from `p` to the nearest segment.
    pub fn distance(&self, p: Point) -> f64 {
        if self.segments.is_empty() {
            return f64::INFINITY;
        }
        let (ci, cj) = self.bucket_of(p);
        let (ci, cj) = (ci as isize, cj as isize);
        let mut best = f64::INFINITY;
        let max_ring = self.nx.max(self.ny) as isize;
        for k in 0..=max_ring {
            for j in (cj - k)..=(cj + k) {
                if j < 0 || j >= self.ny as isize {
                    continue;
                }
                let edge_row = j == cj - k || j == cj + k;
                let mut i = ci - k;
                while i <= ci + k {
                    if i >= 0 && i < self.nx as isize {
                        for &e in &self.buckets[j as usize * self.nx + i as usize] {
                            best = best.min(self.segments[e as usize].distance_to_point(p));
                        }
                    }
                    // Interior rows only need the two ring columns.
                    i += if edge_row || k == 0 { 1 } else { 2 * k };
                }
            }
            // Unvisited buckets lie at least k bucket widths away, as long
            // as p sits inside the indexed box.
            if best <= k as f64 * self.size - self.outside_margin(p) {
                break;
            }
        }
        best
    }

    fn outside_margin(&self, p: Point) -> f64 {
        let hx = self.origin.x + self.nx as f64 * self.size;
        let hy = self.origin.y + self.ny as f64 * self.size;
        let dx = (self.origin.x - p.x).max(p.x - hx).max(0.0);
        let dy = (self.origin.y - p.y).max(p.y - hy).max(0.0);
        dx.hypot(dy)
    }
}

/// Shortest distance from `u` to the edge set of `t`, window boundary
/// included.
pub fn distance_to_tessellation(u: Point, t: &TTess) -> f64 {
    t.edge_segments().iter().map(|s| s.distance_to_point(u)).fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    /// Points per side of the stratified grid over the window bounding box.
    pub grid: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig { grid: 256 }
    }
}

/// Fixed point sample in a window with cached distances to its boundary.
#[derive(Debug, Clone)]
pub struct PointSample {
    pub points: Vec<Point>,
    pub boundary_distance: Vec<f64>,
}

impl PointSample {
    /// Centres of a `grid × grid` lattice of boxes over the bounding box,
    /// kept when inside the window.
    pub fn new(window: &Polygon, cfg: &SamplingConfig) -> Self {
        let (lo, hi) = window.bbox();
        let n = cfg.grid.max(1);
        let (dx, dy) = ((hi.x - lo.x) / n as f64, (hi.y - lo.y) / n as f64);
        let boundary = EdgeIndex::new(window.sides());
        let mut points = Vec::new();
        let mut boundary_distance = Vec::new();
        for j in 0..n {
            for i in 0..n {
                let p = Point::new(lo.x + (i as f64 + 0.5) * dx, lo.y + (j as f64 + 0.5) * dy);
                if window.contains(p) {
                    points.push(p);
                    boundary_distance.push(boundary.distance(p));
                }
            }
        }
        PointSample { points, boundary_distance }
    }

    pub fn max_boundary_distance(&self) -> f64 {
        self.boundary_distance.iter().cloned().fold(0.0, f64::max)
    }
}

/// `n` equally spaced radii in `(0, R]`, `R = min(0.2 × diameter,
/// 0.9 × largest point-to-boundary distance)`.
pub fn default_r_grid(window: &Polygon, sample: &PointSample, n: usize) -> Vec<f64> {
    let r_max = (0.2 * window.diameter()).min(0.9 * sample.max_boundary_distance());
    (1..=n).map(|i| r_max * i as f64 / n as f64).collect()
}

pub const DEFAULT_R_POINTS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FEstimate {
    pub r_grid: Vec<f64>,
    /// NaN where no sample point is eligible.
    pub values: Vec<f64>,
    pub eligible_counts: Vec<usize>,
}

impl FEstimate {
    pub fn is_defined(&self) -> bool {
        self.eligible_counts.iter().all(|&c| c > 0)
    }
}

/// Border-corrected empty-space function: among sample points at least
/// `r` from the window boundary, the fraction within `r` of the edges.
pub fn estimate_f(t: &TTess, r_grid: &[f64], sample: &PointSample) -> FEstimate {
    estimate_f_edges(t.edge_segments(), r_grid, sample)
}

/// [`estimate_f`] for an arbitrary edge set, which should contain the
/// window boundary.
pub fn estimate_f_edges(edges: Vec<Segment>, r_grid: &[f64], sample: &PointSample) -> FEstimate {
    let index = EdgeIndex::new(edges);
    let d: Vec<f64> = sample.points.iter().map(|&p| index.distance(p)).collect();
    f_from_distances(&d, r_grid, sample)
}

fn f_from_distances(d: &[f64], r_grid: &[f64], sample: &PointSample) -> FEstimate {
    let mut values = Vec::with_capacity(r_grid.len());
    let mut eligible_counts = Vec::with_capacity(r_grid.len());
    for &r in r_grid {
        let mut eligible = 0usize;
        let mut hit = 0usize;
        for (&dt, &dw) in d.iter().zip(&sample.boundary_distance) {
            if dw >= r {
                eligible += 1;
                if dt <= r {
                    hit += 1;
                }
            }
        }
        eligible_counts.push(eligible);
        values.push(if eligible == 0 { f64::NAN } else { hit as f64 / eligible as f64 });
    }
    FEstimate { r_grid: r_grid.to_vec(), values, eligible_counts }
}

/// Pointwise mean of curves on a common grid.
pub fn reference_f(curves: &[FEstimate]) -> Result<FEstimate, GofError> {
    let first = curves.first().ok_or_else(|| GofError::Config("no curves to average".into()))?;
    if curves.iter().any(|c| c.r_grid != first.r_grid) {
        return Err(GofError::GridMismatch);
    }
    let n = curves.len() as f64;
    let values = (0..first.r_grid.len()).map(|i| curves.iter().map(|c| c.values[i]).sum::<f64>() / n).collect();
    let eligible_counts =
        (0..first.r_grid.len()).map(|i| curves.iter().map(|c| c.eligible_counts[i]).min().unwrap()).collect();
    Ok(FEstimate { r_grid: first.r_grid.clone(), values, eligible_counts })
}

/// `max_r |f(r) − f_ref(r)|`.
pub fn mad_statistic(f: &FEstimate, f_ref: &FEstimate) -> Result<f64, GofError> {
    if f.r_grid != f_ref.r_grid {
        return Err(GofError::GridMismatch);
    }
    Ok(f.values.iter().zip(&f_ref.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeConfig {
    /// Total number of curves: the observed one plus `m − 1` simulations.
    pub m: usize,
    #[serde(default)]
    pub r_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub sampling: SamplingConfig,
    /// Each null simulation is an independent chain from the empty window
    /// on stream `chain.stream + i`, kept after `chain.burn_in + 1` steps.
    pub chain: ChainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeResult {
    pub f_obs: FEstimate,
    pub f_ref: FEstimate,
    pub mad_obs: f64,
    pub mad_sims: Vec<f64>,
    /// `1 + #{i : X_i ≥ X_obs}`.
    pub rank: usize,
    pub p_value: f64,
    /// `max_i X_i`.
    pub half_width: f64,
    pub r_max: f64,
    pub m: usize,
}

impl EnvelopeResult {
    /// Rejection at level `1/m`.
    pub fn rejected(&self) -> bool {
        self.mad_obs > self.half_width
    }

    pub fn lower(&self) -> Vec<f64> {
        self.f_ref.values.iter().map(|v| v - self.half_width).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.f_ref.values.iter().map(|v| v + self.half_width).collect()
    }

    /// Whether the observed curve stays in the band at every radius.
    pub fn inside_band(&self) -> bool {
        self.f_obs.values.iter().zip(&self.f_ref.values).all(|(o, r)| (o - r).abs() <= self.half_width)
    }
}

/// `count` independent draws of `model` in `window`.
pub fn null_draws(
    model: &GibbsModel,
    window: &Polygon,
    chain: &ChainConfig,
    count: usize,
) -> Result<Vec<TTess>, SamplerError> {
    let cfg = ChainConfig { n_steps: chain.burn_in + 1, thin: 1, ..chain.clone() };
    Ok(run_parallel(model, window, &cfg, count)?.into_iter().flat_map(|s| s.tessellations).collect())
}

/// Global MAD envelope test of `observed` against `model`.
pub fn envelope_test(observed: &TTess, model: &GibbsModel, cfg: &EnvelopeConfig) -> Result<EnvelopeResult, GofError> {
    if cfg.m < 2 {
        return Err(GofError::Config("m must be at least 2".into()));
    }
    let window = observed.window();
    let sims = null_draws(model, window, &cfg.chain, cfg.m - 1)?;
    envelope_from_draws(observed, &sims, cfg.r_grid.as_deref(), &cfg.sampling)
}

/// Envelope test with the null simulations supplied.
pub fn envelope_from_draws(
    observed: &TTess,
    sims: &[TTess],
    r_grid: Option<&[f64]>,
    sampling: &SamplingConfig,
) -> Result<EnvelopeResult, GofError> {
    if sims.is_empty() {
        return Err(GofError::Config("need at least one simulation".into()));
    }
    let sample = PointSample::new(observed.window(), sampling);
    let r_grid = match r_grid {
        Some(g) => g.to_vec(),
        None => default_r_grid(observed.window(), &sample, DEFAULT_R_POINTS),
    };
    if r_grid.is_empty()
        || r_grid.iter().any(|r| !(r.is_finite() && *r > 0.0))
        || r_grid.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(GofError::Config("r grid must be positive and increasing".into()));
    }
    let f_obs = estimate_f(observed, &r_grid, &sample);
    if !f_obs.is_defined() {
        return Err(GofError::Config("no sample point is eligible at the largest radius".into()));
    }
    let curves: Vec<FEstimate> = sims.par_iter().map(|t| estimate_f(t, &r_grid, &sample)).collect();
    let f_ref = reference_f(&curves)?;
    let mad_obs = mad_statistic(&f_obs, &f_ref)?;
    let mad_sims = curves.iter().map(|c| mad_statistic(c, &f_ref)).collect::<Result<Vec<_>, _>>()?;
    let m = sims.len() + 1;
    let rank = 1 + mad_sims.iter().filter(|&&x| x >= mad_obs).count();
    let half_width = mad_sims.iter().cloned().fold(0.0, f64::max);
    Ok(EnvelopeResult {
        r_max: *r_grid.last().unwrap(),
        f_obs,
        f_ref,
        mad_obs,
        mad_sims,
        rank,
        p_value: rank as f64 / m as f64,
        half_width,
        m,
    })
}
