//! Metropolis-Hastings-Green simulation of Gibbs T-tessellation models with
//! split, merge and flip moves.
//!
//! In continuous mode a split draws a line uniformly in angle and offset
//! over the chosen cell, and each segment is weighted against the line
//! measure `(τ/π) dφ dp` (τ the model's line intensity). In line-pool mode
//! splits only use lines of a fixed pool and the reference is counting
//! measure, so the chain targets the model's exact distribution on the
//! tessellations supported by the pool.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{SamplerError, TessError};
use crate::geometry::{Line, Point, Polygon};
use crate::model::GibbsModel;
use crate::statistics::{delta_from_plan, FeatureVector};
use crate::tessellation::{split_chord, LocalUpdate, SegmentId, TTess, UpdatePlan};

pub const DEFAULT_BURN_IN: u64 = 100_000;
pub const DEFAULT_MOVE_PROBABILITIES: [f64; 3] = [0.4, 0.4, 0.2];

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalMode {
    #[default]
    Continuous,
    LinePool(Vec<Line>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub seed: u64,
    /// ChaCha stream; independent chains share a seed and differ here.
    #[serde(default)]
    pub stream: u64,
    pub n_steps: u64,
    #[serde(default = "default_burn_in")]
    pub burn_in: u64,
    #[serde(default = "default_thin")]
    pub thin: u64,
    /// `(split, merge, flip)`.
    #[serde(default = "default_probs")]
    pub move_probabilities: [f64; 3],
    #[serde(default)]
    pub mode: ProposalMode,
}

fn default_burn_in() -> u64 {
    DEFAULT_BURN_IN
}

fn default_thin() -> u64 {
    1
}

fn default_probs() -> [f64; 3] {
    DEFAULT_MOVE_PROBABILITIES
}

impl ChainConfig {
    /// Continuous mode with default burn-in and move mix; `n_steps`
    /// counts burn-in steps too.
    pub fn new(seed: u64, n_steps: u64) -> Self {
        ChainConfig {
            seed,
            stream: 0,
            n_steps,
            burn_in: DEFAULT_BURN_IN.min(n_steps),
            thin: 1,
            move_probabilities: DEFAULT_MOVE_PROBABILITIES,
            mode: ProposalMode::Continuous,
        }
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        let p = self.move_probabilities;
        if p.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(SamplerError::Config("move probabilities must be nonnegative".into()));
        }
        if (p.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(SamplerError::Config("move probabilities must sum to 1".into()));
        }
        if self.thin == 0 {
            return Err(SamplerError::Config("thin must be at least 1".into()));
        }
        if self.burn_in > self.n_steps {
            return Err(SamplerError::Config("burn-in exceeds the number of steps".into()));
        }
        if let ProposalMode::LinePool(lines) = &self.mode {
            if lines.is_empty() || lines.iter().any(|l| !(l.angle.is_finite() && l.offset.is_finite())) {
                return Err(SamplerError::Config("line pool must be non-empty and finite".into()));
            }
        }
        Ok(())
    }

    pub fn n_retained(&self) -> u64 {
        (self.n_steps - self.burn_in) / self.thin
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveKind {
    Split,
    Merge,
    Flip,
}

impl MoveKind {
    pub const ALL: [MoveKind; 3] = [MoveKind::Split, MoveKind::Merge, MoveKind::Flip];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn of(u: &LocalUpdate) -> MoveKind {
        match u {
            LocalUpdate::Split { .. } => MoveKind::Split,
            LocalUpdate::Merge { .. } => MoveKind::Merge,
            LocalUpdate::Flip { .. } => MoveKind::Flip,
        }
    }
}

/// A proposed update with the log-densities of proposing it from the
/// current state and of proposing its inverse from the updated state.
/// `plan` is `None` when the drawn move has no legal target.
#[derive(Debug, Clone)]
pub struct Proposal {
    pub kind: MoveKind,
    pub plan: Option<UpdatePlan>,
    pub log_forward: f64,
    pub log_reverse: f64,
}

impl Proposal {
    fn reject(kind: MoveKind) -> Self {
        Proposal { kind, plan: None, log_forward: f64::NAN, log_reverse: f64::NAN }
    }
}

/// Range of `x·n` over the ring for the unit normal of angle `phi`.
fn projection_band(ring: &[Point], phi: f64) -> (f64, f64) {
    let n = Line::new(phi, 0.0).normal();
    ring.iter().map(|p| p.dot(n)).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

fn projection_width(ring: &[Point], phi: f64) -> f64 {
    let (lo, hi) = projection_band(ring, phi);
    hi - lo
}

/// Pool lines crossing the interior of a convex ring.
fn hitting_lines<'a>(pool: &'a [Line], ring: &[Point], eps: f64) -> Vec<&'a Line> {
    pool.iter()
        .filter(|l| {
            let (lo, hi) = projection_band(ring, l.angle);
            l.offset > lo + eps && l.offset < hi - eps
        })
        .collect()
}

/// Non-blocking segments and flippable ends after `plan`.
fn post_counts(t: &TTess, plan: &UpdatePlan) -> (usize, usize) {
    let mut edges: BTreeMap<SegmentId, i64> =
        t.internal_segments().map(|(id, _)| (id, t.segment(id).map_or(0, |s| s.edges.len() as i64))).collect();
    for &(id, d) in &plan.edge_count_changes {
        *edges.entry(id).or_insert(0) += d;
    }
    if let Some((id, _)) = plan.removed {
        edges.remove(&id);
    }
    if let Some(id) = plan.created {
        edges.insert(id, 1);
    }
    let nb = edges.values().filter(|&&e| e == 1).count();
    let fl = 2 * edges.values().filter(|&&e| e >= 2).count();
    (nb, fl)
}

/// Log-densities of proposing `plan` from `t` and of proposing its inverse
/// from the updated state. Split densities are with respect to `dφ dp` in
/// continuous mode and counting measure on the pool otherwise.
pub fn move_log_densities(t: &TTess, plan: &UpdatePlan, config: &ChainConfig) -> (f64, f64) {
    let [ps, pm, pf] = config.move_probabilities.map(f64::ln);
    let eps = t.eps();
    let split_term = |ring: &[Point], phi: f64| -> f64 {
        match &config.mode {
            ProposalMode::Continuous => -(PI * projection_width(ring, phi)).ln(),
            ProposalMode::LinePool(pool) => -(hitting_lines(pool, ring, eps).len() as f64).ln(),
        }
    };
    let n_cells = t.n_cells() as f64;
    match &plan.update {
        LocalUpdate::Split { cell, chord } => {
            let fwd = ps - n_cells.ln() + split_term(&t.cells()[*cell].ring, chord.line().angle);
            let (nb, _) = post_counts(t, plan);
            (fwd, pm - (nb as f64).ln())
        }
        LocalUpdate::Merge { .. } => {
            let fwd = pm - (t.non_blocking_segments().len() as f64).ln();
            let (_, removed) = plan.removed.expect("merge removes a segment");
            let rev = ps - (n_cells - 1.0).ln() + split_term(&plan.added_rings[0], removed.line().angle);
            (fwd, rev)
        }
        LocalUpdate::Flip { .. } => {
            let fwd = pf - (t.flippable_ends().len() as f64).ln();
            let (_, fl) = post_counts(t, plan);
            (fwd, pf - (fl as f64).ln())
        }
    }
}

pub fn propose_update<R: Rng>(t: &TTess, config: &ChainConfig, rng: &mut R) -> Proposal {
    let [ps, pm, _] = config.move_probabilities;
    let u: f64 = rng.gen();
    let kind = if u < ps {
        MoveKind::Split
    } else if u < ps + pm {
        MoveKind::Merge
    } else {
        MoveKind::Flip
    };
    let update = match kind {
        MoveKind::Split => {
            let c = rng.gen_range(0..t.n_cells());
            let ring = &t.cells()[c].ring;
            let line = match &config.mode {
                ProposalMode::Continuous => {
                    let phi = rng.gen::<f64>() * PI;
                    let (lo, hi) = projection_band(ring, phi);
                    Line::new(phi, lo + rng.gen::<f64>() * (hi - lo))
                }
                ProposalMode::LinePool(pool) => {
                    let hits = hitting_lines(pool, ring, t.eps());
                    if hits.is_empty() {
                        return Proposal::reject(kind);
                    }
                    *hits[rng.gen_range(0..hits.len())]
                }
            };
            match split_chord(t, c, &line) {
                Ok(chord) => LocalUpdate::Split { cell: c, chord },
                Err(_) => return Proposal::reject(kind),
            }
        }
        MoveKind::Merge => {
            let nb = t.non_blocking_segments();
            if nb.is_empty() {
                return Proposal::reject(kind);
            }
            LocalUpdate::Merge { segment: nb[rng.gen_range(0..nb.len())] }
        }
        MoveKind::Flip => {
            let ends = t.flippable_ends();
            if ends.is_empty() {
                return Proposal::reject(kind);
            }
            let (segment, end) = ends[rng.gen_range(0..ends.len())];
            LocalUpdate::Flip { segment, end }
        }
    };
    match t.plan(&update) {
        Ok(plan) => {
            let (log_forward, log_reverse) = move_log_densities(t, &plan, config);
            Proposal { kind, plan: Some(plan), log_forward, log_reverse }
        }
        Err(_) => Proposal::reject(kind),
    }
}

/// Log reference-measure factor for the segment change of `plan`.
pub fn reference_log_factor(model: &GibbsModel, plan: &UpdatePlan, mode: &ProposalMode) -> f64 {
    match mode {
        ProposalMode::Continuous => plan.segment_delta as f64 * (model.line_intensity() / PI).ln(),
        ProposalMode::LinePool(_) => 0.0,
    }
}

/// Log Green ratio `−ΔU + ln(reference factor) + rev − fwd`; the move is
/// accepted with probability `min(1, exp(ratio))`.
pub fn acceptance_log_ratio(
    model: &GibbsModel,
    t: &TTess,
    plan: &UpdatePlan,
    log_forward: f64,
    log_reverse: f64,
    mode: &ProposalMode,
) -> f64 {
    let delta = delta_from_plan(model.specs(), t, plan);
    -model.energy_of(&delta) + reference_log_factor(model, plan, mode) + log_reverse - log_forward
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AcceptanceStats {
    /// Indexed by [`MoveKind::index`].
    pub proposed: [u64; 3],
    pub accepted: [u64; 3],
    /// Proposals with no legal target, counted as rejections.
    pub infeasible: [u64; 3],
}

impl AcceptanceStats {
    pub fn rate(&self, k: MoveKind) -> f64 {
        let p = self.proposed[k.index()];
        if p == 0 {
            0.0
        } else {
            self.accepted[k.index()] as f64 / p as f64
        }
    }

    pub fn rates(&self) -> [f64; 3] {
        MoveKind::ALL.map(|k| self.rate(k))
    }

    pub fn overall(&self) -> f64 {
        let p: u64 = self.proposed.iter().sum();
        if p == 0 {
            0.0
        } else {
            self.accepted.iter().sum::<u64>() as f64 / p as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Accepted(MoveKind),
    Rejected(MoveKind),
    Infeasible(MoveKind),
}

/// One Markov chain: current state, cached features and an owned RNG.
pub struct Chain<'m> {
    model: &'m GibbsModel,
    config: ChainConfig,
    state: TTess,
    features: FeatureVector,
    rng: ChaCha8Rng,
    stats: AcceptanceStats,
    steps: u64,
}

impl<'m> Chain<'m> {
    pub fn new(model: &'m GibbsModel, config: ChainConfig, initial: TTess) -> Result<Self, SamplerError> {
        config.validate()?;
        let w = initial.window();
        if !w.holes.is_empty() || !w.is_convex() {
            return Err(SamplerError::Tess(TessError::NonConvexWindow));
        }
        if !initial.is_valid() {
            return Err(SamplerError::Tess(TessError::Invalid("initial state is not a T-tessellation".into())));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(config.stream);
        let features = model.features(&initial);
        Ok(Chain { model, config, state: initial, features, rng, stats: AcceptanceStats::default(), steps: 0 })
    }

    pub fn step(&mut self) -> StepOutcome {
        self.steps += 1;
        let prop = propose_update(&self.state, &self.config, &mut self.rng);
        let k = prop.kind;
        self.stats.proposed[k.index()] += 1;
        let Some(plan) = prop.plan else {
            self.stats.infeasible[k.index()] += 1;
            return StepOutcome::Infeasible(k);
        };
        let delta = delta_from_plan(self.model.specs(), &self.state, &plan);
        let ratio = -self.model.energy_of(&delta)
            + reference_log_factor(self.model, &plan, &self.config.mode)
            + prop.log_reverse
            - prop.log_forward;
        let u: f64 = self.rng.gen();
        if !(ratio >= 0.0 || u.ln() < ratio) {
            return StepOutcome::Rejected(k);
        }
        match self.state.apply_plan(&plan) {
            Ok(next) => {
                self.state = next;
                for (f, d) in self.features.iter_mut().zip(&delta) {
                    *f += d;
                }
                self.stats.accepted[k.index()] += 1;
                StepOutcome::Accepted(k)
            }
            Err(_) => {
                self.stats.infeasible[k.index()] += 1;
                StepOutcome::Infeasible(k)
            }
        }
    }

    pub fn state(&self) -> &TTess {
        &self.state
    }

    /// Running feature vector, updated incrementally.
    pub fn features(&self) -> &[f64] {
        &self.features
    }

    /// Recompute the cached features from scratch.
    pub fn refresh_features(&mut self) {
        self.features = self.model.features(&self.state);
    }

    pub fn stats(&self) -> AcceptanceStats {
        self.stats
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn into_state(self) -> TTess {
        self.state
    }
}

/// Retained states of a chain run with their feature vectors.
#[derive(Debug, Clone)]
pub struct SampleSet {
    pub tessellations: Vec<TTess>,
    pub features: Vec<FeatureVector>,
    pub acceptance: AcceptanceStats,
    pub seed: u64,
    pub stream: u64,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn feature_means(&self) -> Vec<f64> {
        feature_means(&self.features)
    }
}

pub fn feature_means(features: &[FeatureVector]) -> Vec<f64> {
    let d = features.first().map_or(0, Vec::len);
    let mut m = vec![0.0; d];
    for f in features {
        for (a, b) in m.iter_mut().zip(f) {
            *a += b;
        }
    }
    m.iter_mut().for_each(|v| *v /= features.len() as f64);
    m
}

/// Run a chain from the empty tessellation of `window`.
pub fn run(model: &GibbsModel, window: &Polygon, config: &ChainConfig) -> Result<SampleSet, SamplerError> {
    run_from(model, TTess::window_only(window.clone())?, config)
}

pub fn run_from(model: &GibbsModel, initial: TTess, config: &ChainConfig) -> Result<SampleSet, SamplerError> {
    let mut chain = Chain::new(model, config.clone(), initial)?;
    let n = config.n_retained() as usize;
    let mut tessellations = Vec::with_capacity(n);
    let mut features = Vec::with_capacity(n);
    for k in 1..=config.n_steps {
        chain.step();
        if k > config.burn_in && (k - config.burn_in) % config.thin == 0 {
            chain.refresh_features();
            tessellations.push(chain.state().clone());
            features.push(chain.features().to_vec());
        }
    }
    Ok(SampleSet { tessellations, features, acceptance: chain.stats(), seed: config.seed, stream: config.stream })
}

/// Independent chains on streams `0..n_chains` of the configured seed, run
/// concurrently and returned in stream order.
pub fn run_parallel(
    model: &GibbsModel,
    window: &Polygon,
    config: &ChainConfig,
    n_chains: usize,
) -> Result<Vec<SampleSet>, SamplerError> {
    if n_chains == 0 {
        return Err(SamplerError::Config("at least one chain is required".into()));
    }
    (0..n_chains as u64)
        .into_par_iter()
        .map(|i| run(model, window, &ChainConfig { stream: config.stream + i, ..config.clone() }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Segment;
    use crate::statistics::{FeatureSpec, StatKind};
    use crate::tessellation::tests_support::{candidate_updates, random_tess};

    fn square() -> Polygon {
        Polygon::unit_square()
    }

    fn pool_config(lines: Vec<Line>, seed: u64, n: u64) -> ChainConfig {
        ChainConfig { burn_in: 0, mode: ProposalMode::LinePool(lines), ..ChainConfig::new(seed, n) }
    }

    #[test]
    fn config_validation() {
        assert!(ChainConfig::new(1, 10).validate().is_ok());
        let bad = |f: fn(&mut ChainConfig)| {
            let mut c = ChainConfig::new(1, 10);
            f(&mut c);
            c.validate().is_err()
        };
        assert!(bad(|c| c.move_probabilities = [0.5, 0.5, 0.5]));
        assert!(bad(|c| c.move_probabilities = [1.2, -0.2, 0.0]));
        assert!(bad(|c| c.thin = 0));
        assert!(bad(|c| c.burn_in = 11));
        assert!(bad(|c| c.mode = ProposalMode::LinePool(vec![])));
        let c = ChainConfig { burn_in: 3, thin: 2, ..ChainConfig::new(1, 10) };
        assert_eq!(c.n_retained(), 3);
        let text = r#"{"seed": 4, "n_steps": 100, "mode": {"line_pool": [{"angle": 0.5, "offset": 0.2}]}}"#;
        let c: ChainConfig = serde_json::from_str(text).unwrap();
        assert_eq!(c.burn_in, DEFAULT_BURN_IN);
        assert_eq!(c.move_probabilities, DEFAULT_MOVE_PROBABILITIES);
    }

    #[test]
    fn merge_on_empty_state_is_rejected() {
        let t = TTess::window_only(square()).unwrap();
        let cfg = ChainConfig { move_probabilities: [0.0, 1.0, 0.0], ..ChainConfig::new(0, 10) };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = propose_update(&t, &cfg, &mut rng);
        assert_eq!(p.kind, MoveKind::Merge);
        assert!(p.plan.is_none());
    }

    #[test]
    fn single_line_pool_has_two_states() {
        let line = Line::through(Point::new(0.0, 0.3), Point::new(1.0, 0.45));
        let cfg = pool_config(vec![line], 0, 10);
        let t = TTess::window_only(square()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut seen_split = false;
        for _ in 0..50 {
            let p = propose_update(&t, &cfg, &mut rng);
            if let Some(plan) = &p.plan {
                assert_eq!(p.kind, MoveKind::Split);
                assert!(p.log_reverse.is_finite() && p.log_forward.is_finite());
                let next = t.apply_plan(plan).unwrap();
                let inv = t.inverse(plan, &next).unwrap();
                let iplan = next.plan(&inv).unwrap();
                let (f, r) = move_log_densities(&next, &iplan, &cfg);
                assert!((f - p.log_reverse).abs() < 1e-12 && (r - p.log_forward).abs() < 1e-12);
                seen_split = true;
            } else {
                assert_ne!(p.kind, MoveKind::Split);
            }
        }
        assert!(seen_split);
    }

    #[test]
    fn continuous_chords_end_on_cell_boundary() {
        let t = random_tess(5, 20);
        let cfg = ChainConfig { move_probabilities: [1.0, 0.0, 0.0], ..ChainConfig::new(0, 1) };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut ok = 0;
        for _ in 0..10_000 {
            let p = propose_update(&t, &cfg, &mut rng);
            let Some(plan) = p.plan else { continue };
            let LocalUpdate::Split { cell, chord } = plan.update else { unreachable!() };
            let ring = &t.cells()[cell].ring;
            for end in [chord.a, chord.b] {
                let d = (0..ring.len())
                    .map(|i| Segment::new(ring[i], ring[(i + 1) % ring.len()]).distance_to_point(end))
                    .fold(f64::INFINITY, f64::min);
                assert!(d <= t.eps(), "{d}");
            }
            ok += 1;
        }
        assert!(ok > 9_000, "{ok}");
    }

    #[test]
    fn inverse_updates_have_opposite_ratios() {
        let m = GibbsModel::segments_and_angles([2.0, 1.5]).with_line_intensity(3.0).unwrap();
        let cfg = ChainConfig::new(0, 1);
        for seed in 0..15 {
            let t = random_tess(seed, 25);
            for u in candidate_updates(&t, seed as usize * 31 + 7) {
                let Ok(plan) = t.plan(&u) else { continue };
                let (f, r) = move_log_densities(&t, &plan, &cfg);
                let a = acceptance_log_ratio(&m, &t, &plan, f, r, &cfg.mode);
                let next = t.apply_plan(&plan).unwrap();
                let iplan = next.plan(&t.inverse(&plan, &next).unwrap()).unwrap();
                let (fi, ri) = move_log_densities(&next, &iplan, &cfg);
                assert!((fi - r).abs() < 1e-9 && (ri - f).abs() < 1e-9, "{u:?}");
                let b = acceptance_log_ratio(&m, &next, &iplan, fi, ri, &cfg.mode);
                assert!((a + b).abs() < 1e-9, "{u:?} {a} {b}");
            }
        }
    }

    #[test]
    fn post_counts_match_updated_state() {
        for seed in 0..25 {
            let t = random_tess(seed, 30);
            for u in candidate_updates(&t, seed as usize) {
                let Ok(plan) = t.plan(&u) else { continue };
                let next = t.apply_plan(&plan).unwrap();
                assert_eq!(post_counts(&t, &plan), (next.non_blocking_segments().len(), next.flippable_ends().len()));
            }
        }
    }

    #[test]
    fn segment_penalty_favours_merge() {
        let m = GibbsModel::new(vec![FeatureSpec::new(StatKind::NSegments)], vec![8.0]).unwrap();
        let cfg = ChainConfig::new(0, 1);
        let t = TTess::window_only(square()).unwrap();
        let split = t
            .plan(&LocalUpdate::Split { cell: 0, chord: Segment::new(Point::new(0.4, 0.0), Point::new(0.6, 1.0)) })
            .unwrap();
        let (f, r) = move_log_densities(&t, &split, &cfg);
        let a_split = acceptance_log_ratio(&m, &t, &split, f, r, &cfg.mode).min(0.0).exp();
        let next = t.apply_plan(&split).unwrap();
        let merge = next.plan(&t.inverse(&split, &next).unwrap()).unwrap();
        let (f, r) = move_log_densities(&next, &merge, &cfg);
        let a_merge = acceptance_log_ratio(&m, &next, &merge, f, r, &cfg.mode).min(0.0).exp();
        assert!(a_split < a_merge);
    }

    #[test]
    fn rejection_keeps_state() {
        let m = GibbsModel::new(vec![FeatureSpec::new(StatKind::NSegments)], vec![50.0]).unwrap();
        let mut chain = Chain::new(&m, ChainConfig::new(3, 100), random_tess(2, 10)).unwrap();
        for _ in 0..200 {
            let before = chain.state().clone();
            let out = chain.step();
            if !matches!(out, StepOutcome::Accepted(_)) {
                assert_eq!(chain.state(), &before);
                assert_eq!(
                    crate::tessellation::canonical_key(chain.state()),
                    crate::tessellation::canonical_key(&before)
                );
            }
            assert!(m.energy_of(chain.features()).is_finite());
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let m = GibbsModel::segments_and_angles([3.0, 1.0]);
        let cfg = ChainConfig { burn_in: 200, thin: 10, ..ChainConfig::new(42, 700) };
        let a = run(&m, &square(), &cfg).unwrap();
        let b = run(&m, &square(), &cfg).unwrap();
        assert_eq!(a.len(), 50);
        assert_eq!(a.features, b.features);
        assert_eq!(a.tessellations, b.tessellations);
        assert_eq!(a.acceptance, b.acceptance);
        for (t, f) in a.tessellations.iter().zip(&a.features) {
            assert!(t.is_valid());
            for (x, y) in m.features(t).iter().zip(f) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn split_only_chain_never_loses_cells() {
        let m = GibbsModel::segments_and_angles([0.0, 0.0]);
        let cfg = ChainConfig { move_probabilities: [1.0, 0.0, 0.0], burn_in: 0, ..ChainConfig::new(1, 300) };
        let mut chain = Chain::new(&m, cfg, TTess::window_only(square()).unwrap()).unwrap();
        let mut prev = 1;
        for _ in 0..300 {
            chain.step();
            assert!(chain.state().n_cells() >= prev);
            prev = chain.state().n_cells();
        }
    }

    #[test]
    fn parallel_matches_sequential() {
        let m = GibbsModel::segments_and_angles([3.0, 1.0]);
        let cfg = ChainConfig { burn_in: 100, thin: 20, ..ChainConfig::new(7, 500) };
        let one = run_parallel(&m, &square(), &cfg, 1).unwrap();
        assert_eq!(one[0].features, run(&m, &square(), &cfg).unwrap().features);
        let many = run_parallel(&m, &square(), &cfg, 4).unwrap();
        for (i, s) in many.iter().enumerate() {
            assert_eq!(s.stream, i as u64);
            let alone = run(&m, &square(), &ChainConfig { stream: i as u64, ..cfg.clone() }).unwrap();
            assert_eq!(s.features, alone.features);
        }
        assert_ne!(many[0].features, many[1].features);
        assert!(run_parallel(&m, &square(), &cfg, 0).is_err());
    }

    #[test]
    fn rejects_non_convex_window() {
        let l = Polygon::simple(vec![
            Point::new(0.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(2.0, 1.0),
            Point::new(1.0, 1.0),
            Point::new(1.0, 2.0),
            Point::new(0.0, 2.0),
        ])
        .unwrap();
        let m = GibbsModel::segments_and_angles([1.0, 1.0]);
        assert!(run(&m, &l, &ChainConfig::new(0, 10)).is_err());
    }
}
