//! Fixtures shared by the benchmarks.

use ttess::inference::sample_features;
use ttess::sampler::{run, ChainConfig};
use ttess::{FeatureVector, GibbsModel, Polygon, TTess};

pub const LANDSCAPE_THETA: [f64; 4] = [-1.98, 182.0, 2.22, 0.27];

pub fn landscape_model() -> GibbsModel {
    GibbsModel::landscape(LANDSCAPE_THETA)
}

/// A state of the landscape model after a short burn-in, about thirty cells.
pub fn landscape_state(seed: u64) -> TTess {
    let cfg = ChainConfig { burn_in: 20_000, ..ChainConfig::new(seed, 20_001) };
    run(&landscape_model(), &Polygon::unit_square(), &cfg).expect("chain runs").tessellations.pop().expect("one draw")
}

/// Thinned feature sample of the landscape model, for MCL timings.
pub fn landscape_sample(n: usize) -> Vec<FeatureVector> {
    let model = landscape_model();
    let cfg = ChainConfig { burn_in: 5_000, thin: 50, ..ChainConfig::new(1, 0) };
    let start = landscape_state(1);
    sample_features(&model, &start, &cfg, n, 1).expect("chain runs").0
}
