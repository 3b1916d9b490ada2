//! Gibbs T-tessellation models: energy `⟨θ, s(T)⟩` and density
//! `exp(−energy)` relative to the completely random T-tessellation.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::geometry::{Line, Polygon};
use crate::statistics::{feature_vector, FeatureSpec, FeatureVector, StatKind};
use crate::tessellation::{enumerate_supported, TTess};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelFile", into = "ModelFile")]
pub struct GibbsModel {
    specs: Vec<FeatureSpec>,
    theta: Vec<f64>,
    /// Intensity of the line measure that weighs each new segment in
    /// continuous simulation.
    line_intensity: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    statistics: Vec<FeatureSpec>,
    theta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    line_intensity: Option<f64>,
}

impl TryFrom<ModelFile> for GibbsModel {
    type Error = ModelError;

    fn try_from(f: ModelFile) -> Result<Self, ModelError> {
        let m = GibbsModel::new(f.statistics, f.theta)?;
        match f.line_intensity {
            Some(t) => m.with_line_intensity(t),
            None => Ok(m),
        }
    }
}

impl From<GibbsModel> for ModelFile {
    fn from(m: GibbsModel) -> Self {
        ModelFile {
            statistics: m.specs,
            theta: m.theta,
            line_intensity: (m.line_intensity != 1.0).then_some(m.line_intensity),
        }
    }
}

impl GibbsModel {
    pub fn new(specs: Vec<FeatureSpec>, theta: Vec<f64>) -> Result<Self, ModelError> {
        if specs.is_empty() {
            return Err(ModelError::Empty);
        }
        if specs.len() != theta.len() {
            return Err(ModelError::DimensionMismatch { expected: specs.len(), got: theta.len() });
        }
        let mut seen = BTreeSet::new();
        for s in &specs {
            if !seen.insert(s.name()) {
                return Err(ModelError::DuplicateStatistic(s.name()));
            }
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite);
        }
        Ok(GibbsModel { specs, theta, line_intensity: 1.0 })
    }

    pub fn with_line_intensity(mut self, tau: f64) -> Result<Self, ModelError> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(ModelError::BadIntensity(tau));
        }
        self.line_intensity = tau;
        Ok(self)
    }

    /// Same statistics and line intensity, new parameter.
    pub fn with_theta(&self, theta: Vec<f64>) -> Result<Self, ModelError> {
        Ok(GibbsModel { line_intensity: self.line_intensity, ..GibbsModel::new(self.specs.clone(), theta)? })
    }

    /// `s = (−n_segments, angle_acute)`: segment reward against acute angles.
    pub fn segments_and_angles(theta: [f64; 2]) -> Self {
        GibbsModel::new(
            vec![FeatureSpec::negated(StatKind::NSegments), FeatureSpec::new(StatKind::AngleAcute)],
            theta.to_vec(),
        )
        .expect("well-formed model")
    }

    /// `s = (n_cells, sum_sq_areas, angle_acute, n_long_cells(l0=4))`.
    pub fn landscape(theta: [f64; 4]) -> Self {
        GibbsModel::new(
            vec![
                FeatureSpec::new(StatKind::NCells),
                FeatureSpec::new(StatKind::SumSqAreas),
                FeatureSpec::new(StatKind::AngleAcute),
                FeatureSpec::new(StatKind::NLongCells { l0: 4.0 }),
            ],
            theta.to_vec(),
        )
        .expect("well-formed model")
    }

    pub fn specs(&self) -> &[FeatureSpec] {
        &self.specs
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn line_intensity(&self) -> f64 {
        self.line_intensity
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn features(&self, t: &TTess) -> FeatureVector {
        feature_vector(&self.specs, t)
    }

    pub fn energy_of(&self, features: &[f64]) -> f64 {
        self.theta.iter().zip(features).map(|(a, b)| a * b).sum()
    }

    pub fn energy(&self, t: &TTess) -> f64 {
        self.energy_of(&self.features(t))
    }

    pub fn log_unnormalized_density(&self, t: &TTess) -> f64 {
        -self.energy(t)
    }

    /// Law of the model restricted to the tessellations supported by
    /// `lines`, each weighted `exp(−energy)` against counting measure.
    pub fn exact_distribution(&self, window: &Polygon, lines: &[Line]) -> Result<Vec<(TTess, f64)>, ModelError> {
        let states = enumerate_supported(window, lines)?;
        let logw: Vec<f64> = states.iter().map(|t| self.log_unnormalized_density(t)).collect();
        let probs = normalize_log_weights(&logw);
        Ok(states.into_iter().zip(probs).collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("models serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        serde_json::from_str(text).map_err(|e| ModelError::Format(e.to_string()))
    }
}

/// `exp(w_i) / Σ exp(w_j)` computed stably.
pub fn normalize_log_weights(logw: &[f64]) -> Vec<f64> {
    let mx = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|v| (v - mx).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|v| v / z).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point, Segment};
    use crate::statistics::{angle_statistic, num_internal_segments};
    use crate::tessellation::tests_support::random_tess;

    fn pool(n: usize) -> Vec<Line> {
        let all = [
            Line::through(Point::new(0.0, 0.3), Point::new(1.0, 0.45)),
            Line::through(Point::new(0.6, 0.0), Point::new(0.4, 1.0)),
            Line::through(Point::new(0.0, 0.8), Point::new(1.0, 0.55)),
        ];
        all[..n].to_vec()
    }

    #[test]
    fn energy_examples() {
        let t = random_tess(3, 15);
        let zero = GibbsModel::segments_and_angles([0.0, 0.0]);
        assert_eq!(zero.energy(&t), 0.0);
        let m = GibbsModel::segments_and_angles([31.0, 5.0]);
        let chord =
            TTess::from_segments(Polygon::unit_square(), &[Segment::new(Point::new(0.5, 0.0), Point::new(0.5, 1.0))])
                .unwrap();
        assert_eq!(m.features(&chord)[0], -1.0);
        assert!((m.energy(&chord) + 31.0).abs() < 1e-12);
        assert!((m.log_unnormalized_density(&chord) - 31.0).abs() < 1e-12);
        for seed in 0..10 {
            let t = random_tess(seed, 25);
            let parts = -31.0 * num_internal_segments(&t) as f64 + 5.0 * angle_statistic(&t);
            assert!((m.energy(&t) - parts).abs() < 1e-9);
            assert_eq!(m.log_unnormalized_density(&t), -m.energy(&t));
        }
    }

    #[test]
    fn rejects_bad_models() {
        let s = FeatureSpec::new(StatKind::NCells);
        assert_eq!(GibbsModel::new(vec![], vec![]), Err(ModelError::Empty));
        assert!(matches!(GibbsModel::new(vec![s], vec![1.0, 2.0]), Err(ModelError::DimensionMismatch { .. })));
        assert!(matches!(GibbsModel::new(vec![s, s], vec![1.0, 2.0]), Err(ModelError::DuplicateStatistic(_))));
        assert_eq!(GibbsModel::new(vec![s], vec![f64::NAN]), Err(ModelError::NonFinite));
        assert!(GibbsModel::new(vec![s], vec![1.0]).unwrap().with_line_intensity(0.0).is_err());
    }

    #[test]
    fn json_round_trip() {
        let m = GibbsModel::landscape([-1.98, 182.0, 2.22, 0.27]);
        assert_eq!(GibbsModel::from_json(&m.to_json()).unwrap(), m);
        let m = m.with_line_intensity(0.25).unwrap();
        assert_eq!(GibbsModel::from_json(&m.to_json()).unwrap(), m);
        let parsed = GibbsModel::from_json(
            r#"{"statistics": [{"name": "n_segments", "sign": -1}, "angle_acute"], "theta": [31, 5]}"#,
        )
        .unwrap();
        assert_eq!(parsed, GibbsModel::segments_and_angles([31.0, 5.0]));
        assert!(GibbsModel::from_json(r#"{"statistics": ["n_cells"], "theta": [1, 2]}"#).is_err());
    }

    #[test]
    fn exact_distribution_examples() {
        let w = Polygon::unit_square();
        let zero = GibbsModel::new(vec![FeatureSpec::new(StatKind::NCells)], vec![0.0]).unwrap();
        let d = zero.exact_distribution(&w, &pool(1)).unwrap();
        assert_eq!(d.len(), 2);
        for (_, p) in &d {
            assert!((p - 0.5).abs() < 1e-15);
        }
        let d = zero.exact_distribution(&w, &pool(2)).unwrap();
        assert_eq!(d.len(), 7);
        for (_, p) in &d {
            assert!((p - 1.0 / 7.0).abs() < 1e-15);
        }
        // Large segment penalty: mass on the empty state, pairwise ratios exp(−Δθ·Δs).
        let m = GibbsModel::new(vec![FeatureSpec::new(StatKind::NSegments)], vec![12.0]).unwrap();
        let d = m.exact_distribution(&w, &pool(3)).unwrap();
        let empty = d.iter().find(|(t, _)| t.n_internal_segments() == 0).unwrap().1;
        assert!(empty > 0.999);
        for (t, p) in &d {
            let ratio = (-12.0 * t.n_internal_segments() as f64).exp();
            assert!((p / empty - ratio).abs() <= 1e-12 * ratio.max(1e-300) + 1e-300);
        }
        assert!(m.exact_distribution(&w, &[Line::new(0.1, 0.5); 7]).is_err());
    }

    #[test]
    fn distribution_properties() {
        let w = Polygon::unit_square();
        for n in 1..=3 {
            let lines = pool(n);
            for theta in [[0.0, 0.0, 0.0, 0.0], [1.0, 3.0, 0.5, 0.2], [-2.0, 10.0, 2.0, -1.0]] {
                let m = GibbsModel::landscape(theta);
                let d = m.exact_distribution(&w, &lines).unwrap();
                let total: f64 = d.iter().map(|x| x.1).sum();
                assert!((total - 1.0).abs() < 1e-12);
                // Shifting every statistic by a constant leaves the law unchanged.
                let shifted: Vec<f64> = d.iter().map(|(t, _)| -(m.energy(t) + m.energy_of(&[7.0; 4]))).collect();
                for ((_, p), q) in d.iter().zip(normalize_log_weights(&shifted)) {
                    assert!((p - q).abs() < 1e-12);
                }
            }
            // One-parameter family: the mean statistic strictly decreases in θ.
            let mut prev = f64::INFINITY;
            for th in [-2.0, -0.5, 0.0, 0.7, 3.0] {
                let m = GibbsModel::new(vec![FeatureSpec::new(StatKind::AngleAcute)], vec![th]).unwrap();
                let mean: f64 =
                    m.exact_distribution(&w, &lines).unwrap().iter().map(|(t, p)| p * angle_statistic(t)).sum();
                assert!(mean < prev);
                prev = mean;
            }
        }
    }
}
