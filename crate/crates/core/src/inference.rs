//! Monte Carlo maximum likelihood for Gibbs T-tessellation models.
//!
//! Against a reference parameter ψ with a sample `T_1..T_n` drawn under ψ,
//! the log-likelihood ratio is estimated by
//! `l̂(θ) = ⟨ψ−θ, s_obs⟩ − log((1/n) Σ exp⟨ψ−θ, s_i⟩)`,
//! which is maximized by a dogleg trust region; ψ is then moved to the
//! maximizer and the sample redrawn until ψ settles.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::InferenceError;
use crate::model::GibbsModel;
use crate::sampler::{run_from, ChainConfig, SampleSet};
use crate::statistics::FeatureVector;
use crate::tessellation::TTess;

/// `log((1/n) Σ exp(a_i))`.
fn log_mean_exp(a: &[f64]) -> f64 {
    let mx = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if mx == f64::NEG_INFINITY {
        return mx;
    }
    let s: f64 = a.iter().map(|v| (v - mx).exp()).sum();
    mx + (s / a.len() as f64).ln()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Exponents `⟨ψ−θ, s_i⟩` of the importance weights.
fn log_weights(theta: &[f64], psi: &[f64], sample: &[FeatureVector]) -> Vec<f64> {
    let d: Vec<f64> = psi.iter().zip(theta).map(|(p, t)| p - t).collect();
    sample.iter().map(|s| dot(&d, s)).collect()
}

/// Normalized importance weights `w_i ∝ exp⟨ψ−θ, s_i⟩`.
pub fn importance_weights(theta: &[f64], psi: &[f64], sample: &[FeatureVector]) -> Vec<f64> {
    crate::model::normalize_log_weights(&log_weights(theta, psi, sample))
}

/// Kish effective sample size of the importance weights at θ.
pub fn effective_sample_size(theta: &[f64], psi: &[f64], sample: &[FeatureVector]) -> f64 {
    1.0 / importance_weights(theta, psi, sample).iter().map(|w| w * w).sum::<f64>()
}

pub fn mcl_value(theta: &[f64], psi: &[f64], observed: &[f64], sample: &[FeatureVector]) -> f64 {
    let d: Vec<f64> = psi.iter().zip(theta).map(|(p, t)| p - t).collect();
    dot(&d, observed) - log_mean_exp(&log_weights(theta, psi, sample))
}

fn weighted_mean(w: &[f64], sample: &[FeatureVector]) -> DVector<f64> {
    let dim = sample[0].len();
    let mut m = DVector::zeros(dim);
    for (wi, s) in w.iter().zip(sample) {
        for j in 0..dim {
            m[j] += wi * s[j];
        }
    }
    m
}

/// `−s_obs + Σ w_i s_i`.
pub fn mcl_gradient(theta: &[f64], psi: &[f64], observed: &[f64], sample: &[FeatureVector]) -> DVector<f64> {
    let w = importance_weights(theta, psi, sample);
    weighted_mean(&w, sample) - DVector::from_column_slice(observed)
}

/// Minus the importance-weighted covariance of the sample features.
pub fn mcl_hessian(theta: &[f64], psi: &[f64], _observed: &[f64], sample: &[FeatureVector]) -> DMatrix<f64> {
    let w = importance_weights(theta, psi, sample);
    -weighted_covariance(&w, sample)
}

fn weighted_covariance(w: &[f64], sample: &[FeatureVector]) -> DMatrix<f64> {
    let dim = sample[0].len();
    let mu = weighted_mean(w, sample);
    let mut c = DMatrix::zeros(dim, dim);
    for (wi, s) in w.iter().zip(sample) {
        let r = DVector::from_column_slice(s) - &mu;
        c += (&r * r.transpose()) * *wi;
    }
    (&c + c.transpose()) * 0.5
}

/// Unbiased sample covariance of the feature vectors: the Fisher
/// information of the exponential family at the sampling parameter.
pub fn fisher_information(sample: &[FeatureVector]) -> Result<DMatrix<f64>, InferenceError> {
    if sample.len() < 2 {
        return Err(InferenceError::Config("at least two samples are needed".into()));
    }
    let n = sample.len() as f64;
    let dim = sample[0].len();
    let mean: Vec<f64> = (0..dim).map(|j| sample.iter().map(|s| s[j]).sum::<f64>() / n).collect();
    let mut c = DMatrix::<f64>::zeros(dim, dim);
    for s in sample {
        for i in 0..dim {
            for j in 0..=i {
                c[(i, j)] += (s[i] - mean[i]) * (s[j] - mean[j]);
            }
        }
    }
    Ok(DMatrix::from_fn(dim, dim, |i, j| c[(i.max(j), i.min(j))] / (n - 1.0)))
}

/// A smooth function to maximize with analytic derivatives.
pub trait Objective {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> DVector<f64>;
    fn hessian(&self, x: &[f64]) -> DMatrix<f64>;
}

/// The Monte Carlo log-likelihood ratio for a fixed sample.
pub struct Mcl<'a> {
    pub psi: &'a [f64],
    pub observed: &'a [f64],
    pub sample: &'a [FeatureVector],
}

impl Objective for Mcl<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        mcl_value(x, self.psi, self.observed, self.sample)
    }
    fn gradient(&self, x: &[f64]) -> DVector<f64> {
        mcl_gradient(x, self.psi, self.observed, self.sample)
    }
    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        mcl_hessian(x, self.psi, self.observed, self.sample)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustRegionConfig {
    /// Initial radius in scaled coordinates.
    pub radius0: f64,
    pub min_radius: f64,
    pub max_radius: f64,
    /// Accept a step when actual/predicted improvement exceeds this.
    pub eta: f64,
    /// Stop when the scaled gradient norm falls below this.
    pub grad_tol: f64,
    pub max_iterations: usize,
}

impl Default for TrustRegionConfig {
    fn default() -> Self {
        TrustRegionConfig {
            radius0: 1.0,
            min_radius: 1e-10,
            max_radius: 1e3,
            eta: 0.1,
            grad_tol: 1e-8,
            max_iterations: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrustRegionResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
}

/// Dogleg step minimizing `gᵀp + ½ pᵀBp` within `‖p‖ ≤ r`.
fn dogleg(g: &DVector<f64>, b: &DMatrix<f64>, r: f64) -> DVector<f64> {
    let gbg = (g.transpose() * b * g)[0];
    let gg = g.norm_squared();
    let cauchy = |r: f64| -> DVector<f64> {
        let tau = if gbg <= 0.0 { 1.0 } else { (gg.powf(1.5) / (r * gbg)).min(1.0) };
        -g * (tau * r / gg.sqrt())
    };
    let Some(ch) = b.clone().cholesky() else {
        return cauchy(r);
    };
    let pb = -ch.solve(g);
    if pb.norm() <= r {
        return pb;
    }
    let pu = -g * (gg / gbg);
    let nu = pu.norm();
    if nu >= r {
        return pu * (r / nu);
    }
    // Point on pu + t (pb − pu) at distance r.
    let d = &pb - &pu;
    let (a, b2, c) = (d.norm_squared(), 2.0 * pu.dot(&d), nu * nu - r * r);
    let t = (-b2 + (b2 * b2 - 4.0 * a * c).sqrt()) / (2.0 * a);
    pu + d * t
}

/// Maximize `f` from `x0`. Steps are measured in coordinates divided by
/// `scale` componentwise.
pub fn trust_region_maximize(
    f: &dyn Objective,
    x0: &[f64],
    scale: &[f64],
    cfg: &TrustRegionConfig,
) -> Result<TrustRegionResult, InferenceError> {
    let n = x0.len();
    let sc = DVector::from_column_slice(scale);
    let mut x = x0.to_vec();
    let mut fx = f.value(&x);
    if !fx.is_finite() {
        return Err(InferenceError::NonFinite);
    }
    let mut r = cfg.radius0;
    let mut iterations = 0;
    loop {
        // Minimize −f in z = x / scale.
        let g = -f.gradient(&x).component_mul(&sc);
        let h = f.hessian(&x);
        let b = DMatrix::from_fn(n, n, |i, j| -h[(i, j)] * sc[i] * sc[j]);
        let gn = g.norm();
        if !gn.is_finite() || b.iter().any(|v| !v.is_finite()) {
            return Err(InferenceError::NonFinite);
        }
        if gn < cfg.grad_tol || r < cfg.min_radius || iterations >= cfg.max_iterations {
            return Ok(TrustRegionResult { value: fx, iterations, grad_norm: gn, converged: gn < cfg.grad_tol, x });
        }
        iterations += 1;
        let p = dogleg(&g, &b, r);
        let pred = -(g.dot(&p) + 0.5 * (p.transpose() * &b * &p)[0]);
        let trial: Vec<f64> = (0..n).map(|i| x[i] + p[i] * sc[i]).collect();
        let ft = f.value(&trial);
        let actual = ft - fx;
        let rho = if pred > 0.0 { actual / pred } else { -1.0 };
        if !ft.is_finite() || rho < 0.25 {
            r *= 0.5;
        } else if rho > 0.75 && p.norm() >= 0.99 * r {
            r = (2.0 * r).min(cfg.max_radius);
        }
        if ft.is_finite() && rho > cfg.eta {
            x = trial;
            fx = ft;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmlConfig {
    pub psi0: Vec<f64>,
    pub sample_size: usize,
    #[serde(default = "default_outer")]
    pub max_outer_iterations: usize,
    #[serde(default)]
    pub trust_region: TrustRegionConfig,
    /// Outer loop stops when every `|Δψ_j| / (|ψ_j| + 1)` is below this.
    #[serde(default = "default_conv")]
    pub convergence_tol: f64,
    #[serde(default)]
    pub region: SampleRegion,
    /// Chain settings per outer iteration; `n_steps` is recomputed from
    /// `burn_in`, `thin` and the sample size, and iteration `k` uses
    /// stream `chain.stream + k`.
    pub chain: ChainConfig,
    #[serde(default = "default_chains")]
    pub n_chains: usize,
}

fn default_outer() -> usize {
    20
}
fn default_conv() -> f64 {
    1e-2
}
fn default_chains() -> usize {
    1
}

impl McmlConfig {
    pub fn new(psi0: Vec<f64>, sample_size: usize, chain: ChainConfig) -> Self {
        McmlConfig {
            psi0,
            sample_size,
            max_outer_iterations: default_outer(),
            trust_region: TrustRegionConfig::default(),
            convergence_tol: default_conv(),
            region: SampleRegion::default(),
            chain,
            n_chains: 1,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<(), InferenceError> {
        if self.psi0.len() != dim {
            return Err(InferenceError::Config(format!("psi0 has {} components, model has {dim}", self.psi0.len())));
        }
        if self.psi0.iter().any(|v| !v.is_finite()) {
            return Err(InferenceError::NonFinite);
        }
        if self.sample_size < 2 {
            return Err(InferenceError::Config("sample size must be at least 2".into()));
        }
        if !(self.convergence_tol > 0.0 && self.region.radius > 0.0) {
            return Err(InferenceError::Config("tolerances must be positive".into()));
        }
        if self.region.max_radius < self.region.radius {
            return Err(InferenceError::Config("max_radius must be at least the starting radius".into()));
        }
        if !(0.0..1.0).contains(&self.region.min_ess_fraction) {
            return Err(InferenceError::Config("min_ess_fraction must lie in [0, 1)".into()));
        }
        let tr = &self.trust_region;
        if !(tr.radius0 > 0.0 && tr.min_radius > 0.0 && tr.max_radius >= tr.radius0 && tr.eta > 0.0 && tr.eta < 1.0) {
            return Err(InferenceError::Config("invalid trust-region settings".into()));
        }
        if self.n_chains == 0 || self.max_outer_iterations == 0 {
            return Err(InferenceError::Config("need at least one chain and one iteration".into()));
        }
        if self.chain.thin == 0 {
            return Err(InferenceError::Config("thin must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterStep {
    pub psi: Vec<f64>,
    pub radius: f64,
    pub limited_by: Option<RegionLimit>,
    pub theta: Vec<f64>,
    pub mcl_value: f64,
    pub effective_sample_size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub theta_hat: Vec<f64>,
    pub observed_features: FeatureVector,
    /// Inverse Fisher information at `theta_hat`.
    pub covariance: Vec<Vec<f64>>,
    pub standard_errors: Vec<f64>,
    pub mcse: Vec<f64>,
    pub confidence95: Vec<(f64, f64)>,
    pub trace: Vec<OuterStep>,
    pub converged: bool,
    /// Reference parameter of the last sample.
    pub psi: Vec<f64>,
    pub acceptance_rates: [f64; 3],
}

/// Inverse of a symmetric positive definite matrix.
fn spd_inverse(m: &DMatrix<f64>, what: &'static str) -> Result<DMatrix<f64>, InferenceError> {
    let inv = m.clone().cholesky().ok_or(InferenceError::Singular(what))?.inverse();
    Ok((&inv + inv.transpose()) * 0.5)
}

/// Sandwich estimate `H⁻¹ V H⁻¹ / n` of the Monte Carlo covariance of the
/// MCL maximizer, V the second moment of the per-sample score
/// contributions `(w_i/w̄)(s_i − μ_w)`.
pub fn mc_covariance(theta: &[f64], psi: &[f64], sample: &[FeatureVector]) -> Result<DMatrix<f64>, InferenceError> {
    let n = sample.len();
    let w = importance_weights(theta, psi, sample);
    let mu = weighted_mean(&w, sample);
    let dim = mu.len();
    let mut v = DMatrix::zeros(dim, dim);
    for (wi, s) in w.iter().zip(sample) {
        let u = (DVector::from_column_slice(s) - &mu) * (wi * n as f64);
        v += &u * u.transpose();
    }
    v /= n as f64;
    let hinv = spd_inverse(&weighted_covariance(&w, sample), "MCL Hessian")?;
    let c = &hinv * v * &hinv / n as f64;
    Ok((&c + c.transpose()) * 0.5)
}

/// Per-component Monte Carlo standard errors of the MCL maximizer.
pub fn mc_standard_error(theta: &[f64], psi: &[f64], sample: &[FeatureVector]) -> Result<Vec<f64>, InferenceError> {
    let c = mc_covariance(theta, psi, sample)?;
    Ok((0..c.nrows()).map(|i| c[(i, i)].max(0.0).sqrt()).collect())
}

/// Wald intervals `θ_j ± z SE_j` at the given two-sided level.
pub fn confidence_set(theta: &[f64], standard_errors: &[f64], level: f64) -> Vec<(f64, f64)> {
    let z = Normal::standard().inverse_cdf(0.5 + level / 2.0);
    theta.iter().zip(standard_errors).map(|(t, s)| (t - z * s, t + z * s)).collect()
}

fn scale_of(psi: &[f64]) -> Vec<f64> {
    psi.iter().map(|p| p.abs() + 1.0).collect()
}

/// Where the importance-sampled MCL is trusted around ψ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleRegion {
    /// Largest scaled distance `‖(θ − ψ) / (|ψ| + 1)‖` from ψ. In [`fit`]
    /// this is the starting radius: it doubles (up to `max_radius`) after
    /// a step stopped by the radius and halves (down to the start) after a
    /// step stopped by the effective sample size.
    pub radius: f64,
    pub max_radius: f64,
    /// Smallest effective sample size, as a fraction of `n`, at the
    /// returned point.
    pub min_ess_fraction: f64,
}

impl Default for SampleRegion {
    fn default() -> Self {
        SampleRegion { radius: 0.05, max_radius: 1.0, min_ess_fraction: 0.2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionLimit {
    Radius,
    EffectiveSampleSize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MclMaximum {
    pub x: Vec<f64>,
    pub value: f64,
    /// Set when the unconstrained maximizer lay outside the sample region
    /// and `x` was pulled back towards ψ.
    pub limited_by: Option<RegionLimit>,
    pub optimizer: TrustRegionResult,
}

impl MclMaximum {
    pub fn clipped(&self) -> bool {
        self.limited_by.is_some()
    }
}

/// Maximize the MCL for one sample, then keep the result inside the
/// sample region by moving it back along the segment from ψ (the concave
/// MCL increases along that segment towards the unconstrained maximizer).
pub fn maximize_mcl(
    psi: &[f64],
    observed: &[f64],
    sample: &[FeatureVector],
    tr: &TrustRegionConfig,
    region: &SampleRegion,
) -> Result<MclMaximum, InferenceError> {
    let scale = scale_of(psi);
    let f = Mcl { psi, observed, sample };
    let opt = trust_region_maximize(&f, psi, &scale, tr)?;
    let at = |t: f64| -> Vec<f64> { opt.x.iter().zip(psi).map(|(x, p)| p + t * (x - p)).collect() };
    let dist = opt.x.iter().zip(psi).zip(&scale).map(|((x, p), s)| ((x - p) / s).powi(2)).sum::<f64>().sqrt();
    let mut limited_by = (dist > region.radius).then_some(RegionLimit::Radius);
    let mut t = if dist > region.radius { region.radius / dist } else { 1.0 };
    let need = region.min_ess_fraction * sample.len() as f64;
    if effective_sample_size(&at(t), psi, sample) < need {
        // ESS is n at ψ; bisect for the furthest acceptable point.
        let (mut lo, mut hi) = (0.0, t);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if effective_sample_size(&at(mid), psi, sample) >= need {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        t = lo;
        limited_by = Some(RegionLimit::EffectiveSampleSize);
    }
    let x = if limited_by.is_some() { at(t) } else { opt.x.clone() };
    Ok(MclMaximum { value: f.value(&x), x, limited_by, optimizer: opt })
}

/// Draw `n` feature vectors under `model` from `initial`, split across
/// `n_chains` independent streams.
pub fn sample_features(
    model: &GibbsModel,
    initial: &TTess,
    chain: &ChainConfig,
    n: usize,
    n_chains: usize,
) -> Result<(Vec<FeatureVector>, [f64; 3]), InferenceError> {
    let per = n.div_ceil(n_chains);
    let sets: Vec<SampleSet> = (0..n_chains as u64)
        .into_par_iter()
        .map(|i| {
            let count = per.min(n - (i as usize * per).min(n)) as u64;
            let cfg = ChainConfig {
                stream: chain.stream * n_chains as u64 + i,
                n_steps: chain.burn_in + count * chain.thin,
                ..chain.clone()
            };
            run_from(model, initial.clone(), &cfg)
        })
        .collect::<Result<_, _>>()?;
    let rates = sets[0].acceptance.rates();
    Ok((sets.into_iter().flat_map(|s| s.features).collect(), rates))
}

/// Iterated MCML fit of `model`'s statistics to `observed`. Each outer
/// iteration samples at the current ψ (chains started from the observed
/// tessellation), maximizes the MCL and moves ψ to the maximizer.
pub fn fit(model: &GibbsModel, observed: &TTess, config: &McmlConfig) -> Result<FitResult, InferenceError> {
    config.validate(model.dim())?;
    let obs = model.features(observed);
    let mut psi = config.psi0.clone();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut last: Option<(Vec<FeatureVector>, Vec<f64>, [f64; 3])> = None;
    let mut region = config.region;
    for k in 0..config.max_outer_iterations {
        let m = model.with_theta(psi.clone())?;
        let chain = ChainConfig { stream: config.chain.stream + k as u64, ..config.chain.clone() };
        let (sample, rates) = sample_features(&m, observed, &chain, config.sample_size, config.n_chains)?;
        let res = maximize_mcl(&psi, &obs, &sample, &config.trust_region, &region)?;
        trace.push(OuterStep {
            psi: psi.clone(),
            radius: region.radius,
            limited_by: res.limited_by,
            theta: res.x.clone(),
            mcl_value: res.value,
            effective_sample_size: effective_sample_size(&res.x, &psi, &sample),
        });
        match res.limited_by {
            Some(RegionLimit::Radius) => region.radius = (2.0 * region.radius).min(config.region.max_radius),
            Some(RegionLimit::EffectiveSampleSize) => region.radius = (0.5 * region.radius).max(config.region.radius),
            None => {}
        }
        let settled = !res.clipped()
            && res.x.iter().zip(&psi).all(|(t, p)| (t - p).abs() / (p.abs() + 1.0) < config.convergence_tol);
        last = Some((sample, res.x.clone(), rates));
        if settled {
            converged = true;
            break;
        }
        psi = res.x;
    }
    let (sample, theta_hat, acceptance_rates) = last.expect("at least one outer iteration");
    let w = importance_weights(&theta_hat, &psi, &sample);
    let info = weighted_covariance(&w, &sample);
    let covariance = spd_inverse(&info, "Fisher information")?;
    let standard_errors: Vec<f64> = (0..covariance.nrows()).map(|i| covariance[(i, i)].max(0.0).sqrt()).collect();
    let mcse = mc_standard_error(&theta_hat, &psi, &sample)?;
    let confidence95 = confidence_set(&theta_hat, &standard_errors, 0.95);
    Ok(FitResult {
        covariance: (0..covariance.nrows()).map(|i| covariance.row(i).iter().cloned().collect()).collect(),
        theta_hat,
        observed_features: obs,
        standard_errors,
        mcse,
        confidence95,
        trace,
        converged,
        psi,
        acceptance_rates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sample(seed: u64, n: usize, d: usize, spread: f64) -> Vec<FeatureVector> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| (0..d).map(|j| rng.gen_range(-spread..spread) + j as f64).collect()).collect()
    }

    fn open_region(radius: f64) -> SampleRegion {
        SampleRegion { radius, max_radius: radius, min_ess_fraction: 0.0 }
    }

    #[test]
    fn mcl_value_examples() {
        let sample = random_sample(1, 30, 3, 5.0);
        let psi = [0.3, -1.0, 2.0];
        let obs = [0.5, 1.5, 2.5];
        assert_eq!(mcl_value(&psi, &psi, &obs, &sample), 0.0);
        let two = vec![vec![0.0], vec![1.0]];
        let v = mcl_value(&[1.0], &[0.0], &[1.0], &two);
        // Exponents U_ψ − U_θ are 0 and −1.
        assert!((v - (-1.0 - ((1.0 + (-1f64).exp()) / 2.0).ln())).abs() < 1e-15);
        // Naive evaluation where nothing overflows.
        let theta = [0.1, -0.7, 2.2];
        let naive = {
            let d: Vec<f64> = psi.iter().zip(&theta).map(|(p, t)| p - t).collect();
            let m: f64 = sample.iter().map(|s| dot(&d, s).exp()).sum::<f64>() / sample.len() as f64;
            dot(&d, &obs) - m.ln()
        };
        assert!((mcl_value(&theta, &psi, &obs, &sample) - naive).abs() < 1e-10);
        // Large energies stay finite.
        let big: Vec<FeatureVector> = (0..10).map(|i| vec![300.0 + i as f64]).collect();
        assert!(mcl_value(&[5.0], &[0.0], &[305.0], &big).is_finite());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for seed in 0..20 {
            let sample = random_sample(seed, 40, 3, 2.0);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
            let psi: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let theta: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let obs: Vec<f64> = (0..3).map(|j| rng.gen_range(-1.0..1.0) + j as f64).collect();
            let g = mcl_gradient(&theta, &psi, &obs, &sample);
            let h = mcl_hessian(&theta, &psi, &obs, &sample);
            let step = 1e-5;
            for j in 0..3 {
                let mut up = theta.clone();
                let mut dn = theta.clone();
                up[j] += step;
                dn[j] -= step;
                let fd = (mcl_value(&up, &psi, &obs, &sample) - mcl_value(&dn, &psi, &obs, &sample)) / (2.0 * step);
                assert!((fd - g[j]).abs() <= 1e-5 * g[j].abs().max(1.0), "{fd} {}", g[j]);
                let gu = mcl_gradient(&up, &psi, &obs, &sample);
                let gd = mcl_gradient(&dn, &psi, &obs, &sample);
                for i in 0..3 {
                    let fd = (gu[i] - gd[i]) / (2.0 * step);
                    assert!((fd - h[(i, j)]).abs() <= 1e-5 * h[(i, j)].abs().max(1.0));
                }
            }
            assert_eq!(h, h.transpose());
            assert!(h.symmetric_eigenvalues().iter().all(|&e| e <= 1e-8));
        }
    }

    #[test]
    fn gradient_at_psi_uses_plain_mean() {
        let sample = random_sample(4, 25, 2, 3.0);
        let psi = [1.0, 2.0];
        let obs = [0.2, 0.9];
        let g = mcl_gradient(&psi, &psi, &obs, &sample);
        for j in 0..2 {
            let mean = sample.iter().map(|s| s[j]).sum::<f64>() / 25.0;
            assert!((g[j] - (mean - obs[j])).abs() < 1e-12);
        }
    }

    #[test]
    fn fisher_information_examples() {
        let constant = vec![vec![2.0, 3.0]; 5];
        assert_eq!(fisher_information(&constant).unwrap(), DMatrix::zeros(2, 2));
        let bits = vec![vec![0.0], vec![1.0], vec![0.0], vec![1.0]];
        assert!((fisher_information(&bits).unwrap()[(0, 0)] - 1.0 / 3.0).abs() < 1e-15);
        let s = random_sample(8, 50, 3, 4.0);
        let f = fisher_information(&s).unwrap();
        let mean: Vec<f64> = (0..3).map(|j| s.iter().map(|v| v[j]).sum::<f64>() / 50.0).collect();
        for i in 0..3 {
            for j in 0..3 {
                let c = s.iter().map(|v| (v[i] - mean[i]) * (v[j] - mean[j])).sum::<f64>() / 49.0;
                assert!((f[(i, j)] - c).abs() < 1e-12);
            }
        }
    }

    struct Quadratic;
    impl Objective for Quadratic {
        fn value(&self, x: &[f64]) -> f64 {
            -(2.0 * (x[0] - 1.0).powi(2) + (x[0] - 1.0) * (x[1] + 2.0) + 3.0 * (x[1] + 2.0).powi(2))
        }
        fn gradient(&self, x: &[f64]) -> DVector<f64> {
            DVector::from_vec(vec![-(4.0 * (x[0] - 1.0) + (x[1] + 2.0)), -((x[0] - 1.0) + 6.0 * (x[1] + 2.0))])
        }
        fn hessian(&self, _: &[f64]) -> DMatrix<f64> {
            DMatrix::from_row_slice(2, 2, &[-4.0, -1.0, -1.0, -6.0])
        }
    }

    struct Quartic;
    impl Objective for Quartic {
        fn value(&self, x: &[f64]) -> f64 {
            -(x[0] - 3.0).powi(4)
        }
        fn gradient(&self, x: &[f64]) -> DVector<f64> {
            DVector::from_vec(vec![-4.0 * (x[0] - 3.0).powi(3)])
        }
        fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
            DMatrix::from_vec(1, 1, vec![-12.0 * (x[0] - 3.0).powi(2)])
        }
    }

    #[test]
    fn trust_region_examples() {
        let cfg = TrustRegionConfig { radius0: 10.0, ..Default::default() };
        let r = trust_region_maximize(&Quadratic, &[0.0, 0.0], &[1.0, 1.0], &cfg).unwrap();
        assert!(r.iterations <= 2);
        assert!((r.x[0] - 1.0).abs() < 1e-12 && (r.x[1] + 2.0).abs() < 1e-12);
        let cfg = TrustRegionConfig { grad_tol: 1e-14, ..Default::default() };
        let r = trust_region_maximize(&Quartic, &[0.0], &[1.0], &cfg).unwrap();
        let grid_best = (0..=60_000)
            .map(|i| i as f64 * 1e-4)
            .max_by(|a, b| Quartic.value(&[*a]).total_cmp(&Quartic.value(&[*b])))
            .unwrap();
        assert!((r.x[0] - grid_best).abs() < 1e-4, "{}", r.x[0]);
        // MCL objective: gradient vanishes at the maximizer.
        let sample = random_sample(3, 200, 2, 3.0);
        let psi = [0.2, -0.1];
        let obs = [0.3, 1.2];
        let r = maximize_mcl(
            &psi,
            &obs,
            &sample,
            &TrustRegionConfig { grad_tol: 1e-10, ..Default::default() },
            &open_region(1e9),
        )
        .unwrap();
        assert!(mcl_gradient(&r.x, &psi, &obs, &sample).norm() < 1e-6);
    }

    #[test]
    fn region_limit_clips_towards_psi() {
        let sample = random_sample(5, 100, 1, 1.0);
        let r = maximize_mcl(&[0.0], &[0.9], &sample, &TrustRegionConfig::default(), &open_region(0.1)).unwrap();
        assert!((r.x[0].abs() - 0.1).abs() < 1e-12);
        assert!(r.clipped());
        assert!(r.value > 0.0);
        let free = maximize_mcl(&[0.0], &[0.9], &sample, &TrustRegionConfig::default(), &open_region(1e9)).unwrap();
        assert!(!free.clipped() && free.x[0].abs() > 0.1);
    }

    #[test]
    fn ess_floor_pulls_back() {
        let sample = random_sample(8, 200, 1, 1.0);
        let psi = [0.0];
        let free = maximize_mcl(&psi, &[0.95], &sample, &TrustRegionConfig::default(), &open_region(1e9)).unwrap();
        let region = SampleRegion { radius: 1e9, max_radius: 1e9, min_ess_fraction: 0.5 };
        let r = maximize_mcl(&psi, &[0.95], &sample, &TrustRegionConfig::default(), &region).unwrap();
        assert!(effective_sample_size(&free.x, &psi, &sample) < 100.0);
        assert!(r.clipped());
        assert!((effective_sample_size(&r.x, &psi, &sample) - 100.0).abs() < 1e-6);
        assert!(r.x[0] * free.x[0] > 0.0 && r.x[0].abs() < free.x[0].abs());
    }

    #[test]
    fn reordering_sample_leaves_maximizer() {
        let sample = random_sample(6, 120, 2, 3.0);
        let mut rev = sample.clone();
        rev.reverse();
        let (psi, obs) = ([0.0, 0.0], [0.4, 1.1]);
        let a = maximize_mcl(&psi, &obs, &sample, &TrustRegionConfig::default(), &open_region(10.0)).unwrap();
        let b = maximize_mcl(&psi, &obs, &rev, &TrustRegionConfig::default(), &open_region(10.0)).unwrap();
        for j in 0..2 {
            assert!((a.x[j] - b.x[j]).abs() < 1e-9);
        }
    }

    #[test]
    fn confidence_set_examples() {
        assert_eq!(confidence_set(&[1.5], &[0.0], 0.95), vec![(1.5, 1.5)]);
        let se: f64 = (-1.73 - -2.23) / (2.0 * 1.959964);
        assert!((se - 0.1276).abs() < 1e-4);
        let ci = confidence_set(&[-1.98], &[se], 0.95)[0];
        assert_eq!(((ci.0 * 100.0).round() / 100.0, (ci.1 * 100.0).round() / 100.0), (-2.23, -1.73));
        let wide = confidence_set(&[0.3, 4.0], &[0.2, 1.0], 0.95);
        let narrow = confidence_set(&[0.3, 4.0], &[0.2, 1.0], 0.90);
        for (w, n) in wide.iter().zip(&narrow) {
            assert!(w.0 < n.0 && n.1 < w.1);
        }
    }

    #[test]
    fn mcse_two_atom_closed_form() {
        // d = 1, θ = ψ, atoms a and b each half the sample: H = −var, the
        // score contributions are s_i − mean, so V = var and the sandwich
        // collapses to 1 / (n var).
        let (a, b, n) = (0.0f64, 2.0f64, 10usize);
        let sample: Vec<FeatureVector> = (0..n).map(|i| vec![if i % 2 == 0 { a } else { b }]).collect();
        let var = ((b - a) / 2.0f64).powi(2);
        let se = mc_standard_error(&[0.7], &[0.7], &sample).unwrap()[0];
        assert!((se - (1.0 / (n as f64 * var)).sqrt()).abs() < 1e-12);
        let mut bigger = sample.clone();
        bigger.extend(sample.iter().cloned());
        assert!(mc_standard_error(&[0.7], &[0.7], &bigger).unwrap()[0] < se);
        assert!(mc_standard_error(&[0.7], &[0.7], &vec![vec![1.0]; 4]).is_err());
    }
}
