//! Optional config file. Every field may be omitted; command-line flags
//! override whatever is set here.

use std::path::Path;

use serde::{Deserialize, Serialize};
use ttess::approximation::ApproxConfig;
use ttess::inference::{SampleRegion, TrustRegionConfig};

use crate::output::{read_text, Failure};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub approximate: Option<ApproxConfig>,
    #[serde(default)]
    pub chain: ChainSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default)]
    pub gof: GofSection,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSection {
    pub burn_in: Option<u64>,
    pub thin: Option<u64>,
    /// `(split, merge, flip)`.
    pub move_probabilities: Option<[f64; 3]>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub samples: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    pub psi0: Option<Vec<f64>>,
    pub sample_size: Option<usize>,
    pub max_outer_iterations: Option<usize>,
    pub convergence_tol: Option<f64>,
    pub chains: Option<usize>,
    pub region: Option<SampleRegion>,
    pub trust_region: Option<TrustRegionConfig>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GofSection {
    pub m: Option<usize>,
    pub grid: Option<usize>,
    pub r_grid: Option<Vec<f64>>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = read_text(path)?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let parsed = if is_json {
            serde_json::from_str(&text).map_err(|e| e.to_string())
        } else {
            toml::from_str(&text).map_err(|e| e.to_string())
        };
        parsed.map_err(|e| Failure::parse(format!("config {}: {e}", path.display())))
    }
}
