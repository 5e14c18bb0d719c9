//! Seeds and tolerances of the validation checks.
//!
//! The built-in registry is `registry/validation.json`, compiled into the
//! binary so a failing check can be reproduced from the version alone.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const BUILTIN: &str = include_str!("../registry/validation.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Registry {
    pub version: u32,
    pub batch_recursive: BatchRecursive,
    pub merge_algebra: MergeAlgebra,
    pub convex_hull: ConvexHull,
    pub expected_step: ExpectedStep,
    pub step_variance: StepVariance,
    pub interference: Interference,
    pub noise: Noise,
    pub quotient_lemma: QuotientLemma,
    pub end_to_end: EndToEnd,
    pub asymmetry: Asymmetry,
}

impl Registry {
    pub fn builtin() -> Self {
        serde_json::from_str(BUILTIN).expect("built-in registry parses")
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Replaces every check's seed by `seed` (stream offsets stay per check).
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.batch_recursive.seed = seed;
        self.merge_algebra.seed = seed;
        self.convex_hull.seed = seed;
        self.expected_step.seed = seed;
        self.step_variance.seed = seed;
        self.interference.seed = seed;
        self.noise.seed = seed;
        self.quotient_lemma.seed = seed;
        self.end_to_end.seed_base = seed;
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchRecursive {
    pub seed: u64,
    pub instances: u64,
    pub max_records: usize,
    pub max_dim: usize,
    pub nu_range: [f64; 2],
    pub value_scales: Vec<f64>,
    pub rel_tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MergeAlgebra {
    pub seed: u64,
    pub splits: u64,
    pub max_records: usize,
    pub max_dim: usize,
    pub nu_range: [f64; 2],
    pub algebra_tol: f64,
    pub union_tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvexHull {
    pub seed: u64,
    pub batches: u64,
    pub max_records: usize,
    pub max_dim: usize,
    pub nu_range: [f64; 2],
    pub value_scales: Vec<f64>,
    pub slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectedStep {
    pub seed: u64,
    pub hessian_diag: Vec<f64>,
    pub nu: f64,
    pub curiosity_variance: f64,
    pub center: Vec<f64>,
    pub simulations: u64,
    pub predictor_samples: u64,
    pub se_multiplier: f64,
    pub momentum_xi: f64,
    pub momentum_first_point: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepVariance {
    pub seed: u64,
    pub hessian_diag: Vec<f64>,
    pub nu: f64,
    pub curiosity_variance: f64,
    pub center: Vec<f64>,
    pub simulations: u64,
    pub predictor_samples: u64,
    pub rel_tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interference {
    pub seed: u64,
    pub nu: [f64; 2],
    pub gradient: Vec<f64>,
    pub phase_multiple: u32,
    pub samples: u64,
    pub expected_discount: f64,
    pub rel_tol: f64,
    pub closed_form_tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Noise {
    pub seed: u64,
    pub points: usize,
    pub domain: [f64; 2],
    pub curvature: f64,
    pub minimizer: f64,
    pub nu: f64,
    pub sigmas: Vec<f64>,
    pub draws: u64,
    pub bias_sigma: f64,
    pub se_multiplier: f64,
    pub variance_rel_tol: f64,
    pub slope: f64,
    pub slope_tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuotientLemma {
    pub seed: u64,
    pub instances: u64,
    pub len_range: [usize; 2],
    pub draws: u64,
    pub rel_sd_range: [f64; 2],
    pub se_multiplier: f64,
    pub variance_rel_tol: f64,
    pub identity_instances: u64,
    pub identity_tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndToEnd {
    pub seed_base: u64,
    pub seeds: u64,
    pub required: u64,
    pub radius: f64,
    pub nu: f64,
    pub curiosity_variance: f64,
    pub budget: u64,
    pub center: Vec<f64>,
    pub initial_point: Vec<f64>,
    pub pilot: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Asymmetry {
    pub cubic: f64,
    pub half_width: f64,
    pub points: usize,
    pub nus: Vec<f64>,
}
