//! Experiment configuration files.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use barycenter::oracles::{
    AbsNorm, AsymmetricCubic, Linear, Objective, Quadratic, Rosenbrock, Sphere, StepQuadratic,
};
use barycenter::strategies::{EarlyStop, MixtureComponent};
use barycenter::{CuriosityDistribution, Exponent, Oracle, Point, SearchBox, SearchConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// A corpus function by name, with optional parameter overrides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagonal: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cubic: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothing: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gradient: Option<Vec<f64>>,
}

impl OracleSpec {
    pub fn named(name: &str) -> Self {
        OracleSpec {
            name: name.to_string(),
            center: None,
            diagonal: None,
            cubic: None,
            dimension: None,
            smoothing: None,
            width: None,
            offset: None,
            gradient: None,
        }
    }

    fn given(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        let mut note = |set: bool, name| {
            if set {
                out.push(name)
            }
        };
        note(self.center.is_some(), "center");
        note(self.diagonal.is_some(), "diagonal");
        note(self.cubic.is_some(), "cubic");
        note(self.dimension.is_some(), "dimension");
        note(self.smoothing.is_some(), "smoothing");
        note(self.width.is_some(), "width");
        note(self.offset.is_some(), "offset");
        note(self.gradient.is_some(), "gradient");
        out
    }

    /// Fills every parameter of the named function with its default.
    pub fn resolved(&self) -> Result<OracleSpec, CliError> {
        let allowed: &[&str] = match self.name.as_str() {
            "sphere" => &["center"],
            "quadratic" => &["diagonal"],
            "rosenbrock" => &[],
            "asymmetric" => &["cubic"],
            "abs" => &["dimension", "smoothing"],
            "step_quadratic" => &["dimension", "width"],
            "linear" => &["offset", "gradient"],
            other => return Err(CliError::Config(format!("unknown oracle {other:?}"))),
        };
        if let Some(p) = self.given().into_iter().find(|p| !allowed.contains(p)) {
            return Err(CliError::Config(format!(
                "oracle {:?} takes no parameter {p:?}",
                self.name
            )));
        }
        let mut r = OracleSpec::named(&self.name);
        match self.name.as_str() {
            "sphere" => r.center = Some(self.center.clone().unwrap_or(vec![1.0, 1.0])),
            "quadratic" => r.diagonal = Some(self.diagonal.clone().unwrap_or(vec![4.0, 1.0])),
            "asymmetric" => r.cubic = Some(self.cubic.unwrap_or(0.3)),
            "abs" => {
                r.dimension = Some(self.dimension.unwrap_or(2));
                r.smoothing = Some(self.smoothing.unwrap_or(0.1));
            }
            "step_quadratic" => {
                r.dimension = Some(self.dimension.unwrap_or(2));
                r.width = Some(self.width.unwrap_or(0.1));
            }
            "linear" => {
                r.offset = Some(self.offset.unwrap_or(0.0));
                r.gradient = Some(self.gradient.clone().unwrap_or(vec![1.0, 1.0]));
            }
            _ => {}
        }
        Ok(r)
    }

    pub fn build(&self) -> Result<Oracle, CliError> {
        let r = self.resolved()?;
        let nonempty = |v: Vec<f64>, what: &str| {
            if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
                Err(CliError::Config(format!("{what} must be a non-empty finite vector")))
            } else {
                Ok(v)
            }
        };
        let objective: Arc<dyn Objective> = match r.name.as_str() {
            "sphere" => Arc::new(Sphere {
                center: nonempty(r.center.unwrap(), "center")?,
            }),
            "quadratic" => Arc::new(Quadratic::diagonal(&nonempty(r.diagonal.unwrap(), "diagonal")?)),
            "rosenbrock" => Arc::new(Rosenbrock),
            "asymmetric" => Arc::new(AsymmetricCubic {
                cubic: r.cubic.unwrap(),
            }),
            "abs" => Arc::new(AbsNorm {
                dimension: positive(r.dimension.unwrap())?,
                smoothing: r.smoothing.unwrap(),
            }),
            "step_quadratic" => {
                let width = r.width.unwrap();
                if !(width > 0.0) {
                    return Err(CliError::Config("width must be positive".into()));
                }
                Arc::new(StepQuadratic {
                    dimension: positive(r.dimension.unwrap())?,
                    width,
                })
            }
            "linear" => Arc::new(Linear {
                offset: r.offset.unwrap(),
                gradient: nonempty(r.gradient.unwrap(), "gradient")?,
            }),
            _ => unreachable!("resolved() rejects unknown names"),
        };
        Ok(Oracle::new(r.name, objective))
    }
}

fn positive(n: usize) -> Result<usize, CliError> {
    if n == 0 {
        Err(CliError::Config("dimension must be positive".into()))
    } else {
        Ok(n)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// A repetition succeeds when its final readout is within `radius` of `target`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Success {
    pub target: Vec<f64>,
    pub radius: f64,
}

fn one_usize() -> usize {
    1
}

fn one_u64() -> u64 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub oracle: OracleSpec,
    pub nu: Exponent,
    pub curiosity: CuriosityDistribution,
    #[serde(default)]
    pub momentum: f64,
    #[serde(default)]
    pub forgetting: Option<f64>,
    pub budget: u64,
    #[serde(default)]
    pub seed: u64,
    pub initial_point: Point,
    #[serde(default)]
    pub mixture: Option<Vec<MixtureComponent>>,
    #[serde(default)]
    pub bounds: Option<SearchBox>,
    #[serde(default)]
    pub early_stop: Option<EarlyStop>,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default = "one_usize")]
    pub workers: usize,
    #[serde(default = "one_u64")]
    pub repetitions: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
    #[serde(default)]
    pub success: Option<Success>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Defaults filled in and parameters checked; the form echoed in summaries.
    pub fn resolve(mut self) -> Result<Self, CliError> {
        self.oracle = self.oracle.resolved()?;
        if self.workers == 0 || self.repetitions == 0 {
            return Err(CliError::Config("workers and repetitions must be positive".into()));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(CliError::Config("noise_sigma must be >= 0".into()));
        }
        if let Some(s) = &self.success {
            if s.target.len() != self.initial_point.dim() || !(s.radius >= 0.0) {
                return Err(CliError::Config("success target/radius invalid".into()));
            }
        }
        if !self.nu.is_real() && self.bounds.is_none() {
            return Err(CliError::Config("complex nu requires bounds".into()));
        }
        crate::shift::shift_config(&self.search_config(self.seed))
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        let dim = self.oracle.build()?.objective().dimension();
        if dim != self.initial_point.dim() {
            return Err(CliError::Config(format!(
                "oracle dimension {dim} does not match initial point dimension {}",
                self.initial_point.dim()
            )));
        }
        Ok(self)
    }

    /// Search settings in user coordinates.
    pub fn search_config(&self, seed: u64) -> SearchConfig {
        SearchConfig {
            nu: self.nu,
            curiosity: self.curiosity.clone(),
            momentum: self.momentum,
            forgetting: self.forgetting,
            budget: self.budget,
            seed,
            initial_point: self.initial_point.clone(),
            mixture: self.mixture.clone(),
            bounds: self.bounds.clone(),
            early_stop: self.early_stop,
            script: None,
        }
    }
}
