//! Zero-order oracles: goal functions behind a query-counting interface.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::Point;
use crate::rng::{keyed_rng, Domain};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleKind {
    Smooth,
    NonSmooth,
    Noisy,
    PartialSum,
    LinearBox,
}

/// A deterministic goal function `R^{n_x} -> R`.
pub trait Objective: Send + Sync + fmt::Debug {
    fn dimension(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    fn kind(&self) -> OracleKind {
        OracleKind::Smooth
    }

    /// The smooth part `s(x)` of a non-smooth objective `f = s + r`.
    fn smooth_part(&self, _x: &[f64]) -> Option<f64> {
        None
    }
}

/// Anything that answers point queries with a goal value and counts them.
pub trait ZeroOrderOracle: Send + Sync {
    fn dimension(&self) -> usize;

    fn query(&self, x: &Point) -> Result<f64>;

    fn query_count(&self) -> u64;
}

/// A named objective with an atomic query counter.
pub struct Oracle {
    name: String,
    objective: Arc<dyn Objective>,
    queries: AtomicU64,
}

impl Oracle {
    pub fn new(name: impl Into<String>, objective: Arc<dyn Objective>) -> Self {
        Oracle {
            name: name.into(),
            objective,
            queries: AtomicU64::new(0),
        }
    }

    pub fn from_fn<F>(name: impl Into<String>, dimension: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self::new(
            name,
            Arc::new(FnObjective {
                dimension,
                f: Box::new(f),
            }),
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> OracleKind {
        self.objective.kind()
    }

    pub fn objective(&self) -> &Arc<dyn Objective> {
        &self.objective
    }

    /// Evaluates without touching the query counter (for reporting only).
    pub fn peek(&self, x: &[f64]) -> f64 {
        self.objective.value(x)
    }

    pub fn smooth_part(&self, x: &[f64]) -> Option<f64> {
        self.objective.smooth_part(x)
    }

    pub fn evaluate(&self, x: &Point) -> Result<f64> {
        x.check_dim(self.objective.dimension())?;
        self.queries.fetch_add(1, Ordering::Relaxed);
        let v = self.objective.value(x);
        if !v.is_finite() {
            return Err(Error::Oracle(format!("{} returned {v} at {:?}", self.name, x.coords())));
        }
        Ok(v)
    }
}

impl Clone for Oracle {
    /// A fresh oracle over the same objective; the counter starts at zero.
    fn clone(&self) -> Self {
        Oracle::new(self.name.clone(), Arc::clone(&self.objective))
    }
}

impl fmt::Debug for Oracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Oracle")
            .field("name", &self.name)
            .field("objective", &self.objective)
            .field("queries", &self.query_count())
            .finish()
    }
}

impl ZeroOrderOracle for Oracle {
    fn dimension(&self) -> usize {
        self.objective.dimension()
    }

    fn query(&self, x: &Point) -> Result<f64> {
        self.evaluate(x)
    }

    fn query_count(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }
}

struct FnObjective {
    dimension: usize,
    f: Box<dyn Fn(&[f64]) -> f64 + Send + Sync>,
}

impl fmt::Debug for FnObjective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FnObjective({})", self.dimension)
    }
}

impl Objective for FnObjective {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn value(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

/// `|x - c|²`.
#[derive(Clone, Debug)]
pub struct Sphere {
    pub center: Vec<f64>,
}

impl Objective for Sphere {
    fn dimension(&self) -> usize {
        self.center.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.center).map(|(a, c)| (a - c) * (a - c)).sum()
    }
}

/// `½ xᵀ H x`.
#[derive(Clone, Debug)]
pub struct Quadratic {
    pub hessian: DMatrix<f64>,
}

impl Quadratic {
    pub fn diagonal(diag: &[f64]) -> Self {
        Quadratic {
            hessian: DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(diag)),
        }
    }
}

impl Objective for Quadratic {
    fn dimension(&self) -> usize {
        self.hessian.nrows()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let n = x.len();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += x[i] * self.hessian[(i, j)] * x[j];
            }
        }
        0.5 * s
    }
}

/// `(1 - x)² + 100 (y - x²)²`, minimum 0 at `(1, 1)`.
#[derive(Clone, Copy, Debug)]
pub struct Rosenbrock;

impl Objective for Rosenbrock {
    fn dimension(&self) -> usize {
        2
    }

    fn value(&self, x: &[f64]) -> f64 {
        (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
    }
}

/// `x² + c x³` in one dimension: a local minimum at 0 with unequal walls.
#[derive(Clone, Copy, Debug)]
pub struct AsymmetricCubic {
    pub cubic: f64,
}

impl Objective for AsymmetricCubic {
    fn dimension(&self) -> usize {
        1
    }

    fn value(&self, x: &[f64]) -> f64 {
        let t = x[0];
        t * t + self.cubic * t * t * t
    }
}

/// Euclidean norm `|x|`, with `sqrt(|x|² + s²)` as its smooth reference.
#[derive(Clone, Copy, Debug)]
pub struct AbsNorm {
    pub dimension: usize,
    pub smoothing: f64,
}

impl Objective for AbsNorm {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn value(&self, x: &[f64]) -> f64 {
        x.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    fn kind(&self) -> OracleKind {
        OracleKind::NonSmooth
    }

    fn smooth_part(&self, x: &[f64]) -> Option<f64> {
        Some((x.iter().map(|a| a * a).sum::<f64>() + self.smoothing * self.smoothing).sqrt())
    }
}

/// `Σ (w · round(x_a / w))²`: a staircase whose smooth reference is `|x|²`.
#[derive(Clone, Copy, Debug)]
pub struct StepQuadratic {
    pub dimension: usize,
    pub width: f64,
}

impl Objective for StepQuadratic {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn value(&self, x: &[f64]) -> f64 {
        x.iter()
            .map(|a| {
                let q = self.width * (a / self.width).round();
                q * q
            })
            .sum()
    }

    fn kind(&self) -> OracleKind {
        OracleKind::NonSmooth
    }

    fn smooth_part(&self, x: &[f64]) -> Option<f64> {
        Some(x.iter().map(|a| a * a).sum())
    }
}

/// `f₀ + gᵀx`.
#[derive(Clone, Debug)]
pub struct Linear {
    pub offset: f64,
    pub gradient: Vec<f64>,
}

impl Objective for Linear {
    fn dimension(&self) -> usize {
        self.gradient.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.offset + x.iter().zip(&self.gradient).map(|(a, g)| a * g).sum::<f64>()
    }

    fn kind(&self) -> OracleKind {
        OracleKind::LinearBox
    }
}

pub const CORPUS_NAMES: [&str; 7] = [
    "sphere",
    "quadratic",
    "rosenbrock",
    "asymmetric",
    "abs",
    "step_quadratic",
    "linear",
];

/// The built-in goal functions with their default parameters.
pub fn corpus() -> Vec<Oracle> {
    CORPUS_NAMES
        .iter()
        .map(|n| by_name(n).expect("corpus names resolve"))
        .collect()
}

pub fn by_name(name: &str) -> Result<Oracle> {
    let objective: Arc<dyn Objective> = match name {
        "sphere" => Arc::new(Sphere {
            center: vec![1.0, 1.0],
        }),
        "quadratic" => Arc::new(Quadratic::diagonal(&[4.0, 1.0])),
        "rosenbrock" => Arc::new(Rosenbrock),
        "asymmetric" => Arc::new(AsymmetricCubic { cubic: 0.3 }),
        "abs" => Arc::new(AbsNorm {
            dimension: 2,
            smoothing: 0.1,
        }),
        "step_quadratic" => Arc::new(StepQuadratic {
            dimension: 2,
            width: 0.1,
        }),
        "linear" => Arc::new(Linear {
            offset: 0.0,
            gradient: vec![1.0, 1.0],
        }),
        other => return Err(Error::NotFound(other.to_string())),
    };
    Ok(Oracle::new(name, objective))
}

/// Answers `f(x) + w` with `w ~ N(0, σ²)` drawn per call.
///
/// The deviate for the `k`-th call is keyed by `(seed, k)`, so a replay with
/// the same seed and call order sees the same noise, and concurrent callers
/// share one set of deviates regardless of interleaving.
pub struct NoisyOracle {
    base: Oracle,
    sigma: f64,
    seed: u64,
    calls: AtomicU64,
}

impl NoisyOracle {
    pub fn new(base: Oracle, sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!("noise sigma must be >= 0, got {sigma}")));
        }
        Ok(NoisyOracle {
            base,
            sigma,
            seed,
            calls: AtomicU64::new(0),
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn base(&self) -> &Oracle {
        &self.base
    }

    pub fn evaluate_noisy(&self, x: &Point) -> Result<f64> {
        let clean = self.base.evaluate(x)?;
        let k = self.calls.fetch_add(1, Ordering::Relaxed);
        if self.sigma == 0.0 {
            return Ok(clean);
        }
        let g: f64 = keyed_rng(self.seed, 0, k, Domain::Noise).sample(StandardNormal);
        Ok(clean + self.sigma * g)
    }
}

impl ZeroOrderOracle for NoisyOracle {
    fn dimension(&self) -> usize {
        self.base.dimension()
    }

    fn query(&self, x: &Point) -> Result<f64> {
        self.evaluate_noisy(x)
    }

    fn query_count(&self) -> u64 {
        self.base.query_count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Schedule {
    /// Component `k mod K` answers the `k`-th query.
    RoundRobin,
    /// A uniformly random component, keyed by `(seed, k)`.
    Random { seed: u64 },
}

/// An objective `f = Σ_j f_j` of which each query reveals one term.
pub struct PartialSumOracle {
    components: Vec<Arc<dyn Objective>>,
    schedule: Schedule,
    queries: AtomicU64,
}

impl PartialSumOracle {
    pub fn new(components: Vec<Arc<dyn Objective>>, schedule: Schedule) -> Result<Self> {
        let Some(first) = components.first() else {
            return Err(Error::InvalidConfig("partial-sum oracle needs components".into()));
        };
        let dim = first.dimension();
        if let Some(c) = components.iter().find(|c| c.dimension() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: c.dimension(),
            });
        }
        Ok(PartialSumOracle {
            components,
            schedule,
            queries: AtomicU64::new(0),
        })
    }

    pub fn components(&self) -> usize {
        self.components.len()
    }

    /// The full objective `Σ_j f_j(x)`; not counted as a query.
    pub fn full_value(&self, x: &[f64]) -> f64 {
        self.components.iter().map(|c| c.value(x)).sum()
    }

    pub fn evaluate_partial(&self, x: &Point) -> Result<(f64, usize)> {
        x.check_dim(self.dimension())?;
        let k = self.queries.fetch_add(1, Ordering::Relaxed);
        let n = self.components.len() as u64;
        let j = match self.schedule {
            Schedule::RoundRobin => (k % n) as usize,
            Schedule::Random { seed } => {
                keyed_rng(seed, 0, k, Domain::Schedule).random_range(0..n) as usize
            }
        };
        let v = self.components[j].value(x);
        if !v.is_finite() {
            return Err(Error::Oracle(format!("component {j} returned {v}")));
        }
        Ok((v, j))
    }
}

impl ZeroOrderOracle for PartialSumOracle {
    fn dimension(&self) -> usize {
        self.components[0].dimension()
    }

    fn query(&self, x: &Point) -> Result<f64> {
        self.evaluate_partial(x).map(|(v, _)| v)
    }

    fn query_count(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }
}
