//! Randomized barycenter search.
//!
//! Each query is the current barycenter plus a curiosity offset,
//! `x_n = x̂_{n-1} + z_n`, with `z_n` Gaussian (or drawn from a Gaussian
//! mixture). With momentum `ξ > 0` the curiosity mean is shifted by
//! `ξ Δx̂_{n-1}`. Random draws for worker `k` at step `n` come from the stream
//! keyed by `(seed, k, n)`, so runs are reproducible and independent of how
//! workers are scheduled.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::oracles::ZeroOrderOracle;
use crate::point::{Exponent, Point};
use crate::recursive::Accumulator;
use crate::rng::{keyed_rng, Domain};

/// Gaussian curiosity `N(z̄, Σ)` with a precomputed Cholesky factor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CuriosityRepr", into = "CuriosityRepr")]
pub struct CuriosityDistribution {
    mean: Point,
    covariance: DMatrix<f64>,
    factor: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CuriosityRepr {
    mean: Point,
    covariance: Vec<Vec<f64>>,
}

impl CuriosityDistribution {
    pub fn new(mean: Point, covariance: DMatrix<f64>) -> Result<Self> {
        let n = mean.dim();
        if covariance.nrows() != n || covariance.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: covariance.nrows(),
            });
        }
        let scale = covariance.abs().max();
        if covariance.iter().any(|c| !c.is_finite())
            || (&covariance - covariance.transpose()).abs().max() > 1e-12 * scale
        {
            return Err(Error::NotPositiveDefinite);
        }
        let chol = covariance
            .clone()
            .cholesky()
            .ok_or(Error::NotPositiveDefinite)?;
        let factor = chol.l();
        Ok(CuriosityDistribution {
            mean,
            covariance,
            factor,
        })
    }

    /// `N(mean, variance · I)`.
    pub fn isotropic(mean: Point, variance: f64) -> Result<Self> {
        let n = mean.dim();
        Self::new(mean, DMatrix::identity(n, n) * variance)
    }

    pub fn dim(&self) -> usize {
        self.mean.dim()
    }

    pub fn mean(&self) -> &Point {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    /// Same spread, different center.
    pub fn with_mean(&self, mean: Point) -> Self {
        assert_eq!(mean.dim(), self.dim());
        CuriosityDistribution {
            mean,
            ..self.clone()
        }
    }

    /// Scales the spread by `s >= 0` (covariance by `s²`). `s = 0` gives a point mass.
    pub fn scaled(&self, s: f64) -> Self {
        assert!(s >= 0.0 && s.is_finite());
        CuriosityDistribution {
            mean: self.mean.clone(),
            covariance: &self.covariance * (s * s),
            factor: &self.factor * s,
        }
    }
}

impl TryFrom<CuriosityRepr> for CuriosityDistribution {
    type Error = Error;

    fn try_from(r: CuriosityRepr) -> Result<Self> {
        let n = r.mean.dim();
        if r.covariance.len() != n || r.covariance.iter().any(|row| row.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: r.covariance.len(),
            });
        }
        let cov = DMatrix::from_fn(n, n, |i, j| r.covariance[i][j]);
        CuriosityDistribution::new(r.mean, cov)
    }
}

impl From<CuriosityDistribution> for CuriosityRepr {
    fn from(d: CuriosityDistribution) -> Self {
        let n = d.dim();
        CuriosityRepr {
            covariance: (0..n)
                .map(|i| (0..n).map(|j| d.covariance[(i, j)]).collect())
                .collect(),
            mean: d.mean,
        }
    }
}

/// `z = z̄ + L g` with `g` standard normal.
pub fn sample_curiosity<R: Rng + ?Sized>(dist: &CuriosityDistribution, rng: &mut R) -> Point {
    let n = dist.dim();
    let g: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let z = (0..n)
        .map(|i| dist.mean[i] + (0..=i).map(|j| dist.factor[(i, j)] * g[j]).sum::<f64>())
        .collect();
    Point::new(z).expect("finite curiosity sample")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponent {
    pub weight: f64,
    pub distribution: CuriosityDistribution,
}

/// Axis-aligned search box; queries are clamped into it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BoxRepr", into = "BoxRepr")]
pub struct SearchBox {
    min: Point,
    max: Point,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoxRepr {
    min: Point,
    max: Point,
}

impl SearchBox {
    pub fn new(min: Point, max: Point) -> Result<Self> {
        min.check_dim(max.dim())?;
        if min.iter().zip(max.iter()).any(|(a, b)| a >= b) {
            return Err(Error::InvalidConfig("box min must be below max on every axis".into()));
        }
        Ok(SearchBox { min, max })
    }

    pub fn min(&self) -> &Point {
        &self.min
    }

    pub fn max(&self) -> &Point {
        &self.max
    }

    pub fn clamp(&self, x: &Point) -> Point {
        Point::new(
            x.iter()
                .zip(self.min.iter().zip(self.max.iter()))
                .map(|(v, (lo, hi))| v.clamp(*lo, *hi))
                .collect(),
        )
        .expect("clamped point is finite")
    }

    pub fn contains(&self, x: &Point) -> bool {
        x.iter()
            .zip(self.min.iter().zip(self.max.iter()))
            .all(|(v, (lo, hi))| lo <= v && v <= hi)
    }
}

impl TryFrom<BoxRepr> for SearchBox {
    type Error = Error;

    fn try_from(r: BoxRepr) -> Result<Self> {
        SearchBox::new(r.min, r.max)
    }
}

impl From<SearchBox> for BoxRepr {
    fn from(b: SearchBox) -> Self {
        BoxRepr {
            min: b.min,
            max: b.max,
        }
    }
}

/// Stop once `|Δx̂_n| < tolerance` for `patience` consecutive steps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EarlyStop {
    pub tolerance: f64,
    #[serde(default = "default_patience")]
    pub patience: u32,
}

fn default_patience() -> u32 {
    25
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    pub nu: Exponent,
    pub curiosity: CuriosityDistribution,
    #[serde(default)]
    pub momentum: f64,
    #[serde(default)]
    pub forgetting: Option<f64>,
    pub budget: u64,
    pub seed: u64,
    pub initial_point: Point,
    #[serde(default)]
    pub mixture: Option<Vec<MixtureComponent>>,
    #[serde(default)]
    pub bounds: Option<SearchBox>,
    #[serde(default)]
    pub early_stop: Option<EarlyStop>,
    /// Fixed query sequence replacing the random curiosity.
    #[serde(default)]
    pub script: Option<Vec<Point>>,
}

impl SearchConfig {
    pub fn new(
        nu: Exponent,
        curiosity: CuriosityDistribution,
        initial_point: Point,
        budget: u64,
        seed: u64,
    ) -> Self {
        SearchConfig {
            nu,
            curiosity,
            momentum: 0.0,
            forgetting: None,
            budget,
            seed,
            initial_point,
            mixture: None,
            bounds: None,
            early_stop: None,
            script: None,
        }
    }

    pub fn with_momentum(mut self, xi: f64) -> Self {
        self.momentum = xi;
        self
    }

    pub fn with_forgetting(mut self, lambda: f64) -> Self {
        self.forgetting = Some(lambda);
        self
    }

    pub fn with_mixture(mut self, mixture: Vec<MixtureComponent>) -> Self {
        self.mixture = Some(mixture);
        self
    }

    pub fn with_bounds(mut self, bounds: SearchBox) -> Self {
        self.bounds = Some(bounds);
        self
    }

    pub fn with_early_stop(mut self, tolerance: f64) -> Self {
        self.early_stop = Some(EarlyStop {
            tolerance,
            patience: default_patience(),
        });
        self
    }

    pub fn with_script(mut self, script: Vec<Point>) -> Self {
        self.budget = script.len() as u64;
        self.script = Some(script);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn dim(&self) -> usize {
        self.initial_point.dim()
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.dim();
        self.curiosity.mean().check_dim(dim)?;
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if let Some(lambda) = self.forgetting {
            if !(lambda > 0.0 && lambda <= 1.0) {
                return Err(Error::InvalidForgetting(lambda));
            }
        }
        if self.budget == 0 {
            return Err(Error::InvalidConfig("budget must be positive".into()));
        }
        if let Some(mix) = &self.mixture {
            if mix.is_empty() || mix.iter().any(|c| !(c.weight > 0.0)) {
                return Err(Error::InvalidConfig("mixture weights must be positive".into()));
            }
            let total: f64 = mix.iter().map(|c| c.weight).sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidConfig(format!(
                    "mixture weights sum to {total}, expected 1"
                )));
            }
            for c in mix {
                c.distribution.mean().check_dim(dim)?;
            }
        }
        if let Some(b) = &self.bounds {
            b.min().check_dim(dim)?;
        }
        if let Some(script) = &self.script {
            if (script.len() as u64) < self.budget {
                return Err(Error::InvalidConfig("script shorter than budget".into()));
            }
            for q in script {
                q.check_dim(dim)?;
            }
        }
        if !self.nu.is_real() {
            let in_orthant = self
                .bounds
                .as_ref()
                .is_some_and(|b| b.min().iter().all(|&v| v >= 0.0));
            if !in_orthant && self.script.is_none() {
                return Err(Error::InvalidConfig(
                    "complex exponent needs bounds inside the positive orthant".into(),
                ));
            }
        }
        Ok(())
    }

    fn pick_distribution<R: Rng + ?Sized>(&self, rng: &mut R) -> &CuriosityDistribution {
        match &self.mixture {
            None => &self.curiosity,
            Some(mix) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for c in mix {
                    acc += c.weight;
                    if u < acc {
                        return &c.distribution;
                    }
                }
                &mix[mix.len() - 1].distribution
            }
        }
    }
}

/// The next oracle query: `readout(acc) + z`, clamped to the search box.
///
/// An empty accumulator yields the configured initial point.
pub fn next_query<R: Rng + ?Sized>(
    acc: &Accumulator,
    config: &SearchConfig,
    rng: &mut R,
) -> Result<Point> {
    if acc.is_empty() {
        return Ok(config.initial_point.clone());
    }
    let center = acc.readout()?;
    let dist = config.pick_distribution(rng);
    let mut z = sample_curiosity(dist, rng).into_vec();
    if config.momentum > 0.0 {
        if let Some(step) = acc.last_step() {
            for (zi, s) in z.iter_mut().zip(step.iter()) {
                *zi += config.momentum * s;
            }
        }
    }
    let x = Point::new(center.iter().zip(&z).map(|(c, d)| c + d).collect())?;
    Ok(match &config.bounds {
        Some(b) => b.clamp(&x),
        None => x,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub n: u64,
    pub query: Point,
    pub value: f64,
    pub mass_magnitude: f64,
    pub readout: Point,
    pub step_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub best_value: f64,
    pub best_point: Point,
    pub final_readout: Point,
    pub total_queries: u64,
    pub wall_time_secs: f64,
}

/// Trace of one search, or of a multi-worker search with per-worker traces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: SearchConfig,
    pub rows: Vec<RunRow>,
    pub summary: RunSummary,
    /// The search stopped early because the mass cancelled or underflowed.
    pub degenerate: bool,
    /// Complex `ν` with barycenter feedback: queries depend on `|η|`, so the
    /// result depends on query order.
    pub complex_feedback: bool,
    pub accumulator: Accumulator,
    pub workers: Vec<RunRecord>,
}

pub fn run_search(config: &SearchConfig, oracle: &dyn ZeroOrderOracle) -> Result<RunRecord> {
    run_worker(config, oracle, 0)
}

fn run_worker(config: &SearchConfig, oracle: &dyn ZeroOrderOracle, worker: u64) -> Result<RunRecord> {
    config.validate()?;
    if oracle.dimension() != config.dim() {
        return Err(Error::DimensionMismatch {
            expected: config.dim(),
            actual: oracle.dimension(),
        });
    }
    let started = Instant::now();
    let mut acc = Accumulator::new(config.nu, config.dim());
    let mut rows = Vec::with_capacity(config.budget as usize);
    let mut best: Option<(f64, Point)> = None;
    let mut degenerate = false;
    let mut quiet_steps = 0u32;

    for n in 1..=config.budget {
        let query = match &config.script {
            Some(script) => script[(n - 1) as usize].clone(),
            None => {
                let mut rng = keyed_rng(config.seed, worker, n, Domain::Search);
                next_query(&acc, config, &mut rng)?
            }
        };
        let value = oracle.query(&query)?;
        let next = match config.forgetting {
            Some(lambda) => acc.absorb_forgetting(&query, value, lambda),
            None => acc.absorb(&query, value),
        };
        acc = match next {
            Ok(a) => a,
            Err(Error::DegenerateMass) => {
                degenerate = true;
                break;
            }
            Err(e) => return Err(e),
        };
        if best.as_ref().is_none_or(|(b, _)| value < *b) {
            best = Some((value, query.clone()));
        }
        let step_norm = acc.last_step().map_or(0.0, Point::norm);
        rows.push(RunRow {
            n,
            query,
            value,
            mass_magnitude: acc.mass().magnitude(),
            readout: acc.readout()?,
            step_norm,
        });
        if let Some(stop) = config.early_stop {
            quiet_steps = if n > 1 && step_norm < stop.tolerance {
                quiet_steps + 1
            } else {
                0
            };
            if quiet_steps >= stop.patience {
                break;
            }
        }
    }

    let (best_value, best_point) = best.expect("first step always succeeds");
    let summary = RunSummary {
        best_value,
        best_point,
        final_readout: acc.readout()?,
        total_queries: rows.len() as u64 + u64::from(degenerate),
        wall_time_secs: started.elapsed().as_secs_f64(),
    };
    Ok(RunRecord {
        config: config.clone(),
        rows,
        summary,
        degenerate,
        complex_feedback: !config.nu.is_real() && config.script.is_none(),
        accumulator: acc,
        workers: Vec::new(),
    })
}

/// Independent searches, one per config, merged into a single barycenter.
pub fn run_parallel(configs: &[SearchConfig], oracle: &dyn ZeroOrderOracle) -> Result<RunRecord> {
    run_parallel_with(configs, oracle, Execution::Parallel)
}

pub fn run_parallel_with(
    configs: &[SearchConfig],
    oracle: &dyn ZeroOrderOracle,
    exec: Execution,
) -> Result<RunRecord> {
    let first = configs
        .first()
        .ok_or_else(|| Error::InvalidConfig("no workers".into()))?;
    for c in configs {
        if c.nu != first.nu {
            return Err(Error::ExponentMismatch);
        }
        c.initial_point.check_dim(first.dim())?;
    }
    let started = Instant::now();
    let workers = map_indexed(configs.len(), exec, |k| run_worker(&configs[k], oracle, k as u64))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let mut merged = Accumulator::new(first.nu, first.dim());
    let mut degenerate = workers.iter().any(|w| w.degenerate);
    for w in &workers {
        match merged.merge(&w.accumulator) {
            Ok(m) => merged = m,
            Err(Error::DegenerateMass) => {
                degenerate = true;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    let best = workers
        .iter()
        .min_by(|a, b| a.summary.best_value.total_cmp(&b.summary.best_value))
        .expect("at least one worker");
    let summary = RunSummary {
        best_value: best.summary.best_value,
        best_point: best.summary.best_point.clone(),
        final_readout: merged.readout()?,
        total_queries: workers.iter().map(|w| w.summary.total_queries).sum(),
        wall_time_secs: started.elapsed().as_secs_f64(),
    };
    Ok(RunRecord {
        config: first.clone(),
        rows: Vec::new(),
        summary,
        degenerate,
        complex_feedback: workers.iter().any(|w| w.complex_feedback),
        accumulator: merged,
        workers,
    })
}
