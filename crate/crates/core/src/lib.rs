//! Derivative-free minimization with exponentially weighted barycenters.
//!
//! Every query `x_i` of a zero-order oracle receives the weight `e^{-ν f(x_i)}`
//! and the running estimate of the minimizer is the weighted mean of all
//! queries. The crate provides:
//!
//! - [`batch`]: the barycenter of a finished batch, with real or complex `ν`
//!   and optional geometric forgetting.
//! - [`recursive`]: a streaming [`Accumulator`] with the mass/barycenter
//!   recursion, forgetting, `ν` rescheduling and the merge identity used to
//!   combine independent searches.
//! - [`strategies`]: a randomized curiosity-driven search loop with momentum,
//!   mixture exploration and multi-worker runs.
//! - [`oracles`]: query-counting goal functions, noisy and partial-sum oracles.
//! - [`analysis`]: closed-form predictors for the expected step, the step
//!   variance, complex interference and noise bias, with Monte Carlo helpers.
//!
//! Weights are stored in log-offset form ([`ScaledComplexWeight`]) so that
//! `ν f` in the hundreds or thousands neither overflows nor underflows.
//!
//! ```
//! use barycenter::{batch_barycenter, EvalRecord, Exponent, Point};
//!
//! let nu = Exponent::real(1.0).unwrap();
//! let records = vec![
//!     EvalRecord::new(Point::new(vec![0.0]).unwrap(), 0.0, nu).unwrap(),
//!     EvalRecord::new(Point::new(vec![1.0]).unwrap(), 1.0, nu).unwrap(),
//! ];
//! let x = batch_barycenter(&records, nu).unwrap();
//! assert!((x[0] - 1.0 / (1.0 + std::f64::consts::E)).abs() < 1e-15);
//! ```

pub mod analysis;
pub mod batch;
mod error;
pub mod exec;
pub mod montecarlo;
pub mod oracles;
mod point;
pub mod recursive;
pub mod rng;
pub mod strategies;
pub mod weight;

pub use batch::{batch_barycenter, forgetting_batch_barycenter, EvalRecord};
pub use error::{Error, Result};
pub use exec::Execution;
pub use oracles::{NoisyOracle, Oracle, PartialSumOracle, ZeroOrderOracle};
pub use point::{Exponent, Point};
pub use recursive::Accumulator;
pub use strategies::{
    run_parallel, run_search, CuriosityDistribution, RunRecord, SearchBox, SearchConfig,
};
pub use weight::{weight_of, ScaledComplexWeight};

pub use num_complex::Complex64;
