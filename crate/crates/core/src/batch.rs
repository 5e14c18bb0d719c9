//! Barycenter of a finished batch of oracle answers.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::{Exponent, Point};
use crate::weight::{weight_of, ScaledComplexWeight};

/// A mass whose magnitude is below this fraction of the summed weight
/// magnitudes has cancelled to rounding noise.
pub(crate) const CANCELLATION_TOL: f64 = 1e-12;

/// One oracle answer `(x_i, f(x_i))` together with its weight `e^{-ν f(x_i)}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub point: Point,
    pub value: f64,
    pub weight: ScaledComplexWeight,
}

impl EvalRecord {
    pub fn new(point: Point, value: f64, nu: Exponent) -> Result<Self> {
        let weight = weight_of(value, nu)?;
        Ok(EvalRecord {
            point,
            value,
            weight,
        })
    }
}

pub(crate) fn check_orthant(point: &Point, nu: Exponent) -> Result<()> {
    if nu.is_real() {
        return Ok(());
    }
    match point.iter().position(|&c| c < 0.0) {
        Some(axis) => Err(Error::NegativeCoordinate(point[axis], axis)),
        None => Ok(()),
    }
}

/// `Σ x_i e^{-ν f_i} / Σ e^{-ν f_i}`.
///
/// For real `ν` the result lies in the convex hull of the points (it is
/// clamped to their bounding box to absorb rounding). For complex `ν` the
/// quotient is formed per coordinate and the estimate is its modulus; every
/// coordinate must then be nonnegative.
pub fn batch_barycenter(records: &[EvalRecord], nu: Exponent) -> Result<Point> {
    discounted_barycenter(records, nu, |_| 0.0)
}

/// Barycenter with weights `λ^{n-i} e^{-ν f_i}`, newest record last.
pub fn forgetting_batch_barycenter(
    records: &[EvalRecord],
    nu: Exponent,
    lambda: f64,
) -> Result<Point> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::InvalidForgetting(lambda));
    }
    let n = records.len();
    let ln_lambda = lambda.ln();
    discounted_barycenter(records, nu, |i| (n - 1 - i) as f64 * ln_lambda)
}

fn discounted_barycenter(
    records: &[EvalRecord],
    nu: Exponent,
    ln_discount: impl Fn(usize) -> f64,
) -> Result<Point> {
    let first = records.first().ok_or(Error::EmptyBatch)?;
    let dim = first.point.dim();
    for r in records {
        r.point.check_dim(dim)?;
        if !r.value.is_finite() {
            return Err(Error::InvalidValue(r.value));
        }
        check_orthant(&r.point, nu)?;
    }

    let log_weights: Vec<f64> = records
        .iter()
        .enumerate()
        .map(|(i, r)| -nu.re() * r.value + ln_discount(i))
        .collect();
    let offset = log_weights
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if !offset.is_finite() {
        return Err(Error::DegenerateMass);
    }

    if nu.is_real() {
        let mut mass = 0.0;
        let mut moment = vec![0.0; dim];
        for (r, lw) in records.iter().zip(&log_weights) {
            let w = (lw - offset).exp();
            mass += w;
            for (m, x) in moment.iter_mut().zip(r.point.iter()) {
                *m += w * x;
            }
        }
        let mut out: Vec<f64> = moment.iter().map(|m| m / mass).collect();
        for (axis, c) in out.iter_mut().enumerate() {
            let (lo, hi) = records.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                (lo.min(r.point[axis]), hi.max(r.point[axis]))
            });
            *c = c.clamp(lo, hi);
        }
        return Point::new(out);
    }

    let mut mass = Complex64::new(0.0, 0.0);
    let mut gross = 0.0;
    let mut moment = vec![Complex64::new(0.0, 0.0); dim];
    for (r, lw) in records.iter().zip(&log_weights) {
        let w = Complex64::from_polar((lw - offset).exp(), -nu.im() * r.value);
        mass += w;
        gross += w.norm();
        for (m, x) in moment.iter_mut().zip(r.point.iter()) {
            *m += w * x;
        }
    }
    if mass.norm() <= CANCELLATION_TOL * gross {
        return Err(Error::DegenerateMass);
    }
    Point::new(moment.iter().map(|m| (m / mass).norm()).collect())
}

/// `e^{-ν f}` summed over a batch, as a log-offset weight.
pub fn batch_mass(records: &[EvalRecord]) -> ScaledComplexWeight {
    records
        .iter()
        .fold(ScaledComplexWeight::ZERO, |acc, r| acc.add(&r.weight))
}
