//! Theoretical predictors and their Monte Carlo counterparts.
//!
//! For one step `x̂_n = x̂_{n-1} + F z` of the randomized search, with
//! `F = w/(m+w)` and `F̄ = m w/(m+w)²`:
//!
//! - expected step: `E[Δx̂] = E[F] z̄ − ν Σ E[F̄ ∇f(x̂+z)]`
//! - step variance near a critical point (`z̄ = 0`):
//!   `Var(Δx̂) ≈ Σ E[F²] − 2ν Σ E[F F̄ ∇²f] Σ`
//!
//! Expectations over `z` are evaluated by Monte Carlo, so every prediction
//! comes with standard errors. The remaining predictors are closed form:
//! the complex interference factor, the per-axis weight discount, the noise
//! bias/covariance of the barycenter and the quotient moment approximation it
//! is derived from.
//!
//! The closing expansion `F_{n+1} ≈ F_n (m_n/m_{n+1})(1 + F̄ ν² ∇fᵀΣ∇f)` is only
//! a heuristic for how step sizes grow and is not implemented as a predictor.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::batch::EvalRecord;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::montecarlo::{sample_moments, VectorMoments};
use crate::point::{Exponent, Point};
use crate::recursive::Accumulator;
use crate::rng::StreamKey;
use crate::strategies::{sample_curiosity, CuriosityDistribution};
use crate::weight::ScaledComplexWeight;

/// Central differences `(f(x+h e_a) − f(x−h e_a)) / 2h` with a common step.
pub fn finite_difference_gradient<F>(f: &F, x: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    assert!(h > 0.0);
    let mut y = x.to_vec();
    (0..x.len())
        .map(|a| central(f, &mut y, a, h))
        .collect()
}

fn central<F: Fn(&[f64]) -> f64 + ?Sized>(f: &F, y: &mut [f64], a: usize, h: f64) -> f64 {
    let x0 = y[a];
    y[a] = x0 + h;
    let up = f(y);
    y[a] = x0 - h;
    let down = f(y);
    y[a] = x0;
    (up - down) / (2.0 * h)
}

/// Gradient with per-axis steps `1e-5 (1 + |x_a|)`.
pub fn gradient<F>(f: &F, x: &[f64]) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    let mut y = x.to_vec();
    (0..x.len())
        .map(|a| central(f, &mut y, a, 1e-5 * (1.0 + x[a].abs())))
        .collect()
}

/// Symmetrized Hessian by nested central differences, steps `1e-3 (1 + |x_a|)`.
pub fn hessian<F>(f: &F, x: &[f64]) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    let n = x.len();
    let h: Vec<f64> = x.iter().map(|v| 1e-3 * (1.0 + v.abs())).collect();
    let mut y = x.to_vec();
    let mut hess = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let mut eval = |da: f64, db: f64| {
                y[a] += da;
                y[b] += db;
                let v = f(&y);
                y[a] = x[a];
                y[b] = x[b];
                v
            };
            let v = if a == b {
                (eval(2.0 * h[a], 0.0) - 2.0 * f(x) + eval(-2.0 * h[a], 0.0)) / (4.0 * h[a] * h[a])
            } else {
                (eval(h[a], h[b]) - eval(h[a], -h[b]) - eval(-h[a], h[b]) + eval(-h[a], -h[b]))
                    / (4.0 * h[a] * h[b])
            };
            hess[(a, b)] = v;
            hess[(b, a)] = v;
        }
    }
    hess
}

/// `(F, F̄)` for a new weight `w = e^{-ν value}` against the previous mass.
///
/// Evaluated through `t = ln m − ln w`, so neither weight is formed. Only the
/// real part of `ν` and the magnitude of `m_prev` are used.
pub fn step_gains(m_prev: ScaledComplexWeight, value: f64, nu: Exponent) -> (f64, f64) {
    if m_prev.is_zero() {
        return (1.0, 0.0);
    }
    let t = m_prev.ln_magnitude() + nu.re() * value;
    let f = 1.0 / (1.0 + t.exp());
    let g = 1.0 / (1.0 + (-t).exp());
    (f, f * g)
}

/// Monte Carlo estimate of a vector quantity with its standard errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: Vec<f64>,
    pub standard_errors: Vec<f64>,
}

/// Empirical mean and covariance of a random vector.
#[derive(Clone, Debug, PartialEq)]
pub struct StepMoments {
    pub mean: Vec<f64>,
    pub covariance: DMatrix<f64>,
    pub mean_standard_errors: Vec<f64>,
    pub covariance_standard_errors: DMatrix<f64>,
    pub samples: u64,
}

impl From<&VectorMoments> for StepMoments {
    fn from(m: &VectorMoments) -> Self {
        StepMoments {
            mean: m.mean().to_vec(),
            covariance: m.covariance(),
            mean_standard_errors: m.standard_errors(),
            covariance_standard_errors: m.covariance_standard_errors(),
            samples: m.count(),
        }
    }
}

/// `A · E[u]` with standard errors, given moments of `u`.
fn linear_estimate(coeffs: &DMatrix<f64>, u: &VectorMoments) -> Estimate {
    let mean = DVector::from_column_slice(u.mean());
    let value = coeffs * mean;
    let cov = coeffs * u.covariance() * coeffs.transpose() / u.count() as f64;
    Estimate {
        value: value.iter().copied().collect(),
        standard_errors: (0..cov.nrows()).map(|i| cov[(i, i)].max(0.0).sqrt()).collect(),
    }
}

/// Settings shared by the Monte Carlo predictors.
#[derive(Clone, Copy, Debug)]
pub struct MonteCarlo {
    pub samples: u64,
    pub key: StreamKey,
    pub exec: Execution,
}

/// Expected step `E[F] z̄ − ν Σ E[F̄ ∇f(center + z)]`, `z ~ dist`.
pub fn predicted_mean_step<F>(
    m_prev: ScaledComplexWeight,
    center: &Point,
    f: &F,
    dist: &CuriosityDistribution,
    nu: Exponent,
    mc: MonteCarlo,
) -> Estimate
where
    F: Fn(&[f64]) -> f64 + Sync + ?Sized,
{
    let d = center.dim();
    let u = sample_moments(mc.samples, mc.key, 1 + d, mc.exec, |rng, out| {
        let x = shifted(center, &sample_curiosity(dist, rng));
        let (gain, gain_bar) = step_gains(m_prev, f(&x), nu);
        out[0] = gain;
        for (o, g) in out[1..].iter_mut().zip(gradient(f, &x)) {
            *o = gain_bar * g;
        }
    });
    let sigma = dist.covariance();
    let coeffs = DMatrix::from_fn(d, 1 + d, |a, k| {
        if k == 0 {
            dist.mean()[a]
        } else {
            -nu.re() * sigma[(a, k - 1)]
        }
    });
    linear_estimate(&coeffs, &u)
}

/// Step covariance `Σ E[F²] − 2ν Σ E[F F̄ ∇²f] Σ`, returned row-major.
pub fn predicted_step_variance<F>(
    m_prev: ScaledComplexWeight,
    center: &Point,
    f: &F,
    dist: &CuriosityDistribution,
    nu: Exponent,
    mc: MonteCarlo,
) -> Estimate
where
    F: Fn(&[f64]) -> f64 + Sync + ?Sized,
{
    let d = center.dim();
    let u = sample_moments(mc.samples, mc.key, 1 + d * d, mc.exec, |rng, out| {
        let x = shifted(center, &sample_curiosity(dist, rng));
        let (gain, gain_bar) = step_gains(m_prev, f(&x), nu);
        out[0] = gain * gain;
        let h = hessian(f, &x);
        for g in 0..d {
            for k in 0..d {
                out[1 + g * d + k] = gain * gain_bar * h[(g, k)];
            }
        }
    });
    let s = dist.covariance();
    let coeffs = DMatrix::from_fn(d * d, 1 + d * d, |row, col| {
        let (a, b) = (row / d, row % d);
        if col == 0 {
            s[(a, b)]
        } else {
            let (g, k) = ((col - 1) / d, (col - 1) % d);
            -2.0 * nu.re() * s[(a, g)] * s[(k, b)]
        }
    });
    let mut est = linear_estimate(&coeffs, &u);
    for a in 0..d {
        for b in a + 1..d {
            let v = 0.5 * (est.value[a * d + b] + est.value[b * d + a]);
            est.value[a * d + b] = v;
            est.value[b * d + a] = v;
        }
    }
    est
}

/// Empirical moments of `Δx̂` for one step of the search from `acc`, with the
/// query `readout(acc) + z`, `z ~ dist`.
///
/// # Panics
///
/// If `acc` is empty or `f` returns a non-finite value.
pub fn simulate_step<F>(acc: &Accumulator, f: &F, dist: &CuriosityDistribution, mc: MonteCarlo) -> StepMoments
where
    F: Fn(&[f64]) -> f64 + Sync + ?Sized,
{
    let center = acc.readout().expect("non-empty accumulator");
    let m = sample_moments(mc.samples, mc.key, acc.dim(), mc.exec, |rng, out| {
        let x = Point::new(shifted(&center, &sample_curiosity(dist, rng))).expect("finite query");
        let next = acc.absorb(&x, f(&x)).expect("finite goal value");
        let after = next.readout().expect("non-empty accumulator");
        for (o, (a, b)) in out.iter_mut().zip(after.iter().zip(center.iter())) {
            *o = a - b;
        }
    });
    StepMoments::from(&m)
}

fn shifted(center: &Point, z: &Point) -> Vec<f64> {
    center.iter().zip(z.iter()).map(|(c, d)| c + d).collect()
}

/// `|sinh(u)/u|²` for `u = r + iq`, i.e. `(sinh² r + sin² q)/(r² + q²)`.
pub fn interference_factor_sq(r: f64, q: f64) -> f64 {
    let rho2 = r * r + q * q;
    if rho2 < 1e-8 {
        return 1.0 + (r * r - q * q) / 3.0;
    }
    (r.sinh().powi(2) + q.sin().powi(2)) / rho2
}

/// Ratio of expected mass magnitude under complex `ν` to that under
/// `re(ν)`, for a linear goal with gradient `grad` sampled uniformly in a box
/// of half-widths `delta`.
///
/// Per axis the ratio is `|sinh u/u| / (sinh r/r)` with `u = ν f′_a δ_a`,
/// `r = re(u)`. When `im(u) = kπ` this is `(1 + q²/r²)^{-1/2}`.
pub fn predicted_weight_discount(nu: Exponent, grad: &[f64], delta: &[f64]) -> f64 {
    assert_eq!(grad.len(), delta.len());
    grad.iter()
        .zip(delta)
        .map(|(g, d)| {
            let u = nu.value() * (g * d);
            (interference_factor_sq(u.re, u.im) / interference_factor_sq(u.re, 0.0)).sqrt()
        })
        .product()
}

/// Monte Carlo of the discount: `|E[e^{-ν f}]| / E[e^{-re(ν) f}]` with the
/// same uniform samples in `center ± delta` for both exponents. The goal is
/// `gradᵀ(x − center)`.
pub fn empirical_weight_discount(
    nu: Exponent,
    grad: &[f64],
    delta: &[f64],
    mc: MonteCarlo,
) -> Estimate {
    let m = sample_moments(mc.samples, mc.key, 3, mc.exec, |rng, out| {
        let f: f64 = grad
            .iter()
            .zip(delta)
            .map(|(g, d)| g * d * rng.random_range(-1.0..=1.0))
            .sum();
        let w = (-nu.value() * f).exp();
        out[0] = w.re;
        out[1] = w.im;
        out[2] = (-nu.re() * f).exp();
    });
    let mu = m.mean();
    let c = Complex64::new(mu[0], mu[1]);
    let ratio = c.norm() / mu[2];
    // delta method on (re, im, real)
    let grad_ratio = DMatrix::from_row_slice(
        1,
        3,
        &[
            mu[0] / (c.norm() * mu[2]),
            mu[1] / (c.norm() * mu[2]),
            -ratio / mu[2],
        ],
    );
    let var = (&grad_ratio * m.covariance() * grad_ratio.transpose())[(0, 0)] / m.count() as f64;
    Estimate {
        value: vec![ratio],
        standard_errors: vec![var.max(0.0).sqrt()],
    }
}

/// How the noise factor `w̄² − 1 = e^{ν²σ²} − 1` enters the noise formulas.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseScale {
    /// First-order term `ν²σ²`.
    Leading,
    /// The full factor `e^{ν²σ²} − 1`.
    Exact,
}

/// Predicted bias and covariance of the barycenter under additive Gaussian
/// noise on the goal values.
///
/// `m_bar` and `m_bar_bar` are expressed relative to the weight of the best
/// record (`e^{-ν f_min}` and its square), which leaves every ratio unchanged.
#[derive(Clone, Debug, PartialEq)]
pub struct NoisePrediction {
    pub mean_shift: Vec<f64>,
    pub covariance: DMatrix<f64>,
    pub m_bar: f64,
    pub m_bar_bar: f64,
    pub eta_bar: Vec<f64>,
    pub eta_bar_bar: Vec<f64>,
    pub eta_breve: DMatrix<f64>,
    pub w_bar: f64,
}

pub fn noise_prediction(
    records: &[EvalRecord],
    nu: Exponent,
    sigma: f64,
    scale: NoiseScale,
) -> Result<NoisePrediction> {
    let first = records.first().ok_or(Error::EmptyBatch)?;
    let d = first.point.dim();
    let nu_re = nu.re();
    let f_min = records.iter().map(|r| r.value).fold(f64::INFINITY, f64::min);
    let mut m1 = 0.0;
    let mut m2 = 0.0;
    let mut eta1 = vec![0.0; d];
    let mut eta2 = vec![0.0; d];
    let mut breve = DMatrix::zeros(d, d);
    for r in records {
        r.point.check_dim(d)?;
        let a = (-nu_re * (r.value - f_min)).exp();
        let a2 = a * a;
        m1 += a;
        m2 += a2;
        for i in 0..d {
            eta1[i] += a * r.point[i];
            eta2[i] += a2 * r.point[i];
            for j in 0..d {
                breve[(i, j)] += a2 * r.point[i] * r.point[j];
            }
        }
    }
    if !(m1 > 0.0) || !(m2 > 0.0) {
        return Err(Error::DegenerateMass);
    }
    eta1.iter_mut().for_each(|v| *v /= m1);
    eta2.iter_mut().for_each(|v| *v /= m2);
    breve /= m2;

    let s2 = (nu_re * sigma).powi(2);
    let w_bar = (0.5 * s2).exp();
    let factor = match scale {
        NoiseScale::Leading => s2,
        NoiseScale::Exact => s2.exp_m1(),
    };
    let c = m2 / (m1 * m1) * factor;
    let mean_shift = (0..d).map(|i| c * (eta1[i] - eta2[i])).collect();
    let covariance = DMatrix::from_fn(d, d, |i, j| {
        c * (eta1[i] * eta1[j] - eta1[i] * eta2[j] - eta2[i] * eta1[j] + breve[(i, j)])
    });
    Ok(NoisePrediction {
        mean_shift,
        covariance,
        m_bar: m1,
        m_bar_bar: m2,
        eta_bar: eta1,
        eta_bar_bar: eta2,
        eta_breve: breve,
        w_bar,
    })
}

/// Empirical bias and covariance of the noisy barycenter
/// `Σ x_i e^{-ν(f_i+w_i)} / Σ e^{-ν(f_i+w_i)}`, `w_i ~ N(0, σ²)`.
///
/// Draws come in antithetic pairs `(w, −w)`; `mc.samples` counts pairs. The
/// mean and its standard errors use pair averages, the covariance pools both
/// members. With a fixed key the standard normals are the same for every
/// `σ`, which makes bias curves over `σ` smooth.
pub fn empirical_noise_moments(
    records: &[EvalRecord],
    nu: Exponent,
    sigma: f64,
    mc: MonteCarlo,
) -> Result<StepMoments> {
    let first = records.first().ok_or(Error::EmptyBatch)?;
    let d = first.point.dim();
    let nu_re = nu.re();
    let f_min = records.iter().map(|r| r.value).fold(f64::INFINITY, f64::min);
    let base: Vec<f64> = records.iter().map(|r| -nu_re * (r.value - f_min)).collect();
    let eta_bar = noise_prediction(records, nu, 0.0, NoiseScale::Exact)?.eta_bar;

    let m = sample_moments(mc.samples, mc.key, 3 * d, mc.exec, |rng, out| {
        let noise: Vec<f64> = (0..records.len()).map(|_| rng.sample(StandardNormal)).collect();
        let (avg, rest) = out.split_at_mut(d);
        let (plus, minus) = rest.split_at_mut(d);
        noisy_offset(records, &base, &eta_bar, nu_re * sigma, &noise, 1.0, plus);
        noisy_offset(records, &base, &eta_bar, nu_re * sigma, &noise, -1.0, minus);
        for i in 0..d {
            avg[i] = 0.5 * (plus[i] + minus[i]);
        }
    });
    let cov = m.covariance();
    let pooled = DMatrix::from_fn(d, d, |i, j| {
        0.5 * (cov[(d + i, d + j)] + cov[(2 * d + i, 2 * d + j)])
    });
    let n = m.count();
    let pooled_se = DMatrix::from_fn(d, d, |i, j| {
        ((pooled[(i, i)] * pooled[(j, j)] + pooled[(i, j)].powi(2)) / (2 * n - 1) as f64).sqrt()
    });
    Ok(StepMoments {
        mean: m.mean()[..d].to_vec(),
        covariance: pooled,
        mean_standard_errors: m.standard_errors()[..d].to_vec(),
        covariance_standard_errors: pooled_se,
        samples: 2 * n,
    })
}

/// `η − η̄` for one noise draw, summed about `η̄` to avoid cancellation.
fn noisy_offset(
    records: &[EvalRecord],
    base: &[f64],
    eta_bar: &[f64],
    scale: f64,
    noise: &[f64],
    sign: f64,
    out: &mut [f64],
) {
    let mut mass = 0.0;
    out.iter_mut().for_each(|o| *o = 0.0);
    for ((r, b), g) in records.iter().zip(base).zip(noise) {
        let w = (b - sign * scale * g).exp();
        mass += w;
        for ((o, x), e) in out.iter_mut().zip(r.point.iter()).zip(eta_bar) {
            *o += w * (x - e);
        }
    }
    out.iter_mut().for_each(|o| *o /= mass);
}

/// Second-order moments of the quotients `b_αᵀv / aᵀv` for random `v` with
/// mean `v̄` and covariance `V`; row `α` of `b_rows` is `b_α`.
///
/// With `g_α = a (b_α·v̄) − b_α (a·v̄)`:
/// mean `b_α·v̄/a·v̄ + aᵀV g_α/(a·v̄)³`, covariance `g_αᵀ V g_β/(a·v̄)⁴`.
pub fn quotient_moments(
    a: &[f64],
    b_rows: &DMatrix<f64>,
    v_mean: &[f64],
    v_cov: &DMatrix<f64>,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = a.len();
    for len in [v_mean.len(), b_rows.ncols(), v_cov.nrows(), v_cov.ncols()] {
        if len != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: len,
            });
        }
    }
    let a = DVector::from_column_slice(a);
    let v = DVector::from_column_slice(v_mean);
    let av = a.dot(&v);
    if av == 0.0 || !av.is_finite() {
        return Err(Error::ZeroDenominator);
    }
    let k = b_rows.nrows();
    let g: Vec<DVector<f64>> = (0..k)
        .map(|alpha| {
            let b = b_rows.row(alpha).transpose();
            &a * b.dot(&v) - b * av
        })
        .collect();
    let va = v_cov.transpose() * &a;
    let mean = (0..k)
        .map(|alpha| b_rows.row(alpha).transpose().dot(&v) / av + va.dot(&g[alpha]) / av.powi(3))
        .collect();
    let vg: Vec<DVector<f64>> = g.iter().map(|gb| v_cov * gb).collect();
    let cov = DMatrix::from_fn(k, k, |i, j| g[i].dot(&vg[j]) / av.powi(4));
    Ok((mean, 0.5 * (&cov + cov.transpose())))
}

/// Monte Carlo moments of `b_αᵀv / aᵀv` with `v ~ N(v̄, V)`.
pub fn empirical_quotient_moments(
    a: &[f64],
    b_rows: &DMatrix<f64>,
    v_mean: &[f64],
    v_cov: &DMatrix<f64>,
    mc: MonteCarlo,
) -> Result<StepMoments> {
    let dist = CuriosityDistribution::new(Point::new(v_mean.to_vec())?, v_cov.clone())?;
    let k = b_rows.nrows();
    let m = sample_moments(mc.samples, mc.key, k, mc.exec, |rng, out| {
        let v = sample_curiosity(&dist, rng);
        let den: f64 = a.iter().zip(v.iter()).map(|(x, y)| x * y).sum();
        for (alpha, o) in out.iter_mut().enumerate() {
            let num: f64 = (0..v.dim()).map(|i| b_rows[(alpha, i)] * v[i]).sum();
            *o = num / den;
        }
    });
    Ok(StepMoments::from(&m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Domain;
    use crate::weight::weight_of;
    use proptest::prelude::*;

    fn mc(samples: u64, seed: u64) -> MonteCarlo {
        MonteCarlo {
            samples,
            key: StreamKey::new(seed, 0, Domain::MonteCarlo),
            exec: Execution::Parallel,
        }
    }

    fn p(x: &[f64]) -> Point {
        Point::new(x.to_vec()).unwrap()
    }

    #[test]
    fn gradient_examples() {
        let c = [1.0, -2.0, 0.5];
        let sphere = |x: &[f64]| x.iter().zip(&c).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        let x = [0.3, 4.0, -1.0];
        let g = finite_difference_gradient(&sphere, &x, 1e-5);
        for a in 0..3 {
            assert!((g[a] - 2.0 * (x[a] - c[a])).abs() < 1e-8);
        }
        let constant = |_: &[f64]| 7.0;
        assert_eq!(finite_difference_gradient(&constant, &x, 1e-5), vec![0.0; 3]);
        let linear = |x: &[f64]| 2.0 * x[0] - 0.5 * x[1] + 0.25 * x[2];
        let g = finite_difference_gradient(&linear, &[1.0, 1.0, 1.0], 0.5);
        assert_eq!(g, vec![2.0, -0.5, 0.25]);
    }

    #[test]
    fn hessian_of_quadratic() {
        let f = |x: &[f64]| 2.0 * x[0] * x[0] + 0.5 * x[1] * x[1] + 0.3 * x[0] * x[1];
        let h = hessian(&f, &[0.7, -1.2]);
        let expect = DMatrix::from_row_slice(2, 2, &[4.0, 0.3, 0.3, 1.0]);
        assert!((h - expect).abs().max() < 1e-6);
    }

    #[test]
    fn gain_examples() {
        let nu = Exponent::real(1.0).unwrap();
        assert_eq!(step_gains(ScaledComplexWeight::ZERO, 3.0, nu), (1.0, 0.0));
        let m = weight_of(0.7, nu).unwrap();
        let (f, fb) = step_gains(m, 0.7, nu);
        assert_eq!((f, fb), (0.5, 0.25));
        let (f, fb) = step_gains(ScaledComplexWeight::from_ln(800.0), 0.0, nu);
        assert!(f < 1e-300 && fb < 1e-300);
    }

    proptest! {
        #[test]
        fn gains_in_unit_interval(ln_m in -800.0f64..800.0, v in -500.0f64..500.0, nu in 0.01f64..10.0) {
            let nu = Exponent::real(nu).unwrap();
            let (f, fb) = step_gains(ScaledComplexWeight::from_ln(ln_m), v, nu);
            prop_assert!((0.0..=1.0).contains(&f));
            prop_assert!((0.0..=1.0).contains(&fb));
            prop_assert!(fb <= f);
        }

        #[test]
        fn interference_is_even(r in -5.0f64..5.0, q in -10.0f64..10.0) {
            let v = interference_factor_sq(r, q);
            prop_assert_eq!(v, interference_factor_sq(-r, q));
            prop_assert_eq!(v, interference_factor_sq(r, -q));
            prop_assert_eq!(v, interference_factor_sq(-r, -q));
        }

        #[test]
        fn interference_real_axis(r in -20.0f64..20.0) {
            prop_assume!(r != 0.0);
            let expect = (r.sinh() / r).powi(2);
            prop_assert!((interference_factor_sq(r, 0.0) - expect).abs() <= 1e-12 * expect);
        }
    }

    #[test]
    fn interference_examples() {
        use std::f64::consts::PI;
        assert_eq!(interference_factor_sq(0.0, 0.0), 1.0);
        assert!(interference_factor_sq(0.0, PI) < 1e-30);
        let sinh1 = 0.5 * (1f64.exp() - (-1f64).exp());
        let expect = sinh1 * sinh1 / (1.0 + PI * PI);
        assert!((interference_factor_sq(1.0, PI) - expect).abs() < 1e-12 * expect);
        assert!((expect - 0.127_06).abs() < 1e-5);
        // series branch near the origin
        let r = 0.99e-4f64;
        assert!((interference_factor_sq(r, 0.0) - (r.sinh() / r).powi(2)).abs() < 1e-15);
    }

    #[test]
    fn discount_examples() {
        use std::f64::consts::PI;
        let real = Exponent::real(2.0).unwrap();
        assert_eq!(predicted_weight_discount(real, &[1.0, -3.0], &[0.5, 0.2]), 1.0);
        let nu = Exponent::new(1.0, 3.0).unwrap();
        let delta = PI / 3.0;
        let d = predicted_weight_discount(nu, &[1.0, 1.0], &[delta, delta]);
        assert!((d - 0.1).abs() < 1e-12);
    }

    #[test]
    fn mean_step_constant_goal() {
        let nu = Exponent::real(1.0).unwrap();
        let dist = CuriosityDistribution::isotropic(p(&[1.0, 0.0]), 0.04).unwrap();
        let m = weight_of(0.5, nu).unwrap();
        let est = predicted_mean_step(m, &p(&[0.0, 0.0]), &|_: &[f64]| 2.0, &dist, nu, mc(1000, 1));
        let gain = (-2.0f64).exp() / ((-0.5f64).exp() + (-2.0f64).exp());
        assert!((est.value[0] - gain).abs() < 1e-15);
        assert_eq!(est.value[1], 0.0);

        let centered = dist.with_mean(p(&[0.0, 0.0]));
        let est = predicted_mean_step(m, &p(&[0.0, 0.0]), &|_: &[f64]| 2.0, &centered, nu, mc(500, 2));
        assert_eq!(est.value, vec![0.0, 0.0]);
    }

    #[test]
    fn variance_constant_goal() {
        let nu = Exponent::real(1.0).unwrap();
        let cov = DMatrix::from_row_slice(2, 2, &[0.02, 0.005, 0.005, 0.01]);
        let dist = CuriosityDistribution::new(p(&[0.0, 0.0]), cov.clone()).unwrap();
        let m = weight_of(1.0, nu).unwrap();
        let est = predicted_step_variance(m, &p(&[0.0, 0.0]), &|_: &[f64]| 1.0, &dist, nu, mc(300, 3));
        for a in 0..2 {
            for b in 0..2 {
                assert!((est.value[a * 2 + b] - cov[(a, b)] * 0.25).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn simulated_step_constant_goal() {
        let nu = Exponent::real(1.0).unwrap();
        let acc = Accumulator::new(nu, 2).absorb(&p(&[0.0, 0.0]), 0.0).unwrap();
        let dist = CuriosityDistribution::isotropic(p(&[0.5, 0.0]), 0.01).unwrap();
        let sim = simulate_step(&acc, &|_: &[f64]| 0.0, &dist, mc(20_000, 4));
        assert!((sim.mean[0] - 0.25).abs() < 4.0 * sim.mean_standard_errors[0]);
        assert!((sim.covariance[(0, 0)] - 0.0025).abs() < 4.0 * sim.covariance_standard_errors[(0, 0)]);
    }

    #[test]
    fn noise_degenerate_cases() {
        let nu = Exponent::real(1.0).unwrap();
        let recs: Vec<_> = (0..5)
            .map(|i| EvalRecord::new(p(&[i as f64 * 0.2]), (i as f64 - 2.0).powi(2), nu).unwrap())
            .collect();
        let z = noise_prediction(&recs, nu, 0.0, NoiseScale::Leading).unwrap();
        assert_eq!(z.mean_shift, vec![0.0]);
        assert_eq!(z.covariance[(0, 0)], 0.0);
        let one = noise_prediction(&recs[2..3], nu, 0.3, NoiseScale::Leading).unwrap();
        assert_eq!(one.eta_bar, one.eta_bar_bar);
        assert_eq!(one.mean_shift, vec![0.0]);
        assert!(one.covariance[(0, 0)].abs() < 1e-15);
        assert_eq!(noise_prediction(&[], nu, 0.1, NoiseScale::Exact), Err(Error::EmptyBatch));
    }

    #[test]
    fn noise_matches_quotient_lemma() {
        let nu = Exponent::real(1.3).unwrap();
        let sigma = 0.07;
        let recs: Vec<_> = (0..7)
            .map(|i| {
                let x = [0.1 * i as f64, 1.0 - 0.05 * (i * i) as f64];
                EvalRecord::new(p(&x), (x[0] - 0.3).powi(2) + x[1].abs(), nu).unwrap()
            })
            .collect();
        let pred = noise_prediction(&recs, nu, sigma, NoiseScale::Exact).unwrap();
        let n = recs.len();
        let a: Vec<f64> = recs.iter().map(|r| (-nu.re() * r.value).exp()).collect();
        let b = DMatrix::from_fn(2, n, |alpha, i| recs[i].point[alpha] * a[i]);
        let w = pred.w_bar;
        let v = vec![w; n];
        let cov = DMatrix::identity(n, n) * (w.powi(4) - w * w);
        let (mean, var) = quotient_moments(&a, &b, &v, &cov).unwrap();
        for alpha in 0..2 {
            let shift = mean[alpha] - pred.eta_bar[alpha];
            assert!((shift - pred.mean_shift[alpha]).abs() <= 1e-10 * pred.mean_shift[alpha].abs());
            for beta in 0..2 {
                let e = pred.covariance[(alpha, beta)];
                assert!((var[(alpha, beta)] - e).abs() <= 1e-10 * e.abs());
            }
        }
    }

    #[test]
    fn quotient_trivial_cases() {
        let a = [1.0, 2.0, 0.5];
        let b = DMatrix::from_row_slice(2, 3, &[0.3, -1.0, 2.0, 1.0, 2.0, 0.5]);
        let v = [1.0, 0.5, 2.0];
        let (mean, cov) = quotient_moments(&a, &b, &v, &DMatrix::zeros(3, 3)).unwrap();
        assert_eq!(mean[0], (0.3 - 0.5 + 4.0) / 3.0);
        assert_eq!(cov, DMatrix::zeros(2, 2));
        let var = DMatrix::from_diagonal_element(3, 3, 0.01);
        let (mean, cov) = quotient_moments(&a, &b, &v, &var).unwrap();
        assert!((mean[1] - 1.0).abs() < 1e-15);
        assert_eq!(cov[(1, 1)], 0.0);
        assert_eq!(
            quotient_moments(&[1.0, -1.0], &DMatrix::zeros(1, 2), &[1.0, 1.0], &DMatrix::zeros(2, 2)),
            Err(Error::ZeroDenominator)
        );
    }

    #[test]
    fn quotient_agrees_with_delta_method() {
        // numeric Jacobian of q(v) = b·v / a·v at v̄
        let a = [0.8, 1.2, 1.0];
        let b = DMatrix::from_row_slice(2, 3, &[0.5, -0.2, 0.9, -1.0, 0.4, 0.1]);
        let v = [1.1, 0.7, 1.3];
        let var = DMatrix::from_row_slice(3, 3, &[0.01, 0.002, 0.0, 0.002, 0.02, 0.001, 0.0, 0.001, 0.015]);
        let (_, cov) = quotient_moments(&a, &b, &v, &var).unwrap();
        let jac = DMatrix::from_fn(2, 3, |alpha, i| {
            let q = |x: &[f64]| {
                (0..3).map(|j| b[(alpha, j)] * x[j]).sum::<f64>() / (0..3).map(|j| a[j] * x[j]).sum::<f64>()
            };
            finite_difference_gradient(&q, &v, 1e-6)[i]
        });
        let delta = &jac * &var * jac.transpose();
        assert!((cov - delta).abs().max() < 1e-9);
    }

    #[test]
    fn quotient_monte_carlo() {
        let a = [1.0, 1.0];
        let b = DMatrix::from_row_slice(1, 2, &[0.0, 1.0]);
        let v = [1.0, 1.0];
        let var = DMatrix::from_diagonal_element(2, 2, 0.01);
        let (mean, cov) = quotient_moments(&a, &b, &v, &var).unwrap();
        let emp = empirical_quotient_moments(&a, &b, &v, &var, mc(1_000_000, 9)).unwrap();
        assert!((emp.mean[0] - mean[0]).abs() < 3.0 * emp.mean_standard_errors[0]);
        assert!((emp.covariance[(0, 0)] / cov[(0, 0)] - 1.0).abs() < 0.1);
    }

    #[test]
    fn discount_monte_carlo_is_chunk_independent() {
        use std::f64::consts::PI;
        let nu = Exponent::new(1.0, 3.0).unwrap();
        let delta = [PI / 3.0, PI / 3.0];
        let par = empirical_weight_discount(nu, &[1.0, 1.0], &delta, mc(100_000, 10));
        let seq = empirical_weight_discount(
            nu,
            &[1.0, 1.0],
            &delta,
            MonteCarlo { exec: Execution::Sequential, ..mc(100_000, 10) },
        );
        assert_eq!(par, seq);
        assert!((par.value[0] - 0.1).abs() < 0.01);
    }
}
