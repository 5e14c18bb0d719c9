//! Statistical and algebraic checks of the barycenter method.
//!
//! Each suite compares a predicted quantity (closed form, batch formula or
//! theorem) with an empirical one (streaming code or Monte Carlo) at the
//! seeds and tolerances of the [`Registry`].

use std::f64::consts::PI;
use std::fmt;

use barycenter::analysis::{
    empirical_noise_moments, empirical_quotient_moments, empirical_weight_discount,
    interference_factor_sq, noise_prediction, predicted_mean_step, predicted_step_variance,
    predicted_weight_discount, quotient_moments, MonteCarlo, NoiseScale, StepMoments,
};
use barycenter::exec::{map_indexed, Execution};
use barycenter::montecarlo::sample_moments;
use barycenter::oracles::{Oracle, Sphere};
use barycenter::rng::{keyed_rng, Domain, StreamKey, StreamRng};
use barycenter::strategies::next_query;
use barycenter::{
    batch_barycenter, forgetting_batch_barycenter, run_search, Accumulator, CuriosityDistribution,
    EvalRecord, Exponent, Point, SearchConfig,
};
use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use crate::error::CliError;
use crate::registry::{self, Registry};

pub const SUITES: [&str; 10] = [
    "batch-recursive",
    "merge-algebra",
    "convex-hull",
    "expected-step",
    "step-variance",
    "interference",
    "noise",
    "quotient-lemma",
    "end-to-end",
    "asymmetry",
];

/// One row of the validation report.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub suite: &'static str,
    pub id: String,
    pub predicted: f64,
    pub empirical: f64,
    pub se: Option<f64>,
    pub tolerance: String,
    pub pass: bool,
}

impl Check {
    /// `|predicted − empirical| ≤ k · se`.
    fn within_se(suite: &'static str, id: String, predicted: f64, empirical: f64, se: f64, k: f64) -> Self {
        Check {
            suite,
            id,
            predicted,
            empirical,
            se: Some(se),
            tolerance: format!("{k} SE"),
            pass: (predicted - empirical).abs() <= k * se,
        }
    }

    /// `|predicted − empirical| ≤ tol · scale`.
    fn within_rel(
        suite: &'static str,
        id: String,
        predicted: f64,
        empirical: f64,
        tol: f64,
        scale: f64,
    ) -> Self {
        Check {
            suite,
            id,
            predicted,
            empirical,
            se: None,
            tolerance: format!("rel {tol:e}"),
            pass: (predicted - empirical).abs() <= tol * scale,
        }
    }

    /// `empirical ≤ bound`; the bound is reported as the prediction.
    fn at_most(suite: &'static str, id: String, bound: f64, empirical: f64) -> Self {
        Check {
            suite,
            id,
            predicted: bound,
            empirical,
            se: None,
            tolerance: format!("<= {bound:e}"),
            pass: empirical <= bound,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let se = self.se.map_or_else(|| "-".to_string(), |s| format!("{s:.4e}"));
        write!(
            f,
            "{:<16} {:<44} {:>13.6e} {:>13.6e} {:>11} {:>12} {}",
            self.suite,
            self.id,
            self.predicted,
            self.empirical,
            se,
            self.tolerance,
            if self.pass { "PASS" } else { "FAIL" }
        )
    }
}

pub fn table_header() -> String {
    format!(
        "{:<16} {:<44} {:>13} {:>13} {:>11} {:>12} {}",
        "suite", "check", "predicted", "empirical", "se", "tolerance", "verdict"
    )
}

pub fn run_suite(name: &str, reg: &Registry, exec: Execution) -> Result<Vec<Check>, CliError> {
    let checks = match name {
        "batch-recursive" => batch_recursive(&reg.batch_recursive, exec),
        "merge-algebra" => merge_algebra(&reg.merge_algebra, exec),
        "convex-hull" => convex_hull(&reg.convex_hull, exec),
        "expected-step" => expected_step(&reg.expected_step, exec),
        "step-variance" => step_variance(&reg.step_variance, exec),
        "interference" => interference(&reg.interference, exec),
        "noise" => noise(&reg.noise, exec),
        "quotient-lemma" => quotient_lemma(&reg.quotient_lemma, exec),
        "end-to-end" => end_to_end(&reg.end_to_end, exec),
        "asymmetry" => asymmetry(&reg.asymmetry),
        other => {
            return Err(CliError::Config(format!(
                "unknown suite {other:?}; expected one of {} or \"all\"",
                SUITES.join(", ")
            )))
        }
    };
    checks.map_err(CliError::from)
}

pub fn run_all(reg: &Registry, exec: Execution) -> Result<Vec<Check>, CliError> {
    let mut out = Vec::new();
    for s in SUITES {
        out.extend(run_suite(s, reg, exec)?);
    }
    Ok(out)
}

type Checks = barycenter::Result<Vec<Check>>;

fn instance_rng(seed: u64, stream: u64, i: u64) -> StreamRng {
    keyed_rng(seed, stream, i, Domain::MonteCarlo)
}

fn mc(samples: u64, seed: u64, stream: u64, exec: Execution) -> MonteCarlo {
    MonteCarlo {
        samples,
        key: StreamKey::new(seed, stream, Domain::MonteCarlo),
        exec,
    }
}

fn real(nu: f64) -> barycenter::Result<Exponent> {
    Exponent::real(nu)
}

fn point(x: &[f64]) -> barycenter::Result<Point> {
    Point::new(x.to_vec())
}

/// Random records: points uniform in `[−10, 10]^d`, values uniform in `[−s, s]`.
fn random_records(rng: &mut StreamRng, n: usize, d: usize, scale: f64, nu: Exponent) -> Vec<EvalRecord> {
    (0..n)
        .map(|_| {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-10.0..10.0)).collect();
            let v = scale * rng.random_range(-1.0..1.0);
            EvalRecord::new(Point::new(x).expect("finite"), v, nu).expect("finite")
        })
        .collect()
}

fn stream(records: &[EvalRecord], nu: Exponent) -> barycenter::Result<Accumulator> {
    records
        .iter()
        .try_fold(Accumulator::new(nu, records[0].point.dim()), |acc, r| acc.absorb(&r.point, r.value))
}

/// `max` that keeps NaN, so a broken computation cannot read as a pass.
fn worse(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

/// `‖a − b‖∞ / ‖b‖∞`.
fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = a.iter().zip(b).fold(0.0f64, |m, (x, y)| worse(m, (x - y).abs()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

fn batch_recursive(reg: &registry::BatchRecursive, exec: Execution) -> Checks {
    let errors = map_indexed(reg.instances as usize, exec, |i| -> barycenter::Result<(f64, f64)> {
        let mut rng = instance_rng(reg.seed, 0, i as u64);
        let n = rng.random_range(1..=reg.max_records);
        let d = rng.random_range(1..=reg.max_dim);
        let nu = real(rng.random_range(reg.nu_range[0]..=reg.nu_range[1]))?;
        let scale = reg.value_scales[i % reg.value_scales.len()];
        let records = random_records(&mut rng, n, d, scale, nu);
        let batch = batch_barycenter(&records, nu)?;
        let streamed = stream(&records, nu)?.readout()?;

        let lambda = rng.random_range(0.5..=1.0);
        let forgetting = forgetting_batch_barycenter(&records, nu, lambda)?;
        let acc = records.iter().try_fold(Accumulator::new(nu, d), |acc, r| {
            acc.absorb_forgetting(&r.point, r.value, lambda)
        })?;
        Ok((rel_diff(&streamed, &batch), rel_diff(&acc.readout()?, &forgetting)))
    })
    .into_iter()
    .collect::<barycenter::Result<Vec<_>>>()?;
    let max_plain = errors.iter().map(|e| e.0).fold(0.0, worse);
    let max_forget = errors.iter().map(|e| e.1).fold(0.0, worse);
    let s = "batch-recursive";
    Ok(vec![
        Check::at_most(s, format!("stream vs batch, worst of {}", reg.instances), reg.rel_tol, max_plain),
        Check::at_most(s, format!("forgetting stream vs batch, worst of {}", reg.instances), reg.rel_tol, max_forget),
    ])
}

fn merge_algebra(reg: &registry::MergeAlgebra, exec: Execution) -> Checks {
    let results = map_indexed(reg.splits as usize, exec, |i| -> barycenter::Result<[f64; 4]> {
        let mut rng = instance_rng(reg.seed, 0, i as u64);
        let n = rng.random_range(3..=reg.max_records.max(3));
        let d = rng.random_range(1..=reg.max_dim);
        let nu = real(rng.random_range(reg.nu_range[0]..=reg.nu_range[1]))?;
        let records = random_records(&mut rng, n, d, 5.0, nu);
        let mut parts: [Vec<EvalRecord>; 3] = Default::default();
        for (k, r) in records.iter().enumerate() {
            let label = if k < 3 { k } else { rng.random_range(0..3) };
            parts[label].push(r.clone());
        }
        let [a, b, c] = [stream(&parts[0], nu)?, stream(&parts[1], nu)?, stream(&parts[2], nu)?];
        let ab = a.merge(&b)?.readout()?;
        let ba = b.merge(&a)?.readout()?;
        let left = a.merge(&b)?.merge(&c)?.readout()?;
        let right = a.merge(&b.merge(&c)?)?.readout()?;
        let empty = Accumulator::new(nu, d);
        let identity_ok = empty.merge(&a)?.readout()? == a.readout()?
            && a.merge(&empty)?.readout()? == a.readout()?
            && empty.merge(&a)?.mass() == a.mass();
        let union = batch_barycenter(&records, nu)?;
        Ok([
            rel_diff(&ab, &ba),
            rel_diff(&left, &right),
            if identity_ok { 0.0 } else { 1.0 },
            rel_diff(&left, &union),
        ])
    })
    .into_iter()
    .collect::<barycenter::Result<Vec<_>>>()?;
    let worst = |k: usize| results.iter().map(|r| r[k]).fold(0.0, worse);
    let failures = results.iter().filter(|r| r[2] != 0.0).count() as f64;
    let s = "merge-algebra";
    let n = reg.splits;
    Ok(vec![
        Check::at_most(s, format!("commutativity, worst of {n}"), reg.algebra_tol, worst(0)),
        Check::at_most(s, format!("associativity, worst of {n}"), reg.algebra_tol, worst(1)),
        Check::at_most(s, format!("empty identity, failures of {n}"), 0.0, failures),
        Check::at_most(s, format!("union vs pooled batch, worst of {n}"), reg.union_tol, worst(3)),
    ])
}

fn convex_hull(reg: &registry::ConvexHull, exec: Execution) -> Checks {
    let excursions = map_indexed(reg.batches as usize, exec, |i| -> barycenter::Result<f64> {
        let mut rng = instance_rng(reg.seed, 0, i as u64);
        let n = rng.random_range(1..=reg.max_records);
        let d = rng.random_range(1..=reg.max_dim);
        let nu = real(rng.random_range(reg.nu_range[0]..=reg.nu_range[1]))?;
        let scale = reg.value_scales[i % reg.value_scales.len()];
        let records = random_records(&mut rng, n, d, scale, nu);
        let mut worst = f64::NEG_INFINITY;
        for x in [batch_barycenter(&records, nu)?, stream(&records, nu)?.readout()?] {
            for a in 0..d {
                let lo = records.iter().map(|r| r.point[a]).fold(f64::INFINITY, f64::min);
                let hi = records.iter().map(|r| r.point[a]).fold(f64::NEG_INFINITY, f64::max);
                worst = worse(worse(worst, lo - x[a]), x[a] - hi);
            }
        }
        Ok(worst)
    })
    .into_iter()
    .collect::<barycenter::Result<Vec<_>>>()?;
    let outside = excursions.iter().filter(|&&e| e > reg.slack).count() as f64;
    let worst = excursions.iter().copied().fold(0.0, worse);
    let s = "convex-hull";
    Ok(vec![
        Check::at_most(s, format!("batches outside hull, of {}", reg.batches), 0.0, outside),
        Check::at_most(s, "largest excursion beyond bounding box".into(), reg.slack, worst),
    ])
}

fn quadratic(diag: Vec<f64>) -> impl Fn(&[f64]) -> f64 + Sync {
    move |x: &[f64]| 0.5 * x.iter().zip(&diag).map(|(v, h)| h * v * v).sum::<f64>()
}

/// Moments of `Δx̂` over independent single steps of the search from `acc`.
fn one_step_moments<F>(acc: &Accumulator, f: &F, cfg: &SearchConfig, mc: MonteCarlo) -> StepMoments
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let before = acc.readout().expect("non-empty");
    let m = sample_moments(mc.samples, mc.key, acc.dim(), mc.exec, |rng, out| {
        let x = next_query(acc, cfg, rng).expect("valid query");
        let after = acc.absorb(&x, f(&x)).expect("finite").readout().expect("non-empty");
        for (o, (a, b)) in out.iter_mut().zip(after.iter().zip(before.iter())) {
            *o = a - b;
        }
    });
    StepMoments::from(&m)
}

fn expected_step(reg: &registry::ExpectedStep, exec: Execution) -> Checks {
    let s = "expected-step";
    let f = quadratic(reg.hessian_diag.clone());
    let nu = real(reg.nu)?;
    let dim = reg.center.len();
    let center = point(&reg.center)?;
    let spread = CuriosityDistribution::isotropic(Point::zeros(dim), reg.curiosity_variance)?;

    let plain = Accumulator::new(nu, dim).absorb(&center, f(&center))?;
    let first = point(&reg.momentum_first_point)?;
    let momentum = Accumulator::new(nu, dim)
        .absorb(&first, f(&first))?
        .absorb(&center, f(&center))?;

    let mut out = Vec::new();
    for (label, acc, xi, stream) in [("z̄=0", &plain, 0.0, 0u64), ("momentum ξ", &momentum, reg.momentum_xi, 2)] {
        let cfg = SearchConfig::new(nu, spread.clone(), center.clone(), 1, reg.seed).with_momentum(xi);
        let emp = one_step_moments(acc, &f, &cfg, mc(reg.simulations, reg.seed, stream, exec));
        let shift = acc
            .last_step()
            .map_or(vec![0.0; dim], |st| st.iter().map(|v| xi * v).collect());
        let dist = spread.with_mean(point(&shift)?);
        let pred = predicted_mean_step(
            acc.mass(),
            &acc.readout()?,
            &f,
            &dist,
            nu,
            mc(reg.predictor_samples, reg.seed, stream + 1, exec),
        );
        for a in 0..dim {
            let se = pred.standard_errors[a].hypot(emp.mean_standard_errors[a]);
            out.push(Check::within_se(
                s,
                format!("{label}: E[Δx̂_{a}]"),
                pred.value[a],
                emp.mean[a],
                se,
                reg.se_multiplier,
            ));
        }
    }
    Ok(out)
}

fn step_variance(reg: &registry::StepVariance, exec: Execution) -> Checks {
    let s = "step-variance";
    let f = quadratic(reg.hessian_diag.clone());
    let nu = real(reg.nu)?;
    let dim = reg.center.len();
    let center = point(&reg.center)?;
    let dist = CuriosityDistribution::isotropic(Point::zeros(dim), reg.curiosity_variance)?;
    let acc = Accumulator::new(nu, dim).absorb(&center, f(&center))?;
    let cfg = SearchConfig::new(nu, dist.clone(), center.clone(), 1, reg.seed);
    let emp = one_step_moments(&acc, &f, &cfg, mc(reg.simulations, reg.seed, 0, exec));
    let pred = predicted_step_variance(
        acc.mass(),
        &center,
        &f,
        &dist,
        nu,
        mc(reg.predictor_samples, reg.seed, 1, exec),
    );
    let p = |a: usize, b: usize| pred.value[a * dim + b];
    let mut out = Vec::new();
    for a in 0..dim {
        for b in a..dim {
            let scale = (p(a, a) * p(b, b)).sqrt();
            let mut c = Check::within_rel(
                s,
                format!("Var(Δx̂)[{a},{b}]"),
                p(a, b),
                emp.covariance[(a, b)],
                reg.rel_tol,
                scale,
            );
            c.se = Some(emp.covariance_standard_errors[(a, b)]);
            out.push(c);
        }
    }
    Ok(out)
}

fn interference(reg: &registry::Interference, exec: Execution) -> Checks {
    let s = "interference";
    let sinh1 = 0.5 * (1f64.exp() - (-1f64).exp());
    let closed = sinh1 * sinh1 / (1.0 + PI * PI);
    let nu = Exponent::new(reg.nu[0], reg.nu[1])?;
    let q = reg.phase_multiple as f64 * PI;
    let delta: Vec<f64> = reg.gradient.iter().map(|g| q / (nu.im() * g)).collect();
    let predicted = predicted_weight_discount(nu, &reg.gradient, &delta);
    let emp = empirical_weight_discount(nu, &reg.gradient, &delta, mc(reg.samples, reg.seed, 0, exec));
    let mut mc_check = Check::within_rel(
        s,
        format!("mass ratio, {} uniform samples", reg.samples),
        reg.expected_discount,
        emp.value[0],
        reg.rel_tol,
        reg.expected_discount,
    );
    mc_check.se = Some(emp.standard_errors[0]);
    Ok(vec![
        Check::within_rel(s, "|sinh u/u|² at r=1, q=π".into(), closed, interference_factor_sq(1.0, PI), reg.closed_form_tol, closed),
        Check::at_most(s, "|sinh u/u|² at r=0, q=π".into(), 1e-30, interference_factor_sq(0.0, PI)),
        Check::within_rel(s, "discount (1+q²/r²)^(-n/2)".into(), reg.expected_discount, predicted, reg.closed_form_tol, reg.expected_discount),
        mc_check,
    ])
}

/// Least-squares slope of `ln y` against `ln x`.
fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.abs().ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

pub fn noise_records(reg: &registry::Noise) -> barycenter::Result<Vec<EvalRecord>> {
    let nu = real(reg.nu)?;
    let [lo, hi] = reg.domain;
    (0..reg.points)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / (reg.points - 1) as f64;
            EvalRecord::new(point(&[x])?, reg.curvature * (x - reg.minimizer).powi(2), nu)
        })
        .collect()
}

fn noise(reg: &registry::Noise, exec: Execution) -> Checks {
    let s = "noise";
    let nu = real(reg.nu)?;
    let records = noise_records(reg)?;
    let mut out = Vec::new();
    let mut emp_bias = Vec::new();
    let mut emp_var = Vec::new();
    for &sigma in &reg.sigmas {
        let pred = noise_prediction(&records, nu, sigma, NoiseScale::Leading)?;
        // one key for every σ: common random numbers
        let emp = empirical_noise_moments(&records, nu, sigma, mc(reg.draws / 2, reg.seed, 0, exec))?;
        if sigma == reg.bias_sigma {
            out.push(Check::within_se(
                s,
                format!("bias E[η]−η̄ at σ={sigma}"),
                pred.mean_shift[0],
                emp.mean[0],
                emp.mean_standard_errors[0],
                reg.se_multiplier,
            ));
        }
        let p = pred.covariance[(0, 0)];
        let mut c = Check::within_rel(s, format!("var[η] at σ={sigma}"), p, emp.covariance[(0, 0)], reg.variance_rel_tol, p);
        c.se = Some(emp.covariance_standard_errors[(0, 0)]);
        out.push(c);
        emp_bias.push(emp.mean[0]);
        emp_var.push(emp.covariance[(0, 0)]);
    }
    let bias_slope = log_log_slope(&reg.sigmas, &emp_bias);
    let var_slope = log_log_slope(&reg.sigmas, &emp_var);
    out.push(Check::within_rel(s, "log-log slope of |bias| vs σ".into(), reg.slope, bias_slope, reg.slope_tol, 1.0));
    out.push(Check::within_rel(s, "log-log slope of var vs σ".into(), reg.slope, var_slope, reg.slope_tol, 1.0));
    Ok(out)
}

struct QuotientInstance {
    a: Vec<f64>,
    b: DMatrix<f64>,
    v: Vec<f64>,
    cov: DMatrix<f64>,
}

/// Positive `a, v̄`, signed `b`, and a correlated covariance with relative
/// standard deviations in `rel_sd_range`. Instances whose quotient is nearly
/// constant (tiny gradient) are redrawn.
fn quotient_instance(reg: &registry::QuotientLemma, i: u64) -> QuotientInstance {
    let mut rng = instance_rng(reg.seed, 0, i);
    let n = rng.random_range(reg.len_range[0]..=reg.len_range[1]);
    let a: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
    let av: f64 = a.iter().zip(&v).map(|(x, y)| x * y).sum();
    let norm = |x: &[f64]| x.iter().map(|t| t * t).sum::<f64>().sqrt();
    let b = loop {
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let bv: f64 = b.iter().zip(&v).map(|(x, y)| x * y).sum();
        let g: Vec<f64> = (0..n).map(|k| a[k] * bv - b[k] * av).collect();
        if norm(&g) > 0.05 * norm(&a) * norm(&b) * norm(&v) {
            break b;
        }
    };
    let rel_sd = rng.random_range(reg.rel_sd_range[0]..=reg.rel_sd_range[1]);
    let m: DMatrix<f64> = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let m = &m * m.transpose() + DMatrix::identity(n, n) * 0.5;
    let cov = DMatrix::from_fn(n, n, |r, c| {
        let corr = m[(r, c)] / (m[(r, r)] * m[(c, c)]).sqrt();
        corr * rel_sd * v[r] * rel_sd * v[c]
    });
    QuotientInstance {
        b: DMatrix::from_row_slice(1, n, &b),
        a,
        v,
        cov,
    }
}

fn quotient_lemma(reg: &registry::QuotientLemma, exec: Execution) -> Checks {
    let s = "quotient-lemma";
    let mut out = Vec::new();

    // zero variance and b = a are exact
    let a = [0.7, 1.3, 1.1];
    let b = DMatrix::from_row_slice(1, 3, &[0.2, -0.4, 0.9]);
    let v = [1.2, 0.8, 1.0];
    let exact = (0.2 * 1.2 - 0.4 * 0.8 + 0.9) / (0.7 * 1.2 + 1.3 * 0.8 + 1.1);
    let (mean, cov) = quotient_moments(&a, &b, &v, &DMatrix::zeros(3, 3))?;
    out.push(Check::within_rel(s, "Var[v]=0: mean".into(), exact, mean[0], 0.0, 1.0));
    out.push(Check::at_most(s, "Var[v]=0: |cov|".into(), 0.0, cov[(0, 0)].abs()));
    let (mean, cov) = quotient_moments(
        &a,
        &DMatrix::from_row_slice(1, 3, &a),
        &v,
        &DMatrix::from_diagonal_element(3, 3, 0.01),
    )?;
    out.push(Check::within_rel(s, "b=a: mean".into(), 1.0, mean[0], 1e-15, 1.0));
    out.push(Check::at_most(s, "b=a: |cov|".into(), 1e-15, cov[(0, 0)].abs()));

    // Monte Carlo; instances run in sequence, each one's draws in parallel
    let mut worst_mean: Option<(f64, Check)> = None;
    let mut worst_var: Option<(f64, Check)> = None;
    let mut mean_fail = 0;
    let mut var_fail = 0;
    for i in 0..reg.instances {
        let inst = quotient_instance(reg, i);
        let (mean, cov) = quotient_moments(&inst.a, &inst.b, &inst.v, &inst.cov)?;
        let emp = empirical_quotient_moments(&inst.a, &inst.b, &inst.v, &inst.cov, mc(reg.draws, reg.seed, 1 + i, exec))?;
        let se = emp.mean_standard_errors[0];
        let z = (emp.mean[0] - mean[0]).abs() / se;
        let mc_mean = Check::within_se(s, format!("mean, worst of {} (#{i})", reg.instances), mean[0], emp.mean[0], se, reg.se_multiplier);
        mean_fail += usize::from(!mc_mean.pass);
        if worst_mean.as_ref().is_none_or(|(w, _)| z > *w) {
            worst_mean = Some((z, mc_mean));
        }
        let p = cov[(0, 0)];
        let rel = (emp.covariance[(0, 0)] / p - 1.0).abs();
        let mut mc_var = Check::within_rel(s, format!("variance, worst of {} (#{i})", reg.instances), p, emp.covariance[(0, 0)], reg.variance_rel_tol, p);
        mc_var.se = Some(emp.covariance_standard_errors[(0, 0)]);
        var_fail += usize::from(!mc_var.pass);
        if worst_var.as_ref().is_none_or(|(w, _)| rel > *w) {
            worst_var = Some((rel, mc_var));
        }
    }
    out.extend(worst_mean.map(|w| w.1));
    out.extend(worst_var.map(|w| w.1));
    out.push(Check::at_most(s, "mean failures".into(), 0.0, mean_fail as f64));
    out.push(Check::at_most(s, "variance failures".into(), 0.0, var_fail as f64));

    // specialization to the noise theorem
    let mut worst = 0.0f64;
    for i in 0..reg.identity_instances {
        let mut rng = instance_rng(reg.seed, 1 << 32, i);
        let n = rng.random_range(1..=30);
        let d = rng.random_range(1..=3);
        let nu = real(rng.random_range(0.2..3.0))?;
        let sigma = rng.random_range(0.01..0.3);
        let records: Vec<EvalRecord> = (0..n)
            .map(|_| {
                let x: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
                let f = rng.random_range(0.0..3.0);
                EvalRecord::new(Point::new(x).expect("finite"), f, nu).expect("finite")
            })
            .collect();
        let pred = noise_prediction(&records, nu, sigma, NoiseScale::Exact)?;
        let a: Vec<f64> = records.iter().map(|r| (-nu.re() * r.value).exp()).collect();
        let b = DMatrix::from_fn(d, n, |alpha, k| records[k].point[alpha] * a[k]);
        let w = pred.w_bar;
        let var = DMatrix::identity(n, n) * (w.powi(4) - w * w);
        let (mean, cov) = quotient_moments(&a, &b, &vec![w; n], &var)?;
        let expected: Vec<f64> = (0..d).map(|k| pred.eta_bar[k] + pred.mean_shift[k]).collect();
        worst = worse(worst, rel_diff(&mean, &expected));
        let cov_scale = pred.covariance.abs().max();
        if cov_scale > 0.0 {
            worst = worse(worst, (&cov - &pred.covariance).abs().max() / cov_scale);
        }
    }
    out.push(Check::at_most(
        s,
        format!("noise-theorem specialization, worst of {}", reg.identity_instances),
        reg.identity_tol,
        worst,
    ));
    Ok(out)
}

fn end_to_end(reg: &registry::EndToEnd, exec: Execution) -> Checks {
    let s = "end-to-end";
    let nu = real(reg.nu)?;
    let dim = reg.center.len();
    let dist = CuriosityDistribution::isotropic(Point::zeros(dim), reg.curiosity_variance)?;
    let init = point(&reg.initial_point)?;
    let target = point(&reg.center)?;
    let distances = map_indexed(reg.seeds as usize, exec, |k| -> barycenter::Result<f64> {
        let oracle = Oracle::new("sphere", std::sync::Arc::new(Sphere { center: reg.center.clone() }));
        let cfg = SearchConfig::new(nu, dist.clone(), init.clone(), reg.budget, reg.seed_base + k as u64);
        Ok(run_search(&cfg, &oracle)?.summary.final_readout.distance(&target))
    })
    .into_iter()
    .collect::<barycenter::Result<Vec<_>>>()?;
    let hits = distances.iter().filter(|&&d| d <= reg.radius).count() as f64;
    let mut c = Check::at_most(s, format!("seeds within {} of optimum (need ≥)", reg.radius), reg.required as f64, hits);
    c.pass = hits >= reg.required as f64;
    c.tolerance = format!(">= {}/{}", reg.required, reg.seeds);
    let mut sorted = distances.clone();
    sorted.sort_by(f64::total_cmp);
    let median = sorted[sorted.len() / 2];
    Ok(vec![c, Check::at_most(s, "median final distance".into(), reg.radius, median)])
}

/// `|x̂ − 0|` for the batch barycenter of a symmetric grid on `x² + c x³`.
pub fn asymmetry_biases(reg: &registry::Asymmetry) -> barycenter::Result<Vec<f64>> {
    reg.nus
        .iter()
        .map(|&nu| {
            let nu = real(nu)?;
            let records = (0..reg.points)
                .map(|i| {
                    let x = -reg.half_width + 2.0 * reg.half_width * i as f64 / (reg.points - 1) as f64;
                    EvalRecord::new(point(&[x])?, x * x + reg.cubic * x * x * x, nu)
                })
                .collect::<barycenter::Result<Vec<_>>>()?;
            Ok(batch_barycenter(&records, nu)?[0].abs())
        })
        .collect()
}

fn asymmetry(reg: &registry::Asymmetry) -> Checks {
    let s = "asymmetry";
    let bias = asymmetry_biases(reg)?;
    Ok(bias
        .windows(2)
        .zip(reg.nus.windows(2))
        .map(|(b, nu)| {
            let mut c = Check::at_most(s, format!("|bias| ν={} < ν={}", nu[1], nu[0]), b[0], b[1]);
            c.pass = b[1] < b[0];
            c.tolerance = "strictly less".into();
            c
        })
        .collect())
}
