//! Streaming barycenter.
//!
//! An [`Accumulator`] holds the total mass `m_n`, the weighted mean `η_n`
//! and the last barycenter step. Updates are value-returning:
//!
//! ```text
//! m_n = λ_n m_{n-1} + e^{-ν f(x_n)}
//! η_n = (λ_n m_{n-1} η_{n-1} + e^{-ν f(x_n)} x_n) / m_n
//! ```
//!
//! with `λ_n = 1` for [`Accumulator::absorb`]. Two accumulators over disjoint
//! query sets combine with [`Accumulator::merge`]:
//! `η = (m_A η_A + m_B η_B) / (m_A + m_B)`.
//!
//! Besides the signed mass the accumulator keeps the gross mass `Σ |w_i|`
//! (discounted the same way). For complex `ν` a signed mass below
//! `1e-12` of the gross mass is reported as [`Error::DegenerateMass`].

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::batch::{check_orthant, CANCELLATION_TOL};
use crate::error::{Error, Result};
use crate::point::{Exponent, Point};
use crate::weight::{weight_of, ScaledComplexWeight};

#[derive(Clone, Debug, PartialEq)]
pub struct Accumulator {
    nu: Exponent,
    dim: usize,
    mass: ScaledComplexWeight,
    gross: ScaledComplexWeight,
    eta: Option<Vec<Complex64>>,
    count: u64,
    last_step: Option<Point>,
}

impl Accumulator {
    pub fn new(nu: Exponent, dim: usize) -> Self {
        assert!(dim > 0, "accumulator dimension must be positive");
        Accumulator {
            nu,
            dim,
            mass: ScaledComplexWeight::ZERO,
            gross: ScaledComplexWeight::ZERO,
            eta: None,
            count: 0,
            last_step: None,
        }
    }

    pub fn nu(&self) -> Exponent {
        self.nu
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mass(&self) -> ScaledComplexWeight {
        self.mass
    }

    /// `Σ |w_i|`, discounted like the mass.
    pub fn gross_mass(&self) -> ScaledComplexWeight {
        self.gross
    }

    pub fn eta(&self) -> Option<&[Complex64]> {
        self.eta.as_deref()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// `x̂_n - x̂_{n-1}` from the most recent absorb, if there was a previous estimate.
    pub fn last_step(&self) -> Option<&Point> {
        self.last_step.as_ref()
    }

    pub fn absorb(&self, point: &Point, value: f64) -> Result<Accumulator> {
        self.absorb_discounted(point, value, 1.0)
    }

    pub fn absorb_forgetting(&self, point: &Point, value: f64, lambda: f64) -> Result<Accumulator> {
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::InvalidForgetting(lambda));
        }
        self.absorb_discounted(point, value, lambda)
    }

    fn absorb_discounted(&self, point: &Point, value: f64, lambda: f64) -> Result<Accumulator> {
        point.check_dim(self.dim)?;
        check_orthant(point, self.nu)?;
        let w = weight_of(value, self.nu)?;

        let Some(eta) = &self.eta else {
            return Ok(Accumulator {
                mass: w,
                gross: w.abs(),
                eta: Some(point.iter().map(|&x| Complex64::new(x, 0.0)).collect()),
                count: 1,
                last_step: None,
                ..self.clone()
            });
        };

        let prev = if lambda == 1.0 {
            self.mass
        } else {
            self.mass.scale(lambda)
        };
        let prev_gross = if lambda == 1.0 {
            self.gross
        } else {
            self.gross.scale(lambda)
        };
        let mass = prev.add(&w);
        let gross = prev_gross.add(&w.abs());
        check_mass(&mass, &gross)?;

        let keep = prev.ratio(&mass);
        let gain = w.ratio(&mass);
        let eta_new: Vec<Complex64> = eta
            .iter()
            .zip(point.iter())
            .map(|(e, &x)| between(self.nu, keep * e + gain * x, e.re, x))
            .collect();

        let old = readout_of(self.nu, eta);
        let new = readout_of(self.nu, &eta_new);
        Ok(Accumulator {
            mass,
            gross,
            eta: Some(eta_new),
            count: self.count + 1,
            last_step: Some(Point::new(new.iter().zip(&old).map(|(a, b)| a - b).collect())?),
            ..self.clone()
        })
    }

    /// Switches to `nu_new`, correcting the mass by `e^{(ν_new - ν_old) f(x̂)}`.
    ///
    /// The caller supplies `f(x̂_{n-1})`; the barycenter itself is unchanged.
    pub fn reschedule_nu(&self, nu_new: Exponent, f_at_barycenter: f64) -> Result<Accumulator> {
        if self.count == 0 {
            return Err(Error::EmptyAccumulator);
        }
        if !f_at_barycenter.is_finite() {
            return Err(Error::InvalidValue(f_at_barycenter));
        }
        if nu_new == self.nu {
            return Ok(self.clone());
        }
        let exponent = (nu_new.value() - self.nu.value()) * f_at_barycenter;
        let mass = self.mass.mul_exp(exponent);
        let gross = self.gross.mul_exp(Complex64::new(exponent.re, 0.0));
        if !mass.log_scale().is_finite() || mass.is_zero() {
            return Err(Error::DegenerateMass);
        }
        Ok(Accumulator {
            nu: nu_new,
            mass,
            gross,
            ..self.clone()
        })
    }

    /// Combines accumulators built from disjoint query sets.
    pub fn merge(&self, other: &Accumulator) -> Result<Accumulator> {
        if self.nu != other.nu {
            return Err(Error::ExponentMismatch);
        }
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: other.dim,
            });
        }
        let (a, b) = match (&self.eta, &other.eta) {
            (None, _) => return Ok(other.clone()),
            (_, None) => return Ok(self.clone()),
            (Some(a), Some(b)) => (a, b),
        };
        let mass = self.mass.add(&other.mass);
        let gross = self.gross.add(&other.gross);
        check_mass(&mass, &gross)?;
        let ra = self.mass.ratio(&mass);
        let rb = other.mass.ratio(&mass);
        Ok(Accumulator {
            nu: self.nu,
            dim: self.dim,
            mass,
            gross,
            eta: Some(
                a.iter()
                    .zip(b)
                    .map(|(x, y)| between(self.nu, ra * x + rb * y, x.re, y.re))
                    .collect(),
            ),
            count: self.count + other.count,
            last_step: None,
        })
    }

    /// The point estimate: `Re η` for real `ν`, `|η|` per coordinate otherwise.
    pub fn readout(&self) -> Result<Point> {
        let eta = self.eta.as_ref().ok_or(Error::EmptyAccumulator)?;
        Point::new(readout_of(self.nu, eta))
    }

    pub fn to_record(&self) -> AccumulatorRecord {
        let eta = self.eta.clone().unwrap_or_default();
        AccumulatorRecord {
            nu_re: self.nu.re(),
            nu_im: self.nu.im(),
            dim: self.dim,
            count: self.count,
            log_scale: self.mass.log_scale(),
            factor_re: self.mass.factor().re,
            factor_im: self.mass.factor().im,
            gross_log_scale: self.gross.log_scale(),
            gross_factor: self.gross.factor().re,
            eta_re: eta.iter().map(|c| c.re).collect(),
            eta_im: eta.iter().map(|c| c.im).collect(),
            last_step: self.last_step.clone().map(Point::into_vec),
        }
    }

    pub fn from_record(r: &AccumulatorRecord) -> Result<Accumulator> {
        let nu = Exponent::new(r.nu_re, r.nu_im)?;
        if r.dim == 0 {
            return Err(Error::Decode("zero dimension".into()));
        }
        let mass = ScaledComplexWeight::from_raw(r.log_scale, Complex64::new(r.factor_re, r.factor_im))?;
        let gross = ScaledComplexWeight::from_raw(r.gross_log_scale, Complex64::new(r.gross_factor, 0.0))?;
        let eta = if r.count == 0 {
            if !r.eta_re.is_empty() || !mass.is_zero() {
                return Err(Error::Decode("empty accumulator with state".into()));
            }
            None
        } else {
            if r.eta_re.len() != r.dim || r.eta_im.len() != r.dim || mass.is_zero() {
                return Err(Error::Decode("eta length or mass inconsistent".into()));
            }
            Some(r.eta_re.iter().zip(&r.eta_im).map(|(&re, &im)| Complex64::new(re, im)).collect())
        };
        let last_step = r.last_step.clone().map(Point::new).transpose()?;
        Ok(Accumulator {
            nu,
            dim: r.dim,
            mass,
            gross,
            eta,
            count: r.count,
            last_step,
        })
    }

    /// Checkpoint as a JSON document.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_record()).expect("accumulator record serializes")
    }

    pub fn from_json(text: &str) -> Result<Accumulator> {
        let record: AccumulatorRecord =
            serde_json::from_str(text).map_err(|e| Error::Decode(e.to_string()))?;
        Self::from_record(&record)
    }
}

/// Flat checkpoint form of an [`Accumulator`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccumulatorRecord {
    pub nu_re: f64,
    pub nu_im: f64,
    pub dim: usize,
    pub count: u64,
    pub log_scale: f64,
    pub factor_re: f64,
    pub factor_im: f64,
    pub gross_log_scale: f64,
    pub gross_factor: f64,
    pub eta_re: Vec<f64>,
    pub eta_im: Vec<f64>,
    pub last_step: Option<Vec<f64>>,
}

impl Serialize for Accumulator {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_record().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Accumulator {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = AccumulatorRecord::deserialize(d)?;
        Accumulator::from_record(&r).map_err(serde::de::Error::custom)
    }
}

/// For real `ν` a mixture of `a` and `b` is pinned to `[min(a,b), max(a,b)]`,
/// so rounding cannot carry the estimate outside the hull of the queries.
fn between(nu: Exponent, z: Complex64, a: f64, b: f64) -> Complex64 {
    if nu.is_real() {
        Complex64::new(z.re.clamp(a.min(b), a.max(b)), z.im)
    } else {
        z
    }
}

fn readout_of(nu: Exponent, eta: &[Complex64]) -> Vec<f64> {
    if nu.is_real() {
        eta.iter().map(|c| c.re).collect()
    } else {
        eta.iter().map(|c| c.norm()).collect()
    }
}

fn check_mass(mass: &ScaledComplexWeight, gross: &ScaledComplexWeight) -> Result<()> {
    if mass.is_zero() || mass.ratio(gross).norm() <= CANCELLATION_TOL {
        return Err(Error::DegenerateMass);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::batch::{batch_barycenter, forgetting_batch_barycenter, EvalRecord};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn p(x: &[f64]) -> Point {
        Point::new(x.to_vec()).unwrap()
    }

    fn real(nu: f64) -> Exponent {
        Exponent::real(nu).unwrap()
    }

    fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
        let scale = a.iter().chain(b).fold(1.0f64, |m, v| m.max(v.abs()));
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
    }

    fn build(nu: Exponent, recs: &[(Vec<f64>, f64)]) -> Accumulator {
        recs.iter().fold(Accumulator::new(nu, recs[0].0.len()), |acc, (x, f)| {
            acc.absorb(&p(x), *f).unwrap()
        })
    }

    #[test]
    fn first_absorb_is_exact() {
        let nu = real(2.0);
        let acc = Accumulator::new(nu, 2).absorb(&p(&[0.3, -7.1]), 1.5).unwrap();
        assert_eq!(acc.readout().unwrap(), p(&[0.3, -7.1]));
        assert_eq!(acc.mass(), weight_of(1.5, nu).unwrap());
        assert_eq!(acc.count(), 1);
        assert!(acc.last_step().is_none());

        let cnu = Exponent::new(1.0, 3.0).unwrap();
        let acc = Accumulator::new(cnu, 1).absorb(&p(&[2.5]), 0.7).unwrap();
        assert_eq!(acc.readout().unwrap(), p(&[2.5]));
    }

    #[test]
    fn huge_value_leaves_barycenter_in_place() {
        let nu = real(1.0);
        let acc = Accumulator::new(nu, 1).absorb(&p(&[1.0]), 0.0).unwrap();
        let after = acc.absorb(&p(&[100.0]), 1e6).unwrap();
        let x = after.readout().unwrap()[0];
        assert!(x.is_finite());
        assert!((x - 1.0).abs() <= 1e-200);
        assert_eq!(after.count(), 2);
    }

    #[test]
    fn empty_readout_fails() {
        assert_eq!(Accumulator::new(real(1.0), 3).readout(), Err(Error::EmptyAccumulator));
    }

    #[test]
    fn step_identity_with_curiosity() {
        // x̂_n - x̂_{n-1} = w_n/(m_{n-1}+w_n) z_n
        let nu = real(1.5);
        let acc = build(nu, &[(vec![0.0, 0.0], 0.4), (vec![1.0, -1.0], 0.9)]);
        let center = acc.readout().unwrap();
        let z = [0.25, -0.5];
        let x = p(&[center[0] + z[0], center[1] + z[1]]);
        let f = 0.2;
        let next = acc.absorb(&x, f).unwrap();
        let w = weight_of(f, nu).unwrap();
        let gain = w.ratio(&acc.mass().add(&w)).re;
        assert!(gain > 0.0 && gain <= 1.0);
        let step = next.last_step().unwrap();
        for a in 0..2 {
            assert!((step[a] - gain * z[a]).abs() <= 1e-12 * z[a].abs());
        }
    }

    #[test]
    fn forgetting_examples() {
        let nu = real(1.0);
        let pts = [(vec![0.0], 0.3), (vec![2.0], 0.1), (vec![5.0], 0.7), (vec![-1.0], 0.0)];
        let plain = build(nu, &pts);
        let ones = pts.iter().fold(Accumulator::new(nu, 1), |a, (x, f)| {
            a.absorb_forgetting(&p(x), *f, 1.0).unwrap()
        });
        assert!(rel_diff(&plain.readout().unwrap(), &ones.readout().unwrap()) <= 1e-12);

        let lambda = 0.6;
        let stream = pts.iter().fold(Accumulator::new(nu, 1), |a, (x, f)| {
            a.absorb_forgetting(&p(x), *f, lambda).unwrap()
        });
        let recs: Vec<_> = pts.iter().map(|(x, f)| EvalRecord::new(p(x), *f, nu).unwrap()).collect();
        let batch = forgetting_batch_barycenter(&recs, nu, lambda).unwrap();
        assert!(rel_diff(&stream.readout().unwrap(), &batch) <= 1e-10);

        let nearly_forgotten = plain.absorb_forgetting(&p(&[7.0]), 3.0, 1e-12).unwrap();
        assert!(nearly_forgotten.readout().unwrap().distance(&p(&[7.0])) <= 1e-6);

        assert_eq!(
            plain.absorb_forgetting(&p(&[1.0]), 0.0, 0.0),
            Err(Error::InvalidForgetting(0.0))
        );
        assert_eq!(
            plain.absorb_forgetting(&p(&[1.0]), 0.0, 1.01),
            Err(Error::InvalidForgetting(1.01))
        );
    }

    #[test]
    fn reschedule_examples() {
        let acc = build(real(1.0), &[(vec![0.0], 0.5), (vec![1.0], 1.5)]);
        assert_eq!(acc.reschedule_nu(real(1.0), 3.0).unwrap(), acc);

        let r = acc.reschedule_nu(real(2.0), 0.0).unwrap();
        assert_eq!(r.nu(), real(2.0));
        assert!((r.mass().ln_magnitude() - acc.mass().ln_magnitude()).abs() < 1e-15);
        assert_eq!(r.readout().unwrap(), acc.readout().unwrap());

        let r = acc.reschedule_nu(real(2.0), 3.0).unwrap();
        let ratio = r.mass().ratio(&acc.mass());
        assert!((ratio.re - 3.0f64.exp()).abs() <= 1e-13 * 3.0f64.exp());
        assert_eq!(ratio.im, 0.0);

        // subsequent absorbs weigh with the new exponent
        let next = r.absorb(&p(&[4.0]), 0.25).unwrap();
        let expected = r.mass().add(&weight_of(0.25, real(2.0)).unwrap());
        assert!((next.mass().ln_magnitude() - expected.ln_magnitude()).abs() < 1e-14);

        assert_eq!(
            Accumulator::new(real(1.0), 1).reschedule_nu(real(2.0), 0.0),
            Err(Error::EmptyAccumulator)
        );
        assert!(matches!(
            acc.reschedule_nu(real(2.0), f64::NAN),
            Err(Error::InvalidValue(_))
        ));
    }

    #[test]
    fn merge_errors_and_identity() {
        let a = build(real(1.0), &[(vec![0.0], 0.5)]);
        let b = build(real(2.0), &[(vec![0.0], 0.5)]);
        assert_eq!(a.merge(&b), Err(Error::ExponentMismatch));
        let c = build(real(1.0), &[(vec![0.0, 1.0], 0.5)]);
        assert!(matches!(a.merge(&c), Err(Error::DimensionMismatch { .. })));
        let empty = Accumulator::new(real(1.0), 1);
        assert_eq!(empty.merge(&a).unwrap(), a);
        assert_eq!(a.merge(&empty).unwrap(), a);
    }

    #[test]
    fn complex_cancellation_in_merge_is_degenerate() {
        let nu = Exponent::new(0.0, PI).unwrap();
        let a = build(nu, &[(vec![0.0], 0.0)]);
        let b = build(nu, &[(vec![1.0], 1.0)]);
        assert_eq!(a.merge(&b), Err(Error::DegenerateMass));
        assert_eq!(a.absorb(&p(&[1.0]), 1.0), Err(Error::DegenerateMass));
    }

    #[test]
    fn complex_modulus_readout() {
        let acc = Accumulator {
            eta: Some(vec![Complex64::new(3.0, 4.0)]),
            count: 1,
            mass: ScaledComplexWeight::ONE,
            gross: ScaledComplexWeight::ONE,
            ..Accumulator::new(Exponent::new(1.0, 1.0).unwrap(), 1)
        };
        assert_eq!(acc.readout().unwrap(), p(&[5.0]));
    }

    #[test]
    fn json_roundtrip_is_bit_exact() {
        let nu = Exponent::new(0.7, 2.3).unwrap();
        let acc = build(
            nu,
            &[(vec![0.1, 3.0], 0.123_456_789), (vec![2.0, 0.0], -4.4), (vec![1e-7, 9.5], 1e3)],
        );
        let text = acc.to_json();
        let back = Accumulator::from_json(&text).unwrap();
        assert_eq!(back.to_record(), acc.to_record());
        let bits = |a: &Accumulator| {
            let r = a.to_record();
            r.eta_re.iter().chain(&r.eta_im).chain([&r.log_scale, &r.factor_re, &r.factor_im])
                .map(|v| v.to_bits()).collect::<Vec<_>>()
        };
        assert_eq!(bits(&back), bits(&acc));
        assert_eq!(Accumulator::from_json(&Accumulator::new(nu, 2).to_json()).unwrap(), Accumulator::new(nu, 2));
        assert!(Accumulator::from_json(r#"{"nu_re":1}"#).is_err());
    }

    fn records_strategy(max_n: usize) -> impl Strategy<Value = (Vec<(Vec<f64>, f64)>, f64)> {
        (1usize..=8).prop_flat_map(move |dim| {
            (
                prop::collection::vec(
                    (prop::collection::vec(-10.0f64..10.0, dim), -3.0f64..3.0),
                    1..=max_n,
                ),
                0.1f64..10.0,
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn streaming_matches_batch((recs, nu) in records_strategy(200)) {
            let nu = real(nu);
            let acc = build(nu, &recs);
            let batch: Vec<_> = recs.iter().map(|(x, f)| EvalRecord::new(p(x), *f, nu).unwrap()).collect();
            let expect = batch_barycenter(&batch, nu).unwrap();
            prop_assert!(rel_diff(&acc.readout().unwrap(), &expect) <= 1e-10);
            prop_assert!(acc.eta().unwrap().iter().all(|c| c.im == 0.0));
        }

        #[test]
        fn merge_algebra((recs, nu) in records_strategy(60), cut1 in 0.0f64..1.0, cut2 in 0.0f64..1.0) {
            let nu = real(nu);
            let n = recs.len();
            let (i, j) = {
                let a = (cut1 * n as f64) as usize;
                let b = (cut2 * n as f64) as usize;
                (a.min(b), a.max(b))
            };
            let dim = recs[0].0.len();
            let part = |s: &[(Vec<f64>, f64)]| s.iter().fold(Accumulator::new(nu, dim), |acc, (x, f)| acc.absorb(&p(x), *f).unwrap());
            let (a, b, c) = (part(&recs[..i]), part(&recs[i..j]), part(&recs[j..]));
            let ab = a.merge(&b).unwrap();
            let ba = b.merge(&a).unwrap();
            if !ab.is_empty() {
                prop_assert!(rel_diff(&ab.readout().unwrap(), &ba.readout().unwrap()) <= 1e-12);
            }
            let left = ab.merge(&c).unwrap();
            let right = a.merge(&b.merge(&c).unwrap()).unwrap();
            prop_assert!(rel_diff(&left.readout().unwrap(), &right.readout().unwrap()) <= 1e-12);
            let batch: Vec<_> = recs.iter().map(|(x, f)| EvalRecord::new(p(x), *f, nu).unwrap()).collect();
            prop_assert!(rel_diff(&left.readout().unwrap(), &batch_barycenter(&batch, nu).unwrap()) <= 1e-10);
            prop_assert_eq!(left.count(), n as u64);
        }
    }
}
