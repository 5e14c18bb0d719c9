use std::fmt;
use std::ops::Deref;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point of the search space, `n_x >= 1` finite coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() || coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidPoint);
        }
        Ok(Point(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "point dimension must be positive");
        Point(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn distance(&self, other: &Point) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub(crate) fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: self.dim(),
            });
        }
        Ok(())
    }
}

impl Deref for Point {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;

    fn try_from(coords: Vec<f64>) -> Result<Self> {
        Point::new(coords)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Vec<f64> {
        p.0
    }
}

/// The weighting exponent `ν`.
///
/// Real exponents (`im == 0`) give the ordinary barycenter. A nonzero imaginary
/// part turns the weights into phasors whose sum cancels over regions where the
/// goal function changes quickly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ExponentRepr", into = "ExponentRepr")]
pub struct Exponent(Complex64);

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExponentRepr {
    re: f64,
    #[serde(default)]
    im: f64,
}

impl Exponent {
    pub fn new(re: f64, im: f64) -> Result<Self> {
        if !re.is_finite() || !im.is_finite() || re < 0.0 || (re == 0.0 && im == 0.0) {
            return Err(Error::InvalidExponent { re, im });
        }
        Ok(Exponent(Complex64::new(re, im)))
    }

    pub fn real(nu: f64) -> Result<Self> {
        Self::new(nu, 0.0)
    }

    pub fn value(&self) -> Complex64 {
        self.0
    }

    pub fn re(&self) -> f64 {
        self.0.re
    }

    pub fn im(&self) -> f64 {
        self.0.im
    }

    pub fn is_real(&self) -> bool {
        self.0.im == 0.0
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_real() {
            write!(f, "{}", self.0.re)
        } else {
            write!(f, "{}{:+}i", self.0.re, self.0.im)
        }
    }
}

impl TryFrom<ExponentRepr> for Exponent {
    type Error = Error;

    fn try_from(r: ExponentRepr) -> Result<Self> {
        Exponent::new(r.re, r.im)
    }
}

impl From<Exponent> for ExponentRepr {
    fn from(e: Exponent) -> Self {
        ExponentRepr {
            re: e.re(),
            im: e.im(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_points() {
        assert_eq!(Point::new(vec![]), Err(Error::InvalidPoint));
        assert_eq!(Point::new(vec![1.0, f64::NAN]), Err(Error::InvalidPoint));
        assert!(serde_json::from_str::<Point>("[]").is_err());
    }

    #[test]
    fn exponent_domain() {
        assert!(Exponent::new(1.0, 3.0).is_ok());
        assert!(Exponent::new(0.0, std::f64::consts::PI).is_ok());
        assert!(Exponent::new(0.0, 0.0).is_err());
        assert!(Exponent::new(-1.0, 0.0).is_err());
        assert!(Exponent::real(f64::INFINITY).is_err());
        let e: Exponent = serde_json::from_str(r#"{"re": 2.0}"#).unwrap();
        assert!(e.is_real());
        assert!(serde_json::from_str::<Exponent>(r#"{"re": 2.0, "x": 1}"#).is_err());
    }
}
