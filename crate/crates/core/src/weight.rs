//! Log-offset storage for `e^{-ν f}`.
//!
//! A weight is kept as `factor · e^{log_scale}` with `|factor| <= 1`. Sums
//! re-express both operands relative to the larger offset before adding, so
//! the exponentials that are actually evaluated never exceed one.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::Exponent;

/// Factors whose magnitude drops below this are folded back into the offset.
const RENORM_FLOOR: f64 = 7.006_492_321_624_085e-46; // 2^-150
/// Sums smaller than this relative to the larger operand are exact cancellations.
const ZERO_FLOOR: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaledComplexWeight {
    log_scale: f64,
    factor: Complex64,
}

impl ScaledComplexWeight {
    pub const ZERO: Self = ScaledComplexWeight {
        log_scale: 0.0,
        factor: Complex64::new(0.0, 0.0),
    };

    pub const ONE: Self = ScaledComplexWeight {
        log_scale: 0.0,
        factor: Complex64::new(1.0, 0.0),
    };

    /// Builds `factor · e^{log_scale}`, normalizing `factor` into the unit disk.
    pub fn from_parts(log_scale: f64, factor: Complex64) -> Result<Self> {
        if !log_scale.is_finite() || !factor.re.is_finite() || !factor.im.is_finite() {
            return Err(Error::Decode(format!(
                "non-finite weight {factor} * e^{log_scale}"
            )));
        }
        Ok(ScaledComplexWeight { log_scale, factor }.normalized())
    }

    /// Like [`from_parts`](Self::from_parts) but keeps the factor bit-for-bit.
    pub(crate) fn from_raw(log_scale: f64, factor: Complex64) -> Result<Self> {
        if !log_scale.is_finite() || !factor.re.is_finite() || !factor.im.is_finite() || factor.norm() > 1.0 + 1e-15 {
            return Err(Error::Decode(format!("invalid weight {factor} * e^{log_scale}")));
        }
        Ok(ScaledComplexWeight { log_scale, factor })
    }

    /// The positive real weight `e^{ln_magnitude}`.
    pub fn from_ln(ln_magnitude: f64) -> Self {
        if ln_magnitude == f64::NEG_INFINITY {
            return Self::ZERO;
        }
        ScaledComplexWeight {
            log_scale: ln_magnitude,
            factor: Complex64::new(1.0, 0.0),
        }
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    pub fn factor(&self) -> Complex64 {
        self.factor
    }

    pub fn is_zero(&self) -> bool {
        self.factor.re == 0.0 && self.factor.im == 0.0
    }

    /// Natural log of `|w|`; `-inf` for the zero weight.
    pub fn ln_magnitude(&self) -> f64 {
        if self.is_zero() {
            f64::NEG_INFINITY
        } else {
            self.log_scale + self.factor.norm().ln()
        }
    }

    /// `|w|` as a plain float. May overflow to `inf` or underflow to 0.
    pub fn magnitude(&self) -> f64 {
        self.ln_magnitude().exp()
    }

    /// The represented value. May overflow or underflow.
    pub fn value(&self) -> Complex64 {
        self.factor * self.log_scale.exp()
    }

    /// `|w|` as a real positive weight with the same offset.
    pub fn abs(&self) -> Self {
        ScaledComplexWeight {
            log_scale: self.log_scale,
            factor: Complex64::new(self.factor.norm(), 0.0),
        }
        .normalized()
    }

    /// `w / other` evaluated without forming either value.
    pub fn ratio(&self, other: &Self) -> Complex64 {
        if self.is_zero() {
            return Complex64::new(0.0, 0.0);
        }
        (self.factor / other.factor) * (self.log_scale - other.log_scale).exp()
    }

    pub fn add(&self, other: &Self) -> Self {
        if other.is_zero() {
            return *self;
        }
        if self.is_zero() {
            return *other;
        }
        let (big, small) = if self.log_scale >= other.log_scale {
            (self, other)
        } else {
            (other, self)
        };
        let factor = big.factor + small.factor * (small.log_scale - big.log_scale).exp();
        if factor.norm() < ZERO_FLOOR {
            return Self::ZERO;
        }
        ScaledComplexWeight {
            log_scale: big.log_scale,
            factor,
        }
        .normalized()
    }

    /// Multiplies by a positive real `s`.
    pub fn scale(&self, s: f64) -> Self {
        debug_assert!(s > 0.0);
        if self.is_zero() {
            return *self;
        }
        ScaledComplexWeight {
            log_scale: self.log_scale,
            factor: self.factor * s,
        }
        .normalized()
    }

    /// Multiplies by `e^{exponent}`.
    pub fn mul_exp(&self, exponent: Complex64) -> Self {
        if self.is_zero() {
            return *self;
        }
        ScaledComplexWeight {
            log_scale: self.log_scale + exponent.re,
            factor: self.factor * Complex64::from_polar(1.0, exponent.im),
        }
        .normalized()
    }

    fn normalized(self) -> Self {
        let m = self.factor.norm();
        if m == 0.0 {
            return Self::ZERO;
        }
        if m > 1.0 || m < RENORM_FLOOR {
            let mut factor = self.factor / m;
            if factor.norm() > 1.0 {
                factor *= 1.0 - f64::EPSILON;
            }
            ScaledComplexWeight {
                log_scale: self.log_scale + m.ln(),
                factor,
            }
        } else {
            self
        }
    }
}

/// The weight `e^{-ν·value}` in log-offset form.
pub fn weight_of(value: f64, nu: Exponent) -> Result<ScaledComplexWeight> {
    if !value.is_finite() {
        return Err(Error::InvalidValue(value));
    }
    let log_scale = -nu.re() * value;
    if !log_scale.is_finite() {
        return Err(Error::InvalidValue(value));
    }
    Ok(ScaledComplexWeight {
        log_scale,
        factor: Complex64::from_polar(1.0, -nu.im() * value),
    })
}
