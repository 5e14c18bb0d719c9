//! Affine shift of a search box into the positive orthant.
//!
//! Complex-ν barycenters read out `|η|` coordinate-wise, which is only
//! meaningful for nonnegative coordinates. A box `[min, max]` is moved by
//! `t = max(0, −min)`; the search runs in shifted coordinates and results are
//! reported after subtracting `t` again.

use barycenter::{Error, Point, SearchBox, SearchConfig, ZeroOrderOracle};
use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoxShift {
    pub offset: Vec<f64>,
    pub shifted_min: Vec<f64>,
    pub shifted_max: Vec<f64>,
}

pub fn shift_box(min: &[f64], max: &[f64]) -> Result<BoxShift, Error> {
    let b = SearchBox::new(Point::new(min.to_vec())?, Point::new(max.to_vec())?)?;
    let offset: Vec<f64> = b.min().iter().map(|&m| (-m).max(0.0)).collect();
    Ok(BoxShift {
        shifted_min: shift(b.min(), &offset),
        shifted_max: shift(b.max(), &offset),
        offset,
    })
}

pub fn shift(x: &[f64], offset: &[f64]) -> Vec<f64> {
    x.iter().zip(offset).map(|(a, t)| a + t).collect()
}

pub fn unshift(y: &[f64], offset: &[f64]) -> Vec<f64> {
    y.iter().zip(offset).map(|(a, t)| a - t).collect()
}

/// Offset applied to a search, or zeros when none is needed.
pub fn config_offset(cfg: &SearchConfig) -> Vec<f64> {
    match &cfg.bounds {
        Some(b) if !cfg.nu.is_real() => b.min().iter().map(|&m| (-m).max(0.0)).collect(),
        _ => vec![0.0; cfg.dim()],
    }
}

/// The same search expressed in shifted coordinates.
pub fn shift_config(cfg: &SearchConfig) -> SearchConfig {
    let t = config_offset(cfg);
    if t.iter().all(|&v| v == 0.0) {
        return cfg.clone();
    }
    let moved = |p: &Point| Point::new(shift(p, &t)).expect("finite shift");
    let mut out = cfg.clone();
    out.initial_point = moved(&cfg.initial_point);
    out.bounds = cfg
        .bounds
        .as_ref()
        .map(|b| SearchBox::new(moved(b.min()), moved(b.max())).expect("shift keeps box order"));
    out.script = cfg.script.as_ref().map(|s| s.iter().map(moved).collect());
    out
}

/// An oracle queried in shifted coordinates: `g(y) = f(y − t)`.
pub struct ShiftedOracle<'a> {
    inner: &'a dyn ZeroOrderOracle,
    offset: Vec<f64>,
}

impl<'a> ShiftedOracle<'a> {
    pub fn new(inner: &'a dyn ZeroOrderOracle, offset: Vec<f64>) -> Self {
        ShiftedOracle { inner, offset }
    }
}

impl ZeroOrderOracle for ShiftedOracle<'_> {
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn query(&self, y: &Point) -> barycenter::Result<f64> {
        self.inner.query(&Point::new(unshift(y, &self.offset))?)
    }

    fn query_count(&self) -> u64 {
        self.inner.query_count()
    }
}
