//! Block-structured Monte Carlo with mergeable moment accumulators.
//!
//! Samples are grouped into blocks of [`BLOCK`] draws. Block `b` owns the
//! random stream `key.at(b)`, accumulates its own moments, and block results
//! are merged in index order. The estimate is thus bit-identical whether the
//! blocks run sequentially or on the rayon pool.

use nalgebra::DMatrix;

use crate::exec::{map_indexed, Execution};
use crate::rng::{StreamKey, StreamRng};

pub const BLOCK: u64 = 2048;

/// Running mean and co-moment of a vector-valued sample (Chan et al. merge).
#[derive(Clone, Debug, PartialEq)]
pub struct VectorMoments {
    count: u64,
    mean: Vec<f64>,
    comoment: Vec<f64>,
}

impl VectorMoments {
    pub fn new(dim: usize) -> Self {
        VectorMoments {
            count: 0,
            mean: vec![0.0; dim],
            comoment: vec![0.0; dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn push(&mut self, x: &[f64]) {
        let d = self.dim();
        debug_assert_eq!(x.len(), d);
        self.count += 1;
        let n = self.count as f64;
        let delta: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        for (m, dl) in self.mean.iter_mut().zip(&delta) {
            *m += dl / n;
        }
        for i in 0..d {
            let post_i = x[i] - self.mean[i];
            for j in 0..d {
                self.comoment[i * d + j] += delta[j] * post_i;
            }
        }
    }

    pub fn merge(&mut self, other: &VectorMoments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let d = self.dim();
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let delta: Vec<f64> = other.mean.iter().zip(&self.mean).map(|(b, a)| b - a).collect();
        for i in 0..d {
            for j in 0..d {
                self.comoment[i * d + j] +=
                    other.comoment[i * d + j] + delta[i] * delta[j] * na * nb / n;
            }
        }
        for (m, dl) in self.mean.iter_mut().zip(&delta) {
            *m += dl * nb / n;
        }
        self.count += other.count;
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Unbiased sample covariance.
    pub fn covariance(&self) -> DMatrix<f64> {
        let d = self.dim();
        let denom = (self.count.max(2) - 1) as f64;
        DMatrix::from_fn(d, d, |i, j| {
            0.5 * (self.comoment[i * d + j] + self.comoment[j * d + i]) / denom
        })
    }

    pub fn variance(&self, i: usize) -> f64 {
        self.covariance()[(i, i)]
    }

    /// Standard error of each mean component.
    pub fn standard_errors(&self) -> Vec<f64> {
        let cov = self.covariance();
        (0..self.dim())
            .map(|i| (cov[(i, i)] / self.count as f64).sqrt())
            .collect()
    }

    /// Normal-theory standard errors of the covariance entries,
    /// `sqrt((σ_ii σ_jj + σ_ij²) / (N - 1))`.
    pub fn covariance_standard_errors(&self) -> DMatrix<f64> {
        let cov = self.covariance();
        let d = self.dim();
        let denom = (self.count.max(2) - 1) as f64;
        DMatrix::from_fn(d, d, |i, j| {
            ((cov[(i, i)] * cov[(j, j)] + cov[(i, j)] * cov[(i, j)]) / denom).sqrt()
        })
    }
}

/// Draws `samples` vectors of length `dim` with `sample(rng, out)` and
/// returns their moments.
pub fn sample_moments<F>(
    samples: u64,
    key: StreamKey,
    dim: usize,
    exec: Execution,
    sample: F,
) -> VectorMoments
where
    F: Fn(&mut StreamRng, &mut [f64]) + Sync + Send,
{
    let blocks = samples.div_ceil(BLOCK);
    let partials = map_indexed(blocks as usize, exec, |b| {
        let mut rng = key.at(b as u64);
        let mut acc = VectorMoments::new(dim);
        let mut buf = vec![0.0; dim];
        let len = BLOCK.min(samples - b as u64 * BLOCK);
        for _ in 0..len {
            sample(&mut rng, &mut buf);
            acc.push(&buf);
        }
        acc
    });
    partials.iter().fold(VectorMoments::new(dim), |mut acc, p| {
        acc.merge(p);
        acc
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Domain;
    use rand::Rng;

    #[test]
    fn merge_matches_single_pass() {
        let data: Vec<[f64; 2]> = (0..101)
            .map(|i| {
                let t = i as f64;
                [t.sin() * 3.0 + 1.0, (t * 0.7).cos() - t * 0.01]
            })
            .collect();
        let mut whole = VectorMoments::new(2);
        data.iter().for_each(|x| whole.push(x));
        let mut a = VectorMoments::new(2);
        let mut b = VectorMoments::new(2);
        data[..37].iter().for_each(|x| a.push(x));
        data[37..].iter().for_each(|x| b.push(x));
        a.merge(&b);
        for i in 0..2 {
            assert!((a.mean()[i] - whole.mean()[i]).abs() < 1e-13);
        }
        let (ca, cw) = (a.covariance(), whole.covariance());
        assert!((ca - &cw).abs().max() < 1e-12);

        // two-pass reference
        let n = data.len() as f64;
        let m0 = data.iter().map(|x| x[0]).sum::<f64>() / n;
        let m1 = data.iter().map(|x| x[1]).sum::<f64>() / n;
        let c01 = data.iter().map(|x| (x[0] - m0) * (x[1] - m1)).sum::<f64>() / (n - 1.0);
        assert!((cw[(0, 1)] - c01).abs() < 1e-12);
        assert!((cw[(1, 0)] - c01).abs() < 1e-12);
    }

    #[test]
    fn parallel_and_sequential_agree_bitwise() {
        let key = StreamKey::new(3, 0, Domain::MonteCarlo);
        let f = |rng: &mut StreamRng, out: &mut [f64]| {
            out[0] = rng.random::<f64>();
            out[1] = out[0] * out[0];
        };
        let a = sample_moments(10_001, key, 2, Execution::Sequential, f);
        let b = sample_moments(10_001, key, 2, Execution::Parallel, f);
        assert_eq!(a, b);
        assert_eq!(a.count(), 10_001);
        assert!((a.mean()[0] - 0.5).abs() < 0.01);
    }
}
