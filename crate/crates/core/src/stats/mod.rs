//! Statistical and deterministic checks of the independence properties.
//!
//! Matrix draws enter the distance-based tests through their isometric
//! vectorization, so distances are the Frobenius distances of the cone.

pub mod campaigns;
pub mod dcor;
pub mod energy;
pub mod ks;
pub mod transport;

use alloc::string::String;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::campaign::TrialRunner;
use crate::distributions::RngStream;
use crate::error::{Error, Result};
use crate::spd::{packed_len, vectorize, SpdMatrix};

pub use campaigns::{
    direc_campaign, my_property_campaign, CoefficientLaw, DirecConfig, McCampaignReport, McSettings, MyConfig,
};
pub use dcor::{distance_correlation, distance_correlation_statistic};
pub use energy::{energy_distance_test, energy_statistic};
pub use ks::{kolmogorov_q, ks_one_sample, ks_two_sample, KsResult};
pub use transport::{
    density_transport_check, eff_mutation_residual, log_grid, product_grid, transport_campaign, univariate_eff_check,
    EffParams, TransportCampaignConfig, TransportCampaignReport, TransportLaws, TransportOutcome,
};

/// Fewest observations a distance-based test accepts.
pub const MIN_SAMPLES: usize = 100;

/// Largest batch the multivariate tests accept; they hold a dense
/// `n × n` distance matrix.
pub const MAX_DENSE_SAMPLES: usize = 6000;

/// Fewest permutations a test accepts.
pub const MIN_PERMUTATIONS: usize = 99;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchManifest {
    pub sampler: String,
    pub params: String,
    pub seed: u64,
    pub stream_id: u64,
}

/// Draws stored row-wise in vectorized coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    dim: usize,
    rows: Vec<f64>,
    pub manifest: BatchManifest,
}

impl SampleBatch {
    pub fn from_scalars(values: Vec<f64>, manifest: BatchManifest) -> SampleBatch {
        SampleBatch {
            dim: 1,
            rows: values,
            manifest,
        }
    }

    pub fn from_matrices(draws: &[SpdMatrix], manifest: BatchManifest) -> Result<SampleBatch> {
        let dim = draws.first().map_or(1, |d| d.dim());
        let mut rows = Vec::with_capacity(draws.len() * packed_len(dim));
        for d in draws {
            crate::spd::check_dims(dim, d.dim())?;
            rows.extend(vectorize(d.base()));
        }
        Ok(SampleBatch { dim, rows, manifest })
    }

    /// Flat row-major data with `packed_len(dim)` coordinates per draw.
    pub fn from_rows(dim: usize, rows: Vec<f64>, manifest: BatchManifest) -> Result<SampleBatch> {
        let width = packed_len(dim);
        if dim == 0 || !rows.len().is_multiple_of(width) {
            return Err(Error::DimMismatch {
                expected: width,
                found: rows.len() % width.max(1),
            });
        }
        Ok(SampleBatch { dim, rows, manifest })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn width(&self) -> usize {
        packed_len(self.dim)
    }

    pub fn len(&self) -> usize {
        self.rows.len() / self.width()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.width();
        &self.rows[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> &[f64] {
        &self.rows
    }

    /// Applies `f` to every row in place.
    pub fn map_rows(&mut self, mut f: impl FnMut(&mut [f64])) {
        let w = self.width();
        for chunk in self.rows.chunks_mut(w) {
            f(chunk);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependenceReport {
    pub statistic: String,
    pub value: f64,
    pub permutations: usize,
    pub p_value: f64,
    pub level: f64,
    /// `p_value < level`.
    pub reject: bool,
}

impl IndependenceReport {
    fn new(statistic: &str, value: f64, permutations: usize, exceed: usize, level: f64) -> Self {
        let p_value = (1 + exceed) as f64 / (permutations + 1) as f64;
        IndependenceReport {
            statistic: statistic.into(),
            value,
            permutations,
            p_value,
            level,
            reject: p_value < level,
        }
    }
}

pub(crate) fn check_sizes(n: usize, permutations: usize) -> Result<()> {
    if n < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            found: n,
            required: MIN_SAMPLES,
        });
    }
    if permutations < MIN_PERMUTATIONS {
        return Err(Error::InvalidParams("need at least 99 permutations"));
    }
    Ok(())
}

/// Uniform random permutation of `0..n` drawn from `stream`.
pub(crate) fn permutation(n: usize, stream: &RngStream) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut stream.rng());
    p
}

/// Number of permutation statistics at least as large as `observed`;
/// permutation `k` uses substream `k` of `stream`.
pub(crate) fn count_exceedances<R: TrialRunner>(
    observed: f64,
    permutations: usize,
    n: usize,
    stream: &RngStream,
    runner: &R,
    statistic: impl Fn(&[usize]) -> f64 + Sync + Send,
) -> usize {
    runner
        .map(permutations, |k| {
            let p = permutation(n, &stream.substream(k as u64));
            statistic(&p) >= observed
        })
        .into_iter()
        .filter(|&b| b)
        .count()
}

/// Row-major `n × n` Euclidean distance matrix of the rows of `batch`.
pub(crate) fn distance_matrix(batch: &SampleBatch) -> Vec<f64> {
    let n = batch.len();
    let mut d = alloc::vec![0.0; n * n];
    for i in 0..n {
        let ri = batch.row(i);
        for j in 0..i {
            let rj = batch.row(j);
            let s: f64 = ri.iter().zip(rj).map(|(a, b)| (a - b) * (a - b)).sum();
            let v = s.sqrt();
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

#[cfg(test)]
pub(crate) fn test_manifest() -> BatchManifest {
    BatchManifest {
        sampler: "test".into(),
        params: String::new(),
        seed: 0,
        stream_id: 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_shapes() {
        let m = SpdMatrix::identity(2);
        let b = SampleBatch::from_matrices(&[m.clone(), m], test_manifest()).unwrap();
        assert_eq!((b.len(), b.width(), b.dim()), (2, 3, 2));
        assert_eq!(b.row(1), &[1.0, 0.0, 1.0]);
        assert!(SampleBatch::from_rows(2, alloc::vec![1.0; 4], test_manifest()).is_err());
        let s = SampleBatch::from_scalars(alloc::vec![1.0, 2.0], test_manifest());
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn p_value_formula() {
        let r = IndependenceReport::new("t", 1.0, 999, 0, 0.01);
        assert_eq!(r.p_value, 0.001);
        assert!(r.reject);
        let r = IndependenceReport::new("t", 1.0, 999, 999, 0.01);
        assert_eq!(r.p_value, 1.0);
    }
}
