//! Two-sample energy distance with a permutation null,
//! `E = n₁n₂/(n₁+n₂) · (2·mean‖X−Y‖ − mean‖X−X'‖ − mean‖Y−Y'‖)`.

use alloc::vec::Vec;

use super::{
    check_sizes, count_exceedances, distance_matrix, BatchManifest, IndependenceReport, SampleBatch, MAX_DENSE_SAMPLES,
};
use crate::campaign::TrialRunner;
use crate::distributions::RngStream;
use crate::error::{Error, Result};

/// Pooled sample with group labels; `first[i]` marks membership of the
/// first batch.
enum Pooled {
    /// Sorted scalar values; within-group sums by one sweep.
    Sorted {
        values: Vec<f64>,
        origin: Vec<usize>,
    },
    Dense {
        d: Vec<f64>,
    },
}

struct EnergyEngine {
    n1: usize,
    n2: usize,
    pooled: Pooled,
    total: f64,
}

impl EnergyEngine {
    fn new(b1: &SampleBatch, b2: &SampleBatch) -> Result<Self> {
        if b1.width() != b2.width() {
            return Err(Error::DimMismatch {
                expected: b1.width(),
                found: b2.width(),
            });
        }
        let (n1, n2) = (b1.len(), b2.len());
        let n = n1 + n2;
        if b1.width() == 1 {
            let raw: Vec<f64> = b1.rows().iter().chain(b2.rows()).copied().collect();
            let mut origin: Vec<usize> = (0..n).collect();
            origin.sort_by(|&a, &b| raw[a].total_cmp(&raw[b]));
            let values: Vec<f64> = origin.iter().map(|&i| raw[i]).collect();
            let mut total = 0.0;
            let mut running = 0.0;
            for (k, v) in values.iter().enumerate() {
                total += 2.0 * (v * k as f64 - running);
                running += v;
            }
            Ok(EnergyEngine {
                n1,
                n2,
                pooled: Pooled::Sorted { values, origin },
                total,
            })
        } else {
            if n > MAX_DENSE_SAMPLES {
                return Err(Error::InvalidParams(
                    "multivariate distance tests take at most 6000 draws",
                ));
            }
            let mut rows = Vec::with_capacity(n * b1.width());
            rows.extend_from_slice(b1.rows());
            rows.extend_from_slice(b2.rows());
            let manifest = BatchManifest {
                sampler: "pooled".into(),
                params: alloc::string::String::new(),
                seed: 0,
                stream_id: 0,
            };
            let d = distance_matrix(&SampleBatch::from_rows(b1.dim(), rows, manifest)?);
            let total = d.iter().sum();
            Ok(EnergyEngine {
                n1,
                n2,
                pooled: Pooled::Dense { d },
                total,
            })
        }
    }

    /// `label(i)` is true when pooled index `i` belongs to the first group.
    fn statistic(&self, label: impl Fn(usize) -> bool) -> f64 {
        let (w1, w2) = match &self.pooled {
            Pooled::Sorted { values, origin } => {
                let mut sums = [0.0f64; 2];
                let mut counts = [0.0f64; 2];
                let mut within = [0.0f64; 2];
                for (v, &o) in values.iter().zip(origin) {
                    let g = usize::from(!label(o));
                    within[g] += 2.0 * (v * counts[g] - sums[g]);
                    counts[g] += 1.0;
                    sums[g] += v;
                }
                (within[0], within[1])
            }
            Pooled::Dense { d } => {
                let n = self.n1 + self.n2;
                let mut w = [0.0f64; 2];
                let groups: Vec<bool> = (0..n).map(&label).collect();
                for i in 0..n {
                    let gi = groups[i];
                    let row = &d[i * n..(i + 1) * n];
                    let mut s = 0.0;
                    for j in 0..n {
                        if groups[j] == gi {
                            s += row[j];
                        }
                    }
                    w[usize::from(!gi)] += s;
                }
                (w[0], w[1])
            }
        };
        let cross = (self.total - w1 - w2) / 2.0;
        let (n1, n2) = (self.n1 as f64, self.n2 as f64);
        n1 * n2 / (n1 + n2) * (2.0 * cross / (n1 * n2) - w1 / (n1 * n1) - w2 / (n2 * n2))
    }

    fn observed(&self) -> f64 {
        let n1 = self.n1;
        self.statistic(|i| i < n1)
    }
}

pub fn energy_statistic(b1: &SampleBatch, b2: &SampleBatch) -> Result<f64> {
    Ok(EnergyEngine::new(b1, b2)?.observed())
}

/// Permutation test that two batches share a law; permutations relabel
/// the pooled sample.
pub fn energy_distance_test<R: TrialRunner>(
    b1: &SampleBatch,
    b2: &SampleBatch,
    permutations: usize,
    stream: &RngStream,
    level: f64,
    runner: &R,
) -> Result<IndependenceReport> {
    check_sizes(b1.len().min(b2.len()), permutations)?;
    let engine = EnergyEngine::new(b1, b2)?;
    let observed = engine.observed();
    let n = engine.n1 + engine.n2;
    let n1 = engine.n1;
    let exceed = count_exceedances(observed, permutations, n, stream, runner, |p| {
        // the first n1 slots of the shuffled order form group one
        let mut first = alloc::vec![false; n];
        for &i in &p[..n1] {
            first[i] = true;
        }
        engine.statistic(|i| first[i])
    });
    Ok(IndependenceReport::new(
        "energy_distance",
        observed,
        permutations,
        exceed,
        level,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::campaign::Sequential;
    use crate::stats::test_manifest;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn normals(n: usize, seed: u64, shift: f64) -> SampleBatch {
        let mut rng = RngStream::new(seed, 0).rng();
        SampleBatch::from_scalars(
            (0..n).map(|_| shift + rng.sample::<f64, _>(StandardNormal)).collect(),
            test_manifest(),
        )
    }

    fn naive(b1: &SampleBatch, b2: &SampleBatch) -> f64 {
        let mean = |a: &SampleBatch, b: &SampleBatch| {
            let mut s = 0.0;
            for i in 0..a.len() {
                for j in 0..b.len() {
                    s += (a.row(i)[0] - b.row(j)[0]).abs();
                }
            }
            s / (a.len() * b.len()) as f64
        };
        let (n1, n2) = (b1.len() as f64, b2.len() as f64);
        n1 * n2 / (n1 + n2) * (2.0 * mean(b1, b2) - mean(b1, b1) - mean(b2, b2))
    }

    #[test]
    fn sweep_matches_direct_sums() {
        let a = normals(120, 1, 0.0);
        let b = normals(150, 2, 0.4);
        let fast = energy_statistic(&a, &b).unwrap();
        assert!((fast - naive(&a, &b)).abs() < 1e-10);
        // the dense path on the same data, lifted to dimension 2 with zeros
        let lift = |s: &SampleBatch| {
            let rows: Vec<f64> = s.rows().iter().flat_map(|&v| [v, 0.0, 0.0]).collect();
            SampleBatch::from_rows(2, rows, test_manifest()).unwrap()
        };
        let dense = energy_statistic(&lift(&a), &lift(&b)).unwrap();
        assert!((fast - dense).abs() < 1e-10);
    }

    #[test]
    fn same_law_is_not_rejected_and_shift_is() {
        let a = normals(2000, 3, 0.0);
        let b = normals(2000, 4, 0.0);
        let r = energy_distance_test(&a, &b, 999, &RngStream::new(1, 0), 0.01, &Sequential).unwrap();
        assert!(r.p_value > 0.001, "{r:?}");
        let c = normals(2000, 5, 0.3);
        let r = energy_distance_test(&a, &c, 999, &RngStream::new(1, 0), 0.01, &Sequential).unwrap();
        assert_eq!(r.p_value, 0.001);
    }

    #[test]
    fn mismatched_widths() {
        let a = normals(200, 1, 0.0);
        let m = SampleBatch::from_rows(2, alloc::vec![0.0; 600], test_manifest()).unwrap();
        assert!(energy_statistic(&a, &m).is_err());
    }
}
