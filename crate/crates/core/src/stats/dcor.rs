//! Distance covariance and correlation with a permutation null.
//!
//! The V-statistic is
//! `dCov² = S/n² − 2 Σᵢ aᵢ·bᵢ·/n³ + a·· b··/n⁴`
//! with `S = Σᵢⱼ aᵢⱼ bᵢⱼ`, `aᵢⱼ = |xᵢ − xⱼ|` and row sums `aᵢ·`. For
//! scalar samples `S` is accumulated in `O(n log n)` by sweeping the
//! points in `x` order with a Fenwick tree over `y` ranks; larger
//! dimensions use dense distance matrices.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use super::{check_sizes, count_exceedances, distance_matrix, IndependenceReport, SampleBatch, MAX_DENSE_SAMPLES};
use crate::campaign::TrialRunner;
use crate::distributions::RngStream;
use crate::error::{Error, Result};
use crate::numerics::CompensatedSum;

/// Prefix sums of `(count, Σy, Σx, Σxy)` over ranks.
struct Fenwick {
    tree: Vec<[f64; 4]>,
}

impl Fenwick {
    fn new(n: usize) -> Self {
        Fenwick {
            tree: alloc::vec![[0.0; 4]; n + 1],
        }
    }

    fn add(&mut self, rank: usize, v: [f64; 4]) {
        let mut i = rank + 1;
        while i < self.tree.len() {
            for k in 0..4 {
                self.tree[i][k] += v[k];
            }
            i += i & i.wrapping_neg();
        }
    }

    /// Sums over ranks `0..=rank`.
    fn prefix(&self, rank: usize) -> [f64; 4] {
        let mut out = [0.0; 4];
        let mut i = rank + 1;
        while i > 0 {
            for k in 0..4 {
                out[k] += self.tree[i][k];
            }
            i -= i & i.wrapping_neg();
        }
        out
    }
}

/// `Σᵢ |xᵢ − xⱼ|` for every `j`.
fn row_sums(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let total: f64 = x.iter().sum();
    let mut out = alloc::vec![0.0; n];
    let mut below = 0.0;
    for (k, &i) in order.iter().enumerate() {
        let above = total - below - x[i];
        out[i] = x[i] * k as f64 - below + above - x[i] * (n - k - 1) as f64;
        below += x[i];
    }
    out
}

fn ranks(y: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..y.len()).collect();
    order.sort_by(|&a, &b| y[a].total_cmp(&y[b]).then(a.cmp(&b)));
    let mut r = alloc::vec![0; y.len()];
    for (k, &i) in order.iter().enumerate() {
        r[i] = k;
    }
    r
}

fn standardize(v: &[f64]) -> Vec<f64> {
    let n = v.len() as f64;
    let mean = v.iter().copied().collect::<CompensatedSum>().value() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
    v.iter().map(|x| (x - mean) / sd).collect()
}

struct Univariate {
    n: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    x_order: Vec<usize>,
    y_rank: Vec<usize>,
    a_row: Vec<f64>,
    b_row: Vec<f64>,
    a_total: f64,
    b_total: f64,
}

impl Univariate {
    fn new(x: &[f64], y: &[f64]) -> Self {
        let x = standardize(x);
        let y = standardize(y);
        let n = x.len();
        let mut x_order: Vec<usize> = (0..n).collect();
        x_order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
        let a_row = row_sums(&x);
        let b_row = row_sums(&y);
        let a_total = a_row.iter().sum();
        let b_total = b_row.iter().sum();
        Univariate {
            n,
            y_rank: ranks(&y),
            x,
            y,
            x_order,
            a_row,
            b_row,
            a_total,
            b_total,
        }
    }

    /// `Σᵢⱼ |xᵢ − xⱼ||y_π(i) − y_π(j)|`.
    fn cross_sum(&self, perm: Option<&[usize]>) -> f64 {
        let pi = |i: usize| perm.map_or(i, |p| p[i]);
        let mut fen = Fenwick::new(self.n);
        let mut total = [0.0; 4];
        let mut acc = CompensatedSum::new();
        for &j in &self.x_order {
            let xj = self.x[j];
            let yj = self.y[pi(j)];
            let rj = self.y_rank[pi(j)];
            let lo = fen.prefix(rj);
            let hi = [total[0] - lo[0], total[1] - lo[1], total[2] - lo[2], total[3] - lo[3]];
            // Earlier points have x ≤ xⱼ; split them by the sign of yⱼ − yᵢ.
            let below = xj * yj * lo[0] - xj * lo[1] - yj * lo[2] + lo[3];
            let above = xj * yj * hi[0] - xj * hi[1] - yj * hi[2] + hi[3];
            acc.add(below - above);
            let v = [1.0, yj, xj, xj * yj];
            fen.add(rj, v);
            for k in 0..4 {
                total[k] += v[k];
            }
        }
        2.0 * acc.value()
    }

    fn dcov2(&self, perm: Option<&[usize]>) -> f64 {
        let n = self.n as f64;
        let s = self.cross_sum(perm);
        let mixed: f64 = match perm {
            None => self.a_row.iter().zip(&self.b_row).map(|(a, b)| a * b).sum(),
            Some(p) => (0..self.n).map(|i| self.a_row[i] * self.b_row[p[i]]).sum(),
        };
        s / (n * n) - 2.0 * mixed / (n * n * n) + self.a_total * self.b_total / (n * n * n * n)
    }

    fn dvar2(v: &[f64], row: &[f64], total: f64) -> f64 {
        let n = v.len() as f64;
        let sum: f64 = v.iter().sum();
        let sq: f64 = v.iter().map(|x| x * x).sum();
        let s = 2.0 * n * sq - 2.0 * sum * sum;
        let mixed: f64 = row.iter().map(|a| a * a).sum();
        s / (n * n) - 2.0 * mixed / (n * n * n) + total * total / (n * n * n * n)
    }

    fn dvars(&self) -> (f64, f64) {
        (
            Self::dvar2(&self.x, &self.a_row, self.a_total),
            Self::dvar2(&self.y, &self.b_row, self.b_total),
        )
    }
}

struct Dense {
    n: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    a_row: Vec<f64>,
    b_row: Vec<f64>,
    a_total: f64,
    b_total: f64,
}

impl Dense {
    fn new(u: &SampleBatch, v: &SampleBatch) -> Self {
        let n = u.len();
        let a = distance_matrix(u);
        let b = distance_matrix(v);
        let rows = |m: &[f64]| -> Vec<f64> { (0..n).map(|i| m[i * n..(i + 1) * n].iter().sum()).collect() };
        let a_row = rows(&a);
        let b_row = rows(&b);
        let a_total = a_row.iter().sum();
        let b_total = b_row.iter().sum();
        Dense {
            n,
            a,
            b,
            a_row,
            b_row,
            a_total,
            b_total,
        }
    }

    fn v_stat(
        &self,
        a: &[f64],
        a_row: &[f64],
        a_total: f64,
        b: &[f64],
        b_row: &[f64],
        b_total: f64,
        perm: Option<&[usize]>,
    ) -> f64 {
        let n = self.n;
        let pi = |i: usize| perm.map_or(i, |p| p[i]);
        let mut s = 0.0;
        let mut mixed = 0.0;
        for i in 0..n {
            let ai = &a[i * n..(i + 1) * n];
            let bi = &b[pi(i) * n..(pi(i) + 1) * n];
            let mut row = 0.0;
            for j in 0..n {
                row += ai[j] * bi[pi(j)];
            }
            s += row;
            mixed += a_row[i] * b_row[pi(i)];
        }
        let nf = n as f64;
        s / (nf * nf) - 2.0 * mixed / (nf * nf * nf) + a_total * b_total / (nf * nf * nf * nf)
    }

    fn dcov2(&self, perm: Option<&[usize]>) -> f64 {
        self.v_stat(
            &self.a,
            &self.a_row,
            self.a_total,
            &self.b,
            &self.b_row,
            self.b_total,
            perm,
        )
    }

    fn dvars(&self) -> (f64, f64) {
        (
            self.v_stat(
                &self.a,
                &self.a_row,
                self.a_total,
                &self.a,
                &self.a_row,
                self.a_total,
                None,
            ),
            self.v_stat(
                &self.b,
                &self.b_row,
                self.b_total,
                &self.b,
                &self.b_row,
                self.b_total,
                None,
            ),
        )
    }
}

enum Engine {
    Univariate(Univariate),
    Dense(Dense),
}

impl Engine {
    fn new(u: &SampleBatch, v: &SampleBatch) -> Result<Engine> {
        if u.len() != v.len() {
            return Err(Error::DimMismatch {
                expected: u.len(),
                found: v.len(),
            });
        }
        if u.width() == 1 && v.width() == 1 {
            Ok(Engine::Univariate(Univariate::new(u.rows(), v.rows())))
        } else if u.len() > MAX_DENSE_SAMPLES {
            Err(Error::InvalidParams(
                "multivariate distance tests take at most 6000 draws",
            ))
        } else {
            Ok(Engine::Dense(Dense::new(u, v)))
        }
    }

    fn n(&self) -> usize {
        match self {
            Engine::Univariate(e) => e.n,
            Engine::Dense(e) => e.n,
        }
    }

    fn dcov2(&self, perm: Option<&[usize]>) -> f64 {
        match self {
            Engine::Univariate(e) => e.dcov2(perm),
            Engine::Dense(e) => e.dcov2(perm),
        }
    }

    fn dcor(&self) -> f64 {
        let (vx, vy) = match self {
            Engine::Univariate(e) => e.dvars(),
            Engine::Dense(e) => e.dvars(),
        };
        let denom = (vx * vy).sqrt();
        if denom > 0.0 {
            (self.dcov2(None).max(0.0) / denom).sqrt()
        } else {
            0.0
        }
    }
}

/// Sample distance correlation of two equally long batches.
pub fn distance_correlation_statistic(u: &SampleBatch, v: &SampleBatch) -> Result<f64> {
    Ok(Engine::new(u, v)?.dcor())
}

/// Permutation test of independence. The reported value is the distance
/// correlation; the permutation null is built on `dCov²`, which orders
/// permutations identically.
pub fn distance_correlation<R: TrialRunner>(
    u: &SampleBatch,
    v: &SampleBatch,
    permutations: usize,
    stream: &RngStream,
    level: f64,
    runner: &R,
) -> Result<IndependenceReport> {
    check_sizes(u.len().min(v.len()), permutations)?;
    let engine = Engine::new(u, v)?;
    let observed = engine.dcov2(None);
    let exceed = count_exceedances(observed, permutations, engine.n(), stream, runner, |p| {
        engine.dcov2(Some(p))
    });
    Ok(IndependenceReport::new(
        "distance_correlation",
        engine.dcor(),
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

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = RngStream::new(seed, 0).rng();
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    fn scalars(v: Vec<f64>) -> SampleBatch {
        SampleBatch::from_scalars(v, test_manifest())
    }

    /// Direct O(n²) V-statistic.
    fn naive_dcov2(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len();
        let d = |v: &[f64], i: usize, j: usize| (v[i] - v[j]).abs();
        let row = |v: &[f64], i: usize| (0..n).map(|j| d(v, i, j)).sum::<f64>();
        let total = |v: &[f64]| (0..n).map(|i| row(v, i)).sum::<f64>();
        let nf = n as f64;
        let (ta, tb) = (total(x), total(y));
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                let a = d(x, i, j) - row(x, i) / nf - row(x, j) / nf + ta / (nf * nf);
                let b = d(y, i, j) - row(y, i) / nf - row(y, j) / nf + tb / (nf * nf);
                s += a * b;
            }
        }
        s / (nf * nf)
    }

    #[test]
    fn fast_path_matches_double_centering() {
        let x = normals(150, 1);
        let y: Vec<f64> = x.iter().zip(normals(150, 2)).map(|(a, b)| a * a + 0.3 * b).collect();
        let fast = Univariate::new(&x, &y);
        let naive = naive_dcov2(&standardize(&x), &standardize(&y));
        assert!((fast.dcov2(None) - naive).abs() < 1e-12 * naive.abs().max(1.0));
        let (vx, _) = fast.dvars();
        let nx = naive_dcov2(&standardize(&x), &standardize(&x));
        assert!((vx - nx).abs() < 1e-12);
        // the dense engine agrees too
        let dense = Dense::new(&scalars(standardize(&x)), &scalars(standardize(&y)));
        assert!((dense.dcov2(None) - naive).abs() < 1e-12);
        let p: Vec<usize> = (0..150).rev().collect();
        assert!((dense.dcov2(Some(&p)) - fast.dcov2(Some(&p))).abs() < 1e-12);
    }

    #[test]
    fn ties_are_handled() {
        let x: Vec<f64> = (0..200).map(|i| (i % 7) as f64).collect();
        let y: Vec<f64> = (0..200).map(|i| (i % 5) as f64).collect();
        let fast = Univariate::new(&x, &y);
        let naive = naive_dcov2(&standardize(&x), &standardize(&y));
        assert!((fast.dcov2(None) - naive).abs() < 1e-12);
    }

    #[test]
    fn identical_batches_give_minimal_p_value() {
        let x = scalars(normals(500, 3));
        let r = distance_correlation(&x, &x, 199, &RngStream::new(1, 1), 0.01, &Sequential).unwrap();
        assert_eq!(r.p_value, 1.0 / 200.0);
        assert!((r.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn independent_normals_are_not_rejected() {
        let x = scalars(normals(5000, 4));
        let y = scalars(normals(5000, 5));
        let r = distance_correlation(&x, &y, 999, &RngStream::new(2, 2), 0.01, &Sequential).unwrap();
        assert!(r.p_value > 0.001, "{r:?}");
    }

    #[test]
    fn too_few_samples() {
        let x = scalars(normals(50, 4));
        assert!(matches!(
            distance_correlation(&x, &x, 199, &RngStream::new(0, 0), 0.01, &Sequential),
            Err(Error::TooFewSamples { .. })
        ));
    }

    #[test]
    fn invariant_under_rotation_and_translation() {
        let n = 300;
        let raw: Vec<f64> = normals(3 * n, 6);
        let other: Vec<f64> = raw.chunks(3).map(|c| c[0] * c[1] + 0.1 * c[2]).collect();
        let u = SampleBatch::from_rows(2, raw.clone(), test_manifest()).unwrap();
        let v = scalars(other.clone());
        let base = distance_correlation_statistic(&u, &v).unwrap();
        // rotate in the (0, 2) plane and translate
        let (c, s) = (0.6f64, 0.8f64);
        let mut moved = u.clone();
        moved.map_rows(|r| {
            let (a, b) = (r[0], r[2]);
            r[0] = c * a - s * b + 3.0;
            r[2] = s * a + c * b - 1.0;
            r[1] += 7.0;
        });
        let shifted = scalars(other.iter().map(|x| x - 4.0).collect());
        let after = distance_correlation_statistic(&moved, &shifted).unwrap();
        assert!((base - after).abs() < 1e-10, "{base} {after}");
    }

    #[test]
    fn permutation_p_values_are_reproducible() {
        let x = scalars(normals(300, 8));
        let y = scalars(normals(300, 9));
        let s = RngStream::new(5, 5);
        let a = distance_correlation(&x, &y, 199, &s, 0.01, &Sequential).unwrap();
        let b = distance_correlation(&x, &y, 199, &s, 0.01, &Sequential).unwrap();
        assert_eq!(a, b);
    }
}
