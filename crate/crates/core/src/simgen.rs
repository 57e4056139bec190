//! Block-correlated Gaussian class data for the simulation studies.
//!
//! The first features carry a class-dependent mean table and are grouped into
//! disjoint correlation blocks; every other feature is iid `N(0, 1)`.
//!
//! Random numbers come from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//! `seed_from_u64`, and normals from the `rand_distr` ziggurat sampler, so a
//! given seed produces the same draws on every platform. Replicate `r` of a
//! study uses seed `seed + r`.

use std::collections::BTreeSet;
use std::ops::Range;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{ClassPair, LabeledMatrix};
use crate::error::{Error, Result};
use crate::linalg::Cholesky;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrelationKind {
    /// Compound symmetry: every off-diagonal entry equals `rho`.
    Cs,
    /// First-order autoregressive: entry `(i, j)` equals `rho^|i-j|`.
    Ar1,
}

/// A contiguous correlation block; `first` and `last` are 1-based and inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationBlock {
    pub first: usize,
    pub last: usize,
    pub kind: CorrelationKind,
    pub rho: f64,
}

impl CorrelationBlock {
    pub fn new(first: usize, last: usize, kind: CorrelationKind, rho: f64) -> Self {
        CorrelationBlock {
            first,
            last,
            kind,
            rho,
        }
    }

    /// 0-based feature range.
    pub fn range(&self) -> Range<usize> {
        self.first - 1..self.last
    }

    pub fn len(&self) -> usize {
        self.last + 1 - self.first
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Dense correlation matrix of the block, row-major.
    pub fn correlation(&self) -> Vec<f64> {
        let k = self.len();
        let mut c = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                c[i * k + j] = if i == j {
                    1.0
                } else {
                    match self.kind {
                        CorrelationKind::Cs => self.rho,
                        CorrelationKind::Ar1 => self.rho.powi(i.abs_diff(j) as i32),
                    }
                };
            }
        }
        c
    }
}

/// Full description of a simulated study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimDesign {
    pub p: usize,
    pub n_per_class: usize,
    pub n_test_per_class: usize,
    pub blocks: Vec<CorrelationBlock>,
    /// One row per class (class ids `1..=K`); row length is the number of
    /// leading features with a class-specific mean. Later features have mean 0.
    pub mean_table: Vec<Vec<f64>>,
    pub seed: u64,
}

/// Which features truly matter for separating one pair of classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub pair: ClassPair,
    /// 0-based, sorted.
    pub informative_set: Vec<usize>,
    /// Informative features whose class means differ.
    pub marginal_set: Vec<usize>,
    /// Informative features with equal class means (jointly informative only).
    pub muji_set: Vec<usize>,
}

impl GroundTruth {
    pub fn is_informative(&self, j: usize) -> bool {
        self.informative_set.binary_search(&j).is_ok()
    }
}

/// One draw of a study: training rows, test rows and per-pair truth.
#[derive(Debug, Clone)]
pub struct SimSample {
    pub train: LabeledMatrix,
    pub test: LabeledMatrix,
    pub truth: Vec<GroundTruth>,
}

impl SimSample {
    pub fn truth_for(&self, pair: ClassPair) -> Option<&GroundTruth> {
        self.truth
            .iter()
            .find(|t| t.pair == pair || t.pair == pair.swapped())
    }
}

const SIM_RHO: f64 = 0.5;

/// The three simulation designs: 20 informative features in four blocks of
/// five, CS(0.5) for examples 1 and 3 and AR1(0.5) for example 2.
pub fn example_design(which: u32, p: usize, n_per_class: usize, seed: u64) -> Result<SimDesign> {
    let kind = match which {
        1 | 3 => CorrelationKind::Cs,
        2 => CorrelationKind::Ar1,
        other => return Err(Error::UnknownExample(other)),
    };
    if p < 20 {
        return Err(Error::InvalidDesign(format!("p = {p} but the design needs 20 features")));
    }
    let blocks = (0..4)
        .map(|b| CorrelationBlock::new(5 * b + 1, 5 * b + 5, kind, SIM_RHO))
        .collect();
    let half = |muji: f64, weak: f64, strong: f64| -> Vec<f64> {
        let mut v = vec![muji; 4];
        v.push(weak);
        v.extend([strong; 5]);
        v
    };
    let row = |muji, weak, strong| {
        let mut r = half(muji, weak, strong);
        r.extend(half(muji, weak, strong));
        r
    };
    let design = SimDesign {
        p,
        n_per_class,
        n_test_per_class: 50,
        blocks,
        mean_table: vec![row(0.0, -0.5, 1.5), row(0.0, 2.0, -1.5), row(-2.5, -2.5, -1.5)],
        seed,
    };
    design.validate()?;
    Ok(design)
}

impl SimDesign {
    pub fn k(&self) -> usize {
        self.mean_table.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidDesign(m));
        if self.p == 0 {
            return bad("p must be positive".into());
        }
        if self.mean_table.len() < 2 {
            return bad("mean table needs at least two classes".into());
        }
        let width = self.mean_table[0].len();
        if self.mean_table.iter().any(|r| r.len() != width) {
            return bad("mean table rows differ in length".into());
        }
        if width > self.p {
            return bad(format!("mean table covers {width} features but p = {}", self.p));
        }
        if self.mean_table.iter().flatten().any(|v| !v.is_finite()) {
            return bad("mean table has non-finite entries".into());
        }
        if self.n_per_class < 2 || self.n_test_per_class < 1 {
            return bad("need at least 2 training and 1 test sample per class".into());
        }
        let mut used = vec![false; self.p];
        for b in &self.blocks {
            if b.first == 0 || b.last < b.first || b.last > self.p {
                return bad(format!("block {}..{} is outside 1..{}", b.first, b.last, self.p));
            }
            if !(b.rho.abs() < 1.0) {
                return bad(format!("block {}..{} has rho = {}", b.first, b.last, b.rho));
            }
            for j in b.range() {
                if used[j] {
                    return bad(format!("feature {} lies in two blocks", j + 1));
                }
                used[j] = true;
            }
        }
        Ok(())
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<SimDesign> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let design: SimDesign = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        design.validate()?;
        Ok(design)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("design serializes")
    }

    /// Class mean of feature `j` for class id `class` (1-based).
    pub fn mean(&self, class: i64, j: usize) -> f64 {
        self.mean_table[(class - 1) as usize].get(j).copied().unwrap_or(0.0)
    }

    fn check_pair(&self, pair: ClassPair) -> Result<()> {
        for c in [pair.a, pair.b] {
            if c < 1 || c as usize > self.k() {
                return Err(Error::MissingClass(c));
            }
        }
        Ok(())
    }

    /// Exact mean difference `mu_a - mu_b` over all `p` features.
    pub fn mean_difference(&self, pair: ClassPair) -> Result<Vec<f64>> {
        self.check_pair(pair)?;
        Ok((0..self.p)
            .map(|j| self.mean(pair.a, j) - self.mean(pair.b, j))
            .collect())
    }

    /// `Σ⁻¹ δ` computed block by block from the exact design covariance.
    pub fn precision_times(&self, delta: &[f64]) -> Result<Vec<f64>> {
        let mut out = delta.to_vec();
        for b in &self.blocks {
            let chol = Cholesky::factor(&b.correlation(), b.len())
                .ok_or(Error::NonPositiveDefiniteBlock(b.first))?;
            chol.solve_in_place(&mut out[b.range()]);
        }
        Ok(out)
    }

    /// Features that matter for `pair`: those with differing means plus every
    /// feature sharing a correlation block with one of them.
    pub fn ground_truth(&self, pair: ClassPair) -> Result<GroundTruth> {
        let delta = self.mean_difference(pair)?;
        let marginal: BTreeSet<usize> = (0..self.p).filter(|&j| delta[j] != 0.0).collect();
        let mut informative = marginal.clone();
        for b in &self.blocks {
            if b.range().any(|j| marginal.contains(&j)) {
                informative.extend(b.range());
            }
        }
        let muji = informative.difference(&marginal).copied().collect();
        Ok(GroundTruth {
            pair,
            informative_set: informative.into_iter().collect(),
            marginal_set: marginal.into_iter().collect(),
            muji_set: muji,
        })
    }

    /// Features with a nonzero entry in `Σ⁻¹ δ`, i.e. the set picked out by the
    /// precision-weighted mean difference.
    pub fn condition_a_set(&self, pair: ClassPair) -> Result<Vec<usize>> {
        let w = self.precision_times(&self.mean_difference(pair)?)?;
        Ok((0..self.p).filter(|&j| w[j].abs() > 1e-12).collect())
    }

    /// Mahalanobis separation `sqrt(δᵀ Σ⁻¹ δ)` of a class pair.
    pub fn oracle_delta_p(&self, pair: ClassPair) -> Result<f64> {
        let delta = self.mean_difference(pair)?;
        let w = self.precision_times(&delta)?;
        Ok(delta.iter().zip(&w).map(|(d, v)| d * v).sum::<f64>().sqrt())
    }

    /// Draws training and test sets. The same design (including seed) always
    /// yields bit-identical matrices.
    pub fn sample(&self) -> Result<SimSample> {
        self.validate()?;
        let factors = self
            .blocks
            .iter()
            .map(|b| {
                Cholesky::factor(&b.correlation(), b.len())
                    .map(|c| (b.range(), c))
                    .ok_or(Error::NonPositiveDefiniteBlock(b.first))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let train = self.draw(&mut rng, self.n_per_class, &factors)?;
        let test = self.draw(&mut rng, self.n_test_per_class, &factors)?;
        let k = self.k() as i64;
        let mut truth = Vec::new();
        for a in 1..=k {
            for b in a + 1..=k {
                truth.push(self.ground_truth(ClassPair::new(a, b))?);
            }
        }
        Ok(SimSample { train, test, truth })
    }

    fn draw(
        &self,
        rng: &mut ChaCha8Rng,
        per_class: usize,
        factors: &[(Range<usize>, Cholesky)],
    ) -> Result<LabeledMatrix> {
        let (p, k) = (self.p, self.k());
        let mut values = vec![0.0; k * per_class * p];
        let mut labels = Vec::with_capacity(k * per_class);
        let mut scratch = Vec::new();
        for (row, out) in values.chunks_exact_mut(p).enumerate() {
            let class = row / per_class;
            labels.push(class as i64 + 1);
            for v in out.iter_mut() {
                *v = StandardNormal.sample(rng);
            }
            for (range, chol) in factors {
                scratch.clear();
                scratch.resize(range.len(), 0.0);
                chol.lower_mul(&out[range.clone()], &mut scratch);
                out[range.clone()].copy_from_slice(&scratch);
            }
            for (v, m) in out.iter_mut().zip(&self.mean_table[class]) {
                *v += m;
            }
        }
        LabeledMatrix::new(values, p, &labels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corr(data: &LabeledMatrix, a: usize, b: usize, class: usize) -> f64 {
        let rows: Vec<usize> = (0..data.n()).filter(|&i| data.labels()[i] == class).collect();
        let n = rows.len() as f64;
        let ma = rows.iter().map(|&i| data.get(i, a)).sum::<f64>() / n;
        let mb = rows.iter().map(|&i| data.get(i, b)).sum::<f64>() / n;
        let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
        for &i in &rows {
            let (x, y) = (data.get(i, a) - ma, data.get(i, b) - mb);
            sab += x * y;
            saa += x * x;
            sbb += y * y;
        }
        sab / (saa * sbb).sqrt()
    }

    #[test]
    fn table_means() {
        let d = example_design(1, 30, 10, 0).unwrap();
        assert_eq!(d.mean(1, 4), -0.5);
        assert_eq!(d.mean(3, 0), -2.5);
        assert_eq!(d.mean(3, 3), -2.5);
        assert_eq!(d.mean(2, 4), 2.0);
        assert_eq!(d.mean(1, 5), 1.5);
        assert_eq!(d.mean(2, 19), -1.5);
        assert_eq!(d.mean(1, 25), 0.0);
        assert!(d.blocks.iter().all(|b| b.kind == CorrelationKind::Cs && b.rho == 0.5));
        let d2 = example_design(2, 30, 10, 0).unwrap();
        assert_eq!(d2.mean_table, d.mean_table);
        assert!(d2.blocks.iter().all(|b| b.kind == CorrelationKind::Ar1));
        assert!(matches!(example_design(4, 30, 10, 0), Err(Error::UnknownExample(4))));
        assert!(example_design(1, 19, 10, 0).is_err());
    }

    #[test]
    fn truth_sets() {
        let d = example_design(1, 20, 10, 0).unwrap();
        let t12 = d.ground_truth(ClassPair::new(1, 2)).unwrap();
        assert_eq!(t12.informative_set, (0..20).collect::<Vec<_>>());
        assert_eq!(t12.muji_set, vec![0, 1, 2, 3, 10, 11, 12, 13]);
        let t23 = d.ground_truth(ClassPair::new(2, 3)).unwrap();
        let want: Vec<usize> = (0..5).chain(10..15).collect();
        assert_eq!(t23.informative_set, want);
        assert!(t23.muji_set.is_empty());
        // under CS the block rule agrees with the precision-weighted rule
        assert_eq!(d.condition_a_set(ClassPair::new(1, 2)).unwrap(), t12.informative_set);
        assert_eq!(d.condition_a_set(ClassPair::new(2, 3)).unwrap(), want);
    }

    #[test]
    fn delta_p_identity_and_homogeneity() {
        let mut d = SimDesign {
            p: 3,
            n_per_class: 2,
            n_test_per_class: 1,
            blocks: vec![],
            mean_table: vec![vec![2.0], vec![0.0]],
            seed: 0,
        };
        assert!((d.oracle_delta_p(ClassPair::new(1, 2)).unwrap() - 2.0).abs() < 1e-15);
        let e = example_design(1, 20, 10, 0).unwrap();
        let base = e.oracle_delta_p(ClassPair::new(1, 2)).unwrap();
        let mut scaled = e.clone();
        for row in &mut scaled.mean_table {
            row.iter_mut().for_each(|v| *v *= -3.0);
        }
        let s = scaled.oracle_delta_p(ClassPair::new(1, 2)).unwrap();
        assert!((s - 3.0 * base).abs() < 1e-12);
        d.mean_table = vec![vec![2.0], vec![2.0]];
        assert_eq!(d.oracle_delta_p(ClassPair::new(1, 2)).unwrap(), 0.0);
    }

    #[test]
    fn sampling_is_deterministic() {
        let d = example_design(1, 40, 5, 11).unwrap();
        let a = d.sample().unwrap();
        let b = d.sample().unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.test, b.test);
        assert_eq!(a.train.n(), 15);
        assert_eq!(a.test.n(), 150);
        let mut other = d.clone();
        other.seed = 12;
        assert_ne!(other.sample().unwrap().train, a.train);
    }

    #[test]
    fn block_correlations_are_reproduced() {
        let mut d = example_design(1, 25, 300, 3).unwrap();
        d.n_test_per_class = 1;
        let s = d.sample().unwrap();
        for (a, b) in [(0, 1), (2, 4), (5, 9)] {
            let r = corr(&s.train, a, b, 1);
            assert!((r - 0.5).abs() < 0.1, "cs corr({a},{b}) = {r}");
        }
        let mut d2 = example_design(2, 25, 3000, 3).unwrap();
        d2.n_test_per_class = 1;
        let s2 = d2.sample().unwrap();
        let r13 = corr(&s2.train, 0, 2, 2);
        assert!((r13 - 0.25).abs() < 0.05, "ar1 lag-2 corr = {r13}");
        let r15 = corr(&s2.train, 0, 4, 2);
        assert!((r15 - 0.0625).abs() < 0.05, "ar1 lag-4 corr = {r15}");
        let r_noise = corr(&s2.train, 0, 22, 1);
        assert!(r_noise.abs() < 0.06);
    }

    #[test]
    fn design_validation() {
        let mut d = example_design(1, 20, 10, 0).unwrap();
        d.blocks.push(CorrelationBlock::new(3, 7, CorrelationKind::Cs, 0.1));
        assert!(d.validate().is_err());
        let mut d = example_design(1, 20, 10, 0).unwrap();
        d.blocks[0].rho = 1.0;
        assert!(d.validate().is_err());
        let json = example_design(2, 50, 10, 9).unwrap().to_json();
        let back: SimDesign = serde_json::from_str(&json).unwrap();
        assert_eq!(back, example_design(2, 50, 10, 9).unwrap());
    }
}
