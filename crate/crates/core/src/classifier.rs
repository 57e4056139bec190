//! Post-screening linear discriminant rule for a class pair, and pairwise
//! majority voting for more than two classes.
//!
//! The rule works in standardized coordinates `z_j = (x_j - shift_j) / scale_j`
//! where `scale` is the pooled within-class sd of the two classes. In those
//! units the precision from screening applies directly, and the score is
//!
//! ```text
//! s(x) = (z_S - midpoint)' · Ω_S (mu_a - mu_b)
//! ```
//!
//! Class `a` wins when `s >= 0`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{class_summaries, ClassPair, LabeledMatrix};
use crate::error::{Error, Result};
use crate::linalg::mat_vec;
use crate::screening::ScreeningResult;

/// Anything that assigns a class id to a raw feature vector.
pub trait Predictor {
    fn predict(&self, x: &[f64]) -> i64;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedClassifier {
    pub pair: ClassPair,
    /// Feature indices, 0-based and ascending.
    pub selected: Vec<usize>,
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
    pub mu_a: Vec<f64>,
    pub mu_b: Vec<f64>,
    pub midpoint: Vec<f64>,
    /// Row-major, `selected.len()` square.
    pub precision: Vec<f64>,
    pub direction: Vec<f64>,
}

impl FittedClassifier {
    /// Fits the rule on the rows of `pair` in `train`, using the features and
    /// precision chosen by `screening`.
    pub fn fit_pair(train: &LabeledMatrix, pair: ClassPair, screening: &ScreeningResult) -> Result<Self> {
        if screening.selected.is_empty() {
            return Err(Error::EmptySelection);
        }
        for id in [pair.a, pair.b] {
            if train.class_count(id) == 0 {
                return Err(Error::MissingClass(id));
            }
        }
        if screening.p() != train.p() {
            return Err(Error::InvalidParameter(format!(
                "screening covers {} features, data has {}",
                screening.p(),
                train.p()
            )));
        }
        let rows = train.restrict_to_pair(pair)?;
        let summary = class_summaries(&rows)?;
        let (ma, mb) = (summary.means(pair.a)?, summary.means(pair.b)?);
        let (na, nb) = (summary.count(pair.a)? as f64, summary.count(pair.b)? as f64);
        let sel = &screening.selected;
        let shift: Vec<f64> = sel.iter().map(|&j| (na * ma[j] + nb * mb[j]) / (na + nb)).collect();
        let scale: Vec<f64> = sel.iter().map(|&j| summary.pooled_sd[j]).collect();
        let standardize = |m: &[f64]| -> Vec<f64> {
            sel.iter()
                .enumerate()
                .map(|(t, &j)| (m[j] - shift[t]) / scale[t])
                .collect()
        };
        let (mu_a, mu_b) = (standardize(ma), standardize(mb));
        let mut model = Self::fit_with_parameters(pair, sel.clone(), mu_a, mu_b, screening.selected_precision())?;
        model.shift = shift;
        model.scale = scale;
        Ok(model)
    }

    /// Builds the rule from known means and precision on raw coordinates.
    pub fn fit_with_parameters(
        pair: ClassPair,
        selected: Vec<usize>,
        mu_a: Vec<f64>,
        mu_b: Vec<f64>,
        precision: Vec<f64>,
    ) -> Result<Self> {
        let k = selected.len();
        if k == 0 {
            return Err(Error::EmptySelection);
        }
        if mu_a.len() != k || mu_b.len() != k || precision.len() != k * k {
            return Err(Error::InvalidParameter("parameter lengths disagree with the selection".into()));
        }
        let gap: Vec<f64> = mu_a.iter().zip(&mu_b).map(|(a, b)| a - b).collect();
        let direction = mat_vec(&precision, k, &gap);
        let midpoint = mu_a.iter().zip(&mu_b).map(|(a, b)| 0.5 * (a + b)).collect();
        Ok(FittedClassifier {
            pair,
            selected,
            shift: vec![0.0; k],
            scale: vec![1.0; k],
            mu_a,
            mu_b,
            midpoint,
            precision,
            direction,
        })
    }

    /// Discriminant score of a raw sample; positive favours class `a`.
    pub fn score(&self, x: &[f64]) -> f64 {
        self.selected
            .iter()
            .enumerate()
            .map(|(t, &j)| ((x[j] - self.shift[t]) / self.scale[t] - self.midpoint[t]) * self.direction[t])
            .sum()
    }

    pub fn predict_pair(&self, x: &[f64]) -> i64 {
        if self.score(x) >= 0.0 {
            self.pair.a
        } else {
            self.pair.b
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("classifier serializes")
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.into(),
            message: e.to_string(),
        })
    }
}

impl Predictor for FittedClassifier {
    fn predict(&self, x: &[f64]) -> i64 {
        self.predict_pair(x)
    }
}

/// Outcome of one majority vote.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vote {
    pub class: i64,
    /// Votes per class, ascending by class id.
    pub tally: Vec<(i64, usize)>,
    /// Several classes shared the top count; the smallest id won.
    pub tied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VotingEnsemble {
    pub class_ids: Vec<i64>,
    pub classifiers: Vec<FittedClassifier>,
}

impl VotingEnsemble {
    /// Requires exactly one model per unordered pair of the classes seen.
    pub fn new(classifiers: Vec<FittedClassifier>) -> Result<Self> {
        let ids: BTreeSet<i64> = classifiers.iter().flat_map(|c| [c.pair.a, c.pair.b]).collect();
        let pairs: BTreeSet<(i64, i64)> = classifiers
            .iter()
            .map(|c| (c.pair.a.min(c.pair.b), c.pair.a.max(c.pair.b)))
            .collect();
        let k = ids.len();
        if k < 2 || pairs.len() != classifiers.len() || pairs.len() != k * (k - 1) / 2 {
            return Err(Error::InvalidParameter(format!(
                "{} pairwise models do not cover {k} classes exactly once",
                classifiers.len()
            )));
        }
        Ok(VotingEnsemble {
            class_ids: ids.into_iter().collect(),
            classifiers,
        })
    }

    pub fn k(&self) -> usize {
        self.class_ids.len()
    }

    pub fn predict_vote(&self, x: &[f64]) -> Vote {
        let winners = self.classifiers.iter().map(|c| c.predict_pair(x));
        tally_votes(&self.class_ids, winners)
    }
}

impl Predictor for VotingEnsemble {
    fn predict(&self, x: &[f64]) -> i64 {
        self.predict_vote(x).class
    }
}

/// Counts pairwise winners; ties go to the smallest class id.
pub fn tally_votes(class_ids: &[i64], winners: impl IntoIterator<Item = i64>) -> Vote {
    let mut counts: BTreeMap<i64, usize> = class_ids.iter().map(|&c| (c, 0)).collect();
    for w in winners {
        *counts.entry(w).or_default() += 1;
    }
    let best = counts.values().copied().max().unwrap_or(0);
    let top: Vec<i64> = counts.iter().filter(|(_, &v)| v == best).map(|(&c, _)| c).collect();
    Vote {
        class: top[0],
        tied: top.len() > 1,
        tally: counts.into_iter().collect(),
    }
}

/// Fraction of rows of `test` whose predicted class differs from the label.
pub fn misclassification_rate<P: Predictor + Sync>(model: &P, test: &LabeledMatrix) -> Result<f64> {
    if test.n() == 0 {
        return Err(Error::InvalidData("test set is empty".into()));
    }
    let wrong = (0..test.n())
        .into_par_iter()
        .filter(|&i| model.predict(test.row(i)) != test.label_id(i))
        .count();
    Ok(wrong as f64 / test.n() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_d() -> FittedClassifier {
        FittedClassifier::fit_with_parameters(ClassPair::new(1, 2), vec![0], vec![1.0], vec![-1.0], vec![1.0]).unwrap()
    }

    #[test]
    fn symmetric_one_dimensional_rule() {
        let m = one_d();
        assert_eq!(m.predict_pair(&[0.3]), 1);
        assert_eq!(m.predict_pair(&[-0.3]), 2);
        assert_eq!(m.predict_pair(&[0.0]), 1, "zero score goes to class a");
        assert_eq!(m.predict_pair(&m.mu_b.clone()), 2);
    }

    #[test]
    fn identity_precision_is_nearest_centroid() {
        let mu_a = vec![1.0, 2.0, -1.0];
        let mu_b = vec![0.0, -1.0, 0.5];
        let m = FittedClassifier::fit_with_parameters(
            ClassPair::new(3, 7),
            vec![0, 2, 4],
            mu_a.clone(),
            mu_b.clone(),
            vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        )
        .unwrap();
        let dist = |x: &[f64], m: &[f64]| -> f64 { x.iter().zip(m).map(|(a, b)| (a - b) * (a - b)).sum() };
        for x in [[0.1, 9.0, 1.5, 9.0, -0.8], [0.9, 0.0, 0.2, 0.0, 0.1], [-2.0, 0.0, 0.0, 0.0, 3.0]] {
            let z = [x[0], x[2], x[4]];
            let want = if dist(&z, &mu_a) <= dist(&z, &mu_b) { 3 } else { 7 };
            assert_eq!(m.predict_pair(&x), want);
        }
    }

    #[test]
    fn swapping_the_pair_flips_scores() {
        let prec = vec![2.0, -0.5, -0.5, 1.0];
        let m = FittedClassifier::fit_with_parameters(
            ClassPair::new(1, 2),
            vec![0, 1],
            vec![1.0, 0.5],
            vec![0.0, -0.5],
            prec.clone(),
        )
        .unwrap();
        let w = FittedClassifier::fit_with_parameters(
            ClassPair::new(2, 1),
            vec![0, 1],
            vec![0.0, -0.5],
            vec![1.0, 0.5],
            prec,
        )
        .unwrap();
        for x in [[0.4, 0.1], [-1.0, 2.0], [3.0, -3.0]] {
            assert!((m.score(&x) + w.score(&x)).abs() < 1e-14);
            assert_eq!(m.predict_pair(&x), w.predict_pair(&x));
        }
    }

    #[test]
    fn votes_and_ties() {
        let v = tally_votes(&[1, 2, 3], [1, 1, 2]);
        assert_eq!((v.class, v.tied), (1, false));
        let v = tally_votes(&[1, 2, 3], [1, 2, 3]);
        assert_eq!((v.class, v.tied), (1, true));
        assert_eq!(v.tally, vec![(1, 1), (2, 1), (3, 1)]);
    }

    #[test]
    fn ensemble_shape_is_checked() {
        let m = one_d();
        assert!(VotingEnsemble::new(vec![m.clone()]).is_ok());
        assert!(VotingEnsemble::new(vec![m.clone(), m.clone()]).is_err());
        let mut other = m.clone();
        other.pair = ClassPair::new(1, 3);
        assert!(VotingEnsemble::new(vec![m.clone(), other]).is_err());
        let e = VotingEnsemble::new(vec![m.clone()]).unwrap();
        for x in [[-2.0], [0.0], [0.5]] {
            assert_eq!(e.predict(&x), m.predict(&x));
        }
    }

    #[test]
    fn error_rates() {
        let m = one_d();
        let test = LabeledMatrix::new(vec![1.0, 2.0, -1.0, -3.0], 1, &[1, 1, 2, 2]).unwrap();
        assert_eq!(misclassification_rate(&m, &test).unwrap(), 0.0);
        struct Constant;
        impl Predictor for Constant {
            fn predict(&self, _: &[f64]) -> i64 {
                1
            }
        }
        assert_eq!(misclassification_rate(&Constant, &test).unwrap(), 0.5);
    }

    #[test]
    fn json_round_trip() {
        let m = one_d();
        let back: FittedClassifier = serde_json::from_str(&m.to_json()).unwrap();
        assert_eq!(back, m);
        assert!(matches!(
            FittedClassifier::fit_with_parameters(ClassPair::new(1, 2), vec![], vec![], vec![], vec![]),
            Err(Error::EmptySelection)
        ));
    }
}
