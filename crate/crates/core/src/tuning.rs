//! Cross-validated choice of `tau` (and optionally `alpha`), and bootstrap
//! selection frequencies.

use std::io::Write;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{misclassification_rate, FittedClassifier};
use crate::covgraph::{CorrelationEstimator, CorrelationSource, LazyCorrGraph, NeighborGraph, ThresholdedCorrGraph};
use crate::dataset::{class_summaries, ClassPair, LabeledMatrix};
use crate::error::{Error, Result};
use crate::evaluation::marginal_baseline;
use crate::screening::{screen, ScreeningConfig, ScreeningResult};

/// Error charged to a grid point whose selection comes out empty.
pub const EMPTY_SELECTION_PENALTY: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Covariance-insured screening.
    Cis,
    /// Marginal screening with an identity precision.
    Marginal,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Cis => "CIS",
            Method::Marginal => "MS",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cis" => Ok(Method::Cis),
            "ms" | "marginal" => Ok(Method::Marginal),
            _ => Err(Error::InvalidParameter(format!("unknown method {s:?}; expected cis or ms"))),
        }
    }
}

/// Candidate thresholds for `tau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauGrid {
    Values(Vec<f64>),
    /// Quantiles of the observed `|d_j|` on the full training pair.
    Quantiles(Vec<f64>),
}

impl Default for TauGrid {
    fn default() -> Self {
        TauGrid::Quantiles(vec![0.80, 0.90, 0.95, 0.99])
    }
}

impl TauGrid {
    pub fn resolve(&self, differences: &[f64]) -> Vec<f64> {
        match self {
            TauGrid::Values(v) => v.clone(),
            TauGrid::Quantiles(qs) => {
                let mut abs: Vec<f64> = differences.iter().map(|d| d.abs()).collect();
                abs.sort_by(f64::total_cmp);
                qs.iter().map(|&q| quantile_sorted(&abs, q)).collect()
            }
        }
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let h = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvPlan {
    pub folds: usize,
    pub tau_grid: TauGrid,
    pub alpha_grid: Vec<f64>,
    pub seed: u64,
}

impl Default for CvPlan {
    fn default() -> Self {
        CvPlan {
            folds: 5,
            tau_grid: TauGrid::default(),
            alpha_grid: vec![0.2],
            seed: 0,
        }
    }
}

impl CvPlan {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::InvalidParameter(format!("{} folds; at least 2 needed", self.folds)));
        }
        let taus_empty = match &self.tau_grid {
            TauGrid::Values(v) | TauGrid::Quantiles(v) => v.is_empty(),
        };
        if taus_empty || self.alpha_grid.is_empty() {
            return Err(Error::InvalidParameter("empty tuning grid".into()));
        }
        Ok(())
    }
}

/// Fold label of every row, stratified by class. Each class is shuffled and
/// dealt round-robin, starting where the previous class stopped.
pub fn stratified_folds(data: &LabeledMatrix, folds: usize, seed: u64) -> Result<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; data.n()];
    let mut next = 0;
    for &id in data.class_ids() {
        let mut rows = data.rows_of_classes(&[id]);
        if rows.len() < folds {
            return Err(Error::FoldTooSmall {
                fold: rows.len(),
                class: id,
            });
        }
        rows.shuffle(&mut rng);
        for i in rows {
            assignment[i] = next % folds;
            next += 1;
        }
    }
    Ok(assignment)
}

/// Screening plus classifier for one method. The classifier is absent when
/// nothing was selected.
#[derive(Debug, Clone)]
pub struct PairFit {
    pub screening: ScreeningResult,
    pub classifier: Option<FittedClassifier>,
}

/// Screens `pair` on `train` and fits the rule on the selected features.
/// `graph` is only consulted by [`Method::Cis`].
pub fn fit_method(
    method: Method,
    graph: &dyn NeighborGraph,
    train: &LabeledMatrix,
    pair: ClassPair,
    config: &ScreeningConfig,
) -> Result<PairFit> {
    let screening = match method {
        Method::Cis => {
            let rows = train.restrict_to_pair(pair)?;
            screen(graph, &class_summaries(&rows)?, pair, config)?
        }
        Method::Marginal => marginal_baseline(train, pair, config.tau, config.selection)?,
    };
    let classifier = if screening.selected.is_empty() {
        None
    } else {
        Some(FittedClassifier::fit_pair(train, pair, &screening)?)
    };
    Ok(PairFit { screening, classifier })
}

/// Lazily explored pooled-within-class graph over all rows of `rows`.
pub fn lazy_graph(rows: &LabeledMatrix, alpha: f64) -> Result<LazyCorrGraph> {
    let source = Arc::new(CorrelationSource::new(rows, CorrelationEstimator::PooledWithinClass)?);
    LazyCorrGraph::new(source, alpha)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub tau: f64,
    pub alpha: f64,
    pub cv_error: f64,
    /// Folds where nothing was selected.
    pub empty_folds: usize,
    /// Folds where screening failed (a block stayed singular).
    pub failed_folds: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome {
    pub pair: ClassPair,
    pub method: Method,
    pub tau: f64,
    pub alpha: f64,
    pub table: Vec<CvRow>,
}

impl CvOutcome {
    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["method", "pair", "tau", "alpha", "cv_error", "empty_folds", "failed_folds", "chosen"])?;
        for r in &self.table {
            let chosen = r.tau == self.tau && r.alpha == self.alpha;
            wtr.write_record([
                self.method.to_string(),
                self.pair.to_string(),
                r.tau.to_string(),
                r.alpha.to_string(),
                r.cv_error.to_string(),
                r.empty_folds.to_string(),
                r.failed_folds.to_string(),
                u8::from(chosen).to_string(),
            ])?;
        }
        wtr.flush().map_err(|e| Error::io("<cv table>", e))?;
        Ok(())
    }
}

enum FoldScore {
    Error(f64),
    Empty,
    Failed,
}

/// Grid search over `tau` x `alpha` by stratified k-fold cross-validation on
/// the rows of `pair`.
///
/// Rows of other classes in `train` stay in every fold's correlation graph;
/// only the held-out rows of the pair are removed.
pub fn cross_validate(
    train: &LabeledMatrix,
    pair: ClassPair,
    plan: &CvPlan,
    template: &ScreeningConfig,
    method: Method,
) -> Result<CvOutcome> {
    plan.validate()?;
    let pair_rows = train.rows_of_classes(&[pair.a, pair.b]);
    let pair_data = train.select_rows(&pair_rows)?;
    if pair_data.k() != 2 {
        return Err(Error::MissingClass(if train.class_count(pair.a) == 0 { pair.a } else { pair.b }));
    }
    let taus = plan.tau_grid.resolve(&class_summaries(&pair_data)?.standardized_difference(pair)?);
    let alphas: Vec<f64> = match method {
        Method::Cis => plan.alpha_grid.clone(),
        Method::Marginal => vec![template.alpha],
    };
    let folds = stratified_folds(&pair_data, plan.folds, plan.seed)?;

    // scores[fold][alpha][tau]
    let scores: Vec<Vec<Vec<FoldScore>>> = (0..plan.folds)
        .into_par_iter()
        .map(|f| -> Result<Vec<Vec<FoldScore>>> {
            let held: Vec<usize> = (0..pair_data.n()).filter(|&i| folds[i] == f).collect();
            let kept: Vec<usize> = (0..pair_data.n()).filter(|&i| folds[i] != f).collect();
            let fit_rows = pair_data.select_rows(&kept)?;
            let test_rows = pair_data.select_rows(&held)?;
            for id in [pair.a, pair.b] {
                if test_rows.class_count(id) == 0 || fit_rows.class_count(id) == 0 {
                    return Err(Error::FoldTooSmall { fold: f, class: id });
                }
            }
            let source = match method {
                Method::Cis => {
                    let mut dropped = vec![false; train.n()];
                    held.iter().for_each(|&i| dropped[pair_rows[i]] = true);
                    let graph_rows: Vec<usize> = (0..train.n()).filter(|&i| !dropped[i]).collect();
                    Some(Arc::new(CorrelationSource::new(
                        &train.select_rows(&graph_rows)?,
                        CorrelationEstimator::PooledWithinClass,
                    )?))
                }
                Method::Marginal => None,
            };
            alphas
                .iter()
                .map(|&alpha| {
                    let graph: Box<dyn NeighborGraph> = match &source {
                        Some(s) => Box::new(LazyCorrGraph::new(s.clone(), alpha)?),
                        None => Box::new(ThresholdedCorrGraph::from_edges(train.p(), alpha, [])?),
                    };
                    taus.iter()
                        .map(|&tau| {
                            let config = ScreeningConfig {
                                tau,
                                alpha,
                                ..template.clone()
                            };
                            match fit_method(method, graph.as_ref(), &fit_rows, pair, &config) {
                                Ok(PairFit {
                                    classifier: Some(model),
                                    ..
                                }) => Ok(FoldScore::Error(misclassification_rate(&model, &test_rows)?)),
                                Ok(PairFit { classifier: None, .. }) => Ok(FoldScore::Empty),
                                Err(Error::SingularBlock(_)) => Ok(FoldScore::Failed),
                                Err(e) => Err(e),
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    let mut table = Vec::new();
    for (ai, &alpha) in alphas.iter().enumerate() {
        for (ti, &tau) in taus.iter().enumerate() {
            let mut row = CvRow {
                tau,
                alpha,
                cv_error: 0.0,
                empty_folds: 0,
                failed_folds: 0,
            };
            for fold in &scores {
                row.cv_error += match fold[ai][ti] {
                    FoldScore::Error(e) => e,
                    FoldScore::Empty => {
                        row.empty_folds += 1;
                        EMPTY_SELECTION_PENALTY
                    }
                    FoldScore::Failed => {
                        row.failed_folds += 1;
                        EMPTY_SELECTION_PENALTY
                    }
                };
            }
            row.cv_error /= plan.folds as f64;
            table.push(row);
        }
    }
    let best = pick_best(&table);
    Ok(CvOutcome {
        pair,
        method,
        tau: table[best].tau,
        alpha: table[best].alpha,
        table,
    })
}

/// Lowest error; ties go to the larger `tau`, then the larger `alpha`.
/// Grid points that never produced a usable fold only win when nothing did.
fn pick_best(table: &[CvRow]) -> usize {
    const TIE: f64 = 1e-12;
    let folds_ok = |r: &CvRow| r.empty_folds + r.failed_folds == 0;
    let any_ok = table.iter().any(folds_ok);
    let mut best: Option<usize> = None;
    for (i, r) in table.iter().enumerate() {
        if any_ok && !folds_ok(r) {
            continue;
        }
        best = Some(match best {
            None => i,
            Some(b) => {
                let c = &table[b];
                if r.cv_error < c.cv_error - TIE
                    || ((r.cv_error - c.cv_error).abs() <= TIE
                        && (r.tau > c.tau || (r.tau == c.tau && r.alpha > c.alpha)))
                {
                    i
                } else {
                    b
                }
            }
        });
    }
    best.unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub pair: ClassPair,
    pub n_bootstrap: usize,
    /// Resamples that failed and selected nothing.
    pub failures: usize,
    /// Fraction of resamples selecting each feature.
    pub frequency: Vec<f64>,
}

impl StabilityReport {
    /// Features by decreasing frequency, ties by index.
    pub fn top(&self, count: usize) -> Vec<(usize, f64)> {
        let mut order: Vec<usize> = (0..self.frequency.len()).collect();
        order.sort_by(|&a, &b| self.frequency[b].total_cmp(&self.frequency[a]).then(a.cmp(&b)));
        order.into_iter().take(count).map(|j| (j, self.frequency[j])).collect()
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["feature", "frequency"])?;
        for (j, f) in self.frequency.iter().enumerate() {
            wtr.write_record([(j + 1).to_string(), f.to_string()])?;
        }
        wtr.flush().map_err(|e| Error::io("<stability report>", e))?;
        Ok(())
    }
}

/// Rows drawn with replacement within each class, class sizes preserved.
pub fn stratified_bootstrap(data: &LabeledMatrix, rng: &mut impl Rng) -> Result<LabeledMatrix> {
    let mut rows = Vec::with_capacity(data.n());
    for &id in data.class_ids() {
        let members = data.rows_of_classes(&[id]);
        rows.extend((0..members.len()).map(|_| members[rng.gen_range(0..members.len())]));
    }
    data.select_rows(&rows)
}

/// Selection frequency of every feature over `n_bootstrap` class-stratified
/// resamples, each tuned by cross-validation before screening.
pub fn stability_frequencies(
    train: &LabeledMatrix,
    pair: ClassPair,
    n_bootstrap: usize,
    plan: &CvPlan,
    template: &ScreeningConfig,
    method: Method,
) -> Result<StabilityReport> {
    if n_bootstrap == 0 {
        return Err(Error::InvalidParameter("n_bootstrap must be at least 1".into()));
    }
    let runs: Vec<Option<Vec<usize>>> = (0..n_bootstrap)
        .into_par_iter()
        .map(|b| -> Result<Option<Vec<usize>>> {
            let seed = plan.seed.wrapping_add(b as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sample = stratified_bootstrap(train, &mut rng)?;
            let plan_b = CvPlan { seed, ..plan.clone() };
            let cv = match cross_validate(&sample, pair, &plan_b, template, method) {
                Ok(cv) => cv,
                Err(Error::SingularBlock(_)) => return Ok(None),
                Err(e) => return Err(e),
            };
            let config = ScreeningConfig {
                tau: cv.tau,
                alpha: cv.alpha,
                ..template.clone()
            };
            let graph = lazy_graph(&sample, cv.alpha)?;
            match fit_method(method, &graph, &sample, pair, &config) {
                Ok(fit) => Ok(Some(fit.screening.selected)),
                Err(Error::SingularBlock(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let mut frequency = vec![0.0; train.p()];
    let mut failures = 0;
    for run in &runs {
        match run {
            Some(sel) => sel.iter().for_each(|&j| frequency[j] += 1.0),
            None => failures += 1,
        }
    }
    frequency.iter_mut().for_each(|f| *f /= n_bootstrap as f64);
    Ok(StabilityReport {
        pair,
        n_bootstrap,
        failures,
        frequency,
    })
}
