//! Screening and classification metrics, the marginal-screening baseline, and
//! the replicated simulation benchmark.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::misclassification_rate;
use crate::covgraph::{Depth, NeighborGraph};
use crate::dataset::{class_summaries, ClassPair, LabeledMatrix};
use crate::error::{Error, Result};
use crate::screening::{importance_scores, marginal_set, select, BlockPrecision, PrecisionBlock, ScreeningConfig,
    ScreeningResult, SelectionRule};
use crate::simgen::example_design;
use crate::tuning::{cross_validate, fit_method, lazy_graph, quantile_sorted, CvPlan, Method, TauGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScreenMetrics {
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub sensitivity: f64,
    pub specificity: f64,
    /// Smallest top-k of the ranking holding every informative feature;
    /// `p + 1` when some informative feature is unranked.
    pub mms: usize,
    /// Test misclassification, in percent.
    pub er_percent: Option<f64>,
}

/// Misclassification rate of the optimal rule, `Phi(-delta_p / 2)`.
pub fn oracle_error_rate(delta_p: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::new(0.0, 1.0).expect("standard normal").cdf(-delta_p / 2.0)
}

/// Compares a selection and ranking with the informative set.
pub fn screen_metrics(selected: &[usize], ranking: &[usize], informative: &[usize], p: usize) -> ScreenMetrics {
    let truth: BTreeSet<usize> = informative.iter().copied().collect();
    let chosen: BTreeSet<usize> = selected.iter().copied().collect();
    let fp = chosen.difference(&truth).count();
    let fn_ = truth.difference(&chosen).count();
    let negatives = p - truth.len();
    let sensitivity = if truth.is_empty() {
        1.0
    } else {
        (truth.len() - fn_) as f64 / truth.len() as f64
    };
    let specificity = if negatives == 0 {
        1.0
    } else {
        (negatives - fp) as f64 / negatives as f64
    };
    let mut missing = truth.len();
    let mut mms = p + 1;
    if missing == 0 {
        mms = 0;
    }
    for (k, j) in ranking.iter().enumerate() {
        if missing == 0 {
            break;
        }
        if truth.contains(j) {
            missing -= 1;
            if missing == 0 {
                mms = k + 1;
            }
        }
    }
    ScreenMetrics {
        fp,
        fn_,
        sensitivity,
        specificity,
        mms,
        er_percent: None,
    }
}

/// Marginal screening: features are ranked by `|d_j|`, the survivors of
/// `|d_j| > tau` compete under `rule`, and every selected feature gets an
/// identity precision block.
pub fn marginal_baseline(
    train: &LabeledMatrix,
    pair: ClassPair,
    tau: f64,
    rule: SelectionRule,
) -> Result<ScreeningResult> {
    let rows = train.restrict_to_pair(pair)?;
    let summary = class_summaries(&rows)?;
    let differences = summary.standardized_difference(pair)?;
    let survivors = marginal_set(&differences, tau);
    let blocks = survivors
        .iter()
        .map(|&j| PrecisionBlock {
            component_id: j,
            members: vec![j],
            anchors: vec![j],
            depth: 0,
            precision: vec![1.0],
            ridge: None,
        })
        .collect();
    let precision = BlockPrecision {
        blocks,
        depth_cuts: Vec::new(),
    };
    let eligible = importance_scores(&precision, &differences);
    let selected = select(&eligible, rule, rows.n());
    let importance = differences.iter().map(|d| d.abs()).collect();
    Ok(ScreeningResult {
        pair,
        marginal_set: survivors.clone(),
        component_cover: survivors,
        differences,
        precision,
        importance,
        selected,
        warnings: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub example: u32,
    pub p: usize,
    pub n_per_class: usize,
    pub alphas: Vec<f64>,
    pub depth: Depth,
    pub replicates: usize,
    pub seed: u64,
    pub folds: usize,
    pub tau_grid: TauGrid,
    pub selection: SelectionRule,
    pub pairs: Vec<ClassPair>,
    pub methods: Vec<Method>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            example: 1,
            p: 10_000,
            n_per_class: 100,
            alphas: vec![0.2],
            depth: Depth::Limited(10),
            replicates: 50,
            seed: 0,
            folds: 5,
            tau_grid: TauGrid::Values(vec![0.5, 1.0, 1.5, 2.0]),
            selection: SelectionRule::TopSampleSize,
            pairs: vec![ClassPair::new(1, 2), ClassPair::new(2, 3)],
            methods: vec![Method::Cis, Method::Marginal],
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidParameter("at least one replicate is needed".into()));
        }
        if self.alphas.is_empty() || self.pairs.is_empty() || self.methods.is_empty() {
            return Err(Error::InvalidParameter("alphas, pairs and methods must be nonempty".into()));
        }
        example_design(self.example, self.p, self.n_per_class, self.seed)?;
        Ok(())
    }
}

/// One method on one pair at one `alpha` in one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub seed: u64,
    pub method: Method,
    pub pair: ClassPair,
    pub alpha: f64,
    pub tau: Option<f64>,
    pub selected: usize,
    pub metrics: Option<ScreenMetrics>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub method: Method,
    pub pair: ClassPair,
    pub alpha: f64,
    pub replicates: usize,
    pub failures: usize,
    /// `(mean, standard error)` pairs.
    pub fp: (f64, f64),
    pub fn_: (f64, f64),
    pub sensitivity: (f64, f64),
    pub specificity: (f64, f64),
    pub er_percent: (f64, f64),
    /// `(median, interquartile range)`.
    pub mms: (f64, f64),
}

/// Mean and standard error of the mean (sample sd over `sqrt(n)`).
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Median and interquartile range, by linear interpolation.
pub fn median_iqr(values: &[f64]) -> (f64, f64) {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    (
        quantile_sorted(&s, 0.5),
        quantile_sorted(&s, 0.75) - quantile_sorted(&s, 0.25),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub config: BenchConfig,
    pub records: Vec<ReplicateRecord>,
}

impl BenchReport {
    pub fn aggregates(&self) -> Vec<Aggregate> {
        let mut out = Vec::new();
        for &method in &self.config.methods {
            for &pair in &self.config.pairs {
                for &alpha in &self.config.alphas {
                    let group: Vec<&ReplicateRecord> = self
                        .records
                        .iter()
                        .filter(|r| r.method == method && r.pair == pair && r.alpha == alpha)
                        .collect();
                    let ok: Vec<ScreenMetrics> = group.iter().filter_map(|r| r.metrics).collect();
                    let col = |f: &dyn Fn(&ScreenMetrics) -> f64| ok.iter().map(f).collect::<Vec<_>>();
                    out.push(Aggregate {
                        method,
                        pair,
                        alpha,
                        replicates: ok.len(),
                        failures: group.len() - ok.len(),
                        fp: mean_se(&col(&|m| m.fp as f64)),
                        fn_: mean_se(&col(&|m| m.fn_ as f64)),
                        sensitivity: mean_se(&col(&|m| m.sensitivity)),
                        specificity: mean_se(&col(&|m| m.specificity)),
                        er_percent: mean_se(&col(&|m| m.er_percent.unwrap_or(f64::NAN))),
                        mms: median_iqr(&col(&|m| m.mms as f64)),
                    });
                }
            }
        }
        out
    }

    pub fn aggregate(&self, method: Method, pair: ClassPair, alpha: f64) -> Option<Aggregate> {
        self.aggregates()
            .into_iter()
            .find(|a| a.method == method && a.pair == pair && a.alpha == alpha)
    }

    /// One row per method, pair, alpha and statistic. The spread column holds
    /// the standard error of the mean (sd / sqrt(n)) or, for MMS, the IQR.
    pub fn write_summary_csv(&self, writer: impl Write) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record([
            "method", "pair", "alpha", "depth", "statistic", "estimate", "spread", "spread_kind", "replicates",
            "failures",
        ])?;
        for a in self.aggregates() {
            let stats = [
                ("FP", a.fp, "se"),
                ("FN", a.fn_, "se"),
                ("se", a.sensitivity, "se"),
                ("sp", a.specificity, "se"),
                ("ER", a.er_percent, "se"),
                ("MMS", a.mms, "iqr"),
            ];
            for (name, (est, spread), kind) in stats {
                wtr.write_record([
                    a.method.to_string(),
                    a.pair.to_string(),
                    a.alpha.to_string(),
                    self.config.depth.to_string(),
                    name.to_string(),
                    format!("{est:.6}"),
                    format!("{spread:.6}"),
                    kind.to_string(),
                    a.replicates.to_string(),
                    a.failures.to_string(),
                ])?;
            }
        }
        wtr.flush().map_err(|e| Error::io("<bench summary>", e))?;
        Ok(())
    }

    pub fn write_replicates_csv(&self, writer: impl Write) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record([
            "replicate", "seed", "method", "pair", "alpha", "tau", "selected", "FP", "FN", "se", "sp", "MMS", "ER",
            "failure",
        ])?;
        let opt = |v: Option<String>| v.unwrap_or_default();
        for r in &self.records {
            let m = r.metrics;
            wtr.write_record([
                r.replicate.to_string(),
                r.seed.to_string(),
                r.method.to_string(),
                r.pair.to_string(),
                r.alpha.to_string(),
                opt(r.tau.map(|t| t.to_string())),
                r.selected.to_string(),
                opt(m.map(|m| m.fp.to_string())),
                opt(m.map(|m| m.fn_.to_string())),
                opt(m.map(|m| format!("{:.6}", m.sensitivity))),
                opt(m.map(|m| format!("{:.6}", m.specificity))),
                opt(m.map(|m| m.mms.to_string())),
                opt(m.and_then(|m| m.er_percent).map(|e| format!("{e:.4}"))),
                opt(r.failure.clone()),
            ])?;
        }
        wtr.flush().map_err(|e| Error::io("<bench replicates>", e))?;
        Ok(())
    }

    /// Plain-text table, one line per method, pair and alpha.
    pub fn render_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "example {} | p = {} | depth {} | {} replicates | mean (se), MMS median (IQR)",
            self.config.example, self.config.p, self.config.depth, self.config.replicates
        );
        let _ = writeln!(
            s,
            "{:<6}{:<6}{:>6}  {:>14}{:>14}{:>16}{:>16}{:>16}{:>14}{:>6}",
            "method", "pair", "alpha", "FP", "FN", "se", "sp", "MMS", "ER %", "fail"
        );
        let cell = |(m, e): (f64, f64), prec: usize| format!("{m:.prec$} ({e:.prec$})");
        for a in self.aggregates() {
            let _ = writeln!(
                s,
                "{:<6}{:<6}{:>6}  {:>14}{:>14}{:>16}{:>16}{:>16}{:>14}{:>6}",
                a.method.to_string(),
                a.pair.to_string(),
                a.alpha,
                cell(a.fp, 1),
                cell(a.fn_, 1),
                cell(a.sensitivity, 3),
                cell(a.specificity, 3),
                cell(a.mms, 0),
                cell(a.er_percent, 1),
                a.failures
            );
        }
        s
    }
}

fn run_replicate(config: &BenchConfig, replicate: usize) -> Result<Vec<ReplicateRecord>> {
    let seed = config.seed.wrapping_add(replicate as u64);
    let design = example_design(config.example, config.p, config.n_per_class, seed)?;
    let sample = design.sample()?;
    let template = ScreeningConfig {
        depth: config.depth,
        selection: config.selection,
        ..ScreeningConfig::default()
    };
    let mut records = Vec::new();
    let record = |method, pair, alpha, tau, outcome: Result<(usize, ScreenMetrics)>| {
        let (selected, metrics, failure) = match outcome {
            Ok((s, m)) => (s, Some(m), None),
            Err(e) => (0, None, Some(e.to_string())),
        };
        ReplicateRecord {
            replicate,
            seed,
            method,
            pair,
            alpha,
            tau,
            selected,
            metrics,
            failure,
        }
    };
    for &alpha in &config.alphas {
        let graph = lazy_graph(&sample.train, alpha)?;
        for &pair in &config.pairs {
            let truth = design.ground_truth(pair)?;
            let test = sample.test.restrict_to_pair(pair)?;
            for &method in &config.methods {
                let plan = CvPlan {
                    folds: config.folds,
                    tau_grid: config.tau_grid.clone(),
                    alpha_grid: vec![alpha],
                    seed,
                };
                let base = ScreeningConfig { alpha, ..template.clone() };
                let mut tau = None;
                let outcome = (|| {
                    let cv = cross_validate(&sample.train, pair, &plan, &base, method)?;
                    tau = Some(cv.tau);
                    let config = ScreeningConfig { tau: cv.tau, ..base.clone() };
                    let fit = fit_method(method, &graph as &dyn NeighborGraph, &sample.train, pair, &config)?;
                    let mut m = screen_metrics(
                        &fit.screening.selected,
                        &fit.screening.ranking(),
                        &truth.informative_set,
                        sample.train.p(),
                    );
                    m.er_percent = Some(match &fit.classifier {
                        Some(model) => 100.0 * misclassification_rate(model, &test)?,
                        None => 50.0,
                    });
                    Ok((fit.screening.selected.len(), m))
                })();
                records.push(record(method, pair, alpha, tau, outcome));
            }
        }
    }
    Ok(records)
}

/// Runs every replicate of the benchmark. Replicate `r` draws its data from
/// seed `config.seed + r`; a replicate that cannot even be sampled aborts the
/// run, while failures inside a method are recorded and excluded.
pub fn run_benchmark(config: &BenchConfig) -> Result<BenchReport> {
    config.validate()?;
    let per_replicate: Vec<Vec<ReplicateRecord>> = (0..config.replicates)
        .into_par_iter()
        .map(|r| run_replicate(config, r))
        .collect::<Result<_>>()?;
    Ok(BenchReport {
        config: config.clone(),
        records: per_replicate.into_iter().flatten().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_rate_values() {
        assert_eq!(oracle_error_rate(0.0), 0.5);
        let r = oracle_error_rate(2.0 * 1.959963984540054);
        assert!((r - 0.025).abs() < 1e-9, "{r}");
    }

    #[test]
    fn perfect_and_empty_selections() {
        let truth = [2, 5, 7];
        let m = screen_metrics(&[2, 5, 7], &[7, 2, 5, 0, 1], &truth, 10);
        assert_eq!((m.fp, m.fn_, m.mms), (0, 0, 3));
        assert_eq!((m.sensitivity, m.specificity), (1.0, 1.0));
        let m = screen_metrics(&[], &[], &truth, 10);
        assert_eq!((m.fn_, m.sensitivity, m.specificity, m.mms), (3, 0.0, 1.0, 11));
    }

    #[test]
    fn mms_counts_interlopers() {
        let m = screen_metrics(&[0, 2], &[0, 2, 1, 5], &[2, 5], 6);
        assert_eq!(m.mms, 4);
        assert_eq!(m.fp, 1);
        assert!((m.specificity - 3.0 / 4.0).abs() < 1e-15);
        assert!((m.sensitivity + m.fn_ as f64 / 2.0 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn summary_statistics() {
        let (m, se) = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_se(&[7.0]), (7.0, 0.0));
        assert_eq!(median_iqr(&[20.0]), (20.0, 0.0));
        assert_eq!(median_iqr(&[1.0, 2.0, 3.0, 4.0, 5.0]), (3.0, 2.0));
    }

    #[test]
    fn marginal_baseline_on_identity_data() {
        let values = vec![3.0, 0.1, 1.0, 2.9, 0.0, 1.2, 0.0, 0.2, 0.0, 0.1, 0.1, 0.1];
        let data = LabeledMatrix::new(values, 3, &[1, 1, 2, 2]).unwrap();
        let r = marginal_baseline(&data, ClassPair::new(1, 2), 0.5, SelectionRule::TopN(1)).unwrap();
        assert_eq!(r.ranking()[0], 0);
        assert_eq!(r.selected, vec![0]);
        assert!(r.importance.iter().all(|&v| v > 0.0));
    }
}
