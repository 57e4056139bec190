//! Tuning `tau` and `alpha` by stratified cross-validation, then measuring how
//! often each feature is selected across bootstrap resamples.

use cislda::dataset::ClassPair;
use cislda::screening::ScreeningConfig;
use cislda::simgen::example_design;
use cislda::tuning::{cross_validate, stability_frequencies, CvPlan, Method, TauGrid};

fn main() -> cislda::Result<()> {
    let pair = ClassPair::new(1, 2);
    let design = example_design(1, 2000, 100, 5)?;
    let sample = design.sample()?;
    let plan = CvPlan {
        folds: 5,
        tau_grid: TauGrid::Values(vec![0.5, 1.0, 1.5, 2.0]),
        alpha_grid: vec![0.2, 0.4],
        seed: 5,
    };
    let template = ScreeningConfig::default();

    let cv = cross_validate(&sample.train, pair, &plan, &template, Method::Cis)?;
    println!("tau   alpha  cv error  empty  failed");
    for row in &cv.table {
        println!(
            "{:<5} {:<6} {:<9.4} {:<6} {}",
            row.tau, row.alpha, row.cv_error, row.empty_folds, row.failed_folds
        );
    }
    println!("chosen: tau {}, alpha {}", cv.tau, cv.alpha);

    let small = CvPlan {
        folds: 3,
        tau_grid: TauGrid::Values(vec![1.5, 2.0]),
        alpha_grid: vec![cv.alpha],
        ..plan
    };
    let report = stability_frequencies(&sample.train, pair, 8, &small, &template, Method::Cis)?;
    println!("{} resamples, {} failed", report.n_bootstrap, report.failures);
    for (j, f) in report.top(30).into_iter().filter(|&(_, f)| f > 0.0) {
        println!("  feature {:>4}: {:.2}", j + 1, f);
    }
    Ok(())
}
