//! Pairwise discriminant rules combined by majority vote over three classes.

use cislda::classifier::{misclassification_rate, tally_votes, VotingEnsemble};
use cislda::covgraph::Depth;
use cislda::dataset::ClassPair;
use cislda::screening::ScreeningConfig;
use cislda::simgen::example_design;
use cislda::tuning::{fit_method, lazy_graph, Method};

fn main() -> cislda::Result<()> {
    let design = example_design(1, 3000, 100, 11)?;
    let sample = design.sample()?;
    let config = ScreeningConfig {
        tau: 1.5,
        alpha: 0.2,
        depth: Depth::Limited(10),
        ..Default::default()
    };
    let graph = lazy_graph(&sample.train, config.alpha)?;

    let mut models = Vec::new();
    for pair in [ClassPair::new(1, 2), ClassPair::new(1, 3), ClassPair::new(2, 3)] {
        let fit = fit_method(Method::Cis, &graph, &sample.train, pair, &config)?;
        let model = fit.classifier.ok_or(cislda::Error::EmptySelection)?;
        let rows = sample.test.restrict_to_pair(pair)?;
        println!(
            "pair {pair}: {} features, pairwise test error {:.3}",
            model.selected.len(),
            misclassification_rate(&model, &rows)?
        );
        models.push(model);
    }

    let ensemble = VotingEnsemble::new(models)?;
    println!("three-class test error {:.3}", misclassification_rate(&ensemble, &sample.test)?);
    let first = ensemble.predict_vote(sample.test.row(0));
    println!("row 1: label {}, votes {:?}, predicted {}", sample.test.label_id(0), first.tally, first.class);

    let cyclic = tally_votes(&[1, 2, 3], [1, 2, 3]);
    println!("cyclic votes go to class {} (tied: {})", cyclic.class, cyclic.tied);
    Ok(())
}

