//! Covariance-insured screening next to marginal screening on one class pair.
//! Features 1-4 carry no mean difference between classes 1 and 2 but are
//! correlated with feature 5, which does.

use cislda::covgraph::Depth;
use cislda::dataset::{class_summaries, ClassPair};
use cislda::evaluation::{marginal_baseline, screen_metrics};
use cislda::screening::{screen, ScreeningConfig, SelectionRule};
use cislda::simgen::example_design;
use cislda::tuning::lazy_graph;

fn main() -> cislda::Result<()> {
    let pair = ClassPair::new(1, 2);
    let design = example_design(1, 5000, 100, 3)?;
    let sample = design.sample()?;
    let truth = design.ground_truth(pair)?;
    let config = ScreeningConfig {
        tau: 2.0,
        alpha: 0.2,
        depth: Depth::Limited(10),
        selection: SelectionRule::TopSampleSize,
        ..Default::default()
    };

    let graph = lazy_graph(&sample.train, config.alpha)?;
    let rows = sample.train.restrict_to_pair(pair)?;
    let cis = screen(&graph, &class_summaries(&rows)?, pair, &config)?;
    let ms = marginal_baseline(&sample.train, pair, config.tau, config.selection)?;

    for (name, result) in [("CIS", &cis), ("MS", &ms)] {
        let m = screen_metrics(&result.selected, &result.ranking(), &truth.informative_set, design.p);
        let top: Vec<usize> = result.ranking().iter().take(12).map(|j| j + 1).collect();
        println!(
            "{name:>3}: {} selected, FP {}, FN {}, MMS {}; top features {top:?}",
            result.selected.len(),
            m.fp,
            m.fn_,
            m.mms
        );
    }
    for b in cis.precision.blocks.iter().filter(|b| !b.anchors.is_empty() && b.members.len() > 1).take(4) {
        println!(
            "block with anchors {:?}: {} members, depth {}",
            b.anchors.iter().map(|j| j + 1).collect::<Vec<_>>(),
            b.members.len(),
            b.depth
        );
    }
    for j in 0..5 {
        println!("feature {}: d = {:+.2}, IS = {:.2}", j + 1, cis.differences[j], cis.importance[j]);
    }
    Ok(())
}
