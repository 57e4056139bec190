//! Thresholded correlation graph of simulated data: components, a depth
//! subgraph around a signal feature, and the lazy graph agreeing with the
//! fully built one.

use std::sync::Arc;

use cislda::covgraph::{
    build_graph, depth_subgraph, CorrelationEstimator, CorrelationSource, Depth, LazyCorrGraph, NeighborGraph,
};
use cislda::dataset::standardize_columns;
use cislda::simgen::example_design;

fn main() -> cislda::Result<()> {
    let design = example_design(1, 1000, 100, 7)?;
    let train = standardize_columns(&design.sample()?.train)?;

    for alpha in [0.2, 0.3, 0.5] {
        let graph = build_graph(&train, alpha, 64 << 20, CorrelationEstimator::PooledWithinClass)?;
        let components = graph.component_members();
        let largest = components.values().map(Vec::len).max().unwrap_or(0);
        let of_five: Vec<usize> = graph.members_of(graph.component_ids()[4]).iter().map(|j| j + 1).collect();
        println!(
            "alpha {alpha}: {} edges, {} components, largest {largest}; feature 5 sits with {} features{}",
            graph.edge_count(),
            components.len(),
            of_five.len(),
            if of_five.len() <= 12 { format!(" {of_five:?}") } else { String::new() }
        );
    }

    let full = build_graph(&train, 0.3, 64 << 20, CorrelationEstimator::PooledWithinClass)?;
    let lazy = LazyCorrGraph::new(Arc::new(CorrelationSource::new(&train, CorrelationEstimator::PooledWithinClass)?), 0.3)?;
    for m in [1, 2] {
        let a = depth_subgraph(&full, 4, Depth::Limited(m));
        let b = depth_subgraph(&lazy, 4, Depth::Limited(m));
        assert_eq!(a, b);
        println!("depth {m} around feature 5: {} members", a.members.len());
    }
    println!("lazy graph computed {} of {} neighbor lists", lazy.sweeps(), lazy.p());
    Ok(())
}
