//! Draws one replicate of a simulation design and shows its ground truth.
//!
//! `cargo run --release --example simulate -- [example] [p]`

use cislda::dataset::ClassPair;
use cislda::evaluation::oracle_error_rate;
use cislda::simgen::example_design;

fn main() -> cislda::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let example: u32 = args.get(1).map_or(Ok(1), |s| s.parse()).unwrap_or(1);
    let p: usize = args.get(2).map_or(Ok(2000), |s| s.parse()).unwrap_or(2000);

    let design = example_design(example, p, 100, 42)?;
    let sample = design.sample()?;
    println!(
        "example {example}: train {} x {}, test {} rows, {} classes",
        sample.train.n(),
        sample.train.p(),
        sample.test.n(),
        sample.train.k()
    );

    for pair in [ClassPair::new(1, 2), ClassPair::new(1, 3), ClassPair::new(2, 3)] {
        let truth = design.ground_truth(pair)?;
        let one_based = |v: &[usize]| v.iter().map(|j| j + 1).collect::<Vec<_>>();
        let delta_p = design.oracle_delta_p(pair)?;
        println!("pair {pair}");
        println!("  marginal {:?}", one_based(&truth.marginal_set));
        println!("  muji     {:?}", one_based(&truth.muji_set));
        println!("  nonzero precision-weighted gap {:?}", one_based(&design.condition_a_set(pair)?));
        println!("  delta_p {delta_p:.3}, oracle error {:.4}", oracle_error_rate(delta_p));
    }

    let path = std::env::temp_dir().join("cislda-simulate-train.csv");
    sample.train.write_csv(std::fs::File::create(&path).map_err(|e| cislda::Error::Io { path: path.clone(), source: e })?)?;
    println!("training rows written to {}", path.display());
    Ok(())
}
