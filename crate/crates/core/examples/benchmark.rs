//! A small Monte Carlo comparison of covariance-insured and marginal
//! screening. Pass a replicate count and `p` to scale it up.

use cislda::evaluation::{run_benchmark, BenchConfig};

fn main() -> cislda::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let replicates = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(4);
    let p = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let config = BenchConfig {
        example: 1,
        p,
        replicates,
        seed: 1,
        ..Default::default()
    };
    let report = run_benchmark(&config)?;
    print!("{}", report.render_table());

    let failures: Vec<_> = report.records.iter().filter_map(|r| r.failure.as_deref()).collect();
    if !failures.is_empty() {
        println!("{} method runs failed, e.g. {}", failures.len(), failures[0]);
    }
    Ok(())
}
