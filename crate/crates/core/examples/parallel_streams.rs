//! Keyed random streams make results independent of the worker count: the
//! same ABC rejection run on one and four workers gives identical populations.
//!
//! cargo run --release --example parallel_streams

use stochkin::abc::abc_rejection;
use stochkin::model::parse_model;
use stochkin::observation::Dataset;
use stochkin::pool::WorkerPool;
use stochkin::problem::Problem;
use stochkin::rng::Streams;

fn main() -> stochkin::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/");
    let model = parse_model(&std::fs::read_to_string(format!("{dir}models/lv.model")).unwrap())?;
    let data = Dataset::read_csv(&[format!("{dir}data/lv.csv")])?;
    let problem = Problem::new(model, &data)?.with_max_events(100_000);
    let streams = Streams::new(17);
    let mut runs = Vec::new();
    for workers in [1, 4] {
        let start = std::time::Instant::now();
        let pop = abc_rejection(
            &problem,
            700.0,
            100,
            1_000_000,
            &streams,
            &WorkerPool::new(workers)?,
        )?;
        println!(
            "{workers} worker(s): {} proposals in {:.2?}",
            pop.proposals,
            start.elapsed()
        );
        runs.push(pop);
    }
    println!("identical populations: {}", runs[0] == runs[1]);
    Ok(())
}
