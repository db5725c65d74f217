//! Sequential ABC on the bundled Lotka-Volterra data: tolerance schedule,
//! acceptance rates and the final weighted means.
//!
//! cargo run --release --example abc_smc

use stochkin::abc::{abc_smc, AbcConfig};
use stochkin::model::parse_model;
use stochkin::observation::Dataset;
use stochkin::pool::WorkerPool;
use stochkin::problem::Problem;
use stochkin::rng::Streams;

fn main() -> stochkin::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/");
    let model = parse_model(&std::fs::read_to_string(format!("{dir}models/lv.model")).unwrap())?;
    let data = Dataset::read_csv(&[format!("{dir}data/lv.csv")])?;
    let problem = Problem::new(model, &data)?.with_max_events(1_000_000);
    let config = AbcConfig {
        particles: 300,
        generations: 11,
        ..AbcConfig::default()
    };
    let run = abc_smc(&problem, &config, &Streams::new(5), &WorkerPool::new(2)?)?;
    println!("pilot tolerance {:.1}", run.pilot_epsilon);
    for p in &run.populations {
        println!(
            "generation {:>2}: tolerance {:>7.1}, acceptance {:.3}",
            p.generation,
            p.tolerance,
            p.acceptance_rate()
        );
    }
    let names = problem.prior.sampling_names();
    for (name, m) in names.iter().zip(run.last().mean()) {
        println!("{name}: weighted mean {m:.3}");
    }
    println!("true log theta: 0, -5.30, -0.51");
    Ok(())
}
