//! Bootstrap particle filter on the bundled Lotka-Volterra data: log-likelihood
//! estimates at the true rates and their spread for several particle counts.
//!
//! cargo run --release --example particle_filter

use std::time::Instant;

use stochkin::model::parse_model;
use stochkin::observation::Dataset;
use stochkin::pfilter::{loglik_estimates, replicate_log_lik};
use stochkin::pool::WorkerPool;
use stochkin::problem::Problem;
use stochkin::rng::Streams;

fn main() -> stochkin::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/");
    let model = parse_model(&std::fs::read_to_string(format!("{dir}models/lv.model")).unwrap())?;
    let data = Dataset::read_csv(&[format!("{dir}data/lv.csv")])?;
    let problem = Problem::new(model, &data)?;
    let theta = [1.0, 0.005, 0.6];
    let streams = Streams::new(7);
    let pool = WorkerPool::serial();

    let mut rng = streams.stream(0, 0);
    let one = replicate_log_lik(&problem, &theta, 100, &mut rng)?;
    println!("one estimate with 100 particles: {:.3}", one.log_estimate);

    println!(
        "{:>6} {:>10} {:>10} {:>10}",
        "N", "mean", "variance", "ms/run"
    );
    for n in [25, 50, 100, 200, 400] {
        let start = Instant::now();
        let est = loglik_estimates(&problem, &theta, n, 50, &streams, n as u64, &pool)?;
        let ms = start.elapsed().as_secs_f64() * 1e3 / est.len() as f64;
        let mean = est.iter().sum::<f64>() / est.len() as f64;
        let var = est.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (est.len() - 1) as f64;
        println!("{n:>6} {mean:>10.3} {var:>10.3} {ms:>10.2}");
    }
    Ok(())
}
