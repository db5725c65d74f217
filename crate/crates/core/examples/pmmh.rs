//! Pseudo-marginal Metropolis-Hastings on a pure immigration model: the
//! particle count is tuned at a guess, then one chain runs on log(theta).
//!
//! cargo run --release --example pmmh

use nalgebra::DMatrix;
use stochkin::model::parse_model;
use stochkin::observation::Dataset;
use stochkin::pmcmc::{run_chain, tune_particles, ChainConfig, TunerConfig};
use stochkin::pool::WorkerPool;
use stochkin::problem::Problem;
use stochkin::rng::Streams;

fn main() -> stochkin::Result<()> {
    let model = parse_model(
        "species X = 0\nparam theta\nreaction imm: 0 -> X @ mass_action(theta)\n\
         prior theta ~ log_uniform(-3, 3)\nobs X ~ gaussian(2)\n",
    )?;
    let rows = [4.1, 11.3, 14.2, 21.5, 24.0]
        .iter()
        .map(|&v| vec![Some(v)])
        .collect();
    let data = Dataset::new(vec![1.0, 2.0, 3.0, 4.0, 5.0], vec!["X".into()], vec![rows])?;
    let problem = Problem::new(model, &data)?;

    let tuned = tune_particles(
        &problem,
        &[5.0],
        &TunerConfig::default(),
        &Streams::new(9),
        &WorkerPool::serial(),
    )?;
    println!("tuner trace {:?} -> N = {}", tuned.trace, tuned.particles);

    let cov = DMatrix::from_element(1, 1, 5.6644 * 0.04);
    let config = ChainConfig::new(cov, tuned.particles, 20_000, 10, vec![1.5], 9)?;
    let chain = run_chain(&problem, &config, 0)?;
    let draws: Vec<f64> = chain.column(0).iter().map(|z| z.exp()).collect();
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    println!(
        "{} retained draws, acceptance {:.3}, posterior mean theta {mean:.3}",
        chain.len(),
        chain.acceptance_rate()
    );
    Ok(())
}
