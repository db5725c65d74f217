//! ABC-initialised parallel pMCMC on the bundled Lotka-Volterra data at a
//! small scale: ABC population, shared proposal and particle count, chains.
//!
//! cargo run --release --example hybrid

use stochkin::abc::AbcConfig;
use stochkin::diagnostics::{gelman_rubin, PooledPosterior};
use stochkin::model::parse_model;
use stochkin::observation::Dataset;
use stochkin::pmcmc::{hybrid_run, HybridConfig, PmcmcConfig};
use stochkin::pool::WorkerPool;
use stochkin::problem::Problem;
use stochkin::rng::Streams;

fn main() -> stochkin::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/");
    let model = parse_model(&std::fs::read_to_string(format!("{dir}models/lv.model")).unwrap())?;
    let data = Dataset::read_csv(&[format!("{dir}data/lv.csv")])?;
    let problem = Problem::new(model, &data)?.with_max_events(1_000_000);
    let config = HybridConfig {
        abc: AbcConfig {
            particles: 300,
            generations: 11,
            ..AbcConfig::default()
        },
        pmcmc: PmcmcConfig {
            chains: 4,
            iterations: 1000,
            thin: 5,
            ..PmcmcConfig::default()
        },
    };
    let run = hybrid_run(&problem, &config, &Streams::new(13), &WorkerPool::new(4)?)?;
    println!("final ABC tolerance {:.1}", run.abc.last().tolerance);
    println!("proposal covariance{}", run.pmcmc.proposal_cov);
    println!("particles {}", run.pmcmc.tuning.particles);
    let chains: Vec<_> = run.pmcmc.completed().into_iter().cloned().collect();
    let names = problem.prior.sampling_names();
    let pooled = PooledPosterior::new(names.clone(), &chains);
    for (p, name) in names.iter().enumerate() {
        let (lo, hi) = pooled.interval(p, 0.05);
        println!(
            "{name}: 95% [{lo:.3}, {hi:.3}], R-hat {:.3}",
            gelman_rubin(&chains, p)?
        );
    }
    Ok(())
}
