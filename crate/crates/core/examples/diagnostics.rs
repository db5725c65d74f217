//! Chain diagnostics on four short immigration-model chains: autocorrelation,
//! thinning, Gelman-Rubin, posterior predictive bands and the parallel speedup
//! bound.
//!
//! cargo run --release --example diagnostics

use nalgebra::DMatrix;
use stochkin::diagnostics::{
    autocorrelation, gelman_rubin, posterior_predictive, speedup, thin, PooledPosterior,
};
use stochkin::model::parse_model;
use stochkin::observation::Dataset;
use stochkin::pmcmc::{run_chain, ChainConfig};
use stochkin::pool::WorkerPool;
use stochkin::problem::Problem;
use stochkin::rng::Streams;

fn main() -> stochkin::Result<()> {
    let model = parse_model(
        "species X = 0\nparam theta\nreaction imm: 0 -> X @ mass_action(theta)\n\
         prior theta ~ log_uniform(-3, 3)\nobs X ~ gaussian(2)\n",
    )?;
    let times = vec![1.0, 2.0, 3.0, 4.0, 5.0];
    let rows = [4.1, 11.3, 14.2, 21.5, 24.0]
        .iter()
        .map(|&v| vec![Some(v)])
        .collect();
    let data = Dataset::new(times.clone(), vec!["X".into()], vec![rows])?;
    let problem = Problem::new(model, &data)?;
    let cov = DMatrix::from_element(1, 1, 0.2);
    let chains = (0..4)
        .map(|c| {
            let config = ChainConfig::new(
                cov.clone(),
                100,
                4000,
                1,
                vec![1.0 + 0.3 * c as f64],
                100 + c as u64,
            )?;
            run_chain(&problem, &config, c)
        })
        .collect::<stochkin::Result<Vec<_>>>()?;

    let acf = autocorrelation(&chains[0].column(0), 20)?;
    println!(
        "chain 0 ACF at lags 1, 5, 10, 20: {:.3} {:.3} {:.3} {:.3}",
        acf[1], acf[5], acf[10], acf[20]
    );
    let thinned = chains
        .iter()
        .map(|c| thin(c, 10))
        .collect::<stochkin::Result<Vec<_>>>()?;
    println!(
        "thinned by 10: {} -> {} per chain",
        chains[0].len(),
        thinned[0].len()
    );
    println!("R-hat {:.4}", gelman_rubin(&thinned, 0)?);

    let pooled = PooledPosterior::new(problem.prior.sampling_names(), &thinned);
    let (lo, hi) = pooled.interval(0, 0.05);
    println!("log theta 95% [{lo:.3}, {hi:.3}]");
    let table = posterior_predictive(
        &problem,
        &pooled,
        0,
        &times,
        500,
        &Streams::new(1),
        &WorkerPool::serial(),
    )?;
    for r in &table.rows {
        println!(
            "t = {}: observed band [{:.1}, {:.1}]",
            r.time, r.observed[0], r.observed[2]
        );
    }
    println!("coverage {:.2}", table.coverage(&problem, 0)?);
    println!(
        "speedup bound, 8 chains, b = 1000, n = 10000: {:.4}",
        speedup(8, 1000, 10_000)?
    );
    Ok(())
}
