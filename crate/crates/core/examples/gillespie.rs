//! Direct-method simulation: one Lotka-Volterra path sampled on a grid, and
//! the pure-birth mean against its closed form.
//!
//! cargo run --release --example gillespie

use stochkin::model::parse_model;
use stochkin::rng::Streams;
use stochkin::ssa::{simulate_at_times, simulate_direct, states_at_times};

fn main() -> stochkin::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/models/lv.model");
    let lv = parse_model(&std::fs::read_to_string(path).unwrap())?;
    let streams = Streams::new(1);
    let theta = [1.0, 0.005, 0.6];
    let traj = simulate_direct(
        &lv,
        &theta,
        &[50, 100],
        0.0,
        20.0,
        10_000_000,
        &mut streams.stream(1, 0),
    )?;
    println!("{} events on [0, 20]", traj.n_events());
    let grid: Vec<f64> = (0..=20).map(f64::from).collect();
    for (t, x) in grid.iter().zip(states_at_times(&traj, &grid)?) {
        println!("t = {t:>4}: prey {:>5} predators {:>5}", x[0], x[1]);
    }

    let birth = parse_model(
        "species X = 1\nparam a\nreaction b: X -> 2X @ mass_action(a)\nprior a ~ point(1)\nobs X ~ poisson()\n",
    )?;
    let n = 10_000;
    let mean = (0..n)
        .map(|i| {
            simulate_at_times(
                &birth,
                &[1.0],
                &[1],
                0.0,
                &[1.0],
                1_000_000,
                &mut streams.stream(2, i),
            )
        })
        .map(|r| r.map(|x| x[0][0] as f64))
        .sum::<stochkin::Result<f64>>()?
        / n as f64;
    println!("pure birth: mean X(1) = {mean:.4}, e = {:.4}", 1f64.exp());
    Ok(())
}
