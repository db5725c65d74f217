//! Simulates the gene model with its time-dependent transcription rate,
//! corrupts the path with gaussian noise and marks the mRNA column missing.
//!
//! cargo run --release --example synthetic_data

use stochkin::model::parse_model;
use stochkin::observation::synthesize_dataset;
use stochkin::rng::Streams;

fn main() -> stochkin::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/models/gene.model");
    let model = parse_model(&std::fs::read_to_string(path).unwrap())?;
    let theta = [0.44, 10.0, 0.52, 15.0, 0.4, 7.0, 3.0];
    let times: Vec<f64> = (1..=20).map(f64::from).collect();
    let syn = synthesize_dataset(
        &model,
        &theta,
        &[10, 150],
        model.obs_model(),
        &times,
        &Streams::new(3),
    )?;
    println!("{} events; mRNA unobserved:", syn.trajectory.n_events());
    let data = syn.dataset.without_columns(&["R".to_string()])?;
    data.write_csv(0, std::io::stdout())
}
