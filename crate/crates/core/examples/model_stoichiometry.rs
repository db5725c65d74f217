//! Parses the bundled models and prints their pre, post and stoichiometry
//! matrices, parameters and sampling scales.
//!
//! cargo run --example model_stoichiometry

use stochkin::model::parse_model;

fn main() -> stochkin::Result<()> {
    for name in ["lv", "aphid", "gene"] {
        let path = format!("{}/models/{name}.model", env!("CARGO_MANIFEST_DIR"));
        let model = parse_model(&std::fs::read_to_string(path).unwrap())?;
        println!("== {name}: species {:?}", model.species());
        println!(
            "reactions {:?}",
            model
                .reactions()
                .iter()
                .map(|r| &r.name)
                .collect::<Vec<_>>()
        );
        println!("pre P{}", model.pre_matrix());
        println!("post Q{}", model.post_matrix());
        println!("S = (Q - P)'{}", model.stoichiometry());
        println!("sampled as {:?}\n", model.prior()?.sampling_names());
    }
    Ok(())
}
