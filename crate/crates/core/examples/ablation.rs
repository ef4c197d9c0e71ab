//! Trains the four ablation cells on synthetic data and compares the accuracy
//! lost when each trained model is decomposed at the training energy threshold.
//!
//! ```text
//! cargo run --release --example ablation -- [energy] [seed] [per_class]
//! ```

use trp_core::cli::decompose_model;
use trp_core::data::generate_synthetic;
use trp_core::net::NetworkModel;
use trp_core::trp::{train, Preset, TrpConfig};

fn main() -> trp_core::Result<()> {
    let mut args = std::env::args().skip(1);
    let energy: f64 = args.next().map_or(0.1, |s| s.parse().expect("energy"));
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed"));
    let per_class: usize = args.next().map_or(200, |s| s.parse().expect("per_class"));

    let mut cfg = TrpConfig {
        energy_e: energy,
        seed,
        batch_size: 30,
        ..TrpConfig::default()
    };
    cfg.synthetic.per_class = per_class;
    cfg.validate()?;
    let data = generate_synthetic(seed, &cfg.synthetic)?.split(cfg.synthetic.test_fraction)?;
    let test = data.test.as_batch()?;

    println!("{:<12} {:>9} {:>9} {:>8} {:>10}", "preset", "trained", "decomp", "drop", "ranks");
    for preset in Preset::ALL {
        let cfg = cfg.clone().with_preset(preset);
        let model = NetworkModel::tiny_conv_net(data.train.shape(), data.train.class_count(), seed)?;
        let out = train(model, &data, &cfg)?;
        let before = out.model.evaluate(&test)?.accuracy;
        let (decomposed, report) = decompose_model(&out.model, cfg.scheme, energy)?;
        let after = decomposed.evaluate(&test)?.accuracy;
        let ranks: Vec<String> = report
            .layers
            .iter()
            .map(|l| format!("{}/{}", l.rank, l.full_rank))
            .collect();
        println!(
            "{:<12} {:>9.4} {:>9.4} {:>8.4} {:>10}",
            preset.to_string(),
            before,
            after,
            before - after,
            ranks.join(",")
        );
    }
    Ok(())
}
