//! Trains with periodic projection and checks the conditional rank
//! monotonicity property on the recorded trajectory: whenever the largest
//! update between two projections satisfies `m * G / ||W||_F < sqrt(e)`, the
//! later projection must not select a larger rank.
//!
//! ```text
//! cargo run --release --example rank_monitor -- [seed]
//! ```

use trp_core::data::generate_synthetic;
use trp_core::net::NetworkModel;
use trp_core::trp::{theorem2_monitor, train, TrpConfig};

fn main() -> trp_core::Result<()> {
    let seed: u64 = std::env::args().nth(1).map_or(0, |s| s.parse().expect("seed"));
    // 600 training samples in batches of 30: 20 iterations per epoch, so 39
    // epochs end on iteration 780 and produce 40 projections.
    let cfg = TrpConfig {
        period_m: Some(20),
        energy_e: 0.05,
        nuclear_lambda: 0.0,
        epochs: 39,
        batch_size: 30,
        seed,
        ..TrpConfig::default()
    };
    let data = generate_synthetic(seed, &cfg.synthetic)?.split(cfg.synthetic.test_fraction)?;
    let model = NetworkModel::tiny_conv_net(data.train.shape(), data.train.class_count(), seed)?;
    let out = train(model, &data, &cfg)?;
    let report = theorem2_monitor(&out.trajectory, &cfg)?;

    for layer in out.trajectory.layers() {
        let events = out.trajectory.for_layer(layer);
        let ranks: Vec<String> = events.iter().map(|e| e.k.to_string()).collect();
        println!("layer {layer}: {} events, ranks {}", events.len(), ranks.join(" "));
    }
    println!("{:>5} {:>4} {:>10} {:>5} {:>7}", "layer", "z", "bound", "<sqe", "k");
    for p in &report.pairs {
        println!(
            "{:>5} {:>4} {:>10.4} {:>5} {:>3}->{:<3}",
            p.layer, p.z, p.bound_stat, p.bound_holds, p.rank_before, p.rank_after
        );
    }
    println!(
        "pairs {}, hypothesis satisfied {}, violations {}, unconditioned increases {}, max bound {:.4} (sqrt e {:.4})",
        report.total_pairs,
        report.hypothesis_satisfied,
        report.violations,
        report.unconditioned_increases,
        report.max_bound_stat,
        cfg.energy_e.sqrt()
    );
    println!("final test accuracy {:.4}", out.history.last().map_or(f64::NAN, |m| m.test_acc));
    Ok(())
}
