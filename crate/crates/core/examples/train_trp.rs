//! End-to-end run through the command layer: train with projection and the
//! nuclear-norm term, report the rank trajectory, decompose and re-evaluate.
//!
//! ```text
//! cargo run --release --example train_trp -- [out_dir]
//! ```

use std::path::PathBuf;

use trp_core::cli::{cmd_decompose, cmd_eval, cmd_report, cmd_train, TrainArgs, CHECKPOINT_FILE};
use trp_core::data::DatasetSpec;
use trp_core::trp::Preset;

fn main() -> trp_core::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join(format!("trp-example-{}", std::process::id())));
    let mut args = TrainArgs::new(DatasetSpec::Synthetic, &out);
    args.preset = Some(Preset::TrpNu);
    let manifest = cmd_train(&args)?;
    println!("trained to test accuracy {:.4}, artifacts in {}", manifest.final_test_acc, out.display());

    let report = cmd_report(&out)?;
    for s in &report.summary {
        println!(
            "layer {}: rank {} -> {} of {} over {} projections",
            s.layer, s.initial_rank, s.final_rank, s.full_rank, s.events
        );
    }

    let cfg = &manifest.config;
    let ckpt = out.join(CHECKPOINT_FILE);
    let decomposed = out.join("decomposed.trpk");
    let d = cmd_decompose(&ckpt, cfg.scheme, cfg.energy_e, &decomposed)?;
    let before = cmd_eval(&ckpt, &DatasetSpec::Synthetic, cfg)?;
    let after = cmd_eval(&decomposed, &DatasetSpec::Synthetic, cfg)?;
    println!(
        "decomposed: MAC speedup {:.2}x, accuracy {:.4} -> {:.4}",
        d.total.speedup, before.accuracy, after.accuracy
    );
    Ok(())
}
