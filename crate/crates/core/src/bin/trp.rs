use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use trp_core::cli::{self, TrainArgs};
use trp_core::data::DatasetSpec;
use trp_core::reshape::DecompScheme;
use trp_core::trp::{Preset, TrpConfig};
use trp_core::Result;

#[derive(Parser)]
#[command(name = "trp", version, about = "Trained rank pruning toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one ablation cell and write checkpoint, metrics and trajectory.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "synthetic")]
        dataset: DatasetSpec,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        preset: Option<Preset>,
        #[arg(long)]
        scheme: Option<DecompScheme>,
        #[arg(long)]
        energy: Option<f64>,
    },
    /// Replace every convolution by its low-rank cascade and print FLOPs.
    Decompose {
        checkpoint: PathBuf,
        #[arg(long, default_value = "channel")]
        scheme: DecompScheme,
        #[arg(long, default_value_t = trp_core::trp::DEFAULT_ENERGY)]
        energy: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on the test split.
    Eval {
        checkpoint: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "synthetic")]
        dataset: DatasetSpec,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Emit energy-ratio heatmap tables and a rank summary for a run directory.
    Report { run_dir: PathBuf },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train {
            config,
            dataset,
            out,
            seed,
            preset,
            scheme,
            energy,
        } => {
            let args = TrainArgs {
                config,
                dataset,
                out_dir: out,
                seed,
                preset,
                scheme,
                energy,
            };
            let manifest = cli::cmd_train(&args)?;
            println!(
                "trained {} epochs, final test_acc {:.4}; wrote {}",
                manifest.config.epochs,
                manifest.final_test_acc,
                args.out_dir.display()
            );
        }
        Command::Decompose {
            checkpoint,
            scheme,
            energy,
            out,
        } => {
            let report = cli::cmd_decompose(&checkpoint, scheme, energy, &out)?;
            println!("{:>5} {:>16} {:>9} {:>12} {:>12} {:>8}", "layer", "dims", "rank", "original", "decomposed", "speedup");
            for l in &report.layers {
                println!(
                    "{:>5} {:>16} {:>9} {:>12} {:>12} {:>8.3}",
                    l.layer,
                    format!("{:?}", l.dims),
                    format!("{}/{}", l.rank, l.full_rank),
                    l.flops.original,
                    l.flops.decomposed,
                    l.flops.speedup
                );
            }
            println!(
                "{:>5} {:>16} {:>9} {:>12} {:>12} {:>8.3}",
                "total", "", "", report.total.original, report.total.decomposed, report.total.speedup
            );
            println!("wrote {}", out.display());
        }
        Command::Eval {
            checkpoint,
            config,
            dataset,
            seed,
        } => {
            let mut cfg = match config {
                Some(p) => TrpConfig::load(p)?,
                None => TrpConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let r = cli::cmd_eval(&checkpoint, &dataset, &cfg)?;
            println!(
                "accuracy {:.4} ({}/{}), mean loss {:.6}",
                r.accuracy, r.correct, r.total, r.mean_loss
            );
            println!("{}", serde_json::to_string(&r).expect("serializable report"));
        }
        Command::Report { run_dir } => {
            let bundle = cli::cmd_report(&run_dir)?;
            print!(
                "{}",
                std::fs::read_to_string(&bundle.summary_path).unwrap_or_default()
            );
            for p in &bundle.heatmaps {
                println!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TRP_LOG_LEVEL", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
