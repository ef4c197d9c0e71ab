//! Command implementations behind the `trp` binary: `train`, `decompose`,
//! `eval` and `report`. Each returns a typed result so it can be driven from
//! tests and examples as well as from the command line.

mod decompose;
mod report;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use decompose::{decompose_model, project_model, DecomposeReport, LayerFlops};
pub use report::{cmd_report, ReportBundle, LayerSummary};

use crate::data::{generate_synthetic, load_idx, DataSplit, DatasetSpec};
use crate::error::{Error, Result};
use crate::net::NetworkModel;
use crate::reshape::DecompScheme;
use crate::trp::{train, EpochMetrics, Preset, TrainMode, TrpConfig};

pub const CHECKPOINT_FILE: &str = "model.trpk";
pub const METRICS_FILE: &str = "metrics.csv";
pub const TRAJECTORY_CSV: &str = "trajectory.csv";
pub const TRAJECTORY_JSONL: &str = "trajectory.jsonl";
pub const CONFIG_FILE: &str = "config.toml";
pub const MANIFEST_FILE: &str = "manifest.json";

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Inputs of `trp train`.
#[derive(Debug, Clone)]
pub struct TrainArgs {
    pub config: Option<PathBuf>,
    pub dataset: DatasetSpec,
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub preset: Option<Preset>,
    pub scheme: Option<DecompScheme>,
    pub energy: Option<f64>,
}

impl TrainArgs {
    pub fn new(dataset: DatasetSpec, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            config: None,
            dataset,
            out_dir: out_dir.into(),
            seed: None,
            preset: None,
            scheme: None,
            energy: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub spec: DatasetSpec,
    pub fingerprint: String,
    pub train_samples: usize,
    pub test_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub toolkit_version: String,
    pub seed: u64,
    pub preset: Option<Preset>,
    pub config: TrpConfig,
    pub dataset: DatasetInfo,
    /// Artifact role -> file name relative to the run directory.
    pub artifacts: BTreeMap<String, String>,
    pub final_test_acc: f64,
}

impl RunManifest {
    pub fn load(run_dir: impl AsRef<Path>) -> Result<Self> {
        let path = run_dir.as_ref().join(MANIFEST_FILE);
        let text = fs::read_to_string(&path)
            .map_err(|e| Error::io(format!("reading manifest {}", path.display()), e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }
}

/// Config file (or defaults) with command-line overrides applied.
pub fn resolve_config(args: &TrainArgs) -> Result<TrpConfig> {
    let mut cfg = match &args.config {
        Some(path) => TrpConfig::load(path)?,
        None => TrpConfig::default(),
    };
    if let Some(p) = args.preset {
        cfg = cfg.with_preset(p);
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(scheme) = args.scheme {
        cfg.scheme = scheme;
    }
    if let Some(e) = args.energy {
        cfg.energy_e = e;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Loads (or generates) the data named by `spec` and splits it per `cfg`.
pub fn load_dataset(spec: &DatasetSpec, cfg: &TrpConfig) -> Result<DataSplit> {
    let mut data = match spec {
        DatasetSpec::Synthetic => generate_synthetic(cfg.seed, &cfg.synthetic)?,
        DatasetSpec::Idx { images, labels } => load_idx(images, labels)?,
    };
    if cfg.normalize {
        data.normalize_per_channel();
    }
    data.split(cfg.synthetic.test_fraction)
}

fn prepare_out_dir(dir: &Path) -> Result<()> {
    if dir.exists() {
        let mut entries =
            fs::read_dir(dir).map_err(|e| Error::io(format!("listing {}", dir.display()), e))?;
        if entries.next().is_some() {
            return Err(Error::Config(format!(
                "output directory {} is not empty",
                dir.display()
            )));
        }
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))
}

fn write_metrics(path: &Path, history: &[EpochMetrics]) -> Result<()> {
    #[derive(Serialize)]
    struct Row {
        epoch: usize,
        train_loss: f64,
        test_acc: f64,
    }
    let ctx = || format!("writing metrics {}", path.display());
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Serde(format!("{}: {e}", ctx())))?;
    for m in history {
        w.serialize(Row {
            epoch: m.epoch,
            train_loss: m.train_loss,
            test_acc: m.test_acc,
        })
        .map_err(|e| Error::Serde(format!("{}: {e}", ctx())))?;
    }
    w.flush().map_err(|e| Error::io(ctx(), e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Trains one ablation cell and writes checkpoint, metrics, trajectory and manifest.
pub fn cmd_train(args: &TrainArgs) -> Result<RunManifest> {
    let cfg = resolve_config(args)?;
    let data = load_dataset(&args.dataset, &cfg)?;
    let model = match cfg.mode {
        TrainMode::Scratch => NetworkModel::tiny_conv_net(
            data.train.shape(),
            data.train.class_count(),
            cfg.seed,
        )?,
        TrainMode::Finetune => {
            let path = cfg.init_checkpoint.as_ref().expect("validated finetune config");
            NetworkModel::load(path)?
        }
    };
    prepare_out_dir(&args.out_dir)?;

    let outcome = train(model, &data, &cfg)?;
    let dir = &args.out_dir;
    let mut artifacts = BTreeMap::new();

    outcome.model.save(dir.join(CHECKPOINT_FILE))?;
    artifacts.insert("checkpoint".into(), CHECKPOINT_FILE.into());
    write_metrics(&dir.join(METRICS_FILE), &outcome.history)?;
    artifacts.insert("metrics".into(), METRICS_FILE.into());
    write_text(&dir.join(CONFIG_FILE), &cfg.to_toml_string())?;
    artifacts.insert("config".into(), CONFIG_FILE.into());
    if !outcome.trajectory.is_empty() {
        outcome.trajectory.write_csv(dir.join(TRAJECTORY_CSV))?;
        outcome.trajectory.write_jsonl(dir.join(TRAJECTORY_JSONL))?;
        artifacts.insert("trajectory_csv".into(), TRAJECTORY_CSV.into());
        artifacts.insert("trajectory_jsonl".into(), TRAJECTORY_JSONL.into());
    }

    let manifest = RunManifest {
        toolkit_version: TOOLKIT_VERSION.into(),
        seed: cfg.seed,
        preset: args.preset,
        dataset: DatasetInfo {
            spec: args.dataset.clone(),
            fingerprint: data.train.fingerprint() + ":" + &data.test.fingerprint(),
            train_samples: data.train.len(),
            test_samples: data.test.len(),
        },
        config: cfg,
        artifacts,
        final_test_acc: outcome.history.last().map_or(f64::NAN, |m| m.test_acc),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Serde(e.to_string()))?;
    write_text(&dir.join(MANIFEST_FILE), &(json + "\n"))?;
    Ok(manifest)
}

/// Decomposes every convolution of a checkpoint and writes the cascaded model.
pub fn cmd_decompose(
    checkpoint: &Path,
    scheme: DecompScheme,
    energy: f64,
    out_path: &Path,
) -> Result<DecomposeReport> {
    let model = NetworkModel::load(checkpoint)?;
    let (decomposed, report) = decompose_model(&model, scheme, energy)?;
    decomposed.save(out_path)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub checkpoint: String,
    pub accuracy: f64,
    pub mean_loss: f64,
    pub correct: usize,
    pub total: usize,
}

/// Evaluates a checkpoint on the test split of `dataset` (generated or
/// loaded with `cfg`, so the split matches the one used in training).
pub fn cmd_eval(checkpoint: &Path, dataset: &DatasetSpec, cfg: &TrpConfig) -> Result<EvalReport> {
    let model = NetworkModel::load(checkpoint)?;
    let data = load_dataset(dataset, cfg)?;
    let m = model.evaluate(&data.test.as_batch()?)?;
    Ok(EvalReport {
        checkpoint: checkpoint.display().to_string(),
        accuracy: m.accuracy,
        mean_loss: m.mean_loss,
        correct: m.correct,
        total: m.total,
    })
}
