use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::SyntheticConfig;
use crate::error::{Error, Result};
use crate::reshape::DecompScheme;

pub const DEFAULT_ENERGY: f64 = 0.02;
pub const DEFAULT_NUCLEAR_LAMBDA: f64 = 0.0003;
pub const DEFAULT_PERIOD: u64 = 20;
pub const DEFAULT_MOMENTUM: f64 = 0.9;
pub const DEFAULT_WEIGHT_DECAY: f64 = 1e-4;
pub const DEFAULT_BASE_LR: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    Scratch,
    Finetune,
}

/// Training configuration, loadable from TOML.
///
/// ```toml
/// period_m = 20            # or "never" for plain SGD
/// energy_e = 0.02
/// nuclear_lambda = 0.0003  # 0 disables the nuclear-norm term
/// scheme = "channel_wise"  # or "spatial_wise"
/// lr_schedule = [[0, 0.1], [10, 0.01], [15, 0.001]]   # (epoch, lr)
/// momentum = 0.9
/// weight_decay = 1e-4
/// epochs = 20
/// batch_size = 32
/// seed = 0
/// mode = "scratch"         # or "finetune" (requires init_checkpoint)
///
/// [synthetic]
/// classes = 4
/// per_class = 200
/// noise = 0.3
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrpConfig {
    /// Iterations between projections; `None` (`"never"` in TOML) never projects.
    #[serde(with = "period_repr")]
    pub period_m: Option<u64>,
    pub energy_e: f64,
    pub nuclear_lambda: f64,
    pub scheme: DecompScheme,
    pub lr_schedule: Vec<(usize, f64)>,
    pub momentum: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub mode: TrainMode,
    pub init_checkpoint: Option<PathBuf>,
    pub normalize: bool,
    pub synthetic: SyntheticConfig,
}

impl Default for TrpConfig {
    fn default() -> Self {
        Self {
            period_m: Some(DEFAULT_PERIOD),
            energy_e: DEFAULT_ENERGY,
            nuclear_lambda: DEFAULT_NUCLEAR_LAMBDA,
            scheme: DecompScheme::ChannelWise,
            lr_schedule: vec![
                (0, DEFAULT_BASE_LR),
                (10, DEFAULT_BASE_LR / 10.0),
                (15, DEFAULT_BASE_LR / 100.0),
            ],
            momentum: DEFAULT_MOMENTUM,
            weight_decay: DEFAULT_WEIGHT_DECAY,
            epochs: 20,
            batch_size: 32,
            seed: 0,
            mode: TrainMode::Scratch,
            init_checkpoint: None,
            normalize: false,
            synthetic: SyntheticConfig::default(),
        }
    }
}

impl TrpConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading config {}", path.display()), e))?;
        Self::from_toml_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.period_m == Some(0) {
            return bad("period_m must be >= 1".into());
        }
        if !(self.energy_e > 0.0 && self.energy_e < 1.0) {
            return bad(format!("energy_e must lie in (0, 1), got {}", self.energy_e));
        }
        if !(self.nuclear_lambda >= 0.0 && self.nuclear_lambda.is_finite()) {
            return bad(format!("nuclear_lambda must be >= 0, got {}", self.nuclear_lambda));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must lie in [0, 1), got {}", self.momentum));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight_decay must be >= 0, got {}", self.weight_decay));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        match self.lr_schedule.first() {
            Some((0, _)) => {}
            _ => return bad("lr_schedule must start at epoch 0".into()),
        }
        if self.lr_schedule.windows(2).any(|w| w[0].0 >= w[1].0) {
            return bad("lr_schedule epochs must be strictly increasing".into());
        }
        if self.lr_schedule.iter().any(|&(_, lr)| !(lr >= 0.0 && lr.is_finite())) {
            return bad("learning rates must be finite and >= 0".into());
        }
        if self.mode == TrainMode::Finetune && self.init_checkpoint.is_none() {
            return bad("finetune mode needs init_checkpoint".into());
        }
        Ok(())
    }

    /// Learning rate in force during `epoch`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.lr_schedule
            .iter()
            .rev()
            .find(|&&(e, _)| e <= epoch)
            .map_or(0.0, |&(_, lr)| lr)
    }

    pub fn projects(&self) -> bool {
        self.period_m.is_some()
    }

    pub fn with_preset(mut self, preset: Preset) -> Self {
        let (lambda, period) = preset.params();
        self.nuclear_lambda = lambda;
        self.period_m = period;
        self
    }
}

/// The four ablation cells. They differ only in `(nuclear_lambda, period_m)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    Baseline,
    BaselineNu,
    Trp,
    TrpNu,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Baseline, Preset::BaselineNu, Preset::Trp, Preset::TrpNu];

    pub fn params(self) -> (f64, Option<u64>) {
        match self {
            Preset::Baseline => (0.0, None),
            Preset::BaselineNu => (DEFAULT_NUCLEAR_LAMBDA, None),
            Preset::Trp => (0.0, Some(DEFAULT_PERIOD)),
            Preset::TrpNu => (DEFAULT_NUCLEAR_LAMBDA, Some(DEFAULT_PERIOD)),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Baseline => "baseline",
            Preset::BaselineNu => "baseline_nu",
            Preset::Trp => "trp",
            Preset::TrpNu => "trp_nu",
        })
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.to_string() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown preset {s:?} (expected baseline, baseline_nu, trp or trp_nu)"
                ))
            })
    }
}

mod period_repr {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Every(u64),
        Never(String),
    }

    pub fn serialize<S: Serializer>(v: &Option<u64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(m) => Repr::Every(*m),
            None => Repr::Never("never".into()),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<u64>, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Every(m) => Ok(Some(m)),
            Repr::Never(s) if s == "never" => Ok(None),
            Repr::Never(s) => Err(serde::de::Error::custom(format!(
                "period_m must be a positive integer or \"never\", got {s:?}"
            ))),
        }
    }
}
