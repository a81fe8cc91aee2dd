//! Run configuration: a TOML file with flat key/value sections. Every CLI
//! flag mirrors a config key and wins over it; the merged result is dumped
//! next to the outputs so a run can be reproduced from its own manifest.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use ckrl_core::confidence::ConfidenceConfig;
use ckrl_core::error::{CkrlError, Result};
use ckrl_core::kg::ColumnOrder;
use ckrl_core::paths::PathConfig;
use ckrl_core::trainer::{InitMode, Norm, TrainingConfig, Variant};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Master RNG seed; commands derive their streams from it.
    pub seed: Seed,
    /// Worker threads for path precomputation and evaluation (0 = all cores).
    pub threads: usize,
    pub data: DataSection,
    pub output: OutputSection,
    pub noise: NoiseSection,
    pub paths: PathsSection,
    pub training: TrainingSection,
    pub confidence: ConfidenceSection,
    pub eval: EvalSection,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed(pub u64);

impl Default for Seed {
    fn default() -> Self {
        Seed(42)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub train: Option<PathBuf>,
    pub valid: Option<PathBuf>,
    pub test: Option<PathBuf>,
    /// `htr` (FB15K native) or `hrt`.
    pub column_order: String,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            train: None,
            valid: None,
            test: None,
            column_order: "htr".to_owned(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    /// Noise counts as fractions of the training size; one dataset directory
    /// (N1, N2, …) is produced per ratio.
    pub ratios: Vec<f64>,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection {
            ratios: vec![0.1, 0.2, 0.4],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsSection {
    pub epsilon: f64,
    pub fanout_cap: usize,
    pub max_len: usize,
    pub index_file: Option<PathBuf>,
    pub stats_file: Option<PathBuf>,
    pub reuse_cache: bool,
}

impl Default for PathsSection {
    fn default() -> Self {
        PathsSection {
            epsilon: 0.01,
            fanout_cap: 200,
            max_len: 2,
            index_file: None,
            stats_file: None,
            reuse_cache: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSection {
    pub variant: String,
    pub dim: usize,
    pub gamma: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub norm: String,
    pub corruption_weights: [f64; 3],
    pub fresh_quality_negative: bool,
    pub pretrained: Option<PathBuf>,
    pub checkpoint_every: usize,
    pub export_tsv: bool,
}

impl Default for TrainingSection {
    fn default() -> Self {
        TrainingSection {
            variant: "lt".to_owned(),
            dim: 50,
            gamma: 1.0,
            learning_rate: 0.001,
            epochs: 1000,
            batch_size: 4096,
            norm: "l1".to_owned(),
            corruption_weights: [0.4, 0.4, 0.2],
            fresh_quality_negative: false,
            pretrained: None,
            checkpoint_every: 0,
            export_tsv: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfidenceSection {
    pub alpha: f64,
    pub beta: f64,
    /// Combination weights; omitted means the variant's published defaults.
    pub lambda: Option<[f64; 3]>,
    pub ap_guard: f64,
}

impl Default for ConfidenceSection {
    fn default() -> Self {
        ConfidenceSection {
            alpha: 0.9,
            beta: 0.0001,
            lambda: None,
            ap_guard: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub tasks: Vec<String>,
    pub labels: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            tasks: vec![
                "noise-detection".to_owned(),
                "completion".to_owned(),
                "classification".to_owned(),
            ],
            labels: None,
            checkpoint: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| CkrlError::io(path, e))?;
        toml::from_str(&text).map_err(|e| {
            CkrlError::InvalidConfig(format!("{}: {e}", path.display()))
        })
    }

    pub fn dump(&self, path: &Path) -> Result<()> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| CkrlError::InvalidConfig(format!("cannot serialize config: {e}")))?;
        std::fs::write(path, text).map_err(|e| CkrlError::io(path, e))
    }

    pub fn column_order(&self) -> Result<ColumnOrder> {
        ColumnOrder::parse(&self.data.column_order)
    }

    pub fn variant(&self) -> Result<Variant> {
        Variant::parse(&self.training.variant)
    }

    /// Output directory: flag/config, then `$CKRL_OUTPUT_ROOT`, then `./ckrl-out`.
    pub fn output_dir(&self) -> PathBuf {
        if let Some(dir) = &self.output.dir {
            return dir.clone();
        }
        if let Ok(root) = std::env::var("CKRL_OUTPUT_ROOT") {
            if !root.is_empty() {
                return PathBuf::from(root);
            }
        }
        PathBuf::from("ckrl-out")
    }

    pub fn path_config(&self) -> PathConfig {
        PathConfig {
            max_len: self.paths.max_len,
            fanout_cap: self.paths.fanout_cap,
        }
    }

    /// Resolves the trainer configuration, deriving lambda from the variant
    /// when not set explicitly.
    pub fn training_config(&self) -> Result<TrainingConfig> {
        let variant = self.variant()?;
        let confidence = ConfidenceConfig {
            alpha: self.confidence.alpha,
            beta: self.confidence.beta,
            lambda: self.confidence.lambda.unwrap_or(variant.default_lambda()),
            epsilon: self.paths.epsilon,
            ap_guard: self.confidence.ap_guard,
        };
        let init = match &self.training.pretrained {
            Some(path) => InitMode::Pretrained(path.clone()),
            None => InitMode::Random,
        };
        let cfg = TrainingConfig {
            gamma: self.training.gamma,
            learning_rate: self.training.learning_rate,
            epochs: self.training.epochs,
            batch_size: self.training.batch_size,
            dim: self.training.dim,
            norm: Norm::parse(&self.training.norm)?,
            variant,
            corruption_weights: self.training.corruption_weights,
            rng_seed: self.seed.0,
            init,
            fresh_quality_negative: self.training.fresh_quality_negative,
            confidence,
            checkpoint_every: self.training.checkpoint_every,
            checkpoint_dir: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// The manifest that gets dumped next to outputs: identical to `self`
    /// but with derived values made explicit.
    pub fn effective(&self) -> Result<RunConfig> {
        let mut resolved = self.clone();
        resolved.output.dir = Some(self.output_dir());
        if resolved.confidence.lambda.is_none() {
            resolved.confidence.lambda = Some(self.variant()?.default_lambda());
        }
        Ok(resolved)
    }
}
