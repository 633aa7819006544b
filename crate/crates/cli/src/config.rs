//! Run configuration: optional JSON file merged with command-line flags.
//! Resolution order is defaults, then file values, then flags.

use std::path::Path;

use anyhow::Context;
use clap::Args;
use serde::Deserialize;

use latsurf::fitting::{FitConfig, FitMode};
use latsurf::training::TrainConfig;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub train: Option<TrainFileConfig>,
    pub fit: Option<FitFileConfig>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<FileConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainFileConfig {
    pub lambda_reg: Option<f64>,
    pub lambda_norm: Option<f64>,
    pub lr: Option<f64>,
    pub plateau_patience: Option<usize>,
    pub lr_floor: Option<f64>,
    pub epochs: Option<usize>,
    pub points_per_step: Option<usize>,
    pub latent_dim: Option<usize>,
    pub template_subdivision: Option<u32>,
    pub augmentations_per_shape: Option<usize>,
}

impl TrainFileConfig {
    pub fn apply(&self, config: &mut TrainConfig) {
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { config.$field = v; })*
            };
        }
        set!(
            lambda_reg,
            lambda_norm,
            lr,
            plateau_patience,
            lr_floor,
            epochs,
            points_per_step,
            latent_dim,
            template_subdivision,
            augmentations_per_shape
        );
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitFileConfig {
    pub mode: Option<String>,
    pub lambda_reg: Option<f64>,
    pub lambda_dir: Option<f64>,
    pub p: Option<usize>,
    pub steps: Option<usize>,
    pub lr: Option<f64>,
    pub remesh: Option<bool>,
    pub remesh_iterations: Option<usize>,
    pub template_subdivision: Option<u32>,
}

impl FitFileConfig {
    pub fn apply(&self, config: &mut FitConfig) {
        if let Some(mode) = &self.mode {
            config.mode = parse_mode(mode);
        }
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { config.$field = v; })*
            };
        }
        set!(lambda_reg, lambda_dir, p, steps, lr, remesh, remesh_iterations);
        if let Some(v) = self.template_subdivision {
            config.template_subdivision = Some(v);
        }
    }
}

fn parse_mode(s: &str) -> FitMode {
    if s.eq_ignore_ascii_case("global") {
        FitMode::Global
    } else {
        FitMode::Local
    }
}

/// Training flags shared by `train`; unset flags fall back to the config
/// file, then to defaults.
#[derive(Debug, Args)]
pub struct TrainOverrides {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub latent_dim: Option<usize>,
    /// Template icosphere subdivision used by the decoder.
    #[arg(long)]
    pub subdivision: Option<u32>,
    /// Icosphere subdivision of generated ground-truth meshes (synthetic
    /// corpora only).
    #[arg(long)]
    pub gt_subdivision: Option<u32>,
    #[arg(long)]
    pub points_per_step: Option<usize>,
    #[arg(long)]
    pub lambda_reg: Option<f64>,
    #[arg(long)]
    pub lambda_norm: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// Augmented copies per training shape.
    #[arg(long)]
    pub augment: Option<usize>,
}

impl TrainOverrides {
    pub fn apply(&self, config: &mut TrainConfig) {
        if let Some(v) = self.epochs {
            config.epochs = v;
        }
        if let Some(v) = self.latent_dim {
            config.latent_dim = v;
        }
        if let Some(v) = self.subdivision {
            config.template_subdivision = v;
        }
        if let Some(v) = self.points_per_step {
            config.points_per_step = v;
        }
        if let Some(v) = self.lambda_reg {
            config.lambda_reg = v;
        }
        if let Some(v) = self.lambda_norm {
            config.lambda_norm = v;
        }
        if let Some(v) = self.lr {
            config.lr = v;
        }
        if let Some(v) = self.patience {
            config.plateau_patience = v;
        }
        if let Some(v) = self.augment {
            config.augmentations_per_shape = v;
        }
    }
}

/// Fitting flags shared by fit-points / fit-planes / refine-seg.
#[derive(Debug, Args)]
pub struct FitOverrides {
    /// "local" or "global".
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub lambda_reg: Option<f64>,
    /// Latent smoothing weight; "inf" selects global mode.
    #[arg(long)]
    pub lambda_dir: Option<f64>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Skip post-fit remeshing.
    #[arg(long)]
    pub no_remesh: bool,
    #[arg(long)]
    pub remesh_iterations: Option<usize>,
    /// Fitting template subdivision (default: training subdivision + 1).
    #[arg(long)]
    pub subdivision: Option<u32>,
}

impl FitOverrides {
    pub fn apply(&self, config: &mut FitConfig) {
        if let Some(mode) = &self.mode {
            config.mode = parse_mode(mode);
        }
        if let Some(v) = self.lambda_reg {
            config.lambda_reg = v;
        }
        if let Some(v) = self.lambda_dir {
            config.lambda_dir = v;
        }
        if let Some(v) = self.p {
            config.p = v;
        }
        if let Some(v) = self.steps {
            config.steps = v;
        }
        if let Some(v) = self.lr {
            config.lr = v;
        }
        if self.no_remesh {
            config.remesh = false;
        }
        if let Some(v) = self.remesh_iterations {
            config.remesh_iterations = v;
        }
        if let Some(v) = self.subdivision {
            config.template_subdivision = Some(v);
        }
    }
}
