//! Desk-scale experiments: data efficiency on rotated shapes and rotation
//! consistency of toy super-resolution.

use anyhow::{bail, Result};
use eqvit::group::{GroupElement, GroupSpec};
use eqvit::models::{
    equal_params_swin, equal_width_vit, EqSwin, EqSwinConfig, EqViT, EqViTConfig, PlainSwin, PlainViT,
};
use eqvit::nn::Module;
use serde::Serialize;

use crate::config::{Degradation, ModelConfig, Orientation, RunConfig, SyntheticTaskSpec, TaskKind};
use crate::synthetic::{gen_shapes, gen_sr, Split};
use crate::train::{accuracy, psnr, train_classifier, train_regressor};

/// Required mean margin, in percentage points, of the EQ model's rotated
/// accuracy over the baseline's on seeds 0–4.
///
/// Measured once with `configs/shapes_eqvit.toml` (mean 46.6, worst seed
/// 23.1) and frozen below the worst seed. Compared against, never tuned.
pub const FROZEN_MARGIN_PTS: f64 = 20.0;
/// Largest accepted rotated-vs-canonical accuracy gap of the EQ model.
pub const MAX_EQ_ACCURACY_GAP_PTS: f64 = 1.0;
/// Largest accepted rotated-vs-canonical PSNR gap of the EQ model.
pub const MAX_EQ_PSNR_GAP_DB: f64 = 0.01;
/// PSNR the nearest-neighbour sanity run must reach.
pub const SANITY_PSNR_DB: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Accuracies {
    /// Percent correct on canonical-orientation test images.
    pub canonical: f64,
    /// Percent correct on all-orientation test images.
    pub rotated: f64,
}

impl Accuracies {
    pub fn gap(&self) -> f64 {
        (self.canonical - self.rotated).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub eq: Accuracies,
    pub baseline: Accuracies,
    pub eq_final_loss: f64,
    pub baseline_final_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DataEfficiencyReport {
    pub eq_params: usize,
    pub baseline_params: usize,
    pub outcomes: Vec<SeedOutcome>,
    pub max_eq_gap_pts: f64,
    pub mean_margin_pts: f64,
    pub frozen_margin_pts: f64,
}

impl DataEfficiencyReport {
    pub fn eq_gap_ok(&self) -> bool {
        self.max_eq_gap_pts <= MAX_EQ_ACCURACY_GAP_PTS
    }

    pub fn margin_ok(&self) -> bool {
        self.mean_margin_pts >= self.frozen_margin_pts
    }

    pub fn passes(&self) -> bool {
        self.eq_gap_ok() && self.margin_ok()
    }
}

fn eq_vit(cfg: &RunConfig) -> Result<&EqViTConfig> {
    match &cfg.model {
        ModelConfig::EqVit(c) if cfg.task.task == TaskKind::Shapes => Ok(c),
        _ => bail!("the data-efficiency experiment needs an eq_vit model on the shapes task"),
    }
}

fn eq_swin(cfg: &RunConfig) -> Result<&EqSwinConfig> {
    match &cfg.model {
        ModelConfig::EqSwin(c) if cfg.task.task == TaskKind::Sr => Ok(c),
        _ => bail!("the SR experiment needs an eq_swin model on the sr task"),
    }
}

fn with_policy(task: &SyntheticTaskSpec, seed: u64, test: Orientation) -> SyntheticTaskSpec {
    SyntheticTaskSpec { seed, train_orientation: Orientation::CanonicalOnly, test_orientation: test, ..task.clone() }
}

/// Trains the EQ model from `cfg` and its width-matched plain counterpart on
/// canonical shapes, then tests both on canonical and rotated shapes.
pub fn run_data_efficiency(cfg: &RunConfig, seeds: &[u64]) -> Result<DataEfficiencyReport> {
    let eq_cfg = eq_vit(cfg)?;
    let base_cfg = equal_width_vit(eq_cfg);
    let mut outcomes = Vec::with_capacity(seeds.len());
    let (mut eq_params, mut baseline_params) = (0, 0);
    for &seed in seeds {
        let canonical_task = with_policy(&cfg.task, seed, Orientation::CanonicalOnly);
        let rotated_task = with_policy(&cfg.task, seed, Orientation::AllOrientations);
        let train = gen_shapes(&canonical_task, Split::Train);
        let test_canonical = gen_shapes(&canonical_task, Split::Test);
        let test_rotated = gen_shapes(&rotated_task, Split::Test);
        let opt = crate::config::OptimizerConfig { seed, ..cfg.optimizer.clone() };

        let mut eq = EqViT::<f64>::new(eq_cfg, seed)?;
        let eq_log = train_classifier(&mut eq, &train, &opt)?;
        let mut base = PlainViT::<f64>::new(&base_cfg, seed)?;
        let base_log = train_classifier(&mut base, &train, &opt)?;
        eq_params = eq.param_count();
        baseline_params = base.param_count();

        outcomes.push(SeedOutcome {
            seed,
            eq: Accuracies {
                canonical: 100.0 * accuracy(&eq, &test_canonical)?,
                rotated: 100.0 * accuracy(&eq, &test_rotated)?,
            },
            baseline: Accuracies {
                canonical: 100.0 * accuracy(&base, &test_canonical)?,
                rotated: 100.0 * accuracy(&base, &test_rotated)?,
            },
            eq_final_loss: eq_log.epoch_loss.last().copied().unwrap_or(f64::NAN),
            baseline_final_loss: base_log.epoch_loss.last().copied().unwrap_or(f64::NAN),
        });
    }
    let n = outcomes.len().max(1) as f64;
    Ok(DataEfficiencyReport {
        eq_params,
        baseline_params,
        max_eq_gap_pts: outcomes.iter().map(|o| o.eq.gap()).fold(0.0, f64::max),
        mean_margin_pts: outcomes.iter().map(|o| o.eq.rotated - o.baseline.rotated).sum::<f64>() / n,
        frozen_margin_pts: FROZEN_MARGIN_PTS,
        outcomes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Psnrs {
    pub canonical: f64,
    pub rotated: f64,
}

impl Psnrs {
    pub fn gap(&self) -> f64 {
        (self.canonical - self.rotated).abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SrReport {
    pub eq_params: usize,
    pub baseline_params: usize,
    pub baseline_channels: usize,
    pub eq: Psnrs,
    pub baseline: Psnrs,
    /// EQ model trained and tested on nearest-neighbour pairs.
    pub sanity_psnr: f64,
}

impl SrReport {
    pub fn passes(&self) -> bool {
        self.eq.gap() <= MAX_EQ_PSNR_GAP_DB && self.sanity_psnr >= SANITY_PSNR_DB
    }
}

/// Trains the EQ SR model from `cfg` and a plain model with about the same
/// parameter count, and compares PSNR on held-out and 90°-rotated pairs.
pub fn run_toy_sr(cfg: &RunConfig) -> Result<SrReport> {
    let eq_cfg = eq_swin(cfg)?;
    let opt = &cfg.optimizer;
    let task = with_policy(&cfg.task, cfg.task.seed, Orientation::CanonicalOnly);
    let train = gen_sr(&task, Split::Train);
    let test = gen_sr(&task, Split::Test);
    let quarter = GroupElement::new(1, 0);
    let test_rotated = test.transformed(&GroupSpec::c4(), quarter);

    let mut eq = EqSwin::<f64>::new(eq_cfg, opt.seed)?;
    train_regressor(&mut eq, &train, opt)?;
    let base_cfg = equal_params_swin(eq_cfg, eq.param_count())?;
    let mut base = PlainSwin::<f64>::new(&base_cfg, opt.seed)?;
    train_regressor(&mut base, &train, opt)?;

    let sanity_task = SyntheticTaskSpec { degradation: Degradation::Nearest, ..task.clone() };
    let mut sanity = EqSwin::<f64>::new(eq_cfg, opt.seed)?;
    train_regressor(&mut sanity, &gen_sr(&sanity_task, Split::Train), opt)?;

    Ok(SrReport {
        eq_params: eq.param_count(),
        baseline_params: base.param_count(),
        baseline_channels: base_cfg.channels,
        eq: Psnrs { canonical: psnr(&eq, &test)?, rotated: psnr(&eq, &test_rotated)? },
        baseline: Psnrs { canonical: psnr(&base, &test)?, rotated: psnr(&base, &test_rotated)? },
        sanity_psnr: psnr(&sanity, &gen_sr(&sanity_task, Split::Test))?,
    })
}
