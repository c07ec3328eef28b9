//! Experiment configuration: structured text with `[generator]`,
//! `[models.<name>]`, and `[harness]` sections. Unknown keys anywhere are
//! errors.

use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub generator: GeneratorSpec,
    pub harness: HarnessSpec,
    /// Model name -> specification; name order is the output order.
    #[serde(default)]
    pub models: BTreeMap<String, ModelSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    News(NewsGenSpec),
    Surface(SurfaceGenSpec),
    /// Pre-existing realization files produced elsewhere.
    Load(LoadGenSpec),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewsGenSpec {
    pub n: usize,
    pub topics: usize,
    pub vocab: usize,
    #[serde(default = "default_outcome_scale")]
    pub outcome_scale: f64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default = "default_doc_length_mean")]
    pub doc_length_mean: f64,
    #[serde(default = "default_noise_sd")]
    pub noise_sd: f64,
    /// Optional topic matrix file; sampled synthetically when absent.
    #[serde(default)]
    pub topic_matrix: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceGenSpec {
    pub n: usize,
    pub d: usize,
    /// Optional covariate CSV (plain matrix columns x0..x{d-1}); standard
    /// normal draws when absent.
    #[serde(default)]
    pub covariates: Option<PathBuf>,
    #[serde(default = "default_effect_target")]
    pub effect_target: f64,
    #[serde(default = "default_noise_sd")]
    pub noise_sd: f64,
    #[serde(default = "default_p_treat")]
    pub p_treat: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadGenSpec {
    /// Directory holding `real_{i}.csv` files and, for bound reports,
    /// `meta.toml`.
    pub data_dir: PathBuf,
}

fn default_outcome_scale() -> f64 {
    50.0
}
fn default_kappa() -> f64 {
    10.0
}
fn default_doc_length_mean() -> f64 {
    200.0
}
fn default_noise_sd() -> f64 {
    1.0
}
fn default_effect_target() -> f64 {
    4.0
}
fn default_p_treat() -> f64 {
    0.5
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarnessSpec {
    /// Evaluation realizations.
    pub n_realizations: usize,
    /// Held-out realizations used only for hyperparameter selection.
    #[serde(default)]
    pub n_heldout_realizations: usize,
    pub master_seed: u64,
    /// Ridge penalty of the bound diagnostic.
    #[serde(default = "default_bound_lambda")]
    pub bound_lambda: f64,
    /// Subgradient budget of the bound diagnostic's L1 fits.
    #[serde(default = "default_bound_lad_budget")]
    pub bound_lad_budget: usize,
}

fn default_bound_lambda() -> f64 {
    1.0
}
fn default_bound_lad_budget() -> usize {
    2000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Blr(BlrModelSpec),
    Bnn(BnnModelSpec),
    Ols,
    DoublyRobust(DrModelSpec),
    LassoRidge(LassoRidgeModelSpec),
    Nn4(Nn4ModelSpec),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlrModelSpec {
    pub alpha_grid: Vec<f64>,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_outer_iters")]
    pub outer_iters: usize,
    #[serde(default = "default_inner_iters")]
    pub h_iters: usize,
    #[serde(default = "default_inner_iters")]
    pub w_iters: usize,
    #[serde(default = "default_step0_h")]
    pub step0_h: f64,
    #[serde(default = "default_step0_w")]
    pub step0_w: f64,
}

fn default_gamma() -> f64 {
    1.0
}
fn default_lambda() -> f64 {
    1e-3
}
fn default_outer_iters() -> usize {
    50
}
fn default_inner_iters() -> usize {
    20
}
fn default_step0_h() -> f64 {
    0.1
}
fn default_step0_w() -> f64 {
    0.05
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BnnModelSpec {
    pub d_r: usize,
    pub d_o: usize,
    pub hidden_rep: usize,
    #[serde(default)]
    pub hidden_out: usize,
    pub alpha_grid: Vec<f64>,
    #[serde(default = "default_weight_decay")]
    pub weight_decay: f64,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    /// Mini-batch size; zero or absent means full batch.
    #[serde(default)]
    pub batch: usize,
}

fn default_weight_decay() -> f64 {
    1e-3
}
fn default_lr() -> f64 {
    1e-3
}
fn default_epochs() -> usize {
    3000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrModelSpec {
    #[serde(default = "default_propensity_l2")]
    pub propensity_l2: f64,
}

fn default_propensity_l2() -> f64 {
    1e-4
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LassoRidgeModelSpec {
    pub lasso_lambda_grid: Vec<f64>,
    pub ridge_lambda_grid: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Nn4ModelSpec {
    #[serde(default = "default_nn4_hidden")]
    pub hidden: usize,
    #[serde(default = "default_weight_decay")]
    pub weight_decay: f64,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default)]
    pub batch: usize,
}

fn default_nn4_hidden() -> usize {
    25
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: ExperimentConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.harness.n_realizations == 0 {
            bail!("harness.n_realizations must be >= 1");
        }
        for (name, model) in &self.models {
            match model {
                ModelSpec::Blr(spec) if spec.alpha_grid.is_empty() => {
                    bail!("model {name}: alpha_grid must be nonempty")
                }
                ModelSpec::Bnn(spec) if spec.alpha_grid.is_empty() => {
                    bail!("model {name}: alpha_grid must be nonempty")
                }
                ModelSpec::LassoRidge(spec)
                    if spec.lasso_lambda_grid.is_empty() || spec.ridge_lambda_grid.is_empty() =>
                {
                    bail!("model {name}: lambda grids must be nonempty")
                }
                _ => {}
            }
        }
        match &self.generator {
            GeneratorSpec::News(g) => {
                if g.n == 0 || g.topics == 0 || g.vocab == 0 {
                    bail!("news generator needs n, topics, vocab >= 1");
                }
            }
            GeneratorSpec::Surface(g) => {
                if g.n == 0 || g.d == 0 {
                    bail!("surface generator needs n, d >= 1");
                }
            }
            GeneratorSpec::Load(_) => {}
        }
        Ok(())
    }

    /// Total realization files: held-out first, then evaluation.
    pub fn total_realizations(&self) -> usize {
        self.harness.n_heldout_realizations + self.harness.n_realizations
    }
}
