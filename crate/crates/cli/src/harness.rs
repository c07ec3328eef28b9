//! The experiment harness: dataset generation across seeded realizations,
//! hyperparameter selection on held-out realizations, evaluation with
//! per-realization metrics, alpha sweeps, and bound reports.
//!
//! Realization files are named `real_{i}.csv`; the first
//! `n_heldout_realizations` indices are reserved for hyperparameter
//! selection and the remaining `n_realizations` for evaluation. Every
//! realization owns an RNG stream derived from `(master_seed, index)`, so
//! outputs are byte-identical across runs and across worker counts.
//! Models only ever see a truth-stripped view of the data.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use cfr_core::baselines::{
    doubly_robust, lasso_ridge, nn4_baseline, ols_baseline, PotentialOutcomePredictions,
};
use cfr_core::blr::{blr_finalize, blr_predict_both, blr_train, BlrConfig};
use cfr_core::bnn::{bnn_predict_both, bnn_train, BatchMode, BnnConfig};
use cfr_core::bound::bound_terms;
use cfr_core::data::{load_dataset, nearest_cross_group, save_dataset, Dataset, Schema};
use cfr_core::disc::weighted_linear_disc;
use cfr_core::metrics::{eval_metrics, true_potential_outcomes, Metrics};
use cfr_core::seeds;
use cfr_core::simulate::{
    gen_loglinear_surface, gen_news, load_topic_matrix, standard_normal_covariates, NewsConfig,
    SurfaceConfig, TopicSpace,
};
use ndarray::{Array1, Array2};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, GeneratorSpec, ModelSpec, NewsGenSpec};
use crate::meta::{Meta, MetaGenerator, MetaRealization};

/// Stream offset for the shared topic space so it never collides with
/// per-realization streams.
const TOPIC_SPACE_STREAM: u64 = 1_000_000_007;

pub fn realization_path(dir: &Path, index: usize) -> PathBuf {
    dir.join(format!("real_{index}.csv"))
}

/// Where realization files live: the output directory for generated data,
/// or the configured directory for pre-existing data.
pub fn data_dir(cfg: &ExperimentConfig, out: &Path) -> PathBuf {
    match &cfg.generator {
        GeneratorSpec::Load(spec) => spec.data_dir.clone(),
        _ => out.to_path_buf(),
    }
}

fn load_covariate_csv(path: &Path, n: usize, d: usize) -> anyhow::Result<Array2<f64>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading covariates {}", path.display()))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 && line.starts_with('x') {
            continue; // optional header
        }
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|cell| {
                cell.trim()
                    .parse::<f64>()
                    .map_err(|_| anyhow::anyhow!("bad covariate cell '{cell}' on line {lineno}"))
            })
            .collect::<anyhow::Result<_>>()?;
        rows.push(row);
    }
    if rows.len() != n || rows.iter().any(|r| r.len() != d) {
        bail!(
            "covariate file {} is not an {n} x {d} matrix",
            path.display()
        );
    }
    let mut x = Array2::zeros((n, d));
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            x[[i, j]] = *v;
        }
    }
    Ok(x)
}

fn generate_realization(
    gen: &GeneratorSpec,
    master_seed: u64,
    index: usize,
    space: Option<&TopicSpace>,
    fixed_covariates: Option<&Array2<f64>>,
) -> anyhow::Result<(Dataset, f64, f64, u64)> {
    let seed = seeds::derive(master_seed, index as u64);
    match gen {
        GeneratorSpec::News(spec) => {
            let cfg = NewsConfig {
                n: spec.n,
                n_topics: spec.topics,
                vocab: spec.vocab,
                outcome_scale: spec.outcome_scale,
                kappa: spec.kappa,
                doc_length_mean: spec.doc_length_mean,
                noise_sd: spec.noise_sd,
                seed,
            };
            let space = space.expect("news generation needs a topic space");
            let (data, constants) = gen_news(space, &cfg)?;
            Ok((data, constants.k0, constants.k1, seed))
        }
        GeneratorSpec::Surface(spec) => {
            let x = match fixed_covariates {
                Some(x) => x.clone(),
                None => standard_normal_covariates(spec.n, spec.d, seed),
            };
            let cfg = SurfaceConfig {
                effect_target: spec.effect_target,
                noise_sd: spec.noise_sd,
                p_treat: spec.p_treat,
                seed,
            };
            let (data, constants) = gen_loglinear_surface(&x, &cfg)?;
            Ok((data, constants.k0, constants.k1, seed))
        }
        GeneratorSpec::Load(_) => bail!("cannot generate data for kind = \"load\""),
    }
}

fn build_topic_space(spec: &NewsGenSpec, master_seed: u64) -> anyhow::Result<TopicSpace> {
    let space_seed = seeds::derive(master_seed, TOPIC_SPACE_STREAM);
    match &spec.topic_matrix {
        Some(path) => {
            let topics = load_topic_matrix(path)?;
            if topics.nrows() != spec.vocab || topics.ncols() != spec.topics {
                bail!(
                    "topic matrix {} is {}x{}, config expects {}x{}",
                    path.display(),
                    topics.nrows(),
                    topics.ncols(),
                    spec.vocab,
                    spec.topics
                );
            }
            Ok(TopicSpace::from_matrix(topics, space_seed)?)
        }
        None => Ok(TopicSpace::synthetic(spec.topics, spec.vocab, space_seed)?),
    }
}

/// Writes one CSV per realization plus `meta.toml` with generator constants.
pub fn cmd_simulate(cfg: &ExperimentConfig, out: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(out)?;
    let master = cfg.harness.master_seed;
    let total = cfg.total_realizations();
    let (space, fixed_x, gen_meta) = match &cfg.generator {
        GeneratorSpec::News(spec) => {
            let space = build_topic_space(spec, master)?;
            let meta = MetaGenerator {
                kind: "news".to_string(),
                master_seed: master,
                outcome_scale: Some(spec.outcome_scale),
                kappa: Some(spec.kappa),
                noise_sd: Some(spec.noise_sd),
            };
            (Some(space), None, meta)
        }
        GeneratorSpec::Surface(spec) => {
            let fixed = match &spec.covariates {
                Some(path) => Some(load_covariate_csv(path, spec.n, spec.d)?),
                None => None,
            };
            let meta = MetaGenerator {
                kind: "surface".to_string(),
                master_seed: master,
                outcome_scale: None,
                kappa: None,
                noise_sd: Some(spec.noise_sd),
            };
            (None, fixed, meta)
        }
        GeneratorSpec::Load(_) => bail!("nothing to simulate for kind = \"load\""),
    };

    let schema = Schema::default();
    let mut realizations = Vec::with_capacity(total);
    for index in 0..total {
        let (data, k0, k1, seed) = generate_realization(
            &cfg.generator,
            master,
            index,
            space.as_ref(),
            fixed_x.as_ref(),
        )?;
        save_dataset(&data, &realization_path(out, index), &schema)?;
        realizations.push(MetaRealization {
            index,
            seed,
            k0,
            k1,
        });
    }
    let meta = Meta {
        generator: gen_meta,
        realizations,
    };
    meta.save(out)?;
    Ok(())
}

/// One fully specified hyperparameter cell of a model.
#[derive(Debug, Clone)]
pub enum ModelCell {
    Blr(BlrConfig),
    Bnn(BnnConfig),
    Ols,
    DoublyRobust {
        propensity_l2: f64,
    },
    LassoRidge {
        lasso_lambda: f64,
        ridge_lambda: f64,
    },
    Nn4(BnnConfig),
}

impl ModelCell {
    pub fn describe(&self) -> String {
        match self {
            ModelCell::Blr(c) => format!("alpha={}", c.alpha),
            ModelCell::Bnn(c) => format!("alpha={}", c.alpha),
            ModelCell::Ols => "-".to_string(),
            ModelCell::DoublyRobust { .. } => "ite=regression-arms".to_string(),
            ModelCell::LassoRidge {
                lasso_lambda,
                ridge_lambda,
            } => format!("lasso_lambda={lasso_lambda};ridge_lambda={ridge_lambda}"),
            ModelCell::Nn4(_) => "alpha=0".to_string(),
        }
    }
}

fn batch_mode(batch: usize) -> BatchMode {
    if batch == 0 {
        BatchMode::Full
    } else {
        BatchMode::Size(batch)
    }
}

/// Expands a model specification into its hyperparameter grid.
pub fn expand_cells(spec: &ModelSpec) -> Vec<ModelCell> {
    match spec {
        ModelSpec::Blr(s) => s
            .alpha_grid
            .iter()
            .map(|&alpha| {
                ModelCell::Blr(BlrConfig {
                    alpha,
                    gamma: s.gamma,
                    lambda: s.lambda,
                    outer_iters: s.outer_iters,
                    h_iters: s.h_iters,
                    w_iters: s.w_iters,
                    step0_h: s.step0_h,
                    step0_w: s.step0_w,
                    seed: 0,
                })
            })
            .collect(),
        ModelSpec::Bnn(s) => s
            .alpha_grid
            .iter()
            .map(|&alpha| {
                ModelCell::Bnn(BnnConfig {
                    d_r: s.d_r,
                    d_o: s.d_o,
                    hidden_rep: s.hidden_rep,
                    hidden_out: s.hidden_out,
                    alpha,
                    weight_decay: s.weight_decay,
                    lr: s.lr,
                    epochs: s.epochs,
                    batch: batch_mode(s.batch),
                    ..BnnConfig::default()
                })
            })
            .collect(),
        ModelSpec::Ols => vec![ModelCell::Ols],
        ModelSpec::DoublyRobust(s) => vec![ModelCell::DoublyRobust {
            propensity_l2: s.propensity_l2,
        }],
        ModelSpec::LassoRidge(s) => {
            let mut cells = Vec::new();
            for &ll in &s.lasso_lambda_grid {
                for &rl in &s.ridge_lambda_grid {
                    cells.push(ModelCell::LassoRidge {
                        lasso_lambda: ll,
                        ridge_lambda: rl,
                    });
                }
            }
            cells
        }
        ModelSpec::Nn4(s) => vec![ModelCell::Nn4(BnnConfig {
            d_r: 4,
            d_o: 0,
            hidden_rep: s.hidden,
            hidden_out: 0,
            alpha: 0.0,
            weight_decay: s.weight_decay,
            lr: s.lr,
            epochs: s.epochs,
            batch: batch_mode(s.batch),
            ..BnnConfig::default()
        })],
    }
}

/// Transductive predictions of one trained model on one realization.
#[derive(Debug, Clone)]
pub struct Predicted {
    pub y0: Array1<f64>,
    pub y1: Array1<f64>,
    /// Estimator-specific average effect replacing the mean of the arms.
    pub ate_override: Option<f64>,
    /// Final discrepancy of the learned representation, when one exists.
    pub rep_disc: Option<f64>,
}

impl From<PotentialOutcomePredictions> for Predicted {
    fn from(p: PotentialOutcomePredictions) -> Self {
        Predicted {
            y0: p.y0_hat,
            y1: p.y1_hat,
            ate_override: None,
            rep_disc: None,
        }
    }
}

/// Trains one cell on the truth-stripped view of a realization and predicts
/// both arms for the same units.
pub fn train_and_predict(cell: &ModelCell, data: &Dataset, seed: u64) -> anyhow::Result<Predicted> {
    let train = data.strip_truth();
    let x = train.covariates.view();
    match cell {
        ModelCell::Blr(cfg) => {
            let cfg = BlrConfig {
                seed,
                ..cfg.clone()
            };
            let nn = nearest_cross_group(&train)?;
            let (w, _) = blr_train(&train, &nn, &cfg)?;
            let model = blr_finalize(&train, &w, cfg.lambda)?;
            let (y0, y1) = blr_predict_both(&model, &w, &train.covariates)?;
            let disc = weighted_linear_disc(x, train.treatment.view(), w.w.view())?;
            Ok(Predicted {
                y0,
                y1,
                ate_override: None,
                rep_disc: Some(disc),
            })
        }
        ModelCell::Bnn(cfg) => {
            let cfg = BnnConfig {
                seed,
                ..cfg.clone()
            };
            let (params, history) = bnn_train(&train, &cfg)?;
            let (y0, y1) = bnn_predict_both(&params, x)?;
            Ok(Predicted {
                y0,
                y1,
                ate_override: None,
                rep_disc: Some(history.final_disc()),
            })
        }
        ModelCell::Ols => Ok(ols_baseline(&train, x)?.into()),
        ModelCell::DoublyRobust { propensity_l2 } => {
            let preds = doubly_robust(&train, x, *propensity_l2)?;
            let ate = preds.ate_hat;
            let mut out: Predicted = preds.into();
            out.ate_override = Some(ate);
            Ok(out)
        }
        ModelCell::LassoRidge {
            lasso_lambda,
            ridge_lambda,
        } => Ok(lasso_ridge(&train, x, *lasso_lambda, *ridge_lambda)?.into()),
        ModelCell::Nn4(cfg) => {
            let cfg = BnnConfig {
                seed,
                ..cfg.clone()
            };
            let (preds, _) = nn4_baseline(&train, &cfg, x)?;
            Ok(preds.into())
        }
    }
}

fn metrics_for(pred: &Predicted, data: &Dataset) -> anyhow::Result<Metrics> {
    let mut m = eval_metrics(pred.y0.view(), pred.y1.view(), data)?;
    if let Some(ate) = pred.ate_override {
        let (y0, y1, _) = true_potential_outcomes(data)?;
        let true_ate = (&y1 - &y0).sum() / data.n() as f64;
        m.eps_ate = (ate - true_ate).abs();
    }
    Ok(m)
}

#[derive(Debug, Clone)]
pub struct ResultRow {
    pub model: String,
    /// Realization file index; `None` marks the summary row.
    pub realization: Option<usize>,
    pub metrics: Option<Metrics>,
    pub rep_disc: Option<f64>,
    pub params: String,
    /// Summary cells (mean, stderr) per metric when this is a summary row.
    pub summary: Option<SummaryStats>,
}

#[derive(Debug, Clone)]
pub struct SummaryStats {
    pub eps_ite: (f64, f64),
    pub eps_ate: (f64, f64),
    pub pehe: (f64, f64),
    pub rmse_cf: (f64, f64),
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt() / (n as f64).sqrt())
}

pub struct RunResults {
    pub rows: Vec<ResultRow>,
    /// Selected hyperparameter description per model.
    pub selected: Vec<(String, String)>,
}

/// Metrics plus the learned representation's final discrepancy, or the
/// failure that prevented them.
type EvalOutcome = anyhow::Result<(Metrics, Option<f64>)>;

fn eval_indices(cfg: &ExperimentConfig) -> Vec<usize> {
    (cfg.harness.n_heldout_realizations..cfg.total_realizations()).collect()
}

fn heldout_indices(cfg: &ExperimentConfig) -> Vec<usize> {
    (0..cfg.harness.n_heldout_realizations).collect()
}

fn load_realizations(dir: &Path, indices: &[usize]) -> anyhow::Result<Vec<Dataset>> {
    let schema = Schema::default();
    indices
        .iter()
        .map(|&i| {
            let path = realization_path(dir, i);
            load_dataset(&path, &schema)
                .map_err(|e| anyhow::anyhow!("loading {}: {e}", path.display()))
        })
        .collect()
}

/// Phase 1 (selection by mean transductive-effect RMSE on the held-out
/// realizations) followed by phase 2 (evaluation); writes `results.csv`.
pub fn cmd_run(cfg: &ExperimentConfig, out: &Path) -> anyhow::Result<RunResults> {
    std::fs::create_dir_all(out)?;
    let dir = data_dir(cfg, out);
    let master = cfg.harness.master_seed;
    let heldout_idx = heldout_indices(cfg);
    let eval_idx = eval_indices(cfg);
    let heldout = load_realizations(&dir, &heldout_idx)?;
    let eval = load_realizations(&dir, &eval_idx)?;

    let mut rows: Vec<ResultRow> = Vec::new();
    let mut selected_out = Vec::new();
    for (name, spec) in &cfg.models {
        let cells = expand_cells(spec);
        // Selection phase; single-cell models and empty held-out sets skip
        // straight to the first cell.
        let chosen = if cells.len() > 1 && !heldout.is_empty() {
            let scored: Vec<(usize, f64)> = cells
                .par_iter()
                .enumerate()
                .map(|(ci, cell)| {
                    let mut sum = 0.0;
                    for (hi, data) in heldout_idx.iter().zip(heldout.iter()) {
                        let seed = seeds::derive(master, *hi as u64);
                        match train_and_predict(cell, data, seed)
                            .and_then(|p| metrics_for(&p, data))
                        {
                            Ok(m) => sum += m.eps_ite,
                            Err(e) => {
                                eprintln!(
                                    "model {name} cell {ci} failed on held-out {hi}: {e}; cell skipped"
                                );
                                return (ci, f64::INFINITY);
                            }
                        }
                    }
                    (ci, sum / heldout.len() as f64)
                })
                .collect();
            let best = scored
                .iter()
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
                .map(|&(ci, score)| (ci, score));
            match best {
                Some((ci, score)) if score.is_finite() => ci,
                _ => {
                    eprintln!("model {name}: every grid cell failed selection; model skipped");
                    rows.push(ResultRow {
                        model: name.clone(),
                        realization: None,
                        metrics: None,
                        rep_disc: None,
                        params: "failed: all grid cells".to_string(),
                        summary: None,
                    });
                    continue;
                }
            }
        } else {
            0
        };
        let cell = &cells[chosen];
        let params = cell.describe();
        selected_out.push((name.clone(), params.clone()));

        // Evaluation phase.
        let evaluated: Vec<(usize, EvalOutcome)> = eval_idx
            .par_iter()
            .zip(eval.par_iter())
            .map(|(&index, data)| {
                let seed = seeds::derive(master, index as u64);
                let res = train_and_predict(cell, data, seed)
                    .and_then(|p| metrics_for(&p, data).map(|m| (m, p.rep_disc)));
                (index, res)
            })
            .collect();
        let mut ites = Vec::new();
        let mut ates = Vec::new();
        let mut pehes = Vec::new();
        let mut cfs = Vec::new();
        for (index, res) in evaluated {
            match res {
                Ok((m, rep_disc)) => {
                    ites.push(m.eps_ite);
                    ates.push(m.eps_ate);
                    pehes.push(m.pehe);
                    cfs.push(m.rmse_cf);
                    rows.push(ResultRow {
                        model: name.clone(),
                        realization: Some(index),
                        metrics: Some(m),
                        rep_disc,
                        params: params.clone(),
                        summary: None,
                    });
                }
                Err(e) => {
                    eprintln!("model {name} failed on realization {index}: {e}");
                    rows.push(ResultRow {
                        model: name.clone(),
                        realization: Some(index),
                        metrics: None,
                        rep_disc: None,
                        params: format!("failed: {e}"),
                        summary: None,
                    });
                }
            }
        }
        rows.push(ResultRow {
            model: name.clone(),
            realization: None,
            metrics: None,
            rep_disc: None,
            params: params.clone(),
            summary: Some(SummaryStats {
                eps_ite: mean_stderr(&ites),
                eps_ate: mean_stderr(&ates),
                pehe: mean_stderr(&pehes),
                rmse_cf: mean_stderr(&cfs),
            }),
        });
    }

    write_results_csv(&rows, &out.join("results.csv"))?;
    Ok(RunResults {
        rows,
        selected: selected_out,
    })
}

fn write_results_csv(rows: &[ResultRow], path: &Path) -> anyhow::Result<()> {
    let mut text = String::from("model,realization,eps_ite,eps_ate,pehe,rmse_cf,params\n");
    for row in rows {
        let realization = row
            .realization
            .map(|i| i.to_string())
            .unwrap_or_else(|| "summary".to_string());
        match (&row.metrics, &row.summary) {
            (Some(m), _) => {
                writeln!(
                    text,
                    "{},{},{},{},{},{},{}",
                    row.model, realization, m.eps_ite, m.eps_ate, m.pehe, m.rmse_cf, row.params
                )
                .unwrap();
            }
            (None, Some(s)) => {
                let cell = |p: (f64, f64)| format!("{}±{}", p.0, p.1);
                writeln!(
                    text,
                    "{},{},{},{},{},{},{}",
                    row.model,
                    realization,
                    cell(s.eps_ite),
                    cell(s.eps_ate),
                    cell(s.pehe),
                    cell(s.rmse_cf),
                    row.params
                )
                .unwrap();
            }
            (None, None) => {
                writeln!(text, "{},{},,,,,{}", row.model, realization, row.params).unwrap();
            }
        }
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Per-alpha sweep of one model with otherwise fixed hyperparameters.
/// Writes `sweep.csv` in long format: one row per alpha per metric.
pub fn cmd_sweep_alpha(
    cfg: &ExperimentConfig,
    out: &Path,
    model_name: &str,
    alphas: &[f64],
) -> anyhow::Result<Vec<(f64, String, f64, f64)>> {
    std::fs::create_dir_all(out)?;
    if alphas.is_empty() {
        bail!("alpha list must be nonempty");
    }
    let spec = cfg
        .models
        .get(model_name)
        .ok_or_else(|| anyhow::anyhow!("config has no model named '{model_name}'"))?;
    let base = expand_cells(spec)
        .into_iter()
        .next()
        .expect("expand_cells never returns an empty grid");
    let make_cell = |alpha: f64| -> anyhow::Result<ModelCell> {
        match &base {
            ModelCell::Blr(c) => Ok(ModelCell::Blr(BlrConfig { alpha, ..c.clone() })),
            ModelCell::Bnn(c) => Ok(ModelCell::Bnn(BnnConfig { alpha, ..c.clone() })),
            _ => bail!("model '{model_name}' has no alpha to sweep"),
        }
    };

    let dir = data_dir(cfg, out);
    let master = cfg.harness.master_seed;
    let eval_idx = eval_indices(cfg);
    let eval = load_realizations(&dir, &eval_idx)?;

    let mut table: Vec<(f64, String, f64, f64)> = Vec::new();
    for &alpha in alphas {
        let cell = make_cell(alpha)?;
        let results: Vec<anyhow::Result<(Metrics, Option<f64>)>> = eval_idx
            .par_iter()
            .zip(eval.par_iter())
            .map(|(&index, data)| {
                let seed = seeds::derive(master, index as u64);
                train_and_predict(&cell, data, seed)
                    .and_then(|p| metrics_for(&p, data).map(|m| (m, p.rep_disc)))
            })
            .collect();
        let mut ites = Vec::new();
        let mut pehes = Vec::new();
        let mut cfs = Vec::new();
        let mut discs = Vec::new();
        for res in results {
            let (m, disc) = res?;
            ites.push(m.eps_ite);
            pehes.push(m.pehe);
            cfs.push(m.rmse_cf);
            if let Some(d) = disc {
                discs.push(d);
            }
        }
        for (metric, values) in [
            ("eps_ite", &ites),
            ("pehe", &pehes),
            ("rmse_cf", &cfs),
            ("disc", &discs),
        ] {
            let (mean, se) = mean_stderr(values);
            table.push((alpha, metric.to_string(), mean, se));
        }
    }

    let mut text = String::from("alpha,metric,mean,stderr\n");
    for (alpha, metric, mean, se) in &table {
        writeln!(text, "{alpha},{metric},{mean},{se}").unwrap();
    }
    std::fs::write(out.join("sweep.csv"), text)?;
    Ok(table)
}

#[derive(Debug, Clone)]
pub struct BoundRow {
    pub realization: usize,
    pub representation: String,
    pub report: cfr_core::bound::BoundReport,
    /// Margin by which the supplied constants bound the sample's cross-group
    /// outcome differences; representation-independent.
    pub lipschitz_slack: f64,
}

impl BoundRow {
    pub fn violated(&self) -> bool {
        self.report.min_slack() < -1e-9 || self.lipschitz_slack < -1e-9
    }
}

/// Evaluates the bound chain per realization for the identity representation
/// and for representations learned by the configured models; writes
/// `bound.csv` and returns the number of chain violations.
pub fn cmd_bound(cfg: &ExperimentConfig, out: &Path) -> anyhow::Result<(Vec<BoundRow>, usize)> {
    std::fs::create_dir_all(out)?;
    let dir = data_dir(cfg, out);
    let meta = Meta::load(&dir)?;
    let master = cfg.harness.master_seed;
    let indices: Vec<usize> = (0..cfg.total_realizations()).collect();
    let datasets = load_realizations(&dir, &indices)?;

    // First configured BLR and BNN entries provide the learned
    // representations; their first grid cell is used as-is.
    let blr_cell = cfg.models.iter().find_map(|(_, spec)| match spec {
        ModelSpec::Blr(_) => expand_cells(spec).into_iter().next(),
        _ => None,
    });
    let bnn_cell = cfg.models.iter().find_map(|(_, spec)| match spec {
        ModelSpec::Bnn(_) => expand_cells(spec).into_iter().next(),
        _ => None,
    });

    let lambda = cfg.harness.bound_lambda;
    let budget = cfg.harness.bound_lad_budget;
    let results: Vec<anyhow::Result<Vec<BoundRow>>> = indices
        .par_iter()
        .zip(datasets.par_iter())
        .map(|(&index, data)| {
            let (k0, k1) = meta.constants_for(index)?;
            let nn = nearest_cross_group(data)?;
            let seed = seeds::derive(master, index as u64);
            let lipschitz_slack = cfr_core::bound::lipschitz_validity_slack(data, &nn, k0, k1)?;
            let mut rows = Vec::new();
            let identity = bound_terms(data, data.covariates.view(), &nn, lambda, k0, k1, budget)?;
            rows.push(BoundRow {
                realization: index,
                representation: "identity".to_string(),
                report: identity,
                lipschitz_slack,
            });
            if let Some(ModelCell::Blr(c)) = &blr_cell {
                let cfg_t = BlrConfig { seed, ..c.clone() };
                let train = data.strip_truth();
                let (w, _) = blr_train(&train, &nn, &cfg_t)?;
                let phi = w.apply(&data.covariates);
                let report = bound_terms(data, phi.view(), &nn, lambda, k0, k1, budget)?;
                rows.push(BoundRow {
                    realization: index,
                    representation: "blr".to_string(),
                    report,
                    lipschitz_slack,
                });
            }
            if let Some(ModelCell::Bnn(c)) = &bnn_cell {
                let cfg_t = BnnConfig { seed, ..c.clone() };
                let train = data.strip_truth();
                let (params, _) = bnn_train(&train, &cfg_t)?;
                let (phi, _) = cfr_core::bnn::bnn_forward(
                    &params,
                    data.covariates.view(),
                    data.treatment.view(),
                )?;
                let report = bound_terms(data, phi.view(), &nn, lambda, k0, k1, budget)?;
                rows.push(BoundRow {
                    realization: index,
                    representation: "bnn".to_string(),
                    report,
                    lipschitz_slack,
                });
            }
            Ok(rows)
        })
        .collect();

    let mut rows = Vec::new();
    for r in results {
        rows.extend(r?);
    }
    let violations = rows.iter().filter(|r| r.violated()).count();

    let mut text = String::from(
        "realization,representation,lhs,disc,eta_hat,g_hat,nn_term,mid_hat,rhs_hat,mu_hat,r,k0,k1,lambda,min_slack,lipschitz_slack\n",
    );
    for row in &rows {
        let b = &row.report;
        writeln!(
            text,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            row.realization,
            row.representation,
            b.lhs,
            b.disc,
            b.eta_hat,
            b.g_hat,
            b.nn_term,
            b.mid_hat,
            b.rhs_hat,
            b.mu_hat,
            b.r,
            b.k0,
            b.k1,
            b.lambda,
            b.min_slack(),
            row.lipschitz_slack
        )
        .unwrap();
    }
    std::fs::write(out.join("bound.csv"), text)?;
    Ok((rows, violations))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn surface_config(n_eval: usize, n_heldout: usize) -> ExperimentConfig {
        let text = format!(
            r#"
[generator]
kind = "surface"
n = 60
d = 4
noise_sd = 0.2

[harness]
n_realizations = {n_eval}
n_heldout_realizations = {n_heldout}
master_seed = 11

[models.ols]
kind = "ols"
"#
        );
        toml::from_str(&text).unwrap()
    }

    #[test]
    fn simulate_writes_files_and_meta() {
        let cfg = surface_config(2, 1);
        let dir = tempfile::tempdir().unwrap();
        cmd_simulate(&cfg, dir.path()).unwrap();
        for i in 0..3 {
            assert!(realization_path(dir.path(), i).exists(), "missing file {i}");
        }
        let meta = Meta::load(dir.path()).unwrap();
        assert_eq!(meta.realizations.len(), 3);
        assert!(meta.realizations[0].k0 > 0.0);
    }

    #[test]
    fn simulate_is_reproducible() {
        let cfg = surface_config(1, 0);
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        cmd_simulate(&cfg, d1.path()).unwrap();
        cmd_simulate(&cfg, d2.path()).unwrap();
        let a = std::fs::read(realization_path(d1.path(), 0)).unwrap();
        let b = std::fs::read(realization_path(d2.path(), 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn training_never_reads_truth_columns() {
        // Corrupting every truth column must not change any model's
        // predictions.
        let cfg = surface_config(1, 0);
        let dir = tempfile::tempdir().unwrap();
        cmd_simulate(&cfg, dir.path()).unwrap();
        let data = load_realizations(dir.path(), &[0]).unwrap().pop().unwrap();
        let mut corrupted = data.clone();
        corrupted.y_counterfactual = Some(Array1::from_elem(data.n(), 1e9));
        corrupted.mu0 = Some(Array1::from_elem(data.n(), -1e9));
        corrupted.mu1 = Some(Array1::from_elem(data.n(), 1e9));
        for cell in [
            ModelCell::Ols,
            ModelCell::DoublyRobust {
                propensity_l2: 1e-3,
            },
            ModelCell::LassoRidge {
                lasso_lambda: 0.05,
                ridge_lambda: 1e-3,
            },
            ModelCell::Blr(BlrConfig {
                outer_iters: 3,
                ..BlrConfig::default()
            }),
            ModelCell::Bnn(BnnConfig {
                d_r: 1,
                d_o: 0,
                hidden_rep: 4,
                epochs: 20,
                ..BnnConfig::default()
            }),
        ] {
            let a = train_and_predict(&cell, &data, 5).unwrap();
            let b = train_and_predict(&cell, &corrupted, 5).unwrap();
            assert_eq!(a.y0, b.y0, "cell {cell:?} saw truth");
            assert_eq!(a.y1, b.y1, "cell {cell:?} saw truth");
        }
    }

    #[test]
    fn run_emits_per_realization_and_summary_rows() {
        let mut cfg = surface_config(3, 0);
        cfg.models.insert(
            "lr".to_string(),
            ModelSpec::LassoRidge(crate::config::LassoRidgeModelSpec {
                lasso_lambda_grid: vec![0.1],
                ridge_lambda_grid: vec![1e-3],
            }),
        );
        let dir = tempfile::tempdir().unwrap();
        cmd_simulate(&cfg, dir.path()).unwrap();
        let results = cmd_run(&cfg, dir.path()).unwrap();
        // Two models, three realizations each, plus one summary row per model.
        let summary_rows: Vec<_> = results
            .rows
            .iter()
            .filter(|r| r.realization.is_none())
            .collect();
        assert_eq!(summary_rows.len(), 2);
        assert_eq!(results.rows.len(), 2 * 3 + 2);
        let csv = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
        assert!(csv.contains("model,realization,eps_ite"));
        assert!(csv.contains(",summary,"));
    }

    #[test]
    fn summary_stderr_definition() {
        let values = [1.0, 2.0, 3.0];
        let (mean, se) = mean_stderr(&values);
        assert!((mean - 2.0).abs() < 1e-15);
        // Sample std = 1, so the standard error is 1/sqrt(3).
        assert!((se - 1.0 / 3.0f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn bound_command_reports_and_counts_violations() {
        let cfg = surface_config(2, 0);
        let dir = tempfile::tempdir().unwrap();
        cmd_simulate(&cfg, dir.path()).unwrap();
        let (rows, violations) = cmd_bound(&cfg, dir.path()).unwrap();
        assert_eq!(rows.len(), 2, "identity representation only");
        assert_eq!(violations, 0);
        assert!(dir.path().join("bound.csv").exists());

        // Corrupting the control Lipschitz constant to zero on a nonconstant
        // surface must produce at least one violation.
        let mut meta = Meta::load(dir.path()).unwrap();
        for r in meta.realizations.iter_mut() {
            r.k0 = 0.0;
            r.k1 = 0.0;
        }
        meta.save(dir.path()).unwrap();
        let (_, violations) = cmd_bound(&cfg, dir.path()).unwrap();
        assert!(violations > 0, "zeroed constants must break the chain");
    }

    #[test]
    fn bound_command_requires_meta() {
        let cfg = surface_config(1, 0);
        let dir = tempfile::tempdir().unwrap();
        cmd_simulate(&cfg, dir.path()).unwrap();
        std::fs::remove_file(dir.path().join("meta.toml")).unwrap();
        assert!(cmd_bound(&cfg, dir.path()).is_err());
    }

    fn tiny_news_config() -> ExperimentConfig {
        toml::from_str(
            r#"
[generator]
kind = "news"
n = 40
topics = 4
vocab = 30
outcome_scale = 50.0
kappa = 10.0
doc_length_mean = 20.0

[harness]
n_realizations = 2
master_seed = 3

[models.bnn_tiny]
kind = "bnn"
d_r = 1
d_o = 0
hidden_rep = 4
alpha_grid = [1.0]
epochs = 30
"#,
        )
        .unwrap()
    }

    #[test]
    fn news_meta_records_generator_constants() {
        let cfg = tiny_news_config();
        let dir = tempfile::tempdir().unwrap();
        cmd_simulate(&cfg, dir.path()).unwrap();
        let meta = Meta::load(dir.path()).unwrap();
        assert_eq!(meta.generator.kind, "news");
        assert_eq!(meta.generator.kappa, Some(10.0));
        assert_eq!(meta.generator.outcome_scale, Some(50.0));
        assert_eq!(meta.realizations.len(), 2);
    }

    #[test]
    fn sweep_emits_one_row_per_alpha_per_metric() {
        let cfg = tiny_news_config();
        let dir = tempfile::tempdir().unwrap();
        cmd_simulate(&cfg, dir.path()).unwrap();
        let table = cmd_sweep_alpha(&cfg, dir.path(), "bnn_tiny", &[0.0, 1.0]).unwrap();
        assert_eq!(table.len(), 2 * 4);
        let csv = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1 + 8);
        assert!(csv.starts_with("alpha,metric,mean,stderr"));
        // A single zero alpha is just a plain network run.
        let single = cmd_sweep_alpha(&cfg, dir.path(), "bnn_tiny", &[0.0]).unwrap();
        assert_eq!(single.len(), 4);
        // Sweeping a model without a balance penalty is an error.
        let mut cfg2 = cfg.clone();
        cfg2.models.insert("plain".to_string(), ModelSpec::Ols);
        assert!(cmd_sweep_alpha(&cfg2, dir.path(), "plain", &[0.0]).is_err());
    }

    #[test]
    fn failed_grid_cells_are_skipped() {
        // A negative lasso penalty makes that cell error; selection must
        // fall through to the valid cell and the run must succeed.
        let mut cfg = surface_config(2, 2);
        cfg.models.insert(
            "lr".to_string(),
            ModelSpec::LassoRidge(crate::config::LassoRidgeModelSpec {
                lasso_lambda_grid: vec![-1.0, 0.05],
                ridge_lambda_grid: vec![1e-3],
            }),
        );
        let dir = tempfile::tempdir().unwrap();
        cmd_simulate(&cfg, dir.path()).unwrap();
        let results = cmd_run(&cfg, dir.path()).unwrap();
        let selected = results
            .selected
            .iter()
            .find(|(name, _)| name == "lr")
            .map(|(_, p)| p.clone())
            .unwrap();
        assert!(
            selected.contains("lasso_lambda=0.05"),
            "selected {selected}"
        );
        // Per-realization rows exist with finite metrics.
        let ok_rows = results
            .rows
            .iter()
            .filter(|r| r.model == "lr" && r.realization.is_some() && r.metrics.is_some())
            .count();
        assert_eq!(ok_rows, 2);
    }
}
