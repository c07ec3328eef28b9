//! Balancing linear regression: a simplex-constrained diagonal feature
//! reweighting trained jointly with a linear hypothesis by alternating
//! subgradient descent, then finalized with a ridge stage.
//!
//! The training objective combines three terms over the reweighted design
//! `[w . x_i, t_i]`: the mean absolute factual error, `alpha` times the
//! closed-form discrepancy of the reweighted covariates, and `gamma` times a
//! nearest-neighbor term that pulls counterfactual predictions towards the
//! closest observed outcome from the opposite group.

use ndarray::{Array1, Array2, ArrayView1};
use std::fmt::Write as _;
use std::path::Path;

use crate::data::{Dataset, NearestNeighborMap};
use crate::disc::{check_simplex, weighted_linear_disc};
use crate::error::{Error, Result};
use crate::linear::{ridge_fit, LinearModel};

/// Diagonal reweighting constrained to the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct ReweightingRepresentation {
    pub w: Array1<f64>,
}

impl ReweightingRepresentation {
    pub fn uniform(d: usize) -> Self {
        ReweightingRepresentation {
            w: Array1::from_elem(d, 1.0 / d as f64),
        }
    }

    /// Validates simplex membership within 1e-9.
    pub fn validate(&self) -> Result<()> {
        check_simplex(self.w.view(), 1e-9)
    }

    /// The reweighted covariate matrix `X diag(w)`.
    pub fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut out = x.clone();
        for mut row in out.rows_mut() {
            row *= &self.w;
        }
        out
    }
}

/// Hyperparameters and budgets for [`blr_train`].
#[derive(Debug, Clone)]
pub struct BlrConfig {
    /// Weight of the discrepancy penalty.
    pub alpha: f64,
    /// Weight of the nearest-neighbor counterfactual term.
    pub gamma: f64,
    /// Ridge penalty of the final stage.
    pub lambda: f64,
    pub outer_iters: usize,
    pub h_iters: usize,
    pub w_iters: usize,
    pub step0_h: f64,
    pub step0_w: f64,
    pub seed: u64,
}

impl Default for BlrConfig {
    fn default() -> Self {
        BlrConfig {
            alpha: 1.0,
            gamma: 1.0,
            lambda: 1e-3,
            outer_iters: 50,
            h_iters: 20,
            w_iters: 20,
            step0_h: 0.1,
            step0_w: 0.05,
            seed: 0,
        }
    }
}

impl BlrConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alpha < 0.0 || self.gamma < 0.0 {
            return Err(Error::invalid("alpha and gamma must be nonnegative"));
        }
        if self.lambda <= 0.0 {
            return Err(Error::invalid("lambda must be positive"));
        }
        if self.outer_iters == 0 || self.h_iters == 0 || self.w_iters == 0 {
            return Err(Error::invalid("iteration budgets must be >= 1"));
        }
        if self.step0_h <= 0.0 || self.step0_w <= 0.0 {
            return Err(Error::invalid("step sizes must be positive"));
        }
        Ok(())
    }
}

/// The training objective: mean absolute factual error, plus
/// `alpha * disc`, plus the `gamma`-weighted nearest-neighbor term.
pub fn blr_objective(
    w: &ReweightingRepresentation,
    h: ArrayView1<f64>,
    data: &Dataset,
    nn: &NearestNeighborMap,
    alpha: f64,
    gamma: f64,
) -> Result<f64> {
    let n = data.n();
    let d = data.d();
    if h.len() != d + 1 {
        return Err(Error::invalid(format!(
            "hypothesis has length {}, expected {}",
            h.len(),
            d + 1
        )));
    }
    let (h_feat, h_t) = (h.slice(ndarray::s![..d]), h[d]);
    let mut factual = 0.0;
    let mut neighbor = 0.0;
    for i in 0..n {
        let wx: f64 = data
            .covariates
            .row(i)
            .iter()
            .zip(w.w.iter())
            .zip(h_feat.iter())
            .map(|((x, wj), hj)| x * wj * hj)
            .sum();
        let t = data.treatment[i];
        factual += (wx + h_t * t - data.y_factual[i]).abs();
        if gamma != 0.0 {
            let cf_pred = wx + h_t * (1.0 - t);
            neighbor += (cf_pred - data.y_factual[nn.j[i]]).abs();
        }
    }
    let mut value = factual / n as f64 + gamma * neighbor / n as f64;
    if alpha != 0.0 {
        value += alpha
            * weighted_linear_disc(data.covariates.view(), data.treatment.view(), w.w.view())?;
    }
    Ok(value)
}

/// Euclidean projection onto the probability simplex by sort and threshold.
pub fn simplex_project(v: ArrayView1<f64>) -> ReweightingRepresentation {
    let mut sorted: Vec<f64> = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    let mut rho = 0;
    for (k, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - 1.0) / (k + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
            rho = k + 1;
        }
    }
    debug_assert!(rho > 0);
    let w = v.mapv(|x| (x - theta).max(0.0));
    ReweightingRepresentation { w }
}

struct Subgradients {
    h: Array1<f64>,
    w: Array1<f64>,
}

/// Subgradients of the objective at (w, h). The discrepancy part enters only
/// the w block.
fn subgradients(
    w: &ReweightingRepresentation,
    h: &Array1<f64>,
    data: &Dataset,
    nn: &NearestNeighborMap,
    alpha: f64,
    gamma: f64,
) -> Subgradients {
    let n = data.n();
    let d = data.d();
    let nf = n as f64;
    let h_feat = h.slice(ndarray::s![..d]).to_owned();
    let h_t = h[d];
    let mut gh = Array1::<f64>::zeros(d + 1);
    let mut gw = Array1::<f64>::zeros(d);
    let sign = |r: f64| {
        if r > 0.0 {
            1.0
        } else if r < 0.0 {
            -1.0
        } else {
            0.0
        }
    };
    for i in 0..n {
        let row = data.covariates.row(i);
        let wx: f64 = row
            .iter()
            .zip(w.w.iter())
            .zip(h_feat.iter())
            .map(|((x, wj), hj)| x * wj * hj)
            .sum();
        let t = data.treatment[i];
        let s_f = sign(wx + h_t * t - data.y_factual[i]);
        let s_n = if gamma != 0.0 {
            sign(wx + h_t * (1.0 - t) - data.y_factual[nn.j[i]])
        } else {
            0.0
        };
        for j in 0..d {
            let xw = row[j] * w.w[j];
            gh[j] += (s_f + gamma * s_n) * xw / nf;
            gw[j] += (s_f + gamma * s_n) * h_feat[j] * row[j] / nf;
        }
        gh[d] += (s_f * t + gamma * s_n * (1.0 - t)) / nf;
    }
    if alpha != 0.0 {
        // d/dw of |c| + sqrt(c^2 + ||w . u||^2) is w_j u_j^2 / sqrt(...),
        // zero at w . u = 0.
        let (p, mu0, mu1) = group_means_raw(data);
        let u = &mu1 * p - &mu0 * (1.0 - p);
        let wu = &w.w * &u;
        let norm2 = wu.dot(&wu);
        if norm2 > 0.0 {
            let c = p - 0.5;
            let denom = (c * c + norm2).sqrt();
            for j in 0..d {
                gw[j] += alpha * w.w[j] * u[j] * u[j] / denom;
            }
        }
    }
    Subgradients { h: gh, w: gw }
}

fn group_means_raw(data: &Dataset) -> (f64, Array1<f64>, Array1<f64>) {
    let d = data.d();
    let mut mu1 = Array1::<f64>::zeros(d);
    let mut mu0 = Array1::<f64>::zeros(d);
    let mut n1 = 0usize;
    for i in 0..data.n() {
        if data.is_treated(i) {
            mu1 += &data.covariates.row(i);
            n1 += 1;
        } else {
            mu0 += &data.covariates.row(i);
        }
    }
    let n0 = data.n() - n1;
    (
        n1 as f64 / data.n() as f64,
        mu0 / n0.max(1) as f64,
        mu1 / n1.max(1) as f64,
    )
}

/// Alternating subgradient descent on the objective; returns the `(w, h)`
/// pair with the best objective seen. Initialization is the uniform simplex
/// point and the zero hypothesis, so training is deterministic.
pub fn blr_train(
    data: &Dataset,
    nn: &NearestNeighborMap,
    cfg: &BlrConfig,
) -> Result<(ReweightingRepresentation, Array1<f64>)> {
    cfg.validate()?;
    let n_t = data.treatment.sum() as usize;
    if n_t == 0 || n_t == data.n() {
        return Err(Error::DegenerateTreatment(
            "blr_train needs both groups nonempty".to_string(),
        ));
    }
    let d = data.d();
    let mut w = ReweightingRepresentation::uniform(d);
    let mut h = Array1::<f64>::zeros(d + 1);
    let mut best_w = w.clone();
    let mut best_h = h.clone();
    let mut best_obj = blr_objective(&w, h.view(), data, nn, cfg.alpha, cfg.gamma)?;
    let mut h_steps = 0usize;
    let mut w_steps = 0usize;
    for round in 0..cfg.outer_iters {
        for _ in 0..cfg.h_iters {
            let g = subgradients(&w, &h, data, nn, cfg.alpha, cfg.gamma);
            h_steps += 1;
            h.scaled_add(-cfg.step0_h / (h_steps as f64).sqrt(), &g.h);
            let obj = blr_objective(&w, h.view(), data, nn, cfg.alpha, cfg.gamma)?;
            if !obj.is_finite() {
                return Err(Error::Numerical(format!(
                    "blr objective diverged in round {round} (h update)"
                )));
            }
            if obj < best_obj {
                best_obj = obj;
                best_w = w.clone();
                best_h = h.clone();
            }
        }
        for _ in 0..cfg.w_iters {
            let g = subgradients(&w, &h, data, nn, cfg.alpha, cfg.gamma);
            w_steps += 1;
            let raw = &w.w - &g.w.mapv(|v| cfg.step0_w / (w_steps as f64).sqrt() * v);
            w = simplex_project(raw.view());
            let obj = blr_objective(&w, h.view(), data, nn, cfg.alpha, cfg.gamma)?;
            if !obj.is_finite() {
                return Err(Error::Numerical(format!(
                    "blr objective diverged in round {round} (w update)"
                )));
            }
            if obj < best_obj {
                best_obj = obj;
                best_w = w.clone();
                best_h = h.clone();
            }
        }
    }
    Ok((best_w, best_h))
}

/// Ridge refit of the hypothesis on the reweighted design `[w . x, t]`
/// against factual outcomes.
pub fn blr_finalize(
    data: &Dataset,
    w: &ReweightingRepresentation,
    lambda: f64,
) -> Result<LinearModel> {
    let design = design_matrix(&data.covariates, &data.treatment, w);
    ridge_fit(design.view(), data.y_factual.view(), lambda)
}

fn design_matrix(x: &Array2<f64>, t: &Array1<f64>, w: &ReweightingRepresentation) -> Array2<f64> {
    let (n, d) = (x.nrows(), x.ncols());
    let mut design = Array2::<f64>::zeros((n, d + 1));
    for i in 0..n {
        for j in 0..d {
            design[[i, j]] = x[[i, j]] * w.w[j];
        }
        design[[i, d]] = t[i];
    }
    design
}

/// Predictions for both treatment arms; the arms differ only through the
/// treatment coefficient, so the estimated effect is constant.
pub fn blr_predict_both(
    model: &LinearModel,
    w: &ReweightingRepresentation,
    x: &Array2<f64>,
) -> Result<(Array1<f64>, Array1<f64>)> {
    let d = x.ncols();
    if model.weights.len() != d + 1 || w.w.len() != d {
        return Err(Error::invalid("model/representation widths disagree"));
    }
    let n = x.nrows();
    let zeros = Array1::zeros(n);
    let ones = Array1::ones(n);
    let y0 = model.predict(design_matrix(x, &zeros, w).view());
    let y1 = model.predict(design_matrix(x, &ones, w).view());
    Ok((y0, y1))
}

/// Serializes `(w, model, cfg)` as a plain-text key-value dump. Every real
/// is printed in the shortest form that parses back to the identical 64-bit
/// value.
pub fn save_blr(
    path: &Path,
    w: &ReweightingRepresentation,
    model: &LinearModel,
    cfg: &BlrConfig,
) -> Result<()> {
    let mut out = String::from("blr v1\n");
    let join = |v: &Array1<f64>| {
        v.iter()
            .map(|x| format!("{x}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    writeln!(out, "w {}", join(&w.w)).unwrap();
    writeln!(out, "weights {}", join(&model.weights)).unwrap();
    writeln!(out, "intercept {}", model.intercept).unwrap();
    writeln!(out, "objective {}", model.objective_value).unwrap();
    writeln!(out, "alpha {}", cfg.alpha).unwrap();
    writeln!(out, "gamma {}", cfg.gamma).unwrap();
    writeln!(out, "lambda {}", cfg.lambda).unwrap();
    writeln!(
        out,
        "iters {} {} {}",
        cfg.outer_iters, cfg.h_iters, cfg.w_iters
    )
    .unwrap();
    writeln!(out, "steps {} {}", cfg.step0_h, cfg.step0_w).unwrap();
    writeln!(out, "seed {}", cfg.seed).unwrap();
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads a dump written by [`save_blr`].
pub fn load_blr(path: &Path) -> Result<(ReweightingRepresentation, LinearModel, BlrConfig)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some("blr v1") {
        return Err(Error::Parse("not a blr v1 dump".to_string()));
    }
    let mut fields: std::collections::HashMap<&str, Vec<&str>> = Default::default();
    for line in lines {
        let mut parts = line.split_whitespace();
        if let Some(key) = parts.next() {
            fields.insert(key, parts.collect());
        }
    }
    let get = |key: &str| -> Result<Vec<f64>> {
        fields
            .get(key)
            .ok_or_else(|| Error::Parse(format!("missing key '{key}'")))?
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad value '{s}' under '{key}'")))
            })
            .collect()
    };
    let scalar = |key: &str| -> Result<f64> {
        let v = get(key)?;
        if v.len() != 1 {
            return Err(Error::Parse(format!("key '{key}' is not scalar")));
        }
        Ok(v[0])
    };
    let w = ReweightingRepresentation {
        w: Array1::from(get("w")?),
    };
    let model = LinearModel {
        weights: Array1::from(get("weights")?),
        intercept: scalar("intercept")?,
        objective_value: scalar("objective")?,
    };
    let iters = get("iters")?;
    let steps = get("steps")?;
    if iters.len() != 3 || steps.len() != 2 {
        return Err(Error::Parse("malformed iters/steps".to_string()));
    }
    let cfg = BlrConfig {
        alpha: scalar("alpha")?,
        gamma: scalar("gamma")?,
        lambda: scalar("lambda")?,
        outer_iters: iters[0] as usize,
        h_iters: iters[1] as usize,
        w_iters: iters[2] as usize,
        step0_h: steps[0],
        step0_w: steps[1],
        seed: scalar("seed")? as u64,
    };
    Ok((w, model, cfg))
}
