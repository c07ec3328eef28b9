//! Balancing neural network: a fully connected ReLU network whose first
//! `d_r` layers build a representation of the covariates and whose remaining
//! `d_o` layers consume that representation concatenated with the treatment
//! indicator. Training minimizes
//!
//! ```text
//! mean squared factual error
//!   + alpha * disc(representation, treatment)
//!   + weight_decay * sum of squared weights (biases excluded)
//! ```
//!
//! with RMSProp on exact analytic gradients; the discrepancy penalty enters
//! the representation layers through its closed-form gradient. With
//! `d_o = 0` the head is linear in `[phi, t]` and the estimated effect is
//! constant; `d_o >= 1` admits heterogeneous effects.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use std::path::Path;

use crate::data::Dataset;
use crate::disc::{linear_disc, linear_disc_gradient};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// (fan_in, fan_out) weight matrix.
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

/// Network parameters; `rep_layers` run on covariates alone, `out_layers` on
/// the representation concatenated with the treatment indicator.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub rep_layers: Vec<Layer>,
    pub out_layers: Vec<Layer>,
    pub final_w: Array1<f64>,
    pub final_b: f64,
}

impl MlpParams {
    pub fn zeros_like(&self) -> MlpParams {
        MlpParams {
            rep_layers: self
                .rep_layers
                .iter()
                .map(|l| Layer {
                    w: Array2::zeros(l.w.dim()),
                    b: Array1::zeros(l.b.len()),
                })
                .collect(),
            out_layers: self
                .out_layers
                .iter()
                .map(|l| Layer {
                    w: Array2::zeros(l.w.dim()),
                    b: Array1::zeros(l.b.len()),
                })
                .collect(),
            final_w: Array1::zeros(self.final_w.len()),
            final_b: 0.0,
        }
    }

    /// All parameters in a fixed order; used by gradient checks and the
    /// bitwise determinism tests.
    pub fn flat(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for l in self.rep_layers.iter().chain(self.out_layers.iter()) {
            v.extend(l.w.iter());
            v.extend(l.b.iter());
        }
        v.extend(self.final_w.iter());
        v.push(self.final_b);
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        let mut it = flat.iter();
        for l in self.rep_layers.iter_mut().chain(self.out_layers.iter_mut()) {
            for w in l.w.iter_mut() {
                *w = *it.next().expect("flat vector too short");
            }
            for b in l.b.iter_mut() {
                *b = *it.next().expect("flat vector too short");
            }
        }
        for w in self.final_w.iter_mut() {
            *w = *it.next().expect("flat vector too short");
        }
        self.final_b = *it.next().expect("flat vector too short");
        assert!(it.next().is_none(), "flat vector too long");
    }
}

/// How training batches are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchMode {
    Full,
    Size(usize),
}

#[derive(Debug, Clone)]
pub struct BnnConfig {
    pub d_r: usize,
    pub d_o: usize,
    pub hidden_rep: usize,
    pub hidden_out: usize,
    pub alpha: f64,
    pub weight_decay: f64,
    pub lr: f64,
    pub rmsprop_decay: f64,
    pub rmsprop_eps: f64,
    pub epochs: usize,
    pub batch: BatchMode,
    pub seed: u64,
}

impl Default for BnnConfig {
    fn default() -> Self {
        BnnConfig {
            d_r: 2,
            d_o: 2,
            hidden_rep: 25,
            hidden_out: 25,
            alpha: 1.0,
            weight_decay: 1e-3,
            lr: 1e-3,
            rmsprop_decay: 0.9,
            rmsprop_eps: 1e-8,
            epochs: 3000,
            batch: BatchMode::Full,
            seed: 0,
        }
    }
}

impl BnnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_r > 0 && self.hidden_rep == 0 {
            return Err(Error::invalid("hidden_rep must be positive when d_r > 0"));
        }
        if self.d_o > 0 && self.hidden_out == 0 {
            return Err(Error::invalid("hidden_out must be positive when d_o > 0"));
        }
        if self.alpha < 0.0 || self.weight_decay < 0.0 {
            return Err(Error::invalid("alpha and weight_decay must be nonnegative"));
        }
        if self.lr <= 0.0 || self.rmsprop_eps <= 0.0 {
            return Err(Error::invalid("lr and rmsprop_eps must be positive"));
        }
        if !(self.rmsprop_decay > 0.0 && self.rmsprop_decay < 1.0) {
            return Err(Error::invalid("rmsprop_decay must lie in (0, 1)"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be >= 1"));
        }
        if let BatchMode::Size(0) = self.batch {
            return Err(Error::invalid("batch size must be >= 1"));
        }
        Ok(())
    }

    /// Glorot-style uniform initialization from the seeded init stream;
    /// biases start at zero.
    pub fn init_params(&self, d: usize) -> MlpParams {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(0);
        let mut layer = |fan_in: usize, fan_out: usize| -> Layer {
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            Layer {
                w: Array2::from_shape_fn((fan_in, fan_out), |_| rng.gen_range(-bound..bound)),
                b: Array1::zeros(fan_out),
            }
        };
        let mut rep_layers = Vec::with_capacity(self.d_r);
        let mut width = d;
        for _ in 0..self.d_r {
            rep_layers.push(layer(width, self.hidden_rep));
            width = self.hidden_rep;
        }
        let rep_width = width;
        let mut out_layers = Vec::with_capacity(self.d_o);
        let mut owidth = rep_width + 1;
        for _ in 0..self.d_o {
            out_layers.push(layer(owidth, self.hidden_out));
            owidth = self.hidden_out;
        }
        let bound = (6.0 / (owidth + 1) as f64).sqrt();
        let final_w = Array1::from_shape_fn(owidth, |_| rng.gen_range(-bound..bound));
        MlpParams {
            rep_layers,
            out_layers,
            final_w,
            final_b: 0.0,
        }
    }
}

fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Pre-activations and activations of every layer, kept for backprop.
struct ForwardCache {
    /// Rep-layer pre-activations.
    rep_z: Vec<Array2<f64>>,
    /// Rep-layer activations; `rep_a[0]` is the input.
    rep_a: Vec<Array2<f64>>,
    out_z: Vec<Array2<f64>>,
    /// Head activations; `out_a[0]` is `[phi, t]`.
    out_a: Vec<Array2<f64>>,
    y_hat: Array1<f64>,
}

fn forward_cache(
    params: &MlpParams,
    x: ArrayView2<f64>,
    t: ArrayView1<f64>,
) -> Result<ForwardCache> {
    let n = x.nrows();
    if t.len() != n {
        return Err(Error::invalid("covariates and treatment sizes disagree"));
    }
    if let Some(first) = params.rep_layers.first() {
        if first.w.nrows() != x.ncols() {
            return Err(Error::invalid(format!(
                "input width {} does not match first layer fan-in {}",
                x.ncols(),
                first.w.nrows()
            )));
        }
    }
    let mut rep_z = Vec::with_capacity(params.rep_layers.len());
    let mut rep_a = Vec::with_capacity(params.rep_layers.len() + 1);
    rep_a.push(x.to_owned());
    for l in &params.rep_layers {
        let z = rep_a.last().unwrap().dot(&l.w) + &l.b;
        rep_a.push(z.mapv(relu));
        rep_z.push(z);
    }
    let phi = rep_a.last().unwrap();
    let k = phi.ncols();
    let mut head_in = Array2::<f64>::zeros((n, k + 1));
    head_in.slice_mut(ndarray::s![.., ..k]).assign(phi);
    head_in.column_mut(k).assign(&t);

    let expect_in = params
        .out_layers
        .first()
        .map(|l| l.w.nrows())
        .unwrap_or(params.final_w.len());
    if expect_in != k + 1 {
        return Err(Error::invalid(format!(
            "head fan-in {expect_in} does not match representation width {k} + 1"
        )));
    }

    let mut out_z = Vec::with_capacity(params.out_layers.len());
    let mut out_a = Vec::with_capacity(params.out_layers.len() + 1);
    out_a.push(head_in);
    for l in &params.out_layers {
        let z = out_a.last().unwrap().dot(&l.w) + &l.b;
        out_a.push(z.mapv(relu));
        out_z.push(z);
    }
    let last = out_a.last().unwrap();
    if last.ncols() != params.final_w.len() {
        return Err(Error::invalid("final layer width mismatch"));
    }
    let y_hat = last.dot(&params.final_w) + params.final_b;
    Ok(ForwardCache {
        rep_z,
        rep_a,
        out_z,
        out_a,
        y_hat,
    })
}

/// Forward pass: the representation and the outcome prediction.
pub fn bnn_forward(
    params: &MlpParams,
    x: ArrayView2<f64>,
    t: ArrayView1<f64>,
) -> Result<(Array2<f64>, Array1<f64>)> {
    let cache = forward_cache(params, x, t)?;
    let phi = cache.rep_a.last().unwrap().clone();
    Ok((phi, cache.y_hat))
}

fn weight_decay_term(params: &MlpParams, weight_decay: f64) -> f64 {
    if weight_decay == 0.0 {
        return 0.0;
    }
    let mut sum = 0.0;
    for l in params.rep_layers.iter().chain(params.out_layers.iter()) {
        sum += l.w.iter().map(|w| w * w).sum::<f64>();
    }
    sum += params.final_w.iter().map(|w| w * w).sum::<f64>();
    weight_decay * sum
}

fn batch_has_both_groups(t: ArrayView1<f64>) -> bool {
    let n1 = t.iter().filter(|&&ti| ti == 1.0).count();
    n1 > 0 && n1 < t.len()
}

/// Training loss: mean squared factual error, discrepancy penalty on the
/// representation, and weight decay (biases excluded).
pub fn bnn_loss(
    params: &MlpParams,
    x: ArrayView2<f64>,
    t: ArrayView1<f64>,
    y: ArrayView1<f64>,
    alpha: f64,
    weight_decay: f64,
) -> Result<f64> {
    let cache = forward_cache(params, x, t)?;
    loss_from_cache(params, &cache, t, y, alpha, weight_decay)
}

fn loss_from_cache(
    params: &MlpParams,
    cache: &ForwardCache,
    t: ArrayView1<f64>,
    y: ArrayView1<f64>,
    alpha: f64,
    weight_decay: f64,
) -> Result<f64> {
    let n = y.len();
    let mse = cache
        .y_hat
        .iter()
        .zip(y.iter())
        .map(|(p, yi)| (p - yi) * (p - yi))
        .sum::<f64>()
        / n as f64;
    let mut loss = mse + weight_decay_term(params, weight_decay);
    if alpha != 0.0 {
        if !batch_has_both_groups(t) {
            return Err(Error::DegenerateTreatment(
                "batch must contain both groups".to_string(),
            ));
        }
        let phi = cache.rep_a.last().unwrap();
        loss += alpha * linear_disc(phi.view(), t)?.value;
    }
    Ok(loss)
}

/// Exact analytic gradient of [`bnn_loss`], shaped like the parameters.
pub fn bnn_grad(
    params: &MlpParams,
    x: ArrayView2<f64>,
    t: ArrayView1<f64>,
    y: ArrayView1<f64>,
    alpha: f64,
    weight_decay: f64,
) -> Result<MlpParams> {
    let cache = forward_cache(params, x, t)?;
    if alpha != 0.0 && !batch_has_both_groups(t) {
        return Err(Error::DegenerateTreatment(
            "batch must contain both groups".to_string(),
        ));
    }
    let n = y.len();
    let nf = n as f64;
    let mut grads = params.zeros_like();

    // Squared-error head.
    let delta_y = (&cache.y_hat - &y).mapv(|r| 2.0 * r / nf);
    let last = cache.out_a.last().unwrap();
    grads.final_w = last.t().dot(&delta_y);
    grads.final_b = delta_y.sum();

    // n x width running error signal.
    let mut delta = {
        let width = params.final_w.len();
        let mut d = Array2::<f64>::zeros((n, width));
        for i in 0..n {
            for j in 0..width {
                d[[i, j]] = delta_y[i] * params.final_w[j];
            }
        }
        d
    };

    for (m, layer) in params.out_layers.iter().enumerate().rev() {
        let z = &cache.out_z[m];
        let mut dz = delta;
        dz.zip_mut_with(z, |dv, &zv| {
            if zv <= 0.0 {
                *dv = 0.0;
            }
        });
        grads.out_layers[m].w = cache.out_a[m].t().dot(&dz);
        grads.out_layers[m].b = dz.sum_axis(Axis(0));
        delta = dz.dot(&layer.w.t());
    }

    // Split the head signal: the representation block continues down, the
    // treatment column stops (t is an input).
    let k = cache.rep_a.last().unwrap().ncols();
    let mut delta_phi = delta.slice(ndarray::s![.., ..k]).to_owned();
    if alpha != 0.0 {
        let phi = cache.rep_a.last().unwrap();
        let disc_grad = linear_disc_gradient(phi.view(), t)?;
        delta_phi.scaled_add(alpha, &disc_grad);
    }

    let mut delta = delta_phi;
    for (l, layer) in params.rep_layers.iter().enumerate().rev() {
        let z = &cache.rep_z[l];
        let mut dz = delta;
        dz.zip_mut_with(z, |dv, &zv| {
            if zv <= 0.0 {
                *dv = 0.0;
            }
        });
        grads.rep_layers[l].w = cache.rep_a[l].t().dot(&dz);
        grads.rep_layers[l].b = dz.sum_axis(Axis(0));
        delta = dz.dot(&layer.w.t());
    }

    if weight_decay != 0.0 {
        for (g, p) in grads
            .rep_layers
            .iter_mut()
            .zip(params.rep_layers.iter())
            .chain(grads.out_layers.iter_mut().zip(params.out_layers.iter()))
        {
            g.w.scaled_add(2.0 * weight_decay, &p.w);
        }
        grads
            .final_w
            .scaled_add(2.0 * weight_decay, &params.final_w);
    }
    Ok(grads)
}

/// One RMSProp update: `s' = rho s + (1 - rho) g^2`,
/// `p' = p - lr g / (sqrt(s') + eps)`, elementwise.
pub fn rmsprop_step(
    params: &MlpParams,
    grads: &MlpParams,
    state: &MlpParams,
    lr: f64,
    rho: f64,
    eps: f64,
) -> (MlpParams, MlpParams) {
    let mut new_params = params.clone();
    let mut new_state = state.clone();
    let mut flat_p = params.flat();
    let flat_g = grads.flat();
    let mut flat_s = state.flat();
    for ((p, g), s) in flat_p.iter_mut().zip(flat_g.iter()).zip(flat_s.iter_mut()) {
        *s = rho * *s + (1.0 - rho) * g * g;
        *p -= lr * g / (s.sqrt() + eps);
    }
    new_params.set_flat(&flat_p);
    new_state.set_flat(&flat_s);
    (new_params, new_state)
}

/// Per-epoch loss and discrepancy on the full training sample.
#[derive(Debug, Clone, Default)]
pub struct TrainHistory {
    pub loss: Vec<f64>,
    pub disc: Vec<f64>,
}

impl TrainHistory {
    pub fn final_disc(&self) -> f64 {
        *self.disc.last().unwrap_or(&f64::NAN)
    }
}

/// Evenly interleaves the shuffled treated and control index lists so every
/// contiguous batch stays mixed.
fn stratified_order(t: ArrayView1<f64>, rng: &mut ChaCha8Rng) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut treated: Vec<usize> = (0..t.len()).filter(|&i| t[i] == 1.0).collect();
    let mut control: Vec<usize> = (0..t.len()).filter(|&i| t[i] == 0.0).collect();
    treated.shuffle(rng);
    control.shuffle(rng);
    let (nt, nc) = (treated.len(), control.len());
    let mut merged = Vec::with_capacity(nt + nc);
    let (mut it, mut ic) = (0usize, 0usize);
    while it < nt || ic < nc {
        let ft = (it as f64 + 1.0) / (nt as f64 + 1.0);
        let fc = (ic as f64 + 1.0) / (nc as f64 + 1.0);
        if it < nt && (ic >= nc || ft <= fc) {
            merged.push(treated[it]);
            it += 1;
        } else {
            merged.push(control[ic]);
            ic += 1;
        }
    }
    merged
}

/// Trains the network with RMSProp; deterministic given the seed (separate
/// fixed streams drive initialization and shuffling). Returns the final
/// parameters with the per-epoch history.
pub fn bnn_train(data: &Dataset, cfg: &BnnConfig) -> Result<(MlpParams, TrainHistory)> {
    cfg.validate()?;
    if !batch_has_both_groups(data.treatment.view()) {
        return Err(Error::DegenerateTreatment(
            "bnn_train needs both groups nonempty".to_string(),
        ));
    }
    let mut params = cfg.init_params(data.d());
    let mut state = params.zeros_like();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(1);
    let mut history = TrainHistory::default();
    let x = data.covariates.view();
    let t = data.treatment.view();
    let y = data.y_factual.view();
    for epoch in 0..cfg.epochs {
        match cfg.batch {
            BatchMode::Full => {
                let grads = bnn_grad(&params, x, t, y, cfg.alpha, cfg.weight_decay)?;
                let (p, s) = rmsprop_step(
                    &params,
                    &grads,
                    &state,
                    cfg.lr,
                    cfg.rmsprop_decay,
                    cfg.rmsprop_eps,
                );
                params = p;
                state = s;
            }
            BatchMode::Size(b) => {
                let order = stratified_order(t, &mut shuffle_rng);
                for chunk in order.chunks(b) {
                    let xb = data.covariates.select(Axis(0), chunk);
                    let tb = Array1::from_iter(chunk.iter().map(|&i| data.treatment[i]));
                    let yb = Array1::from_iter(chunk.iter().map(|&i| data.y_factual[i]));
                    let grads = bnn_grad(
                        &params,
                        xb.view(),
                        tb.view(),
                        yb.view(),
                        cfg.alpha,
                        cfg.weight_decay,
                    )?;
                    let (p, s) = rmsprop_step(
                        &params,
                        &grads,
                        &state,
                        cfg.lr,
                        cfg.rmsprop_decay,
                        cfg.rmsprop_eps,
                    );
                    params = p;
                    state = s;
                }
            }
        }
        let cache = forward_cache(&params, x, t)?;
        let loss = loss_from_cache(&params, &cache, t, y, cfg.alpha, cfg.weight_decay)?;
        if !loss.is_finite() {
            return Err(Error::Numerical(format!(
                "bnn loss became non-finite at epoch {epoch}"
            )));
        }
        let disc = linear_disc(cache.rep_a.last().unwrap().view(), t)?.value;
        history.loss.push(loss);
        history.disc.push(disc);
    }
    Ok((params, history))
}

/// Predictions with the treatment forced to 0 and to 1.
pub fn bnn_predict_both(
    params: &MlpParams,
    x: ArrayView2<f64>,
) -> Result<(Array1<f64>, Array1<f64>)> {
    let n = x.nrows();
    let zeros = Array1::zeros(n);
    let ones = Array1::ones(n);
    let (_, y0) = bnn_forward(params, x, zeros.view())?;
    let (_, y1) = bnn_forward(params, x, ones.view())?;
    Ok((y0, y1))
}

/// Plain-text layered dump; layer sizes first, then row-major weights, each
/// real printed in its shortest exact form.
pub fn save_bnn(path: &Path, params: &MlpParams) -> Result<()> {
    let mut out = String::from("bnn v1\n");
    writeln!(out, "rep {}", params.rep_layers.len()).unwrap();
    writeln!(out, "out {}", params.out_layers.len()).unwrap();
    let dump_layer = |tag: &str, idx: usize, l: &Layer, out: &mut String| {
        writeln!(out, "layer {tag}{idx} {} {}", l.w.nrows(), l.w.ncols()).unwrap();
        for row in l.w.rows() {
            let line = row
                .iter()
                .map(|v| format!("{v}"))
                .collect::<Vec<_>>()
                .join(" ");
            writeln!(out, "{line}").unwrap();
        }
        let bias =
            l.b.iter()
                .map(|v| format!("{v}"))
                .collect::<Vec<_>>()
                .join(" ");
        writeln!(out, "{bias}").unwrap();
    };
    for (i, l) in params.rep_layers.iter().enumerate() {
        dump_layer("rep", i, l, &mut out);
    }
    for (i, l) in params.out_layers.iter().enumerate() {
        dump_layer("out", i, l, &mut out);
    }
    writeln!(out, "final {}", params.final_w.len()).unwrap();
    let fw = params
        .final_w
        .iter()
        .map(|v| format!("{v}"))
        .collect::<Vec<_>>()
        .join(" ");
    writeln!(out, "{fw}").unwrap();
    writeln!(out, "final_bias {}", params.final_b).unwrap();
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads a dump written by [`save_bnn`].
pub fn load_bnn(path: &Path) -> Result<MlpParams> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let bad = |msg: &str| Error::Parse(format!("bnn dump: {msg}"));
    if lines.next() != Some("bnn v1") {
        return Err(bad("missing header"));
    }
    let parse_count = |line: Option<&str>, key: &str| -> Result<usize> {
        let line = line.ok_or_else(|| bad("truncated"))?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(key) {
            return Err(bad(&format!("expected '{key}'")));
        }
        parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad(&format!("bad '{key}' count")))
    };
    let n_rep = parse_count(lines.next(), "rep")?;
    let n_out = parse_count(lines.next(), "out")?;
    let parse_row = |line: Option<&str>, want: usize| -> Result<Vec<f64>> {
        let vals: Vec<f64> = line
            .ok_or_else(|| bad("truncated"))?
            .split_whitespace()
            .map(|s| s.parse::<f64>().map_err(|_| bad("bad real")))
            .collect::<Result<_>>()?;
        if vals.len() != want {
            return Err(bad("row width mismatch"));
        }
        Ok(vals)
    };
    let read_layer = |lines: &mut std::str::Lines| -> Result<Layer> {
        let header = lines.next().ok_or_else(|| bad("truncated"))?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some("layer") {
            return Err(bad("expected 'layer'"));
        }
        let _name = parts.next();
        let rows: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("bad rows"))?;
        let cols: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("bad cols"))?;
        let mut w = Array2::zeros((rows, cols));
        for r in 0..rows {
            let vals = parse_row(lines.next(), cols)?;
            for (c, v) in vals.into_iter().enumerate() {
                w[[r, c]] = v;
            }
        }
        let b = Array1::from(parse_row(lines.next(), cols)?);
        Ok(Layer { w, b })
    };
    let mut rep_layers = Vec::with_capacity(n_rep);
    for _ in 0..n_rep {
        rep_layers.push(read_layer(&mut lines)?);
    }
    let mut out_layers = Vec::with_capacity(n_out);
    for _ in 0..n_out {
        out_layers.push(read_layer(&mut lines)?);
    }
    let n_final = parse_count(lines.next(), "final")?;
    let final_w = Array1::from(parse_row(lines.next(), n_final)?);
    let final_b_line = lines.next().ok_or_else(|| bad("truncated"))?;
    let mut parts = final_b_line.split_whitespace();
    if parts.next() != Some("final_bias") {
        return Err(bad("expected 'final_bias'"));
    }
    let final_b = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| bad("bad final bias"))?;
    Ok(MlpParams {
        rep_layers,
        out_layers,
        final_w,
        final_b,
    })
}
