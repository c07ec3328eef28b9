//! Semi-synthetic benchmark generators.
//!
//! The news generator samples documents from a topic space: each unit is a
//! bag of word counts, its opinion outcome is the similarity between the
//! document's topic mixture and two device centroids, and the viewing-device
//! assignment is softmax-biased towards the preferred device. The log-linear
//! surface generator overlays a nonlinear control response and a linear
//! treated response on user-supplied covariates.
//!
//! Both generators export Lipschitz constants of their outcome functions for
//! the bound diagnostics; the dataset itself never reveals them.

use ndarray::{Array1, Array2};
use rand::distributions::WeightedIndex;
use rand::prelude::Distribution;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use std::path::Path;

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Dirichlet concentration for topic-word columns and document mixtures.
const TOPIC_ALPHA: f64 = 0.1;
const DOC_ALPHA: f64 = 0.1;
/// Pool size for the desktop centroid (average topic representation).
const CENTROID_POOL: usize = 500;

/// Word distributions per topic plus the two device centroids in topic
/// space.
#[derive(Debug, Clone)]
pub struct TopicSpace {
    /// V x K column-stochastic matrix.
    pub topics: Array2<f64>,
    /// Desktop centroid: average topic representation of a document pool.
    pub z_c0: Array1<f64>,
    /// Mobile centroid: topic distribution of one random document.
    pub z_c1: Array1<f64>,
}

/// True Lipschitz constants of the potential-outcome functions, exported for
/// bound diagnostics only.
#[derive(Debug, Clone, Copy)]
pub struct GeneratorConstants {
    pub k0: f64,
    pub k1: f64,
}

fn dirichlet(alpha: f64, dim: usize, rng: &mut ChaCha8Rng) -> Array1<f64> {
    use rand_distr::Gamma;
    let gamma = Gamma::new(alpha, 1.0).expect("valid gamma shape");
    let mut v = Array1::from_shape_fn(dim, |_| gamma.sample(rng));
    let sum = v.sum();
    if sum <= 0.0 {
        // All draws underflowed; fall back to a uniform point.
        return Array1::from_elem(dim, 1.0 / dim as f64);
    }
    v /= sum;
    v
}

fn check_column_stochastic(topics: &Array2<f64>) -> Result<()> {
    for (k, col) in topics.columns().into_iter().enumerate() {
        let sum = col.sum();
        if (sum - 1.0).abs() > 1e-9 || col.iter().any(|&p| p < 0.0) {
            return Err(Error::invalid(format!(
                "topic column {k} is not a distribution (sum {sum})"
            )));
        }
    }
    Ok(())
}

fn check_simplex_vec(name: &str, v: &Array1<f64>) -> Result<()> {
    let sum = v.sum();
    if (sum - 1.0).abs() > 1e-9 || v.iter().any(|&p| p < 0.0) {
        return Err(Error::invalid(format!("{name} is off the simplex")));
    }
    Ok(())
}

impl TopicSpace {
    /// Samples a synthetic topic space: topic-word columns from a symmetric
    /// Dirichlet, the mobile centroid from one random document mixture, and
    /// the desktop centroid as the average mixture of a document pool.
    pub fn synthetic(n_topics: usize, vocab: usize, seed: u64) -> Result<TopicSpace> {
        if n_topics == 0 || vocab == 0 || n_topics > vocab {
            return Err(Error::invalid("need 1 <= K <= V"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(0);
        let mut topics = Array2::zeros((vocab, n_topics));
        for k in 0..n_topics {
            let col = dirichlet(TOPIC_ALPHA, vocab, &mut rng);
            topics.column_mut(k).assign(&col);
        }
        let z_c1 = dirichlet(DOC_ALPHA, n_topics, &mut rng);
        let mut z_c0 = Array1::zeros(n_topics);
        for _ in 0..CENTROID_POOL {
            z_c0 += &dirichlet(DOC_ALPHA, n_topics, &mut rng);
        }
        z_c0 /= CENTROID_POOL as f64;
        let space = TopicSpace { topics, z_c0, z_c1 };
        space.validate()?;
        Ok(space)
    }

    /// Builds a space around a topic matrix loaded from disk; centroids are
    /// sampled the same way as in [`TopicSpace::synthetic`].
    pub fn from_matrix(topics: Array2<f64>, seed: u64) -> Result<TopicSpace> {
        check_column_stochastic(&topics)?;
        let n_topics = topics.ncols();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(0);
        let z_c1 = dirichlet(DOC_ALPHA, n_topics, &mut rng);
        let mut z_c0 = Array1::zeros(n_topics);
        for _ in 0..CENTROID_POOL {
            z_c0 += &dirichlet(DOC_ALPHA, n_topics, &mut rng);
        }
        z_c0 /= CENTROID_POOL as f64;
        Ok(TopicSpace { topics, z_c0, z_c1 })
    }

    pub fn validate(&self) -> Result<()> {
        check_column_stochastic(&self.topics)?;
        check_simplex_vec("z_c0", &self.z_c0)?;
        check_simplex_vec("z_c1", &self.z_c1)?;
        Ok(())
    }

    pub fn vocab(&self) -> usize {
        self.topics.nrows()
    }

    pub fn n_topics(&self) -> usize {
        self.topics.ncols()
    }
}

/// Writes a topic matrix as dense decimal text with a one-line `V K` header.
pub fn save_topic_matrix(path: &Path, topics: &Array2<f64>) -> Result<()> {
    let mut out = String::new();
    writeln!(out, "{} {}", topics.nrows(), topics.ncols()).unwrap();
    for row in topics.rows() {
        let line = row
            .iter()
            .map(|v| format!("{v}"))
            .collect::<Vec<_>>()
            .join(" ");
        writeln!(out, "{line}").unwrap();
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads a matrix written by [`save_topic_matrix`] and validates that the
/// columns are distributions.
pub fn load_topic_matrix(path: &Path) -> Result<Array2<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty topic file".to_string()))?;
    let mut parts = header.split_whitespace();
    let v: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Parse("bad V in topic header".to_string()))?;
    let k: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Parse("bad K in topic header".to_string()))?;
    let mut topics = Array2::zeros((v, k));
    for r in 0..v {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("topic file truncated at row {r}")))?;
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad value in topic row {r}")))
            })
            .collect::<Result<_>>()?;
        if vals.len() != k {
            return Err(Error::Parse(format!("topic row {r} has wrong width")));
        }
        for (c, val) in vals.into_iter().enumerate() {
            topics[[r, c]] = val;
        }
    }
    check_column_stochastic(&topics)?;
    Ok(topics)
}

#[derive(Debug, Clone)]
pub struct NewsConfig {
    pub n: usize,
    pub n_topics: usize,
    pub vocab: usize,
    /// Outcome scaling factor C.
    pub outcome_scale: f64,
    /// Assignment-bias strength; zero means completely random devices.
    pub kappa: f64,
    pub doc_length_mean: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for NewsConfig {
    fn default() -> Self {
        NewsConfig {
            n: 500,
            n_topics: 10,
            vocab: 300,
            outcome_scale: 50.0,
            kappa: 10.0,
            doc_length_mean: 200.0,
            noise_sd: 1.0,
            seed: 0,
        }
    }
}

impl NewsConfig {
    /// The configuration used in the published experiments.
    pub fn paper_scale() -> Self {
        NewsConfig {
            n: 5000,
            n_topics: 50,
            vocab: 3477,
            outcome_scale: 50.0,
            kappa: 10.0,
            doc_length_mean: 200.0,
            noise_sd: 1.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n_topics == 0 || self.vocab == 0 {
            return Err(Error::invalid("n, topics, vocab must be >= 1"));
        }
        if self.kappa < 0.0 {
            return Err(Error::invalid("kappa must be nonnegative"));
        }
        if self.noise_sd < 0.0 {
            return Err(Error::invalid("noise_sd must be nonnegative"));
        }
        if self.doc_length_mean <= 0.0 {
            return Err(Error::invalid("doc_length_mean must be positive"));
        }
        Ok(())
    }
}

/// Samples one news realization: raw word counts as covariates, noiseless
/// and noisy potential outcomes, and softmax-biased device assignment.
pub fn gen_news(space: &TopicSpace, cfg: &NewsConfig) -> Result<(Dataset, GeneratorConstants)> {
    cfg.validate()?;
    space.validate()?;
    if space.n_topics() != cfg.n_topics || space.vocab() != cfg.vocab {
        return Err(Error::invalid("topic space does not match config dims"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let normal = rand_distr::Normal::new(0.0, 1.0).expect("unit normal");
    let n = cfg.n;
    let v = cfg.vocab;
    let mut x = Array2::<f64>::zeros((n, v));
    let mut t = Array1::<f64>::zeros(n);
    let mut mu0 = Array1::<f64>::zeros(n);
    let mut mu1 = Array1::<f64>::zeros(n);
    let mut y0 = Array1::<f64>::zeros(n);
    let mut y1 = Array1::<f64>::zeros(n);
    let c = cfg.outcome_scale;
    for i in 0..n {
        let z = dirichlet(DOC_ALPHA, cfg.n_topics, &mut rng);
        // Word distribution: mixture of topic columns.
        let word_probs = space.topics.dot(&z);
        let length = rand_distr::Poisson::new(cfg.doc_length_mean)
            .expect("positive mean")
            .sample(&mut rng) as usize;
        if word_probs.iter().any(|&p| p > 0.0) {
            let widx = WeightedIndex::new(word_probs.iter().copied())
                .map_err(|e| Error::Numerical(format!("word distribution: {e}")))?;
            for _ in 0..length {
                x[[i, widx.sample(&mut rng)]] += 1.0;
            }
        }
        let sim0 = z.dot(&space.z_c0);
        let sim1 = z.dot(&space.z_c1);
        mu0[i] = c * sim0;
        mu1[i] = c * (sim0 + sim1);
        y0[i] = mu0[i] + cfg.noise_sd * normal.sample(&mut rng);
        y1[i] = mu1[i] + cfg.noise_sd * normal.sample(&mut rng);
        // Softmax assignment biased towards the preferred device.
        let e1 = (cfg.kappa * sim1).exp();
        let e0 = (cfg.kappa * sim0).exp();
        let p1 = e1 / (e0 + e1);
        t[i] = if rng.gen_bool(p1.clamp(0.0, 1.0)) {
            1.0
        } else {
            0.0
        };
    }
    let yf = Array1::from_shape_fn(n, |i| if t[i] == 1.0 { y1[i] } else { y0[i] });
    let ycf = Array1::from_shape_fn(n, |i| if t[i] == 1.0 { y0[i] } else { y1[i] });
    let data = Dataset::new(x, t, yf, Some(ycf), Some(mu0), Some(mu1))?;
    // Nominal covariate-to-topic smoothness bound; the topic mixture is
    // latent, so the unit bound is a convention, not an estimate.
    let l_z = 1.0;
    let norm0 = space.z_c0.dot(&space.z_c0).sqrt();
    let norm1 = space.z_c1.dot(&space.z_c1).sqrt();
    let constants = GeneratorConstants {
        k0: c * norm0 * l_z,
        k1: c * (norm0 + norm1) * l_z,
    };
    Ok((data, constants))
}

#[derive(Debug, Clone)]
pub struct SurfaceConfig {
    /// Calibration target for the mean treated effect.
    pub effect_target: f64,
    pub noise_sd: f64,
    /// Constant treatment probability used when the covariates come without
    /// an assignment.
    pub p_treat: f64,
    pub seed: u64,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        SurfaceConfig {
            effect_target: 4.0,
            noise_sd: 1.0,
            p_treat: 0.5,
            seed: 0,
        }
    }
}

/// Coefficient grid of the log-linear response surface.
const SURFACE_COEFS: [f64; 5] = [0.0, 0.1, 0.2, 0.3, 0.4];
const SURFACE_PROBS: [f64; 5] = [0.6, 0.1, 0.1, 0.1, 0.1];

/// Overlays a log-linear response surface on the given covariates: the
/// control response is `exp((x_std + 0.5) . beta)`, the treated response is
/// `x_std . beta - omega` with `omega` calibrated so the mean treated effect
/// equals the configured target.
pub fn gen_loglinear_surface(
    x: &Array2<f64>,
    cfg: &SurfaceConfig,
) -> Result<(Dataset, GeneratorConstants)> {
    if cfg.noise_sd < 0.0 {
        return Err(Error::invalid("noise_sd must be nonnegative"));
    }
    if !(cfg.p_treat > 0.0 && cfg.p_treat < 1.0) {
        return Err(Error::invalid("p_treat must lie in (0, 1)"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("covariates must be finite"));
    }
    let (n, d) = (x.nrows(), x.ncols());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(2);

    // Column standardization; a zero-variance column has no scale.
    let mut x_std = x.clone();
    let mut col_sd = Array1::<f64>::zeros(d);
    for j in 0..d {
        let col = x.column(j);
        let mean = col.sum() / n as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        if var <= 0.0 {
            return Err(Error::invalid(format!(
                "zero-variance column x{j}: standardization undefined"
            )));
        }
        let sd = var.sqrt();
        col_sd[j] = sd;
        for i in 0..n {
            x_std[[i, j]] = (x[[i, j]] - mean) / sd;
        }
    }

    let coef_idx = WeightedIndex::new(SURFACE_PROBS).expect("valid probs");
    let beta = Array1::from_shape_fn(d, |_| SURFACE_COEFS[coef_idx.sample(&mut rng)]);
    let t = Array1::from_shape_fn(n, |_| if rng.gen_bool(cfg.p_treat) { 1.0 } else { 0.0 });
    let n_treated = t.sum() as usize;
    if n_treated == 0 || n_treated == n {
        return Err(Error::DegenerateTreatment(
            "surface draw produced a one-sided assignment".to_string(),
        ));
    }

    let linear = x_std.dot(&beta);
    let half_shift = 0.5 * beta.sum();
    let mu0 = Array1::from_shape_fn(n, |i| (linear[i] + half_shift).exp());
    // omega calibrates the mean effect over treated units to the target.
    let treated_mean: f64 = (0..n)
        .filter(|&i| t[i] == 1.0)
        .map(|i| linear[i] - mu0[i])
        .sum::<f64>()
        / n_treated as f64;
    let omega = treated_mean - cfg.effect_target;
    let mu1 = linear.mapv(|v| v - omega);

    let normal = rand_distr::Normal::new(0.0, 1.0).expect("unit normal");
    let y0 = mu0.mapv(|m| m + cfg.noise_sd * normal.sample(&mut rng));
    let y1 = mu1.mapv(|m| m + cfg.noise_sd * normal.sample(&mut rng));
    let yf = Array1::from_shape_fn(n, |i| if t[i] == 1.0 { y1[i] } else { y0[i] });
    let ycf = Array1::from_shape_fn(n, |i| if t[i] == 1.0 { y0[i] } else { y1[i] });
    let data = Dataset::new(x.clone(), t, yf, Some(ycf), Some(mu0.clone()), Some(mu1))?;

    // Gradients in raw covariate space: beta_j / sd_j. The control surface
    // is exp of a linear map, so its steepest sample gradient bounds the
    // constant over the sample's convex hull.
    let grad_norm = beta
        .iter()
        .zip(col_sd.iter())
        .map(|(b, s)| (b / s) * (b / s))
        .sum::<f64>()
        .sqrt();
    let max_mu0 = mu0.iter().fold(0.0f64, |m, &v| m.max(v));
    let constants = GeneratorConstants {
        k0: max_mu0 * grad_norm,
        k1: grad_norm,
    };
    Ok((data, constants))
}

/// Draws a standard-normal covariate matrix for surface realizations that
/// are not based on user data.
pub fn standard_normal_covariates(n: usize, d: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(3);
    let normal = rand_distr::Normal::new(0.0, 1.0).expect("unit normal");
    Array2::from_shape_fn((n, d), |_| normal.sample(&mut rng))
}
