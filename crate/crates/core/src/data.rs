//! Dataset container, CSV ingestion, cross-group nearest neighbors, and
//! deterministic splitting.
//!
//! A [`Dataset`] holds one observational sample: covariates, a binary
//! treatment vector, factual outcomes, and (for synthetic data) the
//! counterfactual and noiseless potential outcomes. Datasets are immutable
//! after construction and safe to share across workers.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// One observational sample of `n` units with `d` covariates.
#[derive(Debug, Clone)]
pub struct Dataset {
    /// n×d covariate matrix.
    pub covariates: Array2<f64>,
    /// Length-n treatment vector; entries are exactly 0.0 or 1.0.
    pub treatment: Array1<f64>,
    /// Length-n factual (observed) outcomes.
    pub y_factual: Array1<f64>,
    /// Length-n counterfactual outcomes, when the generator knows them.
    pub y_counterfactual: Option<Array1<f64>>,
    /// Noiseless control potential outcome, when known.
    pub mu0: Option<Array1<f64>>,
    /// Noiseless treated potential outcome, when known.
    pub mu1: Option<Array1<f64>>,
}

/// CSV column naming convention. The default matches the on-disk schema
/// `x0..x{d-1}, t, yf [, ycf] [, mu0] [, mu1]`.
#[derive(Debug, Clone)]
pub struct Schema {
    pub covariate_prefix: String,
    pub treatment: String,
    pub factual: String,
    pub counterfactual: String,
    pub mu0: String,
    pub mu1: String,
}

impl Default for Schema {
    fn default() -> Self {
        Schema {
            covariate_prefix: "x".to_string(),
            treatment: "t".to_string(),
            factual: "yf".to_string(),
            counterfactual: "ycf".to_string(),
            mu0: "mu0".to_string(),
            mu1: "mu1".to_string(),
        }
    }
}

impl Dataset {
    /// Validates lengths and the binary-treatment invariant.
    pub fn new(
        covariates: Array2<f64>,
        treatment: Array1<f64>,
        y_factual: Array1<f64>,
        y_counterfactual: Option<Array1<f64>>,
        mu0: Option<Array1<f64>>,
        mu1: Option<Array1<f64>>,
    ) -> Result<Self> {
        let n = covariates.nrows();
        if n == 0 || covariates.ncols() == 0 {
            return Err(Error::invalid("dataset needs n >= 1 and d >= 1"));
        }
        for (name, len) in [
            ("treatment", treatment.len()),
            ("yf", y_factual.len()),
            ("ycf", y_counterfactual.as_ref().map_or(n, |v| v.len())),
            ("mu0", mu0.as_ref().map_or(n, |v| v.len())),
            ("mu1", mu1.as_ref().map_or(n, |v| v.len())),
        ] {
            if len != n {
                return Err(Error::invalid(format!(
                    "column {name} has length {len}, expected {n}"
                )));
            }
        }
        if let Some(bad) = treatment.iter().find(|&&t| t != 0.0 && t != 1.0) {
            return Err(Error::invalid(format!("non-binary treatment value {bad}")));
        }
        Ok(Dataset {
            covariates,
            treatment,
            y_factual,
            y_counterfactual,
            mu0,
            mu1,
        })
    }

    pub fn n(&self) -> usize {
        self.covariates.nrows()
    }

    pub fn d(&self) -> usize {
        self.covariates.ncols()
    }

    pub fn is_treated(&self, i: usize) -> bool {
        self.treatment[i] == 1.0
    }

    /// Fraction of treated units.
    pub fn treated_fraction(&self) -> f64 {
        self.treatment.sum() / self.n() as f64
    }

    pub fn has_truth(&self) -> bool {
        self.y_counterfactual.is_some() || (self.mu0.is_some() && self.mu1.is_some())
    }

    /// A copy with every counterfactual/noiseless column removed. Models are
    /// handed this view so training can never read ground truth.
    pub fn strip_truth(&self) -> Dataset {
        Dataset {
            covariates: self.covariates.clone(),
            treatment: self.treatment.clone(),
            y_factual: self.y_factual.clone(),
            y_counterfactual: None,
            mu0: None,
            mu1: None,
        }
    }

    /// Row subset in the given index order.
    pub fn select(&self, idx: &[usize]) -> Dataset {
        let take1 = |v: &Array1<f64>| Array1::from_iter(idx.iter().map(|&i| v[i]));
        let mut x = Array2::zeros((idx.len(), self.d()));
        for (r, &i) in idx.iter().enumerate() {
            x.row_mut(r).assign(&self.covariates.row(i));
        }
        Dataset {
            covariates: x,
            treatment: take1(&self.treatment),
            y_factual: take1(&self.y_factual),
            y_counterfactual: self.y_counterfactual.as_ref().map(&take1),
            mu0: self.mu0.as_ref().map(&take1),
            mu1: self.mu1.as_ref().map(&take1),
        }
    }
}

/// For every unit, its nearest neighbor in the opposite treatment group.
///
/// Distances are Euclidean in raw covariate space; the map is computed once
/// and never changes with a learned representation.
#[derive(Debug, Clone)]
pub struct NearestNeighborMap {
    /// Index of the cross-group nearest neighbor of each unit.
    pub j: Vec<usize>,
    /// Euclidean distance to that neighbor.
    pub dist: Vec<f64>,
}

fn euclidean(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Computes the cross-group nearest-neighbor map; ties break to the lowest
/// index.
pub fn nearest_cross_group(data: &Dataset) -> Result<NearestNeighborMap> {
    let n = data.n();
    let n_treated = data.treatment.sum() as usize;
    if n_treated == 0 || n_treated == n {
        return Err(Error::DegenerateTreatment(
            "nearest_cross_group needs both groups nonempty".to_string(),
        ));
    }
    let mut j = vec![0usize; n];
    let mut dist = vec![0.0f64; n];
    for i in 0..n {
        let mut best = usize::MAX;
        let mut best_d = f64::INFINITY;
        for k in 0..n {
            if data.treatment[k] == data.treatment[i] {
                continue;
            }
            let d = euclidean(data.covariates.row(i), data.covariates.row(k));
            if d < best_d {
                best_d = d;
                best = k;
            }
        }
        j[i] = best;
        dist[i] = best_d;
    }
    Ok(NearestNeighborMap { j, dist })
}

/// Deterministic row split into `(rest, test)` parts; `test` gets
/// `round(n * test_fraction)` rows. Row order inside each part follows the
/// original dataset.
pub fn split(data: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "test_fraction {test_fraction} outside (0, 1)"
        )));
    }
    let n = data.n();
    let n_test = (n as f64 * test_fraction).round() as usize;
    if n_test == 0 || n_test == n {
        return Err(Error::invalid(format!(
            "split of n={n} at fraction {test_fraction} leaves an empty part"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let (test_idx, train_idx) = idx.split_at(n_test);
    let mut test_idx = test_idx.to_vec();
    let mut train_idx = train_idx.to_vec();
    test_idx.sort_unstable();
    train_idx.sort_unstable();
    Ok((data.select(&train_idx), data.select(&test_idx)))
}

/// Loads a dataset from a CSV file under the given column naming convention.
///
/// The header must consist of `{prefix}0..{prefix}{d-1}` covariate columns
/// (in any order) plus the treatment and factual-outcome columns; the
/// counterfactual and noiseless columns are optional. Unknown headers are
/// errors.
pub fn load_dataset(path: &Path, schema: &Schema) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)?;

    let headers = reader.headers()?.clone();
    let mut cov_cols: Vec<(usize, usize)> = Vec::new(); // (covariate index, csv column)
    let mut t_col = None;
    let mut yf_col = None;
    let mut ycf_col = None;
    let mut mu0_col = None;
    let mut mu1_col = None;
    for (c, name) in headers.iter().enumerate() {
        if name == schema.treatment {
            t_col = Some(c);
        } else if name == schema.factual {
            yf_col = Some(c);
        } else if name == schema.counterfactual {
            ycf_col = Some(c);
        } else if name == schema.mu0 {
            mu0_col = Some(c);
        } else if name == schema.mu1 {
            mu1_col = Some(c);
        } else if let Some(rest) = name.strip_prefix(&schema.covariate_prefix) {
            let idx: usize = rest
                .parse()
                .map_err(|_| Error::Parse(format!("unknown column '{name}'")))?;
            cov_cols.push((idx, c));
        } else {
            return Err(Error::Parse(format!("unknown column '{name}'")));
        }
    }
    let t_col =
        t_col.ok_or_else(|| Error::Parse(format!("missing column '{}'", schema.treatment)))?;
    let yf_col =
        yf_col.ok_or_else(|| Error::Parse(format!("missing column '{}'", schema.factual)))?;
    cov_cols.sort_unstable();
    let d = cov_cols.len();
    if d == 0 {
        return Err(Error::Parse("no covariate columns found".to_string()));
    }
    for (want, &(got, _)) in cov_cols.iter().enumerate() {
        if want != got {
            return Err(Error::Parse(format!(
                "covariate indices must cover 0..{}, found gap at {}{}",
                d - 1,
                schema.covariate_prefix,
                want
            )));
        }
    }

    let parse_cell = |rec: &csv::StringRecord, col: usize, row: usize| -> Result<f64> {
        let raw = rec
            .get(col)
            .ok_or_else(|| Error::Parse(format!("row {row}: missing cell in column {col}")))?;
        raw.trim()
            .parse::<f64>()
            .map_err(|_| Error::Parse(format!("row {row}: non-numeric cell '{raw}'")))
    };

    let mut x_rows: Vec<f64> = Vec::new();
    let mut t = Vec::new();
    let mut yf = Vec::new();
    let mut ycf = Vec::new();
    let mut mu0 = Vec::new();
    let mut mu1 = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec?;
        for &(_, c) in &cov_cols {
            x_rows.push(parse_cell(&rec, c, row)?);
        }
        let tv = parse_cell(&rec, t_col, row)?;
        if tv != 0.0 && tv != 1.0 {
            return Err(Error::Parse(format!(
                "row {row}: non-binary treatment value '{tv}'"
            )));
        }
        t.push(tv);
        yf.push(parse_cell(&rec, yf_col, row)?);
        if let Some(c) = ycf_col {
            ycf.push(parse_cell(&rec, c, row)?);
        }
        if let Some(c) = mu0_col {
            mu0.push(parse_cell(&rec, c, row)?);
        }
        if let Some(c) = mu1_col {
            mu1.push(parse_cell(&rec, c, row)?);
        }
    }
    let n = t.len();
    if n == 0 {
        return Err(Error::Parse("file has no data rows".to_string()));
    }
    let covariates = Array2::from_shape_vec((n, d), x_rows)
        .map_err(|e| Error::Parse(format!("bad matrix shape: {e}")))?;
    Dataset::new(
        covariates,
        Array1::from(t),
        Array1::from(yf),
        ycf_col.map(|_| Array1::from(ycf)),
        mu0_col.map(|_| Array1::from(mu0)),
        mu1_col.map(|_| Array1::from(mu1)),
    )
}

/// Writes a dataset in the CSV schema read by [`load_dataset`]. Values are
/// printed in the shortest form that parses back to the identical 64-bit
/// real.
pub fn save_dataset(data: &Dataset, path: &Path, schema: &Schema) -> Result<()> {
    let mut out = String::new();
    for k in 0..data.d() {
        write!(out, "{}{},", schema.covariate_prefix, k).unwrap();
    }
    write!(out, "{},{}", schema.treatment, schema.factual).unwrap();
    if data.y_counterfactual.is_some() {
        write!(out, ",{}", schema.counterfactual).unwrap();
    }
    if data.mu0.is_some() {
        write!(out, ",{}", schema.mu0).unwrap();
    }
    if data.mu1.is_some() {
        write!(out, ",{}", schema.mu1).unwrap();
    }
    out.push('\n');
    for i in 0..data.n() {
        for k in 0..data.d() {
            write!(out, "{},", data.covariates[[i, k]]).unwrap();
        }
        write!(out, "{},{}", data.treatment[i], data.y_factual[i]).unwrap();
        if let Some(ycf) = &data.y_counterfactual {
            write!(out, ",{}", ycf[i]).unwrap();
        }
        if let Some(mu0) = &data.mu0 {
            write!(out, ",{}", mu0[i]).unwrap();
        }
        if let Some(mu1) = &data.mu1 {
            write!(out, ",{}", mu1[i]).unwrap();
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}
