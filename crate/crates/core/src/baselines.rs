//! Reference estimators: ordinary least squares on `[x, t]`, doubly robust
//! AIPW, lasso selection followed by ridge, and a plain feedforward network
//! without the balance penalty.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::bnn::{bnn_train, BnnConfig, MlpParams};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linear::{lasso_fit, logistic_fit, logistic_predict, ridge_fit, LinearModel};

/// Predicted potential outcomes for a set of units. `ate_hat` is the mean
/// predicted effect, except for the doubly robust estimator where it is the
/// AIPW average computed on the training sample.
#[derive(Debug, Clone)]
pub struct PotentialOutcomePredictions {
    pub y0_hat: Array1<f64>,
    pub y1_hat: Array1<f64>,
    pub ate_hat: f64,
}

impl PotentialOutcomePredictions {
    fn from_arms(y0_hat: Array1<f64>, y1_hat: Array1<f64>) -> Self {
        let ate_hat = (&y1_hat - &y0_hat).sum() / y1_hat.len() as f64;
        PotentialOutcomePredictions {
            y0_hat,
            y1_hat,
            ate_hat,
        }
    }
}

/// Numerical-safety ridge penalty standing in for plain least squares.
const OLS_RIDGE: f64 = 1e-8;
/// Inverse-propensity weights are clipped at this value.
const IPW_CLIP: f64 = 100.0;
/// Dimension above which the propensity model runs on principal components.
const PCA_THRESHOLD: usize = 500;
const PCA_COMPONENTS: usize = 100;

fn design_with_treatment(x: ArrayView2<f64>, t: &Array1<f64>) -> Array2<f64> {
    let (n, d) = (x.nrows(), x.ncols());
    let mut z = Array2::zeros((n, d + 1));
    z.slice_mut(ndarray::s![.., ..d]).assign(&x);
    z.column_mut(d).assign(t);
    z
}

/// One linear regression on `[x, t]`; both arms come from toggling the
/// treatment column.
pub fn ols_baseline(
    train: &Dataset,
    test_x: ArrayView2<f64>,
) -> Result<PotentialOutcomePredictions> {
    let z = design_with_treatment(train.covariates.view(), &train.treatment);
    let model = ridge_fit(z.view(), train.y_factual.view(), OLS_RIDGE)?;
    let n = test_x.nrows();
    let z0 = design_with_treatment(test_x, &Array1::zeros(n));
    let z1 = design_with_treatment(test_x, &Array1::ones(n));
    Ok(PotentialOutcomePredictions::from_arms(
        model.predict(z0.view()),
        model.predict(z1.view()),
    ))
}

/// Principal component scores by power iteration with deflation.
///
/// Columns are centered first; returns `(scores, components)` with at most
/// `min(n_components, d, n - 1)` columns.
pub fn pca_scores(x: ArrayView2<f64>, n_components: usize) -> Result<(Array2<f64>, Array2<f64>)> {
    let (n, d) = (x.nrows(), x.ncols());
    if n < 2 {
        return Err(Error::invalid("pca needs at least two rows"));
    }
    let mut centered = x.to_owned();
    for j in 0..d {
        let mean = centered.column(j).sum() / n as f64;
        centered.column_mut(j).mapv_inplace(|v| v - mean);
    }
    let mut cov = centered.t().dot(&centered) / n as f64;
    let c = n_components.min(d).min(n - 1);
    let mut components = Array2::<f64>::zeros((d, c));
    let mut kept = 0;
    for comp in 0..c {
        // Deterministic start vector; rotate the seed per component.
        let mut v = Array1::from_shape_fn(d, |j| {
            let t = (j + comp * 31 + 1) as f64;
            (t * 0.7391).sin()
        });
        let norm = v.dot(&v).sqrt();
        v /= norm;
        let mut eig = 0.0;
        for _ in 0..500 {
            let mut w = cov.dot(&v);
            let wnorm = w.dot(&w).sqrt();
            if wnorm < 1e-300 {
                break;
            }
            w /= wnorm;
            let new_eig = w.dot(&cov.dot(&w));
            let done = (new_eig - eig).abs() <= 1e-10 * (1.0 + new_eig.abs());
            v = w;
            eig = new_eig;
            if done {
                break;
            }
        }
        if eig <= 1e-12 {
            break;
        }
        components.column_mut(comp).assign(&v);
        kept = comp + 1;
        // Deflate the found direction.
        for i in 0..d {
            for j in 0..d {
                cov[[i, j]] -= eig * v[i] * v[j];
            }
        }
    }
    let components = components.slice(ndarray::s![.., ..kept]).to_owned();
    let scores = centered.dot(&components);
    Ok((scores, components))
}

/// Doubly robust estimation: per-arm outcome regressions plus a logistic
/// propensity model; the ATE is the AIPW average over the training sample
/// with inverse-propensity weights clipped at 100. Per-unit arms come from
/// the outcome regressions alone.
pub fn doubly_robust(
    train: &Dataset,
    test_x: ArrayView2<f64>,
    propensity_l2: f64,
) -> Result<PotentialOutcomePredictions> {
    let n = train.n();
    let treated_idx: Vec<usize> = (0..n).filter(|&i| train.is_treated(i)).collect();
    let control_idx: Vec<usize> = (0..n).filter(|&i| !train.is_treated(i)).collect();
    if treated_idx.is_empty() || control_idx.is_empty() {
        return Err(Error::DegenerateTreatment(
            "doubly robust needs both groups".to_string(),
        ));
    }
    let fit_arm = |idx: &[usize]| -> Result<LinearModel> {
        let x = train.covariates.select(Axis(0), idx);
        let y = Array1::from_iter(idx.iter().map(|&i| train.y_factual[i]));
        ridge_fit(x.view(), y.view(), OLS_RIDGE)
    };
    let m1 = fit_arm(&treated_idx)?;
    let m0 = fit_arm(&control_idx)?;

    // Propensity scores, on principal components for wide data.
    let propensity = if train.d() > PCA_THRESHOLD {
        let (scores, _components) = pca_scores(train.covariates.view(), PCA_COMPONENTS)?;
        let model = logistic_fit(scores.view(), train.treatment.view(), propensity_l2)?;
        logistic_predict(&model, scores.view())
    } else {
        let model = logistic_fit(
            train.covariates.view(),
            train.treatment.view(),
            propensity_l2,
        )?;
        logistic_predict(&model, train.covariates.view())
    };

    let m1_train = m1.predict(train.covariates.view());
    let m0_train = m0.predict(train.covariates.view());
    let mut ate = 0.0;
    for i in 0..n {
        let e = propensity[i];
        let w1 = (1.0 / e).min(IPW_CLIP);
        let w0 = (1.0 / (1.0 - e)).min(IPW_CLIP);
        let t = train.treatment[i];
        let y = train.y_factual[i];
        ate += m1_train[i] - m0_train[i] + t * (y - m1_train[i]) * w1
            - (1.0 - t) * (y - m0_train[i]) * w0;
    }
    ate /= n as f64;

    Ok(PotentialOutcomePredictions {
        y0_hat: m0.predict(test_x),
        y1_hat: m1.predict(test_x),
        ate_hat: ate,
    })
}

/// The two stages of the lasso-then-ridge pipeline, exposed for inspection.
#[derive(Debug, Clone)]
pub struct LassoRidgeFit {
    /// Selected columns of the `[x, t]` design; the treatment column is
    /// always retained.
    pub selected: Vec<usize>,
    pub model: LinearModel,
}

/// Lasso on `[x, t]` for variable selection, ridge refit on the selection.
pub fn lasso_ridge_stages(
    train: &Dataset,
    lasso_lambda: f64,
    ridge_lambda: f64,
) -> Result<LassoRidgeFit> {
    let d = train.d();
    let z = design_with_treatment(train.covariates.view(), &train.treatment);
    let lasso = lasso_fit(z.view(), train.y_factual.view(), lasso_lambda)?;
    let mut selected: Vec<usize> = lasso.active_set();
    if !selected.contains(&d) {
        selected.push(d);
    }
    selected.sort_unstable();
    let z_sel = z.select(Axis(1), &selected);
    let model = ridge_fit(z_sel.view(), train.y_factual.view(), ridge_lambda)?;
    Ok(LassoRidgeFit { selected, model })
}

pub fn lasso_ridge(
    train: &Dataset,
    test_x: ArrayView2<f64>,
    lasso_lambda: f64,
    ridge_lambda: f64,
) -> Result<PotentialOutcomePredictions> {
    let fit = lasso_ridge_stages(train, lasso_lambda, ridge_lambda)?;
    let n = test_x.nrows();
    let predict_arm = |t_val: f64| -> Array1<f64> {
        let z = design_with_treatment(test_x, &Array1::from_elem(n, t_val));
        let z_sel = z.select(Axis(1), &fit.selected);
        fit.model.predict(z_sel.view())
    };
    Ok(PotentialOutcomePredictions::from_arms(
        predict_arm(0.0),
        predict_arm(1.0),
    ))
}

/// A standard feedforward network on `[x, t]` without the balance penalty:
/// the balancing-network code path with `alpha` hard-wired to zero, four
/// representation layers and a linear head, and the treatment concatenated
/// to the input.
pub fn nn4_baseline(
    train: &Dataset,
    cfg: &BnnConfig,
    test_x: ArrayView2<f64>,
) -> Result<(PotentialOutcomePredictions, MlpParams)> {
    if cfg.alpha != 0.0 {
        eprintln!(
            "nn4_baseline: config alpha {} ignored; this baseline always runs without the penalty",
            cfg.alpha
        );
    }
    let cfg = BnnConfig {
        alpha: 0.0,
        d_r: 4,
        d_o: 0,
        ..cfg.clone()
    };
    // Treatment joins the covariates at the input layer.
    let x_aug = design_with_treatment(train.covariates.view(), &train.treatment);
    let augmented = Dataset::new(
        x_aug,
        train.treatment.clone(),
        train.y_factual.clone(),
        None,
        None,
        None,
    )?;
    let (params, _) = bnn_train(&augmented, &cfg)?;
    let n = test_x.nrows();
    let arm = |t_val: f64| -> Result<Array1<f64>> {
        let x_arm = design_with_treatment(test_x, &Array1::from_elem(n, t_val));
        let t_arm = Array1::from_elem(n, t_val);
        let (_, y) = crate::bnn::bnn_forward(&params, x_arm.view(), t_arm.view())?;
        Ok(y)
    };
    let y0 = arm(0.0)?;
    let y1 = arm(1.0)?;
    Ok((PotentialOutcomePredictions::from_arms(y0, y1), params))
}
