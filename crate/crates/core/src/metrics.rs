//! Treatment-effect evaluation metrics.
//!
//! `eps_ite` scores the transductive effect estimate that combines each
//! unit's observed factual outcome with the model's prediction for the
//! opposite arm; `pehe` scores the difference of the two predicted arms; and
//! `eps_ate` is the absolute error of the average effect. Ground truth comes
//! from the noiseless potential outcomes when the generator exported them,
//! otherwise from the realized counterfactual column.

use ndarray::{Array1, ArrayView1};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Which ground truth the metrics were computed against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruthSource {
    /// Noiseless potential outcomes (mu columns).
    Noiseless,
    /// Realized factual/counterfactual outcomes.
    Realized,
}

#[derive(Debug, Clone)]
pub struct Metrics {
    /// RMSE of the transductive effect estimate.
    pub eps_ite: f64,
    /// Absolute error of the estimated average effect.
    pub eps_ate: f64,
    /// RMSE of the predicted effect difference (both arms predicted).
    pub pehe: f64,
    /// RMSE of the predicted counterfactual arm.
    pub rmse_cf: f64,
    pub truth: TruthSource,
}

/// Transductive effect estimate: `y_f - y_cf_hat` for treated units and
/// `y_cf_hat - y_f` for control units.
pub fn estimate_ite(
    y_factual: ArrayView1<f64>,
    t: ArrayView1<f64>,
    y_cf_hat: ArrayView1<f64>,
) -> Result<Array1<f64>> {
    let n = y_factual.len();
    if t.len() != n || y_cf_hat.len() != n {
        return Err(Error::invalid("estimate_ite inputs must share a length"));
    }
    Ok(Array1::from_shape_fn(n, |i| {
        if t[i] == 1.0 {
            y_factual[i] - y_cf_hat[i]
        } else {
            y_cf_hat[i] - y_factual[i]
        }
    }))
}

fn rmse(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    let n = a.len() as f64;
    (a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / n)
        .sqrt()
}

/// Ground-truth potential outcomes `(y0, y1, source)` for a dataset that
/// carries synthetic truth.
pub fn true_potential_outcomes(data: &Dataset) -> Result<(Array1<f64>, Array1<f64>, TruthSource)> {
    if let (Some(mu0), Some(mu1)) = (&data.mu0, &data.mu1) {
        return Ok((mu0.clone(), mu1.clone(), TruthSource::Noiseless));
    }
    if let Some(ycf) = &data.y_counterfactual {
        let n = data.n();
        let mut y0 = Array1::zeros(n);
        let mut y1 = Array1::zeros(n);
        for i in 0..n {
            if data.treatment[i] == 1.0 {
                y1[i] = data.y_factual[i];
                y0[i] = ycf[i];
            } else {
                y0[i] = data.y_factual[i];
                y1[i] = ycf[i];
            }
        }
        return Ok((y0, y1, TruthSource::Realized));
    }
    Err(Error::invalid("metrics require synthetic truth"))
}

/// Evaluates predicted potential outcomes against a dataset with truth.
pub fn eval_metrics(
    y0_hat: ArrayView1<f64>,
    y1_hat: ArrayView1<f64>,
    data: &Dataset,
) -> Result<Metrics> {
    let n = data.n();
    if y0_hat.len() != n || y1_hat.len() != n {
        return Err(Error::invalid("prediction lengths must match the dataset"));
    }
    let (y0_true, y1_true, truth) = true_potential_outcomes(data)?;
    let effect_true = &y1_true - &y0_true;

    // Predicted counterfactual arm per unit.
    let y_cf_hat = Array1::from_shape_fn(n, |i| {
        if data.treatment[i] == 1.0 {
            y0_hat[i]
        } else {
            y1_hat[i]
        }
    });
    let y_cf_true = Array1::from_shape_fn(n, |i| {
        if data.treatment[i] == 1.0 {
            y0_true[i]
        } else {
            y1_true[i]
        }
    });
    // The transductive estimate always pairs the observed factual outcome
    // with the predicted counterfactual; with noisy outcomes and noiseless
    // truth this leaves an irreducible noise floor in eps_ite.
    let ite_hat = estimate_ite(
        data.y_factual.view(),
        data.treatment.view(),
        y_cf_hat.view(),
    )?;
    let eps_ite = rmse(&ite_hat, &effect_true);

    let effect_hat = Array1::from_shape_fn(n, |i| y1_hat[i] - y0_hat[i]);
    let pehe = rmse(&effect_hat, &effect_true);
    let eps_ate = ((effect_hat.sum() - effect_true.sum()) / n as f64).abs();
    let rmse_cf = rmse(&y_cf_hat, &y_cf_true);
    Ok(Metrics {
        eps_ite,
        eps_ate,
        pehe,
        rmse_cf,
        truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn truth_dataset() -> Dataset {
        // Noiseless: y_factual equals the factual mu arm.
        let mu0 = array![1.0, 2.0, 3.0, 4.0];
        let mu1 = array![2.0, 3.0, 4.0, 5.0];
        let t = array![1.0, 0.0, 1.0, 0.0];
        let yf = array![2.0, 2.0, 4.0, 4.0];
        let ycf = array![1.0, 3.0, 3.0, 5.0];
        Dataset::new(
            array![[0.0], [1.0], [2.0], [3.0]],
            t,
            yf,
            Some(ycf),
            Some(mu0),
            Some(mu1),
        )
        .unwrap()
    }

    #[test]
    fn estimate_ite_both_cases() {
        let ite = estimate_ite(
            array![5.0, 3.0].view(),
            array![1.0, 0.0].view(),
            array![3.0, 5.0].view(),
        )
        .unwrap();
        assert_eq!(ite[0], 2.0);
        assert_eq!(ite[1], 2.0);
    }

    #[test]
    fn estimate_ite_recovers_generator_truth_under_perfect_predictions() {
        let data = truth_dataset();
        let ycf_hat = data.y_counterfactual.clone().unwrap();
        let ite =
            estimate_ite(data.y_factual.view(), data.treatment.view(), ycf_hat.view()).unwrap();
        let (y0, y1, _) = true_potential_outcomes(&data).unwrap();
        for i in 0..4 {
            assert!((ite[i] - (y1[i] - y0[i])).abs() < 1e-15);
        }
    }

    #[test]
    fn perfect_predictions_zero_all_metrics() {
        let data = truth_dataset();
        let m = eval_metrics(
            data.mu0.clone().unwrap().view(),
            data.mu1.clone().unwrap().view(),
            &data,
        )
        .unwrap();
        assert_eq!(m.truth, TruthSource::Noiseless);
        assert!(m.eps_ite.abs() < 1e-15);
        assert!(m.eps_ate.abs() < 1e-15);
        assert!(m.pehe.abs() < 1e-15);
        assert!(m.rmse_cf.abs() < 1e-15);
    }

    #[test]
    fn constant_bias_shows_up_as_pehe_and_ate() {
        let data = truth_dataset();
        let b = 0.75;
        let y0_hat = data.mu0.clone().unwrap();
        let y1_hat = data.mu1.clone().unwrap().mapv(|v| v + b);
        let m = eval_metrics(y0_hat.view(), y1_hat.view(), &data).unwrap();
        assert!((m.pehe - b).abs() < 1e-12);
        assert!((m.eps_ate - b).abs() < 1e-12);
    }

    #[test]
    fn three_row_hand_case() {
        // True effects {1,1,1}, predicted {2,1,0}:
        // pehe = sqrt((1 + 0 + 1) / 3).
        let mu0 = array![0.0, 0.0, 0.0];
        let mu1 = array![1.0, 1.0, 1.0];
        let data = Dataset::new(
            array![[0.0], [1.0], [2.0]],
            array![1.0, 0.0, 1.0],
            array![1.0, 0.0, 1.0],
            None,
            Some(mu0.clone()),
            Some(mu1),
        )
        .unwrap();
        let y0_hat = array![0.0, 0.0, 0.0];
        let y1_hat = array![2.0, 1.0, 0.0];
        let m = eval_metrics(y0_hat.view(), y1_hat.view(), &data).unwrap();
        assert!((m.pehe - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn metrics_are_permutation_invariant() {
        let data = truth_dataset();
        let y0_hat = array![1.1, 2.2, 2.9, 4.4];
        let y1_hat = array![2.3, 2.8, 4.5, 4.9];
        let base = eval_metrics(y0_hat.view(), y1_hat.view(), &data).unwrap();
        let perm = [2usize, 0, 3, 1];
        let data_p = data.select(&perm);
        let y0_p = Array1::from_iter(perm.iter().map(|&i| y0_hat[i]));
        let y1_p = Array1::from_iter(perm.iter().map(|&i| y1_hat[i]));
        let shuffled = eval_metrics(y0_p.view(), y1_p.view(), &data_p).unwrap();
        assert!((base.eps_ite - shuffled.eps_ite).abs() < 1e-12);
        assert!((base.eps_ate - shuffled.eps_ate).abs() < 1e-12);
        assert!((base.pehe - shuffled.pehe).abs() < 1e-12);
        assert!((base.rmse_cf - shuffled.rmse_cf).abs() < 1e-12);
    }

    #[test]
    fn realized_truth_used_when_mu_absent() {
        let data = Dataset::new(
            array![[0.0], [1.0]],
            array![1.0, 0.0],
            array![3.0, 1.0],
            Some(array![2.0, 4.0]),
            None,
            None,
        )
        .unwrap();
        // Perfect counterfactual predictions on realized truth.
        let y0_hat = array![2.0, 1.0];
        let y1_hat = array![3.0, 4.0];
        let m = eval_metrics(y0_hat.view(), y1_hat.view(), &data).unwrap();
        assert_eq!(m.truth, TruthSource::Realized);
        assert!(m.eps_ite.abs() < 1e-15);
        assert!(m.rmse_cf.abs() < 1e-15);
    }

    #[test]
    fn truth_absent_is_an_error() {
        let data = Dataset::new(
            array![[0.0], [1.0]],
            array![1.0, 0.0],
            array![3.0, 1.0],
            None,
            None,
            None,
        )
        .unwrap();
        let y = array![0.0, 0.0];
        assert!(eval_metrics(y.view(), y.view(), &data).is_err());
    }
}
