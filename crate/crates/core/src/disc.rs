//! Linear discrepancy between the factual and counterfactual empirical
//! distributions over a representation.
//!
//! For linear hypotheses and squared loss the discrepancy between the two
//! distributions equals the spectral norm of the difference of their
//! second-moment matrices. Because the two samples share the representation
//! part and differ only in the treatment coordinate, that difference is an
//! arrow matrix and the norm has the closed form
//!
//! ```text
//! disc = |p - 1/2| + sqrt((p - 1/2)^2 + ||v||^2),
//! v    = p * mu1 - (1 - p) * mu0,
//! ```
//!
//! with `p` the treated fraction and `mu1`, `mu0` the group means of the
//! representation. [`disc_oracle_spectral`] recomputes the same quantity the
//! slow way (explicit second-moment matrices plus power iteration) and serves
//! as the independent oracle for the closed form.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Closed-form discrepancy report over one representation.
#[derive(Debug, Clone)]
pub struct DiscReport {
    /// Treated fraction.
    pub p: f64,
    /// Size-weighted group mean difference `p * mu1 - (1 - p) * mu0`.
    pub v: Array1<f64>,
    /// The discrepancy value; zero iff `v = 0` and `p = 1/2`.
    pub value: f64,
}

fn group_means(
    phi: ArrayView2<f64>,
    treatment: ArrayView1<f64>,
) -> Result<(f64, Array1<f64>, Array1<f64>)> {
    let n = phi.nrows();
    if n == 0 || treatment.len() != n {
        return Err(Error::invalid(
            "representation and treatment sizes disagree",
        ));
    }
    let n_t = treatment.iter().filter(|&&t| t == 1.0).count();
    if n_t == 0 || n_t == n {
        return Err(Error::DegenerateTreatment(
            "discrepancy undefined: one-sided treatment".to_string(),
        ));
    }
    let k = phi.ncols();
    let mut mu1 = Array1::zeros(k);
    let mut mu0 = Array1::zeros(k);
    for (row, &t) in phi.rows().into_iter().zip(treatment.iter()) {
        if t == 1.0 {
            mu1 += &row;
        } else {
            mu0 += &row;
        }
    }
    mu1 /= n_t as f64;
    mu0 /= (n - n_t) as f64;
    Ok((n_t as f64 / n as f64, mu0, mu1))
}

/// Closed-form linear discrepancy of a representation matrix.
pub fn linear_disc(phi: ArrayView2<f64>, treatment: ArrayView1<f64>) -> Result<DiscReport> {
    let (p, mu0, mu1) = group_means(phi, treatment)?;
    let v = mu1.mapv(|a| p * a) - mu0.mapv(|a| (1.0 - p) * a);
    let c = p - 0.5;
    let vnorm2 = v.dot(&v);
    let value = c.abs() + (c * c + vnorm2).sqrt();
    Ok(DiscReport { p, v, value })
}

/// Discrepancy of the diagonally reweighted covariates `X diag(w)` for a
/// simplex weight vector `w`.
pub fn weighted_linear_disc(
    x: ArrayView2<f64>,
    treatment: ArrayView1<f64>,
    w: ArrayView1<f64>,
) -> Result<f64> {
    if w.len() != x.ncols() {
        return Err(Error::invalid("weight length must match covariate width"));
    }
    check_simplex(w, 1e-9)?;
    let weighted = x.to_owned() * w.insert_axis(ndarray::Axis(0));
    Ok(linear_disc(weighted.view(), treatment)?.value)
}

pub(crate) fn check_simplex(w: ArrayView1<f64>, tol: f64) -> Result<()> {
    let sum: f64 = w.sum();
    if (sum - 1.0).abs() > tol || w.iter().any(|&wi| wi < -tol) {
        return Err(Error::invalid(format!(
            "weights off the probability simplex (sum {sum})"
        )));
    }
    Ok(())
}

/// Independent spectral-norm route to the linear discrepancy.
///
/// Builds `z_i = [phi_i, t_i]` and `z'_i = [phi_i, 1 - t_i]`, forms the
/// difference of their second-moment matrices and returns its spectral norm
/// by power iteration.
pub fn disc_oracle_spectral(phi: ArrayView2<f64>, treatment: ArrayView1<f64>) -> Result<f64> {
    // Reuse the group-nonempty guard.
    group_means(phi, treatment)?;
    let n = phi.nrows();
    let k = phi.ncols();
    let m = k + 1;
    let mut factual = Array2::<f64>::zeros((m, m));
    let mut counterfactual = Array2::<f64>::zeros((m, m));
    let mut z = Array1::<f64>::zeros(m);
    for (row, &t) in phi.rows().into_iter().zip(treatment.iter()) {
        for (zi, &ri) in z.iter_mut().zip(row.iter()) {
            *zi = ri;
        }
        z[k] = t;
        accumulate_outer(&mut factual, z.view());
        z[k] = 1.0 - t;
        accumulate_outer(&mut counterfactual, z.view());
    }
    let delta = (factual - counterfactual) / n as f64;
    spectral_norm_symmetric(delta.view(), 1000, 1e-12)
}

fn accumulate_outer(acc: &mut Array2<f64>, z: ArrayView1<f64>) {
    for i in 0..z.len() {
        for j in 0..z.len() {
            acc[[i, j]] += z[i] * z[j];
        }
    }
}

/// Spectral norm (largest absolute eigenvalue) of a symmetric matrix by
/// power iteration, run on `A + sigma I` and `-A + sigma I` with a Gershgorin
/// shift `sigma` so each run converges to the extreme eigenvalue from the
/// corresponding end of the spectrum; the norm is the larger of the two.
pub fn spectral_norm_symmetric(a: ArrayView2<f64>, max_iter: usize, tol: f64) -> Result<f64> {
    let m = a.nrows();
    if m != a.ncols() {
        return Err(Error::invalid("matrix must be square"));
    }
    if m == 0 {
        return Ok(0.0);
    }
    let sigma = 1.0
        + a.rows()
            .into_iter()
            .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0f64, f64::max);
    let hi = shifted_top_eigenvalue(&a, sigma, 1.0, max_iter, tol)? - sigma;
    let lo = shifted_top_eigenvalue(&a, sigma, -1.0, max_iter, tol)? - sigma;
    Ok(hi.max(lo).max(0.0))
}

/// Largest eigenvalue of `sign * A + sigma I` via power iteration with a
/// Rayleigh-quotient stopping rule.
fn shifted_top_eigenvalue(
    a: &ArrayView2<f64>,
    sigma: f64,
    sign: f64,
    max_iter: usize,
    tol: f64,
) -> Result<f64> {
    let m = a.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_d15c);
    let mut x = Array1::from_shape_fn(m, |_| rng.gen_range(-1.0..1.0f64));
    let norm = x.dot(&x).sqrt();
    x /= norm;

    let apply = |x: &Array1<f64>| -> Array1<f64> {
        let mut y = a.dot(x);
        y *= sign;
        y.scaled_add(sigma, x);
        y
    };

    let mut rq_prev = f64::INFINITY;
    for _ in 0..max_iter {
        let y = apply(&x);
        let rq = x.dot(&y);
        let ynorm = y.dot(&y).sqrt();
        if ynorm == 0.0 {
            // Only possible if the shifted matrix annihilates x; sigma >= 1
            // makes this unreachable for finite inputs.
            return Ok(0.0);
        }
        if (rq - rq_prev).abs() <= tol * (1.0 + rq.abs()) {
            return Ok(rq);
        }
        rq_prev = rq;
        x = y / ynorm;
    }
    let residual = {
        let y = apply(&x);
        let rq = x.dot(&y);
        y.iter()
            .zip(x.iter())
            .map(|(yi, xi)| (yi - rq * xi) * (yi - rq * xi))
            .sum::<f64>()
            .sqrt()
    };
    Err(Error::NonConvergence {
        what: "power iteration".to_string(),
        residual,
    })
}

/// Gradient of the closed-form discrepancy with respect to the
/// representation matrix.
///
/// Row `i` is `((2 t_i - 1) / n) * v / sqrt(c^2 + ||v||^2)`; the zero matrix
/// is returned at `v = 0` (a valid subgradient).
pub fn linear_disc_gradient(
    phi: ArrayView2<f64>,
    treatment: ArrayView1<f64>,
) -> Result<Array2<f64>> {
    let report = linear_disc(phi, treatment)?;
    let n = phi.nrows();
    let k = phi.ncols();
    let mut grad = Array2::zeros((n, k));
    let vnorm2 = report.v.dot(&report.v);
    if vnorm2 == 0.0 {
        return Ok(grad);
    }
    let c = report.p - 0.5;
    let denom = (c * c + vnorm2).sqrt();
    for (i, &t) in treatment.iter().enumerate() {
        let scale = (2.0 * t - 1.0) / (n as f64 * denom);
        grad.row_mut(i).assign(&report.v.mapv(|vj| scale * vj));
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Axis};

    fn random_instance(seed: u64, n: usize, k: usize) -> (Array2<f64>, Array1<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = Array2::from_shape_fn((n, k), |_| rng.gen_range(-1.5..1.5));
        // Guarantee both groups nonempty.
        let mut t = Array1::from_shape_fn(n, |_| if rng.gen_bool(0.5) { 1.0 } else { 0.0 });
        t[0] = 1.0;
        t[n - 1] = 0.0;
        (phi, t)
    }

    #[test]
    fn balanced_identical_means_give_zero() {
        let phi = array![[1.0, 2.0], [1.0, 2.0], [1.0, 2.0], [1.0, 2.0]];
        let t = array![1.0, 0.0, 1.0, 0.0];
        let rep = linear_disc(phi.view(), t.view()).unwrap();
        // v = 0.5*mu - 0.5*mu = 0 and p = 1/2.
        assert!(rep.value.abs() < 1e-15);
    }

    #[test]
    fn imbalanced_fraction_with_zero_means() {
        let phi = array![[0.0], [0.0], [0.0], [0.0]];
        let t = array![1.0, 1.0, 1.0, 0.0];
        let rep = linear_disc(phi.view(), t.view()).unwrap();
        assert!((rep.p - 0.75).abs() < 1e-15);
        assert!((rep.value - 0.5).abs() < 1e-15);
    }

    #[test]
    fn two_unit_example_matches_oracle() {
        let phi = array![[2.0], [0.0]];
        let t = array![1.0, 0.0];
        let rep = linear_disc(phi.view(), t.view()).unwrap();
        assert!((rep.v[0] - 1.0).abs() < 1e-15);
        assert!((rep.value - 1.0).abs() < 1e-12);
        // Delta = [[0,1],[1,0]] whose eigenvalues are +-1.
        let oracle = disc_oracle_spectral(phi.view(), t.view()).unwrap();
        assert!((oracle - 1.0).abs() < 1e-10);
    }

    #[test]
    fn one_sided_treatment_errors() {
        let phi = array![[1.0], [2.0]];
        let t = array![1.0, 1.0];
        assert!(linear_disc(phi.view(), t.view()).is_err());
        assert!(disc_oracle_spectral(phi.view(), t.view()).is_err());
    }

    #[test]
    fn oracle_agrees_on_random_sweep() {
        for seed in 0..50u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(900 + seed);
            let n = rng.gen_range(2..30);
            let k = rng.gen_range(1..8);
            let (phi, t) = random_instance(seed, n, k);
            let closed = linear_disc(phi.view(), t.view()).unwrap().value;
            let oracle = disc_oracle_spectral(phi.view(), t.view()).unwrap();
            assert!(
                (closed - oracle).abs() <= 1e-8 * (1.0 + closed),
                "seed {seed}: closed {closed} vs oracle {oracle}"
            );
        }
    }

    #[test]
    fn permutation_and_relabel_invariance() {
        let (phi, t) = random_instance(3, 17, 4);
        let base = linear_disc(phi.view(), t.view()).unwrap().value;

        // Shuffle rows jointly.
        let perm: Vec<usize> = {
            use rand::seq::SliceRandom;
            let mut idx: Vec<usize> = (0..17).collect();
            idx.shuffle(&mut ChaCha8Rng::seed_from_u64(11));
            idx
        };
        let phi_p = phi.select(Axis(0), &perm);
        let t_p = Array1::from_iter(perm.iter().map(|&i| t[i]));
        let shuffled = linear_disc(phi_p.view(), t_p.view()).unwrap().value;
        assert!((base - shuffled).abs() < 1e-12);

        // Relabel t <-> 1 - t.
        let t_flip = t.mapv(|x| 1.0 - x);
        let flipped = linear_disc(phi.view(), t_flip.view()).unwrap().value;
        assert!((base - flipped).abs() < 1e-12);
    }

    #[test]
    fn scale_covariance() {
        let (phi, t) = random_instance(8, 14, 3);
        let r1 = linear_disc(phi.view(), t.view()).unwrap();
        let phi_scaled = phi.mapv(|x| 2.5 * x);
        let r2 = linear_disc(phi_scaled.view(), t.view()).unwrap();
        for (a, b) in r1.v.iter().zip(r2.v.iter()) {
            assert!((2.5 * a - b).abs() < 1e-12);
        }
        assert!(r2.value >= r1.value - 1e-12);
    }

    #[test]
    fn weighted_disc_matches_reweighted_matrix() {
        let x = array![[2.0, -1.0], [0.0, 3.0], [1.0, 1.0], [4.0, 0.5]];
        let t = array![1.0, 0.0, 1.0, 0.0];
        let w = array![0.25, 0.75];
        let direct = weighted_linear_disc(x.view(), t.view(), w.view()).unwrap();
        let xw = {
            let mut xw = x.clone();
            for mut row in xw.rows_mut() {
                row[0] *= 0.25;
                row[1] *= 0.75;
            }
            xw
        };
        let via = linear_disc(xw.view(), t.view()).unwrap().value;
        assert!((direct - via).abs() < 1e-14);
    }

    #[test]
    fn weighted_disc_hand_example() {
        // Uniform w on d = 2, group means mu1 = (2, 0), mu0 = (0, 0), p = 1/2:
        // v = (1, 0), W v = (0.5, 0), value = 0.5.
        let x = array![[2.0, 0.0], [2.0, 0.0], [0.0, 0.0], [0.0, 0.0]];
        let t = array![1.0, 1.0, 0.0, 0.0];
        let w = array![0.5, 0.5];
        let value = weighted_linear_disc(x.view(), t.view(), w.view()).unwrap();
        assert!((value - 0.5).abs() < 1e-14);
    }

    #[test]
    fn weighted_disc_kills_imbalanced_coordinate() {
        // Groups differ only in coordinate 0; zero weight there and p = 1/2
        // leaves nothing.
        let x = array![[5.0, 1.0], [6.0, 2.0], [0.0, 1.0], [-1.0, 2.0]];
        let t = array![1.0, 1.0, 0.0, 0.0];
        let w = array![0.0, 1.0];
        let value = weighted_linear_disc(x.view(), t.view(), w.view()).unwrap();
        // Coordinate 1 has identical group means (1.5), so v = 0 entirely.
        assert!(value.abs() < 1e-14);
    }

    #[test]
    fn weighted_disc_rejects_off_simplex() {
        let x = array![[1.0], [2.0]];
        let t = array![1.0, 0.0];
        let w = array![0.7];
        assert!(weighted_linear_disc(x.view(), t.view(), w.view()).is_err());
    }

    #[test]
    fn gradient_zero_at_v_zero() {
        let phi = array![[1.0], [1.0]];
        let t = array![1.0, 0.0];
        let g = linear_disc_gradient(phi.view(), t.view()).unwrap();
        assert!(g.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn gradient_hand_example() {
        let phi = array![[2.0], [0.0]];
        let t = array![1.0, 0.0];
        let g = linear_disc_gradient(phi.view(), t.view()).unwrap();
        assert!((g[[0, 0]] - 0.5).abs() < 1e-12);
        assert!((g[[1, 0]] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let h = 1e-6;
        for seed in 0..10u64 {
            let (phi, t) = random_instance(40 + seed, 8, 3);
            let g = linear_disc_gradient(phi.view(), t.view()).unwrap();
            for i in 0..8 {
                for j in 0..3 {
                    let mut plus = phi.clone();
                    plus[[i, j]] += h;
                    let mut minus = phi.clone();
                    minus[[i, j]] -= h;
                    let fd = (linear_disc(plus.view(), t.view()).unwrap().value
                        - linear_disc(minus.view(), t.view()).unwrap().value)
                        / (2.0 * h);
                    let denom = g[[i, j]].abs().max(fd.abs()).max(1.0);
                    assert!(
                        (g[[i, j]] - fd).abs() / denom <= 1e-6,
                        "seed {seed} entry ({i},{j}): analytic {} vs fd {fd}",
                        g[[i, j]]
                    );
                }
            }
        }
    }

    #[test]
    fn constant_representation_balanced_gives_zero_oracle() {
        let phi = array![[3.0], [3.0], [3.0], [3.0]];
        let t = array![1.0, 0.0, 1.0, 0.0];
        let oracle = disc_oracle_spectral(phi.view(), t.view()).unwrap();
        assert!(oracle.abs() < 1e-10);
    }

    #[test]
    fn power_iteration_reports_non_convergence() {
        // An exhausted iteration budget must surface as an error carrying the
        // eigenvector residual.
        let a = array![[2.0, 1.0, 0.0], [1.0, -1.0, 0.5], [0.0, 0.5, 1.5]];
        match spectral_norm_symmetric(a.view(), 1, 1e-30) {
            Err(Error::NonConvergence { residual, .. }) => assert!(residual.is_finite()),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
