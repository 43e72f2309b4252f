//! Shared fitting routines: ordinary least squares and logistic MLE.
//!
//! Callers pass a full design matrix (intercept column included if they
//! want one); weights come back aligned with the design columns.

use ndarray::{Array1, Array2};

use crate::linalg;

/// Least squares on the normal equations. When `ridge` is set, that penalty
/// is added to every diagonal entry except the last (the intercept slot by
/// this crate's column convention). A singular unpenalized system falls
/// back to a 1e-6 ridge rather than failing: group-wise outcome models must
/// stay usable on tiny or collinear groups.
pub fn least_squares(design: &Array2<f64>, y: &Array1<f64>, ridge: Option<f64>) -> Array1<f64> {
    let p = design.ncols();
    let xtx = design.t().dot(design);
    let xty = design.t().dot(y);
    let apply = |lambda: f64| {
        let mut a = xtx.clone();
        for j in 0..p.saturating_sub(1) {
            a[[j, j]] += lambda;
        }
        a
    };
    let first = match ridge {
        Some(lambda) => apply(lambda),
        None => xtx.clone(),
    };
    if let Some(w) = linalg::solve(&first, &xty) {
        return w;
    }
    let fallback = apply(ridge.unwrap_or(0.0).max(1e-6));
    linalg::solve(&fallback, &xty).expect("ridge-regularized normal equations are nonsingular")
}

/// Result of a logistic fit.
pub struct LogisticFit {
    pub weights: Array1<f64>,
    pub iterations: usize,
    /// Final log-likelihood, for monotonicity checks.
    pub log_likelihood: f64,
}

fn log_likelihood(design: &Array2<f64>, targets: &Array1<f64>, w: &Array1<f64>) -> f64 {
    let t = design.dot(w);
    // sum s*t - log(1 + e^t), computed stably for large |t|.
    t.iter()
        .zip(targets.iter())
        .map(|(&ti, &si)| si * ti - softplus(ti))
        .sum()
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Damped Newton maximization of the logistic log-likelihood of `targets`
/// (0/1) on `design`. Starts from zero weights; each Newton direction is
/// halved until the log-likelihood does not decrease, so the likelihood
/// trace is non-decreasing by construction. Perfect separation is not an
/// error: weights simply grow until `max_iter` caps them.
pub fn logistic_newton(
    design: &Array2<f64>,
    targets: &Array1<f64>,
    max_iter: usize,
    tol: f64,
) -> LogisticFit {
    let n = design.nrows();
    let p = design.ncols();
    let mut w = Array1::zeros(p);
    let mut ll = log_likelihood(design, targets, &w);
    let mut iterations = 0;

    for iter in 0..max_iter {
        let t = design.dot(&w);
        let z = t.mapv(sigmoid);
        let residual = targets - &z;
        let grad = design.t().dot(&residual);
        if grad.iter().fold(0.0f64, |m, g| m.max(g.abs())) <= tol {
            break;
        }
        // Hessian of the negative log-likelihood: X^T diag(z(1-z)) X.
        let mut weighted = Array2::zeros((n, p));
        for i in 0..n {
            let wi = z[i] * (1.0 - z[i]);
            for j in 0..p {
                weighted[[i, j]] = design[[i, j]] * wi;
            }
        }
        let hessian = design.t().dot(&weighted);
        let direction = match linalg::solve(&hessian, &grad) {
            Some(dir) => dir,
            None => {
                // Saturated fit: curvature underflows. A small ridge keeps
                // the step defined without visibly moving the optimum.
                let mut damped = hessian.clone();
                for j in 0..p {
                    damped[[j, j]] += 1e-8;
                }
                linalg::solve(&damped, &grad).expect("damped Hessian is nonsingular")
            }
        };
        // Step-halving line search on the log-likelihood.
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..50 {
            let candidate = &w + &(direction.mapv(|v| v * step));
            let cand_ll = log_likelihood(design, targets, &candidate);
            if cand_ll >= ll {
                w = candidate;
                ll = cand_ll;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        iterations = iter + 1;
        if !accepted {
            break;
        }
    }

    LogisticFit {
        weights: w,
        iterations,
        log_likelihood: ll,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn least_squares_recovers_exact_linear_labels() {
        let design = array![[1.0, 1.0], [2.0, 1.0], [3.0, 1.0], [4.0, 1.0]];
        let w_true = array![2.5, -1.0];
        let y = design.dot(&w_true);
        let w = least_squares(&design, &y, None);
        assert_abs_diff_eq!(w[0], 2.5, epsilon = 1e-10);
        assert_abs_diff_eq!(w[1], -1.0, epsilon = 1e-10);
    }

    #[test]
    fn singular_design_falls_back_to_ridge() {
        // Two identical columns: unpenalized normal equations are singular.
        let design = array![[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]];
        let y = array![2.0, 4.0, 6.0];
        let w = least_squares(&design, &y, None);
        let fitted = design.dot(&w);
        for i in 0..3 {
            assert_abs_diff_eq!(fitted[i], y[i], epsilon = 1e-3);
        }
    }

    #[test]
    fn logistic_intercept_only_fit_matches_group_rate() {
        // Design of all-ones: the MLE intercept is logit of the target mean.
        let design = array![[1.0], [1.0], [1.0], [1.0]];
        let targets = array![1.0, 1.0, 1.0, 0.0];
        let fit = logistic_newton(&design, &targets, 100, 1e-12);
        let p = sigmoid(fit.weights[0]);
        assert_abs_diff_eq!(p, 0.75, epsilon = 1e-8);
    }

    #[test]
    fn logistic_balanced_zero_feature_gives_half() {
        let design = array![[0.0, 1.0], [0.0, 1.0], [0.0, 1.0], [0.0, 1.0]];
        let targets = array![1.0, 1.0, 0.0, 0.0];
        let fit = logistic_newton(&design, &targets, 100, 1e-12);
        for i in 0..4 {
            let z = sigmoid(design.row(i).dot(&fit.weights));
            assert_abs_diff_eq!(z, 0.5, epsilon = 1e-10);
        }
    }

    #[test]
    fn logistic_separable_data_saturates_without_error() {
        let design = array![[1.0, 1.0], [2.0, 1.0], [-1.0, 1.0], [-2.0, 1.0]];
        let targets = array![1.0, 1.0, 0.0, 0.0];
        let fit = logistic_newton(&design, &targets, 100, 1e-12);
        for i in 0..4 {
            let z = sigmoid(design.row(i).dot(&fit.weights));
            assert!((z - targets[i]).abs() < 0.05, "z = {z} vs {}", targets[i]);
        }
    }
}
