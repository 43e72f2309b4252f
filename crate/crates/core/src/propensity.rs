//! Propensity score estimation: logistic MLE of s on the explanatory
//! features, plus AUC as the goodness-of-fit diagnostic.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::glm;

/// Scores are clipped into [EPS_CLIP, 1 - EPS_CLIP] so the IPW weights
/// 1/z and 1/(1-z) stay finite even when the fit saturates.
pub const EPS_CLIP: f64 = 1e-6;

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iter: 100,
            tol: 1e-10,
        }
    }
}

/// Fitted propensity model: per-row scores, the logistic weights that
/// produced them (explanatory coefficients first, intercept last), and AUC.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropensityScores {
    pub z: Array1<f64>,
    pub model_weights: Array1<f64>,
    pub auc: f64,
}

/// Fits P(S=1 | X_e) by damped-Newton logistic regression with an
/// intercept, starting from zero weights. Perfect separation is expected
/// on some inputs and is not an error; the scores simply saturate toward
/// s before clipping.
pub fn fit_propensity(dataset: &Dataset, opts: FitOptions) -> Result<PropensityScores> {
    if dataset.explanatory_idx.is_empty() {
        return Err(Error::Validation(
            "propensity fitting requires a nonempty explanatory column set".into(),
        ));
    }
    let xe = dataset.x_explanatory();
    if xe.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation(
            "explanatory features contain non-finite values".into(),
        ));
    }
    let n = xe.nrows();
    let d_e = xe.ncols();
    let mut design = Array2::ones((n, d_e + 1));
    design.slice_mut(ndarray::s![.., ..d_e]).assign(&xe);

    let fit = glm::logistic_newton(&design, &dataset.s, opts.max_iter, opts.tol);
    let z = design
        .dot(&fit.weights)
        .mapv(|t| glm::sigmoid(t).clamp(EPS_CLIP, 1.0 - EPS_CLIP));
    let auc = compute_auc(&z, &dataset.s)?;
    Ok(PropensityScores {
        z,
        model_weights: fit.weights,
        auc,
    })
}

/// Mann-Whitney AUC: the fraction of (positive, negative) pairs ranked
/// correctly by `z`, ties counted one half. Computed through average ranks
/// in O(N log N).
pub fn compute_auc(z: &Array1<f64>, s: &Array1<f64>) -> Result<f64> {
    if z.len() != s.len() {
        return Err(Error::Validation(format!(
            "score and group vectors differ in length: {} vs {}",
            z.len(),
            s.len()
        )));
    }
    let n = z.len();
    let n_plus = s.iter().filter(|&&v| v == 1.0).count();
    let n_minus = n - n_plus;
    if n_plus == 0 || n_minus == 0 {
        return Err(Error::Validation("AUC needs both groups nonempty".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| z[i].partial_cmp(&z[j]).expect("scores must not be NaN"));

    // Average 1-based ranks within tie groups, then the rank-sum formula.
    let mut rank_sum_plus = 0.0;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && z[order[end]] == z[order[start]] {
            end += 1;
        }
        let avg_rank = ((start + 1 + end) as f64) / 2.0;
        for &idx in &order[start..end] {
            if s[idx] == 1.0 {
                rank_sum_plus += avg_rank;
            }
        }
        start = end;
    }
    let n_plus_f = n_plus as f64;
    let n_minus_f = n_minus as f64;
    Ok((rank_sum_plus - n_plus_f * (n_plus_f + 1.0) / 2.0) / (n_plus_f * n_minus_f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Task;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn dataset_from_xe(xe: Array2<f64>, s: Array1<f64>) -> Dataset {
        let n = xe.nrows();
        let names = (0..xe.ncols()).map(|j| format!("e{j}")).collect();
        Dataset::new(
            xe.clone(),
            s,
            Array1::zeros(n),
            (0..xe.ncols()).collect(),
            Task::Regression,
            names,
            false,
        )
        .unwrap()
    }

    #[test]
    fn perfect_ranking_gives_auc_one() {
        let z = array![0.9, 0.8, 0.2, 0.1];
        let s = array![1.0, 1.0, 0.0, 0.0];
        assert_abs_diff_eq!(compute_auc(&z, &s).unwrap(), 1.0);
    }

    #[test]
    fn all_ties_give_auc_half() {
        let z = array![0.5, 0.5, 0.5, 0.5];
        let s = array![1.0, 1.0, 0.0, 0.0];
        assert_abs_diff_eq!(compute_auc(&z, &s).unwrap(), 0.5);
    }

    #[test]
    fn interleaved_groups_with_separated_scores() {
        let z = array![0.9, 0.3, 0.6, 0.1];
        let s = array![1.0, 0.0, 1.0, 0.0];
        assert_abs_diff_eq!(compute_auc(&z, &s).unwrap(), 1.0);
    }

    #[test]
    fn auc_matches_brute_force_pair_count() {
        let z = array![0.1, 0.4, 0.4, 0.35, 0.8, 0.2, 0.4];
        let s = array![0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0];
        let mut total = 0.0;
        let mut pairs = 0.0;
        for i in 0..z.len() {
            for j in 0..z.len() {
                if s[i] == 1.0 && s[j] == 0.0 {
                    pairs += 1.0;
                    if z[i] > z[j] {
                        total += 1.0;
                    } else if z[i] == z[j] {
                        total += 0.5;
                    }
                }
            }
        }
        assert_abs_diff_eq!(compute_auc(&z, &s).unwrap(), total / pairs, epsilon = 1e-12);
    }

    #[test]
    fn one_sided_groups_error() {
        let z = array![0.1, 0.2];
        let s = array![1.0, 1.0];
        assert!(compute_auc(&z, &s).is_err());
    }

    #[test]
    fn feature_equal_to_s_saturates_scores() {
        let n = 40;
        let s = Array1::from_iter((0..n).map(|i| if i < n / 2 { 1.0 } else { 0.0 }));
        let xe = Array2::from_shape_fn((n, 1), |(i, _)| s[i]);
        let ds = dataset_from_xe(xe, s.clone());
        let scores = fit_propensity(&ds, FitOptions::default()).unwrap();
        for i in 0..n {
            assert!(
                (scores.z[i] - s[i]).abs() <= 0.05,
                "z[{i}] = {} vs s = {}",
                scores.z[i],
                s[i]
            );
        }
        assert!(scores.auc >= 0.99);
    }

    #[test]
    fn zero_feature_balanced_groups_give_half() {
        let n = 20;
        let s = Array1::from_iter((0..n).map(|i| (i % 2) as f64));
        let xe = Array2::zeros((n, 1));
        let ds = dataset_from_xe(xe, s);
        let scores = fit_propensity(&ds, FitOptions::default()).unwrap();
        for &zi in scores.z.iter() {
            assert_abs_diff_eq!(zi, 0.5, epsilon = 1e-9);
        }
    }

    #[test]
    fn scores_are_clipped_into_open_interval() {
        // Strongly separated single feature drives the raw fit to 0/1.
        let n = 60;
        let s = Array1::from_iter((0..n).map(|i| if i < n / 2 { 1.0 } else { 0.0 }));
        let xe = Array2::from_shape_fn((n, 1), |(i, _)| if s[i] == 1.0 { 50.0 } else { -50.0 });
        let ds = dataset_from_xe(xe, s);
        let scores = fit_propensity(&ds, FitOptions::default()).unwrap();
        for &zi in scores.z.iter() {
            assert!((EPS_CLIP..=1.0 - EPS_CLIP).contains(&zi));
        }
    }
}
