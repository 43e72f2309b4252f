//! Causal-effect estimators on labels (MD, stratified MD, IPW, DR) and the
//! matching affine constraint systems on model weights.
//!
//! Every estimator here is linear in the label vector, so each one has a
//! constraint-vector form c with c'y equal to the estimate; constraining
//! c'Xw = q makes the estimator of the model's predictions exactly zero.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::data::{index_sets, Dataset, Task};
use crate::error::{Error, Result};
use crate::glm;
use crate::linalg;

/// Which estimator a constraint system encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintKind {
    SingleMd,
    MultiMd(usize),
    Ipw,
    Dr,
}

/// Affine constraint system P w = q with full row rank.
#[derive(Debug, Clone)]
pub struct ConstraintSystem {
    pub p: Array2<f64>,
    pub q: Array1<f64>,
    pub kind: ConstraintKind,
}

/// Row-rank guard: the projection step and the KKT solver both invert
/// P P^T, so a rank-deficient P is rejected up front.
const MAX_CONDITION: f64 = 1e12;

impl ConstraintSystem {
    pub fn new(p: Array2<f64>, q: Array1<f64>, kind: ConstraintKind) -> Result<Self> {
        if p.nrows() != q.len() {
            return Err(Error::Validation(format!(
                "constraint rows ({}) and q length ({}) differ",
                p.nrows(),
                q.len()
            )));
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateConstraint(
                "constraint matrix has non-finite entries".into(),
            ));
        }
        let ppt = p.dot(&p.t());
        if linalg::symmetric_condition(&ppt) > MAX_CONDITION {
            return Err(Error::DegenerateConstraint(format!(
                "P P^T is singular to working precision ({} rows, condition > {MAX_CONDITION:.0e})",
                p.nrows()
            )));
        }
        Ok(ConstraintSystem { p, q, kind })
    }

    pub fn m(&self) -> usize {
        self.p.nrows()
    }
}

/// Group-wise outcome model predictions for every instance.
#[derive(Debug, Clone)]
pub struct OutcomeModels {
    pub g_plus: Array1<f64>,
    pub g_minus: Array1<f64>,
    pub weights_plus: Array1<f64>,
    pub weights_minus: Array1<f64>,
}

fn check_groups(s: &Array1<f64>) -> Result<(Vec<usize>, Vec<usize>)> {
    let (plus, minus) = index_sets(s);
    if plus.is_empty() || minus.is_empty() {
        return Err(Error::Estimator(
            "sensitive vector is one-sided: both groups must be nonempty".into(),
        ));
    }
    Ok((plus, minus))
}

fn check_scores(z: &Array1<f64>, n: usize) -> Result<()> {
    if z.len() != n {
        return Err(Error::Estimator(format!(
            "score vector length {} does not match N = {n}",
            z.len()
        )));
    }
    if z.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
        return Err(Error::Estimator(
            "propensity scores must lie strictly inside (0, 1)".into(),
        ));
    }
    Ok(())
}

/// MD: mean of y over I+ minus mean over I-.
pub fn mean_difference(y: &Array1<f64>, s: &Array1<f64>) -> Result<f64> {
    let (plus, minus) = check_groups(s)?;
    if y.len() != s.len() {
        return Err(Error::Estimator("y and s lengths differ".into()));
    }
    let mean = |idx: &[usize]| idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64;
    Ok(mean(&plus) - mean(&minus))
}

/// Constraint vector d with d'y = mean_difference(y, s) for every y.
pub fn md_constraint_vector(s: &Array1<f64>) -> Result<Array1<f64>> {
    let (plus, minus) = check_groups(s)?;
    let np = plus.len() as f64;
    let nm = minus.len() as f64;
    Ok(s.mapv(|si| if si == 1.0 { 1.0 / np } else { -1.0 / nm }))
}

/// IPW estimate: self-normalized inverse-propensity-weighted group means.
pub fn ipw_estimate(y: &Array1<f64>, s: &Array1<f64>, z: &Array1<f64>) -> Result<f64> {
    Ok(ipw_constraint_vector(s, z)?.dot(y))
}

/// Constraint vector h = a/(1'a) - b/(1'b) with a_i = s_i/z_i and
/// b_i = (1-s_i)/(1-z_i); h'y equals the IPW estimate for every y.
pub fn ipw_constraint_vector(s: &Array1<f64>, z: &Array1<f64>) -> Result<Array1<f64>> {
    check_groups(s)?;
    check_scores(z, s.len())?;
    if s.len() != z.len() {
        return Err(Error::Estimator("s and z lengths differ".into()));
    }
    let n = s.len();
    let mut a = Array1::zeros(n);
    let mut b = Array1::zeros(n);
    for i in 0..n {
        if s[i] == 1.0 {
            a[i] = 1.0 / z[i];
        } else {
            b[i] = 1.0 / (1.0 - z[i]);
        }
    }
    let a_sum = a.sum();
    let b_sum = b.sum();
    Ok(&a / a_sum - &b / b_sum)
}

/// Fits G+ on I+ rows and G- on I- rows, each on the explanatory columns
/// plus an intercept, and predicts both for all N rows. Regression uses
/// least squares, classification a logistic fit with probability outputs.
/// Groups with at most d_e + 1 rows get a 1e-6 ridge on the non-intercept
/// coefficients so tiny groups still produce a usable model.
pub fn fit_outcome_models(dataset: &Dataset) -> Result<OutcomeModels> {
    if dataset.explanatory_idx.is_empty() {
        return Err(Error::Estimator(
            "outcome models require a nonempty explanatory column set".into(),
        ));
    }
    let (plus, minus) = check_groups(&dataset.s)?;
    let xe = dataset.x_explanatory();
    let n = xe.nrows();
    let d_e = xe.ncols();

    let mut design = Array2::ones((n, d_e + 1));
    design.slice_mut(ndarray::s![.., ..d_e]).assign(&xe);

    let fit_group = |rows: &[usize]| -> Array1<f64> {
        let mut sub = Array2::zeros((rows.len(), d_e + 1));
        let mut sub_y = Array1::zeros(rows.len());
        for (k, &i) in rows.iter().enumerate() {
            sub.row_mut(k).assign(&design.row(i));
            sub_y[k] = dataset.y[i];
        }
        match dataset.task {
            Task::Regression => {
                let ridge = if rows.len() <= d_e + 1 {
                    Some(1e-6)
                } else {
                    None
                };
                glm::least_squares(&sub, &sub_y, ridge)
            }
            Task::Classification => glm::logistic_newton(&sub, &sub_y, 100, 1e-10).weights,
        }
    };
    let weights_plus = fit_group(&plus);
    let weights_minus = fit_group(&minus);

    let predict = |w: &Array1<f64>| -> Array1<f64> {
        let t = design.dot(w);
        match dataset.task {
            Task::Regression => t,
            Task::Classification => t.mapv(glm::sigmoid),
        }
    };
    Ok(OutcomeModels {
        g_plus: predict(&weights_plus),
        g_minus: predict(&weights_minus),
        weights_plus,
        weights_minus,
    })
}

/// DR estimate:
/// (1/N) sum [ (a_i - b_i) y_i + (1 - a_i) g+_i - (1 - b_i) g-_i ]
/// with the raw (non-normalized) weights a_i = s_i/z_i, b_i = (1-s_i)/(1-z_i).
pub fn dr_estimate(
    y: &Array1<f64>,
    s: &Array1<f64>,
    z: &Array1<f64>,
    models: &OutcomeModels,
) -> Result<f64> {
    check_scores(z, s.len())?;
    if y.len() != s.len() || models.g_plus.len() != s.len() || models.g_minus.len() != s.len() {
        return Err(Error::Estimator("input lengths differ".into()));
    }
    let n = s.len();
    let mut total = 0.0;
    for i in 0..n {
        let (a, b) = if s[i] == 1.0 {
            (1.0 / z[i], 0.0)
        } else {
            (0.0, 1.0 / (1.0 - z[i]))
        };
        total += (a - b) * y[i] + (1.0 - a) * models.g_plus[i] - (1.0 - b) * models.g_minus[i];
    }
    Ok(total / n as f64)
}

/// DR constraint on model weights: P = (a - b)^T X (one row),
/// q = (1 - b)^T g- - (1 - a)^T g+. Any w with P w = q makes the DR
/// estimate of the predictions X w exactly zero; the 1/N factor cancels.
pub fn dr_constraint(
    x: &Array2<f64>,
    s: &Array1<f64>,
    z: &Array1<f64>,
    models: &OutcomeModels,
) -> Result<ConstraintSystem> {
    check_groups(s)?;
    check_scores(z, s.len())?;
    let n = x.nrows();
    if s.len() != n {
        return Err(Error::Estimator("X and s row counts differ".into()));
    }
    let mut coeff = Array1::zeros(n);
    let mut q_val = 0.0;
    for i in 0..n {
        let (a, b) = if s[i] == 1.0 {
            (1.0 / z[i], 0.0)
        } else {
            (0.0, 1.0 / (1.0 - z[i]))
        };
        coeff[i] = a - b;
        q_val += (1.0 - b) * models.g_minus[i] - (1.0 - a) * models.g_plus[i];
    }
    let row = coeff.dot(x);
    if row.iter().all(|&v| v.abs() < 1e-300) {
        return Err(Error::DegenerateConstraint(
            "DR constraint row is identically zero".into(),
        ));
    }
    let p = row.insert_axis(ndarray::Axis(0));
    ConstraintSystem::new(p, Array1::from(vec![q_val]), ConstraintKind::Dr)
}

/// Single-MD constraint system: one row d^T X, q = 0.
pub fn single_md_constraint(x: &Array2<f64>, s: &Array1<f64>) -> Result<ConstraintSystem> {
    let d = md_constraint_vector(s)?;
    let p = d.dot(x).insert_axis(ndarray::Axis(0));
    ConstraintSystem::new(p, Array1::zeros(1), ConstraintKind::SingleMd)
}

/// IPW constraint system: one row h^T X, q = 0.
pub fn ipw_constraint(
    x: &Array2<f64>,
    s: &Array1<f64>,
    z: &Array1<f64>,
) -> Result<ConstraintSystem> {
    let h = ipw_constraint_vector(s, z)?;
    let p = h.dot(x).insert_axis(ndarray::Axis(0));
    ConstraintSystem::new(p, Array1::zeros(1), ConstraintKind::Ipw)
}

/// Splits indices into K strata by propensity score quantiles: stable sort
/// by (z, original index), cut at positions floor(kN/K). Strata are ordered
/// by increasing score and partition [0, N).
pub fn stratify(z: &Array1<f64>, k: usize) -> Result<Vec<Vec<usize>>> {
    let n = z.len();
    if k == 0 || k > n {
        return Err(Error::Stratification { k });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        z[i].partial_cmp(&z[j])
            .expect("scores must not be NaN")
            .then(i.cmp(&j))
    });
    let mut strata = Vec::with_capacity(k);
    for stratum in 0..k {
        let lo = stratum * n / k;
        let hi = (stratum + 1) * n / k;
        if lo == hi {
            return Err(Error::Stratification { k });
        }
        strata.push(order[lo..hi].to_vec());
    }
    Ok(strata)
}

/// Stratum-wise MD constraints: row k is the stratum's MD constraint vector
/// applied to the stratum's rows of X; q = 0. A stratum whose sensitive
/// values are one-sided makes Multi MD infeasible at this K.
pub fn multi_md_constraints(
    x: &Array2<f64>,
    s: &Array1<f64>,
    z: &Array1<f64>,
    k: usize,
) -> Result<ConstraintSystem> {
    check_groups(s)?;
    let strata = stratify(z, k)?;
    let d = x.ncols();
    let mut p = Array2::zeros((k, d));
    for (stratum_idx, rows) in strata.iter().enumerate() {
        let np = rows.iter().filter(|&&i| s[i] == 1.0).count();
        let nm = rows.len() - np;
        if np == 0 || nm == 0 {
            return Err(Error::MultiMdInfeasible {
                k,
                stratum: stratum_idx,
            });
        }
        let (np, nm) = (np as f64, nm as f64);
        for &i in rows {
            let weight = if s[i] == 1.0 { 1.0 / np } else { -1.0 / nm };
            for j in 0..d {
                p[[stratum_idx, j]] += weight * x[[i, j]];
            }
        }
    }
    ConstraintSystem::new(p, Array1::zeros(k), ConstraintKind::MultiMd(k))
}

/// MD of each stratum of y under the given stratification.
pub fn stratified_mean_differences(
    y: &Array1<f64>,
    s: &Array1<f64>,
    z: &Array1<f64>,
    k: usize,
) -> Result<Vec<f64>> {
    let strata = stratify(z, k)?;
    let mut out = Vec::with_capacity(k);
    for (stratum_idx, rows) in strata.iter().enumerate() {
        let sub_y = Array1::from_iter(rows.iter().map(|&i| y[i]));
        let sub_s = Array1::from_iter(rows.iter().map(|&i| s[i]));
        let md = mean_difference(&sub_y, &sub_s).map_err(|_| Error::MultiMdInfeasible {
            k,
            stratum: stratum_idx,
        })?;
        out.push(md);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn md_of_known_vectors() {
        let y = array![1.0, 2.0, 3.0, 4.0];
        let s = array![1.0, 1.0, 0.0, 0.0];
        assert_abs_diff_eq!(mean_difference(&y, &s).unwrap(), -2.0);

        let y2 = array![5.0, 3.0];
        let s2 = array![1.0, 0.0];
        assert_abs_diff_eq!(mean_difference(&y2, &s2).unwrap(), 2.0);
    }

    #[test]
    fn md_of_constant_labels_is_zero() {
        let y = array![7.0, 7.0, 7.0];
        let s = array![1.0, 0.0, 1.0];
        assert_abs_diff_eq!(mean_difference(&y, &s).unwrap(), 0.0);
    }

    #[test]
    fn md_one_sided_is_estimator_error() {
        let y = array![1.0, 2.0];
        let s = array![1.0, 1.0];
        assert!(matches!(mean_difference(&y, &s), Err(Error::Estimator(_))));
    }

    #[test]
    fn md_constraint_vector_matches_definition() {
        let s = array![1.0, 1.0, 0.0, 0.0];
        let d = md_constraint_vector(&s).unwrap();
        assert_eq!(d.to_vec(), vec![0.5, 0.5, -0.5, -0.5]);
    }

    #[test]
    fn md_vector_norm_matches_group_size_identity() {
        let s = array![1.0, 0.0, 0.0, 1.0, 0.0];
        let d = md_constraint_vector(&s).unwrap();
        let norm_sq: f64 = d.iter().map(|v| v * v).sum();
        assert_eq!(norm_sq, 1.0 / 2.0 + 1.0 / 3.0);
    }

    #[test]
    fn ipw_single_member_groups_cancel_weights() {
        let y = array![1.0, 0.0];
        let s = array![1.0, 0.0];
        let z = array![0.8, 0.2];
        assert_abs_diff_eq!(ipw_estimate(&y, &s, &z).unwrap(), 1.0);
    }

    #[test]
    fn ipw_with_uniform_scores_reduces_to_md() {
        let y = array![1.0, 2.0, 3.0, 4.0];
        let s = array![1.0, 1.0, 0.0, 0.0];
        let z = array![0.5, 0.5, 0.5, 0.5];
        assert_abs_diff_eq!(ipw_estimate(&y, &s, &z).unwrap(), -2.0, epsilon = 1e-12);
    }

    #[test]
    fn ipw_of_zero_labels_is_zero() {
        let y = array![0.0, 0.0, 0.0];
        let s = array![1.0, 0.0, 1.0];
        let z = array![0.3, 0.4, 0.9];
        assert_abs_diff_eq!(ipw_estimate(&y, &s, &z).unwrap(), 0.0);
    }

    #[test]
    fn ipw_vector_on_two_points() {
        let s = array![1.0, 0.0];
        let z = array![0.5, 0.5];
        let h = ipw_constraint_vector(&s, &z).unwrap();
        assert_abs_diff_eq!(h[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h[1], -1.0, epsilon = 1e-12);
    }

    #[test]
    fn ipw_vector_with_constant_group_rate_equals_md_vector() {
        let s = array![1.0, 1.0, 0.0, 0.0, 1.0, 0.0];
        let rate = 0.5;
        let z = Array1::from_elem(6, rate);
        let h = ipw_constraint_vector(&s, &z).unwrap();
        let d = md_constraint_vector(&s).unwrap();
        for i in 0..6 {
            assert_abs_diff_eq!(h[i], d[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn dr_direct_arithmetic_example() {
        let y = array![2.0, 0.0];
        let s = array![1.0, 0.0];
        let z = array![0.5, 0.5];
        let models = OutcomeModels {
            g_plus: array![2.0, 2.0],
            g_minus: array![0.0, 0.0],
            weights_plus: array![],
            weights_minus: array![],
        };
        assert_abs_diff_eq!(dr_estimate(&y, &s, &z, &models).unwrap(), 2.0);
    }

    #[test]
    fn dr_with_zero_models_and_uniform_scores_is_md_when_balanced() {
        let y = array![1.0, 2.0, 3.0, 4.0];
        let s = array![1.0, 1.0, 0.0, 0.0];
        let z = array![0.5, 0.5, 0.5, 0.5];
        let models = OutcomeModels {
            g_plus: Array1::zeros(4),
            g_minus: Array1::zeros(4),
            weights_plus: array![],
            weights_minus: array![],
        };
        let dr = dr_estimate(&y, &s, &z, &models).unwrap();
        assert_abs_diff_eq!(dr, -2.0, epsilon = 1e-12);
    }

    #[test]
    fn dr_of_all_zero_inputs_is_zero() {
        let y = array![0.0, 0.0];
        let s = array![1.0, 0.0];
        let z = array![0.3, 0.7];
        let models = OutcomeModels {
            g_plus: Array1::zeros(2),
            g_minus: Array1::zeros(2),
            weights_plus: array![],
            weights_minus: array![],
        };
        assert_abs_diff_eq!(dr_estimate(&y, &s, &z, &models).unwrap(), 0.0);
    }

    #[test]
    fn dr_constraint_on_identity_design() {
        let x = Array2::eye(2);
        let s = array![1.0, 0.0];
        let z = array![0.5, 0.5];
        let models = OutcomeModels {
            g_plus: Array1::zeros(2),
            g_minus: Array1::zeros(2),
            weights_plus: array![],
            weights_minus: array![],
        };
        let cs = dr_constraint(&x, &s, &z, &models).unwrap();
        assert_eq!(cs.m(), 1);
        assert_abs_diff_eq!(cs.p[[0, 0]], 2.0);
        assert_abs_diff_eq!(cs.p[[0, 1]], -2.0);
        assert_abs_diff_eq!(cs.q[0], 0.0);
    }

    #[test]
    fn dr_constraint_zeroes_the_dr_estimate_of_predictions() {
        // Any w on the constraint plane must produce DR(Xw) = 0.
        let x = array![[1.0, 0.5], [0.2, -1.0], [-0.3, 0.8], [0.9, 0.1],];
        let s = array![1.0, 0.0, 1.0, 0.0];
        let z = array![0.6, 0.3, 0.7, 0.4];
        let models = OutcomeModels {
            g_plus: array![0.4, -0.2, 0.1, 0.3],
            g_minus: array![-0.1, 0.2, 0.0, -0.4],
            weights_plus: array![],
            weights_minus: array![],
        };
        let cs = dr_constraint(&x, &s, &z, &models).unwrap();
        // Solve the single equation for w = (t, w2(t)) at a few t values.
        for &t in &[0.0, 1.0, -2.5] {
            let w2 = (cs.q[0] - cs.p[[0, 0]] * t) / cs.p[[0, 1]];
            let w = array![t, w2];
            let preds = x.dot(&w);
            let dr = dr_estimate(&preds, &s, &z, &models).unwrap();
            assert_abs_diff_eq!(dr, 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn stratify_median_split() {
        let z = array![0.1, 0.2, 0.8, 0.9];
        let strata = stratify(&z, 2).unwrap();
        assert_eq!(strata, vec![vec![0, 1], vec![2, 3]]);
    }

    #[test]
    fn stratify_single_stratum_keeps_everything() {
        let z = array![0.5, 0.1, 0.9];
        let strata = stratify(&z, 1).unwrap();
        assert_eq!(strata[0].len(), 3);
    }

    #[test]
    fn stratify_all_ties_splits_by_original_order() {
        let z = Array1::from_elem(4, 0.5);
        let strata = stratify(&z, 2).unwrap();
        assert_eq!(strata, vec![vec![0, 1], vec![2, 3]]);
    }

    #[test]
    fn stratify_uneven_sizes_follow_floor_cuts() {
        let z = array![0.1, 0.2, 0.3, 0.4, 0.5];
        let strata = stratify(&z, 2).unwrap();
        assert_eq!(strata[0].len(), 2);
        assert_eq!(strata[1].len(), 3);
    }

    #[test]
    fn multi_with_one_stratum_equals_single_constraint() {
        let x = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0], [7.0, 8.0]];
        let s = array![1.0, 0.0, 1.0, 0.0];
        let z = array![0.4, 0.5, 0.6, 0.7];
        let multi = multi_md_constraints(&x, &s, &z, 1).unwrap();
        let single = single_md_constraint(&x, &s).unwrap();
        for j in 0..2 {
            assert_abs_diff_eq!(multi.p[[0, j]], single.p[[0, j]], epsilon = 1e-12);
        }
    }

    #[test]
    fn one_sided_stratum_is_infeasible() {
        // Low-score half is all group 0, so K = 2 cannot be posed.
        let x = Array2::eye(4);
        let s = array![0.0, 0.0, 1.0, 1.0];
        let z = array![0.1, 0.2, 0.8, 0.9];
        let err = multi_md_constraints(&x, &s, &z, 2).unwrap_err();
        match err {
            Error::MultiMdInfeasible { k, stratum } => {
                assert_eq!(k, 2);
                assert_eq!(stratum, 0);
            }
            other => panic!("expected MultiMdInfeasible, got {other:?}"),
        }
    }

    #[test]
    fn rank_deficient_constraints_are_rejected() {
        let p = array![[1.0, 2.0], [2.0, 4.0]];
        let err = ConstraintSystem::new(p, Array1::zeros(2), ConstraintKind::MultiMd(2));
        assert!(matches!(err, Err(Error::DegenerateConstraint(_))));
    }

    #[test]
    fn stratified_mds_match_per_stratum_means() {
        let y = array![1.0, 2.0, 3.0, 4.0];
        let s = array![1.0, 0.0, 1.0, 0.0];
        let z = array![0.1, 0.2, 0.8, 0.9];
        let mds = stratified_mean_differences(&y, &s, &z, 2).unwrap();
        assert_abs_diff_eq!(mds[0], -1.0);
        assert_abs_diff_eq!(mds[1], -1.0);
    }
}
