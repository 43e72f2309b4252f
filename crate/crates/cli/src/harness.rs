//! Experiment harness: runs method suites over repeated synthetic trials
//! (or a fixed CSV dataset) and aggregates plot-ready metrics.

use causalfair_core::data::{Dataset, Task};
use causalfair_core::error::{Error, Result};
use causalfair_core::estimators::{
    dr_estimate, fit_outcome_models, ipw_estimate, mean_difference, multi_md_constraints,
    stratified_mean_differences,
};
use causalfair_core::models::{fit_with_scores, Method, MethodSpec};
use causalfair_core::propensity::{fit_propensity, FitOptions, PropensityScores};
use causalfair_core::solvers::solve_constrained_least_squares;
use causalfair_core::synthetic::{generate_stream, preset, Case, GroundTruth, SyntheticConfig};
use ndarray::Array1;

/// Where trial datasets come from: a synthetic preset regenerated per
/// trial, or one fixed dataset reused across trials.
#[derive(Debug, Clone)]
pub enum DataSource {
    Case(Case),
    Fixed {
        dataset: Box<Dataset>,
        ground_truth: Option<GroundTruth>,
    },
}

/// One row of the tradeoff output. Per-trial rows carry `trial`; aggregate
/// rows leave it empty and fill the standard-error fields instead. Metric
/// fields are empty on infeasible rows.
#[derive(Debug, Clone)]
pub struct MetricsRow {
    pub method: Method,
    pub trial: Option<usize>,
    /// RMSE for regression, mean logistic loss for classification.
    pub loss: Option<f64>,
    /// MD of predictions (linear scores for classification).
    pub md_pred: Option<f64>,
    /// MD of predicted probabilities (classification only).
    pub md_probs: Option<f64>,
    /// md_pred minus the generator's explanatory bias (synthetic only).
    pub discrim_pred: Option<f64>,
    pub infeasible: bool,
    /// Aggregate rows: how many of the trials were infeasible.
    pub infeasible_trials: Option<usize>,
    pub loss_se: Option<f64>,
    pub md_pred_se: Option<f64>,
    pub discrim_pred_se: Option<f64>,
}

/// Squared error of one estimator against the generator's discrimination,
/// averaged over the trials where the estimator could be computed.
#[derive(Debug, Clone)]
pub struct EstimatorSeRow {
    pub estimator: &'static str,
    pub k: Option<usize>,
    pub se: f64,
    pub trials_used: usize,
}

/// Per-trial and aggregated tradeoff metrics.
#[derive(Debug, Clone)]
pub struct TradeoffOutput {
    pub per_trial: Vec<MetricsRow>,
    pub aggregated: Vec<MetricsRow>,
}

fn case_config(case: Case, seed: u64) -> SyntheticConfig {
    let mut config = preset(case);
    config.seed = seed;
    config
}

fn trial_dataset(
    source: &DataSource,
    seed: u64,
    trial: usize,
) -> Result<(Dataset, Option<GroundTruth>)> {
    match source {
        DataSource::Case(case) => {
            let (dataset, gt) = generate_stream(&case_config(*case, seed), trial as u64)?;
            Ok((dataset, Some(gt)))
        }
        DataSource::Fixed {
            dataset,
            ground_truth,
        } => Ok((dataset.as_ref().clone(), *ground_truth)),
    }
}

/// Deterministic holdout split: the trailing fraction of rows is held out
/// for evaluation. fraction = 0 evaluates in-sample on the training rows.
fn split_holdout(dataset: &Dataset, fraction: f64) -> Result<(Dataset, Option<Dataset>)> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::Validation(format!(
            "holdout fraction {fraction} must lie in [0, 1)"
        )));
    }
    if fraction == 0.0 {
        return Ok((dataset.clone(), None));
    }
    let n = dataset.n();
    let n_eval = ((n as f64) * fraction).floor() as usize;
    let n_train = n - n_eval;
    if n_train < 2 || n_eval < 2 {
        return Err(Error::Validation(
            "holdout split leaves fewer than 2 rows on one side".into(),
        ));
    }
    let slice_rows = |from: usize, to: usize| -> Result<Dataset> {
        Dataset::new(
            dataset.x.slice(ndarray::s![from..to, ..]).to_owned(),
            dataset.s.slice(ndarray::s![from..to]).to_owned(),
            dataset.y.slice(ndarray::s![from..to]).to_owned(),
            dataset.explanatory_idx.clone(),
            dataset.task,
            dataset.feature_names.clone(),
            dataset.has_intercept,
        )
    };
    Ok((slice_rows(0, n_train)?, Some(slice_rows(n_train, n)?)))
}

fn logistic_loss_mean(scores: &Array1<f64>, y01: &Array1<f64>) -> f64 {
    let total: f64 = scores
        .iter()
        .zip(y01.iter())
        .map(|(&t, &y)| {
            let margin = -(2.0 * y - 1.0) * t;
            if margin > 0.0 {
                margin + (-margin).exp().ln_1p()
            } else {
                margin.exp().ln_1p()
            }
        })
        .sum();
    total / scores.len() as f64
}

fn metrics_for(
    method: Method,
    trial: usize,
    w: &Array1<f64>,
    eval: &Dataset,
    ground_truth: Option<&GroundTruth>,
) -> Result<MetricsRow> {
    let scores = eval.x.dot(w);
    let md_pred = mean_difference(&scores, &eval.s)?;
    let (loss, md_probs) = match eval.task {
        Task::Regression => {
            let r = &scores - &eval.y;
            ((r.dot(&r) / eval.n() as f64).sqrt(), None)
        }
        Task::Classification => {
            let probs = scores.mapv(causalfair_core::glm::sigmoid);
            (
                logistic_loss_mean(&scores, &eval.y),
                Some(mean_difference(&probs, &eval.s)?),
            )
        }
    };
    Ok(MetricsRow {
        method,
        trial: Some(trial),
        loss: Some(loss),
        md_pred: Some(md_pred),
        md_probs,
        discrim_pred: ground_truth.map(|gt| md_pred - gt.explanatory_bias),
        infeasible: false,
        infeasible_trials: None,
        loss_se: None,
        md_pred_se: None,
        discrim_pred_se: None,
    })
}

fn infeasible_row(method: Method, trial: usize) -> MetricsRow {
    MetricsRow {
        method,
        trial: Some(trial),
        loss: None,
        md_pred: None,
        md_probs: None,
        discrim_pred: None,
        infeasible: true,
        infeasible_trials: None,
        loss_se: None,
        md_pred_se: None,
        discrim_pred_se: None,
    }
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn aggregate(per_trial: &[MetricsRow], methods: &[MethodSpec], trials: usize) -> Vec<MetricsRow> {
    let m = methods.len();
    let mut out = Vec::with_capacity(m);
    for (j, spec) in methods.iter().enumerate() {
        let rows: Vec<&MetricsRow> = (0..trials).map(|t| &per_trial[t * m + j]).collect();
        let feasible: Vec<&&MetricsRow> = rows.iter().filter(|r| !r.infeasible).collect();
        let collect = |get: fn(&MetricsRow) -> Option<f64>| -> Vec<f64> {
            feasible.iter().filter_map(|r| get(r)).collect()
        };
        let stat = |values: Vec<f64>| -> (Option<f64>, Option<f64>) {
            if values.is_empty() {
                (None, None)
            } else {
                let (mean, se) = mean_and_se(&values);
                (Some(mean), Some(se))
            }
        };
        let (loss, loss_se) = stat(collect(|r| r.loss));
        let (md_pred, md_pred_se) = stat(collect(|r| r.md_pred));
        let (md_probs, _) = stat(collect(|r| r.md_probs));
        let (discrim_pred, discrim_pred_se) = stat(collect(|r| r.discrim_pred));
        out.push(MetricsRow {
            method: spec.method,
            trial: None,
            loss,
            md_pred,
            md_probs,
            discrim_pred,
            infeasible: feasible.is_empty(),
            infeasible_trials: Some(trials - feasible.len()),
            loss_se,
            md_pred_se,
            discrim_pred_se,
        });
    }
    out
}

/// Fits every method on every trial dataset and reports training metrics
/// (or holdout metrics when `holdout > 0`). Propensity scores are fitted
/// once per trial and shared across methods. Methods that are infeasible
/// on a trial produce a flagged row instead of aborting the run.
pub fn run_tradeoff(
    source: &DataSource,
    methods: &[MethodSpec],
    trials: usize,
    seed: u64,
    holdout: f64,
) -> Result<TradeoffOutput> {
    if methods.is_empty() {
        return Err(Error::Validation("methods list is empty".into()));
    }
    if trials == 0 {
        return Err(Error::Validation("trials must be at least 1".into()));
    }
    let needs_scores = methods.iter().any(|spec| {
        matches!(
            spec.method,
            Method::MultiMd(_) | Method::FairCeeIpw | Method::FairCeeDr
        )
    });

    let mut per_trial = Vec::with_capacity(trials * methods.len());
    for trial in 0..trials {
        let (dataset, ground_truth) = trial_dataset(source, seed, trial)?;
        let (train, eval) = split_holdout(&dataset, holdout)?;
        let scores: Option<PropensityScores> = if needs_scores {
            Some(fit_propensity(&train, FitOptions::default())?)
        } else {
            None
        };
        for spec in methods {
            match fit_with_scores(&train, spec, scores.as_ref()) {
                Ok(model) => {
                    let eval_data = eval.as_ref().unwrap_or(&train);
                    per_trial.push(metrics_for(
                        spec.method,
                        trial,
                        &model.solution.w,
                        eval_data,
                        ground_truth.as_ref(),
                    )?);
                }
                Err(e) if e.is_infeasibility() => {
                    per_trial.push(infeasible_row(spec.method, trial));
                }
                Err(e) => return Err(e),
            }
        }
    }
    if per_trial.iter().all(|r| r.infeasible) {
        return Err(Error::Harness(
            "every requested method was infeasible in every trial".into(),
        ));
    }
    let aggregated = aggregate(&per_trial, methods, trials);
    Ok(TradeoffOutput {
        per_trial,
        aggregated,
    })
}

/// Largest K in 2..=10 at which Multi MD both poses and does something on
/// at least 30% of the trial datasets: the stratified constraints must be
/// feasible and the constrained least-squares fit must not collapse to the
/// zero solution (||X w|| / ||y|| > 1e-6, the degenerate-case signature).
pub fn probe_max_feasible_k(case: Case, trials: usize, seed: u64) -> Result<usize> {
    if trials == 0 {
        return Err(Error::Validation("trials must be at least 1".into()));
    }
    let config = case_config(case, seed);
    let mut working = [0usize; 9];
    for trial in 0..trials {
        let (dataset, _) = generate_stream(&config, trial as u64)?;
        let scores = fit_propensity(&dataset, FitOptions::default())?;
        let y_norm = dataset.y.dot(&dataset.y).sqrt();
        for k in 2..=10usize {
            let solved = multi_md_constraints(&dataset.x, &dataset.s, &scores.z, k)
                .and_then(|c| solve_constrained_least_squares(&dataset.x, &dataset.y, &c));
            match solved {
                Ok(sol) => {
                    let pred = dataset.x.dot(&sol.w);
                    if pred.dot(&pred).sqrt() / y_norm > 1e-6 {
                        working[k - 2] += 1;
                    }
                }
                Err(e) if e.is_infeasibility() => {}
                Err(e) => return Err(e),
            }
        }
    }
    let threshold = (((trials as f64) * 0.3).ceil() as usize).max(1);
    (2..=10usize)
        .rev()
        .find(|&k| working[k - 2] >= threshold)
        .ok_or_else(|| {
            Error::Harness(format!(
                "no K in 2..=10 was feasible in at least {threshold} of {trials} trials"
            ))
        })
}

/// Per-trial squared errors of the four label estimators against the
/// generator's discrimination, averaged over trials. Stratified MDs are
/// evaluated at the probed max feasible K; trials where that K cannot be
/// stratified are skipped for that row only (`trials_used` records it).
pub fn run_estimator_accuracy(
    case: Case,
    trials: usize,
    seed: u64,
) -> Result<(Vec<EstimatorSeRow>, usize)> {
    let max_k = probe_max_feasible_k(case, trials, seed)?;
    let config = case_config(case, seed);
    let mut single = Vec::with_capacity(trials);
    let mut multi = Vec::new();
    let mut ipw = Vec::with_capacity(trials);
    let mut dr = Vec::with_capacity(trials);
    for trial in 0..trials {
        let (dataset, gt) = generate_stream(&config, trial as u64)?;
        let scores = fit_propensity(&dataset, FitOptions::default())?;
        let discrim = gt.discrim;

        let md = mean_difference(&dataset.y, &dataset.s)?;
        single.push((md - discrim).powi(2));

        match stratified_mean_differences(&dataset.y, &dataset.s, &scores.z, max_k) {
            Ok(mds) => {
                let se = mds.iter().map(|m| (m - discrim).powi(2)).sum::<f64>() / max_k as f64;
                multi.push(se);
            }
            Err(e) if e.is_infeasibility() => {}
            Err(e) => return Err(e),
        }

        let ipw_est = ipw_estimate(&dataset.y, &dataset.s, &scores.z)?;
        ipw.push((ipw_est - discrim).powi(2));

        let models = fit_outcome_models(&dataset)?;
        let dr_est = dr_estimate(&dataset.y, &dataset.s, &scores.z, &models)?;
        dr.push((dr_est - discrim).powi(2));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    let rows = vec![
        EstimatorSeRow {
            estimator: "single_md",
            k: None,
            se: mean(&single),
            trials_used: single.len(),
        },
        EstimatorSeRow {
            estimator: "multi_md",
            k: Some(max_k),
            se: mean(&multi),
            trials_used: multi.len(),
        },
        EstimatorSeRow {
            estimator: "ipw",
            k: None,
            se: mean(&ipw),
            trials_used: ipw.len(),
        },
        EstimatorSeRow {
            estimator: "dr",
            k: None,
            se: mean(&dr),
            trials_used: dr.len(),
        },
    ];
    Ok((rows, max_k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn quick_methods() -> Vec<MethodSpec> {
        vec![
            MethodSpec::new(Method::SingleMd),
            MethodSpec::new(Method::FairCeeIpw),
        ]
    }

    #[test]
    fn aggregates_are_arithmetic_means_of_per_trial_rows() {
        let out = run_tradeoff(
            &DataSource::Case(Case::Default),
            &quick_methods(),
            4,
            123,
            0.0,
        )
        .unwrap();
        assert_eq!(out.per_trial.len(), 8);
        assert_eq!(out.aggregated.len(), 2);
        for (j, agg) in out.aggregated.iter().enumerate() {
            let losses: Vec<f64> = (0..4)
                .map(|t| out.per_trial[t * 2 + j].loss.unwrap())
                .collect();
            let mean = losses.iter().sum::<f64>() / 4.0;
            assert_abs_diff_eq!(agg.loss.unwrap(), mean, epsilon = 1e-12);
            assert_eq!(agg.infeasible_trials, Some(0));
        }
    }

    #[test]
    fn single_md_rows_have_zero_md_and_discrim_equal_to_minus_bias() {
        let out = run_tradeoff(
            &DataSource::Case(Case::Default),
            &[MethodSpec::new(Method::SingleMd)],
            3,
            7,
            0.0,
        )
        .unwrap();
        let gt = causalfair_core::synthetic::GroundTruth::from_config(
            &causalfair_core::synthetic::preset(Case::Default),
        );
        for row in &out.per_trial {
            assert_abs_diff_eq!(row.md_pred.unwrap(), 0.0, epsilon = 1e-8);
            assert_abs_diff_eq!(
                row.discrim_pred.unwrap(),
                -gt.explanatory_bias,
                epsilon = 1e-6
            );
        }
    }

    #[test]
    fn infeasible_methods_are_flagged_not_fatal() {
        // K = 4 on the imbalance preset cannot stratify two-sidedly.
        let methods = vec![
            MethodSpec::new(Method::SingleMd),
            MethodSpec::new(Method::MultiMd(4)),
        ];
        let out = run_tradeoff(&DataSource::Case(Case::Imbalance), &methods, 3, 11, 0.0).unwrap();
        let multi_rows: Vec<&MetricsRow> = out
            .per_trial
            .iter()
            .filter(|r| r.method == Method::MultiMd(4))
            .collect();
        assert_eq!(multi_rows.len(), 3);
        assert!(multi_rows.iter().all(|r| r.infeasible));
        let agg = out
            .aggregated
            .iter()
            .find(|r| r.method == Method::MultiMd(4))
            .unwrap();
        assert!(agg.infeasible);
        assert_eq!(agg.infeasible_trials, Some(3));
    }

    #[test]
    fn all_methods_infeasible_is_a_harness_error() {
        let out = run_tradeoff(
            &DataSource::Case(Case::Imbalance),
            &[MethodSpec::new(Method::MultiMd(4))],
            2,
            11,
            0.0,
        );
        match out {
            Err(Error::Harness(_)) => {}
            other => panic!("expected a harness error, got {other:?}"),
        }
    }

    #[test]
    fn holdout_changes_the_evaluation_rows() {
        let in_sample = run_tradeoff(
            &DataSource::Case(Case::Default),
            &[MethodSpec::new(Method::SingleMd)],
            1,
            5,
            0.0,
        )
        .unwrap();
        let held_out = run_tradeoff(
            &DataSource::Case(Case::Default),
            &[MethodSpec::new(Method::SingleMd)],
            1,
            5,
            0.25,
        )
        .unwrap();
        let a = in_sample.per_trial[0].loss.unwrap();
        let b = held_out.per_trial[0].loss.unwrap();
        assert!((a - b).abs() > 1e-12);
        // The constraint binds on training rows, so holdout MD is nonzero
        // in general while in-sample MD is exactly zero.
        assert_abs_diff_eq!(in_sample.per_trial[0].md_pred.unwrap(), 0.0, epsilon = 1e-8);
    }

    #[test]
    fn estimator_accuracy_reports_all_four_rows() {
        let (rows, max_k) = run_estimator_accuracy(Case::Default, 5, 99).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.se >= 0.0));
        assert_eq!(rows[1].k, Some(max_k));
        assert!(max_k >= 2);
        assert_eq!(rows[0].trials_used, 5);
        assert_eq!(rows[2].trials_used, 5);
        assert_eq!(rows[3].trials_used, 5);
    }

    #[test]
    fn runs_are_deterministic_given_the_seed() {
        let a = run_tradeoff(
            &DataSource::Case(Case::Default),
            &quick_methods(),
            2,
            42,
            0.0,
        )
        .unwrap();
        let b = run_tradeoff(
            &DataSource::Case(Case::Default),
            &quick_methods(),
            2,
            42,
            0.0,
        )
        .unwrap();
        for (ra, rb) in a.per_trial.iter().zip(b.per_trial.iter()) {
            assert_eq!(ra.loss, rb.loss);
            assert_eq!(ra.md_pred, rb.md_pred);
        }
    }
}
