//! Facade assembling dataset, propensity scores, constraint, and solver
//! into the five named methods for both tasks.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Task};
use crate::error::{Error, Result};
use crate::estimators::{
    dr_constraint, fit_outcome_models, ipw_constraint, multi_md_constraints, single_md_constraint,
    ConstraintSystem, OutcomeModels,
};
use crate::glm;
use crate::propensity::{fit_propensity, FitOptions, PropensityScores};
use crate::solvers::{pgm_logistic, solve_constrained_least_squares, PgmOptions, Solution};

/// The five methods under comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Unconstrained,
    SingleMd,
    MultiMd(usize),
    FairCeeIpw,
    FairCeeDr,
}

impl Method {
    /// Stable identifier used in CSV output and JSON exports.
    pub fn name(&self) -> &'static str {
        match self {
            Method::Unconstrained => "unconstrained",
            Method::SingleMd => "single_md",
            Method::MultiMd(_) => "multi_md",
            Method::FairCeeIpw => "faircee_ipw",
            Method::FairCeeDr => "faircee_dr",
        }
    }

    pub fn k(&self) -> Option<usize> {
        match self {
            Method::MultiMd(k) => Some(*k),
            _ => None,
        }
    }

    fn needs_scores(&self) -> bool {
        matches!(
            self,
            Method::MultiMd(_) | Method::FairCeeIpw | Method::FairCeeDr
        )
    }
}

/// A method plus its solver and propensity settings.
#[derive(Debug, Clone)]
pub struct MethodSpec {
    pub method: Method,
    pub solver_opts: PgmOptions,
    pub propensity_opts: FitOptions,
}

impl MethodSpec {
    pub fn new(method: Method) -> Self {
        MethodSpec {
            method,
            solver_opts: PgmOptions::default(),
            propensity_opts: FitOptions::default(),
        }
    }
}

/// A fitted method with everything needed to predict and audit it.
#[derive(Debug, Clone)]
pub struct FittedModel {
    pub spec: MethodSpec,
    pub solution: Solution,
    /// Present for propensity-based methods (Multi MD, IPW, DR).
    pub scores_used: Option<PropensityScores>,
    /// Present for DR only.
    pub outcome_models: Option<OutcomeModels>,
    pub task: Task,
    pub has_intercept: bool,
}

/// Fits `spec` on `dataset`, computing propensity scores internally when
/// the method needs them.
pub fn fit(dataset: &Dataset, spec: &MethodSpec) -> Result<FittedModel> {
    fit_with_scores(dataset, spec, None)
}

/// Fit with optionally precomputed propensity scores, so a comparison run
/// can fit propensity once per dataset and share it across methods.
pub fn fit_with_scores(
    dataset: &Dataset,
    spec: &MethodSpec,
    precomputed: Option<&PropensityScores>,
) -> Result<FittedModel> {
    if spec.method == Method::MultiMd(0) {
        return Err(Error::Validation("Multi MD requires K >= 1".into()));
    }
    let scores = if spec.method.needs_scores() {
        Some(match precomputed {
            Some(s) => {
                if s.z.len() != dataset.n() {
                    return Err(Error::Validation(format!(
                        "precomputed scores have length {}, dataset has N = {}",
                        s.z.len(),
                        dataset.n()
                    )));
                }
                s.clone()
            }
            None => fit_propensity(dataset, spec.propensity_opts)?,
        })
    } else {
        None
    };
    let outcome_models = if spec.method == Method::FairCeeDr {
        Some(fit_outcome_models(dataset)?)
    } else {
        None
    };

    let constraint: Option<ConstraintSystem> = match spec.method {
        Method::Unconstrained => None,
        Method::SingleMd => Some(single_md_constraint(&dataset.x, &dataset.s)?),
        Method::MultiMd(k) => Some(multi_md_constraints(
            &dataset.x,
            &dataset.s,
            &scores.as_ref().unwrap().z,
            k,
        )?),
        Method::FairCeeIpw => Some(ipw_constraint(
            &dataset.x,
            &dataset.s,
            &scores.as_ref().unwrap().z,
        )?),
        Method::FairCeeDr => Some(dr_constraint(
            &dataset.x,
            &dataset.s,
            &scores.as_ref().unwrap().z,
            outcome_models.as_ref().unwrap(),
        )?),
    };

    let solution = match (dataset.task, constraint) {
        (Task::Regression, Some(c)) => solve_constrained_least_squares(&dataset.x, &dataset.y, &c)?,
        (Task::Classification, Some(c)) => {
            pgm_logistic(&dataset.x, &dataset.y, &c, &spec.solver_opts)?
        }
        (Task::Regression, None) => {
            let w = glm::least_squares(&dataset.x, &dataset.y, None);
            let r = dataset.x.dot(&w) - &dataset.y;
            Solution {
                objective: r.dot(&r),
                w,
                constraint_residual: 0.0,
                iterations: 1,
                loss_trace: Vec::new(),
                ridge_fallback: false,
                converged: true,
            }
        }
        (Task::Classification, None) => {
            let fit = glm::logistic_newton(&dataset.x, &dataset.y, 100, 1e-10);
            Solution {
                w: fit.weights,
                // Negative log-likelihood equals the logistic loss of the
                // constrained solvers, so objectives are comparable.
                objective: -fit.log_likelihood,
                constraint_residual: 0.0,
                iterations: fit.iterations,
                loss_trace: Vec::new(),
                ridge_fallback: false,
                converged: true,
            }
        }
    };

    Ok(FittedModel {
        spec: spec.clone(),
        solution,
        scores_used: scores,
        outcome_models,
        task: dataset.task,
        has_intercept: dataset.has_intercept,
    })
}

/// Raw linear scores X w for new data.
pub fn decision_scores(model: &FittedModel, x_new: &Array2<f64>) -> Result<Array1<f64>> {
    if x_new.ncols() != model.solution.w.len() {
        return Err(Error::Validation(format!(
            "input has {} columns, model expects {}",
            x_new.ncols(),
            model.solution.w.len()
        )));
    }
    Ok(x_new.dot(&model.solution.w))
}

/// Predictions: X w for regression, sigmoid(X w) for classification.
pub fn predict(model: &FittedModel, x_new: &Array2<f64>) -> Result<Array1<f64>> {
    let scores = decision_scores(model, x_new)?;
    Ok(match model.task {
        Task::Regression => scores,
        Task::Classification => scores.mapv(glm::sigmoid),
    })
}

/// JSON export of a fitted model for the CLI.
pub fn export_json(model: &FittedModel) -> String {
    #[derive(Serialize)]
    struct Diagnostics {
        objective: f64,
        constraint_residual: f64,
        iterations: usize,
        converged: bool,
        ridge_fallback: bool,
        propensity_auc: Option<f64>,
    }
    #[derive(Serialize)]
    struct Export {
        method: &'static str,
        k: Option<usize>,
        task: Task,
        weights: Vec<f64>,
        intercept_flag: bool,
        constraint_kind: Option<String>,
        diagnostics: Diagnostics,
    }
    let constraint_kind = match model.spec.method {
        Method::Unconstrained => None,
        m => Some(m.name().to_string()),
    };
    let export = Export {
        method: model.spec.method.name(),
        k: model.spec.method.k(),
        task: model.task,
        weights: model.solution.w.to_vec(),
        intercept_flag: model.has_intercept,
        constraint_kind,
        diagnostics: Diagnostics {
            objective: model.solution.objective,
            constraint_residual: model.solution.constraint_residual,
            iterations: model.solution.iterations,
            converged: model.solution.converged,
            ridge_fallback: model.solution.ridge_fallback,
            propensity_auc: model.scores_used.as_ref().map(|s| s.auc),
        },
    };
    serde_json::to_string_pretty(&export).expect("model export serializes")
}
