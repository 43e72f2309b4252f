//! Fairness-constrained linear models whose training problems carry an
//! equality constraint driving a causal-effect estimate of the model's own
//! outputs to zero.
//!
//! The pipeline: load or generate a [`data::Dataset`], fit
//! [`propensity`] scores on the explanatory features, build a constraint
//! system from one of the [`estimators`] (mean difference, stratified mean
//! differences, inverse propensity weighting, or the doubly robust
//! estimator), and solve the constrained problem with the [`solvers`]
//! (closed-form KKT for squared loss, projected gradient for logistic
//! loss). [`models`] wires those stages into five ready-made methods and
//! [`synthetic`] generates benchmark data with known ground truth.

pub mod data;
pub mod error;
pub mod estimators;
pub mod glm;
pub mod linalg;
pub mod models;
pub mod propensity;
pub mod solvers;
pub mod synthetic;

pub use data::{load_csv, save_csv, ColumnConfig, Dataset, Task};
pub use error::{Error, Result};
pub use estimators::{
    dr_constraint, dr_estimate, fit_outcome_models, ipw_constraint, ipw_constraint_vector,
    ipw_estimate, md_constraint_vector, mean_difference, multi_md_constraints,
    single_md_constraint, stratified_mean_differences, stratify, ConstraintKind, ConstraintSystem,
    OutcomeModels,
};
pub use models::{
    decision_scores, export_json, fit, fit_with_scores, predict, FittedModel, Method, MethodSpec,
};
pub use propensity::{compute_auc, fit_propensity, FitOptions, PropensityScores, EPS_CLIP};
pub use solvers::{
    lipschitz_constant, pgm_logistic, pgm_squared, project_affine, solve_constrained_least_squares,
    PgmOptions, Solution,
};
pub use synthetic::{
    generate, generate_stream, oracle_propensity, preset, Case, GroundTruth, SyntheticConfig,
};
