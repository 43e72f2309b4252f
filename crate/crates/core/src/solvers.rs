//! Equality-constrained solvers: a closed-form KKT solve for the squared
//! loss and a projected proximal gradient method for the logistic loss.

use ndarray::{s, Array1, Array2};

use crate::error::{Error, Result};
use crate::estimators::ConstraintSystem;
use crate::linalg;

/// Result of a constrained solve.
#[derive(Debug, Clone)]
pub struct Solution {
    pub w: Array1<f64>,
    /// Final loss value.
    pub objective: f64,
    /// Max-norm of P w - q at the solution.
    pub constraint_residual: f64,
    pub iterations: usize,
    /// Per-iteration objective values (projected gradient only).
    pub loss_trace: Vec<f64>,
    /// True when the KKT system needed a ridge term to factor.
    pub ridge_fallback: bool,
    /// False when the iteration limit was hit before the tolerance.
    pub converged: bool,
}

/// Projected-gradient options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PgmOptions {
    pub eta0: f64,
    pub beta: f64,
    pub max_iter: usize,
    pub grad_tol: f64,
}

impl Default for PgmOptions {
    fn default() -> Self {
        PgmOptions {
            eta0: 1.0,
            beta: 0.5,
            max_iter: 10_000,
            grad_tol: 1e-8,
        }
    }
}

/// Sum of squared row norms; the gradient-smoothness constant used for the
/// step-size floor. A looser bound than the tight logistic constant, which
/// only makes steps more conservative.
pub fn lipschitz_constant(x: &Array2<f64>) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Euclidean projection of w onto {v : P v = q}:
/// w - P^T (P P^T)^{-1} (P w - q).
pub fn project_affine(w: &Array1<f64>, c: &ConstraintSystem) -> Array1<f64> {
    let violation = c.p.dot(w) - &c.q;
    let ppt = c.p.dot(&c.p.t());
    let corr = linalg::solve(&ppt, &violation)
        .expect("P P^T is invertible: checked at ConstraintSystem construction");
    w - &c.p.t().dot(&corr)
}

/// Minimizes ||X w - y||^2 subject to P w = q by solving the KKT system
/// [2 X^T X, P^T; P, 0] [w; lambda] = [2 X^T y; q]. The multipliers are
/// discarded. A singular KKT matrix gets a 1e-10 ridge on the X^T X block
/// and the fallback is flagged on the solution.
pub fn solve_constrained_least_squares(
    x: &Array2<f64>,
    y: &Array1<f64>,
    c: &ConstraintSystem,
) -> Result<Solution> {
    let n = x.nrows();
    let d = x.ncols();
    let m = c.m();
    if y.len() != n {
        return Err(Error::Validation(format!(
            "label length {} does not match {} design rows",
            y.len(),
            n
        )));
    }
    if c.p.ncols() != d {
        return Err(Error::Validation(format!(
            "constraint width {} does not match d = {d}",
            c.p.ncols()
        )));
    }
    if m > d {
        return Err(Error::DegenerateConstraint(format!(
            "{m} constraints on {d} weights leave no degrees of freedom"
        )));
    }

    let xtx2 = x.t().dot(x) * 2.0;
    let rhs_top = x.t().dot(y) * 2.0;
    let mut kkt = Array2::zeros((d + m, d + m));
    kkt.slice_mut(s![..d, ..d]).assign(&xtx2);
    kkt.slice_mut(s![..d, d..]).assign(&c.p.t());
    kkt.slice_mut(s![d.., ..d]).assign(&c.p);
    let mut rhs = Array1::zeros(d + m);
    rhs.slice_mut(s![..d]).assign(&rhs_top);
    rhs.slice_mut(s![d..]).assign(&c.q);

    let mut ridge_fallback = false;
    let stacked = match linalg::solve(&kkt, &rhs) {
        Some(v) => v,
        None => {
            ridge_fallback = true;
            for i in 0..d {
                kkt[[i, i]] += 1e-10;
            }
            linalg::solve(&kkt, &rhs).ok_or_else(|| {
                Error::DegenerateConstraint(
                    "KKT system is singular even with ridge regularization".into(),
                )
            })?
        }
    };
    let w = stacked.slice(s![..d]).to_owned();
    let residual = x.dot(&w) - y;
    let objective = residual.dot(&residual);
    let constraint_residual = max_abs(&(c.p.dot(&w) - &c.q));
    Ok(Solution {
        w,
        objective,
        constraint_residual,
        iterations: 1,
        loss_trace: Vec::new(),
        ridge_fallback,
        converged: true,
    })
}

fn max_abs(v: &Array1<f64>) -> f64 {
    v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

/// Shared projected-gradient loop: backtracking on the quadratic upper
/// model, step floor at 1/L, stop on ||w_t - w_{t-1}||_inf / eta <= tol.
/// The step size persists across iterations and never resets.
fn pgm_minimize<F, G>(
    loss: F,
    gradient: G,
    lipschitz: f64,
    c: &ConstraintSystem,
    opts: &PgmOptions,
) -> Solution
where
    F: Fn(&Array1<f64>) -> f64,
    G: Fn(&Array1<f64>) -> Array1<f64>,
{
    let d = c.p.ncols();
    let floor = 1.0 / lipschitz.max(1e-12);
    let mut eta = opts.eta0;
    let mut w = project_affine(&Array1::zeros(d), c);
    let mut f_w = loss(&w);
    let mut loss_trace = vec![f_w];
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..opts.max_iter {
        iterations += 1;
        let grad = gradient(&w);
        let (w_next, f_next) = loop {
            let candidate = project_affine(&(&w - &(&grad * eta)), c);
            let step = &candidate - &w;
            let f_cand = loss(&candidate);
            let model = f_w + grad.dot(&step) + step.dot(&step) / (2.0 * eta);
            if f_cand <= model + 1e-12 * (1.0 + f_w.abs()) || eta <= floor {
                // At eta = 1/L the quadratic model is a true upper bound,
                // so a failure there is rounding noise and the step stands.
                break (candidate, f_cand);
            }
            eta = (opts.beta * eta).max(floor);
        };
        let step_norm = max_abs(&(&w_next - &w));
        w = w_next;
        f_w = f_next;
        loss_trace.push(f_w);
        if step_norm / eta <= opts.grad_tol {
            converged = true;
            break;
        }
    }

    let constraint_residual = max_abs(&(c.p.dot(&w) - &c.q));
    Solution {
        w,
        objective: f_w,
        constraint_residual,
        iterations,
        loss_trace,
        ridge_fallback: false,
        converged,
    }
}

/// Logistic loss sum log(1 + exp(-y_i w^T x_i)) with y in {-1, +1},
/// minimized over {w : P w = q}. Labels arrive as {0, 1} and are mapped
/// internally. Hitting max_iter is reported via `converged`, not an error.
pub fn pgm_logistic(
    x: &Array2<f64>,
    y01: &Array1<f64>,
    c: &ConstraintSystem,
    opts: &PgmOptions,
) -> Result<Solution> {
    let n = x.nrows();
    if y01.len() != n {
        return Err(Error::Validation(format!(
            "label length {} does not match {} design rows",
            y01.len(),
            n
        )));
    }
    if c.p.ncols() != x.ncols() {
        return Err(Error::Validation(format!(
            "constraint width {} does not match d = {}",
            c.p.ncols(),
            x.ncols()
        )));
    }
    if y01.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::Validation(
            "classification labels must be 0 or 1".into(),
        ));
    }
    let y_pm = y01.mapv(|v| 2.0 * v - 1.0);
    let lipschitz = lipschitz_constant(x);

    let loss = |w: &Array1<f64>| -> f64 {
        let t = x.dot(w);
        t.iter()
            .zip(y_pm.iter())
            .map(|(&ti, &yi)| softplus(-yi * ti))
            .sum()
    };
    let gradient = |w: &Array1<f64>| -> Array1<f64> {
        let t = x.dot(w);
        // d/dw sum softplus(-y t) = -X^T (y * sigma(-y t))
        let coeff = Array1::from_iter(
            t.iter()
                .zip(y_pm.iter())
                .map(|(&ti, &yi)| -yi * crate::glm::sigmoid(-yi * ti)),
        );
        x.t().dot(&coeff)
    };
    Ok(pgm_minimize(loss, gradient, lipschitz, c, opts))
}

/// Projected gradient on the squared loss. Exists to cross-check the
/// closed-form KKT solution with an entirely different solve path; the
/// smoothness constant is 2 sum ||x_i||^2 since the Hessian is 2 X^T X.
pub fn pgm_squared(
    x: &Array2<f64>,
    y: &Array1<f64>,
    c: &ConstraintSystem,
    opts: &PgmOptions,
) -> Result<Solution> {
    let n = x.nrows();
    if y.len() != n {
        return Err(Error::Validation(format!(
            "label length {} does not match {} design rows",
            y.len(),
            n
        )));
    }
    let lipschitz = 2.0 * lipschitz_constant(x);
    let loss = |w: &Array1<f64>| -> f64 {
        let r = x.dot(w) - y;
        r.dot(&r)
    };
    let gradient = |w: &Array1<f64>| -> Array1<f64> {
        let r = x.dot(w) - y;
        x.t().dot(&r) * 2.0
    };
    Ok(pgm_minimize(loss, gradient, lipschitz, c, opts))
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}
