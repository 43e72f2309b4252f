//! Small dense linear algebra: LU solves and symmetric eigenvalues.
//!
//! Every system in this crate is tiny (at most a few dozen rows: model
//! dimension plus constraint count), so textbook O(n^3) routines with
//! partial pivoting are plenty and keep the crate free of BLAS/LAPACK
//! build requirements.

use ndarray::{Array1, Array2};

/// LU factorization with partial pivoting, stored in-place.
struct Lu {
    lu: Array2<f64>,
    perm: Vec<usize>,
}

fn factorize(a: &Array2<f64>) -> Option<Lu> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "LU requires a square matrix");
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();

    // Relative singularity threshold scaled by the largest entry.
    let scale = lu.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let tiny = scale * (n as f64) * f64::EPSILON * 4.0;

    for k in 0..n {
        let mut pivot_row = k;
        let mut pivot_val = lu[[k, k]].abs();
        for i in k + 1..n {
            let v = lu[[i, k]].abs();
            if v > pivot_val {
                pivot_val = v;
                pivot_row = i;
            }
        }
        if pivot_val <= tiny {
            return None;
        }
        if pivot_row != k {
            perm.swap(k, pivot_row);
            for j in 0..n {
                let tmp = lu[[k, j]];
                lu[[k, j]] = lu[[pivot_row, j]];
                lu[[pivot_row, j]] = tmp;
            }
        }
        for i in k + 1..n {
            let factor = lu[[i, k]] / lu[[k, k]];
            lu[[i, k]] = factor;
            for j in k + 1..n {
                lu[[i, j]] -= factor * lu[[k, j]];
            }
        }
    }
    Some(Lu { lu, perm })
}

impl Lu {
    fn solve_one(&self, b: &Array1<f64>) -> Array1<f64> {
        let n = self.lu.nrows();
        let mut x = Array1::zeros(n);
        for i in 0..n {
            x[i] = b[self.perm[i]];
        }
        // Forward substitution with unit lower triangle.
        for i in 1..n {
            for j in 0..i {
                let delta = self.lu[[i, j]] * x[j];
                x[i] -= delta;
            }
        }
        // Back substitution.
        for i in (0..n).rev() {
            for j in i + 1..n {
                let delta = self.lu[[i, j]] * x[j];
                x[i] -= delta;
            }
            x[i] /= self.lu[[i, i]];
        }
        x
    }
}

/// Solve `a x = b` for square `a`. Returns None when `a` is singular to
/// working precision; callers decide whether to regularize and retry.
pub fn solve(a: &Array2<f64>, b: &Array1<f64>) -> Option<Array1<f64>> {
    let lu = factorize(a)?;
    Some(lu.solve_one(b))
}

/// Solve `a X = B` column by column with a single factorization.
pub fn solve_multi(a: &Array2<f64>, b: &Array2<f64>) -> Option<Array2<f64>> {
    let lu = factorize(a)?;
    let mut x = Array2::zeros(b.raw_dim());
    for j in 0..b.ncols() {
        let col = lu.solve_one(&b.column(j).to_owned());
        x.column_mut(j).assign(&col);
    }
    Some(x)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_eigenvalues(a: &Array2<f64>) -> Vec<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let mut m = a.clone();
    // Convergence: off-diagonal Frobenius mass shrinks by a fixed factor
    // per sweep; 64 sweeps is far beyond what these sizes need.
    for _ in 0..64 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += m[[i, j]] * m[[i, j]];
            }
        }
        let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
        if off.sqrt() <= scale * 1e-14 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[[p, q]];
                if apq.abs() <= scale * 1e-300 {
                    continue;
                }
                let app = m[[p, p]];
                let aqq = m[[q, q]];
                // Rotation angle from tan(2t) = 2 a_pq / (a_pp - a_qq).
                let t = 0.5 * (2.0 * apq).atan2(app - aqq);
                let (sin, cos) = t.sin_cos();
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = cos * mkp + sin * mkq;
                    m[[k, q]] = -sin * mkp + cos * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = cos * mpk + sin * mqk;
                    m[[q, k]] = -sin * mpk + cos * mqk;
                }
            }
        }
    }
    (0..n).map(|i| m[[i, i]]).collect()
}

/// Condition number of a symmetric positive semi-definite matrix,
/// `max |lambda| / min |lambda|`; infinite when the smallest eigenvalue
/// underflows relative to the largest.
pub fn symmetric_condition(a: &Array2<f64>) -> f64 {
    let eig = symmetric_eigenvalues(a);
    let max = eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = eig.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if max == 0.0 {
        return f64::INFINITY;
    }
    // Jacobi leaves rounding residue of order ||A|| * n * eps on eigenvalues
    // that are exactly zero, so anything below that is numerical rank loss.
    if min <= max * 1e-14 * a.nrows() as f64 {
        f64::INFINITY
    } else {
        max / min
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn solves_a_known_system() {
        let a = array![[2.0, 1.0], [1.0, 3.0]];
        let b = array![5.0, 10.0];
        let x = solve(&a, &b).unwrap();
        // 2x + y = 5, x + 3y = 10 -> x = 1, y = 3
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn pivoting_handles_zero_leading_entry() {
        let a = array![[0.0, 1.0], [1.0, 0.0]];
        let b = array![2.0, 7.0];
        let x = solve(&a, &b).unwrap();
        assert_abs_diff_eq!(x[0], 7.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn singular_matrix_returns_none() {
        let a = array![[1.0, 2.0], [2.0, 4.0]];
        let b = array![1.0, 2.0];
        assert!(solve(&a, &b).is_none());
    }

    #[test]
    fn multi_rhs_matches_single_solves() {
        let a = array![[4.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 2.0]];
        let b = array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let x = solve_multi(&a, &b).unwrap();
        for j in 0..2 {
            let xj = solve(&a, &b.column(j).to_owned()).unwrap();
            for i in 0..3 {
                assert_abs_diff_eq!(x[[i, j]], xj[i], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn eigenvalues_of_diagonal_matrix() {
        let a = array![[3.0, 0.0], [0.0, -1.0]];
        let mut eig = symmetric_eigenvalues(&a);
        eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert_abs_diff_eq!(eig[0], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(eig[1], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn eigenvalues_of_known_symmetric_matrix() {
        // [[2,1],[1,2]] has eigenvalues 1 and 3.
        let a = array![[2.0, 1.0], [1.0, 2.0]];
        let mut eig = symmetric_eigenvalues(&a);
        eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert_abs_diff_eq!(eig[0], 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(eig[1], 3.0, epsilon = 1e-10);
    }

    #[test]
    fn condition_number_of_identity_is_one() {
        let a = Array2::eye(4);
        assert_abs_diff_eq!(symmetric_condition(&a), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn condition_number_of_rank_deficient_is_infinite() {
        let a = array![[1.0, 1.0], [1.0, 1.0]];
        assert!(symmetric_condition(&a).is_infinite());
    }
}
