//! Dense symmetric positive-definite solves via Cholesky factorization.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// Lower-triangular Cholesky factor of a symmetric matrix, or `None` when a
/// nonpositive pivot is encountered.
pub(crate) fn cholesky(a: &Array2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let mut l = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[[i, j]];
            for k in 0..j {
                sum -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if !(sum.is_finite() && sum > 0.0) {
                    return None;
                }
                l[[i, i]] = sum.sqrt();
            } else {
                l[[i, j]] = sum / l[[j, j]];
            }
        }
    }
    Some(l)
}

fn solve_with_factor(l: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = l.nrows();
    // Forward substitution L y = b.
    let mut y = b.clone();
    for i in 0..n {
        for k in 0..i {
            let v = y[k];
            y[i] -= l[[i, k]] * v;
        }
        y[i] /= l[[i, i]];
    }
    // Back substitution L^T x = y.
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            let v = y[k];
            y[i] -= l[[k, i]] * v;
        }
        y[i] /= l[[i, i]];
    }
    y
}

fn inverse_with_factor(l: &Array2<f64>) -> Array2<f64> {
    let n = l.nrows();
    let mut inv = Array2::<f64>::zeros((n, n));
    for col in 0..n {
        let mut e = Array1::<f64>::zeros(n);
        e[col] = 1.0;
        let x = solve_with_factor(l, &e);
        for row in 0..n {
            inv[[row, col]] = x[row];
        }
    }
    // Symmetrize to wash out the last bits of round-off.
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (inv[[i, j]] + inv[[j, i]]);
            inv[[i, j]] = v;
            inv[[j, i]] = v;
        }
    }
    inv
}

/// Solves `a x = b` and inverts `a` for a symmetric positive-definite `a`.
///
/// On Cholesky failure the diagonal gets a relative jitter of 1e-10 and the
/// factorization is retried once; a second failure is an error.
pub(crate) fn spd_solve_and_inverse(
    a: &Array2<f64>,
    b: &Array1<f64>,
) -> Result<(Array1<f64>, Array2<f64>)> {
    let l = match cholesky(a) {
        Some(l) => l,
        None => {
            let mean_diag = a.diag().iter().sum::<f64>() / a.nrows() as f64;
            let jitter = 1e-10 * mean_diag.abs().max(1e-300);
            let mut aj = a.clone();
            for i in 0..a.nrows() {
                aj[[i, i]] += jitter;
            }
            cholesky(&aj).ok_or(Error::NotPositiveDefinite)?
        }
    };
    Ok((solve_with_factor(&l, b), inverse_with_factor(&l)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn solves_and_inverts_spd_system() {
        let a = array![[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 2.0]];
        let b = array![1.0, -2.0, 0.3];
        let (x, inv) = spd_solve_and_inverse(&a, &b).unwrap();
        let ax = a.dot(&x);
        for i in 0..3 {
            assert!((ax[i] - b[i]).abs() < 1e-12);
        }
        let prod = a.dot(&inv);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((prod[[i, j]] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn jitter_rescues_semidefinite_matrix() {
        // Rank-deficient Gram matrix; jitter makes it barely positive.
        let a = array![[1.0, 1.0], [1.0, 1.0]];
        let b = array![1.0, 1.0];
        let (x, _) = spd_solve_and_inverse(&a, &b).unwrap();
        assert!(x.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let a = array![[1.0, 0.0], [0.0, -5.0]];
        let b = array![1.0, 1.0];
        assert!(matches!(
            spd_solve_and_inverse(&a, &b),
            Err(Error::NotPositiveDefinite)
        ));
    }
}
