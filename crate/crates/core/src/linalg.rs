use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Solves `a x = b` by LU with partial pivoting and one step of iterative
/// refinement; fails if the matrix is singular or the residual stays above
/// `tol * max(1, |x|_inf)`.
pub(crate) fn solve_dense(a: &DMatrix<f64>, b: &DVector<f64>, tol: f64) -> Result<DVector<f64>> {
    if a.nrows() == 0 {
        return Ok(DVector::zeros(0));
    }
    let lu = a.clone().lu();
    let mut x = lu
        .solve(b)
        .ok_or_else(|| Error::Solver("singular linear system".into()))?;
    let mut res = b - a * &x;
    if res.amax() > tol * x.amax().max(1.0) {
        if let Some(dx) = lu.solve(&res) {
            x += dx;
            res = b - a * &x;
        }
    }
    let r = res.amax();
    if !(r <= tol * x.amax().max(1.0)) {
        return Err(Error::Solver(format!("linear solve residual {r:e} exceeds {tol:e}")));
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let b = DVector::from_vec(vec![3.0, 5.0]);
        let x = solve_dense(&a, &b, 1e-12).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-12 && (x[1] - 1.4).abs() < 1e-12);
    }

    #[test]
    fn singular_is_an_error() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let b = DVector::from_vec(vec![1.0, 1.0]);
        assert!(solve_dense(&a, &b, 1e-10).is_err());
    }
}
