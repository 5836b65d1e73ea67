//! Exact zero-order-hold discretization of `dx/dt = A x + B u`.
//!
//! With the input held constant over one sample period,
//! `x+ = exp(A Ts) x + (int_0^Ts exp(A s) ds) B u`. Both blocks come out of a
//! single exponential of the augmented matrix `[[A, B], [0, 0]] * Ts`.

use nalgebra::DMatrix;

use crate::error::ProblemError;
use crate::expr::Expr;

#[derive(Clone, Debug, PartialEq)]
pub struct Discretization {
    pub a_d: DMatrix<f64>,
    pub b_d: DMatrix<f64>,
}

/// Matrix exponential by scaling and squaring with a truncated Taylor series.
pub fn expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    assert!(m.is_square(), "matrix exponential of a non-square matrix");
    let n = m.nrows();
    // entrywise 1-norm bounds every induced norm
    let norm: f64 = m.iter().map(|v| v.abs()).sum();
    // scale so the norm is at most 1/2
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = m / 2f64.powi(squarings);
    let mut sum = DMatrix::<f64>::identity(n, n);
    let mut term = DMatrix::<f64>::identity(n, n);
    for k in 1..=40 {
        term = &term * &scaled / k as f64;
        sum += &term;
        if term.amax() <= 1e-17 * sum.amax() {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

pub fn zoh(a: &DMatrix<f64>, b: &DMatrix<f64>, ts: f64) -> Result<Discretization, ProblemError> {
    if !a.is_square() {
        return Err(ProblemError::Discretize(format!(
            "A is {}x{}, expected a square matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    if b.nrows() != a.nrows() {
        return Err(ProblemError::Discretize(format!(
            "B has {} rows but A has {}",
            b.nrows(),
            a.nrows()
        )));
    }
    if !(ts.is_finite() && ts > 0.0) {
        return Err(ProblemError::Discretize(format!(
            "sample time {ts} is not positive"
        )));
    }
    let (n, m) = (a.nrows(), b.ncols());
    let mut aug = DMatrix::<f64>::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(a);
    aug.view_mut((0, n), (n, m)).copy_from(b);
    let e = expm(&(aug * ts));
    Ok(Discretization {
        a_d: e.view((0, 0), (n, n)).into_owned(),
        b_d: e.view((0, n), (n, m)).into_owned(),
    })
}

impl Discretization {
    /// `f_i(x, u) = sum_j Ad_ij x_j + sum_k Bd_ik u_k` over variables
    /// `x1..xn, u1..um`.
    pub fn expressions(&self) -> Vec<Expr> {
        let n = self.a_d.nrows();
        (0..n)
            .map(|i| {
                let (a, b) = (self.a_d.row(i), self.b_d.row(i));
                a.iter()
                    .chain(b.iter())
                    .enumerate()
                    .fold(Expr::constant(0.0), |acc, (j, &c)| {
                        Expr::add(acc, Expr::mul(Expr::constant(c), Expr::var(j)))
                    })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, cols: usize, data: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, cols, data)
    }

    #[test]
    fn case_study_matrices() {
        let d = zoh(
            &m(2, 2, &[2.0, 1.0, 3.0, 1.0]),
            &DMatrix::identity(2, 2),
            1.0,
        )
        .unwrap();
        let shown_a = [17.6, 7.3, 22.0, 10.3];
        let shown_b = [5.4, 2.0, 5.9, 3.4];
        for k in 0..4 {
            assert!((d.a_d[(k / 2, k % 2)] - shown_a[k]).abs() <= 0.05);
            assert!((d.b_d[(k / 2, k % 2)] - shown_b[k]).abs() <= 0.05);
        }
    }

    #[test]
    fn agrees_with_nalgebra_exponential() {
        let a = m(3, 3, &[0.3, -1.2, 0.5, 2.0, -0.7, 0.1, -0.4, 0.9, 1.5]);
        let ours = expm(&(a.clone() * 2.5));
        let theirs = (a * 2.5).exp();
        assert!((ours - &theirs).amax() <= 1e-12 * theirs.amax());
    }

    #[test]
    fn zero_and_nilpotent_cases() {
        let d = zoh(&DMatrix::zeros(2, 2), &DMatrix::identity(2, 2), 1.0).unwrap();
        assert_eq!(d.a_d, DMatrix::identity(2, 2));
        assert_eq!(d.b_d, DMatrix::identity(2, 2));
        let d = zoh(&m(2, 2, &[0.0, 1.0, 0.0, 0.0]), &m(2, 1, &[0.0, 1.0]), 1.0).unwrap();
        assert!((d.a_d.clone() - m(2, 2, &[1.0, 1.0, 0.0, 1.0])).amax() < 1e-15);
        // double integrator: B_d = [Ts^2/2, Ts]
        assert!((d.b_d.clone() - m(2, 1, &[0.5, 1.0])).amax() < 1e-15);
    }

    #[test]
    fn shape_errors() {
        assert!(zoh(&DMatrix::zeros(2, 3), &DMatrix::zeros(2, 1), 1.0).is_err());
        assert!(zoh(&DMatrix::zeros(2, 2), &DMatrix::zeros(3, 1), 1.0).is_err());
        assert!(zoh(&DMatrix::zeros(2, 2), &DMatrix::zeros(2, 1), 0.0).is_err());
    }

    #[test]
    fn expressions_are_affine_maps() {
        let d = zoh(
            &m(2, 2, &[2.0, 1.0, 3.0, 1.0]),
            &DMatrix::identity(2, 2),
            1.0,
        )
        .unwrap();
        let f = d.expressions();
        let p = [0.3, -0.2, 1.0, -1.5];
        let expect =
            &d.a_d * nalgebra::dvector![p[0], p[1]] + &d.b_d * nalgebra::dvector![p[2], p[3]];
        for i in 0..2 {
            assert!((f[i].eval(&p).unwrap() - expect[i]).abs() < 1e-12);
        }
    }
}
