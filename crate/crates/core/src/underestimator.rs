//! Convex underestimators built by adding a separable non-positive quadratic.
//!
//! On a box `[lb, ub]` the underestimator of `F` is
//! `F(x) + sum_i alpha_i (lb_i - x_i)(ub_i - x_i)`. The perturbation is zero
//! at every corner and smallest at the midpoint, where the gap to `F` equals
//! `sum_i alpha_i (ub_i - lb_i)^2 / 4`.
//!
//! The alpha values come from the scaled Gerschgorin rule applied to an
//! interval Hessian. The rule is valid for any positive scaling vector; the
//! natural choice is the box widths, but verification runs pass the widths
//! of the root domain so that alphas can only shrink as boxes are refined.

use serde::{Deserialize, Serialize};

use crate::domain::BoxDomain;
use crate::error::EvalError;
use crate::function::{Differentiable, IntervalMatrix, SmoothFn};
use crate::interval::Interval;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaMethod {
    #[default]
    ScaledGerschgorin,
    /// The Hessian is constant up to rounding and positive semidefinite.
    Convex,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlphaVector {
    pub values: Vec<f64>,
    pub domain: BoxDomain,
    pub method: AlphaMethod,
}

impl AlphaVector {
    pub fn zeros(domain: &BoxDomain) -> AlphaVector {
        AlphaVector {
            values: vec![0.0; domain.dim()],
            domain: domain.clone(),
            method: AlphaMethod::ScaledGerschgorin,
        }
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

/// Scaled Gerschgorin alphas for an interval Hessian.
///
/// `alpha_i = max(0, -(H_ii.lo - sum_{j != i} |H_ij|_max * d_j / d_i) / 2)`;
/// a dimension with `d_i == 0` uses only its diagonal, and contributes
/// nothing to the other rows.
pub fn scaled_gerschgorin(hessian: &IntervalMatrix, scaling: &[f64]) -> Vec<f64> {
    let n = hessian.len();
    (0..n)
        .map(|i| {
            let diag = hessian[i][i].lo;
            let d_i = scaling[i];
            let off: f64 = if d_i > 0.0 {
                (0..n)
                    .filter(|&j| j != i)
                    .map(|j| hessian[i][j].mag() * scaling[j] / d_i)
                    .sum()
            } else {
                0.0
            };
            let alpha = -0.5 * (diag - off);
            // pad against rounding in the row sum
            if alpha > 0.0 {
                alpha * (1.0 + 4.0 * f64::EPSILON)
            } else {
                0.0
            }
        })
        .collect()
}

/// True when every matrix in the enclosure is positive semidefinite and the
/// enclosure is no wider than rounding. Uses
/// `lambda_min(mid) >= ||rad||_F + slack`, where the slack covers the error
/// of the computed eigenvalue.
fn constant_psd(hessian: &IntervalMatrix) -> bool {
    let n = hessian.len();
    if n == 0 {
        return true;
    }
    let mid = nalgebra::DMatrix::from_fn(n, n, |i, j| hessian[i][j].mid());
    let rad = nalgebra::DMatrix::from_fn(n, n, |i, j| {
        let e = hessian[i][j];
        (e.hi - e.lo) * 0.5
    });
    if !mid.iter().all(|v| v.is_finite()) || !rad.iter().all(|v| v.is_finite()) {
        return false;
    }
    let scale = mid.norm();
    if rad.norm() > 1e-9 * scale.max(f64::MIN_POSITIVE) {
        return false;
    }
    let sym = (&mid + mid.transpose()) * 0.5;
    let lambda_min = sym.symmetric_eigenvalues().min();
    let slack = 16.0 * n as f64 * f64::EPSILON * scale;
    lambda_min >= rad.norm() + slack
}

/// Alphas for `f` on `domain`, scaled by the domain's own widths.
pub fn compute_alpha(f: &SmoothFn, domain: &BoxDomain) -> Result<AlphaVector, EvalError> {
    compute_alpha_scaled(f, domain, &domain.widths())
}

/// Alphas for `f` on `domain` with an explicit scaling vector.
pub fn compute_alpha_scaled(
    f: &SmoothFn,
    domain: &BoxDomain,
    scaling: &[f64],
) -> Result<AlphaVector, EvalError> {
    let hessian = f.interval_hessian(domain)?;
    if constant_psd(&hessian) {
        return Ok(AlphaVector {
            values: vec![0.0; domain.dim()],
            domain: domain.clone(),
            method: AlphaMethod::Convex,
        });
    }
    Ok(AlphaVector {
        values: scaled_gerschgorin(&hessian, scaling),
        domain: domain.clone(),
        method: AlphaMethod::ScaledGerschgorin,
    })
}

/// Largest gap between a function and its underestimator on `domain`,
/// attained at the midpoint.
pub fn max_separation(alphas: &[f64], domain: &BoxDomain) -> f64 {
    0.25 * alphas
        .iter()
        .enumerate()
        .map(|(i, a)| a * domain.width(i).powi(2))
        .sum::<f64>()
}

#[derive(Clone, Debug)]
pub struct Underestimator {
    base: SmoothFn,
    domain: BoxDomain,
    alphas: Vec<f64>,
}

impl Underestimator {
    pub fn build(base: &SmoothFn, alphas: &AlphaVector) -> Underestimator {
        Underestimator {
            base: base.clone(),
            domain: alphas.domain.clone(),
            alphas: alphas.values.clone(),
        }
    }

    pub fn base(&self) -> &SmoothFn {
        &self.base
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn max_separation(&self) -> f64 {
        max_separation(&self.alphas, &self.domain)
    }

    fn perturbation(&self, x: &[f64]) -> f64 {
        let lo = self.domain.lower();
        let hi = self.domain.upper();
        self.alphas
            .iter()
            .enumerate()
            .map(|(i, a)| a * (lo[i] - x[i]) * (hi[i] - x[i]))
            .sum()
    }
}

impl Differentiable for Underestimator {
    fn dim(&self) -> usize {
        self.alphas.len()
    }

    fn value(&self, x: &[f64]) -> Result<f64, EvalError> {
        Ok(self.base.value(x)? + self.perturbation(x))
    }

    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> Result<f64, EvalError> {
        let v = self.base.value_grad(x, grad)?;
        let lo = self.domain.lower();
        let hi = self.domain.upper();
        for (i, g) in grad.iter_mut().enumerate() {
            *g += self.alphas[i] * (2.0 * x[i] - lo[i] - hi[i]);
        }
        Ok(v + self.perturbation(x))
    }

    fn enclose(&self, x: &[f64]) -> Result<(Interval, Vec<Interval>), EvalError> {
        let (mut value, mut grad) = self.base.enclose(x)?;
        let lo = self.domain.lower();
        let hi = self.domain.upper();
        for (i, g) in grad.iter_mut().enumerate() {
            let a = Interval::point(self.alphas[i]);
            let xi = Interval::point(x[i]);
            let left = Interval::point(lo[i]).sub(xi);
            let right = Interval::point(hi[i]).sub(xi);
            value = value.add(a.mul(left).mul(right));
            let slope = Interval::point(2.0)
                .mul(xi)
                .sub(Interval::point(lo[i]))
                .sub(Interval::point(hi[i]));
            *g = g.add(a.mul(slope));
        }
        Ok((value, grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, state_input_names};

    fn smooth(text: &str, n: usize) -> SmoothFn {
        SmoothFn::new(parse(text, &state_input_names(n, 0)).unwrap(), n)
    }

    #[test]
    fn constant_convex_hessian_needs_no_alpha() {
        let f = smooth("x1^2 + 1.9*x1*x2 + x2^2", 2);
        let b = BoxDomain::from_bounds(&[(-1.0, 1.0), (-1.0, 1.0)]);
        let hessian = f.interval_hessian(&b).unwrap();
        assert!(scaled_gerschgorin(&hessian, &[1.0, 10.0])[0] > 0.0);
        let a = compute_alpha_scaled(&f, &b, &[1.0, 10.0]).unwrap();
        assert_eq!(a.values, vec![0.0, 0.0]);
        assert_eq!(a.method, AlphaMethod::Convex);
        let g = smooth("x1^2 + 2.1*x1*x2 + x2^2", 2);
        assert!(compute_alpha_scaled(&g, &b, &[1.0, 1.0]).unwrap().max() > 0.0);
    }

    #[test]
    fn concave_parabola_needs_unit_alpha() {
        let f = smooth("-x1^2", 1);
        let b = BoxDomain::from_bounds(&[(0.0, 1.0)]);
        let a = compute_alpha(&f, &b).unwrap();
        assert!((a.values[0] - 1.0).abs() < 1e-15);
        let u = Underestimator::build(&f, &a);
        // -x^2 + (0 - x)(1 - x) = -x, which is linear hence convex
        assert!((u.value(&[0.5]).unwrap() + 0.5).abs() < 1e-15);
        assert!((f.value(&[0.5]).unwrap() - u.value(&[0.5]).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn convex_function_gets_zero_alpha() {
        let f = smooth("x1^2 + x2^2", 2);
        for b in [
            BoxDomain::from_bounds(&[(0.0, 1.0), (-3.0, 5.0)]),
            BoxDomain::from_bounds(&[(-10.0, -9.0), (0.0, 0.0)]),
        ] {
            assert_eq!(compute_alpha(&f, &b).unwrap().values, vec![0.0, 0.0]);
        }
    }

    #[test]
    fn zero_alpha_is_identity_and_corners_match() {
        let f = smooth("sin(x1)*x2 - x2^3", 2);
        let b = BoxDomain::from_bounds(&[(-1.0, 2.0), (0.5, 1.5)]);
        let zero = Underestimator::build(&f, &AlphaVector::zeros(&b));
        let fitted = Underestimator::build(&f, &compute_alpha(&f, &b).unwrap());
        for p in b.grid(7) {
            assert_eq!(zero.value(&p).unwrap(), f.value(&p).unwrap());
        }
        for corner in [[-1.0, 0.5], [2.0, 1.5], [-1.0, 1.5], [2.0, 0.5]] {
            assert_eq!(fitted.value(&corner).unwrap(), f.value(&corner).unwrap());
        }
    }

    #[test]
    fn separation_formula() {
        let b = BoxDomain::from_bounds(&[(0.0, 1.0)]);
        assert_eq!(max_separation(&[1.0], &b), 0.25);
        let b2 = BoxDomain::from_bounds(&[(0.0, 1.0), (0.0, 2.0)]);
        assert_eq!(max_separation(&[0.0, 0.0], &b2), 0.0);
        assert_eq!(max_separation(&[2.0, 1.0], &b2), 1.5);
    }

    #[test]
    fn degenerate_dimension_uses_diagonal_only() {
        let h = vec![
            vec![Interval::point(-2.0), Interval::point(5.0)],
            vec![Interval::point(5.0), Interval::point(-4.0)],
        ];
        let a = scaled_gerschgorin(&h, &[0.0, 1.0]);
        assert!((a[0] - 1.0).abs() < 1e-12);
        assert!((a[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let f = smooth("x1^2*x2 - cos(3*x2)", 2);
        let b = BoxDomain::from_bounds(&[(-1.0, 1.0), (-2.0, 0.5)]);
        let u = Underestimator::build(&f, &compute_alpha(&f, &b).unwrap());
        let x = [0.3, -0.4];
        let mut g = [0.0; 2];
        u.value_grad(&x, &mut g).unwrap();
        for i in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += 1e-6;
            xm[i] -= 1e-6;
            let fd = (u.value(&xp).unwrap() - u.value(&xm).unwrap()) / 2e-6;
            assert!((fd - g[i]).abs() < 1e-6);
        }
    }

    /// Halving a box shrinks the per-box-scaled ratio d_j/d_i for one row and
    /// grows it for the other, so box-width scaling alone is not monotone
    /// under refinement. A fixed scaling vector is.
    #[test]
    fn fixed_scaling_is_monotone_under_halving() {
        let f = smooth("x1*x2", 2);
        let root = BoxDomain::from_bounds(&[(0.0, 1.0), (0.0, 1.0)]);
        let (half, _) = root.bisect(0);
        let a_root = compute_alpha(&f, &root).unwrap();
        let a_own = compute_alpha(&f, &half).unwrap();
        assert!(a_own.values[0] > a_root.values[0]);
        let a_fixed = compute_alpha_scaled(&f, &half, &root.widths()).unwrap();
        for i in 0..2 {
            assert!(a_fixed.values[i] <= a_root.values[i]);
        }
    }
}
