//! Twice-differentiable scalar functions backed by precompiled tapes.
//!
//! A [`SmoothFn`] is built once per problem from an [`Expr`] over the full
//! variable space `(x, u)`. Symbolic gradients and Hessians are computed at
//! construction; restricted views pin some variables to constants (the
//! midpoint state, a chosen input) without re-differentiating.

use std::sync::Arc;

use crate::domain::BoxDomain;
use crate::error::EvalError;
use crate::expr::{Expr, Tape};
use crate::interval::Interval;

/// Square matrix of intervals, row-major.
pub type IntervalMatrix = Vec<Vec<Interval>>;

/// Anything the local solvers can minimize.
pub trait Differentiable {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> Result<f64, EvalError>;
    /// Writes the gradient into `grad` and returns the value.
    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> Result<f64, EvalError>;
    /// Rigorous enclosures of the value and gradient at `x`, covering
    /// floating-point error in their evaluation.
    fn enclose(&self, x: &[f64]) -> Result<(Interval, Vec<Interval>), EvalError>;
}

#[derive(Debug)]
struct Derivatives {
    n_full: usize,
    expr: Expr,
    value: Tape,
    /// Outputs: value, then one partial per full variable.
    gradient: Tape,
    /// Outputs: upper triangle of the full Hessian, row by row.
    hessian: Tape,
}

fn upper_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + j
}

#[derive(Clone, Debug)]
pub struct SmoothFn {
    derivs: Arc<Derivatives>,
    active: Vec<usize>,
    /// Full-length input; entries of inactive variables hold their pinned values.
    base: Vec<f64>,
}

impl SmoothFn {
    /// Differentiates `expr` twice with respect to each of `n_full` variables.
    pub fn new(expr: Expr, n_full: usize) -> SmoothFn {
        let grads: Vec<Expr> = (0..n_full).map(|i| expr.derivative(i)).collect();
        let mut hess = Vec::with_capacity(n_full * (n_full + 1) / 2);
        for (i, gi) in grads.iter().enumerate() {
            for j in i..n_full {
                hess.push(gi.derivative(j));
            }
        }
        let mut grad_outputs = vec![expr.clone()];
        grad_outputs.extend(grads);
        let derivs = Derivatives {
            n_full,
            value: Tape::compile(std::slice::from_ref(&expr)),
            gradient: Tape::compile(&grad_outputs),
            hessian: Tape::compile(&hess),
            expr,
        };
        SmoothFn {
            derivs: Arc::new(derivs),
            active: (0..n_full).collect(),
            base: vec![0.0; n_full],
        }
    }

    /// View of this function over `active` variables with every other
    /// variable pinned to its entry in `pinned` (full length).
    pub fn restrict(&self, active: &[usize], pinned: &[f64]) -> SmoothFn {
        assert_eq!(pinned.len(), self.derivs.n_full);
        SmoothFn {
            derivs: Arc::clone(&self.derivs),
            active: active.to_vec(),
            base: pinned.to_vec(),
        }
    }

    /// The same function with the sign flipped (derivatives recomputed).
    pub fn negated(&self) -> SmoothFn {
        let neg = SmoothFn::new(Expr::neg(self.derivs.expr.clone()), self.derivs.n_full);
        SmoothFn {
            derivs: neg.derivs,
            active: self.active.clone(),
            base: self.base.clone(),
        }
    }

    pub fn expr(&self) -> &Expr {
        &self.derivs.expr
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn full_dim(&self) -> usize {
        self.derivs.n_full
    }

    /// Embeds an active-space point into the full variable space.
    pub fn full_point(&self, x: &[f64]) -> Vec<f64> {
        let mut full = self.base.clone();
        for (&slot, &v) in self.active.iter().zip(x) {
            full[slot] = v;
        }
        full
    }

    fn full_box(&self, domain: &BoxDomain) -> Vec<Interval> {
        let mut full: Vec<Interval> = self.base.iter().map(|&v| Interval::point(v)).collect();
        for (k, &slot) in self.active.iter().enumerate() {
            full[slot] = Interval::new(domain.lower()[k], domain.upper()[k]);
        }
        full
    }

    pub fn interval_value(&self, domain: &BoxDomain) -> Result<Interval, EvalError> {
        let mut out = [Interval::point(0.0)];
        self.derivs
            .value
            .eval_into(&self.full_box(domain), &mut Vec::new(), &mut out)?;
        Ok(out[0])
    }

    /// Interval Hessian over the active variables on `domain`.
    pub fn interval_hessian(&self, domain: &BoxDomain) -> Result<IntervalMatrix, EvalError> {
        let n = self.derivs.n_full;
        let upper = self.derivs.hessian.eval(&self.full_box(domain))?;
        let k = self.active.len();
        let mut h = vec![vec![Interval::point(0.0); k]; k];
        for (a, &i) in self.active.iter().enumerate() {
            for (b, &j) in self.active.iter().enumerate() {
                h[a][b] = upper[upper_index(n, i, j)];
            }
        }
        Ok(h)
    }

    /// Pointwise Hessian over the active variables.
    pub fn hessian(&self, x: &[f64]) -> Result<Vec<Vec<f64>>, EvalError> {
        let n = self.derivs.n_full;
        let upper = self.derivs.hessian.eval(&self.full_point(x))?;
        Ok(self
            .active
            .iter()
            .map(|&i| {
                self.active
                    .iter()
                    .map(|&j| upper[upper_index(n, i, j)])
                    .collect()
            })
            .collect())
    }
}

impl Differentiable for SmoothFn {
    fn dim(&self) -> usize {
        self.active.len()
    }

    fn value(&self, x: &[f64]) -> Result<f64, EvalError> {
        let mut out = [0.0];
        self.derivs
            .value
            .eval_into(&self.full_point(x), &mut Vec::new(), &mut out)?;
        Ok(out[0])
    }

    fn value_grad(&self, x: &[f64], grad: &mut [f64]) -> Result<f64, EvalError> {
        let mut out = vec![0.0; self.derivs.n_full + 1];
        self.derivs
            .gradient
            .eval_into(&self.full_point(x), &mut Vec::new(), &mut out)?;
        for (g, &slot) in grad.iter_mut().zip(&self.active) {
            *g = out[slot + 1];
        }
        Ok(out[0])
    }

    fn enclose(&self, x: &[f64]) -> Result<(Interval, Vec<Interval>), EvalError> {
        let full: Vec<Interval> = self
            .full_point(x)
            .into_iter()
            .map(Interval::point)
            .collect();
        let out = self.derivs.gradient.eval(&full)?;
        let grad = self.active.iter().map(|&slot| out[slot + 1]).collect();
        Ok((out[0], grad))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, state_input_names};

    #[test]
    fn restriction_pins_inactive_variables() {
        let names = state_input_names(2, 1);
        let e = parse("x1^2*u1 + sin(x2)*u1^2", &names).unwrap();
        let f = SmoothFn::new(e.clone(), 3);
        let g = f.restrict(&[2], &[0.5, 1.0, 0.0]);
        let mut grad = [0.0];
        let v = g.value_grad(&[2.0], &mut grad).unwrap();
        assert!((v - e.eval(&[0.5, 1.0, 2.0]).unwrap()).abs() < 1e-15);
        assert!((grad[0] - (0.25 + 2.0 * 2.0 * 1f64.sin())).abs() < 1e-14);
        let h = g
            .interval_hessian(&BoxDomain::from_bounds(&[(-1.0, 1.0)]))
            .unwrap();
        assert!(h[0][0].contains(2.0 * 1f64.sin()));
        assert_eq!(h.len(), 1);
    }

    #[test]
    fn hessian_matches_symbolic_entries() {
        let names = state_input_names(2, 0);
        let e = parse("x1^3*x2 - exp(x2)", &names).unwrap();
        let f = SmoothFn::new(e, 2);
        let h = f.hessian(&[1.5, 0.5]).unwrap();
        assert!((h[0][0] - 6.0 * 1.5 * 0.5).abs() < 1e-12);
        assert!((h[0][1] - 3.0 * 1.5 * 1.5).abs() < 1e-12);
        assert_eq!(h[0][1], h[1][0]);
        assert!((h[1][1] + 0.5f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn negation_flips_everything() {
        let names = state_input_names(1, 0);
        let f = SmoothFn::new(parse("x1^3", &names).unwrap(), 1);
        let g = f.negated();
        let mut gf = [0.0];
        let mut gg = [0.0];
        assert_eq!(f.value_grad(&[2.0], &mut gf).unwrap(), 8.0);
        assert_eq!(g.value_grad(&[2.0], &mut gg).unwrap(), -8.0);
        assert_eq!(gf[0], -gg[0]);
    }
}
