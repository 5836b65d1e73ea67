use std::collections::HashMap;

use super::{BinaryOp, Expr, Node, Tape, UnaryOp};
use crate::domain::BoxDomain;
use crate::error::{EvalError, ParseError};
use crate::interval::Interval;

impl Expr {
    /// Symbolic partial derivative with respect to variable `var`.
    pub fn derivative(&self, var: usize) -> Expr {
        let mut memo = HashMap::new();
        self.derivative_memo(var, &mut memo)
    }

    fn derivative_memo(&self, var: usize, memo: &mut HashMap<*const Node, Expr>) -> Expr {
        if let Some(d) = memo.get(&self.ptr()) {
            return d.clone();
        }
        let d = match self.node() {
            Node::Const(_) => Expr::constant(0.0),
            Node::Var(i) => Expr::constant(if *i == var { 1.0 } else { 0.0 }),
            Node::Unary(op, a) => {
                let da = a.derivative_memo(var, memo);
                let outer = match op {
                    UnaryOp::Neg => return cache(memo, self, Expr::neg(da)),
                    UnaryOp::Sin => Expr::unary(UnaryOp::Cos, a.clone()),
                    UnaryOp::Cos => Expr::neg(Expr::unary(UnaryOp::Sin, a.clone())),
                    UnaryOp::Exp => self.clone(),
                    UnaryOp::Log => {
                        return cache(memo, self, Expr::div(da, a.clone()));
                    }
                    UnaryOp::Sqrt => {
                        return cache(
                            memo,
                            self,
                            Expr::div(da, Expr::mul(Expr::constant(2.0), self.clone())),
                        );
                    }
                };
                Expr::mul(outer, da)
            }
            Node::Binary(op, a, b) => {
                let da = a.derivative_memo(var, memo);
                let db = b.derivative_memo(var, memo);
                match op {
                    BinaryOp::Add => Expr::add(da, db),
                    BinaryOp::Sub => Expr::sub(da, db),
                    BinaryOp::Mul => Expr::add(Expr::mul(da, b.clone()), Expr::mul(a.clone(), db)),
                    BinaryOp::Div => {
                        // (a/b)' = a'/b - a b' / b^2
                        let first = Expr::div(da, b.clone());
                        let second = Expr::div(Expr::mul(a.clone(), db), Expr::powi(b.clone(), 2));
                        Expr::sub(first, second)
                    }
                }
            }
            Node::Powi(a, k) => {
                let da = a.derivative_memo(var, memo);
                Expr::mul(
                    Expr::mul(Expr::constant(*k as f64), Expr::powi(a.clone(), k - 1)),
                    da,
                )
            }
        };
        cache(memo, self, d)
    }
}

fn cache(memo: &mut HashMap<*const Node, Expr>, key: &Expr, value: Expr) -> Expr {
    memo.insert(key.ptr(), value.clone());
    value
}

/// Partial derivative of `e` with respect to the variable called `name`.
pub fn differentiate(e: &Expr, variables: &[String], name: &str) -> Result<Expr, ParseError> {
    let var =
        variables
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| ParseError::UndeclaredVariable {
                name: name.to_string(),
                position: 0,
            })?;
    Ok(e.derivative(var))
}

/// Interval enclosure of the Hessian of `e` with respect to `vars` over `domain`.
///
/// Entry `(i, j)` encloses `d2e / dx_vars[i] dx_vars[j]`; only the upper
/// triangle is evaluated and mirrored.
pub fn interval_hessian(
    e: &Expr,
    domain: &BoxDomain,
    vars: &[usize],
) -> Result<Vec<Vec<Interval>>, EvalError> {
    let k = vars.len();
    let mut entries = Vec::with_capacity(k * (k + 1) / 2);
    for (i, &vi) in vars.iter().enumerate() {
        let di = e.derivative(vi);
        for &vj in &vars[i..] {
            entries.push(di.derivative(vj));
        }
    }
    let values = Tape::compile(&entries).eval(&domain.intervals())?;
    let mut h = vec![vec![Interval::point(0.0); k]; k];
    let mut next = values.into_iter();
    #[allow(clippy::needless_range_loop)]
    for i in 0..k {
        for j in i..k {
            let entry = next.next().expect("one value per entry");
            h[i][j] = entry;
            h[j][i] = entry;
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::super::{parse, state_input_names};
    use super::*;

    #[test]
    fn product_rule() {
        let names = state_input_names(2, 0);
        let e = parse("x1^2*x2", &names).unwrap();
        let d = differentiate(&e, &names, "x1").unwrap();
        for p in [[0.5, 2.0], [-1.3, 0.7], [3.0, -2.0]] {
            assert!((d.eval(&p).unwrap() - 2.0 * p[0] * p[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn sine_derivative_is_cosine() {
        let names = vec!["x".to_string()];
        let e = parse("sin(x)", &names).unwrap();
        let d = differentiate(&e, &names, "x").unwrap();
        for x in [-2.0, 0.0, 0.4, 3.0] {
            assert!((d.eval(&[x]).unwrap() - f64::cos(x)).abs() < 1e-15);
        }
        assert!(differentiate(&e, &names, "y").is_err());
    }

    #[test]
    fn barrier_gradient_at_origin() {
        let names = state_input_names(2, 0);
        let h = parse(
            "-7.635*x1^2 - 3.439*x1*x2 - 3.4024*x2^2 + 0.5*x1 - 0.4*x2 + 7.402",
            &names,
        )
        .unwrap();
        let g: Vec<f64> = (0..2)
            .map(|i| h.derivative(i).eval(&[0.0, 0.0]).unwrap())
            .collect();
        assert_eq!(g, vec![0.5, -0.4]);
    }

    #[test]
    fn hessian_examples() {
        let names = state_input_names(2, 0);
        let unit = BoxDomain::from_bounds(&[(0.0, 1.0), (0.0, 1.0)]);
        let e = parse("-x1^2", &names).unwrap();
        let h = interval_hessian(&e, &unit, &[0]).unwrap();
        assert_eq!(h[0][0], Interval::point(-2.0));

        let e = parse("x1*x2", &names).unwrap();
        let h = interval_hessian(&e, &unit, &[0, 1]).unwrap();
        assert_eq!(h[0][1], Interval::point(1.0));
        assert_eq!(h[1][0], Interval::point(1.0));
        assert_eq!(h[0][0], Interval::point(0.0));
        assert_eq!(h[1][1], Interval::point(0.0));
    }

    #[test]
    fn sine_hessian_encloses_grid() {
        let names = state_input_names(1, 0);
        let e = parse("sin(x1)", &names).unwrap();
        let b = BoxDomain::from_bounds(&[(0.0, std::f64::consts::PI)]);
        let h = interval_hessian(&e, &b, &[0]).unwrap();
        assert!(h[0][0].lo <= -1.0 && h[0][0].hi >= 0.0);
        for p in b.grid(1001) {
            assert!(h[0][0].contains(-p[0].sin()));
        }
    }

    #[test]
    fn repeated_derivatives_of_compositions_fold() {
        // A quadratic composed with an affine map has a constant Hessian.
        let names = state_input_names(2, 0);
        let e = parse("-7.6*(17.6*x1 + 7.3*x2 + 1)^2 + 3*(x1 - 2*x2)^2", &names).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!(e.derivative(i).derivative(j).as_const().is_some());
            }
        }
    }
}
