use super::{BinaryOp, Expr, Node, UnaryOp};
use crate::domain::BoxDomain;
use crate::error::EvalError;
use crate::interval::Interval;

/// Number-like values an expression can be evaluated over.
pub trait Scalar: Copy {
    fn constant(c: f64) -> Self;
    fn unary(op: UnaryOp, a: Self) -> Result<Self, EvalError>;
    fn binary(op: BinaryOp, a: Self, b: Self) -> Result<Self, EvalError>;
    fn powi(a: Self, k: i32) -> Result<Self, EvalError>;
}

impl Scalar for f64 {
    fn constant(c: f64) -> Self {
        c
    }

    fn unary(op: UnaryOp, a: f64) -> Result<f64, EvalError> {
        let v = match op {
            UnaryOp::Neg => -a,
            UnaryOp::Sin => a.sin(),
            UnaryOp::Cos => a.cos(),
            UnaryOp::Exp => a.exp(),
            UnaryOp::Log => {
                if a <= 0.0 {
                    return Err(EvalError::LogDomain);
                }
                a.ln()
            }
            UnaryOp::Sqrt => {
                if a < 0.0 {
                    return Err(EvalError::SqrtDomain);
                }
                a.sqrt()
            }
        };
        nan_check(v)
    }

    fn binary(op: BinaryOp, a: f64, b: f64) -> Result<f64, EvalError> {
        let v = match op {
            BinaryOp::Add => a + b,
            BinaryOp::Sub => a - b,
            BinaryOp::Mul => a * b,
            BinaryOp::Div => {
                if b == 0.0 {
                    return Err(EvalError::DivisionByZero);
                }
                a / b
            }
        };
        nan_check(v)
    }

    fn powi(a: f64, k: i32) -> Result<f64, EvalError> {
        if k < 0 && a == 0.0 {
            return Err(EvalError::DivisionByZero);
        }
        nan_check(a.powi(k))
    }
}

fn nan_check(v: f64) -> Result<f64, EvalError> {
    if v.is_nan() {
        Err(EvalError::NotANumber)
    } else {
        Ok(v)
    }
}

impl Scalar for Interval {
    fn constant(c: f64) -> Self {
        Interval::point(c)
    }

    fn unary(op: UnaryOp, a: Interval) -> Result<Interval, EvalError> {
        let v = match op {
            UnaryOp::Neg => a.neg(),
            UnaryOp::Sin => a.sin(),
            UnaryOp::Cos => a.cos(),
            UnaryOp::Exp => a.exp(),
            UnaryOp::Log => a.ln()?,
            UnaryOp::Sqrt => a.sqrt()?,
        };
        interval_nan_check(v)
    }

    fn binary(op: BinaryOp, a: Interval, b: Interval) -> Result<Interval, EvalError> {
        let v = match op {
            BinaryOp::Add => a.add(b),
            BinaryOp::Sub => a.sub(b),
            BinaryOp::Mul => a.mul(b),
            BinaryOp::Div => a.div(b)?,
        };
        interval_nan_check(v)
    }

    fn powi(a: Interval, k: i32) -> Result<Interval, EvalError> {
        interval_nan_check(a.powi(k)?)
    }
}

fn interval_nan_check(v: Interval) -> Result<Interval, EvalError> {
    if v.lo.is_nan() || v.hi.is_nan() {
        Err(EvalError::NotANumber)
    } else {
        Ok(v)
    }
}

impl Expr {
    /// Evaluates over any [`Scalar`] given one value per variable.
    pub fn eval_generic<T: Scalar>(&self, inputs: &[T]) -> Result<T, EvalError> {
        match self.node() {
            Node::Const(c) => Ok(T::constant(*c)),
            Node::Var(i) => Ok(inputs[*i]),
            Node::Unary(op, a) => T::unary(*op, a.eval_generic(inputs)?),
            Node::Binary(op, a, b) => {
                T::binary(*op, a.eval_generic(inputs)?, b.eval_generic(inputs)?)
            }
            Node::Powi(a, k) => T::powi(a.eval_generic(inputs)?, *k),
        }
    }

    /// Floating-point evaluation at a point.
    pub fn eval(&self, point: &[f64]) -> Result<f64, EvalError> {
        self.eval_generic(point)
    }

    /// Interval enclosure of the expression's range over a box.
    pub fn interval_eval(&self, domain: &BoxDomain) -> Result<Interval, EvalError> {
        self.eval_generic(&domain.intervals())
    }
}

#[cfg(test)]
mod tests {
    use super::super::{parse, state_input_names};
    use super::*;

    const H_TEXT: &str = "−7.635*x1^2 − 3.439*x1*x2 − 3.4024*x2^2 + 0.5*x1 − 0.4*x2 + 7.402";

    #[test]
    fn barrier_values() {
        let names = state_input_names(2, 0);
        let h = parse(H_TEXT, &names).unwrap();
        assert_eq!(h.eval(&[0.0, 0.0]).unwrap(), 7.402);
        assert!(h.eval(&[0.841, -1.457]).unwrap() < 0.0);
        assert!(h.eval(&[1.030, -1.110]).unwrap() >= 0.0);
        assert_eq!(Expr::constant(3.0).eval(&[0.4, 9.0]).unwrap(), 3.0);
    }

    #[test]
    fn domain_errors_are_reported() {
        let names = state_input_names(1, 0);
        let e = parse("1/x1", &names).unwrap();
        assert_eq!(e.eval(&[0.0]), Err(EvalError::DivisionByZero));
        let e = parse("log(x1)", &names).unwrap();
        assert_eq!(e.eval(&[-1.0]), Err(EvalError::LogDomain));
        let b = BoxDomain::from_bounds(&[(-1.0, 1.0)]);
        assert_eq!(e.interval_eval(&b), Err(EvalError::LogDomain));
    }

    #[test]
    fn interval_of_square_is_tight() {
        let names = state_input_names(1, 0);
        let b = BoxDomain::from_bounds(&[(-1.0, 2.0)]);
        let sq = parse("x1^2", &names).unwrap();
        assert_eq!(sq.interval_eval(&b).unwrap(), Interval::new(0.0, 4.0));
        let prod = parse("x1*x1", &names).unwrap();
        assert_eq!(prod.interval_eval(&b).unwrap(), Interval::new(-2.0, 4.0));
    }

    #[test]
    fn barrier_enclosure_contains_dense_grid() {
        let names = state_input_names(2, 0);
        let h = parse(H_TEXT, &names).unwrap();
        let b = BoxDomain::from_bounds(&[(-2.0, 2.0), (-2.0, 2.0)]);
        let enclosure = h.interval_eval(&b).unwrap();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in b.grid(101) {
            let v = h.eval(&p).unwrap();
            lo = lo.min(v);
            hi = hi.max(v);
        }
        assert!(
            enclosure.lo <= lo && hi <= enclosure.hi,
            "{enclosure} vs [{lo}, {hi}]"
        );
    }
}
