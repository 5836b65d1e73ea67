//! Scalar expressions over indexed variables.
//!
//! Nodes are reference counted so substitution and differentiation share
//! subtrees instead of copying them. All constructors fold constants, which
//! keeps repeated derivatives of polynomial compositions small.

mod diff;
mod eval;
mod parse;
mod tape;

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

pub use diff::{differentiate, interval_hessian};
pub use eval::Scalar;
pub use parse::parse;
pub use tape::Tape;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl UnaryOp {
    fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Exp => "exp",
            UnaryOp::Log => "log",
            UnaryOp::Sqrt => "sqrt",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, PartialEq)]
pub enum Node {
    Const(f64),
    Var(usize),
    Unary(UnaryOp, Expr),
    Binary(BinaryOp, Expr, Expr),
    Powi(Expr, i32),
}

/// An immutable expression tree.
#[derive(Clone, Debug, PartialEq)]
pub struct Expr(Arc<Node>);

#[allow(clippy::should_implement_trait)]
impl Expr {
    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn constant(c: f64) -> Expr {
        Expr(Arc::new(Node::Const(c)))
    }

    pub fn var(i: usize) -> Expr {
        Expr(Arc::new(Node::Var(i)))
    }

    pub fn as_const(&self) -> Option<f64> {
        match *self.0 {
            Node::Const(c) => Some(c),
            _ => None,
        }
    }

    fn ptr(&self) -> *const Node {
        Arc::as_ptr(&self.0)
    }

    pub fn neg(a: Expr) -> Expr {
        match a.node() {
            Node::Const(c) => Expr::constant(-c),
            Node::Unary(UnaryOp::Neg, inner) => inner.clone(),
            _ => Expr(Arc::new(Node::Unary(UnaryOp::Neg, a))),
        }
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => return Expr::constant(x + y),
            (Some(0.0), None) => return b,
            (None, Some(0.0)) => return a,
            _ => {}
        }
        if let Node::Unary(UnaryOp::Neg, inner) = b.node() {
            return Expr::sub(a, inner.clone());
        }
        Expr(Arc::new(Node::Binary(BinaryOp::Add, a, b)))
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => return Expr::constant(x - y),
            (Some(0.0), None) => return Expr::neg(b),
            (None, Some(0.0)) => return a,
            _ => {}
        }
        if let Node::Unary(UnaryOp::Neg, inner) = b.node() {
            return Expr::add(a, inner.clone());
        }
        Expr(Arc::new(Node::Binary(BinaryOp::Sub, a, b)))
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) => return Expr::constant(x * y),
            (None, Some(_)) => return Expr::mul(b, a),
            (Some(x), None) => {
                if x == 0.0 {
                    return Expr::constant(0.0);
                }
                if x == 1.0 {
                    return b;
                }
                if x == -1.0 {
                    return Expr::neg(b);
                }
                match b.node() {
                    // c1 * (c2 * e) -> (c1 c2) * e
                    Node::Binary(BinaryOp::Mul, l, r) if l.as_const().is_some() => {
                        return Expr::mul(Expr::constant(x * l.as_const().unwrap()), r.clone());
                    }
                    Node::Unary(UnaryOp::Neg, inner) => {
                        return Expr::mul(Expr::constant(-x), inner.clone());
                    }
                    _ => {}
                }
            }
            (None, None) => {}
        }
        Expr(Arc::new(Node::Binary(BinaryOp::Mul, a, b)))
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        match (a.as_const(), b.as_const()) {
            (Some(x), Some(y)) if y != 0.0 => return Expr::constant(x / y),
            (None, Some(1.0)) => return a,
            (None, Some(y)) if y != 0.0 => return Expr::mul(Expr::constant(1.0 / y), a),
            (Some(0.0), None) => return Expr::constant(0.0),
            _ => {}
        }
        Expr(Arc::new(Node::Binary(BinaryOp::Div, a, b)))
    }

    pub fn powi(a: Expr, k: i32) -> Expr {
        if k == 0 {
            return Expr::constant(1.0);
        }
        if k == 1 {
            return a;
        }
        if let Some(c) = a.as_const() {
            if k > 0 || c != 0.0 {
                return Expr::constant(c.powi(k));
            }
        }
        Expr(Arc::new(Node::Powi(a, k)))
    }

    pub fn unary(op: UnaryOp, a: Expr) -> Expr {
        if op == UnaryOp::Neg {
            return Expr::neg(a);
        }
        if let Some(c) = a.as_const() {
            let folded = match op {
                UnaryOp::Sin => Some(c.sin()),
                UnaryOp::Cos => Some(c.cos()),
                UnaryOp::Exp => Some(c.exp()),
                UnaryOp::Log if c > 0.0 => Some(c.ln()),
                UnaryOp::Sqrt if c >= 0.0 => Some(c.sqrt()),
                _ => None,
            };
            if let Some(v) = folded {
                return Expr::constant(v);
            }
        }
        Expr(Arc::new(Node::Unary(op, a)))
    }

    pub fn binary(op: BinaryOp, a: Expr, b: Expr) -> Expr {
        match op {
            BinaryOp::Add => Expr::add(a, b),
            BinaryOp::Sub => Expr::sub(a, b),
            BinaryOp::Mul => Expr::mul(a, b),
            BinaryOp::Div => Expr::div(a, b),
        }
    }

    /// Replaces every `Var(i)` with `replacements[i]`, re-folding constants.
    ///
    /// Shared subtrees stay shared in the result.
    pub fn substitute(&self, replacements: &[Expr]) -> Expr {
        let mut memo = HashMap::new();
        self.substitute_memo(replacements, &mut memo)
    }

    fn substitute_memo(
        &self,
        replacements: &[Expr],
        memo: &mut HashMap<*const Node, Expr>,
    ) -> Expr {
        if let Some(done) = memo.get(&self.ptr()) {
            return done.clone();
        }
        let out = match self.node() {
            Node::Const(_) => self.clone(),
            Node::Var(i) => replacements[*i].clone(),
            Node::Unary(op, a) => Expr::unary(*op, a.substitute_memo(replacements, memo)),
            Node::Binary(op, a, b) => {
                let a = a.substitute_memo(replacements, memo);
                let b = b.substitute_memo(replacements, memo);
                Expr::binary(*op, a, b)
            }
            Node::Powi(a, k) => Expr::powi(a.substitute_memo(replacements, memo), *k),
        };
        memo.insert(self.ptr(), out.clone());
        out
    }

    /// Highest variable index used, plus one.
    pub fn arity(&self) -> usize {
        match self.node() {
            Node::Const(_) => 0,
            Node::Var(i) => i + 1,
            Node::Unary(_, a) | Node::Powi(a, _) => a.arity(),
            Node::Binary(_, a, b) => a.arity().max(b.arity()),
        }
    }

    pub fn depends_on(&self, var: usize) -> bool {
        match self.node() {
            Node::Const(_) => false,
            Node::Var(i) => *i == var,
            Node::Unary(_, a) | Node::Powi(a, _) => a.depends_on(var),
            Node::Binary(_, a, b) => a.depends_on(var) || b.depends_on(var),
        }
    }

    /// Renders the expression with the given variable names, in the syntax
    /// accepted by [`parse`].
    pub fn display<'a>(&'a self, names: &'a [String]) -> impl fmt::Display + 'a {
        Display { expr: self, names }
    }
}

struct Display<'a> {
    expr: &'a Expr,
    names: &'a [String],
}

impl Display<'_> {
    fn write(&self, e: &Expr, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match e.node() {
            Node::Const(c) => {
                if *c < 0.0 {
                    write!(f, "({c:?})")
                } else {
                    write!(f, "{c:?}")
                }
            }
            Node::Var(i) => match self.names.get(*i) {
                Some(name) => f.write_str(name),
                None => write!(f, "v{i}"),
            },
            Node::Unary(UnaryOp::Neg, a) => {
                f.write_str("(-")?;
                self.write(a, f)?;
                f.write_str(")")
            }
            Node::Unary(op, a) => {
                write!(f, "{}(", op.name())?;
                self.write(a, f)?;
                f.write_str(")")
            }
            Node::Binary(op, a, b) => {
                let sym = match op {
                    BinaryOp::Add => " + ",
                    BinaryOp::Sub => " - ",
                    BinaryOp::Mul => "*",
                    BinaryOp::Div => "/",
                };
                f.write_str("(")?;
                self.write(a, f)?;
                f.write_str(sym)?;
                self.write(b, f)?;
                f.write_str(")")
            }
            Node::Powi(a, k) => {
                f.write_str("(")?;
                self.write(a, f)?;
                if *k < 0 {
                    write!(f, ")^({k})")
                } else {
                    write!(f, ")^{k}")
                }
            }
        }
    }
}

impl fmt::Display for Display<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(self.expr, f)
    }
}

/// Variable names `x1..xn` followed by `u1..um`.
pub fn state_input_names(n: usize, m: usize) -> Vec<String> {
    (1..=n)
        .map(|i| format!("x{i}"))
        .chain((1..=m).map(|j| format!("u{j}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructors_fold_constants() {
        let x = Expr::var(0);
        assert_eq!(
            Expr::add(Expr::constant(2.0), Expr::constant(3.0)).as_const(),
            Some(5.0)
        );
        assert_eq!(
            Expr::mul(Expr::constant(0.0), x.clone()).as_const(),
            Some(0.0)
        );
        assert_eq!(Expr::mul(Expr::constant(1.0), x.clone()), x);
        assert_eq!(Expr::powi(x.clone(), 1), x);
        assert_eq!(Expr::neg(Expr::neg(x.clone())), x);
        let nested = Expr::mul(
            Expr::constant(2.0),
            Expr::mul(Expr::constant(3.0), x.clone()),
        );
        match nested.node() {
            Node::Binary(BinaryOp::Mul, c, v) => {
                assert_eq!(c.as_const(), Some(6.0));
                assert_eq!(v, &x);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn division_by_constant_zero_is_kept() {
        let e = Expr::div(Expr::constant(1.0), Expr::constant(0.0));
        assert!(e.as_const().is_none());
        assert!(e.eval(&[]).is_err());
    }

    #[test]
    fn substitution_folds() {
        let names = state_input_names(2, 0);
        let e = parse("x1^2 + 0.5*x2", &names).unwrap();
        let s = e.substitute(&[Expr::constant(2.0), Expr::constant(4.0)]);
        assert_eq!(s.as_const(), Some(6.0));
    }

    #[test]
    fn display_round_trips() {
        let names = state_input_names(2, 1);
        let e = parse("-x1^2*sin(u1) / (1 + exp(x2)) - 3e-2*x2^-2", &names).unwrap();
        let text = e.display(&names).to_string();
        let back = parse(&text, &names).unwrap();
        for p in [[0.3, -0.7, 1.1], [1.5, 2.0, -0.2]] {
            let a = e.eval(&p).unwrap();
            let b = back.eval(&p).unwrap();
            assert!((a - b).abs() <= 1e-14 * (1.0 + a.abs()), "{text}");
        }
    }
}
