use std::collections::HashMap;

use super::eval::Scalar;
use super::{BinaryOp, Expr, Node, UnaryOp};
use crate::error::EvalError;

#[derive(Clone, Copy, Debug)]
enum Instr {
    Const(f64),
    Var(usize),
    Unary(UnaryOp, u32),
    Binary(BinaryOp, u32, u32),
    Powi(u32, i32),
}

/// A straight-line program evaluating several expressions at once.
///
/// Subtrees shared between (or within) the outputs are computed once.
#[derive(Clone, Debug)]
pub struct Tape {
    instrs: Vec<Instr>,
    outputs: Vec<u32>,
    arity: usize,
}

#[derive(Default)]
struct Builder {
    instrs: Vec<Instr>,
    by_ptr: HashMap<*const Node, u32>,
    consts: HashMap<u64, u32>,
    vars: HashMap<usize, u32>,
    arity: usize,
}

impl Builder {
    fn push(&mut self, instr: Instr) -> u32 {
        self.instrs.push(instr);
        (self.instrs.len() - 1) as u32
    }

    fn visit(&mut self, e: &Expr) -> u32 {
        if let Some(&slot) = self.by_ptr.get(&e.ptr()) {
            return slot;
        }
        let slot = match e.node() {
            Node::Const(c) => match self.consts.get(&c.to_bits()) {
                Some(&s) => s,
                None => {
                    let s = self.push(Instr::Const(*c));
                    self.consts.insert(c.to_bits(), s);
                    s
                }
            },
            Node::Var(i) => {
                self.arity = self.arity.max(i + 1);
                match self.vars.get(i) {
                    Some(&s) => s,
                    None => {
                        let s = self.push(Instr::Var(*i));
                        self.vars.insert(*i, s);
                        s
                    }
                }
            }
            Node::Unary(op, a) => {
                let a = self.visit(a);
                self.push(Instr::Unary(*op, a))
            }
            Node::Binary(op, a, b) => {
                let a = self.visit(a);
                let b = self.visit(b);
                self.push(Instr::Binary(*op, a, b))
            }
            Node::Powi(a, k) => {
                let a = self.visit(a);
                self.push(Instr::Powi(a, *k))
            }
        };
        self.by_ptr.insert(e.ptr(), slot);
        slot
    }
}

impl Tape {
    pub fn compile(outputs: &[Expr]) -> Tape {
        let mut b = Builder::default();
        let outputs = outputs.iter().map(|e| b.visit(e)).collect();
        Tape {
            instrs: b.instrs,
            outputs,
            arity: b.arity,
        }
    }

    pub fn len(&self) -> usize {
        self.instrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instrs.is_empty()
    }

    pub fn num_outputs(&self) -> usize {
        self.outputs.len()
    }

    /// Number of input variables referenced (highest index plus one).
    pub fn arity(&self) -> usize {
        self.arity
    }

    /// Evaluates every output, writing them into `out`.
    pub fn eval_into<T: Scalar>(
        &self,
        inputs: &[T],
        scratch: &mut Vec<T>,
        out: &mut [T],
    ) -> Result<(), EvalError> {
        scratch.clear();
        scratch.reserve(self.instrs.len());
        for instr in &self.instrs {
            let v = match *instr {
                Instr::Const(c) => T::constant(c),
                Instr::Var(i) => inputs[i],
                Instr::Unary(op, a) => T::unary(op, scratch[a as usize])?,
                Instr::Binary(op, a, b) => T::binary(op, scratch[a as usize], scratch[b as usize])?,
                Instr::Powi(a, k) => T::powi(scratch[a as usize], k)?,
            };
            scratch.push(v);
        }
        for (o, &slot) in out.iter_mut().zip(&self.outputs) {
            *o = scratch[slot as usize];
        }
        Ok(())
    }

    pub fn eval<T: Scalar>(&self, inputs: &[T]) -> Result<Vec<T>, EvalError> {
        let mut scratch = Vec::new();
        let mut out = vec![T::constant(0.0); self.outputs.len()];
        self.eval_into(inputs, &mut scratch, &mut out)?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::super::{parse, state_input_names};
    use super::*;
    use crate::interval::Interval;

    #[test]
    fn shared_subtrees_are_compiled_once() {
        let names = state_input_names(2, 0);
        let inner = parse("sin(x1) * x2 + 3", &names).unwrap();
        let outer = Expr::mul(inner.clone(), inner.clone());
        let tape = Tape::compile(&[outer.clone(), inner.clone()]);
        // x1, sin, x2, mul, 3, add, square-mul
        assert_eq!(tape.len(), 7);
        let p = [0.3, -1.2];
        let v = tape.eval(&p).unwrap();
        assert_eq!(v[0], outer.eval(&p).unwrap());
        assert_eq!(v[1], inner.eval(&p).unwrap());
        let iv = tape
            .eval(&[Interval::point(0.3), Interval::point(-1.2)])
            .unwrap();
        assert!(iv[0].contains(v[0]));
    }
}
