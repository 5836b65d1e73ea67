use serde::{Deserialize, Serialize};

use crate::domain::BoxDomain;
use crate::error::ProblemError;
use crate::expr::Expr;
use crate::interval::Interval;

/// The rate function `gamma`.
#[derive(Clone, Debug)]
pub enum Gamma {
    /// `gamma(r) = c * r`.
    Linear(f64),
    /// An expression in the single variable `r` (index 0).
    Expr(Expr),
}

impl Gamma {
    /// `gamma(e)` as an expression.
    pub fn apply(&self, e: Expr) -> Expr {
        match self {
            Gamma::Linear(c) => Expr::mul(Expr::constant(*c), e),
            Gamma::Expr(g) => g.substitute(&[e]),
        }
    }

    pub fn eval(&self, r: f64) -> Result<f64, crate::error::EvalError> {
        match self {
            Gamma::Linear(c) => Ok(c * r),
            Gamma::Expr(g) => g.eval(&[r]),
        }
    }
}

/// Which side of an input bound a policy component must respect.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundSide {
    Lower,
    Upper,
}

/// A discrete-time system with a candidate barrier.
///
/// `f` and `pi` are expressions over `x1..xn, u1..um` (indices `0..n+m`);
/// `h` uses only the first `n`.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub n: usize,
    pub m: usize,
    pub f: Vec<Expr>,
    pub h: Expr,
    pub gamma: Gamma,
    pub pi: Option<Vec<Expr>>,
    pub input_box: BoxDomain,
    pub state_box: BoxDomain,
    /// Skip the face check that `state_box` encloses `{h >= 0}`.
    pub attest_containment: bool,
}

const GAMMA_SAMPLES: usize = 1000;
const FACE_BOXES: usize = 4096;

impl ProblemSpec {
    /// `h(f(x, u)) - h(x) + gamma(h(x))` over `(x, u)`.
    pub fn dtcbf_expr(&self) -> Expr {
        let next = self.h.substitute(&self.f);
        Expr::add(
            Expr::sub(next, self.h.clone()),
            self.gamma.apply(self.h.clone()),
        )
    }

    /// The DTCBF expression with `u = pi(x)`, over `x` only.
    pub fn closed_loop_expr(&self) -> Option<Expr> {
        let pi = self.pi.as_ref()?;
        let mut replacements: Vec<Expr> = (0..self.n).map(Expr::var).collect();
        replacements.extend(pi.iter().cloned());
        Some(self.dtcbf_expr().substitute(&replacements))
    }

    pub fn input_bounds(&self, j: usize) -> (f64, f64) {
        (self.input_box.lower()[j], self.input_box.upper()[j])
    }

    /// Input bounds the policy is not provably within over the whole state box.
    pub fn uncertified_input_bounds(&self) -> Result<Vec<(usize, BoundSide)>, ProblemError> {
        let Some(pi) = &self.pi else {
            return Ok(Vec::new());
        };
        let mut open = Vec::new();
        for (j, p) in pi.iter().enumerate() {
            let range = p
                .interval_eval(&self.state_box)
                .map_err(|source| ProblemError::Eval {
                    field: format!("pi[{j}]"),
                    source,
                })?;
            let (lo, hi) = self.input_bounds(j);
            if range.lo < lo {
                open.push((j, BoundSide::Lower));
            }
            if range.hi > hi {
                open.push((j, BoundSide::Upper));
            }
        }
        Ok(open)
    }

    /// Checks dimensions, the rate function, and that the state box
    /// encloses the zero-superlevel set.
    pub fn validate(&self) -> Result<(), ProblemError> {
        let dim = |field: &str, expected: usize, found: usize| {
            if expected == found {
                Ok(())
            } else {
                Err(ProblemError::Dimension {
                    field: field.into(),
                    expected,
                    found,
                })
            }
        };
        if self.n == 0 {
            return Err(ProblemError::Other(
                "the state dimension must be positive".into(),
            ));
        }
        dim("f", self.n, self.f.len())?;
        dim("X", self.n, self.state_box.dim())?;
        dim("U", self.m, self.input_box.dim())?;
        if let Some(pi) = &self.pi {
            dim("pi", self.m, pi.len())?;
            for (j, p) in pi.iter().enumerate() {
                if p.arity() > self.n {
                    return Err(ProblemError::Other(format!(
                        "pi[{j}] depends on an input variable"
                    )));
                }
            }
        }
        for (i, fi) in self.f.iter().enumerate() {
            if fi.arity() > self.n + self.m {
                return Err(ProblemError::Other(format!(
                    "f[{i}] uses an unknown variable"
                )));
            }
        }
        if self.h.arity() > self.n {
            return Err(ProblemError::Other("h depends on an input variable".into()));
        }
        self.validate_gamma()?;
        if !self.attest_containment {
            self.check_containment()?;
        }
        Ok(())
    }

    fn validate_gamma(&self) -> Result<(), ProblemError> {
        if let Gamma::Linear(c) = self.gamma {
            if !(c > 0.0 && c <= 1.0) {
                return Err(ProblemError::Gamma(format!(
                    "linear coefficient {c} is outside (0, 1], so gamma(r) <= r fails"
                )));
            }
            return Ok(());
        }
        let eval = |r: f64| {
            self.gamma.eval(r).map_err(|source| ProblemError::Eval {
                field: "gamma".into(),
                source,
            })
        };
        let at_zero = eval(0.0)?;
        if at_zero.abs() > 1e-12 {
            return Err(ProblemError::Gamma(format!("gamma(0) = {at_zero}")));
        }
        let per_axis = ((1e5f64).powf(1.0 / self.n as f64) as usize).clamp(2, 101);
        let mut top = 0.0f64;
        for p in self.state_box.grid(per_axis) {
            let v = self.h.eval(&p).map_err(|source| ProblemError::Eval {
                field: "h".into(),
                source,
            })?;
            top = top.max(v);
        }
        if top <= 0.0 {
            top = 1.0;
        }
        let mut previous = at_zero;
        for k in 1..=GAMMA_SAMPLES {
            let r = top * k as f64 / GAMMA_SAMPLES as f64;
            let g = eval(r)?;
            if g <= previous {
                return Err(ProblemError::Gamma(format!(
                    "not strictly increasing near r = {r}"
                )));
            }
            if g > r + 1e-12 {
                return Err(ProblemError::Gamma(format!("gamma({r}) = {g} exceeds r")));
            }
            previous = g;
        }
        Ok(())
    }

    /// Every face of the state box must have `h < 0`, shown by interval
    /// evaluation on adaptively bisected pieces of the face.
    fn check_containment(&self) -> Result<(), ProblemError> {
        for dim in 0..self.n {
            for upper_side in [false, true] {
                let face = self.state_box.face(dim, upper_side);
                let mut stack = vec![face];
                let mut visited = 0;
                while let Some(piece) = stack.pop() {
                    visited += 1;
                    let range: Interval =
                        self.h
                            .interval_eval(&piece)
                            .map_err(|source| ProblemError::Eval {
                                field: "h".into(),
                                source,
                            })?;
                    if range.hi < 0.0 {
                        continue;
                    }
                    let mid = piece.midpoint();
                    let at_mid = self.h.eval(&mid).unwrap_or(f64::NAN);
                    let widest = (0..self.n)
                        .max_by(|&a, &b| piece.width(a).total_cmp(&piece.width(b)).then(b.cmp(&a)))
                        .expect("n > 0");
                    if at_mid >= 0.0 || visited >= FACE_BOXES || piece.width(widest) == 0.0 {
                        let side = if upper_side { "upper" } else { "lower" };
                        return Err(ProblemError::Containment(format!(
                            "h is not provably negative on the {side} face of x{} near {:?}",
                            dim + 1,
                            mid
                        )));
                    }
                    let (a, b) = piece.bisect(widest);
                    stack.push(b);
                    stack.push(a);
                }
            }
        }
        Ok(())
    }

    pub fn barrier(&self, x: &[f64]) -> Result<f64, crate::error::EvalError> {
        self.h.eval(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, state_input_names};

    fn disk(gamma: Gamma) -> ProblemSpec {
        let names = state_input_names(2, 1);
        ProblemSpec {
            n: 2,
            m: 1,
            f: vec![
                parse("0.5*x1 + u1", &names).unwrap(),
                parse("0.5*x2", &names).unwrap(),
            ],
            h: parse("1 - x1^2 - x2^2", &names).unwrap(),
            gamma,
            pi: Some(vec![parse("-0.1*x1", &names).unwrap()]),
            input_box: BoxDomain::from_bounds(&[(-1.0, 1.0)]),
            state_box: BoxDomain::from_bounds(&[(-1.5, 1.5), (-1.5, 1.5)]),
            attest_containment: false,
        }
    }

    #[test]
    fn accepts_well_formed_problem() {
        disk(Gamma::Linear(0.5)).validate().unwrap();
        let g = parse("r/(1 + r)", &["r".to_string()]).unwrap();
        disk(Gamma::Expr(g)).validate().unwrap();
    }

    #[test]
    fn rejects_steep_gamma() {
        assert!(matches!(
            disk(Gamma::Linear(1.5)).validate(),
            Err(ProblemError::Gamma(_))
        ));
        let g = parse("2*r - r^2", &["r".to_string()]).unwrap();
        assert!(matches!(
            disk(Gamma::Expr(g)).validate(),
            Err(ProblemError::Gamma(_))
        ));
        let g = parse("r + 0.1", &["r".to_string()]).unwrap();
        assert!(matches!(
            disk(Gamma::Expr(g)).validate(),
            Err(ProblemError::Gamma(_))
        ));
    }

    #[test]
    fn containment_needs_negative_faces() {
        let mut p = disk(Gamma::Linear(0.5));
        p.state_box = BoxDomain::from_bounds(&[(-0.9, 1.5), (-1.5, 1.5)]);
        assert!(matches!(p.validate(), Err(ProblemError::Containment(_))));
        p.attest_containment = true;
        p.validate().unwrap();
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let mut p = disk(Gamma::Linear(0.5));
        p.f.pop();
        assert_eq!(
            p.validate(),
            Err(ProblemError::Dimension {
                field: "f".into(),
                expected: 2,
                found: 1
            })
        );
    }

    #[test]
    fn closed_loop_substitutes_policy() {
        let p = disk(Gamma::Linear(0.5));
        let f = p.closed_loop_expr().unwrap();
        let x = [0.4, -0.3];
        let u = -0.1 * x[0];
        let direct = p.dtcbf_expr().eval(&[x[0], x[1], u]).unwrap();
        assert!((f.eval(&x).unwrap() - direct).abs() < 1e-15);
        let hand = {
            let h = |a: f64, b: f64| 1.0 - a * a - b * b;
            h(0.5 * x[0] + u, 0.5 * x[1]) - 0.5 * h(x[0], x[1])
        };
        assert!((direct - hand).abs() < 1e-15);
        assert!(p.uncertified_input_bounds().unwrap().is_empty());
    }
}
