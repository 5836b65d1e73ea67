//! Direct global minimization of the closed-loop DTCBF expression over
//! `{h >= 0}`, for comparison with the verifier.
//!
//! The result carries no certificate: the minimizer is only feasible up to
//! `eps_feas`, so it can sit just outside the safe set.

use serde::Serialize;

use crate::error::ProblemError;
use crate::expr::Expr;
use crate::function::SmoothFn;
use crate::global::{minimize_constrained, GlobalError};

use super::problem::ProblemSpec;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BaselineReport {
    pub point: Vec<f64>,
    pub value: f64,
    pub gap: f64,
    pub iterations: usize,
    /// `h` at the reported minimizer.
    pub barrier: f64,
}

impl BaselineReport {
    /// The minimizer lies outside `{h >= 0}`, so its value proves nothing.
    pub fn outside_safe_set(&self) -> bool {
        self.barrier < 0.0
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BaselineError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Search(#[from] GlobalError),
}

pub fn baseline(
    problem: &ProblemSpec,
    eps_c: f64,
    eps_feas: f64,
) -> Result<BaselineReport, BaselineError> {
    problem.validate()?;
    let objective = problem
        .closed_loop_expr()
        .ok_or_else(|| ProblemError::Other("the baseline needs a policy".into()))?;
    let objective = SmoothFn::new(objective, problem.n);
    let constraint = SmoothFn::new(Expr::neg(problem.h.clone()), problem.n);
    let s = minimize_constrained(&objective, &constraint, &problem.state_box, eps_c, eps_feas)?;
    let barrier = problem
        .barrier(&s.point)
        .map_err(|source| ProblemError::Eval {
            field: "h".into(),
            source,
        })?;
    Ok(BaselineReport {
        point: s.point,
        value: s.value,
        gap: s.gap,
        iterations: s.iterations,
        barrier,
    })
}
