//! Certifying verification of discrete-time control barrier functions.
//!
//! A candidate barrier `h` with rate function `gamma` is checked against a
//! system `x+ = f(x, u)` by spatial branch-and-bound over a box `X` that
//! encloses the zero-superlevel set of `h`. Subdomains are bounded with
//! alpha-BB convex underestimators. A claimed counterexample is always
//! re-checked by direct interval evaluation before it is reported.

pub mod branching;
pub mod convex;
pub mod discretize;
pub mod domain;
pub mod error;
pub mod expr;
pub mod function;
pub mod global;
pub mod interval;
pub mod io;
mod par;
pub mod underestimator;
pub mod verifier;

pub use convex::{ConvexError, ConvexSolution, ConvexStatus, SolverTolerances};
pub use domain::BoxDomain;
pub use error::{EvalError, ParseError, ProblemError};
pub use expr::{parse, Expr};
pub use function::{Differentiable, SmoothFn};
pub use global::{GlobalError, GlobalSolution};
pub use interval::Interval;
pub use underestimator::{compute_alpha, max_separation, AlphaVector, Underestimator};
pub use verifier::{
    check_counterexample, verify, verify_known, verify_unknown, Gamma, PiecewisePolicy,
    ProblemSpec, Verdict, VerifierConfig,
};
