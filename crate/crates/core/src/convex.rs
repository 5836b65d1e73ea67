//! Two-phase solver for `min F(x)` subject to `H(x) <= 0` over a box, with
//! `F` and `H` convex.
//!
//! Phase 1 minimizes `H` alone over the box with spectral projected gradient
//! (nonmonotone Armijo backtracking). Phase 2 runs an augmented Lagrangian on
//! the constraint, warm-started from the phase-1 point, with each subproblem
//! solved by the same projected-gradient routine.
//!
//! Every answer comes with a lower bound obtained from first-order convexity
//! at the returned point, evaluated in interval arithmetic. Infeasibility is
//! declared only when that bound on `min H` exceeds the feasibility tolerance.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::BoxDomain;
use crate::error::EvalError;
use crate::function::Differentiable;
use crate::interval::Interval;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverTolerances {
    /// Projected-gradient norm at which a bound-constrained solve stops.
    pub grad: f64,
    /// Relative decrease below which progress counts as stalled.
    pub rel: f64,
    /// Allowed constraint violation.
    pub feas: f64,
    /// Projected-gradient iterations per phase.
    pub max_iters: usize,
}

impl Default for SolverTolerances {
    fn default() -> Self {
        SolverTolerances {
            grad: 1e-8,
            rel: 1e-15,
            feas: 1e-9,
            max_iters: 100_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConvexStatus {
    Optimal,
    Infeasible,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvexSolution {
    pub status: ConvexStatus,
    /// The minimizer, or the phase-1 point when infeasible.
    pub minimizer: Vec<f64>,
    /// Objective at the minimizer, or the constraint at the phase-1 point.
    pub value: f64,
    /// Certified lower bound on the optimal value; when infeasible, on the
    /// minimum of the constraint over the box.
    pub lower_bound: f64,
    pub multiplier: f64,
    pub iterations: usize,
    pub step_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ConvexError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("iteration limit reached with constraint violation {violation:e}")]
    IterationLimit {
        best: Vec<f64>,
        value: f64,
        /// Still a valid lower bound on the optimal value.
        lower_bound: f64,
        violation: f64,
    },
}

/// Result of a local (not certified) solve.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalSolution {
    pub point: Vec<f64>,
    pub value: f64,
    pub violation: f64,
    pub iterations: usize,
}

struct Descent {
    x: Vec<f64>,
    value: f64,
    iterations: usize,
    step_norm: f64,
}

const MEMORY: usize = 10;
const STEP_MIN: f64 = 1e-30;
const STEP_MAX: f64 = 1e12;
const MAX_OUTER: usize = 60;

fn projected_gradient_norm(x: &[f64], g: &[f64], domain: &BoxDomain) -> f64 {
    let (lo, hi) = (domain.lower(), domain.upper());
    (0..x.len())
        .map(|i| ((x[i] - g[i]).clamp(lo[i], hi[i]) - x[i]).abs())
        .fold(0.0, f64::max)
}

/// Spectral projected gradient on a box.
fn spg<P>(
    phi: &P,
    domain: &BoxDomain,
    x0: &[f64],
    tol: &SolverTolerances,
    budget: usize,
) -> Result<Descent, EvalError>
where
    P: Fn(&[f64], &mut [f64]) -> Result<f64, EvalError>,
{
    let n = x0.len();
    let (lo, hi) = (domain.lower(), domain.upper());
    let mut x = x0.to_vec();
    domain.project(&mut x);
    let mut g = vec![0.0; n];
    let mut f = phi(&x, &mut g)?;
    let mut history = VecDeque::with_capacity(MEMORY + 1);
    history.push_back(f);

    let pg = projected_gradient_norm(&x, &g, domain);
    let mut step = if pg > 0.0 {
        (1.0 / pg).clamp(STEP_MIN, STEP_MAX)
    } else {
        1.0
    };
    let mut d = vec![0.0; n];
    let mut xt = vec![0.0; n];
    let mut gt = vec![0.0; n];
    let mut iterations = 0;
    let mut step_norm = 0.0;
    let mut stalled = 0;

    while iterations < budget {
        if projected_gradient_norm(&x, &g, domain) <= tol.grad {
            break;
        }
        for i in 0..n {
            d[i] = (x[i] - step * g[i]).clamp(lo[i], hi[i]) - x[i];
        }
        let gtd: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
        if gtd >= 0.0 {
            break;
        }
        let fmax = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut t = 1.0;
        let accepted = loop {
            for i in 0..n {
                xt[i] = (x[i] + t * d[i]).clamp(lo[i], hi[i]);
            }
            let ft = phi(&xt, &mut gt)?;
            if ft <= fmax + 1e-4 * t * gtd {
                break Some(ft);
            }
            let q = -0.5 * t * t * gtd / (ft - f - t * gtd);
            t = if q.is_finite() && q >= 0.1 * t && q <= 0.5 * t {
                q
            } else {
                0.5 * t
            };
            if t < 1e-20 {
                break None;
            }
        };
        iterations += 1;
        let Some(ft) = accepted else { break };

        let (mut sts, mut sty) = (0.0, 0.0);
        step_norm = 0.0f64;
        for i in 0..n {
            let s = xt[i] - x[i];
            let y = gt[i] - g[i];
            sts += s * s;
            sty += s * y;
            step_norm = step_norm.max(s.abs());
        }
        if (f - ft).abs() <= tol.rel * f.abs().max(1.0) {
            stalled += 1;
        } else {
            stalled = 0;
        }
        std::mem::swap(&mut x, &mut xt);
        std::mem::swap(&mut g, &mut gt);
        f = ft;
        history.push_back(f);
        if history.len() > MEMORY {
            history.pop_front();
        }
        if step_norm == 0.0 || stalled >= 3 {
            break;
        }
        step = if sty > 0.0 {
            (sts / sty).clamp(STEP_MIN, STEP_MAX)
        } else {
            STEP_MAX
        };
    }
    Ok(Descent {
        x,
        value: f,
        iterations,
        step_norm,
    })
}

struct Lagrangian {
    x: Vec<f64>,
    value: f64,
    violation: f64,
    multiplier: f64,
    iterations: usize,
    step_norm: f64,
}

/// Augmented Lagrangian for `min F s.t. H(x) - rhs <= 0` over the box.
fn augmented_lagrangian(
    objective: &dyn Differentiable,
    constraint: &dyn Differentiable,
    rhs: f64,
    domain: &BoxDomain,
    x0: &[f64],
    tol: &SolverTolerances,
) -> Result<Lagrangian, EvalError> {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut multiplier = 0.0;
    let mut mu = 10.0;
    let mut previous = f64::INFINITY;
    let mut violation = f64::INFINITY;
    let mut iterations = 0;
    let mut step_norm = 0.0;

    for _ in 0..MAX_OUTER {
        let budget = tol.max_iters.saturating_sub(iterations);
        if budget == 0 {
            break;
        }
        let (lam, m) = (multiplier, mu);
        let phi = |y: &[f64], g: &mut [f64]| -> Result<f64, EvalError> {
            let mut gc = vec![0.0; n];
            let c = constraint.value_grad(y, &mut gc)? - rhs;
            let f = objective.value_grad(y, g)?;
            let shifted = (lam + m * c).max(0.0);
            for (gi, ci) in g.iter_mut().zip(&gc) {
                *gi += shifted * ci;
            }
            Ok(f + (shifted * shifted - lam * lam) / (2.0 * m))
        };
        let run = spg(&phi, domain, &x, tol, budget)?;
        iterations += run.iterations;
        step_norm = run.step_norm;
        x = run.x;

        let c = constraint.value(&x)? - rhs;
        violation = c.max(0.0);
        let next = (multiplier + mu * c).max(0.0);
        let settled = violation <= tol.feas && (next - multiplier).abs() <= 1e-8 * next.max(1.0);
        multiplier = next;
        if settled {
            break;
        }
        if violation > tol.feas && violation > 0.25 * previous {
            mu = (mu * 10.0).min(1e12);
        }
        previous = violation;
    }
    Ok(Lagrangian {
        value: objective.value(&x)?,
        x,
        violation,
        multiplier,
        iterations,
        step_norm,
    })
}

/// Lower bound of the affine model `value + grad . (y - x)` over the box.
fn linear_bound(value: Interval, grad: &[Interval], x: &[f64], domain: &BoxDomain) -> f64 {
    let mut acc = value;
    for (i, g) in grad.iter().enumerate() {
        let xi = Interval::point(x[i]);
        let down = Interval::point(domain.lower()[i]).sub(xi);
        let up = Interval::point(domain.upper()[i]).sub(xi);
        acc = acc.add(g.mul(Interval::new(down.lo, up.hi)));
    }
    acc.lo
}

/// Largest Lagrangian lower bound over a few multiplier candidates: zero,
/// the solver's estimate, and every breakpoint where a gradient component of
/// the Lagrangian changes sign. The bound is concave piecewise linear in the
/// multiplier, so its maximum sits at one of these.
fn lagrangian_bound(
    objective: &dyn Differentiable,
    constraint: Option<&dyn Differentiable>,
    estimate: f64,
    x: &[f64],
    domain: &BoxDomain,
) -> Result<f64, EvalError> {
    let (fv, fg) = objective.enclose(x)?;
    let Some(constraint) = constraint else {
        return Ok(linear_bound(fv, &fg, x, domain));
    };
    let (hv, hg) = constraint.enclose(x)?;
    let mut candidates = vec![0.0, estimate];
    for (a, b) in fg.iter().zip(&hg) {
        let lam = -a.mid() / b.mid();
        if lam.is_finite() && lam > 0.0 {
            candidates.push(lam);
        }
    }
    let mut best = f64::NEG_INFINITY;
    for lam in candidates {
        let l = Interval::point(lam);
        let value = fv.add(l.mul(hv));
        let grad: Vec<Interval> = fg.iter().zip(&hg).map(|(a, b)| a.add(l.mul(*b))).collect();
        best = best.max(linear_bound(value, &grad, x, domain));
    }
    Ok(best)
}

/// Minimizes a convex `objective` over `domain`, optionally subject to a
/// convex `constraint <= 0`.
pub fn solve(
    objective: &dyn Differentiable,
    constraint: Option<&dyn Differentiable>,
    domain: &BoxDomain,
    tol: &SolverTolerances,
) -> Result<ConvexSolution, ConvexError> {
    let start = domain.midpoint();
    let Some(con) = constraint else {
        let run = spg(
            &|x: &[f64], g: &mut [f64]| objective.value_grad(x, g),
            domain,
            &start,
            tol,
            tol.max_iters,
        )?;
        let lower_bound = lagrangian_bound(objective, None, 0.0, &run.x, domain)?;
        return Ok(ConvexSolution {
            status: ConvexStatus::Optimal,
            minimizer: run.x,
            value: run.value,
            lower_bound,
            multiplier: 0.0,
            iterations: run.iterations,
            step_norm: run.step_norm,
        });
    };

    let phase1 = spg(
        &|x: &[f64], g: &mut [f64]| con.value_grad(x, g),
        domain,
        &start,
        tol,
        tol.max_iters,
    )?;
    let (hv, hg) = con.enclose(&phase1.x)?;
    let floor = linear_bound(hv, &hg, &phase1.x, domain);
    if floor > tol.feas {
        return Ok(ConvexSolution {
            status: ConvexStatus::Infeasible,
            minimizer: phase1.x,
            value: phase1.value,
            lower_bound: floor,
            multiplier: 0.0,
            iterations: phase1.iterations,
            step_norm: phase1.step_norm,
        });
    }

    let phase2 = augmented_lagrangian(objective, con, 0.0, domain, &phase1.x, tol)?;
    let lower_bound = lagrangian_bound(objective, Some(con), phase2.multiplier, &phase2.x, domain)?;
    if phase2.violation > tol.feas {
        return Err(ConvexError::IterationLimit {
            best: phase2.x,
            value: phase2.value,
            lower_bound,
            violation: phase2.violation,
        });
    }
    Ok(ConvexSolution {
        status: ConvexStatus::Optimal,
        minimizer: phase2.x,
        value: phase2.value,
        lower_bound,
        multiplier: phase2.multiplier,
        iterations: phase1.iterations + phase2.iterations,
        step_norm: phase2.step_norm,
    })
}

/// Local descent from `x0` for a possibly nonconvex problem, with the
/// constraint read as `constraint(x) <= rhs`. Nothing is certified.
pub fn local_minimize(
    objective: &dyn Differentiable,
    constraint: Option<(&dyn Differentiable, f64)>,
    domain: &BoxDomain,
    x0: &[f64],
    tol: &SolverTolerances,
) -> Result<LocalSolution, EvalError> {
    match constraint {
        None => {
            let run = spg(
                &|x: &[f64], g: &mut [f64]| objective.value_grad(x, g),
                domain,
                x0,
                tol,
                tol.max_iters,
            )?;
            Ok(LocalSolution {
                point: run.x,
                value: run.value,
                violation: 0.0,
                iterations: run.iterations,
            })
        }
        Some((con, rhs)) => {
            let run = augmented_lagrangian(objective, con, rhs, domain, x0, tol)?;
            Ok(LocalSolution {
                point: run.x,
                value: run.value,
                violation: run.violation,
                iterations: run.iterations,
            })
        }
    }
}
