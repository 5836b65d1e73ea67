//! Deterministic alpha-BB branch-and-bound.
//!
//! Nodes are explored best-first on their lower bound, ties broken by the
//! lowest node id. Alphas use the root box widths as scaling, so a child's
//! alphas never exceed its parent's.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

use crate::branching::{split_dimension, BranchRule};
use crate::convex::{self, ConvexError, ConvexStatus, SolverTolerances};
use crate::domain::BoxDomain;
use crate::error::EvalError;
use crate::function::{Differentiable, SmoothFn};
use crate::underestimator::{compute_alpha_scaled, Underestimator};

#[derive(Clone, Debug, PartialEq)]
pub struct GlobalSolution {
    pub point: Vec<f64>,
    pub value: f64,
    /// Distance between the reported value and the best remaining bound.
    pub gap: f64,
    pub iterations: usize,
    pub nodes: usize,
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum GlobalError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("no point satisfies the constraint")]
    Infeasible,
    #[error("iteration limit reached")]
    IterationLimit { best: Option<GlobalSolution> },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GlobalOptions {
    pub eps_c: f64,
    /// Incumbents may violate the constraint by this much.
    pub eps_feas: f64,
    pub max_iters: usize,
    pub branch: BranchRule,
    pub tol: SolverTolerances,
}

impl Default for GlobalOptions {
    fn default() -> Self {
        GlobalOptions {
            eps_c: 1e-6,
            eps_feas: 1e-12,
            max_iters: 200_000,
            branch: BranchRule::ScaledLongestSide,
            tol: SolverTolerances::default(),
        }
    }
}

struct Node {
    id: usize,
    domain: BoxDomain,
    bound: f64,
    alphas: Vec<f64>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // BinaryHeap is a max-heap; reverse so the smallest bound, then the
    // smallest id, comes out first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

struct Evaluated {
    bound: f64,
    point: Vec<f64>,
    alphas: Vec<f64>,
}

struct Search<'a> {
    objective: &'a SmoothFn,
    constraint: Option<&'a SmoothFn>,
    scaling: Vec<f64>,
    options: GlobalOptions,
    incumbent: Option<(Vec<f64>, f64)>,
}

impl Search<'_> {
    /// Bounds one node; `None` when its convexified feasible set is empty.
    fn evaluate(&self, domain: &BoxDomain) -> Result<Option<Evaluated>, EvalError> {
        let fa = compute_alpha_scaled(self.objective, domain, &self.scaling)?;
        let fu = Underestimator::build(self.objective, &fa);
        let mut alphas = fa.values.clone();
        let hu = match self.constraint {
            Some(h) => {
                let ha = compute_alpha_scaled(h, domain, &self.scaling)?;
                for (a, b) in alphas.iter_mut().zip(&ha.values) {
                    *a = a.max(*b);
                }
                Some(Underestimator::build(h, &ha))
            }
            None => None,
        };
        let tol = SolverTolerances {
            feas: self.options.eps_feas.max(self.options.tol.feas),
            ..self.options.tol
        };
        let outcome = convex::solve(
            &fu,
            hu.as_ref().map(|h| h as &dyn Differentiable),
            domain,
            &tol,
        );
        let (bound, point) = match outcome {
            Ok(s) if s.status == ConvexStatus::Infeasible => return Ok(None),
            Ok(s) => (s.lower_bound, s.minimizer),
            Err(ConvexError::IterationLimit {
                best, lower_bound, ..
            }) => (lower_bound, best),
            Err(ConvexError::Eval(e)) => return Err(e),
        };
        Ok(Some(Evaluated {
            bound,
            point,
            alphas,
        }))
    }

    fn offer(&mut self, x: &[f64]) -> Result<(), EvalError> {
        if let Some(h) = self.constraint {
            if h.value(x)? > self.options.eps_feas {
                return Ok(());
            }
        }
        let v = self.objective.value(x)?;
        if self.incumbent.as_ref().is_none_or(|(_, best)| v < *best) {
            self.incumbent = Some((x.to_vec(), v));
        }
        Ok(())
    }

    /// Tries the node solver's point, the midpoint and a local descent
    /// started from the solver's point.
    fn improve(&mut self, domain: &BoxDomain, start: &[f64]) -> Result<(), EvalError> {
        self.offer(start)?;
        self.offer(&domain.midpoint())?;
        let polished = match self.constraint {
            None => convex::local_minimize(self.objective, None, domain, start, &self.options.tol),
            Some(h) => {
                let tol = SolverTolerances {
                    feas: 0.5 * self.options.eps_feas,
                    ..self.options.tol
                };
                convex::local_minimize(
                    self.objective,
                    Some((h, 0.5 * self.options.eps_feas)),
                    domain,
                    start,
                    &tol,
                )
                .map(|mut s| {
                    restore(h, 0.5 * self.options.eps_feas, domain, &mut s.point);
                    s
                })
            }
        };
        // a failed evaluation along the descent path only loses a candidate
        if let Ok(s) = polished {
            self.offer(&s.point)?;
        }
        Ok(())
    }

    fn best_value(&self) -> f64 {
        self.incumbent.as_ref().map_or(f64::INFINITY, |(_, v)| *v)
    }
}

/// A few Newton steps along the constraint gradient toward `h(x) = target`,
/// for points that ended slightly above it.
fn restore(h: &SmoothFn, target: f64, domain: &BoxDomain, x: &mut [f64]) {
    let mut g = vec![0.0; x.len()];
    for _ in 0..8 {
        let Ok(v) = h.value_grad(x, &mut g) else {
            return;
        };
        if v <= target {
            return;
        }
        let norm_sq: f64 = g.iter().map(|a| a * a).sum();
        if norm_sq == 0.0 {
            return;
        }
        let step = (v - target) / norm_sq;
        for (xi, gi) in x.iter_mut().zip(&g) {
            *xi -= step * gi;
        }
        domain.project(x);
    }
}

fn search(
    objective: &SmoothFn,
    constraint: Option<&SmoothFn>,
    domain: &BoxDomain,
    options: &GlobalOptions,
) -> Result<GlobalSolution, GlobalError> {
    let mut s = Search {
        objective,
        constraint,
        scaling: domain.widths(),
        options: *options,
        incumbent: None,
    };
    let eps_c = options.eps_c;
    let mut heap = BinaryHeap::new();
    let mut nodes = 1;
    let mut floor = f64::INFINITY;

    if let Some(root) = s.evaluate(domain)? {
        s.improve(domain, &root.point)?;
        heap.push(Node {
            id: 1,
            domain: domain.clone(),
            bound: root.bound,
            alphas: root.alphas,
        });
    }

    let mut iterations = 0;
    loop {
        let finished = match heap.peek() {
            None => true,
            Some(top) => top.bound >= s.best_value() - eps_c,
        };
        if finished {
            break;
        }
        if iterations >= options.max_iters {
            let best = s.incumbent.clone().map(|(point, value)| GlobalSolution {
                gap: value - heap.peek().map_or(floor, |n| n.bound.min(floor)),
                point,
                value,
                iterations,
                nodes,
            });
            return Err(GlobalError::IterationLimit { best });
        }
        let node = heap.pop().expect("peeked");
        iterations += 1;
        let Some(dim) = split_dimension(options.branch, &node.alphas, &node.domain) else {
            // a point box: its bound is as good as it gets
            floor = floor.min(node.bound);
            continue;
        };
        let (left, right) = node.domain.bisect(dim);
        for child in [left, right] {
            nodes += 1;
            let id = nodes;
            let Some(ev) = s.evaluate(&child)? else {
                continue;
            };
            s.improve(&child, &ev.point)?;
            let bound = ev.bound.max(node.bound);
            if bound >= s.best_value() - eps_c {
                floor = floor.min(bound);
                continue;
            }
            heap.push(Node {
                id,
                domain: child,
                bound,
                alphas: ev.alphas,
            });
        }
    }

    let Some((point, value)) = s.incumbent else {
        return Err(GlobalError::Infeasible);
    };
    let lowest = heap.peek().map_or(floor, |n| n.bound.min(floor));
    Ok(GlobalSolution {
        point,
        value,
        gap: (value - lowest).max(0.0),
        iterations,
        nodes,
    })
}

/// Global minimum of `f` over `domain`.
pub fn minimize_over_box(
    f: &SmoothFn,
    domain: &BoxDomain,
    options: &GlobalOptions,
) -> Result<GlobalSolution, GlobalError> {
    search(f, None, domain, options)
}

/// Global maximum of `f` over `domain` to within `eps_c`.
pub fn maximize_over_box(
    f: &SmoothFn,
    domain: &BoxDomain,
    eps_c: f64,
) -> Result<GlobalSolution, GlobalError> {
    let options = GlobalOptions {
        eps_c,
        ..GlobalOptions::default()
    };
    maximize_negated(&f.negated(), domain, &options)
}

/// Maximum of `-neg_f` given `neg_f` directly, for callers that keep the
/// negation around between solves.
pub fn maximize_negated(
    neg_f: &SmoothFn,
    domain: &BoxDomain,
    options: &GlobalOptions,
) -> Result<GlobalSolution, GlobalError> {
    let flip = |mut s: GlobalSolution| {
        s.value = -s.value;
        s
    };
    match search(neg_f, None, domain, options) {
        Ok(s) => Ok(flip(s)),
        Err(GlobalError::IterationLimit { best }) => Err(GlobalError::IterationLimit {
            best: best.map(flip),
        }),
        Err(e) => Err(e),
    }
}

/// Global minimum of `objective` subject to `constraint <= 0`, accepting
/// incumbents with `constraint <= eps_feas`.
pub fn minimize_constrained(
    objective: &SmoothFn,
    constraint: &SmoothFn,
    domain: &BoxDomain,
    eps_c: f64,
    eps_feas: f64,
) -> Result<GlobalSolution, GlobalError> {
    let options = GlobalOptions {
        eps_c,
        eps_feas,
        ..GlobalOptions::default()
    };
    search(objective, Some(constraint), domain, &options)
}

pub fn minimize_constrained_with(
    objective: &SmoothFn,
    constraint: &SmoothFn,
    domain: &BoxDomain,
    options: &GlobalOptions,
) -> Result<GlobalSolution, GlobalError> {
    search(objective, Some(constraint), domain, options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, state_input_names};

    fn smooth(text: &str, n: usize) -> SmoothFn {
        SmoothFn::new(parse(text, &state_input_names(n, 0)).unwrap(), n)
    }

    #[test]
    fn concave_parabola_peak() {
        let f = smooth("-(x1 - 0.3)^2", 1);
        let s = maximize_over_box(&f, &BoxDomain::from_bounds(&[(-1.0, 1.0)]), 1e-6).unwrap();
        assert!((s.point[0] - 0.3).abs() < 1e-3);
        assert!(s.value.abs() < 1e-6);
        assert!(s.gap <= 1e-6);
    }

    #[test]
    fn sine_peak() {
        let f = smooth("sin(x1)", 1);
        let s = maximize_over_box(&f, &BoxDomain::from_bounds(&[(0.0, 3.0)]), 1e-6).unwrap();
        assert!((s.value - 1.0).abs() < 1e-6);
        assert!((s.point[0] - std::f64::consts::FRAC_PI_2).abs() < 1e-3);
    }

    #[test]
    fn multimodal_matches_grid() {
        let f = smooth("sin(5*x1)*cos(3*x2) + 0.1*x1*x2 - 0.2*x2^2", 2);
        let b = BoxDomain::from_bounds(&[(-2.0, 2.0), (-1.5, 1.0)]);
        let s = maximize_over_box(&f, &b, 1e-6).unwrap();
        let grid = b
            .grid(801)
            .map(|p| f.value(&p).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(s.value >= grid - 1e-9 && s.value <= grid + 1e-3);
        assert!(s.gap <= 1e-6);
    }

    #[test]
    fn projection_onto_half_plane() {
        let f = smooth("(x1 - 1)^2 + (x2 - 1)^2", 2);
        let h = smooth("x1 + x2 - 1", 2);
        let b = BoxDomain::from_bounds(&[(0.0, 2.0), (0.0, 2.0)]);
        let s = minimize_constrained(&f, &h, &b, 1e-6, 1e-12).unwrap();
        assert!((s.value - 0.5).abs() < 1e-5);
        assert!((s.point[0] - 0.5).abs() < 1e-4 && (s.point[1] - 0.5).abs() < 1e-4);
    }

    #[test]
    fn constant_positive_constraint_has_no_incumbent() {
        let f = smooth("x1^2", 1);
        let h = SmoothFn::new(crate::expr::Expr::constant(1.0), 1);
        let b = BoxDomain::from_bounds(&[(-1.0, 1.0)]);
        assert_eq!(
            minimize_constrained(&f, &h, &b, 1e-6, 1e-12),
            Err(GlobalError::Infeasible)
        );
    }

    #[test]
    fn iteration_counts_are_reproducible() {
        let f = smooth("x1^4 - 3*x1^2 + x2^2*x1 - x2", 2);
        let b = BoxDomain::from_bounds(&[(-2.0, 2.0), (-1.0, 1.0)]);
        let opts = GlobalOptions::default();
        let a = minimize_over_box(&f, &b, &opts).unwrap();
        let c = minimize_over_box(&f, &b, &opts).unwrap();
        assert_eq!(a, c);
    }
}
