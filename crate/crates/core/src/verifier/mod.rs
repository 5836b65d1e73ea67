//! Branch-and-bound verification of a candidate DTCBF.
//!
//! The state box is split into subdomains. On each one the DTCBF expression
//! is bounded from below by a convexified program restricted to the convex
//! relaxation of `h >= 0`. A nonnegative bound verifies the subdomain, an
//! empty relaxation discards it, and otherwise the subdomain is tested for a
//! counterexample, checked against the stopping tolerances, or bisected.
//!
//! With a known policy the input is substituted before bounding. Without
//! one, each subdomain picks the input that is best at its midpoint and the
//! verified subdomains together form a piecewise-constant policy.

pub mod baseline;
pub mod check;
pub mod policy;
pub mod problem;

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::atomic::{AtomicBool, Ordering as AtomicOrdering};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::branching::{split_dimension, BranchRule};
use crate::convex::{self, ConvexError, ConvexStatus, SolverTolerances};
use crate::domain::BoxDomain;
use crate::error::{EvalError, ProblemError};
use crate::expr::Expr;
use crate::function::{Differentiable, SmoothFn};
use crate::global::{maximize_negated, GlobalError, GlobalOptions};
use crate::par::Pool;
use crate::underestimator::{compute_alpha_scaled, max_separation, Underestimator};

pub use baseline::{baseline, BaselineError, BaselineReport};
pub use check::{check_counterexample, CheckMode, Checker, CounterexampleReport};
pub use policy::{DomainMiss, PiecewisePolicy, PolicyEntry};
pub use problem::{BoundSide, Gamma, ProblemSpec};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Known,
    Unknown,
    /// Known when the problem has a policy.
    #[default]
    Auto,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Selection {
    DepthFirst,
    /// Lowest parent bound first, ties to the lowest id.
    #[default]
    BestFirst,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifierConfig {
    pub eps_f: f64,
    pub eps_h: f64,
    pub eps_d: f64,
    pub mode: Mode,
    pub selection: Selection,
    pub branch: BranchRule,
    pub workers: usize,
    /// Forces a single worker so ordering and counts are reproducible.
    pub deterministic: bool,
    pub max_iters: usize,
    pub solver: SolverTolerances,
}

impl Default for VerifierConfig {
    fn default() -> Self {
        VerifierConfig {
            eps_f: 1e-6,
            eps_h: 1e-6,
            eps_d: 1e-6,
            mode: Mode::Auto,
            selection: Selection::BestFirst,
            branch: BranchRule::ScaledLongestSide,
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
            deterministic: false,
            max_iters: 1_000_000,
            solver: SolverTolerances::default(),
        }
    }
}

impl VerifierConfig {
    fn validate(&self) -> Result<(), ProblemError> {
        for (name, v) in [
            ("eps_f", self.eps_f),
            ("eps_h", self.eps_h),
            ("eps_d", self.eps_d),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ProblemError::Other(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    fn effective_workers(&self) -> usize {
        if self.deterministic {
            1
        } else {
            self.workers.max(1)
        }
    }
}

/// How a subdomain was resolved.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Case {
    /// Verified: the bound is nonnegative.
    A,
    /// Discarded: no point of the subdomain can have `h >= 0`.
    B,
    /// Holds a counterexample.
    C1,
    /// Split into two children.
    C2,
    /// Stopping tolerances reached without a decision.
    Terminal,
    /// Not processed before the run ended.
    Pending,
}

impl Case {
    pub fn label(self) -> &'static str {
        match self {
            Case::A => "A",
            Case::B => "B",
            Case::C1 => "C1",
            Case::C2 => "C2",
            Case::Terminal => "terminal",
            Case::Pending => "pending",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubdomainRecord {
    pub id: usize,
    pub parent: Option<usize>,
    pub domain: BoxDomain,
    pub case: Case,
    /// Lower bound on the DTCBF expression over the subdomain, when computed.
    pub bound: f64,
    /// Input chosen for the subdomain (unknown mode).
    pub input: Option<Vec<f64>>,
    pub children: Option<(usize, usize)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub id: usize,
    pub case: Case,
    pub bound: f64,
}

/// Left-hand sides of the stopping criteria on one subdomain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoppingReport {
    /// `max_i alpha_F,i / 4 * sum_i d_i^2`
    pub objective: f64,
    /// `max_i alpha_H,i / 4 * sum_i d_i^2`
    pub constraint: f64,
    /// `sum_i d_i^2`, unknown mode only.
    pub diagonal_sq: Option<f64>,
}

impl StoppingReport {
    pub fn new(domain: &BoxDomain, alphas_f: &[f64], alphas_h: &[f64], mode: CheckMode) -> Self {
        let max = |a: &[f64]| a.iter().copied().fold(0.0, f64::max);
        let d2 = domain.diagonal_sq();
        StoppingReport {
            objective: 0.25 * max(alphas_f) * d2,
            constraint: 0.25 * max(alphas_h) * d2,
            diagonal_sq: (mode == CheckMode::Unknown).then_some(d2),
        }
    }

    pub fn holds(&self, config: &VerifierConfig) -> bool {
        self.objective <= config.eps_f
            && self.constraint <= config.eps_h
            && self.diagonal_sq.is_none_or(|d| d <= config.eps_d)
    }
}

/// Whether a subdomain may stop refining.
pub fn stopping_criteria(
    domain: &BoxDomain,
    alphas_f: &[f64],
    alphas_h: &[f64],
    config: &VerifierConfig,
    mode: CheckMode,
) -> bool {
    StoppingReport::new(domain, alphas_f, alphas_h, mode).holds(config)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum InconclusiveReason {
    Tolerances(StoppingReport),
    IterationCap,
    DegenerateBox,
    Evaluation(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Verdict {
    /// `policy` is `None` when the given policy was verified.
    Valid { policy: Option<PiecewisePolicy> },
    Counterexample {
        point: Vec<f64>,
        subdomain: usize,
        report: CounterexampleReport,
    },
    Inconclusive {
        subdomain: usize,
        domain: BoxDomain,
        reason: InconclusiveReason,
    },
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Valid { .. } => "valid",
            Verdict::Counterexample { .. } => "counterexample",
            Verdict::Inconclusive { .. } => "inconclusive",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseCounts {
    pub a: usize,
    pub b: usize,
    pub c1: usize,
    pub terminal: usize,
    pub pending: usize,
}

impl CaseCounts {
    pub fn leaves(&self) -> usize {
        self.a + self.b + self.c1 + self.terminal + self.pending
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    /// Subdomains processed.
    pub iterations: usize,
    pub leaves: CaseCounts,
    pub wall_time: Duration,
    pub workers: usize,
    pub mode: CheckMode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub verdict: Verdict,
    pub stats: Stats,
    pub subdomains: Vec<SubdomainRecord>,
}

impl Verification {
    pub fn leaves(&self) -> impl Iterator<Item = &SubdomainRecord> {
        self.subdomains.iter().filter(|r| r.children.is_none())
    }
}

pub fn verify(
    problem: &ProblemSpec,
    config: &VerifierConfig,
) -> Result<Verification, ProblemError> {
    verify_with(problem, config, &mut |_| {})
}

/// Like [`verify`], reporting each resolved subdomain to `on_event`.
pub fn verify_with(
    problem: &ProblemSpec,
    config: &VerifierConfig,
    on_event: &mut dyn FnMut(Event),
) -> Result<Verification, ProblemError> {
    let known = match config.mode {
        Mode::Known => true,
        Mode::Unknown => false,
        Mode::Auto => problem.pi.is_some(),
    };
    if known && problem.pi.is_none() {
        return Err(ProblemError::Other("known mode needs a policy".into()));
    }
    problem.validate()?;
    config.validate()?;
    if known {
        let processor = KnownProcessor::new(problem, config)?;
        Ok(run(&processor, problem, config, on_event))
    } else {
        let processor = UnknownProcessor::new(problem, config);
        Ok(run(&processor, problem, config, on_event))
    }
}

pub fn verify_known(
    problem: &ProblemSpec,
    config: &VerifierConfig,
) -> Result<Verification, ProblemError> {
    verify(
        problem,
        &VerifierConfig {
            mode: Mode::Known,
            ..*config
        },
    )
}

pub fn verify_unknown(
    problem: &ProblemSpec,
    config: &VerifierConfig,
) -> Result<Verification, ProblemError> {
    verify(
        problem,
        &VerifierConfig {
            mode: Mode::Unknown,
            ..*config
        },
    )
}

struct Work {
    id: usize,
    domain: BoxDomain,
    /// Bit `k` set while objective `k` is not yet certified (known mode).
    pending: u64,
    priority: f64,
}

impl PartialEq for Work {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Work {}

impl PartialOrd for Work {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Work {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .priority
            .total_cmp(&self.priority)
            .then_with(|| other.id.cmp(&self.id))
    }
}

enum Outcome {
    A {
        bound: f64,
        input: Option<Vec<f64>>,
    },
    B,
    C1 {
        bound: f64,
        point: Vec<f64>,
        report: Box<CounterexampleReport>,
    },
    Terminal {
        bound: f64,
        report: StoppingReport,
    },
    Split {
        bound: f64,
        dim: usize,
        pending: u64,
        input: Option<Vec<f64>>,
    },
    Failed(InconclusiveReason),
    Skipped,
}

trait Processor: Sync {
    fn mode(&self) -> CheckMode;
    fn objectives(&self) -> usize;
    fn process(&self, work: &Work, stop: &AtomicBool) -> Outcome;
}

fn eval_failure(e: EvalError) -> Outcome {
    Outcome::Failed(InconclusiveReason::Evaluation(e.to_string()))
}

/// Lower bound on the convexified program, or `None` when it is infeasible.
fn bound_subdomain(
    objective: &Underestimator,
    constraint: &Underestimator,
    domain: &BoxDomain,
    tol: &SolverTolerances,
) -> Result<Option<(f64, Vec<f64>)>, EvalError> {
    match convex::solve(objective, Some(constraint), domain, tol) {
        Ok(s) if s.status == ConvexStatus::Infeasible => Ok(None),
        Ok(s) => Ok(Some((s.lower_bound, s.minimizer))),
        Err(ConvexError::IterationLimit {
            best, lower_bound, ..
        }) => Ok(Some((lower_bound, best))),
        Err(ConvexError::Eval(e)) => Err(e),
    }
}

fn elementwise_max(acc: &mut [f64], other: &[f64]) {
    for (a, b) in acc.iter_mut().zip(other) {
        *a = a.max(*b);
    }
}

enum Candidate {
    Found(Vec<f64>, Box<CounterexampleReport>),
    Rejected(Vec<f64>),
    Stopped,
}

/// Margin by which a polished candidate sits inside `{h >= 0}`, so that
/// the interval check of `h` can confirm membership.
const INTERIOR_MARGIN: f64 = 1e-8;

/// Local minimizer of `objective` over `{h >= margin}` started from `x`,
/// for candidates that land on the boundary of the safe set.
fn interior_point(
    objective: &SmoothFn,
    constraint: &SmoothFn,
    domain: &BoxDomain,
    x: &[f64],
    tol: &SolverTolerances,
) -> Option<Vec<f64>> {
    let s = convex::local_minimize(
        objective,
        Some((constraint, -INTERIOR_MARGIN)),
        domain,
        x,
        tol,
    )
    .ok()?;
    (constraint.value(&s.point).ok()? <= -0.5 * INTERIOR_MARGIN).then_some(s.point)
}

struct KnownProcessor {
    /// The closed-loop DTCBF expression first, then one entry per policy
    /// bound not already certified over the whole state box.
    objectives: Vec<SmoothFn>,
    constraint: SmoothFn,
    checker: Checker,
    scaling: Vec<f64>,
    config: VerifierConfig,
}

impl KnownProcessor {
    fn new(problem: &ProblemSpec, config: &VerifierConfig) -> Result<KnownProcessor, ProblemError> {
        let n = problem.n;
        let pi = problem.pi.as_ref().expect("checked by caller");
        let mut objectives = vec![SmoothFn::new(
            problem.closed_loop_expr().expect("policy present"),
            n,
        )];
        for (j, side) in problem.uncertified_input_bounds()? {
            let (lo, hi) = problem.input_bounds(j);
            let margin = match side {
                BoundSide::Lower => Expr::sub(pi[j].clone(), Expr::constant(lo)),
                BoundSide::Upper => Expr::sub(Expr::constant(hi), pi[j].clone()),
            };
            objectives.push(SmoothFn::new(margin, n));
        }
        Ok(KnownProcessor {
            objectives,
            constraint: SmoothFn::new(Expr::neg(problem.h.clone()), n),
            checker: Checker::new(problem, CheckMode::Known),
            scaling: problem.state_box.widths(),
            config: *config,
        })
    }

    fn try_candidate(&self, x: Vec<f64>, stop: &AtomicBool) -> Candidate {
        if stop.load(AtomicOrdering::Relaxed) {
            return Candidate::Stopped;
        }
        let report = self.checker.check(&x);
        if report.pass {
            Candidate::Found(x, Box::new(report))
        } else {
            Candidate::Rejected(x)
        }
    }

    fn try_process(&self, work: &Work, stop: &AtomicBool) -> Result<Outcome, EvalError> {
        let domain = &work.domain;
        if self.constraint.interval_value(domain)?.lo > 0.0 {
            return Ok(Outcome::B);
        }
        let ha = compute_alpha_scaled(&self.constraint, domain, &self.scaling)?;
        let hu = Underestimator::build(&self.constraint, &ha);
        let mut pending = work.pending;
        let mut lowest = f64::INFINITY;
        let mut open_bound = f64::INFINITY;
        let mut candidates = Vec::new();
        let mut alphas_f = vec![0.0; domain.dim()];

        for (k, objective) in self.objectives.iter().enumerate() {
            if work.pending & (1 << k) == 0 {
                continue;
            }
            let range = objective.interval_value(domain)?;
            if range.lo >= 0.0 {
                pending &= !(1 << k);
                if k == 0 {
                    lowest = lowest.min(range.lo);
                }
                continue;
            }
            let fa = compute_alpha_scaled(objective, domain, &self.scaling)?;
            let fu = Underestimator::build(objective, &fa);
            let Some((bound, point)) = bound_subdomain(&fu, &hu, domain, &self.config.solver)?
            else {
                return Ok(Outcome::B);
            };
            if k == 0 {
                lowest = lowest.min(bound);
            }
            if bound >= 0.0 {
                pending &= !(1 << k);
            } else {
                open_bound = open_bound.min(bound);
                candidates.push((k, point));
                elementwise_max(&mut alphas_f, &fa.values);
            }
        }
        let bound = if lowest.is_finite() {
            lowest
        } else {
            open_bound
        };
        if pending == 0 {
            return Ok(Outcome::A { bound, input: None });
        }

        let mut tried = Vec::new();
        for (k, x) in candidates {
            let pulled = || {
                interior_point(
                    &self.objectives[k],
                    &self.constraint,
                    domain,
                    &x,
                    &self.config.solver,
                )
            };
            for point in [Some(x.clone()), None] {
                let Some(point) = point.or_else(pulled) else {
                    continue;
                };
                match self.try_candidate(point, stop) {
                    Candidate::Found(point, report) => {
                        return Ok(Outcome::C1 {
                            bound,
                            point,
                            report,
                        })
                    }
                    Candidate::Stopped => return Ok(Outcome::Skipped),
                    Candidate::Rejected(p) => tried.push(p),
                }
            }
        }
        match self.try_candidate(domain.midpoint(), stop) {
            Candidate::Found(point, report) => {
                return Ok(Outcome::C1 {
                    bound,
                    point,
                    report,
                })
            }
            Candidate::Stopped => return Ok(Outcome::Skipped),
            Candidate::Rejected(_) => {}
        }

        let report = StoppingReport::new(domain, &alphas_f, &ha.values, CheckMode::Known);
        if report.holds(&self.config) {
            return Ok(Outcome::Terminal { bound, report });
        }
        let mut weights = alphas_f;
        elementwise_max(&mut weights, &ha.values);
        match split_dimension(self.config.branch, &weights, domain) {
            Some(dim) => Ok(Outcome::Split {
                bound,
                dim,
                pending,
                input: None,
            }),
            None => Ok(Outcome::Failed(InconclusiveReason::DegenerateBox)),
        }
    }
}

impl Processor for KnownProcessor {
    fn mode(&self) -> CheckMode {
        CheckMode::Known
    }

    fn objectives(&self) -> usize {
        self.objectives.len()
    }

    fn process(&self, work: &Work, stop: &AtomicBool) -> Outcome {
        if stop.load(AtomicOrdering::Relaxed) {
            return Outcome::Skipped;
        }
        self.try_process(work, stop).unwrap_or_else(eval_failure)
    }
}

struct UnknownProcessor {
    n: usize,
    m: usize,
    /// The DTCBF expression over `(x, u)` and its negation.
    objective: SmoothFn,
    negated: SmoothFn,
    constraint: SmoothFn,
    input_box: BoxDomain,
    checker: Checker,
    scaling: Vec<f64>,
    inner: GlobalOptions,
    config: VerifierConfig,
}

impl UnknownProcessor {
    fn new(problem: &ProblemSpec, config: &VerifierConfig) -> UnknownProcessor {
        let (n, m) = (problem.n, problem.m);
        let objective = SmoothFn::new(problem.dtcbf_expr(), n + m);
        let negated = objective.negated();
        let inner = GlobalOptions {
            eps_c: config.eps_f.min(1e-6) / 10.0,
            max_iters: 20_000,
            branch: config.branch,
            tol: config.solver,
            ..GlobalOptions::default()
        };
        UnknownProcessor {
            n,
            m,
            objective,
            negated,
            constraint: SmoothFn::new(Expr::neg(problem.h.clone()), n),
            input_box: problem.input_box.clone(),
            checker: Checker::new(problem, CheckMode::Unknown),
            scaling: problem.state_box.widths(),
            inner,
            config: *config,
        }
    }

    /// Step II: the input maximizing the DTCBF expression at `x`, its value,
    /// and the certified gap.
    fn best_input(&self, x: &[f64]) -> Result<(Vec<f64>, f64, f64), EvalError> {
        let mut pinned = x.to_vec();
        pinned.resize(self.n + self.m, 0.0);
        if self.m == 0 {
            return Ok((Vec::new(), self.objective.value(&pinned)?, 0.0));
        }
        let active: Vec<usize> = (self.n..self.n + self.m).collect();
        let inner = self.negated.restrict(&active, &pinned);
        match maximize_negated(&inner, &self.input_box, &self.inner) {
            Ok(s) => Ok((s.point, s.value, s.gap)),
            Err(GlobalError::IterationLimit { best: Some(s) }) => Ok((s.point, s.value, s.gap)),
            Err(GlobalError::Eval(e)) => Err(e),
            Err(_) => {
                // any admissible input is sound for the next step
                let u = self.input_box.midpoint();
                let value = self.objective.restrict(&active, &pinned).value(&u)?;
                Ok((u, value, f64::INFINITY))
            }
        }
    }

    fn try_process(&self, work: &Work, stop: &AtomicBool) -> Result<Outcome, EvalError> {
        let domain = &work.domain;
        if self.constraint.interval_value(domain)?.lo > 0.0 {
            return Ok(Outcome::B);
        }
        let center = domain.midpoint();
        let (input, value, gap) = self.best_input(&center)?;

        let states: Vec<usize> = (0..self.n).collect();
        let mut pinned = vec![0.0; self.n];
        pinned.extend_from_slice(&input);
        let objective = self.objective.restrict(&states, &pinned);
        let ha = compute_alpha_scaled(&self.constraint, domain, &self.scaling)?;

        let range = objective.interval_value(domain)?;
        if range.lo >= 0.0 {
            return Ok(Outcome::A {
                bound: range.lo,
                input: Some(input),
            });
        }
        let fa = compute_alpha_scaled(&objective, domain, &self.scaling)?;
        let fu = Underestimator::build(&objective, &fa);
        let hu = Underestimator::build(&self.constraint, &ha);
        let Some((bound, minimizer)) = bound_subdomain(&fu, &hu, domain, &self.config.solver)?
        else {
            return Ok(Outcome::B);
        };
        if bound >= 0.0 {
            return Ok(Outcome::A {
                bound,
                input: Some(input),
            });
        }

        let mut candidates = Vec::new();
        if value + gap < 0.0 && self.constraint.value(&center)? <= 0.0 {
            candidates.push(center);
        }
        candidates.push(minimizer.clone());
        if let Some(p) = interior_point(
            &objective,
            &self.constraint,
            domain,
            &minimizer,
            &self.config.solver,
        ) {
            candidates.push(p);
        }
        for x in candidates {
            if stop.load(AtomicOrdering::Relaxed) {
                return Ok(Outcome::Skipped);
            }
            let report = self.checker.check(&x);
            if report.pass {
                return Ok(Outcome::C1 {
                    bound,
                    point: x,
                    report: Box::new(report),
                });
            }
        }

        let report = StoppingReport::new(domain, &fa.values, &ha.values, CheckMode::Unknown);
        if report.holds(&self.config) {
            return Ok(Outcome::Terminal { bound, report });
        }
        let mut weights = fa.values;
        elementwise_max(&mut weights, &ha.values);
        // a shortfall larger than the relaxation gap is due to the input
        // choice, which only a smaller diameter improves
        let gap = max_separation(&weights, domain);
        let rule = if bound + gap < 0.0
            || (report.objective <= self.config.eps_f && report.constraint <= self.config.eps_h)
        {
            BranchRule::LongestSide
        } else {
            self.config.branch
        };
        match split_dimension(rule, &weights, domain) {
            Some(dim) => Ok(Outcome::Split {
                bound,
                dim,
                pending: work.pending,
                input: Some(input),
            }),
            None => Ok(Outcome::Failed(InconclusiveReason::DegenerateBox)),
        }
    }
}

impl Processor for UnknownProcessor {
    fn mode(&self) -> CheckMode {
        CheckMode::Unknown
    }

    fn objectives(&self) -> usize {
        1
    }

    fn process(&self, work: &Work, stop: &AtomicBool) -> Outcome {
        if stop.load(AtomicOrdering::Relaxed) {
            return Outcome::Skipped;
        }
        self.try_process(work, stop).unwrap_or_else(eval_failure)
    }
}

enum Frontier {
    Stack(Vec<Work>),
    Heap(BinaryHeap<Work>),
}

impl Frontier {
    fn pop(&mut self) -> Option<Work> {
        match self {
            Frontier::Stack(s) => s.pop(),
            Frontier::Heap(h) => h.pop(),
        }
    }

    /// Children arrive lowest id first; the stack pops that one first.
    fn push_children(&mut self, left: Work, right: Work) {
        match self {
            Frontier::Stack(s) => {
                s.push(right);
                s.push(left);
            }
            Frontier::Heap(h) => {
                h.push(left);
                h.push(right);
            }
        }
    }

    fn drain(self) -> Vec<Work> {
        match self {
            Frontier::Stack(s) => s,
            Frontier::Heap(h) => h.into_vec(),
        }
    }
}

fn run(
    processor: &dyn Processor,
    problem: &ProblemSpec,
    config: &VerifierConfig,
    on_event: &mut dyn FnMut(Event),
) -> Verification {
    let started = Instant::now();
    let workers = config.effective_workers();
    let pool = Pool::new(workers);
    let stop = AtomicBool::new(false);
    let all_objectives = if processor.objectives() >= 64 {
        u64::MAX
    } else {
        (1u64 << processor.objectives()) - 1
    };

    let mut records = vec![SubdomainRecord {
        id: 1,
        parent: None,
        domain: problem.state_box.clone(),
        case: Case::Pending,
        bound: f64::NEG_INFINITY,
        input: None,
        children: None,
    }];
    let root = Work {
        id: 1,
        domain: problem.state_box.clone(),
        pending: all_objectives,
        priority: f64::NEG_INFINITY,
    };
    let mut frontier = match config.selection {
        Selection::DepthFirst => Frontier::Stack(vec![root]),
        Selection::BestFirst => Frontier::Heap(BinaryHeap::from(vec![root])),
    };
    let mut policy = Vec::new();
    let mut iterations = 0;
    let mut verdict = None;

    while verdict.is_none() {
        let room = config.max_iters.saturating_sub(iterations).min(workers);
        let mut batch = Vec::with_capacity(room);
        while batch.len() < room {
            match frontier.pop() {
                Some(w) => batch.push(w),
                None => break,
            }
        }
        if batch.is_empty() {
            break;
        }
        let outcomes = pool.map(&batch, |w| processor.process(w, &stop));

        for (work, outcome) in batch.into_iter().zip(outcomes) {
            if verdict.is_some() {
                // results after the deciding subdomain are dropped unprocessed
                frontier_push_back(&mut frontier, work);
                continue;
            }
            let index = work.id - 1;
            let (case, bound) = match outcome {
                Outcome::Skipped => {
                    frontier_push_back(&mut frontier, work);
                    continue;
                }
                Outcome::A { bound, input } => {
                    if let Some(u) = &input {
                        policy.push(PolicyEntry {
                            id: work.id,
                            domain: work.domain.clone(),
                            input: u.clone(),
                        });
                    }
                    records[index].input = input;
                    (Case::A, bound)
                }
                Outcome::B => (Case::B, f64::INFINITY),
                Outcome::C1 {
                    bound,
                    point,
                    report,
                } => {
                    stop.store(true, AtomicOrdering::Relaxed);
                    verdict = Some(Verdict::Counterexample {
                        point,
                        subdomain: work.id,
                        report: *report,
                    });
                    (Case::C1, bound)
                }
                Outcome::Terminal { bound, report } => {
                    stop.store(true, AtomicOrdering::Relaxed);
                    verdict = Some(Verdict::Inconclusive {
                        subdomain: work.id,
                        domain: work.domain.clone(),
                        reason: InconclusiveReason::Tolerances(report),
                    });
                    (Case::Terminal, bound)
                }
                Outcome::Failed(reason) => {
                    stop.store(true, AtomicOrdering::Relaxed);
                    verdict = Some(Verdict::Inconclusive {
                        subdomain: work.id,
                        domain: work.domain.clone(),
                        reason,
                    });
                    (Case::Terminal, f64::NAN)
                }
                Outcome::Split {
                    bound,
                    dim,
                    pending,
                    input,
                } => {
                    let (left, right) = work.domain.bisect(dim);
                    let ids = (records.len() + 1, records.len() + 2);
                    for (id, domain) in [(ids.0, &left), (ids.1, &right)] {
                        records.push(SubdomainRecord {
                            id,
                            parent: Some(work.id),
                            domain: domain.clone(),
                            case: Case::Pending,
                            bound,
                            input: None,
                            children: None,
                        });
                    }
                    records[index].children = Some(ids);
                    records[index].input = input;
                    let child = |id, domain| Work {
                        id,
                        domain,
                        pending,
                        priority: bound,
                    };
                    frontier.push_children(child(ids.0, left), child(ids.1, right));
                    (Case::C2, bound)
                }
            };
            iterations += 1;
            records[index].case = case;
            records[index].bound = bound;
            on_event(Event {
                id: work.id,
                case,
                bound,
            });
        }
        if verdict.is_none() && iterations >= config.max_iters {
            let remaining = std::mem::replace(&mut frontier, Frontier::Stack(Vec::new())).drain();
            if let Some(largest) = remaining.iter().max_by(|a, b| {
                a.domain
                    .diagonal_sq()
                    .total_cmp(&b.domain.diagonal_sq())
                    .then(b.id.cmp(&a.id))
            }) {
                verdict = Some(Verdict::Inconclusive {
                    subdomain: largest.id,
                    domain: largest.domain.clone(),
                    reason: InconclusiveReason::IterationCap,
                });
            }
            frontier = Frontier::Stack(remaining);
        }
    }

    let verdict = verdict.unwrap_or_else(|| Verdict::Valid {
        policy: (processor.mode() == CheckMode::Unknown).then(|| PiecewisePolicy::new(policy)),
    });
    let _ = frontier.drain();

    let mut leaves = CaseCounts::default();
    for r in records.iter().filter(|r| r.children.is_none()) {
        match r.case {
            Case::A => leaves.a += 1,
            Case::B => leaves.b += 1,
            Case::C1 => leaves.c1 += 1,
            Case::Terminal => leaves.terminal += 1,
            Case::Pending | Case::C2 => leaves.pending += 1,
        }
    }
    Verification {
        verdict,
        stats: Stats {
            iterations,
            leaves,
            wall_time: started.elapsed(),
            workers,
            mode: processor.mode(),
        },
        subdomains: records,
    }
}

fn frontier_push_back(frontier: &mut Frontier, work: Work) {
    match frontier {
        Frontier::Stack(s) => s.push(work),
        Frontier::Heap(h) => h.push(work),
    }
}
