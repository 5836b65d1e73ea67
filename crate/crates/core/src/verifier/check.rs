//! Independent re-evaluation of a claimed counterexample.
//!
//! Signs are decided on interval enclosures of the point evaluation, so a
//! pass does not depend on rounding in the verifier or in this check.

use serde::{Deserialize, Serialize};

use crate::domain::BoxDomain;
use crate::error::EvalError;
use crate::expr::Tape;
use crate::function::{Differentiable, SmoothFn};
use crate::global::{maximize_negated, GlobalError, GlobalOptions};
use crate::interval::Interval;

use super::problem::ProblemSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckMode {
    /// Use the given policy.
    Known,
    /// Maximize over all admissible inputs.
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnownCheck {
    pub input: Vec<f64>,
    pub input_in_bounds: bool,
    /// The DTCBF expression under the policy.
    pub value: f64,
    pub value_enclosure: Interval,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnknownCheck {
    pub maximizer: Vec<f64>,
    pub max_value: f64,
    /// `max_value + gap` bounds the true maximum from above.
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub pass: bool,
    pub point: Vec<f64>,
    pub barrier: f64,
    pub barrier_enclosure: Interval,
    pub reason: String,
    pub known: Option<KnownCheck>,
    pub unknown: Option<UnknownCheck>,
}

/// Prepared evaluation of one problem, reused across many points.
pub struct Checker {
    n: usize,
    m: usize,
    mode: CheckMode,
    input_box: BoxDomain,
    barrier: Tape,
    /// Known mode: closed-loop value, then each policy component.
    closed_loop: Option<Tape>,
    /// Unknown mode: the DTCBF expression and its negation over `(x, u)`.
    open_loop: Option<(SmoothFn, SmoothFn)>,
}

impl Checker {
    /// Panics in known mode when the problem has no policy.
    pub fn new(problem: &ProblemSpec, mode: CheckMode) -> Checker {
        let barrier = Tape::compile(std::slice::from_ref(&problem.h));
        let (closed_loop, open_loop) = match mode {
            CheckMode::Known => {
                let mut outputs = vec![problem
                    .closed_loop_expr()
                    .expect("known-mode check needs a policy")];
                outputs.extend(problem.pi.iter().flatten().cloned());
                (Some(Tape::compile(&outputs)), None)
            }
            CheckMode::Unknown => {
                let f = SmoothFn::new(problem.dtcbf_expr(), problem.n + problem.m);
                let neg = f.negated();
                (None, Some((f, neg)))
            }
        };
        Checker {
            n: problem.n,
            m: problem.m,
            mode,
            input_box: problem.input_box.clone(),
            barrier,
            closed_loop,
            open_loop,
        }
    }

    pub fn mode(&self) -> CheckMode {
        self.mode
    }

    pub fn check(&self, x: &[f64]) -> CounterexampleReport {
        match self.try_check(x) {
            Ok(r) => r,
            Err(e) => CounterexampleReport {
                pass: false,
                point: x.to_vec(),
                barrier: f64::NAN,
                barrier_enclosure: Interval::new(f64::NEG_INFINITY, f64::INFINITY),
                reason: format!("evaluation failed: {e}"),
                known: None,
                unknown: None,
            },
        }
    }

    fn try_check(&self, x: &[f64]) -> Result<CounterexampleReport, EvalError> {
        let point: Vec<Interval> = x.iter().map(|&v| Interval::point(v)).collect();
        let barrier = self.barrier.eval(x)?[0];
        let barrier_enclosure = self.barrier.eval(&point)?[0];
        let mut report = CounterexampleReport {
            pass: false,
            point: x.to_vec(),
            barrier,
            barrier_enclosure,
            reason: String::new(),
            known: None,
            unknown: None,
        };
        let inside = barrier_enclosure.lo >= 0.0;

        match self.mode {
            CheckMode::Known => {
                let tape = self.closed_loop.as_ref().expect("prepared");
                let values = tape.eval(x)?;
                let enclosures = tape.eval(&point)?;
                let mut in_bounds = true;
                let mut certainly_out = false;
                for j in 0..self.m {
                    let (lo, hi) = (self.input_box.lower()[j], self.input_box.upper()[j]);
                    let p = enclosures[j + 1];
                    in_bounds &= p.lo >= lo && p.hi <= hi;
                    certainly_out |= p.hi < lo || p.lo > hi;
                }
                let violated = enclosures[0].hi < 0.0;
                report.known = Some(KnownCheck {
                    input: values[1..].to_vec(),
                    input_in_bounds: in_bounds,
                    value: values[0],
                    value_enclosure: enclosures[0],
                });
                report.pass = inside && (violated || certainly_out);
                report.reason = if !inside {
                    "h(x) < 0: the point is outside the zero-superlevel set".into()
                } else if violated {
                    "h(x) >= 0 and the DTCBF constraint fails under the policy".into()
                } else if certainly_out {
                    "h(x) >= 0 and the policy leaves the input box".into()
                } else {
                    "the DTCBF constraint holds at this point".into()
                };
            }
            CheckMode::Unknown => {
                let (f, neg) = self.open_loop.as_ref().expect("prepared");
                let (maximizer, max_value, gap) = if self.m == 0 {
                    (Vec::new(), f.value(x)?, 0.0)
                } else {
                    let active: Vec<usize> = (self.n..self.n + self.m).collect();
                    let mut pinned = x.to_vec();
                    pinned.resize(self.n + self.m, 0.0);
                    let options = GlobalOptions {
                        eps_c: 1e-9,
                        ..GlobalOptions::default()
                    };
                    match maximize_negated(
                        &neg.restrict(&active, &pinned),
                        &self.input_box,
                        &options,
                    ) {
                        Ok(s) => (s.point, s.value, s.gap),
                        Err(GlobalError::IterationLimit { best: Some(s) }) => {
                            (s.point, s.value, s.gap)
                        }
                        Err(GlobalError::Eval(e)) => return Err(e),
                        Err(_) => (Vec::new(), f64::NAN, f64::INFINITY),
                    }
                };
                let violated = max_value + gap < 0.0;
                report.unknown = Some(UnknownCheck {
                    maximizer,
                    max_value,
                    gap,
                });
                report.pass = inside && violated;
                report.reason = if !inside {
                    "h(x) < 0: the point is outside the zero-superlevel set".into()
                } else if violated {
                    "h(x) >= 0 and no admissible input satisfies the DTCBF constraint".into()
                } else {
                    "some admissible input may satisfy the DTCBF constraint".into()
                };
            }
        }
        Ok(report)
    }
}

/// Re-checks `x` against the problem. Known mode uses the given policy.
pub fn check_counterexample(
    problem: &ProblemSpec,
    x: &[f64],
    mode: CheckMode,
) -> CounterexampleReport {
    Checker::new(problem, mode).check(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, state_input_names};
    use crate::verifier::problem::Gamma;

    fn origin_map() -> ProblemSpec {
        let names = state_input_names(2, 1);
        let p = |t: &str| parse(t, &names).unwrap();
        ProblemSpec {
            n: 2,
            m: 1,
            f: vec![p("0"), p("0")],
            h: p("1 - x1^2 - x2^2"),
            gamma: Gamma::Linear(0.5),
            pi: Some(vec![p("0.3*x1")]),
            input_box: BoxDomain::from_bounds(&[(-1.0, 1.0)]),
            state_box: BoxDomain::from_bounds(&[(-1.5, 1.5), (-1.5, 1.5)]),
            attest_containment: false,
        }
    }

    #[test]
    fn satisfied_constraint_fails_the_check() {
        let problem = origin_map();
        for mode in [CheckMode::Known, CheckMode::Unknown] {
            let r = check_counterexample(&problem, &[0.2, -0.4], mode);
            assert!(!r.pass);
            assert!(r.barrier >= 0.0);
            assert!(r.reason.contains("holds") || r.reason.contains("may satisfy"));
        }
        let r = check_counterexample(&problem, &[1.2, 0.0], CheckMode::Known);
        assert!(!r.pass && r.reason.starts_with("h(x) < 0"));
    }

    #[test]
    fn expanding_map_is_caught_in_both_modes() {
        let names = state_input_names(1, 1);
        let p = |t: &str| parse(t, &names).unwrap();
        let problem = ProblemSpec {
            n: 1,
            m: 1,
            f: vec![p("2*x1 + 0*u1")],
            h: p("1 - x1^2"),
            gamma: Gamma::Linear(1.0),
            pi: Some(vec![p("0")]),
            input_box: BoxDomain::from_bounds(&[(-1.0, 1.0)]),
            state_box: BoxDomain::from_bounds(&[(-2.0, 2.0)]),
            attest_containment: false,
        };
        // F = h(2x) - h(x) + h(x) = 1 - 4x^2
        for mode in [CheckMode::Known, CheckMode::Unknown] {
            let r = check_counterexample(&problem, &[0.8], mode);
            assert!(r.pass, "{r:?}");
        }
        let r = check_counterexample(&problem, &[0.4], CheckMode::Known);
        assert!(!r.pass);
    }

    #[test]
    fn policy_outside_input_box_counts() {
        let mut problem = origin_map();
        problem.pi = Some(vec![parse("5*x1", &state_input_names(2, 1)).unwrap()]);
        let r = check_counterexample(&problem, &[0.5, 0.0], CheckMode::Known);
        assert!(r.pass);
        assert!(!r.known.unwrap().input_in_bounds);
    }
}
