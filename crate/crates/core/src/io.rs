//! JSON problem and verdict files.

use std::time::Duration;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::discretize::zoh;
use crate::domain::BoxDomain;
use crate::error::ProblemError;
use crate::expr::{parse, state_input_names, Expr};
use crate::verifier::{
    CaseCounts, CounterexampleReport, Gamma, InconclusiveReason, PolicyEntry, ProblemSpec, Verdict,
    Verification, VerifierConfig,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GammaFile {
    Linear(f64),
    Expr(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsFile {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscretizeFile {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "Ts")]
    pub ts: f64,
    #[serde(default = "zoh_linear")]
    pub method: String,
}

fn zoh_linear() -> String {
    "zoh-linear".into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub n: usize,
    pub m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<Vec<String>>,
    pub h: String,
    pub gamma: GammaFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi: Option<Vec<String>>,
    #[serde(rename = "U")]
    pub input_box: BoundsFile,
    #[serde(rename = "X")]
    pub state_box: BoundsFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discretize: Option<DiscretizeFile>,
    /// Trust that `X` encloses `{h >= 0}` instead of checking it.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub attest_containment: bool,
}

/// Parse failure with its position in the file.
#[derive(Debug, thiserror::Error)]
#[error("line {line}, column {column}: {message}")]
pub struct FormatError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<ProblemFile, FormatError> {
        serde_json::from_str(text).map_err(|e| FormatError {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }

    fn matrix(
        field: &str,
        rows: &[Vec<f64>],
        shape: (usize, usize),
    ) -> Result<DMatrix<f64>, ProblemError> {
        let dim = |expected, found| ProblemError::Dimension {
            field: field.into(),
            expected,
            found,
        };
        if rows.len() != shape.0 {
            return Err(dim(shape.0, rows.len()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != shape.1 {
                return Err(ProblemError::Dimension {
                    field: format!("{field}[{i}]"),
                    expected: shape.1,
                    found: row.len(),
                });
            }
        }
        Ok(DMatrix::from_fn(shape.0, shape.1, |i, j| rows[i][j]))
    }

    /// Dynamics from the `discretize` block, or `None` when it is absent.
    pub fn discretized(&self) -> Result<Option<crate::discretize::Discretization>, ProblemError> {
        let Some(d) = &self.discretize else {
            return Ok(None);
        };
        if d.method != "zoh-linear" {
            return Err(ProblemError::Discretize(format!(
                "unsupported method `{}` (only zoh-linear)",
                d.method
            )));
        }
        let a = Self::matrix("discretize.A", &d.a, (self.n, self.n))?;
        let b = Self::matrix("discretize.B", &d.b, (self.n, self.m))?;
        zoh(&a, &b, d.ts).map(Some)
    }

    pub fn to_problem(&self) -> Result<ProblemSpec, ProblemError> {
        let names = state_input_names(self.n, self.m);
        let parse_field = |field: String, text: &str| {
            parse(text, &names).map_err(|source| ProblemError::Parse { field, source })
        };
        let parse_list = |field: &str, texts: &[String], expected: usize| {
            if texts.len() != expected {
                return Err(ProblemError::Dimension {
                    field: field.into(),
                    expected,
                    found: texts.len(),
                });
            }
            texts
                .iter()
                .enumerate()
                .map(|(i, t)| parse_field(format!("{field}[{i}]"), t))
                .collect::<Result<Vec<Expr>, _>>()
        };

        let f = match (&self.f, self.discretized()?) {
            (Some(_), Some(_)) => {
                return Err(ProblemError::Other(
                    "give either `f` or `discretize`, not both".into(),
                ))
            }
            (Some(texts), None) => parse_list("f", texts, self.n)?,
            (None, Some(d)) => d.expressions(),
            (None, None) => {
                return Err(ProblemError::Other(
                    "missing dynamics: give `f` or `discretize`".into(),
                ))
            }
        };
        let gamma = match &self.gamma {
            GammaFile::Linear(c) => Gamma::Linear(*c),
            GammaFile::Expr(text) => {
                Gamma::Expr(parse(text, &["r".to_string()]).map_err(|source| {
                    ProblemError::Parse {
                        field: "gamma.expr".into(),
                        source,
                    }
                })?)
            }
        };
        let pi = self
            .pi
            .as_ref()
            .map(|texts| parse_list("pi", texts, self.m))
            .transpose()?;
        let bounds = |field: &str, b: &BoundsFile, expected: usize| {
            for (side, v) in [("lower", &b.lower), ("upper", &b.upper)] {
                if v.len() != expected {
                    return Err(ProblemError::Dimension {
                        field: format!("{field}.{side}"),
                        expected,
                        found: v.len(),
                    });
                }
            }
            BoxDomain::new(b.lower.clone(), b.upper.clone()).map_err(|e| match e {
                ProblemError::InvalidBox { message, .. } => ProblemError::InvalidBox {
                    field: field.into(),
                    message,
                },
                other => other,
            })
        };
        Ok(ProblemSpec {
            n: self.n,
            m: self.m,
            f,
            h: parse_field("h".into(), &self.h)?,
            gamma,
            pi,
            input_box: bounds("U", &self.input_box, self.m)?,
            state_box: bounds("X", &self.state_box, self.n)?,
            attest_containment: self.attest_containment,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolicyField {
    Inline(Vec<PolicyEntry>),
    Path(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsFile {
    pub iterations: usize,
    pub leaves: CaseCounts,
    pub wall_time_s: f64,
    pub workers: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InconclusiveFile {
    pub subdomain: usize,
    pub domain: BoxDomain,
    pub reason: InconclusiveReason,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerdictFile {
    pub verdict: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<CounterexampleReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inconclusive: Option<InconclusiveFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<PolicyField>,
    pub stats: StatsFile,
    pub config: VerifierConfig,
}

impl VerdictFile {
    /// With `policy_path`, the policy is referenced instead of inlined.
    pub fn new(
        run: &Verification,
        config: &VerifierConfig,
        policy_path: Option<&str>,
    ) -> VerdictFile {
        let mut file = VerdictFile {
            verdict: run.verdict.label().into(),
            counterexample: None,
            inconclusive: None,
            policy: None,
            stats: StatsFile {
                iterations: run.stats.iterations,
                leaves: run.stats.leaves,
                wall_time_s: run.stats.wall_time.as_secs_f64(),
                workers: run.stats.workers,
            },
            config: *config,
        };
        match &run.verdict {
            Verdict::Valid { policy: Some(p) } => {
                file.policy = Some(match policy_path {
                    Some(path) => PolicyField::Path(path.into()),
                    None => PolicyField::Inline(p.entries().to_vec()),
                });
            }
            Verdict::Valid { policy: None } => {}
            Verdict::Counterexample { report, .. } => file.counterexample = Some(report.clone()),
            Verdict::Inconclusive {
                subdomain,
                domain,
                reason,
            } => {
                file.inconclusive = Some(InconclusiveFile {
                    subdomain: *subdomain,
                    domain: domain.clone(),
                    reason: reason.clone(),
                })
            }
        }
        file
    }

    pub fn wall_time(&self) -> Duration {
        Duration::from_secs_f64(self.stats.wall_time_s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DISK: &str = r#"{
        "n": 2, "m": 1,
        "f": ["0.5*x1 + u1", "0.5*x2"],
        "h": "1 - x1^2 - x2^2",
        "gamma": {"linear": 0.5},
        "pi": ["-0.1*x1"],
        "U": {"lower": [-1], "upper": [1]},
        "X": {"lower": [-1.5, -1.5], "upper": [1.5, 1.5]}
    }"#;

    #[test]
    fn reads_problem() {
        let file = ProblemFile::from_json(DISK).unwrap();
        let p = file.to_problem().unwrap();
        p.validate().unwrap();
        assert_eq!(p.f.len(), 2);
        assert!(p.pi.is_some());
    }

    #[test]
    fn reports_position_of_syntax_errors() {
        let err = ProblemFile::from_json("{\n  \"n\": 2,\n  \"m\": x\n}").unwrap_err();
        assert_eq!(err.line, 3);
    }

    #[test]
    fn names_the_bad_field() {
        let mut file = ProblemFile::from_json(DISK).unwrap();
        file.pi = Some(vec!["x1 +".into()]);
        match file.to_problem() {
            Err(ProblemError::Parse { field, .. }) => assert_eq!(field, "pi[0]"),
            other => panic!("{other:?}"),
        }
        let mut file = ProblemFile::from_json(DISK).unwrap();
        file.state_box.upper.pop();
        match file.to_problem() {
            Err(ProblemError::Dimension { field, .. }) => assert_eq!(field, "X.upper"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn discretize_block_generates_dynamics() {
        let text = r#"{
            "n": 2, "m": 2,
            "h": "1 - x1^2 - x2^2",
            "gamma": {"expr": "0.5*r"},
            "U": {"lower": [-1, -1], "upper": [1, 1]},
            "X": {"lower": [-2, -2], "upper": [2, 2]},
            "discretize": {"A": [[0, 1], [0, 0]], "B": [[1, 0], [0, 1]], "Ts": 1, "method": "zoh-linear"}
        }"#;
        let p = ProblemFile::from_json(text).unwrap().to_problem().unwrap();
        // x1+ = x1 + x2 + u1 + 0.5 u2
        let v = p.f[0].eval(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((v - 8.0).abs() < 1e-12);
        let mut bad = ProblemFile::from_json(text).unwrap();
        bad.discretize.as_mut().unwrap().method = "euler".into();
        assert!(matches!(bad.to_problem(), Err(ProblemError::Discretize(_))));
    }
}
