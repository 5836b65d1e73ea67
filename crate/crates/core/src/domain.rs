use serde::{Deserialize, Serialize};

use crate::error::ProblemError;
use crate::interval::Interval;

/// Axis-aligned box `[lower, upper]` in R^n.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, ProblemError> {
        if lower.len() != upper.len() {
            return Err(ProblemError::InvalidBox {
                field: "box".into(),
                message: format!(
                    "lower has {} entries, upper has {}",
                    lower.len(),
                    upper.len()
                ),
            });
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l.is_finite() && u.is_finite()) || l > u {
                return Err(ProblemError::InvalidBox {
                    field: "box".into(),
                    message: format!("dimension {} has bounds [{l}, {u}]", i + 1),
                });
            }
        }
        Ok(BoxDomain { lower, upper })
    }

    /// Builds a box from `(lower, upper)` pairs. Panics on inverted bounds.
    pub fn from_bounds(bounds: &[(f64, f64)]) -> Self {
        let (lower, upper) = bounds.iter().copied().unzip();
        BoxDomain::new(lower, upper).expect("valid bounds")
    }

    pub fn point(x: &[f64]) -> Self {
        BoxDomain {
            lower: x.to_vec(),
            upper: x.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn widths(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.width(i)).collect()
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }

    /// Squared diagonal length, sum of squared widths.
    pub fn diagonal_sq(&self) -> f64 {
        (0..self.dim()).map(|i| self.width(i).powi(2)).sum()
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|i| self.width(i)).product()
    }

    pub fn intervals(&self) -> Vec<Interval> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&l, &u)| Interval::new(l, u))
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| l <= v && v <= u)
    }

    pub fn is_subset_of(&self, other: &BoxDomain) -> bool {
        self.dim() == other.dim()
            && (0..self.dim())
                .all(|i| other.lower[i] <= self.lower[i] && self.upper[i] <= other.upper[i])
    }

    pub fn is_degenerate(&self) -> bool {
        (0..self.dim()).all(|i| self.width(i) == 0.0)
    }

    /// Clamps `x` into the box in place.
    pub fn project(&self, x: &mut [f64]) {
        for (v, (l, u)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*l, *u);
        }
    }

    /// Splits at the midpoint of dimension `dim`.
    pub fn bisect(&self, dim: usize) -> (BoxDomain, BoxDomain) {
        let mid = 0.5 * (self.lower[dim] + self.upper[dim]);
        let mut left = self.clone();
        let mut right = self.clone();
        left.upper[dim] = mid;
        right.lower[dim] = mid;
        (left, right)
    }

    /// The face of the box with dimension `dim` pinned to its lower or upper bound.
    pub fn face(&self, dim: usize, upper_side: bool) -> BoxDomain {
        let mut face = self.clone();
        let v = if upper_side {
            self.upper[dim]
        } else {
            self.lower[dim]
        };
        face.lower[dim] = v;
        face.upper[dim] = v;
        face
    }

    /// Cartesian grid with `per_axis` points per dimension (corners included).
    pub fn grid(&self, per_axis: usize) -> GridIter<'_> {
        GridIter {
            domain: self,
            per_axis: per_axis.max(1),
            index: vec![0; self.dim()],
            done: false,
        }
    }
}

pub struct GridIter<'a> {
    domain: &'a BoxDomain,
    per_axis: usize,
    index: Vec<usize>,
    done: bool,
}

impl Iterator for GridIter<'_> {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        if self.done {
            return None;
        }
        let n = self.domain.dim();
        let point = (0..n)
            .map(|i| {
                if self.per_axis == 1 {
                    0.5 * (self.domain.lower[i] + self.domain.upper[i])
                } else {
                    let t = self.index[i] as f64 / (self.per_axis - 1) as f64;
                    let v = self.domain.lower[i] + t * self.domain.width(i);
                    v.min(self.domain.upper[i])
                }
            })
            .collect();
        let mut carry = true;
        for idx in self.index.iter_mut() {
            if !carry {
                break;
            }
            *idx += 1;
            if *idx == self.per_axis {
                *idx = 0;
            } else {
                carry = false;
            }
        }
        if carry || n == 0 {
            self.done = true;
        }
        Some(point)
    }
}
