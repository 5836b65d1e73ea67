use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::BoxDomain;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyEntry {
    pub id: usize,
    pub domain: BoxDomain,
    pub input: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Error)]
#[error("no policy entry covers the point {point:?}")]
pub struct DomainMiss {
    pub point: Vec<f64>,
}

/// One constant input per verified subdomain.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PiecewisePolicy {
    entries: Vec<PolicyEntry>,
}

impl PiecewisePolicy {
    /// Keeps entries sorted by id so lookups resolve shared faces toward
    /// the lowest id.
    pub fn new(mut entries: Vec<PolicyEntry>) -> PiecewisePolicy {
        entries.sort_by_key(|e| e.id);
        PiecewisePolicy { entries }
    }

    pub fn entries(&self) -> &[PolicyEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lookup(&self, x: &[f64]) -> Result<&PolicyEntry, DomainMiss> {
        self.entries
            .iter()
            .find(|e| e.domain.contains(x))
            .ok_or_else(|| DomainMiss { point: x.to_vec() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shared_face_goes_to_lowest_id() {
        let p = PiecewisePolicy::new(vec![
            PolicyEntry {
                id: 7,
                domain: BoxDomain::from_bounds(&[(0.5, 1.0)]),
                input: vec![2.0],
            },
            PolicyEntry {
                id: 3,
                domain: BoxDomain::from_bounds(&[(0.0, 0.5)]),
                input: vec![1.0],
            },
        ]);
        assert_eq!(p.lookup(&[0.5]).unwrap().input, vec![1.0]);
        assert_eq!(p.lookup(&[0.75]).unwrap().input, vec![2.0]);
        assert!(p.lookup(&[1.5]).is_err());
    }
}
