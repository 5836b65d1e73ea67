use serde::{Deserialize, Serialize};

use crate::domain::BoxDomain;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BranchRule {
    /// Largest `alpha_i * width_i^2`, falling back to the longest side when
    /// every score is zero.
    #[default]
    ScaledLongestSide,
    LongestSide,
}

/// Dimension to bisect, or `None` for a box with no positive width.
/// Ties go to the lowest index.
pub fn split_dimension(rule: BranchRule, alphas: &[f64], domain: &BoxDomain) -> Option<usize> {
    let widths = domain.widths();
    let argmax = |scores: &[f64]| -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, &s) in scores.iter().enumerate() {
            if s > 0.0 && best.is_none_or(|b| s > scores[b]) {
                best = Some(i);
            }
        }
        best
    };
    if rule == BranchRule::ScaledLongestSide {
        let scores: Vec<f64> = widths.iter().zip(alphas).map(|(d, a)| a * d * d).collect();
        if let Some(i) = argmax(&scores) {
            return Some(i);
        }
    }
    argmax(&widths)
}
