use serde::{Deserialize, Serialize};

use crate::attacks::ReconstructionResult;
use crate::error::{ReconError, Result};

/// Confusion counts of a predicted minor-presence set against the truth over
/// one locus universe.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    /// `None` when nothing was predicted present.
    pub fn precision(&self) -> Option<f64> {
        let d = self.tp + self.fp;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }

    /// `None` when the truth has nothing present.
    pub fn recall(&self) -> Option<f64> {
        let d = self.tp + self.fn_;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }

    /// Harmonic mean of precision and recall; 0 when either is undefined or
    /// both are 0.
    pub fn f1(&self) -> f64 {
        let d = 2 * self.tp + self.fp + self.fn_;
        if self.tp == 0 || d == 0 {
            0.0
        } else {
            2.0 * self.tp as f64 / d as f64
        }
    }
}

pub fn precision_recall(truth: &[bool], predicted: &[bool]) -> Result<Confusion> {
    if truth.len() != predicted.len() {
        return Err(ReconError::InvalidArgument(format!(
            "truth covers {} loci but the prediction covers {}",
            truth.len(),
            predicted.len()
        )));
    }
    let mut c = Confusion::default();
    for (&t, &p) in truth.iter().zip(predicted) {
        match (t, p) {
            (true, true) => c.tp += 1,
            (false, true) => c.fp += 1,
            (true, false) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// The bin an all-knowing matcher would pick for `truth`: highest F1 over
/// `universe`, lowest index on ties.
pub fn oracle_bin(
    result: &ReconstructionResult,
    universe: &[usize],
    truth: &[bool],
) -> Result<usize> {
    let mut best = (0, f64::NEG_INFINITY);
    for b in 0..result.num_bins() {
        let f1 = precision_recall(truth, &result.bin_indicator(b, universe))?.f1();
        if f1 > best.1 {
            best = (b, f1);
        }
    }
    Ok(best.0)
}

/// Mid-rank percentile of `donor` among `baseline`: the share strictly below
/// plus half the share tied, times 100.
pub fn risk_percentile(donor: f64, baseline: &[f64]) -> Result<f64> {
    if baseline.is_empty() {
        return Err(ReconError::InvalidArgument(
            "baseline cohort is empty".into(),
        ));
    }
    let below = baseline.iter().filter(|&&b| b < donor).count() as f64;
    let tied = baseline.iter().filter(|&&b| b == donor).count() as f64;
    Ok(100.0 * (below + 0.5 * tied) / baseline.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attacks::{AttackKind, AttackParameters};

    #[test]
    fn worked_counts() {
        let c = precision_recall(&[true, false, true, false], &[true, true, false, false]).unwrap();
        assert_eq!(
            c,
            Confusion {
                tp: 1,
                fp: 1,
                tn: 1,
                fn_: 1
            }
        );
        assert_eq!(c.precision(), Some(0.5));
        assert_eq!(c.recall(), Some(0.5));
        let same = precision_recall(&[true, false], &[true, false]).unwrap();
        assert_eq!((same.precision(), same.recall()), (Some(1.0), Some(1.0)));
        let none = precision_recall(&[true, false], &[false, false]).unwrap();
        assert_eq!((none.precision(), none.recall()), (None, Some(0.0)));
        assert!(precision_recall(&[true], &[]).is_err());
    }

    #[test]
    fn percentile_examples() {
        assert_eq!(risk_percentile(0.9, &[0.5, 0.6, 0.7, 0.8]).unwrap(), 100.0);
        assert_eq!(risk_percentile(0.4, &[0.4; 3]).unwrap(), 50.0);
        assert_eq!(risk_percentile(0.0, &[0.5]).unwrap(), 0.0);
        assert!(risk_percentile(0.5, &[]).is_err());
    }

    #[test]
    fn oracle_prefers_best_f1_then_lowest_index() {
        let r = ReconstructionResult {
            parameters: AttackParameters {
                attack: AttackKind::Greedy,
                m: None,
                m_prime: 3,
                tau: None,
                seed: 0,
            },
            bins: vec![vec![1], vec![1, 2], vec![1, 2]],
        };
        let universe = [1, 2, 3];
        assert_eq!(oracle_bin(&r, &universe, &[true, true, false]).unwrap(), 1);
        assert_eq!(oracle_bin(&r, &universe, &[false, false, true]).unwrap(), 0);
    }
}
