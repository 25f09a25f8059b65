use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{ReconError, Result};
use crate::numeric::sq_dist;

/// Oversamples the minority class until both classes have equal counts.
///
/// Output keeps the input samples in order, followed by the synthetic
/// minority samples. Each synthetic sample is `x + l * (x' - x)` with `x` a
/// minority sample drawn uniformly, `x'` one of its `k` nearest minority
/// neighbours and `l` uniform in `[0, 1]`. A lone minority sample is
/// duplicated. Ties between the classes leave the input unchanged.
pub fn smote_oversample(
    features: &[Vec<f64>],
    labels: &[bool],
    k: usize,
    seed: u64,
) -> Result<(Vec<Vec<f64>>, Vec<bool>)> {
    if features.len() != labels.len() {
        return Err(ReconError::InvalidArgument(format!(
            "{} feature rows for {} labels",
            features.len(),
            labels.len()
        )));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(ReconError::InvalidArgument(
            "smote needs both classes present".into(),
        ));
    }
    let mut out_x = features.to_vec();
    let mut out_y = labels.to_vec();
    if positives == negatives {
        return Ok((out_x, out_y));
    }
    let minority_label = positives < negatives;
    let minority: Vec<&Vec<f64>> = features
        .iter()
        .zip(labels)
        .filter(|(_, &l)| l == minority_label)
        .map(|(x, _)| x)
        .collect();
    let needed = positives.abs_diff(negatives);

    // k nearest minority neighbours per minority sample, ties by index
    let k = k.max(1).min(minority.len() - 1);
    let neighbours: Vec<Vec<usize>> = (0..minority.len())
        .map(|i| {
            let mut others: Vec<(f64, usize)> = (0..minority.len())
                .filter(|&j| j != i)
                .map(|j| (sq_dist(minority[i], minority[j]), j))
                .collect();
            others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            others.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..needed {
        let i = rng.gen_range(0..minority.len());
        let base = minority[i];
        let synthetic = if neighbours[i].is_empty() {
            base.clone()
        } else {
            let other = minority[neighbours[i][rng.gen_range(0..neighbours[i].len())]];
            let lambda: f64 = rng.gen();
            base.iter()
                .zip(other)
                .map(|(a, b)| a + lambda * (b - a))
                .collect()
        };
        out_x.push(synthetic);
        out_y.push(minority_label);
    }
    Ok((out_x, out_y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn synthetic_points_lie_on_the_segment() {
        let x = vec![
            vec![0.0, 0.0],
            vec![2.0, 2.0],
            vec![5.0, 1.0],
            vec![6.0, 1.0],
            vec![7.0, 1.0],
            vec![8.0, 1.0],
        ];
        let y = vec![true, true, false, false, false, false];
        let (ox, oy) = smote_oversample(&x, &y, 1, 3).unwrap();
        assert_eq!(oy.iter().filter(|&&l| l).count(), 4);
        assert_eq!(oy.len(), 8);
        for p in &ox[6..] {
            assert_eq!(p[0], p[1]);
            assert!((0.0..=2.0).contains(&p[0]));
        }
    }

    #[test]
    fn balanced_input_is_unchanged() {
        let x = vec![vec![1.0], vec![2.0]];
        let y = vec![true, false];
        assert_eq!(smote_oversample(&x, &y, 5, 0).unwrap(), (x, y));
    }

    #[test]
    fn single_minority_sample_is_duplicated() {
        let x = vec![
            vec![0.3, 0.7],
            vec![1.0, 1.0],
            vec![2.0, 2.0],
            vec![3.0, 3.0],
        ];
        let y = vec![false, true, true, true];
        let (ox, oy) = smote_oversample(&x, &y, 5, 9).unwrap();
        assert_eq!(&ox[4..], &[vec![0.3, 0.7], vec![0.3, 0.7]]);
        assert_eq!(&oy[4..], &[false, false]);
    }

    #[test]
    fn single_class_is_an_error() {
        assert!(smote_oversample(&[vec![1.0]], &[true], 1, 0).is_err());
        assert!(smote_oversample(&[vec![1.0]], &[true, false], 1, 0).is_err());
    }

    fn instance() -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<bool>, usize, u64)> {
        (3usize..30, 1usize..4).prop_flat_map(|(n, dim)| {
            (
                prop::collection::vec(prop::collection::vec(-5.0f64..5.0, dim), n),
                prop::collection::vec(any::<bool>(), n),
                1usize..6,
                any::<u64>(),
            )
        })
    }

    proptest! {
        #[test]
        fn balance_and_convexity((x, mut y, k, seed) in instance()) {
            // force both classes
            y[0] = true;
            y[1] = false;
            let (ox, oy) = smote_oversample(&x, &y, k, seed).unwrap();
            let pos = oy.iter().filter(|&&l| l).count();
            prop_assert_eq!(pos * 2, oy.len());
            prop_assert_eq!(&ox[..x.len()], &x[..]);
            prop_assert_eq!(&oy[..y.len()], &y[..]);
            let minority_label = oy[x.len()..].first().copied();
            if let Some(label) = minority_label {
                let minority: Vec<&Vec<f64>> = x.iter().zip(&y).filter(|(_, &l)| l == label).map(|(p, _)| p).collect();
                for p in &ox[x.len()..] {
                    // some minority pair (a, b) and l in [0, 1] reproduce p
                    let on_segment = minority.iter().any(|a| minority.iter().any(|b| {
                        let denom: f64 = a.iter().zip(b.iter()).map(|(u, v)| (v - u) * (v - u)).sum();
                        let l = if denom == 0.0 { 0.0 } else {
                            a.iter().zip(b.iter()).zip(p).map(|((u, v), w)| (w - u) * (v - u)).sum::<f64>() / denom
                        };
                        (-1e-9..=1.0 + 1e-9).contains(&l)
                            && a.iter().zip(b.iter()).zip(p).all(|((u, v), w)| (u + l * (v - u) - w).abs() < 1e-9)
                    }));
                    prop_assert!(on_segment);
                }
            }
        }
    }
}
