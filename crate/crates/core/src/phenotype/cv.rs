use rand::seq::SliceRandom;
use rand::Rng;

/// Fold index for every sample; each class is shuffled and dealt round-robin
/// so every fold gets a near-equal share of both classes.
pub fn stratified_folds<R: Rng + ?Sized>(labels: &[bool], k: usize, rng: &mut R) -> Vec<usize> {
    assert!(k >= 1, "need at least one fold");
    let mut folds = vec![0; labels.len()];
    let mut offset = 0;
    for class in [true, false] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(rng);
        for (pos, &i) in members.iter().enumerate() {
            folds[i] = (pos + offset) % k;
        }
        offset = (offset + members.len()) % k;
    }
    folds
}

/// Unweighted mean of the per-class F1 scores. A class that is neither
/// present nor predicted is left out of the mean; an empty input scores 0.
pub fn macro_f1(truth: &[bool], predicted: &[bool]) -> f64 {
    assert_eq!(truth.len(), predicted.len(), "length mismatch");
    let mut total = 0.0;
    let mut classes = 0;
    for class in [false, true] {
        let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
        for (&t, &p) in truth.iter().zip(predicted) {
            match (t == class, p == class) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                (false, false) => {}
            }
        }
        if tp + fp + fn_ > 0 {
            total += 2.0 * tp as f64 / (2 * tp + fp + fn_) as f64;
            classes += 1;
        }
    }
    if classes == 0 {
        0.0
    } else {
        total / classes as f64
    }
}
