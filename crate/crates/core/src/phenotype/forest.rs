//! Bagged CART trees (Gini impurity) with per-split feature subsampling.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ReconError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    /// Features tried per split; `None` means `ceil(sqrt(d))`.
    pub max_features: Option<usize>,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 16,
            min_samples_split: 2,
            max_features: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf {
        p: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { p } => return p,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[feature] <= threshold { left } else { right },
            }
        }
    }
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [bool],
    config: &'a ForestConfig,
    max_features: usize,
    nodes: Vec<Node>,
}

fn gini(pos: f64, n: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    let p = pos / n;
    2.0 * p * (1.0 - p)
}

impl Builder<'_> {
    fn leaf(&mut self, samples: &[usize]) -> usize {
        let pos = samples.iter().filter(|&&i| self.y[i]).count();
        self.nodes.push(Node::Leaf {
            p: pos as f64 / samples.len() as f64,
        });
        self.nodes.len() - 1
    }

    /// Best `(weighted child impurity, feature, threshold)` over the sampled
    /// features. Constant features do not count towards `max_features`.
    fn best_split<R: Rng>(&self, samples: &[usize], rng: &mut R) -> Option<(f64, usize, f64)> {
        let d = self.x[0].len();
        let mut features: Vec<usize> = (0..d).collect();
        features.shuffle(rng);
        let n = samples.len() as f64;
        let total_pos = samples.iter().filter(|&&i| self.y[i]).count() as f64;
        let mut best: Option<(f64, usize, f64)> = None;
        let mut tried = 0;
        let mut sorted: Vec<(f64, bool)> = Vec::with_capacity(samples.len());
        for f in features {
            if tried == self.max_features {
                break;
            }
            sorted.clear();
            sorted.extend(samples.iter().map(|&i| (self.x[i][f], self.y[i])));
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            if sorted[0].0 == sorted[sorted.len() - 1].0 {
                continue;
            }
            tried += 1;
            let mut left_pos = 0.0;
            for k in 0..sorted.len() - 1 {
                if sorted[k].1 {
                    left_pos += 1.0;
                }
                if sorted[k].0 == sorted[k + 1].0 {
                    continue;
                }
                let nl = (k + 1) as f64;
                let nr = n - nl;
                let score = nl * gini(left_pos, nl) + nr * gini(total_pos - left_pos, nr);
                if best.is_none_or(|b| score < b.0) {
                    best = Some((score, f, 0.5 * (sorted[k].0 + sorted[k + 1].0)));
                }
            }
        }
        best
    }

    fn grow<R: Rng>(&mut self, samples: Vec<usize>, depth: usize, rng: &mut R) -> usize {
        let pos = samples.iter().filter(|&&i| self.y[i]).count();
        if pos == 0
            || pos == samples.len()
            || depth >= self.config.max_depth
            || samples.len() < self.config.min_samples_split
        {
            return self.leaf(&samples);
        }
        let Some((_, feature, threshold)) = self.best_split(&samples, rng) else {
            return self.leaf(&samples);
        };
        let (left, right): (Vec<usize>, Vec<usize>) = samples
            .into_iter()
            .partition(|&i| self.x[i][feature] <= threshold);
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf { p: 0.0 });
        let l = self.grow(left, depth + 1, rng);
        let r = self.grow(right, depth + 1, rng);
        self.nodes[at] = Node::Split {
            feature,
            threshold,
            left: l,
            right: r,
        };
        at
    }
}

/// Binary random forest; `predict_proba` is the mean leaf frequency of the
/// positive class over all trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    n_features: usize,
    trees: Vec<Tree>,
}

impl RandomForest {
    pub fn fit(x: &[Vec<f64>], y: &[bool], config: &ForestConfig, seed: u64) -> Result<Self> {
        if x.is_empty() || x.len() != y.len() {
            return Err(ReconError::InvalidArgument(format!(
                "forest needs matching non-empty inputs, got {} rows and {} labels",
                x.len(),
                y.len()
            )));
        }
        let d = x[0].len();
        if x.iter().any(|r| r.len() != d) {
            return Err(ReconError::InvalidArgument("ragged feature matrix".into()));
        }
        if config.n_trees == 0 {
            return Err(ReconError::InvalidArgument(
                "forest needs at least one tree".into(),
            ));
        }
        let max_features = config
            .max_features
            .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
            .clamp(1, d.max(1));
        let mut master = ChaCha8Rng::seed_from_u64(seed);
        let seeds: Vec<u64> = (0..config.n_trees).map(|_| master.gen()).collect();
        let trees = seeds
            .into_par_iter()
            .map(|s| {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                let bootstrap: Vec<usize> =
                    (0..x.len()).map(|_| rng.gen_range(0..x.len())).collect();
                let mut builder = Builder {
                    x,
                    y,
                    config,
                    max_features,
                    nodes: Vec::new(),
                };
                if d == 0 {
                    builder.leaf(&bootstrap);
                } else {
                    builder.grow(bootstrap, 0, &mut rng);
                }
                Tree {
                    nodes: builder.nodes,
                }
            })
            .collect();
        Ok(Self {
            n_features: d,
            trees,
        })
    }

    /// A forest that predicts `p` everywhere.
    #[cfg(test)]
    pub(crate) fn constant(p: f64, n_features: usize) -> Self {
        Self {
            n_features,
            trees: vec![Tree {
                nodes: vec![Node::Leaf { p }],
            }],
        }
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.n_features, "feature count mismatch");
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn predict(&self, x: &[f64]) -> bool {
        self.predict_proba(x) >= 0.5
    }
}
