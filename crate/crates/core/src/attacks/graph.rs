use serde::{Deserialize, Serialize};

use crate::beacon::FlipSet;
use crate::correlation::CorrelationModel;
use crate::error::{ReconError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphOptions {
    /// Above this many vertices, edges lighter than `weight_floor` are dropped.
    pub dense_cap: usize,
    pub weight_floor: f64,
}

impl Default for GraphOptions {
    fn default() -> Self {
        Self {
            dense_cap: 20_000,
            weight_floor: 0.01,
        }
    }
}

/// Undirected edge between vertex positions `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// Weighted similarity graph over flip loci; no self-loops.
#[derive(Debug, Clone, PartialEq)]
pub struct SnpGraph {
    vertices: Vec<usize>,
    /// Sorted by `(a, b)`.
    edges: Vec<Edge>,
}

impl SnpGraph {
    /// Panel loci, one per vertex.
    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Weight between vertex positions; 0 for absent edges and the diagonal.
    pub fn weight(&self, a: usize, b: usize) -> f64 {
        if a == b {
            return 0.0;
        }
        let key = (a.min(b), a.max(b));
        self.edges
            .binary_search_by(|e| (e.a, e.b).cmp(&key))
            .map_or(0.0, |i| self.edges[i].weight)
    }

    /// Dense symmetric adjacency, row-major `n x n`.
    pub fn adjacency(&self) -> Vec<f64> {
        let n = self.vertices.len();
        let mut w = vec![0.0; n * n];
        for e in &self.edges {
            w[e.a * n + e.b] = e.weight;
            w[e.b * n + e.a] = e.weight;
        }
        w
    }

    /// A graph from explicit vertex loci and an `n x n` symmetric weight
    /// matrix; the diagonal is ignored.
    #[allow(clippy::needless_range_loop)] // symmetric pairs read clearest by index
    pub fn from_weights(vertices: Vec<usize>, weights: &[Vec<f64>]) -> Result<Self> {
        let n = vertices.len();
        if weights.len() != n || weights.iter().any(|r| r.len() != n) {
            return Err(ReconError::InvalidArgument(
                "weight matrix shape mismatch".into(),
            ));
        }
        let mut edges = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if weights[a][b] != weights[b][a] {
                    return Err(ReconError::InvalidArgument("weights not symmetric".into()));
                }
                edges.push(Edge {
                    a,
                    b,
                    weight: weights[a][b],
                });
            }
        }
        Ok(Self { vertices, edges })
    }
}

pub fn build_snp_graph(flips: &FlipSet, model: &CorrelationModel) -> Result<SnpGraph> {
    build_snp_graph_with(flips, model, &GraphOptions::default())
}

/// Complete graph over the flip loci weighted by model similarity.
pub fn build_snp_graph_with(
    flips: &FlipSet,
    model: &CorrelationModel,
    options: &GraphOptions,
) -> Result<SnpGraph> {
    if let Some(&missing) = flips.loci.iter().find(|&&l| !model.contains(l)) {
        return Err(ReconError::LocusNotInModel(missing));
    }
    let n = flips.loci.len();
    let sparse = n > options.dense_cap;
    let mut edges = Vec::with_capacity(if sparse {
        n
    } else {
        n * n.saturating_sub(1) / 2
    });
    for a in 0..n {
        for b in a + 1..n {
            let weight = model.similarity(flips.loci[a], flips.loci[b])?;
            if sparse && weight < options.weight_floor {
                continue;
            }
            edges.push(Edge { a, b, weight });
        }
    }
    Ok(SnpGraph {
        vertices: flips.loci.clone(),
        edges,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beacon::FlipDirection;

    fn flips(loci: Vec<usize>) -> FlipSet {
        FlipSet {
            direction: FlipDirection::NoToYes,
            loci,
        }
    }

    #[test]
    fn edges_mirror_model() {
        let model = CorrelationModel::from_similarities(
            &[2, 5, 9],
            &[((2, 5), 0.4), ((5, 9), 0.7), ((2, 9), 0.1)],
        )
        .unwrap();
        let g = build_snp_graph(&flips(vec![2, 5, 9]), &model).unwrap();
        assert_eq!(g.edges().len(), 3);
        assert_eq!(g.weight(0, 1), 0.4);
        assert_eq!(g.weight(2, 1), 0.7);
        assert_eq!(g.weight(0, 2), g.weight(2, 0));
        assert_eq!(g.weight(1, 1), 0.0);
    }

    #[test]
    fn single_vertex_has_no_edges() {
        let model = CorrelationModel::from_similarities(&[4], &[]).unwrap();
        let g = build_snp_graph(&flips(vec![4]), &model).unwrap();
        assert!(g.edges().is_empty());
        assert_eq!(g.adjacency(), vec![0.0]);
    }

    #[test]
    fn missing_locus_is_an_error() {
        let model = CorrelationModel::from_similarities(&[1, 2], &[]).unwrap();
        assert!(build_snp_graph(&flips(vec![1, 3]), &model).is_err());
    }

    #[test]
    fn sparse_mode_drops_light_edges() {
        let model =
            CorrelationModel::from_similarities(&[0, 1, 2], &[((0, 1), 0.5), ((1, 2), 0.001)])
                .unwrap();
        let opts = GraphOptions {
            dense_cap: 2,
            weight_floor: 0.01,
        };
        let g = build_snp_graph_with(&flips(vec![0, 1, 2]), &model, &opts).unwrap();
        assert_eq!(g.edges().len(), 1);
        assert_eq!(g.weight(0, 1), 0.5);
    }
}
