use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::graph::SnpGraph;
use super::kmeans::{kmeans, KMeansOptions};
use super::{check_m_prime, AttackKind, AttackParameters, ReconstructionResult};
use crate::error::{ReconError, Result};

pub(crate) fn check_vertex_count(graph: &SnpGraph, m_prime: usize) -> Result<()> {
    check_m_prime(m_prime)?;
    if graph.num_vertices() < m_prime {
        return Err(ReconError::InvalidArgument(format!(
            "graph has {} vertices but {m_prime} bins were requested",
            graph.num_vertices()
        )));
    }
    Ok(())
}

/// Row-normalized embedding on the `k` eigenvectors of the symmetric
/// normalized Laplacian `I - D^-1/2 W D^-1/2` with the smallest eigenvalues.
///
/// Isolated vertices get `D^-1/2 = 0`. Equal eigenvalues keep their
/// decomposition order. All-zero rows stay zero.
pub fn spectral_embedding(graph: &SnpGraph, k: usize) -> Result<Vec<Vec<f64>>> {
    let n = graph.num_vertices();
    if k == 0 || k > n {
        return Err(ReconError::InvalidArgument(format!(
            "embedding dimension {k} outside 1..={n}"
        )));
    }
    let w = graph.adjacency();
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| {
            let degree: f64 = w[i * n..(i + 1) * n].iter().sum();
            if degree > 0.0 {
                degree.sqrt().recip()
            } else {
                0.0
            }
        })
        .collect();
    let laplacian = DMatrix::from_fn(n, n, |i, j| {
        let identity = if i == j { 1.0 } else { 0.0 };
        identity - inv_sqrt[i] * w[i * n + j] * inv_sqrt[j]
    });
    let eigen = SymmetricEigen::new(laplacian);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eigen.eigenvalues[a]
            .total_cmp(&eigen.eigenvalues[b])
            .then(a.cmp(&b))
    });

    let mut rows = vec![vec![0.0; k]; n];
    for (col, &e) in order[..k].iter().enumerate() {
        for (i, row) in rows.iter_mut().enumerate() {
            row[col] = eigen.eigenvectors[(i, e)];
        }
    }
    for row in &mut rows {
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.iter_mut().for_each(|x| *x /= norm);
        }
    }
    Ok(rows)
}

pub fn spectral_reconstruct(
    graph: &SnpGraph,
    m_prime: usize,
    seed: u64,
) -> Result<ReconstructionResult> {
    spectral_reconstruct_with(graph, m_prime, &KMeansOptions::default(), seed)
}

/// Spectral clustering of the flip graph into `m'` disjoint bins. Bins may
/// come back empty.
pub fn spectral_reconstruct_with(
    graph: &SnpGraph,
    m_prime: usize,
    options: &KMeansOptions,
    seed: u64,
) -> Result<ReconstructionResult> {
    check_vertex_count(graph, m_prime)?;
    let embedding = spectral_embedding(graph, m_prime)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clusters = kmeans(&embedding, m_prime, options, &mut rng);
    let mut bins = vec![Vec::new(); m_prime];
    for (&locus, &label) in graph.vertices().iter().zip(&clusters.labels) {
        bins[label].push(locus);
    }
    Ok(ReconstructionResult::new(
        AttackParameters {
            attack: AttackKind::Spectral,
            m: None,
            m_prime,
            tau: None,
            seed,
        },
        bins,
    ))
}
