use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::graph::SnpGraph;
use super::kmeans::plus_plus_init;
use super::spectral::{check_vertex_count, spectral_embedding};
use super::{AttackKind, AttackParameters, ReconstructionResult};
use crate::error::{ReconError, Result};
use crate::numeric::sq_dist;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyOptions {
    /// Membership needed to join a bin; `None` means `1/m'`.
    pub threshold: Option<f64>,
    pub fuzzifier: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub restarts: usize,
}

impl Default for FuzzyOptions {
    fn default() -> Self {
        Self {
            threshold: None,
            fuzzifier: 2.0,
            max_iter: 300,
            tol: 1e-6,
            restarts: 10,
        }
    }
}

impl FuzzyOptions {
    pub fn threshold_for(&self, m_prime: usize) -> f64 {
        self.threshold.unwrap_or(1.0 / m_prime as f64)
    }

    fn validate(&self, m_prime: usize) -> Result<()> {
        let theta = self.threshold_for(m_prime);
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(ReconError::InvalidArgument(format!(
                "membership threshold {theta} outside (0, 1]"
            )));
        }
        if !(self.fuzzifier > 1.0 && self.fuzzifier.is_finite()) {
            return Err(ReconError::InvalidArgument(format!(
                "fuzzifier {} must exceed 1",
                self.fuzzifier
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuzzyResult {
    /// `memberships[i][c]`; each row sums to 1.
    pub memberships: Vec<Vec<f64>>,
    pub centroids: Vec<Vec<f64>>,
    /// `sum_i sum_c u_ic^q * |x_i - v_c|^2`.
    pub objective: f64,
}

/// Memberships of one point. Clusters at zero distance share the membership
/// equally and all others get 0.
fn point_memberships(point: &[f64], centroids: &[Vec<f64>], exponent: f64, out: &mut [f64]) {
    let d2: Vec<f64> = centroids.iter().map(|c| sq_dist(point, c)).collect();
    let zeros = d2.iter().filter(|&&d| d == 0.0).count();
    if zeros > 0 {
        for (u, &d) in out.iter_mut().zip(&d2) {
            *u = if d == 0.0 { 1.0 / zeros as f64 } else { 0.0 };
        }
        return;
    }
    // u_c = 1 / sum_j (d_c / d_j)^(2/(q-1)); with squared distances the
    // exponent halves
    for (c, u) in out.iter_mut().enumerate() {
        let s: f64 = d2.iter().map(|&dj| (d2[c] / dj).powf(exponent)).sum();
        *u = s.recip();
    }
}

fn objective(
    points: &[Vec<f64>],
    memberships: &[Vec<f64>],
    centroids: &[Vec<f64>],
    fuzzifier: f64,
) -> f64 {
    points
        .iter()
        .zip(memberships)
        .map(|(p, row)| {
            row.iter()
                .zip(centroids)
                .map(|(&u, c)| u.powf(fuzzifier) * sq_dist(p, c))
                .sum::<f64>()
        })
        .sum()
}

fn fcm_run(
    points: &[Vec<f64>],
    mut centroids: Vec<Vec<f64>>,
    options: &FuzzyOptions,
) -> FuzzyResult {
    let c = centroids.len();
    let dim = points[0].len();
    let exponent = 1.0 / (options.fuzzifier - 1.0);
    let mut memberships = vec![vec![0.0; c]; points.len()];
    for _ in 0..options.max_iter {
        for (p, row) in points.iter().zip(memberships.iter_mut()) {
            point_memberships(p, &centroids, exponent, row);
        }
        let mut shift: f64 = 0.0;
        for (k, centroid) in centroids.iter_mut().enumerate() {
            let mut num = vec![0.0; dim];
            let mut den = 0.0;
            for (p, row) in points.iter().zip(&memberships) {
                let w = row[k].powf(options.fuzzifier);
                den += w;
                for (n, x) in num.iter_mut().zip(p) {
                    *n += w * x;
                }
            }
            if den > 0.0 {
                num.iter_mut().for_each(|n| *n /= den);
                shift = shift.max(sq_dist(&num, centroid).sqrt());
                *centroid = num;
            }
        }
        if shift < options.tol {
            break;
        }
    }
    for (p, row) in points.iter().zip(memberships.iter_mut()) {
        point_memberships(p, &centroids, exponent, row);
    }
    let objective = objective(points, &memberships, &centroids, options.fuzzifier);
    FuzzyResult {
        memberships,
        centroids,
        objective,
    }
}

/// Fuzzy c-means started from D²-weighted seeds; the restart with the lowest
/// objective is kept.
pub fn fuzzy_c_means<R: Rng + ?Sized>(
    points: &[Vec<f64>],
    c: usize,
    options: &FuzzyOptions,
    rng: &mut R,
) -> FuzzyResult {
    assert!(c >= 1 && c <= points.len(), "c must lie in 1..=points");
    let mut best: Option<FuzzyResult> = None;
    for _ in 0..options.restarts.max(1) {
        let run = fcm_run(points, plus_plus_init(points, c, rng), options);
        if best.as_ref().is_none_or(|b| run.objective < b.objective) {
            best = Some(run);
        }
    }
    best.expect("at least one restart")
}

/// Soft spectral clustering: fuzzy c-means on the spectral embedding. A
/// locus joins every bin where its membership reaches the threshold, and
/// always its highest-membership bin (lowest index on ties).
pub fn fuzzy_reconstruct(
    graph: &SnpGraph,
    m_prime: usize,
    options: &FuzzyOptions,
    seed: u64,
) -> Result<ReconstructionResult> {
    check_vertex_count(graph, m_prime)?;
    options.validate(m_prime)?;
    let theta = options.threshold_for(m_prime);
    let embedding = spectral_embedding(graph, m_prime)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fcm = fuzzy_c_means(&embedding, m_prime, options, &mut rng);

    let mut bins = vec![Vec::new(); m_prime];
    for (&locus, row) in graph.vertices().iter().zip(&fcm.memberships) {
        let mut top = 0;
        for (k, &u) in row.iter().enumerate() {
            if u > row[top] {
                top = k;
            }
            if u >= theta {
                bins[k].push(locus);
            }
        }
        bins[top].push(locus);
    }
    Ok(ReconstructionResult::new(
        AttackParameters {
            attack: AttackKind::Fuzzy,
            m: None,
            m_prime,
            tau: None,
            seed,
        },
        bins,
    ))
}
