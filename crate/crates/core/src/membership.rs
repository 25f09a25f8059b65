//! Likelihood-ratio membership test against a beacon, with empirical null
//! calibration and power curves.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::beacon::BeaconQuery;
use crate::error::{ReconError, Result};
use crate::numeric::lower_quantile;

/// Bound applied to both D terms before taking logs.
pub const D_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrtConfig {
    /// Per-query mismatch probability.
    pub delta: f64,
    /// Beacon size used in the D terms.
    pub beacon_size: usize,
    pub alpha: f64,
    pub null_cohort_size: usize,
}

impl LrtConfig {
    pub fn new(beacon_size: usize) -> Self {
        Self {
            delta: 1e-6,
            beacon_size,
            alpha: 0.05,
            null_cohort_size: 20,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(ReconError::InvalidArgument(format!(
                "delta {} outside (0, 1)",
                self.delta
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(ReconError::InvalidArgument(format!(
                "alpha {} outside (0, 1)",
                self.alpha
            )));
        }
        if self.beacon_size == 0 {
            return Err(ReconError::InvalidArgument(
                "beacon size must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// `(D_N, D_{N-1}) = ((1-f)^(2N), (1-f)^(2N-2))`: the probability that none
/// of `N` (resp. `N-1`) other members carries the minor allele.
pub fn d_terms(maf: f64, beacon_size: usize) -> (f64, f64) {
    let q = 1.0 - maf;
    let n = beacon_size as i32;
    (q.powi(2 * n), q.powi(2 * n - 2))
}

/// One query's contribution to the statistic, and how many of the two D
/// terms had to be clamped.
pub fn lrt_increment(maf: f64, beacon_size: usize, delta: f64, answer: bool) -> (f64, usize) {
    let (dn, dn1) = d_terms(maf, beacon_size);
    let mut clamped = 0;
    let mut clamp = |d: f64| {
        let c = d.clamp(D_CLAMP, 1.0 - D_CLAMP);
        if c != d {
            clamped += 1;
        }
        c
    };
    let dn = clamp(dn);
    let dn1 = clamp(dn1);
    let first = (dn / (delta * dn1)).ln();
    let second = (delta * dn1 * (1.0 - dn) / (dn * (1.0 - delta * dn1))).ln();
    let x = if answer { 1.0 } else { 0.0 };
    (first + second * x, clamped)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub locus: usize,
    pub maf: f64,
    pub answer: bool,
}

/// Running statistic plus the log it was built from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LrtState {
    pub lambda: f64,
    pub log: Vec<Response>,
    pub clamp_events: usize,
}

impl LrtState {
    pub fn queries(&self) -> usize {
        self.log.len()
    }

    pub fn update(&mut self, locus: usize, maf: f64, answer: bool, config: &LrtConfig) {
        let (inc, clamped) = lrt_increment(maf, config.beacon_size, config.delta, answer);
        self.lambda += inc;
        self.clamp_events += clamped;
        self.log.push(Response { locus, maf, answer });
    }

    /// The statistic re-evaluated from the response log.
    pub fn recompute(&self, config: &LrtConfig) -> f64 {
        self.log
            .iter()
            .map(|r| lrt_increment(r.maf, config.beacon_size, config.delta, r.answer).0)
            .sum()
    }
}

/// Statistic after each query of one attack run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackTrace {
    /// `lambdas[q]` is the statistic after `q + 1` queries.
    pub lambdas: Vec<f64>,
    pub state: LrtState,
    /// Membership decisions per query count, when thresholds were supplied.
    pub decisions: Option<Vec<bool>>,
}

/// Loci sorted by ascending MAF, ties by locus.
pub fn query_order(victim: &[(usize, f64)]) -> Vec<(usize, f64)> {
    let mut order = victim.to_vec();
    order.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    order
}

/// Queries the victim's inferred minor-allele loci, rarest first, against
/// `beacon` and records the statistic after each answer. With `thresholds`
/// the decision at query count `q` is `lambda < thresholds[q]`, padded
/// with the last threshold.
pub fn optimal_attack<B: BeaconQuery + ?Sized>(
    victim: &[(usize, f64)],
    beacon: &mut B,
    config: &LrtConfig,
    max_queries: usize,
    thresholds: Option<&[f64]>,
) -> Result<AttackTrace> {
    config.validate()?;
    if victim.is_empty() {
        return Err(ReconError::InvalidArgument(
            "victim has no inferred loci to query".into(),
        ));
    }
    let mut state = LrtState::default();
    let mut lambdas = Vec::new();
    for &(locus, maf) in query_order(victim).iter().take(max_queries) {
        let answer = beacon.query_locus(locus)?;
        state.update(locus, maf, answer, config);
        lambdas.push(state.lambda);
    }
    let decisions = match thresholds {
        Some(t) if !t.is_empty() => Some(
            lambdas
                .iter()
                .enumerate()
                .map(|(q, &l)| l < t[q.min(t.len() - 1)])
                .collect(),
        ),
        Some(_) => return Err(ReconError::InvalidArgument("empty threshold table".into())),
        None => None,
    };
    if state.clamp_events > 0 {
        log::debug!("{} D-term clamp events", state.clamp_events);
    }
    Ok(AttackTrace {
        lambdas,
        state,
        decisions,
    })
}

/// A trace extended to `len` entries by repeating its last value; an empty
/// trace stays at 0.
pub fn padded(trace: &[f64], len: usize) -> Vec<f64> {
    let fill = trace.last().copied().unwrap_or(0.0);
    (0..len)
        .map(|q| trace.get(q).copied().unwrap_or(fill))
        .collect()
}

/// Per-query-count lower `alpha` quantile of the cohort's statistics.
pub fn null_thresholds(traces: &[Vec<f64>], alpha: f64, len: usize) -> Result<Vec<f64>> {
    if traces.len() < 2 {
        return Err(ReconError::InvalidArgument(format!(
            "null cohort needs at least 2 individuals, got {}",
            traces.len()
        )));
    }
    let padded: Vec<Vec<f64>> = traces.iter().map(|t| padded(t, len)).collect();
    Ok((0..len)
        .map(|q| {
            let column: Vec<f64> = padded.iter().map(|t| t[q]).collect();
            lower_quantile(&column, alpha).expect("non-empty cohort")
        })
        .collect())
}

/// Runs the attack for every non-member genome and calibrates `t_alpha` per
/// query count up to `max_queries`.
pub fn calibrate_null<B: BeaconQuery + ?Sized>(
    non_members: &[Vec<(usize, f64)>],
    beacon: &mut B,
    config: &LrtConfig,
    max_queries: usize,
) -> Result<Vec<f64>> {
    let traces = cohort_traces(non_members, beacon, config, max_queries)?;
    null_thresholds(&traces, config.alpha, max_queries)
}

/// Statistic traces for a cohort; genomes with no loci contribute an empty
/// trace.
pub fn cohort_traces<B: BeaconQuery + ?Sized>(
    cohort: &[Vec<(usize, f64)>],
    beacon: &mut B,
    config: &LrtConfig,
    max_queries: usize,
) -> Result<Vec<Vec<f64>>> {
    cohort
        .iter()
        .map(|genome| {
            if genome.is_empty() {
                Ok(Vec::new())
            } else {
                optimal_attack(genome, beacon, config, max_queries, None).map(|t| t.lambdas)
            }
        })
        .collect()
}

/// Fraction of the alternate traces below the threshold at each query count.
pub fn power_from_traces(alternate: &[Vec<f64>], thresholds: &[f64]) -> Result<Vec<f64>> {
    if alternate.is_empty() {
        return Err(ReconError::InvalidArgument(
            "alternate cohort is empty".into(),
        ));
    }
    let len = thresholds.len();
    let padded: Vec<Vec<f64>> = alternate.iter().map(|t| padded(t, len)).collect();
    Ok((0..len)
        .map(|q| {
            padded.iter().filter(|t| t[q] < thresholds[q]).count() as f64 / padded.len() as f64
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    /// `power[q]` is the power after `q + 1` queries.
    pub power: Vec<f64>,
    pub m: usize,
    /// Identification accuracy used to mix the cohorts.
    pub p: f64,
    pub alpha: f64,
    pub delta: f64,
}

impl PowerCurve {
    pub const CSV_HEADER: &'static str = "queries,power,m,p,alpha,delta";

    /// First query count at which power reaches `level`.
    pub fn queries_to_reach(&self, level: f64) -> Option<usize> {
        self.power.iter().position(|&p| p >= level).map(|q| q + 1)
    }

    /// CSV rows without the header.
    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        for (q, p) in self.power.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                q + 1,
                p,
                self.m,
                self.p,
                self.alpha,
                self.delta
            );
        }
        out
    }

    pub fn to_csv(&self) -> String {
        format!("{}\n{}", Self::CSV_HEADER, self.csv_rows())
    }
}

/// Power of the attack on `alternate` genomes against thresholds from
/// [`calibrate_null`].
pub fn power_curve<B: BeaconQuery + ?Sized>(
    alternate: &[Vec<(usize, f64)>],
    beacon: &mut B,
    thresholds: &[f64],
    config: &LrtConfig,
    m: usize,
    p: f64,
) -> Result<PowerCurve> {
    let traces = cohort_traces(alternate, beacon, config, thresholds.len())?;
    Ok(PowerCurve {
        power: power_from_traces(&traces, thresholds)?,
        m,
        p,
        alpha: config.alpha,
        delta: config.delta,
    })
}

/// `delta_base` plus the reconstruction mismatch rate, kept below 0.5.
pub fn effective_delta(delta_base: f64, mismatch_rate: f64) -> f64 {
    (delta_base + mismatch_rate.max(0.0)).min(0.5 - f64::EPSILON)
}
