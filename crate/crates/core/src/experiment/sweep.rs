use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{precision_recall, Confusion};
use super::update::{
    derive_seed, draw_attackable, identify, reconstruct, truth_over, IdentificationMode, Identified,
};
use crate::attacks::{AttackConfig, AttackKind, DEFAULT_TAU};
use crate::error::{ReconError, Result};
use crate::genotype::PopulationDataset;
use crate::numeric::mean;
use crate::phenotype::TrainConfig;

/// One reconstruction experiment; `m_prime` defaults to `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n: usize,
    pub m: usize,
    pub m_prime: Option<usize>,
    pub attack: AttackKind,
    pub tau: f64,
    pub trials: usize,
    pub seed: u64,
    pub identification: IdentificationMode,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 50,
            m: 3,
            m_prime: None,
            attack: AttackKind::Spectral,
            tau: DEFAULT_TAU,
            trials: 20,
            seed: 0,
            identification: IdentificationMode::Oracle,
            train: TrainConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn bins(&self) -> usize {
        self.m_prime.unwrap_or(self.m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.bins() == 0 || self.trials == 0 {
            return Err(ReconError::InvalidArgument(
                "m, m' and trials must all be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn attack_config(&self) -> AttackConfig {
        let mut c = AttackConfig::new(self.attack, self.bins());
        c.tau = self.tau;
        c
    }

    /// This config with the swept parameter set to `value`.
    pub fn at(&self, axis: SweepAxis, value: usize) -> Self {
        let mut c = self.clone();
        match axis {
            SweepAxis::N => c.n = value,
            SweepAxis::M => c.m = value,
            SweepAxis::MPrime => c.m_prime = Some(value),
        }
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    N,
    M,
    MPrime,
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::N => "n",
            SweepAxis::M => "m",
            SweepAxis::MPrime => "m_prime",
        })
    }
}

impl FromStr for SweepAxis {
    type Err = ReconError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n" => Ok(SweepAxis::N),
            "m" => Ok(SweepAxis::M),
            "m_prime" | "m-prime" => Ok(SweepAxis::MPrime),
            other => Err(ReconError::InvalidArgument(format!(
                "unknown sweep axis {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<usize>,
}

/// Outcome of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub attack: AttackKind,
    pub n: usize,
    pub m: usize,
    pub m_prime: usize,
    pub tau: f64,
    pub trial: usize,
    pub seed: u64,
    pub flips: usize,
    pub confusion: Confusion,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub identification: Identified,
    pub bin: usize,
}

impl MetricsRow {
    pub const CSV_HEADER: &'static str =
        "attack,n,m,m_prime,tau,trial,seed,flips,tp,fp,tn,fn,precision,recall,identification";

    pub fn csv_line(&self) -> String {
        let na = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| x.to_string());
        let c = &self.confusion;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.attack,
            self.n,
            self.m,
            self.m_prime,
            self.tau,
            self.trial,
            self.seed,
            self.flips,
            c.tp,
            c.fp,
            c.tn,
            c.fn_,
            na(self.precision),
            na(self.recall),
            self.identification
        )
    }
}

pub fn rows_to_csv(rows: &[MetricsRow]) -> String {
    let mut out = format!("{}\n", MetricsRow::CSV_HEADER);
    for r in rows {
        let _ = writeln!(out, "{}", r.csv_line());
    }
    out
}

/// One seeded trial: draw, update, attack, identify, score.
pub fn run_trial(
    pop: &PopulationDataset,
    config: &ExperimentConfig,
    trial: usize,
    seed: u64,
) -> Result<MetricsRow> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (draw, flips) = draw_attackable(pop, config.n, config.m, config.bins(), &mut rng)?;
    let result = reconstruct(pop, &draw.reference, &flips, &config.attack_config(), seed)?
        .with_newcomers(config.m);
    let (bin, identification) = identify(
        pop,
        &draw,
        &flips,
        &result,
        config.identification,
        &config.train,
    )?;
    let truth = truth_over(pop, draw.victim(), &flips.loci);
    let confusion = precision_recall(&truth, &result.bin_indicator(bin, &flips.loci))?;
    Ok(MetricsRow {
        attack: config.attack,
        n: config.n,
        m: config.m,
        m_prime: config.bins(),
        tau: config.tau,
        trial,
        seed,
        flips: flips.beta(),
        precision: confusion.precision(),
        recall: confusion.recall(),
        confusion,
        identification,
        bin,
    })
}

/// Runs `config.trials` trials at every sweep value (or once at the config
/// itself). Trials run in parallel; rows come back in (value, trial) order
/// and depend only on the seeds.
pub fn run_sweep(
    pop: &PopulationDataset,
    config: &ExperimentConfig,
    sweep: Option<&Sweep>,
) -> Result<Vec<MetricsRow>> {
    let points: Vec<ExperimentConfig> = match sweep {
        Some(s) => s.values.iter().map(|&v| config.at(s.axis, v)).collect(),
        None => vec![config.clone()],
    };
    for p in &points {
        p.validate()?;
    }
    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|v| (0..config.trials).map(move |t| (v, t)))
        .collect();
    jobs.par_iter()
        .map(|&(v, t)| {
            run_trial(
                pop,
                &points[v],
                t,
                derive_seed(config.seed, v as u64, t as u64),
            )
        })
        .collect()
}

/// Means over the trials at one sweep value; NA rows are skipped and counted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: usize,
    pub trials: usize,
    pub mean_precision: Option<f64>,
    pub mean_recall: Option<f64>,
    pub precision_na: usize,
    pub recall_na: usize,
}

impl SweepPoint {
    pub const CSV_HEADER: &'static str =
        "value,trials,mean_precision,mean_recall,precision_na,recall_na";
}

pub fn summarize(rows: &[MetricsRow], axis: SweepAxis) -> Vec<SweepPoint> {
    let key = |r: &MetricsRow| match axis {
        SweepAxis::N => r.n,
        SweepAxis::M => r.m,
        SweepAxis::MPrime => r.m_prime,
    };
    let mut values: Vec<usize> = Vec::new();
    for r in rows {
        if !values.contains(&key(r)) {
            values.push(key(r));
        }
    }
    values
        .into_iter()
        .map(|value| {
            let group: Vec<&MetricsRow> = rows.iter().filter(|r| key(r) == value).collect();
            let p: Vec<f64> = group.iter().filter_map(|r| r.precision).collect();
            let rc: Vec<f64> = group.iter().filter_map(|r| r.recall).collect();
            SweepPoint {
                value,
                trials: group.len(),
                mean_precision: mean(&p),
                mean_recall: mean(&rc),
                precision_na: group.len() - p.len(),
                recall_na: group.len() - rc.len(),
            }
        })
        .collect()
}

pub fn summary_to_csv(points: &[SweepPoint]) -> String {
    let na = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| x.to_string());
    let mut out = format!("{}\n", SweepPoint::CSV_HEADER);
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            p.value,
            p.trials,
            na(p.mean_precision),
            na(p.mean_recall),
            p.precision_na,
            p.recall_na
        );
    }
    out
}
