//! `recon`: reconstruction sweeps, chained membership inference, risk
//! quantification and a beacon server.

mod config;

use std::collections::HashSet;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use recon_core::attacks::{AttackConfig, AttackKind, DEFAULT_TAU};
use recon_core::beacon::BeaconState;
use recon_core::experiment::{
    parse_id_list, quantify_risk, rows_to_csv, run_chained_attack, run_sweep, summarize,
    summary_to_csv, AlternateCohort, ChainConfig, ExperimentConfig, IdentificationMode,
    PopulationSource, RiskSetup, Sweep, SweepAxis,
};
use recon_core::genotype::{write_genotype_matrix, write_maf_sidecar, PopulationDataset};
use recon_core::service::{serve, BeaconService};

/// Population the chained attack defaults to: many short blocks, so each
/// victim carries enough independent rare loci for the test statistic.
const CHAIN_POPULATION: &str = "synthetic:blocks=5000,block_size=2";

#[derive(Parser)]
#[command(name = "recon", version, about, args_override_self = true)]
struct Cli {
    /// More log output; repeat for debug.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reconstruction trials over a parameter sweep; one CSV row per trial.
    Sweep(SweepArgs),
    /// Reconstruct from one beacon's update, then test membership in another.
    Chain(ChainArgs),
    /// Rank a donor's reconstructability before they join a beacon.
    Risk(RiskArgs),
    /// Serve a beacon over line-delimited JSON on TCP.
    Serve(ServeArgs),
    /// Write a population as a genotype matrix with sidecars.
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Identification {
    Oracle,
    Phenotype,
}

impl From<Identification> for IdentificationMode {
    fn from(v: Identification) -> Self {
        match v {
            Identification::Oracle => IdentificationMode::Oracle,
            Identification::Phenotype => IdentificationMode::Phenotype,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Alternate {
    Members,
    NonMembers,
}

impl From<Alternate> for AlternateCohort {
    fn from(v: Alternate) -> Self {
        match v {
            Alternate::Members => AlternateCohort::Members,
            Alternate::NonMembers => AlternateCohort::NonMembers,
        }
    }
}

#[derive(Args)]
struct SweepArgs {
    /// Genotype matrix path or `synthetic[:key=value,...]`.
    #[arg(long, default_value = "synthetic")]
    population: String,
    #[arg(long, default_value = "spectral")]
    attack: AttackKind,
    /// Beacon size before the update.
    #[arg(long, default_value_t = 50)]
    n: usize,
    /// Newcomers in the update.
    #[arg(long, default_value_t = 3)]
    m: usize,
    /// Bins; defaults to m.
    #[arg(long)]
    m_prime: Option<usize>,
    /// Edge-weight cutoff for greedy and spectral.
    #[arg(long, default_value_t = DEFAULT_TAU)]
    tau: f64,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "oracle")]
    identification: Identification,
    /// Parameter to sweep: n, m or m_prime.
    #[arg(long, requires = "values")]
    vary: Option<SweepAxis>,
    /// Comma-separated values for the swept parameter.
    #[arg(long, value_delimiter = ',', requires = "vary")]
    values: Option<Vec<usize>>,
    /// Per-trial CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-value mean precision and recall CSV.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct ChainArgs {
    #[arg(long, default_value = CHAIN_POPULATION)]
    population: String,
    /// Donor ids of the updated beacon, one per line or comma-separated.
    #[arg(long)]
    b1: Option<PathBuf>,
    /// Donor ids of the target beacon.
    #[arg(long)]
    b2: Option<PathBuf>,
    /// Random beacon sizes when no id lists are given.
    #[arg(long, default_value_t = 50)]
    b1_size: usize,
    #[arg(long, default_value_t = 60)]
    b2_size: usize,
    #[arg(long, default_value_t = 1)]
    m: usize,
    #[arg(long)]
    m_prime: Option<usize>,
    #[arg(long, default_value = "spectral")]
    attack: AttackKind,
    #[arg(long, default_value_t = 20)]
    cohort_size: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Per-query mismatch probability before reconstruction error.
    #[arg(long, default_value_t = 1e-6)]
    delta: f64,
    #[arg(long, default_value_t = 40)]
    max_queries: usize,
    /// Fixed identification accuracy for cohort mixing; measured otherwise.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, value_enum, default_value = "oracle")]
    identification: Identification,
    #[arg(long, value_enum, default_value = "members")]
    alternate: Alternate,
    #[arg(long, default_value_t = 10)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Power curve CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RiskArgs {
    #[arg(long, default_value = "synthetic")]
    population: String,
    /// Id of the donor considering joining.
    #[arg(long)]
    donor: String,
    /// Beacon member ids; `n` random donors when absent.
    #[arg(long)]
    members: Option<PathBuf>,
    /// Ids of the other newcomers; `m - 1` random donors when absent.
    #[arg(long)]
    batch: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    n: usize,
    #[arg(long, default_value_t = 3)]
    m: usize,
    /// Baseline cohort size.
    #[arg(long, default_value_t = 20)]
    baseline_size: usize,
    #[arg(long, default_value = "spectral")]
    attack: AttackKind,
    #[arg(long)]
    m_prime: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_TAU)]
    tau: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON report; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:7878")]
    bind: String,
    /// Genotype matrix path or synthetic spec.
    #[arg(long)]
    dataset: String,
    /// Member ids; every donor in the dataset when absent.
    #[arg(long)]
    members: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value = "synthetic")]
    population: String,
    /// Matrix path; `.maf` and `.pheno.tsv` sidecars are written beside it.
    #[arg(long)]
    out: PathBuf,
}

fn load(spec: &str) -> Result<PopulationDataset> {
    let source: PopulationSource = spec.parse()?;
    let data = source
        .load()
        .with_context(|| format!("loading population {spec}"))?;
    log::info!(
        "population: {} donors x {} SNPs",
        data.num_donors(),
        data.num_snps()
    );
    Ok(data)
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
        }
        None => Ok(std::io::stdout().write_all(text.as_bytes())?),
    }
}

fn read_ids(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading id list {}", path.display()))?;
    Ok(parse_id_list(&text))
}

fn resolve(pop: &PopulationDataset, ids: &[String]) -> Result<Vec<usize>> {
    let index = pop.donor_index();
    ids.iter()
        .map(|id| {
            index
                .get(id.as_str())
                .copied()
                .with_context(|| format!("unknown donor {id:?}"))
        })
        .collect()
}

fn sweep(args: SweepArgs) -> Result<()> {
    let pop = load(&args.population)?;
    let config = ExperimentConfig {
        n: args.n,
        m: args.m,
        m_prime: args.m_prime,
        attack: args.attack,
        tau: args.tau,
        trials: args.trials,
        seed: args.seed,
        identification: args.identification.into(),
        ..Default::default()
    };
    let sweep = args
        .vary
        .zip(args.values)
        .map(|(axis, values)| Sweep { axis, values });
    let rows = run_sweep(&pop, &config, sweep.as_ref())?;
    emit(args.out.as_deref(), &rows_to_csv(&rows))?;
    let axis = sweep.as_ref().map_or(SweepAxis::M, |s| s.axis);
    let points = summarize(&rows, axis);
    for p in &points {
        let show = |v: Option<f64>| v.map_or("NA".to_string(), |v| format!("{v:.3}"));
        log::info!(
            "{axis}={}: mean precision {} mean recall {} over {} trials",
            p.value,
            show(p.mean_precision),
            show(p.mean_recall),
            p.trials
        );
    }
    if let Some(path) = &args.summary {
        emit(Some(path), &summary_to_csv(&points))?;
    }
    Ok(())
}

fn chain(args: ChainArgs) -> Result<()> {
    let pop = load(&args.population)?;
    let config = ChainConfig {
        b1_size: args.b1_size,
        b2_size: args.b2_size,
        b1: args.b1.as_deref().map(read_ids).transpose()?,
        b2: args.b2.as_deref().map(read_ids).transpose()?,
        m: args.m,
        attack: args.attack,
        m_prime: args.m_prime,
        cohort_size: args.cohort_size,
        alpha: args.alpha,
        delta: args.delta,
        max_queries: args.max_queries,
        p: args.p,
        identification: args.identification.into(),
        alternate: args.alternate.into(),
        reps: args.reps,
        seed: args.seed,
        ..Default::default()
    };
    let outcome = run_chained_attack(&pop, &config)?;
    log::info!(
        "p {:.3}, bin mismatch {:.3}, delta used {:.3e}, power 1.0 reached at {}",
        outcome.p,
        outcome.mismatch,
        outcome.delta_eff,
        outcome
            .curve
            .queries_to_reach(1.0)
            .map_or("no query count".to_string(), |q| format!("{q} queries"))
    );
    emit(args.out.as_deref(), &outcome.curve.to_csv())
}

fn risk(args: RiskArgs) -> Result<()> {
    let pop = load(&args.population)?;
    if args.m == 0 {
        bail!("m must be at least 1");
    }
    let donor = resolve(&pop, std::slice::from_ref(&args.donor))?[0];
    let members = args
        .members
        .as_deref()
        .map(|p| resolve(&pop, &read_ids(p)?))
        .transpose()?;
    let batch = args
        .batch
        .as_deref()
        .map(|p| resolve(&pop, &read_ids(p)?))
        .transpose()?;
    let taken: HashSet<usize> = std::iter::once(donor)
        .chain(members.iter().flatten().copied())
        .chain(batch.iter().flatten().copied())
        .collect();
    let mut free: Vec<usize> = (0..pop.num_donors())
        .filter(|i| !taken.contains(i))
        .collect();
    free.shuffle(&mut ChaCha8Rng::seed_from_u64(args.seed));
    let mut take = |count: usize, what: &str| -> Result<Vec<usize>> {
        if free.len() <= count {
            bail!("population too small to draw {count} {what} and keep a reference");
        }
        Ok(free.drain(..count).collect())
    };
    let members = match members {
        Some(m) => m,
        None => take(args.n, "members")?,
    };
    let batch = match batch {
        Some(b) => b,
        None => take(args.m - 1, "newcomers")?,
    };
    let baseline_pool = take(args.baseline_size, "baseline donors")?;
    let setup = RiskSetup {
        donor,
        members,
        batch,
        baseline_pool,
        reference: free,
    };
    let mut attack = AttackConfig::new(args.attack, args.m_prime.unwrap_or(args.m));
    attack.tau = args.tau;
    let report = quantify_risk(&pop, &setup, &attack, args.seed)?;
    log::info!(
        "donor {}: fraction {:.3}, percentile {:.1}",
        args.donor,
        report.fraction,
        report.percentile
    );
    emit(
        args.out.as_deref(),
        &(serde_json::to_string_pretty(&report)? + "\n"),
    )
}

fn serve_beacon(args: ServeArgs) -> Result<()> {
    let pop = load(&args.dataset)?;
    let members = match &args.members {
        Some(p) => resolve(&pop, &read_ids(p)?)?
            .into_iter()
            .map(|i| pop.genotypes[i].clone())
            .collect(),
        None => pop.genotypes.clone(),
    };
    let beacon = BeaconState::with_members(pop.num_snps(), members)?;
    let handle = serve(BeaconService::new(beacon, &pop.panel)?, args.bind.as_str())?;
    // scripts read the bound address from the first stdout line
    println!("listening on {}", handle.local_addr());
    std::io::stdout().flush()?;
    loop {
        std::thread::park();
    }
}

fn generate(args: GenerateArgs) -> Result<()> {
    let pop = load(&args.population)?;
    let sibling = |suffix: &str| {
        let mut p = args.out.clone().into_os_string();
        p.push(suffix);
        PathBuf::from(p)
    };
    write_genotype_matrix(&pop, File::create(&args.out)?)?;
    write_maf_sidecar(&pop, File::create(sibling(".maf"))?)?;
    if let Some(table) = &pop.phenotypes {
        table.write(&sibling(".pheno.tsv"))?;
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse_from(config::expand(std::env::args_os().collect())?);
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match cli.command {
        Command::Sweep(a) => sweep(a),
        Command::Chain(a) => chain(a),
        Command::Risk(a) => risk(a),
        Command::Serve(a) => serve_beacon(a),
        Command::Generate(a) => generate(a),
    }
}
