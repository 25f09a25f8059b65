//! Attacker-side SNP correlation model built from a reference population.
//!
//! The operative signal is the Sokal-Michener similarity (fraction of donors
//! whose minor-presence bits agree) between every pair of model loci. A
//! k-th order Markov transition table over panel order is available as well;
//! the attacks only consume the pairwise table.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{ReconError, Result};
use crate::genotype::{MinorPresenceVector, PopulationDataset};

/// Simple matching similarity `(n11 + n00) / len`.
pub fn sokal_michener(u: &MinorPresenceVector, v: &MinorPresenceVector) -> Result<f64> {
    if u.len() != v.len() {
        return Err(ReconError::InvalidArgument(format!(
            "vector lengths differ: {} vs {}",
            u.len(),
            v.len()
        )));
    }
    if u.is_empty() {
        return Err(ReconError::InvalidArgument("empty vectors".into()));
    }
    let matches = u.bits.iter().zip(&v.bits).filter(|(a, b)| a == b).count();
    Ok(matches as f64 / u.len() as f64)
}

/// Packs a presence column into 64-bit words.
fn pack_column(reference: &PopulationDataset, locus: usize) -> Vec<u64> {
    let n = reference.num_donors();
    let mut words = vec![0u64; n.div_ceil(64)];
    for (d, g) in reference.genotypes.iter().enumerate() {
        if g.values[locus].has_minor() {
            words[d / 64] |= 1 << (d % 64);
        }
    }
    words
}

/// Index of pair `(a, b)`, `a < b`, in a packed strict upper triangle of size `n`.
#[inline]
fn tri_index(n: usize, a: usize, b: usize) -> usize {
    debug_assert!(a < b && b < n);
    a * (2 * n - a - 1) / 2 + (b - a - 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationModel {
    loci: Vec<usize>,
    position: HashMap<usize, usize>,
    reference_size: usize,
    /// Strict upper triangle over `loci`, row-major.
    pairwise: Vec<f64>,
    markov: Option<MarkovTable>,
}

impl CorrelationModel {
    fn from_parts(loci: Vec<usize>, reference_size: usize, pairwise: Vec<f64>) -> Self {
        let position = loci.iter().enumerate().map(|(p, &l)| (l, p)).collect();
        Self {
            loci,
            position,
            reference_size,
            pairwise,
            markov: None,
        }
    }

    /// A model from explicit similarities; pairs not listed get 0.
    pub fn from_similarities(loci: &[usize], entries: &[((usize, usize), f64)]) -> Result<Self> {
        let mut sorted = loci.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        let n = sorted.len();
        let mut model = Self::from_parts(sorted, 0, vec![0.0; n * n.saturating_sub(1) / 2]);
        for &((i, j), s) in entries {
            if !(0.0..=1.0).contains(&s) {
                return Err(ReconError::InvalidArgument(format!(
                    "similarity {s} outside [0, 1]"
                )));
            }
            let a = *model
                .position
                .get(&i)
                .ok_or(ReconError::LocusNotInModel(i))?;
            let b = *model
                .position
                .get(&j)
                .ok_or(ReconError::LocusNotInModel(j))?;
            if a == b {
                continue;
            }
            let (a, b) = (a.min(b), a.max(b));
            model.pairwise[tri_index(n, a, b)] = s;
        }
        Ok(model)
    }

    pub fn loci(&self) -> &[usize] {
        &self.loci
    }

    pub fn reference_size(&self) -> usize {
        self.reference_size
    }

    pub fn contains(&self, locus: usize) -> bool {
        self.position.contains_key(&locus)
    }

    /// Similarity between two panel loci; 1 on the diagonal.
    pub fn similarity(&self, i: usize, j: usize) -> Result<f64> {
        let a = *self
            .position
            .get(&i)
            .ok_or(ReconError::LocusNotInModel(i))?;
        let b = *self
            .position
            .get(&j)
            .ok_or(ReconError::LocusNotInModel(j))?;
        Ok(match a.cmp(&b) {
            std::cmp::Ordering::Equal => 1.0,
            std::cmp::Ordering::Less => self.pairwise[tri_index(self.loci.len(), a, b)],
            std::cmp::Ordering::Greater => self.pairwise[tri_index(self.loci.len(), b, a)],
        })
    }

    pub fn markov(&self) -> Option<&MarkovTable> {
        self.markov.as_ref()
    }

    pub fn with_markov(mut self, table: MarkovTable) -> Self {
        self.markov = Some(table);
        self
    }
}

/// Pairwise similarity over `loci` from the reference donors' presence bits.
pub fn build_correlation_model(
    reference: &PopulationDataset,
    loci: &[usize],
) -> Result<CorrelationModel> {
    let n_ref = reference.num_donors();
    if n_ref == 0 {
        return Err(ReconError::InvalidArgument(
            "empty reference population".into(),
        ));
    }
    let mut sorted = loci.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if let Some(&bad) = sorted.iter().find(|&&l| l >= reference.num_snps()) {
        return Err(ReconError::InvalidLocus {
            locus: bad,
            panel_len: reference.num_snps(),
        });
    }
    let columns: Vec<Vec<u64>> = sorted
        .par_iter()
        .map(|&l| pack_column(reference, l))
        .collect();
    let n = sorted.len();
    let pairwise: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|a| {
            let columns = &columns;
            (a + 1..n).map(move |b| {
                let mismatches: u32 = columns[a]
                    .iter()
                    .zip(&columns[b])
                    .map(|(x, y)| (x ^ y).count_ones())
                    .sum();
                (n_ref - mismatches as usize) as f64 / n_ref as f64
            })
        })
        .collect();
    Ok(CorrelationModel::from_parts(sorted, n_ref, pairwise))
}

/// Fails when reference donors overlap `excluded` (beacon members, victims).
/// With `allow_overlap` the overlap is logged instead.
pub fn check_reference_disjoint<'a>(
    reference: &PopulationDataset,
    excluded: impl IntoIterator<Item = &'a str>,
    allow_overlap: bool,
) -> Result<()> {
    let excluded: HashSet<&str> = excluded.into_iter().collect();
    let overlap: Vec<&str> = reference
        .genotypes
        .iter()
        .map(|g| g.donor_id.as_str())
        .filter(|id| excluded.contains(id))
        .collect();
    if overlap.is_empty() {
        return Ok(());
    }
    let listed = overlap
        .iter()
        .take(5)
        .copied()
        .collect::<Vec<_>>()
        .join(", ");
    let message = format!("{} donor(s), e.g. {listed}", overlap.len());
    if allow_overlap {
        log::warn!("reference population overlaps target donors: {message}");
        Ok(())
    } else {
        Err(ReconError::ReferenceOverlap(message))
    }
}

fn context_matches(
    reference: &PopulationDataset,
    donor: usize,
    start: usize,
    pattern: &[bool],
) -> bool {
    let values = &reference.genotypes[donor].values;
    pattern
        .iter()
        .enumerate()
        .all(|(o, &bit)| values[start + o].has_minor() == bit)
}

/// `P(S_j = outcome | S_{j-k..j-1} = context)` with `k = context.len()`,
/// estimated by sequence frequencies in the reference. Unseen contexts give 0.
pub fn markov_transition(
    reference: &PopulationDataset,
    j: usize,
    context: &[bool],
    outcome: bool,
) -> Result<f64> {
    let k = context.len();
    if j >= reference.num_snps() {
        return Err(ReconError::InvalidLocus {
            locus: j,
            panel_len: reference.num_snps(),
        });
    }
    if j < k {
        return Err(ReconError::InvalidArgument(format!(
            "locus {j} has fewer than {k} predecessors"
        )));
    }
    let mut context_count = 0usize;
    let mut full_count = 0usize;
    for d in 0..reference.num_donors() {
        if context_matches(reference, d, j - k, context) {
            context_count += 1;
            if reference.genotypes[d].values[j].has_minor() == outcome {
                full_count += 1;
            }
        }
    }
    Ok(if context_count == 0 {
        0.0
    } else {
        full_count as f64 / context_count as f64
    })
}

/// Markov transition probabilities for every panel locus `j >= k`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovTable {
    order: usize,
    /// `rows[j - k][context]` holds `(context count, count followed by 1)`.
    /// Contexts are encoded with the oldest bit as the most significant.
    rows: Vec<Vec<(usize, usize)>>,
}

impl MarkovTable {
    pub fn build(reference: &PopulationDataset, order: usize) -> Result<Self> {
        if order > 16 {
            return Err(ReconError::InvalidArgument(format!(
                "markov order {order} too large"
            )));
        }
        let n_snps = reference.num_snps();
        let rows = (order..n_snps)
            .into_par_iter()
            .map(|j| {
                let mut context_counts = vec![0usize; 1 << order];
                let mut one_counts = vec![0usize; 1 << order];
                for g in &reference.genotypes {
                    let code = g.values[j - order..j]
                        .iter()
                        .fold(0usize, |acc, c| (acc << 1) | usize::from(c.has_minor()));
                    context_counts[code] += 1;
                    if g.values[j].has_minor() {
                        one_counts[code] += 1;
                    }
                }
                context_counts.into_iter().zip(one_counts).collect()
            })
            .collect();
        Ok(Self { order, rows })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Same contract as [`markov_transition`], read from the table.
    pub fn probability(&self, j: usize, context: &[bool], outcome: bool) -> Option<f64> {
        if context.len() != self.order || j < self.order {
            return None;
        }
        let code = context
            .iter()
            .fold(0usize, |acc, &b| (acc << 1) | usize::from(b));
        let (seen, ones) = self.rows.get(j - self.order)?[code];
        let hits = if outcome { ones } else { seen - ones };
        Some(if seen == 0 {
            0.0
        } else {
            hits as f64 / seen as f64
        })
    }
}

const CACHE_MAGIC: &[u8; 8] = b"SMCORR01";

fn hash_to_u64(hasher: Sha256) -> u64 {
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// Content hash of the reference donors' presence matrix.
pub fn reference_hash(reference: &PopulationDataset) -> u64 {
    let mut h = Sha256::new();
    h.update((reference.num_snps() as u64).to_le_bytes());
    for g in &reference.genotypes {
        h.update(g.donor_id.as_bytes());
        h.update([0u8]);
        let bits: Vec<u8> = g.values.iter().map(|c| u8::from(c.has_minor())).collect();
        h.update(&bits);
    }
    hash_to_u64(h)
}

fn loci_hash(loci: &[usize]) -> u64 {
    let mut h = Sha256::new();
    for &l in loci {
        h.update((l as u64).to_le_bytes());
    }
    hash_to_u64(h)
}

/// Writes the pairwise table in the binary cache format.
pub fn save_model_cache(path: &Path, model: &CorrelationModel, reference_hash: u64) -> Result<()> {
    let mut buf = Vec::with_capacity(40 + 8 * (model.loci.len() + model.pairwise.len()));
    buf.extend_from_slice(CACHE_MAGIC);
    buf.extend_from_slice(&reference_hash.to_le_bytes());
    buf.extend_from_slice(&loci_hash(&model.loci).to_le_bytes());
    buf.extend_from_slice(&(model.reference_size as u64).to_le_bytes());
    buf.extend_from_slice(&(model.loci.len() as u64).to_le_bytes());
    for &l in &model.loci {
        buf.extend_from_slice(&(l as u64).to_le_bytes());
    }
    for &s in &model.pairwise {
        buf.extend_from_slice(&s.to_le_bytes());
    }
    fs::File::create(path)?.write_all(&buf)?;
    Ok(())
}

/// Reads a cached model; `Ok(None)` when the file is absent or keyed to a
/// different reference or locus set.
pub fn load_model_cache(
    path: &Path,
    reference_hash: u64,
    loci: &[usize],
) -> Result<Option<CorrelationModel>> {
    let mut buf = Vec::new();
    match fs::File::open(path) {
        Ok(mut f) => f.read_to_end(&mut buf)?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let mut sorted = loci.to_vec();
    sorted.sort_unstable();
    sorted.dedup();

    let mut words = buf.get(8..).unwrap_or_default().chunks_exact(8).map(|c| {
        let mut b = [0u8; 8];
        b.copy_from_slice(c);
        b
    });
    let mut next_u64 = || {
        words
            .next()
            .map(u64::from_le_bytes)
            .ok_or_else(|| ReconError::Cache("truncated cache file".into()))
    };
    if buf.len() < 8 || &buf[..8] != CACHE_MAGIC {
        return Err(ReconError::Cache("bad magic".into()));
    }
    if next_u64()? != reference_hash || next_u64()? != loci_hash(&sorted) {
        return Ok(None);
    }
    let reference_size = next_u64()? as usize;
    let n = next_u64()? as usize;
    let mut cached_loci = Vec::with_capacity(n);
    for _ in 0..n {
        cached_loci.push(next_u64()? as usize);
    }
    if cached_loci != sorted {
        return Ok(None);
    }
    let len = n * n.saturating_sub(1) / 2;
    let mut pairwise = Vec::with_capacity(len);
    for _ in 0..len {
        pairwise.push(f64::from_bits(next_u64()?));
    }
    Ok(Some(CorrelationModel::from_parts(
        sorted,
        reference_size,
        pairwise,
    )))
}

/// [`build_correlation_model`] backed by an on-disk cache at `path`.
pub fn build_correlation_model_cached(
    reference: &PopulationDataset,
    loci: &[usize],
    path: &Path,
) -> Result<CorrelationModel> {
    let key = reference_hash(reference);
    if let Some(model) = load_model_cache(path, key, loci)? {
        return Ok(model);
    }
    let model = build_correlation_model(reference, loci)?;
    save_model_cache(path, &model, key)?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genotype::{Genotype, SnpDef};
    use proptest::prelude::*;

    fn mpv(bits: &[u8]) -> MinorPresenceVector {
        MinorPresenceVector::from_u8(bits)
    }

    /// Reference whose donors are the rows of `rows` (0/1 presence).
    fn reference(rows: &[&[u8]]) -> PopulationDataset {
        let width = rows.first().map_or(0, |r| r.len());
        let panel = (0..width)
            .map(|j| SnpDef {
                id: format!("s{j}"),
                chromosome: "1".into(),
                position: j as u64 + 1,
                maf: 0.1,
            })
            .collect();
        let genotypes = rows
            .iter()
            .enumerate()
            .map(|(i, r)| Genotype::from_dosages(format!("r{i}"), r))
            .collect();
        PopulationDataset::new(panel, genotypes).unwrap()
    }

    #[test]
    fn sokal_michener_examples() {
        assert_eq!(
            sokal_michener(&mpv(&[1, 0, 1, 0]), &mpv(&[1, 1, 1, 0])).unwrap(),
            0.75
        );
        let u = mpv(&[1, 0, 0, 1, 1]);
        assert_eq!(sokal_michener(&u, &u).unwrap(), 1.0);
        assert_eq!(sokal_michener(&u, &mpv(&[0, 1, 1, 0, 0])).unwrap(), 0.0);
        assert!(sokal_michener(&mpv(&[1]), &mpv(&[1, 0])).is_err());
        assert!(sokal_michener(&mpv(&[]), &mpv(&[])).is_err());
    }

    #[test]
    fn model_examples() {
        // columns: 0 == 1, 2 is the complement of 0, 3 = [1,1,0] against 0 = [1,0,1]
        let r = reference(&[&[1, 1, 0, 1], &[0, 0, 1, 1], &[1, 1, 0, 0]]);
        let m = build_correlation_model(&r, &[0, 1, 2, 3]).unwrap();
        assert_eq!(m.similarity(0, 1).unwrap(), 1.0);
        assert_eq!(m.similarity(0, 2).unwrap(), 0.0);
        assert!((m.similarity(0, 3).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(m.similarity(2, 2).unwrap(), 1.0);
        assert!(m.similarity(0, 7).is_err());
        let empty = reference(&[]);
        assert!(build_correlation_model(&empty, &[]).is_err());
    }

    #[test]
    fn model_matches_direct_sokal_michener_across_word_boundaries() {
        let rows: Vec<Vec<u8>> = (0..130u32)
            .map(|i| {
                (0..5u32)
                    .map(|j| u8::from((i * 7 + j * 13) % 5 < 2))
                    .collect()
            })
            .collect();
        let refs: Vec<&[u8]> = rows.iter().map(|r| r.as_slice()).collect();
        let r = reference(&refs);
        let m = build_correlation_model(&r, &[0, 1, 2, 3, 4]).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let direct = sokal_michener(
                    &MinorPresenceVector::new(r.presence_column(i)),
                    &MinorPresenceVector::new(r.presence_column(j)),
                )
                .unwrap();
                assert_eq!(m.similarity(i, j).unwrap(), direct);
                assert_eq!(m.similarity(i, j).unwrap(), m.similarity(j, i).unwrap());
            }
        }
    }

    #[test]
    fn single_donor_model_is_binary() {
        let r = reference(&[&[1, 0, 1, 1, 0]]);
        let m = build_correlation_model(&r, &[0, 1, 2, 3, 4]).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let s = m.similarity(i, j).unwrap();
                assert!(s == 0.0 || s == 1.0);
            }
        }
    }

    #[test]
    fn markov_examples() {
        // bit 0 set always implies bit 1 set
        let r = reference(&[&[1, 1, 0], &[0, 1, 0], &[0, 0, 0], &[1, 1, 1]]);
        assert_eq!(markov_transition(&r, 1, &[true], true).unwrap(), 1.0);
        assert_eq!(markov_transition(&r, 1, &[false], true).unwrap(), 0.5);
        // context [1, 1] at j = 2 seen twice, followed by 1 once
        assert_eq!(markov_transition(&r, 2, &[true, true], true).unwrap(), 0.5);
        // context never observed
        assert_eq!(markov_transition(&r, 2, &[true, false], true).unwrap(), 0.0);
        // k = 0 is the marginal
        assert_eq!(markov_transition(&r, 1, &[], true).unwrap(), 0.75);
        assert!(markov_transition(&r, 0, &[true], true).is_err());
        assert!(markov_transition(&r, 9, &[], true).is_err());
    }

    #[test]
    fn markov_table_agrees_with_direct_counts() {
        let r = reference(&[
            &[1, 1, 0, 1],
            &[0, 1, 0, 0],
            &[0, 0, 1, 1],
            &[1, 1, 1, 1],
            &[1, 0, 0, 1],
        ]);
        for k in 0..3 {
            let t = MarkovTable::build(&r, k).unwrap();
            for j in k..4 {
                for code in 0..(1usize << k) {
                    let ctx: Vec<bool> = (0..k).map(|o| code >> (k - 1 - o) & 1 == 1).collect();
                    for outcome in [false, true] {
                        let direct = markov_transition(&r, j, &ctx, outcome).unwrap();
                        assert_eq!(t.probability(j, &ctx, outcome).unwrap(), direct);
                    }
                }
            }
        }
    }

    #[test]
    fn cache_round_trip_and_key_checks() {
        let r = reference(&[&[1, 1, 0, 1], &[0, 0, 1, 1], &[1, 1, 0, 0]]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corr.bin");
        let built = build_correlation_model_cached(&r, &[3, 0, 1], &path).unwrap();
        let key = reference_hash(&r);
        let loaded = load_model_cache(&path, key, &[0, 1, 3]).unwrap().unwrap();
        assert_eq!(loaded, built);
        assert!(load_model_cache(&path, key ^ 1, &[0, 1, 3])
            .unwrap()
            .is_none());
        assert!(load_model_cache(&path, key, &[0, 1]).unwrap().is_none());
        assert!(load_model_cache(&dir.path().join("absent"), key, &[0])
            .unwrap()
            .is_none());
    }

    #[test]
    fn disjointness_check() {
        let r = reference(&[&[1], &[0]]);
        assert!(check_reference_disjoint(&r, ["x", "y"], false).is_ok());
        assert!(check_reference_disjoint(&r, ["r1"], false).is_err());
        assert!(check_reference_disjoint(&r, ["r1"], true).is_ok());
    }

    /// Brute-force sequence counting over every window, the independent route
    /// for the Markov estimate.
    fn brute_force_markov(rows: &[Vec<u8>], j: usize, ctx: &[bool], outcome: bool) -> f64 {
        let k = ctx.len();
        let windows: Vec<Vec<bool>> = rows
            .iter()
            .map(|r| r[j - k..=j].iter().map(|&b| b == 1).collect())
            .collect();
        let mut with_outcome = ctx.to_vec();
        with_outcome.push(outcome);
        let f_ctx = windows.iter().filter(|w| w[..k] == *ctx).count();
        let f_full = windows.iter().filter(|w| **w == with_outcome).count();
        if f_ctx == 0 {
            0.0
        } else {
            f_full as f64 / f_ctx as f64
        }
    }

    proptest! {
        #[test]
        fn sokal_michener_properties(
            pairs in proptest::collection::vec((any::<bool>(), any::<bool>()), 1..40),
            seed in any::<u64>(),
        ) {
            let u = MinorPresenceVector::new(pairs.iter().map(|p| p.0).collect());
            let v = MinorPresenceVector::new(pairs.iter().map(|p| p.1).collect());
            let s = sokal_michener(&u, &v).unwrap();
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert_eq!(s, sokal_michener(&v, &u).unwrap());
            prop_assert_eq!(sokal_michener(&u, &u).unwrap(), 1.0);
            // identical permutation of both vectors
            let mut order: Vec<usize> = (0..pairs.len()).collect();
            let n = order.len();
            for i in 0..n {
                let j = (seed as usize).wrapping_mul(i + 31) % n;
                order.swap(i, j);
            }
            let up = MinorPresenceVector::new(order.iter().map(|&i| u.bits[i]).collect());
            let vp = MinorPresenceVector::new(order.iter().map(|&i| v.bits[i]).collect());
            prop_assert_eq!(sokal_michener(&up, &vp).unwrap(), s);
        }

        #[test]
        fn markov_matches_brute_force(
            rows in proptest::collection::vec(proptest::collection::vec(0u8..2, 6), 1..=8),
            j in 1usize..6,
            k in 0usize..3,
            code in 0usize..4,
            outcome in any::<bool>(),
        ) {
            prop_assume!(j >= k);
            let ctx: Vec<bool> = (0..k).map(|o| code >> o & 1 == 1).collect();
            let refs: Vec<&[u8]> = rows.iter().map(|r| r.as_slice()).collect();
            let r = reference(&refs);
            let p = markov_transition(&r, j, &ctx, outcome).unwrap();
            prop_assert!((0.0..=1.0).contains(&p));
            prop_assert_eq!(p, brute_force_markov(&rows, j, &ctx, outcome));
        }
    }
}
