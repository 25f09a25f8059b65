//! Tab-separated genotype matrix and MAF sidecar formats.
//!
//! Matrix: a header `snp<TAB>id1<TAB>id2...` naming the SNPs, then one row
//! per donor `donor_id<TAB>v1<TAB>v2...` with values in `{0,1,2,NA}`.
//!
//! Sidecar: `snp_id<TAB>chromosome<TAB>position<TAB>maf`, one SNP per line.
//! Without a sidecar every SNP is placed on chromosome `0` at its 1-based
//! column position and its MAF is computed from the matrix.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, Write};

use super::{chromosome_key, compute_maf, fold_maf, Call, Genotype, PopulationDataset, SnpDef};
use crate::error::{ReconError, Result};

fn parse_err(line: usize, message: impl Into<String>) -> ReconError {
    ReconError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_call(token: &str, line: usize) -> Result<Call> {
    match token {
        "0" => Ok(Call::HomMajor),
        "1" => Ok(Call::Het),
        "2" => Ok(Call::HomMinor),
        "NA" => Ok(Call::Missing),
        _ => Err(ReconError::InvalidGenotype {
            line,
            token: token.to_string(),
        }),
    }
}

struct SidecarRow {
    chromosome: String,
    position: u64,
    maf: f64,
}

fn parse_sidecar<R: BufRead>(reader: R) -> Result<HashMap<String, SidecarRow>> {
    let mut rows = HashMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let line = line.trim_end_matches('\r');
        if line.is_empty() || (i == 0 && line.starts_with("snp_id")) {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(parse_err(
                lineno,
                format!("expected 4 fields, found {}", fields.len()),
            ));
        }
        let position = fields[2]
            .parse::<u64>()
            .map_err(|e| parse_err(lineno, format!("bad position {:?}: {e}", fields[2])))?;
        let maf = fields[3]
            .parse::<f64>()
            .map_err(|e| parse_err(lineno, format!("bad maf {:?}: {e}", fields[3])))?;
        if !(0.0..=1.0).contains(&maf) {
            return Err(parse_err(lineno, format!("maf {maf} outside [0, 1]")));
        }
        let row = SidecarRow {
            chromosome: fields[1].to_string(),
            position,
            maf: fold_maf(maf),
        };
        if rows.insert(fields[0].to_string(), row).is_some() {
            return Err(parse_err(lineno, format!("duplicate snp id {}", fields[0])));
        }
    }
    Ok(rows)
}

/// Parses a genotype matrix, optionally with a MAF sidecar.
///
/// With a sidecar the panel is reordered by (chromosome, position) and every
/// genotype row is permuted to match; positions must be unique per chromosome.
pub fn parse_genotype_matrix<R: BufRead, S: BufRead>(
    text: R,
    maf_source: Option<S>,
) -> Result<PopulationDataset> {
    let mut lines = text.lines();
    let header = match lines.next() {
        Some(line) => line?,
        None => return Err(parse_err(1, "missing header")),
    };
    let header = header.trim_end_matches('\r');
    let mut header_fields = header.split('\t');
    if header_fields.next() != Some("snp") {
        return Err(parse_err(
            1,
            "malformed header: expected leading `snp` column",
        ));
    }
    let snp_ids: Vec<String> = header_fields.map(str::to_string).collect();
    let mut seen = HashSet::new();
    for id in &snp_ids {
        if id.is_empty() {
            return Err(parse_err(1, "malformed header: empty snp id"));
        }
        if !seen.insert(id.as_str()) {
            return Err(parse_err(
                1,
                format!("malformed header: duplicate snp id {id}"),
            ));
        }
    }

    let mut genotypes = Vec::new();
    let mut donors = HashSet::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let lineno = i + 2;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let donor_id = fields.next().unwrap_or_default().to_string();
        let values = fields
            .map(|tok| parse_call(tok, lineno))
            .collect::<Result<Vec<_>>>()?;
        if values.len() != snp_ids.len() {
            return Err(parse_err(
                lineno,
                format!(
                    "row length mismatch: {} values for {} snps",
                    values.len(),
                    snp_ids.len()
                ),
            ));
        }
        if !donors.insert(donor_id.clone()) {
            return Err(parse_err(lineno, format!("duplicate donor id {donor_id}")));
        }
        genotypes.push(Genotype { donor_id, values });
    }

    let dataset = match maf_source {
        None => {
            let panel = snp_ids
                .into_iter()
                .enumerate()
                .map(|(j, id)| SnpDef {
                    id,
                    chromosome: "0".to_string(),
                    position: j as u64 + 1,
                    maf: 0.0,
                })
                .collect();
            let mut dataset = PopulationDataset {
                panel,
                genotypes,
                phenotypes: None,
            };
            for j in 0..dataset.num_snps() {
                dataset.panel[j].maf = match compute_maf(&dataset, j) {
                    Ok(f) => f,
                    Err(_) => {
                        log::warn!(
                            "snp {} has no observed calls; maf set to 0",
                            dataset.panel[j].id
                        );
                        0.0
                    }
                };
            }
            dataset
        }
        Some(source) => {
            let mut sidecar = parse_sidecar(source)?;
            let mut panel = Vec::with_capacity(snp_ids.len());
            for id in snp_ids {
                let row = sidecar.remove(&id).ok_or_else(|| {
                    ReconError::Dataset(format!("snp {id} missing from maf sidecar"))
                })?;
                panel.push(SnpDef {
                    id,
                    chromosome: row.chromosome,
                    position: row.position,
                    maf: row.maf,
                });
            }
            let mut order: Vec<usize> = (0..panel.len()).collect();
            order.sort_by(|&a, &b| {
                (chromosome_key(&panel[a].chromosome), panel[a].position)
                    .cmp(&(chromosome_key(&panel[b].chromosome), panel[b].position))
            });
            for w in order.windows(2) {
                let (a, b) = (&panel[w[0]], &panel[w[1]]);
                if a.chromosome == b.chromosome && a.position == b.position {
                    return Err(ReconError::Dataset(format!(
                        "snps {} and {} share position {}:{}",
                        a.id, b.id, a.chromosome, a.position
                    )));
                }
            }
            let panel = order.iter().map(|&j| panel[j].clone()).collect();
            for g in &mut genotypes {
                g.values = order.iter().map(|&j| g.values[j]).collect();
            }
            PopulationDataset {
                panel,
                genotypes,
                phenotypes: None,
            }
        }
    };
    Ok(dataset)
}

pub fn write_genotype_matrix<W: Write>(dataset: &PopulationDataset, mut out: W) -> Result<()> {
    write!(out, "snp")?;
    for snp in &dataset.panel {
        write!(out, "\t{}", snp.id)?;
    }
    writeln!(out)?;
    for g in &dataset.genotypes {
        write!(out, "{}", g.donor_id)?;
        for call in &g.values {
            write!(out, "\t{call}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn write_maf_sidecar<W: Write>(dataset: &PopulationDataset, mut out: W) -> Result<()> {
    for snp in &dataset.panel {
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            snp.id, snp.chromosome, snp.position, snp.maf
        )?;
    }
    Ok(())
}
