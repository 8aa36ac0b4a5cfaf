//! CSV and JSON file formats.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use rfi_core::data::TRAIT_NAMES;
use rfi_core::{ChainOutput, Matrix, PedigreeEntry, PhenotypeRecord};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const PEDIGREE_HEADER: [&str; 3] = ["animal", "sire", "dam"];
pub const PHENOTYPE_HEADER: [&str; 7] = ["animal", "dim", "test_week", "dmi", "mbw", "milkne", "dbw"];

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::io(path, e))
}

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let f = File::create(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(f)))
}

fn column_positions(path: &Path, headers: &csv::StringRecord, wanted: &[&str]) -> Result<Vec<usize>> {
    wanted
        .iter()
        .map(|w| {
            headers.iter().position(|h| h == *w).ok_or_else(|| {
                CliError::Validation(format!("{}: missing column '{w}'", path.display()))
            })
        })
        .collect()
}

fn parse_cell<T: std::str::FromStr>(path: &Path, row: usize, column: &str, cell: &str) -> Result<T> {
    if cell.is_empty() {
        return Err(CliError::Validation(format!(
            "{}: row {row}, column {column}: missing value",
            path.display()
        )));
    }
    cell.parse().map_err(|_| {
        CliError::Validation(format!("{}: row {row}, column {column}: cannot parse '{cell}'", path.display()))
    })
}

/// Rows of `path` as cells in `wanted` column order; rows are numbered from 1
/// after the header.
fn read_rows(path: &Path, wanted: &[&str]) -> Result<Vec<(usize, Vec<String>)>> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| CliError::io(path, e))?.clone();
    let pos = column_positions(path, &headers, wanted)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Validation(format!("{}: row {}: {e}", path.display(), i + 1)))?;
        let cells = pos.iter().map(|&p| rec.get(p).unwrap_or("").to_string()).collect();
        out.push((i + 1, cells));
    }
    Ok(out)
}

pub fn read_pedigree(path: &Path) -> Result<Vec<PedigreeEntry>> {
    read_rows(path, &PEDIGREE_HEADER)?
        .into_iter()
        .map(|(row, c)| {
            Ok(PedigreeEntry::new(
                parse_cell(path, row, "animal", &c[0])?,
                parse_cell(path, row, "sire", &c[1])?,
                parse_cell(path, row, "dam", &c[2])?,
            ))
        })
        .collect()
}

pub fn write_pedigree(path: &Path, entries: &[PedigreeEntry]) -> Result<()> {
    let mut w = writer(path)?;
    let io = |e| CliError::io(path, e);
    w.write_record(PEDIGREE_HEADER).map_err(io)?;
    for e in entries {
        w.write_record([e.animal.to_string(), e.sire.to_string(), e.dam.to_string()])
            .map_err(io)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Reads phenotype records. `allowed_dim` restricts the DIM class labels.
pub fn read_phenotypes(path: &Path, allowed_dim: Option<&[i64]>) -> Result<Vec<PhenotypeRecord>> {
    let rows = read_rows(path, &PHENOTYPE_HEADER)?;
    let mut out = Vec::with_capacity(rows.len());
    for (row, c) in rows {
        let dim: i64 = parse_cell(path, row, "dim", &c[1])?;
        if let Some(levels) = allowed_dim {
            if !levels.contains(&dim) {
                return Err(CliError::Validation(format!(
                    "{}: row {row}, column dim: unknown level {dim}",
                    path.display()
                )));
            }
        }
        let mut traits = Vec::with_capacity(4);
        for (j, name) in TRAIT_NAMES.iter().enumerate() {
            let v: f64 = parse_cell(path, row, name, &c[3 + j])?;
            if !v.is_finite() {
                return Err(CliError::Validation(format!(
                    "{}: row {row}, column {name}: non-finite value",
                    path.display()
                )));
            }
            traits.push(v);
        }
        out.push(PhenotypeRecord {
            animal: parse_cell(path, row, "animal", &c[0])?,
            dim,
            test_week: parse_cell(path, row, "test_week", &c[2])?,
            traits,
        });
    }
    if out.is_empty() {
        return Err(CliError::Validation(format!("{}: no phenotype records", path.display())));
    }
    Ok(out)
}

pub fn write_phenotypes(path: &Path, records: &[PhenotypeRecord]) -> Result<()> {
    let mut w = writer(path)?;
    let io = |e| CliError::io(path, e);
    w.write_record(PHENOTYPE_HEADER).map_err(io)?;
    for r in records {
        let mut row = vec![r.animal.to_string(), r.dim.to_string(), r.test_week.to_string()];
        row.extend(r.traits.iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Saved states in long form: `iter,param,value`.
pub fn write_samples(path: &Path, chain: &ChainOutput) -> Result<()> {
    let mut w = writer(path)?;
    let io = |e| CliError::io(path, e);
    w.write_record(["iter", "param", "value"]).map_err(io)?;
    for &it in &chain.saved_iterations {
        let row = chain.trace.row(it - 1);
        for (name, v) in chain.param_names.iter().zip(row) {
            w.write_record([it.to_string(), name.clone(), v.to_string()]).map_err(io)?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Every iteration in wide form: `iter,<param>...`.
pub fn write_trace(path: &Path, chain: &ChainOutput) -> Result<()> {
    let mut w = writer(path)?;
    let io = |e| CliError::io(path, e);
    let mut header = vec!["iter".to_string()];
    header.extend(chain.param_names.iter().cloned());
    w.write_record(&header).map_err(io)?;
    for i in 0..chain.trace.rows() {
        let mut row = vec![(i + 1).to_string()];
        row.extend(chain.trace.row(i).iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// A wide trace file: parameter names and the `iterations x params` values.
pub fn read_trace(path: &Path) -> Result<(Vec<String>, Matrix)> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| CliError::io(path, e))?.clone();
    if headers.get(0) != Some("iter") {
        return Err(CliError::Validation(format!("{}: not a trace file", path.display())));
    }
    let names: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut data = Vec::new();
    let mut rows = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::io(path, e))?;
        for (j, cell) in rec.iter().skip(1).enumerate() {
            data.push(parse_cell::<f64>(path, i + 1, &names[j], cell)?);
        }
        rows += 1;
    }
    Ok((names, Matrix::from_row_slice(rows, headers.len() - 1, &data)))
}

/// `animal,<column>...`.
pub fn write_genetic_values(path: &Path, ids: &[i64], names: &[String], values: &Matrix) -> Result<()> {
    let mut w = writer(path)?;
    let io = |e| CliError::io(path, e);
    let mut header = vec!["animal".to_string()];
    header.extend(names.iter().cloned());
    w.write_record(&header).map_err(io)?;
    for (i, id) in ids.iter().enumerate() {
        let mut row = vec![id.to_string()];
        row.extend(values.row(i).iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// One column of a genetic-value file as `(animal, value)` pairs.
pub fn read_genetic_values(path: &Path, column: &str) -> Result<Vec<(i64, f64)>> {
    read_rows(path, &["animal", column])?
        .into_iter()
        .map(|(row, c)| Ok((parse_cell(path, row, "animal", &c[0])?, parse_cell(path, row, column, &c[1])?)))
        .collect()
}

pub fn write_rows<S: AsRef<str>>(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<S>>) -> Result<()> {
    let mut w = writer(path)?;
    let io = |e| CliError::io(path, e);
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r.iter().map(|s| s.as_ref())).map_err(io)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let f = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::io(path, e))?;
    w.write_all(b"\n").map_err(|e| CliError::io(path, e))?;
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let f = File::open(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_reader(std::io::BufReader::new(f)).map_err(|e| CliError::io(path, e))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut h = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| CliError::io(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

/// Posterior summary of one parameter, as written to `summary.json`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

pub type NamedSummaries = BTreeMap<String, MeanSd>;
