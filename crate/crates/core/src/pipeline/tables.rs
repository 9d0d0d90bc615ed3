//! Per-layer abundance tables: CSV ingestion and entity filtering.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

/// Nonnegative `entities x sites` measurements for one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct AbundanceTable {
    pub layer_name: String,
    pub entity_ids: Vec<String>,
    pub site_ids: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl AbundanceTable {
    pub fn new(
        layer_name: String,
        entity_ids: Vec<String>,
        site_ids: Vec<String>,
        values: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if entity_ids.len() != values.len() {
            return Err(Error::DimensionError {
                expected: entity_ids.len(),
                found: values.len(),
            });
        }
        if let Some(row) = values.iter().find(|r| r.len() != site_ids.len()) {
            return Err(Error::DimensionError {
                expected: site_ids.len(),
                found: row.len(),
            });
        }
        if values.iter().flatten().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidInput(format!(
                "layer {layer_name} has negative or non-finite values"
            )));
        }
        Ok(AbundanceTable {
            layer_name,
            entity_ids,
            site_ids,
            values,
        })
    }

    fn row_is_zero(&self, i: usize) -> bool {
        self.values[i].iter().all(|&v| v == 0.0)
    }

    fn select(&self, keep: &[usize]) -> AbundanceTable {
        AbundanceTable {
            layer_name: self.layer_name.clone(),
            entity_ids: keep.iter().map(|&i| self.entity_ids[i].clone()).collect(),
            site_ids: self.site_ids.clone(),
            values: keep.iter().map(|&i| self.values[i].clone()).collect(),
        }
    }
}

/// Layer name from a file path: the file stem.
pub fn layer_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Parses one abundance CSV: header row of site ids, then `entity,value,...` rows.
pub fn read_abundance_csv(path: &Path) -> Result<AbundanceTable> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.len() < 2 {
        return Err(Error::parse(
            path,
            1,
            "header needs an id column and at least one site",
        ));
    }
    let site_ids: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();

    let mut entity_ids = Vec::new();
    let mut values = Vec::new();
    let mut seen = HashSet::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let id = record.get(0).unwrap_or_default().to_owned();
        if id.is_empty() {
            return Err(Error::parse(path, line, "empty entity id"));
        }
        if !seen.insert(id.clone()) {
            return Err(Error::parse(
                path,
                line,
                format!("duplicate entity id `{id}`"),
            ));
        }
        let row = record
            .iter()
            .skip(1)
            .map(|cell| {
                let v: f64 = cell
                    .parse()
                    .map_err(|_| Error::parse(path, line, format!("`{cell}` is not a number")))?;
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::parse(
                        path,
                        line,
                        format!("abundance `{cell}` must be finite and nonnegative"),
                    ));
                }
                Ok(v)
            })
            .collect::<Result<Vec<f64>>>()?;
        entity_ids.push(id);
        values.push(row);
    }
    if entity_ids.is_empty() {
        return Err(Error::EmptyTable { path: path.into() });
    }
    AbundanceTable::new(layer_name(path), entity_ids, site_ids, values)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => Error::parse(
            path,
            line,
            format!("expected {expected_len} fields, found {len}"),
        ),
        other => Error::parse(path, line, format!("{other:?}")),
    }
}

/// Loads every table and aligns them on the union of entity ids.
///
/// Entities missing from a file become all-zero rows in that layer. Union order
/// is first appearance, scanning files in the order given.
pub fn load_abundance_tables<P: AsRef<Path>>(paths: &[P]) -> Result<Vec<AbundanceTable>> {
    let tables = paths
        .iter()
        .map(|p| read_abundance_csv(p.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    Ok(align_tables(tables))
}

pub fn align_tables(tables: Vec<AbundanceTable>) -> Vec<AbundanceTable> {
    let mut universe: Vec<String> = Vec::new();
    let mut index = HashSet::new();
    for t in &tables {
        for id in &t.entity_ids {
            if index.insert(id.clone()) {
                universe.push(id.clone());
            }
        }
    }
    tables
        .into_iter()
        .map(|t| {
            let pos: BTreeMap<&str, usize> = t
                .entity_ids
                .iter()
                .enumerate()
                .map(|(i, id)| (id.as_str(), i))
                .collect();
            let values = universe
                .iter()
                .map(|id| match pos.get(id.as_str()) {
                    Some(&i) => t.values[i].clone(),
                    None => vec![0.0; t.site_ids.len()],
                })
                .collect();
            AbundanceTable {
                layer_name: t.layer_name.clone(),
                entity_ids: universe.clone(),
                site_ids: t.site_ids.clone(),
                values,
            }
        })
        .collect()
}

/// Entities removed because they are absent from some layer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartialAbsence {
    pub entity: String,
    pub absent_in: Vec<String>,
}

/// What the two filtering passes removed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterLog {
    pub total: usize,
    /// Pass 1: zero in every layer.
    pub absent_everywhere: Vec<String>,
    /// Pass 2: zero in at least one layer.
    pub absent_in_some_layer: Vec<PartialAbsence>,
    pub retained: Vec<String>,
}

/// Drops entities absent everywhere, then entities absent from at least one layer.
pub fn filter_entities(tables: &[AbundanceTable]) -> Result<(Vec<AbundanceTable>, FilterLog)> {
    let first = tables
        .first()
        .ok_or_else(|| Error::InvalidInput("no tables to filter".into()))?;
    if tables.iter().any(|t| t.entity_ids != first.entity_ids) {
        return Err(Error::InvalidInput(
            "tables must share one entity list; align them first".into(),
        ));
    }
    let mut log = FilterLog {
        total: first.entity_ids.len(),
        absent_everywhere: Vec::new(),
        absent_in_some_layer: Vec::new(),
        retained: Vec::new(),
    };
    let mut keep = Vec::new();
    for (i, id) in first.entity_ids.iter().enumerate() {
        let absent: Vec<String> = tables
            .iter()
            .filter(|t| t.row_is_zero(i))
            .map(|t| t.layer_name.clone())
            .collect();
        if absent.len() == tables.len() {
            log.absent_everywhere.push(id.clone());
        } else if !absent.is_empty() {
            log.absent_in_some_layer.push(PartialAbsence {
                entity: id.clone(),
                absent_in: absent,
            });
        } else {
            log.retained.push(id.clone());
            keep.push(i);
        }
    }
    if keep.is_empty() {
        return Err(Error::EmptyAfterFilter);
    }
    Ok((tables.iter().map(|t| t.select(&keep)).collect(), log))
}
