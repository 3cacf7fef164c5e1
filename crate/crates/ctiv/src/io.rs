//! CSV ingestion and output. Rows in messages are 1-based data rows (the
//! header is not counted).

use std::fs::File;
use std::io::Write;
use std::path::Path;

use ctiv_core::dataset::binary_column;
use ctiv_core::{Dataset, Error as CoreError};

use crate::error::{CliError, Result};

/// Which CSV columns hold what.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ColumnSchema {
    /// Outcome column.
    pub y: String,
    /// Receipt column.
    pub w: String,
    /// Assignment column; when the file lacks it the dataset has no `z`.
    pub z: Option<String>,
    /// Feature columns in order; `None` takes every other column.
    pub features: Option<Vec<String>>,
    /// Columns ignored when features are inferred.
    pub exclude: Vec<String>,
}

impl Default for ColumnSchema {
    fn default() -> Self {
        Self {
            y: "y".into(),
            w: "w".into(),
            z: Some("z".into()),
            features: None,
            exclude: Vec::new(),
        }
    }
}

/// A numeric CSV held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// Header names.
    pub headers: Vec<String>,
    /// Cells, row-major; blank cells are NaN until validated.
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    /// Position of column `name`.
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    fn require(&self, name: &str) -> Result<usize> {
        self.column_index(name).ok_or_else(|| {
            CoreError::Schema(format!(
                "column `{name}` not found in header {:?}",
                self.headers
            ))
            .into()
        })
    }

    /// Column `j` as a vector, rejecting blank cells.
    fn column(&self, j: usize) -> Result<Vec<f64>> {
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let v = r[j];
                if v.is_nan() {
                    Err(CoreError::MissingValue {
                        row: i + 1,
                        column: self.headers[j].clone(),
                    }
                    .into())
                } else {
                    Ok(v)
                }
            })
            .collect()
    }
}

fn is_missing(cell: &str) -> bool {
    matches!(cell, "" | "NA" | "na" | "NaN" | "nan" | "null")
}

/// Reads a headed CSV of numbers. Blank and `NA` cells become NaN; anything
/// else that fails to parse is a validation error.
pub fn read_table(path: &Path) -> Result<Table> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Data(format!("row {}: {e}", i + 1)))?;
        let row = record
            .iter()
            .enumerate()
            .map(|(j, cell)| {
                if is_missing(cell) {
                    return Ok(f64::NAN);
                }
                match cell.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(CoreError::Validation {
                        row: i + 1,
                        message: format!(
                            "column `{}`: `{cell}` is not a finite number",
                            headers[j]
                        ),
                    }),
                }
            })
            .collect::<std::result::Result<Vec<f64>, CoreError>>()?;
        rows.push(row);
    }
    Ok(Table { headers, rows })
}

/// Resolves the feature columns of `table` under `schema`.
pub fn feature_columns(table: &Table, schema: &ColumnSchema) -> Result<Vec<String>> {
    let names = match &schema.features {
        Some(list) => list.clone(),
        None => {
            let mut reserved = vec![schema.y.as_str(), schema.w.as_str()];
            if let Some(z) = &schema.z {
                reserved.push(z);
            }
            reserved.extend(schema.exclude.iter().map(String::as_str));
            table
                .headers
                .iter()
                .filter(|h| !reserved.contains(&h.as_str()))
                .cloned()
                .collect()
        }
    };
    if names.is_empty() {
        return Err(CoreError::Schema("no feature columns".into()).into());
    }
    Ok(names)
}

/// Builds a [`Dataset`] from a parsed table.
pub fn dataset_from_table(table: &Table, schema: &ColumnSchema) -> Result<Dataset> {
    let y = table.column(table.require(&schema.y)?)?;
    let w = binary_column(&schema.w, &table.column(table.require(&schema.w)?)?)?;
    let z = match schema
        .z
        .as_deref()
        .and_then(|name| table.column_index(name).map(|j| (name, j)))
    {
        Some((name, j)) => Some(binary_column(name, &table.column(j)?)?),
        None => None,
    };
    let names = feature_columns(table, schema)?;
    let idx = names
        .iter()
        .map(|n| table.require(n))
        .collect::<Result<Vec<usize>>>()?;
    let columns = idx
        .iter()
        .map(|&j| table.column(j))
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let mut covariates = Vec::with_capacity(y.len() * names.len());
    for i in 0..y.len() {
        covariates.extend(columns.iter().map(|c| c[i]));
    }
    Ok(Dataset::new(covariates, names, y, w, z)?)
}

/// Reads a dataset CSV.
pub fn load_csv(path: &Path, schema: &ColumnSchema) -> Result<Dataset> {
    dataset_from_table(&read_table(path)?, schema)
}

/// Reads the named feature columns, in the given order, row-major.
pub fn load_features(path: &Path, names: &[String]) -> Result<(Vec<f64>, usize)> {
    let table = read_table(path)?;
    let missing: Vec<&str> = names
        .iter()
        .filter(|n| table.column_index(n).is_none())
        .map(String::as_str)
        .collect();
    if !missing.is_empty() {
        return Err(CoreError::Schema(format!(
            "expected {} feature columns {:?}; missing {:?}",
            names.len(),
            names,
            missing
        ))
        .into());
    }
    let idx: Vec<usize> = names.iter().filter_map(|n| table.column_index(n)).collect();
    let columns = idx
        .iter()
        .map(|&j| table.column(j))
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let n = table.rows.len();
    let mut x = Vec::with_capacity(n * names.len());
    for i in 0..n {
        x.extend(columns.iter().map(|c| c[i]));
    }
    Ok((x, n))
}

/// Writes `ds` as CSV: features, then `z` (when present), `w`, `y`, then
/// any extra columns. Reals use the shortest round-trip representation.
pub fn write_dataset(
    path: &Path,
    ds: &Dataset,
    schema: &ColumnSchema,
    extra: &[(&str, &[f64])],
) -> Result<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut out = csv::Writer::from_writer(file);
    let mut header: Vec<&str> = ds.feature_names().iter().map(String::as_str).collect();
    let z_name = schema.z.as_deref().unwrap_or("z");
    if ds.z().is_some() {
        header.push(z_name);
    }
    header.push(&schema.w);
    header.push(&schema.y);
    header.extend(extra.iter().map(|(name, _)| *name));
    out.write_record(&header)?;
    let mut record: Vec<String> = Vec::with_capacity(header.len());
    for i in 0..ds.n() {
        record.clear();
        record.extend(ds.row(i).iter().map(|v| v.to_string()));
        if let Some(z) = ds.z() {
            record.push(z[i].to_string());
        }
        record.push(ds.w()[i].to_string());
        record.push(ds.y()[i].to_string());
        record.extend(extra.iter().map(|(_, col)| col[i].to_string()));
        out.write_record(&record)?;
    }
    out.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}

/// Writes `text` to `path`.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(text.as_bytes())
        .map_err(|e| CliError::io(path, e))
}

/// Reads `path` into a string.
pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}
