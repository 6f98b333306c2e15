use std::collections::{HashMap, HashSet};
use std::io::Read;
use std::path::Path;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Continuous,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
}

/// One cell of a raw record.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Missing,
    Number(f64),
    Level(String),
}

impl Value {
    pub fn is_missing(&self) -> bool {
        matches!(self, Value::Missing)
    }
}

/// Raw tabular data: feature records plus a binary outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<ColumnSpec>,
    rows: Vec<Vec<Value>>,
    labels: Vec<Option<u8>>,
    label_column: String,
}

pub(crate) fn is_missing_token(s: &str) -> bool {
    let t = s.trim();
    t.is_empty() || t.eq_ignore_ascii_case("na")
}

fn parse_label(row: usize, raw: &str) -> Result<Option<u8>> {
    if is_missing_token(raw) {
        return Ok(None);
    }
    match raw.trim().parse::<f64>() {
        Ok(v) if v == 0.0 => Ok(Some(0)),
        Ok(v) if v == 1.0 => Ok(Some(1)),
        _ => Err(Error::InvalidLabel {
            row,
            value: raw.to_string(),
        }),
    }
}

impl Dataset {
    pub fn new(
        columns: Vec<ColumnSpec>,
        rows: Vec<Vec<Value>>,
        labels: Vec<Option<u8>>,
        label_column: impl Into<String>,
    ) -> Result<Self> {
        let label_column = label_column.into();
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) || c.name == label_column {
                return Err(Error::DuplicateColumn(c.name.clone()));
            }
        }
        if rows.len() != labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(Error::RaggedRow {
                    row: i,
                    expected: columns.len(),
                    found: row.len(),
                });
            }
            for (cell, col) in row.iter().zip(&columns) {
                let ok = match (cell, col.kind) {
                    (Value::Missing, _) => true,
                    (Value::Number(v), ColumnKind::Continuous) => v.is_finite(),
                    (Value::Level(_), ColumnKind::Categorical) => true,
                    _ => false,
                };
                if !ok {
                    return Err(Error::InvalidArgument(format!(
                        "row {i}: value {cell:?} does not fit {:?} column {:?}",
                        col.kind, col.name
                    )));
                }
            }
        }
        if let Some((row, bad)) = labels
            .iter()
            .enumerate()
            .find_map(|(i, l)| l.filter(|v| *v > 1).map(|v| (i, v)))
        {
            return Err(Error::InvalidLabel {
                row,
                value: bad.to_string(),
            });
        }
        Ok(Dataset {
            columns,
            rows,
            labels,
            label_column,
        })
    }

    /// All-continuous dataset from a dense matrix.
    pub fn from_matrix(names: &[String], x: ArrayView2<f64>, labels: &[u8]) -> Result<Self> {
        if names.len() != x.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} names for {} columns",
                names.len(),
                x.ncols()
            )));
        }
        let columns = names
            .iter()
            .map(|n| ColumnSpec {
                name: n.clone(),
                kind: ColumnKind::Continuous,
            })
            .collect();
        let rows = x
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|&v| Value::Number(v)).collect())
            .collect();
        Dataset::new(
            columns,
            rows,
            labels.iter().map(|&l| Some(l)).collect(),
            "label",
        )
    }

    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Value>] {
        &self.rows
    }

    pub fn labels(&self) -> &[Option<u8>] {
        &self.labels
    }

    pub fn label_column(&self) -> &str {
        &self.label_column
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            columns: self.columns.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            label_column: self.label_column.clone(),
        }
    }

    /// Drops rows whose label is missing.
    pub fn labeled(&self) -> Dataset {
        let keep: Vec<usize> = (0..self.n_rows())
            .filter(|&i| self.labels[i].is_some())
            .collect();
        self.subset(&keep)
    }

    pub fn set_value(&mut self, row: usize, column: usize, value: Value) {
        self.rows[row][column] = value;
    }
}

/// Reads a CSV file with a header row. Column kinds are inferred (every
/// non-missing cell parses as a number: continuous, otherwise categorical)
/// unless overridden. Empty cells and `NA` are missing.
pub fn load_csv(
    path: impl AsRef<Path>,
    label_column: &str,
    kind_overrides: &HashMap<String, ColumnKind>,
) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, label_column, kind_overrides)
}

pub fn read_csv<R: Read>(
    reader: R,
    label_column: &str,
    kind_overrides: &HashMap<String, ColumnKind>,
) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let label_idx = header
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::MissingLabelColumn(label_column.to_string()))?;

    let mut raw: Vec<Vec<String>> = Vec::new();
    let mut labels = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::RaggedRow {
                row: i,
                expected: header.len(),
                found: rec.len(),
            });
        }
        labels.push(parse_label(i, &rec[label_idx])?);
        raw.push(
            rec.iter()
                .enumerate()
                .filter(|(j, _)| *j != label_idx)
                .map(|(_, s)| s.to_string())
                .collect(),
        );
    }

    let names: Vec<&String> = header
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != label_idx)
        .map(|(_, h)| h)
        .collect();
    for key in kind_overrides.keys() {
        if !names.contains(&key) {
            return Err(Error::UnknownColumn(key.clone()));
        }
    }

    let mut columns = Vec::with_capacity(names.len());
    for (j, name) in names.iter().enumerate() {
        let inferred = if raw
            .iter()
            .map(|r| r[j].as_str())
            .filter(|s| !is_missing_token(s))
            .all(|s| s.trim().parse::<f64>().is_ok_and(f64::is_finite))
        {
            ColumnKind::Continuous
        } else {
            ColumnKind::Categorical
        };
        let kind = kind_overrides.get(*name).copied().unwrap_or(inferred);
        columns.push(ColumnSpec {
            name: (*name).clone(),
            kind,
        });
    }

    let mut rows = Vec::with_capacity(raw.len());
    for r in raw {
        let mut row = Vec::with_capacity(columns.len());
        for (s, col) in r.into_iter().zip(&columns) {
            let v = if is_missing_token(&s) {
                Value::Missing
            } else {
                match col.kind {
                    ColumnKind::Continuous => match s.trim().parse::<f64>() {
                        Ok(v) if v.is_finite() => Value::Number(v),
                        _ => {
                            return Err(Error::NotNumeric {
                                column: col.name.clone(),
                                value: s,
                            })
                        }
                    },
                    ColumnKind::Categorical => Value::Level(s.trim().to_string()),
                }
            };
            row.push(v);
        }
        rows.push(row);
    }
    Dataset::new(columns, rows, labels, label_column)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Dataset> {
        read_csv(text.as_bytes(), "dead", &HashMap::new())
    }

    #[test]
    fn infers_kinds() {
        let ds = parse("age,sex,dead\n50,M,0\n61,F,1\n47,F,0\n").unwrap();
        assert_eq!(ds.n_rows(), 3);
        assert_eq!(ds.columns()[0].kind, ColumnKind::Continuous);
        assert_eq!(ds.columns()[1].kind, ColumnKind::Categorical);
        assert_eq!(ds.labels(), &[Some(0), Some(1), Some(0)]);
        assert_eq!(ds.rows()[1][1], Value::Level("F".into()));
    }

    #[test]
    fn rejects_invalid_label() {
        let err = parse("age,dead\n50,2\n").unwrap_err();
        assert!(err.to_string().contains("invalid label"), "{err}");
    }

    #[test]
    fn empty_and_na_cells_are_missing() {
        let ds = parse("age,sex,dead\n,M,0\n61,na,\n").unwrap();
        assert!(ds.rows()[0][0].is_missing());
        assert!(ds.rows()[1][1].is_missing());
        assert_eq!(ds.labels()[1], None);
        assert_eq!(ds.columns()[0].kind, ColumnKind::Continuous);
    }

    #[test]
    fn missing_label_column() {
        assert!(matches!(
            parse("age,sex\n1,M\n"),
            Err(Error::MissingLabelColumn(_))
        ));
    }

    #[test]
    fn ragged_rows() {
        assert!(matches!(
            parse("age,sex,dead\n1,M\n"),
            Err(Error::RaggedRow { row: 0, .. })
        ));
    }

    #[test]
    fn quoted_fields_and_overrides() {
        let mut ov = HashMap::new();
        ov.insert("code".to_string(), ColumnKind::Categorical);
        let ds = read_csv(
            "code,\"city, state\",dead\n1,\"Austin, TX\",1\n2,Boston,0\n".as_bytes(),
            "dead",
            &ov,
        )
        .unwrap();
        assert_eq!(ds.columns()[0].kind, ColumnKind::Categorical);
        assert_eq!(ds.columns()[1].name, "city, state");
        assert_eq!(ds.rows()[0][1], Value::Level("Austin, TX".into()));
    }
}
