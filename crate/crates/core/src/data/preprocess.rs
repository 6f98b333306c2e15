use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::dataset::{ColumnKind, Dataset, Value};
use crate::error::{Error, Result};

/// Numeric design matrix with column names and binary labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub values: Array2<f64>,
    pub column_names: Vec<String>,
    pub labels: Vec<u8>,
}

impl DesignMatrix {
    pub fn new(values: Array2<f64>, column_names: Vec<String>, labels: Vec<u8>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::EmptyData);
        }
        if column_names.len() != values.ncols() || labels.len() != values.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix with {} names and {} labels",
                values.nrows(),
                values.ncols(),
                column_names.len(),
                labels.len()
            )));
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::InvalidArgument("labels must be 0 or 1".into()));
        }
        Ok(DesignMatrix {
            values,
            column_names,
            labels,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    /// Keeps only `columns`, in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> DesignMatrix {
        DesignMatrix {
            values: self.values.select(ndarray::Axis(1), columns),
            column_names: columns.iter().map(|&j| self.column_names[j].clone()).collect(),
            labels: self.labels.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "transform", rename_all = "snake_case")]
pub enum ColumnTransform {
    Continuous { median: f64, mean: f64, sd: f64 },
    Categorical { mode: String, levels: Vec<String> },
    Dropped { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedColumn {
    pub source: String,
    pub kind: ColumnKind,
    pub transform: ColumnTransform,
}

/// Imputation, one-hot and z-score statistics fitted on a training fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    columns: Vec<FittedColumn>,
    output_names: Vec<String>,
    /// Index into `columns` of the source of each output column.
    output_source: Vec<usize>,
    warnings: Vec<String>,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn cell_number(v: &Value) -> Option<f64> {
    match v {
        Value::Number(x) => Some(*x),
        Value::Level(s) => s.trim().parse().ok(),
        Value::Missing => None,
    }
}

fn cell_level(v: &Value) -> Option<String> {
    match v {
        Value::Level(s) => Some(s.clone()),
        Value::Number(x) => Some(x.to_string()),
        Value::Missing => None,
    }
}

pub fn fit_preprocessor(train: &Dataset) -> Result<Preprocessor> {
    if train.n_rows() == 0 {
        return Err(Error::EmptyData);
    }
    let mut columns = Vec::with_capacity(train.columns().len());
    let mut warnings = Vec::new();
    for (j, spec) in train.columns().iter().enumerate() {
        let cells = train.rows().iter().map(|r| &r[j]);
        let transform = match spec.kind {
            ColumnKind::Continuous => {
                let mut observed: Vec<f64> = cells.filter_map(cell_number).collect();
                if observed.is_empty() {
                    return Err(Error::EmptyColumn(spec.name.clone()));
                }
                let missing = train.n_rows() - observed.len();
                let med = median(&mut observed);
                // statistics of the imputed column, so the fitting fold standardizes exactly
                observed.extend(std::iter::repeat_n(med, missing));
                let (mean, sd) = mean_sd(&observed);
                if sd <= 1e-12 * (1.0 + mean.abs()) {
                    let msg = format!("column {:?} has zero variance and was dropped", spec.name);
                    tracing::warn!("{msg}");
                    warnings.push(msg);
                    ColumnTransform::Dropped {
                        reason: "zero variance".into(),
                    }
                } else {
                    ColumnTransform::Continuous {
                        median: med,
                        mean,
                        sd,
                    }
                }
            }
            ColumnKind::Categorical => {
                let mut counts: BTreeMap<String, usize> = BTreeMap::new();
                for level in cells.filter_map(cell_level) {
                    *counts.entry(level).or_default() += 1;
                }
                if counts.is_empty() {
                    let msg = format!("column {:?} has no observed levels and was dropped", spec.name);
                    tracing::warn!("{msg}");
                    warnings.push(msg);
                    ColumnTransform::Dropped {
                        reason: "no observed levels".into(),
                    }
                } else {
                    // ties go to the lexicographically smallest level
                    let mode = counts
                        .iter()
                        .fold(None::<(&String, usize)>, |best, (k, &c)| match best {
                            Some((_, bc)) if bc >= c => best,
                            _ => Some((k, c)),
                        })
                        .map(|(k, _)| k.clone())
                        .unwrap_or_default();
                    ColumnTransform::Categorical {
                        mode,
                        levels: counts.into_keys().collect(),
                    }
                }
            }
        };
        columns.push(FittedColumn {
            source: spec.name.clone(),
            kind: spec.kind,
            transform,
        });
    }

    let mut output_names = Vec::new();
    let mut output_source = Vec::new();
    for (c, col) in columns.iter().enumerate() {
        match &col.transform {
            ColumnTransform::Continuous { .. } => {
                output_names.push(col.source.clone());
                output_source.push(c);
            }
            ColumnTransform::Categorical { levels, .. } => {
                for level in levels {
                    output_names.push(format!("{}_{}", col.source, level));
                    output_source.push(c);
                }
            }
            ColumnTransform::Dropped { .. } => {}
        }
    }
    if output_names.is_empty() {
        return Err(Error::NoColumns);
    }
    Ok(Preprocessor {
        columns,
        output_names,
        output_source,
        warnings,
    })
}

impl Preprocessor {
    pub fn columns(&self) -> &[FittedColumn] {
        &self.columns
    }

    pub fn output_names(&self) -> &[String] {
        &self.output_names
    }

    /// Source column name of each output column.
    pub fn output_sources(&self) -> impl Iterator<Item = &str> + '_ {
        self.output_source
            .iter()
            .map(|&c| self.columns[c].source.as_str())
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn n_outputs(&self) -> usize {
        self.output_names.len()
    }
}

pub fn apply_preprocessor(prep: &Preprocessor, data: &Dataset) -> Result<DesignMatrix> {
    for spec in data.columns() {
        if !prep.columns.iter().any(|c| c.source == spec.name) {
            return Err(Error::UnknownColumn(spec.name.clone()));
        }
    }
    let mut source_idx = Vec::with_capacity(prep.columns.len());
    for col in &prep.columns {
        source_idx.push(
            data.column_index(&col.source)
                .ok_or_else(|| Error::MissingColumn(col.source.clone()))?,
        );
    }
    if prep.output_names.is_empty() {
        return Err(Error::NoColumns);
    }
    let n = data.n_rows();
    if n == 0 {
        return Err(Error::EmptyData);
    }
    let mut labels = Vec::with_capacity(n);
    for (i, l) in data.labels().iter().enumerate() {
        labels.push(l.ok_or(Error::MissingLabel(i))?);
    }

    let mut values = Array2::zeros((n, prep.output_names.len()));
    let mut out = 0;
    for (col, &src) in prep.columns.iter().zip(&source_idx) {
        match &col.transform {
            ColumnTransform::Continuous { median, mean, sd } => {
                for (i, row) in data.rows().iter().enumerate() {
                    let v = cell_number(&row[src]).unwrap_or(*median);
                    values[[i, out]] = (v - mean) / sd;
                }
                out += 1;
            }
            ColumnTransform::Categorical { mode, levels } => {
                for (i, row) in data.rows().iter().enumerate() {
                    let level = cell_level(&row[src]).unwrap_or_else(|| mode.clone());
                    // unseen levels leave every indicator at zero
                    if let Ok(k) = levels.binary_search(&level) {
                        values[[i, out + k]] = 1.0;
                    }
                }
                out += levels.len();
            }
            ColumnTransform::Dropped { .. } => {}
        }
    }
    DesignMatrix::new(values, prep.output_names.clone(), labels)
}

#[cfg(test)]
mod tests {
    use std::collections::HashMap;

    use super::*;
    use crate::data::dataset::read_csv;

    fn ds(text: &str) -> Dataset {
        read_csv(text.as_bytes(), "y", &HashMap::new()).unwrap()
    }

    #[test]
    fn median_ignores_missing() {
        let prep = fit_preprocessor(&ds("a,y\n1,0\n2,1\n,0\n3,1\n")).unwrap();
        match &prep.columns()[0].transform {
            ColumnTransform::Continuous { median, .. } => assert_eq!(*median, 2.0),
            t => panic!("unexpected {t:?}"),
        }
    }

    #[test]
    fn one_hot_expands_every_level() {
        let prep = fit_preprocessor(&ds("c,y\nA,0\nB,1\nC,0\nA,1\n")).unwrap();
        assert_eq!(prep.output_names(), &["c_A", "c_B", "c_C"]);
        match &prep.columns()[0].transform {
            ColumnTransform::Categorical { mode, .. } => assert_eq!(mode, "A"),
            t => panic!("unexpected {t:?}"),
        }
    }

    #[test]
    fn zero_variance_dropped_with_warning() {
        let prep = fit_preprocessor(&ds("a,b,y\n5,1,0\n5,2,1\n5,3,0\n")).unwrap();
        assert_eq!(prep.output_names(), &["b"]);
        assert_eq!(prep.warnings().len(), 1);
        assert!(matches!(
            prep.columns()[0].transform,
            ColumnTransform::Dropped { .. }
        ));
    }

    #[test]
    fn all_columns_dropped_is_an_error() {
        assert!(matches!(
            fit_preprocessor(&ds("a,y\n5,0\n5,1\n")),
            Err(Error::NoColumns)
        ));
    }

    #[test]
    fn train_fold_is_standardized() {
        let train = ds("a,b,c,y\n1,A,10,0\n2,B,,1\n,A,30,0\n4,C,40,1\n7,,50,1\n");
        let prep = fit_preprocessor(&train).unwrap();
        let x = apply_preprocessor(&prep, &train).unwrap();
        assert_eq!(x.n_cols(), 5);
        for (j, name) in x.column_names.iter().enumerate() {
            let col = x.values.column(j);
            assert!(col.iter().all(|v| v.is_finite()));
            if name == "a" || name == "c" {
                let (m, sd) = mean_sd(&col.to_vec());
                assert!(m.abs() < 1e-9 && (sd - 1.0).abs() < 1e-9, "{name}: {m} {sd}");
            }
        }
    }

    #[test]
    fn unseen_level_and_missing_use_train_stats() {
        let train = ds("age,c,y\n10,A,0\n20,B,1\n30,C,0\n");
        let prep = fit_preprocessor(&train).unwrap();
        let val = ds("age,c,y\n,D,1\n");
        let x = apply_preprocessor(&prep, &val).unwrap();
        // median 20 equals the mean, so the imputed age standardizes to zero
        assert_eq!(x.values.row(0).to_vec(), vec![0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn unknown_and_missing_columns() {
        let prep = fit_preprocessor(&ds("a,y\n1,0\n2,1\n")).unwrap();
        assert!(matches!(
            apply_preprocessor(&prep, &ds("a,q,y\n1,2,0\n")),
            Err(Error::UnknownColumn(c)) if c == "q"
        ));
        assert!(matches!(
            apply_preprocessor(&prep, &ds("q,y\n1,0\n")),
            Err(Error::UnknownColumn(_))
        ));
    }
}
