//! Dataset container, validation, and CSV IO.

use std::collections::BTreeSet;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Learning task for the label column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Regression,
    Classification,
}

/// A validated learning problem: features X (sensitive feature excluded),
/// binary sensitive vector s, labels y, and the explanatory column set
/// used for propensity and outcome models.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub s: Array1<f64>,
    pub y: Array1<f64>,
    pub explanatory_idx: Vec<usize>,
    pub task: Task,
    pub feature_names: Vec<String>,
    /// True when the last column of `x` is an appended all-ones intercept.
    pub has_intercept: bool,
}

/// Column mapping for [`load_csv`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnConfig {
    pub sensitive: String,
    pub label: String,
    pub explanatory: Vec<String>,
    pub task: Task,
    #[serde(default = "default_true")]
    pub intercept: bool,
}

fn default_true() -> bool {
    true
}

impl Dataset {
    /// Validates invariants and builds the dataset. `explanatory_idx` may be
    /// empty; propensity-based methods check for that themselves.
    pub fn new(
        x: Array2<f64>,
        s: Array1<f64>,
        y: Array1<f64>,
        explanatory_idx: Vec<usize>,
        task: Task,
        feature_names: Vec<String>,
        has_intercept: bool,
    ) -> Result<Self> {
        let n = x.nrows();
        let d = x.ncols();
        if n < 2 || d < 1 {
            return Err(Error::Validation(format!(
                "dataset needs N >= 2 and d >= 1, got N = {n}, d = {d}"
            )));
        }
        if s.len() != n || y.len() != n {
            return Err(Error::Validation(format!(
                "s and y must have length {n}, got {} and {}",
                s.len(),
                y.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("X contains non-finite values".into()));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("y contains non-finite values".into()));
        }
        if s.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::Validation("s must contain only 0 and 1".into()));
        }
        let plus = s.iter().filter(|&&v| v == 1.0).count();
        if plus == 0 || plus == n {
            return Err(Error::Validation(
                "sensitive column is one-sided: both groups must be nonempty".into(),
            ));
        }
        let unique: BTreeSet<usize> = explanatory_idx.iter().copied().collect();
        if unique.len() != explanatory_idx.len() {
            return Err(Error::Validation(
                "explanatory_idx contains duplicates".into(),
            ));
        }
        if explanatory_idx.iter().any(|&i| i >= d) {
            return Err(Error::Validation(format!(
                "explanatory index out of range for d = {d}"
            )));
        }
        if task == Task::Classification && y.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::Validation(
                "classification labels must be 0 or 1".into(),
            ));
        }
        if feature_names.len() != d {
            return Err(Error::Validation(format!(
                "expected {d} feature names, got {}",
                feature_names.len()
            )));
        }
        Ok(Dataset {
            x,
            s,
            y,
            explanatory_idx,
            task,
            feature_names,
            has_intercept,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    /// Explanatory feature submatrix X_e, columns in `explanatory_idx` order.
    pub fn x_explanatory(&self) -> Array2<f64> {
        let n = self.n();
        let mut xe = Array2::zeros((n, self.explanatory_idx.len()));
        for (j, &col) in self.explanatory_idx.iter().enumerate() {
            xe.column_mut(j).assign(&self.x.column(col));
        }
        xe
    }
}

/// Index sets I+ = {i : s_i = 1} and I- = {i : s_i = 0}.
pub fn index_sets(s: &Array1<f64>) -> (Vec<usize>, Vec<usize>) {
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    for (i, &v) in s.iter().enumerate() {
        if v == 1.0 {
            plus.push(i);
        } else {
            minus.push(i);
        }
    }
    (plus, minus)
}

/// Loads a headered CSV into a [`Dataset`] using the column mapping in
/// `config`. Feature columns keep their CSV order with the sensitive and
/// label columns removed; an all-ones intercept column is appended last
/// unless `config.intercept` is false.
pub fn load_csv(path: &Path, config: &ColumnConfig) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;

    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Config(format!("cannot read header: {e}")))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("column '{name}' not found in header")))
    };
    let s_col = find(&config.sensitive)?;
    let y_col = find(&config.label)?;
    if s_col == y_col {
        return Err(Error::Config(
            "sensitive and label columns must differ".into(),
        ));
    }

    // Feature columns: CSV order minus the sensitive and label columns.
    let feature_cols: Vec<usize> = (0..headers.len())
        .filter(|&c| c != s_col && c != y_col)
        .collect();
    let mut feature_names: Vec<String> = feature_cols.iter().map(|&c| headers[c].clone()).collect();

    let mut explanatory_idx = Vec::with_capacity(config.explanatory.len());
    for name in &config.explanatory {
        let pos = feature_names
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("explanatory column '{name}' not found")))?;
        explanatory_idx.push(pos);
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut s_vals: Vec<f64> = Vec::new();
    let mut y_vals: Vec<f64> = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            row: row_idx + 1,
            col: 0,
            msg: format!("malformed record: {e}"),
        })?;
        if record.len() != headers.len() {
            return Err(Error::Parse {
                row: row_idx + 1,
                col: 0,
                msg: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        let parse_cell = |col: usize| -> Result<f64> {
            let raw = record.get(col).unwrap_or("").trim();
            raw.parse::<f64>().map_err(|_| Error::Parse {
                row: row_idx + 1,
                col: col + 1,
                msg: format!("cannot parse '{raw}' as a number"),
            })
        };
        let s_raw = parse_cell(s_col)?;
        if s_raw != 0.0 && s_raw != 1.0 {
            return Err(Error::Parse {
                row: row_idx + 1,
                col: s_col + 1,
                msg: format!("sensitive value must be 0 or 1, got {s_raw}"),
            });
        }
        s_vals.push(s_raw);
        y_vals.push(parse_cell(y_col)?);
        let mut row = Vec::with_capacity(feature_cols.len());
        for &c in &feature_cols {
            row.push(parse_cell(c)?);
        }
        rows.push(row);
    }

    let n = rows.len();
    if n == 0 {
        return Err(Error::Validation("CSV contains no data rows".into()));
    }
    let mut d = feature_cols.len();
    if config.intercept {
        d += 1;
        feature_names.push("intercept".to_string());
    }
    let mut x = Array2::zeros((n, d));
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            x[[i, j]] = v;
        }
        if config.intercept {
            x[[i, d - 1]] = 1.0;
        }
    }

    Dataset::new(
        x,
        Array1::from(s_vals),
        Array1::from(y_vals),
        explanatory_idx,
        config.task,
        feature_names,
        config.intercept,
    )
}

/// Writes the dataset back to CSV with the same column convention used by
/// [`load_csv`]: feature columns (intercept excluded), then sensitive and
/// label columns named `s` and `y`. Reals carry 17 significant digits so a
/// reload reproduces every bit.
pub fn save_csv(path: &Path, dataset: &Dataset) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .map_err(|e| Error::Config(format!("cannot create {}: {e}", path.display())))?;
    let d_out = if dataset.has_intercept {
        dataset.d() - 1
    } else {
        dataset.d()
    };
    let mut header: Vec<String> = dataset.feature_names[..d_out].to_vec();
    header.push("s".to_string());
    header.push("y".to_string());
    writer
        .write_record(&header)
        .map_err(|e| Error::Config(format!("csv write failed: {e}")))?;
    for i in 0..dataset.n() {
        let mut record: Vec<String> = Vec::with_capacity(d_out + 2);
        for j in 0..d_out {
            record.push(format!("{:.16e}", dataset.x[[i, j]]));
        }
        record.push(format!("{}", dataset.s[i] as i64));
        record.push(format!("{:.16e}", dataset.y[i]));
        writer
            .write_record(&record)
            .map_err(|e| Error::Config(format!("csv write failed: {e}")))?;
    }
    writer
        .flush()
        .map_err(|e| Error::Config(format!("csv flush failed: {e}")))?;
    Ok(())
}
