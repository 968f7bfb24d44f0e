//! Missing-aware tabular data.
//!
//! A [`NumericFrame`] stores real-valued columns where each cell is either a
//! finite value or missing (`None`). A [`CategoricalFrame`] stores exactly
//! three factor columns of level indices, again with missing cells. Both are
//! immutable once built; operations that "change" a frame return a new one.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An `n_rows × n_cols` table of real cells, each present or missing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericFrame {
    n_rows: usize,
    names: Vec<String>,
    columns: Vec<Vec<Option<f64>>>,
}

impl NumericFrame {
    /// Builds a frame from column vectors.
    ///
    /// Rejects empty frames, ragged columns, duplicate names and non-finite
    /// values.
    pub fn from_columns(names: Vec<String>, columns: Vec<Vec<Option<f64>>>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::Shape("frame needs at least one column".into()));
        }
        if names.len() != columns.len() {
            return Err(Error::Shape(format!(
                "{} names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        let mut seen = HashSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(Error::Shape(format!("duplicate column name {name:?}")));
            }
        }
        let n_rows = columns[0].len();
        if n_rows == 0 {
            return Err(Error::Shape("frame needs at least one row".into()));
        }
        for (c, col) in columns.iter().enumerate() {
            if col.len() != n_rows {
                return Err(Error::Shape(format!(
                    "column {c} has {} rows, expected {n_rows}",
                    col.len()
                )));
            }
            if let Some(row) = col.iter().position(|v| matches!(v, Some(x) if !x.is_finite())) {
                return Err(Error::NonFinite { row, col: c });
            }
        }
        Ok(NumericFrame {
            n_rows,
            names,
            columns,
        })
    }

    /// Builds a frame from rows, naming columns `x0, x1, ...`.
    pub fn from_rows(rows: &[Vec<Option<f64>>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        let columns = (0..n_cols)
            .map(|c| rows.iter().map(|r| r[c]).collect())
            .collect();
        Self::from_columns(default_names(n_cols), columns)
    }

    /// Builds a frame with no missing cells from a dense row-major slice.
    pub fn from_dense(n_rows: usize, n_cols: usize, values: &[f64]) -> Result<Self> {
        if values.len() != n_rows * n_cols {
            return Err(Error::Shape(format!(
                "{} values for a {n_rows}x{n_cols} frame",
                values.len()
            )));
        }
        let columns = (0..n_cols)
            .map(|c| (0..n_rows).map(|r| Some(values[r * n_cols + c])).collect())
            .collect();
        Self::from_columns(default_names(n_cols), columns)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, col: usize) -> &[Option<f64>] {
        &self.columns[col]
    }

    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.columns[col][row]
    }

    pub fn is_missing(&self, row: usize, col: usize) -> bool {
        self.columns[col][row].is_none()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn check_column(&self, col: usize) -> Result<()> {
        if col < self.n_cols() {
            Ok(())
        } else {
            Err(Error::InvalidColumn {
                index: col,
                n_cols: self.n_cols(),
            })
        }
    }

    pub fn missing_count(&self) -> usize {
        self.columns
            .iter()
            .map(|c| c.iter().filter(|v| v.is_none()).count())
            .sum()
    }

    pub fn has_missing(&self) -> bool {
        self.columns.iter().any(|c| c.iter().any(Option::is_none))
    }

    /// New frame containing the given columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<NumericFrame> {
        for &c in cols {
            self.check_column(c)?;
        }
        Self::from_columns(
            cols.iter().map(|&c| self.names[c].clone()).collect(),
            cols.iter().map(|&c| self.columns[c].clone()).collect(),
        )
    }

    /// New frame containing the given rows (repeats allowed), in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<NumericFrame> {
        if let Some(&r) = rows.iter().find(|&&r| r >= self.n_rows) {
            return Err(Error::Shape(format!("row {r} out of range")));
        }
        Self::from_columns(
            self.names.clone(),
            self.columns
                .iter()
                .map(|col| rows.iter().map(|&r| col[r]).collect())
                .collect(),
        )
    }

    /// New frame with `column` appended on the right.
    pub fn with_column(&self, name: &str, column: Vec<Option<f64>>) -> Result<NumericFrame> {
        let mut names = self.names.clone();
        names.push(name.to_string());
        let mut columns = self.columns.clone();
        columns.push(column);
        Self::from_columns(names, columns)
    }

    /// New frame where cells flagged by `mask(row, col)` are missing.
    pub fn masked(&self, mut mask: impl FnMut(usize, usize) -> bool) -> NumericFrame {
        let columns = self
            .columns
            .iter()
            .enumerate()
            .map(|(c, col)| {
                col.iter()
                    .enumerate()
                    .map(|(r, v)| if mask(r, c) { None } else { *v })
                    .collect()
            })
            .collect();
        NumericFrame {
            n_rows: self.n_rows,
            names: self.names.clone(),
            columns,
        }
    }

    pub fn row(&self, row: usize) -> Vec<Option<f64>> {
        self.columns.iter().map(|c| c[row]).collect()
    }
}

fn default_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("x{i}")).collect()
}

/// Rows of a frame that are intact on a column subset.
#[derive(Debug, Clone)]
pub struct CompleteRowView<'a> {
    source: &'a NumericFrame,
    cols: Vec<usize>,
    kept_rows: Vec<usize>,
}

impl<'a> CompleteRowView<'a> {
    pub fn source(&self) -> &'a NumericFrame {
        self.source
    }

    pub fn cols(&self) -> &[usize] {
        &self.cols
    }

    pub fn kept_rows(&self) -> &[usize] {
        &self.kept_rows
    }

    pub fn len(&self) -> usize {
        self.kept_rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kept_rows.is_empty()
    }

    /// Materializes the kept rows over all source columns.
    pub fn to_frame(&self) -> Result<NumericFrame> {
        self.source.select_rows(&self.kept_rows)
    }

    /// Materializes the kept rows restricted to the view's columns.
    pub fn to_subframe(&self) -> Result<NumericFrame> {
        self.source
            .select_columns(&self.cols)?
            .select_rows(&self.kept_rows)
    }
}

/// The complete-cases filter: rows with no missing cell among `cols`.
///
/// An empty result is not an error.
pub fn complete_rows<'a>(frame: &'a NumericFrame, cols: &[usize]) -> Result<CompleteRowView<'a>> {
    if cols.is_empty() {
        return Err(Error::Invalid("column subset is empty".into()));
    }
    for &c in cols {
        frame.check_column(c)?;
    }
    let kept_rows = (0..frame.n_rows())
        .filter(|&r| cols.iter().all(|&c| !frame.is_missing(r, c)))
        .collect();
    Ok(CompleteRowView {
        source: frame,
        cols: cols.to_vec(),
        kept_rows,
    })
}

/// Mean and count over the present cells of one column.
pub fn column_stats_available(frame: &NumericFrame, col: usize) -> Result<(f64, usize)> {
    frame.check_column(col)?;
    let (sum, count) = frame
        .column(col)
        .iter()
        .flatten()
        .fold((0.0, 0usize), |(s, n), &v| (s + v, n + 1));
    if count == 0 {
        return Err(Error::NoAvailable { col });
    }
    Ok((sum / count as f64, count))
}

/// Exactly three factor columns of level indices, each possibly missing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalFrame {
    n_rows: usize,
    names: [String; 3],
    levels: [usize; 3],
    level_names: [Vec<String>; 3],
    factors: [Vec<Option<usize>>; 3],
}

impl CategoricalFrame {
    pub fn new(levels: [usize; 3], factors: [Vec<Option<usize>>; 3]) -> Result<Self> {
        let level_names = levels.map(|l| (0..l).map(|i| i.to_string()).collect());
        Self::with_names(
            ["X".into(), "Y".into(), "Z".into()],
            level_names,
            factors,
        )
    }

    pub fn with_names(
        names: [String; 3],
        level_names: [Vec<String>; 3],
        factors: [Vec<Option<usize>>; 3],
    ) -> Result<Self> {
        let n_rows = factors[0].len();
        if factors.iter().any(|f| f.len() != n_rows) {
            return Err(Error::Shape("factor columns differ in length".into()));
        }
        let levels = [
            level_names[0].len(),
            level_names[1].len(),
            level_names[2].len(),
        ];
        for (f, col) in factors.iter().enumerate() {
            if levels[f] == 0 {
                return Err(Error::Shape(format!("factor {f} has no levels")));
            }
            if let Some((row, l)) = col
                .iter()
                .enumerate()
                .find_map(|(r, v)| v.filter(|&l| l >= levels[f]).map(|l| (r, l)))
            {
                return Err(Error::Shape(format!(
                    "level {l} out of range for factor {f} at row {row}"
                )));
            }
        }
        Ok(CategoricalFrame {
            n_rows,
            names,
            levels,
            level_names,
            factors,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn levels(&self) -> [usize; 3] {
        self.levels
    }

    pub fn names(&self) -> &[String; 3] {
        &self.names
    }

    pub fn level_names(&self) -> &[Vec<String>; 3] {
        &self.level_names
    }

    pub fn factor(&self, f: usize) -> &[Option<usize>] {
        &self.factors[f]
    }

    pub fn get(&self, row: usize, f: usize) -> Option<usize> {
        self.factors[f][row]
    }

    pub fn record(&self, row: usize) -> [Option<usize>; 3] {
        [
            self.factors[0][row],
            self.factors[1][row],
            self.factors[2][row],
        ]
    }

    /// New frame where cells flagged by `mask(row, factor)` are missing.
    pub fn masked(&self, mut mask: impl FnMut(usize, usize) -> bool) -> CategoricalFrame {
        let mut factors = self.factors.clone();
        for (f, col) in factors.iter_mut().enumerate() {
            for (r, v) in col.iter_mut().enumerate() {
                if mask(r, f) {
                    *v = None;
                }
            }
        }
        CategoricalFrame {
            factors,
            ..self.clone()
        }
    }

    /// New frame from a selection of rows (repeats allowed).
    pub fn select_rows(&self, rows: &[usize]) -> CategoricalFrame {
        let factors = [0, 1, 2].map(|f| rows.iter().map(|&r| self.factors[f][r]).collect());
        CategoricalFrame {
            n_rows: rows.len(),
            factors,
            ..self.clone()
        }
    }
}
