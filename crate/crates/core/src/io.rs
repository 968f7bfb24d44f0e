//! Delimited-text input and output.
//!
//! Lines are split on `\n` (a trailing `\r` is dropped); a final newline does
//! not start an extra record, but any other blank line is a record with one
//! empty field. Fields may be wrapped in double quotes, with `""` for a
//! literal quote; quoted fields cannot span lines. Surrounding whitespace is
//! stripped from every field before it is compared against the missing-value
//! tokens or parsed.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{CategoricalFrame, NumericFrame};
use crate::error::{Error, Result};
use crate::loglinear::Table3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvDialect {
    pub delimiter: char,
    pub na_tokens: Vec<String>,
    pub header: bool,
}

impl Default for CsvDialect {
    fn default() -> Self {
        CsvDialect {
            delimiter: ',',
            na_tokens: vec!["NA".into(), String::new()],
            header: true,
        }
    }
}

impl CsvDialect {
    fn is_na(&self, field: &str) -> bool {
        self.na_tokens.iter().any(|t| t == field)
    }
}

struct Parsed {
    names: Vec<String>,
    /// (1-based line number, fields)
    rows: Vec<(usize, Vec<String>)>,
}

fn split_line(line: &str, delim: char, line_no: usize) -> Result<Vec<String>> {
    let mut fields = Vec::new();
    let mut cur = String::new();
    let mut chars = line.chars().peekable();
    let mut in_quotes = false;
    while let Some(c) = chars.next() {
        if in_quotes {
            if c == '"' {
                if chars.peek() == Some(&'"') {
                    cur.push('"');
                    chars.next();
                } else {
                    in_quotes = false;
                }
            } else {
                cur.push(c);
            }
        } else if c == '"' && cur.trim().is_empty() {
            cur.clear();
            in_quotes = true;
        } else if c == delim {
            fields.push(std::mem::take(&mut cur).trim().to_string());
        } else {
            cur.push(c);
        }
    }
    if in_quotes {
        return Err(Error::Parse {
            line: line_no,
            field: fields.len() + 1,
            message: "unterminated quote".into(),
        });
    }
    fields.push(cur.trim().to_string());
    Ok(fields)
}

fn parse_rows(text: &str, dialect: &CsvDialect) -> Result<Parsed> {
    let mut lines: Vec<&str> = text.split('\n').map(|l| l.strip_suffix('\r').unwrap_or(l)).collect();
    if lines.last() == Some(&"") {
        lines.pop();
    }
    if lines.is_empty() {
        return Err(Error::Parse {
            line: 1,
            field: 1,
            message: "empty file".into(),
        });
    }
    let mut rows = Vec::with_capacity(lines.len());
    for (i, l) in lines.iter().enumerate() {
        rows.push((i + 1, split_line(l, dialect.delimiter, i + 1)?));
    }
    let names = if dialect.header {
        rows.remove(0).1
    } else {
        (0..rows[0].1.len()).map(|c| format!("x{c}")).collect()
    };
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 2,
            field: 1,
            message: "no data rows".into(),
        });
    }
    let width = names.len();
    for (line, fields) in &rows {
        if fields.len() != width {
            return Err(Error::Parse {
                line: *line,
                field: fields.len().min(width) + 1,
                message: format!("expected {width} fields, found {}", fields.len()),
            });
        }
    }
    Ok(Parsed { names, rows })
}

/// Parses numeric CSV text; missing-value tokens become missing cells.
pub fn parse_numeric(text: &str, dialect: &CsvDialect) -> Result<NumericFrame> {
    let parsed = parse_rows(text, dialect)?;
    let mut columns = vec![Vec::with_capacity(parsed.rows.len()); parsed.names.len()];
    for (line, fields) in &parsed.rows {
        for (c, f) in fields.iter().enumerate() {
            let cell = if dialect.is_na(f) {
                None
            } else {
                let v: f64 = f.parse().map_err(|_| Error::Parse {
                    line: *line,
                    field: c + 1,
                    message: format!("not a number: {f:?}"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        line: *line,
                        field: c + 1,
                        message: format!("non-finite value {f:?}"),
                    });
                }
                Some(v)
            };
            columns[c].push(cell);
        }
    }
    NumericFrame::from_columns(parsed.names, columns)
}

/// Interns strings as level indices in order of first appearance.
#[derive(Default)]
struct Levels {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

impl Levels {
    fn intern(&mut self, s: &str) -> usize {
        if let Some(&i) = self.index.get(s) {
            return i;
        }
        let i = self.names.len();
        self.names.push(s.to_string());
        self.index.insert(s.to_string(), i);
        i
    }
}

fn take_three(names: &[String], skip: Option<usize>) -> Result<[usize; 3]> {
    let cols: Vec<usize> = (0..names.len()).filter(|&c| Some(c) != skip).collect();
    cols.try_into()
        .map_err(|cols: Vec<usize>| Error::Shape(format!("expected 3 factor columns, found {}", cols.len())))
}

/// Parses a three-column file of factor levels, one record per row.
pub fn parse_categorical(text: &str, dialect: &CsvDialect) -> Result<CategoricalFrame> {
    let parsed = parse_rows(text, dialect)?;
    let cols = take_three(&parsed.names, None)?;
    let mut levels: [Levels; 3] = Default::default();
    let mut factors: [Vec<Option<usize>>; 3] = Default::default();
    for (_, fields) in &parsed.rows {
        for (f, &c) in cols.iter().enumerate() {
            let v = &fields[c];
            factors[f].push(if dialect.is_na(v) { None } else { Some(levels[f].intern(v)) });
        }
    }
    let names = cols.map(|c| parsed.names[c].clone());
    let [a, b, c] = levels;
    CategoricalFrame::with_names(names, [a.names, b.names, c.names], factors)
}

/// Parses a cell-count file: three factor columns plus `count_col`.
pub fn parse_count_table(text: &str, dialect: &CsvDialect, count_col: &str) -> Result<Table3> {
    let parsed = parse_rows(text, dialect)?;
    let cc = parsed
        .names
        .iter()
        .position(|n| n == count_col)
        .ok_or_else(|| Error::UnknownColumn(count_col.to_string()))?;
    let cols = take_three(&parsed.names, Some(cc))?;
    let mut levels: [Levels; 3] = Default::default();
    let mut cells = Vec::with_capacity(parsed.rows.len());
    for (line, fields) in &parsed.rows {
        let mut cell = [0usize; 3];
        for (f, &c) in cols.iter().enumerate() {
            if dialect.is_na(&fields[c]) {
                return Err(Error::Parse {
                    line: *line,
                    field: c + 1,
                    message: "missing factor level in a count table".into(),
                });
            }
            cell[f] = levels[f].intern(&fields[c]);
        }
        let count: f64 = fields[cc].parse().map_err(|_| Error::Parse {
            line: *line,
            field: cc + 1,
            message: format!("not a count: {:?}", fields[cc]),
        })?;
        cells.push((cell, count));
    }
    let [a, b, c] = levels;
    let level_names = [a.names, b.names, c.names];
    let dims = [level_names[0].len(), level_names[1].len(), level_names[2].len()];
    let mut counts = vec![0.0; dims.iter().product()];
    for (cell, v) in cells {
        counts[(cell[0] * dims[1] + cell[1]) * dims[2] + cell[2]] += v;
    }
    Table3::with_names(cols.map(|c| parsed.names[c].clone()), level_names, counts)
}

fn quote(field: &str, delim: char) -> String {
    if field.contains(delim) || field.contains('"') || field != field.trim() {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Writes a frame; missing cells use the first missing-value token.
pub fn write_numeric(frame: &NumericFrame, dialect: &CsvDialect) -> String {
    let na = dialect.na_tokens.first().map(String::as_str).unwrap_or("NA");
    let d = dialect.delimiter.to_string();
    let mut out = String::new();
    if dialect.header {
        let names: Vec<String> = frame.names().iter().map(|n| quote(n, dialect.delimiter)).collect();
        out.push_str(&names.join(&d));
        out.push('\n');
    }
    for r in 0..frame.n_rows() {
        let row: Vec<String> = frame
            .row(r)
            .iter()
            .map(|v| v.map_or_else(|| na.to_string(), |x| format!("{x:?}")))
            .collect();
        out.push_str(&row.join(&d));
        out.push('\n');
    }
    out
}

pub fn read_numeric_csv(path: impl AsRef<Path>, dialect: &CsvDialect) -> Result<NumericFrame> {
    parse_numeric(&std::fs::read_to_string(path)?, dialect)
}

pub fn read_categorical_csv(path: impl AsRef<Path>, dialect: &CsvDialect) -> Result<CategoricalFrame> {
    parse_categorical(&std::fs::read_to_string(path)?, dialect)
}

pub fn read_count_table(path: impl AsRef<Path>, dialect: &CsvDialect, count_col: &str) -> Result<Table3> {
    parse_count_table(&std::fs::read_to_string(path)?, dialect, count_col)
}

const PIMA_CSV: &str = include_str!("../data/pima.csv");
const UCB_CSV: &str = include_str!("../data/ucb_admissions.csv");

/// Pima Indians diabetes data, 768 rows × 9 columns.
///
/// Columns: `npreg, glucose, bp, skin, insulin, bmi, ped, age, diabetes`.
/// Zeros are kept as recorded.
pub fn pima() -> NumericFrame {
    parse_numeric(PIMA_CSV, &CsvDialect::default()).expect("bundled fixture parses")
}

/// UCB admissions counts as shipped in `data/ucb_admissions.csv`.
pub fn ucb_admissions_csv() -> Table3 {
    parse_count_table(UCB_CSV, &CsvDialect::default(), "Freq").expect("bundled fixture parses")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn na_token_and_shape() {
        let f = parse_numeric("a,b\n1,2\n3,NA\n", &CsvDialect::default()).unwrap();
        assert_eq!((f.n_rows(), f.n_cols()), (2, 2));
        assert_eq!(f.get(1, 1), None);
        assert_eq!(f.get(1, 0), Some(3.0));
    }

    #[test]
    fn blank_body_line_is_missing() {
        let f = parse_numeric("a\n\n", &CsvDialect::default()).unwrap();
        assert_eq!(f.n_rows(), 1);
        assert_eq!(f.get(0, 0), None);
    }

    #[test]
    fn scientific_notation() {
        let f = parse_numeric("a\n1.5e3\n", &CsvDialect::default()).unwrap();
        assert_eq!(f.get(0, 0), Some(1500.0));
    }

    #[test]
    fn whitespace_stripped_before_matching() {
        let f = parse_numeric("a,b\r\n 1 , NA \r\n", &CsvDialect::default()).unwrap();
        assert_eq!(f.row(0), vec![Some(1.0), None]);
    }

    #[test]
    fn errors_carry_location() {
        let d = CsvDialect::default();
        assert!(matches!(parse_numeric("", &d), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_numeric("a,b\n1\n", &d), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(
            parse_numeric("a,b\n1,2\n3,x\n", &d),
            Err(Error::Parse { line: 3, field: 2, .. })
        ));
        assert!(matches!(parse_numeric("a\ninf\n", &d), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_numeric("a\n", &d), Err(Error::Parse { .. })));
    }

    #[test]
    fn custom_dialect() {
        let d = CsvDialect { delimiter: ';', na_tokens: vec!["?".into()], header: false };
        let f = parse_numeric("1;?\n2;3\n", &d).unwrap();
        assert_eq!(f.names(), &["x0".to_string(), "x1".to_string()]);
        assert_eq!(f.get(0, 1), None);
        assert!(parse_numeric("1;\n", &d).is_err());
    }

    #[test]
    fn quoted_fields() {
        let f = parse_numeric("\"a,1\",\"b\"\"\"\n1,2\n", &CsvDialect::default()).unwrap();
        assert_eq!(f.names(), &["a,1".to_string(), "b\"".to_string()]);
        let back = parse_numeric(&write_numeric(&f, &CsvDialect::default()), &CsvDialect::default()).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn categorical_levels_in_order_of_appearance() {
        let f = parse_categorical("x,y,z\nb,u,NA\na,v,p\nb,NA,q\n", &CsvDialect::default()).unwrap();
        assert_eq!(f.levels(), [2, 2, 2]);
        assert_eq!(f.level_names()[0], vec!["b".to_string(), "a".to_string()]);
        assert_eq!(f.record(0), [Some(0), Some(0), None]);
        assert_eq!(f.record(2), [Some(0), None, Some(1)]);
        assert!(parse_categorical("x,y\na,b\n", &CsvDialect::default()).is_err());
    }

    #[test]
    fn fixtures() {
        let p = pima();
        assert_eq!((p.n_rows(), p.n_cols()), (768, 9));
        assert!(!p.has_missing());
        assert_eq!(p.column_index("bp").unwrap(), 2);
        let t = ucb_admissions_csv();
        assert_eq!(t, crate::loglinear::ucb_admissions());
    }
}
